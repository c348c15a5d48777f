"""Type representation and memory layout.

Layout model (LP64 host): int 4/4, char 1/1, pointers and code-segment
pointers 8/8.  Struct fields are laid out in declaration order at their
natural alignment; struct size is rounded up to the largest field
alignment.  Argument frame slots are this size rounded up to the 8-byte
word, so every slot starts word-aligned in the shared argument frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

WORD = 8


@dataclass(frozen=True)
class TypeRepr:
    kind: str  # 'int' 'char' 'void' 'ptr' 'array' 'struct' 'func' 'seg'
    inner: Optional["TypeRepr"] = None       # ptr/array element
    count: Optional[int] = None              # array length
    tag: Optional[str] = None                # struct tag
    params: Optional[tuple["TypeRepr", ...]] = None  # func/seg; None=unspecified
    ret: Optional["TypeRepr"] = None         # func return
    varargs: bool = False

    def __str__(self):
        if self.kind == 'ptr':
            return f"{self.inner}*"
        if self.kind == 'array':
            return f"{self.inner}[{self.count if self.count is not None else ''}]"
        if self.kind == 'struct':
            return f"struct {self.tag}"
        if self.kind == 'seg':
            ps = '...' if self.params is None else ', '.join(map(str, self.params))
            return f"__code({ps})"
        if self.kind == 'func':
            ps = '...' if self.params is None else ', '.join(map(str, self.params))
            return f"{self.ret}({ps})"
        return self.kind


INT = TypeRepr('int')
CHAR = TypeRepr('char')
VOID = TypeRepr('void')


def ptr(inner: TypeRepr) -> TypeRepr:
    return TypeRepr('ptr', inner=inner)


def array(inner: TypeRepr, count: Optional[int]) -> TypeRepr:
    return TypeRepr('array', inner=inner, count=count)


def struct(tag: str) -> TypeRepr:
    return TypeRepr('struct', tag=tag)


def seg(params: Optional[tuple[TypeRepr, ...]]) -> TypeRepr:
    return TypeRepr('seg', params=params)


def func(ret: TypeRepr, params: Optional[tuple[TypeRepr, ...]],
         varargs: bool = False) -> TypeRepr:
    return TypeRepr('func', ret=ret, params=params, varargs=varargs)


def is_integer(t: TypeRepr) -> bool:
    return t.kind in ('int', 'char')


def is_pointer(t: TypeRepr) -> bool:
    return t.kind == 'ptr'


def is_seg_pointer(t: TypeRepr) -> bool:
    return t.kind == 'ptr' and t.inner.kind == 'seg'


def decay(t: TypeRepr) -> TypeRepr:
    """Array-to-pointer decay for value contexts."""
    if t.kind == 'array':
        return ptr(t.inner)
    return t


@dataclass
class StructInfo:
    tag: str
    fields: list[tuple[str, TypeRepr]]
    offsets: dict[str, int]
    size: int
    align: int
    complete: bool


class LayoutError(Exception):
    pass


class TypeTable:
    """Struct layouts and typedef aliases for one translation unit."""

    def __init__(self):
        self.structs: dict[str, StructInfo] = {}
        self.typedefs: dict[str, TypeRepr] = {}

    def declare_struct(self, tag: str):
        self.structs.setdefault(
            tag, StructInfo(tag, [], {}, 0, 1, complete=False))

    def define_struct(self, tag: str, fields: list[tuple[str, TypeRepr]]):
        self.declare_struct(tag)
        info = self.structs[tag]
        offsets: dict[str, int] = {}
        off = 0
        align = 1
        for name, fty in fields:
            a = self.align_of(fty)
            s = self.size_of(fty)
            off = _round_up(off, a)
            offsets[name] = off
            off += s
            align = max(align, a)
        info.fields = fields
        info.offsets = offsets
        info.align = align
        info.size = _round_up(off, align) if fields else 0
        info.complete = True

    def struct_info(self, tag: str) -> StructInfo:
        info = self.structs.get(tag)
        if info is None or not info.complete:
            raise LayoutError(f"struct {tag} is incomplete")
        return info

    def size_of(self, t: TypeRepr) -> int:
        if t.kind == 'int':
            return 4
        if t.kind == 'char':
            return 1
        if t.kind == 'ptr':
            return 8
        if t.kind == 'array':
            if t.count is None:
                raise LayoutError("array of unknown length has no size")
            return t.count * self.size_of(t.inner)
        if t.kind == 'struct':
            return self.struct_info(t.tag).size
        raise LayoutError(f"type {t} has no size")

    def align_of(self, t: TypeRepr) -> int:
        if t.kind in ('int',):
            return 4
        if t.kind == 'char':
            return 1
        if t.kind == 'ptr':
            return 8
        if t.kind == 'array':
            return self.align_of(t.inner)
        if t.kind == 'struct':
            return self.struct_info(t.tag).align
        raise LayoutError(f"type {t} has no alignment")

    def slot_width(self, t: TypeRepr) -> int:
        """Width of one argument-frame slot: size rounded to the word."""
        return max(WORD, _round_up(self.size_of(decay(t)), WORD))

    def frame_layout(self, param_types: list[TypeRepr]) -> tuple[list[int], int]:
        """Word-aligned offsets for a parameter list plus total frame bytes."""
        offsets = []
        off = 0
        for t in param_types:
            offsets.append(off)
            off += self.slot_width(t)
        return offsets, off


def _round_up(n: int, align: int) -> int:
    return (n + align - 1) // align * align
