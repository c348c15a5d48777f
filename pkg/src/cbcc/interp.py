"""Reference evaluator for typed units.

Two entry points: ``run_function`` evaluates a plain C function the ordinary
recursive way and is the ground truth that segment conversions are measured
against; ``run_unit`` boots a byte-addressed machine that executes code
segments through the same shared-frame discipline as compiled output —
parameter slots, copy plans, one-shot environments — so converted programs
can be exercised without a C compiler in the loop.

The machine mirrors the runtime's memory picture: one flat region holding
the argument frame, then the open stack area growing downward from
``stack_top``.  Globals and string literals live above the measured region
so the high-water mark reflects continuation stack use only.
"""

from __future__ import annotations

import struct as _struct
from dataclasses import dataclass, field

from . import ast
from .types import TypeRepr, INT, CHAR, VOID, decay, ptr, seg
from .sema import SemaResult, BUILTINS
from .lower import LoweredUnit, FIRST_USER_INDEX
from .paracopy import WORD

SEG_ENVRET = 0
SEG_HALT = 1

_POISON = 16    # keep address 0 unmapped so null stays distinguishable


class TrapError(RuntimeError):
    """Raised where compiled output would call cbc_rt_trap."""


class MachineLimit(RuntimeError):
    pass


class InterpError(RuntimeError):
    pass


@dataclass
class RunResult:
    status: int
    stdout: str
    highwater: int
    steps: int


@dataclass
class _EnvRecord:
    alive: bool = True


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Transfer(Exception):
    def __init__(self, seg_id):
        self.seg_id = seg_id


class _EnvResume(Exception):
    def __init__(self, rec, status):
        self.rec = rec
        self.status = status


def _wrap32(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - 0x100000000 if v >= 0x80000000 else v


def _wrap8(v: int) -> int:
    v &= 0xFF
    return v - 0x100 if v >= 0x80 else v


def _c_div(a: int, b: int) -> int:
    if b == 0:
        raise TrapError("division by zero")
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def _c_mod(a: int, b: int) -> int:
    return a - _c_div(a, b) * b


class Machine:
    def __init__(self, res: SemaResult, lu: LoweredUnit | None = None,
                 stack_size: int = 65536, max_steps: int = 50_000_000):
        self.res = res
        self.lu = lu
        self.table = res.table
        self.max_steps = max_steps
        self.steps = 0
        self.out: list[str] = []

        self.frame_base = _POISON
        mf = lu.max_frame if lu else 0
        self.stack_limit = self.frame_base + mf
        self.stack_top = self.stack_limit + stack_size
        self.min_stack = self.stack_top     # lowest stack byte written

        self.fn_defs = {d.name: d for d in res.unit.decls
                        if isinstance(d, ast.FunctionDef) and d.body}
        self.seg_by_id: dict[int, ast.CodeSegmentDef] = {}
        self.seg_id: dict[str, int] = {}
        if lu:
            for s in lu.segments:
                self.seg_by_id[s.index] = s.decl
                self.seg_id[s.name] = s.index

        # globals, then the string pool, sit above stack_top
        self.globals: dict[str, tuple[int, TypeRepr]] = {}
        top = self.stack_top
        for name in res.global_order:
            ty = res.globals[name]
            top = _round_up(top, self.table.align_of(ty))
            self.globals[name] = (top, ty)
            top += self.table.size_of(ty)
        self.str_alloc = top
        self.strings: dict[str, int] = {}
        self.mem = bytearray(top + 4096)

        self.env_handles: dict[int, _EnvRecord] = {}
        self.next_env = 1
        self.pending_env: _EnvRecord | None = None

        for decl in res.unit.decls:
            if isinstance(decl, ast.VarDecl) and decl.init is not None:
                addr, ty = self.globals[decl.name]
                self.store(addr, self.eval(decl.init, _Scope(self, None)), ty)

    # ------------------------------------------------------------- memory

    def load(self, addr: int, ty: TypeRepr):
        size = self.table.size_of(ty)
        if addr < _POISON or addr + size > len(self.mem):
            raise TrapError("cbc: stack overflow")
        raw = bytes(self.mem[addr:addr + size])
        if ty.kind == 'struct':
            return raw
        return self._unpack(raw, ty)

    def store(self, addr: int, value, ty: TypeRepr):
        size = self.table.size_of(ty)
        if addr < _POISON or addr + size > len(self.mem):
            raise TrapError("cbc: stack overflow")
        if self.stack_limit <= addr < self.stack_top:
            self.min_stack = min(self.min_stack, addr)
        self.mem[addr:addr + size] = self._pack(value, ty)

    def _unpack(self, raw: bytes, ty: TypeRepr):
        if ty.kind == 'int':
            return _struct.unpack('<i', raw)[0]
        if ty.kind == 'char':
            return _struct.unpack('<b', raw)[0]
        if ty.kind in ('ptr', 'seg'):
            return _struct.unpack('<q', raw)[0]
        raise InterpError(f"cannot load {ty}")

    def _pack(self, value, ty: TypeRepr) -> bytes:
        if ty.kind == 'struct':
            size = self.table.size_of(ty)
            raw = bytes(value)
            return raw[:size].ljust(size, b'\0')
        if ty.kind == 'int':
            return _struct.pack('<i', _wrap32(value))
        if ty.kind == 'char':
            return _struct.pack('<b', _wrap8(value))
        if ty.kind in ('ptr', 'seg'):
            return _struct.pack('<q', value)
        raise InterpError(f"cannot store {ty}")

    def intern(self, text: str) -> int:
        addr = self.strings.get(text)
        if addr is None:
            raw = text.encode() + b'\0'
            addr = self.str_alloc
            self.str_alloc += len(raw)
            if self.str_alloc > len(self.mem):
                self.mem.extend(b'\0' * (self.str_alloc - len(self.mem) + 4096))
            self.mem[addr:addr + len(raw)] = raw
            self.strings[text] = addr
        return addr

    def cstr(self, addr: int) -> str:
        end = self.mem.index(b'\0', addr)
        return self.mem[addr:end].decode()

    @property
    def highwater(self) -> int:
        return self.stack_top - self.min_stack

    # ------------------------------------------------------------ running

    def call_function(self, name: str, args: list) -> object:
        decl = self.fn_defs.get(name)
        if decl is None:
            raise InterpError(f"no function {name}")
        sig = self.res.functions[name]
        scope = _Scope(self, decl)
        for (pname, pty), a in zip(sig.params or [], args):
            scope.declare(pname, pty, a)
        rec = None
        if name in self.res.captures:
            rec = _EnvRecord()
            handle = self.next_env
            self.next_env += 1
            self.env_handles[handle] = rec
            scope.env_handle = handle
        try:
            self.exec_block(decl.body, scope)
        except _Return as r:
            if rec is not None:
                rec.alive = False
            return r.value
        except _EnvResume as r:
            if rec is not None and r.rec is rec:
                return r.status
            raise
        return 0 if name == 'main' else None

    def drive(self, seg_id: int):
        """The trampoline: run segments until an environment resume."""
        while True:
            if seg_id == SEG_ENVRET:
                rec = self.pending_env
                self.pending_env = None
                if rec is None or not rec.alive:
                    raise TrapError("cbc: dead environment")
                rec.alive = False
                status = self.load(self.frame_base, INT)
                raise _EnvResume(rec, status)
            if seg_id == SEG_HALT:
                raise TrapError("cbc: bad segment id")
            decl = self.seg_by_id.get(seg_id)
            if decl is None:
                raise TrapError("cbc: bad segment id")
            self.steps += 1
            if self.steps > self.max_steps:
                raise MachineLimit(f"exceeded {self.max_steps} transfers")
            scope = _Scope(self, decl)
            try:
                self.exec_block(decl.body, scope)
                raise InterpError(f"segment {decl.name} fell through")
            except _Transfer as t:
                seg_id = t.seg_id

    # ------------------------------------------------------- statements

    def exec_block(self, block: ast.Block, scope: "_Scope"):
        scope.push()
        try:
            for s in block.stmts:
                self.exec_stmt(s, scope)
        finally:
            scope.pop()

    def exec_stmt(self, s, scope: "_Scope"):
        if isinstance(s, ast.Block):
            self.exec_block(s, scope)
        elif isinstance(s, ast.EmptyStmt):
            pass
        elif isinstance(s, ast.VarDecl):
            ty = self.res.decl_types[id(s)]
            init = self.eval(s.init, scope) if s.init is not None else None
            scope.declare(s.name, ty, init)
        elif isinstance(s, ast.ExprStmt):
            self.eval(s.expr, scope)
        elif isinstance(s, ast.IfStmt):
            if self.eval(s.cond, scope):
                self.exec_stmt(s.then, scope)
            elif s.orelse is not None:
                self.exec_stmt(s.orelse, scope)
        elif isinstance(s, ast.WhileStmt):
            while self.eval(s.cond, scope):
                self.exec_stmt(s.body, scope)
        elif isinstance(s, ast.ForStmt):
            if s.init is not None:
                self.eval(s.init, scope)
            while s.cond is None or self.eval(s.cond, scope):
                self.exec_stmt(s.body, scope)
                if s.step is not None:
                    self.eval(s.step, scope)
        elif isinstance(s, ast.ReturnStmt):
            raise _Return(self.eval(s.value, scope)
                          if s.value is not None else None)
        elif isinstance(s, (ast.GotoDirect, ast.GotoIndirect, ast.GotoWithEnv)):
            self.exec_goto(s, scope)
        else:
            raise InterpError(f"cannot execute {type(s).__name__}")

    def exec_goto(self, s, scope: "_Scope"):
        if self.lu is None:
            raise InterpError("goto outside a lowered unit")
        gp = self.lu.goto_plans[id(s)]

        if isinstance(s, ast.GotoDirect):
            target = self.seg_id.get(s.target)
            if target is None:
                raise TrapError("cbc: bad segment id")
        else:
            target = self.eval(s.target, scope)
        env_rec = None
        if isinstance(s, ast.GotoWithEnv):
            handle = self.eval(s.env, scope)
            env_rec = self.env_handles.get(handle)
            if env_rec is None or not env_rec.alive:
                raise TrapError("cbc: dead environment")

        self._run_plan(s, gp, scope)

        if env_rec is not None:
            self.pending_env = env_rec
        if isinstance(scope.holder, ast.CodeSegmentDef):
            raise _Transfer(target)
        # entering segment land from a C function; only an environment
        # resume can come back out
        self.drive(target)
        raise TrapError("cbc: segment chain halted inside a C function")

    def _run_plan(self, s, gp, scope):
        temps: dict[int, bytes] = {}
        for mv in gp.plan.steps:
            src, dst = mv.src, mv.dst
            if src.kind == 'param-slot':
                base = self.frame_base + src.id * WORD
                raw = bytes(self.mem[base:base + src.width])
            elif src.kind == 'temp':
                raw = temps[src.id]
            elif src.kind == 'constant':
                raw = _struct.pack('<q', src.id)
            else:   # 'local' | 'expression': evaluate the argument now
                arg = s.args[src.id]
                raw = self._slot_bytes(self.eval(arg, scope),
                                       decay(arg.ty), dst.width)
            if dst.kind == 'temp':
                temps[dst.id] = raw
            else:
                base = self.frame_base + dst.id * WORD
                self.mem[base:base + dst.width] = raw[:dst.width].ljust(
                    dst.width, b'\0')

    def _slot_bytes(self, value, ty: TypeRepr, width: int) -> bytes:
        if ty.kind == 'struct':
            return self._pack(value, ty)[:width].ljust(width, b'\0')
        raw = self._pack(value, ty)
        # scalars sign-extend through a full word so later wider reads agree
        if len(raw) < 8:
            v = self._unpack(raw, ty)
            raw = _struct.pack('<q', v)
        return raw[:width].ljust(width, b'\0')

    # ------------------------------------------------------- expressions

    def eval(self, e, scope: "_Scope"):
        if isinstance(e, ast.IntLit):
            return e.value
        if isinstance(e, ast.StrLit):
            return self.intern(e.value)
        if isinstance(e, ast.Ident):
            return self._load_ident(e, scope)
        if isinstance(e, ast.EnvRef):
            if scope.env_handle is None:
                raise InterpError("__environment outside a capture")
            return scope.env_handle
        if isinstance(e, ast.RetRef):
            return SEG_ENVRET
        if isinstance(e, ast.SizeofType):
            return self.table.size_of(self.res.sizeof_types[id(e)])
        if isinstance(e, ast.Cast):
            return self._cast(self.eval(e.expr, scope), e.expr.ty, e.ty)
        if isinstance(e, ast.Member):
            place = self._lvalue(e, scope)
            return place.load()
        if isinstance(e, ast.Index):
            return self._lvalue(e, scope).load()
        if isinstance(e, ast.Unary):
            return self._unary(e, scope)
        if isinstance(e, ast.IncDec):
            place = self._lvalue(e.expr, scope)
            old = place.load()
            delta = 1 if e.op == '++' else -1
            if decay(e.expr.ty).kind == 'ptr':
                delta *= self._stride(e.expr.ty)
            place.store(old + delta)
            return old if e.postfix else old + delta
        if isinstance(e, ast.Binary):
            return self._binary(e, scope)
        if isinstance(e, ast.Assign):
            return self._assign(e, scope)
        if isinstance(e, ast.Call):
            return self._call(e, scope)
        raise InterpError(f"cannot evaluate {type(e).__name__}")

    def _load_ident(self, e: ast.Ident, scope: "_Scope"):
        kind = self.res.binding.get(id(e), ('global',))[0]
        if kind == 'segname':
            sid = self.seg_id.get(e.name)
            if sid is None:
                raise TrapError("cbc: bad segment id")
            return sid
        if kind in ('funcname', 'builtin'):
            raise InterpError(f"{e.name} used as a value")
        return self._lvalue(e, scope).load()

    def _stride(self, ty: TypeRepr) -> int:
        inner = decay(ty).inner
        if inner.kind in ('void', 'seg', 'func'):
            return 1
        return self.table.size_of(inner)

    def _cast(self, value, src: TypeRepr, dst: TypeRepr):
        dst = decay(dst)
        if dst.kind == 'int':
            return _wrap32(value)
        if dst.kind == 'char':
            return _wrap8(value)
        return value

    def _unary(self, e: ast.Unary, scope):
        if e.op == '&':
            if e.expr.ty.kind == 'seg':
                return self.eval(e.expr, scope)  # &segment is the segment
            return self._lvalue(e.expr, scope).addr()
        if e.op == '*':
            dt = decay(e.expr.ty)
            if dt.kind == 'ptr' and dt.inner.kind == 'seg':
                return self.eval(e.expr, scope)  # *segptr is still the id
            return self._lvalue(e, scope).load()
        v = self.eval(e.expr, scope)
        if e.op == '-':
            return _wrap32(-v)
        if e.op == '+':
            return v
        if e.op == '!':
            return 0 if v else 1
        if e.op == '~':
            return _wrap32(~v)
        raise InterpError(f"unary {e.op}")

    def _binary(self, e: ast.Binary, scope):
        op = e.op
        if op == '&&':
            return 1 if self.eval(e.left, scope) and self.eval(e.right, scope) else 0
        if op == '||':
            return 1 if self.eval(e.left, scope) or self.eval(e.right, scope) else 0
        a = self.eval(e.left, scope)
        b = self.eval(e.right, scope)
        lt, rt = decay(e.left.ty), decay(e.right.ty)
        if op in ('<', '>', '<=', '>=', '==', '!='):
            table = {'<': a < b, '>': a > b, '<=': a <= b,
                     '>=': a >= b, '==': a == b, '!=': a != b}
            return 1 if table[op] else 0
        if lt.kind == 'ptr' and rt.kind == 'ptr' and op == '-':
            return (a - b) // self._stride(lt)
        if lt.kind == 'ptr':
            return a + self._stride(lt) * (b if op == '+' else -b)
        if rt.kind == 'ptr':
            return b + self._stride(rt) * a
        if op == '+':
            return _wrap32(a + b)
        if op == '-':
            return _wrap32(a - b)
        if op == '*':
            return _wrap32(a * b)
        if op == '/':
            return _wrap32(_c_div(a, b))
        if op == '%':
            return _wrap32(_c_mod(a, b))
        if op == '&':
            return _wrap32(a & b)
        if op == '|':
            return _wrap32(a | b)
        if op == '^':
            return _wrap32(a ^ b)
        if op == '<<':
            return _wrap32(a << (b & 31))
        if op == '>>':
            return _wrap32(a >> (b & 31))
        raise InterpError(f"binary {op}")

    def _assign(self, e: ast.Assign, scope):
        place = self._lvalue(e.target, scope)
        value = self.eval(e.value, scope)
        if e.op != '=':
            old = place.load()
            tty = decay(e.target.ty)
            if tty.kind == 'ptr':
                value = old + self._stride(tty) * (value if e.op == '+=' else -value)
            elif e.op == '+=':
                value = _wrap32(old + value)
            else:
                value = _wrap32(old - value)
        place.store(value)
        return value

    def _call(self, e: ast.Call, scope):
        if not isinstance(e.callee, ast.Ident):
            raise InterpError("calls through expressions are not supported")
        name = e.callee.name
        args = [self.eval(a, scope) for a in e.args]
        if name in self.fn_defs:
            return self.call_function(name, args)
        if name in BUILTINS:
            return self._builtin(name, args, e)
        raise InterpError(f"call to undefined function {name}")

    def _builtin(self, name, args, e):
        if name == 'printf':
            fmt = self.cstr(args[0])
            self.out.append(self._format(fmt, args[1:], e.args[1:]))
            return 0
        if name == 'puts':
            self.out.append(self.cstr(args[0]) + '\n')
            return 0
        if name == 'putchar':
            self.out.append(chr(args[0] & 0xFF))
            return args[0]
        if name == 'cbc_rt_stack_top':
            return self.stack_top
        if name == 'cbc_rt_stack_limit':
            return self.stack_limit
        if name == 'cbc_rt_stack_highwater':
            return self.highwater
        if name == 'cbc_rt_trap':
            raise TrapError(self.cstr(args[0]))
        raise InterpError(f"builtin {name}")

    def _format(self, fmt: str, args: list, nodes: list) -> str:
        out = []
        i = 0
        ai = 0
        while i < len(fmt):
            ch = fmt[i]
            if ch != '%':
                out.append(ch)
                i += 1
                continue
            spec = fmt[i + 1] if i + 1 < len(fmt) else '%'
            i += 2
            if spec == '%':
                out.append('%')
                continue
            v = args[ai]
            ai += 1
            if spec == 'd':
                out.append(str(v))
            elif spec == 'c':
                out.append(chr(v & 0xFF))
            elif spec == 's':
                out.append(self.cstr(v))
            elif spec == 'x':
                out.append(format(v & 0xFFFFFFFF, 'x'))
            elif spec == 'p':
                out.append(hex(v))
            else:
                raise InterpError(f"printf %{spec}")
        return ''.join(out)

    # ----------------------------------------------------------- lvalues

    def _lvalue(self, e, scope: "_Scope") -> "_Place":
        if isinstance(e, ast.Ident):
            kind = self.res.binding.get(id(e), ('global',))[0]
            if kind == 'param' and isinstance(scope.holder, ast.CodeSegmentDef):
                off = scope.param_offset(e.name)
                return _MemPlace(self, self.frame_base + off, decay(e.ty))
            if kind in ('param', 'local'):
                return scope.place(e.name)
            if kind == 'global':
                addr, ty = self.globals[e.name]
                return _MemPlace(self, addr, ty)
            raise InterpError(f"{e.name} is not assignable")
        if isinstance(e, ast.Unary) and e.op == '*':
            addr = self.eval(e.expr, scope)
            return _MemPlace(self, addr, decay(e.ty))
        if isinstance(e, ast.Member):
            base_ty = decay(e.base.ty)
            if e.arrow or base_ty.kind == 'ptr':
                base = self.eval(e.base, scope)
                info = self.table.struct_info(base_ty.inner.tag)
                return _MemPlace(self, base + info.offsets[e.name],
                                 decay(e.ty))
            place = self._lvalue(e.base, scope)
            info = self.table.struct_info(base_ty.tag)
            return place.field(info.offsets[e.name], decay(e.ty),
                               self.table.size_of(decay(e.ty)))
        if isinstance(e, ast.Index):
            base = self.eval(e.base, scope)
            idx = self.eval(e.index, scope)
            return _MemPlace(self, base + idx * self._stride(e.base.ty),
                             decay(e.ty))
        raise InterpError(f"{type(e).__name__} is not an lvalue")


def _round_up(n: int, align: int) -> int:
    return (n + align - 1) // align * align


class _Scope:
    """Locals live in Python cells; code-segment parameters do not live
    here at all — they are read and written through the frame."""

    def __init__(self, machine: Machine, holder):
        self.machine = machine
        self.holder = holder
        self.frames: list[dict[str, "_Place"]] = [{}]
        self.env_handle: int | None = None
        self._offsets: dict[str, int] = {}
        if isinstance(holder, ast.CodeSegmentDef):
            sig = machine.res.segments[holder.name]
            for (name, _), off in zip(sig.params or [], sig.frame_offsets):
                self._offsets[name] = off

    def push(self):
        self.frames.append({})

    def pop(self):
        self.frames.pop()

    def declare(self, name: str, ty: TypeRepr, init=None):
        if ty.kind == 'struct':
            size = self.machine.table.size_of(ty)
            cell = bytearray(init if init is not None else size)
            self.frames[-1][name] = _StructPlace(self.machine, cell, 0, ty)
        else:
            self.frames[-1][name] = _CellPlace([0 if init is None else init], ty)

    def place(self, name: str) -> "_Place":
        for fr in reversed(self.frames):
            if name in fr:
                return fr[name]
        raise InterpError(f"no local {name}")

    def param_offset(self, name: str) -> int:
        return self._offsets[name]


class _Place:
    def field(self, off: int, ty: TypeRepr, size: int) -> "_Place":
        raise InterpError("not a struct place")

    def addr(self) -> int:
        raise InterpError("cannot take the address of a register local")


class _CellPlace(_Place):
    def __init__(self, cell: list, ty: TypeRepr):
        self.cell = cell
        self.ty = ty

    def load(self):
        return self.cell[0]

    def store(self, v):
        if self.ty.kind == 'int':
            v = _wrap32(v)
        elif self.ty.kind == 'char':
            v = _wrap8(v)
        self.cell[0] = v


class _StructPlace(_Place):
    def __init__(self, machine: Machine, buf: bytearray, off: int, ty: TypeRepr):
        self.machine = machine
        self.buf = buf
        self.off = off
        self.ty = ty

    def load(self):
        size = self.machine.table.size_of(self.ty)
        if self.ty.kind == 'struct':
            return bytes(self.buf[self.off:self.off + size])
        return self.machine._unpack(
            bytes(self.buf[self.off:self.off + size]), self.ty)

    def store(self, v):
        raw = self.machine._pack(v, self.ty)
        self.buf[self.off:self.off + len(raw)] = raw

    def field(self, off: int, ty: TypeRepr, size: int) -> "_Place":
        return _StructPlace(self.machine, self.buf, self.off + off, ty)


class _MemPlace(_Place):
    def __init__(self, machine: Machine, address: int, ty: TypeRepr):
        self.machine = machine
        self.address = address
        self.ty = ty

    def load(self):
        return self.machine.load(self.address, self.ty)

    def store(self, v):
        self.machine.store(self.address, v, self.ty)

    def field(self, off: int, ty: TypeRepr, size: int) -> "_Place":
        return _MemPlace(self.machine, self.address + off, ty)

    def addr(self) -> int:
        return self.address


# ---------------------------------------------------------------- fronts

def run_function(res: SemaResult, name: str, args: list,
                 lu: LoweredUnit | None = None, **kw):
    """Evaluate a plain C function; the oracle for conversion checks."""
    m = Machine(res, lu, **kw)
    return m.call_function(name, list(args))


def run_unit(res: SemaResult, lu: LoweredUnit, **kw) -> RunResult:
    """Run main() with full segment support."""
    m = Machine(res, lu, **kw)
    status = m.call_function('main', [])
    return RunResult(status=status if status is not None else 0,
                     stdout=''.join(m.out),
                     highwater=m.highwater,
                     steps=m.steps)
