"""Semantic analysis for CwC translation units.

analyze() resolves names and types, computes segment signatures and the
shared-argument-frame layout, classifies every parameterized goto, checks
the continuation rules (segments never return, never fall through, are
never called) and validates the environment-capture forms.  Diagnostics
are collected, not raised, and come out sorted by source position.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

from . import ast
from .ast import Span
from .types import (TypeRepr, TypeTable, INT, CHAR, VOID, ptr, array, struct,
                    seg, func, decay, is_integer, LayoutError)

## Names callable without a declaration.  printf and friends are ordinary
## varargs externals; the cbc_rt_* entries are the runtime services that
## generated code may lean on.
BUILTINS: dict[str, TypeRepr] = {
    'printf': func(INT, (ptr(CHAR),), varargs=True),
    'puts': func(INT, (ptr(CHAR),)),
    'putchar': func(INT, (INT,)),
    'cbc_rt_stack_top': func(ptr(CHAR), ()),
    'cbc_rt_stack_limit': func(ptr(CHAR), ()),
    'cbc_rt_stack_highwater': func(INT, ()),
    'cbc_rt_trap': func(VOID, (ptr(CHAR),)),
}


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Span
    file: str = '<input>'

    def format(self) -> str:
        return (f"{self.file}:{self.span.line}:{self.span.col}: "
                f"{self.code}: {self.message}")


@dataclass
class SegmentSignature:
    name: str
    params: Optional[list[tuple[str, TypeRepr]]]  # None: unspecified prototype
    frame_offsets: list[int] = dc_field(default_factory=list)
    frame_bytes: int = 0


@dataclass
class FuncSig:
    name: str
    ret: TypeRepr
    params: Optional[list[tuple[Optional[str], TypeRepr]]]
    varargs: bool = False
    defined: bool = False


@dataclass
class GotoInfo:
    """Resolution of one goto statement."""
    kind: str                    # 'seg' (direct to a named segment) | 'expr'
    seg_name: Optional[str] = None
    param_types: Optional[tuple[TypeRepr, ...]] = None


class SemaResult:
    def __init__(self, unit: ast.TranslationUnit, file: str):
        self.unit = unit
        self.file = file
        self.table = TypeTable()
        self.segments: dict[str, SegmentSignature] = {}
        self.functions: dict[str, FuncSig] = {}
        self.globals: dict[str, TypeRepr] = {}
        self.global_order: list[str] = []
        self.errors: list[Diagnostic] = []
        self.warnings: list[Diagnostic] = []
        self.captures: set[str] = set()      # functions using __environment/__return
        self.fn_has_goto: set[str] = set()
        self.goto_info: dict[int, GotoInfo] = {}
        self.binding: dict[int, tuple] = {}  # id(Ident) -> kind tuple
        self.decl_types: dict[int, TypeRepr] = {}
        self.sizeof_types: dict[int, TypeRepr] = {}  # id(SizeofType) -> measured

    @property
    def ok(self) -> bool:
        return not self.errors

    def diagnostics(self) -> list[Diagnostic]:
        return sorted(self.errors + self.warnings,
                      key=lambda d: (d.span.start, d.code))


def analyze(unit: ast.TranslationUnit, file: str = '<input>') -> SemaResult:
    res = SemaResult(unit, file)
    _Checker(res).run()
    res.errors.sort(key=lambda d: (d.span.start, d.code))
    res.warnings.sort(key=lambda d: (d.span.start, d.code))
    return res


class _Checker:
    def __init__(self, res: SemaResult):
        self.res = res
        self.table = res.table
        self.scopes: list[dict[str, TypeRepr]] = []
        self.cur_name = ''
        self.cur_seg: Optional[ast.CodeSegmentDef] = None
        self.cur_fn: Optional[ast.FunctionDef] = None
        self._defined_segs: set[str] = set()

    # ----------------------------------------------------------- diagnostics

    def error(self, code: str, span: Span, message: str):
        self.res.errors.append(Diagnostic(code, message, span, self.res.file))

    def warn(self, code: str, span: Span, message: str):
        self.res.warnings.append(Diagnostic(code, message, span, self.res.file))

    # ------------------------------------------------------------- main walk

    def run(self):
        for decl in self.res.unit.decls:
            self.collect(decl)
        for decl in self.res.unit.decls:
            if isinstance(decl, ast.CodeSegmentDef) and decl.body is not None:
                self.check_segment(decl)
            elif isinstance(decl, ast.FunctionDef) and decl.body is not None:
                self.check_function(decl)

    # ------------------------------------------------------------ collection

    def collect(self, decl):
        if isinstance(decl, ast.StructDef):
            if decl.fields is None:
                self.table.declare_struct(decl.tag)
                return
            if (decl.tag in self.table.structs
                    and self.table.structs[decl.tag].complete):
                self.error('E-TYPE', decl.span, f"redefinition of struct {decl.tag}")
                return
            fields = []
            for fty, fname in decl.fields:
                fields.append((fname, self.resolve(fty, decl.span)))
            try:
                self.table.define_struct(decl.tag, fields)
            except LayoutError as exc:
                self.error('E-TYPE', decl.span, str(exc))
                self.table.define_struct(decl.tag, [])
            return
        if isinstance(decl, ast.TypedefDecl):
            if decl.name in self.table.typedefs:
                self.error('E-TYPE', decl.span, f"redefinition of typedef {decl.name}")
            self.table.typedefs[decl.name] = self.resolve(decl.ctype, decl.span)
            return
        if isinstance(decl, ast.VarDecl):
            if decl.name in self.res.globals:
                self.error('E-TYPE', decl.span, f"redefinition of {decl.name}")
                return
            ty = self.resolve(decl.ctype, decl.span)
            self.res.globals[decl.name] = ty
            self.res.global_order.append(decl.name)
            self.res.decl_types[id(decl)] = ty
            if decl.init is not None and not isinstance(decl.init, (ast.IntLit, ast.StrLit)):
                self.error('E-TYPE', decl.span,
                           'global initializers must be literals')
            return
        if isinstance(decl, ast.CodeSegmentDef):
            prev = self.res.segments.get(decl.name)
            if decl.name in self.res.functions or (
                    decl.body is not None and decl.name in self._defined_segs):
                self.error('E-TYPE', decl.span, f"redefinition of {decl.name}")
            sig = self._segment_sig(decl)
            if prev is None or decl.body is not None or prev.params is None:
                self.res.segments[decl.name] = sig
            if decl.body is not None:
                self._defined_segs.add(decl.name)
            return
        if isinstance(decl, ast.FunctionDef):
            if decl.name in self.res.segments:
                self.error('E-TYPE', decl.span, f"redefinition of {decl.name}")
            prev = self.res.functions.get(decl.name)
            if prev is not None and prev.defined and decl.body is not None:
                self.error('E-TYPE', decl.span, f"redefinition of {decl.name}")
            ret = self.resolve(decl.ret, decl.span)
            params = None
            if decl.params is not None:
                params = [(n, self.resolve(t, decl.span)) for t, n in decl.params]
            sig = FuncSig(decl.name, ret, params, defined=decl.body is not None)
            if prev is None or decl.body is not None:
                self.res.functions[decl.name] = sig
            return
        raise TypeError(f"unexpected top-level declaration: {decl!r}")

    def _segment_sig(self, decl: ast.CodeSegmentDef) -> SegmentSignature:
        if decl.params is None:
            return SegmentSignature(decl.name, None)
        params = []
        for t, n in decl.params:
            params.append((n or '', decay(self.resolve(t, decl.span))))
        try:
            offsets, total = self.table.frame_layout([t for _, t in params])
        except LayoutError as exc:
            self.error('E-TYPE', decl.span, str(exc))
            offsets, total = [], 0
        return SegmentSignature(decl.name, params, offsets, total)

    # -------------------------------------------------------- type resolution

    def resolve(self, te, span: Span) -> TypeRepr:
        if isinstance(te, ast.TName):
            if te.name == 'int':
                return INT
            if te.name == 'char':
                return CHAR
            if te.name == 'void':
                return VOID
            ty = self.table.typedefs.get(te.name)
            if ty is None:
                self.error('E-UNDEF', te.span or span, f"unknown type {te.name}")
                return INT
            return ty
        if isinstance(te, ast.TStruct):
            self.table.declare_struct(te.tag)
            return struct(te.tag)
        if isinstance(te, ast.TPtr):
            return ptr(self.resolve(te.inner, span))
        if isinstance(te, ast.TArr):
            return array(self.resolve(te.inner, span), te.size)
        if isinstance(te, ast.TFun):
            params = None
            if te.params is not None:
                params = tuple(decay(self.resolve(p, span)) for p in te.params)
            if te.seg:
                return seg(params)
            return func(self.resolve(te.ret, span), params)
        if isinstance(te, ast.TSeg):
            self.error('E-TYPE', te.span or span,
                       '__code is only valid as a segment return type')
            return INT
        raise TypeError(f"unexpected type expression: {te!r}")

    # ------------------------------------------------------------ body checks

    def check_segment(self, decl: ast.CodeSegmentDef):
        self.cur_seg, self.cur_fn = decl, None
        self.cur_name = decl.name
        self.scopes = [{}]
        for (t, n) in decl.params or []:
            if n:
                self.scopes[0][n] = decay(self.resolve(t, decl.span))
        terminated = self.check_block(decl.body)
        if not terminated:
            self.error('E-FALLTHROUGH', decl.span,
                       f"code segment {decl.name} can fall off the end "
                       f"without a goto")
        self.cur_seg = None

    def check_function(self, decl: ast.FunctionDef):
        self.cur_seg, self.cur_fn = None, decl
        self.cur_name = decl.name
        self.scopes = [{}]
        for (t, n) in decl.params or []:
            if n:
                self.scopes[0][n] = decay(self.resolve(t, decl.span))
        self.check_block(decl.body)
        self.cur_fn = None

    def check_block(self, block: ast.Block) -> bool:
        self.scopes.append({})
        terminated = warned = False
        for s in block.stmts:
            if terminated:
                if not warned:
                    self.warn('W-UNREACHABLE', s.span, 'statement is unreachable')
                    warned = True
                self.check_stmt(s)  # keep collecting diagnostics
                continue
            terminated = self.check_stmt(s)
        self.scopes.pop()
        return terminated

    def check_stmt(self, s) -> bool:
        """Type-check one statement; True if control cannot fall past it."""
        if isinstance(s, ast.Block):
            return self.check_block(s)
        if isinstance(s, ast.EmptyStmt):
            return False
        if isinstance(s, ast.VarDecl):
            ty = decay(self.resolve(s.ctype, s.span))
            if ty.kind == 'void':
                self.error('E-TYPE', s.span, f"variable {s.name} has type void")
                ty = INT
            self.res.decl_types[id(s)] = ty
            if s.init is not None:
                ity = self.expr(s.init)
                self.check_assignable(ty, ity, s.init, s.span)
            self.scopes[-1][s.name] = ty
            return False
        if isinstance(s, ast.ExprStmt):
            self.expr(s.expr)
            return False
        if isinstance(s, ast.IfStmt):
            self.scalar_cond(s.cond)
            t1 = self.check_stmt(s.then)
            t2 = self.check_stmt(s.orelse) if s.orelse is not None else False
            return t1 and t2 and s.orelse is not None
        if isinstance(s, ast.WhileStmt):
            self.scalar_cond(s.cond)
            self.check_stmt(s.body)
            return False  # conservatively assume the loop can exit
        if isinstance(s, ast.ForStmt):
            for e in (s.init, s.cond, s.step):
                if e is not None:
                    self.expr(e)
            self.check_stmt(s.body)
            return False
        if isinstance(s, ast.ReturnStmt):
            if self.cur_seg is not None:
                self.error('E-RET-IN-SEG', s.span,
                           f"return inside code segment {self.cur_seg.name}; "
                           f"segments exit only via goto")
                if s.value is not None:
                    self.expr(s.value)
                return True
            fsig = self.res.functions[self.cur_fn.name]
            if s.value is not None:
                vty = self.expr(s.value)
                if fsig.ret.kind == 'void':
                    self.error('E-TYPE', s.span, 'void function returns a value')
                else:
                    self.check_assignable(fsig.ret, vty, s.value, s.span)
            elif fsig.ret.kind != 'void':
                self.error('E-TYPE', s.span,
                           f"non-void function {self.cur_fn.name} returns nothing")
            return True
        if isinstance(s, (ast.GotoDirect, ast.GotoIndirect, ast.GotoWithEnv)):
            self.check_goto(s)
            return True
        raise TypeError(f"unexpected statement: {s!r}")

    def scalar_cond(self, e):
        ty = decay(self.expr(e))
        if not (is_integer(ty) or ty.kind == 'ptr'):
            self.error('E-TYPE', e.span, f"condition has non-scalar type {ty}")

    # ----------------------------------------------------------------- gotos

    def check_goto(self, s):
        arg_types = [self.expr(a) for a in s.args]
        info: Optional[GotoInfo] = None

        if isinstance(s, ast.GotoDirect):
            name = s.target
            var = self.lookup(name)
            if var is not None:
                ty = decay(var)
                if ty.kind == 'ptr' and ty.inner.kind == 'seg':
                    info = GotoInfo('expr', param_types=ty.inner.params)
                else:
                    self.error('E-GOTO-NONSEG', s.span,
                               f"goto target {name} has type {ty}, "
                               f"not a code segment")
            elif name in self.res.segments:
                sig = self.res.segments[name]
                ptypes = (None if sig.params is None
                          else tuple(t for _, t in sig.params))
                info = GotoInfo('seg', seg_name=name, param_types=ptypes)
            elif name in self.res.functions or name in BUILTINS:
                self.error('E-GOTO-NONSEG', s.span,
                           f"goto target {name} is a C function, not a code "
                           f"segment")
            else:
                # First goto to an undeclared name declares the segment with
                # the argument types, like old C's implicit functions.  The
                # emitter is where a missing definition becomes an error.
                info = GotoInfo('seg', seg_name=name,
                                param_types=tuple(decay(t) for t in arg_types))
                params = [(f"a{i}", t)
                          for i, t in enumerate(info.param_types)]
                try:
                    offsets, total = self.table.frame_layout(
                        [t for _, t in params])
                except LayoutError as exc:
                    self.error('E-TYPE', s.span, str(exc))
                    offsets, total = [], 0
                self.res.segments[name] = SegmentSignature(
                    name, params, offsets, total)
        else:
            tty = self.expr(s.target)
            tty = decay(tty)
            if tty.kind == 'ptr' and tty.inner.kind == 'seg':
                tty = tty.inner
            if tty.kind != 'seg':
                self.error('E-GOTO-NONSEG', s.span,
                           f"goto through expression of type {tty}, "
                           f"not a code segment pointer")
            else:
                info = GotoInfo('expr', param_types=tty.params)

        if isinstance(s, ast.GotoWithEnv):
            ety = decay(self.expr(s.env))
            if ety.kind != 'ptr':
                self.error('E-TYPE', s.env.span,
                           f"environment operand has type {ety}, expected a "
                           f"pointer")

        if info is not None and info.param_types is not None:
            want = info.param_types
            if len(want) != len(arg_types):
                self.error('E-ARITY', s.span,
                           f"goto passes {len(arg_types)} arguments, target "
                           f"takes {len(want)}")
            else:
                for i, (w, (a, at)) in enumerate(zip(want, zip(s.args, arg_types))):
                    self.check_assignable(w, at, a, a.span,
                                          what=f"goto argument {i + 1}")
        if info is not None:
            self.res.goto_info[id(s)] = info
        if self.cur_fn is not None:
            self.res.fn_has_goto.add(self.cur_fn.name)

    # ----------------------------------------------------------- expressions

    def lookup(self, name: str) -> Optional[TypeRepr]:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return self.res.globals.get(name)

    def bind(self, e, kind: tuple):
        self.res.binding[id(e)] = kind

    def expr(self, e) -> TypeRepr:
        ty = self._expr(e)
        e.ty = ty
        return ty

    def _expr(self, e) -> TypeRepr:
        if isinstance(e, ast.IntLit):
            return INT
        if isinstance(e, ast.StrLit):
            return ptr(CHAR)
        if isinstance(e, ast.Ident):
            return self.ident(e)
        if isinstance(e, ast.EnvRef):
            if self.cur_seg is not None:
                self.error('E-ENV-OUTSIDE-FN', e.span,
                           '__environment is only valid inside a C function')
            else:
                self.res.captures.add(self.cur_name)
            return ptr(VOID)
        if isinstance(e, ast.RetRef):
            if self.cur_seg is not None:
                self.error('E-ENV-OUTSIDE-FN', e.span,
                           '__return is only valid inside a C function')
            else:
                self.res.captures.add(self.cur_name)
            ## the continuation created by __return carries the function's
            ## exit status; int is the status type for void functions too
            return ptr(seg((INT,)))
        if isinstance(e, ast.Call):
            return self.call(e)
        if isinstance(e, ast.Member):
            bty = self.expr(e.base)
            if e.arrow:
                bty = decay(bty)
                if bty.kind != 'ptr' or bty.inner.kind != 'struct':
                    self.error('E-TYPE', e.span,
                               f"-> applied to non-struct-pointer type {bty}")
                    return INT
                tag = bty.inner.tag
            else:
                if bty.kind != 'struct':
                    self.error('E-TYPE', e.span,
                               f". applied to non-struct type {bty}")
                    return INT
                tag = bty.tag
            try:
                info = self.table.struct_info(tag)
            except LayoutError as exc:
                self.error('E-TYPE', e.span, str(exc))
                return INT
            for fname, fty in info.fields:
                if fname == e.name:
                    return fty
            self.error('E-TYPE', e.span, f"struct {tag} has no field {e.name}")
            return INT
        if isinstance(e, ast.Index):
            bty = decay(self.expr(e.base))
            ity = self.expr(e.index)
            if not is_integer(ity):
                self.error('E-TYPE', e.index.span, 'array index must be integer')
            if bty.kind != 'ptr':
                self.error('E-TYPE', e.span, f"indexing non-pointer type {bty}")
                return INT
            return bty.inner
        if isinstance(e, ast.Unary):
            return self.unary(e)
        if isinstance(e, ast.IncDec):
            ty = decay(self.expr(e.expr))
            if not self.is_lvalue(e.expr):
                self.error('E-TYPE', e.span, f"{e.op} needs an lvalue")
            if not (is_integer(ty) or ty.kind == 'ptr'):
                self.error('E-TYPE', e.span, f"{e.op} on type {ty}")
            return ty
        if isinstance(e, ast.Binary):
            return self.binary(e)
        if isinstance(e, ast.Assign):
            return self.assign(e)
        if isinstance(e, ast.Cast):
            sty = decay(self.expr(e.expr))
            dty = decay(self.resolve(e.ctype, e.span))
            scalar = lambda t: is_integer(t) or t.kind == 'ptr'
            if not (scalar(sty) and scalar(dty)):
                self.error('E-TYPE', e.span, f"cannot cast {sty} to {dty}")
            return dty
        if isinstance(e, ast.SizeofType):
            ty = self.resolve(e.ctype, e.span)
            self.res.sizeof_types[id(e)] = ty
            try:
                self.table.size_of(ty)
            except LayoutError as exc:
                self.error('E-TYPE', e.span, str(exc))
            return INT
        raise TypeError(f"unexpected expression: {e!r}")

    def ident(self, e: ast.Ident) -> TypeRepr:
        ## scopes[0] holds the parameters, inner scopes the locals
        for depth in range(len(self.scopes) - 1, -1, -1):
            if e.name in self.scopes[depth]:
                self.bind(e, ('param',) if depth == 0 else ('local',))
                return self.scopes[depth][e.name]
        if e.name in self.res.globals:
            self.bind(e, ('global',))
            return self.res.globals[e.name]
        if e.name in self.res.segments:
            self.bind(e, ('segname',))
            sig = self.res.segments[e.name]
            ptypes = None if sig.params is None else tuple(t for _, t in sig.params)
            return seg(ptypes)
        if e.name in self.res.functions:
            self.bind(e, ('funcname',))
            f = self.res.functions[e.name]
            params = None if f.params is None else tuple(t for _, t in f.params)
            return func(f.ret, params, f.varargs)
        if e.name in BUILTINS:
            self.bind(e, ('builtin',))
            return BUILTINS[e.name]
        self.error('E-UNDEF', e.span, f"undefined identifier {e.name}")
        self.bind(e, ('local',))
        return INT

    def call(self, e: ast.Call) -> TypeRepr:
        cty = self.expr(e.callee)
        arg_types = [self.expr(a) for a in e.args]
        cty = decay(cty)
        if cty.kind == 'ptr' and cty.inner.kind in ('func', 'seg'):
            cty = cty.inner
        if cty.kind == 'seg':
            self.error('E-SEG-CALL', e.span,
                       'code segments cannot be called; transfer with goto')
            return INT
        if cty.kind != 'func':
            self.error('E-TYPE', e.span, f"called object has type {cty}")
            return INT
        if cty.params is not None:
            want = list(cty.params)
            if cty.varargs:
                if len(arg_types) < len(want):
                    self.error('E-ARITY', e.span,
                               f"call needs at least {len(want)} arguments")
                pairs = list(zip(want, zip(e.args, arg_types)))
            elif len(want) != len(arg_types):
                self.error('E-ARITY', e.span,
                           f"call passes {len(arg_types)} arguments, function "
                           f"takes {len(want)}")
                pairs = []
            else:
                pairs = list(zip(want, zip(e.args, arg_types)))
            for w, (a, at) in pairs:
                self.check_assignable(w, at, a, a.span, what='argument')
        return cty.ret

    def unary(self, e: ast.Unary) -> TypeRepr:
        ty = self.expr(e.expr)
        if e.op == '*':
            ty = decay(ty)
            if ty.kind != 'ptr':
                self.error('E-TYPE', e.span, f"dereferencing non-pointer {ty}")
                return INT
            return ty.inner
        if e.op == '&':
            if not self.is_lvalue(e.expr):
                self.error('E-TYPE', e.span, '& needs an lvalue')
            return ptr(ty)
        if e.op == '-':
            if not is_integer(decay(ty)):
                self.error('E-TYPE', e.span, f"unary - on type {ty}")
            return INT
        if e.op == '!':
            dty = decay(ty)
            if not (is_integer(dty) or dty.kind == 'ptr'):
                self.error('E-TYPE', e.span, f"! on type {ty}")
            return INT
        raise TypeError(f"unexpected unary op {e.op}")

    def binary(self, e: ast.Binary) -> TypeRepr:
        lt = decay(self.expr(e.left))
        rt = decay(self.expr(e.right))
        op = e.op
        if op in ('&&', '||'):
            for side, ty in ((e.left, lt), (e.right, rt)):
                if not (is_integer(ty) or ty.kind == 'ptr'):
                    self.error('E-TYPE', side.span, f"{op} on type {ty}")
            return INT
        if op in ('==', '!=', '<', '>', '<=', '>='):
            if is_integer(lt) and is_integer(rt):
                return INT
            if lt.kind == 'ptr' and rt.kind == 'ptr':
                return INT
            if lt.kind == 'ptr' and isinstance(e.right, ast.IntLit):
                return INT
            if rt.kind == 'ptr' and isinstance(e.left, ast.IntLit):
                return INT
            self.error('E-TYPE', e.span, f"cannot compare {lt} and {rt}")
            return INT
        if op in ('+', '-'):
            if lt.kind == 'ptr' and is_integer(rt):
                return lt
            if rt.kind == 'ptr' and is_integer(lt) and op == '+':
                return rt
            if lt.kind == 'ptr' and rt.kind == 'ptr' and op == '-':
                return INT
        if is_integer(lt) and is_integer(rt):
            return INT
        self.error('E-TYPE', e.span, f"operator {op} on {lt} and {rt}")
        return INT

    def assign(self, e: ast.Assign) -> TypeRepr:
        tty = decay(self.expr(e.target))
        vty = self.expr(e.value)
        if not self.is_lvalue(e.target):
            self.error('E-TYPE', e.span, 'assignment target is not an lvalue')
            return tty
        if e.op == '=':
            ## struct assignment is by-value copy, everything else scalar
            raw = e.target.ty if e.target.ty is not None else tty
            self.check_assignable(raw, vty, e.value, e.span)
            return raw
        ## += -= : integers, or pointer arithmetic on the target
        if tty.kind == 'ptr' and is_integer(decay(vty)):
            return tty
        if is_integer(tty) and is_integer(decay(vty)):
            return tty
        self.error('E-TYPE', e.span, f"{e.op} on {tty} and {vty}")
        return tty

    def is_lvalue(self, e) -> bool:
        if isinstance(e, ast.Ident):
            k = self.res.binding.get(id(e))
            return k is None or k[0] in ('param', 'local', 'global')
        if isinstance(e, (ast.Member, ast.Index)):
            return True
        if isinstance(e, ast.Unary) and e.op == '*':
            return True
        return False

    def check_assignable(self, dst: TypeRepr, src: TypeRepr, src_expr,
                         span: Span, what: str = 'assignment'):
        if not self.assignable(dst, src, src_expr):
            self.error('E-TYPE', span,
                       f"{what}: cannot convert {src} to {dst}")

    def assignable(self, dst: TypeRepr, src: TypeRepr, src_expr) -> bool:
        src = decay(src)
        dst = decay(dst)
        if dst == src:
            return True
        if is_integer(dst) and is_integer(src):
            return True  # int/char promotions
        if dst.kind == 'ptr' and src.kind == 'ptr':
            if dst.inner.kind == 'void' or src.inner.kind == 'void':
                return True
            if dst.inner.kind == 'seg' and src.inner.kind == 'seg':
                return (dst.inner.params is None or src.inner.params is None
                        or dst.inner.params == src.inner.params)
            if dst.inner.kind == 'func' and src.inner.kind == 'func':
                return (dst.inner.params is None or src.inner.params is None
                        or (dst.inner.params == src.inner.params
                            and dst.inner.ret == src.inner.ret))
            return dst.inner == src.inner
        if dst.kind == 'ptr' and isinstance(src_expr, ast.IntLit) \
                and src_expr.value == 0:
            return True
        ## function/segment designators decay to pointers
        if dst.kind == 'ptr' and src.kind in ('func', 'seg'):
            return self.assignable(dst, ptr(src), src_expr)
        return False


# -------------------------------------------------------------------- linting

def lint_cbc_purity(res: SemaResult) -> list[Diagnostic]:
    """Strict-CbC warnings: loops and calls to user C functions inside code
    segments.  Calls to undeclared varargs externals (printf and friends)
    and to the runtime services are allowed; the translation target itself
    uses them."""
    out: list[Diagnostic] = []
    for decl in res.unit.decls:
        if not isinstance(decl, ast.CodeSegmentDef) or decl.body is None:
            continue
        for node in ast.walk(decl.body):
            if isinstance(node, (ast.WhileStmt, ast.ForStmt)):
                out.append(Diagnostic(
                    'W-STRICT-LOOP',
                    f"loop inside code segment {decl.name}; strict CbC wants "
                    f"goto-driven iteration", node.span, res.file))
            elif isinstance(node, ast.Call):
                callee = node.callee
                if isinstance(callee, ast.Ident) and (
                        callee.name in BUILTINS):
                    continue
                out.append(Diagnostic(
                    'W-STRICT-CALL',
                    f"C call inside code segment {decl.name}",
                    node.span, res.file))
    out.sort(key=lambda d: (d.span.start, d.code))
    return out
