"""C99 emission for lowered units: trampoline and direct backends.

Both backends share one shape: every code segment becomes a routine
`cbc_segid cbc_seg_<name>(void)` over a process-global runtime that owns
the shared argument frame.  Parameters are read and written at their frame
offsets at every use site; a goto executes its CopyPlan against the frame
and then transfers.

  trampoline  the routine returns the id of the next segment; a dispatch
              loop in the runtime walks the table until a negative
              sentinel.  Segment-pointer values are table indices.

  direct      the routine tail-calls the next segment through the
              CBC_TAILCALL expansion point and returns its result.
              Segment-pointer values are routine addresses stored in the
              same cbc_segid integer, so frame layout is identical across
              backends.

Ids 0 and 1 are reserved for the runtime's environment-return and halt
steps.  Output is deterministic: byte-identical for identical input.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ast
from .ast import _PREC, _PREC_ASSIGN, _PREC_POSTFIX, _PREC_PRIMARY, _PREC_UNARY, _esc
from .lower import FIRST_USER_INDEX, GotoPlan, LoweredUnit
from .sema import BUILTINS
from .types import TypeRepr, decay, ptr


class EmitError(Exception):
    pass


@dataclass
class EmitConfig:
    backend: str = 'trampoline'          # 'trampoline' | 'direct'
    strict_cbc: bool = False
    paracopy_mode: str = 'min'
    runtime_header_path: str = 'cbc_rt.h'

    def __post_init__(self):
        if self.backend not in ('trampoline', 'direct'):
            raise EmitError(f"unknown backend {self.backend!r}")


def emit(lu: LoweredUnit, cfg: EmitConfig) -> str:
    return _Emitter(lu, cfg).unit()


def emit_trampoline(lu: LoweredUnit, cfg: EmitConfig | None = None) -> str:
    cfg = cfg or EmitConfig(backend='trampoline')
    assert cfg.backend == 'trampoline'
    return emit(lu, cfg)


def emit_direct(lu: LoweredUnit, cfg: EmitConfig | None = None) -> str:
    cfg = cfg or EmitConfig(backend='direct')
    assert cfg.backend == 'direct'
    return emit(lu, cfg)


IND = '    '


class _Emitter:
    def __init__(self, lu: LoweredUnit, cfg: EmitConfig):
        self.lu = lu
        self.cfg = cfg
        self.res = lu.sema
        self.table = lu.sema.table
        self.tramp = cfg.backend == 'trampoline'
        self.lines: list[str] = []
        self.toplevel: set[str] = set()
        # per-routine context
        self.cur_seg = None        # LoweredSegment | None
        self.cur_fn = None         # LoweredFunction | None
        self.slot_of: dict[str, tuple[int, TypeRepr]] = {}

    # ------------------------------------------------------------- utilities

    def out(self, text: str = ''):
        self.lines.append(text)

    def claim(self, name: str):
        if name in self.toplevel:
            raise EmitError(f"mangled name collision: {name}")
        self.toplevel.add(name)

    def seg_sym(self, name: str) -> str:
        return f"cbc_seg_{name}"

    def fn_sym(self, name: str) -> str:
        return name if name == 'main' else f"cbc_fn_{name}"

    def glob_sym(self, name: str) -> str:
        return f"cbc_g_{name}"

    def tag_sym(self, tag: str) -> str:
        return f"cbc_s_{tag}"

    def local_sym(self, name: str) -> str:
        return f"l_{name}"

    def seg_value(self, name: str) -> str:
        """A segment name used as a first-class continuation value."""
        if not any(s.name == name for s in self.lu.segments):
            raise EmitError(f"segment {name} is declared but never defined "
                            f"in this unit")
        if self.tramp:
            return f"cbc_id_{name}"
        return f"((cbc_segid)&{self.seg_sym(name)})"

    def envret_value(self) -> str:
        if self.tramp:
            return 'CBC_SEG_ENVRET'
        return '((cbc_segid)&cbc_rt_env_step)'

    # --------------------------------------------------------- type rendering

    def ctype(self, ty: TypeRepr, name: str = '') -> str:
        """Render a C declaration of `name` with type `ty`.  Segment
        pointers collapse to the opaque cbc_segid in both backends so that
        frame layout never depends on the backend."""
        if ty.kind == 'seg' or (ty.kind == 'ptr' and ty.inner.kind == 'seg'):
            return f"cbc_segid {name}".rstrip()
        if ty.kind in ('int', 'char', 'void'):
            return f"{ty.kind} {name}".rstrip()
        if ty.kind == 'struct':
            return f"struct {self.tag_sym(ty.tag)} {name}".rstrip()
        if ty.kind == 'ptr':
            inner = ty.inner
            name = f"*{name}"
            if inner.kind in ('func', 'array'):
                name = f"({name})"
            return self.ctype(inner, name)
        if ty.kind == 'array':
            return self.ctype(ty.inner, f"{name}[{ty.count}]")
        if ty.kind == 'func':
            if ty.params is None:
                params = ''
            elif not ty.params:
                params = 'void'
            else:
                params = ', '.join(self.ctype(p) for p in ty.params)
                if ty.varargs:
                    params += ', ...'
            return self.ctype(ty.ret, f"{name}({params})")
        raise EmitError(f"cannot render type {ty}")

    def slot_lens(self, ty: TypeRepr) -> str:
        """Pointer-to-ty cast text used to access a frame or staging slot."""
        return f"({self.ctype(ptr(ty))})"

    def slot_read(self, base: str, off: int, ty: TypeRepr) -> str:
        return f"(*{self.slot_lens(ty)}({base} + {off}))"

    # ------------------------------------------------------------ expressions

    def ex(self, e, need: int = _PREC_ASSIGN) -> str:
        text, prec = self._ex(e)
        if prec < need:
            return f"({text})"
        return text

    def _ex(self, e) -> tuple[str, int]:
        if isinstance(e, ast.IntLit):
            return str(e.value), _PREC_PRIMARY
        if isinstance(e, ast.StrLit):
            return f'"{_esc(e.value)}"', _PREC_PRIMARY
        if isinstance(e, ast.Ident):
            return self._ident(e), _PREC_PRIMARY
        if isinstance(e, ast.EnvRef):
            return 'cbc_env', _PREC_PRIMARY
        if isinstance(e, ast.RetRef):
            return self.envret_value(), _PREC_PRIMARY
        if isinstance(e, ast.Call):
            args = ', '.join(self.ex(a) for a in e.args)
            return f"{self.ex(e.callee, _PREC_POSTFIX)}({args})", _PREC_POSTFIX
        if isinstance(e, ast.Member):
            op = '->' if e.arrow else '.'
            return f"{self.ex(e.base, _PREC_POSTFIX)}{op}{e.name}", _PREC_POSTFIX
        if isinstance(e, ast.Index):
            return (f"{self.ex(e.base, _PREC_POSTFIX)}[{self.ex(e.index)}]",
                    _PREC_POSTFIX)
        if isinstance(e, ast.IncDec):
            if e.postfix:
                return f"{self.ex(e.expr, _PREC_POSTFIX)}{e.op}", _PREC_POSTFIX
            return f"{e.op}{self.ex(e.expr, _PREC_POSTFIX)}", _PREC_UNARY
        if isinstance(e, ast.Unary):
            # cbc_segid already *is* the continuation value: dereferencing a
            # segment pointer and taking a segment's address are identities
            if e.op == '*' and e.expr.ty is not None:
                dt = decay(e.expr.ty)
                if dt.kind == 'ptr' and dt.inner.kind == 'seg':
                    return self._ex(e.expr)
            if e.op == '&' and e.expr.ty is not None \
                    and e.expr.ty.kind == 'seg':
                return self._ex(e.expr)
            return f"{e.op}{self.ex(e.expr, _PREC_POSTFIX)}", _PREC_UNARY
        if isinstance(e, ast.Cast):
            # e.ty is the resolved cast type from sema
            return f"(({self.ctype(e.ty)}){self.ex(e.expr, _PREC_UNARY)})", \
                _PREC_PRIMARY
        if isinstance(e, ast.SizeofType):
            # layout numbers come from our own type table so generated
            # pointer arithmetic agrees with the frame maps
            ty = self.res.sizeof_types[id(e)]
            return str(self.table.size_of(ty)), _PREC_PRIMARY
        if isinstance(e, ast.Binary):
            p = _PREC[e.op]
            return (f"{self.ex(e.left, p)} {e.op} {self.ex(e.right, p + 1)}", p)
        if isinstance(e, ast.Assign):
            return (f"{self.ex(e.target, _PREC_UNARY)} {e.op} "
                    f"{self.ex(e.value)}", _PREC_ASSIGN)
        raise EmitError(f"cannot emit expression {e!r}")

    def _ident(self, e: ast.Ident) -> str:
        kind = self.res.binding.get(id(e))
        if kind is None:
            raise EmitError(f"unbound identifier {e.name}")
        k = kind[0]
        if k == 'param':
            if self.cur_seg is not None:
                off, ty = self.slot_of[e.name]
                return self.slot_read('cbc_f', off, ty)
            return self.local_sym(e.name)
        if k == 'local':
            return self.local_sym(e.name)
        if k == 'global':
            return self.glob_sym(e.name)
        if k == 'segname':
            return self.seg_value(e.name)
        if k == 'funcname':
            return self.fn_sym(e.name)
        if k == 'builtin':
            return e.name
        raise EmitError(f"unknown binding {kind} for {e.name}")

    # ------------------------------------------------------------- statements

    def stmt(self, s, ind: str):
        if isinstance(s, ast.Block):
            self.out(ind + '{')
            for inner in s.stmts:
                self.stmt(inner, ind + IND)
            self.out(ind + '}')
            return
        if isinstance(s, ast.EmptyStmt):
            self.out(ind + ';')
            return
        if isinstance(s, ast.VarDecl):
            ty = self.res.decl_types[id(s)]
            decl = self.ctype(ty, self.local_sym(s.name))
            if s.init is not None:
                self.out(f"{ind}{decl} = {self.ex(s.init)};")
            else:
                self.out(f"{ind}{decl};")
            return
        if isinstance(s, ast.ExprStmt):
            self.out(f"{ind}{self.ex(s.expr)};")
            return
        if isinstance(s, ast.IfStmt):
            self.out(f"{ind}if ({self.ex(s.cond)})")
            self.block_or_stmt(s.then, ind)
            if s.orelse is not None:
                self.out(f"{ind}else")
                self.block_or_stmt(s.orelse, ind)
            return
        if isinstance(s, ast.WhileStmt):
            self.out(f"{ind}while ({self.ex(s.cond)})")
            self.block_or_stmt(s.body, ind)
            return
        if isinstance(s, ast.ForStmt):
            init = self.ex(s.init) if s.init is not None else ''
            cond = self.ex(s.cond) if s.cond is not None else ''
            step = self.ex(s.step) if s.step is not None else ''
            self.out(f"{ind}for ({init}; {cond}; {step})")
            self.block_or_stmt(s.body, ind)
            return
        if isinstance(s, ast.ReturnStmt):
            self.emit_return(s, ind)
            return
        if isinstance(s, (ast.GotoDirect, ast.GotoIndirect, ast.GotoWithEnv)):
            self.emit_goto(s, ind)
            return
        raise EmitError(f"cannot emit statement {s!r}")

    def block_or_stmt(self, s, ind: str):
        if isinstance(s, ast.Block):
            self.stmt(s, ind)
        else:
            self.out(ind + '{')
            self.stmt(s, ind + IND)
            self.out(ind + '}')

    def emit_return(self, s: ast.ReturnStmt, ind: str):
        if self.cur_seg is not None:
            raise EmitError(f"return survived lowering in segment "
                            f"{self.cur_seg.name}")
        captures = self.cur_fn is not None and self.cur_fn.captures
        if not captures:
            if s.value is None:
                self.out(f"{ind}return;")
            else:
                self.out(f"{ind}return {self.ex(s.value)};")
            return
        # the environment dies when its function returns normally
        self.out(ind + '{')
        if s.value is None:
            self.out(f"{ind + IND}cbc_rt_env_kill(cbc_env);")
            self.out(f"{ind + IND}return;")
        else:
            rty = self.ctype(self.cur_fn.sig.ret)
            self.out(f"{ind + IND}{rty} cbc_rv = {self.ex(s.value)};")
            self.out(f"{ind + IND}cbc_rt_env_kill(cbc_env);")
            self.out(f"{ind + IND}return cbc_rv;")
        self.out(ind + '}')

    # ------------------------------------------------------------------ gotos

    def emit_goto(self, s, ind: str):
        gp: GotoPlan = self.lu.goto_plans[id(s)]
        self.out(ind + '{')
        b = ind + IND
        if self.cur_seg is None:
            # C functions have no frame local; the plan still writes slots
            self.out(f"{b}char *cbc_f = cbc_rt_frame();")
            self.out(f"{b}(void)cbc_f;")

        direct_name = s.target if isinstance(s, ast.GotoDirect) else None
        if direct_name is None:
            # evaluate the transfer target before the plan writes the frame
            self.out(f"{b}cbc_segid cbc_t = {self.ex(s.target)};")
            target = 'cbc_t'
        else:
            target = self.seg_value(direct_name)
        if isinstance(s, ast.GotoWithEnv):
            self.out(f"{b}void *cbc_e = {self.ex(s.env)};")

        self.emit_plan(s, gp, b)

        if isinstance(s, ast.GotoWithEnv):
            self.out(f"{b}cbc_rt_set_env(cbc_e);")

        if self.cur_seg is not None:
            if self.tramp:
                self.out(f"{b}return {target};")
            elif direct_name is not None:
                self.out(f"{b}CBC_TAILCALL return "
                         f"{self.seg_sym(direct_name)}();")
            else:
                self.out(f"{b}CBC_TAILCALL return ((cbc_step_fn){target})();")
        else:
            # transfers out of C functions hand control to the runtime;
            # the only way back here is an environment resume
            self.out(f"{b}cbc_rt_enter({target});")
            self.out(f'{b}cbc_rt_trap("cbc: segment chain halted inside '
                     f'a C function");')
        self.out(ind + '}')

    def emit_plan(self, s, gp: GotoPlan, ind: str):
        plan = gp.plan
        off_ty = {off: ty for off, ty in zip(gp.target_offsets, gp.target_types)}
        caller_off_ty = {off: ty for off, (_, ty) in
                         (zip(self.cur_seg.sig.frame_offsets,
                              self.cur_seg.sig.params or [])
                          if self.cur_seg is not None else [])}
        scratch_needed = any(st.dst.kind == 'temp'
                             and st.src.kind != 'expression'
                             for st in plan.steps)
        if scratch_needed:
            self.out(f"{ind}char *cbc_x = cbc_rt_stage();")

        temp_repr: dict[int, tuple] = {}
        scratch_off = 0
        for st in plan.steps:
            src_text, src_ty = self.plan_src(s, st.src, caller_off_ty, temp_repr)
            if st.dst.kind == 'temp':
                if st.src.kind == 'expression':
                    # expression temps are C locals: immune to frame traffic
                    # even if the expression calls back into segment code
                    name = f"cbc_a{st.dst.id}"
                    self.out(f"{ind}{self.ctype(src_ty, name)} = {src_text};")
                    temp_repr[st.dst.id] = ('local', name, src_ty)
                else:
                    lens = self.slot_lens(src_ty)
                    self.out(f"{ind}*{lens}(cbc_x + {scratch_off}) = {src_text};")
                    temp_repr[st.dst.id] = ('scratch', scratch_off, src_ty)
                    scratch_off += st.dst.width
                continue
            off = st.dst.id * 8
            dst_ty = off_ty[off]
            lens = self.slot_lens(dst_ty)
            cast = '' if dst_ty.kind == 'struct' else f"({self.ctype(dst_ty)})"
            self.out(f"{ind}*{lens}(cbc_f + {off}) = {cast}{src_text};")

    def plan_src(self, s, src, caller_off_ty, temp_repr):
        """C text plus value type for one CopyPlan source."""
        if src.kind == 'param-slot':
            off = src.id * 8
            ty = caller_off_ty[off]
            return self.slot_read('cbc_f', off, ty), ty
        if src.kind == 'temp':
            how = temp_repr[src.id]
            if how[0] == 'local':
                return how[1], how[2]
            return self.slot_read('cbc_x', how[1], how[2]), how[2]
        if src.kind == 'constant':
            from .types import INT
            return str(src.id), INT
        # local / expression: emit the original argument expression
        arg = s.args[src.id]
        return self.ex(arg, _PREC_UNARY), decay(arg.ty)

    # --------------------------------------------------------------- routines

    def unit(self) -> str:
        self.out(f"/* generated by cbc: backend={self.cfg.backend} "
                 f"paracopy={self.cfg.paracopy_mode} */")
        self.out(f'#include "{self.cfg.runtime_header_path}"')
        self.out('#include <stdio.h>')
        self.out('')
        self.out(f"#define CBC_MAX_FRAME {self.lu.max_frame}")
        self.out('')
        self.emit_structs()
        self.emit_globals()
        self.emit_prototypes()
        self.emit_functions_and_segments()
        if self.tramp and self.lu.segments:
            self.emit_table()
        # boot helper and main come last so the dispatch table is visible;
        # units without a main are booted by calling cbc_unit_boot()
        self.emit_boot_helper()
        self.emit_main()
        return '\n'.join(self.lines).rstrip() + '\n'

    def emit_structs(self):
        tags = [d.tag for d in self.res.unit.decls
                if isinstance(d, ast.StructDef) and d.fields is not None]
        if not tags:
            return
        for tag in tags:
            self.claim(f"struct {self.tag_sym(tag)}")
        for tag in tags:
            info = self.table.struct_info(tag)
            self.out(f"struct {self.tag_sym(tag)} {{")
            for fname, fty in info.fields:
                self.out(f"{IND}{self.ctype(fty, fname)};")
            self.out('};')
            self.out('')

    def emit_globals(self):
        any_out = False
        for decl in self.res.unit.decls:
            if not isinstance(decl, ast.VarDecl):
                continue
            ty = self.res.decl_types[id(decl)]
            sym = self.glob_sym(decl.name)
            self.claim(sym)
            text = self.ctype(ty, sym)
            if decl.init is not None:
                text += f" = {self.ex(decl.init)}"
            self.out(text + ';')
            any_out = True
        if any_out:
            self.out('')

    def emit_prototypes(self):
        if self.lu.segments:
            if self.tramp:
                ids = ', '.join(f"cbc_id_{s.name} = {s.index}"
                                for s in self.lu.segments)
                self.out(f"enum {{ {ids} }};")
            for seg in self.lu.segments:
                sym = self.seg_sym(seg.name)
                self.claim(sym)
                self.out(f"cbc_segid {sym}(void);")
            self.out('')
        protos = [f for f in self.lu.functions if f.name != 'main']
        if protos:
            for fn in protos:
                sym = self.fn_sym(fn.name)
                self.claim(sym)
                self.out(f"{self.fn_header(fn, declare=True)};")
            self.out('')

    def fn_header(self, fn, declare: bool = False) -> str:
        if not fn.sig.params:
            ptext = 'void'
        else:
            ptext = ', '.join(
                self.ctype(ty, '' if declare else self.local_sym(name))
                for name, ty in fn.sig.params)
        return self.ctype(fn.sig.ret, f"{self.fn_sym(fn.name)}({ptext})")

    def emit_functions_and_segments(self):
        # source order: functions and segments interleaved as written
        for decl in self.res.unit.decls:
            if isinstance(decl, ast.CodeSegmentDef) and decl.body is not None:
                self.emit_segment(self.lu.segment(decl.name))
            elif isinstance(decl, ast.FunctionDef) and decl.body is not None \
                    and decl.name != 'main':
                self.emit_function(self._lowered_fn(decl.name))

    def _lowered_fn(self, name: str):
        for fn in self.lu.functions:
            if fn.name == name:
                return fn
        raise EmitError(f"function {name} not lowered")

    def emit_segment(self, seg):
        self.cur_seg, self.cur_fn = seg, None
        self.slot_of = {}
        offs = seg.sig.frame_offsets
        for i, (name, ty) in enumerate(seg.sig.params or []):
            self.slot_of[name] = (offs[i], ty)
        self.out(f"cbc_segid {self.seg_sym(seg.name)}(void)")
        self.out('{')
        self.out(f"{IND}char *cbc_f = cbc_rt_frame();")
        self.out(f"{IND}(void)cbc_f;")
        for s in seg.decl.body.stmts:
            self.stmt(s, IND)
        self.out('}')
        self.out('')
        self.cur_seg = None

    def emit_function(self, fn):
        self.cur_seg, self.cur_fn = None, fn
        self.slot_of = {}
        self.out(self.fn_header(fn))
        self.out('{')
        if fn.name == 'main':
            self.out(f"{IND}cbc_unit_boot();")
        if fn.captures:
            self.emit_capture_prologue(fn, IND)
        for s in fn.decl.body.stmts:
            self.stmt(s, IND)
        if fn.captures and fn.sig.ret.kind == 'void':
            self.out(f"{IND}cbc_rt_env_kill(cbc_env);")
        self.out('}')
        self.out('')
        self.cur_fn = None

    def emit_capture_prologue(self, fn, ind: str):
        self.out(f"{ind}void *cbc_env = cbc_rt_env_new();")
        self.out(f"{ind}if (CBC_ENV_CAPTURE(cbc_env)) {{")
        if fn.sig.ret.kind == 'void':
            self.out(f"{ind + IND}cbc_rt_env_kill(cbc_env);")
            self.out(f"{ind + IND}return;")
        else:
            self.out(f"{ind + IND}long cbc_st = cbc_rt_env_status(cbc_env);")
            self.out(f"{ind + IND}cbc_rt_env_kill(cbc_env);")
            self.out(f"{ind + IND}return ({self.ctype(fn.sig.ret)})cbc_st;")
        self.out(f"{ind}}}")

    def emit_boot(self, ind: str):
        n = FIRST_USER_INDEX + len(self.lu.segments)
        if self.tramp and self.lu.segments:
            self.out(f"{ind}cbc_rt_boot(cbc_table, {n}, CBC_MAX_FRAME);")
        else:
            self.out(f"{ind}cbc_rt_boot(0, 0, CBC_MAX_FRAME);")

    def emit_boot_helper(self):
        self.out('void cbc_unit_boot(void)')
        self.out('{')
        self.emit_boot(IND)
        self.out('}')
        self.out('')

    def emit_table(self):
        rows = ['cbc_rt_env_step', 'cbc_rt_halt_step']
        rows += [self.seg_sym(s.name) for s in self.lu.segments]
        self.out('const cbc_step_fn cbc_table[] = {')
        for row in rows:
            self.out(f"{IND}{row},")
        self.out('};')
        self.out('')

    def emit_main(self):
        for fn in self.lu.functions:
            if fn.name == 'main':
                self.emit_function(fn)
