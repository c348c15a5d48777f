"""Conversion of restricted C functions into code segments.

A function with k call sites becomes 1 + k segments: the entry segment runs
everything up to and including the first call's transfer, and each call site
gets a continuation segment that resumes after it.  Calls communicate
through an explicit stack of continuation-interface records — the caller
pushes the return continuation plus whatever locals are still live, and the
continuation segment pops them back:

    struct f0_k0_interface *c =
        (struct f0_k0_interface *)(sp -= sizeof(struct f0_k0_interface));
    c->ret = f0_k0;
    c->k_ = k;
    goto g0(i + 3, sp);

Live sets come from a backward liveness pass, so only values actually read
after the call are saved.  Loops survive only as self-transferring segments,
and branches containing calls or returns reconverge through join segments;
generated units therefore stay clean under the strict lint profile.

``opt='fuse'`` eliminates interface pushes on straight chains: each callee
is specialized against its static continuation and the caller's live values
ride along as extra goto arguments instead of stack slots.  Recursive calls
have no static continuation and fall back to a push.

Callers that stay plain C reach converted functions through generated
bridges: per entry function ``f``, an ``f_call`` function captures its own
continuation, pushes the one ``main_continuation`` record, and enters the
chain; the matching ``f_ret`` segment resumes it with the result.  Calls in
kept code are rewritten to the bridge, so ``main`` keeps working unchanged.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from . import ast
from .parser import parse
from .sema import SemaResult, analyze

CODE = 'E-CPS-UNSUPPORTED'


class CpsError(Exception):
    def __init__(self, span, message: str, file: str = '<input>'):
        self.span = span or ast.NO_SPAN
        self.message = message
        self.file = file
        super().__init__(message)

    def format(self) -> str:
        return (f"{self.file}:{self.span.line}:{self.span.col}: "
                f"{CODE}: {self.message}")


@dataclass(frozen=True)
class ContInterface:
    name: str
    saved: tuple[str, ...]          # live variables, in field order


@dataclass(frozen=True)
class SplitPoint:
    function: str                   # segment-name base, e.g. g0 or g0_s0
    index: int
    callee: str
    live: tuple[str, ...]
    interface: str | None           # None when the continuation was fused
    seg: str                        # segment holding the transfer
    cont: str                       # continuation segment


@dataclass
class CpsResult:
    unit: ast.TranslationUnit
    roots: tuple[str, ...]
    closure: tuple[str, ...]
    split_points: list[SplitPoint]
    interfaces: list[ContInterface]
    segments_of: dict[str, list[str]]
    bridges: dict[str, str]         # function -> bridge name


# ----------------------------------------------------------------- helpers

def _int():
    return ast.TName('int')


def _id(name: str) -> ast.Ident:
    return ast.Ident(name)


def _segptr() -> ast.TypeExpr:
    # the `__code (*ret)();` field type
    return ast.TPtr(ast.TFun(ast.TSeg(), None, True))


def _idents_of(node, names: set[str]) -> set[str]:
    return {n.name for n in ast.walk(node)
            if isinstance(n, ast.Ident) and n.name in names}


def _has_call(node) -> bool:
    return any(isinstance(n, ast.Call) for n in ast.walk(node))


def _has_return(node) -> bool:
    return any(isinstance(n, ast.ReturnStmt) for n in ast.walk(node))


def _returns(stmts) -> bool:
    """Conservative all-paths-return check; loops never count."""
    for s in stmts:
        if isinstance(s, ast.ReturnStmt):
            return True
        if isinstance(s, ast.Block) and _returns(s.stmts):
            return True
        if (isinstance(s, ast.IfStmt) and s.orelse is not None
                and _returns([s.then]) and _returns([s.orelse])):
            return True
    return False


class _Names:
    def __init__(self, taken):
        self.taken = set(taken)

    def fresh(self, base: str) -> str:
        name, n = base, 0
        while name in self.taken:
            n += 1
            name = f"{base}{n}"
        self.taken.add(name)
        return name


def _all_names(node) -> set[str]:
    out = set()
    for n in ast.walk(node):
        if isinstance(n, ast.Ident):
            out.add(n.name)
        elif isinstance(n, (ast.VarDecl, ast.Member)):
            out.add(n.name)
    return out


# ------------------------------------------------------------ subset check

_ALLOWED_STMTS = (ast.Block, ast.VarDecl, ast.ExprStmt, ast.IfStmt,
                  ast.WhileStmt, ast.ForStmt, ast.ReturnStmt, ast.EmptyStmt)


class _Subset:
    """Validates the transformable subset and discovers its call closure.

    Subset functions are pure int computations: int locals and parameters,
    arithmetic, branches, call-free loops, and calls to other subset
    functions.  Purity matters — call extraction reorders evaluation, which
    is only sound when callees cannot observe one another.
    """

    def __init__(self, res: SemaResult, file: str):
        self.res = res
        self.file = file
        self.fns = {d.name: d for d in res.unit.decls
                    if isinstance(d, ast.FunctionDef) and d.body is not None}

    def fail(self, span, msg):
        raise CpsError(span, msg, self.file)

    def closure(self, roots) -> list[str]:
        out: list[str] = []
        queue = list(roots)
        while queue:
            name = queue.pop(0)
            if name in out:
                continue
            decl = self.fns.get(name)
            if decl is None:
                self.fail(None, f"{name} is not a defined function")
            if name == 'main':
                self.fail(decl.span, "main cannot become a segment")
            out.append(name)
            for callee in sorted(self.check(decl)):
                if callee not in out:
                    queue.append(callee)
        return out

    def check(self, decl: ast.FunctionDef) -> set[str]:
        sig = self.res.functions[decl.name]
        if sig.ret.kind != 'int':
            self.fail(decl.span, f"{decl.name} does not return int")
        if sig.varargs or sig.params is None:
            self.fail(decl.span, f"{decl.name} has an unsupported signature")
        for pname, pty in sig.params:
            if pty.kind != 'int' or not pname:
                self.fail(decl.span, f"{decl.name} takes a non-int parameter")
        if not _returns(decl.body.stmts):
            self.fail(decl.span,
                      f"control may leave {decl.name} without a return")
        callees: set[str] = set()
        self._stmts(decl.body.stmts, callees)
        return callees

    def _stmts(self, stmts, callees):
        for s in stmts:
            self._stmt(s, callees)

    def _stmt(self, s, callees):
        if not isinstance(s, _ALLOWED_STMTS):
            self.fail(s.span, f"{type(s).__name__} is outside the subset")
        if isinstance(s, ast.Block):
            self._stmts(s.stmts, callees)
        elif isinstance(s, ast.VarDecl):
            ty = self.res.decl_types.get(id(s))
            if ty is None or ty.kind != 'int':
                self.fail(s.span, f"local {s.name} is not int")
            if s.init is not None:
                self._expr(s.init, callees)
        elif isinstance(s, ast.ExprStmt):
            self._expr(s.expr, callees)
        elif isinstance(s, ast.IfStmt):
            self._expr(s.cond, callees)
            self._stmt(s.then, callees)
            if s.orelse is not None:
                self._stmt(s.orelse, callees)
        elif isinstance(s, (ast.WhileStmt, ast.ForStmt)):
            if _has_call(s):
                self.fail(s.span, "loop contains a call")
            if isinstance(s, ast.WhileStmt):
                self._expr(s.cond, callees)
            else:
                for part in (s.init, s.cond, s.step):
                    if part is not None:
                        self._expr(part, callees)
            self._stmt(s.body, callees)
        elif isinstance(s, ast.ReturnStmt):
            if s.value is None:
                self.fail(s.span, "return carries no value")
            self._expr(s.value, callees)

    def _expr(self, e, callees):
        if isinstance(e, ast.IntLit):
            return
        if isinstance(e, ast.Ident):
            kind = self.res.binding.get(id(e), ('?',))[0]
            if kind not in ('param', 'local'):
                self.fail(e.span, f"{e.name} is not a local int value")
            return
        if isinstance(e, ast.Unary):
            if e.op == '&':
                self.fail(e.span, "local would have its address taken")
            self._expr(e.expr, callees)
            return
        if isinstance(e, ast.IncDec):
            if not isinstance(e.expr, ast.Ident):
                self.fail(e.span, "++/-- applies to a non-variable")
            self._expr(e.expr, callees)
            return
        if isinstance(e, ast.Binary):
            if e.op in ('&&', '||') and _has_call(e.right):
                self.fail(e.span, f"call on the short-circuit side of {e.op}")
            self._expr(e.left, callees)
            self._expr(e.right, callees)
            return
        if isinstance(e, ast.Assign):
            if not isinstance(e.target, ast.Ident):
                self.fail(e.span, "assignment target is not a variable")
            self._expr(e.target, callees)
            self._expr(e.value, callees)
            return
        if isinstance(e, ast.Call):
            if not isinstance(e.callee, ast.Ident):
                self.fail(e.span, "call through an expression")
            if e.callee.name not in self.fns:
                self.fail(e.span, f"{e.callee.name} is outside the subset")
            callees.add(e.callee.name)
            for a in e.args:
                self._expr(a, callees)
            return
        self.fail(e.span, f"{type(e).__name__} is outside the subset")


# ----------------------------------------------------------- normalization

def _normalize(body: list[ast.Stmt], names: _Names,
               temps: set[str]) -> list[ast.Stmt]:
    """Flatten declarations into assignments and hoist every call into a
    `t = callee(args);` statement of its own, left-to-right."""

    def expr(e, pre):
        e = copy.copy(e)
        if isinstance(e, ast.Call):
            e.args = [expr(a, pre) for a in e.args]
            t = names.fresh('t')
            temps.add(t)
            pre.append(ast.ExprStmt(ast.Assign('=', _id(t), e), span=e.span))
            return _id(t)
        for f in ('expr', 'left', 'right', 'target', 'value'):
            if hasattr(e, f):
                setattr(e, f, expr(getattr(e, f), pre))
        return e

    def stmts(body):
        out = []
        for s in body:
            out.extend(stmt(s))
        return out

    def assign(name, value, pre, span):
        # `x = f(...)` keeps its own name as the call result
        if isinstance(value, ast.Call):
            value = copy.copy(value)
            value.args = [expr(a, pre) for a in value.args]
        else:
            value = expr(value, pre)
        return pre + [ast.ExprStmt(ast.Assign('=', _id(name), value),
                                   span=span)]

    def stmt(s):
        pre: list[ast.Stmt] = []
        if isinstance(s, ast.Block):
            return stmts(s.stmts)
        if isinstance(s, ast.EmptyStmt):
            return []
        if isinstance(s, ast.VarDecl):
            # declarations re-materialize later, per segment, on first use
            if s.init is None:
                return []
            return assign(s.name, s.init, pre, s.span)
        if isinstance(s, ast.ExprStmt):
            if (isinstance(s.expr, ast.Assign) and s.expr.op == '='
                    and isinstance(s.expr.target, ast.Ident)):
                return assign(s.expr.target.name, s.expr.value, pre, s.span)
            e = expr(s.expr, pre)
            keep = isinstance(e, (ast.Assign, ast.IncDec))
            return pre + ([ast.ExprStmt(e, span=s.span)] if keep else [])
        if isinstance(s, ast.ReturnStmt):
            value = expr(s.value, pre)
            return pre + [ast.ReturnStmt(value, span=s.span)]
        if isinstance(s, ast.IfStmt):
            cond = expr(s.cond, pre)
            then = ast.Block(stmt(s.then), span=s.then.span)
            orelse = (ast.Block(stmt(s.orelse), span=s.orelse.span)
                      if s.orelse is not None else None)
            return pre + [ast.IfStmt(cond, then, orelse, span=s.span)]
        if isinstance(s, ast.WhileStmt):
            # subset loops are call-free, so nothing hoists out of them
            return [ast.WhileStmt(copy.deepcopy(s.cond),
                                  ast.Block(stmt(s.body), span=s.body.span),
                                  span=s.span)]
        if isinstance(s, ast.ForStmt):
            out = []
            if s.init is not None:
                out.extend(stmt(ast.ExprStmt(s.init, span=s.span)))
            cond = (copy.deepcopy(s.cond) if s.cond is not None
                    else ast.IntLit(1))
            inner = stmt(s.body)
            if s.step is not None:
                inner += stmt(ast.ExprStmt(s.step, span=s.span))
            out.append(ast.WhileStmt(cond, ast.Block(inner, span=s.span),
                                     span=s.span))
            return out
        raise CpsError(s.span, f"cannot normalize {type(s).__name__}")

    return stmts(body)


# ---------------------------------------------------------------- liveness

class _Liveness:
    """Backward liveness over normalized statements.  live_after[id(s)]
    holds the variables read downstream of s; ret_extra names values every
    return transfers onward (continuation threads in fused copies)."""

    def __init__(self, varnames: set[str], ret_extra: frozenset[str]):
        self.names = varnames
        self.ret_extra = ret_extra
        self.live_after: dict[int, frozenset[str]] = {}
        self.live_before: dict[int, frozenset[str]] = {}

    def run(self, stmts, out: frozenset[str]) -> frozenset[str]:
        live = out
        for s in reversed(stmts):
            self.live_after[id(s)] = live
            live = self.step(s, live)
            self.live_before[id(s)] = live
        return live

    def reads(self, e) -> frozenset[str]:
        # embedded assignments count as reads of their target — an
        # over-approximation that only ever saves a value needlessly
        return frozenset(_idents_of(e, self.names))

    def step(self, s, out: frozenset[str]) -> frozenset[str]:
        if isinstance(s, ast.ExprStmt):
            e = s.expr
            if isinstance(e, ast.Assign) and isinstance(e.target, ast.Ident):
                gen = self.reads(e.value)
                if e.op == '=':
                    return (out - {e.target.name}) | gen
                return out | gen | {e.target.name}
            if isinstance(e, ast.IncDec):
                return out | {e.expr.name}
            return out | self.reads(e)
        if isinstance(s, ast.ReturnStmt):
            return self.reads(s.value) | self.ret_extra
        if isinstance(s, ast.IfStmt):
            a = self.run(s.then.stmts, out)
            b = self.run(s.orelse.stmts, out) if s.orelse is not None else out
            return a | b | self.reads(s.cond)
        if isinstance(s, ast.WhileStmt):
            live = out
            while True:
                body_in = self.run(s.body.stmts, live | out)
                new = live | body_in | self.reads(s.cond) | out
                if new == live:
                    return new
                live = new
        if isinstance(s, ast.EmptyStmt):
            return out
        raise CpsError(s.span, f"liveness over {type(s).__name__}")


# ---------------------------------------------------------------- builders

@dataclass
class _Seg:
    name: str
    params: list[str]               # int parameters; sp is appended on print
    body: list[ast.Stmt] = field(default_factory=list)
    declared: set[str] = field(default_factory=set)


class _FnBuilder:
    """Emits the segment chain for one function (or one fused copy of it).

    kappa says where return values go: ('ret',) jumps through the record at
    the stack head, ('seg', name) jumps straight to a known continuation
    segment, threading `threads` along as extra arguments.
    """

    def __init__(self, tr: '_Transform', decl: ast.FunctionDef,
                 base: str, kappa, threads: tuple[str, ...]):
        self.tr = tr
        self.decl = decl
        self.fn = decl.name
        self.base = base
        self.kappa = kappa
        self.threads = threads
        self.counter = {'k': 0, 'j': 0, 'l': 0}
        self.segments: list[_Seg] = []
        self.cur: _Seg | None = None

        params = [n for n, _ in tr.res.functions[self.fn].params]
        self.names = _Names(_all_names(decl.body) | set(params)
                            | set(threads))
        self.spvar = self.names.fresh('sp')
        self.cvar = self.names.fresh('c')
        temps: set[str] = set()
        body = _normalize(decl.body.stmts, self.names, temps)
        decls = {n.name for n in ast.walk(decl.body)
                 if isinstance(n, ast.VarDecl)}
        self.varnames = set(params) | set(threads) | decls | temps

        self.lv = _Liveness(self.varnames, frozenset(threads))
        self.lv.run(body, frozenset(threads))

        self.open(base, params + list(threads))
        self.emit(body, landing=None)

    # -- segment plumbing

    def open(self, name: str, params: list[str]):
        self.cur = _Seg(name, list(params), declared=set(params))
        self.segments.append(self.cur)
        self.tr.segments_of.setdefault(self.base, []).append(name)

    def next_name(self, kind: str) -> str:
        n = self.counter[kind]
        self.counter[kind] += 1
        return f"{self.base}_{kind}{n}"

    def ensure_declared(self, node):
        """Synthesize `int x;` for function variables this statement touches
        that the current segment has not introduced yet."""
        for name in sorted(_idents_of(node, self.varnames)):
            if name not in self.cur.declared:
                self.cur.declared.add(name)
                self.cur.body.append(ast.VarDecl(_int(), name, None))

    def put(self, stmt: ast.Stmt):
        self.ensure_declared(stmt)
        self.cur.body.append(stmt)

    def order(self, names) -> list[str]:
        """Deterministic live-variable order: signature parameters first,
        then threads, then locals by name."""
        sig = [n for n, _ in self.tr.res.functions[self.fn].params]
        head = [n for n in sig + list(self.threads) if n in names]
        return head + sorted(n for n in names if n not in head)

    def sp(self) -> ast.Ident:
        return _id(self.spvar)

    def goto_seg(self, name: str, args: list) -> ast.GotoDirect:
        return ast.GotoDirect(name, args + [self.sp()])

    # -- statement chain

    def emit(self, stmts: list[ast.Stmt], landing):
        for i, s in enumerate(stmts):
            if (isinstance(s, ast.ExprStmt)
                    and isinstance(s.expr, ast.Assign)
                    and isinstance(s.expr.value, ast.Call)):
                self.split(s, stmts[i + 1:], landing)
                return
            if isinstance(s, ast.ReturnStmt):
                self.ret(s.value)
                return
            if isinstance(s, ast.IfStmt):
                if _has_call(s) or _has_return(s):
                    self.branch(s, stmts[i + 1:], landing)
                    return
                self.put(s)
                continue
            if isinstance(s, ast.WhileStmt):
                self.loop(s, stmts[i + 1:], landing)
                return
            self.put(s)
        if landing is None:
            raise CpsError(self.decl.span,
                           f"control may leave {self.fn} without a return")
        name, lives = landing
        self.put(self.goto_seg(name, [_id(v) for v in lives]))

    def split(self, s: ast.ExprStmt, rest, landing):
        call: ast.Call = s.expr.value
        callee = call.callee.name
        result = s.expr.target.name
        live = self.order(self.lv.live_after[id(s)] - {result})
        args = [copy.deepcopy(a) for a in call.args]
        kidx = self.counter['k']
        kname = self.next_name('k')
        at_seg = self.cur.name

        target = None
        if self.tr.fuse:
            target = self.tr.specialize(callee, kname, tuple(live))
        if target is not None:
            for a in args:
                self.ensure_declared(a)
            self.put(self.goto_seg(target, args + [_id(v) for v in live]))
            iface = None
        else:
            self.tr.ensure_generic(callee)
            iface = self.tr.interface(self.base, kidx, tuple(live))
            ptr = ast.TPtr(ast.TStruct(iface))
            grow = ast.Assign('-=', self.sp(),
                              ast.SizeofType(ast.TStruct(iface)))
            # a continuation segment that itself splits has already declared
            # the record pointer for its own pop, and possibly with a
            # different struct type — give this push its own local
            cvar = self.cvar
            if cvar in self.cur.declared:
                cvar = self.names.fresh('c')
            self.cur.declared.add(cvar)
            self.cur.body.append(
                ast.VarDecl(ptr, cvar, ast.Cast(ptr, grow)))
            self.put(ast.ExprStmt(ast.Assign(
                '=', ast.Member(_id(cvar), 'ret', True), _id(kname))))
            for v in live:
                self.put(ast.ExprStmt(ast.Assign(
                    '=', ast.Member(_id(cvar), f"{v}_", True), _id(v))))
            self.put(self.goto_seg(callee, args))

        self.tr.split_points.append(SplitPoint(
            self.base, kidx, callee, tuple(live), iface, at_seg, kname))

        self.open(kname, [result] + (live if iface is None else []))
        if iface is not None:
            if live:    # nothing to restore -> no record pointer needed
                ptr = ast.TPtr(ast.TStruct(iface))
                self.cur.declared.add(self.cvar)
                self.cur.body.append(ast.VarDecl(
                    ptr, self.cvar, ast.Cast(ptr, self.sp())))
                for v in live:
                    self.cur.declared.add(v)
                    self.cur.body.append(ast.VarDecl(
                        _int(), v, ast.Member(_id(self.cvar), f"{v}_", True)))
            self.put(ast.ExprStmt(ast.Assign(
                '+=', self.sp(), ast.SizeofType(ast.TStruct(iface)))))
        self.emit(rest, landing)

    def ret(self, value: ast.Expr):
        value = copy.deepcopy(value)
        self.ensure_declared(value)
        if self.kappa[0] == 'ret':
            target = ast.Member(
                ast.Cast(ast.TPtr(ast.TStruct(self.tr.cont_name)), self.sp()),
                'ret', True)
            self.put(ast.GotoIndirect(target, [value, self.sp()]))
        else:
            self.put(self.goto_seg(
                self.kappa[1], [value] + [_id(t) for t in self.threads]))

    def branch(self, s: ast.IfStmt, rest, landing):
        if rest:
            join = self.next_name('j')
            inner = (join, self.order(self.lv.live_after[id(s)]))
        else:
            join = None
            inner = landing

        head = self.cur
        cond = copy.deepcopy(s.cond)
        self.ensure_declared(cond)
        then_body = self._arm(s.then.stmts, inner, head)
        if s.orelse is not None:
            else_body = self._arm(s.orelse.stmts, inner, head)
        else:
            else_body = None
        self.cur = head

        if else_body is None:
            # the else path falls straight through to the join
            assert inner is not None, 'checked by the all-paths-return rule'
            name, lives = inner
            tail = self.goto_seg(name, [_id(v) for v in lives])
            self.ensure_declared(tail)
            self.cur.body.append(ast.IfStmt(cond, ast.Block(then_body), None))
            self.cur.body.append(tail)
        else:
            self.cur.body.append(
                ast.IfStmt(cond, ast.Block(then_body), ast.Block(else_body)))

        if join is not None:
            self.open(join, list(inner[1]))
            self.emit(rest, landing)

    def _arm(self, stmts, inner, head) -> list[ast.Stmt]:
        """Emit one branch arm inline; splits inside it spill into fresh
        continuation segments, leaving a terminating goto in the arm."""
        probe = _Seg(head.name, list(head.params),
                     declared=set(head.declared))
        self.cur = probe
        self.emit(list(stmts), landing=inner)
        return probe.body

    def loop(self, s: ast.WhileStmt, rest, landing):
        lname = self.next_name('l')
        xname = f"{lname}x"
        lives_in = self.order(self.lv.live_before[id(s)])
        lives_out = self.order(self.lv.live_after[id(s)])

        self.put(self.goto_seg(lname, [_id(v) for v in lives_in]))

        self.open(lname, list(lives_in))
        head = self.cur
        cond = copy.deepcopy(s.cond)
        self.ensure_declared(cond)
        body = self._arm(s.body.stmts, (lname, lives_in), head)
        self.cur = head
        self.cur.body.append(ast.IfStmt(cond, ast.Block(body), None))
        exit_goto = self.goto_seg(xname, [_id(v) for v in lives_out])
        self.ensure_declared(exit_goto)
        self.cur.body.append(exit_goto)

        self.open(xname, list(lives_out))
        self.emit(rest, landing)


# --------------------------------------------------------------- transform

class _Transform:
    def __init__(self, res: SemaResult, roots, opt: str | None, file: str):
        if opt not in (None, 'fuse'):
            raise ValueError(f"unknown conversion optimization {opt!r}")
        self.res = res
        self.fuse = opt == 'fuse'
        self.file = file
        sub = _Subset(res, file)
        self.roots = tuple(roots)
        self.closure = tuple(sub.closure(self.roots))
        self.fns = sub.fns

        self.split_points: list[SplitPoint] = []
        self.segments_of: dict[str, list[str]] = {}
        self.builders: list[_FnBuilder] = []
        self.generic: set[str] = set()
        self.ifaces: dict[tuple[str, ...], str] = {}
        self.iface_order: list[ContInterface] = []
        self.spec_memo: dict[tuple[str, str, int], str] = {}
        self.spec_stack: list[str] = []
        self.spec_count = 0

        self.topnames = _Names(
            {d.name for d in res.unit.decls
             if isinstance(d, (ast.FunctionDef, ast.CodeSegmentDef,
                               ast.VarDecl, ast.TypedefDecl))})
        self.tags = _Names({d.tag for d in res.unit.decls
                            if isinstance(d, ast.StructDef)})
        self.stack_name = self.topnames.fresh('stack')
        self.cont_name = self.tags.fresh('cont_interface')
        self.mc_name = self.tags.fresh('main_continuation')

        for name in (self.roots if self.fuse else self.closure):
            self.ensure_generic(name)

        self.bridges: dict[str, str] = {}
        self.kept: list[ast.TopDecl] = []
        self._collect_kept()
        self.bridge_decls: list[ast.TopDecl] = []
        for name in self.roots:
            self._bridge(name)
        for name in sorted(self._kept_callees - set(self.bridges)):
            self._bridge(name)
        self._rewrite_kept()

    # -- function bodies

    def ensure_generic(self, name: str):
        if name in self.generic:
            return
        self.generic.add(name)
        self.builders.append(
            _FnBuilder(self, self.fns[name], name, ('ret',), ()))

    def specialize(self, callee: str, kname: str,
                   threads: tuple[str, ...]) -> str | None:
        """Clone `callee` so it returns by jumping straight to segment
        `kname`, carrying len(threads) extra ints.  Returns None when the
        call is recursive and must go through the stack instead."""
        key = (callee, kname, len(threads))
        hit = self.spec_memo.get(key)
        if hit is not None:
            return hit
        if callee in self.spec_stack:
            return None
        base = f"{callee}_s{self.spec_count}"
        self.spec_count += 1
        self.spec_memo[key] = base
        params = {n for n, _ in self.res.functions[callee].params}
        pool = _Names(_all_names(self.fns[callee].body) | params)
        tnames = tuple(pool.fresh(f"v{i}_") for i in range(len(threads)))
        self.spec_stack.append(callee)
        try:
            builder = _FnBuilder(self, self.fns[callee], base,
                                 ('seg', kname), tnames)
        finally:
            self.spec_stack.pop()
        self.builders.append(builder)
        return base

    def interface(self, base: str, kidx: int, live: tuple[str, ...]) -> str:
        """Interface records are shared whenever the saved-field lists
        match; an empty live set needs only the bare return record."""
        hit = self.ifaces.get(live)
        if hit is not None:
            return hit
        if not live:
            name = self.cont_name
        else:
            name = self.tags.fresh(f"{base}_k{kidx}_interface")
            self.iface_order.append(ContInterface(name, live))
        self.ifaces[live] = name
        return name

    # -- kept declarations and bridges

    def _collect_kept(self):
        self._kept_callees: set[str] = set()
        closure = set(self.closure)
        for d in self.res.unit.decls:
            if isinstance(d, ast.FunctionDef) and d.name in closure:
                continue            # drop both definitions and prototypes
            d = copy.deepcopy(d)
            if isinstance(d, ast.FunctionDef) and d.body is not None:
                for n in ast.walk(d.body):
                    if (isinstance(n, ast.Call)
                            and isinstance(n.callee, ast.Ident)
                            and n.callee.name in closure):
                        self._kept_callees.add(n.callee.name)
            self.kept.append(d)

    def _bridge(self, name: str):
        bridge = self.topnames.fresh(f"{name}_call")
        retseg = self.topnames.fresh(f"{name}_ret")
        self.bridges[name] = bridge
        pnames = [n for n, _ in self.res.functions[name].params]
        local = _Names(set(pnames))
        sp, c = local.fresh('sp'), local.fresh('c')
        mcp = ast.TPtr(ast.TStruct(self.mc_name))
        stk = ast.TName(self.stack_name)
        body = [
            ast.VarDecl(stk, sp, ast.Call(_id('cbc_rt_stack_top'), [])),
            ast.VarDecl(mcp, c, ast.Cast(mcp, ast.Assign(
                '-=', _id(sp), ast.SizeofType(ast.TStruct(self.mc_name))))),
            ast.ExprStmt(ast.Assign(
                '=', ast.Member(_id(c), 'ret', True), _id(retseg))),
            ast.ExprStmt(ast.Assign(
                '=', ast.Member(_id(c), 'main_ret', True), ast.RetRef())),
            ast.ExprStmt(ast.Assign(
                '=', ast.Member(_id(c), 'env', True), ast.EnvRef())),
            ast.GotoDirect(name, [_id(p) for p in pnames] + [_id(sp)]),
        ]
        self.bridge_decls.append(ast.FunctionDef(
            bridge, _int(), [(_int(), p) for p in pnames], ast.Block(body)))
        rbody = [
            ast.VarDecl(mcp, 'c', ast.Cast(mcp, _id('sp'))),
            ast.GotoWithEnv(
                ast.Unary('*', ast.Member(_id('c'), 'main_ret', True)),
                [_id('v')],
                ast.Member(_id('c'), 'env', True)),
        ]
        self.bridge_decls.append(ast.CodeSegmentDef(
            retseg, [(_int(), 'v'), (stk, 'sp')], ast.Block(rbody)))

    def _rewrite_kept(self):
        for d in self.kept:
            if isinstance(d, ast.FunctionDef) and d.body is not None:
                for n in ast.walk(d.body):
                    if (isinstance(n, ast.Call)
                            and isinstance(n.callee, ast.Ident)
                            and n.callee.name in self.bridges):
                        n.callee = _id(self.bridges[n.callee.name])

    # -- unit assembly

    def unit(self) -> ast.TranslationUnit:
        stk = ast.TName(self.stack_name)
        decls: list = [
            ast.TypedefDecl(ast.TPtr(ast.TName('char')), self.stack_name),
            ast.StructDef(self.cont_name, [(_segptr(), 'ret')]),
            ast.StructDef(self.mc_name, [
                (_segptr(), 'ret'),
                (_segptr(), 'main_ret'),
                (ast.TPtr(ast.TName('void')), 'env'),
            ]),
        ]
        for iface in self.iface_order:
            decls.append(ast.StructDef(
                iface.name,
                [(_segptr(), 'ret')]
                + [(_int(), f"{v}_") for v in iface.saved]))
        segs = []
        for b in self.builders:
            for seg in b.segments:
                segs.append(ast.CodeSegmentDef(
                    seg.name,
                    [(_int(), p) for p in seg.params] + [(stk, b.spvar)],
                    ast.Block(seg.body)))
        protos: list = [ast.CodeSegmentDef(s.name, s.params, None)
                        for s in segs]
        for d in self.bridge_decls:
            if isinstance(d, ast.CodeSegmentDef):
                protos.append(ast.CodeSegmentDef(d.name, d.params, None))
            else:
                protos.append(ast.FunctionDef(d.name, d.ret, d.params, None))
        decls += protos + self.kept + segs + self.bridge_decls
        return copy.deepcopy(ast.TranslationUnit(decls))


def transform(res: SemaResult, roots, *, opt: str | None = None,
              file: str | None = None) -> CpsResult:
    """Convert the named functions (and everything they call) to segments.

    The returned unit keeps every declaration that was not converted; calls
    from kept code into converted functions are rewritten to go through the
    generated bridges, so the unit stays runnable as a whole.
    """
    if not roots:
        raise ValueError('no root functions given')
    if res.errors:
        raise CpsError(res.errors[0].span,
                       'cannot transform a unit with errors',
                       file or res.file)
    tr = _Transform(res, list(roots), opt, file or res.file)
    return CpsResult(
        unit=tr.unit(),
        roots=tr.roots,
        closure=tr.closure,
        split_points=tr.split_points,
        interfaces=list(tr.iface_order),
        segments_of=dict(tr.segments_of),
        bridges=dict(tr.bridges),
    )


# ------------------------------------------------------------------ checks

def check_push_pop_balance(result: CpsResult) -> list[str]:
    """Each stacked split point pushes its interface in the transfer
    segment and pops it in the continuation.  Branch arms may place several
    split points in one segment (and deduplication may give them the same
    record type), so pushes are counted per (segment, interface) group;
    each continuation belongs to exactly one split and pops exactly once.
    Returns a list of violations; empty means balanced."""

    def count(seg: ast.CodeSegmentDef, op: str, tag: str) -> int:
        return sum(1 for n in ast.walk(seg.body)
                   if isinstance(n, ast.Assign) and n.op == op
                   and isinstance(n.value, ast.SizeofType)
                   and isinstance(n.value.ctype, ast.TStruct)
                   and n.value.ctype.tag == tag)

    segs = {d.name: d for d in result.unit.decls
            if isinstance(d, ast.CodeSegmentDef) and d.body is not None}
    expected: dict[tuple[str, str], int] = {}
    problems = []
    for p in result.split_points:
        if p.interface is None:
            continue
        key = (p.seg, p.interface)
        expected[key] = expected.get(key, 0) + 1
        pops = count(segs[p.cont], '+=', p.interface)
        if pops != 1:
            problems.append(f"{p.cont}: {pops} pops of {p.interface} "
                            f"for split {p.function}#{p.index}")
    for (seg, iface), want in sorted(expected.items()):
        got = count(segs[seg], '-=', iface)
        if got != want:
            problems.append(f"{seg}: {got} pushes of {iface}, "
                            f"expected {want}")
    return problems


def roundtrip_check(source: str, roots, vectors, *,
                    opt: str | None = None) -> list[str]:
    """Differential check: interpret each root directly, then interpret its
    converted form through the bridge, and compare.  `vectors` is a list of
    (root, args) pairs.  Returns mismatch descriptions; empty means agreed.
    """
    from .interp import run_function
    from .lower import lower

    res = analyze(parse(source))
    if res.errors:
        raise ValueError('source does not check: ' + res.errors[0].format())
    out = transform(res, roots, opt=opt)
    text = ast.to_source(out.unit)
    res2 = analyze(parse(text))
    if res2.errors:
        raise AssertionError(
            'converted unit does not check:\n'
            + '\n'.join(d.format() for d in res2.errors)
            + '\n--- unit ---\n' + text)
    lu2 = lower(res2)
    mismatches = []
    for root, args in vectors:
        want = run_function(res, root, list(args))
        got = run_function(res2, out.bridges[root], list(args), lu=lu2)
        if want != got:
            mismatches.append(f"{root}{tuple(args)}: direct {want}, "
                              f"converted {got}")
    return mismatches
