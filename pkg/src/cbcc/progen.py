"""Random generation of small, well-behaved integer programs.

Differential workload for the function-to-segment conversion: every
generated program stays inside the transformable subset, terminates, and
performs no overflowing or otherwise undefined arithmetic, so interpreting
the original functions is a trustworthy oracle for their converted forms.

Safety is enforced by interval tracking: each expression carries the range
of values it can take given the declared argument range, operations that
could leave the safe band are simply not generated, divisors are nonzero
constants, and loops run a bounded counter shaped by a double-modulo clamp.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

LIMIT = 1 << 28         # intermediate values stay far away from int range
IN_BOUND = 60           # |argument| contract for every generated function
LOOP_MAX = 12           # loop trip counts live in [0, LOOP_MAX)


@dataclass(frozen=True)
class Iv:
    lo: int
    hi: int

    def __add__(self, o):
        return Iv(self.lo + o.lo, self.hi + o.hi)

    def __sub__(self, o):
        return Iv(self.lo - o.hi, self.hi - o.lo)

    def __mul__(self, o):
        c = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Iv(min(c), max(c))

    def __neg__(self):
        return Iv(-self.hi, -self.lo)

    def union(self, o):
        return Iv(min(self.lo, o.lo), max(self.hi, o.hi))

    @property
    def mag(self):
        return max(abs(self.lo), abs(self.hi))


BIT = Iv(0, 1)


@dataclass
class _Fn:
    name: str
    params: list[str]
    result: Iv
    body: list[str]


@dataclass
class GenProgram:
    source: str
    root: str
    arity: int
    vectors: list[tuple[int, ...]]


class _Gen:
    def __init__(self, rng: random.Random, n_funcs: int):
        self.rng = rng
        self.fns: list[_Fn] = []
        self.n_funcs = n_funcs
        self.tmp = 0

    # -- expressions: (text, interval) pairs

    def fresh(self) -> str:
        self.tmp += 1
        return f"x{self.tmp}"

    def const(self) -> tuple[str, Iv]:
        v = self.rng.randint(-40, 40)
        return (str(v) if v >= 0 else f"({v})"), Iv(v, v)

    def atom(self, env) -> tuple[str, Iv]:
        if env and self.rng.random() < 0.75:
            name = self.rng.choice(sorted(env))
            return name, env[name]
        return self.const()

    def expr(self, env, depth: int) -> tuple[str, Iv]:
        if depth <= 0 or self.rng.random() < 0.3:
            return self.atom(env)
        op = self.rng.choice('++--*/%<>')
        a, ia = self.expr(env, depth - 1)
        b, ib = self.expr(env, depth - 1)
        if op == '*':
            iv = ia * ib
            if iv.mag < LIMIT:
                return f"({a} * {b})", iv
            op = '+'        # product too wide, fall back to a sum
        if op in '+-':
            iv = ia + ib if op == '+' else ia - ib
            if iv.mag < LIMIT:
                return f"({a} {op} {b})", iv
            return a, ia
        if op in '/%':
            d = self.rng.randint(2, 9)
            if op == '/':
                m = ia.mag // d + 1
                return f"({a} / {d})", Iv(-m, m)
            return f"({a} % {d})", Iv(-(d - 1), d - 1)
        return f"({a} {'<' if op == '<' else '>'} {b})", BIT

    def clamp(self, env, bound: int) -> tuple[str, Iv]:
        """An in-[0,bound) expression; the double modulo fixes up the sign
        of C's truncating remainder."""
        e, _ = self.expr(env, 2)
        return f"(({e} % {bound} + {bound}) % {bound})", Iv(0, bound - 1)

    def cond(self, env) -> str:
        a, _ = self.expr(env, 2)
        b, _ = self.expr(env, 2)
        op = self.rng.choice(['<', '>', '<=', '>=', '==', '!='])
        text = f"{a} {op} {b}"
        if self.rng.random() < 0.25:
            c, _ = self.expr(env, 1)
            d, _ = self.expr(env, 1)
            glue = self.rng.choice(['&&', '||'])
            text = f"{text} {glue} {c} {'<' if glue == '&&' else '>'} {d}"
        return text

    def call(self, env) -> tuple[str, Iv] | None:
        if not self.fns:
            return None
        fn = self.rng.choice(self.fns)
        args = []
        for _ in fn.params:
            e, _ = self.clamp(env, IN_BOUND)
            args.append(e)
        return f"{fn.name}({', '.join(args)})", fn.result

    # -- statements; every emitter updates env bounds in place

    def stmt_decl(self, env, out, indent, allow_calls):
        name = self.fresh()
        if allow_calls and self.fns and self.rng.random() < 0.5:
            text, iv = self.call(env)
        else:
            text, iv = self.expr(env, 3)
        out.append(f"{indent}int {name} = {text};")
        env[name] = iv

    def stmt_assign(self, env, out, indent, allow_calls):
        if not env:
            return self.stmt_decl(env, out, indent, allow_calls)
        name = self.rng.choice(sorted(env))
        if allow_calls and self.fns and self.rng.random() < 0.4:
            text, iv = self.call(env)
            out.append(f"{indent}{name} = {text};")
            env[name] = iv
            return
        op = self.rng.choice(['=', '+=', '-='])
        text, iv = self.expr(env, 2)
        if op == '=':
            env[name] = iv
        else:
            nxt = env[name] + iv if op == '+=' else env[name] - iv
            if nxt.mag >= LIMIT:
                op = '='
                env[name] = iv
            else:
                env[name] = nxt
        out.append(f"{indent}{name} = {text};" if op == '='
                   else f"{indent}{name} {op} {text};")

    def stmt_if(self, env, out, indent, allow_calls, depth):
        cond = self.cond(env)
        out.append(f"{indent}if ({cond}) {{")
        then_env = dict(env)
        self.stmts(then_env, out, indent + '    ', allow_calls,
                   self.rng.randint(1, 2), depth)
        if self.rng.random() < 0.7:
            out.append(f"{indent}}} else {{")
            else_env = dict(env)
            self.stmts(else_env, out, indent + '    ', allow_calls,
                       self.rng.randint(1, 2), depth)
            out.append(f"{indent}}}")
        else:
            else_env = env
            out.append(f"{indent}}}")
        for name in env:
            env[name] = then_env[name].union(else_env[name])

    def stmt_loop(self, env, out, indent):
        cnt, acc = self.fresh(), self.fresh()
        bound, _ = self.clamp(env, LOOP_MAX)
        seed, iv0 = self.expr(env, 2)
        step, ivs = self.clamp(env, 1 << 12)
        total = Iv(iv0.lo, iv0.hi + (LOOP_MAX - 1) * (ivs.hi))
        if total.mag >= LIMIT:
            seed, iv0 = '0', Iv(0, 0)
            total = Iv(0, (LOOP_MAX - 1) * ivs.hi)
        if self.rng.random() < 0.5:
            out.append(f"{indent}int {cnt} = {bound};")
            out.append(f"{indent}int {acc} = {seed};")
            out.append(f"{indent}while ({cnt} > 0) {{")
            out.append(f"{indent}    {acc} += {step};")
            out.append(f"{indent}    {cnt} = {cnt} - 1;")
            out.append(f"{indent}}}")
        else:
            out.append(f"{indent}int {acc} = {seed};")
            out.append(f"{indent}int {cnt};")
            out.append(f"{indent}for ({cnt} = {bound}; {cnt} > 0; {cnt}--) "
                       f"{{")
            out.append(f"{indent}    {acc} += {step};")
            out.append(f"{indent}}}")
        env[cnt] = Iv(0, LOOP_MAX - 1)
        env[acc] = total

    def stmts(self, env, out, indent, allow_calls, n, depth):
        for _ in range(n):
            r = self.rng.random()
            if r < 0.35:
                self.stmt_decl(env, out, indent, allow_calls)
            elif r < 0.65:
                self.stmt_assign(env, out, indent, allow_calls)
            elif r < 0.8 and depth > 0:
                self.stmt_if(env, out, indent, allow_calls, depth - 1)
            else:
                self.stmt_loop(env, out, indent)

    # -- functions

    def function(self, index: int) -> _Fn:
        name = f"f{index}"
        nparams = self.rng.randint(1, 3)
        params = [f"a{i}" for i in range(nparams)]
        env = {p: Iv(-IN_BOUND, IN_BOUND) for p in params}
        out = [f"int {name}({', '.join('int ' + p for p in params)}) {{"]
        self.stmts(env, out, '    ', allow_calls=True,
                   n=self.rng.randint(2, 5), depth=2)
        result = None
        if self.rng.random() < 0.3:
            cond = self.cond(env)
            e, iv = self.expr(env, 2)
            out.append(f"    if ({cond}) return {e};")
            result = iv
        e, iv = self.expr(env, 3)
        out.append(f"    return {e};")
        out.append('}')
        result = iv if result is None else result.union(iv)
        fn = _Fn(name, params, result, out)
        self.fns.append(fn)
        return fn

    def program(self, n_vectors: int, with_main: bool) -> GenProgram:
        for i in range(self.n_funcs):
            self.function(i)
        root = self.fns[-1]
        vectors = [tuple(self.rng.randint(-IN_BOUND, IN_BOUND)
                         for _ in root.params)
                   for _ in range(n_vectors)]
        lines = []
        for fn in self.fns:
            lines.extend(fn.body)
            lines.append('')
        if with_main:
            args = ', '.join(str(v) for v in vectors[0])
            lines += ['int main(void) {',
                      f'    printf("%d\\n", {root.name}({args}));',
                      '    return 0;',
                      '}', '']
        return GenProgram('\n'.join(lines), root.name, len(root.params),
                          vectors)


def generate(seed: int, *, n_funcs: int | None = None, n_vectors: int = 4,
             with_main: bool = False) -> GenProgram:
    rng = random.Random(seed)
    return _Gen(rng, n_funcs or rng.randint(2, 4)).program(
        n_vectors, with_main)
