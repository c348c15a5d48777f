"""The random program generator that feeds the conversion battery.

Its contract: deterministic per seed, always inside the convertible subset,
and numerically tame (no intermediate needs more than 32 bits), so results
agree between direct evaluation and any compiled form.
"""

from cbcc.parser import parse
from cbcc.sema import analyze
from cbcc.lower import lower
from cbcc.interp import run_function, run_unit
from cbcc.cps import transform
from cbcc.progen import generate, LIMIT


def test_deterministic_per_seed():
    a = generate(123)
    b = generate(123)
    assert a.source == b.source
    assert a.vectors == b.vectors
    assert a.root == b.root


def test_seeds_differ():
    assert generate(1).source != generate(2).source


def test_programs_check_and_convert():
    for seed in range(25):
        prog = generate(seed)
        res = analyze(parse(prog.source))
        assert res.ok, (seed, [d.format() for d in res.errors])
        transform(res, [prog.root])          # must stay inside the subset
        transform(res, [prog.root], opt='fuse')


def test_vectors_match_root_arity():
    for seed in range(25):
        prog = generate(seed)
        assert prog.vectors, 'at least one vector expected'
        assert all(len(v) == prog.arity for v in prog.vectors)


def test_values_stay_inside_32_bits():
    for seed in range(25):
        prog = generate(seed)
        res = analyze(parse(prog.source))
        for vec in prog.vectors:
            v = run_function(res, prog.root, list(vec))
            assert isinstance(v, int)
            assert abs(v) < LIMIT, (seed, vec, v)
            assert abs(v) < 2 ** 31


def test_requested_function_count():
    prog = generate(7, n_funcs=5)
    res = analyze(parse(prog.source))
    defined = [f for f, sig in res.functions.items() if sig.defined]
    assert len(defined) == 5


def test_with_main_prints_the_first_vector():
    prog = generate(11, with_main=True)
    res = analyze(parse(prog.source))
    assert res.ok
    want = run_function(res, prog.root, list(prog.vectors[0]))
    r = run_unit(res, lower(res))
    assert r.stdout == f"{want}\n"
    assert r.status == 0
