"""Random programs, compiled and checked against the interpreter."""

import pytest

from cbcc.parser import parse
from cbcc.sema import analyze
from cbcc.lower import lower
from cbcc.interp import run_unit
from cbcc.progen import generate

from conftest import run_exe


@pytest.mark.parametrize('seed', range(12))
def test_generated_program_matches_interpreter(toolchain, seed):
    prog = generate(seed, with_main=True)
    res = analyze(parse(prog.source))
    assert res.ok
    rr = run_unit(res, lower(res))
    assert rr.status == 0

    exe = toolchain.compile_unit(f'gen{seed}', prog.source, 'trampoline')
    r = run_exe(exe)
    assert r.returncode == 0
    assert r.stdout == rr.stdout
