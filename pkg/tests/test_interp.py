"""Direct evaluation of the corpus, with expected outputs derived by hand.

The interpreter doubles as the oracle for the compiled backends, so its
outputs here are pinned hard: exact stdout bytes, exit status, and the
continuation-stack high-water mark where it is derivable from the record
sizes (one push = sizeof the interface struct, word-aligned fields).
"""

from pathlib import Path

import pytest

from cbcc.parser import parse
from cbcc.sema import analyze
from cbcc.lower import lower
from cbcc.interp import Machine, TrapError, run_function, run_unit

CORPUS = Path(__file__).resolve().parent.parent / 'src' / 'cbcc' / 'corpus'


def load(name):
    res = analyze(parse(CORPUS.joinpath(name).read_text()), file=name)
    assert res.ok, [d.format() for d in res.errors]
    return res, lower(res)


def run(name):
    return run_unit(*load(name))


# ------------------------------------------------------------ whole programs

def test_hello():
    r = run('hello.cbc')
    assert r.stdout == 'hello World\n'
    assert r.status == 0


def test_struct_valued_interfaces():
    # a.i = 42 crosses two segment boundaries by value
    r = run('interface.cbc')
    assert r.stdout == 'interface: 42\n'
    assert r.status == 0


def scheduler_expectation(threads=3, steps=15):
    """Simulation of the round-robin switcher: the scheduler advances the
    ring *before* jumping, so thread 1 goes first and ids cycle 1,2,0."""
    lines = []
    for k in range(steps):
        lines.append(f"step {steps - k} thread {(1 + k) % threads}")
    return '\n'.join(lines) + '\n'


def test_scheduler_interleaving():
    r = run('scheduler.cbc')
    assert r.stdout == scheduler_expectation()
    assert r.status == 0


def test_plain_function_chain():
    # f0(233): k=236, j=g0(236)=h0(240)+236=480, 236+4+480
    r = run('kernel_functions.cbc')
    assert r.stdout == 'result: 720\n'
    assert r.status == 0


def test_straight_conversion_listing():
    # the transcription's g passes i+3 where the original used i+4, so the
    # printed value is one lower than the function form: 719, not 720
    r = run('kernel_straight.cbc')
    assert r.stdout == '#0103: 719\n'
    assert r.status == 0
    # three live records at the deepest point, 24 bytes each:
    # main_continuation + f's interface + g's interface
    assert r.highwater == 72


def test_fused_conversion_listing():
    r = run('kernel_opt.cbc')
    assert r.stdout == '#0165: 720\n'
    assert r.status == 0
    # arguments ride inside goto, only main_continuation is ever pushed
    assert r.highwater == 24


# ------------------------------------------------------- functions as oracle

def test_direct_evaluation_of_kernel():
    res, lu = load('kernel_functions.cbc')
    assert run_function(res, 'f0', [233]) == 720
    assert run_function(res, 'g0', [236]) == 480
    assert run_function(res, 'h0', [240]) == 244


def test_segment_chain_callable_from_function():
    res, lu = load('loop.cbc')
    m = Machine(res, lu)
    assert m.call_function('run', [20000]) == 0
    # spin never pushes a continuation record
    assert m.highwater == 0


# -------------------------------------------------------------------- traps

def test_environment_is_one_shot():
    res, lu = load('deadenv.cbc')
    with pytest.raises(TrapError, match='dead environment'):
        run_unit(res, lu)


def test_first_resume_succeeds():
    res, lu = load('deadenv.cbc')
    assert run_function(res, 'grab', [], lu=lu) == 0


def test_bad_indirect_target_traps():
    # type-pun an int over a continuation slot, then jump through it
    src = """
    typedef char *stack;
    struct lie { __code (*ret)(); };
    struct truth { int a; };
    __code f(int i, stack sp)
    {
        struct truth *t = (struct truth *)sp;
        t->a = 9999;
        goto ((struct lie *)sp)->ret(i, sp);
    }
    int main()
    {
        stack sp = cbc_rt_stack_top();
        sp -= sizeof(struct lie);
        goto f(1, sp);
    }
    """
    res = analyze(parse(src))
    assert res.ok, [d.format() for d in res.errors]
    with pytest.raises(TrapError, match='bad segment id'):
        run_unit(res, lower(res))


def test_stack_overflow_traps():
    # push records forever without popping
    src = """
    typedef char *stack;
    struct rec { __code (*ret)(); int v_; };
    __code grow(int i, stack sp)
    {
        struct rec *c = (struct rec *)(sp -= sizeof(struct rec));
        c->v_ = i;
        goto grow(i + 1, sp);
    }
    int main()
    {
        goto grow(0, cbc_rt_stack_top());
    }
    """
    res = analyze(parse(src))
    assert res.ok, [d.format() for d in res.errors]
    with pytest.raises(TrapError, match='stack overflow'):
        run_unit(res, lower(res))
