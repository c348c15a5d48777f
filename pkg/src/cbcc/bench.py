"""Benchmark harness: three builds of one small call chain, timed.

Variants:

  call-form     the kernel compiled as plain C, a driver loop calling f0(233)
  cps-straight  the kernel run through the segment conversion, no fusion
  cps-opt       the conversion with ``opt='fuse'`` (argument forwarding)

Each variant is linked into a self-timing binary that prints ``result:``,
``seconds=`` and (when the segment runtime is linked) ``highwater=`` lines.
The harness first runs every binary with a loop count of 1 and compares the
printed result against the interpreter's value for f0(233); timing only
happens once that gate passes.  A report is a list of rows plus the host
compiler identity and the exact flag set, written as one key=value record
line per row (stdout and a records file) and a human table.  Figures for
wall time and stack high-water are rendered next to the records file.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .parser import parse
from .sema import analyze
from .lower import lower
from .emit import emit, EmitConfig
from .paracopy import plan_cost
from .interp import run_function
from .cps import transform
from . import ast

VARIANTS = ('call-form', 'cps-straight', 'cps-opt')

# Table rows differ only in downstream compiler flags; the descriptors are
# recorded verbatim in the report so rows stay attributable.
PRESETS = {
    'plain': ('-O2',),
    'omit': ('-O2', '-fomit-frame-pointer'),
    'fast': ('-O3', '-fomit-frame-pointer'),
}

DEFAULT_LOOP = 10_000_000

RECORDS_NAME = 'bench_records.txt'
FIGURE_NAMES = ('bench_seconds.png', 'bench_highwater.png')


class BenchError(Exception):
    """A bench run that cannot produce a trustworthy report."""


# The kernel under test.  Plain C; the cps variants are derived from this
# same text, so all three binaries compute the same chain.
BENCH_SRC = """\
int g0(int i);
int h0(int i);

int f0(int i) {
    int k,j;
    k = 3+i;
    j = g0(i+3);
    return k+4+j;
}

int g0(int i) {
    return h0(i+4)+i;
}

int h0(int i) {
    return i+4;
}
"""

BENCH_ARG = 233

# Appended to the converted unit.  The loop lives inside the segment world:
# the return segment re-enters f0 until the countdown hits zero, so one
# environment capture covers the whole measurement.
CBC_BENCH_DRIVER = """\
int cbc_bench_loop;

__code cbc_bench_return(int i, stack sp)
{
    if (cbc_bench_loop-- > 0)
        goto f0(233, sp);
    goto (((struct main_continuation *)sp)->main_ret)(i),
        ((struct main_continuation *)sp)->env;
}

int bench_run(int n)
{
    stack sp = cbc_rt_stack_top();
    struct main_continuation *c =
        (struct main_continuation *)(sp -= sizeof(struct main_continuation));
    c->ret = cbc_bench_return;
    c->main_ret = __return;
    c->env = __environment;
    cbc_bench_loop = n - 1;
    goto f0(233, sp);
}
"""

# Timing driver for the cps variants.  Separate translation unit: it calls
# the entry through its emitted (mangled) symbol.
CPS_DRIVER = """\
#include <stdio.h>
#include <stdlib.h>
#include <time.h>
#include "cbc_rt.h"

int cbc_fn_bench_run(int n);
void cbc_unit_boot(void);

static double now_seconds(void)
{
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (double)ts.tv_sec + (double)ts.tv_nsec * 1e-9;
}

int main(int argc, char **argv)
{
    long n = argc > 1 ? atol(argv[1]) : 1;
    double t0, t1;
    int r;
    cbc_unit_boot();
    t0 = now_seconds();
    r = cbc_fn_bench_run((int)n);
    t1 = now_seconds();
    printf("result: %d\\n", r);
    printf("seconds= %.6f\\n", t1 - t0);
    printf("highwater= %d\\n", cbc_rt_stack_highwater());
    return 0;
}
"""

# Timing driver for the plain-C variant.  Kept in its own translation unit
# so the compiler cannot prove f0 pure and hoist the call; the volatile sink
# keeps the loop body alive.
CALL_DRIVER = """\
#include <stdio.h>
#include <stdlib.h>
#include <time.h>

int f0(int i);

static double now_seconds(void)
{
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (double)ts.tv_sec + (double)ts.tv_nsec * 1e-9;
}

volatile int cbc_bench_sink;

int main(int argc, char **argv)
{
    long n = argc > 1 ? atol(argv[1]) : 1;
    long i;
    double t0, t1;
    t0 = now_seconds();
    for (i = 0; i < n; i++)
        cbc_bench_sink = f0(233);
    t1 = now_seconds();
    printf("result: %d\\n", cbc_bench_sink);
    printf("seconds= %.6f\\n", t1 - t0);
    return 0;
}
"""


@dataclass(frozen=True)
class BenchRow:
    variant: str
    backend: str                      # '-' for call-form (no runtime involved)
    seconds: Optional[float]
    iterations: int
    highwater: Optional[int]
    plan_copies: int
    plan_temp_bytes: int
    value: Optional[int]
    failed: Optional[str] = None      # short reason; None means the row is good


@dataclass
class BenchReport:
    rows: list[BenchRow]
    compiler: str
    flags: tuple[str, ...]
    preset: str
    iterations: int
    oracle: int
    # True/False once both timed rows exist, None when either is missing
    ordering_ok: Optional[bool] = None


@dataclass(frozen=True)
class VariantBuild:
    """Everything needed to build one variant, before any compiler runs."""
    variant: str
    backend: str
    sources: dict[str, str]           # filename -> file text
    link_runtime: bool
    plan_copies: int
    plan_temp_bytes: int


def bench_oracle() -> int:
    """The expected result, evaluated directly on the kernel source."""
    res = analyze(parse(BENCH_SRC))
    assert not res.errors
    return run_function(res, 'f0', [BENCH_ARG])


def _cps_variant_source(opt: Optional[str]) -> str:
    res = analyze(parse(BENCH_SRC))
    assert not res.errors
    cres = transform(res, ['f0'], opt=opt)
    return ast.to_source(cres.unit) + '\n' + CBC_BENCH_DRIVER


def prepare_variant(variant: str, backend: str,
                    paracopy_mode: str = 'min') -> VariantBuild:
    """Produce the source set for one variant; no compiler involved."""
    if variant == 'call-form':
        return VariantBuild(variant, '-', {
            'bench_body.c': BENCH_SRC,
            'bench_driver.c': CALL_DRIVER,
        }, link_runtime=False, plan_copies=0, plan_temp_bytes=0)
    if variant == 'cps-straight':
        src = _cps_variant_source(None)
    elif variant == 'cps-opt':
        src = _cps_variant_source('fuse')
    else:
        raise BenchError(f"unknown variant {variant!r}")
    res = analyze(parse(src))
    if res.errors:
        msgs = '\n'.join(d.format() for d in res.errors)
        raise RuntimeError(f"internal: bench unit failed analysis:\n{msgs}")
    lu = lower(res, paracopy_mode=paracopy_mode)
    copies, temp_bytes = plan_totals(lu)
    text = emit(lu, EmitConfig(backend=backend))
    return VariantBuild(variant, backend, {
        'bench_unit.c': text,
        'bench_driver.c': CPS_DRIVER,
    }, link_runtime=True, plan_copies=copies, plan_temp_bytes=temp_bytes)


def plan_totals(lu) -> tuple[int, int]:
    copies = temp_bytes = 0
    for gp in lu.goto_plans.values():
        c, t = plan_cost(gp.plan)
        copies += c
        temp_bytes += t
    return copies, temp_bytes


def find_runtime(explicit: Optional[str] = None) -> Path:
    """Locate the directory holding cbc_rt.h / cbc_rt.c.

    Order: explicit argument, CBC_RT_DIR, then a walk up from the working
    directory and from the installed package looking for runtime/cbc_rt.h.
    """
    candidates = []
    if explicit:
        candidates.append(Path(explicit))
    env = os.environ.get('CBC_RT_DIR')
    if env:
        candidates.append(Path(env))
    for start in (Path.cwd(), Path(__file__).resolve().parent):
        for p in (start, *start.parents):
            candidates.append(p / 'runtime')
    for cand in candidates:
        if (cand / 'cbc_rt.h').is_file():
            return cand
    raise BenchError(
        'cannot locate the segment runtime (cbc_rt.h); '
        'pass --runtime-dir or set CBC_RT_DIR')


def resolve_cc(cc: Optional[str] = None) -> str:
    cc = cc or os.environ.get('CBC_CC') or 'cc'
    if shutil.which(cc) is None:
        raise BenchError(f"C compiler {cc!r} not found on PATH")
    return cc


def compiler_id(cc: str) -> str:
    try:
        out = subprocess.run([cc, '--version'], capture_output=True,
                             text=True, timeout=30)
        line = (out.stdout or out.stderr).splitlines()
        if line:
            return line[0].strip()
    except OSError:
        pass
    return cc


def parse_driver_output(text: str) -> dict:
    """Pick result/seconds/highwater out of a driver's stdout."""
    got = {}
    for line in text.splitlines():
        if line.startswith('result:'):
            got['value'] = int(line.split(':', 1)[1])
        elif line.startswith('seconds='):
            got['seconds'] = float(line.split('=', 1)[1])
        elif line.startswith('highwater='):
            got['highwater'] = int(line.split('=', 1)[1])
    return got


def _build(build: VariantBuild, work: Path, cc: str,
           flags: Sequence[str], runtime: Optional[Path]) -> Path:
    vdir = work / build.variant.replace('-', '_')
    vdir.mkdir(parents=True, exist_ok=True)
    srcs = []
    for name, text in build.sources.items():
        p = vdir / name
        p.write_text(text)
        srcs.append(str(p))
    exe = vdir / 'bench'
    cmd = [cc, *flags]
    if build.link_runtime:
        assert runtime is not None
        cmd += ['-I', str(runtime)]
        srcs.append(str(runtime / 'cbc_rt.c'))
    cmd += ['-o', str(exe), *srcs]
    proc = subprocess.run(cmd, capture_output=True, text=True, timeout=300)
    if proc.returncode != 0:
        raise BenchError(
            f"{build.variant}: compile failed ({' '.join(cmd)}):\n"
            f"{proc.stderr.strip()}")
    return exe


def _run_binary(exe: Path, loop: int, env: Optional[dict] = None) -> dict:
    proc = subprocess.run([str(exe), str(loop)], capture_output=True,
                          text=True, timeout=600, env=env)
    if proc.returncode != 0:
        raise BenchError(
            f"{exe.name} exited with {proc.returncode}: "
            f"{(proc.stderr or proc.stdout).strip()}")
    return parse_driver_output(proc.stdout)


def run_bench(*, loop: int = DEFAULT_LOOP, preset: str = 'plain',
              backend: str = 'direct', variants: Sequence[str] = VARIANTS,
              runtime_dir: Optional[str] = None, cc: Optional[str] = None,
              work_dir: Optional[str] = None) -> BenchReport:
    """Build + gate + time the requested variants.

    A value mismatch against the oracle aborts the whole run (BenchError);
    a compile or runtime failure only marks that row as failed.
    """
    if preset not in PRESETS:
        raise BenchError(f"unknown preset {preset!r}")
    bad = [v for v in variants if v not in VARIANTS]
    if bad:
        raise BenchError(f"unknown variants: {', '.join(bad)}")
    flags = PRESETS[preset]
    cc = resolve_cc(cc)
    needs_runtime = any(v != 'call-form' for v in variants)
    runtime = find_runtime(runtime_dir) if needs_runtime else None
    oracle = bench_oracle()

    own_tmp = None
    if work_dir is None:
        own_tmp = tempfile.TemporaryDirectory(prefix='cbc-bench-')
        work = Path(own_tmp.name)
    else:
        work = Path(work_dir)
        work.mkdir(parents=True, exist_ok=True)

    rows = []
    try:
        for variant in variants:
            build = prepare_variant(variant, backend)
            row = BenchRow(variant, build.backend, None, loop, None,
                           build.plan_copies, build.plan_temp_bytes, None)
            try:
                exe = _build(build, work, cc, flags, runtime)
            except BenchError as e:
                rows.append(replace(row, failed=f"compile: {e}"))
                continue
            # correctness gate: one pass through the chain
            try:
                got = _run_binary(exe, 1)
            except BenchError as e:
                rows.append(replace(row, failed=f"run: {e}"))
                continue
            if got.get('value') != oracle:
                raise BenchError(
                    f"{variant}: gate failed, got {got.get('value')} "
                    f"expected {oracle}")
            try:
                got = _run_binary(exe, loop)
            except BenchError as e:
                rows.append(replace(row, failed=f"run: {e}"))
                continue
            if got.get('value') != oracle:
                raise BenchError(
                    f"{variant}: result drifted at loop={loop}, "
                    f"got {got.get('value')} expected {oracle}")
            rows.append(replace(row, seconds=got.get('seconds'),
                                highwater=got.get('highwater'),
                                value=got['value']))
    finally:
        if own_tmp is not None:
            own_tmp.cleanup()

    report = BenchReport(rows=rows, compiler=compiler_id(cc), flags=flags,
                         preset=preset, iterations=loop, oracle=oracle)
    report.ordering_ok = _ordering(report)
    return report


def _ordering(report: BenchReport) -> Optional[bool]:
    """Informative check: converted straight form no slower than the calls."""
    by = {r.variant: r for r in report.rows}
    a = by.get('cps-straight')
    b = by.get('call-form')
    if not a or not b or a.seconds is None or b.seconds is None:
        return None
    return a.seconds <= b.seconds


# ------------------------------------------------------------- reporting

def record_lines(report: BenchReport) -> list[str]:
    lines = []
    for r in report.rows:
        parts = [
            f"variant={r.variant}",
            f"backend={r.backend}",
            f"status={'failed' if r.failed else 'ok'}",
            f"iterations={r.iterations}",
            f"value={r.value if r.value is not None else '-'}",
            f"highwater={r.highwater if r.highwater is not None else '-'}",
            f"plan_copies={r.plan_copies}",
            f"plan_temp_bytes={r.plan_temp_bytes}",
            f"seconds={f'{r.seconds:.6f}' if r.seconds is not None else '-'}",
        ]
        lines.append(' '.join(parts))
    return lines


def format_table(report: BenchReport) -> str:
    head = ('variant', 'backend', 'seconds', 'highwater',
            'copies', 'tempB', 'value')
    body = []
    for r in report.rows:
        if r.failed:
            status = 'FAILED'
        else:
            status = f"{r.seconds:.3f}" if r.seconds is not None else '-'
        body.append((
            r.variant, r.backend, status,
            str(r.highwater) if r.highwater is not None else '-',
            str(r.plan_copies), str(r.plan_temp_bytes),
            str(r.value) if r.value is not None else '-'))
    widths = [max(len(row[i]) for row in [head, *body]) for i in range(len(head))]
    fmt = '  '.join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*head).rstrip()]
    out += [fmt.format(*row).rstrip() for row in body]
    return '\n'.join(out)


def format_report(report: BenchReport, records_path: Optional[Path] = None,
                  figure_paths: Sequence[Path] = ()) -> str:
    lines = record_lines(report)
    lines.append('')
    lines.append(format_table(report))
    lines.append('')
    lines.append(f"compiler: {report.compiler}")
    lines.append(f"flags: {' '.join(report.flags)} (preset={report.preset})")
    lines.append(f"iterations: {report.iterations}")
    if report.ordering_ok is None:
        verdict = 'n/a'
    else:
        verdict = 'pass' if report.ordering_ok else 'fail'
    lines.append('ordering (informative): '
                 f"cps-straight <= call-form wall time: {verdict}")
    for r in report.rows:
        if r.failed:
            lines.append(f"{r.variant}: {r.failed}")
    if records_path is not None:
        lines.append(f"records: {records_path}")
    for p in figure_paths:
        lines.append(f"figure: {p}")
    return '\n'.join(lines) + '\n'


def write_records(report: BenchReport, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RECORDS_NAME
    path.write_text('\n'.join(record_lines(report)) + '\n')
    return path


def render_figures(report: BenchReport, out_dir: Path) -> list[Path]:
    """Bar charts for wall time and stack high-water, next to the records."""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    timed = [r for r in report.rows if r.seconds is not None]
    if timed:
        fig, ax = plt.subplots(figsize=(6, 4))
        labels = [f"{r.variant}\n({r.backend})" for r in timed]
        ax.bar(labels, [r.seconds for r in timed], color='#4477aa')
        ax.set_ylabel('wall time (s)')
        ax.set_title(f"{report.iterations} iterations, "
                     f"{' '.join(report.flags)}")
        fig.tight_layout()
        path = out_dir / FIGURE_NAMES[0]
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    hw = [r for r in report.rows if r.highwater is not None]
    if hw:
        fig, ax = plt.subplots(figsize=(6, 4))
        labels = [f"{r.variant}\n({r.backend})" for r in hw]
        ax.bar(labels, [r.highwater for r in hw], color='#cc6677')
        ax.set_ylabel('stack high-water (bytes)')
        ax.set_title('continuation stack use')
        fig.tight_layout()
        path = out_dir / FIGURE_NAMES[1]
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    return written
