"""The ``cbc`` command: compile, check, cps, bench.

Exit codes: 0 on success, 1 when diagnostics were reported (including bad
command lines and unbuildable bench rows), 2 on internal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import ast
from . import bench as bench_mod
from .cps import CpsError, transform
from .emit import EmitConfig, EmitError, emit
from .lexer import LexError
from .lower import LowerError, lower
from .paracopy import dump_plan
from .parser import ParseError, parse
from .sema import analyze, lint_cbc_purity


class CliFailure(Exception):
    """Diagnostics to print, then exit 1."""

    def __init__(self, lines):
        super().__init__('\n'.join(lines))
        self.lines = list(lines)


def _diag(file: str, span, code: str, message: str) -> str:
    return f"{file}:{span.line}:{span.col}: {code}: {message}"


def _load(path: str) -> ast.TranslationUnit:
    try:
        src = Path(path).read_text()
    except OSError as e:
        raise CliFailure([f"cbc: cannot read {path}: {e.strerror or e}"])
    try:
        return parse(src)
    except LexError as e:
        raise CliFailure([_diag(path, e.span, 'E-SYNTAX', e.message)])
    except ParseError as e:
        raise CliFailure([_diag(path, e.span, 'E-SYNTAX', str(e))])


def _analyze(path: str, strict: bool):
    """Parse + analyze one file; returns (result, diagnostic lines)."""
    res = analyze(_load(path), file=path)
    lines = [d.format() for d in res.errors]
    lines += [d.format() for d in res.warnings]
    if strict and not res.errors:
        lines += [d.format() for d in lint_cbc_purity(res)]
    return res, lines


def cmd_check(args) -> int:
    failed = False
    for path in args.files:
        res, lines = _analyze(path, args.strict_cbc)
        for line in lines:
            print(line, file=sys.stderr)
        failed = failed or bool(res.errors)
    return 1 if failed else 0


def cmd_compile(args) -> int:
    emit_dir = Path(args.emit_dir)
    emit_dir.mkdir(parents=True, exist_ok=True)
    cfg = EmitConfig(backend=args.backend, strict_cbc=args.strict_cbc,
                     paracopy_mode=args.paracopy)
    outputs = []
    for path in args.files:
        res, lines = _analyze(path, args.strict_cbc)
        for line in lines:
            print(line, file=sys.stderr)
        if res.errors:
            return 1
        lu = lower(res, paracopy_mode=args.paracopy)
        if args.dump_lowered:
            print(lu.dump())
        if args.dump_paracopy:
            for i, gp in enumerate(lu.goto_plans.values()):
                steps = '; '.join(dump_plan(gp.plan)) or '(no moves)'
                print(f"goto[{i}]: {steps}")
        text = emit(lu, cfg)
        out = emit_dir / (Path(path).stem + '.c')
        out.write_text(text)
        outputs.append(out.name)
        print(f"wrote {out}")
    manifest = {
        'backend': args.backend,
        'paracopy': args.paracopy,
        'outputs': outputs,
        'runtime_files': ['cbc_rt.h', 'cbc_rt.c'],
        'tailcall_macro': 'CBC_TAILCALL',
        'tailcall_note': ('expands to a musttail attribute under clang and to '
                          'nothing otherwise; define CBC_TAILCALL empty to '
                          'force the fallback. The direct backend needs '
                          'sibling-call optimization (-O2 or better) for '
                          'unbounded goto chains.'),
    }
    mpath = emit_dir / 'cbc_manifest.json'
    mpath.write_text(json.dumps(manifest, indent=2) + '\n')
    print(f"wrote {mpath}")
    return 0


def cmd_cps(args) -> int:
    roots = [r for r in args.roots.split(',') if r]
    if not roots:
        raise CliFailure(['cbc: --roots needs at least one function name'])
    res, lines = _analyze(args.file, False)
    for line in lines:
        print(line, file=sys.stderr)
    if res.errors:
        return 1
    opt = None if args.cps_opt == 'none' else args.cps_opt
    try:
        cres = transform(res, roots, opt=opt, file=args.file)
    except CpsError as e:
        print(e.format(), file=sys.stderr)
        return 1
    text = ast.to_source(cres.unit)
    if args.output:
        Path(args.output).write_text(text)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    variants = tuple(v for v in args.variants.split(',') if v)
    try:
        report = bench_mod.run_bench(
            loop=args.loop, preset=args.preset, backend=args.backend,
            variants=variants, runtime_dir=args.runtime_dir, cc=args.cc)
    except bench_mod.BenchError as e:
        print(f"cbc bench: {e}", file=sys.stderr)
        return 1
    out_dir = Path(args.out_dir)
    records = bench_mod.write_records(report, out_dir)
    figures = bench_mod.render_figures(report, out_dir)
    sys.stdout.write(bench_mod.format_report(report, records, figures))
    return 1 if any(r.failed for r in report.rows) else 0


class _ArgumentParser(argparse.ArgumentParser):
    # bad usage is a diagnostic, not an internal error
    def error(self, message):
        raise CliFailure([f"{self.prog}: error: {message}"])


def _build_parser() -> argparse.ArgumentParser:
    p = _ArgumentParser(
        prog='cbc',
        description='compile C-with-code-segments to portable C')
    sub = p.add_subparsers(dest='cmd', required=True)

    c = sub.add_parser('compile', help='emit one .c per unit plus a manifest')
    c.add_argument('files', nargs='+')
    c.add_argument('--backend', choices=('trampoline', 'direct'),
                   default='trampoline')
    c.add_argument('--emit-dir', default='.')
    c.add_argument('--strict-cbc', action='store_true',
                   help='also report segment purity lint')
    c.add_argument('--dump-lowered', action='store_true')
    c.add_argument('--paracopy', choices=('min', 'naive'), default='min')
    c.add_argument('--dump-paracopy', action='store_true',
                   help='print the copy steps planned for each goto')
    c.set_defaults(fn=cmd_compile)

    k = sub.add_parser('check', help='run diagnostics without emitting')
    k.add_argument('files', nargs='+')
    k.add_argument('--strict-cbc', action='store_true')
    k.set_defaults(fn=cmd_check)

    s = sub.add_parser('cps', help='convert named functions to segments')
    s.add_argument('file')
    s.add_argument('--roots', required=True,
                   help='comma-separated function names')
    s.add_argument('--cps-opt', choices=('none', 'fuse'), default='none')
    s.add_argument('-o', '--output')
    s.set_defaults(fn=cmd_cps)

    b = sub.add_parser('bench', help='build and time the three-variant chain')
    b.add_argument('--preset', choices=sorted(bench_mod.PRESETS),
                   default='plain')
    b.add_argument('--loop', type=int, default=bench_mod.DEFAULT_LOOP)
    b.add_argument('--backend', choices=('trampoline', 'direct'),
                   default='direct')
    b.add_argument('--variants', default=','.join(bench_mod.VARIANTS))
    b.add_argument('--runtime-dir')
    b.add_argument('--cc', help='overrides $CBC_CC')
    b.add_argument('--out-dir', default='.',
                   help='where records and figures land')
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return args.fn(args)
    except CliFailure as e:
        for line in e.lines:
            print(line, file=sys.stderr)
        return 1
    except CpsError as e:
        print(e.format(), file=sys.stderr)
        return 1
    except (LowerError, EmitError, bench_mod.BenchError) as e:
        print(f"cbc: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    except Exception:
        traceback.print_exc()
        print('cbc: internal error', file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
