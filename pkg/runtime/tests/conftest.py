"""Shared toolchain for the compiled-runtime suite.

Sources are compiled through the public `cbc` entry point and linked
against the runtime in this directory's parent.  Binaries are cached per
(name, backend, flags) so parametrized tests reuse builds.
"""

import os
import shutil
import subprocess
from pathlib import Path

import pytest

from cbcc.cli import main as cbc_main

RUNTIME = Path(__file__).resolve().parents[1]
ROOT = RUNTIME.parent
CORPUS = ROOT / 'src' / 'cbcc' / 'corpus'


@pytest.fixture(scope='session')
def cc():
    name = os.environ.get('CBC_CC', 'cc')
    path = shutil.which(name)
    if path is None:
        pytest.skip(f'no C compiler ({name}) on PATH')
    return path


class Toolchain:
    def __init__(self, cc, workdir):
        self.cc = cc
        self.workdir = workdir
        self._cache = {}

    def compile_c(self, name, sources, flags=('-O2',), link_runtime=True):
        """Compile a dict of {filename: text} into one binary."""
        key = (name, tuple(sorted(sources)), flags)
        if key in self._cache:
            return self._cache[key]
        work = self.workdir / name
        work.mkdir(parents=True, exist_ok=True)
        for fname, text in sources.items():
            (work / fname).write_text(text)
        exe = work / 'prog'
        cmd = [self.cc, *flags, '-I', str(RUNTIME)]
        cmd += [str(work / fname) for fname in sorted(sources)]
        if link_runtime:
            cmd.append(str(RUNTIME / 'cbc_rt.c'))
        cmd += ['-o', str(exe)]
        r = subprocess.run(cmd, capture_output=True, text=True)
        assert r.returncode == 0, f'{name}: cc failed:\n{r.stderr}'
        self._cache[key] = exe
        return exe

    def compile_unit(self, name, source, backend, flags=('-O2',)):
        """Run `cbc compile` on dialect source and link the emitted unit."""
        key = (name, backend, flags)
        if key in self._cache:
            return self._cache[key]
        work = self.workdir / f'{name}-{backend}'
        work.mkdir(parents=True, exist_ok=True)
        src = work / f'{name}.cbc'
        src.write_text(source)
        rc = cbc_main(['compile', '--backend', backend,
                       '--emit-dir', str(work), str(src)])
        assert rc == 0, f'cbc compile failed on {name} ({backend})'
        exe = self.compile_c(f'{name}-{backend}-bin',
                             {f'{name}.c': (work / f'{name}.c').read_text()},
                             flags)
        self._cache[key] = exe
        return exe

    def compile_corpus(self, stem, backend, flags=('-O2',)):
        return self.compile_unit(stem, (CORPUS / f'{stem}.cbc').read_text(),
                                 backend, flags)


@pytest.fixture(scope='session')
def toolchain(cc, tmp_path_factory):
    return Toolchain(cc, tmp_path_factory.mktemp('cbc-bin'))


def run_exe(exe, args=(), extra_env=None, timeout=120):
    env = dict(os.environ)
    env.pop('CBC_STACK_SIZE', None)
    if extra_env:
        env.update(extra_env)
    return subprocess.run([str(exe), *map(str, args)], capture_output=True,
                          text=True, timeout=timeout, env=env)
