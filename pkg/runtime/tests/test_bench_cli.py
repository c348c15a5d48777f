"""The bench subcommand end to end: gate, table, records, figures."""

import time

from cbcc.cli import main as cbc_main


def test_bench_end_to_end(cc, tmp_path, capsys):
    t0 = time.perf_counter()
    rc = cbc_main(['bench', '--preset', 'fast', '--loop', '10000000',
                   '--out-dir', str(tmp_path)])
    dt = time.perf_counter() - t0
    out = capsys.readouterr().out
    assert rc == 0, out
    assert dt < 120.0

    records = (tmp_path / 'bench_records.txt').read_text().splitlines()
    assert len(records) == 3
    for line in records:
        assert 'status=ok' in line
        assert 'value=720' in line
        assert 'iterations=10000000' in line

    # the comparison is reported either way; only correctness gates
    assert 'ordering (informative): cps-straight <= call-form wall time:' in out
    for name in ('bench_seconds.png', 'bench_highwater.png'):
        assert (tmp_path / name).stat().st_size > 0
