import subprocess
import sys

import pytest

from ldrift.cli import main

EXIT_TAIL = """\
version: 1
output_dir: unused
experiments:
  - kind: exit_tail
    seed: 11
    sim: {dt: 0.001, horizon: 3.0, n_paths: 3000, start_point: [0, 0]}
  - kind: exit_floor
    seed: 2
    sim: {dt: 0.001, n_paths: 1000, start_point: [0, 0]}
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_list_kinds(capsys):
    assert main(["list-kinds"]) == 0
    out = capsys.readouterr().out.splitlines()
    kinds = [ln.split()[0] for ln in out]
    assert "exit_tail" in kinds and "inkspots" in kinds and kinds == sorted(kinds)


def test_validate_ok_and_unknown_kind(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, EXIT_TAIL))]) == 0
    bad = write(tmp_path, EXIT_TAIL.replace("kind: exit_floor", "kind: exit_flor"), "bad.yaml")
    assert main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "experiments[1].kind" in err and "line 7" in err


def test_run_unknown_kind_nonzero(tmp_path, capsys):
    bad = write(tmp_path, "version: 1\nkind: not_a_kind\n")
    assert main(["run", str(bad), "--output-dir", str(tmp_path / "o")]) == 2
    assert "field 'kind'" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_run_is_byte_identical_across_workers(tmp_path, monkeypatch):
    cfg = write(tmp_path, EXIT_TAIL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--output-dir", str(a), "--workers", "1"]) in (0, 1)
    monkeypatch.setenv("LDRIFT_OUTPUT_DIR", str(b))
    assert main(["run", str(cfg), "--workers", "3"]) in (0, 1)
    for name in ("results.csv", "reports.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "results.csv").read_text().splitlines()[0]
    assert header == "kind,anchor,quantity,parameters,abscissa,estimate,stderr,verdict"
    rows = (a / "results.csv").read_text().splitlines()[1:]
    # suite runs in kind order
    kinds = [r.split(",")[0] for r in rows]
    assert kinds == sorted(kinds)
    assert (a / "timings.csv").read_text().startswith("index,kind,runtime_seconds")


def test_run_saves_green_estimates(tmp_path):
    cfg = write(
        tmp_path,
        "version: 1\nkind: a_infty\nseed: 1\nsave_green: true\n"
        "sim: {dt: 0.002, n_paths: 500, start_point: [0, 0, 0]}\n",
    )
    out = tmp_path / "o"
    assert main(["run", str(cfg), "--output-dir", str(out)]) in (0, 1)
    files = sorted((out / "green").glob("a_infty-0-*.txt"))
    assert files
    assert main(["plot", str(files[0]), "--kind", "green-slice", "-o", str(tmp_path / "s.svg")]) == 0
    assert (tmp_path / "s.svg").read_text().lstrip().startswith("<?xml")


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ldrift.cli", "list-kinds"], capture_output=True, text=True)
    assert r.returncode == 0 and "tube" in r.stdout


def test_plot_errors(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", str(empty), "--kind", "survival"]) == 2
    assert "empty" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["plot", str(empty), "--kind", "bogus"])
