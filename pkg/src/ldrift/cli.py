"""Command-line runner: ``ldrift run | plot | list-kinds | validate``.

Environment overrides:

``LDRIFT_OUTPUT_DIR``
    output directory for ``run`` (takes precedence over the config file).
``LDRIFT_WORKERS``
    number of ensemble worker threads; results do not depend on it.

``run`` writes into the output directory

* ``reports.jsonl``: one structured record per experiment;
* ``results.csv``: one row per estimated quantity, columns
  ``kind, anchor, quantity, parameters, abscissa, estimate, stderr, verdict``;
* ``timings.csv``: wall-clock runtime per experiment (the only
  non-reproducible output, kept apart so the others are byte-identical
  across reruns);
* ``green/<kind>-<index>-<name>.txt``: Green density estimates when
  ``save_green`` is set.

Exit status is 0 when every verdict is ``pass`` or ``inconclusive``, 1 if
any verdict is ``fail``, 2 for configuration errors and 3 for runtime errors.
"""

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

__all__ = ["main", "run", "write_outputs"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _diag(msg):
    print(f"ldrift: {msg}", file=sys.stderr)


def _module_tag(err):
    mod = type(err).__module__ or ""
    return mod if mod.startswith("ldrift") else f"ldrift ({mod or 'builtins'})"


def _load(path):
    from .config import ConfigError, parse_document

    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err.strerror}") from err
    return parse_document(text)


def write_outputs(reports, out_dir):
    """Serialize reports; returns the written paths."""
    from .verify.experiments import CSV_COLUMNS

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(r.record(), sort_keys=True, allow_nan=False) for r in reports]
    (out / "reports.jsonl").write_text("".join(line + "\n" for line in lines))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerows(r.csv_rows())
    (out / "results.csv").write_text(buf.getvalue())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("index", "kind", "runtime_seconds"))
    for i, r in enumerate(reports):
        w.writerow((i, r.kind, f"{r.runtime:.3f}"))
    (out / "timings.csv").write_text(buf.getvalue())
    return [out / "reports.jsonl", out / "results.csv", out / "timings.csv"]


def run(configs, out_dir=None):
    """Run configurations in kind order (config order within a kind); returns the reports."""
    from .verify.experiments import run_experiment

    order = sorted(range(len(configs)), key=lambda i: (configs[i].kind, i))
    reports = []
    for i in order:
        cfg = configs[i]
        rep = run_experiment(cfg.kind, cfg)
        reports.append(rep)
        _diag(f"{cfg.kind}: {rep.verdict} ({rep.runtime:.1f} s)")
        if cfg.save_green and rep.green:
            gdir = Path(out_dir or cfg.output_dir) / "green"
            gdir.mkdir(parents=True, exist_ok=True)
            for name, est in sorted(rep.green.items()):
                (gdir / f"{cfg.kind}-{i}-{name}.txt").write_text(est.to_text())
    return reports


def _cmd_run(args):
    from .config import ConfigError

    try:
        configs = _load(args.config)
    except ConfigError as err:
        _diag(f"invalid config {args.config}: {err}")
        return EXIT_CONFIG
    out_dir = args.output_dir or os.environ.get("LDRIFT_OUTPUT_DIR") or configs[0].output_dir
    if args.workers is not None:
        os.environ["LDRIFT_WORKERS"] = str(args.workers)
    try:
        reports = run(configs, out_dir)
    except Exception as err:  # noqa: BLE001 - reported with the originating module
        _diag(f"{_module_tag(err)}: {type(err).__name__}: {err}")
        return EXIT_RUNTIME
    for p in write_outputs(reports, out_dir):
        _diag(f"wrote {p}")
    return EXIT_FAIL if any(r.verdict == "fail" for r in reports) else EXIT_OK


def _cmd_validate(args):
    from .config import ConfigError

    try:
        configs = _load(args.config)
    except ConfigError as err:
        _diag(f"invalid config {args.config}: {err}")
        return EXIT_CONFIG
    for c in configs:
        print(f"ok: {c.kind} (d = {c.dim}, seed = {c.seed}, n_paths = {c.sim.n_paths})")
    return EXIT_OK


def _cmd_list(args):
    from .verify.experiments import REGISTRY

    for kind in sorted(REGISTRY):
        print(f"{kind:22s} {REGISTRY[kind].anchor}")
    return EXIT_OK


def _cmd_plot(args):
    from .plotting import PlotError, plot

    try:
        out = plot(args.results, args.kind, args.output, quantity=args.quantity)
    except PlotError as err:
        _diag(f"ldrift.plotting: {err}")
        return EXIT_CONFIG
    _diag(f"wrote {out}")
    return EXIT_OK


def build_parser():
    from .plotting import PLOT_KINDS

    p = argparse.ArgumentParser(prog="ldrift", description="Monte Carlo checks for diffusions with L_d drift.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiments of a config file")
    r.add_argument("config")
    r.add_argument("--output-dir", default=None, help="overrides the config and LDRIFT_OUTPUT_DIR")
    r.add_argument("--workers", type=int, default=None, help="ensemble worker threads (does not change results)")
    r.set_defaults(fn=_cmd_run)
    v = sub.add_parser("validate", help="parse a config file and report problems")
    v.add_argument("config")
    v.set_defaults(fn=_cmd_validate)
    ls = sub.add_parser("list-kinds", help="list registered experiment kinds")
    ls.set_defaults(fn=_cmd_list)
    pl = sub.add_parser("plot", help="render an SVG from a results CSV or a Green estimate file")
    pl.add_argument("results")
    pl.add_argument("--kind", required=True, choices=PLOT_KINDS)
    pl.add_argument("--quantity", default=None, help="quantity name for loglog plots")
    pl.add_argument("-o", "--output", default=None, help="output path (default: next to the input, .svg)")
    pl.set_defaults(fn=_cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
