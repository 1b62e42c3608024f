"""Command line entry point: ``gsavg <command> ...``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import bench
from .blocking import (
    DEFAULT_GRID,
    average_linkage,
    correlation_dissimilarity,
    cut_at_percentile,
    cut_height,
    select_percentile_loocv,
)
from .classifiers import VARIANTS, discriminants, fit, model_from_json, model_to_json
from .dataset import Dataset, column_scaling, load_csv, load_features_csv, write_csv
from .dissim import Blocking, load_blocking
from .energy import separation
from .gamma import CLI_NAMES, parse_gamma
from .simgen import SimConfig, generate

log = logging.getLogger("gsavg")


def _grid(text: str) -> tuple[float, ...]:
    try:
        grid = tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if not grid or any(not 0 <= p <= 1 for p in grid):
        raise argparse.ArgumentTypeError("grid values must lie in [0, 1]")
    return grid


def _write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2) + "\n")


def _load_data(args) -> Dataset:
    data = load_csv(args.data, args.label_col)
    if getattr(args, "standardize", False):
        mu, sd = column_scaling(data.features)
        data = Dataset((data.features - mu) / sd, data.labels, data.feature_names, data.label_map)
    return data


def _resolve_blocks(spec: str, data: Dataset, gamma, method: str, grid):
    """Returns (blocking, selection-or-None) for ``auto|singleton|file:<path>``."""
    if spec == "auto":
        sel = select_percentile_loocv(data, gamma, grid, method)
        return sel.chosen_blocking, sel
    if spec == "singleton":
        return Blocking.singletons(data.dim), None
    if spec.startswith("file:"):
        return load_blocking(spec[5:], data.dim), None
    raise ValueError(f"--blocks must be auto, singleton or file:<path>, got {spec!r}")


def cmd_train(args) -> None:
    data = load_csv(args.data, args.label_col)
    extra = {}
    if args.standardize:
        mu, sd = column_scaling(data.features)
        data = Dataset((data.features - mu) / sd, data.labels, data.feature_names, data.label_map)
        extra["standardize"] = {"mean": mu.tolist(), "sd": sd.tolist()}
    if args.variant == "gsavg":
        gamma = parse_gamma(args.gamma)
        blocking, sel = _resolve_blocks(args.blocks, data, gamma, args.method, args.grid)
        if sel is not None:
            extra["selection"] = {"grid": list(sel.grid), "errors": list(sel.errors), "p_hat": sel.chosen}
        model = fit(data, "gsavg", blocking, gamma)
    else:
        model = fit(data, args.variant)
    _write_json(args.out, model_to_json(model, extra))


def cmd_classify(args) -> None:
    with open(args.model, encoding="utf-8") as fh:
        art = json.load(fh)
    model = model_from_json(art)
    drop = args.label_col
    if drop is None:
        with open(args.data, newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), [])
        # a file with one extra column carries labels in its last column
        if len(header) == model.dim + 1:
            drop = -1
    x, _ = load_features_csv(args.data, drop)
    if "standardize" in art:
        x = (x - np.asarray(art["standardize"]["mean"])) / np.asarray(art["standardize"]["sd"])
    scores = discriminants(model, x)
    inverse = {v: k for k, v in model.train.label_map.items()}
    rows = [["row", "score", "label", "class", "tie"]]
    for i, s in enumerate(scores):
        lab = 1 if s > 0 else 2
        rows.append([i + 1, repr(float(s)), lab, inverse.get(lab, lab), int(s == 0.0)])
    _write_csv_rows(args.out, rows)


def _write_csv_rows(path, rows) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    _write_text(path, buf.getvalue())


def cmd_blocks(args) -> None:
    data = _load_data(args)
    gamma = parse_gamma(args.gamma)
    dendro = average_linkage(correlation_dissimilarity(data, args.method))
    out = {
        "method": args.method,
        "merges": dendro.to_json(),
        "heights": dendro.heights.tolist(),
        "cuts": [
            {"p": p, "height": cut_height(dendro, p), "blocks": cut_at_percentile(dendro, p).to_json()}
            for p in args.grid
        ],
    }
    if not args.no_loocv:
        sel = select_percentile_loocv(data, gamma, args.grid, args.method)
        out.update(
            gamma=gamma.value,
            errors=[{"p": p, "e_p": e} for p, e in zip(sel.grid, sel.errors)],
            p_hat=sel.chosen,
            blocks=sel.chosen_blocking.to_json(),
        )
    _write_json(args.out, out)


def cmd_separation(args) -> None:
    data = _load_data(args)
    gamma = parse_gamma(args.gamma)
    blocking, _ = _resolve_blocks(args.blocks, data, gamma, args.method, args.grid)
    _write_json(args.out, separation(data, blocking, gamma).to_json())


def cmd_simulate(args) -> None:
    data, oracle = generate(SimConfig(args.example, args.n, args.dim, args.seed))
    write_csv(data, args.out)
    if args.oracle_blocks:
        _write_json(args.oracle_blocks, oracle.to_json())


def cmd_bench(args) -> None:
    if args.config:
        cfg, out = bench.load_config(args.config)
    else:
        cfg, out = bench.ExperimentConfig(), {"out": None, "format": "json"}
    overrides = {
        "example": args.example,
        "dims": tuple(args.dims) if args.dims else None,
        "n_train_per_class": args.n_train,
        "n_test_per_class": args.n_test,
        "reps": args.reps,
        "classifiers": tuple(args.classifiers.split(",")) if args.classifiers else None,
        "gammas": tuple(bench._split_list(args.gamma, "gamma")) if args.gamma else None,
        "blocking": args.blocking,
        "method": args.method,
        "grid": args.grid,
        "seed": args.seed,
        "workers": args.workers,
        "train_fraction": args.train_fraction,
        "label_col": args.label_col,
    }
    if args.csv:
        cfg = dataclasses.replace(cfg, example=None, csv_path=args.csv)
    if args.standardize:
        overrides["standardize"] = True
    cfg = bench.with_overrides(cfg, **overrides)
    fmt = args.format or out.get("format") or "json"
    path = args.out or out.get("out")
    report = bench.run_experiment(cfg)
    text = bench.emit_report(report, fmt, path if path not in (None, "-") else None,
                             timing=not args.no_timing)
    if path in (None, "-"):
        sys.stdout.write(text)
    if fmt != "table":
        sys.stderr.write(bench.emit_report(report, "table"))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gsavg", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_opts(sp, labeled=True):
        sp.add_argument("--data", required=True, help="CSV file with a header row")
        sp.add_argument("--label-col", default=None,
                        help="label column name or index (default: last column)")
        if labeled:
            sp.add_argument("--standardize", action="store_true",
                            help="center and scale features before analysis")

    def block_opts(sp):
        sp.add_argument("--gamma", choices=sorted(CLI_NAMES), default="exp")
        sp.add_argument("--method", choices=("pearson", "spearman"), default="pearson")
        sp.add_argument("--grid", type=_grid, default=DEFAULT_GRID,
                        help="comma-separated percentiles (default 0,0.1,...,1)")

    sp = sub.add_parser("train", help="fit a classifier and write a JSON model")
    data_opts(sp)
    block_opts(sp)
    sp.add_argument("--variant", choices=VARIANTS, default="gsavg")
    sp.add_argument("--blocks", default="auto", help="auto | singleton | file:<path>")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("classify", help="score rows of a CSV with a saved model")
    sp.add_argument("--model", required=True)
    data_opts(sp, labeled=False)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("blocks", help="cluster features and select the dendrogram cut")
    data_opts(sp)
    block_opts(sp)
    sp.add_argument("--no-loocv", action="store_true", help="only report the cuts")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_blocks)

    sp = sub.add_parser("separation", help="per-block energy distance report")
    data_opts(sp)
    block_opts(sp)
    sp.add_argument("--blocks", default="singleton", help="auto | singleton | file:<path>")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_separation)

    sp = sub.add_parser("simulate", help="write a simulated data set")
    sp.add_argument("--example", type=int, choices=(1, 2, 3), required=True)
    sp.add_argument("--n", type=int, required=True, help="observations per class")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--oracle-blocks", default=None, help="write the true blocking here (JSON)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bench", help="Monte-Carlo comparison of classifiers")
    sp.add_argument("--config", default=None, help="TOML file; flags override its keys")
    sp.add_argument("--example", type=int, choices=(1, 2, 3))
    sp.add_argument("--csv", default=None, help="real data set instead of a simulation")
    sp.add_argument("--label-col", default=None)
    sp.add_argument("--dims", type=int, nargs="+")
    sp.add_argument("--n-train", type=int)
    sp.add_argument("--n-test", type=int)
    sp.add_argument("--train-fraction", type=float)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--classifiers", help="comma list: avg,savg,gsavg,gsavg:sqrt,...")
    sp.add_argument("--gamma", help="comma list of gammas used by 'gsavg' (exp,sqrt,log or all)")
    sp.add_argument("--blocking", help="auto | oracle | singleton | file:<path>")
    sp.add_argument("--method", choices=("pearson", "spearman"))
    sp.add_argument("--grid", type=_grid)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--standardize", action="store_true")
    sp.add_argument("--format", choices=("json", "csv", "table"))
    sp.add_argument("--out", default=None)
    sp.add_argument("--no-timing", action="store_true", help="omit wall-time fields")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, KeyError, bench.ExperimentError) as exc:
        print(f"gsavg {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
