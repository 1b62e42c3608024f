"""Monte-Carlo comparison of the average-distance classifiers.

Every repetition draws (or splits) one train/test pair and fits all requested
classifiers on it, so comparisons between classifiers are paired. Seeds for a
repetition come from ``SeedSequence([base_seed, rep, role])`` with role 0 for
training data, 1 for test data and 2 for the split of a CSV source; they do
not depend on the dimension or on which classifiers are run.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import classifiers as clf
from .blocking import DEFAULT_GRID, select_percentile_loocv
from .dataset import Dataset, load_csv, split_train_test, standardize
from .dissim import Blocking, load_blocking
from .gamma import CLI_NAMES, parse_gamma
from .simgen import SimConfig, generate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "ClassifierResult",
    "ExperimentError",
    "register_classifier",
    "derive_seed",
    "run_experiment",
    "emit_report",
    "load_config",
    "report_from_json",
]

log = logging.getLogger(__name__)

ROLES = {"train": 0, "test": 1, "split": 2}
BLOCKING_MODES = ("auto", "oracle", "singleton")

# name -> zero-arg factory returning an object with fit(X, y) and predict(X)
_ADAPTERS: dict[str, Callable[[], object]] = {}


class ExperimentError(RuntimeError):
    pass


def register_classifier(name: str, factory: Callable[[], object]) -> None:
    """Make an external classifier available to ``run_experiment`` under ``name``.

    ``factory()`` must return a fresh object with ``fit(X, y)`` and
    ``predict(X)`` methods, labels in {1, 2}. With ``workers > 1`` the
    factory must be importable (picklable).
    """
    if name in ("avg", "savg") or name.startswith("gsavg"):
        raise ValueError(f"{name!r} is reserved")
    _ADAPTERS[name] = factory


def derive_seed(base_seed: int, rep: int, role: str) -> int:
    state = np.random.SeedSequence([base_seed, rep, ROLES[role]]).generate_state(1)
    return int(state[0])


@dataclass(frozen=True)
class ExperimentConfig:
    example: int | None = 1
    dims: tuple[int, ...] = (100,)
    csv_path: str | None = None
    label_col: str | None = None
    n_train_per_class: int = 50
    n_test_per_class: int = 250
    train_fraction: float = 0.5
    reps: int = 10
    classifiers: tuple[str, ...] = ("avg", "savg", "gsavg")
    gammas: tuple[str, ...] = ("exp",)
    blocking: str = "auto"
    method: str = "pearson"
    grid: tuple[float, ...] = DEFAULT_GRID
    seed: int = 0
    standardize: bool = False
    workers: int = 1

    def __post_init__(self):
        for name in ("dims", "classifiers", "gammas", "grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "gammas", tuple(parse_gamma(g).cli_name for g in self.gammas))
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not self.classifiers:
            raise ValueError("at least one classifier is required")
        if (self.example is None) == (self.csv_path is None):
            raise ValueError("give exactly one data source: a simulated example or a CSV path")
        if self.csv_path is None and not self.dims:
            raise ValueError("simulated sources need at least one dimension")
        if self.blocking == "oracle" and self.csv_path is not None:
            raise ValueError("oracle blocking is only available for simulated data")
        if self.blocking not in BLOCKING_MODES and not self.blocking.startswith("file:"):
            raise ValueError(f"blocking must be one of {BLOCKING_MODES} or file:<path>")
        if self.method not in ("pearson", "spearman"):
            raise ValueError(f"unknown correlation method {self.method!r}")
        for name in self.classifiers:
            _ = self.expand_classifier(name)

    def expand_classifier(self, name: str) -> list[str]:
        if name in ("avg", "savg"):
            return [name]
        if name == "gsavg":
            return [f"gsavg:{g}" for g in self.gammas]
        if name.startswith("gsavg:"):
            return [f"gsavg:{parse_gamma(name[6:]).cli_name}"]
        if name in _ADAPTERS:
            return [name]
        raise ValueError(f"unknown classifier {name!r}")

    @property
    def classifier_names(self) -> list[str]:
        out: list[str] = []
        for name in self.classifiers:
            for n in self.expand_classifier(name):
                if n not in out:
                    out.append(n)
        return out

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("dims", "classifiers", "gammas", "grid"):
            d[k] = list(d[k])
        d.pop("workers")
        return d


@dataclass
class ClassifierResult:
    classifier: str
    dim: int
    rates: list[float]
    p_hat: list[float] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.rates))

    @property
    def se(self) -> float:
        if len(self.rates) < 2:
            return 0.0
        return float(np.std(self.rates, ddof=1) / math.sqrt(len(self.rates)))

    def to_json(self, timing: bool = True) -> dict:
        d = {
            "classifier": self.classifier,
            "dim": self.dim,
            "mean": self.mean,
            "se": self.se,
            "rates": list(self.rates),
        }
        if self.p_hat:
            d["p_hat"] = list(self.p_hat)
        if timing:
            d["wall_time"] = self.wall_time
        return d


@dataclass
class ExperimentReport:
    config: dict
    seeds: list[dict]
    results: list[ClassifierResult]

    def get(self, classifier: str, dim: int) -> ClassifierResult:
        for r in self.results:
            if r.classifier == classifier and r.dim == dim:
                return r
        raise KeyError((classifier, dim))

    def to_json(self, timing: bool = True) -> dict:
        return {
            "config": self.config,
            "seeds": self.seeds,
            "results": [r.to_json(timing) for r in self.results],
        }


def report_from_json(d: dict) -> ExperimentReport:
    results = [
        ClassifierResult(r["classifier"], r["dim"], list(r["rates"]), list(r.get("p_hat", [])),
                         r.get("wall_time", 0.0))
        for r in d["results"]
    ]
    return ExperimentReport(d["config"], d["seeds"], results)


def _rep_data(cfg: ExperimentConfig, rep: int, dim: int | None, source: Dataset | None):
    if source is not None:
        seed = derive_seed(cfg.seed, rep, "split")
        train, test = split_train_test(source, cfg.train_fraction, seed)
        return train, test, None, {"split": seed}
    s_train = derive_seed(cfg.seed, rep, "train")
    s_test = derive_seed(cfg.seed, rep, "test")
    train, oracle = generate(SimConfig(cfg.example, cfg.n_train_per_class, dim, s_train))
    test, _ = generate(SimConfig(cfg.example, cfg.n_test_per_class, dim, s_test))
    return train, test, oracle, {"train": s_train, "test": s_test}


def _run_rep(cfg: ExperimentConfig, rep: int, dim: int | None, source: Dataset | None) -> dict:
    train, test, oracle, seeds = _rep_data(cfg, rep, dim, source)
    if cfg.standardize:
        train, test = standardize(train, test)
    out: dict = {"rates": {}, "p_hat": {}, "time": {}, "seeds": seeds}
    for name in cfg.classifier_names:
        t0 = time.perf_counter()
        if name in ("avg", "savg"):
            model = clf.fit(train, name)
            rate = clf.misclassification_rate(model, test)
        elif name.startswith("gsavg:"):
            gamma = parse_gamma(name[6:])
            if cfg.blocking == "auto":
                sel = select_percentile_loocv(train, gamma, cfg.grid, cfg.method)
                blocking = sel.chosen_blocking
                out["p_hat"][name] = sel.chosen
            elif cfg.blocking == "oracle":
                blocking = oracle
            elif cfg.blocking == "singleton":
                blocking = Blocking.singletons(train.dim)
            else:
                blocking = load_blocking(cfg.blocking[len("file:"):], train.dim)
            model = clf.fit(train, "gsavg", blocking, gamma)
            rate = clf.misclassification_rate(model, test)
        else:
            est = _ADAPTERS[name]()
            est.fit(train.features, train.labels)
            rate = float(np.mean(np.asarray(est.predict(test.features)) != test.labels))
        out["rates"][name] = rate
        out["time"][name] = time.perf_counter() - t0
    return out


def _safe_rep(args):
    cfg, rep, dim, source = args
    try:
        return _run_rep(cfg, rep, dim, source)
    except Exception as exc:
        seeds = {role: derive_seed(cfg.seed, rep, role) for role in ROLES}
        raise ExperimentError(f"repetition {rep} (dim={dim}, seeds={seeds}) failed: {exc!r}") from exc


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    source = None
    if cfg.csv_path is not None:
        source = load_csv(cfg.csv_path, cfg.label_col)
        dims = [source.dim]
    else:
        dims = list(cfg.dims)

    names = cfg.classifier_names
    results = {(n, d): ClassifierResult(n, d, []) for d in dims for n in names}
    seeds = []
    for d in dims:
        jobs = [(cfg, rep, None if source is not None else d, source) for rep in range(cfg.reps)]
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                outs = list(pool.map(_safe_rep, jobs))
        else:
            outs = [_safe_rep(j) for j in jobs]
        # merge strictly in repetition order
        for rep, o in enumerate(outs):
            if d == dims[0]:
                seeds.append({"rep": rep, **o["seeds"]})
            for n in names:
                r = results[(n, d)]
                r.rates.append(o["rates"][n])
                r.wall_time += o["time"][n]
                if n in o["p_hat"]:
                    r.p_hat.append(o["p_hat"][n])
            log.info("dim=%s rep=%d %s", d, rep, {k: round(v, 4) for k, v in o["rates"].items()})
    return ExperimentReport(cfg.to_json(), seeds, [results[(n, d)] for d in dims for n in names])


def _table(report: ExperimentReport) -> str:
    names = list(dict.fromkeys(r.classifier for r in report.results))
    dims = list(dict.fromkeys(r.dim for r in report.results))
    width = max(15, *(len(n) for n in names))
    lines = ["D".rjust(6) + "".join(n.rjust(width + 2) for n in names)]
    for d in dims:
        cells = [f"{report.get(n, d).mean:.4f} ({report.get(n, d).se:.4f})" for n in names]
        lines.append(str(d).rjust(6) + "".join(c.rjust(width + 2) for c in cells))
    return "\n".join(lines) + "\n"


def _csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["classifier", "dim", "rep", "rate"])
    for r in report.results:
        for rep, rate in enumerate(r.rates):
            w.writerow([r.classifier, r.dim, rep, repr(rate)])
    return buf.getvalue()


def emit_report(report: ExperimentReport, fmt: str = "json", path=None, timing: bool = True) -> str:
    """Serialize ``report`` as ``json``, ``csv`` or ``table``.

    With ``path`` the text is also written atomically (temp file + rename).
    ``timing=False`` drops wall-time fields so reruns compare byte for byte.
    """
    if fmt == "json":
        text = json.dumps(report.to_json(timing), indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        text = _csv(report)
    elif fmt == "table":
        text = _table(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        path = Path(path)
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    return text


_CONFIG_KEYS = {
    "example", "dims", "csv", "label_col", "n_train_per_class", "n_test_per_class",
    "train_fraction", "reps", "classifiers", "gamma", "blocking", "method", "grid", "seed",
    "standardize", "workers", "out", "format",
}


def load_config(path) -> tuple[ExperimentConfig, dict]:
    """Read a TOML bench config. Returns the config and the output options (``out``, ``format``)."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return config_from_mapping(raw)


def config_from_mapping(raw: dict) -> tuple[ExperimentConfig, dict]:
    kw = {}
    simple = ("example", "n_train_per_class", "n_test_per_class", "train_fraction", "reps",
              "blocking", "method", "seed", "standardize", "workers", "label_col")
    for k in simple:
        if raw.get(k) is not None:
            kw[k] = raw[k]
    if raw.get("csv") is not None:
        kw["csv_path"] = str(raw["csv"])
        kw.setdefault("example", None)
    for k in ("dims", "classifiers", "grid"):
        if raw.get(k) is not None:
            v = raw[k]
            kw[k] = tuple(v) if isinstance(v, (list, tuple)) else tuple(_split_list(v, k))
    if raw.get("gamma") is not None:
        g = raw["gamma"]
        kw["gammas"] = tuple(g) if isinstance(g, (list, tuple)) else tuple(_split_list(g, "gamma"))
    out = {"out": raw.get("out"), "format": raw.get("format", "json")}
    return ExperimentConfig(**kw), out


def _split_list(v, key):
    parts = [p.strip() for p in str(v).split(",") if p.strip()]
    if key == "dims":
        return [int(p) for p in parts]
    if key == "grid":
        return [float(p) for p in parts]
    if key == "gamma" and parts == ["all"]:
        return [g for g in CLI_NAMES if g != "identity"]
    return parts


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
