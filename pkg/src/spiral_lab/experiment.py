"""Dimension sweeps: config, replicate execution, aggregation and report files.

Every (d, rep) cell draws from its own stream seeded by
``derive_seed(master_seed, d_index, rep)`` and rows are assembled in (d, rep)
order, so output files do not depend on the worker count.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .increments import GeneratorError, SeedSpec, derive_seed, parse_generator
from .multisum import run_ms_replicate
from .setsum import sample_marked, si_cross_term, si_deviation_sup, si_gh_report
from .spiral import LebesgueCube, RectSet, SpiralError, lattice_net, parse_measure
from .vcfam import LowerLeftRects, VCError, parse_family

CSV_HEADER = ("d", "n", "idxdim", "rep", "seed", "dev_sup", "q_stat", "gh_bound", "elapsed_ms")
AGG_HEADER = ("d", "stat", "median", "q25", "q75")
AGG_STATS = ("dev_sup", "q_stat", "gh_bound")
AGG_MARKER = "# aggregate"
SCHEMA_VERSION = 1
THREADS_ENV = "SPIRAL_LAB_THREADS"

_N_RULE_RE = re.compile(r"^(fixed|pow):([0-9.eE+-]+)$|^(d|sqrt_d)$")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid experiment config:\n  " + "\n  ".join(self.problems))


def n_of_d(rule: str, d: int) -> int:
    """n(d) for ``fixed:<n>``, ``d``, ``sqrt_d`` (ceil) or ``pow:<alpha>`` (ceil)."""
    m = _N_RULE_RE.match(rule)
    if m is None:
        raise ValueError(f"bad n_rule {rule!r}")
    if m.group(3) == "d":
        return d
    if m.group(3) == "sqrt_d":
        return math.ceil(math.sqrt(d))
    if m.group(1) == "fixed":
        return int(m.group(2))
    return math.ceil(d ** float(m.group(2)))


@dataclass
class ExperimentConfig:
    setting: str
    idxdim: int = 1
    d_list: list = field(default_factory=lambda: [25, 100, 400])
    n_rule: str | None = None
    reps: int = 30
    gen: str = "sphere"
    measure: str = "lebesgue"
    family: str = "llrects"
    net_resolution: int = 20
    master_seed: int = 0
    with_gh: bool = True
    timing: bool = False
    out_path: str | None = None
    format: str = "csv"
    threads: int | None = None

    def __post_init__(self):
        self.setting = str(self.setting).upper()
        if self.n_rule is None:
            if self.setting == "MS":
                self.n_rule = "d" if self.idxdim == 1 else "sqrt_d"
            else:
                self.n_rule = "d"

    def problems(self) -> list:
        out = []
        if self.setting not in ("MS", "SI"):
            out.append(f"setting: expected 'MS' or 'SI', got {self.setting!r}")
        if not isinstance(self.idxdim, int) or self.idxdim < 1:
            out.append("idxdim: must be a positive integer")
        if not self.d_list:
            out.append("d_list: must be nonempty")
        for i, d in enumerate(self.d_list):
            if not isinstance(d, int) or d < 1:
                out.append(f"d_list[{i}]: must be a positive integer, got {d!r}")
            elif i and isinstance(self.d_list[i - 1], int) and d <= self.d_list[i - 1]:
                out.append(f"d_list[{i}]: must be strictly increasing ({self.d_list[i - 1]} then {d})")
        if not isinstance(self.reps, int) or self.reps < 1:
            out.append("reps: must be >= 1")
        if not isinstance(self.master_seed, int) or not (0 <= self.master_seed < 2**64):
            out.append("master_seed: must be an unsigned 64-bit integer")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            out.append("threads: must be a positive integer")
        if self.format not in ("csv", "json"):
            out.append("format: must be 'csv' or 'json'")
        if not isinstance(self.net_resolution, int) or self.net_resolution < 1:
            out.append("net_resolution: must be a positive integer")
        try:
            ns = [n_of_d(self.n_rule, d) for d in self.d_list if isinstance(d, int) and d >= 1]
        except ValueError as exc:
            out.append(f"n_rule: {exc}")
        else:
            if any(n < 1 for n in ns):
                out.append("n_rule: yields n(d) < 1")
            elif any(b < a for a, b in zip(ns, ns[1:])):
                out.append("n_rule: n(d) must be nondecreasing along d_list")
            elif len(ns) > 1 and ns[-1] <= ns[0]:
                out.append(f"n_rule: {self.n_rule!r} does not grow along d_list")
        try:
            parse_generator(self.gen, 2)
        except (GeneratorError, ValueError) as exc:
            out.append(f"gen: {exc}")
        if self.setting == "SI":
            try:
                parse_measure(self.measure, self.idxdim if isinstance(self.idxdim, int) else 1)
            except (SpiralError, ValueError, OSError, KeyError) as exc:
                out.append(f"measure: {exc}")
            try:
                parse_family(self.family)
            except (VCError, ValueError, OSError) as exc:
                out.append(f"family: {exc}")
        return out

    def validate(self) -> "ExperimentConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError([f"{k}: unknown field" for k in unknown])
        return cls(**raw)


@dataclass
class Row:
    d: int
    n: int
    idxdim: int
    rep: int
    seed: int
    dev_sup: float
    q_stat: float
    gh_bound: float | None
    elapsed_ms: float | None = None
    dev_mode: str = "exact"
    dev_sup_root: float | None = None


@dataclass
class DeviationReport:
    config: ExperimentConfig
    rows: list
    aggregate: list

    def medians(self, stat: str = "dev_sup") -> dict:
        return {a["d"]: a["median"] for a in self.aggregate if a["stat"] == stat}


def aggregate_rows(rows) -> list:
    """Per-d median, q25 and q75 for each statistic, in order of first appearance of d."""
    out = []
    ds = list(dict.fromkeys(r.d for r in rows))
    for d in ds:
        for stat in AGG_STATS:
            vals = [getattr(r, stat) for r in rows if r.d == d]
            if any(v is None for v in vals):
                continue
            med, q25, q75 = np.percentile(np.array(vals, dtype=float), [50, 25, 75])
            out.append({"d": d, "stat": stat, "median": float(med), "q25": float(q25), "q75": float(q75)})
    return out


def _resolve_threads(cfg: ExperimentConfig, threads: int | None) -> int:
    if threads is not None:
        return threads
    if cfg.threads is not None:
        return cfg.threads
    env = os.environ.get(THREADS_ENV)
    return int(env) if env else 1


def _ms_cell(cfg: ExperimentConfig, d_index: int, d: int, rep: int) -> Row:
    n = n_of_d(cfg.n_rule, d)
    seed = derive_seed(cfg.master_seed, d_index, rep)
    gen = parse_generator(cfg.gen, d)
    t0 = time.perf_counter()
    res = run_ms_replicate(gen, cfg.idxdim, n, SeedSpec(seed, 0), with_gh=cfg.with_gh)
    elapsed = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
    return Row(d, n, cfg.idxdim, rep, seed, res.dev_sup, res.q_normalized, res.gh_bound, elapsed)


def _si_cell(cfg: ExperimentConfig, d_index: int, d: int, rep: int) -> Row:
    p = cfg.idxdim
    n = n_of_d(cfg.n_rule, d)
    seed = derive_seed(cfg.master_seed, d_index, rep)
    gen = parse_generator(cfg.gen, d)
    mu = parse_measure(cfg.measure, p)
    family = parse_family(cfg.family)
    t0 = time.perf_counter()
    sample = sample_marked(gen, mu, n, SeedSpec(seed, 0))
    net = lattice_net(p, cfg.net_resolution)
    exact_ok = isinstance(family, LowerLeftRects) and family.p == p and p <= 2 and isinstance(mu, LebesgueCube)
    dev = si_deviation_sup(sample, family if exact_ok else net, mu)
    cross = si_cross_term(sample, RectSet((1.0,) * p)) / n
    gh = si_gh_report(sample, net, mu) if cfg.with_gh else None
    elapsed = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
    return Row(d, n, p, rep, seed, dev.sup_sq, cross, gh, elapsed, dev.mode, dev.sup_root)


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> DeviationReport:
    cfg.validate()
    cell = _ms_cell if cfg.setting == "MS" else _si_cell
    jobs = [(i, d, rep) for i, d in enumerate(cfg.d_list) for rep in range(cfg.reps)]
    workers = _resolve_threads(cfg, threads)
    if workers == 1:
        rows = [cell(cfg, *job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda job: cell(cfg, *job), jobs))
    return DeviationReport(cfg, rows, aggregate_rows(rows))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_to_csv(report: DeviationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, k)) for k in CSV_HEADER])
    buf.write(AGG_MARKER + "\n")
    w.writerow(AGG_HEADER)
    for a in report.aggregate:
        w.writerow([_fmt(a[k]) for k in AGG_HEADER])
    return buf.getvalue()


def _num(text: str, kind=float):
    return None if text == "" else kind(text)


def parse_report_csv(text: str) -> tuple:
    """Inverse of :func:`report_to_csv`: (rows, aggregate). Rows carry only CSV columns."""
    body, _, agg = text.partition(AGG_MARKER + "\n")
    reader = csv.reader(io.StringIO(body))
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    rows = []
    for rec in reader:
        d, n, idx, rep, seed = (int(v) for v in rec[:5])
        rows.append(Row(d, n, idx, rep, seed, float(rec[5]), float(rec[6]), _num(rec[7]), _num(rec[8])))
    reader = csv.reader(io.StringIO(agg))
    if tuple(next(reader)) != AGG_HEADER:
        raise ValueError("unexpected aggregate header")
    aggregate = [
        {"d": int(d), "stat": stat, "median": float(med), "q25": float(lo), "q75": float(hi)}
        for d, stat, med, lo, hi in reader
    ]
    return rows, aggregate


def report_to_json(report: DeviationReport) -> str:
    cfg = asdict(report.config)
    cfg.pop("out_path", None)
    cfg.pop("threads", None)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "rows": [asdict(r) for r in report.rows],
        "aggregate": report.aggregate,
    }
    return json.dumps(doc, indent=2) + "\n"


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(report: DeviationReport, path, fmt: str = "csv") -> Path:
    """Write the report atomically (temp file + rename) as CSV or JSON."""
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "json":
        text = report_to_json(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    _atomic_write(path, text)
    return Path(path)


def schema_path(name: str = "report") -> Path:
    return Path(__file__).with_name("schemas") / f"{name}.schema.json"
