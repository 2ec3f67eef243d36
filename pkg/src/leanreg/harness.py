"""Monte Carlo replication engine, config parsing and CSV emission.

Replication ``r`` of grid cell ``g`` draws its sample from
``RngStream(master_seed, hash(g, r))``; each method then takes a child stream
keyed by its name. Adding or removing methods therefore never changes the
data a cell sees, and results do not depend on the thread count.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from leanreg.core import Sample
from leanreg.dgp import DgpKind, DgpSpec, Theta, generate
from leanreg.errors import ConfigError, DataError, InvalidSample, LeanRegError
from leanreg.inference import (
    BootstrapSpec,
    ConfidenceInterval,
    hulc_batch_count,
    hulc_ci,
    pairs_bootstrap_ci,
    tstat_ci,
    wald_ci,
    wild_bootstrap_ci,
)
from leanreg.parallel import ordered_map, resolve_threads
from leanreg.rng import RngStream, stable_hash

log = logging.getLogger(__name__)

METHODS = ("wald", "hulc", "tstat", "wild", "pairs")
TSTAT_BATCHES = 6

COVERAGE_HEADER = [
    "dgp", "n", "d", "rho", "theta", "method", "alpha", "replications", "target",
    "coverage", "coverage_se", "mean_width", "width_se", "mean_runtime_ms", "seed",
]
WIDTHS_HEADER = [
    "dgp", "n", "d", "rho", "theta", "method", "replication",
    "lower", "upper", "width", "covered",
]
SKIPPED_HEADER = ["dgp", "n", "d", "rho", "theta", "method", "reason"]


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class DgpGrid:
    kind: tuple[str, ...]
    n: tuple[int, ...]
    d: tuple[int, ...]
    rho: tuple[float, ...] = (0.0,)
    theta: tuple[str, ...] = (Theta.FIRST_COORDINATE.value,)

    def cells(self) -> list[DgpSpec]:
        seen, out = set(), []
        for kind, n, d, rho, theta in itertools.product(self.kind, self.n, self.d, self.rho, self.theta):
            if DgpKind(kind) is DgpKind.WELL_SPECIFIED:
                rho, theta = 0.0, Theta.FIRST_COORDINATE.value
            key = (kind, n, d, float(rho), theta)
            if key not in seen:
                seen.add(key)
                out.append(DgpSpec(kind, n, d, rho, theta))
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    dgp: DgpGrid
    methods: tuple[str, ...]
    alpha: float = 0.05
    replications: int = 1000
    n_boot: int = 1000
    master_seed: int = 0
    out_dir: str = "results"
    threads: int | str = 1


def _listify(value, name, cast):
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(f"field '{name}': list must be nonempty")
    try:
        return tuple(cast(v) for v in items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{name}': {exc}") from None


def _int(v):
    if isinstance(v, bool) or not float(v).is_integer():
        raise ValueError(f"expected an integer, got {v!r}")
    return int(v)


def load_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _check_keys(data: dict, allowed, where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(repr(k) for k in unknown)}")


def _threads(value):
    try:
        resolve_threads(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'threads': {exc}") from None
    return value if value == "auto" else int(value)


def parse_experiment_config(data: dict) -> ExperimentConfig:
    _check_keys(data, [f.name for f in fields(ExperimentConfig)], "config")
    if "dgp" not in data or not isinstance(data["dgp"], dict):
        raise ConfigError("field 'dgp': required object")
    g = data["dgp"]
    _check_keys(g, [f.name for f in fields(DgpGrid)], "field 'dgp'")
    for key in ("kind", "n", "d"):
        if key not in g:
            raise ConfigError(f"field 'dgp.{key}': required")
    grid = DgpGrid(
        kind=_listify(g["kind"], "dgp.kind", lambda v: DgpKind(v).value),
        n=_listify(g["n"], "dgp.n", _int),
        d=_listify(g["d"], "dgp.d", _int),
        rho=_listify(g.get("rho", 0.0), "dgp.rho", float),
        theta=_listify(g.get("theta", Theta.FIRST_COORDINATE.value), "dgp.theta", lambda v: Theta(v).value),
    )
    try:
        grid.cells()
    except ValueError as exc:
        raise ConfigError(f"field 'dgp': {exc}") from None
    methods = _listify(data.get("methods", []), "methods", str)
    bad = [m for m in methods if m not in METHODS]
    if bad or not data.get("methods"):
        raise ConfigError(f"field 'methods': must be a nonempty subset of {list(METHODS)}, got {list(methods)}")
    alpha = data.get("alpha", 0.05)
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or not 0.0 < alpha < 1.0:
        raise ConfigError(f"field 'alpha': must lie in (0, 1), got {alpha!r}")
    try:
        reps = _int(data.get("replications", 1000))
        n_boot = _int(data.get("n_boot", 1000))
        seed = _int(data.get("master_seed", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integer field: {exc}") from None
    if reps < 1:
        raise ConfigError(f"field 'replications': must be >= 1, got {reps}")
    if n_boot < 1:
        raise ConfigError(f"field 'n_boot': must be >= 1, got {n_boot}")
    return ExperimentConfig(
        dgp=grid,
        methods=tuple(dict.fromkeys(methods)),
        alpha=float(alpha),
        replications=reps,
        n_boot=n_boot,
        master_seed=seed,
        out_dir=str(data.get("out_dir", "results")),
        threads=_threads(data.get("threads", 1)),
    )


def load_experiment_config(path) -> ExperimentConfig:
    return parse_experiment_config(load_json(path))


# ---------------------------------------------------------------- data files


def parse_data_csv(path) -> Sample:
    """Read ``y,x1,...,xd`` CSV into a Sample; raises DataError with the row number."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "y" or any(not h for h in header[1:]):
            raise DataError(f"{path}: row 1: expected header 'y,x1,...,xd', got {','.join(header)!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise DataError(f"{path}: row {lineno}: non-numeric cell") from None
    if not rows:
        raise DataError(f"{path}: no observations")
    arr = np.asarray(rows, dtype=np.float64)
    try:
        return Sample(arr[:, 1:], arr[:, 0])
    except InvalidSample as exc:
        raise DataError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- engine


def cell_id(spec: DgpSpec) -> int:
    return stable_hash("cell", spec.kind.value, spec.n, spec.d, spec.rho, spec.theta.value)


def replication_stream(master_seed: int, spec: DgpSpec, r: int) -> RngStream:
    return RngStream(master_seed, stable_hash(cell_id(spec), r))


def build_ci(method: str, sample: Sample, c, alpha: float, n_boot: int, rng: RngStream) -> ConfidenceInterval:
    if method == "wald":
        return wald_ci(sample, c, alpha)
    if method == "hulc":
        return hulc_ci(sample, c, alpha, rng)
    if method == "tstat":
        return tstat_ci(sample, c, alpha, TSTAT_BATCHES, rng)
    if method == "wild":
        return wild_bootstrap_ci(sample, c, alpha, BootstrapSpec(n_boot), rng)
    if method == "pairs":
        return pairs_bootstrap_ci(sample, c, alpha, BootstrapSpec(n_boot), rng)
    raise ValueError(f"unknown method {method!r}")


def precheck(method: str, spec: DgpSpec, alpha: float) -> str | None:
    """Reason a method cannot run on this cell at all, or None."""
    if method == "hulc":
        b, _ = hulc_batch_count(alpha)
        if spec.n // b <= spec.d:
            return f"BatchTooSmall: floor(n/B)={spec.n // b} <= d={spec.d} with B={b}"
    if method == "tstat" and spec.n // TSTAT_BATCHES <= spec.d:
        return f"BatchTooSmall: floor(n/B)={spec.n // TSTAT_BATCHES} <= d={spec.d} with B={TSTAT_BATCHES}"
    return None


@dataclass
class MethodDraws:
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    covered: list = field(default_factory=list)
    runtime_ms: list = field(default_factory=list)


@dataclass
class CellResult:
    spec: DgpSpec
    target: float
    draws: dict[str, MethodDraws]
    skipped: dict[str, str]


def run_cell(
    spec: DgpSpec,
    methods,
    alpha: float,
    replications: int,
    n_boot: int = 1000,
    master_seed: int = 0,
    threads: int | str = 1,
) -> CellResult:
    target = spec.ground_truth().target
    c = spec.contrast()
    skipped = {m: r for m in methods if (r := precheck(m, spec, alpha)) is not None}
    active = [m for m in methods if m not in skipped]

    def one(r: int):
        stream = replication_stream(master_seed, spec, r)
        sample = generate(spec, stream)
        out = {}
        for m in active:
            t0 = time.perf_counter()
            try:
                ci = build_ci(m, sample, c, alpha, n_boot, stream.child(m))
            except LeanRegError as exc:
                out[m] = f"{type(exc).__name__} in replication {r}: {exc}"
                continue
            out[m] = (ci.lower, ci.upper, (time.perf_counter() - t0) * 1e3)
        return out

    results = ordered_map(one, range(replications), threads)
    draws = {}
    for m in active:
        errors = [res[m] for res in results if isinstance(res[m], str)]
        if errors:
            skipped[m] = errors[0]
            continue
        md = MethodDraws()
        for res in results:
            lo, hi, ms = res[m]
            md.lower.append(lo)
            md.upper.append(hi)
            md.covered.append(lo <= target <= hi)
            md.runtime_ms.append(ms)
        draws[m] = md
    return CellResult(spec, target, draws, skipped)


@dataclass(frozen=True)
class CoverageRow:
    dgp: str
    n: int
    d: int
    rho: float
    theta: str
    method: str
    alpha: float
    replications: int
    target: float
    coverage: float
    coverage_se: float
    mean_width: float
    width_se: float
    mean_runtime_ms: float
    seed: int


def summarize(cell: CellResult, method: str, alpha: float, master_seed: int) -> CoverageRow:
    md = cell.draws[method]
    reps = len(md.covered)
    width = np.asarray(md.upper) - np.asarray(md.lower)
    cov = sum(md.covered) / reps
    width_se = float(np.std(width, ddof=1)) / math.sqrt(reps) if reps > 1 else 0.0
    s = cell.spec
    return CoverageRow(
        s.kind.value, s.n, s.d, s.rho, s.theta.value, method, alpha, reps, cell.target,
        cov, math.sqrt(cov * (1.0 - cov) / reps), math.fsum(width) / reps, width_se,
        math.fsum(md.runtime_ms) / reps, master_seed,
    )


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def run_simulation(config: ExperimentConfig, threads=None, record_runtime: bool = False) -> Path:
    """Run every grid cell and write coverage, widths and plot-data CSVs.

    ``mean_runtime_ms`` in coverage.csv is ``nan`` unless ``record_runtime``
    is set, so that the file is reproducible byte for byte; wall-clock
    timings always go to timings.csv.
    """
    out = Path(config.out_dir)
    threads = config.threads if threads is None else threads
    coverage, widths, skipped, timings = [], [], [], []
    plot: dict[str, list] = {}
    for spec in config.dgp.cells():
        log.info("cell %s n=%d d=%d rho=%g theta=%s", spec.kind.value, spec.n, spec.d, spec.rho, spec.theta.value)
        cell = run_cell(spec, config.methods, config.alpha, config.replications,
                        config.n_boot, config.master_seed, threads)
        key = (spec.kind.value, spec.n, spec.d, spec.rho, spec.theta.value)
        for m in config.methods:
            if m in cell.skipped:
                skipped.append((*key, m, cell.skipped[m]))
                coverage.append((*key, m, config.alpha, 0, cell.target,
                                 math.nan, math.nan, math.nan, math.nan, math.nan, config.master_seed))
                continue
            row = summarize(cell, m, config.alpha, config.master_seed)
            timings.append((*key, m, row.mean_runtime_ms))
            if not record_runtime:
                row = CoverageRow(**{**asdict(row), "mean_runtime_ms": math.nan})
            coverage.append(tuple(asdict(row).values()))
            md = cell.draws[m]
            for r, (lo, hi, ok) in enumerate(zip(md.lower, md.upper, md.covered)):
                widths.append((*key, m, r, lo, hi, hi - lo, ok))
            name = f"{spec.kind.value}_n{spec.n}"
            if spec.kind is DgpKind.MISSPECIFIED_CUBIC:
                name += f"_rho{spec.rho:g}_{spec.theta.value}"
            plot.setdefault(name, []).append((spec.d, m, row.coverage, row.mean_width))
    _write_csv(out / "coverage.csv", COVERAGE_HEADER, coverage)
    _write_csv(out / "widths.csv", WIDTHS_HEADER, widths)
    _write_csv(out / "timings.csv", SKIPPED_HEADER[:-1] + ["mean_runtime_ms"], timings)
    if skipped:
        _write_csv(out / "skipped.csv", SKIPPED_HEADER, skipped)
    for name, rows in plot.items():
        _write_csv(out / "plotdata" / f"{name}.csv", ["d", "method", "coverage", "mean_width"], rows)
    return out


# ---------------------------------------------------------------- diagnose


@dataclass(frozen=True)
class DiagnoseConfig:
    concentration: dict | None
    bias_scaling: dict | None
    master_seed: int = 0
    out_dir: str = "results"
    threads: int | str = 1


def parse_diagnose_config(data: dict) -> DiagnoseConfig:
    _check_keys(data, [f.name for f in fields(DiagnoseConfig)], "config")
    conc = data.get("concentration")
    bias = data.get("bias_scaling")
    if conc is None and bias is None:
        raise ConfigError("config: need at least one of 'concentration', 'bias_scaling'")
    if conc is not None:
        _check_keys(conc, ["grid", "dgp_kind", "reps", "rho", "theta"], "field 'concentration'")
        try:
            grid = [(_int(a), _int(b)) for a, b in conc["grid"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"field 'concentration.grid': expected list of [n, d] pairs ({exc})") from None
        for n, d in grid:
            if n <= d or d < 1:
                raise ConfigError(f"field 'concentration.grid': cell ({n}, {d}) needs n > d >= 1")
        conc = {**conc, "grid": grid}
    if bias is not None:
        _check_keys(bias, ["n", "d_list", "reps", "rho", "theta", "kind", "alpha"], "field 'bias_scaling'")
        for key in ("n", "d_list", "reps"):
            if key not in bias:
                raise ConfigError(f"field 'bias_scaling.{key}': required")
    try:
        seed = _int(data.get("master_seed", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'master_seed': {exc}") from None
    return DiagnoseConfig(conc, bias, seed, str(data.get("out_dir", "results")),
                          _threads(data.get("threads", 1)))


def run_diagnose(config: DiagnoseConfig, threads=None) -> Path:
    from leanreg.diagnostics import bias_scaling_probe, concentration_sweep

    out = Path(config.out_dir)
    threads = config.threads if threads is None else threads
    root = RngStream(config.master_seed)
    if config.concentration is not None:
        c = config.concentration
        rows = concentration_sweep(
            c["grid"], c.get("dgp_kind", DgpKind.WELL_SPECIFIED.value), int(c.get("reps", 200)), root,
            rho=float(c.get("rho", 0.0)), theta=c.get("theta", Theta.FIRST_COORDINATE.value), threads=threads,
        )
        header = [f.name for f in fields(rows[0])] if rows else []
        _write_csv(out / "concentration.csv", header, [tuple(asdict(r).values()) for r in rows])
    if config.bias_scaling is not None:
        b = config.bias_scaling
        rows = bias_scaling_probe(
            int(b["n"]), [int(d) for d in b["d_list"]], int(b["reps"]), root,
            rho=float(b.get("rho", 0.0)), theta=b.get("theta", Theta.FIRST_COORDINATE.value),
            kind=b.get("kind", DgpKind.MISSPECIFIED_CUBIC.value), alpha=float(b.get("alpha", 0.05)),
            threads=threads,
        )
        header = [f.name for f in fields(rows[0])] if rows else []
        _write_csv(out / "bias_scaling.csv", header, [tuple(asdict(r).values()) for r in rows])
    return out
