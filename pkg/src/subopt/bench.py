"""Instance generation, station-data ingest and benchmark orchestration.

Instances are described by JSON-friendly :class:`InstanceSpec` objects and are
fully reproducible from ``(spec, seed)``.  Benchmarks emit one
:class:`BenchRecord` per ``(instance, algorithm, seed)`` as CSV and JSON lines.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import baselines
from .constraints import GroupCapSystem, MatroidIntersection, PartitionMatroid, Unconstrained, UniformMatroid
from .objectives import (
    ENTROPY_CONST,
    ConstantObjective,
    CoverageObjective,
    CutObjective,
    EntropyObjective,
    LogDetObjective,
    ModularObjective,
    nonnegative_shift,
)
from .oracle import IndependenceSystem, RunLedger, SubmodularOracle, value_batch
from .sampling import SamplingParams, preset_p_extendible, preset_p_system, rep_sampling, substream

log = logging.getLogger(__name__)

__all__ = [
    "SCHEMA_VERSION",
    "ALGORITHMS",
    "ConfigError",
    "IngestError",
    "InstanceSpec",
    "BenchCell",
    "BenchRecord",
    "BenchResults",
    "BudgetExhausted",
    "generate_instance",
    "build_constraint",
    "ingest_stations",
    "run_algorithm",
    "run_bench",
    "write_records_csv",
    "write_records_jsonl",
    "read_records_csv",
    "read_records_jsonl",
    "open_trace",
]

SCHEMA_VERSION = 1
ALGORITHMS = ("rep-sampling", "greedy", "repeated-greedy", "sample-greedy")


class ConfigError(ValueError):
    """Invalid instance or plan description; the message starts with the field path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


class IngestError(ValueError):
    """Malformed station CSV; the message names the offending row."""


# -- instance description ------------------------------------------------------

@dataclass(frozen=True)
class InstanceSpec:
    objective: dict
    constraint: dict
    n: int
    seed: int = 0
    id: str | None = None

    @property
    def instance_id(self) -> str:
        if self.id:
            return self.id
        return f"{self.objective.get('kind')}-{self.constraint.get('kind')}-n{self.n}-s{self.seed}"

    def to_dict(self) -> dict:
        d = {"n": self.n, "seed": self.seed, "objective": self.objective, "constraint": self.constraint}
        if self.id:
            d["id"] = self.id
        return d

    @classmethod
    def from_dict(cls, d: dict, path: str = "instance") -> "InstanceSpec":
        if not isinstance(d, dict):
            raise ConfigError(path, "expected an object")
        for key in ("n", "objective", "constraint"):
            if key not in d:
                raise ConfigError(f"{path}.{key}", "missing")
        for key in ("objective", "constraint"):
            if not isinstance(d[key], dict) or "kind" not in d[key]:
                raise ConfigError(f"{path}.{key}.kind", "missing")
        try:
            n = int(d["n"])
            seed = int(d.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigError(f"{path}.n", "n and seed must be integers") from None
        if n < 0:
            raise ConfigError(f"{path}.n", "must be non-negative")
        return cls(dict(d["objective"]), dict(d["constraint"]), n, seed, d.get("id"))


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stream,)))


def _param(d: dict, key: str, default, path: str, cast=None):
    v = d.get(key, default)
    if cast is not None and v is not None:
        try:
            v = cast(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}.{key}", f"cannot interpret {v!r}") from None
    return v


def _load_matrix(d: dict, n: int, path: str) -> np.ndarray | None:
    if "matrix" in d:
        M = np.asarray(d["matrix"], dtype=float)
    elif "matrix_file" in d:
        fn = d["matrix_file"]
        try:
            M = np.loadtxt(fn, delimiter=",", ndmin=2) if str(fn).endswith(".csv") else \
                np.asarray(json.loads(Path(fn).read_text()), dtype=float)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{path}.matrix_file", str(exc)) from None
    else:
        return None
    if M.shape != (n, n):
        raise ConfigError(f"{path}.matrix", f"expected shape ({n}, {n}), got {M.shape}")
    if not np.allclose(M, M.T, atol=1e-9, rtol=0):
        raise ConfigError(f"{path}.matrix", "not symmetric")
    return M


def _psd_kernel(n: int, features: int, rng: np.random.Generator) -> np.ndarray:
    """Random-feature Gram matrix ``G^T G / d`` plus a small ridge."""
    G = rng.standard_normal((features, n))
    L = G.T @ G / features
    L += 1e-6 * np.eye(n)
    return 0.5 * (L + L.T)


def _covariance(n: int, structure: str, rng: np.random.Generator, path: str) -> np.ndarray:
    if structure == "pairs":
        # strongly correlated pairs of stations, independent across pairs
        S = np.eye(n)
        for i in range(0, n - 1, 2):
            rho = rng.uniform(0.95, 0.995)
            S[i, i + 1] = S[i + 1, i] = rho
        return S
    if structure == "factor":
        k = max(1, n // 3)
        B = rng.standard_normal((n, k))
        S = B @ B.T + np.diag(rng.uniform(0.05, 0.5, n))
        d = np.sqrt(np.diag(S))
        return S / np.outer(d, d)
    raise ConfigError(f"{path}.structure", f"unknown covariance structure {structure!r}")


def _objective(d: dict, n: int, seed: int, path: str = "objective") -> SubmodularOracle:
    kind = d.get("kind")
    rng = _rng(seed, 0)
    if kind == "modular":
        w = d.get("weights")
        w = rng.uniform(0.0, 1.0, n) if w is None else np.asarray(w, dtype=float)
        if w.shape != (n,):
            raise ConfigError(f"{path}.weights", f"expected {n} weights")
        return ModularObjective(w)
    if kind == "constant":
        return ConstantObjective(n, _param(d, "value", 0.0, path, float))
    if kind == "coverage":
        if "covers" in d:
            covers = d["covers"]
            if len(covers) != n:
                raise ConfigError(f"{path}.covers", f"expected {n} cover lists")
            return CoverageObjective(covers, d.get("weights"))
        universe = _param(d, "universe", 2 * n, path, int)
        degree = _param(d, "degree", 4, path, int)
        if universe < 1 or degree < 1:
            raise ConfigError(f"{path}.universe", "universe and degree must be positive")
        covers = [rng.choice(universe, size=min(degree, universe), replace=False) for _ in range(n)]
        weights = rng.uniform(0.5, 1.5, universe) if d.get("weighted", False) else None
        return CoverageObjective(covers, weights, universe)
    if kind == "cut":
        if "edges" in d:
            return CutObjective(n, [tuple(e) for e in d["edges"]])
        prob = _param(d, "density", 0.4, path, float)
        unit = bool(d.get("unit", False))
        edges = []
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < prob:
                    edges.append((u, v, 1.0 if unit else float(rng.uniform(0.1, 1.0))))
        return CutObjective(n, edges)
    if kind == "logdet":
        L = _load_matrix(d, n, path)
        if L is None:
            L = np.eye(n) if d.get("identity", False) else \
                _psd_kernel(n, _param(d, "features", max(2, n // 2), path, int), rng)
        shift = d.get("shift", "auto")
        shift = nonnegative_shift(L) if shift == "auto" else _param(d, "shift", 0.0, path, float)
        return LogDetObjective(L, shift=shift)
    if kind == "entropy":
        if "stations_csv" in d:
            S, _ = ingest_stations(d["stations_csv"])
            if S.shape[0] != n:
                raise ConfigError(f"{path}.stations_csv", f"file has {S.shape[0]} stations, n = {n}")
        else:
            S = _load_matrix(d, n, path)
            if S is None:
                S = _covariance(n, d.get("structure", "factor"), rng, path)
        scale = d.get("scale", "auto")
        if scale == "auto":
            # smallest rescaling of the covariance that keeps every entropy >= 0
            scale = math.exp(max(0.0, nonnegative_shift(S) - 2.0 * ENTROPY_CONST))
        else:
            scale = _param(d, "scale", 1.0, path, float)
        return EntropyObjective(S * scale)
    raise ConfigError(f"{path}.kind", f"unknown objective kind {kind!r}")


def _blocks(spec, n: int, rng: np.random.Generator, assign: str, path: str) -> list[list[int]]:
    if isinstance(spec, int):
        if spec < 1:
            raise ConfigError(path, "block count must be positive")
        if assign == "random":
            labels = rng.integers(0, spec, n)
        elif assign == "contiguous":
            labels = (np.arange(n) * spec) // max(n, 1)
        else:
            raise ConfigError(path, f"unknown assignment {assign!r}")
        return [np.flatnonzero(labels == j).tolist() for j in range(spec)]
    if isinstance(spec, list):
        return [list(map(int, b)) for b in spec]
    raise ConfigError(path, "expected a block count or a list of blocks")


def build_constraint(d: dict, n: int, seed: int, path: str = "constraint", stream: int = 1) -> IndependenceSystem:
    """Construct an independence system from its JSON description."""
    kind = d.get("kind")
    rng = _rng(seed, stream)
    try:
        if kind in (None, "free", "none"):
            return Unconstrained(n)
        if kind == "uniform":
            if "k" not in d:
                raise ConfigError(f"{path}.k", "missing")
            return UniformMatroid(n, _param(d, "k", None, path, int))
        if kind == "partition":
            if "stations_csv" in d:
                _, labels = ingest_stations(d["stations_csv"])
                names = list(dict.fromkeys(labels))
                blocks = [[i for i, g in enumerate(labels) if g == name] for name in names]
            else:
                blocks = _blocks(d.get("blocks", 2), n, rng, d.get("assign", "contiguous"), f"{path}.blocks")
            caps = d.get("caps", 1)
            caps = [int(caps)] * len(blocks) if isinstance(caps, (int, float)) else list(map(int, caps))
            if len(caps) != len(blocks):
                raise ConfigError(f"{path}.caps", f"expected {len(blocks)} caps")
            return PartitionMatroid(n, blocks, caps)
        if kind == "intersection":
            members = d.get("members")
            if not isinstance(members, list) or not members:
                raise ConfigError(f"{path}.members", "expected a non-empty list")
            return MatroidIntersection([
                build_constraint(m, n, seed, f"{path}.members[{i}]", stream + 1 + i)
                for i, m in enumerate(members)])
        if kind == "group_cap":
            groups = d.get("groups", 3)
            if isinstance(groups, int):
                size = _param(d, "group_size", max(2, n // 2), path, int)
                groups = [sorted(rng.choice(n, size=min(size, n), replace=False).tolist())
                          for _ in range(groups)]
            caps = d.get("caps", 1)
            caps = [int(caps)] * len(groups) if isinstance(caps, (int, float)) else list(map(int, caps))
            if len(caps) != len(groups):
                raise ConfigError(f"{path}.caps", f"expected {len(groups)} caps")
            return GroupCapSystem(n, groups, caps, d.get("p"))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown constraint kind {kind!r}")


def generate_instance(spec: InstanceSpec | dict) -> tuple[SubmodularOracle, IndependenceSystem]:
    """Deterministically build ``(oracle, system)`` for a spec."""
    if isinstance(spec, dict):
        spec = InstanceSpec.from_dict(spec)
    try:
        oracle = _objective(spec.objective, spec.n, spec.seed)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("objective", str(exc)) from None
    return oracle, build_constraint(spec.constraint, spec.n, spec.seed)


# -- station data ---------------------------------------------------------------

def ingest_stations(source, jitter: float = 1e-9) -> tuple[np.ndarray, list[str]]:
    """Read ``station_id,group,lat,lon,v1,...,vT`` rows.

    Returns the covariance of the month-over-month differences (population
    estimator, divisor ``T - 1``) with a ridge of ``jitter * trace / n`` on the
    diagonal, and the group label of each station in file order.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return ingest_stations(fh, jitter)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("row 1: empty file") from None
    head = [h.strip() for h in header]
    if head[:4] != ["station_id", "group", "lat", "lon"] or len(head) < 6:
        raise IngestError("row 1: header must be station_id,group,lat,lon,v1,...,vT with T >= 2")
    T = len(head) - 4
    ids, groups, series = set(), [], []
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(head):
            raise IngestError(f"row {rowno}: expected {len(head)} cells, got {len(row)}")
        sid = row[0].strip()
        if sid in ids:
            raise IngestError(f"row {rowno}: duplicate station id {sid!r}")
        ids.add(sid)
        try:
            float(row[2]), float(row[3])
            vals = [float(c) for c in row[4:]]
        except ValueError:
            raise IngestError(f"row {rowno}: non-numeric cell") from None
        if not all(math.isfinite(v) for v in vals):
            raise IngestError(f"row {rowno}: non-finite value")
        groups.append(row[1].strip())
        series.append(vals)
    if not series:
        raise IngestError("no station rows")
    X = np.diff(np.asarray(series, dtype=float), axis=1)
    X = X - X.mean(axis=1, keepdims=True)
    cov = X @ X.T / (T - 1)
    n = cov.shape[0]
    cov[np.diag_indices(n)] += jitter * float(np.trace(cov)) / n
    return cov, groups


# -- running algorithms -------------------------------------------------------------

class BudgetExhausted(RuntimeError):
    pass


class BudgetedOracle(SubmodularOracle):
    """Wraps an oracle, stops after ``budget`` evaluations, remembers the best feasible set seen."""

    def __init__(self, base: SubmodularOracle, system: IndependenceSystem, budget: int):
        super().__init__(base.n)
        self.base, self.system, self.budget = base, system, int(budget)
        self.used = 0
        self.best_set: frozenset = frozenset()
        self.best_value = float(base.evaluate(frozenset()))

    def evaluate(self, S) -> float:
        if self.used >= self.budget:
            raise BudgetExhausted
        self.used += 1
        v = float(self.base.evaluate(S))
        if v > self.best_value and self.system.is_feasible(S):
            self.best_set, self.best_value = S, v
        return v

    def evaluate_many(self, sets):
        return [self.evaluate(S) for S in sets]


def _resolve_params(params: dict, p: int, seed: int) -> SamplingParams:
    eps = float(params.get("epsilon", 0.1))
    preset = params.get("preset", "p-system")
    if preset == "p-system":
        base = preset_p_system(p, eps, seed)
    elif preset == "p-extendible":
        base = preset_p_extendible(p, eps, seed)
    elif preset in (None, "none", "custom"):
        base = SamplingParams(eps, 1, 1.0, 1.0, seed)
    else:
        raise ConfigError("params.preset", f"unknown preset {preset!r}")
    over = {k: params[k] for k in ("m", "phi1", "phi2") if params.get(k) is not None}
    if "m" in over:
        over["m"] = int(over["m"])
    vals = asdict(base)
    vals.update(over, lam=None)
    return SamplingParams(**vals).validate().bind(p)


def run_algorithm(oracle: SubmodularOracle, system: IndependenceSystem, algorithm: str, params: dict,
                  seed: int, ledger: RunLedger | None = None, trace=None) -> tuple[frozenset, float, RunLedger]:
    """Run one named algorithm; returns ``(solution, value, ledger)``.

    Baselines get a final counted value query, matching the final evaluation
    that ``rep_sampling`` performs.
    """
    ledger = RunLedger() if ledger is None else ledger
    p = int(params.get("p") or system.p)
    if algorithm == "rep-sampling":
        res = rep_sampling(oracle, system, _resolve_params(params, p, seed), ledger, p=p, trace=trace)
        return res.solution, res.value, ledger
    if algorithm == "greedy":
        S = baselines.greedy(oracle, system, None, ledger)
    elif algorithm == "repeated-greedy":
        S = baselines.repeated_greedy(oracle, system, params.get("iterations"), ledger)
    elif algorithm == "sample-greedy":
        S = baselines.sample_greedy(oracle, system, params.get("probability"), substream(seed, 0), ledger)
    else:
        raise ConfigError("algorithm", f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    (value,) = value_batch(oracle, [S], ledger)
    return S, value, ledger


# -- bench records -----------------------------------------------------------------

@dataclass(frozen=True)
class BenchRecord:
    instance_id: str
    algorithm: str
    params: str
    seed: int
    value: float
    value_queries: int
    value_rounds: int
    indep_queries: int
    indep_rounds: int
    wall_time_ms: float


COLUMNS = [f.name for f in fields(BenchRecord)]
_INT = {"seed", "value_queries", "value_rounds", "indep_queries", "indep_rounds"}
_FLOAT = {"value", "wall_time_ms"}


@dataclass
class BenchCell:
    instance: InstanceSpec
    algorithm: str
    params: dict = field(default_factory=dict)
    seeds: Sequence[int] = (0,)
    budget: int | None = None

    @classmethod
    def from_dict(cls, d: dict, path: str) -> "BenchCell":
        if "instance" not in d:
            raise ConfigError(f"{path}.instance", "missing")
        algo = d.get("algorithm", d.get("algo"))
        if algo not in ALGORITHMS:
            raise ConfigError(f"{path}.algorithm", f"expected one of {', '.join(ALGORITHMS)}")
        seeds = d.get("seeds")
        if seeds is None:
            seeds = list(range(int(d.get("seed", 0)), int(d.get("seed", 0)) + int(d.get("trials", 1))))
        budget = d.get("budget")
        return cls(InstanceSpec.from_dict(d["instance"], f"{path}.instance"), algo,
                   dict(d.get("params", {})), [int(s) for s in seeds],
                   None if budget is None else int(budget))


class BenchResults(list):
    """Records in plan order; per-cell failures are kept in ``failures``."""

    def __init__(self, records=(), failures=()):
        super().__init__(records)
        self.failures = list(failures)


def _canonical(params: dict) -> str:
    return json.dumps(params, sort_keys=True, separators=(",", ":"))


def _run_cell(cell: BenchCell, timing: bool) -> tuple[list[BenchRecord], list[dict]]:
    records, failures = [], []
    try:
        oracle, system = generate_instance(cell.instance)
    except Exception as exc:  # noqa: BLE001 - recorded, run continues
        return [], [{"instance_id": cell.instance.instance_id, "algorithm": cell.algorithm,
                     "seed": None, "error": f"{type(exc).__name__}: {exc}"}]
    for seed in cell.seeds:
        t0 = time.perf_counter()
        ledger = RunLedger()
        try:
            if cell.budget is None:
                _, value, _ = run_algorithm(oracle, system, cell.algorithm, cell.params, seed, ledger)
            else:
                wrapped = BudgetedOracle(oracle, system, cell.budget)
                try:
                    _, value, _ = run_algorithm(wrapped, system, cell.algorithm, cell.params, seed, ledger)
                    value = max(value, wrapped.best_value) if system.is_feasible(wrapped.best_set) else value
                except BudgetExhausted:
                    ledger.charge_value(wrapped.used - ledger.value_queries)
                    value = wrapped.best_value
        except Exception as exc:  # noqa: BLE001
            log.warning("cell %s/%s seed %s failed: %s", cell.instance.instance_id, cell.algorithm, seed, exc)
            failures.append({"instance_id": cell.instance.instance_id, "algorithm": cell.algorithm,
                             "seed": seed, "error": f"{type(exc).__name__}: {exc}"})
            continue
        ms = round((time.perf_counter() - t0) * 1000.0, 3) if timing else 0.0
        params = dict(cell.params)
        if cell.budget is not None:
            params["budget"] = cell.budget
        records.append(BenchRecord(cell.instance.instance_id, cell.algorithm, _canonical(params), int(seed),
                                   float(value), ledger.value_queries, ledger.value_rounds,
                                   ledger.indep_queries, ledger.indep_rounds, ms))
    return records, failures


def run_bench(plan: Sequence[BenchCell | dict], out: str | os.PathLike | None = None, *,
              workers: int = 1, timing: bool = True) -> BenchResults:
    """Execute every cell of ``plan``.

    With ``out`` set, writes ``<out>.csv`` and ``<out>.jsonl``.  ``timing=False``
    records a wall time of 0 so that output is byte-reproducible.
    """
    if not plan:
        raise ConfigError("plan", "empty plan")
    cells = [c if isinstance(c, BenchCell) else BenchCell.from_dict(c, f"plan[{i}]") for i, c in enumerate(plan)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_cell, cells, [timing] * len(cells)))
    else:
        parts = [_run_cell(c, timing) for c in cells]
    results = BenchResults([r for recs, _ in parts for r in recs], [f for _, fs in parts for f in fs])
    if out is not None:
        out = str(out)
        write_records_csv(results, out + ".csv")
        write_records_jsonl(results, out + ".jsonl")
    return results


def _fmt(name, v):
    return repr(float(v)) if name in _FLOAT else str(v)


def write_records_csv(records: Iterable[BenchRecord], dest) -> None:
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="") as fh:
            return write_records_csv(records, fh)
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow([_fmt(c, getattr(r, c)) for c in COLUMNS])


def write_records_jsonl(records: Iterable[BenchRecord], dest) -> None:
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w") as fh:
            return write_records_jsonl(records, fh)
    for r in records:
        d = {"schema_version": SCHEMA_VERSION}
        for c in COLUMNS:
            d[c] = json.loads(r.params) if c == "params" else getattr(r, c)
        dest.write(json.dumps(d) + "\n")


def _coerce(d: dict) -> BenchRecord:
    vals = {}
    for c in COLUMNS:
        v = d[c]
        if c in _INT:
            v = int(v)
        elif c in _FLOAT:
            v = float(v)
        elif c == "params" and not isinstance(v, str):
            v = _canonical(v)
        vals[c] = v
    return BenchRecord(**vals)


def read_records_csv(src) -> list[BenchRecord]:
    if isinstance(src, (str, os.PathLike)):
        with open(src, newline="") as fh:
            return read_records_csv(fh)
    return [_coerce(row) for row in csv.DictReader(src)]


def read_records_jsonl(src) -> list[BenchRecord]:
    if isinstance(src, (str, os.PathLike)):
        with open(src) as fh:
            return read_records_jsonl(fh)
    out = []
    for line in src:
        if line.strip():
            d = json.loads(line)
            if d.get("schema_version") != SCHEMA_VERSION:
                raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
            out.append(_coerce(d))
    return out


def open_trace(path: str | os.PathLike):
    """Return ``(emit, close)`` writing JSON-lines trace records; ``.gz`` paths are gzipped."""
    path = str(path)
    fh = gzip.open(path, "wt") if path.endswith(".gz") else open(path, "w")

    def emit(rec: dict) -> None:
        fh.write(json.dumps({"schema_version": SCHEMA_VERSION, **rec}) + "\n")

    return emit, fh.close


def records_to_csv_text(records: Iterable[BenchRecord]) -> str:
    buf = io.StringIO()
    write_records_csv(records, buf)
    return buf.getvalue()
