"""Reproducible Monte Carlo experiment harness.

Trials are processed in fixed-size chunks; the random stream of a chunk is
derived by hashing (seed, grid index, chunk index), so results are
bit-identical no matter how chunks are distributed over workers. Reduction is
ordered by (grid index, chunk index).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import estimation
from .channel import SystemConfig
from .mappings import mapping_from_id

CHUNK_TRIALS = 4096

DISTRIBUTIONS = (
    "uniform",
    "equal-share",
    "hetero-gauss",
    "cauchy",
    "lognormal",
    "shifted-uniform",
    "binomial",
    "vote",
)

METRICS = ("mse", "var", "bias", "mv_accuracy")

SWEEPABLE = ("beta", "M", "L", "K", "x_total", "p")


@dataclass(frozen=True)
class DataDistribution:
    """Per-device source data model, with optional projection before encoding.

    The estimation error is always measured against the unprojected data sum,
    so clipping shows up as bias.
    """

    name: str
    p: float = 0.5
    x_total: float = 0.0
    clip: tuple | None = None

    def __post_init__(self):
        if self.name not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.name!r}")
        if self.clip is not None:
            object.__setattr__(self, "clip", (float(self.clip[0]), float(self.clip[1])))

    @classmethod
    def from_config(cls, obj):
        if isinstance(obj, str):
            obj = {"name": obj}
        return cls(
            name=obj["name"],
            p=float(obj.get("p", 0.5)),
            x_total=float(obj.get("x_total", 0.0)),
            clip=tuple(obj["clip"]) if obj.get("clip") else None,
        )

    def sample(self, rng, trials, K):
        shape = (trials, K)
        if self.name == "uniform":
            return rng.uniform(-1.0, 1.0, shape)
        if self.name == "equal-share":
            return np.full(shape, self.x_total / K)
        if self.name == "hetero-gauss":
            centers = np.linspace(-2.0, 2.0, K)
            return centers + rng.standard_normal(shape)
        if self.name == "cauchy":
            return rng.standard_cauchy(shape)
        if self.name == "lognormal":
            return np.exp(rng.standard_normal(shape))
        if self.name == "shifted-uniform":
            return rng.uniform(-2.0, 0.0, shape)
        if self.name == "binomial":
            return (rng.binomial(10, 0.5, shape) - 5.0) / 5.0
        if self.name == "vote":
            return np.where(rng.random(shape) < self.p, 1.0, -1.0)
        raise AssertionError(self.name)

    def project(self, x):
        return x if self.clip is None else np.clip(x, *self.clip)


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep of the end-to-end pipeline with a fixed mapping/estimator."""

    experiment_id: str
    K: int
    M: int
    L: int
    beta: float
    mapping: str
    estimator: str
    csi: str
    distribution: DataDistribution
    sweep_var: str
    sweep_grid: tuple
    trials: int
    metric: str
    seed: int = 0
    P: float = 1.0
    figure_ref: str = ""
    power_normalized: bool = True
    L_w: int | None = None
    L_b: int | None = None
    prior_p: float | None = None
    p_grid: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "sweep_grid", tuple(self.sweep_grid))
        if self.p_grid is not None:
            object.__setattr__(self, "p_grid", tuple(self.p_grid))
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not self.sweep_grid:
            raise ValueError("empty sweep grid")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.sweep_var not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.sweep_var!r}")

    @classmethod
    def from_config(cls, obj, default_seed=0):
        """Accepts both the hand-written config shape (nested ``sweep``) and
        the resolved shape written to run manifests (flat sweep_var/grid)."""
        obj = dict(obj)
        if "sweep" in obj:
            sweep = obj.pop("sweep")
            obj["sweep_var"], obj["sweep_grid"] = sweep["var"], tuple(sweep["grid"])
        dist = DataDistribution.from_config(obj.pop("distribution", "uniform"))
        obj.setdefault("seed", default_seed)
        clip = obj.pop("clip", None)
        if clip is not None:
            dist = replace(dist, clip=tuple(clip))
        if obj.get("p_grid") is not None:
            obj["p_grid"] = tuple(obj["p_grid"])
        return cls(distribution=dist, **obj)


@dataclass(frozen=True)
class ExperimentRecord:
    """One CSV row: a metric value with its standard error at one grid point."""

    experiment_id: str
    figure_ref: str
    sweep_var: str
    sweep_value: float
    mapping: str
    estimator: str
    csi: str
    K: int
    M: int
    L: int
    beta: float
    eta: float
    distribution: str
    trials: int
    metric: str
    value: float
    stderr: float
    seed: int

    def __post_init__(self):
        if not math.isnan(self.stderr) and self.stderr < 0:
            raise ValueError("standard error cannot be negative")


def _resolve_point(spec, value):
    """Apply one sweep value, returning (params dict, distribution)."""
    params = {"K": spec.K, "M": spec.M, "L": spec.L, "beta": spec.beta}
    dist = spec.distribution
    if spec.sweep_var in params:
        params[spec.sweep_var] = value
    elif spec.sweep_var == "x_total":
        dist = replace(dist, x_total=float(value))
    elif spec.sweep_var == "p":
        dist = replace(dist, p=float(value))
    params["K"] = int(params["K"])
    params["M"] = int(params["M"])
    params["L"] = int(params["L"])
    return params, dist


def _chunk_rng(seed, grid_index, chunk_index):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(grid_index), int(chunk_index)))
    return np.random.Generator(np.random.Philox(ss))


def _simulate_chunk(spec, grid_index, chunk_index, n_trials):
    """Simulate one chunk; returns (estimates, truths) as float arrays."""
    params, dist = _resolve_point(spec, spec.sweep_grid[grid_index])
    rng = _chunk_rng(spec.seed, grid_index, chunk_index)
    K = params["K"]
    config = SystemConfig(
        K=K, M=params["M"], L=params["L"], P=spec.P, beta=params["beta"], csi=spec.csi, seed=spec.seed
    )
    mapping = mapping_from_id(spec.mapping)
    alloc = estimation.allocate_symbols(mapping, config.L, L_w=spec.L_w, L_b=spec.L_b)
    x = dist.sample(rng, n_trials, K)
    if spec.metric == "mv_accuracy":
        truth = np.sign(x.sum(axis=-1))
    elif spec.mapping == "count":
        truth = (x.sum(axis=-1) + K) / 2.0  # the +1 count, which count decoders return
    else:
        truth = x.sum(axis=-1)
    est = estimation.aggregate(
        config,
        mapping,
        dist.project(x),
        rng,
        alloc=alloc,
        estimator=spec.estimator,
        power_normalized=spec.power_normalized,
        prior_p=spec.prior_p if spec.prior_p is not None else getattr(dist, "p", None),
    )
    return np.asarray(est, dtype=float), truth


def _chunk_ranges(trials):
    n_chunks = (trials + CHUNK_TRIALS - 1) // CHUNK_TRIALS
    return [(c, min(CHUNK_TRIALS, trials - c * CHUNK_TRIALS)) for c in range(n_chunks)]


def _run_task(args):
    spec, grid_index, chunk_index, n_trials = args
    est, truth = _simulate_chunk(spec, grid_index, chunk_index, n_trials)
    return (grid_index, chunk_index), (est, truth)


def _gather(spec, workers):
    """All (estimate, truth) arrays per grid point, reduced in chunk order."""
    tasks = [
        (spec, gi, ci, n)
        for gi in range(len(spec.sweep_grid))
        for ci, n in _chunk_ranges(spec.trials)
    ]
    if workers <= 1:
        results = dict(map(_run_task, tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_run_task, tasks, chunksize=1))
    merged = []
    for gi in range(len(spec.sweep_grid)):
        keys = sorted(k for k in results if k[0] == gi)
        est = np.concatenate([results[k][0] for k in keys])
        truth = np.concatenate([results[k][1] for k in keys])
        merged.append((est, truth))
    return merged


def _metric_value(metric, est, truth):
    """Metric and standard error from per-trial estimates and ground truth."""
    n = len(est)
    if metric == "mse":
        sq = (est - truth) ** 2
        return float(sq.mean()), _stderr_of_mean(sq)
    if metric == "bias":
        dev = est - truth
        return float(dev.mean()), _stderr_of_mean(dev)
    if metric == "var":
        if n < 2:
            return float("nan"), float("nan")
        centered = est - est.mean()
        m2 = float((centered**2).sum() / (n - 1))
        m4 = float((centered**4).mean())
        se = math.sqrt(max(m4 - m2**2, 0.0) / n)
        return m2, se
    if metric == "mv_accuracy":
        hits = (est == truth).astype(float)
        return float(hits.mean()), _stderr_of_mean(hits)
    raise ValueError(f"unknown metric {metric!r}")


def _stderr_of_mean(values):
    n = len(values)
    if n < 2:
        return float("nan")
    return float(values.std(ddof=1) / math.sqrt(n))


def _nominal_eta(spec, params):
    return 1.0 / (spec.P * float(params["beta"]))


def _record(spec, value, params, metric, metric_value, stderr, n_trials):
    return ExperimentRecord(
        experiment_id=spec.experiment_id,
        figure_ref=spec.figure_ref,
        sweep_var=spec.sweep_var,
        sweep_value=float(value),
        mapping=spec.mapping,
        estimator=spec.estimator,
        csi=spec.csi,
        K=params["K"],
        M=params["M"],
        L=params["L"],
        beta=float(params["beta"]),
        eta=_nominal_eta(spec, params),
        distribution=spec.distribution.name,
        trials=n_trials,
        metric=metric,
        value=metric_value,
        stderr=stderr,
        seed=spec.seed,
    )


def run_experiment(spec, workers=1):
    """Execute a sweep and return one record per grid point.

    Identical results for any worker count; infeasible grid points raise with
    the offending sweep value named.
    """
    try:
        for gi, value in enumerate(spec.sweep_grid):
            params, _ = _resolve_point(spec, value)
            config = SystemConfig(
                K=params["K"], M=params["M"], L=params["L"], P=spec.P,
                beta=params["beta"], csi=spec.csi, seed=spec.seed,
            )
            mapping = mapping_from_id(spec.mapping)
            estimation.allocate_symbols(mapping, config.L, L_w=spec.L_w, L_b=spec.L_b)
    except ValueError as err:
        raise ValueError(f"{spec.experiment_id}: {spec.sweep_var} = {value!r}: {err}") from err

    records = []
    for gi, (est, truth) in enumerate(_gather(spec, workers)):
        value = spec.sweep_grid[gi]
        params, _ = _resolve_point(spec, value)
        metric_value, stderr = _metric_value(spec.metric, est, truth)
        records.append(_record(spec, value, params, spec.metric, metric_value, stderr, len(est)))
    return records


def run_mv_experiment(spec, workers=1):
    """Majority-vote accuracy sweep.

    Accuracy counts trials whose decoded sign matches the sign of the
    realized vote sum. When the spec carries a ``p_grid`` (and sweeps another
    variable, typically M), each grid point runs the whole vote-probability
    grid and yields the minimum and mean accuracy across it instead.
    """
    if spec.metric != "mv_accuracy":
        raise ValueError("majority-vote runs use the mv_accuracy metric")
    if spec.K % 2 == 0:
        raise ValueError("use an odd device count so realized votes cannot tie")
    if spec.p_grid is None:
        return run_experiment(spec, workers)

    records = []
    for gi, value in enumerate(spec.sweep_grid):
        params, _ = _resolve_point(spec, value)
        accs, errs = [], []
        for pi, p in enumerate(spec.p_grid):
            inner = replace(
                spec,
                K=params["K"], M=params["M"], L=params["L"], beta=params["beta"],
                distribution=replace(spec.distribution, p=float(p)),
                sweep_var="p",
                sweep_grid=(float(p),),
                p_grid=None,
                seed=_inner_seed(spec.seed, gi, pi),
            )
            (rec,) = run_experiment(inner, workers)
            accs.append(rec.value)
            errs.append(rec.stderr)
        accs, errs = np.asarray(accs), np.asarray(errs)
        stats = (
            ("mv_accuracy_min", float(accs.min()), float(errs[accs.argmin()])),
            ("mv_accuracy_mean", float(accs.mean()), float(np.sqrt((errs**2).sum()) / len(errs))),
        )
        for name, stat, se in stats:
            records.append(_record(spec, value, params, name, stat, se, spec.trials))
    return records


def _inner_seed(seed, grid_index, p_index):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(1000 + grid_index, p_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2**63))


def compare_to_theory(records, theory_values):
    """Relative deviation of each record from a matching theory value.

    Returns (deviations, max_abs_deviation); grids must align one-to-one.
    """
    theory_values = list(theory_values)
    if len(records) != len(theory_values):
        raise ValueError(f"grid mismatch: {len(records)} records vs {len(theory_values)} theory values")
    devs = []
    for rec, ref in zip(records, theory_values):
        if ref == 0:
            raise ValueError("theory value is zero; relative deviation undefined")
        devs.append((rec.value - ref) / ref)
    return devs, max(abs(d) for d in devs)
