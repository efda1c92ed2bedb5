"""Convergence lab: estimator error sweeps and degree-asymptotics checks.

The estimator under study is (2 / epsilon) * Delta f, where Delta is the
normalized graph Laplacian of a Gaussian-kernel graph built on points
sampled from a manifold. As the sampling densifies and epsilon shrinks it
approaches the Laplace-Beltrami image of f; the lab measures the error
against the closed-form image, splitting the kernel-bandwidth bias (grid
sampling, noise free) from the Monte Carlo fluctuation (seed ensembles).

Error statistics are reported raw (median/mean/max of |error|) plus a
relative median, normalized by max |Delta_M f| over the cloud rather than
pointwise (pointwise division blows up at zeros of the target).

Every cell of a sweep derives its RNG seed from (master_seed, N value,
epsilon bits, trial index), so results are independent of execution order,
parallelism, and the ordering of the sweep lists.
"""

from __future__ import annotations

import json
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.stats import linregress

from .calculus import laplacian_apply
from .graph_core import (
    DENSE_LIMIT,
    KernelConfig,
    PointCloud,
    build_weights,
    degrees,
    degrees_from_cloud,
)
from .manifolds import ManifoldDescriptor, eval_pair, get_manifold, grid_sample, sample

__all__ = [
    "ExperimentSpec",
    "CellResult",
    "CellFailure",
    "SweepResult",
    "LemmaCheckResult",
    "DegreeCheckResult",
    "DegreeStats",
    "RateFit",
    "SpreadStudy",
    "derive_cell_seed",
    "lemma_check",
    "degree_check",
    "sweep",
    "fit_rate",
    "fit_rate_xy",
    "estimator_spread_study",
    "classify_regime",
]

log = logging.getLogger("graph_calculus.convergence")

_MODES = ("dense", "sparse")
_SAMPLINGS = ("random", "grid")
_STATISTICS = ("median", "mean", "max")

# Default truncation threshold for sparse sweeps. Weights this small are
# ~8 standard deviations out and contribute nothing at double precision.
DEFAULT_TAU = 1e-8


# ----------------------------------------------------------------------
# experiment specification


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative sweep over (N, epsilon, trial seeds) for one manifold/function."""

    manifold: str
    function: str
    n_list: tuple
    epsilon_list: tuple
    trials: int
    master_seed: int
    mode: str = "dense"
    tau: float = 0.0
    sampling: str = "random"
    interior_statistic: str = "median"

    def __post_init__(self):
        m = get_manifold(self.manifold)  # raises with the list of valid ids
        if self.function not in m.functions:
            raise ValueError(
                f"unknown function id {self.function!r} for manifold {m.name!r}; "
                f"valid ids: {', '.join(sorted(m.functions))}"
            )
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "epsilon_list", tuple(float(e) for e in self.epsilon_list))
        if not self.n_list:
            raise ValueError("N_list must be non-empty")
        if not self.epsilon_list:
            raise ValueError("epsilon_list must be non-empty")
        if any(n < 2 for n in self.n_list):
            raise ValueError("all N in N_list must be >= 2")
        if any(not (e > 0) or not math.isfinite(e) for e in self.epsilon_list):
            raise ValueError("all epsilon values must be positive finite reals")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "trials", int(self.trials))
        if int(self.master_seed) < 0:
            raise ValueError("master_seed must be a nonnegative 64-bit integer")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.sampling not in _SAMPLINGS:
            raise ValueError(f"sampling must be one of {_SAMPLINGS}, got {self.sampling!r}")
        if self.interior_statistic not in _STATISTICS:
            raise ValueError(
                f"interior_statistic must be one of {_STATISTICS}, got {self.interior_statistic!r}"
            )
        if self.mode == "dense":
            if self.tau != 0.0:
                raise ValueError("dense mode is exact: tau must be 0")
            too_big = [n for n in self.n_list if n > DENSE_LIMIT]
            if too_big:
                raise ValueError(
                    f"dense mode is limited to N <= {DENSE_LIMIT}; "
                    f"use sparse mode for N in {too_big}"
                )
        else:
            if not (0.0 < self.tau < 1.0):
                raise ValueError("sparse mode requires 0 < tau < 1")

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentSpec":
        if not isinstance(payload, dict):
            raise ValueError("experiment spec must be a JSON object")
        known = {
            "manifold",
            "function",
            "N_list",
            "epsilon_list",
            "trials",
            "master_seed",
            "mode",
            "tau",
            "sampling",
            "interior_statistic",
        }
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown spec fields: {', '.join(sorted(unknown))}")
        missing = {"manifold", "function", "N_list", "epsilon_list", "trials", "master_seed"} - set(
            payload
        )
        if missing:
            raise ValueError(f"missing spec fields: {', '.join(sorted(missing))}")
        mode = payload.get("mode", "dense")
        tau = payload.get("tau", DEFAULT_TAU if mode == "sparse" else 0.0)
        return cls(
            manifold=payload["manifold"],
            function=payload["function"],
            n_list=tuple(payload["N_list"]),
            epsilon_list=tuple(payload["epsilon_list"]),
            trials=payload["trials"],
            master_seed=payload["master_seed"],
            mode=mode,
            tau=float(tau),
            sampling=payload.get("sampling", "random"),
            interior_statistic=payload.get("interior_statistic", "median"),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(payload)

    def to_dict(self) -> dict:
        return {
            "manifold": self.manifold,
            "function": self.function,
            "N_list": list(self.n_list),
            "epsilon_list": list(self.epsilon_list),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "mode": self.mode,
            "tau": self.tau,
            "sampling": self.sampling,
            "interior_statistic": self.interior_statistic,
        }

    def with_overrides(self, master_seed=None, mode=None, tau=None) -> "ExperimentSpec":
        spec = self
        if master_seed is not None:
            spec = replace(spec, master_seed=int(master_seed))
        if mode is not None:
            new_tau = spec.tau
            if mode == "dense":
                new_tau = 0.0
            elif mode == "sparse" and spec.tau == 0.0:
                new_tau = DEFAULT_TAU
            spec = replace(spec, mode=mode, tau=new_tau)
        if tau is not None:
            spec = replace(spec, tau=float(tau))
        return spec


def derive_cell_seed(master_seed: int, n: int, epsilon: float, trial: int) -> int:
    """Per-cell seed from (master_seed, N value, epsilon bits, trial index).

    Value-based (not list-index-based) so permuting the sweep lists leaves
    every cell's numbers unchanged, and independent of execution order.
    """
    eps_bits = int(np.float64(epsilon).view(np.uint64))
    ss = np.random.SeedSequence([int(master_seed), int(n), eps_bits, int(trial)])
    return int(ss.generate_state(1, np.uint64)[0])


# ----------------------------------------------------------------------
# regime classification


def classify_regime(m_dim: int, volume: float, n: int, epsilon: float, sampling: str) -> str:
    """Order-of-magnitude label for which error source dominates a cell.

    Compares the kernel-bandwidth bias scale (epsilon / 4), the self-loop
    share vol / ((N-1) (2 pi eps)^{m/2}), and the sampling-fluctuation scale
    eps^{-(m+2)/4} / sqrt(N). Grid sampling has no fluctuation, and its
    self-term is an ordinary quadrature node, so the floor only bites once
    the kernel is too narrow to span neighboring grid nodes.
    """
    floor_share = volume / ((n - 1) * (2.0 * np.pi * epsilon) ** (m_dim / 2.0))
    bias_scale = epsilon / 4.0
    if sampling == "grid":
        return "self_loop_floor" if floor_share > 0.5 else "bias"
    noise_scale = epsilon ** (-(m_dim + 2) / 4.0) / math.sqrt(n)
    scales = {
        "bias": bias_scale,
        "self_loop_floor": floor_share,
        "sampling_noise": noise_scale,
    }
    return max(scales, key=scales.get)


# ----------------------------------------------------------------------
# single-cell checks


@dataclass(frozen=True)
class DegreeStats:
    """Vertexwise statistics of r(u) = d(u) vol / ((N-1) (2 pi eps)^{m/2})."""

    ratio_mean: float
    ratio_dev: float
    residual_mean: float  # mean of r(u) - (1 + eps S(u) / 6)
    residual_dev: float
    prediction_mean: float  # mean of 1 + eps S(u) / 6
    self_loop_share: float


@dataclass(frozen=True)
class LemmaCheckResult:
    manifold: str
    function: str
    n: int  # actual cloud size (torus grids round up to a square)
    epsilon: float
    seed: int
    mode: str
    sampling: str
    estimate: np.ndarray
    reference: np.ndarray
    errors: np.ndarray
    degrees: np.ndarray
    err_abs_median: float
    err_abs_mean: float
    err_abs_max: float
    err_rel_median: float
    degree_stats: DegreeStats
    regime: str
    low_neighbor_warning: bool


@dataclass(frozen=True)
class DegreeCheckResult:
    manifold: str
    n: int
    epsilon: float
    seed: int
    sampling: str
    stats: DegreeStats
    regime: str
    low_neighbor_warning: bool


def _degree_stats(d: np.ndarray, m: ManifoldDescriptor, points: np.ndarray, epsilon: float):
    n = d.size
    norm = (n - 1) * (2.0 * np.pi * epsilon) ** (m.intrinsic_dim / 2.0)
    ratio = d * (m.volume / norm)
    prediction = 1.0 + epsilon * m.scalar_curvature(points) / 6.0
    residual = ratio - prediction
    return ratio, DegreeStats(
        ratio_mean=float(ratio.mean()),
        ratio_dev=float(ratio.std()),
        residual_mean=float(residual.mean()),
        residual_dev=float(residual.std()),
        prediction_mean=float(prediction.mean()),
        self_loop_share=float(m.volume / norm),
    )


def _check_neighbor_density(m: ManifoldDescriptor, n: int, epsilon: float) -> bool:
    expected = (2.0 * np.pi * epsilon) ** (m.intrinsic_dim / 2.0) * n / m.volume
    if expected < 1.0:
        warnings.warn(
            f"kernel sees too few neighbors on {m.name}: "
            f"(2 pi eps)^(m/2) N / vol = {expected:.3g} < 1",
            stacklevel=3,
        )
        return True
    return False


def _make_cloud(
    m: ManifoldDescriptor, n: int, seed: int, sampling: str, pin_anchor: bool
) -> PointCloud:
    if sampling == "grid":
        cloud = grid_sample(m, n)
    else:
        cloud = sample(m, n, seed)
    if pin_anchor:
        pts = cloud.points.copy()
        pts[0] = m.anchor
        cloud = PointCloud(points=pts)
    return cloud


def lemma_check(
    manifold,
    fn_id: str,
    n: int,
    epsilon: float,
    seed: int = 0,
    mode: str = "dense",
    tau: float = 0.0,
    sampling: str = "random",
    pin_anchor: bool = False,
) -> LemmaCheckResult:
    """Compare the estimator (2/eps) Delta f against the closed-form target.

    Samples a cloud (random by seed, or the deterministic grid), builds the
    kernel graph, applies the normalized Laplacian, and returns per-vertex
    errors plus summary statistics and the degree-asymptotics stats of the
    same cloud. pin_anchor replaces point 0 with the manifold's canonical
    anchor so across-seed spread can be measured at a fixed location.
    """
    m = get_manifold(manifold) if isinstance(manifold, str) else manifold
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if sampling not in _SAMPLINGS:
        raise ValueError(f"sampling must be one of {_SAMPLINGS}, got {sampling!r}")
    if mode == "dense" and tau != 0.0:
        raise ValueError("dense mode is exact: tau must be 0")
    if mode == "sparse" and not (0.0 < tau < 1.0):
        raise ValueError("sparse mode requires 0 < tau < 1")
    if mode == "dense" and n > DENSE_LIMIT:
        raise ValueError(
            f"dense mode is limited to N <= {DENSE_LIMIT} (got {n}); use sparse mode"
        )

    cloud = _make_cloud(m, n, seed, sampling, pin_anchor)
    warned = _check_neighbor_density(m, cloud.n_points, epsilon)
    f, reference = eval_pair(m, fn_id, cloud)

    w = build_weights(cloud, KernelConfig(epsilon=epsilon, truncation_tau=tau))
    d = degrees(w)
    estimate = (2.0 / epsilon) * laplacian_apply(f, w, d)
    errors = estimate - reference

    abs_err = np.abs(errors)
    normalizer = float(np.abs(reference).max())
    if normalizer == 0.0:
        normalizer = 1.0  # relative error degrades to absolute for zero targets
    _, dstats = _degree_stats(d, m, cloud.points, epsilon)
    return LemmaCheckResult(
        manifold=m.name,
        function=fn_id,
        n=cloud.n_points,
        epsilon=float(epsilon),
        seed=int(seed),
        mode=mode,
        sampling=sampling,
        estimate=estimate,
        reference=reference,
        errors=errors,
        degrees=d,
        err_abs_median=float(np.median(abs_err)),
        err_abs_mean=float(abs_err.mean()),
        err_abs_max=float(abs_err.max()),
        err_rel_median=float(np.median(abs_err) / normalizer),
        degree_stats=dstats,
        regime=classify_regime(m.intrinsic_dim, m.volume, cloud.n_points, epsilon, sampling),
        low_neighbor_warning=warned,
    )


def degree_check(
    manifold,
    n: int,
    epsilon: float,
    seed: int = 0,
    sampling: str = "random",
    tau: float = 0.0,
) -> DegreeCheckResult:
    """Degree-asymptotics check, matrix-free (degrees only, no stored W).

    Computes r(u) = d(u) vol / ((N-1) (2 pi eps)^{m/2}) and its residual
    against the curvature prediction 1 + eps S(u) / 6, plus the self-loop
    share vol / ((N-1) (2 pi eps)^{m/2}) that dominates r when epsilon is
    too small for the given N. That regime is reported, not hidden.
    """
    m = get_manifold(manifold) if isinstance(manifold, str) else manifold
    if sampling not in _SAMPLINGS:
        raise ValueError(f"sampling must be one of {_SAMPLINGS}, got {sampling!r}")
    cloud = _make_cloud(m, n, seed, sampling, pin_anchor=False)
    warned = _check_neighbor_density(m, cloud.n_points, epsilon)
    d = degrees_from_cloud(cloud, KernelConfig(epsilon=epsilon, truncation_tau=tau))
    _, stats = _degree_stats(d, m, cloud.points, epsilon)
    return DegreeCheckResult(
        manifold=m.name,
        n=cloud.n_points,
        epsilon=float(epsilon),
        seed=int(seed),
        sampling=sampling,
        stats=stats,
        regime=classify_regime(m.intrinsic_dim, m.volume, cloud.n_points, epsilon, sampling),
        low_neighbor_warning=warned,
    )


# ----------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class CellResult:
    manifold: str
    function: str
    n: int  # requested N (grid clouds may round up internally)
    epsilon: float
    seed: int
    mode: str
    err_abs_median: float
    err_abs_mean: float
    err_abs_max: float
    err_rel_median: float
    degree_ratio_mean: float  # mean of r(u) - (1 + eps S(u) / 6)
    degree_ratio_dev: float
    wall_ms: float
    trial: int
    sampling: str
    regime: str


@dataclass(frozen=True)
class CellFailure:
    n: int
    epsilon: float
    trial: int
    seed: int
    message: str


@dataclass(frozen=True)
class SweepResult:
    spec: ExperimentSpec
    rows: tuple
    failures: tuple

    @property
    def ok(self) -> bool:
        return not self.failures


def _run_cell(spec: ExperimentSpec, n: int, epsilon: float, trial: int):
    seed = derive_cell_seed(spec.master_seed, n, epsilon, trial)
    start = time.perf_counter()
    try:
        res = lemma_check(
            spec.manifold,
            spec.function,
            n,
            epsilon,
            seed=seed,
            mode=spec.mode,
            tau=spec.tau,
            sampling=spec.sampling,
        )
    except Exception as exc:  # recorded, remaining cells continue
        log.warning("cell N=%d eps=%g trial=%d failed: %s", n, epsilon, trial, exc)
        return CellFailure(n=n, epsilon=epsilon, trial=trial, seed=seed, message=str(exc))
    wall_ms = (time.perf_counter() - start) * 1000.0
    return CellResult(
        manifold=spec.manifold,
        function=spec.function,
        n=n,
        epsilon=epsilon,
        seed=seed,
        mode=spec.mode,
        err_abs_median=res.err_abs_median,
        err_abs_mean=res.err_abs_mean,
        err_abs_max=res.err_abs_max,
        err_rel_median=res.err_rel_median,
        degree_ratio_mean=res.degree_stats.residual_mean,
        degree_ratio_dev=res.degree_stats.residual_dev,
        wall_ms=wall_ms,
        trial=trial,
        sampling=spec.sampling,
        regime=res.regime,
    )


def sweep(spec: ExperimentSpec, parallelism: int = 1) -> SweepResult:
    """Run every (N, epsilon, trial) cell of the spec.

    Cells are independent; with parallelism > 1 they run on a thread pool
    (the heavy numpy kernels release the GIL). The result table is in spec
    order regardless of completion order, and cell seeds are derived from
    values, so the numbers are identical at any parallelism.
    """
    cells = [
        (n, eps, t)
        for n in spec.n_list
        for eps in spec.epsilon_list
        for t in range(spec.trials)
    ]
    log.info(
        "sweep: %s/%s, %d cells (%d N x %d eps x %d trials), mode=%s sampling=%s",
        spec.manifold,
        spec.function,
        len(cells),
        len(spec.n_list),
        len(spec.epsilon_list),
        spec.trials,
        spec.mode,
        spec.sampling,
    )
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=int(parallelism)) as pool:
            outcomes = list(pool.map(lambda c: _run_cell(spec, *c), cells))
    else:
        outcomes = [_run_cell(spec, *c) for c in cells]
    rows = tuple(o for o in outcomes if isinstance(o, CellResult))
    failures = tuple(o for o in outcomes if isinstance(o, CellFailure))
    return SweepResult(spec=spec, rows=rows, failures=failures)


# ----------------------------------------------------------------------
# rate fitting


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    axis: str


def fit_rate_xy(x: Sequence[float], y: Sequence[float], axis: str = "x") -> RateFit:
    """OLS of log(y) against log(x); needs >= 3 distinct x and positive y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"x and y must be equal-length vectors, got {x.shape} and {y.shape}")
    if np.unique(x).size < 3:
        raise ValueError("rate fitting needs >= 3 distinct values on the swept axis")
    if not (x > 0).all():
        raise ValueError("swept-axis values must be positive")
    if not (y > 0).all():
        raise ValueError("responses must be positive for log-log fitting")
    res = linregress(np.log(x), np.log(y))
    return RateFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        r_squared=float(res.rvalue**2),
        axis=axis,
    )


_AXIS_GETTERS = {
    "N": lambda row: row.n,
    "epsilon": lambda row: row.epsilon,
}

_RESPONSE_COLUMNS = (
    "err_abs_median",
    "err_abs_mean",
    "err_abs_max",
    "err_rel_median",
    "degree_ratio_mean",
    "degree_ratio_dev",
    "wall_ms",
)


def fit_rate(rows: Sequence[CellResult], swept_axis: str, response_column: str) -> RateFit:
    """Log-log rate fit over a result table along N or epsilon."""
    if swept_axis not in _AXIS_GETTERS:
        raise ValueError(f"swept_axis must be one of {tuple(_AXIS_GETTERS)}, got {swept_axis!r}")
    if response_column not in _RESPONSE_COLUMNS:
        raise ValueError(
            f"unknown response column {response_column!r}; valid: {_RESPONSE_COLUMNS}"
        )
    getter = _AXIS_GETTERS[swept_axis]
    xs = [getter(r) for r in rows]
    ys = [getattr(r, response_column) for r in rows]
    return fit_rate_xy(xs, ys, axis=swept_axis)


# ----------------------------------------------------------------------
# across-seed spread of the estimator at a pinned vertex


@dataclass(frozen=True)
class SpreadStudy:
    n_list: tuple
    spreads: tuple  # across-seed std-dev of the estimator at the anchor
    fit: RateFit


def estimator_spread_study(
    manifold,
    fn_id: str,
    n_list: Sequence[int],
    epsilon: float,
    n_seeds: int,
    master_seed: int = 0,
    mode: str = "sparse",
    tau: float = DEFAULT_TAU,
    parallelism: int = 1,
) -> SpreadStudy:
    """Across-seed standard deviation of the estimator at the anchor vertex.

    For each N, runs n_seeds independent clouds with point 0 pinned to the
    manifold anchor, and measures the std-dev of the estimator there. The
    log-log slope versus N quantifies the law-of-large-numbers fluctuation
    decay (about -1/2 in practice).
    """
    n_list = tuple(int(n) for n in n_list)
    jobs = [(n, t) for n in n_list for t in range(int(n_seeds))]

    def one(job):
        n, t = job
        seed = derive_cell_seed(master_seed, n, epsilon, t)
        res = lemma_check(
            manifold, fn_id, n, epsilon, seed=seed, mode=mode, tau=tau, pin_anchor=True
        )
        return float(res.estimate[0])

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=int(parallelism)) as pool:
            values = list(pool.map(one, jobs))
    else:
        values = [one(j) for j in jobs]
    per_n = np.asarray(values, dtype=np.float64).reshape(len(n_list), int(n_seeds))
    spreads = tuple(float(s) for s in per_n.std(axis=1))
    fit = fit_rate_xy(n_list, spreads, axis="N")
    return SpreadStudy(n_list=n_list, spreads=spreads, fit=fit)
