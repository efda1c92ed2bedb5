"""Exact-algebra invariant suite on random clouds.

Backs the `verify` CLI command: checks the operator identities that hold in
exact arithmetic (gradient antisymmetry, gradient/divergence adjointness,
div-grad factorization of the Laplacian, the sqrt-degree null vector, and
the [0, 2] spectral range of the positive Laplacian) and reports the worst
floating-point residual for each across seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import (
    divergence,
    gradient,
    inner_edge,
    inner_vertex,
    laplacian_apply,
    laplacian_matrix,
    normalized_laplacian_matrix,
)
from .graph_core import KernelConfig, PointCloud, WeightMatrix, build_weights, degrees

__all__ = ["InvariantReport", "run_invariant_suite", "VERIFY_MAX_N"]

# dense mode enforced for the verify command
VERIFY_MAX_N = 1000


@dataclass(frozen=True)
class InvariantReport:
    name: str
    worst_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst_residual <= self.tolerance


def _divgrad_matrix(w: WeightMatrix, d: np.ndarray) -> np.ndarray:
    """Matrix of divergence(gradient(.)) assembled column by column."""
    n = w.n_vertices
    out = np.empty((n, n))
    basis = np.zeros(n)
    for k in range(n):
        basis[k] = 1.0
        out[:, k] = divergence(gradient(basis, w, d), w, d)
        basis[k] = 0.0
    return out


def run_invariant_suite(
    n: int = 100, n_seeds: int = 5, epsilon: float = 1.0, corrupt: bool = False
) -> list[InvariantReport]:
    """Worst residual per invariant over `n_seeds` random Gaussian clouds in R^3.

    `corrupt` is a fault-injection hook: it perturbs one off-diagonal weight
    asymmetrically, which must surface as an adjointness failure.
    """
    if n > VERIFY_MAX_N:
        raise ValueError(f"verification runs dense; N must be <= {VERIFY_MAX_N}, got {n}")
    if n < 2:
        raise ValueError("need N >= 2")
    worst = {
        "gradient_antisymmetry": 0.0,
        "adjointness": 0.0,
        "divgrad_factorization": 0.0,
        "sqrt_degree_null_vector": 0.0,
        "spectral_range": 0.0,
    }
    for s in range(n_seeds):
        rng = np.random.default_rng(s)
        cloud = PointCloud(points=rng.standard_normal((n, 3)))
        w = build_weights(cloud, KernelConfig(epsilon=epsilon))
        if corrupt:
            entries = w.entries.copy()
            entries[0, 1] += 1e-3  # asymmetric on purpose
            w = WeightMatrix(entries=entries, epsilon=w.epsilon)
        d = degrees(w)
        f = rng.standard_normal(n)
        field = rng.standard_normal((n, n))

        g = gradient(f, w, d)
        worst["gradient_antisymmetry"] = max(
            worst["gradient_antisymmetry"], float(np.abs(g + g.T).max())
        )

        a = inner_edge(g, field)
        b = inner_vertex(f, divergence(field, w, d))
        denom = max(abs(a), abs(b), np.finfo(float).tiny)
        worst["adjointness"] = max(worst["adjointness"], abs(a + b) / denom)

        lap = laplacian_matrix(w, d)
        worst["divgrad_factorization"] = max(
            worst["divgrad_factorization"], float(np.abs(_divgrad_matrix(w, d) - lap).max())
        )

        null = laplacian_apply(np.sqrt(d), w, d)
        worst["sqrt_degree_null_vector"] = max(
            worst["sqrt_degree_null_vector"], float(np.abs(null).max())
        )

        eigs = np.linalg.eigvalsh(normalized_laplacian_matrix(w, d))
        overshoot = max(float(-eigs.min()), float(eigs.max() - 2.0), 0.0)
        worst["spectral_range"] = max(worst["spectral_range"], overshoot)

    tolerances = {
        "gradient_antisymmetry": 1e-14,
        "adjointness": 1e-10,
        "divgrad_factorization": 1e-12,
        "sqrt_degree_null_vector": 1e-12,
        "spectral_range": 1e-10,
    }
    return [InvariantReport(k, worst[k], tolerances[k]) for k in worst]
