"""Discrete differential operators on weighted graphs.

Vertex functions are length-N float arrays; edge fields are N x N arrays
(dense ndarray, or CSR sharing the weight matrix's sparsity pattern).
Edges are all ordered pairs, so every unordered edge appears twice in edge
sums; the gradient is antisymmetric under edge reversal, general edge
fields need not be.

Sign convention: laplacian_matrix returns D^{-1/2} W D^{-1/2} - Id, which is
negative semidefinite. Its negation, Id - D^{-1/2} W D^{-1/2}, is available
as normalized_laplacian_matrix and has spectrum in [0, 2].

Beware: the gradient of a constant function is NOT zero in general, because
vertex degrees differ. This is a property of the operator, not a bug.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph_core import WeightMatrix

__all__ = [
    "gradient",
    "gradient_norm_at",
    "divergence",
    "laplacian_apply",
    "laplacian_matrix",
    "normalized_laplacian_matrix",
    "inner_vertex",
    "inner_edge",
]


def _check_vertex_function(f, n: int) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (n,):
        raise ValueError(f"vertex function has shape {f.shape}, expected ({n},)")
    if not np.isfinite(f).all():
        raise ValueError("vertex function contains non-finite values")
    return f


def _check_degrees(d, n: int) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (n,):
        raise ValueError(f"degree vector has shape {d.shape}, expected ({n},)")
    if not (d > 0).all():
        raise ValueError("degrees must be strictly positive (zero or negative degree found)")
    return d


def _check_edge_field(field, n: int):
    if sp.issparse(field):
        if field.shape != (n, n):
            raise ValueError(f"edge field has shape {field.shape}, expected ({n}, {n})")
        return field.tocsr()
    field = np.asarray(field, dtype=np.float64)
    if field.shape != (n, n):
        raise ValueError(f"edge field has shape {field.shape}, expected ({n}, {n})")
    return field


def gradient(f, w: WeightMatrix, d):
    """Edge derivative field of f.

    G(u, v) = sqrt(w(u,v) / (2 d(v))) f(v) - sqrt(w(u,v) / (2 d(u))) f(u)
    for every ordered edge; G(u, u) = 0 since both terms coincide. Output
    storage matches the weight matrix (dense or CSR).
    """
    n = w.n_vertices
    f = _check_vertex_function(f, n)
    d = _check_degrees(d, n)
    b = f / np.sqrt(d)
    if w.is_sparse:
        m = w.entries
        row = np.repeat(np.arange(n), np.diff(m.indptr))
        col = m.indices
        data = np.sqrt(m.data / 2.0) * (b[col] - b[row])
        return sp.csr_matrix((data, col.copy(), m.indptr.copy()), shape=(n, n))
    return np.sqrt(w.entries / 2.0) * (b[None, :] - b[:, None])


def gradient_norm_at(g, u: int) -> float:
    """Euclidean norm of the gradient row at vertex u: sqrt(sum_v G(u,v)^2)."""
    n = g.shape[0]
    if not 0 <= u < n:
        raise ValueError(f"vertex index {u} out of range [0, {n})")
    if sp.issparse(g):
        row = g.getrow(u)
        return float(np.sqrt(np.sum(row.data**2)))
    return float(np.sqrt(np.sum(np.asarray(g)[u] ** 2)))


def divergence(field, w: WeightMatrix, d):
    """Graph divergence of an edge field.

    [div F](u) = sum_v sqrt(w(u,v) / (2 d(u))) * (F(u,v) - F(v,u)).
    Adjoint to the gradient: <grad g, F>_E = <g, -div F>_V. Symmetric fields
    (F(u,v) = F(v,u)) map to the zero vertex function.
    """
    n = w.n_vertices
    d = _check_degrees(d, n)
    field = _check_edge_field(field, n)
    if w.is_sparse:
        m = w.entries
        row = np.repeat(np.arange(n), np.diff(m.indptr))
        coeff = sp.csr_matrix(
            (np.sqrt(m.data / (2.0 * d[row])), m.indices.copy(), m.indptr.copy()),
            shape=(n, n),
        )
        asym = (field - field.T).tocsr() if sp.issparse(field) else field - field.T
        if sp.issparse(asym):
            prod = coeff.multiply(asym)
        else:
            prod = coeff.multiply(np.asarray(asym))
        return np.asarray(prod.sum(axis=1)).ravel()
    if sp.issparse(field):
        field = field.toarray()
    coeff = np.sqrt(w.entries / (2.0 * d[:, None]))
    return (coeff * (field - field.T)).sum(axis=1)


def laplacian_apply(f, w: WeightMatrix, d):
    """Normalized graph Laplacian applied to f, by the closed-form sum.

    Delta f(u) = sum_v w(u,v) / sqrt(d(u) d(v)) f(v) - f(u), the v = u term
    included. Equal to divergence(gradient(f)) (an identity the test suite
    checks); computed directly here for speed.
    """
    n = w.n_vertices
    f = _check_vertex_function(f, n)
    d = _check_degrees(d, n)
    root = np.sqrt(d)
    return (w.entries @ (f / root)) / root - f


def laplacian_matrix(w: WeightMatrix, d):
    """Matrix form D^{-1/2} W D^{-1/2} - Id (same storage as W)."""
    n = w.n_vertices
    d = _check_degrees(d, n)
    if w.is_sparse:
        m = w.entries.tocoo()
        # scale by the symmetric product so the result stays bit-symmetric
        data = m.data / np.sqrt(d[m.row] * d[m.col])
        scaled = sp.csr_matrix((data, (m.row, m.col)), shape=(n, n))
        return (scaled - sp.identity(n, format="csr")).tocsr()
    return w.entries / np.sqrt(np.outer(d, d)) - np.eye(n)


def normalized_laplacian_matrix(w: WeightMatrix, d):
    """Positive-semidefinite alias Id - D^{-1/2} W D^{-1/2}, spectrum in [0, 2]."""
    lap = laplacian_matrix(w, d)
    return -lap


def inner_vertex(f, g) -> float:
    """Vertex-space scalar product sum_u f(u) g(u)."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != g.shape or f.ndim != 1:
        raise ValueError(f"length mismatch: {f.shape} vs {g.shape}")
    return float(np.dot(f, g))


def inner_edge(field_a, field_b) -> float:
    """Edge-space scalar product over all ordered edges, sum_e F(e) G(e)."""
    if sp.issparse(field_a) or sp.issparse(field_b):
        if field_a.shape != field_b.shape:
            raise ValueError(f"shape mismatch: {field_a.shape} vs {field_b.shape}")
        if sp.issparse(field_a):
            return float(field_a.multiply(field_b).sum())
        return float(field_b.multiply(field_a).sum())
    a = np.asarray(field_a, dtype=np.float64)
    b = np.asarray(field_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))
