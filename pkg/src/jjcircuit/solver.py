"""Lowest eigenpairs of sparse Hermitian matrices and truncation convergence."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DENSE_LIMIT = 512
DEGENERACY_TOL = 1e-9


class SolverError(RuntimeError):
    def __init__(self, message: str, partial: "Spectrum | None" = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    vectors: np.ndarray  # columns
    residuals: np.ndarray
    meta: dict = field(default_factory=dict)

    def relative(self) -> np.ndarray:
        return self.values - self.values[0]


def _norm_estimate(h) -> float:
    if sp.issparse(h):
        return float(abs(h).sum(axis=1).max()) if h.nnz else 0.0
    return float(np.abs(h).sum(axis=1).max()) if h.size else 0.0


def _orthonormalize_blocks(values: np.ndarray, vectors: np.ndarray, tol: float) -> np.ndarray:
    """Re-orthonormalize eigenvectors inside near-degenerate blocks."""
    out = vectors.copy()
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > tol:
            if i - start > 1:
                q, _ = np.linalg.qr(out[:, start:i])
                out[:, start:i] = q
            start = i
    return out


def eigensolve_lowest(h, k: int, tol: float = 1e-10, seed: int = 0, maxiter: int | None = None,
                      dense_limit: int = DENSE_LIMIT) -> Spectrum:
    """The k algebraically smallest eigenpairs of a Hermitian matrix.

    Dense LAPACK for small problems, implicitly restarted Lanczos (ARPACK)
    with a seeded starting vector otherwise.  Residuals satisfy
    ||H v - lambda v|| <= tol * ||H||.
    """
    if hasattr(h, "matrix"):
        h = h.matrix
    n = h.shape[0]
    if not 0 < k < n and not (k == n and n <= dense_limit):
        raise ValueError(f"need 0 < k < dimension (k={k}, dimension={n})")
    norm = max(_norm_estimate(h), 1e-300)
    meta = {"dimension": n, "k": k}
    if n <= dense_limit:
        dense = h.toarray() if sp.issparse(h) else np.asarray(h)
        values, vectors = sla.eigh(dense, subset_by_index=(0, k - 1))
        meta.update(method="dense", iterations=0)
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        if np.iscomplexobj(h.data if sp.issparse(h) else h):
            v0 = v0 + 1j * rng.standard_normal(n)
        ncv = min(n - 1, max(2 * k + 1, 20))
        try:
            values, vectors = spla.eigsh(h, k=k, which="SA", v0=v0, tol=tol * 1e-2, ncv=ncv,
                                         maxiter=maxiter or max(1000, 10 * n // ncv))
        except spla.ArpackNoConvergence as err:
            partial = None
            if len(err.eigenvalues):
                order = np.argsort(err.eigenvalues)
                vals, vecs = err.eigenvalues[order], err.eigenvectors[:, order]
                res = np.linalg.norm(h @ vecs - vecs * vals, axis=0)
                partial = Spectrum(vals, vecs, res, dict(meta, method="lanczos", converged=False))
            raise SolverError("Lanczos did not converge within the iteration cap", partial) from err
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]
        meta.update(method="lanczos", ncv=ncv)
    vectors = _orthonormalize_blocks(values, vectors, DEGENERACY_TOL * norm)
    residuals = np.linalg.norm(h @ vectors - vectors * values, axis=0)
    meta["converged"] = bool(np.all(residuals <= max(tol, 1e-13) * norm * 10))
    if not meta["converged"]:
        log.warning("eigenpair residuals above tolerance: max %.3e (||H|| ~ %.3e)",
                    residuals.max(), norm)
    return Spectrum(np.asarray(values, dtype=float), vectors, residuals, meta)


def grow_truncations(kinds: Sequence[str], truncations: Sequence[int]) -> tuple[int, ...]:
    """One schedule step: oscillators x3/2 (rounded up), periodic modes +2."""
    return tuple(math.ceil(1.5 * t) if k == "oscillator" else t + 2 for k, t in zip(kinds, truncations))


@dataclass(frozen=True)
class ConvergenceResult:
    truncations: tuple[int, ...]
    spectrum: Spectrum
    converged: bool
    history: tuple[tuple[tuple[int, ...], tuple[float, ...]], ...]


def converge_truncation(build: Callable[[tuple[int, ...]], Spectrum], kinds: Sequence[str],
                        start: Sequence[int], targets: Sequence[tuple[int, int]],
                        tol_ghz: float = 1e-3, max_steps: int = 6) -> ConvergenceResult:
    """Smallest schedule point whose target splittings move < tol_ghz under one more step."""
    trunc = tuple(int(t) for t in start)
    spec = build(trunc)
    history = [(trunc, tuple(spec.values))]

    def splittings(s: Spectrum):
        return np.array([s.values[j] - s.values[i] for i, j in targets])

    for _ in range(max_steps):
        nxt = grow_truncations(kinds, trunc)
        spec_next = build(nxt)
        history.append((nxt, tuple(spec_next.values)))
        if spec_next.values[0] > spec.values[0] + 1e-9 * max(1.0, abs(spec.values[0])):
            log.warning("ground energy rose under basis growth: %.12g -> %.12g",
                        spec.values[0], spec_next.values[0])
        if np.all(np.abs(splittings(spec_next) - splittings(spec)) < tol_ghz):
            return ConvergenceResult(trunc, spec, True, tuple(history))
        trunc, spec = nxt, spec_next
    return ConvergenceResult(trunc, spec, False, tuple(history))
