"""Dense linear-algebra kernels and structural classification tests.

Everything operates on plain 2-D float64 ``numpy.ndarray`` values. Inputs
are validated and copied at the API boundary, so no aliasing is observable
and all results are pure functions of their arguments. Complex arithmetic
is used internally (eigenvalues, masks) but never crosses the public API.

Norms are Frobenius for matrices and Euclidean for vectors unless stated
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import IllConditionedSplitError, MatrixError

__all__ = [
    "SpectrumReport",
    "ModalDecomposition",
    "as_matrix",
    "axis_tolerance",
    "expm",
    "spectrum",
    "is_neutrally_stable",
    "is_detectable",
    "is_stabilizable",
    "is_observable",
    "is_controllable",
    "modal_split",
    "is_skew_symmetric",
    "spd_sqrt",
]

#: Relative singular-value cutoff for PBH rank decisions.
EPS_RANK = 1e-10

#: Relative tolerance for classifying Re(lambda) as zero.
EPS_AXIS = 1e-9


def as_matrix(m, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Coerce ``m`` to a fresh 2-D float64 array, rejecting NaN/Inf.

    Copy semantics: callers may mutate the input afterwards without
    affecting any value derived from it here.
    """
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2:
        raise MatrixError(f"{name} must be 2-D, got ndim={a.ndim}")
    if a.size and not np.all(np.isfinite(a)):
        raise MatrixError(f"{name} contains non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise MatrixError(f"{name} must be square, got shape {a.shape}")
    return a


def axis_tolerance(m: np.ndarray) -> float:
    """Absolute tolerance for |Re(lambda)| ~ 0, scaled to the matrix."""
    return EPS_AXIS * max(1.0, float(np.linalg.norm(m)))


def expm(m, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``e^{M t}`` of a square real matrix.

    Backed by scaling-and-squaring with Pade approximants, which stays
    accurate for skew and marginally stable generators where naive Taylor
    truncation drifts.

    Parameters
    ----------
    m : array_like, square
    t : float
        Time scale; must be finite.

    Returns
    -------
    numpy.ndarray with ``expm(M, 0) == I`` and the semigroup property
    ``expm(M, s + t) == expm(M, s) @ expm(M, t)`` up to round-off.
    """
    a = as_matrix(m, "expm input", square=True)
    if not np.isfinite(t):
        raise MatrixError("expm time must be finite")
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    return sla.expm(a * t)


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues of a square matrix with imaginary-axis classification.

    ``axis_classification`` holds one tag per eigenvalue, each one of
    "negative-real-part", "on-axis", "positive-real-part"; the three tag
    sets partition the spectrum under the scaled axis tolerance.
    ``on_axis_semisimple`` is true iff every on-axis eigenvalue has equal
    geometric and algebraic multiplicity.
    """

    eigenvalues: np.ndarray
    axis_classification: tuple[str, ...]
    on_axis_semisimple: bool

    @property
    def has_positive_mode(self) -> bool:
        return "positive-real-part" in self.axis_classification

    @property
    def on_axis_count(self) -> int:
        return self.axis_classification.count("on-axis")


def _rank(a: np.ndarray, cutoff_scale: float = EPS_RANK, floor: float = 0.0) -> int:
    """Numerical rank via singular values with a relative cutoff."""
    if min(a.shape) == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    cutoff = max(cutoff_scale * s[0], floor)
    return int(np.count_nonzero(s > cutoff))


def _cluster_eigenvalues(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group eigenvalues closer than ``tol`` into multiplicity clusters."""
    order = np.lexsort((values.real, values.imag))
    clusters: list[list[int]] = []
    for idx in order:
        if clusters and abs(values[idx] - values[clusters[-1][-1]]) <= tol:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    return [values[np.array(c)] for c in clusters]


def spectrum(m) -> SpectrumReport:
    """Eigenvalues of ``m`` classified against the imaginary axis.

    Semisimplicity of each on-axis eigenvalue is decided by comparing its
    cluster size (algebraic multiplicity) with the rank deficiency of
    ``M - lambda I`` (geometric multiplicity).
    """
    a = as_matrix(m, "spectrum input", square=True)
    n = a.shape[0]
    if n == 0:
        return SpectrumReport(np.zeros(0, dtype=complex), (), True)
    try:
        values = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise MatrixError(f"eigensolver failed: {exc}") from exc

    tol = axis_tolerance(a)
    tags = []
    for lam in values:
        if lam.real > tol:
            tags.append("positive-real-part")
        elif lam.real < -tol:
            tags.append("negative-real-part")
        else:
            tags.append("on-axis")

    # Clusters of repeated eigenvalues; defective ones split by ~sqrt(eps),
    # so the grouping radius must sit well above round-off.
    scale = max(1.0, float(np.linalg.norm(a)))
    cluster_tol = 1e-7 * scale
    on_axis = values[np.array(tags) == "on-axis"]
    semisimple = True
    for cluster in _cluster_eigenvalues(on_axis, cluster_tol):
        lam = cluster.mean()
        spread = float(np.max(np.abs(cluster - lam))) if len(cluster) > 1 else 0.0
        geo = n - _rank(a - lam * np.eye(n), floor=10.0 * spread)
        if geo < len(cluster):
            semisimple = False
            break
    return SpectrumReport(values, tuple(tags), semisimple)


def is_neutrally_stable(m) -> bool:
    """True iff ``m`` has no eigenvalue in the open right half-plane and
    every imaginary-axis eigenvalue is semisimple."""
    report = spectrum(m)
    return not report.has_positive_mode and report.on_axis_semisimple


def is_detectable(c, a) -> bool:
    """PBH detectability test for the pair ``(C, A)``.

    True iff ``rank([A - lambda I; C]) == n`` for every eigenvalue of ``A``
    with real part >= -eps_axis.
    """
    a = as_matrix(a, "A", square=True)
    c = as_matrix(c, "C")
    n = a.shape[0]
    if c.shape[1] != n:
        raise MatrixError(f"C has {c.shape[1]} columns, expected {n}")
    tol = axis_tolerance(a)
    for lam in np.linalg.eigvals(a):
        if lam.real < -tol:
            continue
        stacked = np.vstack([a - lam * np.eye(n), c.astype(complex)])
        if _rank(stacked) < n:
            return False
    return True


def is_stabilizable(a, b) -> bool:
    """PBH stabilizability test for ``(A, B)``, by duality with
    detectability of ``(B^T, A^T)``."""
    a = as_matrix(a, "A", square=True)
    b = as_matrix(b, "B")
    if b.shape[0] != a.shape[0]:
        raise MatrixError(f"B has {b.shape[0]} rows, expected {a.shape[0]}")
    return is_detectable(b.T, a.T)


def is_observable(c, a) -> bool:
    """PBH observability test: the rank condition at every eigenvalue."""
    a = as_matrix(a, "A", square=True)
    c = as_matrix(c, "C")
    n = a.shape[0]
    if c.shape[1] != n:
        raise MatrixError(f"C has {c.shape[1]} columns, expected {n}")
    for lam in np.linalg.eigvals(a):
        stacked = np.vstack([a - lam * np.eye(n), c.astype(complex)])
        if _rank(stacked) < n:
            return False
    return True


def is_controllable(a, b) -> bool:
    """PBH controllability test, dual to :func:`is_observable`."""
    a = as_matrix(a, "A", square=True)
    b = as_matrix(b, "B")
    if b.shape[0] != a.shape[0]:
        raise MatrixError(f"B has {b.shape[0]} rows, expected {a.shape[0]}")
    return is_observable(b.T, a.T)


@dataclass(frozen=True)
class ModalDecomposition:
    """Split of a neutrally stable matrix into marginal and decaying parts.

    ``[U W]`` is invertible with ``[U_dag; W_dag] = [U W]^{-1}`` and

        [U W]^{-1} A [U W] = blkdiag(F, G)

    where all eigenvalues of the n1 x n1 block ``F`` lie on the imaginary
    axis and the n2 x n2 block ``G`` is Hurwitz. Either block may be empty
    (n1 = 0 or n2 = 0). The basis inside each block is not unique;
    downstream consumers must rely only on these invariants.
    """

    n1: int
    n2: int
    U: np.ndarray
    W: np.ndarray
    U_dag: np.ndarray
    W_dag: np.ndarray
    F: np.ndarray
    G: np.ndarray

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def reconstruct(self) -> np.ndarray:
        """Rebuild A from the factors; used by validation and tests."""
        basis = np.hstack([self.U, self.W])
        block = np.zeros((self.n, self.n))
        block[: self.n1, : self.n1] = self.F
        block[self.n1 :, self.n1 :] = self.G
        return basis @ block @ np.vstack([self.U_dag, self.W_dag])


def modal_split(a) -> ModalDecomposition:
    """Block-diagonalize a neutrally stable matrix into marginal (F) and
    Hurwitz (G) parts.

    Implementation: real Schur form with the on-axis cluster ordered first,
    then one Sylvester solve to annihilate the off-diagonal coupling block.
    This keeps the arithmetic real and avoids Jordan forms.

    Raises
    ------
    MatrixError
        If ``a`` is not neutrally stable.
    IllConditionedSplitError
        If an eigenvalue sits within an order of magnitude of the axis
        classification boundary, or the Schur ordering disagrees with the
        eigenvalue classification.
    """
    a = as_matrix(a, "A", square=True)
    n = a.shape[0]
    report = spectrum(a)
    if report.has_positive_mode or not report.on_axis_semisimple:
        raise MatrixError("modal_split requires a neutrally stable matrix")

    tol = axis_tolerance(a)
    re_parts = np.abs(report.eigenvalues.real)
    ambiguous = (re_parts > 0.1 * tol) & (re_parts < 10.0 * tol)
    if np.any(ambiguous):
        raise IllConditionedSplitError(
            "eigenvalue real part within a decade of the axis tolerance; "
            "marginal/stable clusters cannot be separated reliably"
        )

    n1 = report.on_axis_count
    n2 = n - n1
    if n == 0:
        empty = np.zeros((0, 0))
        return ModalDecomposition(0, 0, empty, empty, empty, empty, empty, empty)

    t_mat, z_mat, sdim = sla.schur(a, output="real", sort=lambda re, im: abs(re) <= tol)
    if sdim != n1:
        raise IllConditionedSplitError(
            f"Schur ordering selected {sdim} marginal eigenvalues, "
            f"classification expected {n1}"
        )

    f_block = t_mat[:n1, :n1]
    g_block = t_mat[n1:, n1:]
    coupling = t_mat[:n1, n1:]
    z1 = z_mat[:, :n1]
    z2 = z_mat[:, n1:]

    if n1 == 0 or n2 == 0:
        x = np.zeros((n1, n2))
    else:
        # F X - X G = -coupling; unique since spec(F) and spec(G) are disjoint.
        x = sla.solve_sylvester(f_block, -g_block, -coupling)

    u = z1
    w = z1 @ x + z2
    u_dag = z1.T - x @ z2.T
    w_dag = z2.T

    dec = ModalDecomposition(n1, n2, u, w, u_dag, w_dag, f_block, g_block)
    residual = np.linalg.norm(dec.reconstruct() - a)
    if residual > 1e-8 * max(1.0, np.linalg.norm(a)):
        raise IllConditionedSplitError(
            f"modal split reconstruction residual {residual:.3e} too large"
        )
    return dec


def is_skew_symmetric(m, tol: float = 1e-9) -> bool:
    """True iff ``||M + M^T|| <= tol * max(1, ||M||)``."""
    a = as_matrix(m, "matrix", square=True)
    return np.linalg.norm(a + a.T) <= tol * max(1.0, np.linalg.norm(a))


def spd_sqrt(p, sym_tol: float = 1e-8) -> np.ndarray:
    """Symmetric positive definite square root of an SPD matrix.

    Returns symmetric ``R`` with ``R @ R == P`` up to round-off, computed
    from the symmetric eigendecomposition.

    Raises ``MatrixError`` if ``p`` is not symmetric within ``sym_tol``
    (relative) or its smallest eigenvalue is not strictly positive.
    """
    a = as_matrix(p, "P", square=True)
    if a.shape[0] == 0:
        return np.zeros((0, 0))
    scale = max(1.0, float(np.linalg.norm(a)))
    if np.linalg.norm(a - a.T) > sym_tol * scale:
        raise MatrixError("spd_sqrt input is not symmetric")
    a = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(a)
    eps_pd = 1e-12 * max(1.0, float(w[-1]))
    if w[0] <= eps_pd:
        raise MatrixError(
            f"spd_sqrt input is not positive definite (min eigenvalue {w[0]:.3e})"
        )
    r = (v * np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)
