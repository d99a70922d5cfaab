"""Coupling topologies: validation, stationary vectors, certificates.

A valid coupling matrix has nonnegative off-diagonal entries and zero row
sums; it is *connected* when its directed graph (arc i -> j iff
gamma_ij > 0) has a node reachable from every other node. Connectedness
makes 0 a simple eigenvalue of Gamma, every other eigenvalue strictly
stable, and ``e^{Gamma t} -> 1 r^T`` with r the normalized left null
vector.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import TopologyError
from .linalg import as_matrix, expm

__all__ = [
    "NetworkTopology",
    "LyapunovCertificate",
    "validate_topology",
    "stationary_vector",
    "ergodic_limit_check",
    "lyapunov_certificate",
    "random_connected_topology",
    "spectral_gap",
]

#: Relative slack for row sums and tiny negative off-diagonal entries.
EPS_ROW = 1e-8


@dataclass(frozen=True)
class NetworkTopology:
    """A validated coupling matrix with its connectivity certificate.

    ``r`` is the left stationary vector (r^T Gamma = 0, r^T 1 = 1) when the
    topology is connected, and all-NaN otherwise.
    """

    p: int
    gamma: np.ndarray
    r: np.ndarray
    connected: bool


@dataclass(frozen=True)
class LyapunovCertificate:
    """Certificate matrices for the contraction of a connected topology.

    P_cert solves ``(Gamma - 1 r^T)^T P + P (Gamma - 1 r^T) = -Q_cert``
    with Q_cert = I. Projecting both sides by ``I - 1 r^T`` yields the
    positive semidefinite pair with ``Gamma^T P_hat + P_hat Gamma = -Q_hat``.
    """

    P_cert: np.ndarray
    Q_cert: np.ndarray
    P_hat: np.ndarray
    Q_hat: np.ndarray


def _row_tolerance(gamma: np.ndarray) -> float:
    return EPS_ROW * max(1.0, float(np.linalg.norm(gamma)))


def _absorb_row_residual(gamma: np.ndarray) -> np.ndarray:
    """Project rows to zero sum by adjusting the diagonal.

    Measured residuals (row @ 1) are driven to exact 0.0 where a float
    diagonal achieving that exists; the simple subtraction can 2-cycle
    half an ulp away from it, so each row also walks the neighboring
    representable diagonals. For rows whose off-diagonal entries admit no
    exactly-cancelling diagonal at all, the minimal-residual candidate is
    kept, which is below one ulp of the row magnitude.
    """
    p = gamma.shape[0]
    ones = np.ones(p)
    gamma[np.diag_indices(p)] -= gamma @ ones
    for i in range(p):
        row = gamma[i]
        best = d = row[i]
        best_res = abs(row @ ones)
        for direction in (np.inf, -np.inf):
            cand = d
            for _ in range(4):
                cand = np.nextafter(cand, direction)
                row[i] = cand
                res = abs(row @ ones)
                if res < best_res:
                    best, best_res = cand, res
            row[i] = d
        row[i] = best
    return gamma


def _is_connected(gamma: np.ndarray) -> bool:
    """Directed reachability: some node is reachable from every other node.

    BFS on reversed arcs from each candidate root; arc (i, j) exists iff
    gamma_ij > 0. O(p * (p + arcs)), fine at desk scale.
    """
    p = gamma.shape[0]
    if p == 1:
        return True
    reversed_adj = [np.nonzero(gamma[:, j] > 0.0)[0] for j in range(p)]
    for root in range(p):
        seen = np.zeros(p, dtype=bool)
        seen[root] = True
        queue = deque([root])
        while queue:
            node = queue.popleft()
            for prev in reversed_adj[node]:
                if not seen[prev]:
                    seen[prev] = True
                    queue.append(prev)
        if seen.all():
            return True
    return False


def _null_left_vector(gamma: np.ndarray) -> np.ndarray:
    """Unit-sum left null vector of gamma via SVD of gamma^T.

    The right singular vector of the smallest singular value of gamma^T is
    robust to mild non-normality. Requires 0 to be a simple eigenvalue.
    """
    p = gamma.shape[0]
    if p == 1:
        return np.ones(1)
    _, s, vt = np.linalg.svd(gamma.T)
    if s[-2] <= 1e-10 * max(1.0, s[0]):
        raise TopologyError("left null space is not one-dimensional")
    v = vt[-1]
    total = v @ np.ones(p)
    if total == 0.0:
        raise TopologyError("left null vector orthogonal to the ones vector")
    r = v / total
    # Renormalize until r^T 1 == 1 exactly as measured.
    ones = np.ones(p)
    for _ in range(8):
        total = r @ ones
        if total == 1.0:
            break
        r = r / total
    return r


def validate_topology(gamma_raw) -> NetworkTopology:
    """Validate and normalize a raw coupling matrix.

    Off-diagonal entries more negative than the row tolerance are
    rejected; tiny negatives (file round-trip noise) are clamped to zero.
    Row sums within tolerance of zero are projected to exactly zero by
    absorbing the residual into the diagonal. Connectivity is decided by
    directed reachability and recorded on the result rather than raised,
    so callers can inspect disconnected topologies.
    """
    gamma = as_matrix(gamma_raw, "gamma", square=True)
    p = gamma.shape[0]
    tol = _row_tolerance(gamma)
    diagonal = np.diag(gamma).copy()

    off_diag = gamma
    np.fill_diagonal(off_diag, 0.0)
    worst = off_diag.min() if p > 1 else 0.0
    if worst < -tol:
        raise TopologyError(
            f"negative off-diagonal entry {worst:.3e} exceeds tolerance {tol:.3e}"
        )
    np.clip(off_diag, 0.0, None, out=off_diag)
    gamma[np.diag_indices(p)] = diagonal

    row_residual = gamma @ np.ones(p)
    if np.max(np.abs(row_residual)) > tol:
        raise TopologyError(
            f"row sum residual {np.max(np.abs(row_residual)):.3e} "
            f"exceeds tolerance {tol:.3e}"
        )
    gamma = _absorb_row_residual(gamma)

    connected = _is_connected(gamma)
    r = _null_left_vector(gamma) if connected else np.full(p, np.nan)
    return NetworkTopology(p=p, gamma=gamma, r=r, connected=connected)


def stationary_vector(topology: NetworkTopology) -> np.ndarray:
    """Left stationary vector r with ``r^T Gamma ~ 0`` and ``r^T 1 = 1``."""
    if not topology.connected:
        raise TopologyError("stationary vector requires a connected topology")
    return _null_left_vector(topology.gamma)


def spectral_gap(topology: NetworkTopology) -> float:
    """|max real part| over the nonzero spectrum of a connected Gamma."""
    if not topology.connected:
        raise TopologyError("spectral gap requires a connected topology")
    if topology.p == 1:
        raise TopologyError("single-node topology has no nonzero spectrum")
    values = np.linalg.eigvals(topology.gamma)
    nonzero = np.delete(values, np.argmin(np.abs(values)))
    return float(-np.max(nonzero.real))


def ergodic_limit_check(topology: NetworkTopology, t: float) -> float:
    """Frobenius distance ``||e^{Gamma t} - 1 r^T||`` at time t >= 0."""
    if not topology.connected:
        raise TopologyError("ergodic limit requires a connected topology")
    if t < 0:
        raise TopologyError("ergodic limit time must be nonnegative")
    ones_rt = np.outer(np.ones(topology.p), topology.r)
    return float(np.linalg.norm(expm(topology.gamma, t) - ones_rt))


def lyapunov_certificate(topology: NetworkTopology) -> LyapunovCertificate:
    """Contraction certificate for ``Gamma - 1 r^T`` with Q fixed to I.

    Any positive definite Q works; the identity is canonical and keeps the
    certificate reproducible. The projected pair (P_hat, Q_hat) satisfies
    ``Gamma^T P_hat + P_hat Gamma = -Q_hat`` and ``P_hat @ 1 = 0``.
    """
    if not topology.connected:
        raise TopologyError("certificate requires a connected topology")
    p = topology.p
    gamma = topology.gamma
    ones_rt = np.outer(np.ones(p), topology.r)
    hurwitz = gamma - ones_rt
    q_cert = np.eye(p)
    try:
        p_cert = sla.solve_continuous_lyapunov(hurwitz.T, -q_cert)
    except Exception as exc:
        raise TopologyError(f"Lyapunov solve failed: {exc}") from exc
    p_cert = 0.5 * (p_cert + p_cert.T)

    residual = hurwitz.T @ p_cert + p_cert @ hurwitz + q_cert
    if np.linalg.norm(residual) > 1e-8 * max(1.0, np.linalg.norm(p_cert)):
        raise TopologyError(
            "Lyapunov residual too large; topology is not contracting "
            "(connectivity validation bug?)"
        )

    projector = np.eye(p) - ones_rt
    p_hat = projector.T @ p_cert @ projector
    q_hat = projector.T @ q_cert @ projector
    return LyapunovCertificate(P_cert=p_cert, Q_cert=q_cert, P_hat=p_hat, Q_hat=q_hat)


def random_connected_topology(p: int, density: float, seed: int) -> NetworkTopology:
    """Random connected topology, deterministic in ``seed``.

    A random spanning arborescence toward a random root guarantees
    connectivity; extra arcs are then added independently with probability
    ``density``. Arc weights are uniform in (0, 2] and the diagonal absorbs
    the row sums.
    """
    if p < 1:
        raise TopologyError("agent count must be >= 1")
    if not 0.0 < density <= 1.0:
        raise TopologyError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    gamma = np.zeros((p, p))
    if p > 1:
        order = rng.permutation(p)  # order[0] is the root
        for k in range(1, p):
            target = order[rng.integers(0, k)]
            gamma[order[k], target] = 2.0 - rng.uniform(0.0, 2.0)
        for i in range(p):
            for j in range(p):
                if i != j and gamma[i, j] == 0.0 and rng.random() < density:
                    gamma[i, j] = 2.0 - rng.uniform(0.0, 2.0)
    gamma[np.diag_indices(p)] = -gamma.sum(axis=1)
    return validate_topology(gamma)
