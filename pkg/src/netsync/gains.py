"""Synchronizing feedback-gain synthesis for neutrally stable agents.

Two dual constructions on top of the marginal/Hurwitz modal split of the
agent matrix A:

* output-feedback gain ``L = U P^{-1} (C U)^T`` for agents measured
  through C (diffusive output coupling), and
* state-feedback gain ``K = (U_dag B)^T P U_dag`` for agents driven
  through B (diffusive state coupling),

where P is the Cesaro Gram matrix of the marginal block F: the time
average of ``e^{F^T t} e^{F t}``, symmetric positive definite and
satisfying ``P F + F^T P = 0``. The proof intermediates
``S = P^{1/2} F P^{-1/2}`` (skew-symmetric) and H (observable against S)
are exposed for verification; synthesis validates every invariant before
returning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg as sla

from .errors import AssumptionError, MatrixError
from .linalg import (
    ModalDecomposition,
    as_matrix,
    axis_tolerance,
    is_controllable,
    is_detectable,
    is_neutrally_stable,
    is_observable,
    is_skew_symmetric,
    is_stabilizable,
    modal_split,
    spd_sqrt,
    spectrum,
)

__all__ = [
    "LinearAgent",
    "GainSynthesis",
    "cesaro_gram",
    "cesaro_gram_quadrature",
    "synthesize_output_gain",
    "synthesize_state_gain",
    "basis_invariance_check",
    "gain_residuals",
]

#: Relative frequency-matching guard in the Cesaro closed form.
EPS_FREQ = 1e-8

#: Relative tolerance for post-synthesis invariant validation.
VALIDATE_TOL = 1e-8


@dataclass(frozen=True)
class LinearAgent:
    """One agent's matrices: A with an output map C, an input map B, or both.

    Construction checks shapes only; the numerical assumptions (neutral
    stability, detectability, stabilizability) are asserted by the
    synthesis entry points so rejection happens where the gain is built.
    """

    A: np.ndarray
    C: np.ndarray | None = None
    B: np.ndarray | None = None

    def __post_init__(self):
        a = as_matrix(self.A, "A", square=True)
        object.__setattr__(self, "A", a)
        n = a.shape[0]
        if self.C is not None:
            c = as_matrix(self.C, "C")
            if c.shape[1] != n:
                raise MatrixError(f"C has {c.shape[1]} columns, expected {n}")
            object.__setattr__(self, "C", c)
        if self.B is not None:
            b = as_matrix(self.B, "B")
            if b.shape[0] != n:
                raise MatrixError(f"B has {b.shape[0]} rows, expected {n}")
            object.__setattr__(self, "B", b)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        if self.C is not None:
            return self.C.shape[0]
        if self.B is not None:
            return self.B.shape[1]
        raise MatrixError("agent has neither C nor B")


@dataclass(frozen=True)
class GainSynthesis:
    """A synthesized gain with the intermediates needed to verify it.

    ``kind`` is "output-feedback" (gain is L, n x m) or "state-feedback"
    (gain is K, m x n). When the agent has no marginal modes (n1 = 0) the
    gain is exactly zero and P, P_sqrt, S, H are empty.
    """

    decomposition: ModalDecomposition
    P: np.ndarray
    P_sqrt: np.ndarray
    S: np.ndarray
    H: np.ndarray
    gain: np.ndarray
    kind: str
    residuals: dict = field(default_factory=dict, compare=False)


def cesaro_gram(f) -> np.ndarray:
    """Time-average Gram matrix ``lim t^-1 int_0^t e^{F^T s} e^{F s} ds``.

    Requires every eigenvalue of F on the imaginary axis and semisimple.
    Computed in closed form rather than by quadrature: with F = V Lam V^-1,
    the (j, k) entry of the conjugated integrand carries e^{(lam_j+lam_k)s},
    whose time average survives only where lam_j + lam_k = 0. Masking
    V^T V accordingly gives P = Re(V^-T M V^-1) exactly, while the defining
    limit converges only at O(1/t). Quadrature remains available as an
    independent oracle (:func:`cesaro_gram_quadrature`).

    The frequency mask pairs eigenvalues that the solver produced as exact
    conjugates; the tolerance only guards round-off, not near-resonance.
    """
    f = as_matrix(f, "F", square=True)
    n = f.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    report = spectrum(f)
    if not report.on_axis_semisimple:
        raise MatrixError("cesaro_gram requires semisimple imaginary-axis spectrum")
    if report.on_axis_count != n:
        raise MatrixError("cesaro_gram requires all eigenvalues on the imaginary axis")

    lam, v = np.linalg.eig(f)
    eps = EPS_FREQ * float(np.linalg.norm(f))
    mask = np.abs(lam[:, None] + lam[None, :]) <= eps
    gram = (v.T @ v) * mask
    v_inv = np.linalg.inv(v)
    p = (v_inv.T @ gram @ v_inv).real
    p = 0.5 * (p + p.T)

    commute = np.linalg.norm(p @ f + f.T @ p)
    if commute > 1e-9 * max(1.0, np.linalg.norm(p)):
        raise MatrixError(f"Cesaro Gram commutation residual {commute:.3e}")
    if np.linalg.eigvalsh(p)[0] <= 0.0:
        raise MatrixError("Cesaro Gram matrix is not positive definite")
    return p


def cesaro_gram_quadrature(f, t_final: float = 1e4, step: float = 0.1) -> np.ndarray:
    """Direct quadrature estimate ``t^-1 int_0^t e^{F^T s} e^{F s} ds``.

    Independent oracle for :func:`cesaro_gram`: builds all e^{F k h} by
    repeated doubling from a single e^{F h} and integrates with Simpson's
    rule. The Cesaro remainder is O(1/t), so expect ~1e-4 agreement at
    t = 1e4, far looser than the closed form.
    """
    f = as_matrix(f, "F", square=True)
    n = f.shape[0]
    num = int(round(t_final / step))
    if num % 2:  # Simpson needs an even interval count
        num += 1
    h = t_final / num

    powers = np.empty((num + 1, n, n))
    powers[0] = np.eye(n)
    base = sla.expm(f * h)
    filled = 1
    while filled < num + 1:
        take = min(filled, num + 1 - filled)
        powers[filled : filled + take] = np.einsum(
            "kij,jl->kil", powers[:take], base
        )
        base = base @ base
        filled += take
        # after each doubling, `base` equals e^{F * filled * h}

    integrand = np.einsum("kji,kjl->kil", powers, powers)  # e^{F^T s} e^{F s}
    integral = scipy.integrate.simpson(integrand, dx=h, axis=0)
    return integral / t_final


def _synthesis_inputs(agent: LinearAgent, problem: str) -> None:
    if problem == "output-feedback":
        if agent.C is None:
            raise MatrixError("output-feedback synthesis needs an agent with C")
        if not is_neutrally_stable(agent.A):
            raise AssumptionError("A1", "A is not neutrally stable")
        if not is_detectable(agent.C, agent.A):
            raise AssumptionError("A2", "(C, A) is not detectable")
    else:
        if agent.B is None:
            raise MatrixError("state-feedback synthesis needs an agent with B")
        if not is_neutrally_stable(agent.A):
            raise AssumptionError("B1", "A is not neutrally stable")
        if not is_stabilizable(agent.A, agent.B):
            raise AssumptionError("B2", "(A, B) is not stabilizable")


def _validated(synthesis: GainSynthesis, agent: LinearAgent) -> GainSynthesis:
    """Invariant asserts are part of the synthesis contract, not just tests."""
    res = gain_residuals(synthesis, agent)
    synthesis.residuals.update(res)
    checks = {k: v for k, v in res.items() if k.endswith("_residual")}
    bad = {k: v for k, v in checks.items() if not v <= VALIDATE_TOL}
    if bad:
        raise MatrixError(f"synthesized gain failed validation: {bad}")
    if synthesis.decomposition.n1 > 0:
        if synthesis.kind == "output-feedback" and not res["pair_condition"]:
            raise MatrixError("(H, S) is not observable after synthesis")
        if synthesis.kind == "state-feedback" and not res["pair_condition"]:
            raise MatrixError("(S, H^T) is not controllable after synthesis")
    return synthesis


def gain_residuals(synthesis: GainSynthesis, agent: LinearAgent) -> dict:
    """Relative invariant residuals plus the (H, S) pair condition.

    Keys ending in ``_residual`` are compared against the validation
    tolerance; ``pair_condition`` is the boolean PBH check matching the
    synthesis kind.
    """
    dec = synthesis.decomposition
    out: dict = {}
    scale_a = max(1.0, float(np.linalg.norm(agent.A)))
    out["reconstruction_residual"] = float(
        np.linalg.norm(dec.reconstruct() - agent.A) / scale_a
    )
    if dec.n1 == 0:
        out["pair_condition"] = True
        out["gain_is_zero"] = bool(np.all(synthesis.gain == 0.0))
        return out
    p, s = synthesis.P, synthesis.S
    scale_p = max(1.0, float(np.linalg.norm(p)))
    out["commutation_residual"] = float(
        np.linalg.norm(p @ dec.F + dec.F.T @ p) / scale_p
    )
    out["skew_residual"] = float(
        np.linalg.norm(s + s.T) / max(1.0, np.linalg.norm(s))
    )
    out["sqrt_residual"] = float(
        np.linalg.norm(synthesis.P_sqrt @ synthesis.P_sqrt - p) / scale_p
    )
    if synthesis.kind == "output-feedback":
        out["pair_condition"] = is_observable(synthesis.H, s)
    else:
        out["pair_condition"] = is_controllable(s, synthesis.H.T)
    return out


def _empty_synthesis(dec: ModalDecomposition, gain: np.ndarray, kind: str) -> GainSynthesis:
    empty = np.zeros((0, 0))
    return GainSynthesis(
        decomposition=dec,
        P=empty,
        P_sqrt=empty,
        S=empty,
        H=np.zeros((0, 0)),
        gain=gain,
        kind=kind,
    )


def synthesize_output_gain(
    agent: LinearAgent, decomposition: ModalDecomposition | None = None
) -> GainSynthesis:
    """Output-feedback gain ``L = U P^{-1} (C U)^T``.

    The same L synchronizes every connected topology of every size; that
    claim is exercised by the simulator, not here. With no marginal modes
    the gain is exactly zero.

    Raises :class:`AssumptionError` naming A1 (neutral stability) or A2
    (detectability) when the agent violates them.
    """
    _synthesis_inputs(agent, "output-feedback")
    dec = decomposition if decomposition is not None else modal_split(agent.A)
    if dec.n != agent.n:
        raise MatrixError("decomposition size does not match the agent")
    c = agent.C
    if dec.n1 == 0:
        gain = np.zeros((agent.n, c.shape[0]))
        return _validated(_empty_synthesis(dec, gain, "output-feedback"), agent)

    p = cesaro_gram(dec.F)
    p_sqrt = spd_sqrt(p)
    p_sqrt_inv = np.linalg.inv(p_sqrt)
    cu = c @ dec.U
    gain = dec.U @ np.linalg.solve(p, cu.T)
    s = p_sqrt @ dec.F @ p_sqrt_inv
    h = cu @ p_sqrt_inv
    synthesis = GainSynthesis(
        decomposition=dec, P=p, P_sqrt=p_sqrt, S=s, H=h,
        gain=gain, kind="output-feedback",
    )
    return _validated(synthesis, agent)


def synthesize_state_gain(
    agent: LinearAgent, decomposition: ModalDecomposition | None = None
) -> GainSynthesis:
    """State-feedback gain ``K = (U_dag B)^T P U_dag``, dual construction.

    Raises :class:`AssumptionError` naming B1 (neutral stability) or B2
    (stabilizability) when the agent violates them.
    """
    _synthesis_inputs(agent, "state-feedback")
    dec = decomposition if decomposition is not None else modal_split(agent.A)
    if dec.n != agent.n:
        raise MatrixError("decomposition size does not match the agent")
    b = agent.B
    if dec.n1 == 0:
        gain = np.zeros((b.shape[1], agent.n))
        return _validated(_empty_synthesis(dec, gain, "state-feedback"), agent)

    p = cesaro_gram(dec.F)
    p_sqrt = spd_sqrt(p)
    p_sqrt_inv = np.linalg.inv(p_sqrt)
    ub = dec.U_dag @ b
    gain = ub.T @ p @ dec.U_dag
    s = p_sqrt @ dec.F @ p_sqrt_inv
    h = (p_sqrt @ ub).T
    synthesis = GainSynthesis(
        decomposition=dec, P=p, P_sqrt=p_sqrt, S=s, H=h,
        gain=gain, kind="state-feedback",
    )
    return _validated(synthesis, agent)


def basis_invariance_check(
    agent: LinearAgent,
    split_a: ModalDecomposition,
    split_b: ModalDecomposition,
    kind: str = "output-feedback",
) -> float:
    """Frobenius distance between the gains built from two modal splits.

    Guards against basis-dependence bugs: orthogonal re-basing of U leaves
    the gain invariant (P transforms congruently), so the distance should
    be at round-off scale there. For general re-basing this is a
    measurement, not an assertion.
    """
    scale = max(1.0, float(np.linalg.norm(agent.A)))
    for label, split in (("first", split_a), ("second", split_b)):
        if np.linalg.norm(split.reconstruct() - agent.A) > 1e-6 * scale:
            raise MatrixError(f"{label} split does not decompose this agent's A")
    synth = synthesize_output_gain if kind == "output-feedback" else synthesize_state_gain
    gain_a = synth(agent, decomposition=split_a).gain
    gain_b = synth(agent, decomposition=split_b).gain
    return float(np.linalg.norm(gain_a - gain_b))
