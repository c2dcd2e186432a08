"""Moment maps, the point-case gauge equation and one-parameter-subgroup weights.

Throughout we use the hermitian normalisation

    H_i = sum_{h(a)=i} phi_a phi_a^*  -  sum_{t(a)=i} Tr_M(phi_a^* phi_a)

and the gauge equation ``H_i = tau_i * I``.  With this sign a representation
is tau-semistable iff ``theta(U) = sum_i tau_i dim U_i >= 0`` for every
subrepresentation ``U`` (e.g. on A2 with phi = 1 the equation is solvable
exactly when tau = (-t, t) with t > 0).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg as sla

from . import _linalg as la
from .quiver import (
    DimensionVector,
    GaugeElement,
    QuiverError,
    Representation,
    SubrepCandidate,
    compose,
    gauge_act,
    identity_gauge,
    invariance_residual,
)
from .symmetric import BlockForm, SymmetricStructure, c_transpose, structured_tau_residual

ParameterVector = Mapping[str, float]

INF = float("inf")


class TraceObstruction(ValueError):
    """sum_i tau_i n_i != 0, so the gauge equation has no solution at all."""


def default_tol() -> float:
    return float(os.environ.get("SYMQUIVER_TOL", "1e-8"))


def _partial_trace_twist(x: np.ndarray, n: int, m: int) -> np.ndarray:
    return np.einsum("ajbj->ab", x.reshape(n, m, n, m))


def moment_map(r: Representation) -> dict[str, np.ndarray]:
    n = r.dims.n
    H = {v: np.zeros((n[v], n[v]), dtype=complex) for v in r.quiver.vertices}
    for a in r.quiver.arrows:
        phi = r.phi[a.id]
        if phi.size == 0:
            continue
        H[a.head] += phi @ phi.conj().T
        H[a.tail] -= _partial_trace_twist(phi.conj().T @ phi, n[a.tail], r.dims.twist(a.id))
    return H


def trace_defect(tau: ParameterVector, dims: DimensionVector) -> float:
    return float(sum(tau.get(v, 0.0) * n for v, n in dims.n.items()))


def _deviation(r: Representation, tau: ParameterVector) -> dict[str, np.ndarray]:
    H = moment_map(r)
    return {v: h - tau.get(v, 0.0) * np.eye(h.shape[0]) for v, h in H.items()}


def gauge_residual(r: Representation, tau: ParameterVector) -> float:
    return float(np.sqrt(sum(np.linalg.norm(x) ** 2 for x in _deviation(r, tau).values())))


def infinitesimal_action(s: Mapping[str, np.ndarray], r: Representation) -> dict[str, np.ndarray]:
    """Derivative of exp(t s) . r at t = 0: s_h phi - phi (s_t (x) I)."""
    out = {}
    for a in r.quiver.arrows:
        m = r.dims.twist(a.id)
        phi = r.phi[a.id]
        out[a.id] = s[a.head] @ phi - phi @ np.kron(s[a.tail], np.eye(m))
    return out


@dataclass
class SolveOptions:
    tol: float = field(default_factory=default_tol)
    max_iter: int = 100_000
    step: float = 0.1
    shrink: float = 0.5
    growth: float = 1.2
    armijo: float = 1e-4
    min_step: float = 1e-14
    stall_ratio: float = 1e-14


@dataclass
class SolveReport:
    iterations: int
    residual_trace: list[float]
    step_trace: list[float]
    final_residual: float
    converged: bool
    step_size_used: float
    gauge: GaugeElement
    stop_reason: str = ""


def solve_gauge_equation(
    r: Representation,
    tau: ParameterVector,
    opts: SolveOptions | None = None,
) -> tuple[Representation, SolveReport]:
    """Downward flow of ||H - tau||^2 along the complexified gauge orbit.

    Each step multiplies by ``exp(-step * (H - tau))`` vertexwise, with Armijo
    backtracking on the squared residual; the step grows after every accepted
    move.  The derivative of the squared residual along the step direction is
    ``-4 ||D . phi||^2`` with ``D = H - tau``, which drives the sufficient
    decrease test and the stall test.

    Raises
    ------
    TraceObstruction
        If ``sum_i tau_i n_i`` is not zero.
    """
    opts = opts or SolveOptions()
    defect = trace_defect(tau, r.dims)
    if abs(defect) > 1e-12 * max(1.0, sum(abs(t) for t in tau.values())):
        raise TraceObstruction(f"sum_i tau_i n_i = {defect:.17g} != 0")
    gauge = identity_gauge(r.dims)
    cur = r
    dev = _deviation(cur, tau)
    f = sum(np.linalg.norm(x) ** 2 for x in dev.values())
    trace = [float(np.sqrt(f))]
    steps = [0.0]
    step = opts.step
    used = 0.0
    reason = "max_iter"
    it = 0
    for it in range(1, opts.max_iter + 1):
        if np.sqrt(f) <= opts.tol:
            reason = "converged"
            it -= 1
            break
        slope = sum(np.linalg.norm(x) ** 2 for x in infinitesimal_action(dev, cur).values())
        if slope <= opts.stall_ratio * f:
            reason = "stalled"
            it -= 1
            break
        while True:
            g = GaugeElement({v: la.expm_hermitian(x, -step) for v, x in dev.items()})
            cand = gauge_act(g, cur)
            dev_c = _deviation(cand, tau)
            f_c = sum(np.linalg.norm(x) ** 2 for x in dev_c.values())
            if f_c <= f - opts.armijo * step * 4.0 * slope:
                break
            step *= opts.shrink
            if step < opts.min_step:
                break
        if step < opts.min_step:
            reason = "line_search_failed"
            break
        cur, dev, f = cand, dev_c, f_c
        gauge = compose(g, gauge)
        used = step
        trace.append(float(np.sqrt(f)))
        steps.append(step)
        step *= opts.growth
    else:
        if np.sqrt(f) <= opts.tol:
            reason = "converged"
    final = float(np.sqrt(f))
    converged = final <= opts.tol
    report = SolveReport(
        iterations=len(trace) - 1,
        residual_trace=trace,
        step_trace=steps,
        final_residual=final,
        converged=converged,
        step_size_used=used,
        gauge=gauge,
        stop_reason="converged" if converged else reason,
    )
    return cur, report


# ---------------------------------------------------------------------------
# Kempf-Ness functional


def _frob(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


def exp_gauge(s: Mapping[str, np.ndarray], t: float = 1.0) -> GaugeElement:
    return GaugeElement({v: la.expm_hermitian(x, t) for v, x in s.items()})


def finite_time_weight(r: Representation, s: Mapping[str, np.ndarray], tau: ParameterVector, t: float) -> float:
    """sum_i < H_i(exp(t s) . r) - tau_i I, s_i >."""
    moved = gauge_act(exp_gauge(s, t), r)
    dev = _deviation(moved, tau)
    return sum(_frob(dev[v], s[v]) for v in s)


def kempf_ness(r: Representation, g: GaugeElement, tau: ParameterVector) -> float:
    """Closed form: 1/2 (||g.r||^2 - ||r||^2) - sum_i tau_i log|det g_i|."""
    moved = gauge_act(g, r)
    val = 0.5 * (moved.norm() ** 2 - r.norm() ** 2)
    for v, n in r.dims.n.items():
        if n:
            _, logdet = np.linalg.slogdet(g.at(v, n))
            val -= tau.get(v, 0.0) * logdet
    return float(val)


def _hermitian_log_of_polar(g: np.ndarray) -> np.ndarray:
    _, p = sla.polar(g, side="right")
    w, q = np.linalg.eigh(0.5 * (p + p.conj().T))
    return (q * np.log(w)) @ q.conj().T


def kempf_ness_quadrature(
    r: Representation,
    g: GaugeElement,
    tau: ParameterVector,
    nodes: int = 64,
) -> float:
    """Integral of the finite-time weight along the positive part of g.

    Writes ``g_i = u_i exp(s_i)`` (right polar decomposition) and integrates
    ``t -> finite_time_weight(r, s, tau, t)`` over [0, 1] by Gauss-Legendre.
    """
    s = {}
    for v, n in r.dims.n.items():
        s[v] = _hermitian_log_of_polar(g.at(v, n)) if n else np.zeros((0, 0), dtype=complex)
    x, w = np.polynomial.legendre.leggauss(nodes)
    ts = 0.5 * (x + 1.0)
    return float(0.5 * sum(wk * finite_time_weight(r, s, tau, tk) for tk, wk in zip(ts, w)))


# ---------------------------------------------------------------------------
# one-parameter subgroups


@dataclass(frozen=True)
class OnePS:
    """chi_i = Q_i diag(w_i) Q_i^* with Q_i unitary and integer weights."""

    basis: Mapping[str, np.ndarray]
    weights: Mapping[str, np.ndarray]

    @classmethod
    def diagonal(cls, weights: Mapping[str, list[int]]) -> "OnePS":
        return cls(
            {v: np.eye(len(w), dtype=complex) for v, w in weights.items()},
            {v: np.asarray(w, dtype=int) for v, w in weights.items()},
        )

    def matrix(self, v: str) -> np.ndarray:
        q = np.asarray(self.basis[v], dtype=complex)
        return (q * self.weights[v]) @ q.conj().T

    def scaled(self, k: int) -> "OnePS":
        return OnePS(self.basis, {v: k * np.asarray(w) for v, w in self.weights.items()})

    def validate(self, dims: DimensionVector, tol: float = 1e-10) -> None:
        for v, n in dims.n.items():
            q = np.asarray(self.basis[v])
            w = np.asarray(self.weights[v])
            if q.shape != (n, n) or w.shape != (n,):
                raise QuiverError(f"one-parameter subgroup at {v!r} has wrong shape")
            if n and np.linalg.norm(q.conj().T @ q - np.eye(n)) > tol:
                raise QuiverError(f"one-parameter subgroup basis at {v!r} is not unitary")
            if not np.all(np.asarray(w) == np.round(w)):
                raise QuiverError(f"one-parameter subgroup weights at {v!r} must be integers")


def weight_components(r: Representation, chi: OnePS) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per arrow: (phi in the chi-eigenbases, weight of each entry = w_head - w_tail)."""
    out = {}
    for a in r.quiver.arrows:
        m = r.dims.twist(a.id)
        qh = np.asarray(chi.basis[a.head], dtype=complex)
        qt = np.asarray(chi.basis[a.tail], dtype=complex)
        coeff = qh.conj().T @ r.phi[a.id] @ np.kron(qt, np.eye(m))
        wt = np.repeat(np.asarray(chi.weights[a.tail]), m)
        wts = np.asarray(chi.weights[a.head])[:, None] - wt[None, :]
        out[a.id] = (coeff, wts)
    return out


def maximal_weight(r: Representation, chi: OnePS, tau: ParameterVector, tol: float = 1e-10) -> float:
    """Limit of the finite-time weight along chi, computed exactly.

    Infinite as soon as a strictly positive weight component survives;
    otherwise ``-sum_i tau_i tr chi_i``.
    """
    for coeff, wts in weight_components(r, chi).values():
        if coeff.size and np.any(np.abs(coeff[wts > 0]) > tol):
            return INF
    # adding 0.0 turns -0.0 into 0.0
    return float(-sum(tau.get(v, 0.0) * float(np.sum(chi.weights[v])) for v in r.dims.n)) + 0.0


@dataclass(frozen=True)
class FlagStep:
    value: float
    subspace: Mapping[str, np.ndarray]


def weight_filtration(chi: OnePS) -> list[FlagStep]:
    levels = sorted({int(x) for w in chi.weights.values() for x in np.asarray(w)})
    steps = []
    for lam in levels:
        sub = {}
        for v, q in chi.basis.items():
            mask = np.asarray(chi.weights[v]) <= lam
            sub[v] = np.asarray(q, dtype=complex)[:, mask]
        steps.append(FlagStep(float(lam), sub))
    return steps


def filtration_invariance(r: Representation, chi: OnePS, tol: float = 1e-10) -> bool:
    return max_filtration_residual(r, chi) <= tol


def max_filtration_residual(r: Representation, chi: OnePS) -> float:
    return max([0.0] + [invariance_residual(r, st.subspace) for st in weight_filtration(chi)])


def theta(tau: ParameterVector, sub: SubrepCandidate | Mapping[str, int]) -> float:
    dims = sub.dims() if isinstance(sub, SubrepCandidate) else sub
    return float(sum(tau.get(v, 0.0) * k for v, k in dims.items()))


def subrep_onepS(sub: SubrepCandidate, dims: DimensionVector) -> OnePS:
    """Weight -1 on U, 0 on its unitary complement; its maximal weight is theta(U)."""
    basis, weights = {}, {}
    for v, n in dims.n.items():
        u = sub.U[v]
        comp = la.null_space(u.conj().T) if u.shape[1] else np.eye(n, dtype=complex)
        basis[v] = np.hstack([u, comp]) if n else np.zeros((0, 0), dtype=complex)
        weights[v] = np.array([-1] * u.shape[1] + [0] * (n - u.shape[1]), dtype=int)
    return OnePS(basis, weights)


def structured_onepS_residual(chi: OnePS, s: SymmetricStructure, C: BlockForm, dims: DimensionVector) -> float:
    """How far chi is from the structured Lie algebra: chi_s(i) + chi_i^t = 0."""
    worst = 0.0
    for v, n in dims.n.items():
        if n == 0:
            continue
        w = s.sigma_v[v]
        x = chi.matrix(v)
        # the C-transpose of chi_v: V_v -> V_v lands in End(V_s(v))
        xt = c_transpose(x, v, v, C)
        worst = max(worst, float(np.linalg.norm(chi.matrix(w) + xt)))
    return worst


def orthogonal_weight(
    r: Representation,
    chi: OnePS,
    tau: ParameterVector,
    s: SymmetricStructure,
    C: BlockForm,
    tol: float = 1e-10,
) -> float:
    """Maximal weight for a structured chi, finite part -sum_{pairs} 2 tau_i tr psi_i."""
    if structured_onepS_residual(chi, s, C, r.dims) > 1e-8:
        raise QuiverError("one-parameter subgroup is not in the structured Lie algebra")
    if structured_tau_residual(tau, s) > 1e-12:
        raise QuiverError("tau is not structured: need tau[s(i)] = -tau[i] and 0 at fixed vertices")
    if maximal_weight(r, chi, tau, tol) == INF:
        return INF
    seen = set()
    total = 0.0
    order = list(r.quiver.vertices)
    for v in order:
        w = s.sigma_v[v]
        if v == w or w in seen:
            continue
        seen.add(v)
        total += 2.0 * tau.get(v, 0.0) * float(np.sum(chi.weights[v]))
    return -total + 0.0
