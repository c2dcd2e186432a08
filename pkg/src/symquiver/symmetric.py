"""Symmetric and supermixed quivers, block bilinear forms and the sigma-transpose.

Sign conventions
----------------
Every vertex ``i`` carries a form sign ``s_i = form_sign * eps_v[i]``; the
blocks of the form satisfy ``C[sigma(i), i] = s_i * C[i, sigma(i)].T``.  For
plain symmetric quivers ``eps_v`` is identically +1 and ``s_i`` is the global
(anti)symmetry sign.

The C-transpose of ``phi: V_t (x) M -> V_h`` is computed slice by slice as::

    phi^t = C[t, s(t)]^{-1} @ phi.T @ C[h, s(h)]        (V_s(h) -> V_s(t))

and the sigma-transpose replaces the component at ``a`` by
``-eps(a) * (phi_{sigma(a)})^t`` with the effective arrow sign
``eps(a) = eps_a[a] * eps_v[tail(a)]``.  This makes the map an involution
for every admissible choice of signs; structured representations are its
fixed points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from . import _linalg as la
from .quiver import (
    DimensionVector,
    GaugeElement,
    Quiver,
    QuiverError,
    Representation,
    SubrepCandidate,
    ValidationReport,
    invariance_residual,
    validate_quiver,
)


class StructureError(QuiverError):
    """Symmetric structure or form inconsistent with the quiver."""


@dataclass(frozen=True)
class SymmetricStructure:
    sigma_v: Mapping[str, str]
    sigma_a: Mapping[str, str]
    form_sign: int = 1
    eps_v: Mapping[str, int] = field(default_factory=dict)
    eps_a: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("sigma_v", "sigma_a", "eps_v", "eps_a"):
            object.__setattr__(self, name, MappingProxyType(dict(getattr(self, name))))

    def vertex_eps(self, v: str) -> int:
        return self.eps_v.get(v, 1)

    def arrow_eps(self, a: str) -> int:
        return self.eps_a.get(a, 1)

    def vertex_sign(self, v: str) -> int:
        return self.form_sign * self.vertex_eps(v)

    def effective_sign(self, q: Quiver, a: str) -> int:
        return self.arrow_eps(a) * self.vertex_eps(q.arrow(a).tail)

    def is_fixed(self, v: str) -> bool:
        return self.sigma_v[v] == v

    @property
    def supermixed(self) -> bool:
        return any(e != 1 for e in self.eps_v.values()) or any(e != 1 for e in self.eps_a.values())


def validate_symmetric(q: Quiver, d: DimensionVector, s: SymmetricStructure) -> ValidationReport:
    report = validate_quiver(q, d)
    if not report.valid:
        return report
    sv, sa = s.sigma_v, s.sigma_a
    if s.form_sign not in (1, -1):
        report.add("form sign must be +1 (orthogonal) or -1 (symplectic)")
    for v in q.vertices:
        if v not in sv:
            report.add(f"sigma undefined on vertex {v!r}")
        elif sv[v] not in sv or sv[sv[v]] != v:
            report.add(f"sigma is not an involution on vertices (at {v!r})")
    for a in q.arrows:
        if a.id not in sa:
            report.add(f"sigma undefined on arrow {a.id!r}")
        elif sa[a.id] not in sa or sa[sa[a.id]] != a.id:
            report.add(f"sigma is not an involution on arrows (at {a.id!r})")
    if not report.valid:
        return report
    ids = set(q.arrow_ids)
    for a in q.arrows:
        if sa[a.id] not in ids:
            report.add(f"sigma maps arrow {a.id!r} to unknown arrow {sa[a.id]!r}")
            continue
        b = q.arrow(sa[a.id])
        if sv[a.tail] != b.head or sv[a.head] != b.tail:
            report.add(f"arrow {a.id!r}: axiom sigma(t(a)) = h(sigma(a)), sigma(h(a)) = t(sigma(a)) fails")
        if a.tail == sv[a.head] and b.id != a.id:
            report.add(f"arrow {a.id!r}: t(a) = sigma(h(a)) but sigma(a) != a")
        if d.twist(a.id) != d.twist(b.id):
            report.add(f"arrow {a.id!r}: twisting dimension not sigma-compatible")
        if s.arrow_eps(a.id) * s.arrow_eps(b.id) != 1:
            report.add(f"arrow {a.id!r}: eps(a) * eps(sigma(a)) != 1")
    for v in q.vertices:
        if d.n[v] != d.n[sv[v]]:
            report.add(f"vertex {v!r}: dimension not sigma-compatible")
        if s.vertex_eps(v) * s.vertex_eps(sv[v]) != 1:
            report.add(f"vertex {v!r}: eps(i) * eps(sigma(i)) != 1")
    for key, val in list(s.eps_v.items()) + list(s.eps_a.items()):
        if val not in (1, -1):
            report.add(f"sign for {key!r} must be +1 or -1")
    return report


def require_symmetric(q: Quiver, d: DimensionVector, s: SymmetricStructure) -> None:
    report = validate_symmetric(q, d, s)
    if not report.valid:
        raise StructureError("; ".join(report.violations))


# ---------------------------------------------------------------------------
# forms


@dataclass(frozen=True)
class BlockForm:
    """Bilinear form on the total space, stored as C[i] = C_{i, sigma(i)}."""

    blocks: Mapping[str, np.ndarray]
    sigma_v: Mapping[str, str]
    signs: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "blocks", MappingProxyType({k: np.asarray(v, dtype=complex) for k, v in self.blocks.items()}))
        object.__setattr__(self, "sigma_v", MappingProxyType(dict(self.sigma_v)))
        object.__setattr__(self, "signs", MappingProxyType(dict(self.signs)))

    def block(self, i: str) -> np.ndarray:
        return self.blocks[i]

    def pair_blocks(self, order: tuple[str, ...]) -> dict[tuple[str, str], np.ndarray]:
        """Blocks keyed by unordered pairs, canonical order = first in ``order``."""
        pos = {v: k for k, v in enumerate(order)}
        out = {}
        for i in order:
            j = self.sigma_v[i]
            if pos[i] <= pos[j]:
                out[(i, j)] = self.blocks[i]
        return out

    def total_matrix(self, order: tuple[str, ...]) -> np.ndarray:
        """Assembled form on the direct sum of all vertex spaces."""
        sizes = [self.blocks[v].shape[0] for v in order]
        offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        pos = {v: k for k, v in enumerate(order)}
        out = np.zeros((offs[-1], offs[-1]), dtype=complex)
        for v in order:
            j = self.sigma_v[v]
            a, b = pos[v], pos[j]
            out[offs[a]:offs[a + 1], offs[b]:offs[b + 1]] = self.blocks[v]
        return out

    def pairing(self, i: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """C(x, y) for columns x in V_i and y in V_sigma(i)."""
        return x.T @ self.blocks[i] @ y


def make_form(q: Quiver, s: SymmetricStructure, pair_blocks: Mapping[tuple[str, str], np.ndarray]) -> BlockForm:
    """Assemble a form from blocks on unordered pairs; reverse blocks follow by sign."""
    blocks = {}
    for (i, j), mat in pair_blocks.items():
        if s.sigma_v[i] != j:
            raise StructureError(f"block ({i!r}, {j!r}) does not pair sigma-partners")
        mat = np.asarray(mat, dtype=complex)
        blocks[i] = mat
        if i != j:
            blocks[j] = s.vertex_sign(i) * mat.T
    return BlockForm(blocks, dict(s.sigma_v), {v: s.vertex_sign(v) for v in q.vertices})


def standard_symplectic(n: int) -> np.ndarray:
    if n % 2:
        raise StructureError(f"symplectic form needs even dimension, got {n}")
    k = n // 2
    j = np.zeros((n, n), dtype=complex)
    j[:k, k:] = np.eye(k)
    j[k:, :k] = -np.eye(k)
    return j


def standard_form(q: Quiver, d: DimensionVector, s: SymmetricStructure) -> BlockForm:
    """Identity pairing on exchanged pairs; I or J at fixed vertices."""
    require_symmetric(q, d, s)
    pos = {v: k for k, v in enumerate(q.vertices)}
    pairs = {}
    for v in q.vertices:
        w = s.sigma_v[v]
        if v == w:
            n = d.n[v]
            if s.vertex_sign(v) == 1:
                pairs[(v, v)] = np.eye(n, dtype=complex)
            else:
                if n % 2:
                    raise StructureError(f"fixed vertex {v!r}: antisymmetric form needs even dimension, got {n}")
                pairs[(v, v)] = standard_symplectic(n)
        elif pos[v] < pos[w]:
            pairs[(v, w)] = np.eye(d.n[v], dtype=complex)
    return make_form(q, s, pairs)


def validate_form(q: Quiver, d: DimensionVector, s: SymmetricStructure, C: BlockForm, tol: float = 1e-10) -> ValidationReport:
    report = ValidationReport()
    for v in q.vertices:
        w = s.sigma_v[v]
        if v not in C.blocks:
            report.add(f"form block missing at vertex {v!r}")
            continue
        blk = C.blocks[v]
        if blk.shape != (d.n[v], d.n[w]):
            report.add(f"form block at {v!r} has shape {blk.shape}, expected {(d.n[v], d.n[w])}")
            continue
        if blk.size and np.linalg.matrix_rank(blk) < blk.shape[0]:
            report.add(f"form block at {v!r} is degenerate")
        other = C.blocks.get(w)
        if other is not None and other.shape == blk.T.shape:
            if np.linalg.norm(other - s.vertex_sign(v) * blk.T) > tol * max(1.0, np.linalg.norm(blk)):
                report.add(f"form block at {v!r}: symmetry C[sigma(i), i] = sign * C[i, sigma(i)]^T fails")
    return report


# ---------------------------------------------------------------------------
# transposes and the involution


def c_transpose(phi: np.ndarray, tail: str, head: str, C: BlockForm, m: int = 1) -> np.ndarray:
    """C-transpose of phi: V_tail (x) M -> V_head, slice-wise; maps V_s(head) (x) M -> V_s(tail)."""
    ct = C.blocks[tail]
    ch = C.blocks[head]
    out = []
    for sl in la.twist_slices(phi, m):
        if ct.size == 0 or ch.size == 0:
            out.append(np.zeros((ct.shape[1], ch.shape[1]), dtype=complex))
        else:
            out.append(np.linalg.solve(ct, sl.T @ ch))
    return la.from_slices(out)


def sigma_transpose(r: Representation, s: SymmetricStructure, C: BlockForm) -> Representation:
    q = r.quiver
    out = {}
    for a in q.arrows:
        b = q.arrow(s.sigma_a[a.id])
        m = r.dims.twist(a.id)
        out[a.id] = -s.effective_sign(q, a.id) * c_transpose(r.phi[b.id], b.tail, b.head, C, m)
    return r.replace(out)


def structured_residual(r: Representation, s: SymmetricStructure, C: BlockForm) -> float:
    t = sigma_transpose(r, s, C)
    return max([0.0] + [float(np.linalg.norm(t.phi[k] - r.phi[k])) for k in r.phi])


def is_structured_rep(r: Representation, s: SymmetricStructure, C: BlockForm, tol: float = 1e-10) -> tuple[bool, float]:
    res = structured_residual(r, s, C)
    return res <= tol, res


def alternating_residual(r: Representation, s: SymmetricStructure, C: BlockForm) -> float:
    """max |C(phi_a(v (x) e_j), w) + eps * C(v, phi_{s(a)}(w (x) e_j))| over basis v, w, e_j."""
    q = r.quiver
    worst = 0.0
    for a in q.arrows:
        b = q.arrow(s.sigma_a[a.id])
        m = r.dims.twist(a.id)
        eps = s.effective_sign(q, b.id)
        for x, y in zip(la.twist_slices(r.phi[a.id], m), la.twist_slices(r.phi[b.id], m)):
            nt, nsh = r.dims.n[a.tail], r.dims.n[b.tail]
            if nt == 0 or nsh == 0:
                continue
            lhs = np.empty((nt, nsh), dtype=complex)
            eye_t, eye_sh = np.eye(nt), np.eye(nsh)
            for iv in range(nt):
                for iw in range(nsh):
                    v, w = eye_t[:, iv], eye_sh[:, iw]
                    lhs[iv, iw] = C.pairing(a.head, x @ v, w) + eps * C.pairing(a.tail, v, y @ w)
            worst = max(worst, float(np.max(np.abs(lhs))))
    return worst


def project_structured(r: Representation, s: SymmetricStructure, C: BlockForm) -> Representation:
    t = sigma_transpose(r, s, C)
    return r.replace({k: 0.5 * (r.phi[k] + t.phi[k]) for k in r.phi})


# ---------------------------------------------------------------------------
# orthogonality


def orthogonal_complement(
    U: SubrepCandidate | Mapping[str, np.ndarray],
    C: BlockForm,
    r: Representation | None = None,
) -> SubrepCandidate:
    """C-orthogonal complement; the component at i is orthogonal to U at sigma(i)."""
    basis = U.U if isinstance(U, SubrepCandidate) else U
    out = {}
    for i, blk in C.blocks.items():
        j = C.sigma_v[i]
        uj = basis[j]
        # x in V_i with C(x, u) = 0 for u in U_j  <=>  u^T C_{j,i} x = 0
        cji = C.blocks[j]
        out[i] = la.null_space(uj.T @ cji) if uj.shape[1] else np.eye(cji.shape[1], dtype=complex)
    res = invariance_residual(r, out) if r is not None else float("nan")
    return SubrepCandidate(out, res)


def isotropy_residual(U: SubrepCandidate | Mapping[str, np.ndarray], C: BlockForm) -> float:
    basis = U.U if isinstance(U, SubrepCandidate) else U
    worst = 0.0
    for i, blk in C.blocks.items():
        ui, uj = basis[i], basis[C.sigma_v[i]]
        if ui.shape[1] and uj.shape[1]:
            worst = max(worst, float(np.linalg.norm(ui.T @ blk @ uj, 2)))
    return worst


def is_isotropic(U: SubrepCandidate | Mapping[str, np.ndarray], C: BlockForm, tol: float = 1e-9) -> bool:
    scale = max([1.0] + [np.linalg.norm(b, 2) for b in C.blocks.values() if b.size])
    return isotropy_residual(U, C) <= tol * scale


def induced_form(C: BlockForm, basis: Mapping[str, np.ndarray]) -> BlockForm:
    """Form pulled back along vertex-wise bases (columns); new blocks b_i^T C_i b_s(i)."""
    blocks = {i: basis[i].T @ C.blocks[i] @ basis[C.sigma_v[i]] for i in C.blocks}
    return BlockForm(blocks, C.sigma_v, C.signs)


# ---------------------------------------------------------------------------
# structured gauge elements and parameters


def structured_gauge_residual(g: GaugeElement, C: BlockForm, dims: DimensionVector) -> float:
    """max_i || g_i^T C_i g_s(i) - C_i ||: zero iff g preserves the form."""
    worst = 0.0
    for i, blk in C.blocks.items():
        if blk.size == 0:
            continue
        gi = g.at(i, dims.n[i])
        gj = g.at(C.sigma_v[i], dims.n[C.sigma_v[i]])
        worst = max(worst, float(np.linalg.norm(gi.T @ blk @ gj - blk)))
    return worst


def dual_partner_gauge(a: np.ndarray, i: str, C: BlockForm) -> np.ndarray:
    """The matrix at sigma(i) forced by g_i = a: the inverse C-transpose of a."""
    ci = C.blocks[i]
    j = C.sigma_v[i]
    cj = C.blocks[j]
    # g_j must satisfy a^T C_i g_j = C_i
    return np.linalg.solve(a.T @ ci, ci) if ci.size else np.zeros_like(cj)


def structured_tau_residual(tau: Mapping[str, float], s: SymmetricStructure) -> float:
    worst = 0.0
    for v, w in s.sigma_v.items():
        if v == w:
            worst = max(worst, abs(tau.get(v, 0.0)))
        else:
            worst = max(worst, abs(tau.get(v, 0.0) + tau.get(w, 0.0)))
    return worst


def dual_representation(r: Representation, s: SymmetricStructure) -> Representation:
    """Plain dual pulled back along sigma: dims n_s(i), maps -eps(a) * phi_{s(a)}^T."""
    q = r.quiver
    n = {v: r.dims.n[s.sigma_v[v]] for v in q.vertices}
    d = DimensionVector(n, r.dims.m)
    phi = {}
    for a in q.arrows:
        b = s.sigma_a[a.id]
        m = r.dims.twist(a.id)
        sl = [x.T for x in la.twist_slices(r.phi[b], m)]
        phi[a.id] = -s.effective_sign(q, a.id) * la.from_slices(sl)
    return Representation(q, d, phi)
