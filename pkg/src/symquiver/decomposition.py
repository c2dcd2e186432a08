"""Stability witnesses, endomorphism algebras and polystable decomposition.

Destabilizer search is sound but not complete: it walks a lattice of
subrepresentations generated from basis and random seed vectors, their
co-generated counterparts, kernels and images of endomorphisms, and closes
under sums and intersections up to a budget.  When every vertex has
dimension at most one the search enumerates all coordinate subspace tuples
and is exhaustive.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla

from . import _linalg as la
from .moment import ParameterVector, TraceObstruction, theta, trace_defect
from .quiver import (
    DimensionVector,
    GaugeElement,
    Quiver,
    QuiverError,
    Representation,
    SubrepCandidate,
    direct_sum,
    direct_sum_many,
    gauge_act,
    generated_subrep,
    invariance_residual,
    make_subrep,
    restrict,
)
from .symmetric import (
    BlockForm,
    StructureError,
    SymmetricStructure,
    dual_representation,
    induced_form,
    is_isotropic,
    isotropy_residual,
    orthogonal_complement,
    structured_tau_residual,
)

PLAIN_STABLE = "PLAIN_STABLE"
ORTH_STABLE_F = "ORTH_STABLE_F"
DUAL_PAIR_E = "DUAL_PAIR_E"
SELFDUAL_PAIR_S = "SELFDUAL_PAIR_S"


class NonSemisimpleError(QuiverError):
    """The endomorphism algebra does not split the representation."""


# ---------------------------------------------------------------------------
# intertwiners


@dataclass(frozen=True)
class EndAlgebra:
    basis: tuple[Mapping[str, np.ndarray], ...]
    dim: int

    def element(self, coeffs: Sequence[complex]) -> dict[str, np.ndarray]:
        out = {v: np.zeros_like(m) for v, m in self.basis[0].items()} if self.basis else {}
        for c, b in zip(coeffs, self.basis):
            for v in out:
                out[v] = out[v] + c * b[v]
        return out


def _intertwining_matrix(r1: Representation, r2: Representation) -> tuple[np.ndarray, list[tuple[str, int, int]]]:
    """Linear system for T_i: V1_i -> V2_i with T_h phi1 = phi2 (T_t (x) I)."""
    q = r1.quiver
    n1, n2 = r1.dims.n, r2.dims.n
    slots = [(v, a, b) for v in q.vertices for a in range(n2[v]) for b in range(n1[v])]
    rows = sum(n2[a.head] * n1[a.tail] * r1.dims.twist(a.id) for a in q.arrows)
    mat = np.zeros((rows, len(slots)), dtype=complex)
    for col, (v, a_, b_) in enumerate(slots):
        off = 0
        for arr in q.arrows:
            m = r1.dims.twist(arr.id)
            size = n2[arr.head] * n1[arr.tail] * m
            if size == 0:
                continue
            block = np.zeros((n2[arr.head], n1[arr.tail] * m), dtype=complex)
            if arr.head == v:
                # (E_ab phi1)
                block[a_, :] += r1.phi[arr.id][b_, :]
            if arr.tail == v:
                # phi2 (E_ab (x) I)
                e = np.zeros((n2[v], n1[v]), dtype=complex)
                e[a_, b_] = 1.0
                block -= r2.phi[arr.id] @ np.kron(e, np.eye(m))
            mat[off:off + size, col] = block.reshape(-1)
            off += size
    return mat, slots


def intertwiner_space(r1: Representation, r2: Representation, rtol: float = 1e-9) -> list[dict[str, np.ndarray]]:
    if r1.quiver != r2.quiver:
        raise QuiverError("intertwiners between representations of different quivers")
    mat, slots = _intertwining_matrix(r1, r2)
    if not slots:
        return []
    if mat.shape[0] == 0:
        ns = np.eye(len(slots), dtype=complex)
    else:
        ns = la.null_space(mat, rtol)
    out = []
    for k in range(ns.shape[1]):
        el = {v: np.zeros((r2.dims.n[v], r1.dims.n[v]), dtype=complex) for v in r1.quiver.vertices}
        for val, (v, a, b) in zip(ns[:, k], slots):
            el[v][a, b] = val
        out.append(el)
    return out


def endomorphism_algebra(r: Representation) -> EndAlgebra:
    basis = intertwiner_space(r, r)
    return EndAlgebra(tuple(basis), len(basis))


def is_simple(r: Representation) -> bool:
    """Only global scalars commute with r (vertices of dimension 0 are ignored)."""
    return endomorphism_algebra(r).dim == 1


def _random_coeffs(rng: np.random.Generator, k: int) -> np.ndarray:
    return rng.standard_normal(k) + 1j * rng.standard_normal(k)


def find_isomorphism(
    r1: Representation,
    r2: Representation,
    seed: int = 0,
    det_tol: float = 1e-8,
) -> dict[str, np.ndarray] | None:
    """A generic invertible intertwiner r1 -> r2, or None."""
    if dict(r1.dims.n) != dict(r2.dims.n):
        return None
    basis = intertwiner_space(r1, r2)
    if not basis:
        return None if r1.dims.total() else {v: np.zeros((0, 0)) for v in r1.quiver.vertices}
    rng = np.random.default_rng(seed)
    for _ in range(3):
        c = _random_coeffs(rng, len(basis))
        t = {v: sum(ci * b[v] for ci, b in zip(c, basis)) for v in r1.quiver.vertices}
        ok = True
        for v, mat in t.items():
            if mat.size == 0:
                continue
            sv = np.linalg.svd(mat, compute_uv=False)
            if sv[-1] <= det_tol * max(sv[0], 1e-300):
                ok = False
                break
        if ok:
            return t
    return None


def is_isomorphic(r1: Representation, r2: Representation, seed: int = 0) -> bool:
    return find_isomorphism(r1, r2, seed) is not None


# ---------------------------------------------------------------------------
# destabilizer search


@dataclass(frozen=True)
class Destabilizer:
    candidate: SubrepCandidate
    theta: float
    exhaustive: bool


@dataclass
class SearchOptions:
    budget: int = 256
    seeds: int = 4
    seed: int = 0
    tol: float = 1e-8


def _check_trace(r: Representation, tau: ParameterVector) -> None:
    d = trace_defect(tau, r.dims)
    if abs(d) > 1e-12 * max(1.0, sum(abs(t) for t in tau.values())):
        raise TraceObstruction(f"sum_i tau_i n_i = {d:.17g} != 0")


def _is_proper_nonzero(c: SubrepCandidate, d: DimensionVector) -> bool:
    return not c.is_zero() and not c.is_full(d)


def _violates(c: SubrepCandidate, tau: ParameterVector, d: DimensionVector, strict: bool, eps: float = 1e-12) -> bool:
    th = theta(tau, c)
    if strict:
        return _is_proper_nonzero(c, d) and th <= eps
    return th < -eps


def _scale(r: Representation) -> float:
    return max([1.0] + [float(np.linalg.norm(p, 2)) for p in r.phi.values() if p.size])


def coordinate_subreps(r: Representation, tol: float = 1e-10) -> list[SubrepCandidate]:
    """All invariant coordinate subspace tuples; exhaustive when every n_i <= 1."""
    n = r.dims.n
    live = [v for v in r.quiver.vertices if n[v] > 0]
    if any(n[v] > 1 for v in live):
        raise QuiverError("coordinate enumeration needs every n_i <= 1")
    if len(live) > 16:
        raise QuiverError("too many vertices for exhaustive enumeration")
    scale = _scale(r)
    out = []
    for mask in itertools.product((0, 1), repeat=len(live)):
        chosen = {v for v, b in zip(live, mask) if b}
        ok = True
        for a in r.quiver.arrows:
            if a.tail in chosen and a.head not in chosen and np.abs(r.phi[a.id]).max(initial=0.0) > tol * scale:
                ok = False
                break
        if ok:
            U = {v: (np.eye(n[v], dtype=complex) if v in chosen else la.empty(n[v])) for v in r.quiver.vertices}
            out.append(SubrepCandidate(U, invariance_residual(r, U)))
    return out


def adjoint_representation(r: Representation) -> Representation:
    """Arrows reversed with adjoint slices: U is invariant iff U^perp is invariant here."""
    q = r.quiver
    rq = Quiver.from_edges(q.vertices, [(a.id, a.head, a.tail) for a in q.arrows])
    phi = {}
    for a in q.arrows:
        m = r.dims.twist(a.id)
        phi[a.id] = la.from_slices([s.conj().T for s in la.twist_slices(r.phi[a.id], m)]) if m else r.phi[a.id].T
    return Representation(rq, r.dims, phi)


def _perp(U: Mapping[str, np.ndarray], n: Mapping[str, int]) -> dict[str, np.ndarray]:
    return {v: la.null_space(u.conj().T) if u.shape[1] else np.eye(n[v], dtype=complex) for v, u in U.items()}


class _Lattice:
    def __init__(self, r: Representation, tol: float, budget: int):
        self.r = r
        self.tol = tol * _scale(r)
        self.budget = budget
        self.items: list[SubrepCandidate] = []

    def full(self) -> bool:
        return len(self.items) >= self.budget

    def add(self, U: Mapping[str, np.ndarray]) -> SubrepCandidate | None:
        cand = make_subrep(self.r, {v: la.orth(u) for v, u in U.items()})
        if cand.invariance_residual > self.tol:
            return None
        dims = cand.dims()
        for old in self.items:
            if old.dims() == dims and old.same_as(cand):
                return old
        if self.full():
            return None
        self.items.append(cand)
        return cand

    def close(self) -> None:
        start = 0
        while start < len(self.items) and not self.full():
            stop = len(self.items)
            for i in range(stop):
                for j in range(max(i + 1, start), stop):
                    if self.full():
                        return
                    a, b = self.items[i].U, self.items[j].U
                    s = {v: la.span_sum(a[v], b[v]) for v in a}
                    x = {v: la.intersect(a[v], b[v]) for v in a}
                    if theta_additivity_defect(a, b, s, x) == 0:
                        self.add(s)
                        self.add(x)
            start = stop


def theta_additivity_defect(a, b, s, x) -> int:
    """sum_v |dim(a+b) + dim(a cap b) - dim a - dim b|; zero for exact subspace arithmetic."""
    return sum(abs(s[v].shape[1] + x[v].shape[1] - a[v].shape[1] - b[v].shape[1]) for v in a)


def _end_candidates(r: Representation, rng: np.random.Generator, extra: int = 2) -> list[dict[str, np.ndarray]]:
    """Kernels and images of (X - lambda) for endomorphisms X and their eigenvalues."""
    alg = endomorphism_algebra(r)
    if alg.dim <= 1:
        return []
    elems = list(alg.basis) + [alg.element(_random_coeffs(rng, alg.dim)) for _ in range(extra)]
    n = r.dims.n
    out = []
    for X in elems:
        eig = np.concatenate([np.linalg.eigvals(X[v]) for v in X if X[v].size] or [np.zeros(0)])
        for lam in _cluster(eig):
            ker, img = {}, {}
            for v in X:
                shifted = X[v] - lam * np.eye(n[v])
                ker[v] = la.null_space(shifted, 1e-8) if n[v] else la.empty(0)
                img[v] = la.orth(shifted, 1e-8) if n[v] else la.empty(0)
            out += [ker, img]
    return out


def _cluster(vals: np.ndarray, tol: float = 1e-6) -> list[complex]:
    vals = sorted(vals, key=lambda z: (round(z.real, 9), round(z.imag, 9)))
    centers: list[complex] = []
    scale = max([1.0] + [abs(z) for z in vals])
    for z in vals:
        if not any(abs(z - c) <= tol * scale for c in centers):
            centers.append(complex(z))
    return centers


def subrep_lattice(r: Representation, opts: SearchOptions | None = None) -> list[SubrepCandidate]:
    opts = opts or SearchOptions()
    rng = np.random.default_rng(opts.seed)
    n = r.dims.n
    lat = _Lattice(r, opts.tol, opts.budget)
    adj = adjoint_representation(r)
    seeds: list[list[tuple[str, np.ndarray]]] = []
    for v in r.quiver.vertices:
        for k in range(n[v]):
            seeds.append([(v, np.eye(n[v])[:, k])])
        for _ in range(opts.seeds if n[v] else 0):
            seeds.append([(v, _random_coeffs(rng, n[v]))])
    for sd in seeds:
        lat.add(generated_subrep(r, sd).U)
        # the largest subrep inside the complement of what sd co-generates
        co = generated_subrep(adj, sd)
        lat.add(_perp(co.U, n))
    for U in _end_candidates(r, rng):
        lat.add(U)
    base = list(lat.items)
    for a, b in itertools.combinations(base, 2):
        if lat.full():
            break
        lat.add({v: la.span_sum(a.U[v], b.U[v]) for v in a.U})
    lat.close()
    return lat.items


def _pick(cands: list[SubrepCandidate], tau: ParameterVector, d: DimensionVector, strict: bool) -> SubrepCandidate | None:
    bad = [c for c in cands if _violates(c, tau, d, strict)]
    if not bad:
        return None
    return min(bad, key=lambda c: (theta(tau, c), c.total()))


def find_destabilizer(
    r: Representation,
    tau: ParameterVector,
    mode: str = "semi",
    opts: SearchOptions | None = None,
) -> Destabilizer | None:
    """Invariant U with theta(U) < 0 (mode 'semi') or theta(U) <= 0, U proper nonzero ('strict')."""
    if mode not in ("semi", "strict"):
        raise ValueError("mode must be 'semi' or 'strict'")
    _check_trace(r, tau)
    opts = opts or SearchOptions()
    exhaustive = all(x <= 1 for x in r.dims.n.values())
    cands = coordinate_subreps(r) if exhaustive else subrep_lattice(r, opts)
    best = _pick(cands, tau, r.dims, mode == "strict")
    return None if best is None else Destabilizer(best, theta(tau, best), exhaustive)


# ---------------------------------------------------------------------------
# isotropic search


def _graph_candidates(
    r: Representation,
    cands: list[SubrepCandidate],
    C: BlockForm,
    seed: int,
    max_pairs: int = 200,
) -> list[dict[str, np.ndarray]]:
    """Isotropic graphs {x + c T x} of isomorphisms T between disjoint subreps."""
    out = []
    pairs = 0
    for a, b in itertools.combinations(cands, 2):
        if a.is_zero() or a.dims() != b.dims():
            continue
        if any(la.intersect(a.U[v], b.U[v]).shape[1] for v in a.U):
            continue
        pairs += 1
        if pairs > max_pairs:
            break
        t = find_isomorphism(restrict(r, a), restrict(r, b), seed)
        if t is None:
            continue
        x = a.U
        y = {v: b.U[v] @ t[v] for v in a.U}
        m0, m1, m2 = [], [], []
        for i in C.blocks:
            j = C.sigma_v[i]
            if x[i].shape[1] == 0 or x[j].shape[1] == 0:
                continue
            blk = C.blocks[i]
            m0.append((x[i].T @ blk @ x[j]).ravel())
            m1.append((x[i].T @ blk @ y[j] + y[i].T @ blk @ x[j]).ravel())
            m2.append((y[i].T @ blk @ y[j]).ravel())
        if not m0:
            continue
        m0, m1, m2 = (np.concatenate(z) for z in (m0, m1, m2))
        k = int(np.argmax(np.abs(m0) + np.abs(m1) + np.abs(m2)))
        roots = np.roots([m2[k], m1[k], m0[k]]) if abs(m2[k]) + abs(m1[k]) > 0 else np.array([])
        for c in roots:
            if np.linalg.norm(m0 + c * m1 + c * c * m2) <= 1e-8 * max(1.0, np.linalg.norm(m0)):
                out.append({v: x[v] + c * y[v] for v in x})
    return out


def isotropic_candidates(
    r: Representation,
    C: BlockForm,
    opts: SearchOptions | None = None,
) -> list[SubrepCandidate]:
    opts = opts or SearchOptions()
    exhaustive = all(x <= 1 for x in r.dims.n.values())
    base = coordinate_subreps(r) if exhaustive else subrep_lattice(r, opts)
    tol = opts.tol * _scale(r)
    pool: list[SubrepCandidate] = []

    def push(U):
        cand = make_subrep(r, {v: la.orth(u) for v, u in U.items()})
        if cand.invariance_residual > tol or not is_isotropic(cand, C):
            return
        if any(c.dims() == cand.dims() and c.same_as(cand) for c in pool):
            return
        pool.append(cand)

    for c in base:
        push(c.U)
        perp = orthogonal_complement(c, C)
        push({v: la.intersect(c.U[v], perp.U[v]) for v in c.U})
    if not exhaustive:
        for U in _graph_candidates(r, base, C, opts.seed):
            push(U)
    return pool


def find_isotropic_destabilizer(
    r: Representation,
    tau: ParameterVector,
    C: BlockForm,
    s: SymmetricStructure,
    mode: str = "semi",
    opts: SearchOptions | None = None,
) -> Destabilizer | None:
    if mode not in ("semi", "strict"):
        raise ValueError("mode must be 'semi' or 'strict'")
    if structured_tau_residual(tau, s) > 1e-12:
        raise StructureError("tau is not structured: need tau[s(i)] = -tau[i] and 0 at fixed vertices")
    _check_trace(r, tau)
    opts = opts or SearchOptions()
    exhaustive = all(x <= 1 for x in r.dims.n.values())
    best = _pick(isotropic_candidates(r, C, opts), tau, r.dims, mode == "strict")
    return None if best is None else Destabilizer(best, theta(tau, best), exhaustive)


# ---------------------------------------------------------------------------
# polystable decomposition


@dataclass(frozen=True)
class DecomposedSummand:
    rep: Representation
    multiplicity: int
    tag: str
    partner: Representation | None = None
    stable: bool | None = None


@dataclass(frozen=True)
class DecompositionReport:
    summands: tuple[DecomposedSummand, ...]
    change_of_basis: GaugeElement
    # columns of the new basis per vertex, i.e. the inverse of change_of_basis
    frame: Mapping[str, np.ndarray] = field(default_factory=dict)
    form: BlockForm | None = None

    def blocks(self) -> list[Representation]:
        """The summands in basis order, each repeated by its copy count."""
        out = []
        for sm in self.summands:
            copies = sm.multiplicity
            if sm.tag == DUAL_PAIR_E:
                out += [sm.rep] * copies + [sm.partner] * copies
            elif sm.tag == SELFDUAL_PAIR_S:
                out += [sm.rep] * (2 * copies)
            else:
                out += [sm.rep] * copies
        return out

    def recomposed(self) -> Representation:
        return direct_sum_many(self.blocks())

    def residual(self, r: Representation) -> float:
        return gauge_act(self.change_of_basis, r).distance(self.recomposed())

    @property
    def tags(self) -> list[str]:
        return [s.tag for s in self.summands]


def _block_transform(r: Representation, frame: Mapping[str, np.ndarray]) -> Representation:
    """phi in the basis given by the columns of frame: P_h^{-1} phi (P_t (x) I)."""
    phi = {}
    for a in r.quiver.arrows:
        m = r.dims.twist(a.id)
        ph, pt = frame[a.head], frame[a.tail]
        left = np.linalg.inv(ph) if ph.size else ph
        phi[a.id] = left @ r.phi[a.id] @ np.kron(pt, np.eye(m))
    return r.replace(phi)


def _slice_block(r: Representation, offsets: Mapping[str, tuple[int, int]]) -> Representation:
    n = {v: b - a for v, (a, b) in offsets.items()}
    d = DimensionVector(n, r.dims.m)
    phi = {}
    for a in r.quiver.arrows:
        m = r.dims.twist(a.id)
        h0, h1 = offsets[a.head]
        t0, t1 = offsets[a.tail]
        sl = [x[h0:h1, t0:t1] for x in la.twist_slices(r.phi[a.id], m)]
        phi[a.id] = la.from_slices(sl) if sl else np.zeros((n[a.head], 0))
    return Representation(r.quiver, d, phi)


def _split_once(r: Representation, rng: np.random.Generator, tries: int = 16) -> list[dict[str, np.ndarray]] | None:
    """Bases of the pieces of a nontrivial splitting, or None if End is scalars."""
    alg = endomorphism_algebra(r)
    if alg.dim <= 1:
        return None
    n = r.dims.n
    vec = np.array([np.concatenate([b[v].ravel() for v in r.quiver.vertices]) for b in alg.basis]).T
    q_basis, _ = np.linalg.qr(vec)
    for _ in range(tries):
        X = alg.element(_random_coeffs(rng, alg.dim))
        Y = {v: X[v] + X[v].conj().T for v in X}
        # orthogonal projection of Y back into End
        y = np.concatenate([Y[v].ravel() for v in r.quiver.vertices])
        z = q_basis @ (q_basis.conj().T @ y)
        Z, off = {}, 0
        for v in r.quiver.vertices:
            Z[v] = z[off:off + n[v] ** 2].reshape(n[v], n[v])
            off += n[v] ** 2
        eig = {v: np.linalg.eig(Z[v]) if n[v] else (np.zeros(0), np.zeros((0, 0))) for v in Z}
        allvals = np.concatenate([w for w, _ in eig.values()])
        centers = _cluster(allvals, 1e-7)
        if len(centers) < 2:
            continue
        scale = max([1.0] + [abs(c) for c in centers])
        pieces = []
        for c in centers:
            piece = {}
            for v, (w, vecs) in eig.items():
                idx = [k for k in range(len(w)) if abs(w[k] - c) <= 1e-7 * scale]
                piece[v] = la.orth(vecs[:, idx], 1e-10) if idx else la.empty(n[v])
            pieces.append(piece)
        frame = {v: np.hstack([p[v] for p in pieces]) for v in r.quiver.vertices}
        ok = all(frame[v].shape == (n[v], n[v]) for v in frame)
        ok = ok and all(np.linalg.cond(frame[v]) < 1e8 for v in frame if n[v])
        ok = ok and all(invariance_residual(r, p) <= 1e-9 * _scale(r) for p in pieces)
        if ok:
            return pieces
    raise NonSemisimpleError("non-semisimple endomorphism algebra: no element splits the representation")


def _decompose_blocks(r: Representation, rng: np.random.Generator) -> tuple[list[Representation], dict[str, np.ndarray]]:
    """Indecomposable-by-End pieces and the frame that block-diagonalizes r into them."""
    n = r.dims.n
    if r.dims.total() == 0:
        return [], {v: np.zeros((0, 0), dtype=complex) for v in n}
    pieces = _split_once(r, rng)
    if pieces is None:
        return [r], {v: np.eye(n[v], dtype=complex) for v in n}
    frame = {v: np.hstack([p[v] for p in pieces]) for v in r.quiver.vertices}
    moved = _block_transform(r, frame)
    out_reps: list[Representation] = []
    sub_frames: list[dict[str, np.ndarray]] = []
    start = {v: 0 for v in n}
    for p in pieces:
        offs = {v: (start[v], start[v] + p[v].shape[1]) for v in n}
        for v in n:
            start[v] += p[v].shape[1]
        sub = _slice_block(moved, offs)
        reps, fr = _decompose_blocks(sub, rng)
        out_reps += reps
        sub_frames.append(fr)
    inner = {v: sla.block_diag(*[f[v] for f in sub_frames]).astype(complex) for v in n}
    return out_reps, {v: frame[v] @ inner[v] for v in n}


def _frame_to_gauge(frame: Mapping[str, np.ndarray]) -> GaugeElement:
    return GaugeElement({v: np.linalg.inv(f) if f.size else f for v, f in frame.items()})


def _group(reps: list[Representation], seed: int) -> list[tuple[Representation, list[int], list[dict[str, np.ndarray]]]]:
    """Isomorphism classes: representative, member positions, maps member -> representative."""
    groups: list[tuple[Representation, list[int], list[dict[str, np.ndarray]]]] = []
    for k, rep in enumerate(reps):
        for rep0, members, maps in groups:
            t = find_isomorphism(rep, rep0, seed)
            if t is not None:
                members.append(k)
                maps.append(t)
                break
        else:
            groups.append((rep, [k], [{v: np.eye(rep.dims.n[v], dtype=complex) for v in rep.dims.n}]))
    return groups


def _aligned_frame(
    reps: list[Representation],
    frame: Mapping[str, np.ndarray],
    order: list[int],
    maps: list[Mapping[str, np.ndarray]],
) -> dict[str, np.ndarray]:
    """Reorder blocks and rewrite each copy in its representative's basis."""
    starts, pos = [], {v: 0 for v in frame}
    for rep in reps:
        starts.append(dict(pos))
        for v in pos:
            pos[v] += rep.dims.n[v]
    cols = {v: [] for v in frame}
    for k, t in zip(order, maps):
        for v in frame:
            a = starts[k][v]
            b = a + reps[k].dims.n[v]
            block = frame[v][:, a:b]
            # x_rep0 = t x_k, so the copy's frame in rep0 coordinates is block t^{-1}
            cols[v].append(block @ np.linalg.inv(t[v]) if t[v].size else block)
    return {v: np.hstack(cols[v]) if cols[v] else np.zeros((frame[v].shape[0], 0)) for v in frame}


def decompose(r: Representation, seed: int = 0, tau: ParameterVector | None = None) -> DecompositionReport:
    """Split r into End-indecomposable summands grouped by isomorphism class.

    When ``tau`` is given every summand is also checked for strict
    tau-stability; the result is stored on the summand.
    """
    rng = np.random.default_rng(seed)
    reps, frame = _decompose_blocks(r, rng)
    groups = _group(reps, seed)
    order, maps = [], []
    summands = []
    for rep0, members, mps in groups:
        order += members
        maps += mps
        stable = None
        if tau is not None:
            stable = _summand_stable(rep0, tau)
        summands.append(DecomposedSummand(rep0, len(members), PLAIN_STABLE, stable=stable))
    new_frame = _aligned_frame(reps, frame, order, maps)
    return DecompositionReport(tuple(summands), _frame_to_gauge(new_frame), new_frame)


def _summand_stable(rep: Representation, tau: ParameterVector) -> bool:
    if abs(trace_defect(tau, rep.dims)) > 1e-9:
        return False
    return find_destabilizer(rep, tau, "strict") is None


# ---------------------------------------------------------------------------
# orthogonal classification


def classify_orthogonal_decomposition(
    r: Representation,
    C: BlockForm,
    s: SymmetricStructure,
    tau: ParameterVector | None = None,
    seed: int = 0,
) -> DecompositionReport:
    """Group the plain decomposition into F, E + E* and S + S* pieces."""
    rng = np.random.default_rng(seed + 1)
    reps, frame = _decompose_blocks(r, rng)
    groups = _group(reps, seed)
    used = [False] * len(groups)
    order, maps, summands = [], [], []
    starts, pos = [], {v: 0 for v in frame}
    for rep in reps:
        starts.append(dict(pos))
        for v in pos:
            pos[v] += rep.dims.n[v]

    def embedding(k: int, t: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        # columns spanning copy k, written in the representative's coordinates
        out = {}
        for v in frame:
            a = starts[k][v]
            blk = frame[v][:, a:a + reps[k].dims.n[v]]
            out[v] = blk @ np.linalg.inv(t[v]) if t[v].size else blk
        return out

    for gi, (rep0, members, mps) in enumerate(groups):
        if used[gi]:
            continue
        used[gi] = True
        dual = dual_representation(rep0, s)
        if is_isomorphic(rep0, dual, seed):
            c = _random_coeffs(rng, len(members))
            emb = {v: sum(ci * embedding(k, t)[v] for ci, k, t in zip(c, members, mps)) for v in frame}
            gram_res = _restricted_form_rank_deficit(emb, C)
            order += members
            maps += mps
            if gram_res:
                if len(members) % 2:
                    raise StructureError("form degenerate on polystable decomposition: odd isotropic self-dual class")
                summands.append(DecomposedSummand(rep0, len(members) // 2, SELFDUAL_PAIR_S, partner=rep0))
            else:
                summands.append(DecomposedSummand(rep0, len(members), ORTH_STABLE_F))
            continue
        partner = None
        for gj in range(gi + 1, len(groups)):
            if not used[gj] and is_isomorphic(groups[gj][0], dual, seed):
                partner = gj
                break
        if partner is None or len(groups[partner][1]) != len(members):
            raise StructureError("form degenerate on polystable decomposition: unpaired isotropic summand")
        used[partner] = True
        rep1, members1, mps1 = groups[partner]
        order += members + members1
        maps += mps + mps1
        summands.append(DecomposedSummand(rep0, len(members), DUAL_PAIR_E, partner=rep1))
    if tau is not None:
        summands = [
            DecomposedSummand(sm.rep, sm.multiplicity, sm.tag, sm.partner, _summand_stable(sm.rep, tau))
            for sm in summands
        ]
    new_frame = _aligned_frame(reps, frame, order, maps)
    return DecompositionReport(
        tuple(summands),
        _frame_to_gauge(new_frame),
        new_frame,
        induced_form(C, new_frame),
    )


def _restricted_form_rank_deficit(emb: Mapping[str, np.ndarray], C: BlockForm, rtol: float = 1e-8) -> bool:
    """True when C restricted to the embedded copy is degenerate."""
    order = list(emb)
    sizes = [emb[v].shape[1] for v in order]
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    pos = {v: k for k, v in enumerate(order)}
    total = int(offs[-1])
    if total == 0:
        return False
    G = np.zeros((total, total), dtype=complex)
    for i in order:
        j = C.sigma_v[i]
        a, b = pos[i], pos[j]
        G[offs[a]:offs[a + 1], offs[b]:offs[b + 1]] = emb[i].T @ C.blocks[i] @ emb[j]
    sv = np.linalg.svd(G, compute_uv=False)
    ref = max(np.linalg.norm(emb[v], 2) for v in order if emb[v].size) ** 2
    return sv[-1] <= rtol * max(ref, 1e-300)


@dataclass(frozen=True)
class RelationReport:
    plain_ss: bool
    orth_ss: bool
    plain_stable: bool
    orth_stable: bool
    simple: bool
    orth_decomposition_ok: bool | None
    consistent: bool
    witnesses: Mapping[str, Destabilizer | None] = field(default_factory=dict)


def orth_plain_relation_check(
    r: Representation,
    C: BlockForm,
    s: SymmetricStructure,
    tau: ParameterVector,
    opts: SearchOptions | None = None,
) -> RelationReport:
    """Compare plain and isotropic stability and check the implications between them.

    consistent holds when plain_ss == orth_ss, plain_stable implies orth_stable
    and End = scalars, and orth_stable implies a splitting into mutually
    non-isomorphic plain-stable summands.
    """
    w = {
        "plain_semi": find_destabilizer(r, tau, "semi", opts),
        "plain_strict": find_destabilizer(r, tau, "strict", opts),
        "orth_semi": find_isotropic_destabilizer(r, tau, C, s, "semi", opts),
        "orth_strict": find_isotropic_destabilizer(r, tau, C, s, "strict", opts),
    }
    plain_ss = w["plain_semi"] is None
    plain_stable = w["plain_strict"] is None
    orth_ss = w["orth_semi"] is None
    orth_stable = w["orth_strict"] is None
    simple = is_simple(r)
    deco_ok = None
    if orth_stable:
        try:
            rep = decompose(r, tau=tau)
            deco_ok = all(sm.multiplicity == 1 and sm.stable for sm in rep.summands)
        except NonSemisimpleError:
            deco_ok = False
    consistent = (
        plain_ss == orth_ss
        and (not plain_stable or (orth_stable and simple))
        and (not orth_stable or bool(deco_ok))
    )
    return RelationReport(plain_ss, orth_ss, plain_stable, orth_stable, simple, deco_ok, consistent, w)


# ---------------------------------------------------------------------------
# synthetic structured instances


def hyperbolic_pair(E: Representation, s: SymmetricStructure) -> tuple[Representation, BlockForm]:
    """E + E* with the form pairing E_i against the dual piece at sigma(i)."""
    dual = dual_representation(E, s)
    total = direct_sum(E, dual)
    blocks = {}
    for i in E.quiver.vertices:
        j = s.sigma_v[i]
        a, b = E.dims.n[i], E.dims.n[j]
        blk = np.zeros((a + b, b + a), dtype=complex)
        blk[:a, b:] = np.eye(a)
        blk[a:, :b] = s.vertex_sign(i) * np.eye(b)
        blocks[i] = blk
    return total, BlockForm(blocks, s.sigma_v, {v: s.vertex_sign(v) for v in E.quiver.vertices})


def orthogonal_sum(parts: Sequence[tuple[Representation, BlockForm]]) -> tuple[Representation, BlockForm]:
    rep = direct_sum_many([p[0] for p in parts])
    C0 = parts[0][1]
    blocks = {}
    for i in C0.blocks:
        mats = [p[1].blocks[i] for p in parts]
        rows = sum(m.shape[0] for m in mats)
        cols = sum(m.shape[1] for m in mats)
        out = np.zeros((rows, cols), dtype=complex)
        r0 = c0 = 0
        for m in mats:
            out[r0:r0 + m.shape[0], c0:c0 + m.shape[1]] = m
            r0 += m.shape[0]
            c0 += m.shape[1]
        blocks[i] = out
    return rep, BlockForm(blocks, C0.sigma_v, C0.signs)
