"""Plain quivers, twisted representation spaces and the gauge action.

A representation stores, for every arrow ``a: t -> h`` with twist dimension
``m``, a complex matrix of shape ``n[h] x (n[t] * m)``.  Columns are indexed
by pairs ``(tail index, twist index)`` in that order, so the tail/twist gauge
acts through the literal Kronecker product ``kron(g_t, g_a)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _linalg as la

Matrix = np.ndarray


class QuiverError(ValueError):
    """Structurally invalid quiver, dimension vector or representation."""


@dataclass(frozen=True)
class Arrow:
    id: str
    tail: str
    head: str

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head


@dataclass(frozen=True)
class Quiver:
    vertices: tuple[str, ...]
    arrows: tuple[Arrow, ...]

    @classmethod
    def from_edges(cls, vertices: Iterable[str], arrows: Iterable[tuple[str, str, str]]) -> "Quiver":
        return cls(tuple(vertices), tuple(Arrow(*a) for a in arrows))

    def arrow(self, arrow_id: str) -> Arrow:
        for a in self.arrows:
            if a.id == arrow_id:
                return a
        raise KeyError(arrow_id)

    @property
    def arrow_ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.arrows)

    def incoming(self, v: str) -> list[Arrow]:
        return [a for a in self.arrows if a.head == v]

    def outgoing(self, v: str) -> list[Arrow]:
        return [a for a in self.arrows if a.tail == v]


@dataclass(frozen=True)
class DimensionVector:
    n: Mapping[str, int]
    m: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "n", MappingProxyType(dict(self.n)))
        object.__setattr__(self, "m", MappingProxyType(dict(self.m)))

    def twist(self, arrow_id: str) -> int:
        return self.m.get(arrow_id, 1)

    def total(self) -> int:
        return sum(self.n.values())


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)

    def extend(self, other: "ValidationReport") -> None:
        self.violations.extend(other.violations)

    def __bool__(self) -> bool:
        return self.valid


def validate_quiver(q: Quiver, d: DimensionVector) -> ValidationReport:
    report = ValidationReport()
    verts = set()
    for v in q.vertices:
        if v in verts:
            report.add(f"duplicate vertex id {v!r}")
        verts.add(v)
    seen = set()
    for a in q.arrows:
        if a.id in seen:
            report.add(f"duplicate arrow id {a.id!r}")
        seen.add(a.id)
        for end in (a.tail, a.head):
            if end not in verts:
                report.add(f"arrow {a.id!r}: unknown vertex {end!r}")
    for v in q.vertices:
        if v not in d.n:
            report.add(f"dimension missing for vertex {v!r}")
        elif int(d.n[v]) != d.n[v] or d.n[v] < 0:
            report.add(f"dimension at vertex {v!r} must be a nonnegative integer")
    for v in d.n:
        if v not in verts:
            report.add(f"dimension given for unknown vertex {v!r}")
    for a_id, m in d.m.items():
        if a_id not in seen:
            report.add(f"twisting dimension given for unknown arrow {a_id!r}")
        elif int(m) != m or m < 1:
            report.add(f"arrow {a_id!r}: twisting dimension must be positive")
    return report


def _require_valid(q: Quiver, d: DimensionVector) -> None:
    report = validate_quiver(q, d)
    if not report.valid:
        raise QuiverError("; ".join(report.violations))


def representation_dimension(q: Quiver, d: DimensionVector) -> int:
    """Complex dimension of the representation space."""
    _require_valid(q, d)
    return sum(d.n[a.head] * d.n[a.tail] * d.twist(a.id) for a in q.arrows)


@dataclass(frozen=True)
class Representation:
    quiver: Quiver
    dims: DimensionVector
    phi: Mapping[str, Matrix]

    def __post_init__(self):
        phi = {}
        for a in self.quiver.arrows:
            shape = self.shape(a.id)
            mat = np.asarray(self.phi.get(a.id, np.zeros(shape)), dtype=complex)
            if mat.shape != shape:
                raise QuiverError(f"arrow {a.id!r}: expected shape {shape}, got {mat.shape}")
            mat = mat.copy()
            mat.flags.writeable = False
            phi[a.id] = mat
        extra = set(self.phi) - set(phi)
        if extra:
            raise QuiverError(f"matrices given for unknown arrows {sorted(extra)}")
        object.__setattr__(self, "phi", MappingProxyType(phi))

    def shape(self, arrow_id: str) -> tuple[int, int]:
        a = self.quiver.arrow(arrow_id)
        return (self.dims.n[a.head], self.dims.n[a.tail] * self.dims.twist(a.id))

    def replace(self, phi: Mapping[str, Matrix]) -> "Representation":
        return Representation(self.quiver, self.dims, phi)

    def norm(self) -> float:
        return float(np.sqrt(sum(np.linalg.norm(p) ** 2 for p in self.phi.values())))

    def __sub__(self, other: "Representation") -> "Representation":
        return self.replace({k: self.phi[k] - other.phi[k] for k in self.phi})

    def __add__(self, other: "Representation") -> "Representation":
        return self.replace({k: self.phi[k] + other.phi[k] for k in self.phi})

    def scaled(self, c: complex) -> "Representation":
        return self.replace({k: c * v for k, v in self.phi.items()})

    def distance(self, other: "Representation") -> float:
        return (self - other).norm()


def zero_representation(q: Quiver, d: DimensionVector) -> Representation:
    return Representation(q, d, {})


@dataclass(frozen=True)
class GaugeElement:
    g: Mapping[str, Matrix]
    g_tw: Mapping[str, Matrix] | None = None

    def at(self, v: str, n: int) -> Matrix:
        return np.asarray(self.g.get(v, np.eye(n)), dtype=complex)

    def twist(self, arrow_id: str, m: int) -> Matrix:
        if self.g_tw is None or arrow_id not in self.g_tw:
            return np.eye(m, dtype=complex)
        return np.asarray(self.g_tw[arrow_id], dtype=complex)


def identity_gauge(d: DimensionVector) -> GaugeElement:
    return GaugeElement({v: np.eye(n, dtype=complex) for v, n in d.n.items()})


def compose(g2: GaugeElement, g1: GaugeElement) -> GaugeElement:
    """The product g2 * g1 (act first by g1)."""
    verts = set(g1.g) | set(g2.g)
    g = {}
    for v in verts:
        a = g2.g.get(v)
        b = g1.g.get(v)
        g[v] = b if a is None else a if b is None else a @ b
    tw = None
    if g1.g_tw or g2.g_tw:
        tw = {}
        t1, t2 = g1.g_tw or {}, g2.g_tw or {}
        for k in set(t1) | set(t2):
            a, b = t2.get(k), t1.get(k)
            tw[k] = b if a is None else a if b is None else a @ b
    return GaugeElement(g, tw)


def inverse(g: GaugeElement) -> GaugeElement:
    tw = None if g.g_tw is None else {k: np.linalg.inv(v) for k, v in g.g_tw.items()}
    return GaugeElement({k: np.linalg.inv(v) for k, v in g.g.items()}, tw)


def _check_invertible(mat: Matrix, what: str, det_tol: float) -> None:
    if mat.size == 0:
        return
    if not np.all(np.isfinite(mat)):
        raise QuiverError(f"{what}: non-finite gauge matrix")
    if abs(np.linalg.det(mat)) <= det_tol or not np.isfinite(np.linalg.cond(mat)):
        raise QuiverError(f"{what}: gauge matrix is not invertible")


def gauge_act(g: GaugeElement, r: Representation, det_tol: float = 1e-12) -> Representation:
    """phi_a -> g[h] phi_a (g[t] (x) g_tw[a])^{-1} for every arrow."""
    n = r.dims.n
    mats = {}
    for v in r.quiver.vertices:
        mat = g.at(v, n[v])
        if mat.shape != (n[v], n[v]):
            raise QuiverError(f"vertex {v!r}: gauge matrix has shape {mat.shape}, expected {(n[v], n[v])}")
        _check_invertible(mat, f"vertex {v!r}", det_tol)
        mats[v] = mat
    inv = {v: np.linalg.inv(mt) if mt.size else mt for v, mt in mats.items()}
    out = {}
    for a in r.quiver.arrows:
        m = r.dims.twist(a.id)
        tw = g.twist(a.id, m)
        if tw.shape != (m, m):
            raise QuiverError(f"arrow {a.id!r}: twist gauge has shape {tw.shape}, expected {(m, m)}")
        _check_invertible(tw, f"arrow {a.id!r}", det_tol)
        right = np.kron(inv[a.tail], np.linalg.inv(tw))
        out[a.id] = mats[a.head] @ r.phi[a.id] @ right
    return r.replace(out)


# ---------------------------------------------------------------------------
# subrepresentations


@dataclass(frozen=True)
class SubrepCandidate:
    U: Mapping[str, Matrix]
    invariance_residual: float = 0.0

    def dim(self, v: str) -> int:
        return self.U[v].shape[1]

    def dims(self) -> dict[str, int]:
        return {v: u.shape[1] for v, u in self.U.items()}

    def total(self) -> int:
        return sum(u.shape[1] for u in self.U.values())

    def is_zero(self) -> bool:
        return self.total() == 0

    def is_full(self, d: DimensionVector) -> bool:
        return all(self.dim(v) == n for v, n in d.n.items())

    def same_as(self, other: "SubrepCandidate", tol: float = 1e-8) -> bool:
        return all(la.same_subspace(self.U[v], other.U[v], tol) for v in self.U)


def invariance_residual(r: Representation, U: Mapping[str, Matrix]) -> float:
    """max_a ||(I - P_h) phi_a (P_t (x) I_m)||_2."""
    worst = 0.0
    for a in r.quiver.arrows:
        phi = r.phi[a.id]
        if phi.size == 0:
            continue
        m = r.dims.twist(a.id)
        p_t = la.projector(U[a.tail])
        p_h = la.projector(U[a.head])
        res = (np.eye(p_h.shape[0]) - p_h) @ phi @ np.kron(p_t, np.eye(m))
        worst = max(worst, float(np.linalg.norm(res, 2)))
    return worst


def make_subrep(r: Representation, U: Mapping[str, Matrix]) -> SubrepCandidate:
    U = {v: np.asarray(U.get(v, la.empty(r.dims.n[v])), dtype=complex) for v in r.quiver.vertices}
    return SubrepCandidate(U, invariance_residual(r, U))


def _scale(r: Representation) -> float:
    norms = [np.linalg.norm(p, 2) for p in r.phi.values() if p.size]
    return max([1.0, *norms])


def generated_subrep(
    r: Representation,
    seeds: Sequence[tuple[str, np.ndarray]],
    rtol: float = 1e-9,
) -> SubrepCandidate:
    """Smallest subspace tuple containing ``seeds`` and closed under every arrow.

    Closure is computed by breadth-first propagation of new basis vectors
    through each untwisted slice ``v -> phi_a(v (x) e_j)``.
    """
    n = r.dims.n
    basis: dict[str, list[np.ndarray]] = {v: [] for v in r.quiver.vertices}
    tol = rtol * _scale(r)
    queue: list[tuple[str, np.ndarray]] = []

    def add(v: str, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=complex).reshape(-1)
        if x.shape != (n[v],):
            raise QuiverError(f"seed at vertex {v!r} must have length {n[v]}")
        for _ in range(2):
            for b in basis[v]:
                x = x - (b.conj() @ x) * b
        nrm = np.linalg.norm(x)
        if nrm > tol and len(basis[v]) < n[v]:
            x = x / nrm
            basis[v].append(x)
            queue.append((v, x))

    for v, x in seeds:
        add(v, x)
    slices = {a.id: la.twist_slices(r.phi[a.id], r.dims.twist(a.id)) for a in r.quiver.arrows}
    while queue:
        v, x = queue.pop(0)
        for a in r.quiver.outgoing(v):
            for s in slices[a.id]:
                add(a.head, s @ x)
    U = {
        v: (np.array(basis[v]).T if basis[v] else la.empty(n[v]))
        for v in r.quiver.vertices
    }
    return SubrepCandidate(U, invariance_residual(r, U))


def restrict(r: Representation, sub: SubrepCandidate) -> Representation:
    """The subrepresentation carried by ``sub`` written in its orthonormal bases."""
    d = DimensionVector(sub.dims(), r.dims.m)
    phi = {}
    for a in r.quiver.arrows:
        m = r.dims.twist(a.id)
        phi[a.id] = sub.U[a.head].conj().T @ r.phi[a.id] @ np.kron(sub.U[a.tail], np.eye(m))
    return Representation(r.quiver, d, phi)


def direct_sum(r1: Representation, r2: Representation) -> Representation:
    if r1.quiver != r2.quiver:
        raise QuiverError("direct sum of representations of different quivers")
    for a in r1.quiver.arrows:
        if r1.dims.twist(a.id) != r2.dims.twist(a.id):
            raise QuiverError(f"arrow {a.id!r}: twisting dimensions differ")
    n = {v: r1.dims.n[v] + r2.dims.n[v] for v in r1.quiver.vertices}
    d = DimensionVector(n, r1.dims.m)
    phi = {}
    for a in r1.quiver.arrows:
        m = r1.dims.twist(a.id)
        s1 = la.twist_slices(r1.phi[a.id], m)
        s2 = la.twist_slices(r2.phi[a.id], m)
        blocks = []
        for x, y in zip(s1, s2):
            out = np.zeros((x.shape[0] + y.shape[0], x.shape[1] + y.shape[1]), dtype=complex)
            out[: x.shape[0], : x.shape[1]] = x
            out[x.shape[0]:, x.shape[1]:] = y
            blocks.append(out)
        phi[a.id] = la.from_slices(blocks) if blocks else np.zeros((n[a.head], 0))
    return Representation(r1.quiver, d, phi)


def direct_sum_many(reps: Sequence[Representation]) -> Representation:
    out = reps[0]
    for r in reps[1:]:
        out = direct_sum(out, r)
    return out


def block_gauge(g1: GaugeElement, g2: GaugeElement, d1: DimensionVector, d2: DimensionVector) -> GaugeElement:
    from scipy.linalg import block_diag

    g = {}
    for v in d1.n:
        g[v] = block_diag(g1.at(v, d1.n[v]), g2.at(v, d2.n[v])).astype(complex)
    return GaugeElement(g)


def random_representation(q: Quiver, d: DimensionVector, seed: int) -> Representation:
    """Entries i.i.d. standard complex Gaussian (E|z|^2 = 1), fixed arrow order."""
    _require_valid(q, d)
    rng = np.random.default_rng(seed)
    phi = {}
    for a in q.arrows:
        shape = (d.n[a.head], d.n[a.tail] * d.twist(a.id))
        phi[a.id] = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return Representation(q, d, phi)
