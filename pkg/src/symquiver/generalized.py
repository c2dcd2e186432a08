"""Generalized O/Sp-quivers and the associated symmetric quiver.

A generalized quiver for ``G = O(V)`` or ``Sp(V)`` is described by the
isotypic decomposition of ``V`` under a torus ``H``: characters that come in
inverse pairs (``V_i`` and ``V_i*``, both of dimension ``n_i``) and
self-inverse ones (``W_j`` of dimension ``w_j``), together with a list of
irreducible summands of the adjoint representation.  Each summand becomes
one arrow fixed by sigma, or a pair of arrows exchanged by it.

Coordinates
-----------
For a paired summand the coordinate is the matrix of its primary arrow
``g``; the partner arrow carries ``-A^t`` (C-transpose).  For a fixed
summand (``ALT_V``, ``ALT_Vdual``, ``ALT_W``) the coordinate ``A`` satisfies
``A = -s A^T`` where ``s`` is the group sign (antisymmetric for O, symmetric
for Sp) and the arrow carries ``phi = C_h^{-T} A`` in the standard form.
Twisted summands apply the same rule to every untwisted slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla

from . import _linalg as la
from .quiver import (
    DimensionVector,
    GaugeElement,
    Quiver,
    QuiverError,
    Representation,
    ValidationReport,
    gauge_act,
)
from .symmetric import (
    BlockForm,
    StructureError,
    SymmetricStructure,
    c_transpose,
    dual_partner_gauge,
    is_structured_rep,
    standard_form,
    standard_symplectic,
    structured_gauge_residual,
)

# kind -> (index families, tail template, head template, fixed by sigma)
# templates: "q", "q*" refer to paired characters, "p" to self-inverse ones;
# the integer picks which index (0 = i, 1 = j) the vertex uses.
KINDS: dict[str, tuple[tuple[str, ...], tuple[str, int], tuple[str, int], bool]] = {
    "ALT_V": (("paired",), ("q*", 0), ("q", 0), True),
    "ALT_Vdual": (("paired",), ("q", 0), ("q*", 0), True),
    "END_E": (("paired",), ("q", 0), ("q", 0), False),
    "ALT_W": (("selfinv",), ("p", 0), ("p", 0), True),
    "V_V": (("paired", "paired"), ("q", 0), ("q", 1), False),
    "Vdual_V": (("paired", "paired"), ("q*", 0), ("q", 1), False),
    "V_Vdual": (("paired", "paired"), ("q", 0), ("q*", 1), False),
    "W_W": (("selfinv", "selfinv"), ("p", 0), ("p", 1), False),
    "V_W": (("paired", "selfinv"), ("q", 0), ("p", 1), False),
    "Vdual_W": (("paired", "selfinv"), ("q*", 0), ("p", 1), False),
}

DISTINCT_INDEX_KINDS = {"V_V", "Vdual_V", "V_Vdual", "W_W"}


@dataclass(frozen=True)
class Summand:
    kind: str
    index: tuple[str, ...]
    m: int = 1


@dataclass(frozen=True)
class GeneralizedQuiverSpec:
    group_sign: int
    paired_chars: tuple[tuple[str, int], ...] = ()
    selfinv_chars: tuple[tuple[str, int], ...] = ()
    summands: tuple[Summand, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "paired_chars", tuple((str(a), int(b)) for a, b in self.paired_chars))
        object.__setattr__(self, "selfinv_chars", tuple((str(a), int(b)) for a, b in self.selfinv_chars))
        object.__setattr__(
            self,
            "summands",
            tuple(
                s if isinstance(s, Summand) else Summand(s[0], tuple(str(x) for x in s[1]), *s[2:])
                for s in self.summands
            ),
        )


def vertex_name(family: str, label: str) -> str:
    return {"q": f"q{label}", "q*": f"q{label}*", "p": f"p{label}"}[family]


def arrow_names(k: int) -> tuple[str, str]:
    """Names of the primary arrow and its partner for summand k (1-based)."""
    return f"g{k}", f"g{k}*"


def validate_generalized(gq: GeneralizedQuiverSpec) -> ValidationReport:
    report = ValidationReport()
    if gq.group_sign not in (1, -1):
        report.add("group sign must be +1 (O) or -1 (Sp)")
    paired = dict(gq.paired_chars)
    selfinv = dict(gq.selfinv_chars)
    # vertex names are q<label>, q<label>* and p<label>, so labels only clash within a family
    for fam in (gq.paired_chars, gq.selfinv_chars):
        labels = [a for a, _ in fam]
        if len(set(labels)) != len(labels):
            report.add("character labels must be unique within each family")
    for label, n in gq.paired_chars + gq.selfinv_chars:
        if n < 1:
            report.add(f"character {label!r}: dimension must be at least 1")
    if gq.group_sign == -1:
        for label, w in gq.selfinv_chars:
            if w % 2:
                report.add(f"self-inverse character {label!r}: symplectic block needs even dimension, got {w}")
    for k, s in enumerate(gq.summands, start=1):
        if s.kind not in KINDS:
            report.add(f"summand {k}: trivial or unknown summand kind {s.kind!r}")
            continue
        families = KINDS[s.kind][0]
        if len(s.index) != len(families):
            report.add(f"summand {k}: kind {s.kind} takes {len(families)} index(es), got {len(s.index)}")
            continue
        for fam, label in zip(families, s.index):
            table = paired if fam == "paired" else selfinv
            if label not in table:
                report.add(f"summand {k}: index {label!r} is not a declared {fam} character")
        if s.kind in DISTINCT_INDEX_KINDS and s.index[0] == s.index[1]:
            report.add(f"summand {k}: index constraint i != j violated for {s.kind}")
        if int(s.m) != s.m or s.m < 1:
            report.add(f"summand {k}: twisting dimension must be positive")
    return report


def require_generalized(gq: GeneralizedQuiverSpec) -> None:
    report = validate_generalized(gq)
    if not report.valid:
        raise StructureError("; ".join(report.violations))


def _ends(s: Summand) -> tuple[str, str]:
    _, (tf, ti), (hf, hi), _ = KINDS[s.kind]
    return vertex_name(tf, s.index[ti]), vertex_name(hf, s.index[hi])


def _dual_family(v: str) -> str:
    if v.startswith("p"):
        return v
    return v[:-1] if v.endswith("*") else v + "*"


def build_symmetric_quiver(gq: GeneralizedQuiverSpec) -> tuple[Quiver, DimensionVector, SymmetricStructure]:
    require_generalized(gq)
    vertices, n, sigma_v = [], {}, {}
    for label, dim in gq.paired_chars:
        a, b = vertex_name("q", label), vertex_name("q*", label)
        vertices += [a, b]
        n[a] = n[b] = dim
        sigma_v[a], sigma_v[b] = b, a
    for label, dim in gq.selfinv_chars:
        p = vertex_name("p", label)
        vertices.append(p)
        n[p] = dim
        sigma_v[p] = p
    arrows, m, sigma_a = [], {}, {}
    for k, s in enumerate(gq.summands, start=1):
        tail, head = _ends(s)
        g, gs = arrow_names(k)
        arrows.append((g, tail, head))
        m[g] = s.m
        if KINDS[s.kind][3]:
            sigma_a[g] = g
        else:
            arrows.append((gs, _dual_family(head), _dual_family(tail)))
            m[gs] = s.m
            sigma_a[g], sigma_a[gs] = gs, g
    q = Quiver.from_edges(vertices, arrows)
    d = DimensionVector(n, m)
    return q, d, SymmetricStructure(sigma_v, sigma_a, form_sign=gq.group_sign)


@dataclass(frozen=True)
class BuiltQuiver:
    """The symmetric quiver of a spec together with its standard form."""

    spec: GeneralizedQuiverSpec
    quiver: Quiver
    dims: DimensionVector
    structure: SymmetricStructure
    form: BlockForm

    @classmethod
    def of(cls, gq: GeneralizedQuiverSpec) -> "BuiltQuiver":
        q, d, s = build_symmetric_quiver(gq)
        return cls(gq, q, d, s, standard_form(q, d, s))


def coordinate_shape(gq: GeneralizedQuiverSpec, k: int) -> tuple[int, int]:
    # labels are unique only within a family
    dims = {"q": dict(gq.paired_chars), "p": dict(gq.selfinv_chars)}
    s = gq.summands[k - 1]
    _, (tf, ti), (hf, hi), _ = KINDS[s.kind]
    return dims[hf[0]][s.index[hi]], dims[tf[0]][s.index[ti]] * s.m


def kind_residual(gq: GeneralizedQuiverSpec, k: int, A: np.ndarray) -> float:
    """||A + s A^T|| over slices for fixed kinds, 0 for paired kinds."""
    s = gq.summands[k - 1]
    if not KINDS[s.kind][3]:
        return 0.0
    return max([0.0] + [float(np.linalg.norm(x + gq.group_sign * x.T)) for x in la.twist_slices(A, s.m)])


def _fixed_phi(A: np.ndarray, C: BlockForm, head: str, m: int) -> np.ndarray:
    ch = C.blocks[head]
    if ch.size == 0:
        return np.asarray(A, dtype=complex)
    left = np.linalg.inv(ch).T
    return la.from_slices([left @ x for x in la.twist_slices(A, m)])


def _fixed_coord(phi: np.ndarray, C: BlockForm, head: str, m: int) -> np.ndarray:
    ch = C.blocks[head]
    if ch.size == 0:
        return np.asarray(phi, dtype=complex)
    return la.from_slices([ch.T @ x for x in la.twist_slices(phi, m)])


def embed_representation(
    gq: GeneralizedQuiverSpec,
    coords: Mapping[int, np.ndarray],
    tol: float = 1e-10,
    built: BuiltQuiver | None = None,
) -> Representation:
    b = built or BuiltQuiver.of(gq)
    phi = {}
    for k, s in enumerate(gq.summands, start=1):
        shape = coordinate_shape(gq, k)
        A = np.asarray(coords.get(k, np.zeros(shape)), dtype=complex)
        if A.shape != shape:
            raise QuiverError(f"summand {k}: coordinate has shape {A.shape}, expected {shape}")
        g, gs = arrow_names(k)
        tail, head = _ends(s)
        if KINDS[s.kind][3]:
            res = kind_residual(gq, k, A)
            if res > tol * max(1.0, float(np.linalg.norm(A))):
                raise StructureError(f"summand {k}: kind symmetry violated for {s.kind} (residual {res:.3g})")
            phi[g] = _fixed_phi(A, b.form, head, s.m)
        else:
            phi[g] = A
            phi[gs] = -c_transpose(A, tail, head, b.form, s.m)
    return Representation(b.quiver, b.dims, phi)


def extract_representation(
    r: Representation,
    gq: GeneralizedQuiverSpec,
    tol: float = 1e-10,
    built: BuiltQuiver | None = None,
) -> dict[int, np.ndarray]:
    b = built or BuiltQuiver.of(gq)
    ok, res = is_structured_rep(r, b.structure, b.form, tol * max(1.0, r.norm()))
    if not ok:
        raise StructureError(f"representation is not structured (residual {res:.3g})")
    coords = {}
    for k, s in enumerate(gq.summands, start=1):
        g, _ = arrow_names(k)
        _, head = _ends(s)
        if KINDS[s.kind][3]:
            coords[k] = _fixed_coord(r.phi[g], b.form, head, s.m)
        else:
            coords[k] = np.array(r.phi[g])
    return coords


def random_coords(gq: GeneralizedQuiverSpec, seed: int) -> dict[int, np.ndarray]:
    """Gaussian coordinates, symmetrized for the fixed kinds."""
    rng = np.random.default_rng(seed)
    out = {}
    for k, s in enumerate(gq.summands, start=1):
        shape = coordinate_shape(gq, k)
        A = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
        if KINDS[s.kind][3]:
            A = la.from_slices([0.5 * (x - gq.group_sign * x.T) for x in la.twist_slices(A, s.m)])
        out[k] = A
    return out


# ---------------------------------------------------------------------------
# the group R and equivariance


def structured_gauge(
    built: BuiltQuiver,
    paired: Mapping[str, np.ndarray],
    selfinv: Mapping[str, np.ndarray] | None = None,
) -> GaugeElement:
    """Element of R: g at q_i, its inverse C-transpose at q_i*, and g at p_j."""
    g = {}
    for label, n in built.spec.paired_chars:
        a = np.asarray(paired.get(label, np.eye(n)), dtype=complex)
        qi = vertex_name("q", label)
        g[qi] = a
        g[vertex_name("q*", label)] = dual_partner_gauge(a, qi, built.form)
    for label, w in built.spec.selfinv_chars:
        g[vertex_name("p", label)] = np.asarray((selfinv or {}).get(label, np.eye(w)), dtype=complex)
    return GaugeElement(g)


def random_structured_gauge(built: BuiltQuiver, seed: int, scale: float = 0.5) -> GaugeElement:
    """exp of a random element of Lie(R); lands in the structured group exactly."""
    rng = np.random.default_rng(seed)

    def cplx(n):
        return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) * scale / np.sqrt(2 * max(n, 1))

    paired = {label: sla.expm(cplx(n)) for label, n in built.spec.paired_chars}
    selfinv = {}
    for label, w in built.spec.selfinv_chars:
        x = cplx(w)
        if built.spec.group_sign == 1:
            selfinv[label] = sla.expm(x - x.T)
        else:
            J = standard_symplectic(w)
            selfinv[label] = sla.expm(J @ (x + x.T))
    return structured_gauge(built, paired, selfinv)


def act_on_coords(gq: GeneralizedQuiverSpec, g: GaugeElement, coords: Mapping[int, np.ndarray], built: BuiltQuiver) -> dict[int, np.ndarray]:
    """The R-action written on coordinates.

    Paired kinds: ``A -> g_h A (g_t^{-1} (x) I)``.  Fixed kinds:
    ``A -> g_t^{-T} A g_t^{-1}`` slice by slice.
    """
    n = built.dims.n
    out = {}
    for k, s in enumerate(gq.summands, start=1):
        tail, head = _ends(s)
        A = np.asarray(coords[k], dtype=complex)
        gt = g.at(tail, n[tail])
        gt_inv = np.linalg.inv(gt) if gt.size else gt
        if KINDS[s.kind][3]:
            out[k] = la.from_slices([gt_inv.T @ x @ gt_inv for x in la.twist_slices(A, s.m)])
        else:
            out[k] = g.at(head, n[head]) @ A @ np.kron(gt_inv, np.eye(s.m))
    return out


def check_equivariance(
    gq: GeneralizedQuiverSpec,
    g: GaugeElement,
    coords: Mapping[int, np.ndarray],
    group_tol: float = 1e-8,
    built: BuiltQuiver | None = None,
) -> float:
    b = built or BuiltQuiver.of(gq)
    res = structured_gauge_residual(g, b.form, b.dims)
    scale = max([1.0] + [float(np.linalg.norm(x)) for x in g.g.values()])
    if res > group_tol * scale**2:
        raise StructureError(f"gauge element is not in the structured group (residual {res:.3g})")
    lhs = embed_representation(gq, act_on_coords(gq, g, coords, b), tol=1e-8, built=b)
    rhs = gauge_act(g, embed_representation(gq, coords, built=b))
    return lhs.distance(rhs)


# ---------------------------------------------------------------------------
# mixed quiver settings

G_SYMBOLS = ("GL", "SL", "O", "SO", "Sp")
H_SYMBOLS = ("M", "S+", "S-", "L+", "L-")

CONSTRAINTS = {
    1: "if g_i = Sp then n_i is even",
    2: "if h_a != M then n_t(a) = n_h(a)",
    3: "a loop with h_a in {S+, S-} needs g_t(a) in {O, SO}",
    4: "a loop with h_a in {L+, L-} needs g_t(a) = Sp",
    5: "n_sigma(i) = n_i",
    6: "if g_i in {O, SO, Sp} then sigma(i) = i",
    7: "a non-loop with h_a != M needs sigma(t(a)) = h(a) and h_a in {S+, S-}",
}


@dataclass(frozen=True)
class MixedQuiverSetting:
    quiver: Quiver
    n: Mapping[str, int]
    g_sym: Mapping[str, str]
    h_sym: Mapping[str, str]
    sigma_v: Mapping[str, str] = field(default_factory=dict)
    sigma_a: Mapping[str, str] = field(default_factory=dict)

    def sv(self, v: str) -> str:
        return self.sigma_v.get(v, v)

    def sa(self, a: str) -> str:
        return self.sigma_a.get(a, a)


def _violate(report: ValidationReport, k: int, where: str) -> None:
    report.add(f"constraint ({k}) violated at {where}: {CONSTRAINTS[k]}")


def validate_mixed_setting(ms: MixedQuiverSetting) -> ValidationReport:
    q = ms.quiver
    report = ValidationReport()
    verts = set(q.vertices)
    ids = set(q.arrow_ids)
    for v in q.vertices:
        if v not in ms.n or int(ms.n[v]) != ms.n[v] or ms.n[v] < 0:
            report.add(f"vertex {v!r}: dimension must be a nonnegative integer")
        if ms.g_sym.get(v, "GL") not in G_SYMBOLS:
            report.add(f"vertex {v!r}: unknown group symbol {ms.g_sym[v]!r}")
        if ms.sv(v) not in verts or ms.sv(ms.sv(v)) != v:
            report.add(f"sigma is not an involution on vertices (at {v!r})")
    for a in q.arrows:
        if ms.h_sym.get(a.id, "M") not in H_SYMBOLS:
            report.add(f"arrow {a.id!r}: unknown matrix-space symbol {ms.h_sym[a.id]!r}")
        if ms.sa(a.id) not in ids or ms.sa(ms.sa(a.id)) != a.id:
            report.add(f"sigma is not an involution on arrows (at {a.id!r})")
        for end in (a.tail, a.head):
            if end not in verts:
                report.add(f"arrow {a.id!r}: unknown vertex {end!r}")
    if not report.valid:
        return report
    g = {v: ms.g_sym.get(v, "GL") for v in q.vertices}
    h = {a.id: ms.h_sym.get(a.id, "M") for a in q.arrows}
    n = ms.n
    for v in q.vertices:
        if g[v] == "Sp" and n[v] % 2:
            _violate(report, 1, f"vertex {v!r} (n = {n[v]})")
    for a in q.arrows:
        if h[a.id] != "M" and n[a.tail] != n[a.head]:
            _violate(report, 2, f"arrow {a.id!r}")
    for a in q.arrows:
        if a.is_loop and h[a.id] in ("S+", "S-") and g[a.tail] not in ("O", "SO"):
            _violate(report, 3, f"arrow {a.id!r}")
    for a in q.arrows:
        if a.is_loop and h[a.id] in ("L+", "L-") and g[a.tail] != "Sp":
            _violate(report, 4, f"arrow {a.id!r}")
    for v in q.vertices:
        if n[ms.sv(v)] != n[v]:
            _violate(report, 5, f"vertex {v!r}")
    for v in q.vertices:
        if g[v] in ("O", "SO", "Sp") and ms.sv(v) != v:
            _violate(report, 6, f"vertex {v!r}")
    for a in q.arrows:
        if not a.is_loop and h[a.id] != "M":
            if ms.sv(a.tail) != a.head or h[a.id] not in ("S+", "S-"):
                _violate(report, 7, f"arrow {a.id!r}")
    return report


def violated_constraints(report: ValidationReport) -> set[int]:
    out = set()
    for msg in report.violations:
        if msg.startswith("constraint ("):
            out.add(int(msg[len("constraint ("):msg.index(")")]))
    return out


def block_membership_residual(h: str, A: np.ndarray) -> float:
    if h == "M":
        return 0.0
    sign = 1 if h.endswith("+") else -1
    if h.startswith("S"):
        X = A
    else:
        X = A @ standard_symplectic(A.shape[0])
    return float(np.linalg.norm(X.T - sign * X))


def sample_mixed_block(h: str, n: int, seed: int) -> np.ndarray:
    """Gaussian sample from M(n), S+(n), S-(n), L+(n) or L-(n)."""
    if h not in H_SYMBOLS:
        raise QuiverError(f"unknown matrix-space symbol {h!r}")
    if h.startswith("L") and n % 2:
        raise QuiverError(f"{h} needs even n, got {n}")
    rng = np.random.default_rng(seed)
    X = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    if h == "M":
        return X
    sign = 1 if h.endswith("+") else -1
    S = 0.5 * (X + sign * X.T)
    if h.startswith("S"):
        return S
    # A J = S  <=>  A = S J^{-1} = -S J
    return -S @ standard_symplectic(n)


# ---------------------------------------------------------------------------
# character gradings


def validate_character_grading(
    chars: Sequence[tuple[Sequence[int], int]],
    group: str,
) -> ValidationReport:
    """Characters of a torus given additively as integer exponent vectors."""
    report = ValidationReport()
    if group not in ("O", "Sp", "SL"):
        report.add(f"unknown group {group!r}")
        return report
    if not chars:
        return report
    width = len(chars[0][0])
    mult: dict[tuple[int, ...], int] = {}
    for vec, k in chars:
        if len(vec) != width:
            report.add("exponent vectors must all have the same length")
            return report
        if k < 1:
            report.add(f"character {tuple(vec)}: multiplicity must be positive")
        key = tuple(int(x) for x in vec)
        mult[key] = mult.get(key, 0) + int(k)
    if group == "SL":
        total = np.zeros(width, dtype=int)
        for key, k in mult.items():
            total += k * np.asarray(key, dtype=int)
        if np.any(total != 0):
            report.add(f"weighted sum nonzero: sum n_i c_i = {total.tolist()}")
        return report
    for key, k in mult.items():
        inv = tuple(-x for x in key)
        if inv == key:
            if group == "Sp" and k % 2:
                report.add(f"self-inverse character {key}: symplectic block needs even multiplicity")
            continue
        if mult.get(inv, 0) != k:
            report.add(f"character {key}: inverse {inv} missing or with different multiplicity")
    return report
