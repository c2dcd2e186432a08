"""JSON document format for quivers, structures, parameters and reports.

Complex numbers are written as ``[re, im]`` pairs (plain numbers are also
accepted on input); matrices are lists of rows.  Every document carries a
``schema_version``.  A document describes exactly one of: a plain quiver, a
symmetric (possibly supermixed) quiver, a generalized O/Sp-quiver, or a mixed
quiver setting.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .generalized import (
    BuiltQuiver,
    GeneralizedQuiverSpec,
    MixedQuiverSetting,
    Summand,
    embed_representation,
    random_coords,
)
from .moment import OnePS, SolveOptions
from .quiver import DimensionVector, Quiver, Representation, random_representation
from .symmetric import BlockForm, SymmetricStructure, project_structured, standard_form

SCHEMA_VERSION = 1
KINDS = ("plain", "symmetric", "generalized", "mixed")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SemanticError(ValueError):
    """Well-formed document whose content is inconsistent."""


# ---------------------------------------------------------------------------
# numbers and matrices


def encode_complex(z: complex) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def encode_matrix(a: np.ndarray) -> list[list[list[float]]]:
    a = np.asarray(a, dtype=complex)
    return [[encode_complex(x) for x in row] for row in a]


def decode_scalar(x: Any, where: str) -> complex:
    if isinstance(x, bool):
        raise ParseError(f"{where}: expected a number")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(y, (int, float)) and not isinstance(y, bool) for y in x):
        return complex(x[0], x[1])
    raise ParseError(f"{where}: expected a number or an [re, im] pair")


def decode_matrix(x: Any, where: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    if not isinstance(x, list) or not all(isinstance(row, list) for row in x):
        raise ParseError(f"{where}: expected a matrix (list of rows)")
    rows = [[decode_scalar(v, where) for v in row] for row in x]
    if len({len(r) for r in rows}) > 1:
        raise ParseError(f"{where}: ragged matrix")
    ncols = len(rows[0]) if rows else (shape[1] if shape else 0)
    out = np.array(rows, dtype=complex).reshape(len(rows), ncols)
    if shape is not None and out.shape != shape:
        if out.size == 0 and shape[0] * shape[1] == 0:
            return np.zeros(shape, dtype=complex)
        raise SemanticError(f"{where}: expected shape {shape}, got {out.shape}")
    return out


def jsonable(x: Any) -> Any:
    """Convert results to JSON-ready values: INF as a string, arrays as matrices."""
    if isinstance(x, float):
        if math.isinf(x):
            return "INF" if x > 0 else "-INF"
        if math.isnan(x):
            return "NaN"
        return x
    if isinstance(x, (np.floating,)):
        return jsonable(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return encode_complex(x)
    if isinstance(x, np.ndarray):
        if x.ndim == 2:
            return encode_matrix(x)
        return [jsonable(v) for v in x.tolist()]
    if isinstance(x, Mapping):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    return x


def dumps(doc: Any) -> str:
    return json.dumps(jsonable(doc), indent=2, sort_keys=False, allow_nan=False) + "\n"


def digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# documents


@dataclass
class Document:
    kind: str
    raw: dict
    quiver: Quiver | None = None
    dims: DimensionVector | None = None
    structure: SymmetricStructure | None = None
    form: BlockForm | None = None
    generalized: GeneralizedQuiverSpec | None = None
    built: BuiltQuiver | None = None
    mixed: MixedQuiverSetting | None = None
    tau: dict[str, float] = field(default_factory=dict)
    solver: dict[str, Any] = field(default_factory=dict)

    @property
    def has_tau(self) -> bool:
        return "tau" in self.raw

    def representation(self, seed: int | None = None) -> Representation:
        """Inline representation, or a seeded random one (structured when the quiver is)."""
        spec = self.raw.get("representation")
        if self.kind == "generalized":
            b = self.built
            if isinstance(spec, dict) and "coords" in spec:
                coords = {}
                for key, mat in _obj(spec["coords"], "representation.coords").items():
                    try:
                        k = int(key)
                    except ValueError as exc:
                        raise ParseError(f"representation.coords: key {key!r} is not a summand number") from exc
                    if not 1 <= k <= len(self.generalized.summands):
                        raise SemanticError(f"representation.coords: no summand {k}")
                    coords[k] = decode_matrix(mat, f"representation.coords.{key}")
                return embed_representation(self.generalized, coords, built=b)
            s = _seed(spec, seed)
            return embed_representation(self.generalized, random_coords(self.generalized, s), built=b)
        q, d = self.quiver, self.dims
        if isinstance(spec, dict) and "phi" in spec:
            phi = {}
            for a_id, mat in _obj(spec["phi"], "representation.phi").items():
                if a_id not in q.arrow_ids:
                    raise SemanticError(f"representation.phi: unknown arrow {a_id!r}")
                a = q.arrow(a_id)
                shape = (d.n[a.head], d.n[a.tail] * d.twist(a_id))
                phi[a_id] = decode_matrix(mat, f"representation.phi.{a_id}", shape)
            return Representation(q, d, phi)
        r = random_representation(q, d, _seed(spec, seed))
        if self.kind == "symmetric":
            r = project_structured(r, self.structure, self.form)
        return r

    def symmetric_view(self) -> tuple[Quiver, DimensionVector, SymmetricStructure, BlockForm]:
        if self.kind == "generalized":
            b = self.built
            return b.quiver, b.dims, b.structure, b.form
        if self.kind != "symmetric":
            raise SemanticError("this operation needs a symmetric or generalized block")
        return self.quiver, self.dims, self.structure, self.form


def _seed(spec: Any, seed: int | None) -> int:
    if seed is not None:
        return seed
    if isinstance(spec, dict) and "seed" in spec:
        return _int(spec["seed"], "representation.seed")
    return 0


def _obj(x: Any, where: str) -> dict:
    if not isinstance(x, dict):
        raise ParseError(f"{where}: expected an object")
    return x


def _list(x: Any, where: str) -> list:
    if not isinstance(x, list):
        raise ParseError(f"{where}: expected a list")
    return x


def _int(x: Any, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"{where}: expected an integer")
    return x


def _float(x: Any, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"{where}: expected a number")
    return float(x)


def _str(x: Any, where: str) -> str:
    if not isinstance(x, str):
        raise ParseError(f"{where}: expected a string")
    return x


def loads(text: str) -> Document:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from exc
    return from_dict(raw)


def load(path: str) -> tuple[Document, bytes]:
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("file is not valid UTF-8") from exc
    return loads(text), data


def _parse_quiver(raw: dict) -> tuple[Quiver, DimensionVector]:
    verts = [_str(v, "vertices[]") for v in _list(raw.get("vertices", []), "vertices")]
    arrows, m = [], {}
    for k, a in enumerate(_list(raw.get("arrows", []), "arrows")):
        a = _obj(a, f"arrows[{k}]")
        for key in ("id", "tail", "head"):
            if key not in a:
                raise ParseError(f"arrows[{k}]: missing {key!r}")
        aid = _str(a["id"], f"arrows[{k}].id")
        arrows.append((aid, _str(a["tail"], f"arrows[{k}].tail"), _str(a["head"], f"arrows[{k}].head")))
        if "twist" in a:
            m[aid] = _int(a["twist"], f"arrows[{k}].twist")
    dims = _obj(raw.get("dims", {}), "dims")
    n = {str(v): _int(x, f"dims.{v}") for v, x in dims.items()}
    return Quiver.from_edges(verts, arrows), DimensionVector(n, m)


def _parse_signs(x: Any, where: str) -> dict[str, int]:
    return {str(k): _int(v, f"{where}.{k}") for k, v in _obj(x or {}, where).items()}


def from_dict(raw: Any) -> Document:
    raw = _obj(raw, "document")
    if "schema_version" not in raw:
        raise ParseError("missing schema_version")
    if _int(raw["schema_version"], "schema_version") != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {raw['schema_version']!r}")
    blocks = [k for k in ("symmetric", "generalized", "mixed") if k in raw]
    if len(blocks) > 1:
        raise SemanticError(f"document has more than one of the blocks {blocks}")
    kind = blocks[0] if blocks else "plain"
    if "kind" in raw and raw["kind"] != kind:
        raise SemanticError(f"declared kind {raw['kind']!r} does not match the blocks present ({kind})")
    doc = Document(kind, raw)
    if "tau" in raw:
        doc.tau = {str(k): _float(v, f"tau.{k}") for k, v in _obj(raw["tau"], "tau").items()}
    doc.solver = dict(_obj(raw.get("solver", {}), "solver"))
    if kind == "generalized":
        g = _obj(raw["generalized"], "generalized")
        group = _str(g.get("group", "O"), "generalized.group")
        if group not in ("O", "Sp"):
            raise SemanticError(f"generalized.group must be 'O' or 'Sp', got {group!r}")

        def chars(key):
            out = []
            for k, c in enumerate(_list(g.get(key, []), f"generalized.{key}")):
                c = _obj(c, f"generalized.{key}[{k}]")
                out.append((str(c.get("label")), _int(c.get("dim"), f"generalized.{key}[{k}].dim")))
            return tuple(out)

        summands = []
        for k, sm in enumerate(_list(g.get("summands", []), "generalized.summands")):
            sm = _obj(sm, f"generalized.summands[{k}]")
            idx = tuple(str(x) for x in _list(sm.get("index", []), f"generalized.summands[{k}].index"))
            summands.append(Summand(_str(sm.get("kind"), f"generalized.summands[{k}].kind"), idx, _int(sm.get("twist", 1), f"generalized.summands[{k}].twist")))
        doc.generalized = GeneralizedQuiverSpec(1 if group == "O" else -1, chars("paired_chars"), chars("selfinv_chars"), tuple(summands))
        return doc
    doc.quiver, doc.dims = _parse_quiver(raw)
    if kind == "symmetric":
        s = _obj(raw["symmetric"], "symmetric")
        form = _str(s.get("form", "orthogonal"), "symmetric.form")
        if form not in ("orthogonal", "symplectic"):
            raise SemanticError(f"symmetric.form must be orthogonal or symplectic, got {form!r}")
        doc.structure = SymmetricStructure(
            {str(k): _str(v, "symmetric.sigma_vertices") for k, v in _obj(s.get("sigma_vertices", {}), "symmetric.sigma_vertices").items()},
            {str(k): _str(v, "symmetric.sigma_arrows") for k, v in _obj(s.get("sigma_arrows", {}), "symmetric.sigma_arrows").items()},
            1 if form == "orthogonal" else -1,
            _parse_signs(s.get("eps_v"), "symmetric.eps_v"),
            _parse_signs(s.get("eps_a"), "symmetric.eps_a"),
        )
    if kind == "mixed":
        mx = _obj(raw["mixed"], "mixed")
        sig = _obj(mx.get("sigma", {}), "mixed.sigma")
        doc.mixed = MixedQuiverSetting(
            doc.quiver,
            dict(doc.dims.n),
            {str(k): _str(v, "mixed.g_sym") for k, v in _obj(mx.get("g_sym", {}), "mixed.g_sym").items()},
            {str(k): _str(v, "mixed.h_sym") for k, v in _obj(mx.get("h_sym", {}), "mixed.h_sym").items()},
            {str(k): _str(v, "mixed.sigma.vertices") for k, v in _obj(sig.get("vertices", {}), "mixed.sigma.vertices").items()},
            {str(k): _str(v, "mixed.sigma.arrows") for k, v in _obj(sig.get("arrows", {}), "mixed.sigma.arrows").items()},
        )
    return doc


def finish_structure(doc: Document) -> None:
    """Attach derived objects (standard form, built quiver); raises on invalid input."""
    if doc.kind == "symmetric" and doc.form is None:
        doc.form = standard_form(doc.quiver, doc.dims, doc.structure)
    if doc.kind == "generalized" and doc.built is None:
        doc.built = BuiltQuiver.of(doc.generalized)


def solver_options(doc: Document, tol=None, max_iter=None, step=None) -> SolveOptions:
    opts = SolveOptions()
    cfg = doc.solver
    if "tol" in cfg:
        opts.tol = _float(cfg["tol"], "solver.tol")
    if "max_iter" in cfg:
        opts.max_iter = _int(cfg["max_iter"], "solver.max_iter")
    if "step" in cfg:
        opts.step = _float(cfg["step"], "solver.step")
    if tol is not None:
        opts.tol = tol
    if max_iter is not None:
        opts.max_iter = max_iter
    if step is not None:
        opts.step = step
    return opts


# ---------------------------------------------------------------------------
# writers


def symmetric_document(q: Quiver, d: DimensionVector, s: SymmetricStructure, extra: Mapping[str, Any] | None = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "symmetric",
        "vertices": list(q.vertices),
        "arrows": [{"id": a.id, "tail": a.tail, "head": a.head, "twist": d.twist(a.id)} for a in q.arrows],
        "dims": dict(d.n),
        "symmetric": {
            "sigma_vertices": dict(s.sigma_v),
            "sigma_arrows": dict(s.sigma_a),
            "form": "orthogonal" if s.form_sign == 1 else "symplectic",
            "eps_v": {v: s.vertex_eps(v) for v in q.vertices},
            "eps_a": {a: s.arrow_eps(a) for a in q.arrow_ids},
        },
    }
    doc.update(extra or {})
    return doc


def representation_block(r: Representation) -> dict:
    return {"phi": {a: encode_matrix(p) for a, p in r.phi.items()}}


def subspace_block(U: Mapping[str, np.ndarray]) -> dict:
    return {v: encode_matrix(u) for v, u in U.items()}


# ---------------------------------------------------------------------------
# one-parameter subgroup specs


def parse_chi(text: str, dims: DimensionVector) -> OnePS:
    """Either 'v1=0;v2=-1,1' or JSON {"weights": {...}, "basis": {...}} / {v: [w...]}."""
    text = text.strip()
    basis_raw: dict = {}
    if text.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"chi: {exc.msg}", exc.lineno) from exc
        raw = _obj(raw, "chi")
        weights_raw = _obj(raw["weights"], "chi.weights") if "weights" in raw else raw
        basis_raw = _obj(raw.get("basis", {}), "chi.basis") if "weights" in raw else {}
        weights = {}
        for v, w in weights_raw.items():
            ws = w if isinstance(w, list) else [w]
            weights[str(v)] = [_int(x, f"chi.weights.{v}") for x in ws]
    else:
        weights = {}
        for part in filter(None, (p.strip() for p in text.split(";"))):
            if "=" not in part:
                raise ParseError(f"chi: expected 'vertex=weights', got {part!r}")
            v, ws = part.split("=", 1)
            try:
                weights[v.strip()] = [int(x) for x in ws.split(",") if x.strip()]
            except ValueError as exc:
                raise ParseError(f"chi: weights at {v.strip()!r} must be integers") from exc
    for v in weights:
        if v not in dims.n:
            raise SemanticError(f"chi: unknown vertex {v!r}")
    basis, wts = {}, {}
    for v, n in dims.n.items():
        w = weights.get(v, [0] * n)
        if len(w) == 1 and n > 1:
            w = w * n
        if len(w) != n:
            raise SemanticError(f"chi: vertex {v!r} needs {n} weights, got {len(w)}")
        wts[v] = w
        basis[v] = decode_matrix(basis_raw[v], f"chi.basis.{v}", (n, n)) if v in basis_raw else np.eye(n, dtype=complex)
    chi = OnePS(basis, {v: np.asarray(w, dtype=int) for v, w in wts.items()})
    try:
        chi.validate(dims)
    except ValueError as exc:
        raise SemanticError(str(exc)) from exc
    return chi
