"""Command-line entry points.

Exit codes: 0 success or affirmative answer, 1 negative but valid finding,
2 semantic input error, 3 parse error.  Every command prints a JSON run report
on standard output (``--format text`` prints ``key: value`` lines instead).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Sequence

from . import io
from .decomposition import (
    DUAL_PAIR_E,
    NonSemisimpleError,
    SearchOptions,
    classify_orthogonal_decomposition,
    decompose,
    find_destabilizer,
    find_isotropic_destabilizer,
)
from .generalized import (
    build_symmetric_quiver,
    extract_representation,
    validate_generalized,
    validate_mixed_setting,
)
from .moment import TraceObstruction, gauge_residual, maximal_weight, solve_gauge_equation
from .quiver import QuiverError, ValidationReport, validate_quiver
from .symmetric import StructureError, is_structured_rep, standard_form, validate_symmetric

EXIT_OK, EXIT_NEGATIVE, EXIT_SEMANTIC, EXIT_PARSE = 0, 1, 2, 3


class CommandError(Exception):
    def __init__(self, code: int, message: str, extra: dict | None = None):
        super().__init__(message)
        self.code = code
        self.extra = extra or {}


def _load(path: str, finish: bool = True) -> tuple[io.Document, bytes]:
    try:
        doc, data = io.load(path)
    except OSError as exc:
        raise CommandError(EXIT_SEMANTIC, f"cannot read {path}: {exc.strerror}") from exc
    except io.ParseError as exc:
        raise CommandError(EXIT_PARSE, str(exc), {"line": exc.line}) from exc
    except (io.SemanticError, QuiverError) as exc:
        raise CommandError(EXIT_SEMANTIC, str(exc)) from exc
    if finish:
        _finish(doc)
    return doc, data


def _finish(doc: io.Document) -> None:
    report = _validation(doc)
    if not report.valid:
        raise CommandError(EXIT_SEMANTIC, "invalid input", {"violations": report.violations})
    try:
        io.finish_structure(doc)
    except QuiverError as exc:
        raise CommandError(EXIT_SEMANTIC, str(exc)) from exc


def _validation(doc: io.Document) -> ValidationReport:
    if doc.kind == "generalized":
        return validate_generalized(doc.generalized)
    if doc.kind == "mixed":
        rep = validate_quiver(doc.quiver, doc.dims)
        if rep.valid:
            rep.extend(validate_mixed_setting(doc.mixed))
        return rep
    if doc.kind == "symmetric":
        rep = validate_symmetric(doc.quiver, doc.dims, doc.structure)
        if rep.valid:
            try:
                standard_form(doc.quiver, doc.dims, doc.structure)
            except StructureError as exc:
                rep.add(str(exc))
        return rep
    return validate_quiver(doc.quiver, doc.dims)


def _representation(doc: io.Document, seed: int | None):
    try:
        return doc.representation(seed)
    except io.ParseError as exc:
        raise CommandError(EXIT_PARSE, str(exc), {"line": exc.line}) from exc
    except (io.SemanticError, QuiverError) as exc:
        raise CommandError(EXIT_SEMANTIC, str(exc)) from exc


def _tau(doc: io.Document, required: bool = True) -> dict[str, float]:
    if required and not doc.has_tau:
        raise CommandError(EXIT_SEMANTIC, "this command needs a tau block")
    verts = doc.symmetric_view()[0].vertices if doc.kind == "generalized" else doc.quiver.vertices
    unknown = sorted(set(doc.tau) - set(verts))
    if unknown:
        raise CommandError(EXIT_SEMANTIC, f"tau given for unknown vertices {unknown}")
    return {v: doc.tau.get(v, 0.0) for v in verts}


def _base(cmd: str, data: bytes, params: dict) -> dict:
    return {
        "schema_version": io.SCHEMA_VERSION,
        "command": cmd,
        "input_digest": io.digest(data),
        "parameters": params,
    }


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> tuple[int, dict]:
    doc, data = _load(args.file, finish=False)
    report = _validation(doc)
    out = _base("validate", data, {})
    out["results"] = {"kind": doc.kind, "valid": report.valid, "violations": report.violations}
    return (EXIT_OK if report.valid else EXIT_SEMANTIC), out


def cmd_build_dw(args) -> tuple[int, dict]:
    doc, data = _load(args.file)
    if doc.kind != "generalized":
        raise CommandError(EXIT_SEMANTIC, "build-dw needs a generalized block")
    q, d, s = build_symmetric_quiver(doc.generalized)
    extra: dict[str, Any] = {}
    if "representation" in doc.raw:
        r = _representation(doc, None)
        extra["representation"] = io.representation_block(r)
        coords = extract_representation(r, doc.generalized, built=doc.built)
        extra["coords"] = {str(k): io.encode_matrix(v) for k, v in coords.items()}
    if doc.has_tau:
        extra["tau"] = doc.tau
    sym = io.symmetric_document(q, d, s, {k: v for k, v in extra.items() if k != "coords"})
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(io.dumps(sym))
    out = _base("build-dw", data, {"out": args.out})
    out["results"] = {
        "vertices": list(q.vertices),
        "arrows": [[a.id, a.tail, a.head] for a in q.arrows],
        "sigma_arrows": dict(s.sigma_a),
        "document": None if args.out else sym,
    }
    return EXIT_OK, out


def cmd_solve(args) -> tuple[int, dict]:
    doc, data = _load(args.file)
    tau = _tau(doc)
    r = _representation(doc, args.seed)
    opts = io.solver_options(doc, args.tol, args.max_iter, args.step)
    try:
        solved, rep = solve_gauge_equation(r, tau, opts)
    except TraceObstruction as exc:
        raise CommandError(EXIT_SEMANTIC, f"trace obstruction: {exc}") from exc
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "residual", "step"])
            for k, (res, st) in enumerate(zip(rep.residual_trace, rep.step_trace)):
                w.writerow([k, format(res, ".17g"), format(st, ".17g")])
    out = _base("solve", data, {"tol": opts.tol, "max_iter": opts.max_iter, "step": opts.step, "seed": args.seed})
    out["results"] = {
        "converged": rep.converged,
        "iterations": rep.iterations,
        "initial_residual": rep.residual_trace[0],
        "final_residual": rep.final_residual,
        "step_size_used": rep.step_size_used,
        "stop_reason": rep.stop_reason,
        "solution": io.representation_block(solved),
        "gauge": {v: io.encode_matrix(g) for v, g in rep.gauge.g.items()},
    }
    return (EXIT_OK if rep.converged else EXIT_NEGATIVE), out


def cmd_stability(args) -> tuple[int, dict]:
    doc, data = _load(args.file)
    if args.isotropic and doc.kind not in ("symmetric", "generalized"):
        raise CommandError(EXIT_SEMANTIC, "--isotropic needs a symmetric or generalized block")
    tau = _tau(doc)
    r = _representation(doc, args.seed)
    opts = SearchOptions(budget=args.budget, seed=args.seed or 0)
    try:
        if args.isotropic:
            _, _, s, C = doc.symmetric_view()
            w = find_isotropic_destabilizer(r, tau, C, s, args.mode, opts)
        else:
            w = find_destabilizer(r, tau, args.mode, opts)
    except TraceObstruction as exc:
        raise CommandError(EXIT_SEMANTIC, f"trace obstruction: {exc}") from exc
    except StructureError as exc:
        raise CommandError(EXIT_SEMANTIC, str(exc)) from exc
    out = _base("stability", data, {"mode": args.mode, "isotropic": args.isotropic, "budget": args.budget, "seed": args.seed})
    res: dict[str, Any] = {"witness_found": w is not None}
    if w is not None:
        res.update(
            theta=w.theta,
            dims=w.candidate.dims(),
            exhaustive=w.exhaustive,
            invariance_residual=w.candidate.invariance_residual,
            witness=io.subspace_block(w.candidate.U),
        )
    else:
        res["exhaustive"] = all(x <= 1 for x in r.dims.n.values())
    out["results"] = res
    return (EXIT_NEGATIVE if w is not None else EXIT_OK), out


def cmd_decompose(args) -> tuple[int, dict]:
    doc, data = _load(args.file)
    if args.orthogonal and doc.kind not in ("symmetric", "generalized"):
        raise CommandError(EXIT_SEMANTIC, "--orthogonal needs a symmetric or generalized block")
    r = _representation(doc, args.seed)
    tau = _tau(doc, required=False) if doc.has_tau else None
    out = _base("decompose", data, {"orthogonal": args.orthogonal, "seed": args.seed})
    try:
        if args.orthogonal:
            _, _, s, C = doc.symmetric_view()
            ok, res = is_structured_rep(r, s, C, 1e-8 * max(1.0, r.norm()))
            if not ok:
                raise CommandError(EXIT_SEMANTIC, f"representation is not structured (residual {res:.3g})")
            rep = classify_orthogonal_decomposition(r, C, s, tau, args.seed or 0)
        else:
            rep = decompose(r, args.seed or 0, tau)
    except (NonSemisimpleError, StructureError) as exc:
        out["results"] = {"diagnostic": str(exc)}
        return EXIT_NEGATIVE, out
    summands = []
    for sm in rep.summands:
        item = {
            "tag": sm.tag,
            "multiplicity": sm.multiplicity,
            "dims": dict(sm.rep.dims.n),
            "representation": io.representation_block(sm.rep),
        }
        if sm.tag == DUAL_PAIR_E:
            item["partner"] = io.representation_block(sm.partner)
        if sm.stable is not None:
            item["stable"] = sm.stable
        summands.append(item)
    out["results"] = {
        "tags": rep.tags,
        "summands": summands,
        "recomposition_residual": rep.residual(r),
        "change_of_basis": {v: io.encode_matrix(g) for v, g in rep.change_of_basis.g.items()},
    }
    return EXIT_OK, out


def cmd_weight(args) -> tuple[int, dict]:
    doc, data = _load(args.file)
    tau = _tau(doc, required=False)
    r = _representation(doc, args.seed)
    try:
        chi = io.parse_chi(args.chi, r.dims)
    except io.ParseError as exc:
        raise CommandError(EXIT_PARSE, str(exc), {"line": exc.line}) from exc
    except io.SemanticError as exc:
        raise CommandError(EXIT_SEMANTIC, str(exc)) from exc
    value = maximal_weight(r, chi, tau)
    out = _base("weight", data, {"chi": args.chi, "seed": args.seed})
    out["results"] = {"value": value, "finite": not math.isinf(value), "gauge_residual": gauge_residual(r, tau)}
    return EXIT_OK, out


def _batch_one(job: tuple[str, list[str]]) -> tuple[str, int, dict]:
    path, argv = job
    code, report = run(argv + [path])
    return path, code, report


def cmd_batch(args, passthrough: list[str]) -> tuple[int, dict]:
    if not os.path.isdir(args.dir):
        raise CommandError(EXIT_SEMANTIC, f"not a directory: {args.dir}")
    files = sorted(os.path.join(args.dir, f) for f in os.listdir(args.dir) if f.endswith(".json"))
    jobs = [(f, [args.command] + passthrough) for f in files]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_batch_one, jobs))
    else:
        results = [_batch_one(j) for j in jobs]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for path, _, report in results:
            name = os.path.splitext(os.path.basename(path))[0] + ".report.json"
            with open(os.path.join(args.out, name), "w") as fh:
                fh.write(io.dumps(report))
    out = {
        "schema_version": io.SCHEMA_VERSION,
        "command": "batch",
        "parameters": {"command": args.command, "dir": args.dir, "args": passthrough},
        "results": [{"file": os.path.basename(p), "exit_code": c} for p, c, _ in results],
    }
    worst = max([c for _, c, _ in results], default=EXIT_OK)
    return worst, out


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--report", help="also write the JSON report to this file")
    common.add_argument("--timing", action="store_true", help="include wall-clock timing in the report")
    p = argparse.ArgumentParser(prog="symquiver", description="Quiver representations: gauge equations, stability and decompositions.")
    sub = p.add_subparsers(dest="cmd", required=True)

    v = sub.add_parser("validate", parents=[common], help="check a document against its structural constraints")
    v.add_argument("file")

    b = sub.add_parser("build-dw", parents=[common], help="write the symmetric quiver of a generalized block")
    b.add_argument("file")
    b.add_argument("--out")

    s = sub.add_parser("solve", parents=[common], help="run the gauge-equation flow")
    s.add_argument("file")
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iter", type=int)
    s.add_argument("--step", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--trace", help="CSV file for iteration,residual,step")

    st = sub.add_parser("stability", parents=[common], help="search for a destabilizing subrepresentation")
    st.add_argument("file")
    st.add_argument("--mode", choices=("semi", "strict"), default="semi")
    st.add_argument("--isotropic", action="store_true")
    st.add_argument("--budget", type=int, default=256)
    st.add_argument("--seed", type=int)

    d = sub.add_parser("decompose", parents=[common], help="polystable decomposition")
    d.add_argument("file")
    d.add_argument("--orthogonal", action="store_true")
    d.add_argument("--seed", type=int)

    w = sub.add_parser("weight", parents=[common], help="maximal weight of a one-parameter subgroup")
    w.add_argument("file")
    w.add_argument("--chi", required=True, help="'v1=0;v2=-1' or a JSON object")
    w.add_argument("--seed", type=int)

    bt = sub.add_parser("batch", parents=[common], help="run one command over every .json file in a directory")
    bt.add_argument("dir")
    bt.add_argument("--command", required=True, choices=("validate", "solve", "stability", "decompose", "weight"))
    bt.add_argument("--jobs", type=int, default=1)
    bt.add_argument("--out", help="directory for per-file reports")
    return p


COMMANDS = {
    "validate": cmd_validate,
    "build-dw": cmd_build_dw,
    "solve": cmd_solve,
    "stability": cmd_stability,
    "decompose": cmd_decompose,
    "weight": cmd_weight,
}


def run(argv: Sequence[str]) -> tuple[int, dict]:
    parser = build_parser()
    args, rest = parser.parse_known_args(list(argv))
    if args.cmd != "batch" and rest:
        parser.error(f"unrecognized arguments: {' '.join(rest)}")
    start = time.perf_counter()
    try:
        if args.cmd == "batch":
            code, report = cmd_batch(args, rest)
        else:
            code, report = COMMANDS[args.cmd](args)
    except CommandError as exc:
        code = exc.code
        report = {"schema_version": io.SCHEMA_VERSION, "command": args.cmd, "error": str(exc), **exc.extra}
    except (QuiverError, io.SemanticError) as exc:
        code = EXIT_SEMANTIC
        report = {"schema_version": io.SCHEMA_VERSION, "command": args.cmd, "error": str(exc)}
    report["exit_code"] = code
    if args.timing:
        report["timing_seconds"] = time.perf_counter() - start
    return code, report


def _text(report: dict, prefix: str = "") -> list[str]:
    lines = []
    for k, v in report.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            lines += _text(v, key + ".")
        elif isinstance(v, float):
            lines.append(f"{key}: {'INF' if math.isinf(v) else format(v, '.17g')}")
        elif isinstance(v, list) and v and isinstance(v[0], list):
            lines.append(f"{key}: {json.dumps(io.jsonable(v))}")
        else:
            lines.append(f"{key}: {json.dumps(io.jsonable(v)) if not isinstance(v, str) else v}")
    return lines


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    code, report = run(argv)
    parser = build_parser()
    ns, _ = parser.parse_known_args(argv)
    text = io.dumps(report)
    if ns.report:
        with open(ns.report, "w") as fh:
            fh.write(text)
    if ns.format == "text":
        sys.stdout.write("\n".join(_text(report)) + "\n")
    else:
        sys.stdout.write(text)
    if "error" in report:
        sys.stderr.write(f"symquiver: {report['error']}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
