"""Command-line front end.

Every subcommand prints exactly one JSON run report to stdout (sorted keys,
so reports diff cleanly); human-oriented progress goes to stderr.  File
artifacts are only written when --out is given.  Exit codes: 0 when the
requested computation or verification succeeded, 1 for verification
failures and internal inconsistencies, 2 for bad input, 3 for resource
caps.  All randomness is drawn from the --seed flag, so reports are
reproducible apart from the timing fields.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
import time
from pathlib import Path

import numpy as np

from .caps import DEFAULTS, load_caps
from .cfi import (
    CfiInstance,
    brute_iso_oracle,
    build,
    canonical_form,
    canonical_instance,
    iso_class,
)
from .eqformula import parse as parse_formula
from .errors import CfiforgeError, ConsistencyError, InputError
from .gfp import LinearSystem, PrimeFieldMatrix, rank
from .isoles import build_system, decide_class_via_les
from .relstruct import BaseGraph, RelationalStructure, complete_graph
from .suite import run_suite, signature_suite
from .symred import (
    OrbitPartition,
    PermutationGroup,
    column_orbits,
    rank_via_solvability,
    symmetric_solution,
)
from .sylow import compact_matrix, validate_compact
from .wl import wl_distinguish

SCHEMA = 1


def _emit(command: str, config: dict, verdicts: dict, elapsed: float, artifacts: list[str]):
    doc = {
        "schema": SCHEMA,
        "command": command,
        "config": config,
        "seed": config.get("seed", 0),
        "verdicts": verdicts,
        "timings_s": {"total": round(elapsed, 3)},
        "artifacts": artifacts,
    }
    print(json.dumps(doc, sort_keys=True))


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _write(path: str, text: str) -> str:
    try:
        Path(path).write_text(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None
    return path


def _load_graph(spec: str) -> BaseGraph:
    named = {"k4": 4, "k5": 5}
    if spec in named:
        return complete_graph(named[spec])
    return BaseGraph.from_json(_read(spec))


def _parse_d(text: str, base: BaseGraph, q: int, rng: random.Random) -> tuple[int, ...]:
    if text == "random":
        return tuple(rng.randrange(q) for _ in range(base.n))
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise InputError(f"--d must be a comma list of integers or 'random', got {text!r}") from None


def _config(args, **extra) -> dict:
    cfg = {"seed": args.seed, "threads": args.threads}
    cfg.update(extra)
    return cfg


def _load_matrix(doc: dict, field: str = "matrix") -> PrimeFieldMatrix:
    if not isinstance(doc, dict) or field not in doc:
        raise InputError(f"input JSON needs a {field!r} object")
    return PrimeFieldMatrix.from_json(doc[field])


def _cmd_cfi_gen(args, caps) -> int:
    start = time.perf_counter()
    rng = random.Random(args.seed)
    base = _load_graph(args.graph)
    inst = CfiInstance(base, args.q, _parse_d(args.d, base, args.q, rng))
    structure = build(inst, caps)
    artifacts = []
    if args.out:
        artifacts.append(_write(f"{args.out}.instance.json", inst.to_json()))
        artifacts.append(_write(f"{args.out}.structure.json", structure.to_json()))
    verdicts = {
        "universe_size": structure.universe_size,
        "iso_class": iso_class(inst),
        "d": list(inst.d),
        "q": inst.q,
        "vertices": base.n,
        "edges": len(base.edges),
    }
    _emit("cfi-gen", _config(args, graph=args.graph, q=args.q, d=args.d, out=args.out),
          verdicts, time.perf_counter() - start, artifacts)
    return 0


def _cmd_cfi_decide(args, caps) -> int:
    start = time.perf_counter()
    structure = RelationalStructure.from_json(_read(args.infile))
    z = decide_class_via_les(structure)
    system = build_system(structure, z).system
    verdicts = {
        "iso_class": z,
        "equations": system.matrix.rows,
        "variables": system.matrix.cols,
    }
    _emit("cfi-decide", _config(args, infile=args.infile),
          verdicts, time.perf_counter() - start, [])
    return 0


def _cmd_cfi_canon(args, caps) -> int:
    start = time.perf_counter()
    inst = CfiInstance.from_json(_read(args.infile))
    canon = canonical_instance(inst)
    form = canonical_form(inst, caps)
    artifacts = []
    if args.out:
        artifacts.append(_write(f"{args.out}.instance.json", canon.to_json()))
        artifacts.append(_write(f"{args.out}.structure.json", form.to_json()))
    verdicts = {
        "canonical_d": list(canon.d),
        "iso_class": iso_class(inst),
        "universe_size": form.universe_size,
    }
    _emit("cfi-canon", _config(args, infile=args.infile, out=args.out),
          verdicts, time.perf_counter() - start, artifacts)
    return 0


def _cmd_cfi_iso(args, caps) -> int:
    start = time.perf_counter()
    a = CfiInstance.from_json(_read(args.a))
    b = CfiInstance.from_json(_read(args.b))
    by_oracle = brute_iso_oracle(a, b, caps)
    za = decide_class_via_les(build(a, caps))
    zb = decide_class_via_les(build(b, caps))
    if by_oracle != (za == zb):
        raise ConsistencyError(
            f"twist search says {by_oracle}, equation systems say {za} vs {zb}"
        )
    verdicts = {"isomorphic": by_oracle, "class_a": za, "class_b": zb}
    _emit("cfi-iso", _config(args, a=args.a, b=args.b),
          verdicts, time.perf_counter() - start, [])
    return 0


def _cmd_wl_run(args, caps) -> int:
    start = time.perf_counter()
    a = RelationalStructure.from_json(_read(args.a))
    b = RelationalStructure.from_json(_read(args.b))
    verdict = wl_distinguish(a, b, args.k, caps)
    digest = hashlib.sha256(
        json.dumps([verdict.histogram_a, verdict.histogram_b], sort_keys=True).encode()
    ).hexdigest()[:16]
    verdicts = {
        "verdict": verdict.describe(),
        "equivalent": verdict.equivalent,
        "rounds": verdict.rounds,
        "first_difference_round": verdict.round,
        "colors": verdict.color_count,
        "histogram_digest": digest,
    }
    _emit("wl-run", _config(args, a=args.a, b=args.b, k=args.k),
          verdicts, time.perf_counter() - start, [])
    return 0


def _cmd_sym_fold(args, caps) -> int:
    start = time.perf_counter()
    try:
        doc = json.loads(_read(args.infile))
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed system JSON: {exc}") from None
    matrix = _load_matrix(doc)
    if "rhs" not in doc or "group" not in doc:
        raise InputError("input JSON needs 'matrix', 'rhs' and 'group'")
    system = LinearSystem(matrix, np.array(doc["rhs"], dtype=np.int64))
    group = PermutationGroup.from_json(json.dumps(doc["group"]))
    part = column_orbits(group, matrix.rows, matrix.cols)
    solution = symmetric_solution(system, group, caps)
    verdicts = {
        "solvable": solution is not None,
        "solution": None if solution is None else [int(v) for v in solution],
        "columns": matrix.cols,
        "folded_columns": len(part.blocks),
        "orbit_blocks": [list(b) for b in part.blocks],
    }
    _emit("sym-fold", _config(args, infile=args.infile),
          verdicts, time.perf_counter() - start, [])
    return 0


def _cmd_sym_rank(args, caps) -> int:
    start = time.perf_counter()
    try:
        doc = json.loads(_read(args.infile))
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed matrix JSON: {exc}") from None
    matrix = _load_matrix(doc)
    if "blocks" in doc:
        part = OrbitPartition(doc["blocks"], matrix.cols)
    else:
        part = OrbitPartition.singletons(matrix.cols)
    got = rank_via_solvability(matrix, part)
    gauss = rank(matrix)
    if got != gauss:
        raise ConsistencyError(f"solvability rank {got} disagrees with Gaussian rank {gauss}")
    verdicts = {"rank": got, "gaussian_rank": gauss, "blocks": len(part.blocks)}
    _emit("sym-rank", _config(args, infile=args.infile),
          verdicts, time.perf_counter() - start, [])
    return 0


def _cmd_sylow_verify(args, caps) -> int:
    start = time.perf_counter()
    report = signature_suite(args.q, args.r, args.p, args.lmax, args.seed, caps)
    _emit("sylow-verify", _config(args, q=args.q, r=args.r, p=args.p, lmax=args.lmax),
          report, time.perf_counter() - start, [])
    return 0 if report["passed"] else 1


def _cmd_compact(args, caps) -> int:
    start = time.perf_counter()
    alpha = parse_formula(args.alpha, k=args.k, ell=args.l)
    cm = compact_matrix(alpha, args.q, args.r, args.p, args.k, args.l, caps)
    verdicts = {
        "alpha": alpha.to_text(),
        "shape": [len(cm.row_signatures), len(cm.col_signatures)],
        "compact": json.loads(cm.to_json()),
    }
    ok = True
    if args.validate:
        validation = validate_compact(alpha, args.q, args.r, args.p, args.k, args.l, caps)
        verdicts["validation"] = validation
        ok = validation["chain_holds"]
    artifacts = []
    if args.out:
        artifacts.append(_write(args.out, cm.to_json()))
    _emit("compact", _config(args, alpha=args.alpha, q=args.q, r=args.r, p=args.p,
                             k=args.k, l=args.l, validate=args.validate, out=args.out),
          verdicts, time.perf_counter() - start, artifacts)
    return 0 if ok else 1


def _cmd_suite(args, caps) -> int:
    start = time.perf_counter()
    if args.criteria:
        try:
            numbers = [int(x) for x in args.criteria.split(",")]
        except ValueError:
            raise InputError(f"--criteria must be a comma list of numbers, got {args.criteria!r}") from None
    else:
        numbers = None
    outcomes = []
    for outcome in run_suite(args.seed, caps, numbers):
        print(outcome.line(), file=sys.stderr)
        outcomes.append(outcome)
    all_passed = all(o.passed for o in outcomes)
    verdicts = {
        "criteria": [o.to_dict() for o in outcomes],
        "all_passed": all_passed,
    }
    artifacts = []
    if args.out:
        artifacts.append(_write(args.out, json.dumps(verdicts, sort_keys=True)))
    _emit("suite", _config(args, criteria=args.criteria, out=args.out),
          verdicts, time.perf_counter() - start, artifacts)
    return 0 if all_passed else 1


def _cap_overrides(pairs: list[str] | None) -> dict:
    overrides = {}
    for pair in pairs or ():
        name, sep, value = pair.partition("=")
        if not sep or name not in DEFAULTS:
            raise InputError(
                f"--cap takes NAME=VALUE with NAME one of {sorted(DEFAULTS)}, got {pair!r}"
            )
        try:
            overrides[name] = int(value)
        except ValueError:
            raise InputError(f"cap value for {name!r} must be an integer, got {value!r}") from None
    return overrides


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker cap, reserved; current engines run single-process")
    sub.add_argument("--cap", action="append", metavar="NAME=VALUE",
                     help="override a resource cap (repeatable); also via CFIFORGE_CAPS")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfiforge",
        description="Gadget-structure generation, equation-system isomorphism "
                    "decisions, color refinement, and symmetry-reduced linear "
                    "algebra over prime fields.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    def sub(name: str, help_: str, handler) -> argparse.ArgumentParser:
        s = subs.add_parser(name, help=help_)
        s.set_defaults(handler=handler)
        _add_common(s)
        return s

    s = sub("cfi-gen", "build a gadget structure from a base graph", _cmd_cfi_gen)
    s.add_argument("--graph", required=True, help="k4, k5, or a base-graph JSON file")
    s.add_argument("--q", required=True, type=int, help="prime modulus")
    s.add_argument("--d", default="random", help="comma list of gadget values, or 'random'")
    s.add_argument("--out", help="prefix for .instance.json and .structure.json artifacts")

    s = sub("cfi-decide", "decide the class of a structure via its equation system", _cmd_cfi_decide)
    s.add_argument("--in", dest="infile", required=True, help="structure JSON file")

    s = sub("cfi-canon", "canonicalize an instance", _cmd_cfi_canon)
    s.add_argument("--in", dest="infile", required=True, help="instance JSON file")
    s.add_argument("--out", help="prefix for canonical .instance.json / .structure.json")

    s = sub("cfi-iso", "decide isomorphism of two instances, cross-checked", _cmd_cfi_iso)
    s.add_argument("--a", required=True, help="first instance JSON file")
    s.add_argument("--b", required=True, help="second instance JSON file")

    s = sub("wl-run", "jointly refine two structures and compare histograms", _cmd_wl_run)
    s.add_argument("--a", required=True, help="first structure JSON file")
    s.add_argument("--b", required=True, help="second structure JSON file")
    s.add_argument("--k", required=True, type=int, help="tuple width")

    s = sub("sym-fold", "solve a group-stabilized system through column folding", _cmd_sym_fold)
    s.add_argument("--in", dest="infile", required=True,
                   help="JSON file with 'matrix', 'rhs', 'group'")

    s = sub("sym-rank", "rank from span-membership queries, checked against Gauss", _cmd_sym_rank)
    s.add_argument("--in", dest="infile", required=True,
                   help="JSON file with 'matrix' and optional 'blocks'")

    s = sub("sylow-verify", "signature invariance, completeness, and counting suites", _cmd_sylow_verify)
    s.add_argument("--q", required=True, type=int, help="prime branching factor")
    s.add_argument("--r", required=True, type=int, help="tree depth")
    s.add_argument("--p", required=True, type=int, help="counting characteristic, p != q")
    s.add_argument("--lmax", required=True, type=int, help="largest tuple length to check")

    s = sub("compact", "signature-indexed matrix of an equality formula", _cmd_compact)
    s.add_argument("--alpha", required=True, help="equality formula, e.g. \"x1=y1 & x2!=y1\"")
    s.add_argument("--q", required=True, type=int, help="prime branching factor")
    s.add_argument("--r", required=True, type=int, help="tree depth")
    s.add_argument("--p", required=True, type=int, help="field characteristic, p != q")
    s.add_argument("--k", required=True, type=int, help="row tuple length")
    s.add_argument("--l", required=True, type=int, help="column tuple length")
    s.add_argument("--validate", action="store_true",
                   help="also run the brute-force solvability-chain check")
    s.add_argument("--out", help="write the compact matrix JSON to this file")

    s = sub("suite", "run the acceptance battery", _cmd_suite)
    s.add_argument("--criteria", help="comma list of criterion numbers (default: all)")
    s.add_argument("--out", help="write the per-criterion JSON report to this file")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        caps = load_caps(_cap_overrides(args.cap))
        return args.handler(args, caps)
    except CfiforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
