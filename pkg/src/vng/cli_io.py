"""Problem/solution/certificate files, the command-line surface, and CSV reports.

Files are JSON with an explicit schema version; floats are serialized with
full round-trip precision.  Writes are atomic (write to a temporary file in
the target directory, then rename).  The command set is

    vng validate PROBLEM
    vng solve    PROBLEM [--tol --max-iter --seed --objective --out]
    vng certify  PROBLEM SOLUTION [--tol --competitors --seed --out]
    vng compare  PROBLEM STRATEGIES [--certificate --out]

Exit codes: 0 success/certified, 1 verification refuted, 2 parse error,
3 margin too tight, 4 solver not converged, 5 digest mismatch, 6 LP failure.
Verbosity follows the VNG_LOG environment variable (error|warn|info|debug).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .certification import (
    DualPath,
    RapidityCertificate,
    SupermartingaleReport,
    buy_and_hold_path,
    extract_dual,
    fixed_fraction_path,
    growth_dominance,
    sample_competitor_paths,
    supermartingale_check,
    verify_rapid,
)
from .errors import (
    DigestMismatch,
    InfeasibleStart,
    LPFailure,
    MarginTooTight,
    NonConvergence,
    NotCertified,
    ParseError,
    VngError,
)
from .market_model import MarketData, returns_from_prices, slater_path
from .objectives import (
    LinearObjective,
    LiquidationObjective,
    NormPenalizedObjective,
    TerminalObjective,
    log_objective,
)
from .scenario_tree import AdaptedVector, ScenarioTree, build_tree, node_probability
from .solver import (
    KktResiduals,
    PathProblem,
    Solution,
    SolveOptions,
    solve_log_optimal,
)

SCHEMA_VERSION = 1
CERT_TOL_DEFAULT = 1e-6

EXIT_OK = 0
EXIT_REFUTED = 1
EXIT_PARSE = 2
EXIT_MARGIN = 3
EXIT_NONCONVERGENCE = 4
EXIT_DIGEST = 5
EXIT_LP = 6


# --- parsing helpers -------------------------------------------------------------

def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ParseError(f"{where}: missing field {key!r}")
    return section[key]


def _vector(value, m: int, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (m,):
        raise ParseError(f"{where}: expected {m} numbers, got shape {arr.shape}")
    return arr


def _per_node_table(
    spec, tree: ScenarioTree, m: int, where: str, nodes: list
) -> np.ndarray:
    """Scalar, per-asset vector, or {node_id: scalar|vector} to (n_nodes, m)."""
    out = np.zeros((tree.n_nodes, m))
    if isinstance(spec, dict):
        for node in nodes:
            if node.node_id not in spec:
                raise ParseError(f"{where}: node {node.node_id!r}: missing entry")
            val = np.asarray(spec[node.node_id], dtype=float)
            out[node.index] = val if val.shape == (m,) else np.full(m, float(val))
        return out
    val = np.asarray(spec, dtype=float)
    if val.ndim == 0:
        out[:] = float(val)
    elif val.shape == (m,):
        out[:] = val
    else:
        raise ParseError(f"{where}: expected scalar, {m}-vector or per-node map")
    return out


def build_objective(
    tree: ScenarioTree, market: MarketData, section: dict
) -> TerminalObjective:
    variant = _need(section, "variant", "objective").lower()
    if variant == "linear":
        return LinearObjective(tree, market, q=section.get("q"))
    if variant == "liquidation":
        return LiquidationObjective(tree, market)
    if variant == "norm_penalized":
        return NormPenalizedObjective(
            tree,
            market,
            q=section.get("q"),
            theta=section.get("theta", 0.0),
            norm=section.get("norm", "l1"),
            delta=section.get("delta", 0.5),
        )
    raise ParseError(f"objective: unknown variant {variant!r}")


def parse_problem_dict(doc: dict) -> PathProblem:
    """Validate a problem document; errors carry node id and field."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(
            f"unsupported schema_version {doc.get('schema_version')!r}"
        )
    tree_sec = _need(doc, "tree", "problem")
    raw_nodes = []
    for entry in _need(tree_sec, "nodes", "tree"):
        nid = _need(entry, "id", "tree.nodes[]")
        raw_nodes.append((str(nid), entry.get("parent"), float(entry.get("prob", 1.0))))

    market_sec = _need(doc, "market", "problem")
    m = int(_need(market_sec, "assets", "market"))
    try:
        tree = build_tree(raw_nodes, m)
    except MarginTooTight:
        raise
    except VngError as exc:
        raise ParseError(f"tree: {exc}") from exc

    margins_spec = _need(market_sec, "margins", "market")
    margins = np.asarray(margins_spec, dtype=float)
    if margins.ndim == 0:
        margins = np.full(tree.horizon + 1, float(margins))
    if margins.shape != (tree.horizon + 1,):
        raise ParseError(
            f"market.margins: need one value or {tree.horizon + 1} values"
        )

    non_root = [n for n in tree.nodes if n.parent is not None]
    try:
        if "returns" in market_sec:
            returns = np.full((tree.n_nodes, m), np.nan)
            table = market_sec["returns"]
            for node in non_root:
                if node.node_id not in table:
                    raise ParseError(
                        f"market.returns: node {node.node_id!r}: missing entry"
                    )
                returns[node.index] = _vector(
                    table[node.node_id], m, f"market.returns[{node.node_id}]"
                )
        elif "prices" in market_sec:
            prices = np.zeros((tree.n_nodes, m))
            table = market_sec["prices"]
            for node in tree.nodes:
                if node.node_id not in table:
                    raise ParseError(
                        f"market.prices: node {node.node_id!r}: missing entry"
                    )
                prices[node.index] = _vector(
                    table[node.node_id], m, f"market.prices[{node.node_id}]"
                )
            returns = returns_from_prices(tree, prices)
        else:
            raise ParseError("market: need either 'returns' or 'prices'")

        lam_plus = _per_node_table(
            market_sec.get("lambda_plus", 0.0), tree, m, "market.lambda_plus",
            list(tree.nodes),
        )
        lam_minus = _per_node_table(
            market_sec.get("lambda_minus", 0.0), tree, m, "market.lambda_minus",
            list(tree.nodes),
        )
        market = MarketData(
            tree=tree, m=m, returns=returns,
            lam_plus=lam_plus, lam_minus=lam_minus, margins=margins,
        )
        objective = build_objective(tree, market, _need(doc, "objective", "problem"))
        x0 = _vector(
            _need(doc, "initial_portfolio", "problem"), m, "initial_portfolio"
        )
        return PathProblem(tree=tree, market=market, objective=objective, x0=x0)
    except (MarginTooTight, ParseError):
        raise
    except InfeasibleStart as exc:
        raise ParseError(f"initial_portfolio: {exc}") from exc
    except (VngError, ValueError) as exc:
        raise ParseError(str(exc)) from exc


def load_problem(path: str) -> tuple[PathProblem, bytes, dict]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        doc = json.loads(raw.decode("utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    return parse_problem_dict(doc), raw, doc


def solve_options_from(doc: dict, args: argparse.Namespace) -> SolveOptions:
    section = doc.get("solver", {})
    tol = args.tol if getattr(args, "tol", None) is not None else section.get("tol", 1e-8)
    max_iter = (
        args.max_iter if getattr(args, "max_iter", None) is not None
        else section.get("max_iter", 2000)
    )
    seed = args.seed if getattr(args, "seed", None) is not None else section.get("seed", 0)
    return SolveOptions(tol=float(tol), max_iter=int(max_iter), seed=int(seed))


# --- serialization ----------------------------------------------------------------

def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, doc: dict) -> None:
    _atomic_write(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def digest_of(problem_bytes: bytes, options: SolveOptions) -> str:
    opt = json.dumps(
        {"tol": options.tol, "max_iter": options.max_iter, "seed": options.seed},
        sort_keys=True,
    )
    return hashlib.sha256(problem_bytes + b"\x00" + opt.encode()).hexdigest()


def _adapted_to_dict(tree: ScenarioTree, av: AdaptedVector) -> dict:
    level = tree.level(av.storage_depth(tree))
    return {n.node_id: [float(v) for v in av.values[k]] for k, n in enumerate(level)}


def _path_to_dict(tree: ScenarioTree, path: list[AdaptedVector]) -> dict:
    out: dict = {}
    for av in path:
        out.update(_adapted_to_dict(tree, av))
    return out


def _path_from_dict(tree: ScenarioTree, table: dict, m: int) -> list[AdaptedVector]:
    path = []
    for t in range(tree.horizon + 1):
        values = {}
        for node in tree.level(t):
            if node.node_id not in table:
                raise ParseError(f"solution path: missing node {node.node_id!r}")
            values[node.node_id] = _vector(
                table[node.node_id], m, f"path[{node.node_id}]"
            )
        path.append(AdaptedVector.from_dict(tree, t, values))
    return path


def solution_to_doc(
    solution: Solution, digest: str
) -> dict:
    tree_path = solution.path
    r = solution.residuals
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "digest": digest,
        "objective_value": solution.objective_value,
        "converged": solution.converged,
        "iterations": solution.iterations,
        "outer_iterations": solution.outer_iterations,
        "wall_time": solution.wall_time,
        "mu_final": solution.mu_final,
        "residuals": {
            "primal": r.primal,
            "stationarity": r.stationarity,
            "complementarity": r.complementarity,
            "duality_gap": r.duality_gap,
        },
        "options": {
            "tol": solution.options.tol,
            "max_iter": solution.options.max_iter,
            "seed": solution.options.seed,
        },
        "objective_trace": list(solution.objective_trace),
        "path": None,  # filled by caller with node map
        "z": [float(v) for v in solution.z],
        "multipliers": [float(v) for v in solution.multipliers],
    }


def solution_from_doc(doc: dict, problem: PathProblem) -> Solution:
    tree = problem.tree
    m = problem.market.m
    res = doc["residuals"]
    opts = doc["options"]
    return Solution(
        path=_path_from_dict(tree, doc["path"], m),
        objective_value=float(doc["objective_value"]),
        z=np.asarray(doc["z"], dtype=float),
        multipliers=np.asarray(doc["multipliers"], dtype=float),
        residuals=KktResiduals(
            primal=float(res["primal"]),
            stationarity=float(res["stationarity"]),
            complementarity=float(res["complementarity"]),
            duality_gap=float(res["duality_gap"]),
        ),
        iterations=int(doc["iterations"]),
        outer_iterations=int(doc["outer_iterations"]),
        wall_time=float(doc["wall_time"]),
        converged=bool(doc["converged"]),
        objective_trace=[float(v) for v in doc["objective_trace"]],
        mu_final=float(doc["mu_final"]),
        options=SolveOptions(
            tol=float(opts["tol"]), max_iter=int(opts["max_iter"]),
            seed=int(opts["seed"]),
        ),
    )


def certificate_to_doc(
    cert: RapidityCertificate,
    tree: ScenarioTree,
    path: list[AdaptedVector],
    dual: DualPath,
    digest: str,
    wall_time: float,
) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "digest": digest,
        "wall_time": wall_time,
        "verdict": "certified" if cert.certified else "refuted",
        "tolerance": cert.tol,
        "normalization_by_t": list(cert.normalization_by_t),
        "membership_by_node": cert.membership_by_node,
        "transition_by_node": cert.transition_by_node,
        "feasibility_by_node": cert.feasibility_by_node,
        "witness": cert.witness,
        "path": _path_to_dict(tree, path),
        "dual": {
            **{
                str(t): _adapted_to_dict(tree, dual.prices[t])
                for t in sorted(dual.prices)
            },
            "terminal": _adapted_to_dict(tree, dual.terminal),
        },
    }
    if cert.supermartingale is not None:
        s = cert.supermartingale
        doc["supermartingale"] = {
            "first_form": s.first_form,
            "second_form": s.second_form,
            "rapid_equality_gap": s.equality_gap,
        }
    return doc


def dual_from_doc(tree: ScenarioTree, doc: dict, m: int) -> DualPath:
    prices = {}
    for t in range(1, tree.horizon + 1):
        table = doc[str(t)]
        values = {
            node.node_id: _vector(table[node.node_id], m, f"dual[{t}]")
            for node in tree.level(t)
        }
        prices[t] = AdaptedVector.from_dict(tree, t, values)
    table = doc["terminal"]
    values = {
        leaf.node_id: _vector(table[leaf.node_id], m, "dual[terminal]")
        for leaf in tree.leaves()
    }
    terminal = AdaptedVector.from_dict(tree, tree.horizon + 1, values)
    return DualPath(prices=prices, terminal=terminal)


# --- commands ---------------------------------------------------------------------

def cmd_validate(args: argparse.Namespace) -> int:
    problem, _, _ = load_problem(args.problem)
    tree, market = problem.tree, problem.market
    constants = market.constants()
    witness = slater_path(tree, market, constants)
    b = market.bounds()

    print(
        f"validate: schema ok, horizon={tree.horizon} nodes={tree.n_nodes} "
        f"assets={market.m}"
    )
    print("t mu nu slack C1 C2 K H")
    for t in range(tree.horizon + 1):
        c2 = "-" if t == 0 else repr(float(constants.C2[t]))
        k = "-" if t == 0 else repr(float(constants.K[t]))
        print(
            f"{t} {float(market.margins[t])!r} {float(constants.nu[t])!r} "
            f"{float(market.margins[t] - constants.nu[t])!r} "
            f"{float(constants.C1[t])!r} {c2} {k} {float(constants.H[t])!r}"
        )
    print(
        "bounds: R_lo="
        + repr([float(v) for v in b["R_lo"][1:]])
        + " R_hi=" + repr([float(v) for v in b["R_hi"][1:]])
        + " L_lo=" + repr([float(v) for v in b["L_lo"]])
        + " L_hi=" + repr([float(v) for v in b["L_hi"]])
    )
    print(
        "interior path: radii="
        + repr([float(r) for r in witness.radii])
        + " min_psi_slack="
        + repr(float(min(witness.psi_slack[1:])) if tree.horizon >= 1 else 0.0)
    )
    print(f"initial portfolio: interior radius={problem.epsilon0()!r}")
    print("validate: OK")
    return EXIT_OK


def _default_out(problem_path: str, suffix: str) -> str:
    stem = problem_path[:-5] if problem_path.endswith(".json") else problem_path
    return stem + suffix


def cmd_solve(args: argparse.Namespace) -> int:
    problem, raw, doc = load_problem(args.problem)
    if args.objective:
        problem = PathProblem(
            tree=problem.tree,
            market=problem.market,
            objective=build_objective(
                problem.tree, problem.market, {"variant": args.objective}
            ),
            x0=problem.x0,
        )
    options = solve_options_from(doc, args)
    solution = solve_log_optimal(problem, options)
    digest = digest_of(raw, options)
    out = args.out or _default_out(args.problem, ".solution.json")
    sdoc = solution_to_doc(solution, digest)
    sdoc["path"] = _path_to_dict(problem.tree, solution.path)
    write_json(out, sdoc)
    print(
        f"solve: F={solution.objective_value!r} "
        f"iterations={solution.iterations} converged={solution.converged}"
    )
    return EXIT_OK if solution.converged else EXIT_NONCONVERGENCE


def _load_solution(args, problem: PathProblem, raw: bytes) -> tuple[Solution, str]:
    try:
        with open(args.solution, "rb") as fh:
            sdoc = json.loads(fh.read().decode("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read solution {args.solution}: {exc}") from exc
    try:
        opts = sdoc["options"]
        options = SolveOptions(
            tol=float(opts["tol"]), max_iter=int(opts["max_iter"]),
            seed=int(opts["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"solution file: bad options section: {exc}") from exc
    digest = digest_of(raw, options)
    if sdoc.get("digest") != digest:
        raise DigestMismatch(
            "solution file does not match this problem file and options"
        )
    return solution_from_doc(sdoc, problem), digest


def cmd_certify(args: argparse.Namespace) -> int:
    problem, raw, _ = load_problem(args.problem)
    solution, digest = _load_solution(args, problem, raw)
    if not solution.converged:
        raise NonConvergence("solution is flagged non-converged; nothing to certify")

    t0 = time.perf_counter()
    try:
        dual = extract_dual(solution, problem)
    except NotCertified:
        # A tampered file can carry stale residuals; verify the stored data
        # anyway so the refutation names a witness.
        dual = extract_dual(solution, problem, strict=False)
    cert = verify_rapid(
        solution.path, dual, problem.tree, problem.market, tol=args.tol
    )
    if args.competitors > 0 and cert.certified:
        rng = np.random.default_rng(args.seed)
        rapid = supermartingale_check(dual, solution.path, problem.tree)
        worst = SupermartingaleReport(0.0, 0.0, rapid.equality_gap)
        for y in sample_competitor_paths(
            problem.tree, problem.market, rng, problem.x0, args.competitors
        ):
            rep = supermartingale_check(dual, y, problem.tree)
            worst = SupermartingaleReport(
                max(worst.first_form, rep.first_form),
                max(worst.second_form, rep.second_form),
                rapid.equality_gap,
            )
        cert = cert_with_supermartingale(cert, worst)

    out = args.out or _default_out(args.problem, ".certificate.json")
    write_json(
        out,
        certificate_to_doc(
            cert, problem.tree, solution.path, dual, digest,
            time.perf_counter() - t0,
        ),
    )
    print(
        f"certify: {'certified' if cert.certified else 'refuted'} "
        f"normalization={cert.max_normalization!r} "
        f"membership={cert.max_membership!r} "
        f"transition={cert.max_transition!r}"
    )
    return EXIT_OK if cert.certified else EXIT_REFUTED


def cert_with_supermartingale(
    cert: RapidityCertificate, report: SupermartingaleReport
) -> RapidityCertificate:
    return RapidityCertificate(
        tol=cert.tol,
        certified=cert.certified,
        normalization_by_t=cert.normalization_by_t,
        membership_by_node=cert.membership_by_node,
        transition_by_node=cert.transition_by_node,
        feasibility_by_node=cert.feasibility_by_node,
        witness=cert.witness,
        supermartingale=report,
    )


def _strategy_path(
    spec: dict, problem: PathProblem, rapid: list[AdaptedVector]
) -> list[AdaptedVector]:
    kind = _need(spec, "type", "strategy").lower()
    tree, market = problem.tree, problem.market
    if kind == "rapid":
        return rapid
    if kind == "buy_and_hold":
        return buy_and_hold_path(tree, market, problem.x0)
    if kind == "fixed_fraction":
        weights = _vector(
            _need(spec, "weights", "strategy"), market.m, "strategy.weights"
        )
        return fixed_fraction_path(tree, market, problem.x0, weights)
    if kind == "path":
        return _path_from_dict(tree, _need(spec, "values", "strategy"), market.m)
    raise ParseError(f"strategy: unknown type {kind!r}")


def cmd_compare(args: argparse.Namespace) -> int:
    problem, raw, doc = load_problem(args.problem)
    try:
        with open(args.strategies, "rb") as fh:
            strat_doc = json.loads(fh.read().decode("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read strategies {args.strategies}: {exc}") from exc
    strategies = strat_doc.get("strategies", [])

    options = solve_options_from(doc, args)
    if args.certificate:
        try:
            with open(args.certificate, "rb") as fh:
                cdoc = json.loads(fh.read().decode("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(
                f"cannot read certificate {args.certificate}: {exc}"
            ) from exc
        if cdoc.get("digest") != digest_of(raw, options):
            raise DigestMismatch("certificate does not match this problem file")
        if cdoc.get("verdict") != "certified":
            print("compare: stored certificate is refuted")
            return EXIT_REFUTED
        rapid = _path_from_dict(problem.tree, cdoc["path"], problem.market.m)
        dual = dual_from_doc(problem.tree, cdoc["dual"], problem.market.m)
    else:
        solution = solve_log_optimal(problem, options)
        if not solution.converged:
            raise NonConvergence("compare: solve did not converge")
        dual = extract_dual(solution, problem)
        cert = verify_rapid(
            solution.path, dual, problem.tree, problem.market, tol=CERT_TOL_DEFAULT
        )
        if not cert.certified:
            print("compare: rapidity certificate refuted; no benchmark available")
            return EXIT_REFUTED
        rapid = solution.path

    out = args.out or _default_out(args.problem, ".compare.csv")
    rows = []
    for spec in strategies:
        sid = str(_need(spec, "id", "strategy"))
        y = _strategy_path(spec, problem, rapid)
        entries = growth_dominance(dual, rapid, y, problem.tree, on_nonpositive="mark")
        f_val = log_objective(problem.tree, problem.objective, y[-1])
        for t in range(1, problem.tree.horizon + 1):
            level = [e for e in entries if e.t == t]
            ratios = np.array([e.ratio for e in level])
            probs = np.array(
                [node_probability(problem.tree, e.node_id) for e in level]
            )
            cond = probs / probs.sum()
            rows.append(
                (
                    sid,
                    t,
                    len(level),
                    float(ratios.max()) if len(ratios) else float("nan"),
                    float(cond @ ratios) if len(ratios) else float("nan"),
                    f_val,
                )
            )

    payload_lines = ["strategy_id,t,node_count,max_conditional_growth,mean_growth,F_value"]
    for row in rows:
        payload_lines.append(",".join(str(v) for v in row))
    _atomic_write(out, "\n".join(payload_lines) + "\n")
    print(f"compare: strategies={len(strategies)} rows={len(rows)} out={out}")
    return EXIT_OK


# --- entry point ------------------------------------------------------------------

def _configure_logging() -> None:
    level = os.environ.get("VNG_LOG", "warn").lower()
    mapping = {
        "error": logging.ERROR,
        "warn": logging.WARNING,
        "warning": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }
    logging.basicConfig(
        level=mapping.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vng",
        description=(
            "Solve for growth-optimal investment paths on scenario trees and "
            "certify them with dual price paths."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a problem file and print constants")
    p.add_argument("problem")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve the log-optimal path problem")
    p.add_argument("problem")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--objective", default=None,
                   help="override the file's objective variant")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="verify a solution with a dual price path")
    p.add_argument("problem")
    p.add_argument("solution")
    p.add_argument("--tol", type=float, default=CERT_TOL_DEFAULT)
    p.add_argument("--competitors", type=int, default=50,
                   help="sampled competitor paths for the supermartingale report")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("compare", help="growth tables of strategies vs the benchmark")
    p.add_argument("problem")
    p.add_argument("strategies")
    p.add_argument("--certificate", default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except MarginTooTight as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MARGIN
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except DigestMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIGEST
    except LPFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LP


if __name__ == "__main__":
    sys.exit(main())
