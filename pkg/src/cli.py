"""
Command-line entry point for trace-posets

Every subcommand builds a JSON body the way a request handler would: the
command's result on success, or {"message", "error": {"type", "message"}}
on failure. The body goes to stdout, structured logs go to stderr.

Exit codes:
    0  success (exact result, or a verification that passed)
    2  budget exhausted: lower bound only, or timeout
    1  usage, capability, schema or integrity error, or a failed verification
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src import __version__, embedding
from src.catalog import Catalog, catalog_merge, entry_from_result
from src.certificates import probe_butterfly_codim1, probe_level_trace, verify_catalog
from src.chains import diamond_audit, falsify_bipartite_bound, is_antichain, lubell, lym_check, \
    mirsky_antichain, symmetric_chain_decomposition
from src.configuration import Configuration
from src.constructions import CONSTRUCTIONS, PREDICATES, run_construction
from src.core_sets import Family
from src.downsets import arrow, arrow_upper_bound, sauer_arrow_suite, solve_la_closed
from src.errors import BudgetExhausted, SchemaError, TracePosetError, UncertifiedError, UsageError
from src.logger import Logger
from src.models import ExtremalResult, SearchBudget
from src.posets import Poset, param_e, param_x_limit, param_y, parse_poset
from src.search import ExtremalSearch, sandwich_report, unique_max_trace_value

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2

SOLVE_KINDS = ("la", "la_d", "la_u", "tr", "tr_l")
CONJECTURE_ALIASES = {"1.5": "level-trace"}


def _int_range(text: str) -> List[int]:
    """"3..6" -> [3, 4, 5, 6]; "3,5" -> [3, 5]."""
    try:
        if ".." in text:
            low, high = text.split("..", 1)
            return list(range(int(low), int(high) + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range like 3..6 or a list like 3,5, got {text!r}")


def _caps(text: str) -> Dict[int, int]:
    """"3=6,4=7" -> {3: 6, 4: 7}."""
    try:
        return {int(k): int(v) for k, v in (item.split("=", 1) for item in text.split(","))}
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected caps like 3=6,4=7, got {text!r}")


def _conjecture(text: str) -> str:
    return CONJECTURE_ALIASES.get(text, text)


def _read_family(path: str) -> Family:
    try:
        return Family.from_json(json.loads(Path(path).read_text()))
    except FileNotFoundError:
        raise UsageError(f"family file {path} does not exist")
    except json.JSONDecodeError as e:
        raise SchemaError(f"family file {path} is not valid JSON: {e}")


def _read_poset(text: str) -> Poset:
    """A poset argument, or a path to a poset JSON file."""
    path = Path(text)
    if text.endswith(".json") and path.exists():
        return parse_poset(path.read_text())
    return parse_poset(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trace-posets", description="Forbidden subposets in traces of set families")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--workers", type=int, help="worker processes (overrides TRACEPOSET_WORKERS)")
    parser.add_argument("--time-limit", type=float, help="seconds per solve (overrides TRACEPOSET_TIME_LIMIT)")
    parser.add_argument("--node-limit", type=int, help="node budget (overrides TRACEPOSET_NODE_LIMIT)")
    parser.add_argument("--symmetry", choices=("exact", "heuristic", "off"), help="isomorph rejection mode")
    parser.add_argument("--seed", type=int, help="seed for randomized checks (overrides TRACEPOSET_SEED)")
    parser.add_argument("--catalog", help="catalog file (overrides TRACEPOSET_CATALOG)")
    parser.add_argument("--format", choices=("json", "table"), default="json")
    parser.add_argument("--log-level", help="overrides TRACEPOSET_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="exact extremal value with witness")
    solve.add_argument("--kind", choices=SOLVE_KINDS, required=True)
    solve.add_argument("--poset", required=True, help='name, "k_rs:r=2,s=3", inline JSON or a .json file')
    solve.add_argument("--n", type=int, required=True)
    solve.add_argument("--l", type=int, help="trace size for --kind tr_l")
    solve.add_argument("--unique-max", action="store_true", help="use the unique-maximum identity for --kind tr")
    solve.add_argument("--confirm", action="store_true", help="re-verify the upper bound with a shuffled order")
    solve.add_argument("--no-store", action="store_true", help="do not write the result to the catalog")

    arrow_cmd = sub.add_parser("arrow", help="decide (n,m) -> (k,l), or bound Tr by arrows")
    arrow_cmd.add_argument("--n", type=int, required=True)
    arrow_cmd.add_argument("--m", type=int)
    arrow_cmd.add_argument("--k", type=int)
    arrow_cmd.add_argument("--l", type=int)
    arrow_cmd.add_argument("--method", choices=("auto", "enumeration"), default="auto")
    arrow_cmd.add_argument("--sauer-suite", action="store_true", help="run the Sauer threshold suite at (n, k)")
    arrow_cmd.add_argument("--bound-poset", help="bound Tr(n, P) from small-k caps instead")
    arrow_cmd.add_argument("--ks", type=_int_range, default=None, help="k values for --bound-poset, e.g. 3..5")
    arrow_cmd.add_argument("--caps", type=_caps, default=None, help="known caps, e.g. 3=6,4=7,5=8")
    arrow_cmd.add_argument("--use", choices=("tr", "la"), default="tr")

    construct = sub.add_parser("construct", help="build and verify a lower-bound construction")
    construct.add_argument("--name", choices=sorted(CONSTRUCTIONS), required=True)
    construct.add_argument("--n", type=int, required=True)
    construct.add_argument("--m", type=int)
    construct.add_argument("--s", type=int)
    construct.add_argument("--j", type=int)
    construct.add_argument("--k", type=int)
    construct.add_argument("--verify", choices=PREDICATES, help="override the construction's own predicate")
    construct.add_argument("--poset", help="poset for --verify")
    construct.add_argument("--l", type=int, help="trace size for --verify l_trace_p_free")

    chains = sub.add_parser("chains", help="chain decompositions and chain-graph audits")
    chains.add_argument("action", choices=("scd", "lubell", "mirsky", "diamond-audit", "falsify"))
    chains.add_argument("--n", type=int)
    chains.add_argument("--family", help="family JSON file")
    chains.add_argument("--s", type=int, help="chain-length cap for mirsky")
    chains.add_argument("--trials", type=int, default=1000)
    chains.add_argument("--max-vertices", type=int, default=25)

    embed = sub.add_parser("embed", help="look for a copy of P in a family or in its traces")
    embed.add_argument("--family", required=True)
    embed.add_argument("--poset", required=True)
    embed.add_argument("--l", type=int, help="check traces on l-sets")
    embed.add_argument("--trace", action="store_true", help="check traces on every l")

    params = sub.add_parser("params", help="poset parameters x, y, e and the sandwich at one n")
    params.add_argument("--poset", required=True)
    params.add_argument("--n-range", type=_int_range, default=[3, 4, 5, 6])
    params.add_argument("--sandwich-n", type=int, help="also evaluate the sandwich chain at this n")

    catalog = sub.add_parser("catalog", help="inspect, merge and verify the results catalog")
    catalog.add_argument("action", choices=("show", "merge", "verify"))
    catalog.add_argument("others", nargs="*", help="catalog files to merge into --catalog")

    probe = sub.add_parser("probe", help="finite data points for the level-trace conjectures")
    probe.add_argument("--conjecture", type=_conjecture, choices=("level-trace", "butterfly-codim1"), required=True,
                       help="level-trace (alias 1.5) or butterfly-codim1")
    probe.add_argument("--poset", default="butterfly")
    probe.add_argument("--n", type=_int_range, required=True)
    probe.add_argument("--k", type=int, default=1)
    return parser


def _budget(args: argparse.Namespace, config: Configuration) -> SearchBudget:
    return SearchBudget(
        time_limit=args.time_limit or config.time_limit,
        node_limit=args.node_limit or config.node_limit,
        workers=args.workers or config.workers,
        symmetry=args.symmetry or config.symmetry,
    )


def _result_exit(result: ExtremalResult) -> int:
    return EXIT_OK if result.is_exact else EXIT_BUDGET


class CommandRunner:
    """
    Runs one parsed command.

    Each handler returns (exit_code, body); only `solve` and `catalog merge`
    write to the catalog.
    """

    def __init__(self, args: argparse.Namespace, config: Configuration, logger: Logger):
        self.args = args
        self.config = config
        self.logger = logger
        self.budget = _budget(args, config)
        self.seed = args.seed if args.seed is not None else config.seed
        self.catalog = Catalog(args.catalog or config.catalog_path, logger,
                               lock_retries=config.lock_retries, lock_base_delay=config.lock_base_delay)

    def run(self) -> Tuple[int, Dict[str, Any]]:
        handler = getattr(self, f"cmd_{self.args.command}")
        return handler()

    def _store(self, result: ExtremalResult, P: Poset) -> Optional[str]:
        if self.args.no_store or result.witness is None:
            return None
        stored = self.catalog.put(entry_from_result(result, extra_method={"poset": P.to_json()}), result.witness)
        return stored.witness_ref

    def cmd_solve(self) -> Tuple[int, Dict[str, Any]]:
        args = self.args
        P = _read_poset(args.poset)
        if args.kind == "tr_l" and args.l is None:
            raise UsageError("--kind tr_l needs --l")
        if args.kind in ("la_d", "la_u"):
            result = solve_la_closed(args.n, P, "down" if args.kind == "la_d" else "up")
        elif args.kind == "tr" and args.unique_max:
            result = unique_max_trace_value(args.n, P)
        else:
            search = ExtremalSearch(self.budget, self.logger)
            if args.kind == "la":
                result = search.solve_la(args.n, P)
            elif args.kind == "tr":
                result = search.solve_tr(args.n, P)
            else:
                result = search.solve_tr_l(args.n, args.l, P)
            if args.confirm and result.is_exact:
                search.confirm_upper_bound(args.kind, args.n, P, result.value, seed=self.seed, l=args.l)
                result.bounds["confirmed_seed"] = self.seed
        body = result.to_dict()
        body["witness_ref"] = self._store(result, P)
        return _result_exit(result), body

    def cmd_arrow(self) -> Tuple[int, Dict[str, Any]]:
        args = self.args
        if args.bound_poset:
            P = _read_poset(args.bound_poset)
            ks = args.ks or [3, 4, 5]
            report = arrow_upper_bound(args.n, P, ks, use=args.use, caps=args.caps,
                                       budget=self.budget, logger=self.logger)
            return EXIT_OK, report.to_dict()
        if args.sauer_suite:
            if args.k is None:
                raise UsageError("--sauer-suite needs --k")
            passed = sauer_arrow_suite(args.n, args.k)
            return (EXIT_OK if passed else EXIT_ERROR), {"n": args.n, "k": args.k, "passed": passed}
        missing = [name for name in ("m", "k", "l") if getattr(args, name) is None]
        if missing:
            raise UsageError(f"arrow needs --{', --'.join(missing)}")
        result = arrow(args.n, args.m, args.k, args.l, budget=self.budget, method=args.method, logger=self.logger)
        return EXIT_OK, result.to_dict()

    def cmd_construct(self) -> Tuple[int, Dict[str, Any]]:
        args = self.args
        params = {"n": args.n, "m": args.m, "s": args.s, "j": args.j, "k": args.k}
        poset = _read_poset(args.poset) if args.poset else None
        if args.verify and poset is None:
            raise UsageError("--verify needs --poset")
        report = run_construction(args.name, params, predicate=args.verify, poset=poset, l=args.l)
        return (EXIT_OK if report.passed else EXIT_ERROR), report.to_dict()

    def cmd_chains(self) -> Tuple[int, Dict[str, Any]]:
        args = self.args
        if args.action == "scd":
            if args.n is None:
                raise UsageError("chains scd needs --n")
            decomposition = symmetric_chain_decomposition(args.n)
            failures = decomposition.failures()
            body = decomposition.to_json()
            body["failures"] = failures
            return (EXIT_OK if not failures else EXIT_ERROR), body
        if args.action == "falsify":
            report = falsify_bipartite_bound(args.trials, max_vertices=args.max_vertices, seed=self.seed,
                                             logger=self.logger)
            return EXIT_OK, report.to_dict()
        if not args.family:
            raise UsageError(f"chains {args.action} needs --family")
        fam = _read_family(args.family)
        if args.action == "lubell":
            value = lubell(fam)
            return EXIT_OK, {"n": fam.n, "lubell": str(value), "lubell_float": float(value),
                             "antichain": is_antichain(fam), "lym_holds": lym_check(fam)}
        if args.action == "mirsky":
            if args.s is None:
                raise UsageError("chains mirsky needs --s")
            return EXIT_OK, {"antichain": mirsky_antichain(fam, args.s).to_json()}
        audit = diamond_audit(fam)
        return (EXIT_OK if audit.passed else EXIT_ERROR), audit.to_dict()

    def cmd_embed(self) -> Tuple[int, Dict[str, Any]]:
        args = self.args
        fam = _read_family(args.family)
        P = _read_poset(args.poset)
        body: Dict[str, Any] = {"n": fam.n, "poset": P.label()}
        if args.l is not None:
            found = embedding.find_l_trace_violation(fam, P, args.l)
            body.update({"l": args.l, "free": found is None, "violation": found.to_json() if found else None})
        elif args.trace:
            found = embedding.find_trace_violation(fam, P)
            body.update({"trace": True, "free": found is None, "violation": found.to_json() if found else None})
        else:
            copy = embedding.find_copy(fam, P)
            body.update({"free": copy is None, "witness": copy.to_json() if copy else None})
        return EXIT_OK, body

    def cmd_params(self) -> Tuple[int, Dict[str, Any]]:
        args = self.args
        P = _read_poset(args.poset)
        body: Dict[str, Any] = {"poset": P.label(), "x": param_x_limit(P, args.n_range).to_dict()}
        try:
            body["y"] = param_y(P)
        except UncertifiedError as e:
            body["y"] = {"uncertified": str(e), "lower_bound": e.lower_bound}
        try:
            body["e"] = param_e(P, range(-1, max(args.n_range)), args.n_range).to_dict()
        except UncertifiedError as e:
            body["e"] = {"uncertified": str(e), "lower_bound": e.lower_bound}
        if args.sandwich_n is not None:
            report = sandwich_report(args.sandwich_n, P, self.budget, self.logger)
            body["sandwich"] = report.to_dict()
            if not report.exact:
                return EXIT_BUDGET, body
            if not report.holds:
                return EXIT_ERROR, body
        return EXIT_OK, body

    def cmd_catalog(self) -> Tuple[int, Dict[str, Any]]:
        args = self.args
        if args.action == "show":
            return EXIT_OK, {"catalog": str(self.catalog.path),
                             "entries": [e.to_dict() for e in self.catalog.entries()]}
        if args.action == "merge":
            if not args.others:
                raise UsageError("catalog merge needs at least one other catalog file")
            for other in args.others:
                catalog_merge(self.catalog.path, other, self.catalog.path, self.logger)
            return EXIT_OK, {"catalog": str(self.catalog.path), "entries": len(self.catalog.entries())}
        results = verify_catalog(self.catalog, self.logger)
        body = {
            "catalog": str(self.catalog.path),
            "passed": all(report.passed for _, report in results),
            "entries": [dict(entry.to_dict(), verification=report.to_dict()) for entry, report in results],
        }
        return (EXIT_OK if body["passed"] else EXIT_ERROR), body

    def cmd_probe(self) -> Tuple[int, Dict[str, Any]]:
        args = self.args
        if args.conjecture == "butterfly-codim1":
            reports = probe_butterfly_codim1(args.n, self.budget, self.logger)
        else:
            P = _read_poset(args.poset)
            reports = [probe_level_trace(P, n, args.k, self.budget, self.logger) for n in args.n]
        exact = all(r.status == "exact" for r in reports)
        return (EXIT_OK if exact else EXIT_BUDGET), {"conjecture": args.conjecture,
                                                     "points": [r.to_dict() for r in reports]}


def render_table(body: Dict[str, Any]) -> str:
    """Top-level fields one per line; nested values stay JSON."""
    width = max((len(k) for k in body), default=0)
    lines = []
    for key, value in body.items():
        shown = value if isinstance(value, (str, int, float)) and not isinstance(value, bool) else json.dumps(value)
        lines.append(f"{key.ljust(width)}  {shown}")
    return "\n".join(lines)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run the command and print its body.

    Returns:
        Process exit code (see module docstring)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_ERROR

    logger = None
    fmt = args.format
    try:
        config = Configuration.load()
        logger = Logger(level=args.log_level or config.log_level)
        logger.info("Starting command", command=args.command,
                    arguments={k: v for k, v in vars(args).items() if k != "command"})
        code, body = CommandRunner(args, config, logger).run()
        logger.info("Command completed", command=args.command, exit_code=code)
    except BudgetExhausted as e:
        code, body = EXIT_BUDGET, {"message": "Budget exhausted", "error": {"type": type(e).__name__,
                                                                           "message": str(e)}}
        if logger:
            logger.warning("Budget exhausted", command=args.command, error_message=str(e))
    except (TracePosetError, ValueError) as e:
        code, body = EXIT_ERROR, {"message": f"{args.command} failed",
                                  "error": {"type": type(e).__name__, "message": str(e)}}
        if logger:
            logger.error("Command failed", command=args.command, error_type=type(e).__name__,
                         error_message=str(e))

    print(render_table(body) if fmt == "table" else json.dumps(body, indent=2, default=str))
    return code


if __name__ == "__main__":
    sys.exit(main())
