"""Command-line front end.

Every subcommand writes one JSON document to stdout. Exit codes:

    0  success / POVM verified / solver converged
    1  malformed input or usage error
    2  verification failed
    3  certificate precondition failed
    4  solver hit a residual floor
    5  solver stopped at the iteration limit
"""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import bounds, catalog, simulate, solver, verification
from .interchange import DocumentError, dumps, povm_from_dict, povm_loads, povm_to_dict

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VERIFY_FAIL = 2
EXIT_PRECONDITION = 3
EXIT_FLOOR = 4
EXIT_ITERATION_LIMIT = 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_povm(path: str):
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror}") from None
    return povm_loads(text)


def _emit(doc) -> None:
    sys.stdout.write(dumps(doc) + "\n")


def cmd_catalog(args) -> int:
    entry = catalog.catalog_get(args.copies)
    doc = povm_to_dict(entry.povm, entry.label)
    doc["provenance"] = entry.provenance
    _emit(doc)
    return EXIT_OK


def cmd_verify(args) -> int:
    povm, _ = _read_povm(args.input)
    report = verification.verify(povm, args.tol)
    _emit(report.to_dict())
    return EXIT_OK if report.passed else EXIT_VERIFY_FAIL


def cmd_nmin(args) -> int:
    cb = bounds.n_min(args.copies)
    doc = cb.to_dict()
    doc["unknowns_at_n_min"] = bounds.unknowns(cb.n_min)
    doc["equations"] = bounds.equations(args.copies)
    _emit(doc)
    return EXIT_OK


def cmd_certify(args) -> int:
    povm, _ = _read_povm(args.input)
    try:
        cert = bounds.certify(povm, args.ansatz, args.moment_tol, args.degree,
                              True if args.linear_factor else None)
    except bounds.CertificatePreconditionError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PRECONDITION
    doc = cert.to_dict()
    doc["moment_tolerance"] = args.moment_tol
    _emit(doc)
    return EXIT_OK


def _config(args, outcomes: int) -> solver.SolverConfig:
    return solver.SolverConfig(
        copies=args.copies, outcomes=outcomes, seed=args.seed, restarts=args.restarts,
        max_iterations=args.max_iterations, tolerance=args.tol,
        antipodal_mode=args.antipodal and outcomes % 2 == 0,
    )


def cmd_solve(args) -> int:
    result = solver.solve(_config(args, args.outcomes))
    doc = result.to_dict()
    doc["povm"] = povm_to_dict(result.povm)
    _emit(doc)
    return {solver.CONVERGED: EXIT_OK, solver.RESIDUAL_FLOOR: EXIT_FLOOR}.get(result.status, EXIT_ITERATION_LIMIT)


def cmd_scan(args) -> int:
    template = _config(args, max(args.n_from, 2))
    report = solver.feasibility_scan(args.copies, args.n_from, args.n_to, template)
    doc = report.to_dict()
    doc["config"] = {"seed": args.seed, "restarts": args.restarts,
                     "max_iterations": args.max_iterations, "tolerance": args.tol,
                     "antipodal_mode": args.antipodal}
    _emit(doc)
    return EXIT_OK


def cmd_fidelity(args) -> int:
    povm, _ = _read_povm(args.input)
    method = "closed_form" if args.method == "closed" else args.method
    value = verification.mean_fidelity(povm, method)
    _emit({"copies": povm.copies, "method": method, "mean_fidelity": value,
           "optimal": verification.optimal_fidelity(povm.copies),
           "shannon_gain_bits": verification.shannon_gain(povm.copies)})
    return EXIT_OK


def cmd_simulate(args) -> int:
    povm, _ = _read_povm(args.input)
    report = verification.verify(povm, args.tol)
    if not report.passed:
        sys.stderr.write("error: POVM does not resolve the identity; Born probabilities are not normalised\n")
        return EXIT_VERIFY_FAIL
    result = simulate.run(simulate.SimulationConfig(povm, args.trials, args.seed))
    doc = result.to_dict()
    doc["expected"] = verification.optimal_fidelity(povm.copies)
    _emit(doc)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="povm-forge", description="Minimal optimal qubit POVMs: catalog, checks, bounds and search.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("catalog", help="emit a tabulated minimal POVM")
    s.add_argument("--copies", type=int, required=True)
    s.set_defaults(func=cmd_catalog)

    s = sub.add_parser("verify", help="check optimality in every formulation")
    s.add_argument("--input", required=True, help="POVM document, or - for stdin")
    s.add_argument("--tol", type=float, default=verification.DEFAULT_TOL)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("nmin", help="conjectured minimal number of outcomes")
    s.add_argument("--copies", type=int, required=True)
    s.set_defaults(func=cmd_nmin)

    s = sub.add_parser("certify", help="lower-bound certificate for a POVM")
    s.add_argument("--input", required=True)
    s.add_argument("--ansatz", default="auto",
                   choices=["auto", "quadratic", "quadratic_with_linear_factor", "quartic",
                            "quartic_with_linear_factor", "generic", "cubic_generic"])
    s.add_argument("--degree", type=int, default=None, help="polynomial degree for generic ansatz")
    s.add_argument("--linear-factor", action="store_true", help="include the (1 + t) factor (generic)")
    s.add_argument("--moment-tol", type=float, default=bounds.MOMENT_TOL)
    s.set_defaults(func=cmd_certify)

    for name, helptext in (("solve", "search for a POVM with a given number of outcomes"),
                           ("scan", "solve over a range of outcome counts")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--copies", type=int, required=True)
        if name == "solve":
            s.add_argument("--outcomes", type=int, required=True)
        else:
            s.add_argument("--from", dest="n_from", type=int, required=True)
            s.add_argument("--to", dest="n_to", type=int, required=True)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--restarts", type=int, default=32)
        s.add_argument("--max-iterations", type=int, default=400)
        s.add_argument("--tol", type=float, default=1e-10)
        s.add_argument("--antipodal", action="store_true", help="antipodal equal-weight pairs")
        s.set_defaults(func=cmd_solve if name == "solve" else cmd_scan)

    s = sub.add_parser("fidelity", help="mean fidelity of a POVM")
    s.add_argument("--input", required=True)
    s.add_argument("--method", default="quadrature", choices=["quadrature", "closed", "normalized"])
    s.set_defaults(func=cmd_fidelity)

    s = sub.add_parser("simulate", help="Monte Carlo estimate of the mean fidelity")
    s.add_argument("--input", required=True)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=verification.DEFAULT_TOL)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        # --help
        return int(exc.code or 0)
    except (UsageError, DocumentError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"error: {msg}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
