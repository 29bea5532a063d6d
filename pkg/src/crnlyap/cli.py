"""Command-line front end.

Exit codes: 0 certified / pass, 1 refuted / fail, 2 inconclusive or
construction failure, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import linalg
from .checker import full_check, jsonable
from .construct import (
    DEFAULT_ITERATIONS,
    LP_MAX_VARS,
    ConstructionOutcome,
    construct_all,
    construct_iterative,
    construct_lp,
    construct_maxmin,
    construct_maxmin_reversible,
)
from .formats import (
    SCHEMA_VERSION,
    FormatError,
    certificate_document,
    certificate_from_document,
    dumps,
    load_matrix,
    read_json,
    validate,
)
from .necessary import N_CAP, necessary_report
from .network import ParseError, ReactionNetwork, conservation_laws, parse_network, positive_kernel_vector, siphons

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3
SEED = 0


class InputError(Exception):
    pass


def load_network(path: str) -> ReactionNetwork:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return parse_network(text, source=Path(path).name)
    except ParseError as exc:
        where = f"{path}:{exc.line}" + (f":{exc.column}" if exc.column else "") if exc.line else path
        raise InputError(f"{where}: {exc.message}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _emit(doc: dict, target: Optional[str]) -> None:
    text = dumps(doc)
    if target in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(target).write_text(text)


def network_summary(net: ReactionNetwork) -> dict:
    laws = conservation_laws(net.gamma, net.n)
    return {
        "source": net.source,
        "species": list(net.species),
        "n": net.n,
        "nu": net.nu,
        "conservative": laws.conservative,
        "conservation_laws": [linalg.fmt_vector(d) for d in laws.basis],
        "ag2": positive_kernel_vector(net.gamma, net.nu) is not None if net.nu else False,
    }


# --- analyze -----------------------------------------------------------------------

def analyze_network(
    net: ReactionNetwork,
    hhat=None,
    max_iter: int = DEFAULT_ITERATIONS,
    assume_isolated: bool = False,
    n_cap: int = N_CAP,
    lp_max_vars: Optional[int] = LP_MAX_VARS,
    candidates: Sequence = (),
) -> dict:
    """Necessary checks, then supplied candidates and constructions until one passes C1-C4 and C5."""
    summary = network_summary(net)
    necessary = necessary_report(net, n_cap)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "analysis",
        "seed": SEED,
        "flags": {"hhat": None if hhat is None else linalg.fmt_matrix(hhat), "max_iter": max_iter, "assume_isolated": assume_isolated, "n_cap": n_cap, "lp_max_vars": lp_max_vars},
        "network": summary,
        "necessary": necessary,
        "constructions": [],
        "certificate": None,
    }
    if necessary["refuted"]:
        doc["classification"] = {"status": "RefutedPWLR", "reasons": necessary["reasons"]}
        return doc
    if not summary["ag2"]:
        doc["classification"] = {"status": "Inconclusive", "reasons": ["AG2 fails: no strictly positive vector in ker Γ"]}
        return doc
    chosen = None
    for cert in candidates:
        outcome = ConstructionOutcome("supplied")
        outcome.report = full_check(cert, net)
        if outcome.report.decrease_ok:
            outcome.certificate = cert
        doc["constructions"].append(outcome.to_dict())
        if outcome.success and outcome.report.passed:
            chosen = outcome
            break
    for outcome in () if chosen else construct_all(net, hhat, max_iter, lasalle=True, stop_early=True, lp_max_vars=lp_max_vars):
        doc["constructions"].append(outcome.to_dict())
        if outcome.success and outcome.report.passed:
            chosen = outcome
    if chosen is None:
        reasons = ["no candidate or construction produced a certificate satisfying the decrease and LaSalle conditions"]
        doc["classification"] = {"status": "Inconclusive", "reasons": reasons}
        return doc
    doc["certificate"] = certificate_document(chosen.certificate, net, chosen.method)
    global_scope = summary["conservative"] and assume_isolated
    doc["classification"] = {
        "status": "CertifiedStable",
        "scope": "global" if global_scope else "interior",
        "unique_equilibrium": global_scope,
        "reasons": [f"{chosen.method} certificate passes the decrease and LaSalle conditions"],
    }
    validate(doc, "analysis")
    return doc


def _exit_for(status: str) -> int:
    return {"CertifiedStable": EXIT_OK, "RefutedPWLR": EXIT_FAIL}.get(status, EXIT_INCONCLUSIVE)


def cmd_analyze(args) -> int:
    net = load_network(args.file)
    hhat = _load_hhat(args.hhat)
    candidates = [certificate_from_document(_read(path), net) for path in args.certificate or ()]
    doc = analyze_network(net, hhat, args.max_iter, args.assume_isolated, args.n_cap, _budget(args), candidates)
    validate(doc, "analysis")
    cls = doc["classification"]
    if args.json:
        _emit(doc, args.json)
    if args.json != "-":
        print(f"{net.source}: {cls['status']}" + (f" (scope {cls['scope']})" if "scope" in cls else ""))
        for r in cls.get("reasons", []):
            print(f"  {r}")
    return _exit_for(cls["status"])


def _read(path):
    try:
        return read_json(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc


def _budget(args) -> Optional[int]:
    return None if args.lp_max_vars <= 0 else args.lp_max_vars


def _load_hhat(path):
    if not path:
        return None
    try:
        return load_matrix(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc


# --- parse / necessary ------------------------------------------------------------------

def cmd_parse(args) -> int:
    net = load_network(args.file)
    doc = network_summary(net)
    doc["reactions"] = [
        {
            "index": j + 1,
            "reactants": {net.species[i]: c for i, c in r.reactants},
            "products": {net.species[i]: c for i, c in r.products},
            "reverse_of": None if r.reverse_of is None else r.reverse_of + 1,
        }
        for j, r in enumerate(net.reactions)
    ]
    doc["gamma"] = linalg.fmt_matrix(net.gamma)
    doc["siphons"] = [
        {"species": s.names(net), "deadlock": s.is_deadlock, "critical": s.is_critical} for s in siphons(net)
    ]
    _emit(doc, args.json or "-")
    return EXIT_OK


def cmd_necessary(args) -> int:
    net = load_network(args.file)
    rep = necessary_report(net, args.n_cap)
    _emit(jsonable(rep), args.json or "-")
    return EXIT_FAIL if rep["refuted"] else EXIT_OK


# --- construct / check ------------------------------------------------------------------

_METHODS = {
    "maxmin": lambda net, a: construct_maxmin(net),
    "maxmin-rev": lambda net, a: construct_maxmin_reversible(net),
    "lp": lambda net, a: construct_lp(net, _load_hhat(a.hhat), want_convex=not a.general, max_vars=_budget(a)),
    "iter": lambda net, a: construct_iterative(net, max_iter=a.max_iter, sweep=a.sweep),
}


def cmd_construct(args) -> int:
    net = load_network(args.file)
    if args.method == "auto":
        outcomes = list(construct_all(net, _load_hhat(args.hhat), args.max_iter, stop_early=True, lp_max_vars=_budget(args)))
        outcome = next((o for o in outcomes if o.success and o.report.passed), None) or next(
            (o for o in outcomes if o.success), outcomes[-1]
        )
    else:
        outcome = _METHODS[args.method](net, args)
    if outcome.success:
        doc = certificate_document(outcome.certificate, net, outcome.method, outcome.to_dict())
        _emit(doc, args.out or "-")
        if args.out:
            print(f"{outcome.method}: certificate with {len(outcome.certificate.C)} rows written to {args.out}")
        return EXIT_OK
    _emit({"schema_version": SCHEMA_VERSION, "kind": "construction", **outcome.to_dict()}, "-")
    return EXIT_INCONCLUSIVE


def cmd_check(args) -> int:
    net = load_network(args.file)
    doc = _read(args.certificate)
    cert = certificate_from_document(doc, net)
    report = full_check(cert, net, fallback=not args.no_fallback)
    out = {
        "schema_version": SCHEMA_VERSION,
        "kind": "check",
        "passed": report.passed,
        "certificate": certificate_document(cert, net),
        "report": report.to_dict(),
    }
    _emit(out, args.json or "-")
    return EXIT_OK if report.passed else EXIT_FAIL


# --- simulate ---------------------------------------------------------------------------------

def _floats(text: str, name: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"--{name}: expected comma-separated numbers") from exc


def cmd_simulate(args) -> int:
    from . import sim

    net = load_network(args.file)
    x0 = _floats(args.x0, "x0")
    try:
        if args.kinetics == "expr":
            if not args.rates:
                raise InputError("--rates is required with --kinetics expr")
            kin = sim.Tabulated(net, [e.strip() for e in args.rates.split(";")])
        else:
            k = _floats(args.k, "k") if args.k else [1.0] * net.nu
            k = k[0] if len(k) == 1 else k
            if args.kinetics == "mass-action":
                kin = sim.MassAction(net, k)
            elif args.kinetics == "mm":
                kin = sim.MichaelisMenten(net, k, args.a)
            else:
                kin = sim.Hill(net, k, args.a, args.hill_exponent)
        traj = sim.integrate(net, kin, x0, args.t_end, n_samples=args.samples, rtol=args.rtol, atol=args.atol)
    except (sim.KineticsError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    except sim.IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INPUT
    summary = {
        "final_state": dict(zip(net.species, map(float, traj.states[-1]))),
        "steps": traj.steps,
        "rejected_steps": traj.rejected,
        "conservation_drift": sim.conservation_drift(traj),
        "equilibrium_time": sim.equilibrium_time(traj, kin),
    }
    V = None
    code = EXIT_OK
    if args.certificate:
        cert = certificate_from_document(_read(args.certificate), net)
        mon = sim.monitor_certificate(traj, kin, cert)
        V = mon.values
        summary["monitor"] = mon.to_dict()
        code = EXIT_OK if mon.passed else EXIT_FAIL
    if args.out:
        sim.write_csv(args.out, traj, V)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return code


# --- entry point --------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crnlyap", description="PWLR Lyapunov analysis of reaction networks")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("parse", help="parse a .crn file and print its structure")
    sp.add_argument("file")
    sp.add_argument("--json", metavar="PATH")
    sp.set_defaults(fn=cmd_parse)

    sp = sub.add_parser("analyze", help="necessary checks, constructions and verification")
    sp.add_argument("file")
    sp.add_argument("--hhat", metavar="MATRIX", help="extra partition rows (JSON or CSV)")
    sp.add_argument("--max-iter", type=int, default=DEFAULT_ITERATIONS)
    sp.add_argument("--assume-isolated", action="store_true", help="declare that equilibria are isolated")
    sp.add_argument("--n-cap", type=int, default=N_CAP)
    sp.add_argument("--lp-max-vars", type=int, default=LP_MAX_VARS, help="skip larger LPs (0: no limit)")
    sp.add_argument("--certificate", action="append", metavar="JSON", help="candidate to verify before constructing")
    sp.add_argument("--json", metavar="PATH", help="write the JSON report ('-' for stdout)")
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("construct", help="build a certificate with one method")
    sp.add_argument("file")
    sp.add_argument("--method", choices=["auto", *_METHODS], default="auto")
    sp.add_argument("--hhat", metavar="MATRIX")
    sp.add_argument("--max-iter", type=int, default=DEFAULT_ITERATIONS)
    sp.add_argument("--sweep", action="store_true", help="iterative method: augment every row each iteration")
    sp.add_argument("--general", action="store_true", help="lp method: keep the general (H, C) form")
    sp.add_argument("--lp-max-vars", type=int, default=LP_MAX_VARS, help="skip larger LPs (0: no limit)")
    sp.add_argument("--out", metavar="PATH")
    sp.set_defaults(fn=cmd_construct)

    sp = sub.add_parser("check", help="verify a certificate file")
    sp.add_argument("file")
    sp.add_argument("--certificate", required=True)
    sp.add_argument("--no-fallback", action="store_true", help="do not re-analyze critical subnetworks")
    sp.add_argument("--json", metavar="PATH")
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("necessary", help="run the refutation tests")
    sp.add_argument("file")
    sp.add_argument("--n-cap", type=int, default=N_CAP)
    sp.add_argument("--json", metavar="PATH")
    sp.set_defaults(fn=cmd_necessary)

    sp = sub.add_parser("simulate", help="integrate the ODE and monitor a certificate")
    sp.add_argument("file")
    sp.add_argument("--kinetics", choices=["mass-action", "mm", "hill", "expr"], default="mass-action")
    sp.add_argument("--k", help="rate constants, comma separated (one value broadcasts)")
    sp.add_argument("--a", type=float, default=1.0, help="saturation constant")
    sp.add_argument("--hill-exponent", type=float, default=2.0)
    sp.add_argument("--rates", help="';'-separated rate expressions for --kinetics expr")
    sp.add_argument("--x0", required=True)
    sp.add_argument("--t-end", type=float, required=True)
    sp.add_argument("--samples", type=int, default=201)
    sp.add_argument("--rtol", type=float, default=1e-7)
    sp.add_argument("--atol", type=float, default=1e-9)
    sp.add_argument("--certificate")
    sp.add_argument("--out", metavar="CSV")
    sp.set_defaults(fn=cmd_simulate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
