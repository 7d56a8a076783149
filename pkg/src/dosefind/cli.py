"""Command-line frontend: validate, tabulate, simulate, conduct, select, serve.

Complex inputs (designs, plans, trial states) travel as JSON files so runs can
be checked into a protocol repository and reproduced; flags carry only
scalars. Exit codes: 0 success, 2 validation failure, 3 runtime failure.
Human-readable text goes to stderr, machine artifacts to stdout or files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .core import (PriorSpec, TrialSettings, TrialState, ValidationError,
                   validate_settings)
from .conduct import apply_cohort, select_mtd
from .priors import moment_match, calibrate_sigma
from .crm import DEFAULT_NONINFORMATIVE_SIGMA2
from . import boin, keyboard, service
from .simulate import (SimulationPlan, run_simulation, write_oc_csv,
                       write_summary_csv, write_trials_jsonl)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _fail_validation(msg) -> int:
    print(f"validation error: {msg}", file=sys.stderr)
    return EXIT_VALIDATION


def _load_design_file(path: str):
    payload = json.loads(Path(path).read_text())
    settings = TrialSettings.from_json_dict(payload["settings"])
    prior = PriorSpec.from_json_dict(payload["prior"])
    settings, prior, j_star = validate_settings(settings, prior)
    return payload, settings, prior, j_star


def cmd_validate(args) -> int:
    try:
        payload, settings, prior, j_star = _load_design_file(args.design)
    except ValidationError as e:
        for msg in e.errors:
            print(f"invalid: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, KeyError, ValueError) as e:
        return _fail_validation(e)
    print(json.dumps({"valid": True, "phi1": settings.phi1,
                      "phi2": settings.phi2, "prior_mtd": j_star}))
    return EXIT_OK


def cmd_priors(args) -> int:
    """Diagnostic table of the induced beta prior per dose."""
    try:
        payload, settings, prior, j_star = _load_design_file(args.design)
        target_pess = prior.pess[j_star - 1]
        if args.sigma2 is not None:
            sigma2 = args.sigma2
        elif target_pess > 1:
            sigma2 = calibrate_sigma(prior.skeleton, j_star, target_pess)
        else:
            sigma2 = DEFAULT_NONINFORMATIVE_SIGMA2
    except ValidationError as e:
        return _fail_validation("; ".join(e.errors))
    except (OSError, KeyError, ValueError) as e:
        return _fail_validation(e)
    print(f"# sigma^2 = {sigma2:.6f}", file=sys.stderr)
    print("dose,q,mu,tau2,a,b,pess")
    for j, q in enumerate(prior.skeleton, start=1):
        m = moment_match(q, sigma2)
        print(f"{j},{q},{m.mu:.6f},{m.tau2:.6f},{m.a:.6f},{m.b:.6f},{m.pess:.4f}")
    return EXIT_OK


def cmd_table(args) -> int:
    try:
        payload, settings, prior, _ = _load_design_file(args.design)
    except ValidationError as e:
        return _fail_validation("; ".join(e.errors))
    except (OSError, KeyError, ValueError) as e:
        return _fail_validation(e)
    method = payload.get("design", {}).get("method", "boin")
    if method == "crm":
        return _fail_validation("CRM designs have no pre-tabulated decision table")
    try:
        if method == "boin":
            table = boin.decision_table(settings, prior)
        elif method == "keyboard":
            table = keyboard.keyboard_decision_table(settings, prior)
        else:
            return _fail_validation(f"unknown design method {method!r}")
    except (ValueError, RuntimeError) as e:
        print(f"table construction failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    for note in table.notes:
        print(f"note: {note}", file=sys.stderr)
    text = table.to_csv() if args.format == "csv" else \
        json.dumps(table.to_json_dict(), indent=1)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        plan_dict = json.loads(Path(args.plan).read_text())
        plan_dict["master_seed"] = args.seed
        plan = SimulationPlan.from_json_dict(plan_dict)
    except ValidationError as e:
        return _fail_validation("; ".join(e.errors))
    except (OSError, KeyError, ValueError) as e:
        return _fail_validation(e)

    def progress(done, total):
        print(f"\rscenario {done}/{total}", end="", file=sys.stderr)
        if done == total:
            print(file=sys.stderr)

    try:
        result = run_simulation(plan, workers=args.workers,
                                emit_trials=args.emit_trials,
                                progress=progress)
    except Exception as e:
        print(f"simulation failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "oc_summary.csv").write_text(write_oc_csv(result))
    (out / "oc_means.csv").write_text(write_summary_csv(result))
    (out / "results.json").write_text(json.dumps(result.to_json_dict()))
    if args.emit_trials:
        (out / "trials.jsonl").write_text(write_trials_jsonl(result))
    print(f"wrote {out}/oc_summary.csv, oc_means.csv, results.json"
          + (", trials.jsonl" if args.emit_trials else ""), file=sys.stderr)
    return EXIT_OK


def _load_trial_file(path: str):
    payload = json.loads(Path(path).read_text())
    settings = TrialSettings.from_json_dict(payload["settings"])
    prior = PriorSpec.from_json_dict(payload["prior"])
    settings, prior, _ = validate_settings(settings, prior)
    state = TrialState.from_json_dict(payload["state"])
    return payload, settings, prior, state


def cmd_conduct(args) -> int:
    if args.init:
        try:
            payload, settings, prior, _ = _load_design_file(args.init)
        except ValidationError as e:
            return _fail_validation("; ".join(e.errors))
        except (OSError, KeyError, ValueError) as e:
            return _fail_validation(e)
        state = TrialState.fresh(settings)
        trial = {"settings": settings.to_json_dict(), "prior": prior.to_json_dict(),
                 "design": payload.get("design", {"method": "boin"}),
                 "state": state.to_json_dict()}
        Path(args.state).write_text(json.dumps(trial, indent=1))
        print(f"trial initialized; first cohort at dose {state.current_dose}")
        return EXIT_OK

    try:
        payload, settings, prior, state = _load_trial_file(args.state)
    except ValidationError as e:
        return _fail_validation("; ".join(e.errors))
    except (OSError, KeyError, ValueError) as e:
        return _fail_validation(e)

    record = {"id": "cli", "settings": settings.to_json_dict(),
              "prior": prior.to_json_dict(),
              "design": payload.get("design", {"method": "boin"})}
    try:
        bundle = service._build_bundle(record)
    except (ValueError, ValidationError) as e:
        return _fail_validation(e)

    if args.select_mtd:
        if state.status(settings) == "active":
            return _fail_validation("trial still active; cannot select the MTD yet")
        sel = select_mtd(state, settings.target, prior_counts=bundle.sel_counts)
        print(json.dumps({"selected_dose": sel.selected_dose,
                          "isotonic_estimates": list(sel.isotonic_estimates),
                          "admissible_doses": list(sel.admissible_doses)}))
        return EXIT_OK

    if args.dlt is None:
        print(json.dumps({"status": state.status(settings),
                          "recommended_dose": state.current_dose}))
        return EXIT_OK

    dose = args.dose if args.dose is not None else state.current_dose
    if dose != state.current_dose:
        return _fail_validation(f"cohort dose {dose} does not match the "
                                f"recommended dose {state.current_dose}")
    n = args.n if args.n is not None else settings.cohort_size
    try:
        new_state, decision = apply_cohort(settings, state, args.dlt,
                                           bundle.decider(), cohort_n=n,
                                           audit_context=bundle.audit_context())
    except ValueError as e:
        return _fail_validation(e)
    payload["state"] = new_state.to_json_dict()
    Path(args.state).write_text(json.dumps(payload, indent=1))
    status = new_state.status(settings)
    print(json.dumps({"decision": decision.value, "status": status,
                      "next_dose": new_state.current_dose if status == "active" else None}))
    return EXIT_OK


def cmd_serve(args) -> int:
    server = service.create_server(args.data_dir, args.bind, args.port,
                                   args.workers, args.static_dir)
    host, port = server.server_address[:2]
    print(f"dosefind service on http://{host}:{port}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dosefind",
        description="Dose-finding designs with informative priors: decision "
                    "tables, simulation, and trial conduct.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a design file")
    p.add_argument("design", help="design JSON (settings + prior [+ design])")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("priors", help="induced beta prior per dose (diagnostic)")
    p.add_argument("design")
    p.add_argument("--sigma2", type=float, default=None,
                   help="override the CRM prior variance")
    p.set_defaults(func=cmd_priors)

    p = sub.add_parser("table", help="write the decision table")
    p.add_argument("design")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("simulate", help="run a simulation plan")
    p.add_argument("plan", help="plan JSON")
    p.add_argument("--seed", type=int, required=True,
                   help="master seed (mandatory for published runs)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--emit-trials", action="store_true",
                   help="also write raw per-trial records (trials.jsonl)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("conduct", help="apply a cohort outcome to a trial file")
    p.add_argument("state", help="trial state JSON (created with --init)")
    p.add_argument("--init", metavar="DESIGN",
                   help="initialize a fresh trial from a design file")
    p.add_argument("--dose", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dlt", type=int, default=None)
    p.add_argument("--select-mtd", action="store_true")
    p.set_defaults(func=cmd_conduct)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--data-dir", default="./dosefind-data")
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8421)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--static-dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
