"""Command-line interface.

JSON reports go to stdout, a short human summary to stderr.  Every run
records its seed; without ``--seed`` a fresh one is drawn and printed so
the run stays replayable.  The ``result`` object of a report is
byte-identical across repeated runs with the same inputs and seed; wall
times live under ``meta``.

Exit codes: 0 success, 1 invariant violation found (fuzz), 2 input or
validation error, 3 dimension-budget error.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
import time
from pathlib import Path

from . import __version__
from .csquashed import EsqcConfig, estimate_esqc, extension_crosscheck
from .entropy import entropy_report, party_partition
from .errors import BadParams, BudgetExceeded, DimensionTooSmall, NmkError
from .fuzz import SUITES
from .markov import MarkovComponents, build_markov, markov_score
from .nmf import EstimateConfig, estimate
from .serialize import (
    components_from_json,
    jsonable,
    script_from_json,
    state_from_json,
    state_to_json,
    witness_to_json,
)
from .states import DensityState
from .steps import Scenario, run_script
from .zoo import ZooScript, catalog_names, manifest, parse_zoo_ref, zoo


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise BadParams(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadParams(f"{path} is not valid JSON: {exc}") from exc


def load_ref(ref: str):
    """Resolve a state/components/script reference: a zoo URI or a file."""
    if ref.startswith("zoo:"):
        name, params = parse_zoo_ref(ref)
        seed = params.pop("seed", 0)
        return zoo(name, params, seed=seed)
    payload = _load_json(ref)
    if "registers" in payload:
        return state_from_json(payload)
    if "entries" in payload:
        return components_from_json(payload)
    if "steps" in payload:
        return script_from_json(payload)
    raise BadParams(f"{ref}: unrecognized payload (no registers/entries/steps key)")


def _need_state(obj, ref: str) -> DensityState:
    if isinstance(obj, DensityState):
        return obj
    if isinstance(obj, MarkovComponents):
        return build_markov(obj)
    raise BadParams(f"{ref} does not resolve to a state")


def _seed_of(args) -> int:
    if args.seed is None:
        seed = secrets.randbelow(2**31)
        print(f"seed not given; drew {seed}", file=sys.stderr)
        return seed
    return args.seed


def _emit(result: dict, started: float, args, summary_lines) -> None:
    report = {
        "result": jsonable(result),
        "meta": {"wall_time_s": time.time() - started, "version": __version__},
    }
    print(json.dumps(report["result"], sort_keys=True, indent=2))
    print(json.dumps({"meta": report["meta"]}, sort_keys=True), file=sys.stderr)
    for line in summary_lines:
        print(line, file=sys.stderr)
    if getattr(args, "csv", None):
        _write_csv(args.csv, result)


def _write_csv(path: str, result: dict) -> None:
    rows = []

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in sorted(obj.items()):
                walk(f"{prefix}{k}." if prefix else f"{k}.", v)
        elif isinstance(obj, (list, tuple)):
            for i, v in enumerate(obj):
                walk(f"{prefix}{i}.", v)
        elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
            rows.append((prefix.rstrip("."), obj))

    walk("", jsonable(result))
    with open(path, "w") as fh:
        fh.write("key,value\n")
        for key, value in rows:
            fh.write(f"{key},{value}\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args) -> int:
    started = time.time()
    state = _need_state(load_ref(args.state), args.state)
    groups = _partition_args(args, state)
    report = entropy_report(state, *groups)
    score = markov_score(state, *groups, tol=args.tol)
    result = {
        "command": "analyze",
        "input": args.state,
        "entropy": report.to_dict(),
        "markov": score.to_dict(),
    }
    verdict = "markov" if score.verdict else "non-markov"
    _emit(result, started, args, [f"M_I = {report.m_i_bits:.9f} bits; verdict: {verdict}"])
    return 0


def _partition_args(args, state):
    if args.alice or args.bob or args.eve:
        return (
            tuple((args.alice or "").split(",")) if args.alice else (),
            tuple((args.bob or "").split(",")) if args.bob else (),
            tuple((args.eve or "").split(",")) if args.eve else (),
        )
    return party_partition(state)


def cmd_nmf(args) -> int:
    started = time.time()
    state = _need_state(load_ref(args.state), args.state)
    seed = _seed_of(args)
    config = EstimateConfig(
        k=args.k,
        ext=tuple(int(x) for x in args.ext.split(",")),
        restarts=args.restarts,
        max_iters=args.max_iters,
        seed=seed,
        tol=args.tol,
        escalate=not args.no_escalate,
        jobs=args.jobs,
    )
    est = estimate(state, config)
    result = {
        "command": "nmf",
        "input": args.state,
        "seed": seed,
        "config": est.config,
        "lower_bits": est.lower_bits,
        "upper_bits": est.upper_bits,
        "gap": est.gap,
        "certified": est.certified,
        "trace": [r.to_dict() for r in est.trace],
        "witness": witness_to_json(est.best),
        "notes": est.notes,
    }
    flag = "" if est.certified else "  [UNCERTIFIED: bracket gap above tol]"
    _emit(
        result,
        started,
        args,
        [f"bracket [{est.lower_bits:.6f}, {est.upper_bits:.6f}] bits{flag}"],
    )
    return 0


def cmd_esqc(args) -> int:
    started = time.time()
    state = _need_state(load_ref(args.state), args.state)
    seed = _seed_of(args)
    config = EsqcConfig(
        k=args.k,
        e_prime=args.e_prime,
        restarts=args.restarts,
        max_iters=args.max_iters,
        seed=seed,
        tol=args.tol,
        jobs=args.jobs,
    )
    est = estimate_esqc(state, config)
    result = {
        "command": "esqc",
        "input": args.state,
        "seed": seed,
        "config": est.config,
        "upper_bits": est.upper_bits,
        "weights": list(est.weights),
        "ensemble": [state_to_json(s) for s in est.ensemble],
        "trace": [r.to_dict() for r in est.trace],
        "notes": est.notes,
    }
    lines = [f"ensemble upper bound {est.upper_bits:.6f} bits"]
    if args.crosscheck:
        rep = extension_crosscheck(state, config)
        result["msq_upper_bits"] = rep.msq_ub
        result["crosscheck"] = rep.to_dict()
        lines.append(f"extension crosscheck gap {rep.gap:.6f} bits")
    _emit(result, started, args, lines)
    return 0


def cmd_markov_build(args) -> int:
    started = time.time()
    obj = load_ref(args.components)
    if not isinstance(obj, MarkovComponents):
        raise BadParams(f"{args.components} does not resolve to block components")
    state = build_markov(obj)
    score = markov_score(state)
    result = {
        "command": "markov-build",
        "input": args.components,
        "state": state_to_json(state),
        "markov": score.to_dict(),
    }
    if args.out:
        Path(args.out).write_text(json.dumps(jsonable(state_to_json(state))))
    _emit(result, started, args, [f"built dim {state.dim}; cqmi = {score.cqmi_bits:.3e}"])
    return 0


def cmd_script(args) -> int:
    started = time.time()
    obj = load_ref(args.script)
    if isinstance(obj, ZooScript):
        scenario, steps = obj.scenario, obj.steps
    else:
        steps = obj
        if not args.state:
            raise BadParams("a script file needs a state reference to run on")
        scenario = Scenario(_need_state(load_ref(args.state), args.state))
    before = entropy_report(scenario.state)
    run = run_script(scenario, steps)
    after = entropy_report(run.final.state)
    result = {
        "command": "script",
        "input": args.script,
        "classification": run.classification.value,
        "ledger": run.final.ledger.to_dict(),
        "steps_applied": len(run.step_ledgers),
        "before": before.to_dict(),
        "after": after.to_dict(),
        "final_registers": [
            {"label": r.label, "dim": r.dim, "party": r.party.value}
            for r in run.final.state.layout.registers
        ],
    }
    if args.out:
        Path(args.out).write_text(json.dumps(jsonable(state_to_json(run.final.state))))
    _emit(
        result,
        started,
        args,
        [
            f"class {run.classification.value}; Qc = {run.final.ledger.qc_bits} bits, "
            f"C_down = {run.final.ledger.cdown_bits} bits; "
            f"M_I {before.m_i_bits:.6f} -> {after.m_i_bits:.6f}"
        ],
    )
    return 0


def cmd_fuzz(args) -> int:
    started = time.time()
    seed = _seed_of(args)
    report = SUITES[args.suite](args.trials, seed, jobs=args.jobs)
    result = {
        "command": "fuzz",
        "suite": args.suite,
        "seed": seed,
        "trials": report.trials,
        "passes": report.passes,
        "failure_count": len(report.failures),
        "notes": report.notes,
    }
    files = []
    if report.failures:
        outdir = Path(args.counterexample_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        for i, failure in enumerate(report.failures):
            path = outdir / f"counterexample_{args.suite}_{i}.json"
            path.write_text(json.dumps(jsonable(failure), sort_keys=True, indent=2))
            files.append(str(path))
    result["counterexample_files"] = files
    _emit(
        result,
        started,
        args,
        [f"{report.passes}/{report.trials} checks passed" + ("" if report.ok else "; VIOLATIONS FOUND")],
    )
    return 0 if report.ok else 1


def cmd_zoo(args) -> int:
    started = time.time()
    if args.action == "list":
        result = {"command": "zoo", "action": "list", "catalog": manifest()["entries"]}
        _emit(result, started, args, [f"{len(catalog_names())} entries"])
        return 0
    name, params = (args.name, {})
    if name and name.startswith("zoo:"):
        name, params = parse_zoo_ref(name)
    obj = zoo(name, params, seed=args.seed or 0)
    if isinstance(obj, DensityState):
        payload = state_to_json(obj)
    elif isinstance(obj, MarkovComponents):
        from .serialize import components_to_json

        payload = components_to_json(obj)
    else:
        from .serialize import script_to_json

        payload = {
            "script": script_to_json(obj.steps),
            "initial_state": state_to_json(obj.scenario.state),
            "expected_m_i": obj.expected_m_i,
        }
    result = {
        "command": "zoo",
        "action": "build",
        "name": name,
        "seed": args.seed or 0,
        "payload": payload,
    }
    if args.out:
        Path(args.out).write_text(json.dumps(jsonable(payload)))
    _emit(result, started, args, [f"built zoo entry {name}"])
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nmk",
        description="Non-Markovianity measures and free-operation simulation "
        "for tripartite quantum states",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeded=True):
        p.add_argument("--csv", help="also write flattened numeric results to this CSV file")
        if seeded:
            p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("analyze", help="entropic report and Markov verdict for a state")
    p.add_argument("state", help="state file or zoo:name?params reference")
    p.add_argument("--alice", help="comma-separated register labels for the A group")
    p.add_argument("--bob")
    p.add_argument("--eve")
    p.add_argument("--tol", type=float, default=1e-8)
    common(p, seeded=False)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("nmf", help="bracket the formation measure of a state")
    p.add_argument("state")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--ext", default="1,1,1", help="extension dims a',b',e'")
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--max-iters", type=int, default=600)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-escalate", action="store_true")
    common(p)
    p.set_defaults(func=cmd_nmf)

    p = sub.add_parser("esqc", help="ensemble entanglement upper bound of a bipartite state")
    p.add_argument("state")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--e-prime", type=int, default=1)
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--max-iters", type=int, default=600)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--crosscheck", action="store_true", help="also run the extension crosscheck")
    common(p)
    p.set_defaults(func=cmd_esqc)

    p = sub.add_parser("markov-build", help="assemble a state from block components")
    p.add_argument("components", help="components file or zoo:markov_random?... reference")
    p.add_argument("--out", help="write the built state to this file")
    common(p, seeded=False)
    p.set_defaults(func=cmd_markov_build)

    p = sub.add_parser("script", help="run a step script against a state")
    p.add_argument("script", help="script file or zoo:nonfree_script?cls=... reference")
    p.add_argument("state", nargs="?", help="state reference (unneeded for zoo scripts)")
    p.add_argument("--out", help="write the final state to this file")
    common(p, seeded=False)
    p.set_defaults(func=cmd_script)

    p = sub.add_parser("fuzz", help="run a randomized property suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--trials", type=int, default=300)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--counterexample-dir", default=".")
    common(p)
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("zoo", help="list or build catalog entries")
    p.add_argument("action", choices=("list", "build"))
    p.add_argument("name", nargs="?", help="entry name or zoo:name?params reference")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_zoo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BudgetExceeded, DimensionTooSmall) as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return 3
    except NmkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
