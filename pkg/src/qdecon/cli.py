"""``qdecon`` command-line interface.

Every command prints one JSON report. Everything that can change between
identical runs (wall-clock time, durations) lives under ``"timestamp"``.

Exit codes: 0 success, 2 input error, 3 non-convergence, 4 capacity,
5 check failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .deconstruction import (
    evaluate_protocol,
    full_twirl_protocol,
    load_protocol,
    markov_protocol,
)
from .entropy import chain_rule_residual, cqmi, duality_residual, entropy_report
from .linalg import CapacityError, as_labels
from .recovery import (
    OptimizerConfig,
    fidelity_of_recovery,
    for_multiplicativity_residual,
    for_self_duality_residual,
    recovery_fidelity,
)
from .states import (
    ghz,
    load_state,
    maximally_entangled,
    maximally_mixed,
    random_markov_state,
    random_state,
    save_state,
    tensor,
)

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_CAPACITY, EXIT_CHECK = 0, 2, 3, 4, 5
FIXTURE_DIR = Path(__file__).parent / "fixtures"

# name -> (tolerance, direction); "min" means value >= -tol, "max" means value <= tol
CHECKS = {
    "ssa": (1e-9, "min"),
    "chain-rule": (1e-9, "max"),
    "duality": (1e-9, "max"),
    "fawzi-renner": (1e-4, "min"),
    "self-duality": (1e-3, "max"),
    "multiplicativity": (1e-3, "max"),
}


class InputError(ValueError):
    pass


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QDECON_THREADS", "1")))
    except ValueError:
        raise InputError("QDECON_THREADS must be an integer") from None


def _labels(text: str | None) -> tuple[str, ...]:
    if text is None:
        return ()
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(s) for s in text.split(","))
    except ValueError:
        raise InputError(f"--dims must be comma-separated integers, got {text!r}") from None
    if any(d < 1 for d in dims):
        raise InputError(f"--dims entries must be positive, got {text!r}")
    return dims


def _clean(x):
    """Make ``x`` JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _check(name: str, value: float, tol: float, direction: str) -> dict:
    ok = value >= -tol if direction == "min" else value <= tol
    return {"name": name, "value": value, "tolerance": tol,
            "bound": "value >= -tol" if direction == "min" else "value <= tol", "pass": bool(ok)}


def _roles(args):
    a, b, e = _labels(args.a), _labels(args.b), _labels(args.e)
    if not a or not b:
        raise InputError("--a and --b must name at least one label each")
    return a, b, e


def _load(path):
    try:
        return load_state(path)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc})") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None


def _cfg(args) -> OptimizerConfig:
    return OptimizerConfig(tol_obj=args.tol_obj, max_iter=args.max_iter, seed=args.seed)


# --- commands ---------------------------------------------------------------

def cmd_analyze(args):
    rho = _load(args.state)
    a, b, e = _roles(args)
    rep = entropy_report(rho, a, b, e)
    checks = [_check("ssa", rep.cqmi, 1e-9, "min")]
    for key in ("chain_rule", "duality"):
        if key in rep.residuals:
            checks.append(_check(key, rep.residuals[key], 1e-9, "max"))
    result = {"roles": {"A": a, "B": b, "E": e}, **rep.to_dict()}
    return result, checks, EXIT_OK


def cmd_for(args):
    rho = _load(args.state)
    a, b, e = _roles(args)
    est = fidelity_of_recovery(rho, (a, b, e), _cfg(args))
    info = cqmi(rho, a, b, e)
    recheck = recovery_fidelity(rho, est.channel, (a, b, e))
    fr = info + math.log2(est.value) if est.value > 0 else -math.inf
    result = {
        "roles": {"A": a, "B": b, "E": e},
        "estimate": est.to_dict(),
        "cqmi": info,
        "fawzi_renner_floor": 2.0 ** -info,
        "fawzi_renner_residual": fr,
        "petz_value": est.petz_value,
        "certificate_value": recheck,
    }
    checks = [
        _check("fawzi-renner", fr, 1e-4, "min"),
        _check("certificate", abs(recheck - est.value), 1e-10, "max"),
    ]
    return result, checks, EXIT_OK if est.converged else EXIT_NONCONVERGED


def cmd_deconstruct(args):
    rho = _load(args.state)
    roles = _roles(args)
    if args.protocol == "twirl":
        p = full_twirl_protocol(rho, args.copies, roles)
    elif args.protocol == "markov":
        p = markov_protocol(rho, args.copies, roles)
    else:
        try:
            p = load_protocol(args.protocol, roles)
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.protocol}: malformed JSON ({exc})") from None
        except OSError as exc:
            raise InputError(f"{args.protocol}: {exc.strerror or exc}") from None
    erase = _labels(args.erase) or None
    rep = evaluate_protocol(rho, p, mode=args.mode, eq8_subsystem=erase, cfg=_cfg(args))
    result = {"protocol": p.name, **rep.to_dict()}
    checks = [_check("epsilon", rep.epsilon, args.eps, "max")]
    conv = rep.converse
    if conv is not None and conv.holds is not None:
        checks.append(_check("converse", conv.difference, 1e-6, "max"))
    code = EXIT_OK
    if rep.recoverability is not None and not rep.recoverability.converged:
        code = EXIT_NONCONVERGED
    return result, checks, code


def _verify_one(check: str, dims: tuple[int, ...], seed: int, i: int, cfg) -> float:
    s = [seed, i]
    if check == "ssa":
        return cqmi(random_state(dims[:3], seed=s), "A", "B", "E")
    if check == "chain-rule":
        rho = random_state(dims if len(dims) == 4 else (2, 2, 2, 2), seed=s,
                           labels=("A1", "A2", "B", "E"))
        return chain_rule_residual(rho, ("A1", "A2"), "B", "E")
    if check == "duality":
        rho = random_state(dims if len(dims) == 4 else (2, 2, 2, 2), rank=1, seed=s)
        return duality_residual(rho, "A", "B", "E", "R")
    if check == "fawzi-renner":
        rho = random_state(dims[:3], seed=s)
        value = fidelity_of_recovery(rho, ("A", "B", "E"), cfg).value
        return cqmi(rho, "A", "B", "E") + math.log2(value)
    if check == "self-duality":
        rho = random_state(dims if len(dims) == 4 else (2, 2, 2, 2), rank=1, seed=s)
        return for_self_duality_residual(rho, ("A", "B", "E", "R"), cfg)
    if check == "multiplicativity":
        rho = random_state(dims[:3], seed=s + [0])
        sigma = random_state(dims[:3], seed=s + [1])
        return for_multiplicativity_residual(rho, sigma, cfg=cfg)
    raise InputError(f"unknown check {check!r}")


def cmd_verify(args):
    names = _labels(args.checks)
    unknown = [c for c in names if c not in CHECKS]
    if unknown or not names:
        raise InputError(f"unknown check(s) {unknown}; choose from {sorted(CHECKS)}")
    if args.random < 1:
        raise InputError("--random must be >= 1")
    dims = _dims(args.dims)
    if len(dims) not in (3, 4):
        raise InputError("--dims takes 3 (A,B,E) or 4 (A,B,E,R) entries")
    cfg = _cfg(args)
    summary, checks = {}, []
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        for name in names:
            tol, direction = CHECKS[name]
            # map preserves submission order, so results are sorted by state index
            values = list(pool.map(lambda i: _verify_one(name, dims, args.seed, i, cfg),
                                   range(args.random)))
            per_state = [_check(name, v, tol, direction) for v in values]
            failures = [i for i, c in enumerate(per_state) if not c["pass"]]
            worst = min(values) if direction == "min" else max(values)
            summary[name] = {
                "count": len(values), "min": min(values), "max": max(values),
                "mean": float(np.mean(values)), "tolerance": tol,
                "failures": len(failures), "failing_indices": failures, "residuals": values,
            }
            checks.append(_check(name, worst, tol, direction))
    return {"dims": dims, "random": args.random, "checks": summary}, checks, EXIT_OK


def fixture_states() -> dict:
    """The reference states shipped with the package, built deterministically."""
    phi_pi = tensor(maximally_entangled(2, ("A", "B")), maximally_mixed(2, "E"))
    return {
        "ghz3": ghz(3),
        "phi_pi": phi_pi,
        "markov_a": random_markov_state(2, 2, [(1, 1), (1, 1)], seed=11),
        "markov_b": random_markov_state(2, 2, [(1, 2), (2, 1)], seed=12),
        "random_pure_4q": random_state((2, 2, 2, 2), rank=1, seed=2024),
    }


def cmd_fixtures(args):
    out = Path(args.dir) if args.dir else FIXTURE_DIR
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, rho in fixture_states().items():
        path = out / f"{name}.json"
        save_state(rho, path)
        written[name] = {"file": path.name, "labels": rho.labels, "dims": rho.dims,
                         "cqmi_A_B_given_E": cqmi(rho, "A", "B", "E")}
    return {"directory": str(out), "fixtures": written}, [], EXIT_OK


# --- plumbing ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdecon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qdecon {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--pretty", action="store_true", help="print a human-readable table")
    common.add_argument("--seed", type=int, default=0)

    roles = argparse.ArgumentParser(add_help=False)
    roles.add_argument("state", help="state JSON file")
    roles.add_argument("--a", default="A", help="comma-separated labels of A")
    roles.add_argument("--b", default="B", help="comma-separated labels of B")
    roles.add_argument("--e", default="E", help="comma-separated labels of E (may be empty)")
    roles.add_argument("--r", default=None, help="comma-separated labels of R (informational)")

    opt = argparse.ArgumentParser(add_help=False)
    opt.add_argument("--tol-obj", type=float, default=1e-10)
    opt.add_argument("--max-iter", type=int, default=5000)

    sub.add_parser("analyze", parents=[common, roles], help="entropies, QMI, CQMI, identities")
    sub.add_parser("for", parents=[common, roles, opt], help="fidelity of recovery")
    p = sub.add_parser("deconstruct", parents=[common, roles, opt], help="evaluate a protocol")
    p.add_argument("--protocol", default="twirl", help="twirl, markov, or a protocol JSON file")
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--mode", choices=("eq7", "eq8"), default="eq7",
                   help="eq7: recoverability + disturbance; eq8: erasure + disturbance")
    p.add_argument("--erase", default=None, help="labels that must end up maximally mixed")
    p.add_argument("--eps", type=float, default=1e-6, help="pass threshold for epsilon")
    v = sub.add_parser("verify", parents=[common, opt], help="batch property checks")
    v.add_argument("--random", type=int, default=10)
    v.add_argument("--dims", default="2,2,2")
    v.add_argument("--checks", default="ssa", help=",".join(CHECKS))
    f = sub.add_parser("fixtures", parents=[common], help="regenerate the fixture states")
    f.add_argument("--dir", default=None)
    return parser


COMMANDS = {"analyze": cmd_analyze, "for": cmd_for, "deconstruct": cmd_deconstruct,
            "verify": cmd_verify, "fixtures": cmd_fixtures}


def _table(report: dict) -> str:
    lines = [f"qdecon {report['command']}  exit={report['exit_code']}"]
    for c in report["checks"]:
        mark = "PASS" if c["pass"] else "FAIL"
        lines.append(f"  {mark}  {c['name']:<18} {c['value']!s:>24}  ({c['bound']}, tol={c['tolerance']:g})")
    for key, val in report["result"].items():
        if isinstance(val, (int, float, str)) or val is None:
            lines.append(f"  {key:<24} {val}")
    return "\n".join(lines)


def run(argv=None) -> tuple[int, dict]:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        result, checks, code = COMMANDS[args.command](args)
    except CapacityError as exc:
        return EXIT_CAPACITY, {"error": "capacity", "message": str(exc)}
    except (InputError, ValueError, OSError, KeyError) as exc:
        return EXIT_INPUT, {"error": "input", "message": str(exc)}
    if code == EXIT_OK and not all(c["pass"] for c in checks):
        code = EXIT_CHECK
    report = _clean({
        "command": args.command,
        "argv": argv,
        "seed": args.seed,
        "version": __version__,
        "result": result,
        "checks": checks,
        "passed": all(c["pass"] for c in checks),
        "exit_code": code,
        "timestamp": {"utc": datetime.now(timezone.utc).isoformat(),
                      "elapsed_s": time.perf_counter() - started},
    })
    text = json.dumps(report, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        if args.pretty:
            print(_table(report))
    elif args.pretty:
        print(_table(report))
    else:
        print(text)
    return code, report


def main(argv=None) -> int:
    code, report = run(argv)
    if "error" in report:
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
