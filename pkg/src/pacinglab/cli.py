"""Command-line front end: ``pacinglab {simulate,estimate,verify,detect}``.

Every run writes into ``--out`` (default: the current directory).  Failures
print one JSON error record on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .core import CONTROL, GC, GROUP_NAMES, GT, INTERLEAVING, NAIVE, TREATMENT, integrate, simulate_global
from .designs import Assignment, draw_assignments, simulate_design
from .errors import CapacityError, InvalidInputError, PacingLabError, PreconditionError
from .estimators import (
    audit_assignments,
    calibrate_threshold,
    detect_interference,
    expected_gte_hat,
    gte_hat,
    gte_true,
)
from .oracle import enumerate_expected_gte_hat, independent_loop
from .presets import load_preset, preset_names
from .scenario import SCHEMA_VERSION, load_scenario

TRAJECTORY_COLUMNS = ("t", "seller_id", "group", "r_T", "r_C", "I", "O", "S", "lambda")
EXIT_FAILED_CHECK = 1
EXIT_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error({"error": "usage", "message": message})
        sys.exit(EXIT_ERROR)


def _emit_error(record: dict) -> None:
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, NaN to null."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(path: Path, payload: dict) -> Path:
    body = {"schema_version": SCHEMA_VERSION, **payload}
    text = json.dumps(_clean(body), sort_keys=True, indent=2, allow_nan=False) + "\n"
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def write_table(path: Path, header, rows) -> Path:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


# -- shared setup -----------------------------------------------------------------


def _scenario(args):
    if bool(args.config) == bool(args.preset):
        raise InvalidInputError("give exactly one of --config or --preset")
    if args.preset:
        return load_preset(args.preset, dt=args.dt)
    return load_scenario(args.config, dt=args.dt)


def _design(args, scenario) -> str:
    if args.design:
        return args.design
    return (scenario.config or {}).get("design", INTERLEAVING)


def _seed(args, scenario) -> int:
    return scenario.seed if args.seed is None else args.seed


def _canonical_assignment(scenario, seed) -> Assignment:
    """The assignment a single run uses: the first draw for ``seed``."""
    labels, _ = draw_assignments(scenario.n_sellers, scenario.p_T, scenario.p_C, 1, seed)
    return Assignment(labels[0], scenario.p_T, scenario.p_C, seed)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


# -- subcommands ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    regime = args.design or (scenario.config or {}).get("design", INTERLEAVING)
    seed = _seed(args, scenario)
    if regime in (GT, GC):
        traj = simulate_global(scenario, regime)
        a = None
    else:
        a = _canonical_assignment(scenario, seed)
        traj = simulate_design(scenario, regime, a)
    lam = traj.realized_lambda()
    every = max(1, args.every)
    rows = []
    for k in range(0, traj.t.size, every):
        for i in range(traj.n_sellers):
            rows.append(
                (
                    _fmt(traj.t[k]),
                    i,
                    GROUP_NAMES[int(traj.labels[i])],
                    _fmt(traj.r_T[i, k]),
                    _fmt(traj.r_C[i, k]),
                    int(traj.I[i, k]),
                    _fmt(traj.O[i, k]),
                    _fmt(traj.S[i, k]),
                    "" if lam is None else _fmt(lam[i, k]),
                )
            )
    out = _out_dir(args)
    write_table(out / "trajectory.csv", TRAJECTORY_COLUMNS, rows)
    totals = traj.cumulative_outcomes()[:, -1]
    summary = {
        "command": "simulate",
        "scenario": scenario.name,
        "design": regime,
        "seed": seed,
        "dt": scenario.grid.dt,
        "steps": scenario.grid.steps,
        "labels": [GROUP_NAMES[int(g)] for g in traj.labels],
        "integrated_outcomes": totals,
    }
    if a is not None:
        summary["gte_hat"] = gte_hat(traj, a)
    write_json(out / "simulate.json", summary)
    _say(args, f"wrote {out / 'trajectory.csv'} ({len(rows)} rows)")
    return 0


def cmd_estimate(args) -> int:
    scenario = _scenario(args)
    design = _design(args, scenario)
    report = expected_gte_hat(scenario, design, args.replications, _seed(args, scenario))
    out = _out_dir(args)
    write_json(out / "estimate.json", {"command": "estimate", "scenario": scenario.name, **report.to_dict()})
    _say(
        args,
        f"{scenario.name} {design}: gte_true={report.gte_true:.6g} "
        f"mean={report.gte_hat_mean:.6g} 95% CI=[{report.ci_low:.6g}, {report.ci_high:.6g}]",
    )
    return 0


def _check(name, passed, **detail) -> dict:
    return {"name": name, "passed": passed, **detail}


def verify_scenario(scenario, design: str, seed: int) -> list[dict]:
    """Oracle agreement, exact expectation, and prefix audits that apply."""
    checks = []
    for version, report in getattr(scenario, "validation", {}).items():
        failure = report.first_failure()
        checks.append(
            _check(
                f"assumptions-{version}",
                report.passed,
                clauses=[c.clause for c in report.clauses],
                witness=None if failure is None else failure.witness,
            )
        )

    a = _canonical_assignment(scenario, seed)
    try:
        worst = 0.0
        for which in (GT, GC, NAIVE, INTERLEAVING):
            ref = np.array(independent_loop(scenario, which, a.labels))
            if which in (GT, GC):
                engine = simulate_global(scenario, which).cumulative_outcomes()[:, -1]
            else:
                engine = integrate(scenario, a.labels, which).outcomes[0]
            worst = max(worst, float(np.max(np.abs(ref - engine))))
        checks.append(_check("independent-loop", worst <= 1e-12, max_abs_diff=worst, tolerance=1e-12))
    except CapacityError as exc:
        checks.append(_check("independent-loop", None, skipped=str(exc)))

    try:
        oracle = enumerate_expected_gte_hat(scenario, design)
    except CapacityError as exc:
        checks.append(_check("enumeration", None, skipped=str(exc)))
        return checks
    truth = gte_true(scenario)
    exact = oracle.exact_expected_gte_hat
    detail = dict(exact_expected_gte_hat=exact, gte_true=truth, assignments=oracle.assignments, excluded_mass=oracle.excluded_mass)

    labels = np.array([row[0] for row in oracle.table], dtype=np.int8)
    try:
        audits = audit_assignments(scenario, design, labels)
    except PreconditionError as exc:
        checks.append(_check("enumeration", None, relation=_relation(exact, truth), **detail))
        checks.append(_check("prefix-dominance", None, skipped=str(exc)))
        return checks

    theorem = audits[0].theorem
    failures = [r for r in audits if not r.passed]
    checks.append(
        _check(
            "prefix-dominance",
            not failures,
            theorem=theorem,
            assignments=len(audits),
            violations=len(failures),
            first_violation=failures[0].violation if failures else None,
        )
    )
    if theorem == "no-feedback":
        indicators_match = all(r.equality for r in audits)
        checks.append(_check("path-identity", indicators_match, assignments=len(audits)))
        checks.append(_check("exact-unbiasedness", abs(exact - truth) <= 1e-12, tolerance=1e-12, **detail))
    else:
        checks.append(_check("underestimation", exact <= truth, **detail))
    return checks


def _relation(x: float, y: float) -> str:
    return "greater" if x > y else "less" if x < y else "equal"


def cmd_verify(args) -> int:
    scenario = _scenario(args)
    design = _design(args, scenario)
    checks = verify_scenario(scenario, design, _seed(args, scenario))
    passed = all(c["passed"] is not False for c in checks)
    out = _out_dir(args)
    write_json(
        out / "verify.json",
        {"command": "verify", "scenario": scenario.name, "design": design, "passed": passed, "checks": checks},
    )
    for c in checks:
        status = {True: "pass", False: "FAIL", None: "info"}[c["passed"]]
        _say(args, f"{status:4}  {c['name']}")
    return 0 if passed else EXIT_FAILED_CHECK


def cmd_detect(args) -> int:
    scenario = _scenario(args)
    seed = _seed(args, scenario)
    a = _canonical_assignment(scenario, seed)
    report = detect_interference(simulate_design(scenario, INTERLEAVING, a), a)
    runs = args.replications or 200
    null = calibrate_threshold(scenario, runs=runs, seed=seed)
    out = _out_dir(args)
    header = ["t", "mean_T_rT", "mean_C_rT", "mean_T_rC", "mean_C_rC", "delta"]
    lam = report.lambda_bar or {}
    header += [f"lambda_bar_{g}" for g in lam]
    rows = []
    for k in range(report.t.size):
        row = [report.t[k], report.mean_T_rT[k], report.mean_C_rT[k], report.mean_T_rC[k], report.mean_C_rC[k], report.delta[k]]
        row += [series[k] for series in lam.values()]
        rows.append([_fmt(v) for v in row])
    write_table(out / "detect.csv", header, rows)
    write_json(
        out / "detect.json",
        {
            "command": "detect",
            "scenario": scenario.name,
            "seed": seed,
            "labels": [GROUP_NAMES[int(g)] for g in a.labels],
            **report.to_dict(),
            "null": null.to_dict(),
            "exceeds_threshold": report.statistic > null.threshold,
        },
    )
    _say(args, f"{scenario.name}: statistic={report.statistic:.6g} threshold={null.threshold:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pacinglab", description="Seller-side experiments under pacing feedback.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="scenario config file (JSON)")
        p.add_argument("--preset", choices=preset_names(), help="named scenario")
        p.add_argument("--seed", type=int, help="assignment seed (default: the scenario's)")
        p.add_argument("--replications", type=int, help="Monte-Carlo replications or A/A runs")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--dt", type=float, help="override the grid step")
        p.add_argument("--quiet", action="store_true", help="no progress output")

    p = sub.add_parser("simulate", help="run one design or global regime and write the trajectory")
    common(p)
    p.add_argument("--design", choices=[GT, GC, NAIVE, INTERLEAVING])
    p.add_argument("--every", type=int, default=1, help="write every k-th grid point")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="Monte-Carlo expectation of the estimator")
    common(p)
    p.add_argument("--design", choices=[NAIVE, INTERLEAVING])
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify", help="oracle agreement, exact expectations and prefix audits")
    common(p)
    p.add_argument("--design", choices=[NAIVE, INTERLEAVING])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("detect", help="interference detection with an A/A-calibrated threshold")
    common(p)
    p.set_defaults(func=cmd_detect)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors are already reported; --help exits 0
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    if args.seed is not None and not 0 <= args.seed < 2**64:
        _emit_error({"error": "invalid-input", "message": "seed must be an unsigned 64-bit integer"})
        return EXIT_ERROR
    try:
        return args.func(args)
    except PacingLabError as exc:
        _emit_error(exc.record())
        return EXIT_ERROR
    except OSError as exc:
        _emit_error({"error": "io", "message": str(exc)})
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
