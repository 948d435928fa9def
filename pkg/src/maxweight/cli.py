"""Command-line driver: load a spec file, run one experiment mode, write
CSV/JSON artifacts and exit with 0 (pass), 2 (verification failure) or
3 (input error)."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controller import QLA, simulate_replications
from .drift import SWEEP_COLUMNS, check_drift, sweep, sweep_row
from .dual import verify_strong_duality
from .specfile import SpecFileError, load_spec

log = logging.getLogger("maxweight")

MODES = ("simulate", "sweep", "verify-duality", "verify-drift", "bounds")
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 2, 3


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    spec: Path
    mode: str
    Vs: tuple
    horizon: int = 100_000
    reps: int = 1
    seed: int = 0
    out: Path = Path("out")
    start_state: str | None = None
    samples: int = 100
    write_traces: bool = field(default=False)

    def __post_init__(self):
        object.__setattr__(self, "spec", Path(self.spec))
        object.__setattr__(self, "out", Path(self.out))
        object.__setattr__(self, "Vs", tuple(float(v) for v in self.Vs))

    def validate(self) -> None:
        problems = []
        if self.mode not in MODES:
            problems.append(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if not self.Vs:
            problems.append("V list is empty")
        for v in self.Vs:
            if not (math.isfinite(v) and v >= 1):
                problems.append(f"V must be finite and >= 1, got {v!r}")
        if self.horizon < 1:
            problems.append(f"horizon must be >= 1, got {self.horizon}")
        if self.reps < 1:
            problems.append(f"reps must be >= 1, got {self.reps}")
        if self.samples < 1:
            problems.append(f"samples must be >= 1, got {self.samples}")
        if problems:
            raise PlanError("; ".join(problems))


def parse_V_list(text: str) -> tuple:
    """``"1,2,4"`` or a doubling range ``"1..128"``."""
    text = text.strip()
    if ".." in text:
        lo, hi = (float(x) for x in text.split("..", 1))
        if not (lo >= 1 and hi >= lo):
            raise PlanError(f"bad V range {text!r}")
        out, v = [], lo
        while v <= hi:
            out.append(v)
            v *= 2
        return tuple(out)
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise PlanError(f"bad V list {text!r}") from exc


def vtag(V: float) -> str:
    return format(V, "g")


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def write_json(path: Path, payload) -> None:
    # json.dumps prints floats with repr, which round-trips exactly
    path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=False) + "\n", encoding="utf-8")


def write_sweep_csv(path: Path, reports) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for rep in reports:
            row = sweep_row(rep)
            w.writerow([format(float(row[c]), ".17g") for c in SWEEP_COLUMNS])


def _need_cert(cert, mode):
    if cert is None:
        raise PlanError(f"mode {mode} needs a slackness certificate in the spec file")


def _bounds_payload(rep, spec) -> dict:
    d = rep.to_dict()
    d["reference_state_label"] = spec.chain.state_labels[rep.reference_state]
    d["passed"] = not rep.flags
    return d


def run(plan: ExperimentPlan, stream=sys.stdout) -> int:
    """Execute ``plan``; returns the exit status."""
    try:
        plan.validate()
        spec, cert = load_spec(plan.spec)
        if plan.start_state is not None:
            spec.chain.index(plan.start_state)
    except (PlanError, SpecFileError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        if plan.mode in ("sweep", "bounds", "verify-duality"):
            _need_cert(cert, plan.mode)
    except PlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out = plan.out
    out.mkdir(parents=True, exist_ok=True)
    failed: list[str] = []

    if plan.mode in ("simulate", "verify-drift"):
        records = []
        for V in plan.Vs:
            traces = simulate_replications(spec, QLA(V), plan.horizon, plan.reps, plan.seed, plan.start_state)
            for k, tr in enumerate(traces):
                chk = check_drift(tr, spec)
                u, b = tr.time_averages()
                rec = {
                    "V": V,
                    "replication": k,
                    "seed": tr.seed,
                    "slots": tr.horizon,
                    "time_avg_cost": u,
                    "time_avg_backlog": b,
                    "drift_violations": int(chk.violations.size),
                    "first_violation": chk.first_violation,
                    "max_excess": chk.max_excess,
                    "passed": chk.passed,
                }
                records.append(rec)
                if plan.mode == "simulate" or plan.write_traces:
                    tr.write_csv(out / f"trace_V{vtag(V)}_rep{k}.csv", spec)
                if not chk.passed:
                    failed.append(f"drift V={vtag(V)} rep={k} first violation at slot {chk.first_violation}")
                print(f"V={vtag(V)} rep={k} seed={tr.seed} cost={u:.6g} backlog={b:.6g} drift={'ok' if chk.passed else 'FAIL'}", file=stream)
        name = "drift.json" if plan.mode == "verify-drift" else "simulate.json"
        write_json(out / name, {"mode": plan.mode, "traces": records, "passed": not failed})

    elif plan.mode == "verify-duality":
        for V in plan.Vs:
            rep = verify_strong_duality(spec, V, cert.eta, n_samples=plan.samples, seed=plan.seed)
            write_json(out / f"duality_V{vtag(V)}.json", rep.to_dict())
            for c in (c for c in rep.checks if not c.passed):
                failed.append(f"duality V={vtag(V)} check {c.name}: worst {c.worst:.3g}")
            print(f"V={vtag(V)} g*={rep.g_star:.12g} V*f*={rep.V * rep.f_star_av:.12g} checks={'ok' if rep.passed else 'FAIL'}", file=stream)

    else:  # sweep, bounds
        reports = sweep(spec, cert.eta, plan.Vs, plan.horizon, plan.reps, plan.seed, plan.start_state)
        for rep in reports:
            write_json(out / f"bounds_V{vtag(rep.V)}.json", _bounds_payload(rep, spec))
            for flag in rep.flags:
                failed.append(f"bounds V={vtag(rep.V)}: {flag}")
            print(
                f"V={vtag(rep.V)} cost={rep.util_emp:.6g}<= {rep.utility_bound:.6g} "
                f"backlog={rep.bl_emp:.6g}<= {rep.backlog_bound:.6g}",
                file=stream,
            )
        if plan.mode == "sweep":
            write_sweep_csv(out / "sweep.csv", reports)

    for f in failed:
        print(f"FAILED: {f}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxweight", description="QLA/MaxWeight simulation and verification.")
    p.add_argument("--spec", required=True, help="network spec JSON file")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--V", default="1", help="comma list (1,4,16) or doubling range (1..128)")
    p.add_argument("--horizon", type=int, default=100_000)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="seed base; replication k uses seed+k")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--start-state", default=None, help="initial chain state (default: reference state)")
    p.add_argument("--samples", type=int, default=100, help="random multipliers per duality check")
    p.add_argument("--write-traces", action="store_true", help="also write trace CSVs in verify-drift mode")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        plan = ExperimentPlan(
            spec=args.spec,
            mode=args.mode,
            Vs=parse_V_list(args.V),
            horizon=args.horizon,
            reps=args.reps,
            seed=args.seed,
            out=args.out,
            start_state=args.start_state,
            samples=args.samples,
            write_traces=args.write_traces,
        )
    except PlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    stream = open("/dev/null", "w") if args.quiet else sys.stdout
    try:
        return run(plan, stream)
    finally:
        if args.quiet:
            stream.close()


if __name__ == "__main__":
    sys.exit(main())
