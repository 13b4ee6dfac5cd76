"""Command-line front end: ``mfbsde <task> --scenario file.json``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import analysis, norms
from .admissibility import certify_scenario
from .errors import MFBSDEError, UnsupportedConfiguration, _jsonable
from .generators import check_assumption_A
from .particles import ParticleConfig, convergence_study, reduced_generator, solve_particles
from .picard import picard_solve, solution_summary, write_solution_csv
from .scenario import TASKS, Scenario, load_scenario

EXIT_OK, EXIT_TASK_FAILED, EXIT_ERROR, EXIT_INTERNAL = 0, 1, 2, 3


def dumps(obj: Any) -> str:
    """Stable rendering: sorted keys, shortest round-trip floats, no NaN."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)


def _write_csv(out_dir: Path | None, name: str, header: list[str], rows) -> str | None:
    if out_dir is None:
        return None
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return name


def _solve(sc: Scenario, backend):
    s = sc.doc["solver"]
    return picard_solve(sc.terminal, sc.generator, backend, tol=s["tol"], max_iter=s["max_iter"])


def _task_solve(sc, backend, out_dir, threads):
    sol, rep = _solve(sc, backend)
    result = solution_summary(sol, rep)
    result["certificate"] = certify_scenario(sc.generator, sc.terminal, sc.grid, backend).to_dict()
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_solution_csv(sol, out_dir / "solution.csv")
        result["profiles"] = ["solution.csv"]
    return rep.converged, None if rep.converged else rep.status, result


def _task_certify(sc, backend, out_dir, threads):
    report = certify_scenario(sc.generator, sc.terminal, sc.grid, backend)
    result = report.to_dict()
    result["assumption_spot_check"] = check_assumption_A(sc.generator, seed=sc.seed, t_max=sc.grid.T).to_dict()
    return report.certified, None if report.certified else "not-certified", result


def _task_compare(sc, backend, out_dir, threads):
    gen_t, xi_t = sc.compare_pair()
    c = sc.doc["compare"]
    report = analysis.compare_solutions(
        sc.generator,
        sc.terminal,
        gen_t,
        xi_t,
        backend,
        tol=sc.doc["solver"]["tol"],
        max_iter=sc.doc["solver"]["max_iter"],
        exploratory=c["exploratory"],
        a1_bound=np.inf if c["a1_bound"] is None else c["a1_bound"],
        a2_bound=np.inf if c["a2_bound"] is None else c["a2_bound"],
        samples=c["samples"],
        box_radius=c["box_radius"],
        seed=c["seed"],
    )
    result = report.to_dict()
    name = _write_csv(out_dir, "comparison.csv", ["time", "max_excess"], zip(sc.grid.nodes, report.profile))
    if name:
        result["profiles"] = [name]
    return report.passed, None if report.passed else "comparison-violated", result


def _task_bmo(sc, backend, out_dir, threads):
    sol, rep = _solve(sc, backend)
    est = analysis.estimate_bmo(sol)
    Q = norms.remaining_variation(sol.Z, backend)
    result = {
        "bmo": est.to_dict(),
        "naive_terminal_estimate": float(backend.weights[:, 0] @ Q[:, 0]),
        "solution": solution_summary(sol, rep),
    }
    name = _write_csv(out_dir, "bmo.csv", ["time", "sup_remaining_variation"], zip(sc.grid.nodes, est.profile))
    if name:
        result["profiles"] = [name]
    return rep.converged, None if rep.converged else rep.status, result


def _task_lemma(sc, backend, out_dir, threads):
    sol, rep = _solve(sc, backend)
    report = analysis.check_lemma_bound(sol, sc.generator, sc.doc["lemma"]["M_bound"])
    result = {"lemma": report.to_dict(), "solution": solution_summary(sol, rep)}
    ok = report.passed and rep.converged
    reason = None if ok else ("not-converged" if not rep.converged else "lemma-bound-violated")
    return ok, reason, result


def _task_particles(sc, backend, out_dir, threads):
    p = sc.doc["particles"]
    s = sc.doc["solver"]
    b = sc.doc["backend"]
    template = ParticleConfig(
        n_particles=p["ladder"][0],
        gen=sc.generator,
        xi=sc.terminal,
        grid=sc.grid,
        paths=p["paths"],
        replications=p["replications"],
        seed=sc.seed,
        degree=b["degree"],
        ridge=b["ridge"],
        tol=s["tol"],
        max_iter=s["max_iter"],
    )
    study = convergence_study(template, p["ladder"], threads=threads)
    result = {"study": study.to_dict()}
    if sc.d == 1:
        single = solve_particles(
            ParticleConfig(1, sc.generator, sc.terminal, sc.grid, seed=sc.seed, tol=s["tol"], max_iter=s["max_iter"])
        )
        reduced, _ = picard_solve(sc.terminal, reduced_generator(sc.generator), single.solution.backend,
                                  tol=s["tol"], max_iter=s["max_iter"])
        result["single_particle_reduction"] = {
            "backend": "lattice",
            "max_abs_difference": float(np.abs(single.solution.Y - reduced.Y).max()),
        }
    name = _write_csv(out_dir, "particles.csv", ["N", "RMSE", "stderr"], study.rows())
    if name:
        result["profiles"] = [name]
    ok = all(study.converged)
    return ok, None if ok else "not-converged", result


def _task_oracle_diff(sc, backend, out_dir, threads):
    o = sc.doc["oracle"]
    if o["kind"] == "auto":
        match = analysis.oracle_for(sc.generator)
        if match is None:
            raise UnsupportedConfiguration("no oracle matches this generator", name=sc.generator.name)
        kind, params = match
    else:
        kind, params = o["kind"], {k: o[k] for k in ("a", "c") if o[k] is not None}
    sol, rep = _solve(sc, backend)
    orc = analysis.oracle_solution(kind, sc.terminal, backend, **params)
    y0, o0 = float(sol.Y0[0]), float(orc.Y0[0])
    rel = abs(y0 - o0) / abs(o0) if o0 != 0 else abs(y0 - o0)
    result = {
        "oracle": kind,
        "oracle_params": params,
        "Y0": y0,
        "oracle_Y0": o0,
        "abs_error": abs(y0 - o0),
        "rel_error": rel,
        "rtol": o["rtol"],
        "max_abs_difference": norms.sup_norm(sol.Y - orc.Y, backend),
        "solution": solution_summary(sol, rep),
    }
    rows = zip(sc.grid.nodes, sol.meanY[:, 0], orc.meanY[:, 0])
    name = _write_csv(out_dir, "oracle_diff.csv", ["time", "meanY", "oracle_meanY"], rows)
    if name:
        result["profiles"] = [name]
    ok = rep.converged and rel <= o["rtol"]
    reason = None if ok else ("not-converged" if not rep.converged else "oracle-mismatch")
    return ok, reason, result


HANDLERS = {
    "solve": _task_solve,
    "certify": _task_certify,
    "compare": _task_compare,
    "bmo": _task_bmo,
    "lemma-check": _task_lemma,
    "particles": _task_particles,
    "oracle-diff": _task_oracle_diff,
}


def run(sc: Scenario, out_dir: str | Path | None = None, threads: int = 1) -> tuple[int, dict[str, Any]]:
    """Execute the scenario's task and return ``(exit code, JSON summary)``."""
    out = Path(out_dir) if out_dir is not None else None
    backend = None if sc.task == "particles" else sc.make_backend(threads)
    ok, reason, result = HANDLERS[sc.task](sc, backend, out, threads)
    summary = {"task": sc.task, "success": bool(ok), "reason": reason, "scenario": sc.doc, "result": result}
    return (EXIT_OK if ok else EXIT_TASK_FAILED), summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfbsde", description="Picard solver and diagnostics for mean-field BSDEs")
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="directory for CSV profiles")
        p.add_argument("--seed", type=int, default=None, help="override ensemble.seed")
        p.add_argument("--threads", type=int, default=1, help="worker cap; never changes results")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario).with_overrides(task=args.task, seed=args.seed)
        code, summary = run(sc, args.out, max(1, args.threads))
    except MFBSDEError as exc:
        sys.stderr.write(dumps(exc.to_dict()) + "\n")
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - last-resort structured report
        sys.stderr.write(dumps({"error": "internal-error", "message": str(exc), "details": {"type": type(exc).__name__}}) + "\n")
        return EXIT_INTERNAL
    sys.stdout.write(dumps(summary) + "\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
