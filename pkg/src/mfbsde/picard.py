"""Picard iteration of the frozen-coefficient map for mean-field BSDEs.

One application of the map takes an input pair ``(y, z)`` and solves, by
backward induction,

    Y_N = xi + sum_j f(t_j, 0, 0, 0, 0) dt
    Z_k = E_k[Y_{k+1} dW_k^T] / dt
    Y_k = E_k[Y_{k+1}] + (f(t_k, y_k, E[y_k], z_k, E[z_k]) - f(t_k, 0, 0, 0, 0)) dt

and then removes the part of the zero-drift integral not yet accrued at
``t_k``. At a fixed point ``Y`` solves the discretized original equation
``Y_k = E_k[Y_{k+1}] + f(t_k, Y_k, E[Y_k], Z_k, E[Z_k]) dt``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import norms
from .errors import InvalidArgument
from .generators import Generator, evaluate
from .kernel import TimeGrid
from .terminals import TerminalValue

DIVERGENCE_LIMIT = 1e100
RATIO_FLOOR = 1e-30


@dataclass
class DiscreteSolution:
    grid: TimeGrid
    backend: Any = field(repr=False)
    Y: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)
    meanY: np.ndarray = field(repr=False)
    meanZ: np.ndarray = field(repr=False)
    supY: float
    z2norm: float
    Y_shifted: np.ndarray | None = field(default=None, repr=False)
    y0_stderr: float = 0.0

    @property
    def m(self) -> int:
        return self.Y.shape[2]

    @property
    def d(self) -> int:
        return self.Z.shape[3]

    @property
    def Y0(self) -> np.ndarray:
        return self.meanY[0]

    @property
    def norms(self) -> tuple[float, float]:
        return self.supY, self.z2norm

    @property
    def ball_norm(self) -> float:
        """``||Y||_sup^2 + ||Z||_{Z^2}^2``."""
        return self.supY**2 + self.z2norm**2


def make_solution(backend, Y, Z, Y_shifted=None, y0_stderr: float = 0.0) -> DiscreteSolution:
    """Assemble a solution, recomputing mean fields and norms from ``Y`` and ``Z``."""
    N = backend.grid.N
    Yt, Zt = np.moveaxis(Y, 1, 0), np.moveaxis(Z, 1, 0)
    meanY = np.stack([backend.expect(np.ascontiguousarray(Yt[k]), k) for k in range(N + 1)])
    meanZ = np.stack([backend.expect(np.ascontiguousarray(Zt[k]), k) for k in range(N)])
    return DiscreteSolution(
        grid=backend.grid,
        backend=backend,
        Y=Y,
        Z=Z,
        meanY=meanY,
        meanZ=meanZ,
        supY=norms.sup_norm(Y, backend),
        z2norm=norms.z2_norm(Z, backend),
        Y_shifted=Y_shifted,
        y0_stderr=y0_stderr,
    )


def zero_solution(backend, m: int, d: int) -> DiscreteSolution:
    P, N = backend.n_points, backend.grid.N
    return make_solution(backend, np.zeros((P, N + 1, m)), np.zeros((P, N, m, d)))


def zero_drift_profile(gen: Generator, grid: TimeGrid) -> np.ndarray:
    """Left-endpoint values ``f(t_k, 0, 0, 0, 0)`` for ``k < N``; shape ``(N, m)``."""
    return np.stack([gen.zero_drift(t) for t in grid.nodes[:-1]])


def shift_terminal(xi: TerminalValue, gen: Generator, grid: TimeGrid) -> TerminalValue:
    """``xi + int_0^T f(s, 0, 0, 0, 0) ds`` by left-endpoint quadrature."""
    g = zero_drift_profile(gen, grid)
    shift = g.sum(axis=0) * grid.dt

    def fn(states):
        return xi.evaluate(states) + shift

    return TerminalValue(
        fn,
        xi.bound + gen.zero_drift_integral_bound,
        xi.m,
        xi.name + "+shift",
        dict(xi.params),
        shift=shift,
        original=xi,
    )


def gamma_step(inp: DiscreteSolution, xi_shifted: TerminalValue, gen: Generator, backend=None) -> DiscreteSolution:
    """One application of the frozen-coefficient map to ``inp``."""
    backend = inp.backend if backend is None else backend
    grid = backend.grid
    N, dt = grid.N, grid.dt
    P, m, d = backend.n_points, gen.m, gen.d
    if inp.Y.shape != (P, N + 1, m) or inp.Z.shape != (P, N, m, d):
        raise InvalidArgument("input iterate does not match backend and generator dimensions")
    g = zero_drift_profile(gen, grid)
    accrued = np.vstack([np.zeros((1, m)), np.cumsum(g, axis=0) * dt])

    # time-major work buffers; converted back to (P, N+1, ...) at the end
    Yin = np.ascontiguousarray(np.moveaxis(inp.Y, 1, 0))
    Zin = np.ascontiguousarray(np.moveaxis(inp.Z, 1, 0))
    Yhat = np.zeros((N + 1, P, m))
    Z = np.zeros((N, P, m, d))
    terminal = backend.state(N)
    valid = backend.mask(N)
    Yhat[N, valid] = xi_shifted.evaluate(terminal[valid])
    pathwise = Yhat[N].copy()
    for k in range(N - 1, -1, -1):
        h = evaluate(gen, grid.nodes[k], Yin[k], inp.meanY[k], Zin[k], inp.meanZ[k]) - g[k]
        valid = backend.mask(k)
        cont = backend.cond_expect(Yhat[k + 1], k)
        if backend.kind == "lattice":
            Z[k] = backend.cond_expect_increment(Yhat[k + 1], k) / dt
        else:
            # E_k[dW] = 0, so centering changes nothing in law but removes the noise of regressing dW
            Z[k] = backend.cond_expect_increment(Yhat[k + 1] - cont, k) / dt
        Yhat[k] = cont + h * dt
        Z[k, ~valid] = 0.0
        Yhat[k, ~valid] = 0.0
        pathwise += h * dt
    Y = Yhat - accrued[:, None, :]
    original = xi_shifted.original
    valid = backend.mask(N)
    Y[N] = 0.0
    Y[N, valid] = original.evaluate(terminal[valid]) if original is not None else Yhat[N, valid] - accrued[N]
    for k in range(N):
        Y[k, ~backend.mask(k)] = 0.0
    Y = np.ascontiguousarray(np.moveaxis(Y, 0, 1))
    Z = np.ascontiguousarray(np.moveaxis(Z, 0, 1))
    Yhat = np.ascontiguousarray(np.moveaxis(Yhat, 0, 1))
    stderr = 0.0
    if backend.kind != "lattice":
        # with an intercept in every regression, Y_0 equals the path average of this estimator
        stderr = float(np.linalg.norm(pathwise.std(axis=0, ddof=1)) / np.sqrt(P)) if P > 1 else 0.0
    return make_solution(backend, Y, Z, Y_shifted=Yhat, y0_stderr=stderr)


def iterate_distance(a: DiscreteSolution, b: DiscreteSolution) -> float:
    """``||Y_a - Y_b||_sup^2 + ||Z_a - Z_b||_{Z^2}^2`` with the sampled estimators."""
    if a.Y.shape != b.Y.shape or a.Z.shape != b.Z.shape:
        raise InvalidArgument("solutions live on different grids or ensembles")
    backend = a.backend
    return norms.sup_norm(a.Y - b.Y, backend) ** 2 + norms.z2_norm(a.Z - b.Z, backend) ** 2


@dataclass
class PicardReport:
    """Iteration log.

    ``distances[i]`` is the distance between iterate ``i+1`` and iterate ``i``
    (iterate 0 is the zero pair). ``iterations`` counts the applications needed
    to reach the fixed point: when application ``i`` moves the solution by at
    most ``tol``, the run has converged after ``i - 1`` iterations and the last
    application is the residual check.
    """

    iterations: int
    applications: int
    distances: list[float]
    ratios: list[float | None]
    converged: bool
    final_residual: float
    tol: float
    max_iter: int
    iterate_ball_norms: list[float]
    status: str = "converged"

    def to_dict(self) -> dict[str, Any]:
        return {
            "iterations": self.iterations,
            "applications": self.applications,
            "converged": self.converged,
            "status": self.status,
            "final_residual": self.final_residual,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "distances": self.distances,
            "ratios": self.ratios,
            "iterate_ball_norms": self.iterate_ball_norms,
        }


def default_tol(backend) -> float:
    return 1e-8 if backend.kind == "lattice" else 1e-5


def picard_solve(
    xi: TerminalValue,
    gen: Generator,
    backend,
    tol: float | None = None,
    max_iter: int = 50,
    record_iterates: bool = False,
) -> tuple[DiscreteSolution, PicardReport]:
    """Iterate the map from ``(0, 0)`` until successive iterates are within ``tol``.

    Non-convergence is reported through ``PicardReport.converged``; the
    returned solution is then the iterate with the smallest incoming step.
    """
    tol = default_tol(backend) if tol is None else tol
    if not tol > 0:
        raise InvalidArgument("tol must be positive", tol=tol)
    if max_iter < 1:
        raise InvalidArgument("max_iter must be >= 1", max_iter=max_iter)
    if gen.d != backend.d:
        raise InvalidArgument("generator noise dimension does not match the backend", gen_d=gen.d, backend_d=backend.d)
    if xi.m != gen.m:
        raise InvalidArgument("terminal value and generator disagree on m", xi_m=xi.m, gen_m=gen.m)
    N = backend.grid.N
    xi.check_bound(backend.state(N), backend.mask(N))
    xi_shifted = shift_terminal(xi, gen, backend.grid)

    current = zero_solution(backend, gen.m, gen.d)
    distances: list[float] = []
    ball: list[float] = []
    iterates: list[DiscreteSolution] = []
    best, best_dist = None, math.inf
    status, converged = "max-iter", False
    applications = 0
    for i in range(1, max_iter + 1):
        new = gamma_step(current, xi_shifted, gen, backend)
        applications = i
        dist = iterate_distance(new, current)
        distances.append(dist)
        ball.append(new.ball_norm)
        if record_iterates:
            iterates.append(new)
        if not np.isfinite(dist) or dist > DIVERGENCE_LIMIT:
            status = "diverged"
            break
        if dist < best_dist:
            best, best_dist = new, dist
        if dist <= tol:
            status, converged = "converged", True
            best = new
            break
        current = new
    ratios = [
        (distances[j + 1] / distances[j]) if distances[j] > RATIO_FLOOR else None for j in range(len(distances) - 1)
    ]
    report = PicardReport(
        iterations=applications - 1 if converged else applications,
        applications=applications,
        distances=distances,
        ratios=ratios,
        converged=converged,
        final_residual=distances[-1],
        tol=tol,
        max_iter=max_iter,
        iterate_ball_norms=ball,
        status=status,
    )
    if record_iterates:
        report.iterates = iterates  # type: ignore[attr-defined]
    return (best if best is not None else current), report


def solution_summary(sol: DiscreteSolution, report: PicardReport | None = None) -> dict[str, Any]:
    out: dict[str, Any] = {
        "Y0": sol.Y0.tolist(),
        "Y0_stderr": sol.y0_stderr,
        "supY": sol.supY,
        "z2norm": sol.z2norm,
        "norms_are_lower_estimates": True,
        "T": sol.grid.T,
        "N": sol.grid.N,
        "backend": sol.backend.kind,
    }
    if report is not None:
        out["picard"] = report.to_dict()
    return out


def write_solution_csv(sol: DiscreteSolution, path: str | Path) -> None:
    """Columns: time, meanY per component, meanZ per entry (blank at T), running sup of |Y|."""
    m, d = sol.m, sol.d
    N = sol.grid.N
    mag = np.sqrt((sol.Y**2).sum(axis=-1))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["time"] + [f"meanY{i}" for i in range(m)] + [f"meanZ{i}_{j}" for i in range(m) for j in range(d)]
            + ["supY_running"]
        )
        running = 0.0
        for k in range(N + 1):
            valid = sol.backend.mask(k)
            running = max(running, float(mag[valid, k].max(initial=0.0)))
            mz = sol.meanZ[k].ravel().tolist() if k < N else [""] * (m * d)
            w.writerow([repr(float(sol.grid.nodes[k]))] + [repr(v) for v in sol.meanY[k].tolist()]
                       + [repr(v) if v != "" else "" for v in mz] + [repr(running)])
