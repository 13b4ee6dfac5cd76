"""N-particle approximation of the mean-field equation.

Particle ``i`` solves

    Y^i_t = xi^i + int_t^T f(s, Y^i, (1/N) sum_j Y^j, Z^ii, (1/N) sum_j Z^jj) ds - sum_j int_t^T Z^ij dW^j

with independent Brownian motions ``W^1, ..., W^N``. The solver reuses the
Picard machinery through a backend whose "expectation" is the empirical
particle mean of each sample, and whose conditional expectations regress on
the particle's own state together with the empirical mean state, pooled
across particles.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .condexp import COND_MAX, LatticeBackend, RegressionBackend, clip_to_range, hermite_design
from .errors import IllConditionedRegression, InvalidArgument
from .generators import Generator
from .kernel import PathEnsemble, TimeGrid, build_lattice, simulate_paths
from .picard import DiscreteSolution, PicardReport, make_solution, picard_solve
from .terminals import TerminalValue


def _sorted_sum(X: np.ndarray, axis: int) -> np.ndarray:
    # summing in sorted order makes the result independent of how particles are labeled
    return np.sort(X, axis=axis).sum(axis=axis)


@dataclass
class ParticleConfig:
    """``xi`` is applied to each particle's own terminal state, which makes the ``xi^i`` i.i.d."""

    n_particles: int
    gen: Generator
    xi: TerminalValue
    grid: TimeGrid
    paths: int = 256
    replications: int = 1
    seed: int = 0
    degree: int = 3
    ridge: float = 1e-10
    tol: float | None = None
    max_iter: int = 50
    backend: str = "auto"

    def __post_init__(self) -> None:
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise InvalidArgument("particle count must be a positive integer", n_particles=self.n_particles)
        if self.paths < 2:
            raise InvalidArgument("at least two sample paths are needed", paths=self.paths)
        if self.replications < 1:
            raise InvalidArgument("replications must be >= 1", replications=self.replications)
        if self.backend not in ("auto", "lattice", "lsmc"):
            raise InvalidArgument("particle backend must be auto, lattice or lsmc", backend=self.backend)

    @property
    def d(self) -> int:
        return self.gen.d

    def uses_lattice(self) -> bool:
        small = self.n_particles * self.d == 1
        if self.backend == "lattice" and not small:
            raise InvalidArgument("the lattice handles a single one-dimensional particle only")
        return small and self.backend != "lsmc"


def particle_ensemble(cfg: ParticleConfig, seed: int | None = None, threads: int = 1) -> PathEnsemble:
    """``paths * n_particles`` independent paths; particle ``i`` of sample ``s`` is path ``s * N + i``."""
    seed = cfg.seed if seed is None else seed
    return simulate_paths(cfg.grid, cfg.paths * cfg.n_particles, cfg.d, seed, threads=threads)


class SelfMeanLattice(LatticeBackend):
    """Single-particle lattice: the empirical mean of one particle is the particle itself."""

    kind = "lattice"

    def expect(self, X: np.ndarray, k: int) -> np.ndarray:
        return np.array(X, dtype=float)


class PooledBackend:
    """Point view over ``paths * N`` rows, ordered sample-major."""

    kind = "lsmc-pooled"

    def __init__(self, ensemble: PathEnsemble, n_particles: int, degree: int = 3, ridge: float = 1e-10) -> None:
        if ensemble.M % n_particles:
            raise InvalidArgument("ensemble size is not a multiple of the particle count")
        self.ensemble = ensemble
        self.grid = ensemble.grid
        self.d = ensemble.d
        self.n = n_particles
        self.samples = ensemble.M // n_particles
        self.n_points = ensemble.M
        self.degree = degree
        self.ridge = ridge
        self._weights = np.full((self.n_points, self.grid.N + 1), 1.0 / self.n_points)
        self._solvers: dict[int, np.ndarray] = {}
        self._designs: dict[int, np.ndarray] = {}

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def state(self, k: int) -> np.ndarray:
        return self.ensemble.W[:, k]

    def mask(self, k: int) -> np.ndarray:
        return np.ones(self.n_points, dtype=bool)

    def _blocks(self, X: np.ndarray) -> np.ndarray:
        return X.reshape((self.samples, self.n) + X.shape[1:])

    def expect(self, X: np.ndarray, k: int) -> np.ndarray:
        """Empirical particle mean within each sample, repeated on every row of the sample."""
        B = self._blocks(np.asarray(X, dtype=float))
        mean = _sorted_sum(B, axis=1) / self.n
        return np.repeat(mean, self.n, axis=0)

    def design(self, k: int) -> np.ndarray:
        if k in self._designs:
            return self._designs[k]
        if k == 0:
            A = np.ones((self.n_points, 1))
        else:
            scale = np.sqrt(self.grid.nodes[k])
            own = self.state(k) / scale
            feats = [own]
            if self.n > 1:
                feats.append(self.expect(self.state(k), k) * np.sqrt(self.n) / scale)
            A = hermite_design(np.concatenate(feats, axis=1), self.degree)
        self._designs[k] = A
        return A

    def _gram(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        blocks_a = self._blocks(A)
        blocks_b = self._blocks(B)
        per_particle = np.einsum("sik,sil->ikl", blocks_a, blocks_b)
        return _sorted_sum(per_particle, axis=0) / self.n_points

    def solver(self, k: int) -> np.ndarray:
        if k not in self._solvers:
            A = self.design(k)
            G = self._gram(A, A)
            K = G.shape[0]
            if K > 1:
                G[np.arange(1, K), np.arange(1, K)] += self.ridge
            w, V = np.linalg.eigh(G)
            cond = float(w[-1] / w[0]) if w[0] > 0 else float("inf")
            if not np.isfinite(cond) or cond > COND_MAX:
                raise IllConditionedRegression(
                    "pooled regression design is ill-conditioned", condition_number=cond, step=k, basis_size=K
                )
            self._solvers[k] = (V / w) @ V.T
        return self._solvers[k]

    def _regress(self, X: np.ndarray, k: int) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if not np.all(np.isfinite(X)):
            raise InvalidArgument("regression target contains non-finite values", step=k)
        flat = X.reshape(self.n_points, -1)
        A = self.design(k)
        coef = self.solver(k) @ self._gram(A, flat)
        return (A @ coef).reshape(X.shape)

    def cond_expect(self, X: np.ndarray, k: int, source: int | None = None) -> np.ndarray:
        source = k + 1 if source is None else source
        if not 0 <= k <= source <= self.grid.N:
            raise InvalidArgument("conditioning step must precede the source step", k=k, source=source)
        if source == k:
            return np.array(X, dtype=float)
        return clip_to_range(self._regress(X, k), X)

    def cond_expect_increment(self, X: np.ndarray, k: int) -> np.ndarray:
        """Diagonal ``E_k[X^i dW^i_k]`` against the particle's own increment."""
        X = np.asarray(X, dtype=float)
        dW = self.ensemble.dW[:, k]
        prod = X[..., None] * dW.reshape((self.n_points,) + (1,) * (X.ndim - 1) + (self.d,))
        return self._regress(prod, k)


@dataclass
class OffDiagonalStats:
    """Per-step mean of ``Y^i_{k+1} dW^j_k / dt`` over ordered pairs ``i != j`` and its standard error."""

    mean: np.ndarray
    stderr: np.ndarray
    max_abs_z: float
    threshold: float = 5.0

    @property
    def passed(self) -> bool:
        return self.max_abs_z <= self.threshold

    def to_dict(self) -> dict[str, Any]:
        return {"max_abs_z": self.max_abs_z, "threshold": self.threshold, "passed": self.passed}


def off_diagonal_stats(sol: DiscreteSolution, backend: PooledBackend) -> OffDiagonalStats | None:
    n = backend.n
    if n < 2:
        return None
    N, dt = backend.grid.N, backend.grid.dt
    S, m, d = backend.samples, sol.m, backend.d
    means = np.zeros((N, m, d))
    errs = np.zeros((N, m, d))
    for k in range(N):
        Y = sol.Y[:, k + 1].reshape(S, n, m)
        dW = backend.ensemble.dW[:, k].reshape(S, n, d)
        total = np.einsum("sim,sjd->smd", Y, dW)
        diag = np.einsum("sim,sid->smd", Y, dW)
        per_sample = (total - diag) / (n * (n - 1) * dt)
        means[k] = per_sample.mean(axis=0)
        errs[k] = per_sample.std(axis=0, ddof=1) / np.sqrt(S)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(errs > 0, np.abs(means) / np.where(errs > 0, errs, 1.0), np.where(means != 0, np.inf, 0.0))
    return OffDiagonalStats(means, errs, float(z.max(initial=0.0)))


@dataclass
class ParticleSolution:
    config: ParticleConfig
    solution: DiscreteSolution = field(repr=False)
    report: PicardReport
    off_diagonal: OffDiagonalStats | None

    @property
    def n_particles(self) -> int:
        return self.config.n_particles

    def per_particle_Y(self) -> np.ndarray:
        """``Y`` reshaped to ``(samples, N, steps + 1, m)``."""
        Y = self.solution.Y
        n = self.n_particles
        return Y.reshape((Y.shape[0] // n, n) + Y.shape[1:])

    def per_particle_Z(self) -> np.ndarray:
        Z = self.solution.Z
        n = self.n_particles
        return Z.reshape((Z.shape[0] // n, n) + Z.shape[1:])

    def empirical_mean_Y(self) -> np.ndarray:
        """``(1/N) sum_i Y^i`` per sample and step; shape ``(samples, steps + 1, m)``."""
        return _sorted_sum(self.per_particle_Y(), axis=1) / self.n_particles

    def empirical_mean_Z(self) -> np.ndarray:
        return _sorted_sum(self.per_particle_Z(), axis=1) / self.n_particles

    @property
    def Y0_average(self) -> np.ndarray:
        """Particle average of ``Y^i_0``, further averaged over samples."""
        return self.solution.Y[:, 0].mean(axis=0)

    def particle(self, i: int) -> DiscreteSolution:
        """Particle ``i`` alone, with norms measured against its own filtration."""
        if self.config.uses_lattice():
            return self.solution
        n = self.n_particles
        be = self.solution.backend
        ens = PathEnsemble(be.grid, be.samples, be.d, be.ensemble.seed, be.ensemble.dW[i::n].copy())
        own = RegressionBackend(ens, degree=self.config.degree, ridge=self.config.ridge)
        return make_solution(own, self.solution.Y[i::n].copy(), self.solution.Z[i::n].copy())


def reduced_generator(gen: Generator) -> Generator:
    """``g(t, y, ybar, z, zbar) = f(t, y, y, z, z)``: a single particle coupled to itself."""

    def drift(t, y, ybar, z, zbar):
        return gen.drift(t, y, y, z, z)

    return Generator(gen.m, gen.d, drift, gen.C, gen.zero_drift_integral_bound, gen.name + "-reduced", dict(gen.params))


def particle_backend(cfg: ParticleConfig, seed: int | None = None, threads: int = 1):
    if cfg.uses_lattice():
        return SelfMeanLattice(build_lattice(cfg.grid))
    ens = particle_ensemble(cfg, seed, threads)
    return PooledBackend(ens, cfg.n_particles, cfg.degree, cfg.ridge)


def solve_particles(cfg: ParticleConfig, backend=None, seed: int | None = None, threads: int = 1) -> ParticleSolution:
    """Picard iteration over the frozen empirical-mean coupling; non-convergence is reported."""
    backend = particle_backend(cfg, seed, threads) if backend is None else backend
    sol, rep = picard_solve(cfg.xi, cfg.gen, backend, tol=cfg.tol, max_iter=cfg.max_iter)
    off = off_diagonal_stats(sol, backend) if isinstance(backend, PooledBackend) else None
    return ParticleSolution(cfg, sol, rep, off)


@dataclass
class ConvergenceStudy:
    ladder: list[int]
    rmse: list[float]
    stderr: list[float]
    reference_Y0: float
    replications: int
    estimates: list[list[float]] = field(repr=False)
    converged: list[bool] = field(repr=False)
    note: str = "exploratory: the large-N limit is a conjecture, no rate is claimed"

    @property
    def nonincreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.rmse, self.rmse[1:]))

    @property
    def trend(self) -> str:
        if len(self.ladder) < 2:
            return "insufficient data"
        ups = [(i, b - a) for i, (a, b) in enumerate(zip(self.rmse, self.rmse[1:])) if b > a]
        noisy = all(gap <= 2.0 * math.hypot(self.stderr[i], self.stderr[i + 1]) for i, gap in ups)
        return "decreasing" if len(ups) <= 1 and noisy else "not decreasing"

    def to_dict(self) -> dict[str, Any]:
        return {
            "ladder": self.ladder,
            "rmse": self.rmse,
            "stderr": self.stderr,
            "reference_Y0": self.reference_Y0,
            "replications": self.replications,
            "trend": self.trend,
            "nonincreasing": self.nonincreasing,
            "all_converged": all(self.converged),
            "note": self.note,
        }

    def rows(self) -> list[tuple[int, float, float]]:
        return list(zip(self.ladder, self.rmse, self.stderr))


def replication_seed(seed: int, n_particles: int, replication: int) -> int:
    return int(np.random.SeedSequence([seed, n_particles, replication]).generate_state(1, np.uint64)[0])


def mean_field_reference(cfg: ParticleConfig) -> float:
    """Scalar mean-field ``Y_0`` from the lattice (``d = 1``) or a large regression ensemble."""
    if cfg.d == 1:
        backend = LatticeBackend(build_lattice(cfg.grid))
    else:
        backend = RegressionBackend(simulate_paths(cfg.grid, 20000, cfg.d, cfg.seed), cfg.degree, cfg.ridge)
    sol, _ = picard_solve(cfg.xi, cfg.gen, backend, tol=cfg.tol, max_iter=cfg.max_iter)
    return float(sol.Y0[0])


def convergence_study(
    template: ParticleConfig,
    ladder: list[int],
    replications: int | None = None,
    threads: int = 1,
    reference: float | None = None,
) -> ConvergenceStudy:
    """RMSE over replications of the particle average of ``Y_0`` against the mean-field ``Y_0``."""
    ladder = [int(n) for n in ladder]
    if not ladder:
        raise InvalidArgument("ladder must be nonempty")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidArgument("ladder must be strictly increasing", ladder=ladder)
    R = template.replications if replications is None else int(replications)
    ref = mean_field_reference(template) if reference is None else float(reference)

    def one(n: int, r: int) -> tuple[float, bool]:
        cfg = replace(template, n_particles=n, backend="lsmc")
        res = solve_particles(cfg, seed=replication_seed(template.seed, n, r))
        return float(res.Y0_average[0]), res.report.converged

    jobs = [(n, r) for n in ladder for r in range(R)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: one(*job), jobs))
    else:
        results = [one(*job) for job in jobs]
    rmse, se, est, conv = [], [], [], []
    for i, n in enumerate(ladder):
        chunk = results[i * R : (i + 1) * R]
        y = np.array([c[0] for c in chunk])
        sq = (y - ref) ** 2
        value = float(np.sqrt(sq.mean()))
        mse_se = float(sq.std(ddof=1) / np.sqrt(R)) if R > 1 else float("nan")
        rmse.append(value)
        se.append(mse_se / (2 * value) if value > 0 else 0.0)
        est.append(y.tolist())
        conv.extend(c[1] for c in chunk)
    return ConvergenceStudy(ladder, rmse, se, ref, R, est, conv)
