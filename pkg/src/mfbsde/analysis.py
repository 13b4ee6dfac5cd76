"""BMO estimates, the a-priori BMO bound, closed-form oracles and the comparison harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import norms
from .admissibility import certify_scenario
from .errors import ConfigurationError, HypothesisError, InvalidArgument, UnsupportedConfiguration
from .generators import (
    ConditionReport,
    Generator,
    GrowthEnvelope,
    _sample_args,
    check_A1_A2_A3,
    check_envelope,
    evaluate,
)
from .picard import DiscreteSolution, PicardReport, make_solution, picard_solve
from .terminals import TerminalValue


# ---------------------------------------------------------------------------
# BMO


@dataclass
class BmoEstimate:
    """Sampled ``||Z||_{Z^2[0,T]}`` over deterministic grid stopping times.

    ``profile[k]`` is the largest sampled ``E_{t_k}[sum_{j>=k} |Z_j|^2 dt]``.
    """

    value: float
    profile: np.ndarray
    lower_estimate: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {"value": self.value, "profile": self.profile.tolist(), "lower_estimate": self.lower_estimate}


def estimate_bmo(sol: DiscreteSolution, backend=None) -> BmoEstimate:
    backend = sol.backend if backend is None else backend
    profile = norms.z2_profile(sol.Z, backend)
    return BmoEstimate(float(np.sqrt(max(profile.max(), 0.0))), profile)


@dataclass
class LemmaBoundReport:
    M_bound: float
    C: float
    lam_M: float
    lambar_M: float
    k_norm: float
    rhs: float
    rhs_squared_k: float
    lhs: float
    passed: bool
    passed_squared_k: bool
    envelope_check: dict[str, Any] | None = None

    @property
    def variants_disagree(self) -> bool:
        return self.passed != self.passed_squared_k

    def to_dict(self) -> dict[str, Any]:
        return {
            "M_bound": self.M_bound,
            "C": self.C,
            "lambda_M": self.lam_M,
            "lambdabar_M": self.lambar_M,
            "k_norm": self.k_norm,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "passed": self.passed,
            "rhs_squared_k": self.rhs_squared_k,
            "passed_squared_k": self.passed_squared_k,
            "variants_disagree": self.variants_disagree,
            "envelope_check": self.envelope_check,
        }


def lemma_rhs(C: float, M: float, lam_M: float, lambar_M: float, k_norm: float) -> float:
    """``e^{8CM} (1 + 4C [lam(M) + lambar(M)] ||k||) / (4 C^2)``."""
    return math.exp(8 * C * M) * (1 + 4 * C * (lam_M + lambar_M) * k_norm) / (4 * C * C)


def check_lemma_bound(
    sol: DiscreteSolution,
    gen: Generator,
    M_bound: float | None = None,
    envelope: GrowthEnvelope | None = None,
    verify_envelope: bool = True,
    envelope_samples: int = 2048,
) -> LemmaBoundReport:
    """Compare ``estimate_bmo(Z)^2`` with the bound implied by the growth envelope.

    ``M_bound`` defaults to the sampled ``sup |Y|``; an explicit value smaller
    than the samples is rejected. The verdict uses ``||k||`` to the first
    power, and the squared-norm variant is reported alongside.
    """
    if sol.m != 1 or gen.m != 1:
        raise UnsupportedConfiguration("the BMO bound is one-dimensional", m=sol.m)
    env = envelope or gen.envelope
    if env is None:
        raise ConfigurationError("generator has no declared growth envelope", name=gen.name)
    observed = sol.supY
    M = observed if M_bound is None else float(M_bound)
    if not M >= 0:
        raise InvalidArgument("M_bound must be nonnegative", M_bound=M)
    if observed > M:
        raise ConfigurationError("solution exceeds the claimed bound M", M_bound=M, sampled_sup=observed)
    env_report = None
    if verify_envelope and gen.d == 1:
        env_report = check_envelope(gen, env, samples=envelope_samples, box_radius=max(M, 1e-3), t_max=sol.grid.T)
    lam_M, lambar_M = float(env.lam(M)), float(env.lambar(M))
    kn = env.k_norm(sol.grid)
    rhs = lemma_rhs(env.C, M, lam_M, lambar_M, kn)
    rhs2 = lemma_rhs(env.C, M, lam_M, lambar_M, kn * kn)
    lhs = estimate_bmo(sol).value ** 2
    return LemmaBoundReport(M, env.C, lam_M, lambar_M, kn, rhs, rhs2, lhs, lhs <= rhs, lhs <= rhs2, env_report)


# ---------------------------------------------------------------------------
# closed-form oracles


def _cond_chain(backend, terminal: np.ndarray) -> np.ndarray:
    """``E_{t_k}[X]`` for every ``k`` by one-step backward induction; shape ``(P, N+1, m)``."""
    N = backend.grid.N
    out = np.zeros((terminal.shape[0], N + 1) + terminal.shape[1:])
    out[:, N] = terminal
    for k in range(N - 1, -1, -1):
        out[:, k] = backend.cond_expect(out[:, k + 1], k)
        out[~backend.mask(k), k] = 0.0
    return out


def _martingale_z(backend, Y: np.ndarray) -> np.ndarray:
    N = backend.grid.N
    P, m = Y.shape[0], Y.shape[2]
    Z = np.zeros((P, N, m, backend.d))
    for k in range(N):
        Z[:, k] = backend.cond_expect_increment(Y[:, k + 1], k) / backend.grid.dt
        Z[~backend.mask(k), k] = 0.0
    return Z


ORACLES = ("zero", "mean-field-linear", "cole-hopf")


def oracle_solution(kind: str, xi: TerminalValue, backend, a: float | None = None, c: float | None = None) -> DiscreteSolution:
    """Closed-form solutions evaluated with the backend's conditional expectations.

    ``zero``: ``Y_t = E_t[xi]``. ``mean-field-linear``: for ``f = a ybar``,
    ``Y_t = E_t[xi] + E[xi] (e^{a (T - t)} - 1)``. ``cole-hopf``: for
    ``f = c |z|^2`` with ``m = 1``, ``Y_t = ln E_t[e^{2 c xi}] / (2c)``.
    ``Z`` is the one-step martingale-representation estimate of ``Y``.
    """
    grid = backend.grid
    N = grid.N
    valid = backend.mask(N)
    terminal = np.zeros((backend.n_points, xi.m))
    terminal[valid] = xi.evaluate(backend.state(N)[valid])
    if kind == "zero":
        Y = _cond_chain(backend, terminal)
    elif kind == "mean-field-linear":
        if a is None:
            raise InvalidArgument("mean-field-linear oracle needs the coefficient a")
        Y = _cond_chain(backend, terminal)
        mean_xi = backend.expect(terminal, N)
        growth = np.expm1(a * (grid.T - grid.nodes))
        Y += growth[None, :, None] * mean_xi[None, None, :]
        for k in range(N + 1):
            Y[~backend.mask(k), k] = 0.0
    elif kind == "cole-hopf":
        if c is None or c == 0:
            raise InvalidArgument("cole-hopf oracle needs a nonzero coefficient c")
        if xi.m != 1:
            raise UnsupportedConfiguration("cole-hopf oracle is scalar (m = 1)", m=xi.m)
        E = _cond_chain(backend, np.where(valid[:, None], np.exp(2 * c * terminal), 0.0))
        Y = np.zeros_like(E)
        for k in range(N + 1):
            mk = backend.mask(k)
            if np.any(E[mk, k] <= 0):
                raise UnsupportedConfiguration("cole-hopf oracle needs positive conditional moments (lattice)")
            Y[mk, k] = np.log(E[mk, k]) / (2 * c)
    else:
        raise UnsupportedConfiguration(f"unknown oracle {kind!r}", kind=kind, known=list(ORACLES))
    Y[valid, N] = terminal[valid]
    return make_solution(backend, Y, _martingale_z(backend, Y))


def oracle_for(gen: Generator) -> tuple[str, dict[str, float]] | None:
    """Oracle matching a catalog generator, if any."""
    p = gen.params
    if gen.name == "zero":
        return "zero", {}
    if gen.name == "linear-mean-field" and p.get("offset", 0.0) == 0.0:
        return "mean-field-linear", {"a": p["a"]}
    if gen.name == "quadratic-z" and p.get("offset", 0.0) == 0.0 and gen.m == 1 and p["c"] != 0:
        return "cole-hopf", {"c": p["c"]}
    return None


# ---------------------------------------------------------------------------
# comparison


@dataclass
class ComparisonReport:
    max_excess: float
    profile: np.ndarray
    tolerance: float
    passed: bool
    regime: str
    conditions: ConditionReport
    certified: tuple[bool, bool]
    converged: tuple[bool, bool]
    min_margin: float
    hypothesis_violations: list[dict[str, Any]] = field(default_factory=list)
    reports: tuple[PicardReport, PicardReport] | None = field(default=None, repr=False)
    solutions: tuple[DiscreteSolution, DiscreteSolution] | None = field(default=None, repr=False)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "regime": self.regime,
            "max_excess": self.max_excess,
            "tolerance": self.tolerance,
            "min_margin": self.min_margin,
            "certified": list(self.certified),
            "converged": list(self.converged),
            "conditions": self.conditions.to_dict(),
            "hypothesis_violations": self.hypothesis_violations,
            "profile": self.profile.tolist(),
        }


def check_terminal_order(xi: TerminalValue, xi_t: TerminalValue, backend) -> dict[str, Any] | None:
    """Witness of ``xi > xi~`` at a supported terminal state, or ``None``."""
    N = backend.grid.N
    valid = backend.mask(N) & (backend.weights[:, N] > 0)
    states = backend.state(N)[valid]
    gap = xi.evaluate(states)[:, 0] - xi_t.evaluate(states)[:, 0]
    i = int(np.argmax(gap)) if gap.size else 0
    if gap.size and gap[i] > 0:
        return {"kind": "terminal", "state": states[i].tolist(), "xi": float(xi.evaluate(states[i : i + 1])[0, 0]),
                "xi_tilde": float(xi_t.evaluate(states[i : i + 1])[0, 0])}
    return None


def check_generator_order(
    gen: Generator, gen_t: Generator, samples: int = 2048, box_radius: float = 1.0, seed: int = 0, t_max: float = 1.0
) -> dict[str, Any] | None:
    """Witness of ``f > f~`` on sampled tuples, or ``None``."""
    rng = np.random.default_rng(seed)
    y, ybar, z, zbar = _sample_args(rng, samples, 1, 1, box_radius)
    times = rng.uniform(0, t_max, 16)
    for t in times:
        gap = evaluate(gen, t, y, ybar, z, zbar)[:, 0] - evaluate(gen_t, t, y, ybar, z, zbar)[:, 0]
        i = int(np.argmax(gap))
        if gap[i] > 0:
            return {"kind": "generator", "t": float(t), "y": float(y[i, 0]), "ybar": float(ybar[i, 0]),
                    "z": float(z[i, 0, 0]), "zbar": float(zbar[i, 0, 0]), "excess": float(gap[i])}
    return None


def compare_solutions(
    gen: Generator,
    xi: TerminalValue,
    gen_t: Generator,
    xi_t: TerminalValue,
    backend,
    tol: float | None = None,
    max_iter: int = 50,
    exploratory: bool = False,
    a1_bound: float = np.inf,
    a2_bound: float = np.inf,
    samples: int = 2048,
    box_radius: float = 1.0,
    seed: int = 0,
    excess_tol: float | None = None,
) -> ComparisonReport:
    """Solve both equations on a shared backend and measure ``max (Y - Y~)^+``.

    Violated order hypotheses or failed conditions raise :class:`HypothesisError`
    unless ``exploratory`` is set, in which case they are recorded and the run
    is labeled exploratory. Pairs that are not both certified are exploratory
    too.
    """
    for g in (gen, gen_t):
        if g.m != 1 or g.d != 1:
            raise UnsupportedConfiguration("comparison is one-dimensional (m = d = 1)", m=g.m, d=g.d)
    violations = []
    w = check_terminal_order(xi, xi_t, backend)
    if w is not None:
        violations.append(w)
    w = check_generator_order(gen, gen_t, samples, box_radius, seed, backend.grid.T)
    if w is not None:
        violations.append(w)
    if violations and not exploratory:
        raise HypothesisError("order hypotheses are violated", witness=violations[0])

    sol, rep = picard_solve(xi, gen, backend, tol=tol, max_iter=max_iter)
    sol_t, rep_t = picard_solve(xi_t, gen_t, backend, tol=tol, max_iter=max_iter)
    cond = check_A1_A2_A3(gen, gen_t, sol, sol_t, a1_bound, a2_bound, samples, box_radius, seed)
    if not cond.passed:
        if not exploratory:
            raise HypothesisError("comparison conditions A1-A3 fail", conditions=cond.to_dict())
        violations.append({"kind": "conditions", "conditions": cond.to_dict()})

    certified = (
        certify_scenario(gen, xi, backend.grid, backend).certified,
        certify_scenario(gen_t, xi_t, backend.grid, backend).certified,
    )
    N = backend.grid.N
    diff = sol.Y[..., 0] - sol_t.Y[..., 0]
    profile = np.zeros(N + 1)
    margin = np.inf
    for k in range(N + 1):
        valid = backend.mask(k) & (backend.weights[:, k] > 0)
        dk = diff[valid, k]
        profile[k] = float(np.maximum(dk, 0.0).max(initial=0.0))
        margin = min(margin, float((-dk).min(initial=np.inf)))
    if excess_tol is None:
        if backend.kind == "lattice":
            excess_tol = 1e-8
        else:
            excess_tol = 3.0 * math.hypot(sol.y0_stderr, sol_t.y0_stderr)
    max_excess = float(profile.max())
    regime = "certified" if all(certified) and not violations else "exploratory"
    return ComparisonReport(
        max_excess=max_excess,
        profile=profile,
        tolerance=excess_tol,
        passed=max_excess <= excess_tol,
        regime=regime,
        conditions=cond,
        certified=certified,
        converged=(rep.converged, rep_t.converged),
        min_margin=margin,
        hypothesis_violations=violations,
        reports=(rep, rep_t),
        solutions=(sol, sol_t),
    )
