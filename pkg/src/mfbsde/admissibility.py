"""Explicit small-terminal-value certificate.

All constants derive from the declared ``C``, ``T`` and bounds:

    rho^2 = 1 / (4097 C^2 (T^2 + 1))
    beta  = 16 C sqrt(T^2 + 1)
    M     = 512 C^2 (T^2 + 1)
    R     = 2 sqrt(2) b,   b = ||xi||_inf + ||int_0^T |f(t,0,0,0,0)| dt||_inf

``b`` bounds the shifted terminal value, which is the one the contraction
argument actually runs on; with a vanishing zero drift it is ``||xi||_inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigurationError, InvalidArgument
from .generators import Generator
from .kernel import TimeGrid, build_lattice, simulate_paths
from .terminals import TerminalValue

CHECK_NAMES = ("smallness", "radius_condition", "contraction_condition")


@dataclass(frozen=True)
class Check:
    lhs: float
    rhs: float
    passed: bool
    relation: str

    def to_dict(self) -> dict[str, Any]:
        return {"lhs": self.lhs, "relation": self.relation, "rhs": self.rhs, "passed": self.passed}


@dataclass(frozen=True)
class AdmissibilityReport:
    """Constants and checks.

    ``smallness``: ``b <= rho``; ``radius_condition``: ``b <= 1/(4 beta)``;
    ``contraction_condition``: ``b^2 < 1/(8M)``, equivalently ``M R^2 < 1``.
    """

    C: float
    T: float
    xi_bound: float
    zero_drift_integral_bound: float
    rho2: float
    rho: float
    beta: float
    R: float
    M_const: float
    MR2: float
    checks: dict[str, Check]

    @property
    def certified(self) -> bool:
        return all(c.passed for c in self.checks.values())

    @property
    def overall(self) -> str:
        return "certified" if self.certified else "not-certified"

    @property
    def effective_bound(self) -> float:
        return self.xi_bound + self.zero_drift_integral_bound

    def to_dict(self) -> dict[str, Any]:
        return {
            "C": self.C,
            "T": self.T,
            "xi_bound": self.xi_bound,
            "zero_drift_integral_bound": self.zero_drift_integral_bound,
            "rho2": self.rho2,
            "rho": self.rho,
            "beta": self.beta,
            "R": self.R,
            "M": self.M_const,
            "MR2": self.MR2,
            "checks": {k: self.checks[k].to_dict() for k in CHECK_NAMES},
            "overall": self.overall,
        }


def compute_constants(C: float, T: float, xi_bound: float = 0.0, zero_drift_integral_bound: float = 0.0) -> AdmissibilityReport:
    if not (C > 0 and math.isfinite(C)):
        raise InvalidArgument("C must be positive and finite", C=C)
    if not (T > 0 and math.isfinite(T)):
        raise InvalidArgument("T must be positive and finite", T=T)
    if not xi_bound >= 0 or not zero_drift_integral_bound >= 0:
        raise InvalidArgument(
            "declared bounds must be nonnegative", xi_bound=xi_bound, zero_drift_integral_bound=zero_drift_integral_bound
        )
    s = T * T + 1.0
    rho2 = 1.0 / (4097.0 * C * C * s)
    rho = math.sqrt(rho2)
    beta = 16.0 * C * math.sqrt(s)
    M = 512.0 * C * C * s
    b = xi_bound + zero_drift_integral_bound
    R = 2.0 * math.sqrt(2.0) * b
    MR2 = M * R * R
    # 4 beta b and sqrt(8M) b are the same number; one value decides both
    # conditions, so the contraction condition can never pass alone
    q = 4.0 * beta * b
    checks = {
        "smallness": Check(b, rho, b <= rho, "<="),
        "radius_condition": Check(b, 1.0 / (4.0 * beta), q <= 1.0, "<="),
        "contraction_condition": Check(b * b, 1.0 / (8.0 * M), q < 1.0 and MR2 < 1.0, "<"),
    }
    return AdmissibilityReport(C, T, xi_bound, zero_drift_integral_bound, rho2, rho, beta, R, M, MR2, checks)


def _terminal_states(xi: TerminalValue, grid: TimeGrid, d: int, backend=None):
    if backend is not None:
        N = backend.grid.N
        return backend.state(N), backend.mask(N)
    if d == 1:
        lat = build_lattice(grid)
        return lat.values(grid.N)[:, None], None
    ens = simulate_paths(grid, 4096, d, seed=0)
    return ens.W[:, -1], None


def certify_scenario(gen: Generator, xi: TerminalValue, grid: TimeGrid, backend=None) -> AdmissibilityReport:
    """Certificate from the declared bounds, after checking them against samples.

    The terminal states come from ``backend`` when given, otherwise from a
    binomial lattice (``d = 1``) or a fixed 4096-path ensemble.
    """
    states, mask = _terminal_states(xi, grid, gen.d, backend)
    xi.check_bound(states, mask)
    g = np.stack([gen.zero_drift(t) for t in grid.nodes[:-1]])
    integral = float(np.sqrt(((np.abs(g).sum(axis=0) * grid.dt) ** 2).sum()))
    declared = gen.zero_drift_integral_bound
    if integral > declared * (1 + 1e-12):
        raise ConfigurationError(
            "zero-drift integral exceeds its declared bound", declared=declared, computed=integral
        )
    return compute_constants(gen.C, grid.T, xi.bound, declared)
