from __future__ import annotations

import itertools

import numpy as np
import pytest

from mfbsde.condexp import LatticeBackend
from mfbsde.kernel import build_grid, build_lattice

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def lattice_backend(N: int, T: float = 1.0, mode: str = "binomial") -> LatticeBackend:
    return LatticeBackend(build_lattice(build_grid(T, N), mode))


@pytest.fixture
def lattice64() -> LatticeBackend:
    return lattice_backend(64)


@pytest.fixture
def lattice16() -> LatticeBackend:
    return lattice_backend(16)


def enumerate_paths(N: int, T: float = 1.0) -> np.ndarray:
    """All ``2**N`` binomial paths of ``W``; shape ``(2**N, N+1)``."""
    h = np.sqrt(T / N)
    steps = np.array(list(itertools.product((-1, 1), repeat=N)))
    # integer partial sums keep W = 0 exact, so digital payoffs see the true ties
    W = np.zeros((len(steps), N + 1))
    W[:, 1:] = np.cumsum(steps, axis=1) * h
    return W


def brute_cond_expect(N: int, k: int, fn, T: float = 1.0) -> dict[float, float]:
    """``E[fn(path) | W_{t_k} = w]`` by averaging over every path; keyed by the rounded node value."""
    W = enumerate_paths(N, T)
    vals = np.array([fn(w) for w in W])
    out: dict[float, list[float]] = {}
    for w, v in zip(W[:, k], vals):
        out.setdefault(round(float(w), 9), []).append(v)
    return {key: float(np.mean(v)) for key, v in out.items()}
