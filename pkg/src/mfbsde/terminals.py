"""Bounded terminal values ``xi = phi(W_T)``."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigurationError, InvalidArgument, UnsupportedConfiguration


@dataclass(frozen=True)
class TerminalValue:
    """Terminal value as a map from terminal states ``(P, d)`` to ``(P, m)``.

    ``bound`` is the declared ``||xi||_inf``. A shifted terminal value keeps a
    reference to the ``original`` one together with the constant ``shift``.
    """

    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    bound: float
    m: int = 1
    name: str = "custom"
    params: dict[str, Any] = field(default_factory=dict)
    shift: np.ndarray | None = field(default=None, repr=False)
    original: TerminalValue | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self.bound >= 0:
            raise InvalidArgument("declared terminal bound must be nonnegative", bound=self.bound)

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        out = np.asarray(self.fn(states), dtype=float)
        out = np.broadcast_to(out, (states.shape[0], self.m)).copy()
        if not np.all(np.isfinite(out)):
            raise ConfigurationError("terminal value is not finite", name=self.name)
        return out

    def sampled_max(self, states: np.ndarray, mask: np.ndarray | None = None) -> float:
        vals = np.sqrt((self.evaluate(states) ** 2).sum(axis=-1))
        if mask is not None:
            vals = vals[mask]
        return float(vals.max(initial=0.0))

    def check_bound(self, states: np.ndarray, mask: np.ndarray | None = None) -> float:
        """Raise :class:`ConfigurationError` when samples exceed the declared bound."""
        observed = self.sampled_max(states, mask)
        if observed > self.bound:
            raise ConfigurationError(
                "sampled |xi| exceeds the declared bound", declared=self.bound, sampled=observed, name=self.name
            )
        return observed


def _heaviside(x: np.ndarray) -> np.ndarray:
    # H(0) = 1/2 keeps symmetric lattices unbiased at the tie node
    return np.where(x > 0, 1.0, np.where(x == 0, 0.5, 0.0))


def _norm_bound(per_component: float, m: int) -> float:
    # bounds refer to the Euclidean norm of the m-vector
    return float(per_component * np.sqrt(m))


def _columns(states: np.ndarray, m: int) -> np.ndarray:
    d = states.shape[1]
    return states[:, [i % d for i in range(m)]]


def make_constant(value: float = 0.0, m: int = 1, bound: float | None = None) -> TerminalValue:
    def fn(states):
        return np.full((states.shape[0], m), float(value))

    return TerminalValue(fn, _norm_bound(abs(value), m) if bound is None else bound, m, "constant", {"value": value})


def make_digital(amplitude: float = 1.0, strike: float = 0.0, m: int = 1, bound: float | None = None) -> TerminalValue:
    """``amplitude * 1{W_T > strike}`` with the tie ``W_T = strike`` valued at half."""

    def fn(states):
        return amplitude * _heaviside(_columns(states, m) - strike)

    params = {"amplitude": amplitude, "strike": strike}
    return TerminalValue(fn, _norm_bound(abs(amplitude), m) if bound is None else bound, m, "digital", params)


def make_tanh(
    amplitude: float = 1.0, scale: float = 1.0, base: float = 0.0, m: int = 1, bound: float | None = None
) -> TerminalValue:
    def fn(states):
        return base + amplitude * np.tanh(scale * _columns(states, m))

    params = {"amplitude": amplitude, "scale": scale, "base": base}
    return TerminalValue(fn, _norm_bound(abs(base) + abs(amplitude), m) if bound is None else bound, m, "tanh", params)


def make_sine(
    amplitude: float = 1.0, frequency: float = 1.0, base: float = 0.0, m: int = 1, bound: float | None = None
) -> TerminalValue:
    def fn(states):
        return base + amplitude * np.sin(frequency * _columns(states, m))

    params = {"amplitude": amplitude, "frequency": frequency, "base": base}
    return TerminalValue(fn, _norm_bound(abs(base) + abs(amplitude), m) if bound is None else bound, m, "sine", params)


CATALOG: dict[str, Callable[..., TerminalValue]] = {
    "constant": make_constant,
    "digital": make_digital,
    "tanh": make_tanh,
    "sine": make_sine,
}


def from_catalog(name: str, params: dict[str, Any] | None = None, **kwargs) -> TerminalValue:
    if name not in CATALOG:
        raise UnsupportedConfiguration(f"unknown terminal value {name!r}", name=name, known=sorted(CATALOG))
    try:
        return CATALOG[name](**(params or {}), **kwargs)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for terminal value {name!r}: {exc}", name=name) from None


def shifted_by(base: TerminalValue, delta: float) -> TerminalValue:
    """``base + delta`` with the bound raised accordingly (used by the comparison battery)."""

    def fn(states):
        return base.fn(states) + delta

    return TerminalValue(fn, base.bound + abs(delta), base.m, base.name + "+const", {**base.params, "delta": delta})
