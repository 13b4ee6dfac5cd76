"""Mean-field generators ``f(t, y, ybar, z, zbar)`` and their spot-checks.

Drifts are vectorized: ``y`` and ``ybar`` carry a trailing axis of length
``m``, ``z`` and ``zbar`` trailing axes ``(m, d)``; leading axes broadcast.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import norms
from .errors import EvaluationError, InvalidArgument, UnsupportedConfiguration

Drift = Callable[[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GrowthEnvelope:
    """Bound ``|f(s,y,ybar,z)| <= k_s^2 [lam(|y|) + lambar(|ybar|)] + C z^2``.

    ``k`` is a deterministic function of time.
    """

    lam: Callable[[float], float]
    lambar: Callable[[float], float]
    k: Callable[[float], float]
    C: float

    def k_norm(self, grid) -> float:
        # deterministic integrand: the sup over stopping times sits at t = 0
        kk = np.array([self.k(t) for t in grid.nodes[:-1]])
        return float(np.sqrt(np.sum(kk**2) * grid.dt))


@dataclass(frozen=True)
class Generator:
    m: int
    d: int
    drift: Drift = field(repr=False)
    C: float
    zero_drift_integral_bound: float = 0.0
    name: str = "custom"
    params: dict[str, Any] = field(default_factory=dict)
    envelope: GrowthEnvelope | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.m < 1 or self.d < 1:
            raise InvalidArgument("generator dimensions must be positive", m=self.m, d=self.d)
        if not self.C > 0:
            raise InvalidArgument("declared constant C must be positive", C=self.C)
        if self.zero_drift_integral_bound < 0:
            raise InvalidArgument("zero-drift integral bound must be nonnegative", bound=self.zero_drift_integral_bound)

    def zero_drift(self, t: float) -> np.ndarray:
        """``f(t, 0, 0, 0, 0)`` as a vector of length ``m``."""
        zy = np.zeros((1, self.m))
        zz = np.zeros((1, self.m, self.d))
        return evaluate(self, t, zy, zy, zz, zz)[0]

    def __call__(self, t, y, ybar, z, zbar) -> np.ndarray:
        return evaluate(self, t, y, ybar, z, zbar)


def evaluate(gen: Generator, t: float, y, ybar, z, zbar) -> np.ndarray:
    """Evaluate the drift with shape checks; non-finite output raises :class:`EvaluationError`."""
    y, ybar, z, zbar = (np.asarray(a, dtype=float) for a in (y, ybar, z, zbar))
    m, d = gen.m, gen.d
    for name, arr, tail in (("y", y, (m,)), ("ybar", ybar, (m,)), ("z", z, (m, d)), ("zbar", zbar, (m, d))):
        if arr.shape[arr.ndim - len(tail) :] != tail or arr.ndim < len(tail):
            raise InvalidArgument(f"argument {name} has shape {arr.shape}, expected trailing {tail}")
    out = np.asarray(gen.drift(t, y, ybar, z, zbar), dtype=float)
    lead = np.broadcast_shapes(y.shape[:-1], ybar.shape[:-1], z.shape[:-2], zbar.shape[:-2])
    out = np.broadcast_to(out, lead + (m,))
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0][:-1]
        idx = tuple(bad)

        def pick(a, nt):
            a = np.broadcast_to(a, lead + a.shape[a.ndim - nt :])
            return a[idx].tolist()

        raise EvaluationError(
            "generator returned a non-finite value",
            t=float(t),
            y=pick(y, 1),
            ybar=pick(ybar, 1),
            z=pick(z, 2),
            zbar=pick(zbar, 2),
            value=out[idx].tolist(),
        )
    return out


def _lead(y, ybar, z, zbar, m):
    return np.broadcast_shapes(y.shape[:-1], ybar.shape[:-1], z.shape[:-2], zbar.shape[:-2]) + (m,)


def _rowsq(z):
    return (z**2).sum(axis=-1)


def _signed_sq(x):
    return x * np.abs(x)


def _clip_sq(s, r):
    s = np.abs(s)
    return np.where(s <= r, s**2, r * (2 * s - r))


def _const(v):
    return lambda _s: v


def make_zero(m: int = 1, d: int = 1, C: float = 1.0, zero_drift_integral_bound: float = 0.0) -> Generator:
    def drift(t, y, ybar, z, zbar):
        return np.zeros(_lead(y, ybar, z, zbar, m))

    env = GrowthEnvelope(_const(0.0), _const(0.0), _const(0.0), C)
    return Generator(m, d, drift, C, zero_drift_integral_bound, "zero", {}, env)


def make_linear_mean_field(
    a: float, offset: float = 0.0, m: int = 1, d: int = 1, C: float = 1.0, zero_drift_integral_bound: float = 0.0
) -> Generator:
    """``a * ybar + offset``."""

    def drift(t, y, ybar, z, zbar):
        return np.broadcast_to(a * ybar + offset, _lead(y, ybar, z, zbar, m))

    env = GrowthEnvelope(lambda s: abs(offset), lambda s: abs(a) * s, _const(1.0), C)
    return Generator(m, d, drift, C, zero_drift_integral_bound, "linear-mean-field", {"a": a, "offset": offset}, env)


def make_quadratic_z(
    c: float, offset: float = 0.0, m: int = 1, d: int = 1, C: float = 1.0, zero_drift_integral_bound: float = 0.0
) -> Generator:
    """``c |z_i|^2 + offset`` row by row."""

    def drift(t, y, ybar, z, zbar):
        return np.broadcast_to(c * _rowsq(z) + offset, _lead(y, ybar, z, zbar, m))

    env = GrowthEnvelope(lambda s: abs(offset), _const(0.0), _const(1.0), C)
    return Generator(m, d, drift, C, zero_drift_integral_bound, "quadratic-z", {"c": c, "offset": offset}, env)


def make_sum_of_squares(
    offset: float = 0.0, m: int = 1, d: int = 1, C: float = 1.0, zero_drift_integral_bound: float = 0.0
) -> Generator:
    """``y_i^2 + ybar_i^2 + |z_i|^2 + |zbar_i|^2 + offset``; depends on ``zbar`` so no growth envelope."""

    def drift(t, y, ybar, z, zbar):
        return np.broadcast_to(y**2 + ybar**2 + _rowsq(z) + _rowsq(zbar) + offset, _lead(y, ybar, z, zbar, m))

    return Generator(m, d, drift, C, zero_drift_integral_bound, "sum-of-squares", {"offset": offset})


def make_clipped_quadratic(
    c: float = 1.0,
    radius: float = 1.0,
    offset: float = 0.0,
    m: int = 1,
    d: int = 1,
    C: float = 1.0,
    zero_drift_integral_bound: float = 0.0,
) -> Generator:
    """The sum-of-squares shape with each square replaced by ``s^2`` inside ``|s| <= radius``
    and its tangent line outside."""
    if radius <= 0:
        raise InvalidArgument("radius must be positive", radius=radius)

    def drift(t, y, ybar, z, zbar):
        r = radius
        val = _clip_sq(y, r) + _clip_sq(ybar, r)
        val = val + _clip_sq(np.sqrt(_rowsq(z)), r) + _clip_sq(np.sqrt(_rowsq(zbar)), r)
        return np.broadcast_to(c * val + offset, _lead(y, ybar, z, zbar, m))

    params = {"c": c, "radius": radius, "offset": offset}
    return Generator(m, d, drift, C, zero_drift_integral_bound, "clipped-quadratic", params)


def make_signed_quadratic(
    cy: float = 0.0,
    cybar: float = 0.0,
    cz: float = 0.0,
    czbar: float = 0.0,
    offset: float = 0.0,
    m: int = 1,
    d: int = 1,
    C: float = 1.0,
    zero_drift_integral_bound: float = 0.0,
) -> Generator:
    """``cy y|y| + cybar ybar|ybar| + cz |z|^2 + czbar |zbar|^2 + offset``.

    Nondecreasing in ``ybar`` whenever ``cybar >= 0``.
    """

    def drift(t, y, ybar, z, zbar):
        val = cy * _signed_sq(y) + cybar * _signed_sq(ybar) + cz * _rowsq(z) + czbar * _rowsq(zbar) + offset
        return np.broadcast_to(val, _lead(y, ybar, z, zbar, m))

    env = None
    if czbar == 0:
        env = GrowthEnvelope(lambda s: abs(offset) + abs(cy) * s**2, lambda s: abs(cybar) * s**2, _const(1.0), C)
    params = {"cy": cy, "cybar": cybar, "cz": cz, "czbar": czbar, "offset": offset}
    return Generator(m, d, drift, C, zero_drift_integral_bound, "signed-quadratic", params, env)


def make_linear(
    a: float = 0.0,
    b: float = 0.0,
    c: float = 0.0,
    e: float = 0.0,
    offset: float = 0.0,
    m: int = 1,
    d: int = 1,
    C: float = 1.0,
    zero_drift_integral_bound: float = 0.0,
) -> Generator:
    """``a y + b ybar + c sum_j z_ij + e sum_j zbar_ij + offset`` (globally Lipschitz)."""

    def drift(t, y, ybar, z, zbar):
        val = a * y + b * ybar + c * z.sum(axis=-1) + e * zbar.sum(axis=-1) + offset
        return np.broadcast_to(val, _lead(y, ybar, z, zbar, m))

    env = None
    if e == 0:
        # |c z| <= C z^2 + c^2 / (4C)
        extra = c * c * d / (4 * C)
        env = GrowthEnvelope(lambda s: abs(offset) + extra + abs(a) * s, lambda s: abs(b) * s, _const(1.0), C)
    params = {"a": a, "b": b, "c": c, "e": e, "offset": offset}
    return Generator(m, d, drift, C, zero_drift_integral_bound, "linear", params, env)


CATALOG: dict[str, Callable[..., Generator]] = {
    "zero": make_zero,
    "linear-mean-field": make_linear_mean_field,
    "quadratic-z": make_quadratic_z,
    "sum-of-squares": make_sum_of_squares,
    "paper-example": make_sum_of_squares,  # accepted alias
    "clipped-quadratic": make_clipped_quadratic,
    "signed-quadratic": make_signed_quadratic,
    "linear": make_linear,
}


def from_catalog(name: str, params: dict[str, Any] | None = None, **kwargs) -> Generator:
    if name not in CATALOG:
        raise UnsupportedConfiguration(f"unknown generator {name!r}", name=name, known=sorted(CATALOG))
    try:
        return CATALOG[name](**(params or {}), **kwargs)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for generator {name!r}: {exc}", name=name) from None


# ---------------------------------------------------------------------------
# randomized spot-checks


def _sample_args(rng, n, m, d, r):
    return (
        rng.uniform(-r, r, (n, m)),
        rng.uniform(-r, r, (n, m)),
        rng.uniform(-r, r, (n, m, d)),
        rng.uniform(-r, r, (n, m, d)),
    )


def _vnorm(a, nt):
    return np.sqrt((a**2).reshape(a.shape[0], -1).sum(axis=-1)) if nt else a


@dataclass
class AssumptionReport:
    C: float
    worst_ratio: float
    passed: bool
    samples: int
    box_radius: float
    witness: dict[str, Any] | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "C": self.C,
            "worst_ratio": self.worst_ratio,
            "passed": self.passed,
            "samples": self.samples,
            "box_radius": self.box_radius,
            "witness": self.witness,
        }


def check_assumption_A(
    gen: Generator,
    samples: int = 4096,
    box_radius: float = 1.0,
    seed: int = 0,
    t_max: float = 1.0,
    rtol: float = 1e-12,
) -> AssumptionReport:
    """Search for violations of the local quadratic Lipschitz bound with constant ``gen.C``.

    Half the pairs are independent uniform draws from the box, half are
    local perturbations, which is where smooth generators attain their
    worst ratio. ``rtol`` absorbs floating-point rounding in the ratio.
    """
    if samples < 1:
        raise InvalidArgument("samples must be >= 1", samples=samples)
    rng = np.random.default_rng(seed)
    m, d, r = gen.m, gen.d, box_radius
    t = _chunk_times(rng, samples, t_max)
    p1 = _sample_args(rng, samples, m, d, r)
    far = _sample_args(rng, samples, m, d, r)
    eps = r * 10.0 ** rng.uniform(-8, 0, samples)
    near = tuple(a + eps.reshape((-1,) + (1,) * (a.ndim - 1)) * rng.uniform(-1, 1, a.shape) for a in p1)
    local = np.arange(samples) % 2 == 1
    p2 = tuple(np.where(local.reshape((-1,) + (1,) * (a.ndim - 1)), b, a) for a, b in zip(far, near))

    f1 = _evaluate_chunked(gen, t, p1)
    f2 = _evaluate_chunked(gen, t, p2)
    df = np.sqrt(((f1 - f2) ** 2).sum(axis=-1))
    sargs = sum(_vnorm(a, 1) + _vnorm(b, 1) for a, b in zip(p1, p2))
    sdiff = sum(_vnorm(a - b, 1) for a, b in zip(p1, p2))
    den = sargs * sdiff
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, df / np.where(den > 0, den, 1.0), np.where(df > 0, np.inf, 0.0))
    i = int(np.argmax(ratio))
    worst = float(ratio[i])
    passed = worst <= gen.C * (1 + rtol)
    witness = None
    if not passed:
        names = ("y", "ybar", "z", "zbar")
        witness = {
            "t": float(t[i]),
            "first": {n: a[i].tolist() for n, a in zip(names, p1)},
            "second": {n: a[i].tolist() for n, a in zip(names, p2)},
            "ratio": worst,
        }
    return AssumptionReport(gen.C, worst, bool(passed), samples, box_radius, witness)


def _chunk_times(rng, n: int, t_max: float, chunks: int = 32) -> np.ndarray:
    t = np.empty(n)
    for idx in np.array_split(np.arange(n), min(chunks, n)):
        t[idx] = rng.uniform(0.0, t_max)
    return t


def _evaluate_chunked(gen: Generator, t: np.ndarray, args, chunks: int = 32) -> np.ndarray:
    """Evaluate sample ``i`` at time ``t[i]``; samples are grouped so each group shares one time."""
    n = len(t)
    out = np.empty((n, gen.m))
    for idx in np.array_split(np.arange(n), min(chunks, n)):
        out[idx] = evaluate(gen, t[idx[0]], *(a[idx] for a in args))
    return out


def check_envelope(
    gen: Generator,
    envelope: GrowthEnvelope | None = None,
    samples: int = 4096,
    box_radius: float = 1.0,
    seed: int = 0,
    t_max: float = 1.0,
) -> dict[str, Any]:
    """Spot-check ``|f| <= k^2 [lam(|y|) + lambar(|ybar|)] + C z^2`` (``m = d = 1``)."""
    env = envelope or gen.envelope
    if env is None:
        raise UnsupportedConfiguration("generator has no declared growth envelope", name=gen.name)
    if gen.m != 1 or gen.d != 1:
        raise UnsupportedConfiguration("growth envelopes are one-dimensional", m=gen.m, d=gen.d)
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, t_max, samples)
    y, ybar, z, _ = _sample_args(rng, samples, 1, 1, box_radius)
    zbar = np.zeros_like(z)
    worst, witness = -np.inf, None
    for i in range(samples):
        f = abs(evaluate(gen, t[i], y[i], ybar[i], z[i], zbar[i])[0])
        bound = env.k(t[i]) ** 2 * (env.lam(abs(y[i, 0])) + env.lambar(abs(ybar[i, 0]))) + env.C * z[i, 0, 0] ** 2
        gap = f - bound
        if gap > worst:
            worst = gap
            witness = {"t": float(t[i]), "y": float(y[i, 0]), "ybar": float(ybar[i, 0]), "z": float(z[i, 0, 0])}
    passed = worst <= 1e-12
    return {"passed": bool(passed), "worst_excess": float(worst), "witness": None if passed else witness}


# ---------------------------------------------------------------------------
# delta coefficients of the one-dimensional comparison argument


@dataclass
class DeltaCoefficients:
    """Per-point, per-step difference quotients; arrays of shape ``(P, N)``.

    ``dzbar`` covers generators that also read ``E[Z]``; it is identically
    zero for generators of the form ``f(t, y, ybar, z)``.
    """

    dy: np.ndarray
    dybar: np.ndarray
    dz: np.ndarray
    dzbar: np.ndarray
    flag_y: np.ndarray
    flag_ybar: np.ndarray
    flag_z: np.ndarray
    flag_zbar: np.ndarray
    diff_Y: np.ndarray
    diff_meanY: np.ndarray
    diff_Z: np.ndarray
    diff_meanZ: np.ndarray
    full_difference: np.ndarray
    mask: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (
            self.dy * self.diff_Y
            + self.dybar * self.diff_meanY[None, :]
            + self.dz * self.diff_Z
            + self.dzbar * self.diff_meanZ[None, :]
        )

    def unflagged(self) -> np.ndarray:
        return self.mask & ~(self.flag_y | self.flag_ybar[None, :] | self.flag_z | self.flag_zbar[None, :])


def _require_scalar(gen: Generator) -> None:
    if gen.m != 1 or gen.d != 1:
        raise InvalidArgument("comparison machinery is one-dimensional (m = d = 1)", m=gen.m, d=gen.d)


def _quotient(num, den):
    flag = den == 0
    return np.where(flag, 0.0, num / np.where(flag, 1.0, den)), flag


def delta_coefficients(gen: Generator, sol, sol_t) -> DeltaCoefficients:
    """Telescoped difference quotients of ``f`` along two solutions.

    Varies ``y``, then ``E[Y]``, then ``z``, then ``E[Z]``, so that the four
    terms sum to ``f(Y, E Y, Z, E Z) - f(Y~, E Y~, Z~, E Z~)``. A zero
    denominator sets the coefficient to 0 and raises its flag.
    """
    _require_scalar(gen)
    if sol.Y.shape != sol_t.Y.shape or sol.grid.N != sol_t.grid.N:
        raise InvalidArgument("solutions must share grid and ensemble")
    if sol.Y.shape[2] != 1 or sol.Z.shape[3] != 1:
        raise InvalidArgument("solutions must be one-dimensional")
    P, N = sol.Z.shape[:2]
    nodes = sol.grid.nodes
    Y, Yt = sol.Y[:, :N, 0], sol_t.Y[:, :N, 0]
    Z, Zt = sol.Z[:, :, 0, 0], sol_t.Z[:, :, 0, 0]
    EY, EYt = sol.meanY[:N, 0], sol_t.meanY[:N, 0]
    EZ, EZt = sol.meanZ[:, 0, 0], sol_t.meanZ[:, 0, 0]

    def f(k, y, ybar, z, zbar):
        ybar = np.broadcast_to(ybar, y.shape)
        zbar = np.broadcast_to(zbar, z.shape)
        return evaluate(gen, nodes[k], y[:, None], ybar[:, None], z[:, None, None], zbar[:, None, None])[:, 0]

    out = {n: np.zeros((P, N)) for n in ("dy", "dz", "fy", "fz", "full")}
    dybar, dzbar = np.zeros(N), np.zeros(N)
    fybar, fzbar = np.zeros(N, dtype=bool), np.zeros(N, dtype=bool)
    flag_y = np.zeros((P, N), dtype=bool)
    flag_z = np.zeros((P, N), dtype=bool)
    dyb_full = np.zeros((P, N))
    dzb_full = np.zeros((P, N))
    for k in range(N):
        f0 = f(k, Y[:, k], EY[k], Z[:, k], EZ[k])
        f1 = f(k, Yt[:, k], EY[k], Z[:, k], EZ[k])
        f2 = f(k, Yt[:, k], EYt[k], Z[:, k], EZ[k])
        f3 = f(k, Yt[:, k], EYt[k], Zt[:, k], EZ[k])
        f4 = f(k, Yt[:, k], EYt[k], Zt[:, k], EZt[k])
        out["dy"][:, k], flag_y[:, k] = _quotient(f0 - f1, Y[:, k] - Yt[:, k])
        q, fl = _quotient(f1 - f2, np.full(P, EY[k] - EYt[k]))
        dyb_full[:, k] = q
        fybar[k] = bool(fl[0])
        out["dz"][:, k], flag_z[:, k] = _quotient(f2 - f3, Z[:, k] - Zt[:, k])
        q, fl = _quotient(f3 - f4, np.full(P, EZ[k] - EZt[k]))
        dzb_full[:, k] = q
        fzbar[k] = bool(fl[0])
        out["full"][:, k] = f0 - f4
    mask = np.stack([sol.backend.mask(k) for k in range(N)], axis=1)
    return DeltaCoefficients(
        dy=out["dy"],
        dybar=dyb_full,
        dz=out["dz"],
        dzbar=dzb_full,
        flag_y=flag_y,
        flag_ybar=fybar,
        flag_z=flag_z,
        flag_zbar=fzbar,
        diff_Y=Y - Yt,
        diff_meanY=EY - EYt,
        diff_Z=Z - Zt,
        diff_meanZ=EZ - EZt,
        full_difference=out["full"],
        mask=mask,
    )


def is_nondecreasing_in_ybar(
    gen: Generator, samples: int = 2048, box_radius: float = 1.0, seed: int = 0, t_max: float = 1.0
) -> tuple[bool, dict[str, Any] | None]:
    """Sampled finite differences ``f(ybar + h) - f(ybar) >= 0`` for ``h > 0``."""
    _require_scalar(gen)
    rng = np.random.default_rng(seed)
    y, ybar, z, zbar = _sample_args(rng, samples, 1, 1, box_radius)
    h = box_radius * 10.0 ** rng.uniform(-6, 0, (samples, 1))
    t = rng.uniform(0, t_max, samples)
    worst, witness = 0.0, None
    for i in range(samples):
        lo = evaluate(gen, t[i], y[i], ybar[i], z[i], zbar[i])[0]
        hi = evaluate(gen, t[i], y[i], ybar[i] + h[i], z[i], zbar[i])[0]
        slack = 1e-12 * (1.0 + abs(lo))
        if hi - lo < -slack and hi - lo < worst:
            worst = hi - lo
            witness = {"t": float(t[i]), "y": float(y[i, 0]), "ybar": float(ybar[i, 0]), "h": float(h[i, 0]),
                       "z": float(z[i, 0, 0]), "zbar": float(zbar[i, 0, 0]), "decrease": float(hi - lo)}
    return witness is None, witness


@dataclass
class ConditionReport:
    a1_value: float
    a1_bound: float
    a1_passed: bool
    a2_value: float
    a2_bound: float
    a2_passed: bool
    f_nondecreasing: bool
    ftilde_nondecreasing: bool
    a3_passed: bool
    a3_witnesses: dict[str, Any]
    note: str = "A2 is checked along the two solutions at hand only, not over all bounded Y"

    @property
    def passed(self) -> bool:
        return self.a1_passed and self.a2_passed and self.a3_passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "A1": {"value": self.a1_value, "bound": _num(self.a1_bound), "passed": self.a1_passed},
            "A2": {"value": self.a2_value, "bound": _num(self.a2_bound), "passed": self.a2_passed},
            "A3": {
                "f_nondecreasing": self.f_nondecreasing,
                "ftilde_nondecreasing": self.ftilde_nondecreasing,
                "passed": self.a3_passed,
                "witnesses": self.a3_witnesses,
            },
            "passed": self.passed,
            "note": self.note,
        }


def _num(x: float):
    return None if not np.isfinite(x) else x


def check_A1_A2_A3(
    gen: Generator,
    gen_t: Generator,
    sol,
    sol_t,
    a1_bound: float = np.inf,
    a2_bound: float = np.inf,
    samples: int = 2048,
    box_radius: float = 1.0,
    seed: int = 0,
) -> ConditionReport:
    _require_scalar(gen)
    _require_scalar(gen_t)
    dc = delta_coefficients(gen, sol, sol_t)
    valid = dc.mask
    a1 = float(max(np.abs(dc.dy[valid]).max(initial=0.0), np.abs(dc.dybar[valid]).max(initial=0.0)))
    a2 = norms.z2_norm(np.where(valid, dc.dz, 0.0), sol.backend)
    T = sol.grid.T
    f_up, wf = is_nondecreasing_in_ybar(gen, samples, box_radius, seed, T)
    ft_up, wft = is_nondecreasing_in_ybar(gen_t, samples, box_radius, seed + 1, T)
    return ConditionReport(
        a1_value=a1,
        a1_bound=float(a1_bound),
        a1_passed=bool(np.isfinite(a1) and a1 <= a1_bound),
        a2_value=a2,
        a2_bound=float(a2_bound),
        a2_passed=bool(np.isfinite(a2) and a2 <= a2_bound),
        f_nondecreasing=f_up,
        ftilde_nondecreasing=ft_up,
        a3_passed=f_up or ft_up,
        a3_witnesses={"f": wf, "ftilde": wft},
    )
