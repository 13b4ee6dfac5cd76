"""Time grids, Brownian path ensembles and recombining lattices.

Randomness contract: path ``p`` of an ensemble is drawn from its own Philox
counter-based stream keyed by ``(seed, p)``, so an ensemble is bit-identical
regardless of how many worker threads generate it.
"""

from __future__ import annotations

import csv
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, UnsupportedConfiguration

_BIN_MAGIC = b"MFBSDEW1"
_BIN_HEADER = struct.Struct("<8sQQQQd")


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int
    dt: float
    nodes: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.N + 1


def build_grid(T: float, N: int) -> TimeGrid:
    """Uniform partition of ``[0, T]`` into ``N`` steps."""
    if not np.isfinite(T) or T <= 0:
        raise InvalidArgument("horizon T must be positive", T=T)
    if int(N) != N or N < 1:
        raise InvalidArgument("step count N must be a positive integer", N=N)
    N = int(N)
    dt = T / N
    nodes = np.arange(N + 1, dtype=float) * dt
    nodes[-1] = T
    nodes.setflags(write=False)
    return TimeGrid(T=float(T), N=N, dt=dt, nodes=nodes)


@dataclass
class PathEnsemble:
    grid: TimeGrid
    M: int
    d: int
    seed: int
    dW: np.ndarray = field(repr=False)
    _W: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def W(self) -> np.ndarray:
        """Cumulative paths, shape ``(M, N+1, d)`` with ``W[:, 0] == 0``."""
        if self._W is None:
            W = np.zeros((self.M, self.grid.N + 1, self.d))
            np.cumsum(self.dW, axis=1, out=W[:, 1:])
            self._W = W
        return self._W

    def permute_dimensions(self, order: np.ndarray) -> PathEnsemble:
        """Return a copy with the noise coordinates reordered."""
        return PathEnsemble(self.grid, self.M, self.d, self.seed, self.dW[:, :, np.asarray(order)].copy())


def _path_stream(seed: int, p: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, p]))


def _fill_paths(out: np.ndarray, seed: int, start: int, stop: int, scale: float) -> None:
    n = out.shape[1] * out.shape[2]
    for p in range(start, stop):
        out[p] = (_path_stream(seed, p).standard_normal(n) * scale).reshape(out.shape[1:])


def simulate_paths(grid: TimeGrid, M: int, d: int, seed: int, threads: int = 1) -> PathEnsemble:
    """Sample ``M`` independent ``d``-dimensional Brownian paths on ``grid``.

    ``threads`` only changes how the work is split; the output does not depend
    on it.
    """
    if int(M) != M or M < 1:
        raise InvalidArgument("path count M must be a positive integer", M=M)
    if int(d) != d or d < 1:
        raise InvalidArgument("dimension d must be a positive integer", d=d)
    if int(seed) != seed or not 0 <= seed < 2**64:
        raise InvalidArgument("seed must be an integer in [0, 2**64)", seed=seed)
    M, d, seed = int(M), int(d), int(seed)
    dW = np.empty((M, grid.N, d))
    scale = float(np.sqrt(grid.dt))
    threads = max(1, int(threads))
    if threads == 1 or M < 2 * threads:
        _fill_paths(dW, seed, 0, M, scale)
    else:
        bounds = np.linspace(0, M, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_fill_paths, dW, seed, int(a), int(b), scale) for a, b in zip(bounds[:-1], bounds[1:])
            ]
            for fut in futures:
                fut.result()
    return PathEnsemble(grid=grid, M=M, d=d, seed=seed, dW=dW)


def dump_ensemble(ens: PathEnsemble, path: str | Path) -> None:
    """Write increments in path-major order; ``.csv`` suffix selects CSV, anything else flat binary."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "step", *[f"dW{j}" for j in range(ens.d)]])
            for p in range(ens.M):
                for k in range(ens.grid.N):
                    writer.writerow([p, k, *map(repr, ens.dW[p, k].tolist())])
        return
    with path.open("wb") as fh:
        fh.write(_BIN_HEADER.pack(_BIN_MAGIC, ens.M, ens.grid.N, ens.d, ens.seed, ens.grid.T))
        fh.write(np.ascontiguousarray(ens.dW, dtype="<f8").tobytes())


def load_ensemble(path: str | Path) -> PathEnsemble:
    """Read an ensemble written by :func:`dump_ensemble` in binary form."""
    raw = Path(path).read_bytes()
    magic, M, N, d, seed, T = _BIN_HEADER.unpack_from(raw)
    if magic != _BIN_MAGIC:
        raise InvalidArgument("not an ensemble dump", path=str(path))
    dW = np.frombuffer(raw, dtype="<f8", offset=_BIN_HEADER.size).reshape(M, N, d).astype(float)
    return PathEnsemble(grid=build_grid(T, N), M=M, d=d, seed=seed, dW=dW)


_LATTICE_MODES = {
    # mode: (branch probabilities, node stride, origin shift, spacing factor)
    "binomial": (np.array([0.5, 0.5]), 2, 1, 1.0),
    "trinomial": (np.array([1 / 6, 2 / 3, 1 / 6]), 1, 1, 3.0),
}


@dataclass(frozen=True)
class Lattice:
    """Recombining tree of ``W`` values.

    Node ``j`` of level ``k`` holds ``W = (stride*j - shift*k) * h`` and branch
    ``c`` leads to node ``j + c`` of level ``k+1``.
    """

    grid: TimeGrid
    mode: str
    probs: np.ndarray = field(repr=False)
    increments: np.ndarray = field(repr=False)
    h: float
    stride: int
    shift: int

    @property
    def branching(self) -> int:
        return len(self.probs)

    @property
    def d(self) -> int:
        return 1

    def width(self, k: int) -> int:
        return (self.branching - 1) * k + 1

    def values(self, k: int) -> np.ndarray:
        j = np.arange(self.width(k))
        return (self.stride * j - self.shift * k) * self.h

    def level_probabilities(self, k: int) -> np.ndarray:
        """Marginal probability of each node at level ``k``."""
        p = np.ones(1)
        for _ in range(k):
            nxt = np.zeros(len(p) + self.branching - 1)
            for c, pc in enumerate(self.probs):
                nxt[c : c + len(p)] += pc * p
            p = nxt
        return p


def build_lattice(grid: TimeGrid, mode: str = "binomial", d: int = 1) -> Lattice:
    if mode not in _LATTICE_MODES:
        raise UnsupportedConfiguration(f"unknown lattice mode {mode!r}", mode=mode)
    if d != 1:
        raise UnsupportedConfiguration("lattice backends support d = 1 only", d=d, mode=mode)
    probs, stride, shift, factor = _LATTICE_MODES[mode]
    h = float(np.sqrt(factor * grid.dt))
    increments = (stride * np.arange(len(probs)) - shift) * h
    return Lattice(grid=grid, mode=mode, probs=probs.copy(), increments=increments, h=h, stride=stride, shift=shift)
