"""Conditional-expectation backends.

Both backends expose the same "point" view of the probability space: a
stack of ``P`` points per time step, each carrying a probability weight.
On the lattice the points of step ``k`` are the ``width(k)`` tree nodes
(remaining rows are zero-weight padding); in Monte Carlo mode they are the
``M`` sample paths, each with weight ``1/M``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .errors import IllConditionedRegression, InvalidArgument
from .kernel import Lattice, PathEnsemble

COND_MAX = 1e12
DESIGN_CACHE_LIMIT = 4e7  # float64 entries kept across steps


def expect(values: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Arithmetic mean over the leading axis, or a probability-weighted sum."""
    values = np.asarray(values, dtype=float)
    if weights is None:
        return values.mean(axis=0)
    return np.tensordot(np.asarray(weights, dtype=float), values, axes=(0, 0))


def cond_expect(backend, X: np.ndarray, k: int, source: int | None = None) -> np.ndarray:
    """``E_{t_k}[X]`` for ``X`` measurable at step ``source`` (default ``k+1``)."""
    return backend.cond_expect(X, k, source)


class LatticeBackend:
    kind = "lattice"

    def __init__(self, lattice: Lattice) -> None:
        self.lattice = lattice
        self.grid = lattice.grid
        self.d = 1
        N = self.grid.N
        self.n_points = lattice.width(N)
        self._weights = np.zeros((self.n_points, N + 1))
        self._states = np.zeros((self.n_points, N + 1, 1))
        for k in range(N + 1):
            w = lattice.width(k)
            self._weights[:w, k] = lattice.level_probabilities(k)
            self._states[:w, k, 0] = lattice.values(k)

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def state(self, k: int) -> np.ndarray:
        return self._states[:, k]

    def mask(self, k: int) -> np.ndarray:
        return np.arange(self.n_points) < self.lattice.width(k)

    def expect(self, X: np.ndarray, k: int) -> np.ndarray:
        return expect(X, self._weights[:, k])

    def _step(self, X: np.ndarray, k: int, coeffs: np.ndarray) -> np.ndarray:
        w = self.lattice.width(k)
        out = np.zeros_like(X, dtype=float)
        for c, a in enumerate(coeffs):
            out[:w] += a * X[c : c + w]
        return out

    def cond_expect(self, X: np.ndarray, k: int, source: int | None = None) -> np.ndarray:
        source = k + 1 if source is None else source
        if not 0 <= k <= source <= self.grid.N:
            raise InvalidArgument("conditioning step must precede the source step", k=k, source=source)
        out = np.asarray(X, dtype=float)
        for j in range(source - 1, k - 1, -1):
            out = self._step(out, j, self.lattice.probs)
        return out.copy() if source == k else out

    def cond_expect_increment(self, X: np.ndarray, k: int) -> np.ndarray:
        """``E_{t_k}[X_{k+1} (W_{k+1} - W_k)]`` with a trailing noise axis of length 1."""
        return self._step(np.asarray(X, dtype=float), k, self.lattice.probs * self.lattice.increments)[..., None]


@lru_cache(maxsize=None)
def basis_indices(q: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """Multi-indices of total degree ``<= degree`` in ``q`` variables, constant first."""
    idx = [a for a in itertools.product(range(degree + 1), repeat=q) if sum(a) <= degree]
    idx.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
    return tuple(idx)


def hermite_design(x: np.ndarray, degree: int) -> np.ndarray:
    """Tensor probabilists' Hermite polynomials of total degree ``<= degree``.

    They span the same space as the monomials but stay well conditioned for
    standardized Gaussian inputs.
    """
    n, q = x.shape
    he = np.empty((degree + 1, n, q))
    he[0] = 1.0
    if degree >= 1:
        he[1] = x
    for j in range(1, degree):
        he[j + 1] = x * he[j] - j * he[j - 1]
    idx = basis_indices(q, degree)
    A = np.ones((n, len(idx)))
    for col, alpha in enumerate(idx):
        for var, power in enumerate(alpha):
            if power:
                A[:, col] *= he[power, :, var]
    return A


def clip_to_range(fit: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Clip a regression estimate of ``E_k[X]`` to the sampled range of ``X``.

    A conditional expectation always lies in that range; polynomial fits
    leave it at extreme states, where few samples constrain the basis.
    """
    X = np.asarray(X, dtype=float)
    return np.clip(fit, X.min(axis=0), X.max(axis=0))


class Projector:
    """Ridge least-squares projection onto the columns of a fixed design.

    The normal matrix is factored once with a symmetric eigendecomposition;
    the intercept column (column 0) is never penalized.
    """

    def __init__(self, A: np.ndarray, ridge: float, step: int | None = None) -> None:
        n, K = A.shape
        G = A.T @ A / n
        if K > 1:
            G[np.arange(1, K), np.arange(1, K)] += ridge
        w, V = np.linalg.eigh(G)
        cond = float(w[-1] / w[0]) if w[0] > 0 else float("inf")
        if not np.isfinite(cond) or cond > COND_MAX:
            raise IllConditionedRegression(
                "regression design is ill-conditioned", condition_number=cond, step=step, basis_size=K
            )
        self.condition_number = cond
        self._solve = (V / w) @ V.T
        self.n = n

    def coefficients(self, A: np.ndarray, X: np.ndarray) -> np.ndarray:
        return self._solve @ (A.T @ X / self.n)

    def fit(self, A: np.ndarray, X: np.ndarray) -> np.ndarray:
        return A @ self.coefficients(A, X)


class RegressionBackend:
    """Least-squares Monte Carlo on the state ``W_{t_k}`` of each path."""

    kind = "lsmc"

    def __init__(self, ensemble: PathEnsemble, degree: int = 3, ridge: float = 1e-10) -> None:
        if degree < 0:
            raise InvalidArgument("basis degree must be nonnegative", degree=degree)
        if ridge < 0:
            raise InvalidArgument("ridge must be nonnegative", ridge=ridge)
        self.ensemble = ensemble
        self.grid = ensemble.grid
        self.d = ensemble.d
        self.n_points = ensemble.M
        self.degree = int(degree)
        self.ridge = float(ridge)
        self._projectors: dict[int, Projector] = {}
        self._designs: dict[int, np.ndarray] = {}
        self._weights = np.full((self.n_points, self.grid.N + 1), 1.0 / self.n_points)

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def state(self, k: int) -> np.ndarray:
        return self.ensemble.W[:, k]

    def mask(self, k: int) -> np.ndarray:
        return np.ones(self.n_points, dtype=bool)

    def expect(self, X: np.ndarray, k: int) -> np.ndarray:
        return expect(X)

    def design(self, k: int) -> np.ndarray:
        if k in self._designs:
            return self._designs[k]
        if k == 0:
            # trivial sigma-algebra at t_0
            A = np.ones((self.n_points, 1))
        else:
            A = hermite_design(self.state(k) / np.sqrt(self.grid.nodes[k]), self.degree)
        if A.size * (self.grid.N + 1) <= DESIGN_CACHE_LIMIT:
            self._designs[k] = A
        return A

    def projector(self, k: int) -> Projector:
        if k not in self._projectors:
            self._projectors[k] = Projector(self.design(k), self.ridge, step=k)
        return self._projectors[k]

    def _regress(self, X: np.ndarray, k: int) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if not np.all(np.isfinite(X)):
            raise InvalidArgument("regression target contains non-finite values", step=k)
        flat = X.reshape(self.n_points, -1)
        A = self.design(k)
        return self.projector(k).fit(A, flat).reshape(X.shape)

    def cond_expect(self, X: np.ndarray, k: int, source: int | None = None) -> np.ndarray:
        source = k + 1 if source is None else source
        if not 0 <= k <= source <= self.grid.N:
            raise InvalidArgument("conditioning step must precede the source step", k=k, source=source)
        if source == k:
            return np.array(X, dtype=float)
        return clip_to_range(self._regress(X, k), X)

    def cond_expect_increment(self, X: np.ndarray, k: int) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        dW = self.ensemble.dW[:, k]
        prod = X[..., None] * dW.reshape((self.n_points,) + (1,) * (X.ndim - 1) + (self.d,))
        return self._regress(prod, k)
