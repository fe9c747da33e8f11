"""Finite-state continuous-time Markov chain primitives.

Generators, transition kernels, invariant measures, and the uniformization
construction of exp(tQ) that keeps transition matrices exactly nonnegative
and row-stochastic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChainError",
    "NonZeroRowSum",
    "NegativeOffDiagonal",
    "Reducible",
    "GeneratorMatrix",
    "TransitionKernel",
    "ProbVector",
    "validate_generator",
    "transition_at",
    "invariant_measure",
    "dtmc_invariant",
    "is_irreducible",
]

ROW_SUM_TOL = 1e-12
STOCHASTIC_TOL = 1e-10
POISSON_TAIL = 1e-14
# uniformization loses accuracy once lam*t gets large; switch to squaring
_MAX_UNIFORMIZATION_MASS = 200.0


class ChainError(Exception):
    """Base class for malformed chain inputs."""


class NonZeroRowSum(ChainError):
    """A generator row does not sum to zero."""


class NegativeOffDiagonal(ChainError):
    """A generator has a negative off-diagonal rate."""


class Reducible(ChainError):
    """The chain is not irreducible, so no unique invariant measure exists."""


@dataclass(frozen=True)
class GeneratorMatrix:
    """Generator (rate matrix) of a finite-state CTMC.

    Off-diagonal entries are jump rates, each diagonal entry is minus the
    total exit rate of its state, so every row sums to zero.
    """

    rates: np.ndarray

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        if rates.ndim != 2 or rates.shape[0] != rates.shape[1]:
            raise ChainError(f"generator must be square, got shape {rates.shape}")
        if not np.all(np.isfinite(rates)):
            raise ChainError("generator entries must be finite")
        off = rates[~np.eye(rates.shape[0], dtype=bool)]
        if off.size and off.min() < 0:
            raise NegativeOffDiagonal(f"negative off-diagonal rate {off.min()!r}")
        row_sums = rates.sum(axis=1)
        worst = float(np.abs(row_sums).max()) if row_sums.size else 0.0
        if worst > ROW_SUM_TOL * max(1.0, float(np.abs(rates).max())):
            raise NonZeroRowSum(f"row sums deviate from 0 by {worst!r}")
        object.__setattr__(self, "rates", rates)

    @property
    def n_states(self) -> int:
        return self.rates.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        """Total exit rate per state (nonnegative vector)."""
        return -np.diag(self.rates)

    def jump_probs(self) -> np.ndarray:
        """Embedded jump-chain kernel; rows of absorbing states are zero."""
        q = self.exit_rates
        probs = np.where(q[:, None] > 0, self.rates / np.where(q > 0, q, 1.0)[:, None], 0.0)
        np.fill_diagonal(probs, 0.0)
        return probs


@dataclass(frozen=True)
class TransitionKernel:
    """Row-stochastic transition matrix of a discrete-time chain."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
            raise ChainError(f"kernel must be square, got shape {probs.shape}")
        if not np.all(np.isfinite(probs)):
            raise ChainError("kernel entries must be finite")
        if probs.min() < -STOCHASTIC_TOL or probs.max() > 1.0 + STOCHASTIC_TOL:
            raise ChainError("kernel entries must lie in [0, 1]")
        worst = float(np.abs(probs.sum(axis=1) - 1.0).max())
        if worst > STOCHASTIC_TOL:
            raise ChainError(f"kernel rows deviate from sum 1 by {worst!r}")
        object.__setattr__(self, "probs", probs)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class ProbVector:
    """Probability vector on the state space."""

    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 1:
            raise ChainError(f"probability vector must be 1-d, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)) or weights.min() < 0:
            raise ChainError("probability weights must be finite and nonnegative")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ChainError(f"probability weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "weights", weights)

    @property
    def n_states(self) -> int:
        return self.weights.shape[0]


def validate_generator(raw) -> GeneratorMatrix:
    """Validate a raw rate matrix and wrap it as a GeneratorMatrix.

    Raises
    ------
    NonZeroRowSum
        If some row does not sum to zero within tolerance.
    NegativeOffDiagonal
        If some off-diagonal rate is negative.
    """
    return GeneratorMatrix(np.asarray(raw, dtype=float))


def _uniformized_kernel(Q: GeneratorMatrix, t: float) -> np.ndarray:
    """exp(tQ) via Poisson-weighted powers of the uniformized kernel."""
    n = Q.n_states
    lam = float(np.max(np.abs(np.diag(Q.rates))))
    if lam * t == 0.0:
        return np.eye(n)
    base = np.eye(n) + Q.rates / lam
    mass = lam * t
    # p_k = Poisson(mass) pmf, accumulated until the tail is negligible
    result = np.zeros((n, n))
    term = np.eye(n)
    p = math.exp(-mass)
    acc = p
    result += p * term
    k = 0
    while 1.0 - acc > POISSON_TAIL:
        k += 1
        term = term @ base
        p *= mass / k
        acc += p
        result += p * term
        if k > 10_000_000:  # pragma: no cover - safety valve
            raise ChainError("uniformization failed to converge")
    # distribute the truncated tail mass over the last computed power so the
    # rows still sum to 1 up to roundoff
    result += (1.0 - acc) * term
    return result


def transition_at(Q: GeneratorMatrix, t: float) -> TransitionKernel:
    """Transition kernel exp(tQ) of the chain at horizon t >= 0.

    Uses uniformization: with lam the largest exit rate, exp(tQ) is the
    Poisson(lam*t) mixture of powers of I + Q/lam. All intermediate
    matrices are nonnegative and row-stochastic, so the result is a valid
    kernel by construction. Large lam*t is handled by repeated squaring of
    a shorter-horizon kernel, which preserves stochasticity exactly.
    """
    if t < 0:
        raise ChainError(f"time must be nonnegative, got {t!r}")
    lam = float(np.max(np.abs(np.diag(Q.rates))))
    mass = lam * t
    if mass <= _MAX_UNIFORMIZATION_MASS:
        return TransitionKernel(_uniformized_kernel(Q, t))
    n_halvings = int(math.ceil(math.log2(mass / _MAX_UNIFORMIZATION_MASS)))
    kernel = _uniformized_kernel(Q, t / 2.0**n_halvings)
    for _ in range(n_halvings):
        kernel = kernel @ kernel
    return TransitionKernel(kernel)


def _support_digraph(matrix: np.ndarray) -> np.ndarray:
    adj = matrix > 0
    np.fill_diagonal(adj, False)
    return adj


def _reaches_all(adj: np.ndarray, start: int) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = adj[frontier].any(axis=0) & ~seen
        frontier = np.flatnonzero(nxt).tolist()
        seen |= nxt
    return bool(seen.all())


def is_irreducible(model: GeneratorMatrix | TransitionKernel) -> bool:
    """Whether the support digraph of the chain is strongly connected.

    Strong connectivity is checked by forward reachability from state 0 in
    the support graph and in its transpose, which together cover every
    directed connection through state 0.
    """
    matrix = model.rates if isinstance(model, GeneratorMatrix) else model.probs
    adj = _support_digraph(matrix)
    return _reaches_all(adj, 0) and _reaches_all(adj.T, 0)


def invariant_measure(Q: GeneratorMatrix, residual_tol: float = 1e-10) -> ProbVector:
    """Unique invariant probability measure pi of an irreducible generator.

    Solves pi Q = 0 with the normalization sum(pi) = 1 by a dense linear
    solve, then checks the residual.

    Raises
    ------
    Reducible
        If the chain is not irreducible.
    """
    if not is_irreducible(Q):
        raise Reducible("generator support graph is not strongly connected")
    n = Q.n_states
    system = Q.rates.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(system, rhs)
    residual = float(np.abs(pi @ Q.rates).max())
    if residual > residual_tol:
        raise ChainError(f"invariant measure residual {residual!r} exceeds tolerance")
    pi = np.clip(pi, 0.0, None)
    return ProbVector(pi / pi.sum())


def dtmc_invariant(P: TransitionKernel, residual_tol: float = 1e-10) -> ProbVector:
    """Invariant measure mu of an irreducible transition kernel, mu P = mu."""
    if not is_irreducible(P):
        raise Reducible("kernel support graph is not strongly connected")
    n = P.n_states
    system = (P.probs.T - np.eye(n)).copy()
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    mu = np.linalg.solve(system, rhs)
    residual = float(np.abs(mu @ P.probs - mu).max())
    if residual > residual_tol:
        raise ChainError(f"invariant measure residual {residual!r} exceeds tolerance")
    mu = np.clip(mu, 0.0, None)
    return ProbVector(mu / mu.sum())
