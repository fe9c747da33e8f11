"""Endpoint-conditioned chains (bridges) and their block statistics.

A bridge pins the chain to start at x and end at y after a window of
length t0. Its inhomogeneous transition law is a ratio of unconditioned
kernels; sampling is by rejection: run the unconditioned chain from x over
the window and keep paths that end in y. The sampled occupation (and
optionally flux) blocks are the conditional laws feeding the per-pair
conjugate oracle.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain import GeneratorMatrix, transition_at
from .conjugate import EmpiricalLaw
from .simulate import AbsorbingState, MODES, PathRecord, cumulative_flux, gillespie, occupation

__all__ = [
    "DegenerateDenominator",
    "RejectionBudgetExceeded",
    "BridgeSpec",
    "PathRecord",
    "bridge_transition",
    "bridge_transition_row",
    "bridge_generator",
    "sample_bridge",
    "conditional_samples",
]

DEFAULT_MAX_ATTEMPTS = 1_000_000


class DegenerateDenominator(ValueError):
    """A bridge ratio has a vanishing denominator (endpoint unreachable)."""


class RejectionBudgetExceeded(RuntimeError):
    """Rejection sampling hit its attempt cap before acceptance."""


@dataclass(frozen=True)
class BridgeSpec:
    """Chain bridged from x at time 0 to y at time t0."""

    Q: GeneratorMatrix
    x: int
    y: int
    t0: float

    def __post_init__(self):
        n = self.Q.n_states
        if not (0 <= self.x < n and 0 <= self.y < n):
            raise ValueError("bridge endpoints out of range")
        if self.t0 <= 0:
            raise ValueError("window length must be positive")
        if transition_at(self.Q, self.t0).probs[self.x, self.y] <= 0.0:
            raise DegenerateDenominator(
                f"endpoint {self.y} unreachable from {self.x} in time {self.t0!r}"
            )

    @property
    def n_states(self) -> int:
        return self.Q.n_states


def bridge_transition_row(spec: BridgeSpec, a: int, s: float, t: float) -> np.ndarray:
    """Conditional law of X(t) given X(s) = a under the bridge, as a row."""
    if not 0 <= s <= t <= spec.t0:
        raise ValueError("need 0 <= s <= t <= t0")
    p_step = transition_at(spec.Q, t - s).probs[a]
    p_close = transition_at(spec.Q, spec.t0 - t).probs[:, spec.y]
    denom = transition_at(spec.Q, spec.t0 - s).probs[a, spec.y]
    if denom <= 0.0:
        raise DegenerateDenominator(f"state {a} cannot reach {spec.y} in time {spec.t0 - s!r}")
    return p_step * p_close / denom


def bridge_transition(spec: BridgeSpec, a: int, b: int, s: float, t: float) -> float:
    """Bridge transition probability P(X(t) = b | X(s) = a).

    Equals P_ab(t - s) P_by(t0 - t) / P_ay(t0 - s): the unconditioned step
    reweighted by the likelihood of still hitting the pinned endpoint. The
    start state of the bridge does not enter, only the pinned endpoint does.
    Rows sum to 1 and satisfy the two-step (Chapman-Kolmogorov) identity.
    """
    row = bridge_transition_row(spec, a, s, t)
    if not 0 <= b < spec.n_states:
        raise ValueError("state out of range")
    return float(row[b])


def bridge_generator(spec: BridgeSpec, a: int, b: int, t: float) -> float:
    """Time-inhomogeneous jump rate a -> b of the bridge at time t < t0.

    Equals Q_ab P_by(t0 - t) / P_ay(t0 - t). Rates into the pinned state
    blow up as t approaches t0, which is what forces the bridge home.
    """
    if a == b:
        raise ValueError("generator entries are defined for a != b")
    if not 0 <= t < spec.t0:
        raise ValueError("need 0 <= t < t0")
    if not (0 <= a < spec.n_states and 0 <= b < spec.n_states):
        raise ValueError("state out of range")
    p_close = transition_at(spec.Q, spec.t0 - t).probs[:, spec.y]
    if p_close[a] <= 0.0:
        raise DegenerateDenominator(f"state {a} cannot reach {spec.y} in time {spec.t0 - t!r}")
    return float(spec.Q.rates[a, b] * p_close[b] / p_close[a])


def sample_bridge(
    spec: BridgeSpec,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> PathRecord:
    """Draw one bridge path by rejection on the unconditioned chain.

    Simulates from x over [0, t0] until a path ends at y. The acceptance
    probability is P_xy(t0), positive by BridgeSpec validation.

    Raises
    ------
    RejectionBudgetExceeded
        If no path is accepted within max_attempts draws.
    """
    for _ in range(max_attempts):
        path = gillespie(spec.Q, spec.x, spec.t0, rng)
        end = spec.x if path.n_jumps == 0 else int(path.destinations[-1])
        if end == spec.y:
            return path
    raise RejectionBudgetExceeded(
        f"no acceptance in {max_attempts} attempts for pair ({spec.x}, {spec.y})"
    )


def _block_features(path: PathRecord, spec: BridgeSpec, mode: str) -> np.ndarray:
    occ = occupation(path).weights
    if mode == "occupation":
        return occ
    flux = cumulative_flux(path).ravel() / spec.t0
    return np.concatenate([occ, flux])


def _fast_features(spec: BridgeSpec, mode: str, rng: np.random.Generator,
                   exit_rates: np.ndarray, cum_jump: np.ndarray,
                   max_attempts: int) -> np.ndarray:
    """One accepted bridge block, drawing exactly like sample_bridge does."""
    n = spec.n_states
    t0 = spec.t0
    want_flux = mode == "flux"
    occ = np.empty(n)
    flux = np.empty((n, n)) if want_flux else None
    for _ in range(max_attempts):
        occ[:] = 0.0
        if want_flux:
            flux[:] = 0.0
        state = spec.x
        t_prev = 0.0
        t = 0.0
        while True:
            rate = exit_rates[state]
            if rate <= 0.0:
                raise AbsorbingState(f"state {state} has zero exit rate")
            t += rng.exponential(1.0 / rate)
            if t > t0:
                break
            u = rng.random()
            new = int(np.searchsorted(cum_jump[state], u, side="right"))
            occ[state] += t - t_prev
            if want_flux:
                flux[state, new] += 1.0
            state = new
            t_prev = t
        if state == spec.y:
            occ[state] += t0 - t_prev
            occ /= t0
            if want_flux:
                return np.concatenate([occ, flux.ravel() / t0])
            return occ.copy()
    raise RejectionBudgetExceeded(
        f"no acceptance in {max_attempts} attempts for pair ({spec.x}, {spec.y})"
    )


def _sample_range(spec: BridgeSpec, mode: str, seed: int, lo: int, hi: int,
                  max_attempts: int) -> np.ndarray:
    n = spec.n_states
    pair_index = spec.x * n + spec.y
    d = n if mode == "occupation" else n + n * n
    exit_rates = spec.Q.exit_rates
    cum_jump = np.cumsum(spec.Q.jump_probs(), axis=1)
    out = np.empty((hi - lo, d))
    for idx in range(lo, hi):
        stream = np.random.default_rng(np.random.SeedSequence([seed, pair_index, idx]))
        out[idx - lo] = _fast_features(spec, mode, stream, exit_rates, cum_jump, max_attempts)
    return out


def conditional_samples(
    spec: BridgeSpec,
    mode: str,
    n_samples: int,
    seed: int,
    *,
    threads: int = 1,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> EmpiricalLaw:
    """Sample the conditional law of a block statistic given its endpoints.

    In "occupation" mode each sample is the occupation-fraction vector of a
    bridge path (d = n); in "flux" mode the jump counts divided by t0 are
    appended (d = n + n^2, diagonal entries always zero, kept for fixed
    shape). Every sample index derives its own counter-based stream from
    (seed, pair index, sample index), so the result depends only on
    (seed, spec, n_samples) and never on thread count.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if threads <= 1:
        samples = _sample_range(spec, mode, seed, 0, n_samples, max_attempts)
        return EmpiricalLaw(samples)
    chunk = 1024
    ranges = [(lo, min(lo + chunk, n_samples)) for lo in range(0, n_samples, chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(
            pool.map(lambda r: _sample_range(spec, mode, seed, r[0], r[1], max_attempts), ranges)
        )
    return EmpiricalLaw(np.concatenate(parts, axis=0))
