"""Cross-validation layer: inf-convolution solvers, contraction, MC decay fits.

This module closes the loop between the three rate representations. The
block decomposition says that the continuous-time rate of a time-averaged
statistic equals (after dividing by the window length) the infimum of the
composite block rate over all pair decompositions (k, theta) whose totals
hit the target. ``infconv_dvg`` / ``infconv_bfg`` compute that infimum
numerically against a sampled per-pair oracle, ``contract_dvg_from_bfg``
checks the flux-to-occupation contraction by convex duality, and
``mc_decay_rate`` estimates the decay exponent of ball probabilities from
direct simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from .bridge import BridgeSpec, conditional_samples
from .chain import GeneratorMatrix, ProbVector, TransitionKernel, dtmc_invariant, invariant_measure
from .conjugate import (
    DEFAULT_LAM_BOX,
    ConjugateOracle,
    EmpiricalLaw,
    conjugate_at,
    load_samples,
    save_samples,
)
from .ratefun import FluxField, PairMeasure, bfg_rate, divergence, dvg_rate
from .simulate import MODES, batch_occupations, batch_pair_statistics

__all__ = [
    "InsufficientHits",
    "InfConvResult",
    "ContractionResult",
    "DecayFit",
    "build_oracle",
    "infconv_dvg",
    "infconv_bfg",
    "contract_dvg_from_bfg",
    "ball_rate",
    "mc_decay_rate",
]

# Smallest theta kept alive during iterations; below UNFLOOR at the end the
# pair is dropped exactly.
THETA_FLOOR = 1e-12
THETA_UNFLOOR = 1e-10
# Relative growth of the optimum under box doubling that flags an
# unreachable target (the box acts as a penalty weight on the constraints).
SWEEP_GROWTH_RTOL = 1e-2
MC_BATCH = 50_000
MIN_HITS = 30


class InsufficientHits(RuntimeError):
    """Too few ball hits to fit a decay slope.

    ``largest_usable_n`` is the largest horizon that still produced enough
    hits (None when even the smallest failed).
    """

    def __init__(self, message: str, largest_usable_n=None):
        super().__init__(message)
        self.largest_usable_n = largest_usable_n


# ---------------------------------------------------------------------------
# oracle construction


def build_oracle(
    Q: GeneratorMatrix,
    t0: float,
    mode: str,
    n_samples: int,
    seed: int,
    *,
    cache_dir=None,
    threads: int = 1,
    lam_box: float = DEFAULT_LAM_BOX,
) -> ConjugateOracle:
    """Sample every endpoint pair's conditional block law and wrap it.

    One empirical law per ordered pair (x, y), diagonal included, each from
    its own deterministic stream. With ``cache_dir`` set, per-pair sample
    dumps are reused across runs; the file name carries everything the
    samples depend on, so stale caches cannot be picked up silently.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    n = Q.n_states
    laws = {}
    for x in range(n):
        for y in range(n):
            path = None
            if cache_dir is not None:
                tag = f"{mode}_x{x}_y{y}_t{t0:.12g}_seed{seed}_n{n_samples}.f64"
                path = Path(cache_dir) / tag
            if path is not None and path.exists():
                laws[(x, y)] = EmpiricalLaw(load_samples(path))
                continue
            spec = BridgeSpec(Q, x, y, t0)
            law = conditional_samples(spec, mode, n_samples, seed, threads=threads)
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                save_samples(path, law.samples)
            laws[(x, y)] = law
    return ConjugateOracle(laws=laws, lam_box=lam_box, mode=mode, t0=t0)


# ---------------------------------------------------------------------------
# inf-convolution over pair decompositions


@dataclass(frozen=True)
class InfConvResult:
    """Minimizing pair decomposition of a block-rate target.

    ``value`` is the composite block rate per window (divide by the window
    length for the continuous-time rate); infinite when the target was
    flagged unreachable. ``certificate`` is the relative change of the
    optimum under doubling of the conjugate box, small when the reported
    optimum has stabilized.
    """

    value: float
    theta: PairMeasure
    k: FluxField
    certificate: float
    converged: bool
    feasible: bool
    iterations: int


class _JointProjector:
    """Dykstra projection of (k, theta) onto the decomposition polytope.

    The affine part ties the decomposition together: pair totals hit the
    target, each pair's block mass matches its theta weight (block
    occupation fractions sum to one), flux blocks carry the divergence and
    zero diagonal their endpoints force on them, and theta is a balanced
    measure supported on the allowed pairs. Keeping these exact is what
    keeps every conjugate evaluation on the affine hull of its law's
    support, where the conjugate is smooth. The orthant part keeps theta
    nonnegative. On an unreachable target the affine system itself is
    inconsistent, which ``residual`` exposes.
    """

    def __init__(self, mode: str, n: int, d: int, t0: float | None,
                 allowed: np.ndarray, target: np.ndarray):
        self.n = n
        self.d = d
        size = n * n * d + n * n
        theta_off = n * n * d
        rows = []
        rhs = []

        def k_col(p: int, i: int) -> int:
            return p * d + i

        for i in range(d):
            row = np.zeros(size)
            row[[k_col(p, i) for p in range(n * n)]] = 1.0
            rows.append(row)
            rhs.append(target[i])
        occ_dims = d if mode == "occupation" else n
        for p in range(n * n):
            row = np.zeros(size)
            row[[k_col(p, i) for i in range(occ_dims)]] = 1.0
            row[theta_off + p] = -1.0
            rows.append(row)
            rhs.append(0.0)
        if mode == "flux":
            for p in range(n * n):
                x, y = divmod(p, n)
                for z in range(n):
                    row = np.zeros(size)
                    for b in range(n):
                        row[k_col(p, n + z * n + b)] += 1.0
                        row[k_col(p, n + b * n + z)] -= 1.0
                    row[theta_off + p] = -(float(z == x) - float(z == y)) / t0
                    rows.append(row)
                    rhs.append(0.0)
                for z in range(n):
                    row = np.zeros(size)
                    row[k_col(p, n + z * n + z)] = 1.0
                    rows.append(row)
                    rhs.append(0.0)
        row = np.zeros(size)
        row[theta_off:] = 1.0
        rows.append(row)
        rhs.append(1.0)
        for i in range(n - 1):
            row = np.zeros(size)
            for b in range(n):
                row[theta_off + i * n + b] += 1.0
                row[theta_off + b * n + i] -= 1.0
            rows.append(row)
            rhs.append(0.0)
        for p in np.flatnonzero(~allowed.ravel()):
            row = np.zeros(size)
            row[theta_off + p] = 1.0
            rows.append(row)
            rhs.append(0.0)
            for i in range(d):
                row = np.zeros(size)
                row[k_col(p, i)] = 1.0
                rows.append(row)
                rhs.append(0.0)
        self._C = np.array(rows)
        self._b = np.array(rhs)
        self._gram_pinv = np.linalg.pinv(self._C @ self._C.T)
        self._theta_off = theta_off

    def _affine(self, z: np.ndarray) -> np.ndarray:
        return z - self._C.T @ (self._gram_pinv @ (self._C @ z - self._b))

    def residual(self, k: np.ndarray, theta: np.ndarray) -> float:
        z = np.concatenate([k.ravel(), theta.ravel()])
        return float(np.abs(self._C @ z - self._b).max())

    def __call__(self, k: np.ndarray, theta: np.ndarray, tol: float = 1e-12,
                 max_rounds: int = 500):
        z = np.concatenate([k.ravel(), theta.ravel()])
        p_inc = np.zeros_like(z)
        q_inc = np.zeros_like(z)
        off = self._theta_off
        for _ in range(max_rounds):
            y = self._affine(z + p_inc)
            p_inc = z + p_inc - y
            shifted = y + q_inc
            z = shifted.copy()
            z[off:] = np.maximum(z[off:], 0.0)
            q_inc = shifted - z
            if (
                float(np.abs(self._C @ z - self._b).max()) < tol
                and float(np.abs(z - y).max()) < tol
            ):
                break
        return z[:off].reshape(self.n, self.n, self.d), z[off:].reshape(self.n, self.n)


class _BoxedObjective:
    """Composite block rate with conjugates solved on a fixed box.

    Finite everywhere thanks to the box, hence usable as a penalized
    objective for projected gradient descent. Keeps one warm-start
    multiplier per pair to make repeated evaluations cheap.
    """

    def __init__(self, oracle: ConjugateOracle, P: TransitionKernel, allowed: np.ndarray,
                 lam_box: float):
        self.oracle = oracle
        self.P = P
        self.allowed = allowed
        self.lam_box = lam_box
        n = allowed.shape[0]
        self._pairs = [(x, y) for x in range(n) for y in range(n) if allowed[x, y]]
        self._warm = {p: None for p in self._pairs}

    def value_and_grads(self, k: np.ndarray, theta: np.ndarray):
        """Objective plus gradients in (k, theta) on the allowed support.

        The conjugate terms differentiate by the envelope rule: the k slope
        is the maximizing multiplier itself and the theta slope is minus
        the log-MGF at that multiplier, both free once the conjugate is
        solved.
        """
        n = theta.shape[0]
        safe_theta = np.maximum(theta, THETA_FLOOR)
        total = 0.0
        grad_k = np.zeros_like(k)
        grad_t = np.zeros_like(theta)
        for x, y in self._pairs:
            w = safe_theta[x, y]
            u = k[x, y] / w
            est = conjugate_at(self.oracle.law(x, y), u, self.lam_box, lam0=self._warm[(x, y)])
            self._warm[(x, y)] = est.maximizer
            total += w * est.value
            grad_k[x, y] = est.maximizer
            grad_t[x, y] = est.value - float(est.maximizer @ u)
        row = safe_theta.sum(axis=1)
        ref = row[:, None] * self.P.probs
        for x, y in self._pairs:
            total += safe_theta[x, y] * math.log(safe_theta[x, y] / ref[x, y])
            grad_t[x, y] += math.log(safe_theta[x, y] / ref[x, y])
        return total, grad_k, grad_t


def _pair_starts(P: TransitionKernel, proj: _JointProjector, allowed: np.ndarray,
                 target: np.ndarray, seed: int, n_random: int = 1):
    """Starting decompositions (stationary, uniform, random), projected feasible."""
    n = P.n_states
    d = target.size
    thetas = []
    pi = dtmc_invariant(P).weights
    thetas.append(pi[:, None] * P.probs)
    uni = np.where(allowed, 1.0, 0.0)
    thetas.append(uni / uni.sum())
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1DF]))
    for _ in range(n_random):
        raw = np.where(allowed, rng.random((n, n)), 0.0)
        thetas.append(raw / raw.sum())
    starts = []
    for theta0 in thetas:
        k0 = theta0[:, :, None] * target[None, None, :]
        starts.append(proj(k0, theta0, tol=1e-12, max_rounds=2000))
    return starts


def _descend(objective: _BoxedObjective, proj: _JointProjector,
             k: np.ndarray, theta: np.ndarray, *, max_iters: int, tol: float,
             stall_window: int = 20, stall_scale: float = 100.0):
    """Projected gradient descent with Armijo backtracking on (k, theta).

    Stops on a small projected move, on step-size underflow, or when a
    window of accepted steps gains less than ``stall_scale * tol`` relative
    value (the zigzag tail of a first-order method on a kinked surface).
    """
    value, grad_k, grad_t = objective.value_and_grads(k, theta)
    step = 0.1
    history = [value]
    iterations = 0
    converged = False
    for iterations in range(1, max_iters + 1):
        cand_k, cand_t = proj(k - step * grad_k, theta - step * grad_t)
        move = math.sqrt(float(np.sum((cand_k - k) ** 2) + np.sum((cand_t - theta) ** 2)))
        cand_v, cand_gk, cand_gt = objective.value_and_grads(cand_k, cand_t)
        if cand_v <= value - 1e-4 * move**2 / max(step, 1e-16):
            k, theta, value = cand_k, cand_t, cand_v
            grad_k, grad_t = cand_gk, cand_gt
            step = min(step * 2.0, 10.0)
            history.append(value)
            stall = stall_scale * tol * max(1.0, abs(value))
            if move / max(step, 1e-16) < tol:
                converged = True
                break
            if len(history) > stall_window and history[-stall_window - 1] - value < stall:
                converged = True
                break
        else:
            step *= 0.5
            if step < 1e-14:
                converged = True
                break
    if not converged and len(history) > 5:
        window = min(stall_window, len(history) - 1)
        converged = history[-window - 1] - value < stall_scale * tol * max(1.0, abs(value))
    return value, k, theta, iterations, converged


def _thinned(oracle: ConjugateOracle, keep: int = 4000) -> ConjugateOracle:
    """Oracle over every stride-th sample, for cheap early iterations."""
    first = next(iter(oracle.laws.values()))
    stride = max(1, first.n_samples // keep)
    if stride == 1:
        return oracle
    laws = {p: EmpiricalLaw(law.samples[::stride]) for p, law in oracle.laws.items()}
    return ConjugateOracle(laws=laws, lam_box=oracle.lam_box, mode=oracle.mode, t0=oracle.t0)


def _solve_at_box(oracle: ConjugateOracle, P: TransitionKernel, proj: _JointProjector,
                  allowed: np.ndarray, target: np.ndarray, lam_box: float, seed: int, *,
                  max_iters: int, tol: float, warm=None, polish_iters: int = 150):
    # bulk of the descent runs against a thinned law; the full law only
    # polishes from the thinned optimum (the objective is jointly convex,
    # so the basin is the same)
    objective = _BoxedObjective(_thinned(oracle), P, allowed, lam_box)
    if warm is not None:
        # the doubled-box pass refines the base-box optimum; the objective
        # stays convex when the box grows, so the warm point suffices
        starts = [warm]
    else:
        starts = _pair_starts(P, proj, allowed, target, seed)[:2]
    best = None
    total_iters = 0
    for k0, theta0 in starts:
        value, k, theta, iters, _ = _descend(
            objective, proj, k0.copy(), theta0.copy(), max_iters=max_iters, tol=tol
        )
        total_iters += iters
        if best is None or value < best[0]:
            best = (value, k, theta)
    objective = _BoxedObjective(oracle, P, allowed, lam_box)
    value, k, theta, iters, any_converged = _descend(
        objective, proj, best[1], best[2], max_iters=polish_iters, tol=tol
    )
    total_iters += iters
    k, theta = proj(k, theta, tol=1e-14, max_rounds=2000)
    small = (theta < THETA_UNFLOOR) & allowed
    if small.any():
        # drop residual mass exactly and reproject on the reduced support
        sub = _JointProjector(oracle.mode, theta.shape[0], target.size, oracle.t0,
                              allowed & ~small, target)
        k, theta = sub(np.where(small[:, :, None], 0.0, k),
                       np.where(small, 0.0, theta), tol=1e-14, max_rounds=2000)
    value = objective.value_and_grads(k, np.maximum(theta, 0.0))[0]
    return value, k, theta, total_iters, any_converged


def _infconv(oracle: ConjugateOracle, P: TransitionKernel, target: np.ndarray, *,
             seed: int = 0, max_iters: int = 400, tol: float = 1e-7) -> InfConvResult:
    target = np.asarray(target, dtype=float)
    if target.shape != (oracle.d,):
        raise ValueError(f"target has dimension {target.shape}, oracle expects ({oracle.d},)")
    allowed = P.probs > 0
    n = P.n_states
    proj = _JointProjector(oracle.mode, n, oracle.d, oracle.t0, allowed, target)
    probe = proj(np.zeros((n, n, oracle.d)), np.where(allowed, 1.0, 0.0) / allowed.sum(),
                 max_rounds=2000)
    if proj.residual(*probe) > 1e-8:
        # the affine system itself has no solution: the target cannot be
        # decomposed (for instance a flux with nonzero divergence)
        theta = PairMeasure(np.where(allowed, 1.0, 0.0) / allowed.sum())
        k = FluxField(np.zeros((n, n, oracle.d)))
        return InfConvResult(math.inf, theta, k, math.inf, True, False, 0)
    lam = oracle.lam_box
    v1, k1, t1, it1, conv1 = _solve_at_box(oracle, P, proj, allowed, target, lam, seed,
                                           max_iters=max_iters, tol=tol)
    v2, k2, t2, it2, conv2 = _solve_at_box(oracle, P, proj, allowed, target, 2 * lam, seed,
                                           max_iters=max_iters, tol=tol, warm=(k1, t1))
    growth = (v2 - v1) / max(1.0, abs(v1))
    feasible = growth <= SWEEP_GROWTH_RTOL
    certificate = abs(v2 - v1) / max(1.0, abs(v1))
    theta = PairMeasure(np.maximum(t2, 0.0) / np.maximum(t2, 0.0).sum())
    k = FluxField(k2)
    value = v2 if feasible else math.inf
    return InfConvResult(value, theta, k, certificate, conv1 and conv2, feasible, it1 + it2)


def infconv_dvg(rho, oracle: ConjugateOracle, P: TransitionKernel, *,
                seed: int = 0, max_iters: int = 400, tol: float = 1e-7) -> InfConvResult:
    """Infimum of the block rate over decompositions of an occupation target.

    Divided by the window length, the value matches the occupation rate of
    the underlying chain at ``rho``. Requires an occupation-mode oracle.
    """
    if oracle.mode != "occupation":
        raise ValueError("infconv_dvg needs an occupation-mode oracle")
    rho = rho.weights if isinstance(rho, ProbVector) else np.asarray(rho, dtype=float)
    return _infconv(oracle, P, rho, seed=seed, max_iters=max_iters, tol=tol)


def infconv_bfg(rho, j, oracle: ConjugateOracle, P: TransitionKernel, *,
                seed: int = 0, max_iters: int = 400, tol: float = 1e-7) -> InfConvResult:
    """Infimum of the block rate over decompositions of a joint (rho, j) target.

    The flux part of the target is in jumps per unit time; unreachable
    targets (for instance a flux with nonzero divergence) come back flagged
    infeasible with an infinite value. Requires a flux-mode oracle.
    """
    if oracle.mode != "flux":
        raise ValueError("infconv_bfg needs a flux-mode oracle")
    rho = rho.weights if isinstance(rho, ProbVector) else np.asarray(rho, dtype=float)
    j = np.asarray(j, dtype=float)
    n = rho.size
    if j.shape != (n, n):
        raise ValueError(f"flux target shape {j.shape} does not match {n} states")
    target = np.concatenate([rho, j.ravel()])
    return _infconv(oracle, P, target, seed=seed, max_iters=max_iters, tol=tol)


# ---------------------------------------------------------------------------
# contraction of the joint rate onto occupation measures


@dataclass(frozen=True)
class ContractionResult:
    """Occupation rate recovered by minimizing the joint rate over fluxes.

    ``gap = value - dual_value`` is a duality certificate: both bound the
    true contraction from above and below, so a tiny gap certifies the
    value to that accuracy.
    """

    value: float
    dual_value: float
    gap: float
    flux: np.ndarray
    potential: np.ndarray


def contract_dvg_from_bfg(rho, Q: GeneratorMatrix, *, gtol: float = 1e-11) -> ContractionResult:
    """Minimize the joint occupation-flux rate over divergence-free fluxes.

    Solved through the concave dual over potentials v (gauge-fixed at
    v[0] = 0) with an independent quasi-Newton method, then certified by
    evaluating the primal functional at the recovered flux
    ``j_xy = rho_x Q_xy exp(v_y - v_x)`` after a least-squares divergence
    repair confined to the support of ``rho_x Q_xy``.
    """
    rho = rho if isinstance(rho, ProbVector) else ProbVector(np.asarray(rho, dtype=float))
    n = Q.n_states
    off = ~np.eye(n, dtype=bool)
    base = rho.weights[:, None] * Q.rates
    base[~off] = 0.0

    def dual_neg(v_free: np.ndarray):
        v = np.concatenate(([0.0], v_free))
        expw = np.exp(v[None, :] - v[:, None])
        flow = base * expw
        val = float(np.sum(flow[off] - base[off]))
        grad_full = flow.sum(axis=0) - flow.sum(axis=1)
        return val, grad_full[1:]

    res = optimize.minimize(dual_neg, np.zeros(n - 1), jac=True, method="BFGS",
                            options={"gtol": gtol, "maxiter": 500})
    v = np.concatenate(([0.0], res.x))
    dual_value = -float(res.fun)
    j = base * np.exp(v[None, :] - v[:, None])
    support = np.argwhere(base > 0)
    if support.size:
        div_op = np.zeros((n, support.shape[0]))
        for col, (x, y) in enumerate(support):
            div_op[x, col] += 1.0
            div_op[y, col] -= 1.0
        delta, *_ = np.linalg.lstsq(div_op, -divergence(j), rcond=None)
        j[support[:, 0], support[:, 1]] += delta
    if j[off].min() < 0:
        raise RuntimeError("divergence repair produced a negative flux entry")
    value = bfg_rate(rho, j, Q)
    return ContractionResult(value, dual_value, value - dual_value, j, v)


def ball_rate(Q: GeneratorMatrix, center, epsilon: float) -> tuple[float, np.ndarray]:
    """Minimize the occupation rate over the l1 ball around ``center``.

    The minimization runs over probability vectors within l1 distance
    ``epsilon`` of the center, parametrized by nonnegative up/down moves to
    keep every constraint linear. This is the exponent that ball-hitting
    probabilities decay with, the reference for ``mc_decay_rate``.
    """
    center = np.asarray(center.weights if isinstance(center, ProbVector) else center, dtype=float)
    n = center.size
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")

    def rho_of(z: np.ndarray) -> np.ndarray:
        rho = center + z[:n] - z[n:]
        rho = np.clip(rho, 1e-15, None)
        return rho / rho.sum()

    def objective(z: np.ndarray):
        rho = rho_of(z)
        res = dvg_rate(ProbVector(rho), Q)
        v = res.maximizer
        expdiff = np.exp(v[None, :] - v[:, None])
        slope = -np.sum(np.where(np.eye(n, dtype=bool), 0.0, Q.rates * (expdiff - 1.0)), axis=1)
        return res.value, np.concatenate([slope, -slope])

    constraints = [
        {"type": "eq", "fun": lambda z: z[:n].sum() - z[n:].sum(),
         "jac": lambda z: np.concatenate([np.ones(n), -np.ones(n)])},
        {"type": "ineq", "fun": lambda z: epsilon - z.sum(),
         "jac": lambda z: -np.ones(2 * n)},
        {"type": "ineq", "fun": lambda z: center + z[:n] - z[n:],
         "jac": lambda z: np.hstack([np.eye(n), -np.eye(n)])},
    ]
    res = optimize.minimize(
        objective, np.zeros(2 * n), jac=True, method="SLSQP",
        bounds=[(0.0, epsilon)] * (2 * n), constraints=constraints,
        options={"maxiter": 200, "ftol": 1e-12},
    )
    rho = rho_of(res.x)
    return dvg_rate(ProbVector(rho), Q).value, rho


# ---------------------------------------------------------------------------
# Monte Carlo decay fits


@dataclass(frozen=True)
class DecayFit:
    """Weighted least-squares fit of -log P(ball hit) against the horizon.

    ``slope`` is the estimated decay exponent, clamped at zero (rates are
    nonnegative); ``slope_se`` is its standard error under binomial hit
    counts.
    """

    n_grid: np.ndarray
    hits: np.ndarray
    n_paths: int
    neg_log_prob: np.ndarray
    slope: float
    slope_se: float
    intercept: float
    epsilon: float

    def probabilities(self) -> np.ndarray:
        return self.hits / self.n_paths


def _count_hits(Q: GeneratorMatrix, horizon: float, target: np.ndarray,
                epsilon: float, n_paths: int, seed: int, n_index: int,
                init, kind: str, t0: float | None) -> int:
    hits = 0
    done = 0
    batch_index = 0
    while done < n_paths:
        size = min(MC_BATCH, n_paths - done)
        rng = np.random.default_rng(np.random.SeedSequence([seed, n_index, batch_index]))
        if kind == "occupation":
            stat = batch_occupations(Q, horizon, size, rng, init)
            dist = np.abs(stat - target).sum(axis=1)
        else:
            _, theta = batch_pair_statistics(Q, t0, int(round(horizon)), size, rng, init,
                                             mode="occupation")
            dist = np.abs(theta - target).sum(axis=(1, 2))
        hits += int(np.count_nonzero(dist <= epsilon))
        done += size
        batch_index += 1
    return hits


def mc_decay_rate(
    Q: GeneratorMatrix,
    target,
    epsilon: float,
    n_grid,
    n_paths: int,
    seed: int,
    *,
    kind: str = "occupation",
    t0: float | None = None,
    init: ProbVector | int | None = None,
) -> DecayFit:
    """Estimate the exponential decay exponent of l1-ball hit probabilities.

    With ``kind="occupation"`` each point of ``n_grid`` is a time horizon T:
    simulate ``n_paths`` occupation vectors over [0, T] and count paths with
    ``|occ - target|_1 <= epsilon``. With ``kind="pair"`` the grid entries
    are window counts m, ``t0`` is the window length, and the hit statistic
    is the empirical pair measure of the window skeleton against an (n, n)
    target. Either way the decay exponent comes from a weighted linear fit
    of -log(hit fraction) on the grid. Grid points with fewer than MIN_HITS
    hits are dropped; if fewer than two survive, InsufficientHits is raised
    carrying the largest grid point that was still usable. Deterministic in
    (seed, n_grid, n_paths).
    """
    if kind not in ("occupation", "pair"):
        raise ValueError("kind must be 'occupation' or 'pair'")
    if kind == "pair" and (t0 is None or t0 <= 0):
        raise ValueError("pair kind needs a positive window length t0")
    target = np.asarray(target.weights if isinstance(target, ProbVector) else target, dtype=float)
    n_grid = np.asarray(n_grid, dtype=float)
    if n_grid.ndim != 1 or n_grid.size < 2 or np.any(np.diff(n_grid) <= 0):
        raise ValueError("n_grid must be an increasing grid of at least two horizons")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if init is None:
        init = invariant_measure(Q)
    hits = np.empty(n_grid.size, dtype=np.int64)
    for idx, horizon in enumerate(n_grid):
        hits[idx] = _count_hits(Q, float(horizon), target, epsilon,
                                n_paths, seed, idx, init, kind, t0)
    usable = hits >= MIN_HITS
    if usable.sum() < 2:
        largest = float(n_grid[usable].max()) if usable.any() else None
        raise InsufficientHits(
            f"only {int(usable.sum())} horizons reached {MIN_HITS} hits "
            f"(counts: {hits.tolist()}); enlarge n_paths or shrink the grid",
            largest_usable_n=largest,
        )
    ns = n_grid[usable]
    phat = hits[usable] / n_paths
    y = -np.log(phat)
    weights = hits[usable] / (1.0 - phat)
    design = np.stack([ns, np.ones_like(ns)], axis=1)
    gram = design.T @ (weights[:, None] * design)
    coef = np.linalg.solve(gram, design.T @ (weights * y))
    cov = np.linalg.inv(gram)
    slope = max(float(coef[0]), 0.0)
    slope_se = float(math.sqrt(max(cov[0, 0], 0.0)))
    neg_log = np.full(n_grid.size, math.inf)
    neg_log[usable] = y
    return DecayFit(n_grid, hits, n_paths, neg_log, slope, slope_se, float(coef[1]), epsilon)
