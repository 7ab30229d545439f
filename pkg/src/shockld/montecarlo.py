"""Rare-event probability estimators: basic and importance-sampling Monte Carlo.

Both estimators evolve K independent trajectories of the stochastic Euler
scheme and score the terminal slice against the target ball

    event  <=>  dx sum_m (Q_m^N - target_m)^2 <= delta^2.

Importance sampling tilts the noise mean along a precomputed forcing h^n
(from an optimized path), evolving

    Q^{n+1} = Q^n + dt b(Q^n) + (Phi h^n) + eps dW~^n,

and reweights each sample by the exact Gaussian likelihood ratio

    w = exp( -(dx / 2 dt) sum_n [ ||Phi^{-1} dW~^n + h^n/eps||^2
                                  - ||Phi^{-1} dW~^n||^2 ] ),

so that E[indicator * w] is the original-event probability for any forcing.

Seeding contract: a 64-bit root seed expands into one independent stream per
sample index (counter-based spawn keys), so the draws of sample k never
depend on K, on chunking, or on which estimator consumes them.  Statistics
reduce in deterministic index order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fluxes import drift
from .noise import NoiseModel, unwhiten, whiten
from .optimize import RareEventSpec, boundary_policy, initial_values, target_values

__all__ = [
    "EstimatorReport",
    "event_indicator",
    "run_basic_mc",
    "likelihood_ratio",
    "run_importance_sampling",
    "importance_weights",
    "epsilon_sweep",
    "sample_terminal_states",
    "sample_stream",
]

_DOMAIN_MC = 1  # spawn-key namespace for trajectory noise

_CHUNK = 2048


@dataclass(frozen=True)
class EstimatorReport:
    """Probability estimate with the sample statistics used to judge it.

    std is the population standard deviation of the per-sample values
    p^(k); the 99% confidence interval is estimate -+ 2.6 std / sqrt(K);
    relative_error = std / estimate saturates near sqrt(K) when a single
    sample dominates, which is what flagged_saturated detects.
    """

    estimate: float
    std: float
    ci_low: float
    ci_high: float
    relative_error: float
    K: int
    epsilon: float
    hits: int
    flagged_saturated: bool


def sample_stream(seed: int, run_key: int, k: int) -> np.random.Generator:
    """The independent generator owned by sample k of run `run_key`."""
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(_DOMAIN_MC, run_key, k)))


def event_indicator(terminal: np.ndarray, target: np.ndarray, delta: float,
                    dx: float) -> bool:
    """Exact weighted-L2 ball test dx sum (Q - target)^2 <= delta^2."""
    d = np.asarray(terminal) - np.asarray(target)
    return bool(dx * float(d @ d) <= delta * delta)


def _report(p: np.ndarray, eps: float, hits: int) -> EstimatorReport:
    K = p.size
    mean = float(np.mean(p))
    var = float(np.mean(p * p)) - mean * mean
    std = float(np.sqrt(max(var, 0.0)))
    half = 2.6 * std / np.sqrt(K)
    rel = std / mean if mean > 0 else float("inf")
    return EstimatorReport(
        estimate=mean, std=std, ci_low=mean - half, ci_high=mean + half,
        relative_error=rel, K=K, epsilon=eps, hits=hits,
        flagged_saturated=bool(rel >= 0.9 * np.sqrt(K)))


def _simulate(scen: RareEventSpec, model: NoiseModel, eps: float, K: int,
              seed: int, run_key: int, forcing: np.ndarray | None,
              keep_terminals: bool = False):
    """Evolve K trajectories; return (p-values, hits, terminals or None).

    forcing is the pre-whitened h (N, M-2) or None for the untilted scheme.
    The per-sample weight is computed from the whitened draws directly, which
    equals likelihood_ratio() on the colored increments up to roundoff.
    """
    grid, wave = model.grid, scen.wave
    N, M = grid.N, grid.M
    dt, dx = grid.dt, grid.dx
    n_int = M - 2
    q0 = initial_values(scen, grid)
    target = target_values(scen, grid)
    bc = boundary_policy(scen, grid)
    delta_sq = scen.delta ** 2
    rho = np.sqrt(dt / dx)
    tilt = unwhiten(model, forcing) if forcing is not None else None
    if forcing is not None and eps <= 0:
        raise ValueError("importance sampling requires eps > 0")

    p = np.empty(K)
    hits = 0
    terminals = np.empty((K, M)) if keep_terminals else None
    for start in range(0, K, _CHUNK):
        stop = min(start + _CHUNK, K)
        B = stop - start
        z = np.empty((B, N, n_int))
        for j, k in enumerate(range(start, stop)):
            z[j] = sample_stream(seed, run_key, k).standard_normal((N, n_int))
        if model.is_identity:
            dW = rho * z
        else:
            dW = rho * (z @ model.Phi.T)

        q = np.tile(q0, (B, 1))
        for n in range(N):
            incr = dt * drift(q, grid, wave) + eps * dW[:, n, :]
            if tilt is not None:
                incr += tilt[n]
            q[:, 1:-1] += incr
            bc.apply(q, n + 1)

        d = q - target
        dist_sq = dx * np.sum(d * d, axis=1)
        ind = dist_sq <= delta_sq
        hits += int(np.count_nonzero(ind))
        if forcing is None:
            p[start:stop] = ind.astype(float)
        else:
            shift = forcing / eps
            y = rho * z
            s = y + shift
            log_w = -(dx / (2.0 * dt)) * (
                np.sum(s * s, axis=(1, 2)) - np.sum(y * y, axis=(1, 2)))
            p[start:stop] = ind * np.exp(log_w)
        if keep_terminals:
            terminals[start:stop] = q
    return p, hits, terminals


def run_basic_mc(scen: RareEventSpec, model: NoiseModel, eps: float, K: int,
                 seed: int, run_key: int = 0) -> EstimatorReport:
    """Hit-fraction estimator over K independent noisy trajectories."""
    if K < 1:
        raise ValueError("K must be at least 1")
    p, hits, _ = _simulate(scen, model, eps, K, seed, run_key, forcing=None)
    return _report(p, eps, hits)


def likelihood_ratio(noise_path: np.ndarray, forcing: np.ndarray,
                     model: NoiseModel, eps: float, dt: float,
                     dx: float) -> float:
    """Exact density ratio of the untilted vs tilted increment law.

    noise_path holds the zero-mean colored increments dW~^n (shape (N, M-2))
    drawn under the tilted measure; forcing holds h^n.  Always positive, and
    exactly 1 when the forcing vanishes.
    """
    noise_path = np.asarray(noise_path, dtype=float)
    forcing = np.asarray(forcing, dtype=float)
    if noise_path.shape != forcing.shape:
        raise ValueError("noise_path and forcing must have matching shapes")
    y = whiten(model, noise_path)
    s = y + forcing / eps
    log_w = -(dx / (2.0 * dt)) * float(np.sum(s * s) - np.sum(y * y))
    return float(np.exp(log_w))


def run_importance_sampling(scen: RareEventSpec, model: NoiseModel, eps: float,
                            K: int, forcing: np.ndarray, seed: int,
                            run_key: int = 0) -> EstimatorReport:
    """Tilted estimator: mean of indicator times likelihood ratio.

    With forcing = 0 this reproduces run_basic_mc sample for sample (same
    seed stream, unit weights).
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    forcing = np.asarray(forcing, dtype=float)
    p, hits, _ = _simulate(scen, model, eps, K, seed, run_key, forcing=forcing)
    return _report(p, eps, hits)


def sample_terminal_states(scen: RareEventSpec, model: NoiseModel, eps: float,
                           K: int, seed: int, run_key: int = 0,
                           forcing: np.ndarray | None = None) -> np.ndarray:
    """Terminal slices of K noisy trajectories, shape (K, M)."""
    _, _, terminals = _simulate(scen, model, eps, K, seed, run_key,
                                forcing=forcing, keep_terminals=True)
    return terminals


def importance_weights(model: NoiseModel, eps: float, K: int,
                       forcing: np.ndarray, seed: int,
                       run_key: int = 0) -> np.ndarray:
    """Likelihood ratios of K tilted samples, with no event indicator.

    Diagnostic for the change of measure: the weights average to 1 in
    expectation for any forcing.  Uses the same per-sample streams as the
    estimators.
    """
    grid = model.grid
    N, n_int = grid.N, grid.M - 2
    rho = np.sqrt(grid.dt / grid.dx)
    shift = np.asarray(forcing, dtype=float) / eps
    w = np.empty(K)
    for start in range(0, K, _CHUNK):
        stop = min(start + _CHUNK, K)
        z = np.empty((stop - start, N, n_int))
        for j, k in enumerate(range(start, stop)):
            z[j] = sample_stream(seed, run_key, k).standard_normal((N, n_int))
        y = rho * z
        s = y + shift
        log_w = -(grid.dx / (2.0 * grid.dt)) * (
            np.sum(s * s, axis=(1, 2)) - np.sum(y * y, axis=(1, 2)))
        w[start:stop] = np.exp(log_w)
    return w


def epsilon_sweep(scen: RareEventSpec, model: NoiseModel, eps_list,
                  K: int, estimators, seed: int,
                  forcing_pinned: np.ndarray | None = None,
                  forcing_ball: np.ndarray | None = None):
    """Run the requested estimators at every eps; one report per pair.

    estimators is a subset of {"mc", "is0", "is-delta"}; the importance
    samplers need their forcing passed in (pinned-optimum h for is0,
    ball-optimum h for is-delta).  Each eps gets an independent run key, so
    adding grid points never perturbs existing ones.  Returns a list of
    (eps, estimator, EstimatorReport) in sweep order.
    """
    eps_list = list(eps_list)
    if not eps_list:
        raise ValueError("eps_list must be nonempty")
    estimators = list(estimators)
    for name in estimators:
        if name not in ("mc", "is0", "is-delta"):
            raise ValueError(f"unknown estimator: {name!r}")
    if "is0" in estimators and forcing_pinned is None:
        raise ValueError("estimator is0 requires forcing_pinned")
    if "is-delta" in estimators and forcing_ball is None:
        raise ValueError("estimator is-delta requires forcing_ball")

    out = []
    for i, eps in enumerate(eps_list):
        for name in estimators:
            if name == "mc":
                rep = run_basic_mc(scen, model, eps, K, seed, run_key=i)
            elif name == "is0":
                rep = run_importance_sampling(scen, model, eps, K,
                                              forcing_pinned, seed, run_key=i)
            else:
                rep = run_importance_sampling(scen, model, eps, K,
                                              forcing_ball, seed, run_key=i)
            out.append((eps, name, rep))
    return out
