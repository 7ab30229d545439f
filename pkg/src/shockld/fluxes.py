"""Godunov fluxes and explicit Euler stepping for the discrete conservation law.

The interior update for cells m = 2..M-1 is

    Q_m^{n+1} = Q_m^n + dt * b_m(Q^n) + forcing_m + eps * noise_m,

    b_m(Q) = -(F_{m+1/2} - F_{m-1/2}) / dx + D (Q_{m+1} - 2 Q_m + Q_{m-1}) / dx^2,

with first-order Godunov interface fluxes for F(u) = (u - gamma)^2 / 2 and
boundary cells overwritten after every step.  All flux/drift routines
broadcast over leading batch axes so that ensembles of trajectories evolve in
one vectorized call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import SpaceTimeGrid, WaveSpec

__all__ = [
    "FixedStates",
    "TimeInterpolated",
    "godunov_flux",
    "godunov_flux_derivs",
    "drift",
    "euler_step",
    "cfl_number",
    "check_cfl",
]


@dataclass(frozen=True)
class FixedStates:
    """Pin cells 1 and M to the far-field states for all time levels."""

    u_minus: float
    u_plus: float

    width: int = field(default=1, init=False)

    def apply(self, values: np.ndarray, n: int) -> None:
        values[..., 0] = self.u_minus
        values[..., -1] = self.u_plus

    def pinned_columns(self, M: int) -> np.ndarray:
        mask = np.zeros(M, dtype=bool)
        mask[0] = mask[-1] = True
        return mask


@dataclass(frozen=True)
class TimeInterpolated:
    """Pin the `width` outermost cells per side to (1 - n/N) q^0 + (n/N) q^N.

    left0/leftN and right0/rightN hold the pinned values at the initial and
    terminal levels (arrays of length `width`), n_steps is N.
    """

    left0: np.ndarray
    leftN: np.ndarray
    right0: np.ndarray
    rightN: np.ndarray
    width: int
    n_steps: int

    def __post_init__(self):
        if self.width not in (1, 2):
            raise ValueError(f"boundary width must be 1 or 2, got {self.width}")

    def apply(self, values: np.ndarray, n: int) -> None:
        s = n / self.n_steps
        values[..., : self.width] = (1.0 - s) * self.left0 + s * self.leftN
        values[..., -self.width:] = (1.0 - s) * self.right0 + s * self.rightN

    def pinned_columns(self, M: int) -> np.ndarray:
        mask = np.zeros(M, dtype=bool)
        mask[: self.width] = mask[-self.width:] = True
        return mask


def godunov_flux(q_left, q_right, gamma: float):
    """Exact-Riemann (Godunov) interface flux for F(q) = (q - gamma)^2 / 2.

    min of F over [q_left, q_right] when q_left <= q_right (with the sonic
    point q = gamma as an interior candidate), max over the endpoints
    otherwise.  Broadcasts over array inputs.
    """
    ql = np.asarray(q_left, dtype=float)
    qr = np.asarray(q_right, dtype=float)
    fl = 0.5 * (ql - gamma) ** 2
    fr = 0.5 * (qr - gamma) ** 2
    increasing = ql <= qr
    sonic_inside = increasing & (ql <= gamma) & (gamma <= qr)
    out = np.where(increasing, np.minimum(fl, fr), np.maximum(fl, fr))
    out = np.where(sonic_inside, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def godunov_flux_derivs(q_left, q_right, gamma: float):
    """Flux together with one-sided partials (dF/dq_left, dF/dq_right).

    At the sonic kink and at ties q_left == q_right the left-state branch is
    selected, so the returned partials are a consistent subgradient choice.
    """
    ql = np.asarray(q_left, dtype=float)
    qr = np.asarray(q_right, dtype=float)
    dl = ql - gamma
    dr = qr - gamma
    fl = 0.5 * dl * dl
    fr = 0.5 * dr * dr

    increasing = ql <= qr
    sonic_inside = increasing & (ql <= gamma) & (gamma <= qr)
    # increasing data: min at left endpoint iff gamma <= q_left; decreasing
    # data: max at the endpoint farther from the sonic state, ties -> left
    min_at_left = gamma <= ql
    max_at_left = np.abs(dl) >= np.abs(dr)
    take_left = np.where(increasing, min_at_left, max_at_left)
    # ties q_left == q_right fall in the increasing branch; force left state
    take_left = take_left | (ql == qr)

    value = np.where(take_left, fl, fr)
    dleft = np.where(take_left, dl, 0.0)
    dright = np.where(take_left, 0.0, dr)
    value = np.where(sonic_inside, 0.0, value)
    dleft = np.where(sonic_inside, 0.0, dleft)
    dright = np.where(sonic_inside, 0.0, dright)
    return value, dleft, dright


def drift(values: np.ndarray, grid: SpaceTimeGrid, wave: WaveSpec) -> np.ndarray:
    """Interior drift b_m for m = 2..M-1; shape (..., M-2).

    Godunov fluxes at the M-1 interfaces plus the three-point diffusion
    stencil.
    """
    values = np.asarray(values, dtype=float)
    dx = grid.dx
    F = godunov_flux(values[..., :-1], values[..., 1:], wave.gamma)
    conv = -(F[..., 1:] - F[..., :-1]) / dx
    diff = (values[..., 2:] - 2.0 * values[..., 1:-1] + values[..., :-2]) / (dx * dx)
    return conv + wave.D * diff


def euler_step(values: np.ndarray, grid: SpaceTimeGrid, wave: WaveSpec, bc,
               forcing: np.ndarray | None = None,
               noise: np.ndarray | None = None,
               eps: float = 0.0,
               n: int = 0) -> np.ndarray:
    """One explicit Euler step from time level n to n+1.

    `forcing` and `noise` are interior vectors (shape (..., M-2)); forcing is
    added as-is (it already carries its own dt scaling), noise is scaled by
    eps.  Boundary cells are overwritten per `bc` at level n+1.  Returns a
    fresh array.
    """
    values = np.asarray(values, dtype=float)
    out = values.copy()
    incr = grid.dt * drift(values, grid, wave)
    if forcing is not None:
        incr = incr + forcing
    if noise is not None and eps != 0.0:
        incr = incr + eps * np.asarray(noise)
    out[..., 1:-1] += incr
    bc.apply(out, n + 1)
    return out


def cfl_number(grid: SpaceTimeGrid, wave: WaveSpec, margin: float = 0.0) -> float:
    """dt (max|F'|/dx + 2 D/dx^2) over states within `margin` of [u_plus, u_minus]."""
    speed = max(abs(wave.u_minus + margin - wave.gamma),
                abs(wave.u_plus - margin - wave.gamma))
    return grid.dt * (speed / grid.dx + 2.0 * wave.D / grid.dx ** 2)


def check_cfl(grid: SpaceTimeGrid, wave: WaveSpec) -> float:
    """Warn when the explicit step is outside the stability heuristic."""
    c = cfl_number(grid, wave)
    if c > 1.0:
        warnings.warn(
            f"explicit Euler stability heuristic exceeded: "
            f"dt*(max|F'|/dx + 2D/dx^2) = {c:.3g} > 1",
            RuntimeWarning,
            stacklevel=2,
        )
    return c
