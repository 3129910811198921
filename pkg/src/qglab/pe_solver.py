r"""Time integration of the penalized rotating-Boussinesq system.

The evolved unknown is the Leray-projected, pressure-free spectral state
U = (v1, v2, v3, theta):

    dU/dt = M U - P(v . grad U),      M = L - (1/eps) P A,

where P is the Leray projector extended by the identity on theta, L the
anisotropic diffusion and A the skew rotation/buoyancy coupling. Per Fourier
mode M is a real 4x4 matrix; its exponential is cached for the step size in
use, so the arbitrarily stiff (1/eps) oscillation and the diffusion are
integrated exactly and only advection constrains the step.

Stepping is the integrating-factor (Lawson) form of classical RK4: with
E = exp(dt M), Eh = exp(dt/2 M) and N(U) = -P(v . grad U),

    k1 = N(U)
    k2 = N(Eh U + (dt/2) Eh k1)
    k3 = N(Eh U + (dt/2) k2)
    k4 = N(E U + dt Eh k3)
    U_next = E U + (dt/6) (E k1 + 2 Eh (k2 + k3) + k4).

Mode exponentials come from a batched eigendecomposition; modes whose
eigenvector basis is ill-conditioned (the symbol is defective, e.g. purely
vertical modes coupling v3 to theta through a Jordan block) fall back to
scaling-and-squaring.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .diagnostics import NormSeries, hs_channel, sobolev_norm
from .operators import project_osc
from .spectral import (
    advect,
    enforce_mean_zero,
    from_spectral,
    l2_norm,
    leray_project,
    max_divergence,
)

__all__ = [
    "BlowUpError",
    "LinearPropagator",
    "build_propagator",
    "clear_propagator_cache",
    "pe_step",
    "pe_run",
    "PERunRecord",
    "default_dt",
]

# eig-based exponentials degrade like eps_machine * cond(V)^2; above this
# conditioning the certified scaling-and-squaring path takes over
_COND_LIMIT = 1e4


class BlowUpError(RuntimeError):
    """Raised when a run leaves the regime the solver can represent."""

    def __init__(self, time, reason):
        super().__init__(f"blow-up at t={time:.6g}: {reason}")
        self.time = time
        self.reason = reason


def _linear_symbols(grid, params):
    """Real 4x4 symbol of M = L - (1/eps) P A at every mode, shape (n^3,4,4)."""
    n = grid.n
    F = params.froude
    kd = np.stack(
        [
            np.broadcast_to(grid.kd1, (n, n, n)).ravel(),
            np.broadcast_to(grid.kd2, (n, n, n)).ravel(),
            np.broadcast_to(grid.kd3, (n, n, n)).ravel(),
        ],
        axis=-1,
    )  # (n^3, 3)
    k2 = np.einsum("mi,mi->m", kd, kd)
    inv_k2 = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)

    proj = np.zeros((kd.shape[0], 4, 4))
    proj[:, :3, :3] = np.eye(3) - kd[:, :, None] * kd[:, None, :] * inv_k2[:, None, None]
    proj[:, 3, 3] = 1.0

    a4 = np.array(
        [
            [0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0 / F],
            [0.0, 0.0, -1.0 / F, 0.0],
        ]
    )
    m = -(1.0 / params.epsilon) * (proj @ a4)
    diag = np.zeros((kd.shape[0], 4))
    diag[:, :3] = -params.nu * k2[:, None]
    diag[:, 3] = -params.nu_prime * k2
    m[:, np.arange(4), np.arange(4)] += diag
    return m


def _expm_pair(m, dt):
    """exp(dt*m) and exp(dt/2*m) for a real (N,4,4) batch.

    One eigendecomposition serves both exponents; defective or
    ill-conditioned modes are redone with scipy's scaling-and-squaring.
    """
    w, v = np.linalg.eig(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.linalg.cond(v)
    bad = ~np.isfinite(cond) | (cond > _COND_LIMIT)
    v_safe = np.where(bad[:, None, None], np.eye(4, dtype=v.dtype), v)
    vinv = np.linalg.inv(v_safe)
    full = (v_safe * np.exp(dt * w)[:, None, :]) @ vinv
    half = (v_safe * np.exp(0.5 * dt * w)[:, None, :]) @ vinv

    bad |= ~np.isfinite(full).all(axis=(1, 2)) | ~np.isfinite(half).all(axis=(1, 2))
    if np.any(bad):
        full[bad] = scipy.linalg.expm(dt * m[bad])
        half[bad] = scipy.linalg.expm(0.5 * dt * m[bad])
    return full.real, half.real


@dataclass
class LinearPropagator:
    """Cached per-mode exponentials of the stiff linear symbol.

    Matrices are stored as (4, 4, n, n, n) real arrays; ``full[a, b]`` is the
    (a, b) entry of exp(dt * M) over all modes. ``matrix_at`` recovers the
    conventional 4x4 matrix of a single mode.
    """

    grid: object
    params: object
    dt: float
    full: np.ndarray = field(repr=False)
    half: np.ndarray = field(repr=False)

    @staticmethod
    def _apply(mats, U):
        # unrolled 4x4 multiply-accumulate beats einsum/matmul here
        out = np.empty_like(U)
        for a in range(4):
            np.multiply(mats[a, 0], U[0], out=out[a])
            out[a] += mats[a, 1] * U[1]
            out[a] += mats[a, 2] * U[2]
            out[a] += mats[a, 3] * U[3]
        return out

    def apply_full(self, U):
        return self._apply(self.full, U)

    def apply_half(self, U):
        return self._apply(self.half, U)

    def matrix_at(self, i, j, k, *, half=False):
        mats = self.half if half else self.full
        return np.ascontiguousarray(mats[:, :, i, j, k])


_PROP_CACHE = OrderedDict()
_PROP_CACHE_SIZE = 8


def clear_propagator_cache():
    _PROP_CACHE.clear()


def build_propagator(grid, params, dt):
    """Per-mode exponential of dt * (L - (1/eps) P A); the k=0 mode maps to 0."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    key = (grid.cache_key, params, float(dt))
    cached = _PROP_CACHE.get(key)
    if cached is not None:
        _PROP_CACHE.move_to_end(key)
        return cached

    n = grid.n
    m = _linear_symbols(grid, params)
    full, half = _expm_pair(m, float(dt))
    full = full.reshape(n, n, n, 4, 4)
    half = half.reshape(n, n, n, 4, 4)
    full[0, 0, 0] = 0.0
    half[0, 0, 0] = 0.0
    full = np.ascontiguousarray(np.moveaxis(full, (3, 4), (0, 1)))
    half = np.ascontiguousarray(np.moveaxis(half, (3, 4), (0, 1)))
    prop = LinearPropagator(grid=grid, params=params, dt=float(dt),
                            full=full, half=half)
    _PROP_CACHE[key] = prop
    if len(_PROP_CACHE) > _PROP_CACHE_SIZE:
        _PROP_CACHE.popitem(last=False)
    return prop


def _nonlinear(grid, U):
    """N(U) = -P(v . grad U), dealiased and mean-zero."""
    return -leray_project(grid, advect(grid, U[:3], U))


def pe_step(U, prop, *, nonlinear=True):
    """One integrating-factor RK4 step of size prop.dt."""
    grid = prop.grid
    h = prop.dt
    EU = prop.apply_full(U)
    if nonlinear:
        k1 = _nonlinear(grid, U)
        EhU = prop.apply_half(U)
        k2 = _nonlinear(grid, EhU + (0.5 * h) * prop.apply_half(k1))
        k3 = _nonlinear(grid, EhU + (0.5 * h) * k2)
        k4 = _nonlinear(grid, EU + h * prop.apply_half(k3))
        out = EU + (h / 6.0) * (
            prop.apply_full(k1) + 2.0 * prop.apply_half(k2 + k3) + k4
        )
    else:
        out = EU
    if not np.isfinite(out.view(np.float64)).all():
        raise BlowUpError(float("nan"), "non-finite state after step")
    return out


@dataclass
class PERunRecord:
    """Diagnostics and optional state snapshots of one run."""

    grid: object
    params: object
    dt: float
    series: NormSeries
    snapshot_times: list
    snapshots: list
    final_state: np.ndarray
    energy_monotone: bool
    energy_violation_time: float | None


def default_dt(grid, U0, t_end):
    """Step-size policy: advective CFL against the resolved time span.

    dt = min(0.5 dx / max|v|, t_end / 1000); the linear part is exact, so
    only advection constrains the step.
    """
    v_phys = from_spectral(grid, np.asarray(U0)[:3])
    vmax = float(np.abs(v_phys).max())
    dx = grid.box_length / grid.n
    cfl = 0.5 * dx / vmax if vmax > 0 else np.inf
    return float(min(cfl, t_end / 1000.0))


def pe_run(grid, U0, params, t_end, dt, diag, *,
           nonlinear=True, extra_diag=None):
    """Integrate to t_end recording diagnostics.

    ``diag`` supplies the H^s lists and cadences. Mean-zero and
    divergence-free are re-enforced after every step; the L2 norm is
    monitored for (flagged, non-fatal) increase beyond roundoff, and the run
    aborts with :class:`BlowUpError` on non-finite values or an H^1 norm
    exceeding 1e6 times its initial value.
    """
    U0 = np.asarray(U0)
    grid.check_shape(U0, 4)
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1e-8 * max(t_end, dt):
        raise ValueError(f"t_end={t_end} is not an integer multiple of dt={dt}")
    if diag.snapshot_every and diag.snapshot_every % diag.cadence != 0:
        raise ValueError("snapshot_every must be a multiple of the diag cadence")

    prop = build_propagator(grid, params, dt)
    U = enforce_mean_zero(leray_project(grid, U0.astype(np.complex128)))

    series = NormSeries()
    snapshot_times, snapshots = [], []
    energy_monotone = True
    violation_time = None

    h1_initial = sobolev_norm(grid, U, 1.0)
    e_prev = l2_norm(U)

    def record(step, t, state):
        values = {}
        osc = project_osc(grid, state, params.froude)
        for s in diag.s_list:
            values[hs_channel("U", s)] = sobolev_norm(grid, state, s)
            values[hs_channel("Uosc", s)] = sobolev_norm(grid, osc, s)
        values["max_div"] = max_divergence(grid, state)
        if extra_diag is not None:
            values.update(extra_diag(step, t, state))
        series.append(t, values)
        if diag.snapshot_every and step % diag.snapshot_every == 0:
            if t <= diag.snapshot_t_max * (1 + 1e-12):
                snapshot_times.append(t)
                snapshots.append(state.copy())

    record(0, 0.0, U)

    for step in range(1, n_steps + 1):
        t = step * dt
        try:
            U = pe_step(U, prop, nonlinear=nonlinear)
        except BlowUpError as err:
            raise BlowUpError(t, err.reason) from None
        U = enforce_mean_zero(leray_project(grid, U))

        e_now = l2_norm(U)
        if e_now > e_prev * (1.0 + 1e-8) and energy_monotone:
            energy_monotone = False
            violation_time = t
        e_prev = e_now

        h1_now = sobolev_norm(grid, U, 1.0)
        if h1_initial > 0 and h1_now > 1e6 * h1_initial:
            raise BlowUpError(t, f"H^1 norm grew to {h1_now:.3g}")

        if step % diag.cadence == 0 or step == n_steps:
            record(step, t, U)

    return PERunRecord(
        grid=grid,
        params=params,
        dt=dt,
        series=series,
        snapshot_times=snapshot_times,
        snapshots=snapshots,
        final_state=U,
        energy_monotone=energy_monotone,
        energy_violation_time=violation_time,
    )
