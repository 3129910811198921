"""Well-prepared initial data for the convergence experiments.

The balanced part is the Biot-Savart reconstruction of a random smooth
vorticity with a Gaussian ring spectrum around |k| = spectrum_peak_k, scaled
to a target H^1 norm; it depends only on the seed, never on epsilon. The
oscillating part is the oscillating projection of an independent smooth
divergence-free draw, scaled to a target H^-1 norm (c * epsilon for the
well-prepared families driven by the sweep), with an extra spectral factor
(1 + |k|)^(-delta) biasing it toward smoother content. The sum is mean-zero
and exactly divergence-free by construction; it is re-projected once more on
the way out so the solver precondition holds to roundoff.
"""

from __future__ import annotations

import numpy as np

from .operators import biot_savart, project_osc
from .diagnostics import sobolev_norm
from .spectral import dealias, enforce_mean_zero, leray_project, to_spectral

__all__ = ["spectrum_field", "make_well_prepared_data"]


def spectrum_field(grid, rng, peak_k, extra_smoothness=0.0):
    """Random mean-zero scalar with a Gaussian ring spectrum at |k|=peak_k."""
    noise = rng.standard_normal((grid.n,) * 3)
    f = to_spectral(grid, noise)
    kmag = np.sqrt(grid.kmag2) * (grid.box_length / (2.0 * np.pi))
    f *= np.exp(-0.5 * (kmag - peak_k) ** 2)
    if extra_smoothness:
        f *= (1.0 + kmag) ** (-extra_smoothness)
    return enforce_mean_zero(dealias(grid, f))


def make_well_prepared_data(grid, config, *, osc_h_minus1=None):
    """Build the configured initial state (balanced + small oscillating).

    ``osc_h_minus1`` overrides the target H^-1 norm of the oscillating part;
    by default it is init.osc_amplitude * params.epsilon.
    """
    init = config.init
    froude = config.params.froude
    if osc_h_minus1 is None:
        osc_h_minus1 = init.osc_amplitude * config.params.epsilon

    rng = np.random.default_rng(init.seed)
    omega_raw = spectrum_field(grid, rng, init.spectrum_peak_k)
    U_qg = np.zeros((4,) + (grid.n,) * 3, dtype=np.complex128)
    if init.qg_amplitude > 0:
        qg_raw = biot_savart(grid, omega_raw, froude)
        h1 = sobolev_norm(grid, qg_raw, 1.0)
        if h1 == 0:
            raise ValueError("balanced draw vanished; change the seed")
        U_qg = (init.qg_amplitude / h1) * qg_raw

    U_osc = np.zeros_like(U_qg)
    if osc_h_minus1 > 0:
        for attempt in range(8):
            osc_rng = np.random.default_rng((init.seed, 1, attempt))
            raw = np.stack(
                [
                    spectrum_field(grid, osc_rng, init.spectrum_peak_k,
                                   init.osc_extra_smoothness)
                    for _ in range(4)
                ]
            )
            candidate = project_osc(grid, leray_project(grid, raw), froude)
            hm1 = sobolev_norm(grid, candidate, -1.0)
            if hm1 > 1e-12:
                U_osc = (osc_h_minus1 / hm1) * candidate
                break
        else:
            raise ValueError("oscillating draw vanished for every reseed")

    U0 = U_qg + U_osc
    return enforce_mean_zero(leray_project(grid, U0))
