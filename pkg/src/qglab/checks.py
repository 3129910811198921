"""Self-contained property suite behind ``qglab check-invariants``.

Every check draws seeded random fields, measures the worst relative defect
of one structural identity, and compares it against a fixed tolerance. The
same identities are exercised (with independent oracles and more draws) by
the test suite; this module exists so a deployed install can vet itself
without pytest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import (
    hs_inner,
    lowpass,
    sobolev_norm,
    tail_bound_check,
)
from .operators import (
    apply_diffusion,
    apply_qg_diffusion,
    biot_savart,
    coriolis_buoyancy,
    potential_vorticity,
    project_osc,
    project_qg,
)
from .pe_solver import build_propagator
from .spectral import (
    Grid,
    Params,
    advect,
    advect_scalar,
    from_spectral,
    inverse_anisotropic_laplacian,
    l2_inner,
    l2_norm,
    leray_project,
    max_divergence,
    random_scalar,
    random_state,
    to_spectral,
)

__all__ = ["CheckResult", "run_all"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    worst: float
    tolerance: float

    @property
    def passed(self):
        return self.worst <= self.tolerance


def _rel_inner(inner, na, nb):
    denom = na * nb
    return abs(inner) / denom if denom > 0 else 0.0


def run_all(n=32, draws=50, seed=2024):
    """Run every invariant check; returns a list of CheckResult."""
    grid = Grid(n)
    rng = np.random.default_rng(seed)
    results = []

    def add(name, worst, tol):
        results.append(CheckResult(name=name, worst=float(worst), tolerance=tol))

    # transform round trip and Parseval
    worst_rt, worst_pars = 0.0, 0.0
    for _ in range(draws):
        phys = rng.standard_normal((n, n, n))
        f = to_spectral(grid, phys)
        back = from_spectral(grid, f)
        worst_rt = max(worst_rt, np.abs(back - phys).max() / np.abs(phys).max())
        # sobolev_norm excludes k=0; compare on the mean-free part
        mean_free = phys - phys.mean()
        rms = np.sqrt(np.mean(mean_free**2))
        worst_pars = max(
            worst_pars,
            abs(rms - sobolev_norm(grid, to_spectral(grid, mean_free), 0.0)) / rms,
        )
    add("transform round-trip", worst_rt, 1e-12)
    add("Parseval (L2 = H^0)", worst_pars, 1e-12)

    # Leray projector: idempotent, self-adjoint, annihilates gradients
    worst = 0.0
    for _ in range(draws):
        u = random_state(grid, rng, divergence_free=False)
        proj = leray_project(grid, u)
        worst = max(worst, l2_norm(leray_project(grid, proj) - proj) / l2_norm(proj))
        w = random_state(grid, rng, divergence_free=False)
        lhs = l2_inner(leray_project(grid, u)[:3], w[:3])
        rhs = l2_inner(u[:3], leray_project(grid, w)[:3])
        worst = max(worst, abs(lhs - rhs) / (l2_norm(u[:3]) * l2_norm(w[:3])))
        worst = max(worst, max_divergence(grid, proj))
    add("Leray idempotent/self-adjoint/solenoidal", worst, 1e-12)

    # inverse anisotropic Laplacian inverts the derivative composition
    worst = 0.0
    for froude in (1.0, 0.5):
        for _ in range(draws // 2 + 1):
            g = random_scalar(grid, rng)
            lap = -(grid.kd1**2 + grid.kd2**2 + froude**2 * grid.kd3**2) * g
            back = inverse_anisotropic_laplacian(grid, lap, froude)
            worst = max(worst, l2_norm(back - g) / l2_norm(g))
    add("inverse anisotropic Laplacian", worst, 1e-12)

    # advection skew-symmetry for solenoidal, dealiased velocities
    worst = 0.0
    for _ in range(draws):
        U = random_state(grid, rng)
        adv = advect(grid, U[:3], U)
        worst = max(worst, _rel_inner(l2_inner(adv, U), l2_norm(adv), l2_norm(U)))
    add("advection skew-symmetry", worst, 1e-8)

    # projector structure
    worst_idem, worst_orth, worst_skew, worst_div = 0.0, 0.0, 0.0, 0.0
    for _ in range(draws):
        U = random_state(grid, rng)
        qg = project_qg(grid, U)
        osc = project_osc(grid, U)
        worst_idem = max(
            worst_idem,
            l2_norm(project_qg(grid, qg) - qg) / max(l2_norm(qg), 1e-300),
            l2_norm(project_osc(grid, osc) - osc) / max(l2_norm(osc), 1e-300),
            l2_norm(qg + osc - U) / l2_norm(U),
            l2_norm(potential_vorticity(grid, osc)) / max(l2_norm(potential_vorticity(grid, U)), 1e-300),
        )
        for s in (0.0, 0.5, 1.0):
            na = sobolev_norm(grid, osc, s)
            nb = sobolev_norm(grid, qg, s)
            worst_orth = max(worst_orth, _rel_inner(hs_inner(grid, osc, qg, s), na, nb))
            au = coriolis_buoyancy(U)
            worst_orth = max(
                worst_orth,
                _rel_inner(hs_inner(grid, au, osc, s), sobolev_norm(grid, au, s), na),
            )
        au = coriolis_buoyancy(U)
        worst_skew = max(
            worst_skew,
            _rel_inner(l2_inner(au, U), l2_norm(au), l2_norm(U)),
            _rel_inner(hs_inner(grid, au, U, 1.0), sobolev_norm(grid, au, 1.0), sobolev_norm(grid, U, 1.0)),
        )
        worst_div = max(worst_div, max_divergence(grid, qg))
    add("QG/osc idempotence and complement", worst_idem, 1e-10)
    add("H^s orthogonality (s=0,1/2,1)", worst_orth, 1e-10)
    add("skew coupling orthogonality (L2, H^1)", worst_skew, 1e-12)
    add("QG fields solenoidal", worst_div, 1e-10)

    # transport commutes with potential vorticity on QG fields
    worst_pv, worst_diff, worst_cancel = 0.0, 0.0, 0.0
    for _ in range(draws):
        om = random_scalar(grid, rng)
        U = biot_savart(grid, om)
        lhs = advect_scalar(grid, U[:3], potential_vorticity(grid, U))
        rhs = potential_vorticity(grid, advect(grid, U[:3], U))
        worst_pv = max(worst_pv, l2_norm(lhs - rhs) / max(l2_norm(lhs), 1e-300))
        gam = np.stack([apply_qg_diffusion(grid, U[i], 1e-2, 5e-3) for i in range(4)])
        qld = project_qg(grid, apply_diffusion(grid, U, 1e-2, 5e-3))
        worst_diff = max(worst_diff, l2_norm(gam - qld) / max(l2_norm(gam), 1e-300))
        adv = advect(grid, U[:3], U)
        worst_cancel = max(
            worst_cancel,
            _rel_inner(hs_inner(grid, adv, U, 1.0),
                       sobolev_norm(grid, adv, 1.0), sobolev_norm(grid, U, 1.0)),
        )
    add("transport/vorticity commutation on QG fields", worst_pv, 1e-8)
    add("QG diffusion = QG projection of full diffusion", worst_diff, 1e-10)
    add("H^1 energy cancellation on QG fields", worst_cancel, 1e-8)

    # smooth truncation: contraction and tail bound
    worst_con, tail_ok = 0.0, True
    for _ in range(draws):
        f = to_spectral(grid, rng.standard_normal((n, n, n)))
        f[0, 0, 0] = 0.0
        for m in range(1, 6):
            low = lowpass(grid, f, m)
            for s in (-1.0, 0.0, 1.0):
                nf = sobolev_norm(grid, f, s)
                worst_con = max(worst_con, (sobolev_norm(grid, low, s) - nf) / nf)
            for s, alpha in ((-1.0, 0.5), (0.0, 1.0), (1.0, 0.25)):
                tail_ok &= tail_bound_check(grid, f, m, s, alpha).passed
    add("low-pass H^s contraction", max(worst_con, 0.0), 1e-14)
    add("high-frequency tail bound", 0.0 if tail_ok else 1.0, 0.0)

    # interpolation: H^3/2 between H^0 and H^2
    worst = 0.0
    for _ in range(draws):
        f = random_scalar(grid, rng)
        lhs = sobolev_norm(grid, f, 1.5)
        rhs = sobolev_norm(grid, f, 0.0) ** 0.25 * sobolev_norm(grid, f, 2.0) ** 0.75
        worst = max(worst, (lhs - rhs) / rhs)
    add("H^3/2 interpolation inequality", max(worst, 0.0), 1e-10)

    # inviscid propagator preserves the solenoidal norm
    small = Grid(8)
    params = Params(epsilon=0.05, nu=1e-30, nu_prime=1e-30)
    prop = build_propagator(small, params, 0.01)
    worst = 0.0
    for _ in range(draws):
        w = random_state(small, rng)
        norm0 = l2_norm(w)
        z = w
        for _ in range(20):
            z = prop.apply_full(z)
        worst = max(worst, abs(l2_norm(z) - norm0) / norm0)
    add("inviscid propagator norm preservation", worst, 1e-10)

    return results
