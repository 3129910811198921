
import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qglab import (
    BlowUpError,
    Params,
    build_propagator,
    energy_check,
    l2_norm,
    max_divergence,
    pe_run,
    pe_step,
    project_osc,
    project_qg,
    random_state,
    sobolev_norm,
    vorticity_residual,
)
from qglab.config import DiagConfig
from qglab.pe_solver import _linear_symbols, clear_propagator_cache, default_dt

INVISCID = 1e-30  # positive but exp(-nu k^2 dt) == 1.0 exactly in float64


def dense_ode_oracle(M, dt, w0, rtol=1e-12):
    """Independent dense integration of dw/dt = M w over [0, dt]."""

    def rhs(t, y):
        dw = M @ (y[:4] + 1j * y[4:])
        return np.concatenate([dw.real, dw.imag])

    sol = solve_ivp(rhs, (0.0, dt), np.concatenate([w0.real, w0.imag]),
                    method="DOP853", rtol=rtol, atol=1e-14)
    return sol.y[:4, -1] + 1j * sol.y[4:, -1]


def symbol_reference(kvec, params):
    """Literal assembly of the 4x4 linear symbol, independent of the solver."""
    k = np.asarray(kvec, dtype=float)
    k2 = k @ k
    proj = np.eye(4)
    if k2 > 0:
        proj[:3, :3] -= np.outer(k, k) / k2
    F = params.froude
    a4 = np.array(
        [
            [0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0 / F],
            [0.0, 0.0, -1.0 / F, 0.0],
        ]
    )
    m = -(1.0 / params.epsilon) * (proj @ a4)
    m[:3, :3] += -params.nu * k2 * np.eye(3)
    m[3, 3] += -params.nu_prime * k2
    return m


class TestLinearSymbols:
    def test_matches_literal_assembly(self, grid8, params):
        m = _linear_symbols(grid8, params).reshape(8, 8, 8, 4, 4)
        rng = np.random.default_rng(3)
        for _ in range(20):
            idx = tuple(rng.integers(0, 8, size=3))
            kvec = [
                float(grid8.kd1[idx[0], 0, 0]),
                float(grid8.kd2[0, idx[1], 0]),
                float(grid8.kd3[0, 0, idx[2]]),
            ]
            ref = symbol_reference(kvec, params)
            assert np.abs(m[idx] - ref).max() < 1e-14


class TestPropagator:
    def test_heat_kernel_limit(self, grid8):
        # huge epsilon: rotation negligible, equal viscosities -> diagonal decay
        p = Params(epsilon=1e12, nu=1e-2, nu_prime=1e-2)
        prop = build_propagator(grid8, p, 0.1)
        rng = np.random.default_rng(5)
        for _ in range(10):
            idx = tuple(rng.integers(0, 8, size=3))
            if idx == (0, 0, 0):
                continue
            k2 = (
                grid8.kd1[idx[0], 0, 0] ** 2
                + grid8.kd2[0, idx[1], 0] ** 2
                + grid8.kd3[0, 0, idx[2]] ** 2
            )
            ref = np.exp(-1e-2 * 0.1 * k2) * np.eye(4)
            assert np.abs(prop.matrix_at(*idx) - ref).max() < 1e-10

    def test_vertical_mode_rotation_block(self, grid8):
        # xi parallel to e3, inviscid: horizontal block is a rotation by dt/eps
        p = Params(epsilon=0.05, nu=INVISCID, nu_prime=INVISCID)
        prop = build_propagator(grid8, p, 0.01)
        got = prop.matrix_at(0, 0, 2)
        angle = 0.01 / 0.05
        rot = np.array(
            [[np.cos(angle), np.sin(angle)], [-np.sin(angle), np.cos(angle)]]
        )
        assert np.abs(got[:2, :2] - rot).max() < 1e-12
        # v3 row frozen, theta picks up the shear term (defective block)
        assert np.abs(got[2] - [0, 0, 1, 0]).max() < 1e-12
        assert np.abs(got[3] - [0, 0, angle, 1]).max() < 1e-12

    def test_zero_mode_maps_to_zero(self, grid8, params):
        prop = build_propagator(grid8, params, 0.01)
        assert np.abs(prop.matrix_at(0, 0, 0)).max() == 0.0

    @pytest.mark.parametrize("dt", [1e-2, 1e-1])
    def test_matches_dense_ode_oracle(self, grid8, dt):
        rng = np.random.default_rng(11)
        m_all = None
        for _ in range(25):
            p = Params(
                epsilon=float(10 ** rng.uniform(-3, 0)),
                nu=float(10 ** rng.uniform(-3, -1)),
                nu_prime=float(10 ** rng.uniform(-3, -1)),
            )
            prop = build_propagator(grid8, p, dt)
            m_all = _linear_symbols(grid8, p).reshape(8, 8, 8, 4, 4)
            idx = tuple(rng.integers(0, 8, size=3))
            if idx == (0, 0, 0):
                idx = (1, 2, 3)
            w0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            got = prop.matrix_at(*idx) @ w0
            want = dense_ode_oracle(m_all[idx], dt, w0)
            assert np.abs(got - want).max() <= 1e-10 * np.abs(want).max()

    def test_norm_preservation_inviscid(self, grid8):
        p = Params(epsilon=0.07, nu=INVISCID, nu_prime=INVISCID)
        prop = build_propagator(grid8, p, 0.01)
        rng = np.random.default_rng(4)
        kd = (grid8.kd1, grid8.kd2, grid8.kd3)
        for _ in range(20):
            idx = tuple(rng.integers(0, 8, size=3))
            kvec = np.array(
                [kd[0][idx[0], 0, 0], kd[1][0, idx[1], 0], kd[2][0, 0, idx[2]]]
            )
            if np.all(kvec == 0):
                continue
            w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            # force the divergence-free subspace
            v = w[:3] - kvec * (kvec @ w[:3]) / (kvec @ kvec)
            w = np.concatenate([v, w[3:]])
            z = w.copy()
            for _ in range(100):
                z = prop.matrix_at(*idx) @ z
            assert abs(np.linalg.norm(z) - np.linalg.norm(w)) <= 1e-10 * np.linalg.norm(w)

    def test_divergence_free_subspace_invariant(self, grid8, params):
        prop = build_propagator(grid8, params, 0.05)
        rng = np.random.default_rng(8)
        U = random_state(grid8, rng)
        out = prop.apply_full(U)
        assert max_divergence(grid8, out) <= 1e-12

    def test_cache_reuse_and_invalidation(self, grid8, params):
        clear_propagator_cache()
        p1 = build_propagator(grid8, params, 0.01)
        p2 = build_propagator(grid8, params, 0.01)
        assert p1 is p2
        p3 = build_propagator(grid8, params, 0.02)
        assert p3 is not p1

    def test_rejects_nonpositive_dt(self, grid8, params):
        with pytest.raises(ValueError):
            build_propagator(grid8, params, 0.0)


def small_diag(cadence=10, snapshot_every=0, snapshot_t_max=np.inf):
    return DiagConfig(
        s_list=(-1.0, 0.0, 0.5, 1.0, 1.5),
        cadence=cadence,
        snapshot_every=snapshot_every,
        snapshot_t_max=snapshot_t_max,
    )


class TestPEStep:
    def test_zero_state_stays_zero(self, grid8, params):
        prop = build_propagator(grid8, params, 0.01)
        U = np.zeros((4, 8, 8, 8), dtype=complex)
        assert l2_norm(pe_step(U, prop)) == 0.0

    def test_linear_l2_conservation_inviscid(self, grid8):
        p = Params(epsilon=0.05, nu=INVISCID, nu_prime=INVISCID)
        prop = build_propagator(grid8, p, 0.01)
        rng = np.random.default_rng(6)
        U = random_state(grid8, rng)
        e0 = l2_norm(U)
        for _ in range(100):
            U = pe_step(U, prop, nonlinear=False)
        assert abs(l2_norm(U) - e0) <= 1e-10 * e0

    def test_linear_single_mode_matches_oracle_trajectory(self, grid8, params):
        # nonlinearity off: the step is exactly the cached matrix power
        dt = 0.01
        prop = build_propagator(grid8, params, dt)
        m = _linear_symbols(grid8, params).reshape(8, 8, 8, 4, 4)
        idx = (2, 1, 3)
        w0 = np.array([0.3 - 0.1j, 0.2j, -0.5, 0.9 + 0.4j])
        kvec = np.array(
            [grid8.kd1[idx[0], 0, 0], grid8.kd2[0, idx[1], 0], grid8.kd3[0, 0, idx[2]]]
        )
        w0[:3] -= kvec * (kvec @ w0[:3]) / (kvec @ kvec)
        U = np.zeros((4, 8, 8, 8), dtype=complex)
        U[:, idx[0], idx[1], idx[2]] = w0
        w = w0.copy()
        for _ in range(100):
            U = pe_step(U, prop, nonlinear=False)
            w = dense_ode_oracle(m[idx], dt, w, rtol=1e-13)
        got = U[:, idx[0], idx[1], idx[2]]
        assert np.abs(got - w).max() <= 1e-8 * np.abs(w).max()


class TestPERun:
    def test_zero_initial_data(self, grid8, params):
        U0 = np.zeros((4, 8, 8, 8), dtype=complex)
        rec = pe_run(grid8, U0, params, 0.1, 0.01, small_diag())
        assert l2_norm(rec.final_state) == 0.0
        assert all(v == 0.0 for v in rec.series.channels["hs_U_0"])

    def test_flat_energy_inviscid_linear_for_every_epsilon(self, grid8, rng):
        U0 = random_state(grid8, rng)
        energies = []
        for eps in (1.0, 0.1, 0.01):
            p = Params(epsilon=eps, nu=INVISCID, nu_prime=INVISCID)
            rec = pe_run(grid8, U0, p, 0.1, 0.01, small_diag(cadence=1),
                         nonlinear=False)
            e = rec.series.channel("hs_U_0")
            assert np.abs(e - e[0]).max() <= 1e-10 * e[0]
            energies.append(e)
        for e in energies[1:]:
            assert np.abs(e - energies[0]).max() <= 1e-10 * energies[0][0]

    def test_qg_data_stays_qg_with_equal_viscosities(self, grid16, rng):
        # single-mode balanced state: advection self-cancels and the
        # vorticity diffusion matches the projected full diffusion, so the
        # full run tracks the limit run
        g = grid16
        x1, _, _ = g.mesh()
        w = 2 * np.pi / g.box_length
        from qglab import potential_vorticity, qg_run, to_spectral

        U0 = np.zeros((4, 16, 16, 16), dtype=complex)
        U0[1] = to_spectral(g, 0.3 * np.cos(w * x1))
        p = Params(epsilon=0.1, nu=8e-3, nu_prime=8e-3)
        rec = pe_run(g, U0, p, 0.5, 0.005, small_diag())
        osc = project_osc(g, rec.final_state)
        assert l2_norm(osc) <= 1e-8 * l2_norm(rec.final_state)
        limit = qg_run(g, potential_vorticity(g, U0), p, 0.5, 0.005, small_diag())
        gap = l2_norm(potential_vorticity(g, rec.final_state) - limit.final_omega)
        assert gap <= 1e-8 * l2_norm(limit.final_omega)

    def test_energy_inequality_and_monotonicity(self, grid16, rng, params):
        U0 = random_state(grid16, rng, peak_k=2.0)
        U0 *= 0.5 / sobolev_norm(grid16, U0, 1.0)
        rec = pe_run(grid16, U0, params, 0.5, 0.005, small_diag())
        assert rec.energy_monotone
        report = energy_check(rec.series, params.nu, params.nu_prime)
        assert report.passed
        assert report.max_budget_ratio <= 1.0 + 1e-6

    def test_divergence_free_over_run(self, grid16, rng, params):
        U0 = random_state(grid16, rng)
        rec = pe_run(grid16, U0, params, 0.2, 0.005, small_diag())
        assert np.asarray(rec.series.channels["max_div"]).max() <= 1e-8

    def test_self_convergence_order_four(self, grid16, rng):
        p = Params(epsilon=0.1, nu=1e-2, nu_prime=5e-3)
        U0 = random_state(grid16, rng)
        U0 *= 0.5 / sobolev_norm(grid16, U0, 1.0)
        finals = {}
        for dt in (0.02, 0.01, 0.005):
            finals[dt] = pe_run(grid16, U0, p, 0.1, dt, small_diag()).final_state
        e1 = l2_norm(finals[0.02] - finals[0.01])
        e2 = l2_norm(finals[0.01] - finals[0.005])
        order = np.log2(e1 / e2)
        assert abs(order - 4.0) <= 0.5

    def test_blow_up_detection(self, grid8):
        # gigantic data + inviscid: advection drives a clean overflow
        rng = np.random.default_rng(7)
        U0 = 1e8 * random_state(grid8, rng)
        p = Params(epsilon=1e-2, nu=INVISCID, nu_prime=INVISCID)
        with pytest.raises(BlowUpError):
            pe_run(grid8, U0, p, 1.0, 0.01, small_diag())

    def test_rejects_time_grid_mismatch(self, grid8, params, rng):
        U0 = random_state(grid8, rng)
        with pytest.raises(ValueError):
            pe_run(grid8, U0, params, 0.1, 0.03, small_diag())

    def test_snapshot_cadence_must_align(self, grid8, params, rng):
        U0 = random_state(grid8, rng)
        with pytest.raises(ValueError):
            pe_run(grid8, U0, params, 0.1, 0.01, small_diag(snapshot_every=15))

    def test_snapshot_window(self, grid8, params, rng):
        U0 = random_state(grid8, rng)
        rec = pe_run(grid8, U0, params, 0.2, 0.01,
                     small_diag(snapshot_every=10, snapshot_t_max=0.1))
        assert rec.snapshot_times == pytest.approx([0.0, 0.1])
        assert len(rec.snapshots) == 2

    def test_default_dt_policy(self, grid16, rng):
        U0 = random_state(grid16, rng)
        dt = default_dt(grid16, U0, t_end=1.0)
        assert 0 < dt <= 1e-3
        tiny = 1e-6 * U0
        assert default_dt(grid16, tiny, t_end=1.0) == pytest.approx(1e-3)


class TestVorticityResidualOnRuns:
    def test_residual_small_and_second_order(self, grid16, rng):
        # mostly balanced data with a small oscillating admixture, as in the
        # well-prepared runs whose balance the residual certifies
        p = Params(epsilon=0.1, nu=1e-2, nu_prime=5e-3)
        U0 = random_state(grid16, rng)
        U0 = project_qg(grid16, U0) + 0.02 * project_osc(grid16, U0)
        U0 *= 0.5 / sobolev_norm(grid16, U0, 1.0)
        values = {}
        for dt in (2e-3, 1e-3):
            diag = small_diag(cadence=10, snapshot_every=10, snapshot_t_max=0.2)
            rec = pe_run(grid16, U0, p, 0.2, dt, diag)
            values[dt] = vorticity_residual(rec, p).channel("vorticity_residual")
        assert values[2e-3].max() <= 1e-2
        # refined run meets the tighter bound
        assert values[1e-3].max() <= 1e-3
        ratio = values[2e-3].max() / values[1e-3].max()
        assert 2.5 <= ratio <= 6.0

    def test_pure_qg_equal_viscosities_consistency(self, grid16, rng):
        # nu = nu' and balanced data: the source terms vanish and the
        # residual is the limit-equation consistency error, second order in
        # the snapshot spacing and step
        p = Params(epsilon=0.1, nu=8e-3, nu_prime=8e-3)
        U0 = project_qg(grid16, random_state(grid16, rng))
        U0 *= 0.5 / sobolev_norm(grid16, U0, 1.0)
        diag = small_diag(cadence=10, snapshot_every=10, snapshot_t_max=0.2)
        rec = pe_run(grid16, U0, p, 0.2, 1e-3, diag)
        vals = vorticity_residual(rec, p).channel("vorticity_residual")
        assert vals.max() <= 1e-3

    def test_zero_run_residual_guarded(self, grid8, params):
        U0 = np.zeros((4, 8, 8, 8), dtype=complex)
        diag = small_diag(cadence=10, snapshot_every=10)
        rec = pe_run(grid8, U0, params, 0.05, 1e-3, diag)
        vals = vorticity_residual(rec, params).channel("vorticity_residual")
        assert np.all(vals == 0.0)

    def test_insufficient_snapshots(self, grid8, params, rng):
        rec = pe_run(grid8, random_state(grid8, rng), params, 0.05, 1e-3,
                     small_diag(cadence=10, snapshot_every=50))
        with pytest.raises(ValueError):
            vorticity_residual(rec, params)
