import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lindblad_clock.dynamics import StableBasisModel, random_stable_model
from lindblad_clock.errors import InputError, UnderResolvedError
from lindblad_clock.numerics import DensityMatrix, random_density_matrix, random_unitary
from lindblad_clock.ramsey import (
    ClockTransition,
    FringeParams,
    RamseyConfig,
    RegimeWarning,
    analytic_pe,
    apply_pulse,
    default_coupling,
    exact_driven_oracle,
    free_evolution,
    from_interaction_picture,
    model_from_params,
    params_from_model,
    pulse_unitary,
    ramsey_schedule,
    ramsey_sequence,
    to_interaction_picture,
)

TR = ClockTransition(0, 1)
G = DensityMatrix.basis(2, 0)


def cfg_for(area, dw=0.0, T=1.0, omega=100.0):
    return RamseyConfig(area / omega, T, omega, dw)


def textbook(area, dw, T):
    return 0.5 * math.sin(area) ** 2 * (1 + math.cos(dw * T))


class TestPulse:
    def test_full_cycle_is_minus_identity(self):
        u = pulse_unitary(cfg_for(2 * math.pi), 0.0)
        assert np.max(np.abs(u + np.eye(2))) < 1e-15

    def test_pi_pulse_transfers(self):
        u = pulse_unitary(cfg_for(math.pi), 0.0)
        assert abs(u[1, 0] + 1j) < 1e-15
        assert abs(apply_pulse(G, u).matrix[1, 1] - 1) < 1e-15

    def test_half_pi_state(self):
        rho = apply_pulse(G, pulse_unitary(cfg_for(math.pi / 2), 0.0)).matrix
        assert abs(rho[1, 1] - 0.5) < 1e-15
        assert abs(rho[0, 0] - 0.5) < 1e-15
        assert abs(rho[0, 1] - 0.5j) < 1e-15
        assert abs(abs(rho[1, 0]) - 0.5) < 1e-15

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 2 * math.pi), st.floats(-5, 5), st.floats(0, 10), st.booleans())
    def test_unitary(self, area, dw, t0, literal):
        u = pulse_unitary(cfg_for(area, dw), t0, literal=literal)
        assert np.max(np.abs(u.conj().T @ u - np.eye(2))) < 1e-14

    def test_literal_and_frame_exact_agree_on_resonance(self):
        cfg = cfg_for(0.9)
        assert np.allclose(pulse_unitary(cfg, 3.0), pulse_unitary(cfg, 3.0, literal=True), atol=1e-15)

    def test_identity_pulse(self, rng):
        rho = random_density_matrix(2, rng)
        assert np.max(np.abs(apply_pulse(rho, np.eye(2)).matrix - rho.matrix)) < 1e-15

    def test_spectrum_preserved(self, rng):
        rho = random_density_matrix(3, rng)
        out = apply_pulse(rho, random_unitary(3, rng))
        assert np.allclose(out.eigenvalues, rho.eigenvalues, atol=1e-12)

    def test_non_unitary_rejected(self):
        with pytest.raises(InputError):
            apply_pulse(G, np.diag([1.0, 0.9]))


class TestFreeEvolution:
    def test_zero_time(self, rng):
        rho = random_density_matrix(2, rng)
        assert free_evolution(rho, FringeParams(3.0, 1.0), 0.0) is rho

    def test_no_decay_no_change(self, rng):
        rho = random_density_matrix(2, rng)
        out = free_evolution(rho, FringeParams(0.0), 5.0)
        assert np.max(np.abs(out.matrix - rho.matrix)) < 1e-15

    def test_decay_factor(self):
        rho = DensityMatrix.from_ket(np.array([1, 1]) / math.sqrt(2))
        out = free_evolution(rho, FringeParams(1.0), 1.0)
        assert abs(abs(out.matrix[1, 0]) - 0.5 * math.exp(-1)) < 1e-15

    def test_model_path_matches_params(self, rng):
        params = FringeParams(0.8, -0.3)
        model = model_from_params(params, energies=(1.5, 40.0))
        rho = random_density_matrix(2, rng)
        a = free_evolution(rho, params, 0.9)
        b = free_evolution(rho, model, 0.9, t0=0.2, transition=TR)
        assert np.max(np.abs(a.matrix - b.matrix)) < 1e-12


class TestInteractionPicture:
    def test_identity_at_zero(self, rng):
        rho = random_density_matrix(3, rng)
        assert np.array_equal(to_interaction_picture(rho, [0, 1, 5], 0.0).matrix, rho.matrix)

    def test_diagonal_unchanged(self):
        rho = DensityMatrix(np.diag([0.2, 0.3, 0.5]))
        assert np.allclose(to_interaction_picture(rho, [0, 1, 5], 7.0).matrix, rho.matrix, atol=0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-50, 50))
    def test_round_trip(self, seed, t):
        r = np.random.default_rng(seed)
        rho = random_density_matrix(3, r)
        e = r.normal(size=3) * 10
        back = from_interaction_picture(to_interaction_picture(rho, e, t), e, t)
        assert np.max(np.abs(back.matrix - rho.matrix)) < 1e-14


class TestParams:
    def test_model_round_trip(self):
        params = FringeParams(1.3, -0.4)
        back = params_from_model(model_from_params(params), TR)
        assert math.isclose(back.gamma, 1.3, rel_tol=1e-14)
        assert math.isclose(back.eshift, -0.4, rel_tol=1e-14)

    def test_shift_without_decay_rejected(self):
        with pytest.raises(InputError):
            model_from_params(FringeParams(0.0, 1.0))
        with pytest.raises(InputError):
            model_from_params(FringeParams(1e-310, 1.0))

    def test_negative_gamma_rejected(self):
        with pytest.raises(InputError):
            FringeParams(-1.0)


class TestSequence:
    @pytest.mark.parametrize("dw, expected", [(0.0, 1.0), (math.pi, 0.0)])
    def test_ideal_ramsey(self, dw, expected):
        res = ramsey_sequence(FringeParams(0.0), TR, cfg_for(math.pi / 2, dw, T=1.0))
        assert abs(res.pe - expected) < 1e-12

    def test_decay_value(self):
        res = ramsey_sequence(FringeParams(1.0), TR, cfg_for(math.pi / 2, 0.0, T=1.0))
        assert abs(res.pe - 0.5 * (1 + math.exp(-1))) < 1e-12
        assert abs(res.pe - 0.6839) < 1e-4

    def test_textbook_fringe(self):
        area, T = 1.1, 2.0
        for dw in np.linspace(-3, 3, 41):
            pe = ramsey_sequence(FringeParams(0.0, 0.0, area), TR, cfg_for(area, dw, T=T, omega=1000.0)).pe
            assert abs(pe - textbook(area, dw, T)) < 1e-12

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 3.0), st.floats(-0.1, 0.1), st.floats(0.0, 2.0), st.floats(-2.0, 2.0),
           st.floats(0.2, 5.0), st.integers(0, 2**32 - 1))
    def test_model_sequence_equals_closed_form(self, area, dw_frac, gt, et, T, seed):
        omega = 100.0
        params = FringeParams(gt / T, et / T if gt > 1e-6 else 0.0, area)
        energies = tuple(np.random.default_rng(seed).uniform(-20, 20, size=2))
        cfg = RamseyConfig(area / omega, T, omega, dw_frac * omega)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            pe = ramsey_sequence(model_from_params(params, energies), TR, cfg).pe
        assert 0.0 <= pe <= 1.0
        assert abs(pe - analytic_pe(params, cfg.delta_omega, T)) < 1e-10

    def test_three_level_model_equals_closed_form(self, rng):
        model = random_stable_model(3, rng, energy_scale=10.0)
        tr = ClockTransition(2, 0)
        params = params_from_model(model, tr, math.pi / 2)
        cfg = RamseyConfig(math.pi / 2 / 200.0, 0.4, 200.0, 3.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            pe = ramsey_sequence(model, tr, cfg).pe
        assert abs(pe - analytic_pe(params, 3.0, 0.4)) < 1e-10

    def test_purity_through_sequence(self):
        res = ramsey_sequence(FringeParams(0.7, 0.2), TR, cfg_for(math.pi / 2, 0.3, T=2.0), dark_samples=6)
        purities = {label: rho.purity() for label, _, rho in res.snapshots}
        assert abs(purities["start"] - 1) < 1e-14
        assert abs(purities["after_pulse1"] - 1) < 1e-14
        dark = [purities["after_pulse1"]] + [purities[f"dark_{k}"] for k in range(1, 7)] + [purities["before_pulse2"]]
        assert all(b <= a + 1e-14 for a, b in zip(dark, dark[1:]))
        assert dark[-1] < 0.99
        assert abs(purities["final"] - purities["before_pulse2"]) < 1e-14

    def test_snapshot_times(self):
        cfg = cfg_for(math.pi / 2, T=1.0)
        res = ramsey_sequence(FringeParams(0.5), TR, cfg, dark_samples=3)
        times = [t for _, t, _ in res.snapshots]
        assert times == sorted(times)
        assert times[0] == 0.0 and math.isclose(times[-1], cfg.end_time)

    def test_fringe_even_about_shifted_peak(self):
        params = FringeParams(0.4, 0.9)
        for x in np.linspace(0.1, 3.0, 7):
            lo = ramsey_sequence(params, TR, cfg_for(math.pi / 2, 0.9 - x, omega=1000.0)).pe
            hi = ramsey_sequence(params, TR, cfg_for(math.pi / 2, 0.9 + x, omega=1000.0)).pe
            assert abs(lo - hi) < 1e-12

    def test_regime_warning(self):
        with pytest.warns(RegimeWarning):
            ramsey_sequence(FringeParams(0.0), TR, cfg_for(math.pi / 2, dw=50.0, omega=100.0))

    def test_pulse_area_mismatch(self):
        with pytest.raises(InputError):
            ramsey_sequence(FringeParams(0.0, 0.0, 1.0), TR, cfg_for(math.pi / 2))


class TestAnalytic:
    def test_strong_decay_flat(self):
        params = FringeParams(1e3, 0.0, 1.2)
        pe = analytic_pe(params, np.linspace(-5, 5, 11), 1.0)
        assert np.allclose(pe, 0.5 * math.sin(1.2) ** 2, atol=1e-15)

    def test_peak_at_shift(self):
        x = np.linspace(-3, 3, 60001)
        pe = analytic_pe(FringeParams(0.3, 0.7), x, 1.0)
        assert abs(x[np.argmax(pe)] - 0.7) < 1e-4

    def test_scalar_and_array(self):
        p = FringeParams(0.3)
        assert isinstance(analytic_pe(p, 0.1, 1.0), float)
        assert analytic_pe(p, [0.1, 0.2], 1.0).shape == (2,)


class TestDrivenOracle:
    def test_single_pi_pulse(self):
        omega_rabi, w = 1.0, 1e3
        model = StableBasisModel(np.array([0.0, w]))
        res = exact_driven_oracle(model, TR, w, default_coupling(2, TR, omega_rabi), [(0.0, math.pi / omega_rabi)])
        assert abs(res.pe - 1.0) < 1e-3

    def test_ramsey_matches_rwa(self):
        w = 1e3
        cfg = RamseyConfig(math.pi / 2, 2.0, 1.0)
        model = StableBasisModel(np.array([0.0, w]))
        res = exact_driven_oracle(model, TR, w, default_coupling(2, TR, 1.0), ramsey_schedule(cfg))
        assert abs(res.pe - ramsey_sequence(model, TR, cfg).pe) < 5e-3
        assert res.min_eigenvalue > -1e-6

    def test_zero_drive_keeps_populations(self):
        model = StableBasisModel(np.array([0.0, 50.0]), np.array([[0.2, 0.5j]]))
        res = exact_driven_oracle(model, TR, 50.0, np.zeros((2, 2)), [(0.0, 1.0), (2.0, 3.0)])
        assert abs(res.pe) < 1e-14
        assert abs(res.rho_interaction[0, 0] - 1) < 1e-14

    def test_under_resolved(self):
        model = StableBasisModel(np.array([0.0, 10.0]))
        with pytest.raises(UnderResolvedError) as err:
            exact_driven_oracle(model, TR, 10.0, default_coupling(2, TR, 1.0), [(0, 1)], steps_per_period=10)
        assert err.value.required_steps == 40

    def test_bad_schedule(self):
        model = StableBasisModel(np.array([0.0, 10.0]))
        with pytest.raises(InputError):
            exact_driven_oracle(model, TR, 10.0, default_coupling(2, TR, 1.0), [(0, 2), (1, 3)])

    def test_sign_mirror(self):
        # a physical drive at detuning dw sees the fringe of the pulse model at -dw
        w0, omega_rabi, T = 4000.0, 20.0, 3.0
        params = FringeParams(0.2, 0.25)
        model = model_from_params(params, energies=(0.0, w0))
        cfg = RamseyConfig(math.pi / 2 / omega_rabi, T, omega_rabi)
        for dw in (-0.25, 0.25, 0.5):
            exact = exact_driven_oracle(model, TR, w0 + dw, default_coupling(2, TR, omega_rabi),
                                        ramsey_schedule(cfg)).pe
            assert abs(exact - analytic_pe(params, -dw, T)) < 2e-2
            assert abs(exact - analytic_pe(params, dw, T)) > 0.2
