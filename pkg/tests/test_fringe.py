import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lindblad_clock.dynamics import StableBasisModel, coherence_decay_matrix, random_stable_model
from lindblad_clock.errors import GridTooCoarseError, InputError, NumericalFailure, PreconditionError
from lindblad_clock.fringe import (
    FringeScan,
    fit_fringe,
    fringe_jacobian,
    fringe_model,
    gamma_params_from_model,
    jacobian_fd_error,
    monte_carlo_fit,
    scan_fringe,
    shape_metrics,
    three_level_closure,
)
from lindblad_clock.ramsey import ClockTransition, FringeParams, RamseyConfig, model_from_params

T = 1.0
CFG = RamseyConfig(0.01, T, 0.5 * math.pi / 0.01)
WIDE = np.linspace(-2 * math.pi, 2 * math.pi, 2001)
FIT_GRID = np.linspace(-2 * math.pi, 2 * math.pi, 200)


def closed_forms(gt):
    c = math.exp(-gt)
    return (1 - c) / (1 + c), 1 / (1 + c)


class TestScan:
    def test_validation(self):
        with pytest.raises(InputError):
            FringeScan(np.array([0.0, 0.0]), np.array([0.1, 0.2]))
        with pytest.raises(InputError):
            FringeScan(np.array([0.0, 1.0]), np.array([0.1, 1.2]))
        with pytest.raises(PreconditionError):
            scan_fringe(FringeParams(0.0), CFG, [1.0, 0.0])

    def test_symmetric_ideal_scan(self):
        s = scan_fringe(FringeParams(0.0), CFG, WIDE)
        assert np.allclose(s.pe, s.pe[::-1], atol=1e-15)
        assert abs(shape_metrics(s, T).peak_omega) < 1e-9

    def test_contrast(self):
        m = shape_metrics(scan_fringe(FringeParams(1.0 / T), CFG, WIDE), T)
        assert abs(m.contrast - math.exp(-1)) < 1e-5

    def test_model_source_matches_params_source(self):
        params = FringeParams(0.6, -0.4)
        model = model_from_params(params, energies=(2.0, 30.0))
        grid = np.linspace(-4, 4, 41)
        a = scan_fringe(params, CFG, grid)
        b = scan_fringe(model, CFG, grid, transition=ClockTransition(0, 1))
        assert np.max(np.abs(a.pe - b.pe)) < 1e-10

    def test_workers_do_not_change_result(self):
        model = model_from_params(FringeParams(0.6, 0.3))
        grid = np.linspace(-4, 4, 9)
        tr = ClockTransition(0, 1)
        a = scan_fringe(model, CFG, grid, transition=tr, workers=1)
        b = scan_fringe(model, CFG, grid, transition=tr, workers=2)
        assert np.array_equal(a.pe, b.pe)

    def test_noise_deterministic_and_clipped(self):
        noise = {"seed": 7, "sigma": 0.3}
        a = scan_fringe(FringeParams(0.0), CFG, WIDE, noise=noise)
        b = scan_fringe(FringeParams(0.0), CFG, WIDE, noise=noise)
        assert np.array_equal(a.pe, b.pe)
        assert a.pe.min() >= 0 and a.pe.max() <= 1
        assert a.meta["measured"] and a.meta["noise_seed"] == 7

    def test_model_needs_transition(self):
        with pytest.raises(InputError):
            scan_fringe(model_from_params(FringeParams(0.1)), CFG, WIDE)


class TestShape:
    def test_golden_numbers(self):
        m = shape_metrics(scan_fringe(FringeParams(1.0 / T), CFG, WIDE), T)
        assert round(m.min_max_ratio, 2) == 0.46
        assert round(m.slope_point_ratio, 2) == 0.73

    def test_no_decay(self):
        m = shape_metrics(scan_fringe(FringeParams(0.0), CFG, WIDE), T)
        assert abs(m.min_max_ratio) < 1e-3
        assert abs(m.slope_point_ratio - 0.5) < 1e-3

    def test_shifted_peak(self):
        m = shape_metrics(scan_fringe(FringeParams(0.5, 0.7), CFG, WIDE), T)
        assert abs(m.peak_omega - 0.7) < WIDE[1] - WIDE[0]

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 3.0), st.floats(-1.0, 1.0))
    def test_closed_forms(self, gt, et):
        params = FringeParams(gt / T, et / T if gt > 0 else 0.0)
        m = shape_metrics(scan_fringe(params, CFG, WIDE), T)
        mm, sp = closed_forms(gt)
        assert abs(m.min_max_ratio - mm) < 1e-3
        assert abs(m.slope_point_ratio - sp) < 1e-3

    def test_grid_too_coarse(self):
        with pytest.raises(GridTooCoarseError) as err:
            shape_metrics(scan_fringe(FringeParams(0.1), CFG, np.linspace(-math.pi, math.pi, 10)), T)
        assert err.value.required_points >= 25

    def test_grid_too_narrow(self):
        with pytest.raises(GridTooCoarseError):
            shape_metrics(scan_fringe(FringeParams(0.1), CFG, np.linspace(-1, 1, 500)), T)

    def test_flat_zero(self):
        s = FringeScan(np.linspace(-7, 7, 400), np.zeros(400))
        with pytest.raises(NumericalFailure):
            shape_metrics(s, T)


class TestFit:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 3.0), st.floats(-1.0, 1.0), st.floats(0.3, math.pi / 2))
    def test_noiseless_round_trip(self, gt, et, area):
        params = FringeParams(gt / T, et / T, area)
        fit = fit_fringe(scan_fringe(params, CFG, FIT_GRID), T)
        assert fit.converged
        assert abs(fit.gamma - params.gamma) <= 1e-8 * params.gamma
        assert abs(fit.eshift - params.eshift) <= 1e-8 * max(abs(params.eshift), 1.0 / T)
        assert abs(fit.amplitude - 0.5 * math.sin(area) ** 2) <= 1e-8

    def test_shift_reported_modulo_period(self):
        params = FringeParams(0.5, 2 * math.pi / T + 0.3)
        fit = fit_fringe(scan_fringe(params, CFG, FIT_GRID), T)
        assert abs(fit.eshift - 0.3) < 1e-8

    def test_zero_decay_with_noise(self):
        s = scan_fringe(FringeParams(0.0), CFG, FIT_GRID, noise={"seed": 1, "sigma": 0.01})
        fit = fit_fringe(s, T)
        assert fit.gamma >= 0.0
        assert fit.gamma * T < 3 * fit.gamma_se * T or fit.gamma == 0.0

    def test_flat_fringe_lower_bound(self):
        s = scan_fringe(FringeParams(8.0 / T), CFG, FIT_GRID, noise={"seed": 2, "sigma": 0.01})
        assert fit_fringe(s, T).gamma_lower_bound_only

    def test_explicit_init(self):
        params = FringeParams(0.8, 0.2)
        fit = fit_fringe(scan_fringe(params, CFG, FIT_GRID), T, init=(0.4, 0.5, 0.0))
        assert abs(fit.gamma - 0.8) < 1e-8

    def test_bad_init(self):
        with pytest.raises(InputError):
            fit_fringe(scan_fringe(FringeParams(0.8), CFG, FIT_GRID), T, init=(1.0, 2.0))

    def test_jacobian_matches_finite_differences(self, rng):
        for _ in range(20):
            p = np.array([rng.uniform(0.1, 0.5), rng.uniform(0.0, 3.0), rng.uniform(-3.0, 3.0)])
            assert jacobian_fd_error(FIT_GRID, p, T) < 1e-6

    def test_jacobian_columns(self):
        jac = fringe_jacobian(FIT_GRID, 0.5, 0.3, 0.1, T)
        assert np.allclose(jac[:, 0] * 0.5, fringe_model(FIT_GRID, 0.5, 0.3, 0.1, T))

    def test_monte_carlo(self):
        fits = monte_carlo_fit(FringeParams(1.0), CFG, FIT_GRID, 0.01, range(10))
        errs = [abs(f.gamma - 1.0) for f in fits]
        assert np.median(errs) < 0.05
        again = monte_carlo_fit(FringeParams(1.0), CFG, FIT_GRID, 0.01, range(10), workers=2)
        assert [f.gamma for f in fits] == [f.gamma for f in again]


class TestModelQuantities:
    def test_equal_eigenvalues(self):
        model = StableBasisModel(np.zeros(2), np.array([[0.4 + 0.2j, 0.4 + 0.2j]]))
        p = gamma_params_from_model(model, 0, 1)
        assert p.gamma == 0 and p.eshift == 0

    def test_one_and_i(self):
        p = gamma_params_from_model(StableBasisModel(np.zeros(2), np.array([[1.0, 1j]])), 0, 1)
        assert abs(p.gamma - 1) < 1e-15 and abs(p.eshift - 1) < 1e-15

    def test_matches_decay_matrix(self, rng):
        for _ in range(20):
            model = random_stable_model(4, rng)
            lam = coherence_decay_matrix(model)
            p = gamma_params_from_model(model, 1, 3)
            assert abs(lam[3, 1] - complex(p.gamma, -p.eshift)) < 1e-12


class TestClosure:
    def test_real_eigenvalues(self, rng):
        rep = three_level_closure(StableBasisModel(np.zeros(3), rng.normal(size=(2, 3))))
        assert rep.shifts == (0.0, 0.0, 0.0) and rep.closure_sum == 0.0

    def test_hand_example(self):
        rep = three_level_closure(StableBasisModel(np.zeros(3), np.array([[1.0, 1j, 0.0]])))
        assert rep.shifts == (1.0, 0.0, 0.0)
        assert abs(rep.closure_sum - 1.0) < 1e-12
        assert rep.energy_closure == 0.0

    def test_random_generically_nonzero(self, rng):
        sums = [three_level_closure(random_stable_model(3, rng)).closure_sum for _ in range(20)]
        assert np.all(np.abs(sums) > 1e-8)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi))
    def test_common_phase_invariance(self, seed, theta):
        model = random_stable_model(3, np.random.default_rng(seed))
        ell = np.array(model.jump_eigenvalues)
        ell[0] *= np.exp(1j * theta)
        rotated = StableBasisModel(model.energies, ell)
        assert abs(three_level_closure(rotated).closure_sum - three_level_closure(model).closure_sum) < 1e-12

    def test_bad_levels(self):
        with pytest.raises(PreconditionError):
            three_level_closure(StableBasisModel(np.zeros(3)), (0, 0, 1))
