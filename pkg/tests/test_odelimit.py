import math

import numpy as np
import pytest

from fibflow.odelimit import (
    LimitStudy,
    OdeBlowupError,
    OdeParams,
    discretized_recursion,
    effective_first_order,
    limit_study,
    simulate_ode,
)

HARMONIC = OdeParams(a=0.0, b=-1.0, c=0.0, horizon=2.0, f0=1.0, df0=0.0)
DAMPED = OdeParams(a=-1.0, b=0.0, c=0.0, horizon=2.0, f0=0.0, df0=1.0)
DTS = (1 / 64, 1 / 128, 1 / 256, 1 / 512, 1 / 1024)


class TestSimulateOde:
    def test_free_constant(self):
        params = OdeParams(a=0.0, b=0.0, c=0.0, horizon=1.0, f0=1.0, df0=0.0)
        traj = simulate_ode(params, 0.01)
        np.testing.assert_allclose(traj.values, 1.0, atol=1e-14)

    def test_harmonic_oscillator(self):
        traj = simulate_ode(HARMONIC, 1e-3)
        assert np.abs(traj.values - np.cos(traj.times)).max() <= 1e-8

    def test_first_order_decay(self):
        traj = simulate_ode(DAMPED, 1e-3)
        assert np.abs(traj.values - (1.0 - np.exp(-traj.times))).max() <= 1e-8

    def test_forced_oscillator_runs(self):
        params = OdeParams(
            a=-0.5, b=-1.0, c=1.0, horizon=3.0, f0=0.0, df0=0.0,
            forcing="sinusoid", forcing_freq=0.5,
        )
        traj = simulate_ode(params, 1e-2)
        assert np.isfinite(traj.values).all()

    def test_blowup_reports_time(self):
        params = OdeParams(a=50.0, b=500.0, c=0.0, horizon=100.0, f0=1.0, df0=1.0)
        with pytest.raises(OdeBlowupError) as err:
            simulate_ode(params, 0.5)
        assert err.value.time > 0

    def test_sampled_forcing(self):
        params = OdeParams(
            a=0.0, b=0.0, c=1.0, horizon=1.0, f0=0.0, df0=0.0,
            forcing="sampled",
            forcing_times=(0.0, 0.5, 1.0),
            forcing_values=(1.0, 1.0, 1.0),
        )
        traj = simulate_ode(params, 1e-3)
        # F'' = 1 -> F = t^2 / 2
        np.testing.assert_allclose(traj.values[-1], 0.5, atol=1e-8)


class TestDiscretizedRecursion:
    def test_zero_params_constant_path(self):
        params = OdeParams(a=0.0, b=0.0, c=0.0, horizon=1.0, f0=2.0, df0=0.0)
        traj = discretized_recursion(params, 0.01)
        np.testing.assert_allclose(traj.values, 2.0, atol=1e-14)

    def test_stated_scaling_recovers_fibonacci_at_unit_step(self):
        # dt = 1 with (a, b, c) = (0, 1, eta): F_{k+1} = F_k + F_{k-1} + eta G
        eta = 0.5
        params = OdeParams(
            a=0.0, b=1.0, c=eta, horizon=8.0, f0=0.0, df0=1.0, forcing="constant"
        )
        traj = discretized_recursion(params, 1.0)
        F = [0.0, 1.0]
        for _ in range(7):
            F.append(F[-1] + F[-2] + eta)
        np.testing.assert_allclose(traj.values, F, atol=1e-12)

    def test_stated_scaling_halving_factor_vs_effective_limit(self):
        # the damped problem makes the stated scaling exactly explicit Euler
        errs = []
        for dt in (1 / 64, 1 / 128, 1 / 256):
            d = discretized_recursion(DAMPED, dt)
            ref = effective_first_order(DAMPED, dt, refine=16)
            errs.append(d.sup_norm_diff(ref))
        for a, b in zip(errs, errs[1:]):
            assert 1.6 <= a / b <= 2.4

    def test_second_order_scaling_halving_factor_vs_ode(self):
        errs = []
        for dt in (1 / 64, 1 / 128, 1 / 256):
            d = discretized_recursion(DAMPED, dt, scaling="second-order")
            ref = simulate_ode(DAMPED, dt, refine=16)
            errs.append(d.sup_norm_diff(ref))
        for a, b in zip(errs, errs[1:]):
            assert 1.6 <= a / b <= 2.4

    def test_unknown_scaling(self):
        with pytest.raises(ValueError):
            discretized_recursion(DAMPED, 0.1, scaling="bogus")


class TestLimitStudy:
    @pytest.mark.parametrize("params", [HARMONIC, DAMPED], ids=["harmonic", "damped"])
    def test_stated_scaling_first_order_convergence(self, params):
        study = limit_study(params, DTS)
        assert study.reference == "effective"
        assert 0.8 <= study.fitted_order <= 1.3

    @pytest.mark.parametrize("params", [HARMONIC, DAMPED], ids=["harmonic", "damped"])
    def test_second_order_scaling_first_order_convergence(self, params):
        study = limit_study(params, DTS, scaling="second-order")
        assert study.reference == "second-order"
        assert 0.8 <= study.fitted_order <= 1.3

    def test_stated_scaling_does_not_reach_second_order_equation(self):
        # the stated coefficient scaling drifts to the first-order limit;
        # against the second-order equation the error does not vanish
        study = limit_study(HARMONIC, DTS, reference="second-order")
        assert abs(study.fitted_order) <= 0.3
        assert min(study.errors) > 0.05

    def test_csv_shape(self):
        study = limit_study(DAMPED, (1 / 64, 1 / 128))
        lines = study.to_csv().strip().splitlines()
        assert lines[0] == "dt,error"
        assert len(lines) == 3

    def test_dts_must_decrease(self):
        with pytest.raises(ValueError):
            limit_study(DAMPED, (1 / 64, 1 / 64))


class TestEnergyConservation:
    @pytest.mark.parametrize("dt", [1 / 256, 1 / 512])
    def test_leapfrog_energy_within_ten_percent(self, dt):
        # a = c = 0, b < 0 under the second-order scaling is leapfrog;
        # the discrete energy F^2 + (dF/dt)^2 / |b| is nearly conserved
        params = OdeParams(a=0.0, b=-1.0, c=0.0, horizon=2 * math.pi, f0=1.0, df0=0.0)
        traj = discretized_recursion(params, dt, scaling="second-order")
        F = traj.values
        dF = np.diff(F) / dt
        energy = F[:-1] ** 2 + dF**2
        e0 = energy[0]
        assert np.abs(energy - e0).max() <= 0.1 * e0
