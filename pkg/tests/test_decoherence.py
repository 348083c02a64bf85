import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spindecay.decoherence import (
    AcFieldBath,
    BathNucleus,
    OuNoise,
    QuantumBath,
    QuasiStaticNoise,
    RamanRelaxation,
    StretchedExponential,
    cpmg_coherence_classical,
    cpmg_coherence_quantum,
    dip_times,
    ou_trajectory,
    stretched_envelope,
    t1_raman,
)
from spindecay.traces import DecayTrace

from oracles import central_spin_cpmg, gaussian_cpmg_coherence


class TestRamanLaw:
    def test_calibrated_prediction(self):
        # calibrate from T1(71 K) = 30.4 us; prediction at 8 K lands within
        # 30% of the measured 25 ms (the law saturates at low temperature)
        model = RamanRelaxation.from_point(71.0, 30.4e-3)
        t1_8k = t1_raman(model, 8.0)
        assert abs(t1_8k - 25.0) / 25.0 < 0.30
        assert t1_8k == pytest.approx(21.2, abs=0.5)

    def test_cubic_scaling(self):
        model = RamanRelaxation(coefficient=1e-4)
        assert t1_raman(model, 20.0) == pytest.approx(t1_raman(model, 10.0) / 8.0)

    def test_positive(self):
        model = RamanRelaxation(coefficient=3.7)
        for temp in (0.1, 1.0, 300.0):
            assert t1_raman(model, temp) > 0

    def test_validation(self):
        with pytest.raises(ValueError):
            RamanRelaxation(coefficient=0.0)
        with pytest.raises(ValueError):
            t1_raman(RamanRelaxation(1.0), -3.0)


class TestStretchedEnvelope:
    def test_at_zero(self):
        assert stretched_envelope(StretchedExponential(100.0, 0.7), 0.0) == 1.0

    @pytest.mark.parametrize("beta", [0.3, 1.0, 2.4])
    def test_one_over_e_point(self, beta):
        params = StretchedExponential(42.0, beta)
        assert stretched_envelope(params, 42.0) == pytest.approx(1.0 / np.e)

    def test_plain_exponential(self):
        params = StretchedExponential(50.0, 1.0)
        assert stretched_envelope(params, 100.0) == pytest.approx(np.exp(-2.0))

    def test_beta_window(self):
        with pytest.raises(ValueError):
            StretchedExponential(10.0, 0.0)
        with pytest.raises(ValueError):
            StretchedExponential(10.0, 4.5)


class TestOuTrajectory:
    def test_zero_sigma(self):
        traj = ou_trajectory(OuNoise(0.0, 5.0, seed=1), duration=100.0, dt=0.5)
        assert np.all(traj.values == 0.0)

    def test_stationary_variance(self):
        noise = OuNoise(sigma=1.3, tau_c=5.0, seed=42)
        traj = ou_trajectory(noise, duration=100_000 * 0.5, dt=0.5)
        assert traj.values.size == 100_000
        assert traj.values.var() == pytest.approx(1.3**2, rel=0.03)

    def test_autocorrelation(self):
        noise = OuNoise(sigma=1.3, tau_c=5.0, seed=42)
        v = ou_trajectory(noise, duration=100_000 * 0.5, dt=0.5).values
        lag = 10  # one correlation time
        sample = np.mean(v[:-lag] * v[lag:])
        assert sample == pytest.approx(1.3**2 / np.e, rel=0.05)

    def test_coarse_dt_rejected(self):
        with pytest.raises(ValueError):
            ou_trajectory(OuNoise(1.0, 5.0), duration=10.0, dt=1.0)

    def test_deterministic(self):
        noise = OuNoise(1.0, 5.0, seed=9)
        a = ou_trajectory(noise, duration=50.0, dt=0.5)
        b = ou_trajectory(noise, duration=50.0, dt=0.5)
        assert np.array_equal(a.values, b.values)


class TestClassicalEngine:
    def test_quasi_static_refocused(self):
        trace = cpmg_coherence_classical(
            QuasiStaticNoise(sigma=2.0, seed=3), 8, np.linspace(0.5, 3, 7)
        )
        assert np.all(trace.coherence == 1.0)
        assert np.all(trace.stderr == 0.0)

    def test_zero_strength_is_unity(self):
        taus = np.linspace(0.5, 3, 5)
        for noise in (OuNoise(0.0, 10.0), AcFieldBath(14.3, 0.0)):
            trace = cpmg_coherence_classical(noise, 4, taus)
            assert np.all(trace.coherence == 1.0)

    @pytest.mark.parametrize("n,tau", [(1, 3.0), (4, 2.0), (16, 1.0)])
    def test_ou_matches_gaussian_quadrature(self, n, tau):
        # OU noise is Gaussian, so <cos Phi> = exp(-Var Phi / 2) exactly;
        # the oracle evaluates the variance by double quadrature.
        noise = OuNoise(sigma=0.5, tau_c=100.0, seed=7)
        trace = cpmg_coherence_classical(noise, n, [tau], realizations=4000)
        oracle = gaussian_cpmg_coherence(0.5, 100.0, n, tau)
        assert trace.coherence[0] == pytest.approx(oracle, abs=4 * trace.stderr[0])

    def test_ac_dip_position_k1(self):
        bath = AcFieldBath(larmor_mhz=14.3, coupling_rms=0.6, seed=5)
        n = 16
        t_axis = np.arange(0.30, 0.85, 0.01)
        trace = cpmg_coherence_classical(bath, n, t_axis / n, realizations=2000)
        t_min = trace.times[np.argmin(trace.coherence)]
        expected = dip_times(n, 14.3, 1)[0]
        assert abs(t_min - expected) <= 0.0101

    def test_ac_dip_position_k2(self):
        bath = AcFieldBath(larmor_mhz=14.3, coupling_rms=0.6, seed=5)
        n = 16
        t_axis = np.arange(1.3, 2.1, 0.01)
        trace = cpmg_coherence_classical(bath, n, t_axis / n, realizations=2000)
        t_min = trace.times[np.argmin(trace.coherence)]
        expected = dip_times(n, 14.3, 2)[1]
        assert abs(t_min - expected) <= 0.0101

    def test_dips_scale_linearly_with_n(self):
        bath = AcFieldBath(larmor_mhz=14.3, coupling_rms=0.6, seed=5)
        positions = {}
        for n in (16, 32):
            t_axis = np.arange(0.35 * n / 16, 0.8 * n / 16, 0.01)
            trace = cpmg_coherence_classical(bath, n, t_axis / n, realizations=2000)
            positions[n] = trace.times[np.argmin(trace.coherence)]
        assert positions[32] == pytest.approx(2 * positions[16], abs=0.03)

    def test_classical_coherence_never_significantly_negative(self):
        # the classical picture keeps coherence positive; allow 3 standard
        # errors of Monte-Carlo slack
        bath = AcFieldBath(larmor_mhz=14.3, coupling_rms=0.6, seed=8)
        trace = cpmg_coherence_classical(bath, 16, np.linspace(0.02, 0.12, 40), realizations=600)
        assert np.all(trace.coherence >= -3.0 * trace.stderr)
        noise = OuNoise(sigma=0.8, tau_c=20.0, seed=8)
        trace = cpmg_coherence_classical(noise, 4, np.linspace(0.5, 20, 30), realizations=600)
        assert np.all(trace.coherence >= -3.0 * trace.stderr)

    def test_stderr_scales_inverse_sqrt(self):
        # quadrupling the realizations halves the standard error
        noise = OuNoise(sigma=0.5, tau_c=50.0, seed=13)
        taus = np.linspace(1.0, 6.0, 10)
        se_small = cpmg_coherence_classical(noise, 4, taus, realizations=250).stderr
        se_big = cpmg_coherence_classical(noise, 4, taus, realizations=1000).stderr
        ratio = np.mean(se_small / se_big)
        assert ratio == pytest.approx(2.0, rel=0.15)

    def test_deterministic_and_t1_envelope(self):
        noise = OuNoise(sigma=0.5, tau_c=50.0, seed=21)
        taus = np.linspace(1.0, 4.0, 6)
        a = cpmg_coherence_classical(noise, 2, taus, realizations=100)
        b = cpmg_coherence_classical(noise, 2, taus, realizations=100)
        assert np.array_equal(a.coherence, b.coherence)
        damped = cpmg_coherence_classical(noise, 2, taus, realizations=100, t1_us=1000.0)
        factor = np.exp(-a.times / 2000.0)
        assert np.allclose(damped.coherence, a.coherence * factor)

    def test_scaling_exponent_two_thirds(self):
        # tau_c >> tau regime reproduces T_coh proportional to n^(2/3)
        from spindecay.analysis import fit_scaling, fit_stretched

        noise = OuNoise(sigma=0.5, tau_c=100.0, seed=11)
        points = []
        for n in (1, 4, 16, 64, 256, 1024):
            t_scale = 4.9 * n ** (2.0 / 3.0)
            taus = np.linspace(0.15, 2.6, 24) * t_scale / n
            trace = cpmg_coherence_classical(noise, n, taus, realizations=600)
            fit = fit_stretched(trace)
            points.append((n, fit.params["T_coh"]))
        alpha = fit_scaling(points).params["alpha"]
        assert 2.0 / 3.0 - 0.05 <= alpha <= 2.0 / 3.0 + 0.05

    def test_input_validation(self):
        with pytest.raises(ValueError):
            cpmg_coherence_classical(OuNoise(0.5, 10.0), 0, [1.0])
        with pytest.raises(ValueError):
            cpmg_coherence_classical(OuNoise(0.5, 10.0), 4, [-1.0])
        with pytest.raises(ValueError):
            AcFieldBath(larmor_mhz=-1.0, coupling_rms=0.1)


class TestQuantumBath:
    def test_decoupled_bath_is_unity(self):
        bath = QuantumBath((BathNucleus(14.3, 0.0, 0.0),))
        trace = cpmg_coherence_quantum(bath, 16, np.linspace(0.01, 0.2, 25))
        assert np.allclose(trace.coherence, 1.0, atol=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 5, 16])
    def test_single_nucleus_matches_brute_force(self, n):
        nuc = BathNucleus(larmor_mhz=14.3, a_par_mhz=0.8, a_perp_mhz=1.1)
        bath = QuantumBath((nuc,))
        for tau in (0.03, 0.11, 0.4):
            cce = cpmg_coherence_quantum(bath, n, [tau]).coherence[0]
            oracle = central_spin_cpmg([nuc], n, tau)
            assert cce == pytest.approx(oracle, abs=1e-10)

    def test_two_nuclei_match_brute_force(self):
        nuclei = (
            BathNucleus(14.3, 0.8, 1.1),
            BathNucleus(14.3, -0.4, 0.6),
        )
        bath = QuantumBath(nuclei)
        for n, tau in ((1, 0.21), (4, 0.09), (9, 0.13)):
            cce = cpmg_coherence_quantum(bath, n, [tau]).coherence[0]
            oracle = central_spin_cpmg(nuclei, n, tau)
            assert cce == pytest.approx(oracle, abs=1e-10)

    def test_negative_coherence_with_many_pulses(self):
        # documented operating point: weakly coupled proton-like nucleus,
        # first dip of CPMG-1024
        nuc = BathNucleus(larmor_mhz=14.3, a_par_mhz=0.05, a_perp_mhz=0.05)
        n = 1024
        t_dip = dip_times(n, 14.3, 1)[0]
        taus = np.linspace(0.9, 1.1, 400) * t_dip / n
        trace = cpmg_coherence_quantum(QuantumBath((nuc,)), n, taus)
        assert trace.coherence.min() < -0.5
        assert np.max(np.abs(trace.coherence)) <= 1.0 + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(
        fl=st.floats(0.5, 50.0),
        a=st.floats(-3.0, 3.0),
        b=st.floats(0.0, 3.0),
        n=st.sampled_from([1, 3, 8, 64, 1024]),
        tau=st.floats(0.01, 5.0),
    )
    def test_coherence_bounded(self, fl, a, b, n, tau):
        bath = QuantumBath((BathNucleus(fl, a, b),))
        trace = cpmg_coherence_quantum(bath, n, [tau])
        assert abs(trace.coherence[0]) <= 1.0 + 1e-12


class TestDipTimes:
    def test_first_dip_value(self):
        assert dip_times(16, 14.3, 1)[0] == pytest.approx(0.5594, abs=2e-4)

    def test_spacing(self):
        times = dip_times(16, 14.3, 3)
        assert np.allclose(np.diff(times), 16.0 / 14.3)

    def test_linear_in_n(self):
        assert np.allclose(dip_times(32, 14.3, 3), 2 * dip_times(16, 14.3, 3))

    def test_validation(self):
        with pytest.raises(ValueError):
            dip_times(0, 14.3, 1)
        with pytest.raises(ValueError):
            dip_times(16, -1.0, 1)
        with pytest.raises(ValueError):
            dip_times(16, 14.3, 0)
