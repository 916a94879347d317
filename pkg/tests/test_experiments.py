import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from zfdd.experiments import (AcField, RobustnessGrid, SensitivityParams, coherence_scaling,
                              d_ramsey, damped_cosine_fit, dd_ac_scan, dd_sensitivity, dip_position,
                              eta_at, parallel_map, point_rngs, rabi, ramsey, ramsey_sensitivity,
                              readout, resolve_threads, robustness_map, robustness_metric,
                              robustness_trace, shot_noise, strain_robustness, write_csv,
                              write_sidecar)
from zfdd.experiments.engine import propagate_state, propagate_state_stack, schedule_propagator
from zfdd.experiments.protocols import KET_PLUS, expected_ramsey_lines
from zfdd.experiments.sensitivity import RAMSEY_DEFAULTS
from zfdd.hamiltonians import StrainParams, SystemParams
from zfdd.kernel import KET_MINUS1, KET_PLUS1, KET_ZERO, ContractError, TimeSeries, dominant_frequencies
from zfdd.sequences import LDD_NAMES, build_schedule, ldd_phases, pulse_timings

DELTAS = np.linspace(-4.32, 4.32, 9)
ALPHAS = np.linspace(-0.2, 0.2, 5)


class TestReadout:
    def test_values(self):
        assert readout(KET_ZERO) == 1
        assert readout(KET_PLUS1) == 0
        assert readout((KET_ZERO + KET_PLUS1) / np.sqrt(2)) == pytest.approx(0.5)

    def test_shot_noise_seeded(self):
        y = np.linspace(0, 1, 11)
        a = shot_noise(y, 0.045, 1000, np.random.default_rng(3))
        b = shot_noise(y, 0.045, 1000, np.random.default_rng(3))
        assert np.array_equal(a, b)
        assert np.all(a >= 0)


class TestRabi:
    def test_undriven(self):
        ts = rabi(SystemParams(), 1.0, 0.01)
        assert np.allclose(ts.y, 1.0)

    def test_resonant_single_line(self):
        # cos^2 of the Rabi angle: only the doubled frequency survives at zero detuning
        ts = rabi(SystemParams(Omega=20), 2.0, 0.001)
        peaks = dominant_frequencies(ts, k=2)
        assert peaks.frequencies[0] == pytest.approx(40.0, abs=peaks.resolution)
        assert all(abs(f - 20.0) > 1.0 for f in peaks.frequencies)
        assert np.allclose(ts.y, np.cos(2 * np.pi * 20 * ts.t) ** 2, atol=1e-12)

    def test_closed_form(self):
        w, d = 44.2, 9.8
        wb = np.hypot(w, d)
        ts = rabi(SystemParams(Omega=w, Delta=d), 0.5, 0.001)
        ref = ((w ** 2 * np.cos(2 * np.pi * wb * ts.t) + d ** 2) / wb ** 2) ** 2
        assert np.max(np.abs(ts.y - ref)) < 1e-12

    def test_bad_step(self):
        with pytest.raises(ContractError):
            rabi(SystemParams(Omega=20), 1.0, 0.0)

    def test_bounds(self):
        ts = rabi(SystemParams(Omega=44.2, Delta=9.8), 1.0, 0.001)
        assert ts.y.min() >= -1e-12 and ts.y.max() <= 1 + 1e-12


class TestRamsey:
    def test_flat_without_hyperfine(self):
        ts, _ = ramsey(SystemParams(Omega=20, A_par=0.0), 0.0, np.arange(0, 5, 0.01))
        assert np.ptp(ts.y) < 1e-12

    def test_domain(self):
        with pytest.raises(ContractError):
            ramsey(SystemParams(Omega=2.0), 0.0, np.arange(0, 1, 0.01))

    def test_lines_low_field(self):
        ts, peaks = ramsey(SystemParams(Omega=20), 2.0, np.arange(0, 20, 0.005))
        for f in expected_ramsey_lines(2.0):
            assert min(abs(np.array(peaks.frequencies) - f)) < peaks.resolution


class TestDD:
    def test_no_field_equals_trace(self):
        p = SystemParams(Omega=20, Delta=2.166)
        taus = np.arange(0.2, 1.0, 0.1)
        scan = dd_ac_scan("LDD4b", p, None, taus)
        trace = robustness_trace("LDD4b", p, taus)
        assert np.max(np.abs(scan.y - trace.y)) < 1e-10
        zero = dd_ac_scan("LDD4b", p, AcField(0.0, 0.3), taus)
        assert np.max(np.abs(zero.y - trace.y)) < 1e-10

    def test_threads_identical(self):
        p = SystemParams(Omega=20, Delta=2.166)
        taus = np.arange(1.5, 1.8, 0.05)
        ac = AcField(0.01, 0.3, n_phase=4)
        a = dd_ac_scan("LDD4b", p, ac, taus, threads=1)
        b = dd_ac_scan("LDD4b", p, ac, taus, threads=3)
        assert np.array_equal(a.y, b.y)

    @pytest.mark.parametrize("f", [0.3, 0.5, 1.0])
    def test_dip_scales_with_frequency(self, f):
        tau0 = 1 / (2 * f)
        taus = tau0 * np.linspace(0.92, 1.08, 33)
        ac = AcField(0.003 * 0.3 / f * 2, f, n_phase=8)
        ts = dd_ac_scan("LDD4b", SystemParams(Omega=20), ac, taus, repetitions=8)
        assert dip_position(ts) == pytest.approx(tau0, rel=0.02)

    def test_bad_ac(self):
        with pytest.raises(ContractError):
            AcField(0.1, 0.0)
        with pytest.raises(ContractError):
            AcField(-0.1, 1.0)


class TestRobustness:
    @pytest.mark.parametrize("name", LDD_NAMES)
    def test_perfect_at_zero_detuning(self, name):
        assert robustness_metric(name, SystemParams(Omega=20)) == pytest.approx(1.0, abs=1e-6)

    def test_ldd4a_close_to_ldd16b(self):
        p = SystemParams(Omega=20, Delta=2.166)
        assert abs(robustness_metric("LDD4a", p) - robustness_metric("LDD16b", p)) < 0.05

    def test_domain(self):
        with pytest.raises(ContractError):
            robustness_metric("LDD4a", SystemParams(Omega=2, Delta=4.219))

    @pytest.mark.parametrize("name", LDD_NAMES + ("ZERO(4)", "XY8"))
    def test_centre_is_perfect(self, name):
        g = robustness_map(name, [0.0], [0.0])
        assert g.values[0, 0] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("name", LDD_NAMES)
    def test_symmetric_in_detuning(self, name):
        g = robustness_map(name, DELTAS, ALPHAS)
        assert np.max(np.abs(g.values - g.values[:, ::-1])) < 1e-10

    def test_grid_contract(self):
        with pytest.raises(ContractError):
            RobustnessGrid([0, 1], [0], [[0.5]])
        with pytest.raises(ContractError):
            RobustnessGrid([0], [0], [[1.5]])

    def test_strain_zero_equals_map(self):
        a = strain_robustness("LDD4a", StrainParams(), ALPHAS, DELTAS)
        b = robustness_map("LDD4a", DELTAS, ALPHAS)
        assert np.array_equal(a.values, b.values)

    def test_strain_continuity(self):
        a = strain_robustness("LDD4a", StrainParams(1e-4, 0.3, 0.0), ALPHAS, DELTAS)
        b = robustness_map("LDD4a", DELTAS, ALPHAS)
        assert np.max(np.abs(a.values - b.values)) < 1e-3


class TestEngine:
    def test_stack_matches_single(self):
        tm = pulse_timings(20, 1.0)
        seq = ldd_phases("LDD8a")
        scheds = [build_schedule(seq, tm, t, 20) for t in (0.3, 0.7, 1.1)]
        stack = propagate_state_stack(scheds, KET_ZERO, delta=1.0, alpha=0.05, d_shift=0.1)
        for s, psi in zip(scheds, stack):
            ref = propagate_state(s, KET_ZERO, delta=1.0, alpha=0.05, d_shift=0.1)
            assert np.max(np.abs(psi - ref)) < 1e-12

    def test_stack_structure_checked(self):
        tm = pulse_timings(20, 0.0)
        a = build_schedule(ldd_phases("LDD4a"), tm, 0.5, 20)
        b = build_schedule(ldd_phases("LDD4b"), tm, 0.5, 20)
        with pytest.raises(ContractError):
            propagate_state_stack([a, b], KET_ZERO)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-4, 4), st.floats(-0.2, 0.2), st.floats(0.1, 2.0))
    def test_unitary_and_bounded(self, delta, alpha, tau):
        tm = pulse_timings(20, abs(delta))
        s = build_schedule(ldd_phases("LDD4b"), tm, tau, 20)
        U = schedule_propagator(s, delta=delta, alpha=alpha, ac=AcField(0.05, 0.3, 0.2))
        assert np.linalg.norm(U.conj().T @ U - np.eye(3)) < 1e-9
        assert 0 <= readout(U @ KET_ZERO) <= 1


class TestDRamsey:
    def test_no_offset_no_oscillation(self):
        ts = d_ramsey(0.0, 8, "LDD4b-phased", nuclear_avg=False)
        assert np.ptp(ts.y) < 1e-9

    def test_apparent_frequency(self):
        ts = d_ramsey(1.0, 8, "standard", nuclear_avg=False)
        peaks = dominant_frequencies(ts, k=1)
        assert peaks[0][0] == pytest.approx(8.0, abs=peaks.resolution)

    def test_bad_kind(self):
        with pytest.raises(ContractError):
            d_ramsey(1.0, 8, "fancy")
        with pytest.raises(ContractError):
            d_ramsey(1.0, 8, "OC pair")
        with pytest.raises(ContractError):
            d_ramsey(1.0, 6, "LDD4b-phased")

    def test_fit_recovers_cosine(self):
        t = np.arange(0, 3, 0.01)
        y = 0.4 * np.exp(-t / 5) * np.cos(2 * np.pi * 2 * t + 0.3) + 0.5
        params, rms = damped_cosine_fit(TimeSeries(t, y))
        assert params[2] == pytest.approx(2.0, rel=1e-6)
        assert rms < 1e-8


class TestSensitivity:
    def test_validation(self):
        with pytest.raises(ContractError):
            SensitivityParams(1.2, 2.1, 2.1, 0.02, 1.3, 0.045)
        with pytest.raises(ContractError):
            SensitivityParams(0.3, 2.1, 2.1, 0.02, 1.3, 0.0)
        with pytest.raises(ContractError):
            SensitivityParams(0.3, 2.1, 0.0, 0.02, 1.3, 0.045)

    def test_contrast_linear(self):
        sp = RAMSEY_DEFAULTS
        sp2 = SensitivityParams(2 * sp.contrast, sp.T2, sp.p, sp.t_I, sp.t_R, sp.n_avg)
        assert eta_at(sp2, 1.0) == pytest.approx(eta_at(sp, 1.0) / 2, rel=1e-12)

    def test_optimum_is_stationary(self):
        sp = RAMSEY_DEFAULTS
        t0 = sp.t_I + sp.t_R
        # d/dtau of log(eta) = p tau^(p-1)/T2^p + 1/(2(t0+tau)) - 1/tau
        g = lambda t: sp.p * t ** (sp.p - 1) / sp.T2 ** sp.p + 0.5 / (t0 + t) - 1 / t
        ref = brentq(g, 0.1, 5.0)
        assert ramsey_sensitivity(sp)[1] == pytest.approx(ref, rel=1e-6)

    def test_no_decay_limit(self):
        sp = SensitivityParams(0.3, 1e12, 2.0, 0.0226, 1.3, 0.045)
        t0 = sp.t_I + sp.t_R
        for t1, t2 in [(0.5, 1.0), (1.0, 4.0)]:
            ratio = eta_at(sp, t1) / eta_at(sp, t2)
            assert ratio == pytest.approx(np.sqrt(t0 + t1) / t1 / (np.sqrt(t0 + t2) / t2), rel=1e-12)

    def test_coherence_scaling(self):
        assert coherence_scaling(500.0, 1, 0.7) == 500.0
        assert coherence_scaling(100.0, 4, 0.5) == pytest.approx(200.0)
        with pytest.raises(ContractError):
            coherence_scaling(100.0, 0, 0.5)

    def test_dd_needs_tau(self):
        with pytest.raises(ContractError):
            dd_sensitivity(RAMSEY_DEFAULTS)

    def test_dd_fixed_k(self):
        sp = SensitivityParams(0.17, 500.0, 4.8, 0.0226, 1.3, 0.045, tau=51.0)
        eta, k = dd_sensitivity(sp, k=4)
        assert k == 4 and eta == pytest.approx(np.pi / 2 * eta_at(
            SensitivityParams(0.17, 500.0, 4.8, 0.0226, 1.3, 0.045), 4 * 51.0))


class TestParallelAndIO:
    def test_order_preserved(self):
        assert parallel_map(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]

    def test_env_threads(self, monkeypatch):
        monkeypatch.setenv("ZFDD_THREADS", "3")
        assert resolve_threads() == 3
        assert resolve_threads(2) == 2
        monkeypatch.setenv("ZFDD_THREADS", "x")
        with pytest.raises(ContractError):
            resolve_threads()

    def test_point_rngs(self):
        a = [r.random() for r in point_rngs(5, 4)]
        b = [r.random() for r in point_rngs(5, 4)]
        assert a == b and len(set(a)) == 4

    def test_csv_format(self, tmp_path):
        p = write_csv(tmp_path / "r.csv", {"x": [0.1, 0.2], "y": [1, 2]})
        raw = p.read_bytes()
        assert b"\r" not in raw and raw.startswith(b"x,y\n")
        rows = list(csv.reader(raw.decode().splitlines()))
        assert float(rows[1][0]) == 0.1

    def test_csv_length_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            write_csv(tmp_path / "r.csv", {"x": [1, 2], "y": [1]})

    def test_sidecar(self, tmp_path):
        p = write_sidecar(tmp_path / "m.json", {"a": np.float64(1.5)}, seed=7, extra=[1, 2])
        doc = json.loads(p.read_text())
        assert doc["seed"] == 7 and doc["params"]["a"] == 1.5 and "version" in doc


def test_plus_state_default():
    g = robustness_map("LDD4a", [1.0], [0.1])
    h = robustness_map("LDD4a", [1.0], [0.1], initial_state=KET_PLUS)
    assert np.array_equal(g.values, h.values)
    dark = (KET_PLUS1 - KET_MINUS1) / np.sqrt(2)
    assert robustness_map("LDD4a", [0.0], [0.0], initial_state=dark).values[0, 0] == pytest.approx(1.0)
