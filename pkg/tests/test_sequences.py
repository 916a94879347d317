import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zfdd.hamiltonians import SystemParams, rotating_zero_field, two_level
from zfdd.kernel import DRESSED_BASIS, KET_ZERO, TWO_PI, ContractError, evolve_segment
from zfdd.sequences import (LDD_NAMES, Free, PhaseSequence, Pulse, build_schedule, composite_pi,
                            get_sequence, ldd_phases, phi_state, pi_gate_action, pi_gate_expected,
                            pulse_timings, rect_pi, reference_phases, zero_return)
from zfdd.su2 import extract_error_model

PI = np.pi


def two_level_train(pulses, delta):
    U = np.eye(2, dtype=complex)
    for p in pulses:
        U = evolve_segment(two_level(SystemParams(Delta=delta, Omega=p.rabi, phi=p.phase)), p.duration) @ U
    return U


class TestPhaseTables:
    def test_ldd4b(self):
        assert ldd_phases("LDD4b").phases == (0.0, PI, PI, 0.0)

    def test_ldd16a(self):
        bits = (0, 0, 1, 1, 0, 1, 1, 0, 1, 1, 0, 0, 1, 0, 0, 1)
        assert ldd_phases("LDD16a").phases == tuple(PI * b for b in bits)

    def test_concatenation(self):
        assert ldd_phases("LDD8a").phases == ldd_phases("LDD4a").phases + ldd_phases("LDD4b").phases

    @pytest.mark.parametrize("name", LDD_NAMES)
    def test_binary_phases(self, name):
        assert set(ldd_phases(name).phases) <= {0.0, PI}

    def test_unknown_lists_names(self):
        with pytest.raises(ContractError, match="LDD4a"):
            ldd_phases("LDD9")

    def test_zero(self):
        assert reference_phases("ZERO(4)").phases == (0.0,) * 4

    def test_xy8(self):
        x, y = 0.0, PI / 2
        assert reference_phases("XY8").phases == (x, y, x, y, y, x, y, x)
        assert get_sequence("XY8-2").n_pulses == 16

    @pytest.mark.parametrize("bad", ["XY16", "ZERO(0)", "ZERO(x)"])
    def test_bad_reference(self, bad):
        with pytest.raises(ContractError):
            reference_phases(bad)

    def test_json_roundtrip(self):
        seq = ldd_phases("LDD8b")
        d = json.loads(seq.to_json())
        assert set(d) == {"name", "phases_rad", "n_pulses"}
        assert PhaseSequence.from_dict(d) == seq

    def test_json_count_mismatch(self):
        with pytest.raises(ContractError):
            PhaseSequence.from_dict({"name": "x", "phases_rad": [0.0], "n_pulses": 2})

    def test_reversed(self):
        assert ldd_phases("LDD4a").reversed().phases == (PI, PI, 0.0, 0.0)


class TestTimings:
    def test_resonant(self):
        tm = pulse_timings(20.0, 0.0)
        assert tm.T_prime == pytest.approx(0.0125, abs=1e-12)
        assert tm.T_pi == pytest.approx(0.025, abs=1e-12)
        assert tm.T_doubleprime == pytest.approx(tm.T_prime, abs=1e-6)
        assert tm.phi_state_angle == pytest.approx(PI)

    def test_fig_values(self):
        tm = pulse_timings(44.2, 9.8)
        ref = np.arccos(-(9.8 / 44.2) ** 2) / (TWO_PI * np.hypot(44.2, 9.8))
        assert tm.T_prime == pytest.approx(ref, rel=1e-12)
        assert tm.T_prime * 1e3 == pytest.approx(5.70, abs=0.01)

    def test_t_pi_exact(self):
        tm = pulse_timings(20.0, 2.166)
        assert tm.T_pi == pytest.approx(1 / (2 * np.hypot(20.0, 2.166)), rel=1e-15)

    @pytest.mark.parametrize("omega,delta", [(20, 20), (2, 4.219)])
    def test_domain(self, omega, delta):
        with pytest.raises(ContractError):
            pulse_timings(omega, delta)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(5, 50), st.floats(0, 0.9))
    def test_recovery(self, omega, ratio):
        delta = ratio * omega
        tm = pulse_timings(omega, delta)
        assert zero_return(tm, omega, delta) >= 1 - 1e-6

    def test_recovery_tied_samples(self):
        # neighbouring scan samples tie here, which a strict bracket rejects
        omega, delta = 5.0, 5.0 * 0.31307680390269055
        assert zero_return(pulse_timings(omega, delta), omega, delta) >= 1 - 1e-6

    @settings(max_examples=30, deadline=None)
    @given(st.floats(5, 50), st.floats(0, 0.9))
    def test_transfer_to_phi_state(self, omega, ratio):
        delta = ratio * omega
        tm = pulse_timings(omega, delta)
        psi = evolve_segment(rotating_zero_field(SystemParams(Omega=omega, Delta=delta)), tm.T_prime) @ KET_ZERO
        assert abs(np.vdot(phi_state(tm.phi_state_angle), psi)) ** 2 == pytest.approx(1.0, abs=1e-9)

    def test_no_trapping_at_zero_detuning(self):
        tm = pulse_timings(20.0, 0.0)
        psi = evolve_segment(rotating_zero_field(SystemParams(Omega=20)), tm.T_prime) @ KET_ZERO
        dark = DRESSED_BASIS[:, 2]
        assert abs(np.vdot(dark, psi)) ** 2 < 1e-24


class TestPiGate:
    def test_resonant(self):
        act = pi_gate_action(20.0, 0.0)
        assert np.allclose(act["+"], [-1, 0, 0])
        assert np.allclose(act["-"], [0, 0, 1])
        assert np.allclose(act["0"], [0, -1, 0])

    def test_example(self):
        act = pi_gate_action(20.0, 2.0)
        assert act["-"][1] == pytest.approx(-2 * 2 * 20 / (20 ** 2 + 2 ** 2), abs=1e-9)

    def test_random_draws(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            omega = rng.uniform(1, 50)
            delta = rng.uniform(-0.99, 0.99) * omega
            phi = rng.choice([0.0, PI])
            got, ref = pi_gate_action(omega, delta, phi), pi_gate_expected(omega, delta, phi)
            for k in ("+", "-", "0"):
                assert np.max(np.abs(got[k] - ref[k])) < 1e-9
            assert np.allclose(got["+"], [-1, 0, 0], atol=1e-9)


class TestComposite:
    def test_durations(self):
        a, b = composite_pi(20.0)
        assert a.duration == pytest.approx(0.0375) and b.duration == pytest.approx(0.0125)
        assert (a.phase, b.phase) == (0.0, PI)

    def test_inversion_on_resonance(self):
        U = two_level_train(composite_pi(20.0), 0.0)
        assert abs(U[0, 0]) < 1e-12
        assert abs(abs(U[0, 1]) - 1) < 1e-12

    def test_detuning_robust(self):
        eps_c = extract_error_model(two_level_train(composite_pi(20.0), 2.0)).epsilon
        eps_r = extract_error_model(two_level_train(rect_pi(20.0), 2.0)).epsilon
        assert eps_c < eps_r


class TestSchedule:
    def test_ramsey(self):
        tm = pulse_timings(20.0, 1.0)
        s = build_schedule(PhaseSequence("none", ()), tm, 0.7, 20.0)
        assert [type(x) for x in s] == [Pulse, Free, Pulse]
        assert s.segments[1].duration == 0.7

    def test_ldd4a_window(self):
        tm = pulse_timings(20.0, 0.0)
        tau = 1 / 0.6
        s = build_schedule(ldd_phases("LDD4a"), tm, tau, 20.0, with_wrappers=False)
        pulses = [x for x in s if isinstance(x, Pulse)]
        assert len(pulses) == 4 and all(p.duration == pytest.approx(0.025) for p in pulses)
        assert s.total_duration == pytest.approx(4 * tau)

    @settings(max_examples=30, deadline=None)
    @given(st.sampled_from(LDD_NAMES + ("XY8", "ZERO(3)")), st.floats(0.05, 3.0), st.floats(0, 0.9))
    def test_bookkeeping(self, name, tau, ratio):
        tm = pulse_timings(20.0, 20.0 * ratio)
        seq = get_sequence(name)
        s = build_schedule(seq, tm, tau, 20.0)
        assert s.total_duration == pytest.approx(tm.T_prime + seq.n_pulses * tau + tm.T_doubleprime)
        assert all(x.duration >= 0 for x in s)
        assert np.allclose(np.diff(s.pulse_centers), tau)
        # centres computed from the segment list
        t, centres = 0.0, []
        for x in s.segments[1:-1]:
            if isinstance(x, Pulse):
                centres.append(tm.T_prime + t + x.duration / 2)
            t += x.duration
        assert np.allclose(centres, s.pulse_centers)

    def test_overlap(self):
        tm = pulse_timings(20.0, 0.0)
        with pytest.raises(ContractError):
            build_schedule(ldd_phases("LDD4a"), tm, 0.01, 20.0)

    def test_phase_on_subpulses(self):
        tm = pulse_timings(20.0, 0.0)
        s = build_schedule(ldd_phases("LDD4b"), tm, 0.5, 20.0, False, pulse_shapes=[composite_pi(20.0)])
        phases = [x.phase for x in s if isinstance(x, Pulse)]
        assert phases == [0.0, PI, PI, 2 * PI, PI, 2 * PI, 0.0, PI]
