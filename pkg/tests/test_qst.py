import json
import math

import numpy as np
import pytest

from cavityq import qst
from cavityq.errors import (
    DegenerateDetuningError,
    NumericError,
    ParseError,
    ShapeError,
    StepSizeError,
    UsageError,
)

KAPPA = 1e6
HALF_SPAN = 20.0 / KAPPA  # kappa * T_span = 40


def matched_config(dt=0.04 / KAPPA, delta=0.0, input_state=(0.0, 1.0)):
    return qst.QstConfig(
        kappa_hz=KAPPA,
        emit_waveform=qst.matched_emit_rate(KAPPA),
        catch_waveform=qst.matched_catch_rate(KAPPA),
        t_span_s=(-HALF_SPAN, HALF_SPAN),
        dt_s=dt,
        delta_omega_hz=delta,
        input_state=input_state,
    )


def zero_waveform():
    return qst.SampledWaveform(np.zeros(2), 2 * HALF_SPAN, -HALF_SPAN)


class TestSechPitch:
    def test_peak_is_half_kappa(self):
        assert qst.sech_pitch(2e6, 0.0) == pytest.approx(1e6, rel=1e-15)

    def test_even_and_vectorized(self):
        t = np.linspace(-3e-5, 3e-5, 17)
        vals = qst.sech_pitch(KAPPA, t)
        np.testing.assert_allclose(vals, qst.sech_pitch(KAPPA, -t), rtol=1e-15)
        assert vals[8] == max(vals)
        assert qst.sech_pitch(KAPPA, t[3]) == pytest.approx(vals[3])

    def test_emission_capture_over_window(self):
        # emit-only run: the window [-20/k, 20/k] releases nearly the whole
        # photon, and the flux integral matches the closed form 1 - e^{-20}
        cfg = qst.QstConfig(
            kappa_hz=KAPPA,
            emit_waveform=qst.matched_emit_rate(KAPPA),
            catch_waveform=zero_waveform(),
            t_span_s=(-HALF_SPAN, HALF_SPAN),
            dt_s=0.04 / KAPPA,
        )
        res = qst.simulate_transfer(cfg)
        emitted = res.emitted_trace[-1]
        assert emitted > 0.9999
        assert emitted == pytest.approx(1 - math.exp(-20.0), abs=1e-8)

    def test_flux_profile_is_squared_envelope(self):
        # channel flux density of the matched emitter = sech_pitch^2 / kappa
        cfg = qst.QstConfig(
            kappa_hz=KAPPA,
            emit_waveform=qst.matched_emit_rate(KAPPA),
            catch_waveform=zero_waveform(),
            t_span_s=(-HALF_SPAN, HALF_SPAN),
            dt_s=0.04 / KAPPA,
        )
        res = qst.simulate_transfer(cfg)
        flux = qst.sech_pitch(KAPPA, res.times_s) ** 2 / KAPPA
        integral = np.trapezoid(flux, x=res.times_s)
        assert integral == pytest.approx(res.emitted_trace[-1], abs=1e-4)


class TestRamanCoupling:
    def test_zero_drive(self):
        assert qst.raman_coupling(0.0, 10e6, -200e6, 1e9) == 0.0

    def test_linear_in_drive(self):
        one = qst.raman_coupling(1.0, 10e6, -200e6, 1e9)
        assert qst.raman_coupling(7.5, 10e6, -200e6, 1e9) == pytest.approx(
            7.5 * one, rel=1e-12
        )

    def test_reference_point(self):
        val = qst.raman_coupling(50e6, 10e6, -200e6, 1e9)
        expect = 10e6 * 50e6 * (-200e6) / (math.sqrt(2) * 1e9 * 0.8e9)
        assert val == pytest.approx(expect, rel=1e-12)
        assert val == pytest.approx(-88.4e3, rel=1e-3)

    def test_pointwise_in_envelope(self):
        env = np.array([0.0, 1e6, 2e6, 3e6])
        out = qst.raman_coupling(env, 10e6, -200e6, 1e9)
        assert out.shape == env.shape
        np.testing.assert_allclose(
            out, [qst.raman_coupling(float(x), 10e6, -200e6, 1e9) for x in env]
        )

    def test_singular_detunings(self):
        with pytest.raises(DegenerateDetuningError):
            qst.raman_coupling(1e6, 10e6, -200e6, 0.0)
        with pytest.raises(DegenerateDetuningError):
            qst.raman_coupling(1e6, 10e6, -200e6, 200e6)


class TestSampledWaveform:
    def test_interpolates_and_clamps(self):
        wf = qst.SampledWaveform(np.array([0.0, 2.0, 4.0]), 1.0, 10.0)
        assert wf(10.5) == pytest.approx(1.0)
        assert wf(12.0) == pytest.approx(4.0)
        assert wf(9.0) == pytest.approx(0.0)  # clamp below
        assert wf(13.0) == pytest.approx(4.0)  # clamp above

    def test_negative_rates_rejected(self):
        with pytest.raises(UsageError):
            qst.SampledWaveform(np.array([1.0, -0.1]), 1.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericError):
            qst.SampledWaveform(np.array([1.0, np.nan]), 1.0)

    def test_too_short_rejected(self):
        with pytest.raises(ShapeError):
            qst.SampledWaveform(np.array([1.0]), 1.0)

    def test_integral(self):
        wf = qst.SampledWaveform(np.array([0.0, 1.0, 0.0]), 0.5)
        assert wf.integral() == pytest.approx(0.5)


class TestSimulateTransfer:
    def test_matched_transfer_efficiency(self):
        res = qst.simulate_transfer(matched_config())
        assert res.eta > 0.99999
        assert abs(res.transfer_amplitude.imag) < 1e-9
        assert res.transfer_amplitude.real > 0.999

    def test_matches_closed_form_solution(self):
        # a = sqrt((1-tanh)/2), b = -sqrt((1+tanh)/2); the b deviation at t0
        # is the finite-window truncation of the idealized solution
        res = qst.simulate_transfer(matched_config())
        x = KAPPA * res.times_s / 2
        a_exact = np.sqrt((1 - np.tanh(x)) / 2)
        b_exact = -np.sqrt((1 + np.tanh(x)) / 2)
        np.testing.assert_allclose(res.a_trace, a_exact, atol=1e-4)
        np.testing.assert_allclose(res.b_trace, b_exact, atol=1e-4)

    def test_superposition_fidelity(self):
        alpha, beta = 1 / math.sqrt(2), 1j / math.sqrt(2)
        res = qst.simulate_transfer(matched_config(input_state=(alpha, beta)))
        assert res.fidelity == pytest.approx(1.0, abs=1e-7)
        assert res.fidelity >= abs(alpha) ** 4

    def test_vacuum_branch_always_transfers(self):
        # beta = 0: F = 1 no matter how bad the catch waveform is
        rng = np.random.default_rng(3)
        bad_catch = qst.SampledWaveform(
            rng.uniform(0, KAPPA, 64), 2 * HALF_SPAN / 63, -HALF_SPAN
        )
        cfg = qst.QstConfig(
            kappa_hz=KAPPA,
            emit_waveform=qst.matched_emit_rate(KAPPA),
            catch_waveform=bad_catch,
            t_span_s=(-HALF_SPAN, HALF_SPAN),
            dt_s=0.01 / KAPPA,
            input_state=(1.0, 0.0),
        )
        res = qst.simulate_transfer(cfg)
        assert res.fidelity == pytest.approx(1.0, abs=1e-12)
        assert res.eta < 0.9  # the excitation branch really was mismatched

    def test_zero_couplings_leave_receiver_empty(self):
        cfg = qst.QstConfig(
            kappa_hz=KAPPA,
            emit_waveform=zero_waveform(),
            catch_waveform=zero_waveform(),
            t_span_s=(-HALF_SPAN, HALF_SPAN),
            dt_s=0.04 / KAPPA,
        )
        res = qst.simulate_transfer(cfg)
        assert res.eta == 0.0
        np.testing.assert_array_equal(res.b_trace, 0.0)
        np.testing.assert_allclose(res.a_trace, 1.0, atol=1e-15)

    def test_excitation_accounting_every_sample(self):
        for cfg in (matched_config(), matched_config(dt=0.02 / KAPPA)):
            res = qst.simulate_transfer(cfg)
            total = (
                np.abs(res.a_trace) ** 2
                + np.abs(res.b_trace) ** 2
                + res.emitted_trace
            )
            np.testing.assert_allclose(total, 1.0, atol=1e-6)

    def test_accounting_with_mismatched_catch(self):
        rng = np.random.default_rng(11)
        catch = qst.SampledWaveform(
            rng.uniform(0, 2 * KAPPA, 128), 2 * HALF_SPAN / 127, -HALF_SPAN
        )
        cfg = qst.QstConfig(
            kappa_hz=KAPPA,
            emit_waveform=qst.matched_emit_rate(KAPPA),
            catch_waveform=catch,
            t_span_s=(-HALF_SPAN, HALF_SPAN),
            dt_s=0.01 / KAPPA,
        )
        res = qst.simulate_transfer(cfg)
        total = (
            np.abs(res.a_trace) ** 2 + np.abs(res.b_trace) ** 2 + res.emitted_trace
        )
        np.testing.assert_allclose(total, 1.0, atol=1e-6)

    def test_detuning_symmetry(self):
        ep = qst.simulate_transfer(matched_config(delta=0.03 * KAPPA)).eta
        em = qst.simulate_transfer(matched_config(delta=-0.03 * KAPPA)).eta
        assert ep == pytest.approx(em, abs=1e-14)

    def test_eta_monotone_near_zero_detuning(self):
        etas = [
            qst.simulate_transfer(matched_config(delta=d * KAPPA)).eta
            for d in (0.0, 0.01, 0.02, 0.04)
        ]
        assert all(a >= b for a, b in zip(etas, etas[1:]))

    def test_rk4_order(self):
        # detuned so eta has O(1) sensitivity; halving dt shrinks the error
        # by about 16
        def eta_at(dt):
            return qst.simulate_transfer(
                matched_config(dt=dt, delta=0.3 * KAPPA)
            ).eta

        ref = eta_at(0.05 / KAPPA / 16)
        e1 = eta_at(0.05 / KAPPA) - ref
        e2 = eta_at(0.025 / KAPPA) - ref
        assert 12.0 < abs(e1 / e2) < 20.0

    def test_matched_catch_beats_random_family(self):
        # 100 random equal-integral catch waveforms, all smooth and nonneg
        base = matched_config(dt=0.01 / KAPPA)
        eta_matched = qst.simulate_transfer(base).eta
        n_grid = 257
        tgrid = np.linspace(-HALF_SPAN, HALF_SPAN, n_grid)
        u = tgrid / HALF_SPAN
        target_integral = 20.0  # integral of the matched catch rate
        rng = np.random.default_rng(7)
        for _ in range(100):
            c1, c2, c3 = rng.uniform(-0.8, 0.8, 3)
            p1, p2 = rng.uniform(0, 2 * np.pi, 2)
            prof = (
                1.0
                + c1 * np.sin(np.pi * u + p1)
                + c2 * np.sin(2 * np.pi * u + p2)
                + c3 * np.cos(3 * np.pi * u)
            ) ** 2
            vals = prof * (target_integral / np.trapezoid(prof, x=tgrid))
            catch = qst.SampledWaveform(vals, tgrid[1] - tgrid[0], -HALF_SPAN)
            cfg = qst.QstConfig(
                kappa_hz=KAPPA,
                emit_waveform=base.emit_waveform,
                catch_waveform=catch,
                t_span_s=(-HALF_SPAN, HALF_SPAN),
                dt_s=0.01 / KAPPA,
            )
            assert qst.simulate_transfer(cfg).eta < eta_matched

    def test_step_size_guard(self):
        with pytest.raises(StepSizeError):
            qst.simulate_transfer(matched_config(dt=0.06 / KAPPA))

    def test_negative_rate_rejected(self):
        cfg = qst.QstConfig(
            kappa_hz=KAPPA,
            emit_waveform=lambda t: -np.ones_like(np.asarray(t, dtype=float)),
            catch_waveform=zero_waveform(),
            t_span_s=(-HALF_SPAN, HALF_SPAN),
            dt_s=0.04 / KAPPA,
        )
        with pytest.raises(UsageError):
            qst.simulate_transfer(cfg)

    def test_nonfinite_rate_rejected(self):
        cfg = qst.QstConfig(
            kappa_hz=KAPPA,
            emit_waveform=lambda t: np.full_like(np.asarray(t, float), np.inf),
            catch_waveform=zero_waveform(),
            t_span_s=(-HALF_SPAN, HALF_SPAN),
            dt_s=0.04 / KAPPA,
        )
        with pytest.raises(NumericError):
            qst.simulate_transfer(cfg)

    def test_scalar_only_callables_accepted(self):
        cfg = qst.QstConfig(
            kappa_hz=KAPPA,
            emit_waveform=lambda t: float(qst.sech_pitch(KAPPA, float(t))),
            catch_waveform=zero_waveform(),
            t_span_s=(-HALF_SPAN, HALF_SPAN),
            dt_s=0.04 / KAPPA,
        )
        res = qst.simulate_transfer(cfg)
        assert 0.0 < res.emitted_trace[-1] < 1.0


class TestQstConfigValidation:
    def test_unnormalized_input_rejected(self):
        with pytest.raises(UsageError, match="normalized"):
            matched_config(input_state=(1.0, 1.0))

    def test_thermal_hook_must_be_zero(self):
        with pytest.raises(UsageError, match="channel_temperature"):
            qst.QstConfig(
                kappa_hz=KAPPA,
                emit_waveform=qst.matched_emit_rate(KAPPA),
                catch_waveform=qst.matched_catch_rate(KAPPA),
                t_span_s=(-HALF_SPAN, HALF_SPAN),
                dt_s=0.04 / KAPPA,
                channel_temperature=0.1,
            )

    def test_bad_span_rejected(self):
        with pytest.raises(UsageError):
            qst.QstConfig(
                kappa_hz=KAPPA,
                emit_waveform=qst.matched_emit_rate(KAPPA),
                catch_waveform=qst.matched_catch_rate(KAPPA),
                t_span_s=(HALF_SPAN, -HALF_SPAN),
                dt_s=0.04 / KAPPA,
            )

    def test_bad_kappa_rejected(self):
        with pytest.raises(UsageError):
            qst.QstConfig(
                kappa_hz=0.0,
                emit_waveform=zero_waveform(),
                catch_waveform=zero_waveform(),
                t_span_s=(-HALF_SPAN, HALF_SPAN),
                dt_s=0.04 / KAPPA,
            )


class TestDetuningSweep:
    def test_linear_law_small_detuning(self):
        deltas = np.linspace(-0.05, 0.05, 11) * KAPPA
        sweep = qst.detuning_sweep(matched_config(), deltas)
        assert sweep.r_squared >= 0.99
        assert sweep.slope > 0
        assert sweep.baseline_eta > 0.999

    def test_zero_row_reproduces_baseline(self):
        sweep = qst.detuning_sweep(matched_config(), [0.0, 0.02 * KAPPA])
        zero_rows = [r for r in sweep.rows if r[0] == 0.0]
        assert len(zero_rows) == 1
        assert zero_rows[0][1] == sweep.baseline_eta

    def test_rows_carry_sqrt_infidelity(self):
        sweep = qst.detuning_sweep(matched_config(), [0.01 * KAPPA, 0.03 * KAPPA])
        for _, eta, root in sweep.rows:
            assert root == pytest.approx(math.sqrt(1 - eta), abs=1e-15)

    def test_csv_format(self):
        sweep = qst.detuning_sweep(matched_config(), [0.0, 0.02 * KAPPA])
        lines = sweep.to_csv().strip().split("\n")
        assert lines[0] == "delta_omega_hz,eta,sqrt_one_minus_eta"
        assert len(lines) == 3
        assert len(lines[1].split(",")) == 3

    def test_fidelity_floor_across_sweep(self):
        # F >= |alpha|^4 holds throughout the tested small-detuning regime
        alpha, beta = math.sqrt(0.3), math.sqrt(0.7)
        for d in np.linspace(-0.05, 0.05, 5) * KAPPA:
            res = qst.simulate_transfer(
                matched_config(delta=d, input_state=(alpha, beta))
            )
            assert res.fidelity >= abs(alpha) ** 4

    def test_mismatched_baseline_rejected(self):
        cfg = qst.QstConfig(
            kappa_hz=KAPPA,
            emit_waveform=qst.matched_emit_rate(KAPPA),
            catch_waveform=qst.SampledWaveform(
                np.full(16, 0.05 * KAPPA), 2 * HALF_SPAN / 15, -HALF_SPAN
            ),
            t_span_s=(-HALF_SPAN, HALF_SPAN),
            dt_s=0.04 / KAPPA,
        )
        with pytest.raises(UsageError, match="baseline"):
            qst.detuning_sweep(cfg, [0.0, 0.01 * KAPPA])

    def test_needs_two_detunings(self):
        with pytest.raises(UsageError):
            qst.detuning_sweep(matched_config(), [0.0])


class TestOnOffRatio:
    def test_constant_at_floor(self):
        assert qst.on_off_ratio(np.full(8, 1e3), 1e3) == pytest.approx(1.0)

    def test_sech_reference(self):
        ratio = qst.on_off_ratio(
            lambda t: qst.sech_pitch(1e6, t), 1e3, t_span_s=(-2e-5, 2e-5)
        )
        assert ratio == pytest.approx(500.0, rel=1e-12)

    def test_scale_covariant(self):
        vals = np.array([1.0, 5.0, 2.0]) * 1e4
        base = qst.on_off_ratio(vals, 1e3)
        assert qst.on_off_ratio(3 * vals, 1e3) == pytest.approx(3 * base)

    def test_sampled_waveform_input(self):
        wf = qst.SampledWaveform(np.array([0.0, 7e5, 0.0]), 1e-6)
        assert qst.on_off_ratio(wf, 1e3) == pytest.approx(700.0)

    def test_bad_floor(self):
        with pytest.raises(UsageError):
            qst.on_off_ratio(np.ones(4), 0.0)

    def test_callable_needs_span(self):
        with pytest.raises(UsageError):
            qst.on_off_ratio(lambda t: 1.0, 1e3)


class TestConfigJson:
    def sech_doc(self):
        return {
            "kappa_hz": KAPPA,
            "t_span_s": [-HALF_SPAN, HALF_SPAN],
            "dt_s": 0.04 / KAPPA,
            "delta_omega_hz": 0.0,
            "emit_waveform": {"kind": "sech"},
            "catch_waveform": {"kind": "sech"},
            "input_state": [[0.0, 0.0], [1.0, 0.0]],
            "channel_temperature": 0,
        }

    def test_sech_kind_matches_builtin_waveforms(self):
        cfg = qst.qst_config_from_json(json.dumps(self.sech_doc()))
        res = qst.simulate_transfer(cfg)
        ref = qst.simulate_transfer(matched_config())
        assert res.eta == pytest.approx(ref.eta, abs=1e-15)

    def test_sampled_kind_anchored_at_span_start(self):
        doc = self.sech_doc()
        n = 801
        tg = np.linspace(-HALF_SPAN, HALF_SPAN, n)
        doc["catch_waveform"] = {
            "kind": "sampled",
            "dt_s": (2 * HALF_SPAN) / (n - 1),
            "values": list((KAPPA / 2) * (1 + np.tanh(-KAPPA * tg / 2))),
        }
        cfg = qst.qst_config_from_json(json.dumps(doc))
        res = qst.simulate_transfer(cfg)
        assert res.eta > 0.999

    def test_rejects_bad_documents(self):
        with pytest.raises(ParseError):
            qst.qst_config_from_json("[1,2]")
        with pytest.raises(ParseError):
            qst.qst_config_from_json("{not json")
        doc = self.sech_doc()
        del doc["kappa_hz"]
        with pytest.raises(ParseError, match="missing"):
            qst.qst_config_from_json(json.dumps(doc))
        doc = self.sech_doc()
        doc["mystery"] = 1
        with pytest.raises(ParseError, match="unknown"):
            qst.qst_config_from_json(json.dumps(doc))
        doc = self.sech_doc()
        doc["emit_waveform"] = {"kind": "triangle"}
        with pytest.raises(ParseError, match="kind"):
            qst.qst_config_from_json(json.dumps(doc))
        doc = self.sech_doc()
        doc["emit_waveform"] = {"kind": "sampled", "dt_s": 1e-6}
        with pytest.raises(ParseError):
            qst.qst_config_from_json(json.dumps(doc))
        doc = self.sech_doc()
        doc["input_state"] = [[1.0, 0.0], [1.0, 0.0]]
        with pytest.raises(ParseError):
            qst.qst_config_from_json(json.dumps(doc))
        doc = self.sech_doc()
        doc["channel_temperature"] = 0.5
        with pytest.raises(ParseError):
            qst.qst_config_from_json(json.dumps(doc))

    def test_sampled_negative_values_rejected(self):
        doc = self.sech_doc()
        doc["emit_waveform"] = {
            "kind": "sampled",
            "dt_s": 1e-6,
            "values": [1.0, -2.0, 1.0],
        }
        with pytest.raises(ParseError):
            qst.qst_config_from_json(json.dumps(doc))
