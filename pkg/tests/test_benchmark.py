import numpy as np
import pytest

from ssbmem.benchmark import (
    channel_expectations,
    classical_bound,
    conditional_variance,
    estimate_tv,
    evaluate_tv,
    simulate_channel_ensemble,
    snr,
    transmission,
    verdict,
)


class TestSnr:
    def test_unit_coherent_state(self):
        assert snr(1.0, 1.0) == 4.0

    def test_vacuum(self):
        assert snr(0.0, 1.0) == 0.0

    def test_formula(self):
        assert snr(0.5, 2.0) == pytest.approx(0.5)

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ValueError):
            snr(1.0, 0.0)


class TestTransmission:
    def test_ten_percent_efficiency(self):
        # shot-limited in and out: T_q = eta^2, summed over quadratures
        eta = 0.10
        t_q = transmission(snr(1.0, 1.0), snr(eta * 1.0, 1.0))
        assert 2 * t_q == pytest.approx(0.02, rel=1e-12)

    def test_twentyone_percent_efficiency(self):
        eta = 0.21
        t_q = transmission(snr(1.0, 1.0), snr(eta * 1.0, 1.0))
        assert 2 * t_q == pytest.approx(0.088, abs=0.0005)

    def test_identity_channel(self):
        t_q = transmission(snr(1.0, 1.0), snr(1.0, 1.0))
        assert 2 * t_q == 2.0

    def test_rejects_zero_input_snr(self):
        with pytest.raises(ValueError):
            transmission(0.0, 1.0)


class TestConditionalVariance:
    def test_shot_limited_beamsplitter(self):
        # eta=0.10 coherent channel: V = 1 - eta^2 = 0.99
        assert conditional_variance(1.0, 0.10, 1.0) == pytest.approx(0.99)

    def test_two_percent_excess(self):
        assert conditional_variance(1.02, 0.10, 1.0) == pytest.approx(1.01)

    def test_eta_21_shot_limited(self):
        v = conditional_variance(1.0, 0.21, 1.0)
        assert v == pytest.approx(0.956, abs=0.0005)

    def test_flags_inconsistent_inputs(self):
        with pytest.raises(ValueError):
            conditional_variance(0.5, 1.0, 1.0)


class TestClassicalBound:
    def test_anchor_point_low(self):
        assert classical_bound(0.02) == pytest.approx(1.01, rel=1e-12)

    def test_anchor_point_high(self):
        assert classical_bound(0.08) == pytest.approx(1.04, rel=1e-12)

    def test_zero_transmission(self):
        assert classical_bound(0.0) == 1.0

    def test_out_of_range(self):
        for t in (-0.1, 2.1):
            with pytest.raises(ValueError):
                classical_bound(t)


class TestChannelExpectations:
    def test_paper_operating_point(self):
        t, v = channel_expectations(0.10, 0.0)
        assert t == pytest.approx(0.020, rel=1e-12)
        assert v == pytest.approx(0.990, rel=1e-12)

    def test_blocked_channel(self):
        assert channel_expectations(0.0, 0.0) == (0.0, 1.0)

    def test_identity_channel(self):
        t, v = channel_expectations(1.0, 0.0)
        assert t == pytest.approx(2.0)
        assert v == pytest.approx(0.0, abs=1e-15)


class TestVerdict:
    def test_quantum_point(self):
        assert verdict(0.02, 0.99, margin=0.005) == "quantum"

    def test_classical_point(self):
        # high-power operating point with >10% excess noise
        t, v = channel_expectations(0.21, 0.12)
        assert v > 1.06
        assert verdict(t, v) == "classical"

    def test_inconclusive_on_bound(self):
        assert verdict(0.02, 1.01, margin=0.005) == "inconclusive"

    def test_monotone_in_v(self):
        order = {"quantum": 0, "inconclusive": 1, "classical": 2}
        for t in (0.0, 0.02, 0.08, 0.5):
            ranks = [order[verdict(t, v, margin=0.01)]
                     for v in np.linspace(0.8, 1.3, 26)]
            assert all(b >= a for a, b in zip(ranks, ranks[1:]))


class TestChannelMonteCarlo:
    def test_matches_closed_form_on_grid(self):
        # 5x3 grid of (eta, excess): estimates within 3 combined SEs
        seed = 300
        for eta in (0.05, 0.10, 0.21, 0.5, 0.9):
            for excess in (0.0, 0.02, 0.12):
                t_exp, v_exp = channel_expectations(eta, excess)
                samples = simulate_channel_ensemble(eta, excess, 1.0 + 1.0j,
                                                    2000, seed)
                report = estimate_tv(samples, style="simulation")
                assert report.t_total == pytest.approx(
                    t_exp, abs=3 * report.se_t + 1e-12
                ), (eta, excess)
                assert report.v_geo == pytest.approx(
                    v_exp, abs=3 * report.se_v
                ), (eta, excess)
                seed += 1

    def test_experiment_style_estimator(self):
        samples = simulate_channel_ensemble(0.10, 0.0, 2.0 + 2.0j, 4000, 11)
        rep = estimate_tv(samples, style="experiment")
        t_exp, v_exp = channel_expectations(0.10, 0.0)
        assert rep.t_total == pytest.approx(t_exp, abs=0.01)
        assert rep.v_geo == pytest.approx(v_exp, abs=0.05)

    def test_input_variance_is_shot_limited(self):
        samples = simulate_channel_ensemble(0.3, 0.0, 1.0, 5000, 3)
        assert samples.x_in.var() == pytest.approx(1.0, abs=0.1)
        assert samples.x_in.mean() == pytest.approx(2.0, abs=0.05)

    def test_invalid_style(self):
        samples = simulate_channel_ensemble(0.1, 0.0, 1.0, 100, 0)
        with pytest.raises(ValueError):
            estimate_tv(samples, style="lab")


def test_evaluate_tv_report_fields():
    rep = evaluate_tv(
        alpha_in=(1.0, 1.0), v_in=(1.0, 1.0),
        alpha_out=(0.1, 0.1), v_out=(1.0, 1.0),
        cov=(0.1, 0.1), margin=0.005,
    )
    assert rep.t_total == pytest.approx(rep.t_x + rep.t_y)
    assert rep.v_geo == pytest.approx(np.sqrt(rep.v_x * rep.v_y))
    assert rep.v_classical == pytest.approx(1.01)
    assert rep.verdict == "quantum"
    text = rep.to_text()
    assert "verdict = quantum" in text
    assert len(rep.csv_row()) == len(rep.CSV_FIELDS)
