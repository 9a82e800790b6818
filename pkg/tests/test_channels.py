import math

import numpy as np
import pytest

from holevo_lab import channels, linalg, sampling
from holevo_lab.errors import ShapeError, ValidationError
from holevo_lab.rng import RngSeed


def _random_channel(k, d, m, seed=0):
    U = sampling.sample_haar(k * d, RngSeed(seed))
    return channels.channel_from_unitary(U, k, d, m)


class TestConstruction:
    def test_identity_unitary(self):
        ch = channels.channel_from_unitary(np.eye(4), 2, 2, 2)
        assert np.array_equal(ch.V, np.eye(4)[:, :2])

    def test_haar_columns_isometric(self):
        ch = _random_channel(2, 3, 4)
        assert np.max(np.abs(ch.V.conj().T @ ch.V - np.eye(4))) <= 1e-10

    def test_full_trace_out(self):
        ch = channels.channel_from_unitary(np.eye(4), 2, 2, 4)
        out = channels.apply(ch, np.eye(4) / 4)
        assert np.allclose(out, np.eye(2) / 2, atol=1e-12)

    def test_rejects_non_unitary(self):
        with pytest.raises(ValidationError):
            channels.channel_from_unitary(np.ones((4, 4)), 2, 2, 2)

    def test_rejects_m_beyond_kd(self):
        with pytest.raises(ValidationError):
            channels.SubspaceChannel(2, 2, 5, np.eye(4, 5))

    def test_rejects_wrong_shape(self):
        with pytest.raises(ShapeError):
            channels.channel_from_unitary(np.eye(5), 2, 2, 2)


class TestApply:
    def test_identity_channel_pure_input(self):
        ch = channels.channel_from_unitary(np.eye(4), 2, 2, 2)
        rho = np.zeros((2, 2), dtype=complex)
        rho[0, 0] = 1.0
        assert np.allclose(channels.apply(ch, rho), rho, atol=1e-14)

    def test_trace_preserved(self):
        gen = RngSeed(21).generator()
        ch = _random_channel(2, 3, 5, seed=1)
        for _ in range(50):
            x = linalg.random_unit_vector(5, gen)
            out = channels.apply(ch, np.outer(x, x.conj()))
            assert abs(np.trace(out).real - 1.0) <= 1e-10

    def test_linearity(self):
        gen = RngSeed(22).generator()
        ch = _random_channel(2, 2, 3, seed=2)
        xs = [linalg.random_unit_vector(3, gen) for _ in range(3)]
        probs = np.array([0.5, 0.3, 0.2])
        rho = sum(p * np.outer(x, x.conj()) for p, x in zip(probs, xs))
        direct = channels.apply(ch, rho)
        mixed = sum(p * channels.apply(ch, np.outer(x, x.conj()))
                    for p, x in zip(probs, xs))
        assert np.max(np.abs(direct - mixed)) <= 1e-12

    def test_cptp_property(self):
        gen = RngSeed(23).generator()
        for trial in range(100):
            ch = _random_channel(2, 3, 4, seed=100 + trial)
            x = linalg.random_unit_vector(4, gen)
            out = channels.apply(ch, np.outer(x, x.conj()))
            assert abs(np.trace(out).real - 1.0) <= 1e-10
            assert np.linalg.eigvalsh(out).min() >= -1e-9

    def test_apply_pure_matches_apply(self):
        gen = RngSeed(24).generator()
        ch = _random_channel(3, 2, 4, seed=3)
        x = linalg.random_unit_vector(4, gen)
        assert np.max(np.abs(channels.apply_pure(ch, x)
                             - channels.apply(ch, np.outer(x, x.conj())))) <= 1e-12


class TestConjugateChannel:
    def test_real_isometry_fixed(self):
        ch = channels.channel_from_unitary(np.eye(4), 2, 2, 2)
        assert np.array_equal(channels.conjugate_channel(ch).V, ch.V)

    def test_involution(self):
        ch = _random_channel(2, 2, 3, seed=4)
        assert np.array_equal(channels.conjugate_channel(
            channels.conjugate_channel(ch)).V, ch.V)

    def test_entrywise_identity(self):
        gen = RngSeed(25).generator()
        ch = _random_channel(2, 3, 4, seed=5)
        x = linalg.random_unit_vector(4, gen)
        rho = np.outer(x, x.conj())
        lhs = channels.apply(channels.conjugate_channel(ch), rho.conj())
        rhs = channels.apply(ch, rho).conj()
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


class TestPnormIdentity:
    def test_redefpnorm_on_subspace_vectors(self):
        # ||Tr_env |x><x| ||_p = ||op(x)||_{2p}^2 for x in the subspace
        gen = RngSeed(26).generator()
        ch = _random_channel(2, 3, 4, seed=6)
        for _ in range(50):
            w = ch.V @ linalg.random_unit_vector(4, gen)
            rho = linalg.partial_trace_second(np.outer(w, w.conj()), 2, 3)
            M = linalg.op_reshape(w, 2, 3)
            for p in (1.5, 2, 3):
                assert abs(linalg.schatten_norm(rho, p)
                           - linalg.schatten_norm(M, 2 * p) ** 2) <= 1e-10


class TestOptimizer:
    def test_gradient_matches_finite_differences(self):
        ch = _random_channel(2, 2, 3, seed=7)
        gen = RngSeed(27).generator()
        h = 1e-5
        for _ in range(20):
            x = linalg.random_unit_vector(3, gen)
            _, g = channels.f2_value_grad(ch, x)
            analytic = np.concatenate([2 * g.real, 2 * g.imag])
            numeric = np.empty(6)
            for idx in range(6):
                delta = np.zeros(3, dtype=complex)
                if idx < 3:
                    delta[idx] = h
                else:
                    delta[idx - 3] = 1j * h
                vp, _ = channels.f2_value_grad(ch, x + delta)
                vm, _ = channels.f2_value_grad(ch, x - delta)
                numeric[idx] = (vp - vm) / (2 * h)
            rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
            assert rel <= 1e-4

    def test_value_monotone_in_restarts(self):
        ch = _random_channel(2, 3, 5, seed=8)
        vals = []
        for restarts in (1, 2, 4, 8):
            cfg = channels.OptimizerConfig(restarts=restarts, rng=RngSeed(5))
            vals.append(channels.one_to_p_norm_estimate(ch, 2, cfg).value)
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_norm_estimate_m_one_exact(self):
        ch = _random_channel(2, 2, 1, seed=9)
        cfg = channels.OptimizerConfig(rng=RngSeed(0))
        est = channels.one_to_p_norm_estimate(ch, 2, cfg)
        A = linalg.op_reshape(ch.V[:, 0], 2, 2)
        assert est.value == pytest.approx(linalg.schatten_norm(A, 4) ** 2, abs=1e-12)

    def test_full_trace_out_norm_is_one(self):
        ch = channels.channel_from_unitary(np.eye(4), 2, 2, 4)
        cfg = channels.OptimizerConfig(restarts=6, max_iters=2000,
                                       grad_tol=1e-12, rng=RngSeed(1))
        est = channels.one_to_p_norm_estimate(ch, 2, cfg)
        assert est.value <= 1.0 + 1e-9
        # product inputs reach a pure output; the maximum is attained on a
        # flat manifold, so first-order ascent lands within 1e-4 of it
        assert est.value >= 1.0 - 1e-4

    def test_norm_never_above_one(self):
        for seed in range(3):
            ch = _random_channel(2, 3, 4, seed=30 + seed)
            cfg = channels.OptimizerConfig(restarts=3, rng=RngSeed(2))
            assert channels.one_to_p_norm_estimate(ch, 1.5, cfg).value <= 1.0 + 1e-9


class TestEntropyEstimates:
    def test_identity_channel_reaches_zero(self):
        ch = channels.channel_from_unitary(np.eye(4), 2, 2, 2)
        cfg = channels.OptimizerConfig(restarts=4, rng=RngSeed(3))
        est = channels.min_output_entropy_estimate(ch, 1, cfg)
        assert est.entropy <= 1e-6

    def test_m_one_exact(self):
        ch = _random_channel(2, 2, 1, seed=10)
        cfg = channels.OptimizerConfig(rng=RngSeed(0))
        rho = channels.apply_pure(ch, np.array([1.0 + 0j]))
        rho = rho / np.trace(rho).real
        for p in (1, 2):
            est = channels.min_output_entropy_estimate(ch, p, cfg)
            assert est.entropy == pytest.approx(linalg.output_entropy(rho, p), abs=1e-12)

    def test_consistency_with_norm_estimate(self):
        # S_p = -(p/(p-1)) log ||.||_p at the same point
        ch = _random_channel(2, 2, 2, seed=11)
        cfg = channels.OptimizerConfig(restarts=6, rng=RngSeed(4))
        p = 2.0
        est = channels.min_output_entropy_estimate(ch, p, cfg)
        rho = channels.apply_pure(ch, est.argmin)
        rho = rho / np.trace(rho).real
        norm_p = linalg.schatten_norm(rho, p)
        expect = -(p / (p - 1)) * math.log2(norm_p)
        assert est.entropy == pytest.approx(expect, abs=1e-8)

    def test_grid_oracle_small_dim(self):
        ch = _random_channel(2, 2, 2, seed=12)
        cfg = channels.OptimizerConfig(restarts=8, rng=RngSeed(5))
        for p in (1, 2):
            opt = channels.min_output_entropy_estimate(ch, p, cfg).entropy
            grid = channels.grid_min_output_entropy(ch, p, 200_000, RngSeed(6))
            assert abs(opt - grid.entropy) <= 2e-3


class TestAswBound:
    def test_flat_output_subspace(self):
        # V = vec(I/sqrt(2)): the single output is I/2
        V = np.array([[1], [0], [0], [1]], dtype=complex) / math.sqrt(2)
        ch = channels.SubspaceChannel(2, 2, 1, V)
        cfg = channels.OptimizerConfig(rng=RngSeed(0))
        res = channels.asw_lower_bound(ch, cfg)
        assert res.max_f2 == pytest.approx(0.0, abs=1e-12)
        assert res.bound == pytest.approx(1.0, abs=1e-12)

    def test_identity_channel_hand_value(self):
        ch = channels.channel_from_unitary(np.eye(4), 2, 2, 2)
        cfg = channels.OptimizerConfig(restarts=6, rng=RngSeed(1))
        res = channels.asw_lower_bound(ch, cfg)
        assert res.max_f2 == pytest.approx(0.5, abs=1e-6)
        assert res.bound == pytest.approx(0.0, abs=1e-5)


class TestHaydenWinter:
    def test_unit_trace_of_product_output(self):
        ch = _random_channel(2, 2, 2, seed=13)
        rho = channels.product_channel_entangled_output(ch)
        assert abs(np.trace(rho).real - 1.0) <= 1e-10

    def test_identity_channel_floor(self):
        ch = channels.channel_from_unitary(np.eye(4), 2, 2, 2)
        cert = channels.hayden_winter_certificate(ch)
        assert cert.threshold == pytest.approx(0.5)
        assert cert.lambda_max >= 0.5 - 1e-12

    def test_floor_on_random_channels(self):
        for seed in range(10):
            ch = _random_channel(2, 2, 2, seed=40 + seed)
            cert = channels.hayden_winter_certificate(ch)
            assert cert.lambda_max >= cert.threshold - 1e-12

    def test_flag_reports_hypothesis(self):
        assert channels.hayden_winter_certificate(
            _random_channel(2, 4, 3, seed=50)).m_le_d
        assert not channels.hayden_winter_certificate(
            _random_channel(2, 2, 3, seed=51)).m_le_d

    def test_product_output_eigenvalue_oracle(self):
        # independent oracle: overlap of the product output with the
        # maximally entangled output state equals
        # (1/(km)) || sum_s A_s^dag A_s ||_F^2 >= m/(kd)
        ch = _random_channel(2, 3, 4, seed=52)
        cols = ch.V.T.reshape(ch.m, ch.k, ch.d)
        gram = sum(c.conj().T @ c for c in cols)
        overlap = float(np.sum(np.abs(gram) ** 2)) / (ch.k * ch.m)
        cert = channels.hayden_winter_certificate(ch)
        assert cert.lambda_max >= overlap - 1e-12
        assert overlap >= cert.threshold - 1e-12


class TestAdditivityGap:
    def test_labels_and_sign(self):
        ch = _random_channel(2, 2, 2, seed=60)
        cfg = channels.OptimizerConfig(restarts=6, rng=RngSeed(7))
        rep = channels.additivity_gap_report(ch, 1, cfg)
        assert rep["gap"] <= 1e-9
        assert "upper bound" in rep["lhs_direction"]
        assert "upper estimate" in rep["rhs_direction"]
        assert rep["violation_claimed"] is False

    def test_violation_needs_certified_lower(self):
        ch = _random_channel(2, 2, 2, seed=61)
        cfg = channels.OptimizerConfig(restarts=4, rng=RngSeed(8))
        rep = channels.additivity_gap_report(ch, 2, cfg, certified_rhs_lower=100.0)
        assert rep["violation_claimed"] is True  # only with an explicit certificate
