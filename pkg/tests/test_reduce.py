"""Tests for the rank-reduction steps, the driver, and the orthogonality move."""

import numpy as np
import pytest

from isacbeams.channel import (
    ArrayGeometry,
    IsacScenario,
    QuadraticMetricSpec,
    build_aoa_only_spec,
    build_full_channel_bfim,
    build_multitarget_bfim,
    quad_values,
)
from isacbeams.errors import ConditionViolatedError, StalledReductionError
from isacbeams.metrics import BeamformerMatrix, sinr_ic, sinr_nic
from isacbeams.reduce import (
    ReductionTarget,
    ic_reduce_step,
    nic_reduce_step,
    orthogonalize_sensing,
    reduce_to_bound,
    verify_single_target_two_beams,
)

from conftest import random_complex
from test_channel import make_priors


GEOM8 = ArrayGeometry(n_tx=8, n_rx=8)


def scenario_for(v, channels, mode="ic", noise=1.0, margin=0.9):
    """Scenario whose SINR targets the given beamformer meets by construction."""
    geom = ArrayGeometry(n_tx=v.n_tx, n_rx=v.n_tx)
    scen = IsacScenario(geometry=geom, channels=channels,
                        sinr_targets=np.ones(channels.shape[1]),
                        power_budget=4 * v.power + 1.0, noise_var=noise,
                        interference_mode=mode)
    fn = sinr_ic if mode == "ic" else sinr_nic
    achieved = fn(scen, v)
    return IsacScenario(geometry=geom, channels=channels,
                        sinr_targets=margin * achieved, power_budget=4 * v.power + 1.0,
                        noise_var=noise, interference_mode=mode)


def target_for(v, metric, scen, mode="ic"):
    fn = sinr_ic if mode == "ic" else sinr_nic
    floors = fn(scen, v) if scen.k_users else np.ones(0)
    return ReductionTarget(metric.q_matrices, quad_values(metric.q_matrices, v.columns),
                           floors, v.power)


class TestIcStep:
    def test_single_target_metric_drops_one_column(self, rng):
        _, metric = build_multitarget_bfim(GEOM8, make_priors(1, rng), 1, 1.0)
        channels = random_complex(rng, 8, 1)
        v = BeamformerMatrix(random_complex(rng, 8, 4), k_comm=1)  # 3 sensing columns
        scen = scenario_for(v, channels, "ic")
        target = target_for(v, metric, scen, "ic")
        out = ic_reduce_step(v, target, scen.channels, scen.noise_var)
        assert out is not None and out.n_beams < v.n_beams
        np.testing.assert_allclose(quad_values(metric.q_matrices, out.columns),
                                   target.quad_values, atol=1e-9, rtol=1e-9)
        np.testing.assert_allclose(out.power, v.power, rtol=1e-9)
        np.testing.assert_allclose(sinr_ic(scen, out), sinr_ic(scen, v), rtol=1e-8)

    def test_condition_boundary_returns_none(self, rng):
        _, metric = build_multitarget_bfim(GEOM8, make_priors(1, rng), 1, 1.0)
        channels = random_complex(rng, 8, 1)
        v = BeamformerMatrix(random_complex(rng, 8, 3), k_comm=1)  # 2 sensing, 4 = d
        scen = scenario_for(v, channels, "ic")
        assert ic_reduce_step(v, target_for(v, metric, scen, "ic"),
                              scen.channels, scen.noise_var) is None

    def test_sensing_only_single_quad_to_one_column(self, rng):
        q = np.eye(8, dtype=complex)
        metric = QuadraticMetricSpec(q_matrices=[q], scalarization="trace")
        v = BeamformerMatrix(random_complex(rng, 8, 4), k_comm=0)
        scen = IsacScenario(geometry=GEOM8, channels=np.zeros((8, 0)), sinr_targets=[],
                            power_budget=100.0, noise_var=1.0)
        target = ReductionTarget([q], quad_values([q], v.columns), np.ones(0), v.power)
        current = v
        while True:
            out = ic_reduce_step(current, target, scen.channels, scen.noise_var)
            if out is None:
                break
            current = out
        assert current.n_beams == 1
        np.testing.assert_allclose(quad_values([q], current.columns),
                                   target.quad_values, rtol=1e-9)

    def test_comm_columns_scaled_not_rotated(self, rng):
        _, metric = build_multitarget_bfim(GEOM8, make_priors(1, rng), 1, 1.0)
        channels = random_complex(rng, 8, 2)
        v = BeamformerMatrix(random_complex(rng, 8, 5), k_comm=2)
        scen = scenario_for(v, channels, "ic")
        out = ic_reduce_step(v, target_for(v, metric, scen, "ic"),
                             scen.channels, scen.noise_var)
        for k in range(2):
            cos = abs(np.vdot(out.comm[:, k], v.comm[:, k])) / (
                np.linalg.norm(out.comm[:, k]) * np.linalg.norm(v.comm[:, k]))
            assert cos > 1 - 1e-12


class TestNicStep:
    def make_orthogonal_set(self, rng, k, n_sensing, n_tx=8):
        channels = random_complex(rng, n_tx, k)
        q, _ = np.linalg.qr(np.hstack([channels, random_complex(rng, n_tx, n_tx - k)]))
        basis = q[:, k:]
        comm = random_complex(rng, n_tx, k)
        sensing = basis @ random_complex(rng, n_tx - k, n_sensing)
        return BeamformerMatrix(np.hstack([comm, sensing]), k_comm=k), channels

    def test_snr_metric_reaches_user_count(self, rng):
        a = random_complex(rng, 8, 1)[:, 0]
        metric = QuadraticMetricSpec(q_matrices=[np.outer(a, a.conj())], scalarization="trace")
        v, channels = self.make_orthogonal_set(rng, k=2, n_sensing=1)
        scen = scenario_for(v, channels, "nic")
        target = target_for(v, metric, scen, "nic")
        out = nic_reduce_step(v, target, scen.channels, scen.noise_var)
        assert out is not None and out.n_beams == 2
        np.testing.assert_allclose(quad_values(metric.q_matrices, out.columns),
                                   target.quad_values, atol=1e-9)
        np.testing.assert_allclose(out.power, v.power, rtol=1e-9)
        deficits = target.sinr_floor - sinr_nic(scen, out)
        assert np.max(deficits) < 1e-8
        # sensing beams stay channel-orthogonal
        assert out.n_beams == out.k_comm or np.linalg.norm(
            channels.conj().T @ out.sensing) < 1e-9

    def test_boundary_returns_none(self, rng):
        a = random_complex(rng, 8, 1)[:, 0]
        metric = QuadraticMetricSpec(q_matrices=[np.outer(a, a.conj())], scalarization="trace")
        # N = 2, K = 1: N^2 - K^2 = 3 > 1 holds; N = 1, K = 0... use exact boundary:
        v, channels = self.make_orthogonal_set(rng, k=2, n_sensing=0)
        scen = scenario_for(v, channels, "nic")
        # N^2 = 4, K^2 + d = 5 -> no reduction
        assert nic_reduce_step(v, target_for(v, metric, scen, "nic"),
                               scen.channels, scen.noise_var) is None

    def test_comm_updates_stay_in_sensing_span(self, rng):
        _, metric = build_multitarget_bfim(GEOM8, make_priors(1, rng), 1, 1.0)
        v, channels = self.make_orthogonal_set(rng, k=2, n_sensing=5)
        scen = scenario_for(v, channels, "nic")
        out = nic_reduce_step(v, target_for(v, metric, scen, "nic"),
                              scen.channels, scen.noise_var)
        span = v.sensing @ np.linalg.pinv(v.sensing)
        for k in range(2):
            delta = out.comm[:, k] - v.comm[:, k]
            np.testing.assert_allclose(span @ delta, delta, atol=1e-8)

    def test_k0_matches_ic_final_count(self, rng):
        _, metric = build_multitarget_bfim(GEOM8, make_priors(1, rng), 1, 1.0)
        cols = random_complex(rng, 8, 6)
        v = BeamformerMatrix(cols, k_comm=0)
        scen = IsacScenario(geometry=GEOM8, channels=np.zeros((8, 0)), sinr_targets=[],
                            power_budget=1e3, noise_var=1.0)
        target = ReductionTarget(metric.q_matrices,
                                 quad_values(metric.q_matrices, cols), np.ones(0),
                                 v.power)
        a, _ = reduce_to_bound(v, scen, target, mode="ic", seed=1)
        b, _ = reduce_to_bound(v, scen, target, mode="nic", seed=1)
        assert a.n_beams == b.n_beams


class TestDriver:
    def inflate(self, v, width, rng):
        ns = v.n_beams - v.k_comm
        g = np.zeros((ns, width), dtype=complex)
        g[:, :ns] = np.eye(ns)
        q, _ = np.linalg.qr(random_complex(rng, width, width))
        return BeamformerMatrix(np.hstack([v.comm, v.sensing @ (g @ q)]), k_comm=v.k_comm)

    def test_ic_single_target_reaches_k_plus_2(self, rng):
        _, metric = build_multitarget_bfim(GEOM8, make_priors(1, rng), 1, 1.0)
        channels = random_complex(rng, 8, 1)
        v0 = BeamformerMatrix(random_complex(rng, 8, 9), k_comm=1)
        scen = scenario_for(v0, channels, "ic")
        target = target_for(v0, metric, scen, "ic")
        out, trace = reduce_to_bound(v0, scen, target, seed=3)
        assert out.n_beams <= 1 + 2
        assert trace.n_steps >= 1
        assert all(s.n_after < s.n_before for s in trace.steps)
        np.testing.assert_allclose(quad_values(metric.q_matrices, out.columns),
                                   target.quad_values, rtol=1e-6, atol=1e-8)
        assert abs(out.power - v0.power) <= 1e-6 * v0.power

    def test_nic_reaches_hypotenuse_bound(self, rng):
        _, metric = build_multitarget_bfim(GEOM8, make_priors(1, rng), 1, 1.0)
        k = 3
        channels = random_complex(rng, 8, k)
        q, _ = np.linalg.qr(np.hstack([channels, random_complex(rng, 8, 5)]))
        cols = np.hstack([random_complex(rng, 8, k), q[:, k:]])
        v0 = BeamformerMatrix(cols, k_comm=k)
        scen = scenario_for(v0, channels, "nic")
        target = target_for(v0, metric, scen, "nic")
        out, _ = reduce_to_bound(v0, scen, target, mode="nic", seed=5)
        assert out.n_beams <= 3  # floor(sqrt(9 + 4))
        deficits = target.sinr_floor - sinr_nic(scen, out)
        assert np.max(deficits) < 1e-6

    def test_full_channel_admits_no_reduction(self, rng):
        geom = ArrayGeometry(n_tx=4, n_rx=1)
        _, metric = build_full_channel_bfim(geom, np.ones(4), 1, 1.0)
        cols = random_complex(rng, 4, 4)
        v0 = BeamformerMatrix(cols, k_comm=0)
        scen = IsacScenario(geometry=geom, channels=np.zeros((4, 0)), sinr_targets=[],
                            power_budget=1e3, noise_var=1.0)
        target = ReductionTarget(metric.q_matrices,
                                 quad_values(metric.q_matrices, cols), np.ones(0), v0.power)
        out, trace = reduce_to_bound(v0, scen, target, mode="ic")
        assert out.n_beams == 4
        assert trace.n_steps == 0

    def test_boundary_step_without_optimality_stalls(self, rng):
        # d = 3 with 2 sensing columns: 4 > 3 applies, but the power row does
        # not fit; a random (non power-minimal) start must fail conservation.
        priors = [p for p in make_priors(3, rng)]
        priors = [type(p)(alpha_mean=0.0, alpha_var=p.alpha_var,
                          theta_mean=p.theta_mean, theta_std=p.theta_std) for p in priors]
        metric = build_aoa_only_spec(GEOM8, priors, 1, 1.0)
        cols = random_complex(rng, 8, 2)
        v0 = BeamformerMatrix(cols, k_comm=0)
        scen = IsacScenario(geometry=GEOM8, channels=np.zeros((8, 0)), sinr_targets=[],
                            power_budget=1e3, noise_var=1.0)
        target = ReductionTarget(metric.q_matrices,
                                 quad_values(metric.q_matrices, cols), np.ones(0), v0.power)
        with pytest.raises(StalledReductionError):
            reduce_to_bound(v0, scen, target, mode="ic", seed=7)


class TestOrthogonalize:
    def test_already_orthogonal_keeps_gram(self, rng):
        channels = random_complex(rng, 6, 2)
        q, _ = np.linalg.qr(np.hstack([channels, random_complex(rng, 6, 3)]))
        cols = np.hstack([random_complex(rng, 6, 2), q[:, 2:5]])
        v = BeamformerMatrix(cols, k_comm=2)
        scen = scenario_for(v, channels, "nic")
        out = orthogonalize_sensing(v, scen)
        np.testing.assert_allclose(out.gram, v.gram, atol=1e-8)
        leak = np.linalg.norm(channels.conj().T @ out.sensing)
        assert leak <= 1e-6 * np.linalg.norm(channels) * np.linalg.norm(out.sensing)

    def test_single_user_leaking_column(self, rng):
        h = random_complex(rng, 4, 1)
        v1 = random_complex(rng, 4, 1)
        leak_col = h / np.linalg.norm(h)
        v = BeamformerMatrix(np.hstack([v1, leak_col]), k_comm=1)
        scen = scenario_for(v, h, "nic", margin=0.99)
        out = orthogonalize_sensing(v, scen)
        np.testing.assert_allclose(out.gram, v.gram, atol=1e-8)
        # all channel-aligned energy ends up in the user beam
        gram = v.gram
        want = float(np.real(h[:, 0].conj() @ gram @ h[:, 0]))
        got = abs(h[:, 0].conj() @ out.comm[:, 0]) ** 2
        assert abs(got - want) <= 1e-6 * want
        assert sinr_nic(scen, out)[0] >= sinr_nic(scen, v)[0] - 1e-9

    def test_random_instance_meets_targets(self, rng):
        channels = random_complex(rng, 6, 3)
        v = BeamformerMatrix(random_complex(rng, 6, 5), k_comm=3)
        scen = scenario_for(v, channels, "nic", margin=1.0 - 1e-9)
        out = orthogonalize_sensing(v, scen)
        np.testing.assert_allclose(out.gram, v.gram, atol=1e-8)
        assert np.all(sinr_nic(scen, out) >= scen.sinr_targets * (1 - 1e-6))
        leak = np.linalg.norm(channels.conj().T @ out.sensing)
        assert leak <= 1e-6 * np.linalg.norm(channels) * np.linalg.norm(out.sensing)


class TestTwoBeamAnalysis:
    def test_quantitative_example(self):
        geom = ArrayGeometry(n_tx=4, n_rx=1)
        report = verify_single_target_two_beams(geom, 0.0, 1.0)
        c = 15 * np.pi**2 / 12
        assert np.isclose(report.c_value, c, rtol=1e-12)
        assert np.isclose(report.beta1, c / (c + np.sqrt(c / 2)), rtol=1e-12)
        assert report.beta2 > 0
        assert abs(report.beta1 - report.grid_beta1) < 1e-3
        assert report.two_beam_objective <= report.grid_objective + 1e-9
        assert report.two_beam_objective < report.single_beam_objective

    def test_condition_guard(self):
        geom = ArrayGeometry(n_tx=4, n_rx=4)
        with pytest.raises(ConditionViolatedError):
            verify_single_target_two_beams(geom, 0.0, 1.0)

    def test_two_beams_strictly_better_n8(self):
        geom = ArrayGeometry(n_tx=8, n_rx=1)
        report = verify_single_target_two_beams(geom, 0.0, 1.0)
        gap = (report.single_beam_objective - report.two_beam_objective)
        assert gap / report.two_beam_objective > 1e-3
        assert report.beta2 > 0
