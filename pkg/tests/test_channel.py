"""Tests for steering vectors, information-matrix specs, and metric specs."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isacbeams import channel
from isacbeams.channel import (
    ArrayGeometry,
    TargetPrior,
    assemble_bfim,
    build_aoa_only_spec,
    build_full_channel_bfim,
    build_multitarget_bfim,
    fourier_grid,
    multitarget_d,
    steering_derivative,
    steering_vector,
)
from isacbeams.errors import NonzeroMeanError

from conftest import random_complex


GEOM4 = ArrayGeometry(n_tx=4, n_rx=4)


class TestSteering:
    def test_broadside_is_uniform(self):
        a = steering_vector(GEOM4, 0.0)
        np.testing.assert_allclose(a, 0.5 * np.ones(4), atol=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(min_value=-1.5, max_value=1.5), st.integers(min_value=1, max_value=32))
    def test_unit_norm(self, theta, n):
        geom = ArrayGeometry(n_tx=n, n_rx=1)
        assert np.isclose(np.linalg.norm(steering_vector(geom, theta)), 1.0)

    def test_elementwise_formula(self):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        theta = np.pi / 6
        a = steering_vector(geom, theta)
        for n in range(8):
            expected = np.exp(1j * np.pi * (n - 3.5) * np.sin(theta)) / np.sqrt(8)
            assert abs(a[n] - expected) < 1e-14

    def test_derivative_orthogonal(self):
        for theta in (-0.7, 0.0, 0.3, 1.2):
            a = steering_vector(GEOM4, theta)
            da = steering_derivative(GEOM4, theta)
            assert abs(np.vdot(da, a)) < 1e-12

    def test_derivative_norm_closed_form(self):
        da = steering_derivative(GEOM4, 0.0)
        assert np.isclose(np.vdot(da, da).real, 15 * np.pi**2 / 12, rtol=1e-12)
        geom2 = ArrayGeometry(n_tx=2, n_rx=1)
        da2 = steering_derivative(geom2, np.pi / 3)
        assert np.isclose(np.vdot(da2, da2).real, np.pi**2 * 0.25 * 3 / 12, rtol=1e-12)

    def test_derivative_finite_difference(self):
        h = 1e-6
        for theta in (0.0, 0.4, -0.9):
            fd = (steering_vector(GEOM4, theta + h) - steering_vector(GEOM4, theta - h)) / (2 * h)
            da = steering_derivative(GEOM4, theta)
            assert np.linalg.norm(fd - da) < 1e-4


class TestFullChannel:
    def test_canonical_basis_n2(self):
        geom = ArrayGeometry(n_tx=2, n_rx=1)
        _, metric = build_full_channel_bfim(geom, [1.0, 1.0], snapshots=1, noise_var=1.0)
        assert metric.d == 4
        e1, e2 = np.eye(2)
        expected = [
            np.outer(e1, e1),
            np.outer(e2, e2),
            np.outer(e1, e2) + np.outer(e2, e1),
            1j * (np.outer(e1, e2) - np.outer(e2, e1)),
        ]
        for got, want in zip(metric.q_matrices, expected):
            np.testing.assert_allclose(got, want, atol=1e-14)

    def test_zero_beamformer_returns_prior(self):
        geom = ArrayGeometry(n_tx=3, n_rx=2)
        spec, _ = build_full_channel_bfim(geom, [0.5, 1.0, 2.0], snapshots=3, noise_var=0.7)
        j = assemble_bfim(spec, np.zeros((3, 2)))
        np.testing.assert_allclose(j, spec.prior_matrix, atol=1e-14)

    def test_kronecker_block_structure(self, rng):
        geom = ArrayGeometry(n_tx=3, n_rx=2)
        ups, sigma2 = 4, 0.5
        spec, _ = build_full_channel_bfim(geom, [1.0, 1.0, 1.0], snapshots=ups, noise_var=sigma2)
        v = random_complex(rng, 3, 5)
        gram = v @ v.conj().T
        block = (2 * ups / sigma2) * np.block([
            [gram.real, gram.imag],
            [-gram.imag, gram.real],
        ])
        expected = spec.prior_matrix + np.kron(np.eye(2), block)
        np.testing.assert_allclose(assemble_bfim(spec, v), expected, atol=1e-10)


def make_priors(n, rng, mean_scale=1.0):
    grid = fourier_grid(8)
    angles = rng.choice(grid[np.abs(grid) < np.pi / 2 - 1e-9], size=n, replace=False)
    priors = []
    for theta in angles:
        mean = mean_scale * (rng.uniform(0.5, 1.5) * np.exp(2j * np.pi * rng.uniform()))
        priors.append(TargetPrior(alpha_mean=mean, alpha_var=rng.uniform(0.1, 1.0),
                                  theta_mean=float(theta), theta_std=np.deg2rad(2.0)))
    return priors


class TestMultiTarget:
    @pytest.mark.parametrize("ntr,expected_d", [(1, 4), (2, 15), (3, 33)])
    def test_quadratic_term_count(self, rng, ntr, expected_d):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        _, metric = build_multitarget_bfim(geom, make_priors(ntr, rng), 1, 1.0)
        assert metric.d == expected_d == multitarget_d(ntr)

    def test_point_mass_matches_direct_formula(self, rng):
        geom = ArrayGeometry(n_tx=6, n_rx=4)
        angles = [-0.5, 0.4]
        mus = [0.8 + 0.3j, -0.2 + 1.1j]
        var = 1e-12
        priors = [TargetPrior(alpha_mean=m, alpha_var=var, theta_mean=t, theta_std=1e-6)
                  for m, t in zip(mus, angles)]
        spec, _ = build_multitarget_bfim(geom, priors, snapshots=2, noise_var=0.5)

        # direct (no expectation) construction at the point masses
        def blocks(theta):
            at = steering_vector(geom, theta, "tx")
            dat = steering_derivative(geom, theta, "tx")
            ar = steering_vector(geom, theta, "rx")
            dar = steering_derivative(geom, theta, "rx")
            a = np.outer(ar, at.conj())
            da = np.outer(dar, at.conj()) + np.outer(ar, dat.conj())
            return a, da

        a1, da1 = blocks(angles[0])
        a2, da2 = blocks(angles[1])

        def herm(x):
            return 0.5 * (x + x.conj().T)

        # (Re a_1, Re a_2) block
        want = herm(a1.conj().T @ a2 + a2.conj().T @ a1)
        got = spec.quad_matrices[channel.pair_index(0, 1, 6)]
        np.testing.assert_allclose(got, want, atol=1e-6)
        # (theta_1, theta_2) block
        want = herm(np.conj(mus[0]) * mus[1] * (da1.conj().T @ da2)
                    + mus[0] * np.conj(mus[1]) * (da2.conj().T @ da1))
        got = spec.quad_matrices[channel.pair_index(4, 5, 6)]
        np.testing.assert_allclose(got, want, atol=1e-6)
        # (Re a_2, theta_1) block
        want = herm(mus[0] * (a2.conj().T @ da1) + np.conj(mus[0]) * (da1.conj().T @ a2))
        got = spec.quad_matrices[channel.pair_index(1, 4, 6)]
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_cross_block_diag_is_zero(self, rng):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        priors = make_priors(2, rng)
        spec, _ = build_multitarget_bfim(geom, priors, 1, 1.0)
        # (Re alpha_i, Im alpha_i) entries vanish
        for i in range(2):
            g = spec.quad_matrices[channel.pair_index(i, 2 + i, 6)]
            assert np.linalg.norm(g) < 1e-12

    def test_snapshot_doubling_doubles_information(self, rng):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        priors = make_priors(2, rng)
        spec1, _ = build_multitarget_bfim(geom, priors, 1, 1.0)
        spec2, _ = build_multitarget_bfim(geom, priors, 2, 1.0)
        v = random_complex(rng, 8, 3)
        t1 = assemble_bfim(spec1, v) - spec1.prior_matrix
        t2 = assemble_bfim(spec2, v) - spec2.prior_matrix
        np.testing.assert_allclose(t2, 2 * t1, atol=1e-12)

    def test_gram_linearity_under_column_concat(self, rng):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        spec, _ = build_multitarget_bfim(geom, make_priors(2, rng), 1, 1.0)
        v1 = random_complex(rng, 8, 2)
        v2 = random_complex(rng, 8, 3)
        joint = assemble_bfim(spec, np.hstack([v1, v2])) - spec.prior_matrix
        split = (assemble_bfim(spec, v1) - spec.prior_matrix) \
            + (assemble_bfim(spec, v2) - spec.prior_matrix)
        np.testing.assert_allclose(joint, split, atol=1e-11)

    def test_assembled_bfim_is_psd(self, rng):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        spec, _ = build_multitarget_bfim(geom, make_priors(3, rng), 4, 2.0)
        v = random_complex(rng, 8, 4)
        j = assemble_bfim(spec, v)
        w = np.linalg.eigvalsh(j)
        assert w[0] > -1e-8 * w[-1]


class TestAoaOnly:
    def zero_mean_priors(self, n, rng):
        return [TargetPrior(alpha_mean=0.0, alpha_var=rng.uniform(0.2, 1.0),
                            theta_mean=float(t), theta_std=np.deg2rad(3.0))
                for t in fourier_grid(8)[2:2 + n]]

    def test_d_equals_target_count(self, rng):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        metric = build_aoa_only_spec(geom, self.zero_mean_priors(3, rng), 1, 1.0)
        assert metric.d == 3
        assert metric.offsets is not None

    def test_single_matrix_is_psd(self, rng):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        metric = build_aoa_only_spec(geom, self.zero_mean_priors(1, rng), 1, 1.0)
        w = np.linalg.eigvalsh(metric.q_matrices[0])
        assert w[0] > -1e-10 * max(1.0, w[-1])

    def test_rejects_nonzero_mean(self, rng):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        priors = [TargetPrior(alpha_mean=0.5, alpha_var=0.5, theta_mean=0.1, theta_std=0.05)]
        with pytest.raises(NonzeroMeanError):
            build_aoa_only_spec(geom, priors, 1, 1.0)

    def test_angle_rows_decouple_for_zero_mean(self, rng):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        priors = self.zero_mean_priors(2, rng)
        spec, _ = build_multitarget_bfim(geom, priors, 1, 1.0)
        v = random_complex(rng, 8, 4)
        j = assemble_bfim(spec, v)
        # angle rows couple only through their own diagonal
        angle = slice(4, 6)
        off = j[angle, :4]
        assert np.max(np.abs(off)) < 1e-8
        assert abs(j[4, 5]) < 1e-8
        # and the diagonal matches the angle-only metric values
        metric = build_aoa_only_spec(geom, priors, 1, 1.0)
        vals = metric.offsets + metric.values(v)
        np.testing.assert_allclose(np.diag(j)[angle], vals, rtol=1e-10)


class TestMetricSpecValidation:
    def test_rejects_duplicates(self):
        q = np.eye(3)
        with pytest.raises(ValueError):
            channel.QuadraticMetricSpec(q_matrices=[q, 2 * q])

    def test_accepts_canonical_basis(self):
        geom = ArrayGeometry(n_tx=3, n_rx=1)
        _, metric = build_full_channel_bfim(geom, np.ones(3), 1, 1.0)
        assert metric.d == 9


class TestExpectations:
    def test_monte_carlo_fallback_close_to_quadrature(self, rng):
        geom = ArrayGeometry(n_tx=6, n_rx=6)
        prior = TargetPrior(alpha_mean=1.0, alpha_var=0.5, theta_mean=0.3,
                            theta_std=np.deg2rad(3.0))
        spec_gh, _ = build_multitarget_bfim(geom, [prior], 1, 1.0)
        spec_mc, _ = build_multitarget_bfim(geom, [prior], 1, 1.0,
                                            method="monte_carlo", seed=5)
        v = random_complex(rng, 6, 2)
        j_gh = assemble_bfim(spec_gh, v)
        j_mc = assemble_bfim(spec_mc, v)
        assert np.linalg.norm(j_gh - j_mc) < 0.05 * np.linalg.norm(j_gh)

    def test_quadrature_nodes_deterministic(self):
        thetas1, w1 = channel.angle_nodes(0.2, 0.01, 15)
        thetas2, w2 = channel.angle_nodes(0.2, 0.01, 15)
        np.testing.assert_array_equal(thetas1, thetas2)
        assert np.isclose(w1.sum(), 1.0)

    def test_imaginary_residue_guard(self, rng):
        geom = ArrayGeometry(n_tx=3, n_rx=1)
        spec, _ = build_full_channel_bfim(geom, np.ones(3), 1, 1.0)
        # deliberately corrupt one quadratic matrix so a trace turns complex
        bad = spec.quad_matrices[1] + 1j * np.eye(3) * 0.5
        spec.quad_matrices[1] = bad
        spec._stack = None
        with pytest.raises(channel.ImaginaryResidueError):
            assemble_bfim(spec, random_complex(rng, 3, 2))


class TestFourierGrid:
    def test_even_grid(self):
        grid = fourier_grid(8)
        js = np.arange(-3, 5)
        np.testing.assert_allclose(grid, np.arcsin(2 * js / 8))
        assert grid.size == 8

    def test_steering_orthogonality(self):
        geom = ArrayGeometry(n_tx=8, n_rx=8)
        grid = fourier_grid(8)
        vecs = np.stack([steering_vector(geom, t) for t in grid])
        gram = vecs.conj() @ vecs.T
        np.testing.assert_allclose(gram, np.eye(8), atol=1e-9)
