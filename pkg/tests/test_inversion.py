import math

import numpy as np
import pytest

from groupkernels.errors import (
    InsufficientDataError,
    NotInvertibleError,
    ValidationError,
    WindowTooSmallError,
)
from groupkernels.groups import IntegerLattice
from groupkernels.inversion import (
    decay_fit,
    inverse_closedness_report,
    near_identity,
    neumann_inverse,
    spectral_bounds,
)
from groupkernels.kernels import InvariantKernel, envelope, random_kernel, window_kernel

from oracles import dense_section, svd_norm

Z1, Z2 = IntegerLattice(1), IntegerLattice(2)


def shift_perturbation(eps=0.4):
    return InvariantKernel.identity(Z1) + InvariantKernel.shift(Z1, 1, eps)


def symmetric_perturbation(eps=0.2):
    return (
        InvariantKernel.identity(Z1)
        + InvariantKernel.shift(Z1, 1, eps, generator=0)
        + InvariantKernel.shift(Z1, 1, eps, generator=1)
    )


class TestSpectralBounds:
    def test_scalar(self):
        M, N = spectral_bounds(4 * np.eye(5))
        assert M <= 4 <= N
        assert M == pytest.approx(4, rel=1e-8) and N == pytest.approx(4, rel=1e-8)

    def test_diagonal_blocks(self):
        M, N = spectral_bounds(np.diag([1.0, 9.0, 1.0, 9.0]))
        assert M <= 1 and N >= 9
        assert M == pytest.approx(1, rel=1e-8) and N == pytest.approx(9, rel=1e-8)

    def test_against_eigvalsh(self):
        X = window_kernel(shift_perturbation(), 20).matrix
        P = X.conj().T @ X
        ev = np.linalg.eigvalsh(P)
        M, N = spectral_bounds(P)
        assert M <= ev[0] and N >= ev[-1]
        assert ev[0] - M <= 1e-6 * ev[0] and N - ev[-1] <= 1e-6 * ev[-1]

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValidationError):
            spectral_bounds(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_singular(self):
        with pytest.raises(NotInvertibleError):
            spectral_bounds(np.diag([1.0, 0.0]))
        with pytest.raises(NotInvertibleError):
            spectral_bounds(np.zeros((3, 3)))


class TestNeumann:
    def test_scalar_one_step(self):
        K, dg = neumann_inverse(InvariantKernel.identity(Z1, 1, 2.0), 2)
        assert dg.iterations == 1
        assert np.allclose(K.matrix, 0.5 * np.eye(K.matrix.shape[0]), atol=1e-12)
        assert dg.residual_2 <= 1e-12

    def test_shift_against_dense_solve(self):
        T = shift_perturbation()
        K, dg = neumann_inverse(T, 24, tol=1e-8)
        assert dg.residual_2 <= 1e-8
        n = window_kernel(T, 24).window.interior(12)
        oracle = np.linalg.inv(dense_section(T, 24))
        assert np.max(np.abs(K.matrix[:n, :n] - oracle[:n, :n])) <= 10 * 1e-8
        # A is Hermitian with ||A|| = q, so the iteration count follows from q alone
        q = dg.contraction_q
        k = dg.iterations - 1
        assert q ** (k + 1) / (1 - q) < 1e-8 <= q**k / (1 - q)

    def test_envelope_geometric(self):
        K, _ = neumann_inverse(shift_perturbation(), 24, tol=1e-10)
        env = envelope(K).by_length()
        for j in range(2, 9):
            assert env[j] == pytest.approx(0.4**j, rel=1e-3)

    def test_random_z2(self):
        T = near_identity(random_kernel(Z2, 2, 4.0, 2, 0), 0.2, 8)
        K, dg = neumann_inverse(T, 8, tol=1e-10)
        assert dg.residual_2 <= 1e-10 and dg.residual_2_left <= 1e-10 * (1 + dg.N / dg.M)
        X = window_kernel(T, 8).matrix
        P_inv = K.matrix @ np.linalg.pinv(X.conj().T)
        assert np.max(np.abs(P_inv - P_inv.conj().T)) <= 1e-9

    def test_window_too_small(self):
        with pytest.raises(WindowTooSmallError):
            neumann_inverse(random_kernel(Z2, 2, 1.0, 1, 0), 5)

    def test_bad_tol(self):
        with pytest.raises(ValidationError):
            neumann_inverse(shift_perturbation(), 6, tol=0.0)


@pytest.fixture(scope="module")
def runs():
    out = [neumann_inverse(shift_perturbation(), 24, tol=1e-8)[1]]
    for seed in range(3):
        T = near_identity(random_kernel(Z2, 2, 4.0, 2, seed), 0.3, 8)
        out.append(neumann_inverse(T, 6, tol=1e-8)[1])
    return out


class TestTrace:
    def test_contraction(self, runs):
        for dg in runs:
            assert dg.contraction_q <= dg.contraction_bound + 1e-10 < 1

    def test_monotone(self, runs):
        for dg in runs:
            for v in dg.weighted_norm_trace.values():
                assert all(b >= a - 1e-12 for a, b in zip(v, v[1:]))

    def test_geometric_mean_ratio(self, runs):
        for dg in runs:
            for v in dg.weighted_norm_trace.values():
                inc = [abs(b - a) for a, b in zip(v, v[1:])]
                if len(inc) < 2 or inc[-1] == 0:
                    continue
                ratio = (inc[-1] / inc[0]) ** (1 / (len(inc) - 1))
                assert ratio <= dg.contraction_q + 0.1

    def test_residual_bound(self, runs):
        for dg in runs:
            k = dg.iterations - 1
            q = dg.contraction_q
            assert dg.residual_2 <= q ** (k + 1) / (1 - q) * 2 * dg.N / (dg.M + dg.N) + 1e-12


class TestDecayFit:
    def test_power_law(self):
        K = InvariantKernel(Z1, 1, {Z1.element(k): [[(1.0 + abs(k)) ** -3]] for k in range(-10, 11)})
        b, res = decay_fit(K)
        assert b == pytest.approx(3.0, abs=1e-10)
        assert res < 1e-10

    def test_exponential(self):
        K = InvariantKernel(Z1, 1, {Z1.element(k): [[0.4 ** abs(k)]] for k in range(-20, 21)})
        b, res = decay_fit(K, l_min=2)
        assert b > 5 and res > 1e-3

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            decay_fit(InvariantKernel.identity(Z1))


class TestClosedness:
    def test_scalar(self):
        rep = inverse_closedness_report(InvariantKernel.identity(Z1, 1, 2.0), [2, 4, 6])
        assert rep.interior_differences == pytest.approx([0.0, 0.0], abs=1e-12)
        for v in rep.weighted_norms.values():
            assert v == pytest.approx([0.5] * 3, rel=1e-10)

    def test_shift_interior_stable(self):
        rep = inverse_closedness_report(shift_perturbation(), [16, 24, 32])
        assert rep.interior_radius == 8
        assert all(d <= 10 * 1e-8 for d in rep.interior_differences)

    def test_symmetric_interior_settles(self):
        rep = inverse_closedness_report(symmetric_perturbation(), [8, 16, 32], tol=1e-12)
        d1, d2 = rep.interior_differences
        assert d2 <= d1 / 10

    def test_schedule_validation(self):
        with pytest.raises(ValidationError):
            inverse_closedness_report(shift_perturbation(), [8, 8])
        with pytest.raises(ValidationError):
            inverse_closedness_report(shift_perturbation(), [])


def test_near_identity_scaling():
    S = random_kernel(Z2, 2, 4.0, 2, 1)
    T = near_identity(S, 0.2, 8)
    diff = window_kernel(T, 8).matrix - np.eye(window_kernel(T, 8).matrix.shape[0])
    assert svd_norm(diff) == pytest.approx(0.2, rel=1e-6)
    assert math.isfinite(neumann_inverse(T, 6)[1].decay_exponent)
