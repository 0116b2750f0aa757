import math

import numpy as np
import pytest

from groupkernels.analysis import (
    check_schur_bound,
    norm_trace,
    op_norm_2,
    power_norm_experiment,
    schur_constant,
    schur_series,
    truncation_error,
    truncation_error_direct,
)
from groupkernels.errors import (
    DecayPreconditionError,
    GrowthPreconditionError,
    NonConvergenceError,
    ValidationError,
    WindowTooSmallError,
)
from groupkernels.groups import FreeGroup, Heisenberg3, IntegerLattice
from groupkernels.kernels import InvariantKernel, adjoint_kernel, compose, random_kernel, weighted_norm, window_kernel

from oracles import ZETA3, ZETA4, dense_section, schur_sum_exact_Z, svd_norm

Z1, Z2 = IntegerLattice(1), IntegerLattice(2)


def laplacian_like(d=1):
    return InvariantKernel.shift(Z1, d, generator=0) + InvariantKernel.shift(Z1, d, generator=1)


class TestOpNorm2:
    def test_multiplication_operator(self):
        T = InvariantKernel(Z2, 2, {Z2.identity(): np.diag([3.0, 1.0])})
        for R in (0, 2, 5):
            assert op_norm_2(T, R) == pytest.approx(3.0, rel=1e-10)

    def test_shift_section(self):
        v = op_norm_2(InvariantKernel.shift(Z1, 1), 20)
        assert 0.98 <= v <= 1.0 + 1e-10
        assert v == pytest.approx(svd_norm(dense_section(InvariantKernel.shift(Z1, 1), 20)), rel=1e-9)

    def test_two_shifts(self):
        T = laplacian_like()
        v = op_norm_2(T, 40)
        assert 1.99 <= v <= 2.0 + 1e-10
        # finite section of the path adjacency matrix on 81 points
        assert v == pytest.approx(2 * math.cos(math.pi / 82), rel=1e-9)

    def test_window_too_small(self):
        with pytest.raises(WindowTooSmallError):
            op_norm_2(random_kernel(Z2, 3, 1.0, 1, 0), 2)

    def test_monotone_in_window(self):
        T = random_kernel(Z2, 2, 1.0, 2, 3)
        trace = norm_trace(T, [2, 3, 4, 6, 8])
        vals = [v for _, v in trace]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))

    def test_cstar_identity_on_window(self):
        T = random_kernel(Z2, 2, 1.0, 2, 5)
        W = window_kernel(T, 6).matrix
        n = svd_norm(W)
        from groupkernels.coefficients import spectral_norm

        assert abs(spectral_norm(W.conj().T @ W) - spectral_norm(W) ** 2) <= 1e-6 * n * n


class TestSchurConstant:
    def test_z_closed_form(self):
        exact = math.sqrt(2 * ZETA3 + ZETA4)
        assert math.sqrt(schur_sum_exact_Z(2.0)) == pytest.approx(exact, rel=1e-9)
        C0 = schur_constant(Z1, 2.0, 50)
        # tail majorant makes C0 an upper estimate, tight to a few parts in 1e4
        assert exact <= C0 <= exact * (1 + 1e-3)
        assert C0 == pytest.approx(1.8673122820431054, rel=1e-12)

    def test_z2_doubling(self):
        c50 = schur_constant(Z2, 3.0, 50)
        c100 = schur_constant(Z2, 3.0, 100)
        assert abs(c50 - c100) < 1e-6 * c100

    def test_partial_sum_uses_exact_balls(self):
        s = schur_series(Z2, 3.0, 20)
        want = math.fsum((2 * (n + 1) ** 2 + 2 * (n + 1) + 1) * (1.0 + n) ** -6 for n in range(20))
        assert s.partial_sum == pytest.approx(want, rel=1e-14)
        assert s.constant == pytest.approx(math.sqrt(s.partial_sum + s.tail), rel=1e-14)

    def test_free_group_rejected(self):
        for a in (1.0, 3.0, 10.0):
            with pytest.raises(GrowthPreconditionError, match="u-growth"):
                schur_constant(FreeGroup(2), a)

    def test_weight_too_small(self):
        with pytest.raises(DecayPreconditionError):
            schur_constant(Z1, 1.4, 50)
        with pytest.raises(DecayPreconditionError):
            schur_constant(Heisenberg3(), 3.0, 20)

    def test_tail_gate(self):
        with pytest.raises(NonConvergenceError, match="r_max"):
            schur_series(Z2, 3.0, 6)
        with pytest.raises(NonConvergenceError):
            schur_series(Z2, 3.0, 50, tail_rtol=1e-6)

    def test_heisenberg_finite(self):
        C0 = schur_constant(Heisenberg3(), 4.0, 30)
        assert 1.0 < C0 < 3.0


class TestSchurBound:
    def test_identity(self):
        rep = check_schur_bound(InvariantKernel.identity(Z2, 2), 3.0, 4)
        assert rep.norm_2_estimate == pytest.approx(1.0, rel=1e-10)
        assert rep.schur_satisfied

    def test_random_kernels(self):
        C0 = schur_constant(Z2, 3.0)
        for seed in range(3):
            rep = check_schur_bound(random_kernel(Z2, 4, 4.0, 2, seed), 3.0, 12, C0=C0, trace_radii=[4, 8])
            assert rep.schur_satisfied
            assert [r for r, _ in rep.convergence_trace] == [4, 8, 12]
            assert rep.schur_satisfied == (rep.norm_2_estimate <= rep.schur_constant * rep.weighted_norms[3.0] + 1e-9)

    def test_two_shifts(self):
        T = laplacian_like()
        rep = check_schur_bound(T, 2.0, 40)
        assert rep.weighted_norms[2.0] == pytest.approx(math.sqrt(2 * 2**4), rel=1e-12)
        assert rep.schur_rhs >= 2
        assert rep.schur_satisfied

    def test_free_group(self):
        with pytest.raises(GrowthPreconditionError):
            check_schur_bound(InvariantKernel.identity(FreeGroup(2)), 3.0, 2)


class TestTruncation:
    def test_beyond_propagation(self):
        T = random_kernel(Z2, 3, 1.0, 2, 0)
        exact, bound = truncation_error(T, 1.0, 2.0, 3)
        assert exact == 0.0 and bound >= 0

    def test_by_hand(self):
        T = InvariantKernel(Z1, 1, {Z1.element(k): [[1.0]] for k in range(-2, 3)})
        exact, bound = truncation_error(T, 1.0, 1.0, 1)
        assert exact == pytest.approx(math.sqrt(18), rel=1e-14)
        assert bound == pytest.approx(weighted_norm(T, 2.0) / 3, rel=1e-14)

    def test_monotone_and_bounded(self):
        for seed in range(5):
            T = random_kernel(Z2, 4, 4.0, 2, seed)
            rows = [truncation_error(T, 1.0, 2.0, n) for n in range(T.propagation + 1)]
            ex = [e for e, _ in rows]
            bd = [b for _, b in rows]
            assert all(e <= b for e, b in rows)
            assert ex == sorted(ex, reverse=True) and ex[-1] == 0.0
            assert bd == sorted(bd, reverse=True)

    def test_matches_direct(self):
        T = random_kernel(Heisenberg3(), 2, 1.0, 2, 1)
        for n in range(3):
            assert truncation_error(T, 1.5, 1.0, n)[0] == pytest.approx(truncation_error_direct(T, 1.5, n), abs=1e-12)

    def test_needs_positive_r(self):
        with pytest.raises(ValidationError):
            truncation_error(InvariantKernel.identity(Z1), 1.0, 0.0, 0)


class TestPowers:
    def test_scalar(self):
        fit = power_norm_experiment(InvariantKernel.identity(Z1, 2, 0.5), 1.0, 6, 3)
        assert fit.weighted_norms == pytest.approx([0.5**k for k in range(1, 7)], rel=1e-14)
        assert fit.alpha == pytest.approx(1.0, abs=1e-10)
        assert fit.residual < 1e-10

    def test_shift(self):
        fit = power_norm_experiment(InvariantKernel.shift(Z1, 1), 1.0, 10, 10)
        assert fit.powers == list(range(1, 11))
        assert max(abs(v - (1 + k)) for k, v in zip(fit.powers, fit.weighted_norms)) <= 1e-9

    def test_random_excess_slow(self):
        T = random_kernel(Z2, 2, 3.0, 2, 0)
        fit = power_norm_experiment(T, 1.0, 6, 10)
        ex = fit.excess
        assert all(ex[k] - ex[k - 1] < 1.0 for k in range(3, 6))
        # compose agrees with the fitted inputs
        assert weighted_norm(compose(T, T), 1.0) == pytest.approx(fit.weighted_norms[1], rel=1e-14)

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    def test_overflow_stops(self):
        fit = power_norm_experiment(InvariantKernel.identity(Z1, 1, 1e100), 0.0, 5, 0)
        assert fit.stopped_early and fit.powers == [1, 2, 3]

    def test_n_max(self):
        with pytest.raises(ValidationError):
            power_norm_experiment(InvariantKernel.identity(Z1), 1.0, 2, 2)


def test_adjoint_norm_on_window():
    T = random_kernel(Z2, 2, 0.5, 2, 7)
    assert op_norm_2(adjoint_kernel(T), 6) == pytest.approx(op_norm_2(T, 6), rel=1e-9)
