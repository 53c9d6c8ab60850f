import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlvr.errors import CgBreakdown, LineSearchError, NotDescentError, NumericalError
from mlvr.solvers import CgConfig, LineSearchConfig, backtracking_line_search, cg_solve


def counting(A):
    calls = []

    def apply(v):
        calls.append(1)
        return A @ v

    return apply, calls


class TestCg:
    def test_identity_one_iteration(self):
        apply, calls = counting(np.eye(2))
        np.testing.assert_allclose(cg_solve(apply, np.array([3.0, 4.0])), [3.0, 4.0])
        assert len(calls) == 1

    def test_diagonal_two_iterations(self):
        apply, calls = counting(np.diag([2.0, 4.0]))
        np.testing.assert_allclose(cg_solve(apply, np.array([2.0, 4.0])), [1.0, 1.0], rtol=1e-14)
        assert len(calls) <= 2

    def test_random_spd(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((5, 5))
        A = M @ M.T + 5 * np.eye(5)
        b = rng.standard_normal(5)
        x = cg_solve(lambda v: A @ v, b, CgConfig(max_iters=10))
        assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-10
        np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-9)

    def test_zero_rhs(self):
        apply, calls = counting(np.eye(3))
        np.testing.assert_array_equal(cg_solve(apply, np.zeros(3)), 0.0)
        assert calls == []

    def test_iteration_cap(self):
        apply, calls = counting(np.diag(np.arange(1.0, 21.0)))
        cg_solve(apply, np.ones(20), CgConfig(max_iters=10))
        assert len(calls) == 10

    def test_indefinite_breakdown(self):
        with pytest.raises(CgBreakdown):
            cg_solve(lambda v: -v, np.ones(2))

    def test_non_finite(self):
        with pytest.raises(NumericalError):
            cg_solve(lambda v: v * np.nan, np.ones(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_cg_exact_within_d_steps(d, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    A = Q @ np.diag(rng.uniform(0.5, 10.0, d)) @ Q.T
    b = rng.standard_normal(d)
    x = cg_solve(lambda v: A @ v, b, CgConfig(max_iters=d, rel_tol=0.0))
    ref = np.linalg.solve(A, b)
    assert np.linalg.norm(x - ref) / np.linalg.norm(ref) < 1e-8


class TestLineSearch:
    f = staticmethod(lambda w: 0.5 * float(w @ w))

    def test_full_step(self):
        assert backtracking_line_search(self.f, np.array([1.0]), np.array([-1.0]), np.array([1.0])) == 1.0

    def test_one_backtrack(self):
        assert backtracking_line_search(self.f, np.array([1.0]), np.array([-3.0]), np.array([1.0])) == 0.5

    @pytest.mark.parametrize("p", [[1.0], [0.0]])
    def test_not_descent(self, p):
        with pytest.raises(NotDescentError):
            backtracking_line_search(self.f, np.array([1.0]), np.array(p), np.array([1.0]))

    def test_failure_reports_last_step(self):
        cfg = LineSearchConfig(max_backtracks=3)
        with pytest.raises(LineSearchError) as info:
            # claimed slope is far steeper than the true one
            backtracking_line_search(self.f, np.array([1.0]), np.array([-1.0]), np.array([1e6]), cfg)
        assert info.value.last_step == 0.5**3

    def test_armijo_holds(self):
        rng = np.random.default_rng(3)
        A = np.diag([1.0, 100.0])
        f = lambda w: 0.5 * w @ A @ w
        for _ in range(50):
            w = rng.standard_normal(2)
            g = A @ w
            p = -g + 0.1 * rng.standard_normal(2)
            if g @ p >= 0:
                continue
            a = backtracking_line_search(f, w, p, g)
            assert f(w + a * p) <= f(w) + 1e-4 * a * (g @ p)
            assert a == 1.0 or f(w + 2 * a * p) > f(w) + 1e-4 * 2 * a * (g @ p)

    @pytest.mark.parametrize("kw", [{"armijo_c": 0.0}, {"shrink": 1.0}, {"init_step": 0.0}])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            LineSearchConfig(**kw)
