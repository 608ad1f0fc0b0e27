import numpy as np
import pytest

from simplexsmooth.bandwidth import hessian_fd
from simplexsmooth.targets import TARGETS, get_target, target_hessian, target_value


class TestValues:
    def test_product(self):
        assert target_value(1, [0.5, 0.5]) == pytest.approx(0.25, rel=1e-15)

    def test_log_at_origin(self):
        assert target_value(2, [0.0, 0.0]) == 0.0

    def test_shifted_quadratic(self):
        assert target_value(5, [0.25, 0.25]) == pytest.approx(1.25, rel=1e-15)

    def test_trig(self):
        assert target_value(3, [0.3, 0.4]) == pytest.approx(np.sin(0.3) + np.cos(0.4), rel=1e-15)

    def test_affine_debug_target(self):
        assert target_value(0, [0.2, 0.3]) == pytest.approx(1.0 + 0.4 - 0.3, rel=1e-15)
        np.testing.assert_array_equal(target_hessian(0, [0.2, 0.3]), np.zeros((2, 2)))

    def test_vectorised_values(self, rng):
        pts = rng.dirichlet([1, 1, 1], size=10)[:, :2]
        for tid in range(7):
            vals = target_value(tid, pts)
            assert vals.shape == (10,)
            assert vals[3] == pytest.approx(float(target_value(tid, pts[3])), rel=1e-14)

    def test_unknown_id(self):
        with pytest.raises(ValueError, match="target id"):
            get_target(9)


class TestHessianConsistency:
    @pytest.mark.parametrize("tid", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("s", [(0.3, 0.35), (0.2, 0.25), (0.15, 0.5)])
    def test_analytic_matches_finite_differences(self, tid, s):
        target = TARGETS[tid]
        fd = hessian_fd(lambda p: float(target.value(p)), np.asarray(s))
        np.testing.assert_allclose(target.hessian(np.asarray(s)), fd, atol=1e-4)

    @pytest.mark.parametrize("tid", [1, 2, 3, 4, 5, 6])
    def test_hessian_symmetric(self, tid, rng):
        s = 0.1 + 0.3 * rng.random(2)
        H = target_hessian(tid, s)
        np.testing.assert_array_equal(H, H.T)
