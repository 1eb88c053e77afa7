import numpy as np
import pytest

from gpmvs.errors import DimensionMismatch, InvalidRange
from gpmvs.planesweep import Intrinsics, cost_volume, depth_planes, homography, warp_image
from gpmvs.poses import Pose, RelativePose, relative_pose

from conftest import random_rotation

K_SMALL = Intrinsics(100.0, 100.0, 15.5, 11.5, 32, 24)


def identity_rel():
    return RelativePose(np.eye(3), np.zeros(3))


class TestDepthPlanes:
    def test_default_endpoints(self):
        p = depth_planes()
        assert p.size == 64 and p[0] == 0.5 and p[-1] == 50.0
        assert np.all(np.diff(p) > 0)
        np.testing.assert_allclose(np.diff(1.0 / p), np.diff(1.0 / p)[0], rtol=1e-10)

    def test_three_planes(self):
        np.testing.assert_allclose(depth_planes(1.0, 2.0, 3), [1.0, 4.0 / 3.0, 2.0], rtol=1e-15)

    def test_two_planes(self):
        np.testing.assert_array_equal(depth_planes(0.7, 9.0, 2), [0.7, 9.0])

    @pytest.mark.parametrize("args", [(0.0, 1.0, 4), (2.0, 1.0, 4), (1.0, 2.0, 1)])
    def test_invalid(self, args):
        with pytest.raises(InvalidRange):
            depth_planes(*args)


class TestHomography:
    def test_identity(self):
        for d in (0.5, 3.0, 50.0):
            np.testing.assert_allclose(homography(K_SMALL, identity_rel(), d), np.eye(3), atol=1e-15)

    def test_parallax_shift(self):
        rel = RelativePose(np.eye(3), [0.1, 0.0, 0.0])
        H = homography(K_SMALL, rel, 1.0)
        u = H @ np.array([7.0, 5.0, 1.0])
        np.testing.assert_allclose(u / u[2], [17.0, 5.0, 1.0], rtol=1e-14)

    def test_point_on_plane_oracle(self, rng):
        for _ in range(300):
            K = Intrinsics(*rng.uniform(50, 500, 2), *rng.uniform(0, 300, 2), 320, 256)
            rel = RelativePose(random_rotation(rng) if rng.random() < 0.5 else np.eye(3), rng.normal(size=3))
            d = rng.uniform(0.5, 50)
            u = np.array([rng.uniform(0, 320), rng.uniform(0, 256), 1.0])
            X = d * (K.K_inv @ u)
            x = K.K @ rel.apply(X)
            h = homography(K, rel, d) @ u
            np.testing.assert_allclose(h[:2] / h[2], x[:2] / x[2], rtol=1e-9)

    def test_nonpositive_depth(self):
        with pytest.raises(InvalidRange):
            homography(K_SMALL, identity_rel(), 0.0)


class TestWarp:
    def test_identity(self, rng):
        img = rng.uniform(size=(3, 24, 32))
        np.testing.assert_array_equal(warp_image(img, np.eye(3)), img)

    def test_integer_shift(self, rng):
        img = rng.uniform(size=(1, 10, 20))
        H = np.array([[1.0, 0, 5], [0, 1, 0], [0, 0, 1]])
        out = warp_image(img, H)
        np.testing.assert_array_equal(out[:, :, :15], img[:, :, 5:])
        np.testing.assert_array_equal(out[:, :, 15:], 0.0)

    def test_half_pixel_ramp(self):
        xs = np.arange(20.0)
        img = np.broadcast_to(0.01 + 0.04 * xs, (1, 6, 20)).copy()
        H = np.array([[1.0, 0, 0.5], [0, 1, 0], [0, 0, 1]])
        out = warp_image(img, H)
        expected = np.broadcast_to(0.01 + 0.04 * (xs[:19] + 0.5), (6, 19))
        np.testing.assert_allclose(out[0, :, :19], expected, rtol=1e-14)
        np.testing.assert_array_equal(out[0, :, 19], 0.0)

    def test_behind_camera_is_zero(self, rng):
        img = rng.uniform(0.5, 1.0, size=(1, 8, 8))
        H = np.diag([1.0, 1.0, -1.0])
        assert not warp_image(img, H).any()

    def test_homogeneous_scale_invariance(self, rng):
        img = rng.uniform(size=(3, 16, 16))
        H = np.array([[0.9, 0.05, 1.3], [-0.02, 1.1, -0.7], [1e-3, 2e-3, 1.0]])
        np.testing.assert_allclose(warp_image(img, 3.7 * H), warp_image(img, H), rtol=1e-13)


class TestCostVolume:
    def test_self_is_zero(self, rng):
        img = rng.uniform(size=(3, 24, 32))
        vol = cost_volume(img, [(img, identity_rel())], K_SMALL, depth_planes(1, 5, 4))
        assert vol.cost.shape == (4, 24, 32) and not vol.cost.any()

    def test_constant_images(self):
        ref = np.full((3, 24, 32), 0.2)
        nbr = np.full((3, 24, 32), 0.5)
        vol = cost_volume(ref, [(nbr, identity_rel())], K_SMALL, depth_planes(1, 5, 3))
        np.testing.assert_allclose(vol.cost, 0.9, rtol=1e-14)

    def test_average_over_neighbors(self, rng):
        ref = rng.uniform(size=(3, 24, 32))
        other = rng.uniform(size=(3, 24, 32))
        planes = depth_planes(1, 5, 3)
        V = cost_volume(ref, [(other, identity_rel())], K_SMALL, planes).cost
        both = cost_volume(ref, [(other, identity_rel()), (ref, identity_rel())], K_SMALL, planes).cost
        np.testing.assert_allclose(both, V / 2, rtol=1e-15)

    def test_order_invariant(self, rng):
        ref = rng.uniform(size=(1, 24, 32))
        nbrs = [(rng.uniform(size=(1, 24, 32)), RelativePose(np.eye(3), rng.normal(size=3) * 0.1)) for _ in range(3)]
        planes = depth_planes(1, 5, 5)
        a = cost_volume(ref, nbrs, K_SMALL, planes).cost
        b = cost_volume(ref, nbrs[::-1], K_SMALL, planes).cost
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)

    def test_bounds(self, rng):
        ref = rng.uniform(size=(3, 24, 32))
        nbr = rng.uniform(size=(3, 24, 32))
        rel = relative_pose(Pose(), Pose(np.eye(3), [0.2, 0.1, 0.0]))
        cost = cost_volume(ref, [(nbr, rel)], K_SMALL, depth_planes()).cost
        assert cost.min() >= 0 and cost.max() <= 3.0

    def test_shape_checks(self, rng):
        img = rng.uniform(size=(3, 24, 32))
        with pytest.raises(DimensionMismatch):
            cost_volume(img, [(img[:, :20], identity_rel())], K_SMALL, depth_planes())
        with pytest.raises(DimensionMismatch):
            cost_volume(img[:, :20], [(img[:, :20], identity_rel())], K_SMALL, depth_planes())
