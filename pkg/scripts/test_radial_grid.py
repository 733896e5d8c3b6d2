"""
径向网格与求积测试
"""
import math
import os
import sys

import numpy as np
import pytest

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.core.exceptions import ConfigError, ContractViolation
from app.services.radial_grid import (
    annulus_mask,
    ball_mask,
    build_grid,
    face_average,
    face_gradient,
    integrate,
    integrate_faces,
)


class TestBuildGrid:
    """网格构造"""

    def test_faces_and_centers(self):
        grid = build_grid(1.0, 512)
        assert grid.face_radii[0] == 0.0
        assert grid.face_radii[-1] == 1.0
        assert grid.cell_centers.shape == (512,)
        assert grid.cell_centers[0] == pytest.approx(0.5 / 512)
        assert np.all(np.diff(grid.cell_centers) > 0)

    def test_areas_sum_to_disk(self):
        grid = build_grid(2.0, 300)
        assert np.all(grid.cell_areas > 0)
        assert grid.cell_areas.sum() == pytest.approx(4.0 * math.pi, rel=1e-13)
        assert grid.total_area == pytest.approx(4.0 * math.pi)

    def test_boundary_face_weights_vanish(self):
        grid = build_grid(1.0, 64)
        assert grid.face_weights[0] == 0.0
        assert grid.face_weights[-1] == 0.0
        assert np.all(grid.face_weights[1:-1] > 0)

    def test_arrays_are_read_only(self):
        grid = build_grid(1.0, 16)
        with pytest.raises(ValueError):
            grid.cell_areas[0] = 1.0

    @pytest.mark.parametrize("R, N", [(0.0, 64), (-1.0, 64), (1.0, 3), (1.0, 2.5), (math.inf, 64)])
    def test_rejects_bad_domain(self, R, N):
        with pytest.raises(ConfigError):
            build_grid(R, N)


class TestQuadrature:
    """求积与面算子"""

    def test_integrate_constant(self):
        grid = build_grid(1.0, 128)
        assert integrate(grid, np.full(128, 3.0)) == pytest.approx(3.0 * math.pi, rel=1e-13)

    def test_integrate_r_squared_converges(self):
        exact = math.pi / 2.0  # ∫ r² dx on the unit disk
        errors = []
        for N in (64, 128):
            grid = build_grid(1.0, N)
            errors.append(abs(integrate(grid, grid.cell_centers ** 2) - exact))
        assert errors[1] < errors[0] / 3.5

    def test_integrate_rejects_bad_input(self):
        grid = build_grid(1.0, 32)
        with pytest.raises(ContractViolation):
            integrate(grid, np.ones(31))
        bad = np.ones(32)
        bad[5] = np.nan
        with pytest.raises(ContractViolation):
            integrate(grid, bad)

    def test_face_gradient_of_linear_field(self):
        grid = build_grid(1.0, 50)
        g = face_gradient(grid, 2.0 * grid.cell_centers + 1.0)
        assert g[0] == 0.0 and g[-1] == 0.0
        np.testing.assert_allclose(g[1:-1], 2.0, rtol=1e-12)

    def test_face_average_edges(self):
        grid = build_grid(1.0, 4)
        z = np.array([1.0, 3.0, 5.0, 7.0])
        np.testing.assert_array_equal(face_average(grid, z), [1.0, 2.0, 4.0, 6.0, 7.0])

    def test_integrate_faces_with_weight(self):
        grid = build_grid(1.0, 40)
        ones = np.ones(41)
        assert integrate_faces(grid, ones) == pytest.approx(grid.face_weights.sum())
        assert integrate_faces(grid, ones, weight=np.zeros(41)) == 0.0
        with pytest.raises(ContractViolation):
            integrate_faces(grid, np.ones(40))

    def test_masks_partition(self):
        grid = build_grid(1.0, 100)
        inside = ball_mask(grid, 0.3)
        outside = annulus_mask(grid, 0.3)
        assert not np.any(inside & outside)
        assert np.all(inside | outside)
        assert inside.sum() == 30
