import math

import numpy as np
import pytest

from fdrkit import (
    DomainError,
    GridConfig,
    GridDensity,
    InsufficientDataError,
    estimate_alternative,
    eval_density,
    null_pdf,
)
from fdrkit.densities import DENSITY_FLOOR, trapezoid_mass


class TestNullPdf:
    def test_standard_normal_at_zero(self):
        assert null_pdf(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi))

    def test_mode_value_scale_two(self):
        assert null_pdf(1.0, loc=1.0, scale=2.0) == pytest.approx(
            1.0 / (2.0 * math.sqrt(2 * math.pi))
        )

    def test_value_at_196(self):
        # direct evaluation of the Gaussian formula as the oracle
        expected = math.exp(-0.5 * 1.96**2) / math.sqrt(2 * math.pi)
        assert null_pdf(1.96) == pytest.approx(expected, rel=1e-12)
        assert null_pdf(1.96) == pytest.approx(0.058441, abs=5e-7)

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(DomainError):
            null_pdf(0.0, scale=0.0)

    @pytest.mark.parametrize("loc,scale", [(0.0, 1.0), (2.5, 0.7), (-4.0, 3.0)])
    def test_integrates_to_one(self, loc, scale):
        grid = np.linspace(loc - 10 * scale, loc + 10 * scale, 200001)
        vals = null_pdf(grid, loc=loc, scale=scale)
        step = grid[1] - grid[0]
        assert trapezoid_mass(vals, step) == pytest.approx(1.0, abs=1e-6)


class TestGridDensity:
    def test_invariants_enforced(self):
        with pytest.raises(DomainError):
            GridDensity(lo=0.0, hi=1.0, step=0.5, values=np.array([1.0, -1.0, 1.0]))
        with pytest.raises(DomainError):
            GridDensity(lo=0.0, hi=1.0, step=0.5, values=np.array([5.0, 5.0, 5.0]))
        with pytest.raises(DomainError):
            GridDensity(lo=0.0, hi=1.0, step=0.5, values=np.array([1.0, 1.0]))

    def test_serialization_roundtrip(self):
        d = GridDensity(lo=-1.0, hi=1.0, step=0.5,
                        values=np.array([0.1, 0.5, 0.8, 0.5, 0.1]) / 0.95)
        back = GridDensity.from_dict(d.to_dict())
        np.testing.assert_array_equal(back.values, d.values)
        assert (back.lo, back.hi, back.step) == (d.lo, d.hi, d.step)

    def test_csv_export(self, tmp_path):
        d = GridDensity(lo=0.0, hi=1.0, step=0.5,
                        values=np.array([1.0, 1.0, 1.0]))
        path = tmp_path / "d.csv"
        d.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "grid_point,value"
        assert len(lines) == 4


class TestEvalDensity:
    def setup_method(self):
        self.d = GridDensity(lo=0.0, hi=1.0, step=0.5,
                             values=np.array([0.2, 0.4, 2.8]) / 0.95)

    def test_grid_point_identity(self):
        assert eval_density(self.d, 0.5) == pytest.approx(0.4 / 0.95)

    def test_midpoint_interpolation(self):
        assert eval_density(self.d, 0.25) == pytest.approx(0.3 / 0.95)

    def test_outside_range_floor(self):
        assert eval_density(self.d, 2.0) == DENSITY_FLOOR
        assert eval_density(self.d, -1.0) == DENSITY_FLOOR

    def test_never_below_floor(self):
        d = GridDensity(lo=0.0, hi=2.0, step=0.01,
                        values=np.r_[np.zeros(100), np.full(101, 1.0 / 1.005)])
        zs = np.linspace(-1.0, 3.0, 1001)
        assert np.all(eval_density(d, zs) >= DENSITY_FLOOR)

    def test_continuous_on_range(self):
        zs = np.linspace(0.0, 1.0, 2001)
        vals = eval_density(self.d, zs)
        assert np.max(np.abs(np.diff(vals))) < 0.01


class TestEstimateAlternative:
    def test_pure_null_small_mass(self):
        rng = np.random.default_rng(42)
        z = rng.standard_normal(5000)
        _, pi1 = estimate_alternative(z, seed=7)
        assert pi1 < 0.1

    def test_output_normalized(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal(500)
        f1, _ = estimate_alternative(z, seed=1)
        assert trapezoid_mass(f1.values, f1.step) == pytest.approx(1.0, abs=1e-3)

    def test_mixture_mode_located(self):
        rng = np.random.default_rng(42)
        h = rng.uniform(size=5000) < 0.5
        z = np.where(h, 3.0 + rng.standard_normal(5000), rng.standard_normal(5000))
        f1, pi1 = estimate_alternative(z, seed=7)
        mode = f1.grid[np.argmax(f1.values)]
        assert abs(mode - 3.0) <= 0.5
        assert 0.2 < pi1 < 0.8

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        z = rng.standard_normal(200)
        f1a, pa = estimate_alternative(z, seed=11)
        f1b, pb = estimate_alternative(z, seed=11)
        np.testing.assert_array_equal(f1a.values, f1b.values)
        assert pa == pb

    def test_too_few_observations(self):
        with pytest.raises(InsufficientDataError):
            estimate_alternative(np.zeros(9), seed=0)

    def test_grid_must_cover_range(self):
        with pytest.raises(DomainError, match="cover"):
            estimate_alternative(np.linspace(-1, 20, 50),
                                 grid=GridConfig(lo=-10, hi=10), seed=0)
