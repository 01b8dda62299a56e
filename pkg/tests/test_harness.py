"""Tests for sweep verification, constant fitting and report serialization."""

import math

import numpy as np
import pytest

from fracgreen import harness as H
from fracgreen import kernels as K
from fracgreen.errors import FitError, SpecError


@pytest.fixture(scope="module")
def small_stable_report():
    grid = H.SweepGrid(
        t_values=(0.3, 1.0, 3.0),
        r_values=(0.0,) + tuple(np.geomspace(1e-4, 50.0, 18)),
        theorem="3.2",
    )
    return H.verify_envelope("3.2", K.IsotropicStable(1, 1.0), 0.5, grid=grid)


@pytest.fixture(scope="module")
def small_diffusion_report():
    grid = H.SweepGrid(
        t_values=(0.3, 1.0, 3.0),
        r_values=(0.0,) + tuple(np.geomspace(0.05, 30.0, 16)),
        theorem="3.1",
    )
    return H.verify_envelope("3.1", K.ConstantDiffusion(3), 0.5, grid=grid)


class TestFitConstants:
    def test_power_noiseless(self):
        x = np.geomspace(0.1, 10.0, 25)
        y = 2.0 * x**-3
        fr = H.fit_constants(x, y, model="power")
        assert fr.params["exponent"] == pytest.approx(-3.0, abs=1e-6)
        assert fr.params["prefactor"] == pytest.approx(2.0, rel=1e-6)
        assert fr.r_squared > 1.0 - 1e-12

    def test_power_plus_exponential_noiseless(self):
        x = np.geomspace(0.5, 20.0, 30)
        y = x**-1 * np.exp(-2.0 * x ** (2.0 / 3.0))
        fr = H.fit_constants(x, y, model="power_plus_exponential")
        assert fr.params["rate"] == pytest.approx(2.0, abs=1e-3)
        assert fr.params["q"] == pytest.approx(2.0 / 3.0, abs=1e-3)
        assert fr.params["exponent"] == pytest.approx(-1.0, abs=1e-3)

    def test_fixed_q(self):
        x = np.geomspace(0.5, 20.0, 30)
        y = 3.0 * x**0.5 * np.exp(-0.7 * x)
        fr = H.fit_constants(x, y, model="power_plus_exponential", q=1.0)
        assert fr.params["rate"] == pytest.approx(0.7, abs=1e-8)
        assert fr.params["exponent"] == pytest.approx(0.5, abs=1e-8)

    def test_insufficient_points(self):
        with pytest.raises(FitError):
            H.fit_constants([1, 2, 3], [1, 2, 3], model="power")

    def test_unknown_model(self):
        with pytest.raises(SpecError):
            H.fit_constants(np.ones(10), np.ones(10), model="cubic")


class TestDefaultGrid:
    def test_regime_coverage(self):
        grid = H.default_grid("3.1", K.ConstantDiffusion(2), 0.5)
        omegas = [
            r * r * t**-0.5 for t in grid.t_values for r in grid.r_values if r > 0
        ]
        assert min(omegas) < 1.0 < max(omegas)

    def test_local_needs_horizon(self):
        with pytest.raises(SpecError):
            H.default_grid("4.1", K.ConstantDiffusion(1), 0.5)

    def test_local_capped_at_horizon(self):
        fd = K.VariableDiffusion1D("one", horizon=0.7)
        grid = H.default_grid("4.1", fd, 0.5)
        assert max(grid.t_values) <= 0.7 * (1 + 1e-12)


class TestVerifyEnvelope:
    def test_stable_passes(self, small_stable_report):
        rep = small_stable_report
        assert rep.passed
        assert rep.flags["off_diagonal_slope"]
        got = rep.fits["off_diagonal_power"]["params"]["exponent"]
        assert got == pytest.approx(-2.0, abs=0.1)

    def test_diffusion_passes(self, small_diffusion_report):
        rep = small_diffusion_report
        assert rep.passed
        assert rep.fits["exponential_tail"]["r_squared"] >= 0.99
        assert rep.fits["exponential_tail"]["rate"] - rep.fits["exponential_tail"]["rate_conf95"] > 0

    def test_regime_stats_structure(self, small_stable_report):
        stats = small_stable_report.regime_stats
        assert set(stats) == {"on_diagonal", "off_diagonal"}
        for s in stats.values():
            assert s["spread"] < math.log(1e3)

    def test_per_side_rates_reported(self, small_diffusion_report):
        sides = small_diffusion_report.fits["per_side_rates"]
        assert sides["upper"] > 0 and sides["lower"] > 0

    def test_family_mismatch(self):
        with pytest.raises(SpecError):
            H.verify_envelope("3.1", K.IsotropicStable(1, 1.0), 0.5)

    def test_alpha2_excluded(self):
        with pytest.raises(SpecError):
            H.verify_envelope("3.2", K.IsotropicStable(1, 2.0), 0.5)

    def test_unknown_selector(self):
        with pytest.raises(SpecError):
            H.verify_envelope("9.9", K.ConstantDiffusion(1), 0.5)


class TestVerifyDerivative:
    def test_stable_one_sided(self):
        grid = H.SweepGrid(
            t_values=(0.5, 1.0, 2.0),
            r_values=(0.0,) + tuple(np.geomspace(0.03, 300.0, 18)),
            theorem="3.2",
            derivative_order=1,
        )
        rep = H.verify_derivative_envelope("prop3.2", K.IsotropicStable(1, 1.0), 0.5, k=1, grid=grid)
        assert rep.passed
        assert rep.one_sided
        assert np.isfinite(rep.fits["fitted_C"])
        got = rep.fits["off_diagonal_power"]["params"]["exponent"]
        assert got == pytest.approx(-3.0, abs=0.15)

    def test_diagonal_column_flagged_not_failed(self):
        grid = H.SweepGrid(
            t_values=(1.0,),
            r_values=(0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0),
            theorem="3.1",
            derivative_order=1,
        )
        rep = H.verify_derivative_envelope("prop3.1", K.ConstantDiffusion(1), 0.5, k=1, grid=grid)
        diag = [p for p in rep.points if p["r"] == 0.0]
        assert all(p["flag"].startswith("skipped") for p in diag)
        assert rep.flags["fitted_constant_finite"]

    def test_small_time_prop_regime_split(self):
        grid = H.SweepGrid(
            t_values=(0.5,),
            r_values=tuple(np.geomspace(0.05, 12.0, 14)),
            theorem="3.2",
            derivative_order=1,
        )
        rep = H.verify_derivative_envelope(
            "prop4.3-small", K.IsotropicStable(1, 1.0), 0.5, k=1, grid=grid, horizon=1.0
        )
        regimes = {p["regime"] for p in rep.points if p["flag"] == "ok"}
        assert "far_tail" in regimes or "intermediate" in regimes

    def test_unknown_prop(self):
        with pytest.raises(SpecError):
            H.verify_derivative_envelope("prop7", K.ConstantDiffusion(1), 0.5)


class TestReports:
    def test_json_roundtrip(self, small_stable_report):
        # NaN-valued flagged points make dict equality useless; the
        # serialized text itself must be reproduced exactly
        text = H.report_to_json(small_stable_report)
        back = H.report_from_json(text)
        assert H.report_to_json(back) == text

    def test_idempotent_serialization(self, small_stable_report):
        grid = H.SweepGrid(
            t_values=(0.3, 1.0, 3.0),
            r_values=(0.0,) + tuple(np.geomspace(1e-4, 50.0, 18)),
            theorem="3.2",
        )
        rerun = H.verify_envelope("3.2", K.IsotropicStable(1, 1.0), 0.5, grid=grid)
        assert H.report_to_json(rerun) == H.report_to_json(small_stable_report)

    def test_file_emission(self, small_stable_report, tmp_path):
        jp = tmp_path / "report.json"
        cp = tmp_path / "report.csv"
        H.write_report_files(small_stable_report, jp, cp)
        back = H.report_from_json(jp.read_text())
        assert back.passed == small_stable_report.passed
        lines = cp.read_text().strip().splitlines()
        assert lines[0] == ",".join(H.CSV_COLUMNS)
        assert len(lines) - 1 == len(small_stable_report.points)


class TestCrossTheorem:
    def test_41_reduces_to_31(self):
        fd = K.VariableDiffusion1D("one", horizon=1.0)
        grid = H.SweepGrid(
            t_values=(0.2, 0.6, 1.0),
            r_values=(0.0,) + tuple(np.geomspace(0.05, 4.0, 10)),
            theorem="4.1",
        )
        rep41 = H.verify_envelope("4.1", fd, 0.5, grid=grid)
        rep31 = H.verify_envelope("3.1", K.ConstantDiffusion(1), 0.5, grid=grid)
        assert rep41.passed
        diffs = [
            abs(p1["log_G"] - p2["log_G"])
            for p1, p2 in zip(rep41.points, rep31.points)
            if p1["flag"] == "ok" == p2["flag"]
        ]
        assert diffs and max(diffs) < 2e-3
