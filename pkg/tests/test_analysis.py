import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import C_REF, GAMMA_C_REF, GAMMA_L_REF, max_growth_oracle, threshold_scan_oracle
from ptcircuit.analysis import (EpMethod, Source, default_grid, gap_slope_vs_gamma_l, golden_section,
                                growth_threshold, locate_ep, max_growth_rate, min_real_gap, real_gap, sweep_gamma,
                                track_branches)
from ptcircuit.dynamics import IntegratorConfig
from ptcircuit.errors import DomainError, NotFoundError
from ptcircuit.io import SWEEP_HEADER, format_sweep
from ptcircuit.spectra import ep_lossless

GAMMA_L_VALUES = (0.02, 0.04, 0.0738, 0.1)


@pytest.fixture(scope="module")
def lossless_sweep():
    return sweep_gamma(C_REF, 0.0)


@pytest.fixture(scope="module")
def lossy_sweep():
    return sweep_gamma(C_REF, GAMMA_L_REF)


class TestSweep:
    def test_lossless_phases(self, lossless_sweep):
        below = lossless_sweep.grid < GAMMA_C_REF
        wi = lossless_sweep.branches.imag
        assert np.all(np.abs(wi[below]) < 1e-12)
        above = lossless_sweep.grid > GAMMA_C_REF + 1e-3
        assert np.all(np.abs(wi[above, 0]) > 0.01)
        np.testing.assert_allclose(wi[above, 1], -wi[above, 0], atol=1e-12)

    def test_lossy_gap_stays_open(self, lossy_sweep):
        assert np.min(lossy_sweep.real_gaps) > 0
        assert min_real_gap(lossy_sweep)[1] > 0

    def test_shapes(self, lossy_sweep):
        n = len(default_grid())
        assert lossy_sweep.grid.shape == (n,)
        assert len(lossy_sweep.spectra) == len(lossy_sweep.coalescence) == n
        assert lossy_sweep.branches.shape == (n, 2)
        assert lossy_sweep.source is Source.DIRECT_EIGEN

    @pytest.mark.parametrize("gamma_l", [0.0, GAMMA_L_REF])
    def test_branches_continuous(self, gamma_l):
        assert sweep_gamma(C_REF, gamma_l).continuity_flags == []

    def test_tracking_flags_a_jump(self):
        grid = np.linspace(0.1, 0.2, 6)
        pos = [(1.0 - 0.01 * i, 0.8 + 0.01 * i) for i in range(6)]
        pos[4] = (0.5, pos[4][1])
        _, flags = track_branches(grid, np.array(pos, dtype=complex))
        assert flags and flags[0][0] == 4

    def test_tracking_undoes_label_swaps(self):
        grid = np.linspace(0.0, 1.0, 11)
        a = 0.9 + 0.01j * grid
        b = 0.8 - 0.01j * grid
        pos = np.column_stack([a, b])
        pos[[3, 4, 8]] = pos[[3, 4, 8]][:, ::-1]
        tracked, flags = track_branches(grid, pos)
        assert not flags
        np.testing.assert_allclose(tracked[:, 0], a)

    def test_time_domain_matches_direct(self):
        grid = [0.0815]
        td = sweep_gamma(C_REF, GAMMA_L_REF, grid, source=Source.TIME_DOMAIN)
        direct = sweep_gamma(C_REF, GAMMA_L_REF, grid)
        assert td.estimates[0].frequencies == pytest.approx(list(direct.branches[0].real), abs=2e-3)

    def test_time_domain_overflow_recorded(self):
        cfg = IntegratorConfig(dt=0.05, t_end=3000.0)
        sweep = sweep_gamma(C_REF, GAMMA_L_REF, [0.0815, 1.0], source=Source.TIME_DOMAIN, config=cfg)
        assert sweep.estimates[0] is not None
        assert sweep.estimates[1] is None
        assert "1e+300" in sweep.failures[1]

    def test_empty_grid(self):
        sweep = sweep_gamma(C_REF, GAMMA_L_REF, [])
        assert len(sweep.grid) == 0

    @pytest.mark.parametrize("grid", [[0.2, 0.1], [0.0, 0.1], [0.1, 5.5], [[0.1, 0.2]]])
    def test_bad_grid(self, grid):
        with pytest.raises(DomainError):
            sweep_gamma(C_REF, GAMMA_L_REF, grid)

    def test_output_format(self, lossy_sweep):
        lines = format_sweep(lossy_sweep).splitlines()
        assert lines[0] == ",".join(SWEEP_HEADER)
        assert len(lines) == len(lossy_sweep.grid) + 1
        row = [float(x) for x in lines[1].split(",")]
        assert row[0] == lossy_sweep.grid[0]
        assert row[5] == pytest.approx(abs(row[1] - row[3]), abs=1e-15)


class TestGap:
    def test_lossless_closes_at_ep(self, lossless_sweep):
        g, gap = min_real_gap(lossless_sweep)
        assert g == pytest.approx(GAMMA_C_REF, abs=1e-6)
        assert gap < 1e-8

    @pytest.mark.parametrize("c", [0.05, 0.2, 0.5, 1.0, 2.0])
    def test_lossless_closes_for_any_coupling(self, c):
        gc = ep_lossless(c)[0]
        g, gap = min_real_gap(sweep_gamma(c, 0.0, np.linspace(0.25 * gc, 2.5 * gc, 200), with_vectors=False))
        assert gap < 1e-8
        assert g == pytest.approx(gc, abs=1e-6)

    def test_lossy_gap_value(self, lossy_sweep):
        assert min_real_gap(lossy_sweep)[1] == pytest.approx(0.23 * GAMMA_L_REF, rel=0.2)

    def test_gap_doubles_with_loss(self, lossy_sweep):
        single = min_real_gap(lossy_sweep)[1]
        double = min_real_gap(sweep_gamma(C_REF, 2 * GAMMA_L_REF, with_vectors=False))[1]
        assert double / single == pytest.approx(2.0, rel=0.2)

    def test_gap_increases_with_loss(self):
        gaps = [min_real_gap(sweep_gamma(C_REF, gl, with_vectors=False))[1] for gl in np.linspace(0.01, 0.2, 8)]
        assert np.all(np.diff(gaps) > 0)

    def test_refinement_beats_grid(self, lossy_sweep):
        g, gap = min_real_gap(lossy_sweep)
        assert gap <= np.min(lossy_sweep.real_gaps)
        assert real_gap(C_REF, g, GAMMA_L_REF) == gap

    def test_needs_direct_sweep(self):
        sweep = sweep_gamma(C_REF, GAMMA_L_REF, [0.0815], source=Source.TIME_DOMAIN)
        with pytest.raises(DomainError):
            min_real_gap(sweep)

    def test_golden_section(self):
        x, fx, _ = golden_section(lambda t: abs(t - 0.3) + 1, 0.0, 1.0, xtol=1e-10)
        assert x == pytest.approx(0.3, abs=1e-10)
        assert fx == pytest.approx(1.0)


class TestGapSlope:
    @pytest.fixture(scope="class")
    @staticmethod
    def fit():
        return gap_slope_vs_gamma_l(C_REF, GAMMA_L_VALUES)

    def test_slope(self, fit):
        assert fit.slope == pytest.approx(0.23, abs=0.05)
        assert fit.residual < 1e-3 * fit.slope

    def test_grid_refinement(self, fit):
        fine = gap_slope_vs_gamma_l(C_REF, GAMMA_L_VALUES, default_grid(count=800))
        assert fine.slope == pytest.approx(fit.slope, rel=0.02)

    @pytest.mark.parametrize("values", [(0.0, 0.0, 0.0, 0.0), (0.02, 0.04, 0.1), (0.1, 0.04, 0.02, 0.2)])
    def test_rejected(self, values):
        with pytest.raises(DomainError):
            gap_slope_vs_gamma_l(C_REF, values)


class TestLocateEp:
    def test_lossless(self):
        res = locate_ep(C_REF, 0.0)
        assert res.method is EpMethod.DISCRIMINANT
        assert res.gamma_star == pytest.approx(GAMMA_C_REF, abs=1e-12)
        assert 0 <= res.min_gap < 1e-8

    def test_lossy_avoided_crossing(self):
        res = locate_ep(C_REF, GAMMA_L_REF)
        assert res.method is EpMethod.GOLDEN_SECTION
        assert res.min_gap > 0.01
        assert res.iterations > 0

    def test_weak_coupling_limit(self):
        assert locate_ep(1e-8, 0.0).gamma_star < 1e-7

    @pytest.mark.parametrize("c, gamma_l", [(0.0, 0.0), (-0.1, 0.0), (0.3, -0.01)])
    def test_domain(self, c, gamma_l):
        with pytest.raises(DomainError):
            locate_ep(c, gamma_l)


def threshold_oracle(c, gamma_l):
    """Root of the largest imaginary part by brentq on a LAPACK eigensolve."""
    gc = math.sqrt(1 + 2 * c) - 1
    return brentq(lambda g: max_growth_oracle(c, g, gamma_l), 0.5 * gc, 2 * gc, xtol=1e-13)


class TestGrowthThreshold:
    def test_reference(self):
        th = growth_threshold(C_REF, GAMMA_L_REF)
        assert GAMMA_C_REF < th < GAMMA_C_REF + 0.05
        assert th == pytest.approx(threshold_scan_oracle(C_REF, GAMMA_L_REF), abs=2e-4)
        assert th == pytest.approx(threshold_oracle(C_REF, GAMMA_L_REF), abs=1e-10)

    def test_separates_decay_from_growth(self):
        th = growth_threshold(C_REF, GAMMA_L_REF)
        assert max_growth_rate(C_REF, th - 1e-6, GAMMA_L_REF) < 0 < max_growth_rate(C_REF, th + 1e-6, GAMMA_L_REF)
        assert max_growth_rate(C_REF, 0.3133, GAMMA_L_REF) > 0

    @pytest.mark.parametrize("gamma_l", [1e-4, 0.01, 0.03, 0.1, 0.2])
    def test_matches_oracle(self, gamma_l):
        assert growth_threshold(C_REF, gamma_l) == pytest.approx(threshold_oracle(C_REF, gamma_l), abs=1e-10)

    def test_monotone_in_loss(self):
        th = [growth_threshold(C_REF, gl) for gl in (1e-4, 0.01, 0.02, 0.03, 0.05, 0.0738, 0.1, 0.2)]
        assert np.all(np.diff(th) > 0)

    def test_small_loss_limit_lies_below_ep(self):
        # weak inductor loss lets the gain side win slightly before the lossless EP
        th = growth_threshold(C_REF, 1e-6)
        assert th == pytest.approx(threshold_oracle(C_REF, 1e-6), abs=1e-9)
        assert th < GAMMA_C_REF

    @pytest.mark.parametrize("gamma_l", [0.03, 0.05, 0.0738, 0.1, 0.2])
    def test_above_ep_for_moderate_loss(self, gamma_l):
        assert growth_threshold(C_REF, gamma_l) > GAMMA_C_REF

    def test_not_found(self):
        with pytest.raises(NotFoundError, match="no growth onset"):
            growth_threshold(C_REF, 0.5)

    def test_needs_loss(self):
        with pytest.raises(DomainError):
            growth_threshold(C_REF, 0.0)
