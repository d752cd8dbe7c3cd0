import dataclasses
from dataclasses import dataclass

import numpy as np
import pytest

from conftest import gaussian_amplitude
from homspec.biphoton import DeltaAmplitude
from homspec.model import ExcitonSystem, Level, LiouvilleOperatorSet
from homspec.pathways import HomSpec, term_table
from homspec.signal import (QuadratureSpec, SignalGrid, coincidence,
                            coincidence_short_Te, coincidence_terms,
                            default_quadrature, pathway_probabilities,
                            reference_time, scan, short_te_terms, system_hash,
                            term_value)


@dataclass(frozen=True)
class GaussLine:
    """Normalized narrow ridge: a smooth stand-in for the discrete delta."""

    s: float
    sigma: float

    def time_value(self, x, y):
        u = np.asarray(x) - np.asarray(y) - self.s
        return np.exp(-u ** 2 / (2 * self.sigma ** 2)) / (self.sigma * np.sqrt(2 * np.pi))

    def time_support(self, rel_eps=1e-6):
        return None


@pytest.fixture(scope="module")
def slow_ladder():
    system = ExcitonSystem(
        levels=[Level("g0", "g", 0.0), Level("e0", "e", 0.9),
                Level("f0", "f", 1.75)],
        dipoles_ge=[[1.0]], dipoles_ef=[[0.8]], dephasing_default=0.08)
    return LiouvilleOperatorSet(system)


@pytest.fixture(scope="module")
def quad(slow_ladder):
    q = QuadratureSpec(cutoff=130.0, step=0.1, rule="trapezoid", t_ref=0.0)
    q.validate(slow_ladder)
    return q


TABLE = {(t.detection, t.interaction): t for t in term_table()}


class TestQuadratureSpec:
    def test_rejects_bad_rule(self):
        with pytest.raises(ValueError):
            QuadratureSpec(cutoff=10.0, step=0.1, rule="midpoint")

    def test_validate_cutoff(self, slow_ladder):
        q = QuadratureSpec(cutoff=5.0, step=0.1)
        with pytest.raises(ValueError, match="cutoff"):
            q.validate(slow_ladder)

    def test_validate_step(self, slow_ladder):
        q = QuadratureSpec(cutoff=200.0, step=1.0)
        with pytest.raises(ValueError, match="step"):
            q.validate(slow_ladder)

    def test_default_quadrature(self, slow_ladder):
        amp = gaussian_amplitude()
        q = default_quadrature(slow_ladder, amp)
        assert q.cutoff >= 10.0 / slow_ladder.eta.min()
        assert q.step <= 0.1 * 2 * np.pi / 1.75


class TestTermValue:
    def test_causally_dead_term(self, slow_ladder, quad):
        # detector difference negative: the first correlator argument of the
        # direct rows is negative over the whole domain
        amp = GaussLine(s=3.0, sigma=0.3)
        assert term_value(TABLE[("I", 1)], -5.0, 2.0, 3.0, amp, slow_ladder,
                          quad) == 0

    def test_narrow_ridge_reproduces_closed_form_windows(self, slow_ladder, quad):
        # each exchange row collapses onto its closed-form value inside its
        # own (tau, T, s) window and vanishes in the others
        cases = [
            (("III", 1), (0.0, 8.0, 6.0),
             lambda e: complex(e[1].evaluate(8.0, 2.0, 4.0))),
            (("III", 2), (0.0, 3.0, 4.0),
             lambda e: complex(e[2].evaluate(2.0, 1.0, 4.0))),
            (("III", 3), (0.0, 14.0, 5.0),
             lambda e: complex(e[3].evaluate(14.0, 5.0, 4.0))),
            (("IV", 3), (2.0, 3.0, 10.0),
             lambda e: complex(e[3].evaluate(5.0, 2.0, 5.0))),
        ]
        exps = {i: slow_ladder.expansion(i) for i in (1, 2, 3)}
        for key, (tau, T, s), expected_fn in cases:
            amp = GaussLine(s=s, sigma=0.1)
            got = term_value(TABLE[key], tau, T, s, amp, slow_ladder, quad)
            want = expected_fn(exps)
            assert abs(got - want) < 0.02 * abs(want), (key, got, want)
        # off-window rows vanish identically
        amp = GaussLine(s=6.0, sigma=0.1)
        for key in (("III", 2), ("III", 3), ("IV", 3)):
            assert abs(term_value(TABLE[key], 0.0, 8.0, 6.0, amp, slow_ladder,
                                  quad)) < 1e-10

    def test_direct_bracket_row_fires_only_on_ridge(self, slow_ladder, quad):
        # the reflected-channel pathway-5 row carries the surviving direct
        # delta term: it needs tau = s on the lattice
        damp = DeltaAmplitude(s=4.0, spacing=0.4)
        on = term_value(TABLE[("II", 5)], 4.0, 3.0, 4.0, damp, slow_ladder, quad)
        off = term_value(TABLE[("II", 5)], 2.5, 3.0, 4.0, damp, slow_ladder, quad)
        assert abs(on) > 1e-6
        assert off == 0

    def test_simpson_close_to_trapezoid(self, slow_ladder, quad):
        amp = GaussLine(s=4.0, sigma=0.2)
        qs = dataclasses.replace(quad, rule="simpson")
        a = term_value(TABLE[("III", 1)], 1.0, 5.0, 4.0, amp, slow_ladder, quad)
        b = term_value(TABLE[("III", 1)], 1.0, 5.0, 4.0, amp, slow_ladder, qs)
        assert abs(a - b) < 5e-3 * abs(a)


class TestCoincidence:
    def test_zero_dipoles(self, quad):
        system = ExcitonSystem(
            levels=[Level("g0", "g", 0.0), Level("e0", "e", 0.9)],
            dipoles_ge=[[0.0]], dephasing_default=0.08)
        ops = LiouvilleOperatorSet(system)
        amp = GaussLine(s=3.0, sigma=0.3)
        assert coincidence(1.0, 2.0, 3.0, amp, ops, quad) == 0

    def test_bs_removed_delta_vanishes_off_ridge(self, slow_ladder, quad):
        damp = DeltaAmplitude(s=4.0, spacing=0.4)
        assert coincidence(2.0, 3.0, 4.0, damp, slow_ladder, quad,
                           bs_removed=True) == 0

    def test_full_matches_closed_form_in_narrow_limit(self, slow_ladder, quad):
        hom = HomSpec(T=8.0)
        for tau, T, s in [(0.0, 8.0, 6.0), (2.0, 5.0, 4.0), (1.0, 9.0, 7.0)]:
            full = coincidence(tau, T, s, GaussLine(s=s, sigma=0.1),
                               slow_ladder, quad, hom=HomSpec(T=T))
            short = coincidence_short_Te(tau, T, s, slow_ladder, quad,
                                         hom=HomSpec(T=T))
            assert abs(full - short) < 0.02 * abs(short)

    def test_output_is_real_float(self, slow_ladder, quad):
        val = coincidence(1.0, 5.0, 4.0, GaussLine(s=4.0, sigma=0.2),
                          slow_ladder, quad)
        assert isinstance(val, float)

    def test_terms_keyed_by_detection_and_pathway(self, slow_ladder, quad):
        vals = coincidence_terms(1.0, 5.0, 4.0, GaussLine(s=4.0, sigma=0.2),
                                 slow_ladder, quad)
        assert set(vals) == {(nu, i) for nu in ("I", "II", "III", "IV")
                             for i in range(1, 6)}


class TestShortTe:
    def test_domain_errors(self, slow_ladder, quad):
        with pytest.raises(ValueError, match="s >= 0"):
            coincidence_short_Te(1.0, 2.0, -1.0, slow_ladder, quad)
        with pytest.raises(ValueError, match="tau >= -T"):
            coincidence_short_Te(-5.0, 2.0, 1.0, slow_ladder, quad)

    def test_window_selectivity_at_zero_detector_difference(self, slow_ladder, quad):
        # three (s, T) windows: in each, exactly one term survives
        windows = {
            "F1": (0.0, 8.0, 6.0),    # s < T < 2s
            "F2": (0.0, 3.0, 4.0),    # s/2 < T < s
            "F3a": (0.0, 14.0, 5.0),  # 2s < T
        }
        for survivor, (tau, T, s) in windows.items():
            vals = short_te_terms(tau, T, s, slow_ladder, quad)
            assert vals[survivor] != 0
            for name, v in vals.items():
                if name != survivor:
                    assert v == 0, (survivor, name, v)

    def test_s_zero_isolates_single_term(self, slow_ladder, quad):
        for tau, T in [(0.5, 4.0), (2.0, 6.0), (-1.0, 3.0)]:
            vals = short_te_terms(tau, T, 0.0, slow_ladder, quad)
            expected = -complex(slow_ladder.expansion(3).evaluate(T, tau, T))
            assert vals["F3a"] == expected
            assert all(v == 0 for name, v in vals.items() if name != "F3a")

    def test_delta_gated_line_terms(self, slow_ladder, quad):
        vals = short_te_terms(3.0, 5.0, 3.0, slow_ladder, quad)
        assert vals["F5_direct"] != 0
        vals2 = short_te_terms(1.0, 2.0, 5.0, slow_ladder, quad)  # 2T+tau = s
        assert vals2["F5_exchange"] != 0
        vals3 = short_te_terms(1.0, 5.0, 3.0, slow_ladder, quad)
        assert vals3["F5_direct"] == 0 and vals3["F5_exchange"] == 0


@pytest.fixture(scope="module")
def small_setup():
    system = ExcitonSystem(
        levels=[Level("g0", "g", 0.0), Level("e0", "e", 0.8)],
        dipoles_ge=[[1.0]], dephasing_default=0.25)
    ops = LiouvilleOperatorSet(system)
    amp = gaussian_amplitude(center=0.4, sigma_sum=0.3, sigma_diff=0.5,
                             n=128, half_span=1.6)
    q = QuadratureSpec(cutoff=48.0, step=0.4, rule="trapezoid",
                       t_ref=reference_time(amp))
    q.validate(ops)
    return ops, amp, q


class TestScan:

    def test_single_point_matches_pointwise(self, small_setup):
        ops, amp, q = small_setup
        grid = scan([1.0], [2.0], [3.0], "full", amp, ops, q)
        direct = coincidence(1.0, 2.0, 3.0, amp, ops, q, hom=HomSpec(T=2.0))
        assert grid.values[0, 0, 0] == direct

    def test_empty_axis(self, small_setup):
        ops, amp, q = small_setup
        grid = scan([], [1.0], [2.0], "full", amp, ops, q)
        assert grid.values.size == 0

    def test_monotonicity_enforced(self, small_setup):
        ops, amp, q = small_setup
        with pytest.raises(ValueError, match="monotone"):
            scan([1.0, 0.5, 2.0], [1.0], [2.0], "full", amp, ops, q)

    def test_deterministic_across_worker_counts(self, small_setup):
        ops, amp, q = small_setup
        grids = [scan([0.0, 1.0, 2.0], [1.0, 3.0], [2.0], "full", amp, ops, q,
                      workers=w) for w in (1, 3)]
        assert grids[0].serialize() == grids[1].serialize()

    def test_short_te_domain_violation_names_point(self, small_setup):
        ops, amp, q = small_setup
        with pytest.raises(ValueError, match=r"s > 0.*s=0\.0"):
            scan([1.0], [2.0], [0.0], "short_Te", amp, ops, q)

    def test_bs_removed_mode_drops_exchange_terms(self, small_setup):
        ops, amp, q = small_setup
        vals = coincidence_terms(1.0, 2.0, 3.0, amp, ops, q, bs_removed=True)
        assert all(nu == "I" for nu, _ in vals)


class TestSignalGrid:
    def test_roundtrip_bit_exact(self, tmp_path, small_grid=None):
        rng = np.random.default_rng(1)
        grid = SignalGrid(
            tau_values=np.array([0.0, 1.0, 2.5]),
            T_values=np.array([1.0, 2.0]),
            s_values=np.array([3.0]),
            values=rng.normal(size=(3, 2, 1)),
            mode="full",
            meta={"system_hash": "abc123", "quadrature": "cutoff=1 step=0.1"},
        )
        path = tmp_path / "grid.dat"
        grid.save(path)
        loaded = SignalGrid.load(path)
        assert loaded.serialize() == grid.serialize()
        assert path.read_text() == loaded.serialize()
        assert loaded.mode == "full"
        assert loaded.meta["system_hash"] == "abc123"

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            SignalGrid(np.array([0.0]), np.array([0.0]), np.array([0.0]),
                       np.array([[[np.nan]]]), "full")


class TestPathwayProbabilities:
    def test_valid_distribution(self, slow_ladder, quad):
        p = pathway_probabilities(1.0, 5.0, 4.0, GaussLine(s=4.0, sigma=0.2),
                                  slow_ladder, quad)
        assert p.shape == (5,)
        assert np.all(p >= 0)
        assert p.sum() == pytest.approx(1.0)

    def test_custom_weighting(self, slow_ladder, quad):
        def flat(vals):
            return np.ones(5)

        p = pathway_probabilities(1.0, 5.0, 4.0, GaussLine(s=4.0, sigma=0.2),
                                  slow_ladder, quad, weighting=flat)
        assert np.allclose(p, 0.2)


def test_system_hash_stable(slow_ladder):
    assert system_hash(slow_ladder) == system_hash(slow_ladder)
