import math

import numpy as np
import pytest
from scipy.interpolate import interp1d

import tempdet as td
from tempdet import InputError

from _fixtures import PLANTED_ALPHA, PLANTED_BETA, make_planted_grids


def small_grid(cid="c1", m=256, cn=10, csg=2.5, temps=(1.0, 4.0, 16.0),
               accs=(10.0, 30.0, 20.0)):
    samples = tuple((t, a, 0) for t, a in zip(temps, accs))
    return td.ConditionGrid(condition_id=cid, m=m, cn=cn, csg=csg,
                            samples=samples)


class TestConditionGrid:
    def test_validation(self):
        with pytest.raises(InputError):
            small_grid(cid="")
        with pytest.raises(InputError):
            small_grid(m=0)
        with pytest.raises(InputError):
            small_grid(cn=1)
        with pytest.raises(InputError):
            small_grid(csg=0.0)
        with pytest.raises(InputError):
            small_grid(temps=(1.0, -2.0, 4.0))
        with pytest.raises(InputError):
            small_grid(accs=(10.0, 101.0, 20.0))
        with pytest.raises(InputError):
            td.ConditionGrid(condition_id="c", m=4, cn=2, csg=None, samples=())

    def test_csg_none_allowed(self):
        grid = small_grid(csg=None)
        assert grid.task().csg is None


class TestInterpolant:
    def test_hand_midpoint(self):
        interp = td.build_interpolant(small_grid(temps=(1.0, 4.0),
                                                 accs=(10.0, 30.0)))
        # log2 space: knots at 0 and 2, query at 1.
        assert interp(2.0) == 20.0
        assert interp(1.0) == 10.0 and interp(4.0) == 30.0

    def test_clamped_extrapolation(self):
        interp = td.build_interpolant(small_grid())
        assert interp(0.125) == 10.0
        assert interp(500.0) == 20.0

    def test_matches_reference_interpolator(self):
        grid = small_grid(temps=(0.5, 1.0, 3.0, 8.0, 64.0),
                          accs=(5.0, 12.0, 40.0, 33.0, 8.0))
        interp = td.build_interpolant(grid)
        ref = interp1d(np.log2([0.5, 1.0, 3.0, 8.0, 64.0]),
                       [5.0, 12.0, 40.0, 33.0, 8.0],
                       bounds_error=False, fill_value=(5.0, 8.0))
        queries = np.concatenate([np.logspace(-2, 7, 200, base=2.0),
                                  [0.5, 1.0, 3.0, 8.0, 64.0]])
        np.testing.assert_allclose(interp(queries), ref(np.log2(queries)),
                                   rtol=1e-12, atol=1e-12)

    def test_unsorted_input_sorted_internally(self):
        grid = small_grid(temps=(16.0, 1.0, 4.0), accs=(20.0, 10.0, 30.0))
        interp = td.build_interpolant(grid)
        assert interp(1.0) == 10.0 and interp(16.0) == 20.0

    def test_aggregation_mean_vs_median(self):
        samples = ((2.0, 10.0, 0), (2.0, 20.0, 1), (2.0, 60.0, 2),
                   (8.0, 50.0, 0))
        grid = td.ConditionGrid(condition_id="agg", m=4, cn=2, csg=None,
                                samples=samples)
        assert td.build_interpolant(grid, aggregate="mean")(2.0) == 30.0
        assert td.build_interpolant(grid, aggregate="median")(2.0) == 20.0

    def test_errors(self):
        single = td.ConditionGrid(condition_id="single", m=4, cn=2, csg=None,
                                  samples=((2.0, 10.0, 0), (2.0, 20.0, 1)))
        with pytest.raises(InputError):
            td.build_interpolant(single)
        with pytest.raises(InputError):
            td.build_interpolant(small_grid(), aggregate="max")
        interp = td.build_interpolant(small_grid())
        with pytest.raises(InputError):
            interp(0.0)
        with pytest.raises(InputError):
            interp(float("nan"))


class TestObjective:
    def test_hand_value(self):
        # alpha=0: the estimate is the clipped beta for every condition.
        coeffs = td.TemperatureCoefficients(alpha=0.0, beta=2.0)
        g1 = small_grid("a", temps=(1.0, 4.0), accs=(10.0, 30.0))
        g2 = small_grid("b", temps=(1.0, 4.0), accs=(0.0, 40.0))
        got = td.objective(coeffs, [g1, g2], "plain")
        assert got == 20.0 + 20.0

    def test_empty_errors(self):
        with pytest.raises(InputError):
            td.objective(td.TemperatureCoefficients(1.0, 0.0), [], "plain")


class TestDifferentialEvolution:
    def test_recovers_quadratic_peak(self):
        target = np.array([2.0, -5.0])

        def score(x):
            return -float(((x - target) ** 2).sum())

        bounds = np.array([[0.0, 16.0], [-128.0, 128.0]])
        settings = td.DifferentialEvolutionSettings(seed=3)
        result = td.differential_evolution(score, bounds, settings,
                                           np.random.default_rng(3))
        np.testing.assert_allclose(result.best, target, atol=1e-3)
        assert result.converged

    def test_trace_nondecreasing_and_counts(self):
        def score(x):
            return -float((x * x).sum())

        bounds = np.array([[-4.0, 4.0]])
        settings = td.DifferentialEvolutionSettings(seed=1, max_generations=60,
                                                    stall_generations=100)
        result = td.differential_evolution(score, bounds, settings,
                                           np.random.default_rng(1))
        trace = np.array(result.trace)
        assert np.all(np.diff(trace) >= 0)
        assert result.generations == 60 and not result.converged
        pop = settings.population_multiplier * 1
        assert result.evaluations == pop * (1 + result.generations)
        assert result.best_value >= result.initial_best_value

    def test_deterministic_given_rng(self):
        def score(x):
            return float(np.sin(x).sum())

        bounds = np.array([[0.0, 6.0], [0.0, 6.0]])
        settings = td.DifferentialEvolutionSettings(seed=0, max_generations=40,
                                                    stall_generations=100)
        a = td.differential_evolution(score, bounds, settings,
                                      np.random.default_rng(7))
        b = td.differential_evolution(score, bounds, settings,
                                      np.random.default_rng(7))
        np.testing.assert_array_equal(a.best, b.best)
        assert a.trace == b.trace

    def test_settings_validation(self):
        with pytest.raises(InputError):
            td.DifferentialEvolutionSettings(population_multiplier=1)
        with pytest.raises(InputError):
            td.DifferentialEvolutionSettings(mutation=0.0)
        with pytest.raises(InputError):
            td.DifferentialEvolutionSettings(crossover=1.5)
        with pytest.raises(InputError):
            td.DifferentialEvolutionSettings(max_generations=0)
        with pytest.raises(InputError):
            td.DifferentialEvolutionSettings(tolerance=-1e-9)


class TestFit:
    def test_recovers_planted_coefficients(self):
        grids = make_planted_grids()
        spec = td.FitSpec(variant="plain",
                          de=td.DifferentialEvolutionSettings(seed=0))
        result = td.fit(grids, spec)
        assert abs(result.coefficients.alpha - PLANTED_ALPHA) <= 0.05 * PLANTED_ALPHA
        assert abs(result.coefficients.beta - PLANTED_BETA) <= 0.05 * PLANTED_BETA
        assert result.objective_value >= result.diagnostics["initial_best_objective"]
        assert result.diagnostics["conditions"] == [g.condition_id for g in grids]
        assert result.variant == "plain"
        assert result.coefficients.gamma == 0.0
        assert result.coefficients.delta == 0.0

    def test_diagnostics_keys(self):
        grids = make_planted_grids(knots_per_octave=2)
        spec = td.FitSpec(variant="plain",
                          de=td.DifferentialEvolutionSettings(
                              seed=0, max_generations=20,
                              stall_generations=100))
        diag = td.fit(grids, spec).diagnostics
        for key in ("mode", "variant", "aggregate", "generations",
                    "evaluations", "converged", "stagnated",
                    "initial_best_objective", "trace", "conditions"):
            assert key in diag
        assert diag["mode"] == "global"
        assert len(diag["trace"]) == diag["generations"] + 1

    def test_cross_validated_folds(self):
        grids = make_planted_grids(knots_per_octave=2)[:3]
        settings = td.DifferentialEvolutionSettings(seed=5, max_generations=30,
                                                    stall_generations=100)
        cv = td.fit(grids, td.FitSpec(variant="plain",
                                      mode="cross-validated", de=settings))
        folds = cv.diagnostics["folds"]
        assert [f["held_out"] for f in folds] == [g.condition_id for g in grids]
        for fold in folds:
            assert set(fold["coefficients"]) == {"alpha", "beta"}
            assert 0.0 <= fold["held_out_accuracy"] <= 100.0
            assert fold["held_out_temperature"] > 0
        # Returned coefficients come from the all-conditions fit.
        whole = td.fit(grids, td.FitSpec(variant="plain", de=settings))
        assert cv.coefficients == whole.coefficients

    def test_variant_requires_csg(self):
        grid = small_grid(csg=None)
        other = small_grid(cid="c2", csg=None)
        with pytest.raises(InputError, match="csg"):
            td.fit([grid, other], td.FitSpec(variant="csg"))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(InputError, match="unique"):
            td.fit([small_grid(), small_grid()], td.FitSpec(variant="plain"))

    def test_cross_validation_needs_two(self):
        with pytest.raises(InputError):
            td.fit([small_grid()], td.FitSpec(variant="plain",
                                              mode="cross-validated"))

    def test_spec_validation(self):
        with pytest.raises(InputError):
            td.FitSpec(variant="nope")
        with pytest.raises(InputError):
            td.FitSpec(variant="plain", mode="bootstrap")
        with pytest.raises(InputError):
            td.FitSpec(variant="plain", bounds={"alpha": (3.0, 3.0)})
        with pytest.raises(InputError):
            td.FitSpec(variant="plain", bounds={"rho": (0.0, 1.0)})

    def test_bounds_respected(self):
        grids = make_planted_grids(knots_per_octave=2)
        spec = td.FitSpec(variant="plain",
                          bounds={"alpha": (2.0, 4.0)},
                          de=td.DifferentialEvolutionSettings(
                              seed=0, max_generations=15,
                              stall_generations=100))
        result = td.fit(grids, spec)
        assert 2.0 <= result.coefficients.alpha <= 4.0


class TestStabilityReport:
    def test_hand_values(self):
        fits = [td.TemperatureCoefficients(alpha=1.0, beta=-2.0),
                td.TemperatureCoefficients(alpha=3.0, beta=-4.0)]
        report = td.coefficient_stability_report(fits)
        assert report["alpha"] == {"mean": 2.0, "sd": 1.0}
        assert report["beta"] == {"mean": -3.0, "sd": 1.0}
        assert report["gamma"] == {"mean": 0.0, "sd": 0.0}

    def test_needs_two(self):
        with pytest.raises(InputError):
            td.coefficient_stability_report(
                [td.TemperatureCoefficients(1.0, 0.0)])


class TestGridTable:
    HEADER = " ".join(td.GRID_COLUMNS)

    def test_round_trip(self, tmp_path):
        grids = [small_grid("cond-a", csg=3.85),
                 small_grid("cond-b", m=512, csg=None,
                            temps=(0.7, 2.9), accs=(11.25, 44.5))]
        path = str(tmp_path / "grid.txt")
        td.write_grid_file(path, grids)
        assert td.read_grid_file(path) == grids

    def test_comma_delimited_and_interleaved(self):
        text = (self.HEADER.replace(" ", ",") + "\n"
                "a,ds,net,64,2.5,10,1.0,10.0,0\n"
                "b,ds,net,128,-,5,1.0,20.0,0\n"
                "a,ds,net,64,2.5,10,4.0,30.0,0\n"
                "b,ds,net,128,nan,5,4.0,40.0,0\n")
        grids = td.parse_grid_table(text)
        assert [g.condition_id for g in grids] == ["a", "b"]
        assert grids[0].samples == ((1.0, 10.0, 0), (4.0, 30.0, 0))
        assert grids[1].csg is None

    def test_header_mismatch(self):
        with pytest.raises(InputError, match="header"):
            td.parse_grid_table("id dataset model m csg cn t acc seed\n")

    def test_field_count_error_names_line(self):
        text = self.HEADER + "\n" + "a ds net 64 2.5 10 1.0 10.0\n"
        with pytest.raises(InputError, match="line 2"):
            td.parse_grid_table(text)

    def test_descriptor_conflict(self):
        text = (self.HEADER + "\n"
                "a ds net 64 2.5 10 1.0 10.0 0\n"
                "a ds net 128 2.5 10 4.0 30.0 0\n")
        with pytest.raises(InputError, match="descriptors"):
            td.parse_grid_table(text)

    def test_bad_number_names_line(self):
        text = self.HEADER + "\n" + "a ds net sixty 2.5 10 1.0 10.0 0\n"
        with pytest.raises(InputError, match="line 2"):
            td.parse_grid_table(text)

    def test_empty(self):
        with pytest.raises(InputError, match="empty"):
            td.parse_grid_table("  \n")
