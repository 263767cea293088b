"""Fitting temperature-model coefficients to temperature/accuracy grids.

A condition is one (dataset, model) combination swept over a set of
training temperatures, each yielding a final accuracy. Accuracy between
swept temperatures is taken piecewise-linearly in log2(T); queries
outside the swept range clamp to the nearest endpoint. The fit searches
coefficient space with differential evolution (rand/1/bin), maximizing
the summed interpolated accuracy of the model's temperature picks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import median

import numpy as np

from . import _rand
from .coefficients import (
    CLIP_HI_DEFAULT,
    CLIP_LO_DEFAULT,
    COEFFICIENT_VARIANTS,
    TaskDescriptor,
    TemperatureCoefficients,
    estimate_temperature,
)
from .errors import InputError

GRID_COLUMNS = ("condition_id", "dataset", "model", "m", "csg", "cn",
                "temperature", "accuracy", "seed")

_AGGREGATES = ("mean", "median")
_FIT_MODES = ("global", "cross-validated")

# Coefficient search space per variant, in this order.
_ACTIVE_NAMES = {
    "plain": ("alpha", "beta"),
    "csg": ("alpha", "beta", "gamma"),
    "cn": ("alpha", "beta", "delta"),
    "csgcn": ("alpha", "beta", "gamma", "delta"),
}

DEFAULT_BOUNDS = {
    "alpha": (0.0, 16.0),
    "beta": (-128.0, 128.0),
    "gamma": (-64.0, 64.0),
    "delta": (-64.0, 64.0),
}


@dataclass(frozen=True)
class ConditionGrid:
    """Swept (temperature, accuracy, seed) samples for one condition."""

    condition_id: str
    m: int
    cn: int
    csg: float | None
    samples: tuple[tuple[float, float, int], ...]

    def __post_init__(self) -> None:
        if not self.condition_id:
            raise InputError("condition_id must be non-empty")
        if not isinstance(self.m, int) or isinstance(self.m, bool) or self.m < 1:
            raise InputError(f"{self.condition_id}: m must be an int >= 1")
        if not isinstance(self.cn, int) or isinstance(self.cn, bool) or self.cn < 2:
            raise InputError(f"{self.condition_id}: cn must be an int >= 2")
        if self.csg is not None:
            if not math.isfinite(self.csg) or self.csg <= 0:
                raise InputError(
                    f"{self.condition_id}: csg must be finite and > 0"
                )
        if not self.samples:
            raise InputError(f"{self.condition_id}: no samples")
        for t, acc, _seed in self.samples:
            if not math.isfinite(t) or t <= 0:
                raise InputError(
                    f"{self.condition_id}: temperatures must be finite and > 0"
                )
            if not math.isfinite(acc) or not 0.0 <= acc <= 100.0:
                raise InputError(
                    f"{self.condition_id}: accuracies must lie in [0, 100]"
                )

    def task(self) -> TaskDescriptor:
        return TaskDescriptor(m=self.m, cn=self.cn, csg=self.csg)


class TemperatureInterpolant:
    """Piecewise-linear accuracy vs log2(temperature), clamped outside."""

    def __init__(self, temperatures: np.ndarray, accuracies: np.ndarray):
        order = np.argsort(temperatures)
        self.temperatures = np.asarray(temperatures, dtype=float)[order]
        self.accuracies = np.asarray(accuracies, dtype=float)[order]
        self._log2_t = np.log2(self.temperatures)

    def __call__(self, temperature):
        t = np.asarray(temperature, dtype=float)
        if np.any(~np.isfinite(t)) or np.any(t <= 0):
            raise InputError("query temperatures must be finite and > 0")
        out = np.interp(np.log2(t), self._log2_t, self.accuracies)
        return float(out) if np.ndim(temperature) == 0 else out


def build_interpolant(grid: ConditionGrid,
                      aggregate: str = "mean") -> TemperatureInterpolant:
    """Aggregate repeated seeds per temperature, then interpolate.

    Repeats at the same swept temperature (different seeds) collapse to
    their mean or median accuracy before the curve is built.
    """
    if aggregate not in _AGGREGATES:
        raise InputError(
            f"aggregate must be one of {', '.join(_AGGREGATES)}, got {aggregate!r}"
        )
    groups: dict[float, list[float]] = {}
    for t, acc, _seed in grid.samples:
        groups.setdefault(float(t), []).append(float(acc))
    if len(groups) < 2:
        raise InputError(
            f"{grid.condition_id}: need at least 2 distinct temperatures, "
            f"got {len(groups)}"
        )
    temps = np.array(sorted(groups), dtype=float)
    if aggregate == "mean":
        values = np.array([np.mean(groups[t]) for t in temps])
    else:
        values = np.array([median(groups[t]) for t in temps])
    return TemperatureInterpolant(temps, values)


def objective(coeffs: TemperatureCoefficients, grids, variant: str,
              aggregate: str = "mean") -> float:
    """Summed interpolated accuracy of the model's picks across conditions."""
    grids = list(grids)
    if not grids:
        raise InputError("objective needs at least one condition grid")
    interpolants = [build_interpolant(g, aggregate) for g in grids]
    return _objective_prebuilt(coeffs, grids, interpolants, variant)


def _objective_prebuilt(coeffs, grids, interpolants, variant: str) -> float:
    total = 0.0
    for grid, interp in zip(grids, interpolants):
        total += interp(estimate_temperature(grid.task(), variant, coeffs))
    return total


@dataclass(frozen=True)
class DifferentialEvolutionSettings:
    """rand/1/bin settings. Population size is multiplier * dimension."""

    population_multiplier: int = 15
    mutation: float = 0.8
    crossover: float = 0.9
    max_generations: int = 1000
    tolerance: float = 1e-8
    stall_generations: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_multiplier < 2:
            raise InputError("population_multiplier must be >= 2")
        if not 0.0 < self.mutation <= 2.0:
            raise InputError(f"mutation must lie in (0, 2], got {self.mutation}")
        if not 0.0 <= self.crossover <= 1.0:
            raise InputError(f"crossover must lie in [0, 1], got {self.crossover}")
        if self.max_generations < 1:
            raise InputError("max_generations must be >= 1")
        if self.tolerance < 0:
            raise InputError("tolerance must be >= 0")
        if self.stall_generations < 1:
            raise InputError("stall_generations must be >= 1")


@dataclass(frozen=True)
class FitSpec:
    variant: str
    mode: str = "global"
    bounds: dict = field(default_factory=dict)
    aggregate: str = "mean"
    clip_lo: float = CLIP_LO_DEFAULT
    clip_hi: float = CLIP_HI_DEFAULT
    de: DifferentialEvolutionSettings = DifferentialEvolutionSettings()

    def __post_init__(self) -> None:
        if self.variant not in COEFFICIENT_VARIANTS:
            raise InputError(
                f"fit variant must be one of {', '.join(COEFFICIENT_VARIANTS)}, "
                f"got {self.variant!r}"
            )
        if self.mode not in _FIT_MODES:
            raise InputError(
                f"mode must be one of {', '.join(_FIT_MODES)}, got {self.mode!r}"
            )
        if self.aggregate not in _AGGREGATES:
            raise InputError(
                f"aggregate must be one of {', '.join(_AGGREGATES)}, "
                f"got {self.aggregate!r}"
            )
        for name, pair in self.bounds.items():
            if name not in DEFAULT_BOUNDS:
                raise InputError(f"unknown coefficient bound {name!r}")
            lo, hi = pair
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise InputError(f"bound for {name!r} must satisfy lo < hi")

    def active_names(self) -> tuple[str, ...]:
        return _ACTIVE_NAMES[self.variant]

    def bounds_array(self) -> np.ndarray:
        rows = []
        for name in self.active_names():
            lo, hi = self.bounds.get(name, DEFAULT_BOUNDS[name])
            rows.append((float(lo), float(hi)))
        return np.array(rows, dtype=float)


@dataclass(frozen=True)
class DifferentialEvolutionResult:
    best: np.ndarray
    best_value: float
    trace: tuple[float, ...]
    generations: int
    evaluations: int
    converged: bool
    initial_best_value: float


def differential_evolution(func, bounds: np.ndarray,
                           settings: DifferentialEvolutionSettings,
                           rng: np.random.Generator) -> DifferentialEvolutionResult:
    """Maximize func over a box with rand/1/bin differential evolution.

    Each target mixes with three distinct partners; trial coordinates are
    clipped back into the box; a trial replaces its target when it does
    not score worse. Convergence is declared once the best value improves
    by less than `tolerance` over `stall_generations` generations. The
    best value per generation is recorded, so the trace is nondecreasing.
    """
    bounds = np.asarray(bounds, dtype=float)
    dim = bounds.shape[0]
    lo, hi = bounds[:, 0], bounds[:, 1]
    pop_size = settings.population_multiplier * dim
    pop = lo + rng.random((pop_size, dim)) * (hi - lo)
    values = np.array([func(x) for x in pop], dtype=float)
    evaluations = pop_size
    best_idx = int(values.argmax())
    trace = [float(values[best_idx])]
    initial_best = trace[0]
    converged = False
    generation = 0
    for generation in range(1, settings.max_generations + 1):
        for i in range(pop_size):
            r1, r2, r3 = _pick_partners(rng, pop_size, i)
            mutant = pop[r1] + settings.mutation * (pop[r2] - pop[r3])
            mask = rng.random(dim) < settings.crossover
            mask[rng.integers(dim)] = True
            trial = np.clip(np.where(mask, mutant, pop[i]), lo, hi)
            value = func(trial)
            evaluations += 1
            if value >= values[i]:
                pop[i] = trial
                values[i] = value
        best_idx = int(values.argmax())
        trace.append(float(values[best_idx]))
        window = settings.stall_generations
        if generation >= window and trace[-1] - trace[-1 - window] < settings.tolerance:
            converged = True
            break
    return DifferentialEvolutionResult(
        best=pop[best_idx].copy(),
        best_value=float(values[best_idx]),
        trace=tuple(trace),
        generations=generation,
        evaluations=evaluations,
        converged=converged,
        initial_best_value=initial_best,
    )


def _pick_partners(rng: np.random.Generator, pop_size: int, exclude: int):
    picks: list[int] = []
    while len(picks) < 3:
        candidate = int(rng.integers(pop_size))
        if candidate != exclude and candidate not in picks:
            picks.append(candidate)
    return picks


@dataclass(frozen=True)
class FitResult:
    variant: str
    coefficients: TemperatureCoefficients
    objective_value: float
    diagnostics: dict


def _vector_to_coefficients(vector: np.ndarray, spec: FitSpec) -> TemperatureCoefficients:
    values = dict(zip(spec.active_names(), (float(v) for v in vector)))
    return TemperatureCoefficients(
        alpha=values.get("alpha", 0.0), beta=values.get("beta", 0.0),
        gamma=values.get("gamma", 0.0), delta=values.get("delta", 0.0),
        clip_lo=spec.clip_lo, clip_hi=spec.clip_hi,
    )


def _require_descriptors(grids, variant: str) -> None:
    if variant in ("csg", "csgcn"):
        missing = [g.condition_id for g in grids if g.csg is None]
        if missing:
            raise InputError(
                f"variant {variant!r} needs a csg value for every condition; "
                f"missing for {', '.join(missing)}"
            )


def _run_de(grids, interpolants, spec: FitSpec,
            rng: np.random.Generator) -> tuple[TemperatureCoefficients, DifferentialEvolutionResult]:
    def score(vector: np.ndarray) -> float:
        coeffs = _vector_to_coefficients(vector, spec)
        return _objective_prebuilt(coeffs, grids, interpolants, spec.variant)

    result = differential_evolution(score, spec.bounds_array(), spec.de, rng)
    return _vector_to_coefficients(result.best, spec), result


def fit(grids, spec: FitSpec) -> FitResult:
    """Fit coefficients for spec.variant against condition grids.

    global mode fits all conditions at once. cross-validated mode also
    reports a leave-one-condition-out pass: for each fold the model is
    refit without one condition and scored on the held-out interpolant.
    The returned coefficients always come from the all-conditions fit.
    """
    grids = list(grids)
    if not grids:
        raise InputError("fit needs at least one condition grid")
    ids = [g.condition_id for g in grids]
    if len(set(ids)) != len(ids):
        raise InputError("condition_id values must be unique")
    _require_descriptors(grids, spec.variant)
    interpolants = [build_interpolant(g, spec.aggregate) for g in grids]
    base_seed = _rand.norm_seed(spec.de.seed)

    coeffs, de_result = _run_de(grids, interpolants, spec,
                                _rand.spawn_rng(base_seed, 0))
    diagnostics = {
        "mode": spec.mode,
        "variant": spec.variant,
        "aggregate": spec.aggregate,
        "generations": de_result.generations,
        "evaluations": de_result.evaluations,
        "converged": de_result.converged,
        "stagnated": (de_result.best_value - de_result.initial_best_value)
                     < spec.de.tolerance,
        "initial_best_objective": de_result.initial_best_value,
        "trace": list(de_result.trace),
        "conditions": ids,
    }
    if spec.mode == "cross-validated":
        if len(grids) < 2:
            raise InputError("cross-validated mode needs at least 2 conditions")
        folds = []
        for fold_idx, held_out in enumerate(grids):
            train = [g for g in grids if g is not held_out]
            train_interp = [ip for g, ip in zip(grids, interpolants)
                            if g is not held_out]
            fold_coeffs, fold_de = _run_de(train, train_interp, spec,
                                           _rand.spawn_rng(base_seed, 1 + fold_idx))
            held_interp = interpolants[fold_idx]
            held_t = estimate_temperature(held_out.task(), spec.variant, fold_coeffs)
            folds.append({
                "held_out": held_out.condition_id,
                "coefficients": {name: getattr(fold_coeffs, name)
                                 for name in spec.active_names()},
                "train_objective": fold_de.best_value,
                "held_out_accuracy": float(held_interp(held_t)),
                "held_out_temperature": held_t,
            })
        diagnostics["folds"] = folds
    return FitResult(
        variant=spec.variant,
        coefficients=coeffs,
        objective_value=de_result.best_value,
        diagnostics=diagnostics,
    )


def coefficient_stability_report(fits) -> dict:
    """Per-coefficient mean and population standard deviation across fits."""
    fits = list(fits)
    if len(fits) < 2:
        raise InputError("stability report needs at least 2 fits")
    report: dict[str, dict[str, float]] = {}
    for name in ("alpha", "beta", "gamma", "delta"):
        values = np.array([float(getattr(f, name)) for f in fits])
        report[name] = {"mean": float(values.mean()),
                        "sd": float(values.std(ddof=0))}
    return report


def parse_grid_table(text: str, source: str = "<grid>") -> list[ConditionGrid]:
    """Parse the swept-grid interchange table.

    Whitespace- or comma-delimited columns: condition_id dataset model m
    csg cn temperature accuracy seed. The csg field may be '-' or 'nan'
    for conditions without a difficulty score. Rows may appear in any
    order; they are grouped by condition_id (first-appearance order) and
    per-condition descriptors must agree across rows.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError(f"{source}: empty grid file")
    header = tuple(lines[0].replace(",", " ").split())
    if header != GRID_COLUMNS:
        raise InputError(
            f"{source}: header must be exactly: {' '.join(GRID_COLUMNS)}"
        )
    order: list[str] = []
    descriptors: dict[str, tuple[int, float | None, int]] = {}
    samples: dict[str, list[tuple[float, float, int]]] = {}
    for n, line in enumerate(lines[1:], start=2):
        fields = line.replace(",", " ").split()
        if len(fields) != len(GRID_COLUMNS):
            raise InputError(
                f"{source}: line {n}: {len(fields)} fields, "
                f"expected {len(GRID_COLUMNS)}"
            )
        cid = fields[0]
        try:
            m = int(fields[3])
            csg = _parse_optional_float(fields[4])
            cn = int(fields[5])
            temperature = float(fields[6])
            accuracy = float(fields[7])
            seed = int(fields[8])
        except ValueError as exc:
            raise InputError(f"{source}: line {n}: {exc}") from None
        descriptor = (m, csg, cn)
        if cid not in descriptors:
            order.append(cid)
            descriptors[cid] = descriptor
            samples[cid] = []
        elif descriptors[cid] != descriptor:
            raise InputError(
                f"{source}: line {n}: condition {cid!r} changes its "
                f"m/csg/cn descriptors"
            )
        samples[cid].append((temperature, accuracy, seed))
    return [
        ConditionGrid(condition_id=cid, m=descriptors[cid][0],
                      cn=descriptors[cid][2], csg=descriptors[cid][1],
                      samples=tuple(samples[cid]))
        for cid in order
    ]


def _parse_optional_float(fieldtext: str) -> float | None:
    if fieldtext == "-" or fieldtext.lower() == "nan":
        return None
    return float(fieldtext)


def read_grid_file(path: str) -> list[ConditionGrid]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_grid_table(fh.read(), source=path)


def write_grid_file(path: str, grids, dataset: str = "-",
                    model: str = "-") -> None:
    lines = [" ".join(GRID_COLUMNS)]
    for grid in grids:
        csg_text = repr(float(grid.csg)) if grid.csg is not None else "-"
        for t, acc, seed in grid.samples:
            lines.append(" ".join((
                grid.condition_id, dataset, model, str(grid.m), csg_text,
                str(grid.cn), repr(float(t)), repr(float(acc)), str(int(seed)),
            )))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
