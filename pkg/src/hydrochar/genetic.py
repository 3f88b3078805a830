"""Real-coded genetic algorithm over trained surrogates.

The fitness of a candidate input is the equal-weight signed sum of z-scored
surrogate predictions: maximized targets contribute +(pred - mean)/std,
minimized ones the negative, ignored ones nothing. Selection is roulette
(fitness-proportional after shifting by the population minimum), crossover
is blend (BLX-alpha), mutation is per-individual Gaussian, and elites pass
through unchanged so the best fitness never regresses.

Mutation is self-scaling: the per-gene standard deviation is 0.1 times the
population's current range of that gene, floored at a small fraction of the
bounds span. Early on this explores at domain scale; as the population
concentrates the kicks shrink with it, which is what lets the search refine
an optimum to far better than the initial mutation scale while keeping
enough spread to walk off the flat plateaus a tree surrogate produces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FEATURE_COLUMNS, TARGET_COLUMNS, mass_balance_ok
from .errors import InfeasibleBounds, MissingModel

MAXIMIZE = "maximize"
MINIMIZE = "minimize"
IGNORE = "ignore"

_BLX_ALPHA = 0.5
_MUTATION_RANGE_FRACTION = 0.1
_MUTATION_FLOOR_FRACTION = 0.005  # of the bounds span, keeps plateau escapes alive

_BUILTIN_PROFILES = {
    "energy": {
        "hc_c": MAXIMIZE,
        "hc_h": MAXIMIZE,
        "hc_n": MINIMIZE,
        "hc_o": MINIMIZE,
        "hc_s": MINIMIZE,
        "hc_vm": MINIMIZE,
        "hc_fc": IGNORE,
        "hc_ash": MINIMIZE,
        "hc_hhv": MAXIMIZE,
        "hc_yield": MAXIMIZE,
    },
    "soil": {
        "hc_c": IGNORE,
        "hc_h": IGNORE,
        "hc_n": MAXIMIZE,
        "hc_o": IGNORE,
        "hc_s": MAXIMIZE,
        "hc_vm": IGNORE,
        "hc_fc": IGNORE,
        "hc_ash": MAXIMIZE,
        "hc_hhv": MINIMIZE,
        "hc_yield": MAXIMIZE,
    },
    "adsorption": {
        "hc_c": IGNORE,
        "hc_h": IGNORE,
        "hc_n": MAXIMIZE,
        "hc_o": MAXIMIZE,
        "hc_s": MAXIMIZE,
        "hc_vm": IGNORE,
        "hc_fc": IGNORE,
        "hc_ash": MAXIMIZE,
        "hc_hhv": MINIMIZE,
        "hc_yield": MAXIMIZE,
    },
}


@dataclass(frozen=True)
class ObjectiveProfile:
    """Optimization direction for each of the 10 hydrochar responses."""

    name: str
    directions: tuple[tuple[str, str], ...]  # (target, direction) in canonical order

    def __post_init__(self):
        seen = dict(self.directions)
        if set(seen) != set(TARGET_COLUMNS):
            raise ValueError("profile must assign a direction to every target")
        for t, d in self.directions:
            if d not in (MAXIMIZE, MINIMIZE, IGNORE):
                raise ValueError(f"unknown direction {d!r} for {t}")
        if all(d == IGNORE for _, d in self.directions):
            raise ValueError("profile must have at least one non-ignored target")

    @classmethod
    def from_directions(cls, name: str, directions: dict) -> "ObjectiveProfile":
        missing = [t for t in TARGET_COLUMNS if t not in directions]
        if missing:
            raise ValueError(f"profile missing directions for {missing}")
        extra = sorted(set(directions) - set(TARGET_COLUMNS))
        if extra:
            raise ValueError(f"profile names unknown targets {extra}")
        return cls(name=name, directions=tuple((t, directions[t]) for t in TARGET_COLUMNS))

    @classmethod
    def builtin(cls, name: str) -> "ObjectiveProfile":
        if name not in _BUILTIN_PROFILES:
            raise KeyError(f"unknown application {name!r}; choose from {sorted(_BUILTIN_PROFILES)}")
        return cls.from_directions(name, _BUILTIN_PROFILES[name])

    def direction(self, target: str) -> str:
        return dict(self.directions)[target]

    def active(self) -> list[tuple[str, float]]:
        """(target, sign) for every non-ignored target."""
        signs = {MAXIMIZE: 1.0, MINIMIZE: -1.0}
        return [(t, signs[d]) for t, d in self.directions if d != IGNORE]

    def as_dict(self) -> dict:
        return {t: d for t, d in self.directions}


@dataclass(frozen=True)
class GaConfig:
    bounds: tuple[tuple[float, float], ...]
    population: int = 1000
    crossover_prob: float = 0.5
    mutation_prob: float = 0.3
    generations: int = 200
    elitism: int = 2
    stagnation_limit: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        for p in (self.crossover_prob, self.mutation_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must lie in [0, population)")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"invalid gene bounds ({lo}, {hi})")

    def to_dict(self) -> dict:
        return {
            "bounds": [[lo, hi] for lo, hi in self.bounds],
            "population": self.population,
            "crossover_prob": self.crossover_prob,
            "mutation_prob": self.mutation_prob,
            "generations": self.generations,
            "elitism": self.elitism,
            "stagnation_limit": self.stagnation_limit,
            "seed": self.seed,
        }


@dataclass
class GaResult:
    best_inputs: np.ndarray
    best_fitness: float
    predicted_outputs: dict[str, float]
    history: list[float]  # best fitness so far, per generation
    generations_run: int


def fitness(models: dict, profile: ObjectiveProfile, x, target_stats: dict) -> float:
    """Signed standardized-prediction sum for one candidate input.

    ``models`` maps target name to an object with ``predict(rows)``;
    ``target_stats`` maps target name to (mean, std) of its training data.
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    total = 0.0
    for target, sign in profile.active():
        model = models.get(target)
        if model is None:
            raise MissingModel(target)
        mean, std = target_stats[target]
        total += sign * (float(model.predict(x)[0]) - mean) / std
    return total


def _surrogate_objective(models: dict, profile: ObjectiveProfile, target_stats: dict):
    active = profile.active()
    for target, _ in active:
        if target not in models:
            raise MissingModel(target)

    def objective(pop: np.ndarray) -> np.ndarray:
        total = np.zeros(pop.shape[0])
        for target, sign in active:
            mean, std = target_stats[target]
            total += sign * (models[target].predict(pop) - mean) / std
        return total

    return objective


def run_ga(objective, config: GaConfig, feasible=None) -> tuple[np.ndarray, float, list[float], int]:
    """Core GA loop over a batch objective; returns (x, f, history, gens).

    ``objective`` maps an (m, d) array to m fitness values (maximized).
    ``feasible``, when given, maps the same array to a boolean mask;
    infeasible individuals score -inf and can never be selected or win.
    """
    bounds = np.asarray(config.bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    span = hi - lo
    d = len(bounds)
    rng = np.random.default_rng(config.seed)
    pop = lo + rng.random((config.population, d)) * span
    if feasible is not None and not feasible(pop).any():
        for _ in range(99):
            pop = lo + rng.random((config.population, d)) * span
            if feasible(pop).any():
                break
        else:
            raise InfeasibleBounds("no feasible individual in 100x population draws")

    def evaluate(p: np.ndarray) -> np.ndarray:
        fit = np.asarray(objective(p), dtype=float)
        if feasible is not None:
            fit = np.where(feasible(p), fit, -np.inf)
        return fit

    fit = evaluate(pop)
    best_idx = int(np.argmax(fit))
    best_x = pop[best_idx].copy()
    best_f = float(fit[best_idx])
    history = [best_f]
    stagnant = 0
    gens = 0
    for _ in range(config.generations):
        order = np.argsort(-fit, kind="stable")
        elite = pop[order[: config.elitism]].copy()
        finite = np.isfinite(fit)
        if finite.any():
            shifted = np.where(finite, fit - fit[finite].min(), 0.0)
        else:
            shifted = np.zeros_like(fit)
        total = shifted.sum()
        if total > 0.0:
            probs = shifted / total
        else:
            probs = np.where(finite, 1.0, 0.0)
            probs = probs / probs.sum() if probs.sum() > 0 else np.full(len(fit), 1.0 / len(fit))
        n_children = config.population - config.elitism
        parents = rng.choice(config.population, size=n_children, p=probs)
        children = pop[parents].copy()
        # blend crossover on consecutive pairs of the mating pool
        for a in range(0, n_children - 1, 2):
            if rng.random() < config.crossover_prob:
                pa, pb = children[a], children[a + 1]
                lo_g = np.minimum(pa, pb)
                hi_g = np.maximum(pa, pb)
                width = hi_g - lo_g
                c_lo = lo_g - _BLX_ALPHA * width
                c_hi = hi_g + _BLX_ALPHA * width
                children[a] = c_lo + rng.random(d) * (c_hi - c_lo)
                children[a + 1] = c_lo + rng.random(d) * (c_hi - c_lo)
        pop_range = pop.max(axis=0) - pop.min(axis=0)
        sd = _MUTATION_RANGE_FRACTION * np.maximum(pop_range, _MUTATION_FLOOR_FRACTION * span)
        mutate = rng.random(n_children) < config.mutation_prob
        noise = rng.standard_normal((n_children, d)) * sd
        children[mutate] += noise[mutate]
        np.clip(children, lo, hi, out=children)
        pop = np.vstack([elite, children]) if config.elitism else children
        fit = evaluate(pop)
        gens += 1
        gen_best = int(np.argmax(fit))
        if fit[gen_best] > best_f:
            best_f = float(fit[gen_best])
            best_x = pop[gen_best].copy()
            stagnant = 0
        else:
            stagnant += 1
        history.append(best_f)
        if stagnant >= config.stagnation_limit:
            break
    if not np.isfinite(best_f):
        raise InfeasibleBounds("search never produced a feasible individual")
    return best_x, best_f, history, gens


def optimize(models: dict, profile: ObjectiveProfile, config: GaConfig, target_stats: dict | None = None) -> GaResult:
    """Search the 11-dimensional input space of the trained surrogates.

    ``models`` maps target name to a trained surrogate with ``predict`` and
    (when ``target_stats`` is omitted) ``target_mean``/``target_std``
    attributes. Individuals violating the feedstock mass-balance constraints
    are infeasible.
    """
    if target_stats is None:
        target_stats = {
            t: (m.target_mean, m.target_std) for t, m in models.items()
        }
    objective = _surrogate_objective(models, profile, target_stats)
    best_x, best_f, history, gens = run_ga(objective, config, feasible=mass_balance_ok)
    outputs = {t: float(models[t].predict(best_x.reshape(1, -1))[0]) for t in models}
    return GaResult(
        best_inputs=best_x,
        best_fitness=best_f,
        predicted_outputs=outputs,
        history=history,
        generations_run=gens,
    )


def report(result: GaResult, profile: ObjectiveProfile, config: GaConfig) -> dict:
    """JSON-ready optimization report: optimum inputs, predicted outputs,
    the direction map, and the full configuration."""
    from . import __version__

    return {
        "schema_version": 1,
        "tool_version": __version__,
        "seed": config.seed,
        "application": profile.name,
        "directions": profile.as_dict(),
        "best_inputs": {name: float(v) for name, v in zip(FEATURE_COLUMNS, result.best_inputs)},
        "predicted_outputs": {t: result.predicted_outputs[t] for t in TARGET_COLUMNS if t in result.predicted_outputs},
        "best_fitness": result.best_fitness,
        "generations_run": result.generations_run,
        "history": [float(v) for v in result.history],
        "config": config.to_dict(),
    }


def render_table(rep: dict) -> str:
    """Human-readable two-column table of an optimization report."""
    lines = [f"application: {rep['application']}   seed: {rep['seed']}"]
    lines.append(f"best fitness: {rep['best_fitness']:.6g} after {rep['generations_run']} generations")
    lines.append("")
    lines.append(f"{'optimum inputs':<28}{'value':>12}")
    for name, v in rep["best_inputs"].items():
        lines.append(f"  {name:<26}{v:>12.4g}")
    lines.append(f"{'predicted outputs':<28}{'value':>12}")
    for name, v in rep["predicted_outputs"].items():
        direction = rep["directions"].get(name, "")
        lines.append(f"  {name:<26}{v:>12.4g}  ({direction})")
    return "\n".join(lines)
