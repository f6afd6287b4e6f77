"""
Timetable search baselines.

A chromosome is a 0/1 vector over the minutes of the service window
(1 = departure). Every operator is followed by a repair pass, so the
population only ever holds timetables that respect the interval bounds.
Offspring that duplicate a member of their generation are mutated again,
and a share of each generation is fresh random timetables. The memetic
variant hill-climbs from the best timetable found and spends leftover
budget on climbs from perturbed copies of it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Set, Tuple

import numpy as np

from headwayrl.core.exceptions import TimetableError
from headwayrl.core.rng import derive_seed, make_rng
from headwayrl.schemas.baselines import FitnessWeights, GAParams
from headwayrl.schemas.demand import DemandSet
from headwayrl.schemas.line import LineConfig
from headwayrl.schemas.simulation import Metrics, Timetable
from headwayrl.services.line_model import TravelTimeTable
from headwayrl.services.simulator import capacity_series, evaluate_timetable

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["generation", "best", "mean"]
RUNS_COLUMNS = ["run", "seed", "fitness", "nd", "awt", "nsp", "unserved"]
DUPLICATE_RETRIES = 5


class Method:
    GA = "ga"
    MEMETIC = "memetic"


def repair(bits: np.ndarray, line: LineConfig) -> np.ndarray:
    """
    Greedy left-to-right repair.

    Both endpoints are set. A departure closer than T_min to the previous
    kept one is dropped (the final departure is never dropped); a gap wider
    than T_max is split by inserting departures.
    """
    n = len(bits)
    end = n - 1
    t_min, t_max = line.min_interval, line.max_interval
    positions = np.flatnonzero(bits)
    out = np.zeros(n, dtype=np.uint8)
    out[0] = 1
    cur = 0
    for p in list(positions[positions > 0]) + ([end] if not bits[end] else []):
        p = int(p)
        if p != end and p - cur < t_min:
            continue
        while p - cur > t_max:
            cur += min(max((p - cur) // 2, t_min), t_max)
            out[cur] = 1
        if p != end and p - cur < t_min:
            continue
        out[p] = 1
        cur = p
    return out


def to_timetable(bits: np.ndarray, line: LineConfig) -> Timetable:
    return Timetable(departures=tuple(int(line.service_start + i) for i in np.flatnonzero(bits)))


def from_timetable(timetable: Timetable, line: LineConfig) -> np.ndarray:
    bits = np.zeros(line.window + 1, dtype=np.uint8)
    for m in timetable.departures:
        if not line.service_start <= m <= line.service_end:
            raise TimetableError(f"departure {m} outside the service window")
        bits[m - line.service_start] = 1
    return bits


def fitness_of_timetable(
    timetable: Timetable,
    demand: DemandSet,
    line: LineConfig,
    tt: TravelTimeTable,
    weights: FitnessWeights,
) -> Tuple[float, Metrics]:
    metrics, trips = evaluate_timetable(demand, line, tt, timetable)
    gap = sum(abs(b.provided - b.consumed) for b in capacity_series(trips, line))
    value = gap * weights.w_gap + metrics.nsp * weights.w_nsp + metrics.nd * weights.w_nd
    return float(value), metrics


def fitness(
    chrom: np.ndarray,
    demand: DemandSet,
    line: LineConfig,
    tt: TravelTimeTable,
    weights: FitnessWeights,
) -> float:
    """
    Half-hourly |provided - consumed| capacity, stranding and departure
    count, weighted and summed. Lower is better.
    """
    return fitness_of_timetable(to_timetable(chrom, line), demand, line, tt, weights)[0]


@dataclass
class SearchResult:
    timetable: Timetable
    fitness: float
    metrics: Metrics
    trace: List[Dict[str, Any]] = field(default_factory=list)
    evaluations: int = 0


class TimetableSearch:
    """
    Genetic search over departure vectors, optionally with local search.

    Args:
        demand: Passenger demand
        line: Line configuration
        tt: Travel-time table
        params: GA parameters
        weights: Fitness weights
    """

    def __init__(
        self,
        demand: DemandSet,
        line: LineConfig,
        tt: TravelTimeTable,
        params: GAParams,
        weights: FitnessWeights,
    ):
        if line.min_interval > line.window:
            raise ValueError(f"T_min={line.min_interval} does not fit the {line.window}-minute window")
        self.demand = demand
        self.line = line
        self.tt = tt
        self.params = params
        self.weights = weights
        self.length = line.window + 1
        self.mutation_rate = params.mutation_rate if params.mutation_rate is not None else 1.0 / self.length
        self._cache: Dict[bytes, Tuple[float, Metrics]] = {}
        self.logger = logging.getLogger(__name__)

    @property
    def evaluations(self) -> int:
        return len(self._cache)

    def evaluate(self, bits: np.ndarray) -> float:
        key = bits.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = fitness_of_timetable(to_timetable(bits, self.line), self.demand, self.line, self.tt, self.weights)
            self._cache[key] = hit
        return hit[0]

    def metrics(self, bits: np.ndarray) -> Metrics:
        self.evaluate(bits)
        return self._cache[bits.tobytes()][1]

    def random_individual(self, rng: np.random.Generator) -> np.ndarray:
        density = rng.uniform(1.0 / self.line.max_interval, 1.0 / self.line.min_interval)
        bits = (rng.random(self.length) < density).astype(np.uint8)
        return repair(bits, self.line)

    def tournament(self, population: List[np.ndarray], scores: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        picks = rng.integers(0, len(population), size=self.params.tournament_size)
        return population[int(picks[np.argmin(scores[picks])])]

    def crossover(self, a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        if self.length < 3 or rng.random() >= self.params.crossover_rate:
            return a.copy(), b.copy()
        cut = int(rng.integers(1, self.length - 1))
        return np.concatenate([a[:cut], b[cut:]]), np.concatenate([b[:cut], a[cut:]])

    def mutate(self, bits: np.ndarray, rng: np.random.Generator, force: bool = False) -> np.ndarray:
        """Flip interior minutes at the mutation rate; ``force`` guarantees at least one flip."""
        flips = rng.random(self.length) < self.mutation_rate
        flips[0] = flips[-1] = False
        if force and self.length > 2 and not flips.any():
            flips[int(rng.integers(1, self.length - 1))] = True
        out = bits.copy()
        out[flips] ^= 1
        return out

    def neighbours(self, bits: np.ndarray) -> List[np.ndarray]:
        """Shift one departure by a minute, drop one, or add one in a gap."""
        ones = np.flatnonzero(bits)
        interior = ones[1:-1]
        out = []
        for p in interior:
            for step in (-1, 1):
                cand = bits.copy()
                cand[p] = 0
                cand[p + step] = 1
                out.append(cand)
        for p in interior:
            cand = bits.copy()
            cand[p] = 0
            out.append(cand)
        for a, b in zip(ones[:-1], ones[1:]):
            if b - a >= 2 * self.line.min_interval:
                cand = bits.copy()
                cand[(a + b) // 2] = 1
                out.append(cand)
        return out

    def climb(self, bits: np.ndarray, budget: int) -> Tuple[np.ndarray, int]:
        """First-improvement hill climbing; returns the result and the evaluations spent (at most ``budget``)."""
        best = bits
        best_fit = self.evaluate(best)
        spent = 0
        improved = True
        while improved and spent < budget:
            improved = False
            for cand in self.neighbours(best):
                if spent >= budget:
                    break
                cand = repair(cand, self.line)
                if np.array_equal(cand, best):
                    continue
                spent += 1
                value = self.evaluate(cand)
                if value < best_fit:
                    best, best_fit = cand, value
                    improved = True
                    break
        return best, spent

    def kick(self, bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Flip a handful of interior minutes at once and repair."""
        interior = self.length - 2
        if interior < 1:
            return bits.copy()
        k = min(interior, max(2, interior // 10))
        out = bits.copy()
        out[rng.choice(np.arange(1, self.length - 1), size=k, replace=False)] ^= 1
        return repair(out, self.line)

    def iterated_local_search(self, bits: np.ndarray, budget: int, rng: np.random.Generator) -> np.ndarray:
        """
        Climb from ``bits``, then keep climbing from kicked copies of the best
        local optimum until ``budget`` evaluations are spent.
        """
        best, spent = self.climb(bits, budget)
        best_fit = self.evaluate(best)
        while spent < budget:
            start = self.kick(best, rng)
            cand, used = self.climb(start, budget - spent - 1)
            spent += used + 1
            value = self.evaluate(cand)
            if value < best_fit:
                best, best_fit = cand, value
        return best

    def offspring(self, child: np.ndarray, seen: Set[bytes], rng: np.random.Generator) -> np.ndarray:
        """Repair, mutate and repair; a child already in ``seen`` is mutated again a few times."""
        out = repair(self.mutate(repair(child, self.line), rng), self.line)
        for _ in range(DUPLICATE_RETRIES):
            if out.tobytes() not in seen:
                break
            out = repair(self.mutate(out, rng, force=True), self.line)
        return out

    def breed(self, population: List[np.ndarray], scores: np.ndarray, rng: np.random.Generator) -> List[np.ndarray]:
        """The next generation: the elite, offspring, then random immigrants."""
        size = len(population)
        immigrants = min(math.ceil(self.params.immigrant_fraction * size), max(0, size - 2))
        elite = population[int(np.argmin(scores))]
        children = [elite]
        seen = {elite.tobytes()}
        while len(children) < size - immigrants:
            a = self.tournament(population, scores, rng)
            b = self.tournament(population, scores, rng)
            for child in self.crossover(a, b, rng):
                if len(children) < size - immigrants:
                    child = self.offspring(child, seen, rng)
                    seen.add(child.tobytes())
                    children.append(child)
        while len(children) < size:
            children.append(self.random_individual(rng))
        return children

    def run(self, ls_budget: int = 0, lamarckian: bool = False) -> SearchResult:
        p = self.params
        rng = make_rng(p.seed, "ga")
        population = [self.random_individual(rng) for _ in range(p.population)]
        scores = np.array([self.evaluate(ind) for ind in population])
        archive: Optional[np.ndarray] = None
        kick_rng = make_rng(p.seed, "memetic-kick")
        trace: List[Dict[str, Any]] = []

        def refine() -> None:
            nonlocal archive
            elite_idx = int(np.argmin(scores))
            elite = population[elite_idx]
            start = elite if archive is None or scores[elite_idx] < self.evaluate(archive) else archive
            archive = self.iterated_local_search(start, ls_budget, kick_rng)
            if lamarckian and self.evaluate(archive) < scores[elite_idx]:
                population[elite_idx] = archive
                scores[elite_idx] = self.evaluate(archive)

        def record(generation: int) -> None:
            best = float(scores.min())
            if archive is not None:
                best = min(best, self.evaluate(archive))
            trace.append({"generation": generation, "best": best, "mean": float(scores.mean())})

        if ls_budget:
            refine()
        record(0)

        for generation in range(1, p.generations + 1):
            population = self.breed(population, scores, rng)
            scores = np.array([self.evaluate(ind) for ind in population])
            if ls_budget:
                refine()
            record(generation)

        best = population[int(np.argmin(scores))]
        if archive is not None and self.evaluate(archive) < self.evaluate(best):
            best = archive
        result = SearchResult(
            timetable=to_timetable(best, self.line),
            fitness=self.evaluate(best),
            metrics=self.metrics(best),
            trace=trace,
            evaluations=self.evaluations,
        )
        self.logger.info(
            f"Search finished: fitness {result.fitness:.2f}, ND {result.metrics.nd}, "
            f"{result.evaluations} distinct timetables evaluated"
        )
        return result


def ga_optimize(
    demand: DemandSet,
    line: LineConfig,
    tt: TravelTimeTable,
    params: GAParams,
    weights: FitnessWeights,
) -> SearchResult:
    """
    Genetic search: tournament selection, single-point crossover, bit-flip
    mutation, repair after each operator and an elite of one.
    """
    return TimetableSearch(demand, line, tt, params, weights).run()


def memetic_optimize(
    demand: DemandSet,
    line: LineConfig,
    tt: TravelTimeTable,
    params: GAParams,
    weights: FitnessWeights,
    ls_budget: Optional[int] = None,
) -> SearchResult:
    """
    Genetic search plus per-generation hill climbing on the best timetable,
    restarted from kicked copies of the local optimum while budget remains.

    The refined timetable lives in an archive beside the population, so the
    genetic part sees exactly the same random draws as :func:`ga_optimize`.
    With ``params.lamarckian`` the refinement is written back into the population.
    """
    budget = params.ls_budget if ls_budget is None else ls_budget
    return TimetableSearch(demand, line, tt, params, weights).run(ls_budget=budget, lamarckian=params.lamarckian)


SEARCHES: Dict[str, Callable[..., SearchResult]] = {
    Method.GA: ga_optimize,
    Method.MEMETIC: memetic_optimize,
}


def repeated_runs(
    method: str,
    demand: DemandSet,
    line: LineConfig,
    tt: TravelTimeTable,
    params: GAParams,
    weights: FitnessWeights,
    runs: int,
) -> Tuple[SearchResult, List[Dict[str, Any]], Dict[str, float]]:
    """
    Run a search ``runs`` times with seeds derived from ``params.seed``.

    Returns:
        The best result, one row per run, and best/mean/std of the fitness
    """
    if method not in SEARCHES:
        raise ValueError(f"unknown method {method!r}")
    if runs < 1:
        raise ValueError("runs must be at least 1")
    rows = []
    best: Optional[SearchResult] = None
    for i in range(runs):
        seed = params.seed if runs == 1 else derive_seed(params.seed, method, i) & 0x7FFFFFFF
        result = SEARCHES[method](demand, line, tt, params.model_copy(update={"seed": seed}), weights)
        rows.append({
            "run": i + 1,
            "seed": seed,
            "fitness": result.fitness,
            "nd": result.metrics.nd,
            "awt": result.metrics.awt,
            "nsp": result.metrics.nsp,
            "unserved": result.metrics.unserved,
        })
        if best is None or result.fitness < best.fitness:
            best = result
    values = np.array([r["fitness"] for r in rows])
    summary = {
        "runs": runs,
        "best": float(values.min()),
        "mean": float(values.mean()),
        "std": float(values.std()),
        "nd_mean": float(np.mean([r["nd"] for r in rows])),
        "awt_mean": float(np.mean([r["awt"] for r in rows])),
        "nsp_mean": float(np.mean([r["nsp"] for r in rows])),
    }
    return best, rows, summary
