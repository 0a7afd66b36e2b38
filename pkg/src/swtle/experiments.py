"""Monte Carlo scenarios comparing sw-TLE with its baselines.

Every replication draws covariates uniformly on ``[-2, 2]``, adds Gaussian
noise to the scenario's regression functions, selects all bandwidths by
cross-validation and records the integrated squared error of each estimator
against ``cosh``, the target regression in every scenario.
"""

from __future__ import annotations

import enum
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from swtle.adjust import BandwidthPair, GuardPolicy, SourceSpec, sw_tle_multi, sw_tle_random
from swtle.bandwidth import BandwidthGrid, FitRecipe, log_grid, select_bandwidths, select_nw_bandwidth
from swtle.baselines import f_nw, q_nw, sa_estimate, wa_estimate
from swtle.errors import ParameterError
from swtle.kernel_core import GAUSSIAN, CurveEstimate, RandomDesignSample, pooled

FloatArray = NDArray[np.float64]

DOMAIN = (-2.0, 2.0)
ESTIMATORS = ("sw-tle", "q-nw", "f-nw", "sa", "wa")
MAX_FAILURE_RATE = 0.05
# calibrated so the target-only baseline reproduces the published MISE tables
NOISE_SD = math.sqrt(0.2)


class Scenario(str, enum.Enum):
    SIMILAR = "similar"
    IDENTICAL = "identical"
    UNRELATED = "unrelated"
    MULTI_SOURCE = "multi_source"


DEFAULT_ESTIMATORS = {
    Scenario.SIMILAR: ("sw-tle", "q-nw", "sa", "wa"),
    Scenario.IDENTICAL: ("sw-tle", "f-nw", "sa", "wa"),
    Scenario.UNRELATED: ("sw-tle", "q-nw", "sa", "wa"),
    Scenario.MULTI_SOURCE: ("sw-tle", "q-nw", "sa", "wa"),
}


def target_function(x: FloatArray) -> FloatArray:
    return np.cosh(x)


@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative description of one Monte Carlo experiment.

    ``n_p`` is a single size, or one size per source for ``multi_source``.
    ``a`` and ``b`` parametrise the ``similar`` source ``a + b x^2``.
    """

    scenario: Scenario
    n_p: int | tuple[int, ...] = 500
    n_q: int = 50
    a: float | None = None
    b: float | None = None
    sigma_p: float = NOISE_SD
    sigma_q: float = NOISE_SD
    reps: int = 1000
    seed: int = 0
    estimators: tuple[str, ...] | None = None
    eval_points: int = 201
    trim: float = 0.0
    grid_count: int = 20

    def __post_init__(self):
        scenario = Scenario(self.scenario)
        object.__setattr__(self, "scenario", scenario)
        sizes = self.n_p if isinstance(self.n_p, (tuple, list)) else (self.n_p,)
        sizes = tuple(int(s) for s in sizes)
        if scenario is Scenario.MULTI_SOURCE:
            if len(sizes) != 2:
                raise ParameterError("multi_source needs two source sizes")
            object.__setattr__(self, "n_p", sizes)
        else:
            if len(sizes) != 1:
                raise ParameterError(f"{scenario.value} takes a single source size")
            object.__setattr__(self, "n_p", sizes[0])
        if scenario is Scenario.SIMILAR and (self.a is None or self.b is None):
            raise ParameterError("similar scenario needs both a and b")
        if self.reps < 1:
            raise ParameterError("reps must be >= 1")
        if min(sizes) < 2 or self.n_q < 2:
            raise ParameterError("sample sizes must be >= 2")
        if self.sigma_p < 0 or self.sigma_q < 0:
            raise ParameterError("noise levels must be non-negative")
        if not 0.0 <= self.trim <= 0.25:
            raise ParameterError("trim must lie in [0, 0.25]")
        if self.eval_points < 2:
            raise ParameterError("eval_points must be >= 2")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        estimators = self.estimators or DEFAULT_ESTIMATORS[scenario]
        unknown = set(estimators) - set(ESTIMATORS)
        if unknown:
            raise ParameterError(f"unknown estimators {sorted(unknown)}")
        object.__setattr__(self, "estimators", tuple(estimators))

    @property
    def source_sizes(self) -> tuple[int, ...]:
        return self.n_p if isinstance(self.n_p, tuple) else (self.n_p,)

    def source_functions(self) -> list[Callable[[FloatArray], FloatArray]]:
        if self.scenario is Scenario.SIMILAR:
            a, b = self.a, self.b
            return [lambda x: a + b * x * x]
        if self.scenario is Scenario.IDENTICAL:
            return [np.cosh]
        if self.scenario is Scenario.UNRELATED:
            return [lambda x: np.full_like(x, 0.5)]
        return [lambda x: 0.5 * np.exp(0.5 * x * x), lambda x: 1.0 - np.cos(x)]

    def eval_grid(self) -> FloatArray:
        lo, hi = DOMAIN
        cut = self.trim * (hi - lo)
        return np.linspace(lo + cut, hi - cut, self.eval_points)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"] = self.scenario.value
        d["n_p"] = list(self.n_p) if isinstance(self.n_p, tuple) else self.n_p
        d["estimators"] = list(self.estimators)
        return d


def replication_rng(seed: int, rep_index: int) -> np.random.Generator:
    """Independent stream for one replication, keyed by ``(seed, rep_index)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep_index,)))


def generate(config: ScenarioConfig, rep_index: int
             ) -> tuple[list[RandomDesignSample], RandomDesignSample]:
    """Draw the source sample(s) and the target sample for one replication."""
    if not 0 <= rep_index < config.reps:
        raise ParameterError(f"rep_index {rep_index} outside [0, {config.reps})")
    rng = replication_rng(config.seed, rep_index)
    lo, hi = DOMAIN
    sources = []
    for n, func in zip(config.source_sizes, config.source_functions()):
        x = rng.uniform(lo, hi, n)
        y = func(x) + config.sigma_p * rng.standard_normal(n)
        sources.append(RandomDesignSample(x, y, DOMAIN))
    xq = rng.uniform(lo, hi, config.n_q)
    yq = target_function(xq) + config.sigma_q * rng.standard_normal(config.n_q)
    return sources, RandomDesignSample(xq, yq, DOMAIN)


def ise(estimate: CurveEstimate | Callable, truth: Callable, grid: FloatArray,
        trim: float = 0.0) -> float:
    """Trapezoid-rule integral of the squared error over ``grid``.

    ``trim`` drops that fraction of the grid's span from each end first.
    """
    grid = np.asarray(grid, dtype=float)
    if trim:
        lo, hi = grid[0], grid[-1]
        cut = trim * (hi - lo)
        grid = grid[(grid >= lo + cut - 1e-12) & (grid <= hi - cut + 1e-12)]
    fn = estimate.value if isinstance(estimate, CurveEstimate) else estimate
    err = np.asarray(fn(grid), dtype=float) - np.asarray(truth(grid), dtype=float)
    return float(np.trapezoid(err * err, grid))


@dataclass(frozen=True)
class EstimatorResult:
    mise: float
    mc_se: float
    reps: int
    failures: int


@dataclass
class MiseReport:
    config: ScenarioConfig
    results: dict[str, EstimatorResult]
    wall_time: float
    ise: dict[str, list[float]] = field(default_factory=dict, repr=False)

    def rows(self) -> list[dict]:
        return [
            {"estimator": name, "mise": r.mise, "mc_se": r.mc_se, "reps": r.reps,
             "failures": r.failures}
            for name, r in self.results.items()
        ]

    def to_json(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "results": {name: asdict(r) for name, r in self.results.items()},
            "wall_time": self.wall_time,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


class ScenarioFailure(RuntimeError):
    def __init__(self, message: str, report: MiseReport):
        super().__init__(message)
        self.report = report


def _sw_tle_single(source, target, grid: BandwidthGrid):
    sel = select_bandwidths(FitRecipe("sw-tle-random", GAUSSIAN), source, target, grid)
    return sw_tle_random(source, target, GAUSSIAN, sel.bandwidths).final


def _sw_tle_multi(sources, target, grid: BandwidthGrid):
    specs = []
    for src in sources:
        pair = select_bandwidths(FitRecipe("sw-tle-random", GAUSSIAN), src, target, grid).bandwidths
        specs.append(SourceSpec(src, h_p=pair.h_p, h_q=pair.h_q))
    h_q = specs[0].h_q
    return sw_tle_multi(specs, target, GAUSSIAN, h_q, GuardPolicy()).final


def replicate(config: ScenarioConfig, rep_index: int) -> dict[str, float]:
    """ISE of each requested estimator on one replication (NaN on failure)."""
    sources, target = generate(config, rep_index)
    x_eval = config.eval_grid()
    hs = log_grid(DOMAIN, config.grid_count)
    grid = BandwidthGrid(hs, hs)
    source = sources[0] if len(sources) == 1 else pooled(*sources)
    cache: dict[str, float] = {}

    def bandwidth(key: str, sample: RandomDesignSample) -> float:
        if key not in cache:
            cache[key] = select_nw_bandwidth(sample, GAUSSIAN, hs)
        return cache[key]

    out: dict[str, float] = {}
    for name in config.estimators:
        try:
            if name == "sw-tle":
                curve = (_sw_tle_single(source, target, grid) if len(sources) == 1
                         else _sw_tle_multi(sources, target, grid))
            elif name == "q-nw":
                curve = q_nw(target, GAUSSIAN, bandwidth("q", target))
            elif name == "f-nw":
                both = pooled(source, target)
                curve = f_nw(source, target, GAUSSIAN, bandwidth("f", both))
            else:
                pair = BandwidthPair(bandwidth("p", source), bandwidth("q", target))
                if name == "sa":
                    curve = sa_estimate(source, target, GAUSSIAN, pair)
                else:
                    curve, _ = wa_estimate(source, target, GAUSSIAN, pair)
            value = ise(curve, target_function, x_eval)
            out[name] = value if math.isfinite(value) else math.nan
        except (ArithmeticError, ValueError, RuntimeError):
            out[name] = math.nan
    return out


def _replicate_block(args: tuple[ScenarioConfig, int, int]) -> list[dict[str, float]]:
    config, start, stop = args
    return [replicate(config, r) for r in range(start, stop)]


def worker_count(requested: int | None = None) -> int:
    env = os.environ.get("SWTLE_THREADS")
    if env:
        return max(1, int(env))
    if requested:
        return max(1, int(requested))
    return 1


def run_scenario(config: ScenarioConfig, workers: int | None = None,
                 raise_on_failure: bool = True) -> MiseReport:
    """Run all replications and aggregate MISE per estimator.

    Replications are distributed over ``workers`` processes (``SWTLE_THREADS``
    overrides).  Results are gathered in replication order, so the report does
    not depend on the worker count.  Failed fits are excluded from the mean;
    more than 5% failures for any estimator raises :class:`ScenarioFailure`.
    """
    started = time.perf_counter()
    n_workers = worker_count(workers)
    if n_workers == 1:
        per_rep = [replicate(config, r) for r in range(config.reps)]
    else:
        size = max(1, math.ceil(config.reps / (4 * n_workers)))
        blocks = [(config, s, min(config.reps, s + size)) for s in range(0, config.reps, size)]
        with ProcessPoolExecutor(n_workers) as pool:
            per_rep = [row for block in pool.map(_replicate_block, blocks) for row in block]

    results: dict[str, EstimatorResult] = {}
    ise_values: dict[str, list[float]] = {}
    for name in config.estimators:
        values = np.array([row[name] for row in per_rep])
        ok = values[np.isfinite(values)]
        failures = int(values.size - ok.size)
        mise = float(ok.mean()) if ok.size else math.nan
        se = float(ok.std(ddof=1) / np.sqrt(ok.size)) if ok.size > 1 else math.nan
        results[name] = EstimatorResult(mise, se, int(ok.size), failures)
        ise_values[name] = values.tolist()
    report = MiseReport(config, results, time.perf_counter() - started, ise_values)

    worst = max(r.failures for r in results.values()) / config.reps
    if raise_on_failure and worst > MAX_FAILURE_RATE:
        detail = ", ".join(f"{k}: {r.failures}" for k, r in results.items())
        raise ScenarioFailure(f"replication failures above {MAX_FAILURE_RATE:.0%} ({detail})",
                              report)
    return report
