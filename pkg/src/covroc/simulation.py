"""Simulation scenarios and the Monte Carlo level/power driver.

Each scenario is a pair of heteroscedastic location-scale models with
standard normal errors, ``Y^D = mu_D(X) + sigma_D(X) * eps``:

====  ==================  =====================  =========  =========  ========
id    mu_F(x)             mu_G(x)                sigma_F    sigma_G    X
====  ==================  =====================  =========  =========  ========
A     2.5                 1                      1.3        1          U(0, 1)
B     1.5 x               0                      0.5        0.5        U(0, 1)
C     2.5 + 2 log x       1 + 2 log x            1.3        1          U(1, 15)
D     x^2                 3 sin(pi (x + 1))      1          1          U(0, 1)
====  ==================  =====================  =========  =========  ========

A and B satisfy ROC = AROC (level); C and D do not (power).
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from covroc import streams
from covroc.errors import CovrocError, InvalidInputError, MonteCarloError
from covroc.io import StudyDataset
from covroc.testing import ALL_DISTANCES, DistanceKind, SplitConfig, TestConfig, run_test

log = logging.getLogger(__name__)

WORKERS_ENV = "COVROC_WORKERS"


def _const(c: float) -> Callable[[NDArray], NDArray]:
    return lambda x: np.full_like(x, c)


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    mean_f: Callable[[NDArray], NDArray]
    mean_g: Callable[[NDArray], NDArray]
    sd_f: Callable[[NDArray], NDArray]
    sd_g: Callable[[NDArray], NDArray]
    covariate_range: tuple[float, float] = (0.0, 1.0)
    roc_equals_aroc: bool = True


SCENARIOS: dict[str, ScenarioSpec] = {
    "A": ScenarioSpec("A", _const(2.5), _const(1.0), _const(1.3), _const(1.0)),
    "B": ScenarioSpec("B", lambda x: 1.5 * x, _const(0.0), _const(0.5), _const(0.5)),
    "C": ScenarioSpec(
        "C",
        lambda x: 2.5 + 2.0 * np.log(x),
        lambda x: 1.0 + 2.0 * np.log(x),
        _const(1.3),
        _const(1.0),
        covariate_range=(1.0, 15.0),
        roc_equals_aroc=False,
    ),
    "D": ScenarioSpec(
        "D",
        lambda x: x * x,
        lambda x: 3.0 * np.sin(np.pi * (x + 1.0)),
        _const(1.0),
        _const(1.0),
        roc_equals_aroc=False,
    ),
}

# (n_F, n_G) pairs of the published study
STUDY_SIZES = ((100, 100), (250, 350), (500, 500))
STUDY_RHOS = (1 / 2, 1 / 3, 1 / 4)


def get_scenario(spec: ScenarioSpec | str) -> ScenarioSpec:
    if isinstance(spec, ScenarioSpec):
        return spec
    try:
        return SCENARIOS[str(spec).upper()]
    except KeyError:
        raise InvalidInputError(f"unknown scenario {spec!r}; choose from {sorted(SCENARIOS)}") from None


def generate_scenario(spec: ScenarioSpec | str, nF: int, nG: int, seed: int) -> StudyDataset:
    """Draw a dataset; the two populations use independent substreams."""
    spec = get_scenario(spec)
    if nF < 1 or nG < 1:
        raise InvalidInputError(f"sample sizes must be positive, got ({nF}, {nG})")
    lo, hi = spec.covariate_range
    pops = []
    for pop, n, mean, sd in ((0, nF, spec.mean_f, spec.sd_f), (1, nG, spec.mean_g, spec.sd_g)):
        rng = streams.substream(seed, streams.DATA, pop)
        x = rng.uniform(lo, hi, size=n)
        eps = rng.standard_normal(n)
        pops.append((x, mean(x) + sd(x) * eps))
    (x_f, y_f), (x_g, y_g) = pops
    return StudyDataset.from_arrays(x_f, y_f, x_g, y_g, marker_name=f"scenario_{spec.id}")


def scenario_c_analytic_roc(p: ArrayLike) -> float | NDArray[np.float64]:
    """Conditional ROC of scenario C (the same for every x, and equal to AROC).

    ``1 - Phi((10/13) (Phi^{-1}(1 - p) - 3/2))``.
    """
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(~(p_arr > 0.0)) or np.any(~(p_arr < 1.0)):
        raise InvalidInputError("p must lie strictly inside (0, 1)")
    out = special.ndtr(-(10.0 / 13.0) * (special.ndtri(1.0 - p_arr) - 1.5))
    return float(out) if out.ndim == 0 else out


def calibration_interval(p_hat: float, alpha: float, n_s: int) -> tuple[float, float]:
    """``p_hat -/+ 1.96 sqrt(alpha (1 - alpha) / n_s)``, clipped to [0, 1]."""
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha!r}")
    if n_s < 1:
        raise InvalidInputError(f"n_s must be positive, got {n_s!r}")
    half = 1.96 * np.sqrt(alpha * (1.0 - alpha) / n_s)
    return max(0.0, p_hat - half), min(1.0, p_hat + half)


# ---------------------------------------------------------------------------
# Monte Carlo driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloPlan:
    """A grid of cells (size x rho) for one scenario, ``n_s`` datasets each.

    ``test`` is the template TestConfig; its ``B``, distances, grid and
    bandwidth policy are used as-is, while split ratio and seeds are set
    per cell and replication.
    """

    scenario: ScenarioSpec | str
    sample_sizes: Sequence[tuple[int, int]] = STUDY_SIZES
    n_s: int = 200
    alphas: Sequence[float] = (0.025, 0.05, 0.1)
    rhos: Sequence[float] = (0.5,)
    test: TestConfig = field(default_factory=lambda: TestConfig(B=200))
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "scenario", get_scenario(self.scenario))
        if self.n_s < 1:
            raise InvalidInputError(f"n_s must be positive, got {self.n_s}")
        if not self.alphas or any(not 0.0 < a < 1.0 for a in self.alphas):
            raise InvalidInputError(f"alphas must lie in (0, 1), got {self.alphas}")
        if not self.sample_sizes:
            raise InvalidInputError("at least one sample size pair is required")
        for rho in self.rhos:
            SplitConfig(rho=rho)
        object.__setattr__(self, "sample_sizes", tuple((int(a), int(b)) for a, b in self.sample_sizes))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "rhos", tuple(float(r) for r in self.rhos))


@dataclass(frozen=True)
class RejectionRow:
    scenario: str
    n_f: int
    n_g: int
    rho: float
    distance: str
    alpha: float
    rejections: int
    n_s: int
    proportion: float
    lo: float
    hi: float


@dataclass(frozen=True, eq=False)
class RejectionTable:
    """Rejection proportions per (size, rho, distance, alpha), plus raw p-values."""

    rows: tuple[RejectionRow, ...]
    p_values: dict[tuple[int, int, float, str], NDArray[np.float64]]
    B: int
    seed: int

    def lookup(self, n_f: int, n_g: int, rho: float, distance: str | DistanceKind, alpha: float) -> RejectionRow:
        d = DistanceKind.parse(distance).value
        for r in self.rows:
            if (r.n_f, r.n_g, r.distance) == (n_f, n_g, d) and np.isclose(r.rho, rho) and np.isclose(r.alpha, alpha):
                return r
        raise KeyError((n_f, n_g, rho, d, alpha))

    def proportion(self, *key) -> float:
        return self.lookup(*key).proportion


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers < 1:
        raise InvalidInputError(f"worker count must be positive, got {workers}")
    return workers


def _replication_seeds(plan_seed: int, scenario: str, n_f: int, n_g: int, r: int) -> tuple[int, int]:
    sid = "ABCD".index(scenario) if scenario in "ABCD" else 99
    data_seed = streams.derive_seed(plan_seed, streams.DATA, sid, n_f, n_g, r)
    test_seed = streams.derive_seed(plan_seed, streams.TEST, sid, n_f, n_g, r)
    return data_seed, test_seed


def _one_replication(args) -> NDArray[np.float64]:
    """p-values (rho x distance) for one simulated dataset."""
    scenario, n_f, n_g, r, rhos, template, plan_seed = args
    data_seed, test_seed = _replication_seeds(plan_seed, scenario, n_f, n_g, r)
    data = generate_scenario(scenario, n_f, n_g, data_seed)
    out = np.empty((len(rhos), len(template.distances)))
    for i, rho in enumerate(rhos):
        cfg = replace(template, split=SplitConfig(rho=rho, seed=test_seed), seed=test_seed, workers=1)
        try:
            res = run_test(data, cfg)
        except CovrocError as exc:
            raise MonteCarloError(
                f"scenario {scenario}, sizes ({n_f}, {n_g}), rho {rho:g}, replication {r}: {exc}",
                cell=(scenario, n_f, n_g, rho, r),
            ) from exc
        out[i] = [res.p_values[k] for k in template.distances]
    return out


def run_monte_carlo(plan: MonteCarloPlan, progress: Callable[[int, int], None] | None = None) -> RejectionTable:
    """Simulate ``n_s`` datasets per size, test each at every rho, tabulate.

    The same simulated datasets are reused across rhos.  A test rejects at
    level alpha when its p-value is <= alpha.  Results are deterministic in
    the plan (including its seed) whatever the worker count.
    """
    spec = plan.scenario
    workers = resolve_workers(plan.workers)
    jobs = [
        (spec.id, n_f, n_g, r, plan.rhos, plan.test, plan.seed)
        for (n_f, n_g) in plan.sample_sizes
        for r in range(plan.n_s)
    ]
    if spec.id not in SCENARIOS:
        raise InvalidInputError("run_monte_carlo only supports the built-in scenarios A-D")

    results: list[NDArray] = []
    total = len(jobs)
    if workers == 1:
        for j, job in enumerate(jobs):
            results.append(_one_replication(job))
            if progress:
                progress(j + 1, total)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for j, res in enumerate(pool.map(_one_replication, jobs, chunksize=4)):
                results.append(res)
                if progress:
                    progress(j + 1, total)

    distances = plan.test.distances
    rows = []
    pvals = {}
    for s, (n_f, n_g) in enumerate(plan.sample_sizes):
        block = np.stack(results[s * plan.n_s:(s + 1) * plan.n_s])  # (n_s, rho, distance)
        for i, rho in enumerate(plan.rhos):
            for j, k in enumerate(distances):
                pv = block[:, i, j].copy()
                pv.flags.writeable = False
                pvals[(n_f, n_g, rho, k.value)] = pv
                for alpha in plan.alphas:
                    rej = int(np.count_nonzero(pv <= alpha))
                    prop = rej / plan.n_s
                    lo, hi = calibration_interval(prop, alpha, plan.n_s)
                    rows.append(RejectionRow(spec.id, n_f, n_g, rho, k.value, alpha,
                                             rej, plan.n_s, prop, lo, hi))
    return RejectionTable(tuple(rows), pvals, B=plan.test.B, seed=plan.seed)


__all__ = [
    "ALL_DISTANCES",
    "MonteCarloPlan",
    "RejectionRow",
    "RejectionTable",
    "SCENARIOS",
    "STUDY_RHOS",
    "STUDY_SIZES",
    "ScenarioSpec",
    "calibration_interval",
    "generate_scenario",
    "get_scenario",
    "run_monte_carlo",
    "scenario_c_analytic_roc",
]
