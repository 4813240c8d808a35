"""Bootstrap test of H0: AROC(p) = ROC(p) for all p.

The observed statistic is a distance between the pooled ROC curve, estimated
on one random part of each population, and the AROC curve, estimated on the
other part.  Its null distribution is approximated by resampling each part
from its own fitted model (markers from their ECDF; AROC-part markers by
resampling standardized residuals around the fitted location-scale model)
and measuring the distance between the *centred* bootstrap deviations,
``(ROC* - ROC) - (AROC* - AROC)``.  Centring reproduces the null without
having to impose it on the resampling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np
from numpy.typing import NDArray

from covroc import streams
from covroc.bandwidth import default_search, select_bandwidth
from covroc.errors import CovrocError, InvalidInputError, ReplicateError
from covroc.estimators import (
    Curve,
    KernelSpec,
    MarkerSample,
    PairedSample,
    RegressionFit,
    _pooled_roc_values,
    aroc_from_standardized,
    auc,
    default_grid,
    nw_fit,
    standardized_residuals,
    weighted_mean,
)

if TYPE_CHECKING:
    from covroc.io import StudyDataset


class DistanceKind(str, Enum):
    L1 = "L1"
    L2 = "L2"
    KS = "KS"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for k in cls:
                if k.value == value.upper():
                    return k
        return None

    @classmethod
    def parse(cls, value) -> DistanceKind:
        try:
            return cls(value)
        except ValueError:
            raise InvalidInputError(f"unknown distance kind {value!r}; expected L1, L2 or KS") from None


ALL_DISTANCES = (DistanceKind.L1, DistanceKind.L2, DistanceKind.KS)


def _distance(diff: NDArray, kind: DistanceKind) -> float:
    # grid means approximate integrals over (0, 1)
    if kind is DistanceKind.L1:
        return float(np.mean(np.abs(diff)))
    if kind is DistanceKind.L2:
        return float(np.mean(diff * diff))
    return float(np.max(np.abs(diff)))


def curve_distance(a: Curve, b: Curve, kind: DistanceKind | str) -> float:
    """L1 / L2 / KS distance between two curves sharing a grid."""
    kind = DistanceKind.parse(kind)
    if a.grid.shape != b.grid.shape or not np.array_equal(a.grid, b.grid):
        raise InvalidInputError("curves must share the same grid")
    return _distance(a.values - b.values, kind)


def normalize_distances(kinds: Iterable[DistanceKind | str]) -> tuple[DistanceKind, ...]:
    """Deduplicate and order distance kinds (L1, L2, KS)."""
    wanted = {DistanceKind.parse(k) for k in kinds}
    if not wanted:
        raise InvalidInputError("at least one distance kind is required")
    return tuple(k for k in ALL_DISTANCES if k in wanted)


# ---------------------------------------------------------------------------
# Sample splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitConfig:
    """Fraction ``rho`` of each population used for the pooled ROC curve."""

    rho: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise InvalidInputError(f"rho must lie in (0, 1), got {self.rho!r}")


@dataclass(frozen=True, eq=False)
class SplitRecord:
    """Index sets (into the original populations) of each part."""

    roc_diseased: NDArray[np.intp]
    roc_healthy: NDArray[np.intp]
    aroc_diseased: NDArray[np.intp]
    aroc_healthy: NDArray[np.intp]
    rho: float
    seed: int


@dataclass(frozen=True, eq=False)
class SplitParts:
    roc_diseased: MarkerSample
    roc_healthy: MarkerSample
    aroc_diseased: PairedSample
    aroc_healthy: PairedSample
    record: SplitRecord


def roc_part_size(n: int, rho: float) -> int:
    # the tiny offset keeps e.g. (1/3) * 300 from flooring to 99
    return int(math.floor(rho * n + 1e-9))


def split_sample(data: StudyDataset, cfg: SplitConfig) -> SplitParts:
    """Randomly split each population into a ROC part and an AROC part.

    ``floor(rho * n)`` indices, drawn uniformly without replacement and
    independently per population, form the ROC part (markers only); the
    rest form the AROC part.
    """
    parts = {}
    for pop, sample in (("diseased", data.diseased), ("healthy", data.healthy)):
        n = len(sample)
        if n < 4:
            raise InvalidInputError(
                f"{pop} population has {n} observations; the split needs at least 4"
            )
        n_roc = roc_part_size(n, cfg.rho)
        if n_roc < 2 or n - n_roc < 2:
            raise InvalidInputError(
                f"rho={cfg.rho} splits the {pop} population (n={n}) into parts of "
                f"{n_roc} and {n - n_roc}; both need at least 2 observations"
            )
        rng = streams.substream(cfg.seed, streams.SPLIT, 0 if pop == "diseased" else 1)
        roc_idx = np.sort(rng.choice(n, size=n_roc, replace=False))
        mask = np.ones(n, dtype=bool)
        mask[roc_idx] = False
        parts[pop] = (roc_idx, np.flatnonzero(mask))

    record = SplitRecord(
        roc_diseased=parts["diseased"][0],
        roc_healthy=parts["healthy"][0],
        aroc_diseased=parts["diseased"][1],
        aroc_healthy=parts["healthy"][1],
        rho=cfg.rho,
        seed=cfg.seed,
    )
    return SplitParts(
        roc_diseased=MarkerSample(data.diseased.marker[record.roc_diseased]),
        roc_healthy=MarkerSample(data.healthy.marker[record.roc_healthy]),
        aroc_diseased=data.diseased.subset(record.aroc_diseased),
        aroc_healthy=data.healthy.subset(record.aroc_healthy),
        record=record,
    )


# ---------------------------------------------------------------------------
# Configuration and result
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BandwidthPolicy:
    """Either LOO-CV selection (``fixed=None``) or fixed ``(g_F, g_G)``.

    ``reselect_in_bootstrap`` re-runs the selection for the healthy fit on
    every bootstrap sample instead of reusing the original bandwidth.
    """

    fixed: tuple[float, float] | None = None
    reselect_in_bootstrap: bool = False
    n_candidates: int = 25

    def __post_init__(self):
        if self.fixed is not None:
            g_f, g_g = self.fixed
            if not (g_f > 0 and g_g > 0 and np.isfinite(g_f) and np.isfinite(g_g)):
                raise InvalidInputError(f"fixed bandwidths must be positive, got {self.fixed}")
            object.__setattr__(self, "fixed", (float(g_f), float(g_g)))

    @property
    def mode(self) -> str:
        return "auto" if self.fixed is None else "fixed"


@dataclass(frozen=True)
class TestConfig:
    """Everything that determines a test run (together with the data)."""

    __test__ = False  # keep pytest from collecting this class

    B: int = 500
    split: SplitConfig = field(default_factory=SplitConfig)
    distances: tuple[DistanceKind, ...] = ALL_DISTANCES
    grid_size: int = 500
    kernel: KernelSpec = field(default_factory=KernelSpec)
    bandwidth: BandwidthPolicy = field(default_factory=BandwidthPolicy)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.B, (int, np.integer)) or self.B < 1:
            raise InvalidInputError(f"B must be a positive integer, got {self.B!r}")
        if self.grid_size < 10:
            raise InvalidInputError(f"grid size must be at least 10, got {self.grid_size}")
        if self.workers < 1:
            raise InvalidInputError(f"workers must be positive, got {self.workers}")
        object.__setattr__(self, "distances", normalize_distances(self.distances))


@dataclass(frozen=True, eq=False)
class TestResult:
    """Observed statistics, bootstrap replicates and p-values of one run."""

    __test__ = False

    statistics: Mapping[DistanceKind, float]
    p_values: Mapping[DistanceKind, float]
    bootstrap_replicates: Mapping[DistanceKind, NDArray[np.float64]]
    roc_curve: Curve
    aroc_curve: Curve
    split_record: SplitRecord
    bandwidths: tuple[float, float]
    B: int
    seed: int

    @property
    def rho(self) -> float:
        return self.split_record.rho

    @property
    def auc(self) -> float:
        return auc(self.roc_curve)

    @property
    def aauc(self) -> float:
        return auc(self.aroc_curve)

    def summary(self) -> str:
        lines = [
            "Test of H0: AROC = ROC",
            "=" * 40,
            f"B = {self.B}, rho = {self.rho:g}, seed = {self.seed}",
            f"bandwidths (F, G) = ({self.bandwidths[0]:.4g}, {self.bandwidths[1]:.4g})",
            f"AUC  = {self.auc:.4f}",
            f"AAUC = {self.aauc:.4f}",
        ]
        for k in self.statistics:
            lines.append(f"{k.value:<3} statistic = {self.statistics[k]:.6g}   p-value = {self.p_values[k]:.4g}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# The test
# ---------------------------------------------------------------------------

def resolve_bandwidths(
    diseased: PairedSample, healthy: PairedSample, cfg: TestConfig
) -> tuple[float, float]:
    if cfg.bandwidth.fixed is not None:
        return cfg.bandwidth.fixed
    out = []
    for pop, sample in (("diseased", diseased), ("healthy", healthy)):
        try:
            search = default_search(sample.covariate, n_candidates=cfg.bandwidth.n_candidates)
            out.append(select_bandwidth(sample, cfg.kernel, search))
        except CovrocError as exc:
            raise type(exc)(f"bandwidth selection failed for the {pop} AROC part: {exc}") from exc
    return out[0], out[1]


class _Bootstrap:
    """Per-dataset state shared by every bootstrap replicate."""

    def __init__(self, parts: SplitParts, fit_f: RegressionFit, fit_g: RegressionFit,
                 roc: NDArray, aroc: NDArray, grid: NDArray, cfg: TestConfig):
        self.cfg = cfg
        self.grid = grid
        self.roc = roc
        self.aroc = aroc
        self.roc_f = parts.roc_diseased.values
        self.roc_g = parts.roc_healthy.values
        self.x_f = parts.aroc_diseased.covariate
        self.x_g = parts.aroc_healthy.covariate
        self.fit_g = fit_g
        self.res_f = standardized_residuals(fit_f).residuals
        self.res_g = standardized_residuals(fit_g).residuals
        self.mean_f, self.sd_f = fit_f.fitted_mean, fit_f.fitted_sd
        self.mean_g, self.sd_g = fit_g.fitted_mean, fit_g.fitted_sd
        self.w_gg = fit_g._w_train
        self.w_gf = fit_g.weights(self.x_f)
        self.floor_g = fit_g.variance_floor

    def replicate(self, b: int) -> NDArray[np.float64]:
        rng = streams.substream(self.cfg.seed, streams.BOOTSTRAP, b)
        y_rf = np.sort(rng.choice(self.roc_f, size=self.roc_f.size, replace=True))
        y_rg = np.sort(rng.choice(self.roc_g, size=self.roc_g.size, replace=True))
        e_f = self.res_f[rng.integers(0, self.res_f.size, size=self.res_f.size)]
        e_g = self.res_g[rng.integers(0, self.res_g.size, size=self.res_g.size)]
        y_af = self.mean_f + self.sd_f * e_f
        y_ag = self.mean_g + self.sd_g * e_g

        if self.cfg.bandwidth.reselect_in_bootstrap:
            sample = PairedSample(self.x_g, y_ag)
            g = select_bandwidth(sample, self.cfg.kernel,
                                 default_search(self.x_g, n_candidates=self.cfg.bandwidth.n_candidates))
            fit = nw_fit(sample, g, self.cfg.kernel, self.floor_g)
            w_gg, w_gf = fit._w_train, fit.weights(self.x_f)
        else:
            w_gg, w_gf = self.w_gg, self.w_gf

        # healthy refit with fixed design, then diseased standardization
        m_g = weighted_mean(w_gg, y_ag)
        sq = (y_ag - m_g) ** 2
        s_g = np.maximum(self.floor_g, np.sqrt(w_gg @ sq))
        resid_g = np.sort((y_ag - m_g) / s_g)
        m_at_f = weighted_mean(w_gf, y_ag)
        s_at_f = np.maximum(self.floor_g, np.sqrt(w_gf @ sq))
        z = (y_af - m_at_f) / s_at_f

        aroc_b = aroc_from_standardized(z, resid_g, self.grid)
        roc_b = _pooled_roc_values(y_rf, y_rg, self.grid)
        diff = (roc_b - self.roc) - (aroc_b - self.aroc)
        return np.array([_distance(diff, k) for k in self.cfg.distances])

    def run(self) -> NDArray[np.float64]:
        B = self.cfg.B
        out = np.empty((B, len(self.cfg.distances)))

        def work(b: int) -> None:
            try:
                out[b] = self.replicate(b)
            except CovrocError as exc:
                raise ReplicateError(f"bootstrap replicate {b} failed: {exc}", replicate=b,
                                     population=getattr(exc, "population", None)) from exc

        if self.cfg.workers == 1:
            for b in range(B):
                work(b)
        else:
            with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
                list(pool.map(work, range(B)))
        return out


def run_test(data: StudyDataset, cfg: TestConfig | None = None) -> TestResult:
    """Run the split-sample bootstrap test of ROC = AROC.

    Deterministic in ``(data, cfg)``: each replicate ``b`` draws from its own
    substream of ``cfg.seed``, so ``cfg.workers`` never changes the result.
    """
    cfg = cfg or TestConfig()
    grid = default_grid(cfg.grid_size)
    parts = split_sample(data, cfg.split)

    roc = _pooled_roc_values(parts.roc_diseased.sorted, parts.roc_healthy.sorted, grid)
    g_f, g_g = resolve_bandwidths(parts.aroc_diseased, parts.aroc_healthy, cfg)
    fit_f = nw_fit(parts.aroc_diseased, g_f, cfg.kernel)
    fit_g = nw_fit(parts.aroc_healthy, g_g, cfg.kernel)
    res_g = standardized_residuals(fit_g)
    mu, sd = fit_g.mean_sd(parts.aroc_diseased.covariate)
    aroc = aroc_from_standardized((parts.aroc_diseased.marker - mu) / sd, res_g.sorted, grid)

    diff = roc - aroc
    observed = {k: _distance(diff, k) for k in cfg.distances}
    reps = _Bootstrap(parts, fit_f, fit_g, roc, aroc, grid, cfg).run()

    replicates = {}
    p_values = {}
    for j, k in enumerate(cfg.distances):
        col = reps[:, j].copy()
        col.flags.writeable = False
        replicates[k] = col
        p_values[k] = int(np.count_nonzero(observed[k] <= col)) / cfg.B

    return TestResult(
        statistics=observed,
        p_values=p_values,
        bootstrap_replicates=replicates,
        roc_curve=Curve(grid, roc),
        aroc_curve=Curve(grid, aroc),
        split_record=parts.record,
        bandwidths=(g_f, g_g),
        B=cfg.B,
        seed=cfg.seed,
    )
