"""Empirical distributions, kernel location-scale regression, ROC estimators.

Three curves are estimated from two-population diagnostic data:

* the pooled ROC curve, ``ROC(p) = 1 - F(G^{-1}(1 - p))``, from markers only;
* the covariate-specific curve ``ROC^x(p)`` at a fixed covariate value;
* the covariate-adjusted curve ``AROC(p) = P(Y^F > G^{-1}(1 - p | X^F))``.

The conditional curves rely on a location-scale model per population,
``Y = mu(X) + sigma(X) * eps``, where ``mu`` and ``sigma`` are Nadaraya-Watson
estimates sharing one bandwidth and ``eps`` has distribution ``H`` estimated
by the empirical CDF of the standardized residuals.

All curves are evaluated on a fixed grid of false-positive fractions strictly
inside (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from covroc.errors import EvaluationError, InvalidInputError

DEFAULT_GRID_SIZE = 500
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _as_finite_vector(values: ArrayLike, name: str) -> NDArray[np.float64]:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if arr.size == 0:
        raise InvalidInputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        bad = np.flatnonzero(~np.isfinite(arr))[:5]
        raise InvalidInputError(f"{name} contains non-finite values at positions {bad.tolist()}")
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MarkerSample:
    """Marker values for one population, covariates discarded."""

    values: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "values", _as_finite_vector(self.values, "marker sample"))

    def __len__(self) -> int:
        return self.values.size

    @property
    def sorted(self) -> NDArray[np.float64]:
        # cached lazily; the instance is otherwise immutable
        try:
            return self.__dict__["_sorted"]
        except KeyError:
            s = np.sort(self.values)
            s.flags.writeable = False
            self.__dict__["_sorted"] = s
            return s


@dataclass(frozen=True, eq=False)
class PairedSample:
    """(covariate, marker) observations for one population."""

    covariate: NDArray[np.float64]
    marker: NDArray[np.float64]

    def __post_init__(self):
        x = _as_finite_vector(self.covariate, "covariate")
        y = _as_finite_vector(self.marker, "marker")
        if x.size != y.size:
            raise InvalidInputError(
                f"covariate and marker lengths differ ({x.size} vs {y.size})"
            )
        object.__setattr__(self, "covariate", x)
        object.__setattr__(self, "marker", y)

    def __len__(self) -> int:
        return self.marker.size

    def markers(self) -> MarkerSample:
        return MarkerSample(self.marker)

    def subset(self, idx: ArrayLike) -> PairedSample:
        idx = np.asarray(idx, dtype=np.intp)
        return PairedSample(self.covariate[idx], self.marker[idx])


@dataclass(frozen=True, eq=False)
class Curve:
    """A curve on a grid of false-positive fractions in (0, 1)."""

    grid: NDArray[np.float64]
    values: NDArray[np.float64]

    def __post_init__(self):
        grid = _as_finite_vector(self.grid, "grid")
        values = _as_finite_vector(self.values, "curve values")
        if grid.size != values.size:
            raise InvalidInputError(
                f"grid and values lengths differ ({grid.size} vs {values.size})"
            )
        validate_grid(grid)
        if values.min() < 0.0 or values.max() > 1.0:
            raise InvalidInputError("curve values must lie in [0, 1]")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.grid.size


_KERNELS = ("gaussian", "epanechnikov")


@dataclass(frozen=True)
class KernelSpec:
    """Smoothing kernel: a symmetric probability density on the real line.

    ``gaussian`` (default) has unbounded support, so weights never vanish;
    ``epanechnikov`` is compactly supported on [-1, 1].
    """

    family: str = "gaussian"

    def __post_init__(self):
        if self.family not in _KERNELS:
            raise InvalidInputError(f"unknown kernel {self.family!r}; choose from {_KERNELS}")

    def __call__(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.family == "gaussian":
            return np.exp(-0.5 * u * u) / _SQRT_2PI
        return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def default_grid(m: int = DEFAULT_GRID_SIZE) -> NDArray[np.float64]:
    """Equispaced grid ``k / (m + 1)``, ``k = 1..m``."""
    if m < 1:
        raise InvalidInputError(f"grid size must be positive, got {m}")
    return np.arange(1, m + 1, dtype=np.float64) / (m + 1)


def validate_grid(grid: NDArray[np.float64]) -> None:
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidInputError("grid must be a non-empty vector")
    if grid[0] <= 0.0 or grid[-1] >= 1.0:
        raise InvalidInputError("grid points must lie strictly inside (0, 1)")
    if grid.size > 1 and np.any(np.diff(grid) <= 0.0):
        raise InvalidInputError("grid must be strictly increasing")


def _grid(grid: ArrayLike | None) -> NDArray[np.float64]:
    if grid is None:
        return default_grid()
    g = np.asarray(grid, dtype=np.float64).reshape(-1)
    validate_grid(g)
    return g


# ---------------------------------------------------------------------------
# Empirical distribution functions
# ---------------------------------------------------------------------------

def _ecdf_sorted(sorted_values: NDArray, t: ArrayLike) -> NDArray[np.float64]:
    n = sorted_values.size
    return np.searchsorted(sorted_values, t, side="right") / n


def _quantile_sorted(sorted_values: NDArray, p: ArrayLike) -> NDArray[np.float64]:
    # inf{t : #{v <= t} / n >= p}; the levels j/n are formed exactly as the
    # ECDF forms them, so the generalized-inverse identity holds in floats
    n = sorted_values.size
    levels = np.arange(1, n + 1, dtype=np.float64) / n
    k = np.searchsorted(levels, p, side="left")
    return sorted_values[np.minimum(k, n - 1)]


def ecdf_eval(sample: MarkerSample, t: ArrayLike) -> float | NDArray[np.float64]:
    """Empirical CDF ``#{i : value_i <= t} / n`` (right-continuous)."""
    if not isinstance(sample, MarkerSample):
        sample = MarkerSample(sample)
    out = _ecdf_sorted(sample.sorted, t)
    return float(out) if np.ndim(out) == 0 else out


def empirical_quantile(sample: MarkerSample, p: ArrayLike) -> float | NDArray[np.float64]:
    """Left-continuous inverse ``inf{t : ecdf(t) >= p}`` for ``p`` in (0, 1].

    Equals the ``ceil(n p)``-th order statistic.
    """
    if not isinstance(sample, MarkerSample):
        sample = MarkerSample(sample)
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(~(p_arr > 0.0)) or np.any(~(p_arr <= 1.0)):
        raise InvalidInputError("quantile level must lie in (0, 1]")
    out = _quantile_sorted(sample.sorted, p_arr)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Pooled ROC
# ---------------------------------------------------------------------------

def _pooled_roc_values(sorted_f: NDArray, sorted_g: NDArray, grid: NDArray) -> NDArray:
    thresholds = _quantile_sorted(sorted_g, 1.0 - grid)
    return 1.0 - _ecdf_sorted(sorted_f, thresholds)


def pooled_roc(
    diseased: MarkerSample, healthy: MarkerSample, grid: ArrayLike | None = None
) -> Curve:
    """Empirical ROC curve ``1 - F_n(G_n^{-1}(1 - p))``."""
    if not isinstance(diseased, MarkerSample):
        diseased = MarkerSample(diseased)
    if not isinstance(healthy, MarkerSample):
        healthy = MarkerSample(healthy)
    g = _grid(grid)
    return Curve(g, _pooled_roc_values(diseased.sorted, healthy.sorted, g))


# ---------------------------------------------------------------------------
# Nadaraya-Watson location-scale fit
# ---------------------------------------------------------------------------

def default_variance_floor(marker: NDArray[np.float64]) -> float:
    """``1e-8`` times the marker SD, or ``1e-8`` for a constant marker."""
    # np.std of a constant array can be a rounding residue rather than 0
    if np.ptp(marker) == 0.0:
        return 1e-8
    return 1e-8 * float(np.std(marker))


def weighted_mean(w: NDArray, y: NDArray) -> NDArray[np.float64]:
    """``w @ y`` centred on the median of ``y``.

    Rows of ``w`` sum to one up to rounding, so centring leaves the value
    unchanged mathematically while making a constant marker reproduce
    itself exactly.
    """
    ref = float(np.median(y))
    return ref + w @ (y - ref)


def kernel_weights(
    x: ArrayLike, centres: NDArray, bandwidth: float, kernel: KernelSpec
) -> NDArray[np.float64]:
    """Row-normalized Nadaraya-Watson weights, shape ``(len(x), len(centres))``.

    Raises :class:`EvaluationError` for any ``x`` at which every kernel
    weight vanishes.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    u = (x[:, None] - centres[None, :]) / bandwidth
    if kernel.family == "gaussian":
        # shift by the row maximum before exponentiating; the constant cancels
        # in the normalization and far-away x no longer underflows to 0/0
        log_k = -0.5 * u * u
        k = np.exp(log_k - log_k.max(axis=1, keepdims=True))
    else:
        k = kernel(u)
    total = k.sum(axis=1)
    dead = ~(total > 0.0)
    if np.any(dead):
        bad = float(x[np.flatnonzero(dead)[0]])
        raise EvaluationError(
            f"all kernel weights vanish at x={bad!r} (bandwidth {bandwidth:g}, "
            f"kernel {kernel.family})",
            x=bad,
        )
    return k / total[:, None]


class RegressionFit:
    """Nadaraya-Watson location-scale fit of marker on covariate.

    ``mean(x) = sum_i W_i(x) Y_i`` and
    ``sd(x) = max(floor, sqrt(sum_i W_i(x) (Y_i - mean(X_i))^2))``, with one
    bandwidth for both.  Build instances with :func:`nw_fit`.
    """

    def __init__(
        self,
        training: PairedSample,
        bandwidth: float,
        kernel: KernelSpec,
        variance_floor: float,
        _train_weights: NDArray | None = None,
    ):
        self.training = training
        self.bandwidth = float(bandwidth)
        self.kernel = kernel
        self.variance_floor = float(variance_floor)
        if _train_weights is None:
            _train_weights = kernel_weights(training.covariate, training.covariate, self.bandwidth, kernel)
            _train_weights.flags.writeable = False
        self._w_train = _train_weights
        y = training.marker
        self.fitted_mean = weighted_mean(self._w_train, y)
        self._sq_dev = (y - self.fitted_mean) ** 2
        self.fitted_sd = self._sd_from_weights(self._w_train)
        self.fitted_mean.flags.writeable = False
        self.fitted_sd.flags.writeable = False

    def _sd_from_weights(self, w: NDArray) -> NDArray:
        return np.maximum(self.variance_floor, np.sqrt(w @ self._sq_dev))

    def weights(self, x: ArrayLike) -> NDArray[np.float64]:
        return kernel_weights(x, self.training.covariate, self.bandwidth, self.kernel)

    def mean(self, x: ArrayLike) -> float | NDArray[np.float64]:
        out = weighted_mean(self.weights(x), self.training.marker)
        return float(out[0]) if np.ndim(x) == 0 else out

    def sd(self, x: ArrayLike) -> float | NDArray[np.float64]:
        out = self._sd_from_weights(self.weights(x))
        return float(out[0]) if np.ndim(x) == 0 else out

    def mean_sd(self, x: ArrayLike) -> tuple[NDArray, NDArray]:
        """Mean and SD at ``x`` sharing one weight computation."""
        w = self.weights(x)
        return weighted_mean(w, self.training.marker), self._sd_from_weights(w)

    def refit(self, marker: ArrayLike) -> RegressionFit:
        """Same covariates, bandwidth and floor, new marker values."""
        return RegressionFit(
            PairedSample(self.training.covariate, marker),
            self.bandwidth,
            self.kernel,
            self.variance_floor,
            _train_weights=self._w_train,
        )

    def __repr__(self) -> str:
        return (
            f"RegressionFit(n={len(self.training)}, bandwidth={self.bandwidth:.6g}, "
            f"kernel={self.kernel.family!r})"
        )


def nw_fit(
    sample: PairedSample,
    bandwidth: float,
    kernel: KernelSpec | None = None,
    variance_floor: float | None = None,
) -> RegressionFit:
    """Fit the Nadaraya-Watson location-scale model to ``sample``.

    Parameters
    ----------
    sample : PairedSample
        At least two observations.
    bandwidth : float
        Positive, in covariate units; shared by mean and variance.
    kernel : KernelSpec, optional
        Defaults to the Gaussian kernel.
    variance_floor : float, optional
        Lower clamp for the fitted SD; defaults to
        :func:`default_variance_floor` of the marker.
    """
    if not bandwidth > 0.0 or not np.isfinite(bandwidth):
        raise InvalidInputError(f"bandwidth must be positive and finite, got {bandwidth!r}")
    if len(sample) < 2:
        raise InvalidInputError("a kernel fit needs at least 2 observations")
    kernel = kernel or KernelSpec()
    if variance_floor is None:
        variance_floor = default_variance_floor(sample.marker)
    if not variance_floor > 0.0:
        raise InvalidInputError(f"variance_floor must be positive, got {variance_floor!r}")
    return RegressionFit(sample, bandwidth, kernel, variance_floor)


@dataclass(frozen=True, eq=False)
class ResidualSet:
    """Standardized residuals of a fit, with their sorted copy for ECDF work."""

    residuals: NDArray[np.float64]
    source: RegressionFit = field(repr=False)

    def __post_init__(self):
        if self.residuals.size != len(self.source.training):
            raise InvalidInputError("residual count must match the fit's training size")
        s = np.sort(self.residuals)
        s.flags.writeable = False
        object.__setattr__(self, "sorted", s)

    def __len__(self) -> int:
        return self.residuals.size


def standardized_residuals(fit: RegressionFit) -> ResidualSet:
    """``(Y_i - mean(X_i)) / sd(X_i)`` at every training point."""
    eps = (fit.training.marker - fit.fitted_mean) / fit.fitted_sd
    eps.flags.writeable = False
    return ResidualSet(eps, fit)


# ---------------------------------------------------------------------------
# AROC and conditional ROC
# ---------------------------------------------------------------------------

def aroc_from_standardized(
    standardized_f: NDArray, sorted_residuals_g: NDArray, grid: NDArray
) -> NDArray[np.float64]:
    """AROC values from diseased markers standardized under the healthy fit.

    ``U_i = H_G(z_i)`` is the healthy residual ECDF at each standardized
    diseased marker; ``AROC(p) = #{i : U_i > 1 - p} / n_F``.
    """
    u = np.sort(_ecdf_sorted(sorted_residuals_g, standardized_f))
    n_f = u.size
    return (n_f - np.searchsorted(u, 1.0 - grid, side="right")) / n_f


def aroc_estimate(
    diseased: PairedSample,
    healthy: PairedSample,
    bw_G: float,
    kernel: KernelSpec | None = None,
    grid: ArrayLike | None = None,
    *,
    healthy_fit: RegressionFit | None = None,
) -> Curve:
    """Covariate-adjusted ROC curve.

    Only the healthy population is modelled: each diseased marker is
    standardized with the healthy mean and SD at its own covariate value and
    placed against the healthy residual ECDF.  ``healthy_fit`` may be passed
    to reuse an existing fit (``bw_G`` and ``kernel`` are then ignored).
    """
    g = _grid(grid)
    if healthy_fit is None:
        healthy_fit = nw_fit(healthy, bw_G, kernel)
    res_g = standardized_residuals(healthy_fit)
    mu, sd = healthy_fit.mean_sd(diseased.covariate)
    z = (diseased.marker - mu) / sd
    return Curve(g, aroc_from_standardized(z, res_g.sorted, g))


def conditional_roc(
    x: float,
    fit_F: RegressionFit,
    fit_G: RegressionFit,
    res_F: ResidualSet,
    res_G: ResidualSet,
    grid: ArrayLike | None = None,
) -> Curve:
    """Covariate-specific ROC curve at covariate value ``x``.

    ``1 - H_F((mu_G(x) + sd_G(x) H_G^{-1}(1 - p) - mu_F(x)) / sd_F(x))``.
    """
    g = _grid(grid)
    mu_f, sd_f = (float(v[0]) for v in fit_F.mean_sd([x]))
    mu_g, sd_g = (float(v[0]) for v in fit_G.mean_sd([x]))
    thresholds = mu_g + sd_g * _quantile_sorted(res_G.sorted, 1.0 - g)
    values = 1.0 - _ecdf_sorted(res_F.sorted, (thresholds - mu_f) / sd_f)
    return Curve(g, values)


def auc(curve: Curve) -> float:
    """Trapezoidal area, with the curve pinned to 0 at p=0 and 1 at p=1."""
    p = np.concatenate(([0.0], curve.grid, [1.0]))
    v = np.concatenate(([0.0], curve.values, [1.0]))
    return float(np.sum(np.diff(p) * (v[1:] + v[:-1])) / 2.0)
