"""Leave-one-out cross-validated bandwidth for the Nadaraya-Watson mean."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from covroc.errors import InvalidInputError, SelectionError
from covroc.estimators import KernelSpec, PairedSample

MIN_SAMPLE = 10


@dataclass(frozen=True, eq=False)
class BandwidthSearch:
    """Candidate bandwidths (ascending, log-spaced by default) and CV mode."""

    candidates: NDArray[np.float64]
    mode: str = "loo"

    def __post_init__(self):
        c = np.array(self.candidates, dtype=np.float64).reshape(-1)
        if c.size < 5:
            raise InvalidInputError("a bandwidth search needs at least 5 candidates")
        if not np.all(np.isfinite(c)) or np.any(c <= 0.0):
            raise InvalidInputError("bandwidth candidates must be positive and finite")
        if np.any(np.diff(c) <= 0.0):
            raise InvalidInputError("bandwidth candidates must be strictly ascending")
        if self.mode != "loo":
            raise InvalidInputError(f"unsupported cross-validation mode {self.mode!r}")
        c.flags.writeable = False
        object.__setattr__(self, "candidates", c)


def default_search(
    covariate: ArrayLike, n_candidates: int = 25, lo: float = 0.05, hi: float = 2.0
) -> BandwidthSearch:
    """Log-spaced candidates between ``lo`` and ``hi`` times the covariate SD."""
    sd = float(np.std(np.asarray(covariate, dtype=np.float64), ddof=1))
    if not sd > 0.0:
        raise SelectionError("covariate is constant; no bandwidth scale available")
    return BandwidthSearch(np.geomspace(lo * sd, hi * sd, n_candidates))


def loo_cv_scores(
    sample: PairedSample, candidates: ArrayLike, kernel: KernelSpec | None = None
) -> NDArray[np.float64]:
    """``CV(g) = mean_i (Y_i - mu_{-i}(X_i; g))^2`` for each candidate ``g``.

    ``mu_{-i}`` renormalizes the kernel weights with observation ``i``
    removed.  Candidates for which some point has no neighbour with positive
    weight score ``inf``.
    """
    kernel = kernel or KernelSpec()
    x = sample.covariate
    y = sample.marker
    diff = x[:, None] - x[None, :]
    off_diag = ~np.eye(x.size, dtype=bool)
    scores = np.empty(np.size(candidates))
    for j, g in enumerate(np.asarray(candidates, dtype=np.float64)):
        u = diff / g
        if kernel.family == "gaussian":
            log_k = np.where(off_diag, -0.5 * u * u, -np.inf)
            k = np.exp(log_k - log_k.max(axis=1, keepdims=True))
        else:
            k = np.where(off_diag, kernel(u), 0.0)
        total = k.sum(axis=1)
        if np.any(~(total > 0.0)):
            scores[j] = np.inf
            continue
        pred = (k @ y) / total
        scores[j] = np.mean((y - pred) ** 2)
    return scores


def select_bandwidth(
    sample: PairedSample,
    kernel: KernelSpec | None = None,
    search: BandwidthSearch | None = None,
) -> float:
    """Candidate with the smallest leave-one-out CV score (first on ties)."""
    if len(sample) < MIN_SAMPLE:
        raise InvalidInputError(
            f"bandwidth selection needs at least {MIN_SAMPLE} observations, got {len(sample)}"
        )
    search = search or default_search(sample.covariate)
    scores = loo_cv_scores(sample, search.candidates, kernel)
    if not np.any(np.isfinite(scores)):
        raise SelectionError("every bandwidth candidate produced a degenerate fit")
    return float(search.candidates[int(np.argmin(scores))])
