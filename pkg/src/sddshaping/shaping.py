"""Training-demand distributions for the information-shaped RL policies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import ConfigError, Geography

PRIORITY_RATIO = 4.0
BASE_COV = 0.5
PRIORITY_COV = 0.25


@dataclass(frozen=True)
class ShapedDemandLaw:
    """Per-region normal(mean, cov * mean) expected demand, truncated at zero."""

    means: tuple[float, ...]
    covs: tuple[float, ...]

    def __post_init__(self):
        if len(self.means) != len(self.covs):
            raise ConfigError("means and covs must have equal length")
        if any(c <= 0 for c in self.covs):
            raise ConfigError("COV must be positive")
        if any(m < 0 for m in self.means):
            raise ConfigError("means must be nonnegative")

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        return sample_training_demands(self, rng)


def shape_equal(geo: Geography, cov: float = BASE_COV) -> ShapedDemandLaw:
    """Every region centred on the average initial demand."""
    mean = float(geo.initial_demands.mean())
    return ShapedDemandLaw((mean,) * geo.n_regions, (cov,) * geo.n_regions)


def default_priorities(geo: Geography) -> tuple[bool, ...]:
    """Above-average initial demand, or the region nearest the warehouse when demands are equal."""
    d = geo.initial_demands
    if np.ptp(d) > 0:
        return tuple(bool(v) for v in d > d.mean())
    wx, wy = geo.warehouse
    dist = []
    for r in geo.regions:
        x0, x1, y0, y1 = r.bounding_box()
        dist.append(np.hypot((x0 + x1) / 2 - wx, (y0 + y1) / 2 - wy))
    nearest = int(np.argmin(dist))
    return tuple(i == nearest for i in range(geo.n_regions))


def shape_priority(geo: Geography, priorities=None, ratio: float = PRIORITY_RATIO,
                   priority_cov: float = PRIORITY_COV, other_cov: float = BASE_COV
                   ) -> ShapedDemandLaw:
    """Split the total initial demand so each priority region gets ``ratio`` times a non-priority one."""
    flags = tuple(bool(p) for p in (default_priorities(geo) if priorities is None else priorities))
    if len(flags) != geo.n_regions:
        raise ConfigError("one priority flag per region required")
    n_p = sum(flags)
    n_np = len(flags) - n_p
    if n_p == 0 or n_np == 0:
        raise ConfigError("priority shaping needs at least one priority and one other region")
    base = float(geo.initial_demands.sum()) / (ratio * n_p + n_np)
    means = tuple(ratio * base if f else base for f in flags)
    covs = tuple(priority_cov if f else other_cov for f in flags)
    return ShapedDemandLaw(means, covs)


def sample_training_demands(law: ShapedDemandLaw, rng: np.random.Generator) -> np.ndarray:
    """One draw per region; negative draws are redrawn."""
    out = np.empty(len(law.means))
    for i, (m, cov) in enumerate(zip(law.means, law.covs)):
        v = rng.normal(m, cov * m)
        while v < 0:
            v = rng.normal(m, cov * m)
        out[i] = v
    return out

