"""Two-region steady-state allocation with log demand and square-root tour cost.

Region i served at rate r_i attracts lam_i = ln(M_i r_i + 1) requests and
costs beta * sqrt(A r_i lam_i) delivery resource; the total is capped at T
and the objective is lam_1 r_1 + lam_2 r_2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class StylizedInstance:
    T: float
    A: float
    beta: float
    M1: float
    M2: float

    def __post_init__(self):
        for name in ("T", "A", "beta", "M1", "M2"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")

    def swapped(self) -> "StylizedInstance":
        return StylizedInstance(self.T, self.A, self.beta, self.M2, self.M1)

    @property
    def unit(self) -> float:
        """A * beta^2: services = (resource)^2 / unit."""
        return self.A * self.beta ** 2


def region_cost(inst: StylizedInstance, M: float, r: float) -> float:
    return inst.beta * math.sqrt(inst.A * r * math.log(M * r + 1.0))


@dataclass(frozen=True)
class Allocation:
    r1: float
    r2: float
    lam1: float
    lam2: float
    objective: float
    resource_used: float
    cost1: float
    cost2: float

    def slack(self, T: float) -> float:
        return T - self.resource_used


def allocation(inst: StylizedInstance, r1: float, r2: float) -> Allocation:
    lam1 = math.log(inst.M1 * r1 + 1.0)
    lam2 = math.log(inst.M2 * r2 + 1.0)
    c1 = inst.beta * math.sqrt(r1 * lam1 * inst.A)
    c2 = inst.beta * math.sqrt(r2 * lam2 * inst.A)
    return Allocation(r1, r2, lam1, lam2, lam1 * r1 + lam2 * r2, c1 + c2, c1, c2)


def is_feasible(inst: StylizedInstance, r1: float, r2: float, rtol: float = 1e-12) -> bool:
    return allocation(inst, r1, r2).resource_used <= inst.T * (1 + rtol)


def bisect(fn, lo: float, hi: float, ftol: float, max_iter: int = 200) -> float:
    """Root of an increasing ``fn`` with fn(lo) < 0 <= fn(hi)."""
    mid = hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = fn(mid)
        if abs(val) <= ftol or hi - lo <= 4 * math.ulp(mid):
            return mid
        if val < 0:
            lo = mid
        else:
            hi = mid
    return mid


def rate_for_services(M: float, services: float, tol: float = 1e-14) -> float | None:
    """Rate r in [0, 1] with r * ln(M r + 1) = services, or None if even r = 1 falls short."""
    if services <= 0:
        return 0.0
    top = math.log(M + 1.0)
    if services > top:
        return None
    if services == top:
        return 1.0
    return bisect(lambda r: r * math.log(M * r + 1.0) - services, 0.0, 1.0, tol * services)


def reduced_objective(inst: StylizedInstance, r2: float) -> float:
    """Objective with the constraint binding, as a function of r2 alone."""
    if not 0 <= r2 <= 1:
        raise DomainError("r2 must lie in [0, 1]")
    g = math.log(inst.M2 * r2 + 1.0) * r2
    root = math.sqrt(inst.A * g)
    if inst.beta * root > inst.T:
        raise DomainError(f"r2={r2} alone needs more than T resource")
    return (inst.T ** 2 - 2 * inst.T * inst.beta * root + 2 * inst.unit * g) / inst.unit


def objective_derivative(inst: StylizedInstance, r2: float) -> float:
    if not 0 < r2 <= 1:
        raise DomainError("derivative is defined only for r2 in (0, 1]")
    M, T, b, A = inst.M2, inst.T, inst.beta, inst.A
    lg = math.log(M * r2 + 1.0)
    root = math.sqrt(A * lg * r2)
    growth = lg + M * r2 + lg * M * r2          # strictly positive on (0, 1]
    return growth * (2 * b * root - T) / (b * root * (M * r2 + 1.0))


def solve_critical(inst: StylizedInstance, region: int = 2) -> float | None:
    """Rate at which ``region`` consumes exactly T/2, found by bisection on (0, 1]."""
    M = inst.M2 if region == 2 else inst.M1
    half = inst.T / 2
    fn = lambda r: region_cost(inst, M, r) - half  # noqa: E731
    if fn(1.0) < 0:
        return None
    return bisect(fn, 0.0, 1.0, 1e-14 * inst.T)


def _all_in(inst: StylizedInstance, first: int) -> Allocation:
    """All resource to region ``first``; if it saturates at rate 1, the rest goes to the other."""
    M_a, M_b = (inst.M1, inst.M2) if first == 1 else (inst.M2, inst.M1)
    r_a = rate_for_services(M_a, inst.T ** 2 / inst.unit)
    r_b = 0.0
    if r_a is None:
        r_a = 1.0
        left = inst.T - region_cost(inst, M_a, 1.0)
        r_b = rate_for_services(M_b, left ** 2 / inst.unit)
        if r_b is None:
            r_b = 1.0
    return allocation(inst, r_a, r_b) if first == 1 else allocation(inst, r_b, r_a)


@dataclass
class RegimeReport:
    instance: StylizedInstance
    trivial: bool
    candidates: dict[str, Allocation]
    winner: str
    r_critical: float | None = None      # region-2 reduction
    r_critical_1: float | None = None    # region-1 reduction (indices swapped)
    notes: list[str] = field(default_factory=list)

    @property
    def best(self) -> Allocation:
        return self.candidates[self.winner]

    def to_dict(self) -> dict:
        return {
            "instance": vars(self.instance),
            "trivial": self.trivial,
            "winner": self.winner,
            "r_critical": self.r_critical,
            "r_critical_1": self.r_critical_1,
            "candidates": {k: {"r1": a.r1, "r2": a.r2, "objective": a.objective,
                               "resource_used": a.resource_used}
                           for k, a in self.candidates.items()},
            "notes": list(self.notes),
        }


def analyze(inst: StylizedInstance) -> RegimeReport:
    """Evaluate the candidate optima: everything in one region, or an equal resource split."""
    full = allocation(inst, 1.0, 1.0)
    if full.resource_used <= inst.T:
        return RegimeReport(inst, True, {"serve_all": full}, "serve_all",
                            notes=["resources suffice to serve every request"])

    cands = {"all_in_region_1": _all_in(inst, 1), "all_in_region_2": _all_in(inst, 2)}
    notes = []
    for key, region in (("all_in_region_1", 1), ("all_in_region_2", 2)):
        a = cands[key]
        if (a.r1 if region == 1 else a.r2) == 1.0:
            notes.append(f"region {region} saturates at rate 1; leftover resource goes to the other")

    crit2 = solve_critical(inst, 2)
    crit1 = solve_critical(inst, 1)
    if crit1 is not None and crit2 is not None:
        cands["equal_split"] = allocation(inst, crit1, crit2)
    else:
        notes.append("no equal split: a region cannot absorb half the resource at rate <= 1")

    winner = max(cands, key=lambda k: cands[k].objective)
    return RegimeReport(inst, False, cands, winner, crit2, crit1, notes)


@dataclass(frozen=True)
class BindingWitness:
    delta: float
    index: int                 # which rate was raised (1 or 2)
    before: Allocation
    after: Allocation
    fixed_demand_gain: float   # lam * delta with lam held at its old value

    @property
    def gain(self) -> float:
        return self.after.objective - self.before.objective


def verify_binding(inst: StylizedInstance, r1: float, r2: float,
                   rtol: float = 1e-12) -> BindingWitness:
    """Raise one rate of a slack allocation by delta > 0, staying feasible, and report the gain.

    Slack below ``rtol * T`` counts as binding.
    """
    before = allocation(inst, r1, r2)
    if not before.resource_used < inst.T * (1 - rtol):
        raise DomainError("allocation has no slack; the constraint already binds")
    if r1 < 1:
        index, base = 1, r1
    elif r2 < 1:
        index, base = 2, r2
    else:
        raise DomainError("both rates are 1; nothing to raise")

    def at(rate):
        return allocation(inst, rate, r2) if index == 1 else allocation(inst, r1, rate)

    delta = 1.0 - base
    while delta > 0 and not at(base + delta).resource_used < inst.T:
        delta *= 0.5
    if not delta > 0 or base + delta == base:
        raise DomainError("no admissible perturbation")
    after = at(base + delta)
    lam = before.lam1 if index == 1 else before.lam2
    return BindingWitness(delta, index, before, after, lam * delta)


def grid_search(inst: StylizedInstance, step: float = 1e-3, rtol: float = 1e-12):
    """Brute-force maximum over a square grid of rates; returns (objective, r1, r2)."""
    n = int(round(1.0 / step))
    r = np.linspace(0.0, 1.0, n + 1)
    s1 = r * np.log(inst.M1 * r + 1.0)
    s2 = r * np.log(inst.M2 * r + 1.0)
    c1 = inst.beta * np.sqrt(inst.A * s1)
    c2 = inst.beta * np.sqrt(inst.A * s2)
    obj = s1[:, None] + s2[None, :]
    obj = np.where(c1[:, None] + c2[None, :] <= inst.T * (1 + rtol), obj, -np.inf)
    i, j = np.unravel_index(int(np.argmax(obj)), obj.shape)
    return float(obj[i, j]), float(r[i]), float(r[j])
