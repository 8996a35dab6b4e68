"""Empirical risk minimization of the top-of-list criteria.

The empirical criteria are step functions of the model parameters, so the
search is combinatorial: exhaustive for finite families, randomized local
search with strict-improvement acceptance otherwise. Maximized criteria are
negated internally; every value that leaves this module is on its natural
scale.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classify import hat_L
from .core import (
    Dataset,
    FiniteMember,
    Linear,
    PiecewiseLinear1D,
    SeedSpec,
    check_rate,
    model_to_dict,
    score_dataset,
)
from .errors import InputError
from .rankcrit import hat_locauc, hat_M, w_hat

__all__ = [
    "Criterion",
    "FiniteFamily",
    "PiecewiseFamily",
    "LinearFamily",
    "ErmProblem",
    "ErmResult",
    "criterion_value",
    "criterion_on_scores",
    "erm",
    "erm_finite",
    "erm_piecewise",
    "erm_linear",
]


class Criterion(enum.Enum):
    L_HAT = "l_hat"
    M_HAT = "m_hat"
    LOCAUC = "locauc"
    W_HAT = "w_hat"

    @property
    def maximize(self) -> bool:
        return self in (Criterion.LOCAUC, Criterion.W_HAT)

    @classmethod
    def parse(cls, name) -> "Criterion":
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).upper()]
        except KeyError:
            try:
                return cls(str(name).lower())
            except ValueError:
                raise InputError(f"unknown criterion {name!r}") from None


def criterion_on_scores(criterion: Criterion, scores, labels, u0) -> float:
    if criterion is Criterion.L_HAT:
        return hat_L(scores, labels, u0).l_hat
    if criterion is Criterion.M_HAT:
        return hat_M(scores, labels, u0).m_hat
    if criterion is Criterion.LOCAUC:
        return hat_locauc(scores, labels, u0)
    return w_hat(scores, labels, u0)


def criterion_value(criterion, model, data: Dataset, u0) -> float:
    """Criterion of ``model`` on ``data`` on its natural scale."""
    return criterion_on_scores(Criterion.parse(criterion), score_dataset(model, data), data.labels, u0)


@dataclass(frozen=True)
class FiniteFamily:
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class PiecewiseFamily:
    """Continuous piecewise-linear scorers on ``k`` equally spaced breakpoints over [lo, hi].

    Each of the ``k - 1`` segment slopes is a signed magnitude drawn from
    ``resolution`` values evenly spaced in [m, M]. The value at ``lo`` is pinned
    to 0 because every criterion depends on the scores only through their order.
    """

    k: int
    resolution: int
    m: float
    M: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.k < 2:
            raise InputError("piecewise family needs k >= 2 breakpoints")
        if self.resolution < 1:
            raise InputError("slope grid needs at least one value")
        if not 0 < self.m <= self.M < math.inf:
            raise InputError("slope bounds must satisfy 0 < m <= M < inf")
        if not self.lo < self.hi:
            raise InputError("piecewise family needs lo < hi")

    @property
    def magnitudes(self) -> np.ndarray:
        return np.linspace(self.m, self.M, self.resolution)

    def build(self, params) -> PiecewiseLinear1D:
        """``params`` holds one signed index per segment: +j / -j selects +/- magnitudes[j - 1]."""
        mags = self.magnitudes
        slopes = np.array([math.copysign(mags[abs(j) - 1], j) for j in params])
        b = np.linspace(self.lo, self.hi, self.k)
        vals = np.concatenate([[0.0], np.cumsum(slopes * np.diff(b))])
        return PiecewiseLinear1D(tuple(b), tuple(vals), slope_bounds=(self.m, self.M))


@dataclass(frozen=True)
class LinearFamily:
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise InputError("linear family needs d >= 1")


@dataclass(frozen=True)
class ErmProblem:
    family: FiniteFamily | PiecewiseFamily | LinearFamily
    criterion: Criterion
    u0: float
    budget: int | None = None
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "criterion", Criterion.parse(self.criterion))
        object.__setattr__(self, "u0", check_rate(self.u0))
        if self.restarts < 1:
            raise InputError("restarts must be >= 1")
        if isinstance(self.family, FiniteFamily):
            if len(self.family) == 0:
                raise InputError("finite family is empty")
            if self.budget is not None and self.budget < len(self.family):
                raise InputError(
                    f"budget {self.budget} is below the family size {len(self.family)}; the scan must be exhaustive"
                )
        elif self.budget is None or self.budget < 1:
            raise InputError("search families need a positive evaluation budget")


@dataclass(frozen=True)
class ErmResult:
    best_model: object
    best_value: float
    evaluations: int
    trace: tuple[tuple[int, float], ...]
    criterion: Criterion
    u0: float
    best_index: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "criterion": self.criterion.name,
            "u0": self.u0,
            "best_value": self.best_value,
            "evaluations": self.evaluations,
            "trace": [[i, v] for i, v in self.trace],
            "best_model": model_to_dict(self.best_model),
        }
        if self.best_index is not None:
            out["best_index"] = self.best_index
        return out


def _sign(criterion: Criterion) -> float:
    return -1.0 if criterion.maximize else 1.0


def _objective(problem: ErmProblem, data: Dataset):
    sign = _sign(problem.criterion)

    def f(model) -> float:
        return sign * criterion_on_scores(problem.criterion, score_dataset(model, data), data.labels, problem.u0)

    return f


def _trace_from(values: list[float], sign: float) -> tuple[tuple[int, float], ...]:
    best = math.inf
    out = []
    for i, v in enumerate(values, start=1):
        best = min(best, v)
        out.append((i, sign * best))
    return tuple(out)


def erm_finite(problem: ErmProblem, data: Dataset) -> ErmResult:
    """Exhaustive scan; the lowest family index wins ties."""
    if not isinstance(problem.family, FiniteFamily):
        raise InputError("erm_finite needs a FiniteFamily")
    f = _objective(problem, data)
    members = problem.family.members
    values = [f(m) for m in members]
    best = int(np.argmin(values))  # first occurrence of the minimum
    sign = _sign(problem.criterion)
    return ErmResult(
        best_model=FiniteMember(members, best),
        best_value=sign * values[best],
        evaluations=len(values),
        trace=_trace_from(values, sign),
        criterion=problem.criterion,
        u0=problem.u0,
        best_index=best,
    )


def _split_budget(budget: int, restarts: int) -> list[int]:
    restarts = min(restarts, budget)
    base, extra = divmod(budget, restarts)
    return [base + (1 if r < extra else 0) for r in range(restarts)]


def _run_parallel(fn, args, workers: int):
    if workers <= 1 or len(args) == 1:
        return [fn(*a) for a in args]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda a: fn(*a), args))


def _reduce(runs, sign, problem, build):
    """Pick the best (value, restart index) pair and stitch traces in restart order."""
    best_r = min(range(len(runs)), key=lambda r: (runs[r][0], r))
    value, params, _ = runs[best_r]
    all_values = [v for run in runs for v in run[2]]
    return ErmResult(
        best_model=build(params),
        best_value=sign * value,
        evaluations=len(all_values),
        trace=_trace_from(all_values, sign),
        criterion=problem.criterion,
        u0=problem.u0,
        extra={"best_restart": best_r},
    )


def erm_piecewise(problem: ErmProblem, data: Dataset, workers: int = 1) -> ErmResult:
    """Multi-start local search over the signed slope grid.

    Restart 0 starts from the all-increasing candidate at the middle magnitude
    (a rescaled identity); the other restarts start from a uniformly random
    grid point. Each step proposes a new value for one coordinate and accepts
    it only on strict improvement.
    """
    fam = problem.family
    if not isinstance(fam, PiecewiseFamily):
        raise InputError("erm_piecewise needs a PiecewiseFamily")
    if data.d != 1:
        raise InputError(f"piecewise family needs 1-D features, got d={data.d}")
    f = _objective(problem, data)
    seeds = SeedSpec(problem.seed)
    n_seg, res = fam.k - 1, fam.resolution
    choices = np.array([j for j in range(-res, res + 1) if j != 0])

    def run(r: int, budget: int):
        rng = seeds.child_stream(r)
        if r == 0:
            cur = np.full(n_seg, (res + 1) // 2)
        else:
            cur = rng.choice(choices, size=n_seg)
        cur_val = f(fam.build(cur))
        values = [cur_val]
        for _ in range(budget - 1):
            cand = cur.copy()
            i = int(rng.integers(n_seg))
            options = choices[choices != cur[i]]
            if options.size == 0:
                values.append(cur_val)
                continue
            cand[i] = rng.choice(options)
            v = f(fam.build(cand))
            values.append(v)
            if v < cur_val:
                cur, cur_val = cand, v
        return cur_val, tuple(int(j) for j in cur), values

    budgets = _split_budget(problem.budget, problem.restarts)
    runs = _run_parallel(run, list(enumerate(budgets)), workers)
    return _reduce(runs, _sign(problem.criterion), problem, fam.build)


def erm_linear(problem: ErmProblem, data: Dataset, workers: int = 1) -> ErmResult:
    """Random unit directions, then coordinate refinement with a halving step.

    Only the direction matters (criteria are rank-based), so every candidate
    is normalized to the unit sphere. Per restart, half the budget goes to
    random directions and the rest to refinement of the incumbent.
    """
    fam = problem.family
    if not isinstance(fam, LinearFamily):
        raise InputError("erm_linear needs a LinearFamily")
    if data.d != fam.d:
        raise InputError(f"family dimension {fam.d} does not match data dimension {data.d}")
    f = _objective(problem, data)
    seeds = SeedSpec(problem.seed)
    d = fam.d

    def build(w):
        return Linear(tuple(float(t) for t in w))

    def unit(w):
        norm = float(np.linalg.norm(w))
        return w / norm if norm > 0 else None

    def run(r: int, budget: int):
        rng = seeds.child_stream(r)
        values = []
        best_w, best_v = None, math.inf
        n_random = max(1, (budget + 1) // 2)
        for _ in range(n_random):
            w = unit(rng.standard_normal(d))
            if w is None:
                continue
            v = f(build(w))
            values.append(v)
            if v < best_v:
                best_w, best_v = w, v
        step = 0.5
        improved_in_sweep = False
        coord = 0
        while len(values) < budget:
            for sgn in (1.0, -1.0):
                if len(values) >= budget:
                    break
                cand = best_w.copy()
                cand[coord] += sgn * step
                cand = unit(cand)
                if cand is None:
                    continue
                v = f(build(cand))
                values.append(v)
                if v < best_v:
                    best_w, best_v = cand, v
                    improved_in_sweep = True
            coord += 1
            if coord == d:
                coord = 0
                if not improved_in_sweep:
                    step /= 2.0
                    if step < 1e-9:
                        break
                improved_in_sweep = False
        return best_v, tuple(best_w), values

    budgets = _split_budget(problem.budget, problem.restarts)
    runs = _run_parallel(run, list(enumerate(budgets)), workers)
    return _reduce(runs, _sign(problem.criterion), problem, build)


def erm(problem: ErmProblem, data: Dataset, workers: int = 1) -> ErmResult:
    """Dispatch on the family type."""
    if isinstance(problem.family, FiniteFamily):
        return erm_finite(problem, data)
    if isinstance(problem.family, PiecewiseFamily):
        return erm_piecewise(problem, data, workers)
    return erm_linear(problem, data, workers)
