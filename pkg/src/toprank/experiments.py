"""Monte Carlo studies: excess-risk rates, decomposition scaling, identity residuals.

Every replication draws from its own child stream (index ``grid_i * reps + r``)
and results are gathered in replication order, so output files are
byte-identical whatever the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy import stats

from .classify import decompose, hat_K, hat_K_via_signed_ranks, hat_L, sigma_sq
from .core import (
    Piece,
    PiecewiseLinear1D,
    PiecewiseMonotone1D,
    SeedSpec,
    check_rate,
    score_dataset,
)
from .erm import Criterion, ErmProblem, FiniteFamily, erm
from .errors import InputError, ToprankError
from .oracle import (
    SyntheticModel,
    bayes_report,
    k_values,
    sample,
    true_report,
    w_constant,
)
from .rankcrit import (
    full_report,
    hat_locauc,
    hat_M,
    pair_counts,
    roc_step_area,
    t_wilcoxon,
)

__all__ = [
    "Band",
    "RateStudyResult",
    "DecompStudyResult",
    "IdentityEntry",
    "IdentityReport",
    "reflection_family",
    "two_window_family",
    "rate_study",
    "decomposition_study",
    "identity_suite",
    "fit_slope",
]

@dataclass(frozen=True)
class Band:
    lo: float
    hi: float

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def to_list(self):
        return [self.lo, self.hi]


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def fit_slope(n_grid, values) -> tuple[float | None, float | None]:
    """Least-squares slope of log(values) on log(n); None when undefined."""
    n = np.asarray(n_grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if n.size < 2 or np.any(~np.isfinite(v)) or np.any(v <= 0):
        return None, None
    fit = stats.linregress(np.log(n), np.log(v))
    stderr = float(fit.stderr) if n.size > 2 else None
    return float(fit.slope), stderr


# --------------------------------------------------------------------------
# Families used by the rate studies
# --------------------------------------------------------------------------


def _identity_piece(lo, hi):
    return Piece(lo, hi, lambda x: np.asarray(x, dtype=float) * 1.0, "inc", lambda t: t)


def reflection_family(center: float, deltas, lo: float = 0.0, hi: float = 1.0, order_seed: int | None = 0):
    """Scorers equal to x except on [c - d, c + d], where the order is reversed (s = 2c - x).

    Under a uniform marginal s(X) stays uniform, so the top set of mass
    ``hi - center`` is [c - d, c] u [c + d, hi] and differs from [c, hi] on a
    set of mass 2d. The member order is shuffled with ``order_seed`` so that
    the lowest-index tie-break does not favour any delta.
    """
    members = []
    for d in deltas:
        d = float(d)
        if d == 0:
            pieces = (_identity_piece(lo, hi),)
        else:
            if not (lo < center - d and center + d < hi):
                raise InputError(f"reflection window of half-width {d} leaves [{lo}, {hi}]")
            pieces = (
                _identity_piece(lo, center - d),
                Piece(center - d, center + d, lambda x, c=center: 2 * c - np.asarray(x, dtype=float), "dec",
                      lambda t, c=center: 2 * c - t),
                _identity_piece(center + d, hi),
            )
        members.append(PiecewiseMonotone1D(pieces, name=f"reflection(c={center:g},d={d:g})"))
    if order_seed is not None:
        perm = np.random.default_rng(order_seed).permutation(len(members))
        members = [members[i] for i in perm]
    return tuple(members)


def two_window_family(u0: float = 0.2, n_members: int = 20, gap: float = 0.01):
    """Scorers on [0, 1] whose top set is two windows of width u0/2.

    Each scorer is the upper envelope of two unit-slope tents, so its top set
    at rate u0 is [a, a + w] u [b, b + w] with w = u0 / 2. Member j has
    a + b = 2 - 5w - j * gap and b alternating between 1 - w and 1 - 2w; no
    member contains the optimal top set [1 - u0, 1].
    """
    u0 = check_rate(u0)
    w = u0 / 2.0
    h = w / 2.0
    members = []
    for j in range(n_members):
        b = 1.0 - w if j % 2 == 0 else 1.0 - 2.0 * w
        a = (2.0 - 5.0 * w - j * gap) - b
        if a < 0 or a + w > b + 1e-12:
            raise InputError(f"member {j}: windows [{a}, {a + w}] and [{b}, {b + w}] do not fit")
        ca, cb = a + h, b + h
        mid = 0.5 * (ca + cb)
        members.append(PiecewiseLinear1D(
            (0.0, ca, mid, cb, 1.0),
            (h - ca, h, h - (cb - ca) / 2.0, h, h - (1.0 - cb)),
        ))
    return tuple(members)


# --------------------------------------------------------------------------
# Rate study
# --------------------------------------------------------------------------


def _true_value(tq, criterion: Criterion) -> float:
    return {
        Criterion.L_HAT: tq.l,
        Criterion.M_HAT: tq.m,
        Criterion.LOCAUC: tq.locauc,
        Criterion.W_HAT: tq.w,
    }[criterion]


@dataclass(frozen=True)
class RateStudyResult:
    n_grid: tuple[int, ...]
    excess: tuple[tuple[float, ...], ...]
    mean: tuple[float, ...]
    stderr: tuple[float, ...]
    slope: float | None
    slope_stderr: float | None
    band: Band
    clipped: int
    monotone_violations: int
    reference: str
    reference_value: float
    config: dict = field(default_factory=dict)
    selections: tuple[tuple[int | None, ...], ...] = ()

    @property
    def slope_defined(self) -> bool:
        return self.slope is not None

    @property
    def band_pass(self) -> bool | None:
        return None if self.slope is None else self.band.contains(self.slope)

    @property
    def monotone_pass(self) -> bool:
        return self.monotone_violations <= 1

    @property
    def passed(self) -> bool:
        return self.band_pass is not False and self.monotone_pass

    def failures(self) -> list[str]:
        out = []
        if self.band_pass is False:
            out.append(f"rate slope {self.slope:.4f} outside band [{self.band.lo}, {self.band.hi}]")
        if not self.monotone_pass:
            out.append(f"mean excess risk increases with n at {self.monotone_violations} grid steps")
        return out

    def warnings(self) -> list[str]:
        return [] if self.slope_defined else ["slope undefined (need >= 2 grid points, reps >= 2, positive means)"]

    def summary(self) -> dict:
        return {
            "study": "rates",
            "n_grid": list(self.n_grid),
            "mean_excess": list(self.mean),
            "stderr_excess": list(self.stderr),
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "slope_defined": self.slope_defined,
            "band": self.band.to_list(),
            "band_pass": self.band_pass,
            "monotone_violations": self.monotone_violations,
            "clipped_negatives": self.clipped,
            "reference": self.reference,
            "reference_value": self.reference_value,
            "passed": self.passed,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)

    def csv_rows(self) -> list[list]:
        rows = []
        for n, ex, sel in zip(self.n_grid, self.excess, self.selections or [()] * len(self.n_grid)):
            for r, e in enumerate(ex):
                rows.append([n, r, repr(e), "" if not sel or sel[r] is None else sel[r]])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "rep", "excess", "selected"])
        w.writerows(self.csv_rows())
        return buf.getvalue()


def rate_study(
    model: SyntheticModel,
    problem: ErmProblem,
    n_grid,
    reps: int,
    seed: int,
    reference: str = "bayes",
    band: Band = Band(-0.9, -0.45),
    workers: int = 1,
    config: dict | None = None,
) -> RateStudyResult:
    """Replicated ERM with the true excess risk of each fitted model.

    ``reference="bayes"`` measures L(s_n) - L* (criterion L_HAT only);
    ``reference="family"`` measures the gap to the best member of a finite
    family under the true criterion.
    """
    n_grid = tuple(int(n) for n in n_grid)
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])) or n_grid[0] < 1:
        raise InputError("n_grid must be a nonempty ascending list of positive sizes")
    if reps < 1:
        raise InputError("reps must be >= 1")
    crit = problem.criterion
    sign = -1.0 if crit.maximize else 1.0
    u0 = problem.u0
    finite = isinstance(problem.family, FiniteFamily)

    member_truth: list[float] | None = None
    if finite:
        try:
            member_truth = [_true_value(true_report(model, s, u0), crit) for s in problem.family.members]
        except ToprankError as exc:
            raise type(exc)(f"oracle failed on a family member: {exc}") from exc

    if reference == "bayes":
        if crit is not Criterion.L_HAT:
            raise InputError("the Bayes reference is defined for the L_HAT criterion only")
        ref_value = bayes_report(model, u0).l_star
    elif reference == "family":
        if member_truth is None:
            raise InputError("the family reference needs a finite family")
        ref_value = min(sign * v for v in member_truth) * sign
    else:
        raise InputError(f"unknown reference {reference!r}")

    seeds = SeedSpec(seed)

    def one(idx: int):
        gi, r = divmod(idx, reps)
        rng = seeds.child_stream(idx)
        data = sample(model, n_grid[gi], rng)
        prob = problem if finite else replace(problem, seed=int(rng.integers(2**63)))
        res = erm(prob, data)
        if finite:
            sel = res.best_index
            truth = member_truth[sel]
        else:
            sel = None
            try:
                truth = _true_value(true_report(model, res.best_model, u0), crit)
            except ToprankError as exc:
                raise type(exc)(f"oracle failed at n={n_grid[gi]}, rep={r}: {exc}") from exc
        return sign * (truth - ref_value), sel

    out = _map(one, range(len(n_grid) * reps), workers)
    excess, selections, clipped = [], [], 0
    for gi in range(len(n_grid)):
        row, srow = [], []
        for r in range(reps):
            e, sel = out[gi * reps + r]
            if e < 0:
                if e < -1e-6:
                    raise ToprankError(f"excess risk {e} is negative beyond oracle tolerance")
                clipped += 1
                e = 0.0
            row.append(e)
            srow.append(sel)
        excess.append(tuple(row))
        selections.append(tuple(srow))
    means = tuple(float(np.mean(r)) for r in excess)
    ses = tuple(float(np.std(r, ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan") for r in excess)
    slope, slope_se = fit_slope(n_grid, means) if reps >= 2 else (None, None)
    violations = sum(1 for a, b in zip(means, means[1:]) if b > a)
    return RateStudyResult(
        n_grid=n_grid,
        excess=tuple(excess),
        mean=means,
        stderr=ses,
        slope=slope,
        slope_stderr=slope_se,
        band=band,
        clipped=clipped,
        monotone_violations=violations,
        reference=reference,
        reference_value=ref_value,
        config=config or {},
        selections=tuple(selections),
    )


# --------------------------------------------------------------------------
# Decomposition study
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DecompStudyResult:
    n_grid: tuple[int, ...]
    v: float
    median_abs_lambda: tuple[float, ...]
    n_var_z: tuple[float, ...]
    sigma_sq: float
    slope: float | None
    slope_stderr: float | None
    band: Band
    var_tolerance: float
    var_min_n: int
    k_true: float
    k_prime_true: float
    q_true: float
    config: dict = field(default_factory=dict)
    raw: tuple[tuple[tuple[float, float], ...], ...] = ()

    @property
    def band_pass(self) -> bool | None:
        return None if self.slope is None else self.band.contains(self.slope)

    @property
    def variance_checks(self) -> list[tuple[int, float, bool]]:
        out = []
        for n, nv in zip(self.n_grid, self.n_var_z):
            if n >= self.var_min_n and self.sigma_sq > 0:
                ratio = nv / self.sigma_sq
                out.append((n, ratio, abs(ratio - 1.0) <= self.var_tolerance))
        return out

    @property
    def passed(self) -> bool:
        return self.band_pass is not False and all(ok for _, _, ok in self.variance_checks)

    def failures(self) -> list[str]:
        out = []
        if self.band_pass is False:
            out.append(f"remainder slope {self.slope:.4f} outside band [{self.band.lo}, {self.band.hi}]")
        for n, ratio, ok in self.variance_checks:
            if not ok:
                out.append(f"n*Var(Z_n)/sigma^2 = {ratio:.4f} at n={n} outside 1 +/- {self.var_tolerance}")
        return out

    def warnings(self) -> list[str]:
        return [] if self.slope is not None else ["remainder slope undefined (zero or degenerate medians)"]

    def summary(self) -> dict:
        return {
            "study": "decomp",
            "n_grid": list(self.n_grid),
            "v": self.v,
            "median_abs_lambda": list(self.median_abs_lambda),
            "n_var_z": list(self.n_var_z),
            "sigma_sq": self.sigma_sq,
            "k_true": self.k_true,
            "k_prime_true": self.k_prime_true,
            "q_true": self.q_true,
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "band": self.band.to_list(),
            "band_pass": self.band_pass,
            "variance_ratios": [[n, r, ok] for n, r, ok in self.variance_checks],
            "passed": self.passed,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "rep", "z_n", "lambda_n"])
        for n, rows in zip(self.n_grid, self.raw):
            for r, (z, lam) in enumerate(rows):
                w.writerow([n, r, repr(z), repr(lam)])
        return buf.getvalue()


def decomposition_study(
    model: SyntheticModel,
    s,
    v: float,
    n_grid,
    reps: int,
    seed: int,
    band: Band = Band(-1.4, -0.6),
    var_tolerance: float = 0.10,
    var_min_n: int = 1000,
    workers: int = 1,
    config: dict | None = None,
) -> DecompStudyResult:
    """Replicated split of hat_K - K into the linear term Z_n and the remainder."""
    n_grid = tuple(int(n) for n in n_grid)
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise InputError("n_grid must be a nonempty ascending list")
    if reps < 2:
        raise InputError("variance estimates need reps >= 2")
    if not 0 < v <= 1:
        raise InputError("v must lie in (0, 1]")
    q, k, kp = k_values(model, s, v)
    sig = sigma_sq(v, k, kp)
    seeds = SeedSpec(seed)

    def one(idx: int):
        gi, _ = divmod(idx, reps)
        data = sample(model, n_grid[gi], seeds.child_stream(idx))
        d = decompose(score_dataset(s, data), data.labels, v, k, kp, q)
        return d.z_n, d.lambda_n

    out = _map(one, range(len(n_grid) * reps), workers)
    raw = tuple(tuple(out[gi * reps:(gi + 1) * reps]) for gi in range(len(n_grid)))
    med = tuple(float(np.median([abs(lam) for _, lam in rows])) for rows in raw)
    nvar = tuple(float(n * np.var([z for z, _ in rows], ddof=1)) for n, rows in zip(n_grid, raw))
    slope, se = (None, None) if v == 1 else fit_slope(n_grid, med)
    return DecompStudyResult(
        n_grid=n_grid,
        v=v,
        median_abs_lambda=med,
        n_var_z=nvar,
        sigma_sq=sig,
        slope=slope,
        slope_stderr=se,
        band=band,
        var_tolerance=var_tolerance,
        var_min_n=var_min_n,
        k_true=k,
        k_prime_true=kp,
        q_true=q,
        config=config or {},
        raw=raw,
    )


# --------------------------------------------------------------------------
# Identity suite
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentityEntry:
    name: str
    kind: str  # "population" or "empirical"
    residual: float
    tolerance: float
    context: str
    exact: bool = False

    @property
    def passed(self) -> bool:
        return abs(self.residual) <= self.tolerance

    def to_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "exact": self.exact,
            "passed": self.passed,
            "context": self.context,
        }


@dataclass(frozen=True)
class IdentityReport:
    entries: tuple[IdentityEntry, ...]
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list[str]:
        return [f"{e.name} [{e.context}]: residual {e.residual:.3g} > {e.tolerance:g}" for e in self.entries if not e.passed]

    def warnings(self) -> list[str]:
        return []

    def worst(self, name: str) -> float:
        return max(abs(e.residual) for e in self.entries if e.name == name)

    def summary(self) -> dict:
        return {"study": "identities", "passed": self.passed, "entries": [e.to_dict() for e in self.entries], "config": self.config}

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "kind", "context", "residual", "tolerance", "passed"])
        for e in self.entries:
            w.writerow([e.name, e.kind, e.context, repr(e.residual), e.tolerance, e.passed])
        return buf.getvalue()


def population_residuals(model: SyntheticModel, s, u0, eta_quantities=None) -> dict[str, float]:
    """Residuals of the population identities for one (model, s, u0)."""
    tq = true_report(model, s, u0)
    p = model.p
    pu = p + u0
    out = {
        "locauc_beta_r": tq.locauc - (tq.beta - tq.r_local / (2 * p * (1 - p))),
        "w_beta_locauc": tq.w - (0.5 * p * tq.beta * (2 - tq.beta) + (1 - p) * tq.locauc),
        "linear_locauc": 2 * p * (1 - p) * tq.locauc - ((1 - p) * pu - (1 - p) * tq.l - tq.r_local),
        "linear_w": 2 * p * tq.w - (w_constant(p, u0) + (pu / 2 - 1) * tq.l - tq.l**2 / 4 - tq.r_local),
        "d_line": p * tq.beta + (1 - p) * tq.alpha - u0,
        "risk_alpha": tq.l - (2 * (1 - p) * tq.alpha + p - u0),
        "risk_beta": tq.l - (2 * p * (1 - tq.beta) - p + u0),
        "trunc_rearrangement": tq.trunc_auc - (tq.locauc - tq.beta + tq.alpha * tq.beta),
        "top_mass": tq.top_mass - u0,
    }
    eta = eta_quantities or true_report(model, model.eta, u0)
    out["dominance_beta"] = max(0.0, tq.beta - eta.beta)
    out["dominance_alpha"] = max(0.0, eta.alpha - tq.alpha)
    out["dominance_locauc"] = max(0.0, tq.locauc - eta.locauc)
    out["dominance_w"] = max(0.0, tq.w - eta.w)
    return out


def exact_residuals(scores, labels, u0) -> dict[str, Fraction]:
    """Finite-sample identities, evaluated in rational arithmetic."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    n = s.size
    c = pair_counts(s, y, u0)
    out: dict[str, Fraction] = {}
    # Wilcoxon-AUC relation
    auc = Fraction(c.concordant, c.n_pos * c.n_neg)
    t_n = t_wilcoxon(s, y, exact=True)
    out["wilcoxon_auc"] = (c.n_pos * c.n_neg * auc + Fraction(c.n_pos * (c.n_pos + 1), 2)) / (n + 1) - t_n
    # L_hat against K_hat, with the positives sitting exactly on the threshold added back
    v0 = 1.0 - u0
    l_hat = hat_L(s, y, u0)
    k_hat = hat_K(s, y, v0, exact=True)
    on_threshold = int(np.count_nonzero((s == l_hat.q_hat) & (y == 1)))
    out["l_hat_k_hat"] = l_hat.l_exact + Fraction(on_threshold, n) - (Fraction(c.n_neg, n) + k_hat)
    # M decomposition
    m = hat_M(s, y, u0, exact=True)
    out["m_decomposition"] = m.m_hat - (m.r_local_hat + Fraction(c.n_neg, n) * m.l_hat)
    # truncated AUC by an independent sweep
    loc = hat_locauc(s, y, u0, exact=True)
    alpha = Fraction(c.top_neg, c.n_neg)
    beta = Fraction(c.top_pos, c.n_pos)
    out["trunc_sweep"] = roc_step_area(s, y, u0, exact=True) - (loc - beta + alpha * beta)
    # signed-rank form of K_hat (shift to positive scores; ranks are unchanged)
    shifted = s - s.min() + 1.0
    out["k_hat_signed_rank"] = hat_K(shifted, y, v0, exact=True) - hat_K_via_signed_ranks(shifted, y, v0, exact=True)
    # monotone transform invariance of the whole report (q_hat excluded)
    a = full_report(s, y, u0).to_dict()
    b = full_report(np.exp(s / max(1.0, float(np.abs(s).max()))), y, u0).to_dict()
    a.pop("q_hat"), b.pop("q_hat")
    out["monotone_invariance"] = Fraction(sum(1 for key in a if a[key] != b.get(key)))
    return out


def identity_suite(
    model: SyntheticModel,
    scorers,
    u0s,
    n_empirical: int,
    seed: int,
    population_tol: float = 1e-6,
    locauc_tol: float = 5e-3,
    config: dict | None = None,
) -> IdentityReport:
    """Population residuals for every (s, u0), plus exact and Monte Carlo checks on one sample each."""
    entries: list[IdentityEntry] = []
    seeds = SeedSpec(seed)
    for ui, u0 in enumerate(u0s):
        u0 = check_rate(u0)
        eta_q = true_report(model, model.eta, u0)
        for si, s in enumerate(scorers):
            ctx = f"s#{si} u0={u0:g}"
            for name, r in population_residuals(model, s, u0, eta_q).items():
                entries.append(IdentityEntry(name, "population", float(r), population_tol, ctx))
            data = sample(model, n_empirical, seeds.child_stream(ui * len(scorers) + si))
            sc = score_dataset(s, data)
            if data.n_pos == 0 or data.n_neg == 0:
                raise InputError("empirical checks need both classes in the sample")
            if np.unique(sc).size != sc.size:
                raise InputError(f"scorer {si} produced tied scores; exact rank identities need distinct scores")
            for name, r in exact_residuals(sc, data.labels, u0).items():
                entries.append(IdentityEntry(name, "empirical", float(r), 0.0, ctx, exact=True))
            tq = true_report(model, s, u0)
            gap = hat_locauc(sc, data.labels, u0) - tq.locauc
            entries.append(IdentityEntry("locauc_concentration", "empirical", gap, locauc_tol, f"{ctx} n={n_empirical}"))
    return IdentityReport(tuple(entries), config or {})
