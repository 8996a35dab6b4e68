"""Synthetic generative models with computable population quantities.

A model is a 1-D marginal ``mu`` on a bounded interval together with a
regression function ``eta(x) = P(Y = 1 | X = x)``. Scoring functions are
decomposed into monotone (or constant) branches, and the support is cut into
cells on which both the score and ``eta`` are single branches. On such a cell
the level set ``{s >= t}`` is one sub-interval found by inverting the branch,
so every population quantity reduces to adaptive 1-D quadrature over interval
unions with no discontinuity inside an integration range. The double
integrals over pairs are nested quadratures of the same kind.

Quantiles follow the generalized-inverse convention inf{t : F(t) >= v}; the
comparison is made with a 1e-13 slack on F so that an atom whose mass lands
exactly on v is recognized despite rounding.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from .core import (
    Dataset,
    FiniteMember,
    Linear,
    Piece,
    PiecewiseLinear1D,
    PiecewiseMonotone1D,
    check_rate,
)
from .errors import ConsistencyError, InputError, NumericalError

__all__ = [
    "UniformMarginal",
    "GaussianMixtureMarginal",
    "SyntheticModel",
    "TrueQuantities",
    "BayesReport",
    "make_eta",
    "uniform_model",
    "model_from_config",
    "sample",
    "true_cdf",
    "true_quantile",
    "k_values",
    "true_report",
    "bayes_report",
    "excess_risk",
    "excess_risk_routes",
    "optimal_scoring",
    "w_constant",
]

EPS_ABS_1D = 1e-12
EPS_ABS_2D = 1e-10
FAIL_TOL = 1e-7
QUANTILE_SLACK = 1e-13
FD_STEP = 1e-4
_SQRT2PI = math.sqrt(2.0 * math.pi)


# --------------------------------------------------------------------------
# Marginals
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformMarginal:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InputError("uniform marginal needs lo < hi")

    @property
    def support(self):
        return self.lo, self.hi

    def pdf(self, x: float) -> float:
        return 1.0 / (self.hi - self.lo) if self.lo <= x <= self.hi else 0.0

    def pdf_vec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, x: float) -> float:
        return min(max((x - self.lo) / (self.hi - self.lo), 0.0), 1.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * rng.random(n)

    def to_dict(self):
        return {"marginal": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class GaussianMixtureMarginal:
    """Mixture of Gaussians truncated to [lo, hi] (compact support keeps quadrature simple)."""

    weights: tuple[float, ...]
    means: tuple[float, ...]
    sds: tuple[float, ...]
    lo: float = 0.0
    hi: float = 1.0
    _mass: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _z: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        m = tuple(float(v) for v in self.means)
        sd = tuple(float(v) for v in self.sds)
        if not (len(w) == len(m) == len(sd) >= 1):
            raise InputError("mixture needs equally many weights, means and sds")
        if any(v <= 0 for v in w) or any(v <= 0 for v in sd):
            raise InputError("mixture weights and sds must be positive")
        if not self.lo < self.hi:
            raise InputError("mixture needs lo < hi")
        total = sum(w)
        w = tuple(v / total for v in w)
        mass = tuple(
            float(special.ndtr((self.hi - mu) / s) - special.ndtr((self.lo - mu) / s))
            for mu, s in zip(m, sd)
        )
        z = sum(a * b for a, b in zip(w, mass))
        if z < 1e-12:
            raise InputError("mixture puts no mass on [lo, hi]")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "sds", sd)
        object.__setattr__(self, "_mass", mass)
        object.__setattr__(self, "_z", z)

    @property
    def support(self):
        return self.lo, self.hi

    def pdf(self, x: float) -> float:
        if not self.lo <= x <= self.hi:
            return 0.0
        acc = 0.0
        for w, mu, s in zip(self.weights, self.means, self.sds):
            t = (x - mu) / s
            acc += w * math.exp(-0.5 * t * t) / (s * _SQRT2PI)
        return acc / self._z

    def pdf_vec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x)
        for w, mu, s in zip(self.weights, self.means, self.sds):
            acc += w * np.exp(-0.5 * ((x - mu) / s) ** 2) / (s * _SQRT2PI)
        return np.where((x >= self.lo) & (x <= self.hi), acc / self._z, 0.0)

    def cdf(self, x: float) -> float:
        if x <= self.lo:
            return 0.0
        if x >= self.hi:
            return 1.0
        acc = 0.0
        for w, mu, s in zip(self.weights, self.means, self.sds):
            acc += w * (special.ndtr((x - mu) / s) - special.ndtr((self.lo - mu) / s))
        return min(max(float(acc / self._z), 0.0), 1.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        probs = np.array([w * m for w, m in zip(self.weights, self._mass)])
        comp = rng.choice(len(probs), size=n, p=probs / probs.sum())
        u = rng.random(n)
        mu = np.asarray(self.means)[comp]
        sd = np.asarray(self.sds)[comp]
        a = special.ndtr((self.lo - mu) / sd)
        b = special.ndtr((self.hi - mu) / sd)
        x = mu + sd * special.ndtri(a + u * (b - a))
        return np.clip(x, self.lo, self.hi)

    def to_dict(self):
        return {
            "marginal": "gaussian-mixture",
            "weights": list(self.weights),
            "means": list(self.means),
            "sds": list(self.sds),
            "lo": self.lo,
            "hi": self.hi,
        }


# --------------------------------------------------------------------------
# Regression-function presets
# --------------------------------------------------------------------------


def make_eta(name: str, params: dict | None, support: tuple[float, float]) -> PiecewiseMonotone1D:
    """Build a named regression function on ``support``.

    Presets: ``linear`` (rescaled to [0, 1] over the support), ``logistic``
    (a, b), ``step-smooth`` (q, w: normal-cdf step centred at q with width w),
    ``constant`` (c).
    """
    params = dict(params or {})
    lo, hi = support
    if name == "linear":
        width = hi - lo
        piece = Piece(lo, hi, lambda x: (x - lo) / width, "inc", lambda t: lo + t * width)
    elif name == "logistic":
        a, b = float(params.get("a", 1.0)), float(params.get("b", 0.0))
        kind = "inc" if a > 0 else "dec" if a < 0 else "const"
        inv = None if a == 0 else (lambda t: (special.logit(t) - b) / a)
        piece = Piece(lo, hi, lambda x: special.expit(a * x + b), kind, inv)
    elif name == "step-smooth":
        q, w = float(params.get("q", 0.5)), float(params.get("w", 0.1))
        if w <= 0:
            raise InputError("step-smooth width must be positive")
        piece = Piece(lo, hi, lambda x: special.ndtr((x - q) / w), "inc", lambda t: q + w * special.ndtri(t))
    elif name == "constant":
        c = float(params.get("c", 0.5))
        piece = Piece(lo, hi, lambda x: c + 0.0 * np.asarray(x, dtype=float), "const")
    else:
        raise InputError(f"unknown regression function preset {name!r}")
    return PiecewiseMonotone1D((piece,), name=name)


_PRESET_CALL = re.compile(r"^\s*([a-z\-]+)\s*\(([^)]*)\)\s*$")
_PRESET_ARGS = {"logistic": ("a", "b"), "step-smooth": ("q", "w"), "constant": ("c",)}


def _parse_eta(spec) -> tuple[str, dict]:
    if isinstance(spec, dict):
        return spec["name"], dict(spec.get("params", {}))
    m = _PRESET_CALL.match(spec)
    if not m:
        return spec.strip(), {}
    name = m.group(1)
    args = [float(a) for a in m.group(2).split(",") if a.strip()]
    keys = _PRESET_ARGS.get(name, ())
    if len(args) != len(keys):
        raise InputError(f"preset {name!r} takes {len(keys)} argument(s), got {len(args)}")
    return name, dict(zip(keys, args))


# --------------------------------------------------------------------------
# Model
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SyntheticModel:
    """Marginal plus regression function; ``p = E[eta(X)]`` is integrated at construction."""

    marginal: UniformMarginal | GaussianMixtureMarginal
    eta: PiecewiseMonotone1D
    eta_spec: dict = field(default_factory=dict)
    noise_exponent_alpha: float | None = None
    p: float = field(init=False)

    def __post_init__(self):
        lo, hi = self.marginal.support
        grid = np.linspace(lo, hi, 1001)
        vals = self.eta.score(grid)
        if np.any(vals < -1e-12) or np.any(vals > 1 + 1e-12):
            raise InputError("regression function must map the support into [0, 1]")
        if self.noise_exponent_alpha is not None and not 0 < self.noise_exponent_alpha < 1:
            raise InputError("noise exponent must lie in (0, 1)")
        geo = _Geometry(self, self.eta, p=0.5)
        p = geo.pos([(lo, hi, c) for c in range(len(geo.cells)) for lo, hi in [geo.cells[c][:2]]])
        object.__setattr__(self, "p", min(max(p, 0.0), 1.0))

    @property
    def support(self):
        return self.marginal.support

    def require_both_classes(self):
        if not 1e-12 < self.p < 1.0 - 1e-12:
            raise InputError(f"model has P(Y=1) = {self.p}; class-conditional quantities need both classes")

    def eta_at(self, x) -> np.ndarray:
        return self.eta.score(np.asarray(x, dtype=float))

    def to_dict(self):
        d = self.marginal.to_dict()
        d["eta"] = self.eta_spec or {"name": self.eta.name}
        if self.noise_exponent_alpha is not None:
            d["noise_exponent_alpha"] = self.noise_exponent_alpha
        return d


def uniform_model(eta: str = "linear", **params) -> SyntheticModel:
    """X ~ U(0, 1) with a preset regression function (default eta(x) = x, p = 1/2)."""
    marg = UniformMarginal(0.0, 1.0)
    return SyntheticModel(marg, make_eta(eta, params, marg.support), {"name": eta, "params": params})


def model_from_config(cfg: dict) -> SyntheticModel:
    """Build a model from a ``[model]`` config table."""
    kind = cfg.get("marginal", "uniform")
    lo, hi = float(cfg.get("lo", 0.0)), float(cfg.get("hi", 1.0))
    if kind == "uniform":
        marg = UniformMarginal(lo, hi)
    elif kind in ("gaussian-mixture", "mixture"):
        marg = GaussianMixtureMarginal(
            tuple(cfg["weights"]), tuple(cfg["means"]), tuple(cfg["sds"]), lo, hi
        )
    else:
        raise InputError(f"unknown marginal {kind!r}")
    name, params = _parse_eta(cfg.get("eta", "linear"))
    params.update(cfg.get("eta_params", {}))
    alpha = cfg.get("noise_exponent_alpha")
    return SyntheticModel(
        marg,
        make_eta(name, params, marg.support),
        {"name": name, "params": params},
        None if alpha is None else float(alpha),
    )


def sample(model: SyntheticModel, n: int, stream: np.random.Generator) -> Dataset:
    """n i.i.d. pairs: X ~ mu, then Y = +1 with probability eta(X)."""
    if n < 1:
        raise InputError("sample size must be >= 1")
    x = model.marginal.sample(stream, n)
    y = np.where(stream.random(n) < model.eta_at(x), 1, -1)
    return Dataset(x.reshape(-1, 1), y)


# --------------------------------------------------------------------------
# Geometry: score branches x regression branches on the support
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Branch:
    a: float
    b: float
    f: Callable
    kind: str
    inv: Callable | None


def _branches(scorer, lo: float, hi: float) -> list[_Branch]:
    """Monotone branches of a 1-D scorer, clipped to [lo, hi]."""
    if isinstance(scorer, FiniteMember):
        return _branches(scorer.model, lo, hi)
    raw: list[tuple[float, float, Callable, str, Callable | None]] = []
    if isinstance(scorer, Linear):
        if scorer.dim != 1:
            raise InputError("population quantities are only available for 1-D scorers")
        w = scorer.weights[0]
        kind = "inc" if w > 0 else "dec" if w < 0 else "const"
        raw.append((-math.inf, math.inf, lambda x, w=w: w * x, kind, None if w == 0 else (lambda t, w=w: t / w)))
    elif isinstance(scorer, PiecewiseLinear1D):
        b, v, sl = scorer.breakpoints, scorer.values, scorer.slopes
        edges = [-math.inf, *b[1:-1], math.inf]
        for i, slope in enumerate(sl):
            x0, v0 = b[i], v[i]
            raw.append((
                edges[i],
                edges[i + 1],
                lambda x, x0=x0, v0=v0, s=slope: v0 + s * (x - x0),
                "inc" if slope > 0 else "dec",
                lambda t, x0=x0, v0=v0, s=slope: x0 + (t - v0) / s,
            ))
    elif isinstance(scorer, PiecewiseMonotone1D):
        ps = scorer.pieces
        for i, p in enumerate(ps):
            a = -math.inf if i == 0 else p.lo
            bb = math.inf if i == len(ps) - 1 else p.hi
            raw.append((a, bb, p.func, p.kind, p.inverse))
    else:
        raise InputError(f"unsupported scorer type {type(scorer).__name__}")
    out = []
    for a, b_, f, kind, inv in raw:
        a2, b2 = max(a, lo), min(b_, hi)
        if b2 > a2:
            out.append(_Branch(a2, b2, f, kind, inv))
    return out


_CMP = {
    "ge": lambda a, t: a >= t,
    "gt": lambda a, t: a > t,
    "le": lambda a, t: a <= t,
    "lt": lambda a, t: a < t,
}


class _Geometry:
    """Model x scorer on a common refinement into cells.

    Each cell is ``(a, b, s_branch, eta_func, s_at_a, s_at_b)``; intervals
    produced by :meth:`level` are ``(lo, hi, cell_index)``.
    """

    def __init__(self, model: SyntheticModel, scorer, p: float | None = None):
        self.model = model
        self.p = model.p if p is None else p
        lo, hi = model.support
        s_br = _branches(scorer, lo, hi)
        e_br = _branches(model.eta, lo, hi)
        cuts = sorted({lo, hi, *(br.a for br in s_br), *(br.a for br in e_br)})
        cells = []
        for a, b in zip(cuts, cuts[1:]):
            if b <= a:
                continue
            mid = 0.5 * (a + b)
            sb = next(br for br in s_br if br.a <= mid <= br.b)
            eb = next(br for br in e_br if br.a <= mid <= br.b)
            cells.append((a, b, sb, eb.f, float(sb.f(a)), float(sb.f(b))))
        self.cells = cells
        self.pdf = model.marginal.pdf
        self.cdf = model.marginal.cdf
        self._anti = [self._antiderivative(c) for c in cells]

    def _antiderivative(self, cell):
        """Chebyshev antiderivative of eta * pdf on a cell, checked against adaptive quadrature."""
        a, b, _, eta, _, _ = cell
        pdf_vec = self.model.marginal.pdf_vec

        def g(x):
            return np.broadcast_to(eta(x), np.shape(x)) * pdf_vec(x)

        ref = integrate.quad(lambda x: float(eta(x)) * self.pdf(x), a, b, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
        mid = a + 0.37 * (b - a)
        ref_mid = integrate.quad(lambda x: float(eta(x)) * self.pdf(x), a, mid, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
        for deg in (12, 24, 40, 64, 96, 128, 256):
            fit = np.polynomial.Chebyshev.interpolate(g, deg, domain=[a, b])
            anti = fit.trim(1e-17 * max(1.0, float(np.abs(fit.coef).max()))).integ(lbnd=a)
            if abs(anti(b) - ref) < 1e-13 and abs(anti(mid) - ref_mid) < 1e-13:
                return anti
        return None

    # -- level sets --------------------------------------------------------

    def _root(self, br: _Branch, a: float, b: float, t: float) -> float:
        if br.inv is not None:
            x = float(br.inv(t))
        else:
            x = optimize.brentq(lambda z: float(br.f(z)) - t, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return min(max(x, a), b)

    def level(self, t: float, op: str) -> list[tuple[float, float, int]]:
        """Intervals where ``s(x) op t`` for op in ge/gt/le/lt."""
        cmp = _CMP[op]
        upper = op in ("ge", "gt")
        out = []
        for ci, (a, b, br, _, fa, fb) in enumerate(self.cells):
            if br.kind == "const":
                if cmp(fa, t):
                    out.append((a, b, ci))
                continue
            lo_val, hi_val = (fa, fb) if br.kind == "inc" else (fb, fa)
            if cmp(lo_val, t) and cmp(hi_val, t):
                out.append((a, b, ci))
                continue
            if not cmp(lo_val, t) and not cmp(hi_val, t):
                continue
            x = self._root(br, a, b, t)
            keep_right = upper == (br.kind == "inc")
            seg = (x, b) if keep_right else (a, x)
            if seg[1] > seg[0]:
                out.append((seg[0], seg[1], ci))
        return out

    # -- measures ----------------------------------------------------------

    def mu(self, ints) -> float:
        return float(sum(self.cdf(b) - self.cdf(a) for a, b, _ in ints))

    def _quad(self, g, a, b, eps=EPS_ABS_1D):
        val, err = integrate.quad(g, a, b, epsabs=eps, epsrel=1e-11, limit=200)
        if err > FAIL_TOL:
            raise NumericalError(f"quadrature on [{a}, {b}] reached only {err:.3g}")
        return val

    def pos(self, ints) -> float:
        """P(Y = 1, X in ints)."""
        total = 0.0
        for a, b, ci in ints:
            anti = self._anti[ci]
            if anti is not None:
                total += float(anti(b) - anti(a))
            else:
                eta = self.cells[ci][3]
                total += self._quad(lambda x, eta=eta: float(eta(x)) * self.pdf(x), a, b)
        return total

    def neg(self, ints) -> float:
        return self.mu(ints) - self.pos(ints)

    def integrate(self, ints, g, eps=EPS_ABS_2D) -> float:
        """Sum over intervals of int g(x, s(x), eta(x)) dmu(x)."""
        total = 0.0
        for a, b, ci in ints:
            _, _, br, eta, _, _ = self.cells[ci]
            total += self._quad(
                lambda x, br=br, eta=eta: g(x, float(br.f(x)), float(eta(x))) * self.pdf(x), a, b, eps
            )
        return total

    # -- distribution of s(X) ----------------------------------------------

    def cdf_s(self, t: float) -> float:
        return self.mu(self.level(t, "le"))

    def score_range(self):
        vals = [v for c in self.cells for v in (c[4], c[5])]
        return min(vals), max(vals)

    def quantile(self, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise InputError(f"quantile level must lie in (0, 1], got {v}")
        lo, hi = self.score_range()
        if self.cdf_s(lo) >= v - QUANTILE_SLACK:
            return lo
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.cdf_s(mid) >= v - QUANTILE_SLACK:
                hi = mid
            else:
                lo = mid
        return hi

    def k_at(self, v: float) -> tuple[float, float]:
        q = self.quantile(v)
        below = self.level(q, "le")
        return q, self.pos(below) - self.neg(below)


# --------------------------------------------------------------------------
# Population quantities
# --------------------------------------------------------------------------


def true_cdf(model: SyntheticModel, s, t: float) -> float:
    return _Geometry(model, s).cdf_s(t)


def true_quantile(model: SyntheticModel, s, v: float) -> float:
    """Generalized inverse of the cdf of s(X), by bisection on the integrated cdf."""
    return _Geometry(model, s).quantile(v)


def _k_prime(geo: _Geometry, v: float, h: float = FD_STEP) -> float:
    if v - h > 0 and v + h <= 1:
        return (geo.k_at(v + h)[1] - geo.k_at(v - h)[1]) / (2 * h)
    # backward, second order
    return (3 * geo.k_at(v)[1] - 4 * geo.k_at(v - h)[1] + geo.k_at(v - 2 * h)[1]) / (2 * h)


def k_values(model: SyntheticModel, s, v: float) -> tuple[float, float, float]:
    """(Q(s, v), K(s, v), K'(s, v)) with K' by centred finite difference in v."""
    geo = _Geometry(model, s)
    q, k = geo.k_at(v)
    return q, k, _k_prime(geo, v)


@dataclass(frozen=True)
class TrueQuantities:
    u0: float
    p: float
    q: float
    alpha: float
    beta: float
    l: float  # noqa: E741
    locauc: float
    w: float
    r_local: float
    m: float
    k: float
    k_prime: float
    trunc_auc: float
    top_mass: float

    def to_dict(self):
        return dict(self.__dict__)


def true_report(model: SyntheticModel, s, u0) -> TrueQuantities:
    """All population criteria of ``s`` at rate ``u0``.

    LocAUC (outer integral over positives in the top set, inner over lower
    negatives), the local ranking error (outer over negatives in the top set,
    inner over positives between the threshold and that negative) and the
    truncated AUC (outer over top negatives, inner over higher positives) are
    three separate nested quadratures, so the identities linking them are
    genuine checks.
    """
    u0 = check_rate(u0)
    model.require_both_classes()
    geo = _Geometry(model, s)
    p = model.p
    v0 = 1.0 - u0
    q = geo.quantile(v0)
    top = geo.level(q, "ge")
    top_mass = geo.mu(top)
    pos_top, neg_top = geo.pos(top), geo.neg(top)
    beta, alpha = pos_top / p, neg_top / (1 - p)
    l_val = geo.pos(geo.level(q, "lt")) + geo.neg(geo.level(q, "gt"))

    def neg_below(t):
        return geo.neg(geo.level(t, "lt"))

    def pos_above(t):
        return geo.pos(geo.level(t, "gt"))

    locauc = geo.integrate(top, lambda x, st, e: e * neg_below(st)) / (p * (1 - p))
    r_local = 2.0 * geo.integrate(top, lambda x, st, e: (1 - e) * (pos_top - geo.pos(geo.level(st, "ge"))))
    trunc = geo.integrate(top, lambda x, st, e: (1 - e) * pos_above(st)) / (p * (1 - p))
    strict_top = geo.level(q, "gt")
    w = geo.integrate(strict_top, lambda x, st, e: e * geo.cdf_s(st), eps=EPS_ABS_1D) / p

    k = geo.pos(geo.level(q, "le")) - geo.neg(geo.level(q, "le"))
    return TrueQuantities(
        u0=u0,
        p=p,
        q=q,
        alpha=alpha,
        beta=beta,
        l=l_val,
        locauc=locauc,
        w=w,
        r_local=r_local,
        m=r_local + (1 - p) * l_val,
        k=k,
        k_prime=_k_prime(geo, v0),
        trunc_auc=trunc,
        top_mass=top_mass,
    )


@dataclass(frozen=True)
class BayesReport:
    u0: float
    q_eta: float
    l_star: float
    l_star_direct: float
    difference: float
    eta: PiecewiseMonotone1D = field(repr=False)

    def contains(self, x) -> np.ndarray:
        """Membership in the optimal top set {eta >= Q(eta, 1 - u0)}."""
        return self.eta.score(np.asarray(x, dtype=float)) >= self.q_eta


def _abs_dev(geo: _Geometry, q: float) -> float:
    """E|eta(X) - q| by quadrature split where eta crosses q."""
    total = 0.0
    for side, sign in (("ge", 1.0), ("lt", -1.0)):
        total += geo.integrate(geo.level(q, side), lambda x, st, e: sign * (e - q), eps=EPS_ABS_1D)
    return total


def bayes_report(model: SyntheticModel, u0, tol: float = 1e-8) -> BayesReport:
    """Quantile of eta(X) and the optimal mass-constrained error, by two routes.

    The closed-form route uses the formula in terms of E|eta(X) - q|; the
    direct route integrates the error of the classifier predicting +1 on
    {eta > q}, completed on any atom {eta = q} by the fraction needed to meet
    the mass constraint.
    """
    u0 = check_rate(u0)
    geo = _Geometry(model, model.eta)
    q = geo.quantile(1.0 - u0)
    formula = 1.0 - q + (1.0 - u0) * (2.0 * q - 1.0) - _abs_dev(geo, q)

    below, above = geo.level(q, "lt"), geo.level(q, "gt")
    direct = geo.pos(below) + geo.neg(above)
    atom = 1.0 - geo.mu(below) - geo.mu(above)
    if atom > 1e-12:
        theta = min(max((u0 - geo.mu(above)) / atom, 0.0), 1.0)
        direct += theta * (1.0 - q) * atom + (1.0 - theta) * q * atom
    diff = formula - direct
    if abs(diff) > tol:
        raise ConsistencyError(f"optimal error disagrees across routes: {formula} vs {direct}", formula, direct)
    return BayesReport(u0, q, formula, direct, diff, model.eta)


def excess_risk_routes(model: SyntheticModel, s, u0) -> tuple[float, float]:
    """(L(s) - L*, 2 E|eta - q| 1{C* sym-diff C_s}) for a scorer whose top set has mass u0."""
    u0 = check_rate(u0)
    tq = true_report(model, s, u0)
    if abs(tq.top_mass - u0) > 1e-9:
        raise InputError(
            f"top set of s has mass {tq.top_mass}, not u0={u0} (atom at the quantile); "
            "excess risk over mass-constrained classifiers is undefined"
        )
    bayes = bayes_report(model, u0)
    via_risk = tq.l - bayes.l_star

    lo, hi = model.support
    geo_eta = _Geometry(model, model.eta)
    geo_s = _Geometry(model, s)
    star = geo_eta.level(bayes.q_eta, "ge")
    mine = geo_s.level(tq.q, "ge")
    cuts = {lo, hi}
    for g in (geo_eta, geo_s):
        cuts.update(c[0] for c in g.cells)
    for ints in (star, mine):
        for a, b, _ in ints:
            cuts.update((a, b))
    cuts = sorted(cuts)

    def inside(ints, x):
        return any(a <= x <= b for a, b, _ in ints)

    total = 0.0
    q = bayes.q_eta
    for a, b in zip(cuts, cuts[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        if inside(star, mid) != inside(mine, mid):
            total += geo_eta._quad(lambda x: abs(float(model.eta_at(x)[0]) - q) * geo_eta.pdf(x), a, b)
    return via_risk, 2.0 * total


def excess_risk(model: SyntheticModel, s, u0, tol: float = 1e-7) -> float:
    """L(s) - L*, checked against the symmetric-difference formula."""
    via_risk, via_sym = excess_risk_routes(model, s, u0)
    if abs(via_risk - via_sym) > tol:
        raise ConsistencyError(f"excess risk disagrees across routes: {via_risk} vs {via_sym}", via_risk, via_sym)
    return max(via_sym, 0.0)


def optimal_scoring(model: SyntheticModel, u0, below: float | None = None) -> PiecewiseMonotone1D:
    """An optimal scorer: eta on the optimal top set, a constant strictly below it elsewhere.

    ``below`` defaults to ``Q(eta, 1 - u0) - 1``.
    """
    u0 = check_rate(u0)
    geo = _Geometry(model, model.eta)
    q = geo.quantile(1.0 - u0)
    c = q - 1.0 if below is None else float(below)
    if not c < q:
        raise InputError("the constant must lie strictly below the optimal threshold")
    const = lambda x, c=c: c + 0.0 * np.asarray(x, dtype=float)  # noqa: E731
    parts = geo.level(q, "ge")
    segs = []
    for a, b, br, _, _, _ in geo.cells:
        keep = [(lo, hi) for lo, hi, ci in parts if geo.cells[ci][0] == a]
        cursor = a
        for lo, hi in sorted(keep):
            if lo > cursor:
                segs.append(Piece(cursor, lo, const, "const"))
            segs.append(Piece(lo, hi, br.f, br.kind, br.inv))
            cursor = hi
        if cursor < b:
            segs.append(Piece(cursor, b, const, "const"))
    return PiecewiseMonotone1D(tuple(segs), name=f"s*(u0={u0})")


def w_constant(p: float, u0: float) -> float:
    """Constant term of the quadratic relation between W, L and R: S - S^2/4 with S = p + u0."""
    s = p + u0
    return s - s * s / 4.0
