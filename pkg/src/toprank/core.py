"""Shared domain types: datasets, rates, scoring models and random streams.

Labels are stored as integers in {-1, +1}. Every type here is immutable after
construction (numpy buffers are flagged read-only), so instances can be shared
between worker threads without copying.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .errors import InputError

__all__ = [
    "GLOBAL",
    "Rate",
    "check_rate",
    "count_at_level",
    "Dataset",
    "Linear",
    "PiecewiseLinear1D",
    "Piece",
    "PiecewiseMonotone1D",
    "FiniteMember",
    "ScoringModel",
    "identity",
    "evaluate",
    "score_dataset",
    "model_to_dict",
    "model_from_dict",
    "SeedSpec",
    "child_stream",
    "read_csv",
    "write_csv",
]


class _Global:
    """Sentinel selecting the global (whole-list) criterion, i.e. the u0 -> 1 endpoint."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "GLOBAL"

    def __reduce__(self):
        return (_Global, ())


GLOBAL = _Global()


@dataclass(frozen=True)
class Rate:
    """Proportion u0 of top-scored instances under focus."""

    u0: float

    def __post_init__(self):
        u0 = float(self.u0)
        if not (0.0 < u0 < 1.0) or math.isnan(u0):
            raise InputError(f"rate u0 must lie in the open interval (0, 1), got {self.u0!r}")
        object.__setattr__(self, "u0", u0)

    @property
    def v0(self) -> float:
        return 1.0 - self.u0


def check_rate(u0, allow_global=False):
    """Normalize ``u0`` (float, :class:`Rate` or ``GLOBAL``) to a float or ``GLOBAL``."""
    if u0 is GLOBAL:
        if not allow_global:
            raise InputError("GLOBAL is not accepted here; pass a rate in (0, 1)")
        return GLOBAL
    if isinstance(u0, Rate):
        return u0.u0
    return Rate(u0).u0


def count_at_level(n: int, v: float) -> int:
    """Smallest integer k with k/n >= v, i.e. ceil(n*v).

    Products within 1e-9 of an integer are snapped to it, so that levels such
    as ``1 - 0.2`` (which is not exactly 0.8 in binary) behave as intended.
    """
    x = n * v
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix (n x d) with labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2:
            raise InputError(f"features must be a 2-D array, got shape {x.shape}")
        y = np.asarray(self.labels)
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise InputError(
                f"labels must be a vector of length {x.shape[0]}, got shape {y.shape}"
            )
        if y.size and not np.all((y == 1) | (y == -1)):
            raise InputError("every label must be exactly -1 or +1")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n_neg(self) -> int:
        return int(np.count_nonzero(self.labels == -1))


# --------------------------------------------------------------------------
# Scoring models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    """Score x -> w . x."""

    weights: tuple[float, ...]
    range_bound: float = 1.0

    def __post_init__(self):
        w = tuple(float(v) for v in np.atleast_1d(self.weights))
        if not w or not all(math.isfinite(v) for v in w):
            raise InputError("linear weights must be a nonempty finite vector")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return len(self.weights)

    def score(self, x: np.ndarray) -> np.ndarray:
        return x @ np.asarray(self.weights)


@dataclass(frozen=True)
class PiecewiseLinear1D:
    """Continuous piecewise-linear score on the real line.

    Beyond the outer breakpoints the adjacent segment is continued, so the
    declared slope bounds ``m <= |slope| <= M`` hold on all of R. When
    ``slope_bounds`` is omitted it is taken from the segments themselves.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    slope_bounds: tuple[float, float] | None = None
    range_bound: float = 1.0

    def __post_init__(self):
        b = tuple(float(v) for v in self.breakpoints)
        v = tuple(float(t) for t in self.values)
        if len(b) < 2 or len(b) != len(v):
            raise InputError("need at least two breakpoints and one value per breakpoint")
        if not all(math.isfinite(t) for t in b + v):
            raise InputError("breakpoints and values must be finite")
        if any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise InputError("breakpoints must be strictly increasing")
        slopes = [abs((v1 - v0) / (b1 - b0)) for b0, b1, v0, v1 in zip(b, b[1:], v, v[1:])]
        if self.slope_bounds is None:
            bounds = (min(slopes), max(slopes))
        else:
            bounds = (float(self.slope_bounds[0]), float(self.slope_bounds[1]))
        m, big_m = bounds
        if not (0.0 < m <= big_m < math.inf):
            raise InputError(f"slope bounds must satisfy 0 < m <= M < inf, got {bounds}")
        tol = 1e-12 * max(1.0, big_m)
        for s in slopes:
            if not (m - tol <= s <= big_m + tol):
                raise InputError(f"segment slope {s} violates bounds [{m}, {big_m}]")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "slope_bounds", bounds)

    @property
    def dim(self) -> int:
        return 1

    @property
    def slopes(self) -> tuple[float, ...]:
        b, v = self.breakpoints, self.values
        return tuple((v1 - v0) / (b1 - b0) for b0, b1, v0, v1 in zip(b, b[1:], v, v[1:]))

    def score(self, x: np.ndarray) -> np.ndarray:
        t = np.asarray(x, dtype=float).reshape(-1)
        b, v = np.asarray(self.breakpoints), np.asarray(self.values)
        out = np.interp(t, b, v)
        sl = self.slopes
        lo, hi = t < b[0], t > b[-1]
        out[lo] = v[0] + sl[0] * (t[lo] - b[0])
        out[hi] = v[-1] + sl[-1] * (t[hi] - b[-1])
        return out


@dataclass(frozen=True)
class Piece:
    """Continuous monotone (or constant) branch of a 1-D function on [lo, hi].

    ``kind`` is ``"inc"``, ``"dec"`` or ``"const"``. ``inverse``, when given,
    maps a level back to the abscissa inside the piece; otherwise a root
    finder is used.
    """

    lo: float
    hi: float
    func: Callable[[np.ndarray], np.ndarray]
    kind: str
    inverse: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.kind not in ("inc", "dec", "const"):
            raise InputError(f"unknown piece kind {self.kind!r}")
        if not self.lo < self.hi:
            raise InputError("piece needs lo < hi")


@dataclass(frozen=True)
class PiecewiseMonotone1D:
    """1-D score assembled from monotone pieces; used for regression functions and s*.

    Outside the outermost pieces the outer piece's function is extended.
    """

    pieces: tuple[Piece, ...]
    name: str = "piecewise-monotone"
    range_bound: float = 1.0

    def __post_init__(self):
        ps = tuple(self.pieces)
        if not ps:
            raise InputError("at least one piece is required")
        for a, b in zip(ps, ps[1:]):
            if not math.isclose(a.hi, b.lo, rel_tol=0, abs_tol=1e-12):
                raise InputError("pieces must tile an interval without gaps")
        object.__setattr__(self, "pieces", ps)

    @property
    def dim(self) -> int:
        return 1

    @property
    def support(self) -> tuple[float, float]:
        return self.pieces[0].lo, self.pieces[-1].hi

    def score(self, x: np.ndarray) -> np.ndarray:
        t = np.asarray(x, dtype=float).reshape(-1)
        edges = np.array([p.hi for p in self.pieces[:-1]])
        idx = np.searchsorted(edges, t, side="left")
        out = np.empty_like(t)
        for k, p in enumerate(self.pieces):
            sel = idx == k
            if np.any(sel):
                out[sel] = np.broadcast_to(p.func(t[sel]), t[sel].shape)
        return out


@dataclass(frozen=True)
class FiniteMember:
    """Member ``index`` of a declared finite family of scoring models."""

    family: tuple
    index: int

    def __post_init__(self):
        fam = tuple(self.family)
        if not 0 <= self.index < len(fam):
            raise InputError(f"index {self.index} outside family of size {len(fam)}")
        object.__setattr__(self, "family", fam)

    @property
    def model(self):
        return self.family[self.index]

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def range_bound(self) -> float:
        return self.model.range_bound

    def score(self, x: np.ndarray) -> np.ndarray:
        return self.model.score(x)


ScoringModel = Union[Linear, PiecewiseLinear1D, PiecewiseMonotone1D, FiniteMember]


def identity() -> Linear:
    """The 1-D identity scorer."""
    return Linear((1.0,))


def evaluate(model: ScoringModel, x) -> float:
    """Score a single feature vector."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1 or v.shape[0] != model.dim:
        raise InputError(f"feature vector of dimension {v.shape} does not match model dimension {model.dim}")
    out = float(model.score(v.reshape(1, -1))[0])
    if not math.isfinite(out):
        raise InputError(f"score is not finite at x={v.tolist()}")
    return out


def score_dataset(model: ScoringModel, data: Dataset) -> np.ndarray:
    """Vector of scores, one per row of ``data``."""
    if data.n == 0:
        return np.empty(0)
    if data.d != model.dim:
        raise InputError(f"dataset dimension {data.d} does not match model dimension {model.dim}")
    out = np.asarray(model.score(data.features), dtype=float).reshape(-1)
    return _frozen(out)


def model_to_dict(model: ScoringModel) -> dict:
    if isinstance(model, Linear):
        return {"kind": "linear", "weights": list(model.weights)}
    if isinstance(model, PiecewiseLinear1D):
        return {
            "kind": "piecewise",
            "breakpoints": list(model.breakpoints),
            "values": list(model.values),
            "slope_bounds": list(model.slope_bounds),
        }
    if isinstance(model, FiniteMember):
        return {"kind": "member", "index": model.index, "model": model_to_dict(model.model)}
    if isinstance(model, PiecewiseMonotone1D):
        return {"kind": "function", "name": model.name}
    raise InputError(f"cannot serialize {type(model).__name__}")


def model_from_dict(spec: dict) -> ScoringModel:
    kind = spec.get("kind")
    if kind == "identity":
        return identity()
    if kind == "linear":
        return Linear(tuple(spec["weights"]))
    if kind == "piecewise":
        bounds = spec.get("slope_bounds")
        return PiecewiseLinear1D(
            tuple(spec["breakpoints"]), tuple(spec["values"]), tuple(bounds) if bounds else None
        )
    if kind == "member":
        return model_from_dict(spec["model"])
    raise InputError(f"unknown scoring model kind {kind!r}")


# --------------------------------------------------------------------------
# Random streams
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SeedSpec:
    """Master seed; replication ``r`` gets the stream spawned with key ``(r,)``."""

    master_seed: int

    def __post_init__(self):
        s = int(self.master_seed)
        if not 0 <= s < 2**64:
            raise InputError("master seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "master_seed", s)

    def child_stream(self, replication: int) -> np.random.Generator:
        return child_stream(self, replication)


def child_stream(seed: SeedSpec | int, replication: int) -> np.random.Generator:
    """Independent, reproducible generator for one replication.

    Derived from the seed alone, never from shared state, so the stream for a
    replication does not depend on execution order or worker count.
    """
    if not isinstance(seed, SeedSpec):
        seed = SeedSpec(seed)
    if replication < 0:
        raise InputError("replication index must be >= 0")
    ss = np.random.SeedSequence(entropy=seed.master_seed, spawn_key=(int(replication),))
    return np.random.Generator(np.random.PCG64(ss))


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

_FEATURE = re.compile(r"^x(\d+)$")


def read_csv(path: str | Path) -> tuple[Dataset, dict[str, np.ndarray]]:
    """Read ``x1,...,xd,y`` (plus optional extra numeric columns).

    Returns the dataset and a mapping of the extra columns, which the CLI
    accepts as precomputed score columns.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if "y" not in header:
        raise InputError(f"{path}: header must contain a 'y' column")
    feats = sorted(
        ((int(m.group(1)), i) for i, h in enumerate(header) if (m := _FEATURE.match(h))),
    )
    if [k for k, _ in feats] != list(range(1, len(feats) + 1)):
        raise InputError(f"{path}: feature columns must be x1..xd")
    try:
        body = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric cell ({exc})") from exc
    if body.size == 0:
        body = body.reshape(0, len(header))
    if body.shape[1] != len(header):
        raise InputError(f"{path}: ragged rows")
    yi = header.index("y")
    y = body[:, yi]
    if not np.all((y == 1) | (y == -1)):
        raise InputError(f"{path}: labels must be -1 or 1")
    x = body[:, [i for _, i in feats]]
    extras = {
        h: body[:, i].copy()
        for i, h in enumerate(header)
        if h != "y" and not _FEATURE.match(h)
    }
    return Dataset(x, y.astype(np.int64)), extras


def write_csv(data: Dataset, path: str | Path) -> None:
    header = [f"x{j + 1}" for j in range(data.d)] + ["y"]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row, label in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in row] + [int(label)])
