"""Study configuration files (TOML or JSON).

Sections: ``[model]`` (see :func:`toprank.oracle.model_from_config`),
``[family]``, ``[criterion]``, ``[grid]``, plus ``[scorer]`` / ``[[scorers]]``
and ``[identities]`` for the decomposition and identity studies.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import identity, model_from_dict
from .erm import Criterion, ErmProblem, FiniteFamily, LinearFamily, PiecewiseFamily
from .errors import InputError
from .experiments import Band, reflection_family, two_window_family
from .oracle import bayes_report, model_from_config

__all__ = ["load_config", "shipped_configs", "build_model", "build_problem", "build_scorer", "band_from"]


def shipped_configs() -> list[str]:
    return sorted(p.name for p in resources.files("toprank.configs").iterdir() if p.name.endswith(".toml"))


def load_config(path) -> dict:
    """Read a TOML/JSON config; a bare name such as ``decomp.toml`` falls back to the shipped copy."""
    p = Path(path)
    if not p.exists():
        if p.name in shipped_configs() and str(path) == p.name:
            text = resources.files("toprank.configs").joinpath(p.name).read_text(encoding="utf-8")
            return tomllib.loads(text)
        raise InputError(f"config file {path} not found")
    try:
        text = p.read_text(encoding="utf-8")
        if p.suffix == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot parse config {path}: {exc}") from exc


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name)
    if not isinstance(sec, dict):
        raise InputError(f"config is missing the [{name}] section")
    return sec


def build_model(cfg: dict):
    try:
        return model_from_config(cfg.get("model", cfg))
    except KeyError as exc:
        raise InputError(f"model config is missing {exc}") from exc


def build_scorer(spec: dict | None):
    if not spec:
        return identity()
    try:
        return model_from_dict(spec)
    except KeyError as exc:
        raise InputError(f"scorer spec is missing {exc}") from exc


def band_from(values, default: Band) -> Band:
    if values is None:
        return default
    lo, hi = values
    return Band(float(lo), float(hi))


def build_problem(cfg: dict, model=None, seed: int | None = None) -> ErmProblem:
    """ErmProblem from ``[family]`` and ``[criterion]``."""
    fam_cfg = _section(cfg, "family")
    crit_cfg = _section(cfg, "criterion")
    u0 = float(crit_cfg.get("u0", 0.2))
    crit = Criterion.parse(crit_cfg.get("name", "L_HAT"))
    kind = fam_cfg.get("kind")
    budget = fam_cfg.get("budget")
    if kind == "reflection":
        count = int(fam_cfg.get("n_members", 20))
        spacing = float(fam_cfg.get("spacing", 0.01))
        center = fam_cfg.get("center")
        if center is None:
            if model is None:
                raise InputError("reflection family needs a center or a model")
            center = bayes_report(model, u0).q_eta
        members = reflection_family(float(center), np.arange(count) * spacing, order_seed=fam_cfg.get("order_seed", 0))
        family = FiniteFamily(members)
    elif kind == "two-window":
        family = FiniteFamily(two_window_family(u0, int(fam_cfg.get("n_members", 20)), float(fam_cfg.get("gap", 0.01))))
    elif kind == "finite":
        family = FiniteFamily(tuple(build_scorer(m) for m in fam_cfg.get("members", [])))
    elif kind == "piecewise":
        family = PiecewiseFamily(
            int(fam_cfg.get("k", 5)),
            int(fam_cfg.get("resolution", 8)),
            float(fam_cfg.get("m", 0.1)),
            float(fam_cfg.get("M", 2.0)),
            float(fam_cfg.get("lo", 0.0)),
            float(fam_cfg.get("hi", 1.0)),
        )
        budget = int(budget or 200)
    elif kind == "linear":
        family = LinearFamily(int(fam_cfg.get("d", 1)))
        budget = int(budget or 200)
    else:
        raise InputError(f"unknown family kind {kind!r}")
    return ErmProblem(
        family,
        crit,
        u0,
        budget=None if budget is None else int(budget),
        restarts=int(fam_cfg.get("restarts", 1)),
        seed=int(seed if seed is not None else cfg.get("grid", {}).get("seed", 0)),
    )
