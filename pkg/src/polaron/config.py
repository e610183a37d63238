"""Run configuration: line-based `key = value` sections describing the
model, the integration rules and the scan parameters."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .model import CouplingSpec, EpsilonSpec, ModelParams
from .quadrature import DiscreteMeasure, QuadratureSpec, grid_measure

__all__ = ["RunConfig", "load_config"]


@dataclass
class RunConfig:
    params: ModelParams
    quad: QuadratureSpec
    measure: DiscreteMeasure
    run: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def vector(self, magnitude: float) -> np.ndarray:
        """Scalar momenta are magnitudes along the first axis."""
        v = np.zeros(self.params.d)
        v[0] = magnitude
        return v

    def direction(self) -> np.ndarray:
        name = self.run.get("direction", "x")
        axes = {"x": 0, "y": 1, "z": 2}
        if name not in axes or axes[name] >= self.params.d:
            raise InputError(f"direction {name!r} invalid for d={self.params.d}")
        v = np.zeros(self.params.d)
        v[axes[name]] = 1.0
        return v


def _floats(text: str) -> list:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _get(section, key, cast, default=None, required=False):
    if key not in section:
        if required:
            raise InputError(f"missing config key {key!r} in [{section.name}]")
        return default
    try:
        return cast(section[key])
    except ValueError as exc:
        raise InputError(f"bad value for {key!r}: {section[key]!r}") from exc


def _epsilon_from(section) -> EpsilonSpec:
    kind = _get(section, "kind", str, required=True)
    if kind == "constant":
        return EpsilonSpec.constant(_get(section, "eps0", float, 1.0))
    if kind == "relativistic":
        return EpsilonSpec.relativistic(
            _get(section, "mass", float, required=True),
            _get(section, "shift", float, 0.0),
        )
    if kind == "tabulated":
        path = _get(section, "table-path", str, required=True)
        table = np.loadtxt(path, delimiter=",", ndmin=2)
        return EpsilonSpec.tabulated(table[:, 0], table[:, 1])
    raise InputError(f"unknown epsilon kind {kind!r}")


def _coupling_from(section) -> CouplingSpec:
    kind = _get(section, "kind", str, "separable")
    return CouplingSpec(
        kind=kind,
        amplitude=_get(section, "amplitude", float, 1.0),
        width=_get(section, "width", float, 1.0),
        p_width=_get(section, "p-width", float, None),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    cp.read(path)
    for name in ("model", "epsilon", "coupling"):
        if name not in cp:
            raise InputError(f"config is missing the [{name}] section")

    eps = _epsilon_from(cp["epsilon"])
    coupling = _coupling_from(cp["coupling"])
    params = ModelParams(
        d=_get(cp["model"], "dimension", int, required=True),
        alpha=_get(cp["model"], "alpha", float, required=True),
        eps=eps,
        coupling=coupling,
        c0=_get(cp["model"], "c0", float, required=True),
    )

    qsec = cp["quadrature"] if "quadrature" in cp else {}
    r_max = _get(qsec, "rmax", float, None) if qsec else None
    if r_max is None:
        r_max = max(coupling.decay_radius(), 4.0)
    quad = QuadratureSpec.continuum(
        n_radial=_get(qsec, "radial-nodes", int, 64) if qsec else 64,
        angular_degree=_get(qsec, "angular-degree", int, 17) if qsec else 17,
        r_max=r_max,
    )

    gsec = cp["grid"] if "grid" in cp else {}
    measure = grid_measure(
        _get(gsec, "lambda", float, 3.0) if gsec else 3.0,
        _get(gsec, "points-per-axis", int, 5) if gsec else 5,
        params.d,
    )

    run = {}
    if "run" in cp:
        sec = cp["run"]
        for key in sec:
            run[key] = sec[key]
    # typed views with defaults
    typed = {
        "p_values": _floats(run.get("p-values", "0.0")),
        "q_values": _floats(run["q-values"]) if "q-values" in run else None,
        "p": float(run.get("p", "0.0")),
        "kappa_mode": run.get("kappa-mode", "fraction"),
        "kappa": float(run.get("kappa", "0.9")),
        "alpha_ladder": _floats(run.get("alpha-ladder", "0.2 0.1 0.05")),
        "tol": float(run.get("tol", "1e-10")),
        "neumann_order": int(run.get("neumann-order", "1")),
        "delta_ladder": _floats(run.get("delta-ladder", "0.1 0.03 0.01")),
        "direction": run.get("direction", "x"),
        "q_max": float(run.get("q-max", "2.0")),
        "q_count": int(run.get("q-count", "21")),
        "n_max": int(run.get("n-max", "2")),
        "kappa_fractions": _floats(run.get("kappa-fractions", "0.5 0.7 0.9")),
        "oracle_q": _floats(run["oracle-q"]) if "oracle-q" in run else [],
        "seed": int(run.get("seed", "0")),
    }

    raw = {name: dict(cp[name]) for name in cp.sections()}
    return RunConfig(params=params, quad=quad, measure=measure, run=typed, raw=raw)
