"""Run configuration: a flat-sectioned key=value text format, parsed strictly.

Unknown sections or keys are rejected with the offending line number, so a
typo in a tolerance name can never silently fall back to a default.  All
values have defaults; an empty file is a valid irrotational run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .vorticity import VorticitySpec, affine, constant, zero


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def parse_vorticity_descriptor(text: str) -> VorticitySpec:
    """Compact descriptor: zero | constant:<gamma0> | affine:<beta>[:<gamma0>]."""
    parts = [tok.strip() for tok in text.split(":")]
    kind = parts[0]
    if kind == "zero":
        if len(parts) != 1:
            raise ValueError("zero takes no parameters")
        return zero()
    if kind == "constant":
        if len(parts) != 2:
            raise ValueError("constant takes exactly one parameter (gamma0)")
        return constant(float(parts[1]))
    if kind == "affine":
        if len(parts) not in (2, 3):
            raise ValueError("affine takes beta and optionally gamma0")
        beta = float(parts[1])
        gamma0 = float(parts[2]) if len(parts) == 3 else 0.0
        return affine(beta, gamma0)
    raise ValueError(f"unknown vorticity kind {kind!r}")


def _parse_vorticity_list(text: str) -> list[VorticitySpec]:
    return [parse_vorticity_descriptor(tok) for tok in text.split(";") if tok.strip()]


@dataclass
class RunConfig:
    """Everything one solve/analyze/sweep run needs."""

    gravity: float = 9.81
    mass_flux: float | None = None  # default: unit-depth irrotational value
    vorticity: VorticitySpec = field(default_factory=zero)
    n_q: int = 65
    n_p: int = 65
    amplitude: float = 0.05
    amplitude_unit: str = "depth"   # "depth" or "absolute"
    steps: int = 5
    seed: int = 1234
    newton_tol: float = 1e-10
    out_dir: str = "out"
    plots: bool = False
    sweep_vorticities: list[VorticitySpec] = field(default_factory=list)
    sweep_amplitudes: list[float] = field(default_factory=list)
    workers: int = 4

    def resolved_mass_flux(self) -> float:
        if self.mass_flux is not None:
            return self.mass_flux
        return -float(np.sqrt(self.gravity * np.tanh(1.0)))


# section -> key -> (setter name, value parser)
_SCHEMA = {
    "physical": {
        "gravity": ("gravity", float),
        "mass_flux": ("mass_flux", float),
    },
    "vorticity": {
        "kind": None,    # combined below
        "gamma0": None,
        "beta": None,
    },
    "grid": {
        "n_q": ("n_q", int),
        "n_p": ("n_p", int),
    },
    "run": {
        "amplitude": ("amplitude", float),
        "amplitude_unit": ("amplitude_unit", str),
        "steps": ("steps", int),
        "seed": ("seed", int),
    },
    "tolerances": {
        "newton": ("newton_tol", float),
    },
    "output": {
        "directory": ("out_dir", str),
        "plots": ("plots", _parse_bool),
    },
    "sweep": {
        "vorticities": ("sweep_vorticities", _parse_vorticity_list),
        "amplitudes": ("sweep_amplitudes", _parse_float_list),
        "workers": ("workers", int),
    },
}


def parse_config(text: str, path: str = "<config>") -> RunConfig:
    """Parse the flat-sectioned format with strict key checking."""
    cfg = RunConfig()
    section = None
    vort_parts: dict[str, str] = {}
    vort_line = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(
                    f"unknown section [{section}]; expected one of "
                    f"{sorted(_SCHEMA)}",
                    line=lineno,
                    path=path,
                )
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", line=lineno, path=path)
        if section is None:
            raise ConfigError("key outside any [section]", line=lineno, path=path)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(
                f"unknown key {key!r} in [{section}]; expected one of "
                f"{sorted(_SCHEMA[section])}",
                line=lineno,
                path=path,
            )
        if section == "vorticity":
            vort_parts[key] = value
            vort_line = lineno
            continue
        attr, parser = _SCHEMA[section][key]
        try:
            setattr(cfg, attr, parser(value))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", line=lineno, path=path) from exc

    if vort_parts:
        kind = vort_parts.get("kind", "zero")
        try:
            gamma0 = float(vort_parts.get("gamma0", "0"))
            beta = float(vort_parts.get("beta", "0"))
            if kind == "zero":
                cfg.vorticity = zero()
            elif kind == "constant":
                cfg.vorticity = constant(gamma0)
            elif kind == "affine":
                cfg.vorticity = affine(beta, gamma0)
            else:
                raise ValueError(f"unknown vorticity kind {kind!r}")
        except ValueError as exc:
            raise ConfigError(str(exc), line=vort_line, path=path) from exc

    _validate(cfg, path)
    return cfg


def _validate(cfg: RunConfig, path: str):
    if cfg.gravity <= 0:
        raise ConfigError("gravity must be positive", path=path)
    if cfg.mass_flux is not None and cfg.mass_flux >= 0:
        raise ConfigError("mass_flux must be negative", path=path)
    if cfg.n_q < 17 or cfg.n_p < 9:
        raise ConfigError("grid must be at least 17 x 9", path=path)
    if cfg.amplitude <= 0:
        raise ConfigError("amplitude must be positive", path=path)
    if cfg.amplitude_unit not in ("depth", "absolute"):
        raise ConfigError("amplitude_unit must be 'depth' or 'absolute'", path=path)
    if cfg.steps < 1:
        raise ConfigError("steps must be at least 1", path=path)
    if cfg.newton_tol <= 0:
        raise ConfigError("newton tolerance must be positive", path=path)
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1", path=path)


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read(), path=path)


def config_echo(cfg: RunConfig) -> dict:
    """Configuration as a JSON-ready dictionary (recorded in reports)."""
    return {
        "gravity": cfg.gravity,
        "mass_flux": cfg.resolved_mass_flux(),
        "vorticity": cfg.vorticity.as_dict(),
        "grid": {"n_q": cfg.n_q, "n_p": cfg.n_p},
        "amplitude": cfg.amplitude,
        "amplitude_unit": cfg.amplitude_unit,
        "steps": cfg.steps,
        "seed": cfg.seed,
        "newton_tol": cfg.newton_tol,
        "sweep": {
            "vorticities": [s.as_dict() for s in cfg.sweep_vorticities],
            "amplitudes": cfg.sweep_amplitudes,
            "workers": cfg.workers,
        },
    }
