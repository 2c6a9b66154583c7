"""Run configuration: flat key = value files and sweep specifications.

One setting per line, ``#`` starts a comment, values in SI units with
scientific notation allowed.  Unknown keys are rejected so a typo fails
loudly instead of silently running defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .errors import ConfigError
from .schemes import ACMC, CFPVR, CMC, PVMC, RLP, VMC3, BuckParams, ControlScheme

__all__ = ["SweepSpec", "RunConfig", "parse_sweep", "load_config"]


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    count: int
    log: bool = False

    def grid(self) -> np.ndarray:
        if self.log:
            if self.start <= 0.0 or self.stop <= 0.0:
                raise ConfigError("log sweeps need positive endpoints")
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


_SWEEP_VARS = ("D", "p", "v_s", "k_p", "omega_p", "K_c", "v_r")


def parse_sweep(text: str) -> SweepSpec:
    """Parse ``var:start:stop:n`` with an optional ``:log`` suffix."""
    parts = text.split(":")
    log = False
    if len(parts) == 5:
        if parts[4] != "log":
            raise ConfigError(f"bad sweep scale {parts[4]!r}; only 'log'")
        log = True
        parts = parts[:4]
    if len(parts) != 4:
        raise ConfigError(
            f"bad sweep {text!r}; expected var:start:stop:n[:log]"
        )
    var = parts[0].strip()
    if not var:
        raise ConfigError("sweep variable name is empty")
    if var not in _SWEEP_VARS:
        raise ConfigError(
            f"unknown sweep variable {var!r}; one of {', '.join(_SWEEP_VARS)}"
        )
    try:
        start, stop = float(parts[1]), float(parts[2])
        count = int(parts[3])
    except ValueError as exc:
        raise ConfigError(f"bad sweep {text!r}: {exc}") from None
    if count < 1:
        raise ConfigError("sweep needs at least one point")
    return SweepSpec(var, start, stop, count, log)


_PARAM_KEYS = ("v_s", "v_r", "V_l", "V_h", "f_s", "L", "R")
_OPT_PARAM_KEYS = ("C", "R_c")

_SCHEME_KEYS = {
    "cmc": (),
    "pvmc": ("k_p",),
    "cfpvr": ("k_p",),
    "rlp": ("k_p",),
    "acmc": ("R_s", "K_c", "z_c", "omega_p"),
    "vmc3": ("K_c", "kappa_z", "omega_p"),
}

_OPTION_KEYS = ("duty", "sweep", "sweep_d", "sweep_p", "cycles", "terms",
                "out", "solve_for", "divergence_bound")


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs: plant, scheme, and run options."""

    params: BuckParams
    scheme: ControlScheme
    duty: Optional[float] = None
    sweep: Optional[SweepSpec] = None
    sweep_d: Optional[SweepSpec] = None
    sweep_p: Optional[SweepSpec] = None
    cycles: Optional[int] = None
    terms: int = 0
    out: Optional[str] = None
    solve_for: Optional[str] = None
    divergence_bound: float = 1e6


def _parse_lines(text: str, source: str) -> Dict[str, str]:
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = body.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _get_float(raw: Dict[str, str], key: str) -> float:
    try:
        v = float(raw[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: not a number: {raw[key]!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"key {key!r}: must be finite")
    return v


def _get_int(raw: Dict[str, str], key: str) -> int:
    try:
        return int(raw[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: not an integer: {raw[key]!r}") from None


def _build_scheme(name: str, raw: Dict[str, str]) -> ControlScheme:
    vals = {k: _get_float(raw, k) for k in _SCHEME_KEYS[name] if k in raw}
    missing = [k for k in _SCHEME_KEYS[name] if k not in raw]
    if missing:
        raise ConfigError(
            f"scheme {name!r} needs key(s): {', '.join(missing)}"
        )
    try:
        if name == "cmc":
            return CMC()
        if name == "pvmc":
            return PVMC(**vals)
        if name == "cfpvr":
            return CFPVR(**vals)
        if name == "rlp":
            return RLP(**vals)
        if name == "acmc":
            return ACMC(**vals)
        return VMC3(**vals)
    except ValueError as exc:
        raise ConfigError(f"scheme {name!r}: {exc}") from None


def build_config(raw: Dict[str, str]) -> RunConfig:
    """Validate a raw key/value mapping into a RunConfig."""
    if "scheme" not in raw:
        raise ConfigError("missing required key 'scheme'")
    name = raw["scheme"].lower()
    if name not in _SCHEME_KEYS:
        raise ConfigError(
            f"unknown scheme {raw['scheme']!r}; "
            f"one of {', '.join(sorted(_SCHEME_KEYS))}"
        )
    allowed = (
        {"scheme"}
        | set(_PARAM_KEYS)
        | set(_OPT_PARAM_KEYS)
        | set(_SCHEME_KEYS[name])
        | set(_OPTION_KEYS)
    )
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    missing = [k for k in _PARAM_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")

    kwargs = {k: _get_float(raw, k) for k in _PARAM_KEYS}
    for k in _OPT_PARAM_KEYS:
        if k in raw:
            kwargs[k] = _get_float(raw, k)
    try:
        params = BuckParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    scheme = _build_scheme(name, raw)

    duty = _get_float(raw, "duty") if "duty" in raw else None
    if duty is not None and not 0.0 < duty < 1.0:
        raise ConfigError("duty must lie strictly inside (0, 1)")
    cycles = _get_int(raw, "cycles") if "cycles" in raw else None
    if cycles is not None and cycles < 2:
        raise ConfigError("cycles must be at least 2")
    terms = _get_int(raw, "terms") if "terms" in raw else 0
    if terms < 0:
        raise ConfigError("terms must be non-negative")
    bound = (_get_float(raw, "divergence_bound")
             if "divergence_bound" in raw else 1e6)
    if bound <= 0.0:
        raise ConfigError("divergence_bound must be positive")
    return RunConfig(
        params=params,
        scheme=scheme,
        duty=duty,
        sweep=parse_sweep(raw["sweep"]) if "sweep" in raw else None,
        sweep_d=parse_sweep(raw["sweep_d"]) if "sweep_d" in raw else None,
        sweep_p=parse_sweep(raw["sweep_p"]) if "sweep_p" in raw else None,
        cycles=cycles,
        terms=terms,
        out=raw.get("out"),
        solve_for=raw.get("solve_for"),
        divergence_bound=bound,
    )


def load_config(path: str) -> RunConfig:
    """Read and validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_config(_parse_lines(text, path))
