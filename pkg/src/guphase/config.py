"""Run-configuration parsing: flat key = value text with # comments.

Frequencies are given in Hz at this interface (matching the experimental
convention) and converted once to rad/s.  Every defaulted field is resolved
here so output metadata can echo the exact configuration that ran.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

_REQUIRED = ("n_sites", "trap_freq_hz")

_KNOWN_KEYS = {
    "n_sites", "mass_kg", "trap_freq_hz", "coupling_freq_hz", "pulse_strength",
    "t0_s", "period_s", "site_delay_s", "eval_time_s",
    "scan_n_min", "scan_n_max", "scan_omega_c_hz_list",
    "quad_order", "quad_sigma_over_t",
    "output_path", "output_format",
}

_DEFAULTS = {
    "mass_kg": 1.0,
    "coupling_freq_hz": 0.0,
    "pulse_strength": 1.0,
    "quad_order": 24,
    "quad_sigma_over_t": 1.0 / 200.0,
    "output_format": "csv",
}


@dataclass
class RunConfig:
    """Fully-resolved run parameters (angular frequencies in rad/s)."""

    n_sites: int
    mass_kg: float
    trap_freq: float          # rad/s
    coupling_freq: float      # rad/s
    pulse_strength: float
    t0_s: float
    period_s: float
    site_delay_s: float
    eval_time_s: float
    scan_n_min: int
    scan_n_max: int
    scan_omega_c: tuple       # rad/s values
    quad_order: int
    quad_sigma_over_t: float
    output_path: str | None
    output_format: str
    resolved: dict = field(default_factory=dict)

    def metadata_items(self):
        """(key, value) pairs of the fully-resolved configuration."""
        return sorted(self.resolved.items())


def _parse_number(key, raw, lineno, cast):
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: value for {key!r} is not a valid number: {raw!r}"
        ) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate flat key = value configuration text.

    Unknown keys, missing required keys and unparsable numbers raise
    ``ConfigError`` with the offending line number.
    """
    raw: dict = {}
    lines: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
        lines[key] = lineno

    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")

    n_sites = _parse_number("n_sites", raw["n_sites"], lines["n_sites"], int)
    if n_sites < 1:
        raise ConfigError(
            f"line {lines['n_sites']}: n_sites must be >= 1, got {n_sites}"
        )
    trap_hz = _parse_number("trap_freq_hz", raw["trap_freq_hz"],
                            lines["trap_freq_hz"], float)
    if trap_hz <= 0:
        raise ConfigError(
            f"line {lines['trap_freq_hz']}: trap_freq_hz must be > 0"
        )

    def opt_float(key, default=None):
        if key in raw:
            return _parse_number(key, raw[key], lines[key], float)
        return _DEFAULTS.get(key, default)

    def opt_int(key, default=None):
        if key in raw:
            return _parse_number(key, raw[key], lines[key], int)
        return _DEFAULTS.get(key, default)

    mass = opt_float("mass_kg")
    if mass <= 0:
        raise ConfigError(f"line {lines.get('mass_kg', '?')}: mass_kg must be > 0")
    coupling_hz = opt_float("coupling_freq_hz")
    if coupling_hz < 0:
        raise ConfigError(
            f"line {lines.get('coupling_freq_hz', '?')}: coupling_freq_hz must be >= 0"
        )
    strength = opt_float("pulse_strength")

    trap = 2.0 * math.pi * trap_hz
    coupling = 2.0 * math.pi * coupling_hz

    period = opt_float("period_s", math.pi / (2.0 * trap))
    if period is None:
        period = math.pi / (2.0 * trap)
    t0 = opt_float("t0_s", period)
    if t0 is None:
        t0 = period
    site_delay = opt_float("site_delay_s", period / (2.0 * n_sites))
    if site_delay is None:
        site_delay = period / (2.0 * n_sites)
    last_pulse = t0 + 3.0 * period + (n_sites - 1) * site_delay
    eval_time = opt_float("eval_time_s", last_pulse + 2.0 * math.pi / trap)
    if eval_time is None:
        eval_time = last_pulse + 2.0 * math.pi / trap

    if t0 <= 0:
        raise ConfigError(f"line {lines.get('t0_s', '?')}: t0_s must be > 0")
    if period <= 0:
        raise ConfigError(f"line {lines.get('period_s', '?')}: period_s must be > 0")

    scan_n_min = opt_int("scan_n_min", 1)
    scan_n_max = opt_int("scan_n_max", 5)
    if scan_n_min < 1 or scan_n_max < scan_n_min:
        raise ConfigError("scan range must satisfy 1 <= scan_n_min <= scan_n_max")
    if "scan_omega_c_hz_list" in raw:
        items = [s for s in raw["scan_omega_c_hz_list"].split(",") if s.strip()]
        scan_oc = tuple(
            2.0 * math.pi * _parse_number("scan_omega_c_hz_list", s.strip(),
                                          lines["scan_omega_c_hz_list"], float)
            for s in items
        )
    else:
        scan_oc = (coupling,)

    quad_order = opt_int("quad_order")
    if quad_order < 4:
        raise ConfigError(f"line {lines.get('quad_order', '?')}: quad_order must be >= 4")
    sigma_over_t = opt_float("quad_sigma_over_t")
    if not 0 < sigma_over_t <= 0.1:
        raise ConfigError("quad_sigma_over_t must be in (0, 0.1]")

    output_path = raw.get("output_path")
    output_format = raw.get("output_format", _DEFAULTS["output_format"])
    if output_format not in ("csv", "jsonl"):
        raise ConfigError(
            f"line {lines.get('output_format', '?')}: output_format must be csv or jsonl"
        )

    resolved = {
        "n_sites": n_sites,
        "mass_kg": mass,
        "trap_freq_hz": trap_hz,
        "coupling_freq_hz": coupling_hz,
        "pulse_strength": strength,
        "t0_s": t0,
        "period_s": period,
        "site_delay_s": site_delay,
        "eval_time_s": eval_time,
        "scan_n_min": scan_n_min,
        "scan_n_max": scan_n_max,
        "scan_omega_c_hz_list": ",".join(repr(oc / (2.0 * math.pi)) for oc in scan_oc),
        "quad_order": quad_order,
        "quad_sigma_over_t": sigma_over_t,
        "output_format": output_format,
        "output_path": output_path or "",
    }
    return RunConfig(
        n_sites=n_sites,
        mass_kg=mass,
        trap_freq=trap,
        coupling_freq=coupling,
        pulse_strength=strength,
        t0_s=t0,
        period_s=period,
        site_delay_s=site_delay,
        eval_time_s=eval_time,
        scan_n_min=scan_n_min,
        scan_n_max=scan_n_max,
        scan_omega_c=scan_oc,
        quad_order=quad_order,
        quad_sigma_over_t=sigma_over_t,
        output_path=output_path,
        output_format=output_format,
        resolved=resolved,
    )
