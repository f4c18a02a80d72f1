"""Command-line interface: config ingestion, dispatch, bit-stable output.

Every output file starts with a metadata block echoing the fully-resolved
configuration; floats are printed in scientific notation with 17 significant
digits so repeated runs produce byte-identical files.  Exit codes: 0 success,
1 configuration error, 2 numerical failure, 3 failed built-in self-check.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import oracle
from .config import RunConfig, parse_config
from .coupling import CouplingFunction
from .errors import ConfigError, InvariantViolationError, NumericalFailureError
from .lattice import ChainSpec, commutator_kernel, normal_modes
from .magnus import QuadraturePlan, magnus5_quadrature, quadratic_phase
from .pulsed import (
    PulseSchedule,
    fit_scaling_exponent,
    phi_chain,
    phi_single,
    pulse_times,
    scan_lattice,
)

COMMANDS = (
    "modes", "phase-standard", "phase-gup-single", "phase-gup-chain", "scan",
    "oracle fock", "oracle smoothing", "oracle coincidence",
    "oracle dropped-terms",
)

_USAGE = """\
usage: guphase --command <name> --config <path> [--out <path>] [--format csv|jsonl]

commands:
  modes                 normal-mode frequencies of the configured chain
  phase-standard        photon-number-squared phase F(t) (smoothed train)
  phase-gup-single      quartic phase of the single-oscillator pulse train
  phase-gup-chain       quartic phase of the configured chain
  scan                  |Phi(N)| scan over site counts and couplings
  oracle fock           truncated-matrix commutator identity suite
  oracle smoothing      Gaussian-train convergence toward the ideal train
  oracle coincidence    Monte-Carlo check of coincidence weights
  oracle dropped-terms  scaling of kept/dropped fifth-order terms
"""

_SELF_CHECK_TOL = 1e-12
_ORACLE_SEED = 7041


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.16e}"
    return str(value)


def _json_scalar(value) -> str:
    # floats rendered exactly like the CSV columns so both formats carry the
    # same 17-significant-digit scientific notation
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.16e}"
    if isinstance(value, dict):
        return _json_object(value.items())
    escaped = str(value).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def _json_object(pairs) -> str:
    return "{" + ", ".join(f'"{k}": {_json_scalar(v)}' for k, v in pairs) + "}"


def _render(config: RunConfig, header, rows, trailing=()) -> str:
    lines = []
    if config.output_format == "csv":
        for key, value in config.metadata_items():
            lines.append(f"# {key} = {_fmt(value)}")
        lines.append(",".join(header))
        for row in rows:
            lines.append(",".join(_fmt(row[h]) for h in header))
        for block in trailing:
            lines.append("# " + " ".join(f"{k}={_fmt(v)}" for k, v in block))
    else:
        lines.append(_json_object([("metadata", dict(config.metadata_items()))]))
        for row in rows:
            lines.append(_json_object([(h, row[h]) for h in header]))
        for block in trailing:
            lines.append(_json_object([("fit", dict(block))]))
    return "\n".join(lines) + "\n"


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _chain(config: RunConfig) -> ChainSpec:
    return ChainSpec(
        n_sites=config.n_sites,
        mass=config.mass_kg,
        trap_freq=config.trap_freq,
        coupling_freq=config.coupling_freq,
    )


def _schedule(config: RunConfig, spec: ChainSpec) -> PulseSchedule:
    sched = PulseSchedule(
        t0=config.t0_s,
        period=config.period_s,
        site_delay=config.site_delay_s,
        strength=config.pulse_strength,
        eval_time=config.eval_time_s,
    )
    sched.validate_for(spec)
    return sched


def _self_check(modes) -> None:
    n = modes.n_sites
    residual = np.abs(
        modes.o_matrix @ modes.o_prime_matrix.T - np.eye(n)
    ).max()
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            expect = 1.0 if i == j else 0.0
            residual = max(residual, abs(commutator_kernel(modes, i, j, 0.0) - expect))
    if residual > _SELF_CHECK_TOL:
        raise InvariantViolationError(
            f"canonical self-check failed: residual {residual:.3e}"
        )


# -- command bodies ------------------------------------------------------------

def _cmd_modes(config: RunConfig):
    spec = _chain(config)
    modes = normal_modes(spec)
    _self_check(modes)
    header = ["mode_index", "omega_rad_s", "omega_hz"]
    rows = [
        {"mode_index": k + 1, "omega_rad_s": float(w), "omega_hz": float(w) / (2 * math.pi)}
        for k, w in enumerate(modes.frequencies)
    ]
    return header, rows, ()


def _cmd_phase_standard(config: RunConfig):
    spec = _chain(config)
    sched = PulseSchedule(
        t0=config.t0_s, period=config.period_s, site_delay=0.0,
        strength=config.pulse_strength, eval_time=config.eval_time_s,
    )
    sigma = config.quad_sigma_over_t * config.period_s
    g = CouplingFunction.from_schedule(1, sched, sigma)
    plan = QuadraturePlan(order=config.quad_order)
    f_value = quadratic_phase(g, spec.trap_freq, spec.mass, config.eval_time_s, plan)
    lam = config.pulse_strength
    header = ["omega_rad_s", "pulse_strength", "sigma_s", "eval_time_s",
              "f_value", "f_over_strength_sq"]
    rows = [{
        "omega_rad_s": spec.trap_freq,
        "pulse_strength": lam,
        "sigma_s": sigma,
        "eval_time_s": config.eval_time_s,
        "f_value": f_value,
        "f_over_strength_sq": f_value / lam**2 if lam else 0.0,
    }]
    return header, rows, ()


def _cmd_phase_gup_single(config: RunConfig):
    om = config.trap_freq
    sched = PulseSchedule(
        t0=config.t0_s, period=config.period_s, site_delay=0.0,
        strength=config.pulse_strength, eval_time=config.eval_time_s,
    )
    times = [pulse_times(sched, 1, k) for k in range(4)]
    phi = phi_single(om, times, config.eval_time_s)
    header = ["omega_rad_s", "t0_s", "period_s", "eval_time_s", "phi_s",
              "phi_times_omega"]
    rows = [{
        "omega_rad_s": om, "t0_s": config.t0_s, "period_s": config.period_s,
        "eval_time_s": config.eval_time_s, "phi_s": phi, "phi_times_omega": phi * om,
    }]
    return header, rows, ()


def _cmd_phase_gup_chain(config: RunConfig):
    spec = _chain(config)
    modes = normal_modes(spec)
    _self_check(modes)
    sched = _schedule(config, spec)
    result = phi_chain(spec, modes, sched)
    if spec.n_sites == 1:
        # built-in cross-check against the single-oscillator path
        times = [pulse_times(sched, 1, k) for k in range(4)]
        single = phi_single(spec.trap_freq, times, sched.eval_time)
        ref = max(abs(single), abs(result.quartic_coefficient), 1e-300)
        if abs(single - result.quartic_coefficient) > 1e-10 * ref:
            raise InvariantViolationError(
                "single-site reduction self-check failed: "
                f"{result.quartic_coefficient!r} vs {single!r}"
            )
    header = ["n_sites", "omega_c_hz", "phi_s", "abs_phi_s", "eval_time_s"]
    rows = [{
        "n_sites": spec.n_sites,
        "omega_c_hz": config.coupling_freq / (2 * math.pi),
        "phi_s": result.quartic_coefficient,
        "abs_phi_s": abs(result.quartic_coefficient),
        "eval_time_s": sched.eval_time,
    }]
    return header, rows, ()


def _cmd_scan(config: RunConfig):
    spec = _chain(config)
    template = PulseSchedule(
        t0=config.t0_s, period=config.period_s,
        site_delay=config.site_delay_s, strength=config.pulse_strength,
        eval_time=config.eval_time_s,
    )
    n_range = range(config.scan_n_min, config.scan_n_max + 1)
    result = scan_lattice(spec, template, n_range, config.scan_omega_c)
    header = ["n", "omega_c_hz", "phi_s", "abs_phi_s", "n_times_phi1_s"]
    rows = [
        {
            "n": r.n,
            "omega_c_hz": r.omega_c / (2 * math.pi),
            "phi_s": r.phi,
            "abs_phi_s": r.abs_phi,
            "n_times_phi1_s": r.n_times_phi1,
        }
        for r in result.rows
    ]
    trailing = []
    for f in result.fits:
        block = [("fit_omega_c_hz", f.omega_c / (2 * math.pi))]
        if f.slope is None:
            block.append(("slope", "undefined"))
        else:
            block.extend([("slope", f.slope), ("residual", f.residual)])
        trailing.append(block)
    return header, rows, tuple(trailing)


def _cmd_oracle_fock(config: RunConfig):
    trunc = oracle.FockTruncation(dimension=40, inner_block=20)
    om = config.trap_freq
    rng = np.random.default_rng(_ORACLE_SEED)
    period = 2 * math.pi / om
    rows = []

    def add(check, parameter, value, threshold, ok):
        rows.append({
            "check": check, "parameter": parameter, "value": value,
            "threshold": threshold, "status": "pass" if ok else "FAIL",
        })

    t1, t2 = rng.uniform(0, 2 * period, size=2)
    for n in range(1, 5):
        dev = oracle.check_commutator_identities(trunc, om, t1, t2, n)
        add("commutator-identity", f"n={n}", dev, 1e-10, dev < 1e-10)
    times = np.sort(rng.uniform(0, 2 * period, size=5))[::-1]
    g_vals = rng.uniform(2.0, 4.0, size=5)
    beta = 1e-6
    dev = oracle.check_nested_commutator(trunc, om, times, g_vals, beta)
    add("nested-commutator", f"beta={beta}", dev, 1e-4, dev < 1e-4)
    ratio = oracle.check_dropped_terms_quadratic(trunc, om, times, g_vals, beta,
                                                 kind="dropped")
    add("dropped-term-ratio", f"beta={beta}", ratio, 4.0, 3.8 <= ratio <= 4.2)
    ratio = oracle.check_dropped_terms_quadratic(trunc, om, times, g_vals, beta,
                                                 kind="kept")
    add("kept-term-ratio", f"beta={beta}", ratio, 2.0, 1.9 <= ratio <= 2.1)
    if config.n_sites <= 3:
        spec = _chain(config)
        modes = normal_modes(spec)
        site_dim = {1: 40, 2: 14, 3: 8}[config.n_sites]
        dev = oracle.check_kernel_fock(spec, modes, 0.3 * period, 0.7 * period,
                                       site_dim=site_dim, inner_quanta=3)
        add("kernel-fock", f"n={config.n_sites}", dev, 1e-8, dev < 1e-8)
    header = ["check", "parameter", "value", "threshold", "status"]
    return header, rows, ()


def _cmd_oracle_smoothing(config: RunConfig):
    spec = _chain(config)
    modes = normal_modes(spec)
    sched = _schedule(config, spec)
    reference = phi_chain(spec, modes, sched).quartic_coefficient
    sigmas = [config.period_s / 50, config.period_s / 100, config.period_s / 200]
    plan = QuadraturePlan(order=config.quad_order)
    ladder = oracle.smoothed_pulse_limit(reference, spec, modes, sched, sigmas, plan)
    header = ["sigma_s", "phi_quadrature_s", "phi_closed_form_s", "abs_error",
              "rel_error"]
    rows = [
        {
            "sigma_s": s, "phi_quadrature_s": phi_q, "phi_closed_form_s": reference,
            "abs_error": err,
            "rel_error": err / abs(reference) if reference else 0.0,
        }
        for s, phi_q, err in ladder
    ]
    return header, rows, ()


def _cmd_oracle_coincidence(config: RunConfig):
    cases = [
        ("pair", (3.0, 2.0, 2.0, 1.0), 1_000_000),
        ("triple", (3.0, 2.0, 2.0, 2.0), 1_000_000),
        ("distinct", (4.0, 3.0, 2.0, 1.0), 100_000),
    ]
    rows = []
    for name, pattern, samples in cases:
        res = oracle.coincidence_weight_oracle(pattern, n_samples=samples)
        rows.append({
            "pattern": name,
            "mc_fraction": res.mc_fraction,
            "predicted": res.predicted,
            "abs_diff": abs(res.mc_fraction - res.predicted),
            "n_samples": res.n_samples,
            "seed": res.seed,
        })
    header = ["pattern", "mc_fraction", "predicted", "abs_diff", "n_samples", "seed"]
    return header, rows, ()


def _cmd_oracle_dropped_terms(config: RunConfig):
    trunc = oracle.FockTruncation(dimension=40, inner_block=20)
    om = config.trap_freq
    rng = np.random.default_rng(_ORACLE_SEED + 1)
    period = 2 * math.pi / om
    times = np.sort(rng.uniform(0, 2 * period, size=5))[::-1]
    g_vals = rng.uniform(2.0, 4.0, size=5)
    beta = 1e-6
    rows = []
    for kind, expect in (("dropped", 4.0), ("kept", 2.0)):
        v1 = oracle.nested_term_value(trunc, om, times, g_vals, beta, kind)
        v2 = oracle.nested_term_value(trunc, om, times, g_vals, 2 * beta, kind)
        rows.append({
            "kind": kind, "value_beta": v1, "value_2beta": v2,
            "ratio": v2 / v1, "expected_ratio": expect,
        })
    header = ["kind", "value_beta", "value_2beta", "ratio", "expected_ratio"]
    return header, rows, ()


_HANDLERS = {
    "modes": _cmd_modes,
    "phase-standard": _cmd_phase_standard,
    "phase-gup-single": _cmd_phase_gup_single,
    "phase-gup-chain": _cmd_phase_gup_chain,
    "scan": _cmd_scan,
    "oracle fock": _cmd_oracle_fock,
    "oracle smoothing": _cmd_oracle_smoothing,
    "oracle coincidence": _cmd_oracle_coincidence,
    "oracle dropped-terms": _cmd_oracle_dropped_terms,
}


def dispatch(command: str, config: RunConfig) -> int:
    """Run one command against a resolved configuration; returns the exit code."""
    handler = _HANDLERS.get(command)
    if handler is None:
        sys.stderr.write(f"unknown command: {command!r}\n{_USAGE}")
        return 1
    try:
        header, rows, trailing = handler(config)
    except (ConfigError, ValueError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return 1
    except NumericalFailureError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2
    except InvariantViolationError as exc:
        sys.stderr.write(f"invariant violation: {exc}\n")
        return 3
    _emit(_render(config, header, rows, trailing), config.output_path)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="guphase", add_help=True, usage=_USAGE)
    parser.add_argument("--command", required=True)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--format", dest="fmt", choices=("csv", "jsonl"), default=None)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        sys.stderr.write(f"cannot read config: {exc}\n")
        return 1
    try:
        config = parse_config(text)
    except ConfigError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return 1
    if args.out is not None:
        config.output_path = args.out
        config.resolved["output_path"] = args.out
    if args.fmt is not None:
        config.output_format = args.fmt
        config.resolved["output_format"] = args.fmt
    return dispatch(args.command, config)


if __name__ == "__main__":
    sys.exit(main())
