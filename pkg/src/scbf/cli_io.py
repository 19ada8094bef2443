"""Configuration files, experiment dispatch, and output persistence.

Configurations are INI files.  Every section and key is optional; unknown
ones are rejected.  A complete example with the defaults::

    [run]
    kind = simulate          ; simulate stationary stability stabilize invariant verify oracle
    seed = 0
    paths = 8
    output =                 ; empty: $SCBF_OUT or ./scbf_out

    [space]
    dim = 2
    n_modes = 16

    [physics]
    mu = 1.0
    beta = 1.0
    r = 5
    exponent_support = guaranteed   ; or exploratory
    forcing = none                  ; none, shear, random
    forcing_amplitude = 1.0
    forcing_seed = 0

    [noise]
    model = none             ; none, additive, scalar, linear
    trace = 0.1
    gamma =                  ; empty: dim + 2
    sigma = 0.5

    [solver]
    dt = 0.001
    t_end = 1.0
    scheme = exponential_euler_maruyama
    record_every = 10
    noise_substeps = 1
    clip_threshold = 1e6

    [initial]
    amplitude = 1.0
    decay = 1.0
    seed = 0
    cutoff =

    [experiment]
    variant = mean_square    ; stability: mean_square, contraction, relaxation
    trials = 200             ; verify and oracle
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .ergodics import BURN_IN_FRACTION as TIME_AVERAGE_BURN_IN, N_BATCHES
from .integrator import SCHEMES, SolverConfig, energy_residual, simulate_ensemble
from .noise import Additive, LinearDiagonal, QSpectrum, ScalarStationary, path_stream
from .operators import GUARANTEED_EXPONENTS, PhysicsParams, RegimeError, eta_constant
from .spectral_space import SpectralSpace, write_snapshot
from .verify import RandomFieldLaw, random_field

KINDS = ("simulate", "stationary", "stability", "stabilize", "invariant", "verify", "oracle")
NOISE_MODELS = ("none", "additive", "scalar", "linear")
FORCINGS = ("none", "shear", "random")
VARIANTS = ("mean_square", "contraction", "relaxation")
OUTPUT_ENV = "SCBF_OUT"

EXIT_PASS, EXIT_VERDICT, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


@dataclass(frozen=True)
class ConfigIssue:
    key: str
    line: int | None
    reason: str

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line else "config"
        return f"{where}: {self.key}: {self.reason}"


class ConfigError(ValueError):
    """All problems found in one configuration, as :class:`ConfigIssue` entries."""

    def __init__(self, issues: list[ConfigIssue]):
        super().__init__("; ".join(map(str, issues)))
        self.issues = issues


@dataclass(frozen=True)
class RunConfig:
    kind: str = "simulate"
    seed: int = 0
    paths: int = 8
    output: str = ""
    dim: int = 2
    n_modes: int = 16
    mu: float = 1.0
    beta: float = 1.0
    r: float = 5.0
    exponent_support: str = "guaranteed"
    forcing: str = "none"
    forcing_amplitude: float = 1.0
    forcing_seed: int = 0
    noise_model: str = "none"
    trace: float = 0.1
    gamma: float | None = None
    sigma: float = 0.5
    dt: float = 1e-3
    t_end: float = 1.0
    scheme: str = SCHEMES[0]
    record_every: int = 10
    noise_substeps: int = 1
    clip_threshold: float = 1e6
    initial_amplitude: float = 1.0
    initial_decay: float = 1.0
    initial_seed: int = 0
    initial_cutoff: int | None = None
    variant: str = "mean_square"
    trials: int = 200
    warnings: tuple = field(default=(), compare=False)

    # builders --------------------------------------------------------
    def space(self) -> SpectralSpace:
        return SpectralSpace(self.dim, self.n_modes)

    def forcing_field(self, space: SpectralSpace):
        if self.forcing == "none":
            return None
        if self.forcing == "shear":
            k = (1,) + (0,) * (self.dim - 1)
            a = (0, self.forcing_amplitude) + (0,) * (self.dim - 2)
            return space.shear_mode(k, a)
        law = RandomFieldLaw(decay=2.0, amplitude=self.forcing_amplitude, seed=self.forcing_seed, cutoff=2)
        return random_field(space, law)

    def params(self, space: SpectralSpace | None = None) -> PhysicsParams:
        space = space or self.space()
        return PhysicsParams(self.mu, self.beta, self.r, self.forcing_field(space))

    def model(self, space: SpectralSpace | None = None, u_star=None):
        space = space or self.space()
        if self.noise_model == "none":
            return None
        if self.noise_model == "scalar":
            return ScalarStationary(space, self.sigma, u_star)
        spectrum = QSpectrum.power_law(space, gamma=self.gamma, trace=self.trace)
        if self.noise_model == "additive":
            return Additive(spectrum)
        return LinearDiagonal(spectrum, np.full(spectrum.q.shape, self.sigma), u_star)

    def solver(self) -> SolverConfig:
        return SolverConfig(self.dt, self.t_end, self.scheme, self.record_every,
                            self.clip_threshold, self.noise_substeps)

    def initial_law(self) -> RandomFieldLaw:
        return RandomFieldLaw(self.initial_decay, self.initial_amplitude, self.initial_seed,
                              self.initial_cutoff)

    def output_dir(self) -> Path:
        return Path(self.output or os.environ.get(OUTPUT_ENV) or "scbf_out")


# (section, key) -> (RunConfig attribute, type)
SCHEMA = {
    ("run", "kind"): ("kind", str), ("run", "seed"): ("seed", int),
    ("run", "paths"): ("paths", int), ("run", "output"): ("output", str),
    ("space", "dim"): ("dim", int), ("space", "n_modes"): ("n_modes", int),
    ("physics", "mu"): ("mu", float), ("physics", "beta"): ("beta", float),
    ("physics", "r"): ("r", float), ("physics", "exponent_support"): ("exponent_support", str),
    ("physics", "forcing"): ("forcing", str),
    ("physics", "forcing_amplitude"): ("forcing_amplitude", float),
    ("physics", "forcing_seed"): ("forcing_seed", int),
    ("noise", "model"): ("noise_model", str), ("noise", "trace"): ("trace", float),
    ("noise", "gamma"): ("gamma", "optional_float"), ("noise", "sigma"): ("sigma", float),
    ("solver", "dt"): ("dt", float), ("solver", "t_end"): ("t_end", float),
    ("solver", "scheme"): ("scheme", str), ("solver", "record_every"): ("record_every", int),
    ("solver", "noise_substeps"): ("noise_substeps", int),
    ("solver", "clip_threshold"): ("clip_threshold", float),
    ("initial", "amplitude"): ("initial_amplitude", float),
    ("initial", "decay"): ("initial_decay", float), ("initial", "seed"): ("initial_seed", int),
    ("initial", "cutoff"): ("initial_cutoff", "optional_int"),
    ("experiment", "variant"): ("variant", str), ("experiment", "trials"): ("trials", int),
}
SECTIONS = tuple(dict.fromkeys(s for s, _ in SCHEMA))
ATTRIBUTE_KEYS = {attr: key for key, (attr, _) in SCHEMA.items()}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:;#\s][^=:]*?)\s*[=:]")


def _line_numbers(text: str) -> dict:
    lines, section = {}, None
    for number, line in enumerate(text.splitlines(), start=1):
        if m := _SECTION_RE.match(line):
            section = m.group(1).strip().lower()
            lines.setdefault((section, None), number)
        elif section and (m := _KEY_RE.match(line)):
            lines.setdefault((section, m.group(1).strip().lower()), number)
    return lines


def _convert(raw: str, kind):
    raw = raw.strip()
    if kind in ("optional_float", "optional_int"):
        if raw == "" or raw.lower() == "none":
            return None
        return float(raw) if kind == "optional_float" else int(raw)
    if kind is int:
        return int(raw)
    if kind is float:
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value
    return raw


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate INI text.

    ``overrides`` maps :class:`RunConfig` attribute names to values that take
    precedence over the file.  Raises :class:`ConfigError` listing every
    problem with its key and line.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([ConfigIssue("syntax", getattr(exc, "lineno", None), str(exc).splitlines()[0])])
    lines = _line_numbers(text)
    issues, values = [], {}
    for section in parser.sections():
        if section not in SECTIONS:
            issues.append(ConfigIssue(f"[{section}]", lines.get((section, None)), "unknown section"))
            continue
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            if (section, key) not in SCHEMA:
                issues.append(ConfigIssue(f"{section}.{key}", line, "unknown key"))
                continue
            attr, kind = SCHEMA[(section, key)]
            try:
                values[attr] = _convert(raw, kind)
            except ValueError as exc:
                issues.append(ConfigIssue(f"{section}.{key}", line, f"cannot read {raw!r}: {exc}"))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if issues:
        raise ConfigError(issues)
    config = RunConfig(**values)
    return validate(config, lines)


def validate(config: RunConfig, lines: dict | None = None) -> RunConfig:
    """Check ranges and cross-field conditions; returns the config with warnings attached."""
    lines = lines or {}
    issues, warnings = [], []

    def issue(attr, reason):
        section, key = ATTRIBUTE_KEYS[attr]
        issues.append(ConfigIssue(f"{section}.{key}", lines.get((section, key)), reason))

    choices = {"kind": KINDS, "noise_model": NOISE_MODELS, "forcing": FORCINGS, "scheme": SCHEMES,
               "variant": VARIANTS, "exponent_support": ("guaranteed", "exploratory")}
    for attr, allowed in choices.items():
        if getattr(config, attr) not in allowed:
            issue(attr, f"must be one of {', '.join(allowed)}")
    if config.dim not in (2, 3):
        issue("dim", "must be 2 or 3")
    if config.n_modes < 4 or config.n_modes & (config.n_modes - 1):
        issue("n_modes", "must be a power of two >= 4")
    if config.paths < 1:
        issue("paths", "must be >= 1")
    if config.trials < 1:
        issue("trials", "must be >= 1")
    if not config.mu > 0:
        issue("mu", "must be positive")
    if config.beta < 0:
        issue("beta", "must be nonnegative")
    if config.r < 1:
        issue("r", "must be >= 1")
    elif config.exponent_support == "guaranteed" and config.r not in GUARANTEED_EXPONENTS:
        issue("r", f"exponent_support = guaranteed allows r in {GUARANTEED_EXPONENTS}, where the "
                   "absorption term is exactly dealiased; set exponent_support = exploratory for other r")
    if config.trace < 0 or config.sigma < 0:
        issue("trace" if config.trace < 0 else "sigma", "must be nonnegative")
    if config.initial_amplitude < 0:
        issue("initial_amplitude", "must be nonnegative")
    try:
        config.solver()
    except ValueError as exc:
        issue("dt", str(exc))
    if config.r == 3 and 2 * config.beta * config.mu < 1:
        warnings.append(f"r = 3 with 2*beta*mu = {2 * config.beta * config.mu:g} < 1: "
                        "global monotonicity is not guaranteed")

    if not issues:
        _check_experiment(config, issue)
    if issues:
        raise ConfigError(issues)
    return replace(config, warnings=tuple(warnings))


def _check_experiment(config: RunConfig, issue):
    params = PhysicsParams(config.mu, config.beta, config.r)
    kind = config.kind
    if kind == "stabilize" and config.noise_model != "scalar":
        issue("noise_model", "stabilize needs model = scalar")
    if kind == "stabilize":
        try:
            eta_constant(params)
        except RegimeError as exc:
            issue("r", str(exc))
    if kind in ("stability", "invariant"):
        if config.noise_model == "additive" and kind == "stability" and config.trace > 0:
            issue("noise_model", "mean-square decay to the steady state needs noise vanishing there; "
                                 "use scalar, linear or none")
        try:
            eta = eta_constant(params)
        except RegimeError as exc:
            issue("r", str(exc))
            return
        if config.noise_model == "none":
            lip = 0.0
        else:
            lip = config.model().lipschitz_constant
        if kind == "stability" and config.variant == "relaxation":
            lip = 0.0
        if not config.mu > 2 * eta + lip:
            issue("mu", f"condition not met: mu*lambda1 = {config.mu:g} must exceed "
                        f"2*eta + L = {2 * eta + lip:g}")
        if kind == "invariant":
            k = 0.0 if config.noise_model == "none" else config.model().growth_constant
            if not config.mu > k / 2:
                issue("mu", f"condition not met: mu = {config.mu:g} must exceed K/(2 lambda1) = {k / 2:g}")
            if config.forcing != "none":
                issue("forcing", "invariant runs are unforced")
            n_records = config.solver().n_steps // config.record_every
            needed = math.ceil(2 * N_BATCHES / (1 - TIME_AVERAGE_BURN_IN))
            if n_records < needed:
                issue("record_every", f"time averages need at least {needed} recorded times; "
                                      f"t_end / (dt * record_every) gives {n_records}")


def serialize_config(config: RunConfig) -> str:
    """Normalized INI text listing every key."""
    out = io.StringIO()
    current = None
    for (section, key), (attr, _) in SCHEMA.items():
        if section != current:
            out.write(("\n" if current else "") + f"[{section}]\n")
            current = section
        value = getattr(config, attr)
        text = "" if value is None else repr(value) if isinstance(value, float) else str(value)
        out.write(f"{key} = {text}\n")
    return out.getvalue()


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()


# ----------------------------------------------------------------------
# outputs
# ----------------------------------------------------------------------
def _fmt(x) -> str:
    if isinstance(x, (str, np.str_, int, np.integer)):
        return str(x)
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def write_csv(path: Path, header: list[str], rows, comment: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    started: str
    finished: str = ""
    outputs: dict = field(default_factory=dict)
    exit_status: int = EXIT_PASS

    def add(self, path: Path) -> None:
        self.outputs[Path(path).name] = sha256_file(path)

    def verify(self, directory: Path) -> bool:
        return all(sha256_file(Path(directory) / name) == digest for name, digest in self.outputs.items())

    def to_dict(self) -> dict:
        return asdict(self)


TRAJECTORY_HEADER = ["path", "t", "h_norm_sq", "v_norm_sq", "lr1_norm", "M", "HS", "W", "status"]


def trajectory_rows(record):
    n_paths = record.n_paths
    for i in range(n_paths):
        w = record.wiener[i] if record.wiener is not None else np.zeros_like(record.times)
        status = record.status[i]
        for j, t in enumerate(record.times):
            yield (i, t, record.h_norm_sq[i, j], record.v_norm_sq[i, j], record.lr1_norm[i, j],
                   record.martingale[i, j], record.hs[i, j], w[j], status)


# ----------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------
class NumericalFailure(RuntimeError):
    pass


def _streams(config, n):
    return [path_stream(config.seed, i) for i in range(n)]


def _run_simulate(config: RunConfig, out: Path, written: list) -> bool:
    space, params = config.space(), config.params()
    model = config.model(space)
    u0 = random_field(space, config.initial_law(), batch=(config.paths,))
    record = simulate_ensemble(space, u0, params, model, config.solver(),
                               streams=_streams(config, config.paths) if model else None)
    path = out / "trajectory.csv"
    write_csv(path, TRAJECTORY_HEADER, trajectory_rows(record))
    written.append(path)
    residual = energy_residual(record, params)
    report = {"kind": "simulate", "n_paths": record.n_paths,
              "status": list(record.status), "max_abs_energy_residual": float(np.nanmax(np.abs(residual)))}
    path = out / "report.json"
    write_json(path, report)
    written.append(path)
    if record.ok:
        path = out / "final_state.scbf"
        write_snapshot(path, space, record.final[0])
        written.append(path)
    else:
        raise NumericalFailure(f"{int(np.sum(record.status != 'ok'))} paths failed")
    return True


def _run_stationary(config, out, written) -> bool:
    from .stationary import solve_stationary, stationary_bound_check

    space = config.space()
    params = config.params(space)
    f = params.forcing_or_zero(space)
    result = solve_stationary(space, f, params, raise_on_failure=False)
    holds, lhs, rhs = stationary_bound_check(space, result, f, params)
    report = {"kind": "stationary", "converged": result.converged, "iterations": result.iterations,
              "residual_dual_norm": result.residual_dual_norm, "marched": result.marched,
              "bound": {"lhs": lhs, "rhs": rhs, "holds": holds},
              "h_norm_sq": float(space.h_norm_sq(result.u_star))}
    for name, writer in (("report.json", lambda p: write_json(p, report)),
                         ("stationary_state.scbf", lambda p: write_snapshot(p, space, result.u_star))):
        writer(out / name)
        written.append(out / name)
    return result.converged and holds


def _run_stability(config, out, written) -> bool:
    from . import stability_lab as lab

    space = config.space()
    params = config.params(space)
    solver = config.solver()
    if config.variant == "relaxation":
        u_inf = lab._steady_state(space, params)
        u0 = u_inf + random_field(space, config.initial_law())
        rel = lab.relaxation_experiment(space, params, u0, solver, u_inf)
        rate, extra = rel.rate, {"equilibrium_offset_sq": rel.equilibrium_offset}
    else:
        u_inf = lab._steady_state(space, params)
        model = config.model(space, u_inf)
        if config.variant == "mean_square":
            rate = lab.ms_stability_experiment(space, params, model, config.initial_law(),
                                               config.paths, solver, config.seed)
        else:
            law = config.initial_law()
            u0 = u_inf + random_field(space, law)
            v0 = u_inf + random_field(space, replace(law, seed=law.seed + 1))
            rate = lab.contraction_experiment(space, params, model, u0, v0, config.paths, solver, config.seed)
        extra = {}
    stats = rate.stats
    path = out / "mean_square.csv"
    write_csv(path, ["t", "mean", "ci_half_width"], zip(stats.times, stats.mean, stats.ci_half_width),
              comment=f"variant {config.variant}; ensemble mean of the squared H deviation")
    written.append(path)
    path = out / "report.json"
    write_json(path, {"kind": "stability", "variant": config.variant, **rate.to_dict(), **extra})
    written.append(path)
    if rate.n_failed:
        raise NumericalFailure(f"{rate.n_failed} paths failed")
    return rate.passed


STABILIZATION_BUDGET = 0.01


def _run_stabilize(config, out, written) -> bool:
    from . import stability_lab as lab

    space = config.space()
    params = config.params(space)
    rep = lab.stabilization_experiment(space, params, config.sigma, config.initial_law(),
                                       config.paths, config.solver(), config.seed)
    check = rep.check
    frac_t = [(~check.holds[:, j] & check.checked[:, j]).sum() / max(1, check.checked[:, j].sum())
              for j in range(len(check.times))]
    path = out / "stabilization.csv"
    write_csv(path, ["t", "violation_fraction", "slack"], zip(check.times, frac_t, check.slack))
    written.append(path)
    path = out / "report.json"
    passed = rep.violation_fraction <= STABILIZATION_BUDGET
    write_json(path, {"kind": "stabilize", **rep.to_dict(), "budget": STABILIZATION_BUDGET, "passed": passed})
    written.append(path)
    if rep.n_failed:
        raise NumericalFailure(f"{rep.n_failed} paths failed")
    return passed


def _run_invariant(config, out, written) -> bool:
    from .ergodics import ObservableSet, mixing_test, tightness_diagnostic, time_average

    space = config.space()
    params = config.params(space)
    model = config.model(space)
    observables = ObservableSet.default(space, config.r, config.seed)
    law = config.initial_law()
    u0 = random_field(space, law, batch=(config.paths,))
    record = simulate_ensemble(space, u0, params, model, config.solver(),
                               streams=_streams(config, config.paths) if model else None,
                               observer=observables.observer)
    if not record.ok:
        raise NumericalFailure("a path failed")
    tight = tightness_diagnostic(record, params, model, space.lambda1)
    averages = time_average(record.times, {k: v[0] for k, v in record.observed.items()})
    names = list(averages.running)
    path = out / "running_averages.csv"
    write_csv(path, ["t"] + names, zip(averages.times, *(averages.running[n] for n in names)),
              comment="running time averages along path 0 after burn-in")
    written.append(path)
    v0 = random_field(space, replace(law, seed=law.seed + 1))
    mixing = mixing_test(space, [u0[0], v0], params, model, observables, config.t_end,
                         config.paths, config.dt, config.seed, config.scheme)
    path = out / "report.json"
    write_json(path, {"kind": "invariant", "tightness": tight.to_dict(), "time_average": averages.to_dict(),
                      "mixing": mixing.to_dict()})
    written.append(path)
    return tight.holds and mixing.holds


def _run_battery(config, out, written, oracle_only: bool) -> bool:
    from .verify import ORACLE_ENTRIES, run_property_battery

    names = ORACLE_ENTRIES if oracle_only else None
    reports = run_property_battery(config.seed, config.trials, config.n_modes,
                                   smoke_3d=not oracle_only, names=names)
    payload = [vars(r) | {"status": r.status} for r in reports]
    path = out / "report.json"
    write_json(path, {"kind": config.kind, "entries": payload})
    written.append(path)
    return all(r.passed for r in reports)


RUNNERS = {
    "simulate": _run_simulate,
    "stationary": _run_stationary,
    "stability": _run_stability,
    "stabilize": _run_stabilize,
    "invariant": _run_invariant,
    "verify": lambda c, o, w: _run_battery(c, o, w, False),
    "oracle": lambda c, o, w: _run_battery(c, o, w, True),
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def dispatch(config: RunConfig, out_dir: Path | None = None) -> tuple[int, RunManifest]:
    """Run the configured experiment, write its outputs and a manifest.

    Exit status: 0 when every verdict passes, 1 on a failed verdict, 3 on a
    numerical failure.
    """
    out = Path(out_dir) if out_dir is not None else config.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config_hash(config), __version__, _now())
    config_path = out / "config.ini"
    config_path.write_text(serialize_config(config))
    written = [config_path]
    try:
        passed = RUNNERS[config.kind](config, out, written)
        status = EXIT_PASS if passed else EXIT_VERDICT
    except (NumericalFailure, FloatingPointError) as exc:
        _error(str(exc), "numerical")
        status = EXIT_NUMERICAL
    for path in written:
        manifest.add(path)
    manifest.finished = _now()
    manifest.exit_status = status
    write_json(out / "manifest.json", manifest.to_dict())
    return status, manifest


def _error(message: str, kind: str, issues=None) -> None:
    payload = {"error": kind, "message": message}
    if issues:
        payload["issues"] = [asdict(i) for i in issues]
    sys.stderr.write(json.dumps(payload) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scbf", description="Stochastic Brinkman-Forchheimer lab")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", type=Path, help="INI configuration file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", type=str, help=f"output directory (default ${OUTPUT_ENV} or ./scbf_out)")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--paths", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        _error(str(exc), "usage")
        return EXIT_USAGE
    overrides = {"kind": args.kind, "seed": args.seed, "output": args.out, "dt": args.dt, "paths": args.paths}
    try:
        config = parse_config(text, overrides)
    except ConfigError as exc:
        _error(str(exc), "config", exc.issues)
        return EXIT_USAGE
    for warning in config.warnings:
        sys.stderr.write(f"warning: {warning}\n")
    status, _ = dispatch(config)
    return status


if __name__ == "__main__":
    sys.exit(main())
