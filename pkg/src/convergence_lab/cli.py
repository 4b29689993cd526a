"""Experiment runner: bind flat config files to the library and emit CSV.

Config files are INI-style ``key = value`` text with three sections
([family], [system], [run]).  Unknown keys are rejected.  Every output is
written atomically (temp file, then rename) and carries a ``#``-prefixed
header block echoing the configuration, so reruns with the same config are
byte-identical.

Exit codes: 0 success, 2 config error, 3 resource cap exceeded, 4 internal
contract failure (a proven inequality observed violated).
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys as _sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .dynamics import DEFAULT_ALPHA, DynSystem, TestFunction, convergence_trace, weak11_table
from .hypotheses import check_convergence_hypotheses, check_sweepout_hypotheses
from .measures import (
    LatticeMeasure,
    SequenceSpec,
    SupportCapError,
    convolve_prefixes,
)
from .spectral import fourier_eval
from .sweepout import (
    SweepoutFamily,
    dissipativity_trace,
    fourier_floor_scan,
    geometric_family,
    inverse_square_family,
    scan_points,
    sweepout_simulation,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_CONTRACT = 4

_FLOOR_CONTRACT_TOL = 1e-10

_ALLOWED_KEYS = {
    "family": {"kind", "weights", "offset", "a_rule", "coeff", "ratio", "measures_file"},
    "system": {"kind", "q", "alpha", "samples", "seed"},
    "run": {
        "horizon",
        "grid_size",
        "prune_eps",
        "lambdas",
        "b_measure",
        "window_k",
        "scan_max_denominator",
        "scan_uniform",
        "test_function",
        "block_fraction",
        "trig_freq",
        "trace_state",
        "out",
    },
}

_DEFAULTS = {
    "system": {"kind": "cyclic", "q": "1024", "alpha": repr(DEFAULT_ALPHA), "samples": "4096", "seed": "0"},
    "run": {
        "horizon": "64",
        "grid_size": "4096",
        "prune_eps": "0",
        "lambdas": "1,2,4,8",
        "b_measure": "0.05",
        "window_k": "50",
        "scan_max_denominator": "8",
        "scan_uniform": "0",
        "test_function": "point_mass",
        "block_fraction": "0.125",
        "trig_freq": "1",
        "trace_state": "0",
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration; carries all diagnostics."""

    def __init__(self, diagnostics: Sequence[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


@dataclass
class ExperimentConfig:
    """Validated experiment parameters plus the raw key/value echo."""

    family_kind: str
    system: DynSystem
    horizon: int
    grid_size: int
    prune_eps: float
    lambdas: list[float]
    b_measure: float
    window_k: int
    scan_max_denominator: int
    scan_uniform: int
    test_function: str
    block_fraction: float
    trig_freq: int
    trace_state: float
    spec: SequenceSpec
    out_dir: str = ""
    echo: list[tuple[str, str]] = field(default_factory=list)


def _parse_weights(text: str) -> np.ndarray:
    try:
        vals = np.array([float(x) for x in text.split(",") if x.strip() != ""])
    except ValueError as exc:
        raise ConfigError([f"family.weights: {exc}"])
    if vals.size == 0:
        raise ConfigError(["family.weights: empty list"])
    return vals


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Parse and fully validate a config file.

    Raises OSError for I/O problems and :class:`ConfigError` (with every
    violated constraint listed) for content problems.
    """
    parser = configparser.ConfigParser(interpolation=None)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            parser.read_file(fh, source=str(path))
        except configparser.Error as exc:
            raise ConfigError([f"parse error: {exc}"])

    diags: list[str] = []
    for section in parser.sections():
        if section not in _ALLOWED_KEYS:
            diags.append(f"unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in _ALLOWED_KEYS[section]:
                diags.append(f"unknown key {section}.{key}")
    if "family" not in parser:
        diags.append("missing section [family]")

    def get(section: str, key: str) -> str:
        if section in parser and key in parser[section]:
            return parser[section][key]
        return _DEFAULTS.get(section, {}).get(key, "")

    def get_num(section: str, key: str, conv: Callable, check, describe: str):
        raw = get(section, key)
        try:
            val = conv(raw)
        except ValueError:
            diags.append(f"{section}.{key}: cannot parse {raw!r}")
            return None
        if not check(val):
            diags.append(f"{section}.{key}: {describe} (got {raw})")
            return None
        return val

    q = get_num("system", "q", int, lambda v: v >= 1, "must be a positive integer")
    alpha = get_num("system", "alpha", float, lambda v: 0.0 < v < 1.0, "must lie in (0, 1)")
    samples = get_num("system", "samples", int, lambda v: v >= 1, "must be positive")
    seed = get_num("system", "seed", int, lambda v: True, "")
    sys_kind = get("system", "kind")
    if sys_kind not in {"cyclic", "rotation"}:
        diags.append(f"system.kind: must be cyclic or rotation (got {sys_kind!r})")

    horizon = get_num("run", "horizon", int, lambda v: v >= 1, "must be >= 1")
    grid_size = get_num(
        "run", "grid_size", int, lambda v: v >= 16 and v % 2 == 0, "must be even and >= 16"
    )
    prune_eps = get_num(
        "run", "prune_eps", float, lambda v: 0.0 <= v <= 1e-8, "must lie in [0, 1e-8]"
    )
    b_measure = get_num(
        "run", "b_measure", float, lambda v: 0.0 <= v <= 1.0, "must lie in [0, 1]"
    )
    window_k = get_num("run", "window_k", int, lambda v: v >= 1, "must be >= 1")
    scan_den = get_num("run", "scan_max_denominator", int, lambda v: v >= 1, "must be >= 1")
    scan_uni = get_num("run", "scan_uniform", int, lambda v: v >= 0, "must be >= 0")
    block_fraction = get_num(
        "run", "block_fraction", float, lambda v: 0.0 < v <= 1.0, "must lie in (0, 1]"
    )
    trig_freq = get_num("run", "trig_freq", int, lambda v: v >= 0, "must be >= 0")
    trace_state = get_num("run", "trace_state", float, lambda v: True, "")
    test_function = get("run", "test_function")
    if test_function not in {"point_mass", "block", "trig"}:
        diags.append(f"run.test_function: must be point_mass, block or trig (got {test_function!r})")

    lambdas: list[float] = []
    for tok in get("run", "lambdas").split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            lam = float(tok)
        except ValueError:
            diags.append(f"run.lambdas: cannot parse {tok!r}")
            continue
        if lam <= 0:
            diags.append(f"run.lambdas: levels must be positive (got {tok})")
        lambdas.append(lam)
    if not lambdas:
        diags.append("run.lambdas: at least one level required")

    family_kind = get("family", "kind")
    spec: Optional[SequenceSpec] = None
    if family_kind == "iid":
        weights = None
        try:
            weights = _parse_weights(get("family", "weights") or "0.25,0.5,0.25")
        except ConfigError as exc:
            diags.extend(exc.diagnostics)
        offset_raw = get("family", "offset") or "-1"
        try:
            offset = int(offset_raw)
        except ValueError:
            diags.append(f"family.offset: cannot parse {offset_raw!r}")
            offset = 0
        if weights is not None:
            total = float(np.sum(weights))
            if abs(total - 1.0) > 1e-9:
                diags.append(f"family.weights: must sum to 1 (got {total!r})")
            elif np.any(weights < 0):
                diags.append("family.weights: must be nonnegative")
            else:
                spec = SequenceSpec.iid(LatticeMeasure(offset, weights), name="iid")
    elif family_kind == "sweepout":
        a_rule = get("family", "a_rule") or "inverse_square"
        family: Optional[SweepoutFamily] = None
        if a_rule == "inverse_square":
            coeff = get_num("family", "coeff", float, lambda v: v >= 1.0, "must be >= 1") if get("family", "coeff") else 1.0
            if coeff is not None:
                family = inverse_square_family(coeff)
        elif a_rule == "geometric":
            ratio = get_num("family", "ratio", float, lambda v: 0.0 < v < 1.0, "must lie in (0,1)") if get("family", "ratio") else 0.5
            if ratio is not None:
                family = geometric_family(ratio)
        else:
            diags.append(f"family.a_rule: must be inverse_square or geometric (got {a_rule!r})")
        if family is not None:
            spec = family.to_spec(length_hint=horizon or 0)
    elif family_kind == "list":
        mpath = get("family", "measures_file")
        if not mpath:
            diags.append("family.measures_file: required for kind = list")
        else:
            mfile = Path(mpath)
            if not mfile.is_absolute():
                mfile = Path(path).parent / mfile
            try:
                blocks = [b for b in mfile.read_text().split("\n\n") if b.strip()]
                measures = [LatticeMeasure.from_text(b) for b in blocks]
                if not measures:
                    diags.append(f"family.measures_file: no measures in {mpath}")
                else:
                    spec = SequenceSpec.from_measures(measures, name=f"list:{mfile.name}")
            except OSError as exc:
                raise ConfigError([f"family.measures_file: cannot read ({exc})"])
            except ValueError as exc:
                diags.append(f"family.measures_file: {exc}")
    else:
        diags.append(f"family.kind: must be iid, sweepout or list (got {family_kind!r})")

    if diags:
        raise ConfigError(diags)

    system = (
        DynSystem.cyclic(q)
        if sys_kind == "cyclic"
        else DynSystem.rotation(alpha=alpha, samples=samples, seed=seed)
    )
    echo = []
    for section in ("family", "system", "run"):
        keys = sorted(_ALLOWED_KEYS[section])
        for key in keys:
            val = get(section, key)
            if val != "":
                echo.append((f"{section}.{key}", val))
    return ExperimentConfig(
        family_kind=family_kind,
        system=system,
        horizon=horizon,
        grid_size=grid_size,
        prune_eps=prune_eps,
        lambdas=lambdas,
        b_measure=b_measure,
        window_k=window_k,
        scan_max_denominator=scan_den,
        scan_uniform=scan_uni,
        test_function=test_function,
        block_fraction=block_fraction,
        trig_freq=trig_freq,
        trace_state=trace_state,
        spec=spec,
        out_dir=get("run", "out"),
        echo=echo,
    )


def validate_config(path: str | os.PathLike) -> list[str]:
    """Full validation without running; returns the list of diagnostics."""
    try:
        load_config(path)
    except ConfigError as exc:
        return exc.diagnostics
    return []


# -- output helpers ------------------------------------------------------------------
def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(config: ExperimentConfig, subcommand: str, extra: Iterable[tuple[str, str]] = ()) -> str:
    lines = [f"# convergence-lab {subcommand}"]
    for key, val in config.echo:
        lines.append(f"# config {key}={val}")
    for key, val in extra:
        lines.append(f"# {key}={val}")
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(
    path: Path,
    config: ExperimentConfig,
    subcommand: str,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    extra: Iterable[tuple[str, str]] = (),
) -> None:
    body = [",".join(columns)]
    body.extend(",".join(_fmt(v) for v in row) for row in rows)
    _atomic_write(path, _header(config, subcommand, extra) + "\n".join(body) + "\n")


def _make_test_function(config: ExperimentConfig) -> TestFunction:
    sysm = config.system
    if config.test_function == "point_mass":
        if sysm.is_cyclic:
            # normalized point mass: ||f||_1 = 1 exactly
            return TestFunction.indicator_block(0, 1, scale=float(sysm.q))
        return TestFunction.indicator_interval(0.0, 1.0 / sysm.samples, scale=float(sysm.samples))
    if config.test_function == "block":
        if sysm.is_cyclic:
            length = max(1, int(round(config.block_fraction * sysm.q)))
            return TestFunction.indicator_block(0, length)
        return TestFunction.indicator_interval(0.0, config.block_fraction)
    return TestFunction.trig(config.trig_freq)


# -- subcommands -------------------------------------------------------------------------
def _cmd_convolve(config: ExperimentConfig, out: Path, threads: int) -> int:
    mus = convolve_prefixes(config.spec, config.horizon, prune_eps=config.prune_eps)
    rows = []
    for n, mu in enumerate(mus, start=1):
        for i, w in enumerate(mu.weights):
            rows.append((n, mu.min_index + i, float(w)))
    _write_csv(
        out / "prefixes.csv",
        config,
        "convolve",
        ("n", "k", "weight"),
        rows,
        extra=[("final_mass_defect", repr(mus[-1].mass_defect))],
    )
    return EXIT_OK


def _cmd_spectrum(config: ExperimentConfig, out: Path, threads: int) -> int:
    ladder = sorted({2**j for j in range(0, config.horizon.bit_length()) if 2**j <= config.horizon} | {config.horizon})
    mus = convolve_prefixes(config.spec, config.horizon, prune_eps=config.prune_eps)

    def profile_for(n: int):
        return n, fourier_eval(mus[n - 1], config.grid_size)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            profiles = list(pool.map(profile_for, ladder))
    else:
        profiles = [profile_for(n) for n in ladder]
    for n, prof in profiles:
        rows = (
            (float(t), float(v.real), float(v.imag), float(abs(v)), float(abs(a)), float(abs(b)))
            for t, v, a, b in zip(prof.grid, prof.values, prof.d1, prof.d2)
        )
        _write_csv(
            out / f"spectrum_mu_{n:04d}.csv",
            config,
            "spectrum",
            ("t", "re", "im", "abs", "abs_d1", "abs_d2"),
            rows,
            extra=[("prefix_n", str(n)), ("lipschitz_bound", repr(prof.lipschitz_bound))],
        )
    return EXIT_OK


def _cmd_check(config: ExperimentConfig, out: Path, threads: int) -> int:
    report = check_convergence_hypotheses(
        config.spec,
        config.horizon,
        grid_size=config.grid_size,
        prune_eps=config.prune_eps,
    )
    _write_csv(out / "hypothesis_rows.csv", config, "check", report.row_header, report.rows)
    summary = report.summary_text()
    if config.spec.has_decomposition:
        sweep = check_sweepout_hypotheses(config.spec, config.horizon)
        _write_csv(out / "sweepout_rows.csv", config, "check", sweep.row_header, sweep.rows)
        summary += "\n" + sweep.summary_text()
    _atomic_write(out / "hypothesis_summary.txt", _header(config, "check") + summary + "\n")
    print(summary)
    return EXIT_OK


def _cmd_simulate(config: ExperimentConfig, out: Path, threads: int) -> int:
    f = _make_test_function(config)
    rows = weak11_table(
        config.system, config.spec, f, config.horizon, config.lambdas, prune_eps=config.prune_eps
    )
    _write_csv(
        out / "weak11.csv",
        config,
        "simulate",
        ("lambda", "level_measure", "empirical_constant"),
        rows,
        extra=[("f_l1_norm", repr(f.norm_l1(config.system)))],
    )
    x0 = int(config.trace_state) if config.system.is_cyclic else float(config.trace_state)
    trace = convergence_trace(
        config.system, config.spec, f, x0, config.horizon, prune_eps=config.prune_eps
    )
    _write_csv(
        out / "convergence_trace.csv",
        config,
        "simulate",
        ("n", "value"),
        ((n, v) for n, v in enumerate(trace.values, start=1)),
        extra=[
            ("oscillation_window_start", str(trace.window_start)),
            ("tail_oscillation", repr(trace.oscillation)),
        ],
    )
    return EXIT_OK


def _cmd_sweepout(config: ExperimentConfig, out: Path, threads: int) -> int:
    rows = dissipativity_trace(config.spec, config.window_k, config.horizon, prune_eps=config.prune_eps)
    _write_csv(
        out / "dissipativity.csv",
        config,
        "sweepout",
        ("n", "window_max"),
        rows,
        extra=[("window_k", str(config.window_k))],
    )

    pts = scan_points(config.scan_max_denominator, config.scan_uniform)
    scan = fourier_floor_scan(config.spec, pts, config.horizon)
    _write_csv(
        out / "floor_scan.csv",
        config,
        "sweepout",
        ("t", "floor_min", "product_bound"),
        scan.rows,
        extra=[
            ("window", f"[{scan.window_start},{scan.horizon}]"),
            ("product_bound_vacuous", str(scan.vacuous).lower()),
            ("scan_max_denominator", str(config.scan_max_denominator)),
            ("scan_uniform", str(config.scan_uniform)),
        ],
    )

    sim = sweepout_simulation(
        config.system, config.spec, config.b_measure, config.horizon, prune_eps=config.prune_eps
    )
    _write_csv(
        out / "sweepout_simulation.csv",
        config,
        "sweepout",
        ("state_index", "running_max", "running_min"),
        ((i, float(hi), float(lo)) for i, (hi, lo) in enumerate(zip(sim.sup_trace, sim.inf_trace))),
        extra=[
            ("set_measure", repr(sim.set_measure)),
            ("high_threshold", repr(sim.high_threshold)),
            ("low_threshold", repr(sim.low_threshold)),
            ("frac_running_max_high", repr(sim.frac_high)),
            ("frac_running_min_low", repr(sim.frac_low)),
        ],
    )

    if scan.contract_margin < -_FLOOR_CONTRACT_TOL:
        print(
            f"floor-scan contract violated: margin {scan.contract_margin!r}",
            file=_sys.stderr,
        )
        return EXIT_CONTRACT
    return EXIT_OK


_SUBCOMMANDS = {
    "convolve": _cmd_convolve,
    "spectrum": _cmd_spectrum,
    "check": _cmd_check,
    "simulate": _cmd_simulate,
    "sweepout": _cmd_sweepout,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convergence-lab",
        description="Convolution-measure experiments: hypothesis checks, averaging simulations, sweep-out diagnostics.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in (*_SUBCOMMANDS, "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the experiment config file")
        p.add_argument(
            "--out",
            default=None,
            help="output directory (default: the config's run.out, else ./out)",
        )
        p.add_argument("--threads", type=int, default=1, help="worker threads for independent evaluations")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("--threads must be at least 1", file=_sys.stderr)
        return EXIT_CONFIG

    if args.subcommand == "validate":
        try:
            diagnostics = validate_config(args.config)
        except OSError as exc:
            print(f"cannot read config: {exc}", file=_sys.stderr)
            return EXIT_CONFIG
        for d in diagnostics:
            print(d)
        if diagnostics:
            return EXIT_CONFIG
        print("config ok")
        return EXIT_OK

    try:
        config = load_config(args.config)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(d, file=_sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out if args.out is not None else (config.out_dir or "out"))
    try:
        return _SUBCOMMANDS[args.subcommand](config, out, args.threads)
    except SupportCapError as exc:
        print(f"resource cap: {exc}", file=_sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    raise SystemExit(main())
