"""Command-line entry point.

Subcommands::

    riskysci run      one parameter cell
    riskysci sweep    generic sweep, --sweep NAME=START:STOP:STEP or NAME=v1,v2,...
    riskysci fig1     payoff sweep u_r = 2..20        (c=.2, d=10, t=0)
    riskysci fig2     selection sweep d = 1..100      (c=.2, t=.5, u_r=5)
    riskysci fig3     heritability sweep t = 0..1     (u_r=7, d=10, c=.2)
    riskysci payoff   analytic expected payoff and zero-success fraction

Settings resolve in order: built-in defaults, figure preset, ``--config``
file (``key = value`` lines using the flag names), ``RISKYSCI_*`` environment
variables (e.g. ``RISKYSCI_N_LABS=50``), then explicit flags.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from . import harness
from . import io as rio
from .model import Params

ENV_PREFIX = "RISKYSCI_"

# flag name -> (Params field or RunConfig key, parser)
_PARAM_FLAGS = {
    "n-labs": ("n_labs", int),
    "d": ("d", int),
    "pc": ("p_c", float),
    "uc": ("u_c", float),
    "ur": ("u_r", float),
    "c": ("c", float),
    "f": ("f", float),
    "t": ("t", float),
    "rounds": ("rounds", int),
}


def _bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_RUN_FLAGS = {
    "trials": ("trials", int),
    "seed": ("seed", int),
    "sweep": ("sweep", str),
    "out": ("out", str),
    "format": ("format", str),
    "svg": ("svg", str),
    "threads": ("threads", int),
    "no-early-exit": ("no_early_exit", _bool),
    "trace": ("trace", _bool),
    "no-timestamp": ("no_timestamp", _bool),
    "exact-split": ("exact_split", _bool),
}
_ALL_FLAGS = {**_PARAM_FLAGS, **_RUN_FLAGS}

_SWEEP_ALIASES = {flag: name for flag, (name, _) in _PARAM_FLAGS.items()}

PRESETS = {
    "fig1": {"params": {"c": 0.2, "d": 10, "t": 0.0}, "sweep": ("u_r", tuple(float(v) for v in range(2, 21)))},
    "fig2": {"params": {"c": 0.2, "t": 0.5, "u_r": 5.0}, "sweep": ("d", (1, 2, 5, 10, 20, 50, 100))},
    "fig3": {"params": {"u_r": 7.0, "d": 10, "c": 0.2}, "sweep": ("t", tuple(round(0.1 * i, 10) for i in range(11)))},
}
_TITLES = {
    "fig1": "Outcomes vs. risky payoff u_r (c=.2, d=10, t=0)",
    "fig2": "Outcomes vs. selection sample size d (c=.2, t=.5, u_r=5)",
    "fig3": "Outcomes vs. heritability t (u_r=7, d=10, c=.2)",
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: Params
    trials: int = 1000
    seed: int = 1
    sweep: Optional[tuple[str, tuple]] = None
    out: Optional[str] = None
    format: str = "csv"
    svg: Optional[str] = None
    threads: int = 1
    early_exit: bool = True
    trace: bool = False
    timestamp: bool = True
    sources: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["params"] = self.params.as_dict()
        out.pop("sources")
        if self.sweep is not None:
            out["sweep"] = {"param": self.sweep[0], "values": list(self.sweep[1])}
        return out


def parse_sweep(text: str) -> tuple[str, tuple]:
    """Parse ``NAME=START:STOP:STEP`` (inclusive stop) or ``NAME=v1,v2,...``."""
    if "=" not in text:
        raise UsageError(f"--sweep expects NAME=START:STOP:STEP, got {text!r}")
    name, spec = text.split("=", 1)
    name = _SWEEP_ALIASES.get(name.strip(), name.strip().replace("-", "_"))
    if name not in harness.SWEEPABLE:
        raise UsageError(f"cannot sweep {name!r}; choose from {', '.join(harness.SWEEPABLE)}")
    try:
        if ":" in spec:
            parts = [float(p) for p in spec.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, stop, step = parts
            if step <= 0 or stop < start:
                raise UsageError(f"--sweep range needs step > 0 and stop >= start, got {spec!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = tuple(round(start + i * step, 10) for i in range(count))
        else:
            values = tuple(float(v) for v in spec.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"malformed --sweep values {spec!r}") from None
    if not values:
        raise UsageError("--sweep needs at least one value")
    if name in ("n_labs", "d", "rounds"):
        if any(v != int(v) for v in values):
            raise UsageError(f"{name} must take integer values, got {values}")
        values = tuple(int(v) for v in values)
    return name, values


def read_config_file(path: str) -> dict:
    settings = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lstrip("-").replace("_", "-")
        if key not in _ALL_FLAGS:
            raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
        settings[key] = value
    return settings


def read_env(environ) -> dict:
    settings = {}
    for flag in _ALL_FLAGS:
        var = ENV_PREFIX + flag.upper().replace("-", "_")
        if var in environ:
            settings[flag] = environ[var]
    return settings


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskysci", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {rio.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def sim_flags(p: argparse.ArgumentParser, sweep: bool) -> None:
        g = p.add_argument_group("model parameters")
        for flag, (_, typ) in _PARAM_FLAGS.items():
            g.add_argument(f"--{flag}", type=typ, default=argparse.SUPPRESS)
        g = p.add_argument_group("run options")
        g.add_argument("--trials", type=int, default=argparse.SUPPRESS, help="trials per cell (default 1000)")
        g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 1)")
        if sweep:
            g.add_argument("--sweep", default=argparse.SUPPRESS, metavar="NAME=START:STOP:STEP")
            g.add_argument("--svg", default=argparse.SUPPRESS, metavar="PATH", help="also write a line chart")
        g.add_argument("--out", default=argparse.SUPPRESS, metavar="PATH", help="output file (default stdout)")
        g.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)
        g.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads, 0 = all cores")
        g.add_argument("--no-early-exit", action="store_true", default=argparse.SUPPRESS,
                       help="keep simulating after fixation")
        if not sweep:
            g.add_argument("--trace", action="store_true", default=argparse.SUPPRESS,
                           help="write per-round composition to OUT.trace.csv")
        g.add_argument("--no-timestamp", action="store_true", default=argparse.SUPPRESS,
                       help="omit the timestamp from JSON metadata")
        g.add_argument("--exact-split", action="store_true", default=argparse.SUPPRESS,
                       help="found exactly N/2 risky labs")
        g.add_argument("--config", default=None, metavar="PATH", help="flat key = value settings file")

    sim_flags(sub.add_parser("run", help="run one parameter cell"), sweep=False)
    sim_flags(sub.add_parser("sweep", help="sweep one parameter"), sweep=True)
    for name in PRESETS:
        sim_flags(sub.add_parser(name, help=_TITLES[name]), sweep=True)

    p = sub.add_parser("payoff", help="analytic risky payoff report")
    p.add_argument("--ur", type=float, default=10.0)
    p.add_argument("--c", type=float, default=0.2)
    p.add_argument("--f", type=float, default=0.02)
    p.add_argument("--pc", type=float, default=0.8)
    p.add_argument("--uc", type=float, default=1.0)
    return parser


def resolve_config(ns: argparse.Namespace, environ=None) -> RunConfig:
    """Merge defaults, preset, config file, environment, and flags into a RunConfig."""
    environ = os.environ if environ is None else environ
    command = ns.command
    layers = []
    preset = PRESETS.get(command)
    if preset:
        layers.append(("preset", {flag: str(preset["params"][name])
                                  for flag, (name, _) in _PARAM_FLAGS.items() if name in preset["params"]}))
    if ns.config:
        layers.append(("file", read_config_file(ns.config)))
    layers.append(("env", read_env(environ)))
    cli = {}
    for flag in _ALL_FLAGS:
        dest = flag.replace("-", "_")
        if hasattr(ns, dest):
            cli[flag] = getattr(ns, dest)
    layers.append(("cli", cli))

    merged: dict = {}
    sources: dict = {}
    for source, layer in layers:
        for flag, raw in layer.items():
            _, typ = _ALL_FLAGS[flag]
            try:
                merged[flag] = raw if not isinstance(raw, str) or typ is str else typ(raw)
            except ValueError:
                raise UsageError(f"--{flag}: invalid value {raw!r} (from {source})") from None
            sources[flag] = source

    param_values = {name: merged[flag] for flag, (name, _) in _PARAM_FLAGS.items() if flag in merged}
    if merged.get("exact-split"):
        param_values["exact_split"] = True

    sweep = None
    if preset:
        sweep = preset["sweep"]
    if "sweep" in merged:
        if command == "run":
            raise UsageError("--sweep is not accepted by 'run'; use 'sweep'")
        sweep = parse_sweep(merged["sweep"])
    if command == "sweep" and sweep is None:
        raise UsageError("'sweep' needs --sweep NAME=START:STOP:STEP")
    if sweep is not None and sweep[0] in param_values:
        # the swept parameter's fixed value is irrelevant; drop it so a value
        # that is only invalid as a base (e.g. d > N) does not block the sweep
        param_values.pop(sweep[0])

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            params = Params(**param_values)
            if sweep is not None:
                harness.SweepSpec(params, sweep[0], sweep[1], 1, 0)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None

    trials = merged.get("trials", 1000)
    seed = merged.get("seed", 1)
    threads = merged.get("threads", 1)
    fmt = merged.get("format", "csv")
    if trials < 1:
        raise UsageError(f"--trials must be >= 1, got {trials}")
    if not 0 <= seed < 2**64:
        raise UsageError(f"--seed must be an unsigned 64-bit integer, got {seed}")
    if threads < 0:
        raise UsageError(f"--threads must be >= 0, got {threads}")
    if fmt not in ("csv", "json"):
        raise UsageError(f"--format must be csv or json, got {fmt!r}")
    trace = bool(merged.get("trace", False))
    if trace and not merged.get("out"):
        raise UsageError("--trace needs --out (the trace goes to OUT.trace.csv)")

    return RunConfig(
        command=command, params=params, trials=trials, seed=seed, sweep=sweep,
        out=merged.get("out"), format=fmt, svg=merged.get("svg"), threads=threads,
        early_exit=not merged.get("no-early-exit", False), trace=trace,
        timestamp=not merged.get("no-timestamp", False), sources=sources,
    )


def parse_config(argv: Optional[Sequence[str]] = None, environ=None) -> RunConfig:
    """Parse arguments into a RunConfig. Usage errors exit with status 2."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "payoff":
        parser.error("'payoff' takes no run configuration")
    try:
        return resolve_config(ns, environ)
    except UsageError as exc:
        parser.error(str(exc))
        raise  # unreachable; parser.error exits


@contextmanager
def _open_out(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _write_summaries(cfg: RunConfig, summaries) -> None:
    with _open_out(cfg.out) as fh:
        if cfg.format == "json":
            rio.write_json(summaries, fh, config=cfg.as_dict(), timestamp=cfg.timestamp)
        else:
            rio.write_csv(summaries, fh)
    if cfg.svg:
        with open(cfg.svg, "w", encoding="utf-8") as fh:
            fh.write(rio.svg_chart(summaries, _TITLES.get(cfg.command, "")))


def command_run(cfg: RunConfig) -> list:
    stream = range(cfg.trials)
    results = harness.run_trials(cfg.params, cfg.seed, stream, threads=cfg.threads,
                                 early_exit=cfg.early_exit, trace=cfg.trace)
    summaries = [harness.summarize(cfg.params, results, cfg.seed)]
    _write_summaries(cfg, summaries)
    if cfg.trace:
        with open(cfg.out + ".trace.csv", "w", encoding="utf-8", newline="") as fh:
            rio.write_trace(results, fh)
    return summaries


def command_sweep(cfg: RunConfig) -> list:
    name, values = cfg.sweep
    spec = harness.SweepSpec(cfg.params, name, values, cfg.trials, cfg.seed)
    summaries = harness.run_sweep(spec, threads=cfg.threads, early_exit=cfg.early_exit)
    _write_summaries(cfg, summaries)
    return summaries


command_fig = command_sweep


def command_payoff(u_r: float, c: float, f: float, p_c: float = 0.8, u_c: float = 1.0, out=None) -> dict:
    """Print the analytic risky-payoff report and return its numbers."""
    out = sys.stdout if out is None else out
    closed = harness.expected_risky_payoff(u_r, c, f)
    quad = harness.expected_risky_payoff_quad(u_r, c, f)
    rel = abs(closed - quad) / abs(closed) if closed else abs(quad)
    report = {
        "expected_risky_payoff": closed,
        "quadrature": quad,
        "quadrature_rel_diff": rel,
        "zero_success_fraction": harness.zero_success_fraction(c, f),
        "max_success_rate": max(0.0, c - f),
        "expected_conservative_payoff": p_c * u_c,
    }
    print(f"u_r={u_r:g} c={c:g} f={f:g}", file=out)
    for key, value in report.items():
        print(f"{key:<30}{value:.10g}", file=out)
    return report


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "payoff":
        for name in ("ur", "c", "f", "pc", "uc"):
            if not math.isfinite(getattr(ns, name)) or getattr(ns, name) < 0:
                parser.error(f"--{name} must be a nonnegative real")
        command_payoff(ns.ur, ns.c, ns.f, ns.pc, ns.uc)
        return 0
    try:
        cfg = resolve_config(ns)
    except UsageError as exc:
        parser.error(str(exc))
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cfg.params.validate()
        for w in caught:
            print(f"riskysci: warning: {w.message}", file=sys.stderr)
        if cfg.command == "run":
            command_run(cfg)
        else:
            command_sweep(cfg)
    except OSError as exc:
        print(f"riskysci: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
