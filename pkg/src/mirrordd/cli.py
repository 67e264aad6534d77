"""Command-line front end.

    mirrordd rates --xi 6.2832 --dipole-a 0,1,0 --dipole-b 0,1,0 --ta 0.5 --rb 1.0
    mirrordd sweep --xi-min 0.1 --xi-max 20 --points 400 --orientations 0,0.5,0.75,1
    mirrordd lifetime --re-gamma 0.05 --p 0.05,0.1,0.2
    mirrordd evolve --re-gamma 0.05 --initial plus
    mirrordd trajectories --re-gamma 0.05 --initial mixture --p 0.1 --n 10000 --seed 42
    mirrordd crossing --re-gamma 0.05

Every subcommand accepts ``--config FILE`` (flat ``key = value`` lines or the
JSON written by ``--format json``), ``--output PATH`` and ``--format csv|json``.
Flags given on the command line override values from the config file.

Exit status: 0 on success, 2 on usage errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import dynamics, experiments, rates
from .errors import DomainError, MirrorConstraintError, NoCrossingError, UnphysicalRateError

log = logging.getLogger("mirrordd")

COMMANDS = ("rates", "sweep", "lifetime", "evolve", "trajectories", "crossing")
RATES_COLUMNS = ("xi", "re_gamma_ab", "delta_mir", "gamma_plus", "gamma_minus")
CROSSING_COLUMNS = ("re_gamma", "t_star", "t_star_numeric")

_RATE_METHODS = {
    "default": lambda cfg, tol: rates.gamma_ab(cfg),
    "closed": lambda cfg, tol: rates.gamma_ab_closed(cfg),
    "series": lambda cfg, tol: rates.gamma_ab_series(cfg),
    "quadrature": rates.gamma_ab_quadrature,
    "angular": rates.gamma_ab_angular,
}
# options that are bookkeeping rather than run parameters
_META = ("config", "output", "format")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _vector(text: str) -> tuple[float, float, float]:
    vals = _float_list(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated components, got {text!r}")
    return vals


@dataclass
class RunConfig:
    command: str
    options: dict = field(default_factory=dict)
    output: str = "-"
    format: str = "csv"

    def echo(self) -> dict:
        """Options as strings, in a form accepted back by ``--config``."""
        out = {"command": self.command, "format": self.format}
        for key, value in self.options.items():
            if value is None:
                continue
            if isinstance(value, (tuple, list)):
                out[key] = ",".join(repr(float(v)) for v in value)
            elif isinstance(value, float):
                out[key] = repr(value)
            else:
                out[key] = str(value)
        return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file, or JSON output of an earlier run")
    p.add_argument("--output", "-o", default="-", help="output path ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_rate_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--re-gamma", type=float, default=0.05, help="Re(gamma_ab) in units of gamma_free")
    p.add_argument("--delta-mir", type=float, default=0.0, help="Im(gamma_ab), the level shift")
    p.add_argument("--initial", choices=dynamics.InitialState.KINDS, default="plus")
    p.add_argument("--p", type=float, default=None, help="excitation probability for --initial mixture")
    p.add_argument("--t-max", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=51, help="number of time samples")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mirrordd", description="Mirror-mediated dipole-dipole interactions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rates", help="cross-coupling rate for one geometry")
    p.add_argument("--xi", type=float, required=True, help="effective distance k0 (x_a + x_b)")
    p.add_argument("--dipole-a", type=_vector, default="0,1,0")
    p.add_argument("--dipole-b", type=_vector, default="0,1,0")
    p.add_argument("--ta", type=float, default=None, help="transmission rate on atom a's side")
    p.add_argument("--rb", type=float, default=None, help="reflection rate on atom b's side")
    p.add_argument("--coupling", type=float, default=None, help="t_a * r_b directly")
    p.add_argument("--method", choices=sorted(_RATE_METHODS), default="default")
    p.add_argument("--tol", type=float, default=rates.DEFAULT_TOL)
    p.add_argument("--rate-scale", type=float, default=1.0, help="multiply emitted rates by this")
    _add_common(p)

    p = sub.add_parser("sweep", help="gamma_ab versus xi for several orientations")
    p.add_argument("--xi-min", type=float, default=0.1)
    p.add_argument("--xi-max", type=float, default=20.0)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--spacing", choices=("linear", "log"), default="log")
    p.add_argument("--orientations", type=_float_list, default="0,0.5,0.75,1", help="values of |d.x|")
    p.add_argument("--coupling", type=float, default=0.5)
    p.add_argument("--backend", choices=("default", "quadrature", "angular"), default="default")
    p.add_argument("--tol", type=float, default=rates.DEFAULT_TOL)
    p.add_argument("--rate-scale", type=float, default=1.0)
    _add_common(p)

    p = sub.add_parser("lifetime", help="emission rate I(t), I0(t) and their ratio")
    p.add_argument("--re-gamma", type=float, default=0.05)
    p.add_argument("--p", type=_float_list, default="0.05,0.1,0.2")
    p.add_argument("--t-max", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=500, help="number of time samples")
    _add_common(p)

    p = sub.add_parser("evolve", help="master-equation or no-jump evolution")
    _add_rate_inputs(p)
    p.add_argument("--mode", choices=("master", "conditional"), default="master")
    _add_common(p)

    p = sub.add_parser("trajectories", help="quantum-jump Monte Carlo")
    _add_rate_inputs(p)
    p.add_argument("--n", type=int, default=10000, help="number of trajectories")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)

    p = sub.add_parser("crossing", help="time at which I/I0 returns to one")
    p.add_argument("--re-gamma", type=float, default=0.05)
    _add_common(p)
    return parser


def read_config_file(path: str) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        data = data.get("config", data)
        return {str(k): v if isinstance(v, str) else json.dumps(v) for k, v in data.items()}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _apply_config(sub: argparse.ArgumentParser, command: str, values: dict[str, str]) -> None:
    dests = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        dest = key.replace("-", "_")
        if dest == "command":
            if value != command:
                raise UsageError(f"config file is for command {value!r}, not {command!r}")
            continue
        if dest not in dests or dest in ("config", "output", "help"):
            raise UsageError(f"unknown config key {key!r} for command {command!r}")
        defaults[dest] = value
        # a value from the config file satisfies a required flag
        dests[dest].required = False
    sub.set_defaults(**defaults)


def parse_args(argv=None) -> RunConfig:
    """Parse and validate ``argv``; raises :class:`UsageError` on bad input."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if known.config and command is not None:
        _apply_config(_subparser(parser, command), command, read_config_file(known.config))
    ns = parser.parse_args(argv)
    opts = {k: v for k, v in vars(ns).items() if k not in _META and k != "command"}
    cfg = RunConfig(ns.command, opts, ns.output, ns.format)
    _validate(cfg)
    return cfg


def _flag(dest: str) -> str:
    return "--" + dest.replace("_", "-")


def _check(cond: bool, dest: str, message: str) -> None:
    if not cond:
        raise UsageError(f"{_flag(dest)}: {message}")


def _geometry(o: dict, warn: bool = False) -> rates.GeometryConfig:
    if o["coupling"] is not None and (o["ta"] is not None or o["rb"] is not None):
        raise UsageError("--coupling cannot be combined with --ta/--rb")
    try:
        if o["coupling"] is not None:
            mirror = rates.AsymmetricMirror.from_coupling(o["coupling"])
        else:
            ta = 0.5 if o["ta"] is None else o["ta"]
            rb = 1.0 if o["rb"] is None else o["rb"]
            mirror = rates.AsymmetricMirror.from_rates(ta, rb)
    except MirrorConstraintError as exc:
        raise UsageError(f"mirror: {exc}") from None
    dipoles = []
    for dest in ("dipole_a", "dipole_b"):
        vec = o[dest]
        norm = math.sqrt(sum(v * v for v in vec))
        _check(norm > 0.0 and math.isfinite(norm), dest, "dipole vector must be nonzero and finite")
        if warn and abs(norm - 1.0) > 1e-6:
            log.warning("%s renormalised from length %r", _flag(dest), norm)
        dipoles.append(rates.DipoleOrientation.from_vector(vec))
    try:
        return rates.GeometryConfig(o["xi"], dipoles[0], dipoles[1], mirror)
    except DomainError as exc:
        raise UsageError(f"--xi: {exc}") from None


def _initial(o: dict) -> dynamics.InitialState:
    try:
        return dynamics.InitialState(o["initial"], o["p"])
    except DomainError as exc:
        raise UsageError(f"--initial/--p: {exc}") from None


def _validate(cfg: RunConfig) -> None:
    o = cfg.options
    cmd = cfg.command
    if cmd == "rates":
        _check(o["tol"] > 0.0, "tol", "must be > 0")
        _geometry(o, warn=True)
    elif cmd == "sweep":
        _check(o["tol"] > 0.0, "tol", "must be > 0")
        try:
            _sweep_spec(o)
        except DomainError as exc:
            raise UsageError(f"sweep: {exc}") from None
    elif cmd == "lifetime":
        try:
            _lifetime_spec(o)
        except DomainError as exc:
            raise UsageError(f"lifetime: {exc}") from None
    elif cmd in ("evolve", "trajectories"):
        _check(-1.0 < o["re_gamma"] < 1.0, "re_gamma", "must lie in (-1, 1)")
        _check(math.isfinite(o["delta_mir"]), "delta_mir", "must be finite")
        _check(o["t_max"] > 0.0 and math.isfinite(o["t_max"]), "t_max", "must be > 0")
        _check(o["steps"] >= 2, "steps", "must be >= 2")
        _initial(o)
        if cmd == "trajectories":
            _check(o["n"] >= 1, "n", "must be >= 1")
            _check(o["workers"] >= 1, "workers", "must be >= 1")
    elif cmd == "crossing":
        _check(0.0 < abs(o["re_gamma"]) < 1.0, "re_gamma", "must satisfy 0 < |re_gamma| < 1")


def _sweep_spec(o: dict) -> experiments.SweepSpec:
    return experiments.SweepSpec(
        xi_min=o["xi_min"],
        xi_max=o["xi_max"],
        n_points=o["points"],
        spacing=o["spacing"],
        orientations=tuple(o["orientations"]),
        coupling=o["coupling"],
    )


def _lifetime_spec(o: dict) -> experiments.LifetimeSpec:
    return experiments.LifetimeSpec(
        p_list=tuple(o["p"]), re_gamma=o["re_gamma"], t_max=o["t_max"], n_steps=o["steps"]
    )


def _compute(cfg: RunConfig) -> dict[str, np.ndarray | float]:
    o = cfg.options
    cmd = cfg.command
    if cmd == "rates":
        geom = _geometry(o)
        g = _RATE_METHODS[o["method"]](geom, o["tol"])
        g_plus, g_minus = rates.collective_rates(g)
        s = o["rate_scale"]
        return {
            "xi": geom.xi,
            "re_gamma_ab": s * g.real,
            "delta_mir": s * g.imag,
            "gamma_plus": s * g_plus,
            "gamma_minus": s * g_minus,
        }
    if cmd == "sweep":
        table = experiments.sweep_xi(_sweep_spec(o), backend=o["backend"], tol=o["tol"])
        table["re_gamma_ab"] = table["re_gamma_ab"] * o["rate_scale"]
        table["delta_mir"] = table["delta_mir"] * o["rate_scale"]
        return table
    if cmd == "lifetime":
        return experiments.lifetime_curves(_lifetime_spec(o))
    if cmd in ("evolve", "trajectories"):
        gen = dynamics.build_generator(complex(o["re_gamma"], o["delta_mir"]))
        t = np.linspace(0.0, o["t_max"], o["steps"])
        initial = _initial(o)
        if cmd == "trajectories":
            ts = dynamics.mc_trajectories(gen, initial, t, o["n"], o["seed"], workers=o["workers"])
        elif o["mode"] == "master":
            ts = dynamics.evolve_master(gen, initial, t)
        else:
            ts = dynamics.evolve_conditional(gen, initial, t)
        return ts.columns()
    if cmd == "crossing":
        r = o["re_gamma"]
        return {
            "re_gamma": r,
            "t_star": experiments.ratio_crossing_time(r),
            "t_star_numeric": experiments.ratio_crossing_time_numeric(r),
        }
    raise UsageError(f"unknown command {cmd!r}")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def render(cfg: RunConfig, result: dict) -> str:
    scalar = all(np.ndim(v) == 0 for v in result.values())
    if cfg.format == "json":
        obj = {"config": cfg.echo()}
        for key, value in result.items():
            if scalar:
                obj[key] = float(value)
            else:
                obj[key] = [float(x) for x in np.asarray(value)]
        return json.dumps(obj, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.keys())
    if scalar:
        writer.writerow(_fmt(v) for v in result.values())
    else:
        cols = [np.asarray(v) for v in result.values()]
        for row in zip(*cols):
            writer.writerow(_fmt(v) for v in row)
    return buf.getvalue()


def run(cfg: RunConfig) -> int:
    text = render(cfg, _compute(cfg))
    if cfg.output == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mirrordd: error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except (DomainError, UnphysicalRateError, NoCrossingError, MirrorConstraintError) as exc:
        print(f"mirrordd: error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, OSError) as exc:
        print(f"mirrordd: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
