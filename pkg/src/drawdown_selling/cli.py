"""Command-line front end.

Configs are flat ``key = value`` files with dotted keys::

    model.mu = 0.18
    model.sigma = 0.2
    jump.1.rate = 0.25
    jump.1.intensity = 4
    prefs.r = 0.18
    prefs.q = 1
    prefs.c = 0.3568
    prefs.rho = 0
    prefs.K = 10

Optional keys: ``grid.window`` (xmin,xmax,smin,smax), ``grid.n``,
``sim.x0``, ``sim.s0``, ``sim.paths``, ``sim.dt``, ``sim.seed``.  A bare name
such as ``severe_low_tolerance`` resolves to a config shipped with the package.

Exit codes: 0 ok, 2 validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import re
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ._io import dumps, write_csv, write_json
from .levy_model import JumpSpec, LevyModel, ModelError, NumericError, Preferences, validate
from .thresholds import SEVERE_LOW, Problem, solve

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3

TABLE_ROWS = [
    ("Benchmark", "table_benchmark"),
    ("Smaller rho", "table_smaller_rho"),
    ("Larger rho", "table_larger_rho"),
    ("Smaller sigma", "table_smaller_sigma"),
    ("Larger sigma", "table_larger_sigma"),
    ("Smaller eta", "table_smaller_eta"),
    ("Larger eta", "table_larger_eta"),
]

_REQUIRED = ("model.mu", "model.sigma", "prefs.r", "prefs.q", "prefs.c")
_KNOWN = re.compile(r"^(model\.(mu|sigma)|jump\.\d+\.(rate|intensity)|prefs\.(r|q|c|rho|K)"
                    r"|grid\.(window|n)|sim\.(x0|s0|paths|dt|seed|horizon))$")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: LevyModel
    prefs: Preferences
    raw: dict
    options: dict = field(default_factory=dict)
    source: str = ""


def shipped_config(name: str) -> Path:
    path = resources.files("drawdown_selling") / "configs" / f"{name}.cfg"
    return Path(str(path))


def parse_config(text: str) -> dict:
    raw: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if not _KNOWN.match(key):
            raise ConfigError(f"line {n}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        raw[key] = val
    return raw


def _num(raw: dict, key: str, default=None) -> float:
    if key not in raw:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    try:
        return float(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {raw[key]!r}") from None


def build_config(raw: dict, source: str = "") -> RunConfig:
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing key {key!r}")
    ids = sorted({int(k.split(".")[1]) for k in raw if k.startswith("jump.")})
    terms = []
    for i in ids:
        terms.append((_num(raw, f"jump.{i}.rate"), _num(raw, f"jump.{i}.intensity")))
    sigma = _num(raw, "model.sigma")
    if not sigma > 0:
        raise ConfigError("model.sigma must be positive")
    try:
        model = LevyModel(_num(raw, "model.mu"), sigma, JumpSpec(tuple(terms)))
    except ModelError as exc:
        raise ConfigError(str(exc)) from None
    prefs = Preferences(_num(raw, "prefs.r"), _num(raw, "prefs.q"), _num(raw, "prefs.c"),
                        _num(raw, "prefs.rho", 0.0), _num(raw, "prefs.K", 1.0))
    opts = {}
    if "grid.window" in raw:
        opts["window"] = parse_window(raw["grid.window"])
    for key in ("grid.n", "sim.paths", "sim.seed"):
        if key in raw:
            opts[key.split(".")[1]] = int(_num(raw, key))
    for key in ("sim.x0", "sim.s0", "sim.dt", "sim.horizon"):
        if key in raw:
            opts[key.split(".")[1]] = _num(raw, key)
    return RunConfig(model, prefs, raw, opts, source)


def load_config(path: str) -> RunConfig:
    p = Path(path)
    if not p.exists():
        shipped = shipped_config(path)
        if not shipped.exists():
            raise ConfigError(f"config not found: {path}")
        p = shipped
    return build_config(parse_config(p.read_text()), str(p))


def parse_window(text: str) -> tuple[float, float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"bad window {text!r}") from None
    if len(vals) != 4 or vals[0] > vals[1] or vals[2] > vals[3]:
        raise ConfigError("window must be xmin,xmax,smin,smax with min <= max")
    return vals


def _validated(cfg: RunConfig):
    report = validate(cfg.model, cfg.prefs)
    if not report.ok:
        raise ConfigError("; ".join(report.violations))


def _emit(args, name: str, obj: dict):
    text = dumps(obj)
    if args.out:
        write_json(Path(args.out) / name, obj)
    print(text)


def _report(cfg: RunConfig, **body) -> dict:
    return {**body, "config": dict(cfg.raw)}


# commands


def cmd_classify(args, cfg: RunConfig) -> int:
    _validated(cfg)
    p = Problem(cfg.model, cfg.prefs)
    reg = p.regime.to_dict()
    if reg["y_bar"] is not None:
        reg["y_bar"] += p.shift
    _emit(args, "classify.json", _report(cfg, **reg))
    return EXIT_OK


def cmd_thresholds(args, cfg: RunConfig) -> int:
    _validated(cfg)
    t0 = time.perf_counter()
    ts = solve(cfg.model, cfg.prefs)
    body = ts.to_dict()
    body["elapsed_seconds"] = time.perf_counter() - t0
    if args.out and ts.curve is not None:
        ts.curve.to_csv(Path(args.out) / "trailing_curve.csv")
    _emit(args, "thresholds.json", _report(cfg, **body))
    return EXIT_OK


def _surface(cfg: RunConfig):
    from .value_function import ValueSurface

    return ValueSurface(solve(cfg.model, cfg.prefs))


def _window(args, cfg: RunConfig, surface):
    if args.window:
        return parse_window(args.window)
    if "window" in cfg.options:
        return cfg.options["window"]
    edges = surface.band_edges()
    lo = surface.ts.b_low - 0.5
    hi = max(edges) + 0.5
    return (lo, hi, lo, hi)


def cmd_region(args, cfg: RunConfig) -> int:
    from .value_function import write_grid_csv

    _validated(cfg)
    surface = _surface(cfg)
    n = args.grid or cfg.options.get("n", 100)
    rows = surface.region_grid(_window(args, cfg, surface), n)
    if args.out:
        write_grid_csv(Path(args.out) / "region.csv", rows)
    else:
        write_grid_csv("/dev/stdout", rows)
    return EXIT_OK


def _states(args, cfg: RunConfig, surface) -> list[tuple[float, float]]:
    if args.state:
        out = []
        for item in args.state:
            try:
                x, s = (float(v) for v in item.split(","))
            except ValueError:
                raise ConfigError(f"bad state {item!r}; expected x,s") from None
            out.append((x, s))
        return out
    if "x0" in cfg.options:
        return [(cfg.options["x0"], cfg.options.get("s0", cfg.options["x0"]))]
    d = surface.band_edges()[0]
    return [(d - 0.2, d - 0.2)]


def cmd_value(args, cfg: RunConfig) -> int:
    _validated(cfg)
    surface = _surface(cfg)
    results = []
    for x, s in _states(args, cfg, surface):
        if x > s:
            raise ConfigError(f"state ({x}, {s}) has x > s")
        lab = surface.classify_state(x, s)
        results.append(dict(x=x, s=s, value=surface.value(x, s), utility=float(surface.utility(x)),
                            v_lower=surface.v_lower(x), v_bar=surface.v_bar(x, s - cfg.prefs.c),
                            action=lab.action.value, region=lab.active_region.value, theorem=lab.theorem))
    _emit(args, "value.json", _report(cfg, theorem=surface.theorem, states=results))
    return EXIT_OK


def _sim_config(args, cfg: RunConfig, default_paths: int = 20_000):
    from .simulate import SimConfig

    return SimConfig(dt=args.dt or cfg.options.get("dt", 1e-3),
                     horizon=cfg.options.get("horizon"),
                     n_paths=args.paths or cfg.options.get("paths", default_paths),
                     seed=args.seed if args.seed is not None else cfg.options.get("seed", 0))


def cmd_simulate(args, cfg: RunConfig) -> int:
    from .simulate import estimate_value, optimal_strategy

    _validated(cfg)
    surface = _surface(cfg)
    sim = _sim_config(args, cfg)
    strategy = optimal_strategy(surface)
    out = []
    for x, s in _states(args, cfg, surface):
        res = estimate_value(surface, x, s, sim, strategy)
        v = surface.value(x, s)
        out.append(dict(x=x, s=s, analytic=v, z_score=(res.estimate - v) / res.std_error if res.std_error else 0.0,
                        **res.to_dict()))
    _emit(args, "simulate.json", _report(cfg, theorem=surface.theorem, dt=sim.dt, seed=sim.seed, results=out))
    return EXIT_OK


def cmd_replay(args, cfg: RunConfig) -> int:
    from .simulate import replay_path, write_trace_csv

    _validated(cfg)
    surface = _surface(cfg)
    if surface.theorem != SEVERE_LOW:
        raise ConfigError("replay needs a severe-anxiety, low-tolerance configuration")
    x0 = cfg.options.get("x0", 2.0)
    trace, event = replay_path(surface, args.seed if args.seed is not None else cfg.options.get("seed", 0),
                                  x0=x0, dt=args.dt or cfg.options.get("dt", 1e-3))
    armed = trace[~np.isnan(trace[:, 4])]
    event["trailing_armed_at_time"] = float(armed[0, 0]) if len(armed) else None
    event["s_c"] = surface.ts.s_c
    event["b_star_y_c"] = surface.ts.b_star_yc
    if args.out:
        write_trace_csv(Path(args.out) / "trace.csv", trace)
    _emit(args, "replay.json", _report(cfg, **event))
    return EXIT_OK


def compstats_rows():
    """Solve every comparative-statics configuration, never aborting the batch."""
    rows = []
    for label, name in TABLE_ROWS:
        cfg = load_config(str(shipped_config(name)))
        row = dict(row=label, sigma=cfg.model.sigma, eta=float(cfg.model.jumps.intensities[0]),
                   rho=cfg.prefs.rho, status="ok")
        try:
            ts = solve(cfg.model, cfg.prefs)
            row.update(theorem=ts.theorem, b_low=ts.b_low, b_star_yc=ts.b_star_yc, s_c=ts.s_c,
                       y_hat=ts.y_hat, y_hat_plus_c=ts.y_hat_plus_c)
            if ts.theorem != SEVERE_LOW:
                row["status"] = f"regime {ts.theorem}: no trailing stop"
        except (ModelError, NumericError, ValueError) as exc:
            row["status"] = f"error: {exc}"
        rows.append(row)
    return rows


def cmd_compstats(args, cfg: RunConfig | None) -> int:
    rows = compstats_rows()
    header = ["row", "sigma", "eta", "rho", "theorem", "b_low", "b_star_yc", "s_c", "y_hat", "y_hat_plus_c",
              "status"]
    table = [[r.get(k, "") if r.get(k) is not None else "" for k in header] for r in rows]
    write_csv(Path(args.out) / "compstats.csv" if args.out else "/dev/stdout", header, table)
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "thresholds": cmd_thresholds,
    "region": cmd_region,
    "value": cmd_value,
    "simulate": cmd_simulate,
    "replay": cmd_replay,
    "compstats": cmd_compstats,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drawdown-selling",
                                 description="Optimal selling under drawdown-accelerated discounting.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="config file, or the name of a shipped config (e.g. severe_low_tolerance)")
    ap.add_argument("--out", help="directory for CSV/JSON artifacts")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--grid", type=int, help="points per axis for region grids")
    ap.add_argument("--window", help="xmin,xmax,smin,smax")
    ap.add_argument("--paths", type=int)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--state", action="append", help="x,s (repeatable) for value/simulate")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
        if args.grid is not None and args.grid < 2:
            raise ConfigError("--grid must be at least 2")
        if args.command == "compstats":
            return cmd_compstats(args, None)
        if not args.config:
            raise ConfigError("--config is required")
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ModelError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
