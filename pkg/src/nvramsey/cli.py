"""
Command-line front end.

    nvramsey fringe         [--config F] [--jobs N] [--out DIR]
    nvramsey fidelity-grid  [--config F] [--jobs N] [--out DIR]
    nvramsey ramsey         [--config F] [--seed S] [--out DIR]
    nvramsey psd INPUT      [--config F] [--out DIR]
    nvramsey synth          [--config F] [--seed S] [--out DIR]

The config file is JSON with nested sections (see ``DEFAULTS``).  Values are
resolved as built-in defaults, then the config file, then ``--set a.b=value``
flags (value parsed as JSON), later sources winning.
Unknown keys are rejected.  Every output table is UTF-8, tab separated, and
starts with ``#`` header lines holding the tool version, the resolved config
and truncation diagnostics.

Exit codes: 0 success, 2 configuration error, 3 numerical guard (truncation,
degeneracy, dimension), 4 I/O or parse error.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import copy
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, perturb, ramsey, trapdata
from .evolver import DimensionError
from .hilbert import TruncationError
from .model import CouplingSet, PhysicalParams, couplings_from_physical
from .perturb import DegeneracyError

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 2, 3, 4

_COUPLINGS = {
    "lambda": 0.05, "dlambda": 0.1, "dlambda_x": 0.0, "dlambda_y": 0.0,
    "omega_x_ratio": 10.0, "omega_y_ratio": 10.0, "D": 0.0,
    "c_x": 0.0, "c_y": 0.0,
}
_SEQUENCE = {
    "model": "exact1d", "motion": "vacuum", "beta": [0.0, 0.0], "nbar": 0.0,
    "cycles": 1, "pulse": "ideal", "rabi": None, "n_levels": None, "n_levels_xy": 8,
    "engine": "perturb", "thermal_samples": 256, "thermal_sampling": "p_sample",
}
_PHYSICAL = {
    "omega_x": None, "omega_y": None, "omega_z": None, "mass": None, "radius": None,
    "density": 3500.0, "theta": None, "theta_x": None, "theta_y": None,
    "magnet_radius": 40e-6, "magnetization": 1.5e6, "magnet_distance": 120e-6,
    "D": None, "g_nv": None, "c_x": 0.0, "c_y": 0.0, "c_z": 1.0,
}

DEFAULTS = {
    "fringe": {
        # dlambda is quoted at cos(theta) = 1; K = 8 lambda dlambda t0
        "couplings": {"lambda": 0.01, "K": 10.0, "D": 2.5},
        "sequence": {"model": "misaligned", "engine": "perturb", "n_levels": None},
        "grid": {"theta_min": float(np.pi / 2 - np.pi / 20), "theta_max": float(np.pi / 2),
                 "theta_points": 60, "c_x": [0.0, 0.25, 0.5, 0.75, 1.0]},
        "output": {"prefix": "fringe"},
    },
    "fidelity-grid": {
        "couplings": {"dlambda": 0.1, "D": 0.0},
        "grid": {"lambda": [0.025, 0.05, 0.1], "gamma": [0.1, 0.2, 0.32, 0.4],
                 "pairing": "diagonal", "beta": [0.0, 0.0]},
        "truncation": {"n_xy": 8, "n_z": 24, "convergence": True},
        "output": {"prefix": "fidelity"},
    },
    "ramsey": {
        "physical": None,
        "couplings": dict(_COUPLINGS),
        "sequence": dict(_SEQUENCE),
        "output": {"prefix": "ramsey"},
    },
    "psd": {
        "psd": {"segment_length": 16384, "overlap": 0.5, "window": "hann", "n_peaks": 3},
        "output": {"prefix": "psd"},
    },
    "synth": {
        "synth": {"freqs_hz": [60e3, 65e3, 11e3], "damping_hz": [300.0, 300.0, 60.0],
                  "temperature_scale": 1.0, "sample_rate": 500e3, "duration": 1.0},
        "output": {"prefix": "trace"},
    },
}

# sections whose keys are open-ended dictionaries of couplings
_OPEN_SECTIONS = {("fringe", "couplings"): set(_COUPLINGS) | {"K"},
                  ("fidelity-grid", "couplings"): set(_COUPLINGS),
                  ("fringe", "sequence"): set(_SEQUENCE),
                  ("ramsey", "physical"): set(_PHYSICAL)}


class ConfigError(ValueError):
    pass


def _merge(base, override, command, path=()):
    out = copy.deepcopy(base)
    for key, val in override.items():
        here = path + (key,)
        allowed = _OPEN_SECTIONS.get((command, *path)) if len(path) == 1 else None
        if key not in out and (allowed is None or key not in allowed):
            raise ConfigError(f"unknown config key {'.'.join(here)!r}")
        cur = out.get(key)
        if isinstance(val, dict) and (isinstance(cur, dict) or (command, key) in _OPEN_SECTIONS):
            out[key] = _merge(cur or {}, val, command, here)
        else:
            out[key] = val
    return out


def resolve_config(command, path=None, overrides=None) -> dict:
    cfg = copy.deepcopy(DEFAULTS[command])
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        cfg = _merge(cfg, user, command)
    if overrides:
        cfg = _merge(cfg, overrides, command)
    return cfg


def _complex(v, where):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(f"{where} must be a number or [re, im]")


def couplings_from_config(cfg) -> CouplingSet:
    if cfg.get("physical"):
        phys = {k: v for k, v in cfg["physical"].items() if v is not None}
        try:
            c = couplings_from_physical(PhysicalParams(**phys))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"physical: {exc}") from None
        over = {k: v for k, v in cfg.get("couplings", {}).items()
                if k in ("D",) and v != _COUPLINGS.get(k)}
        return c.replace(**over) if over else c
    cp = dict(cfg["couplings"])
    try:
        cx, cy = cp.pop("c_x", 0.0), cp.pop("c_y", 0.0)
        c = CouplingSet(lambda_=cp.pop("lambda"), **cp)
        return c.with_orientation(cx, cy)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"couplings: {exc}") from None


def _sequence(cfg_seq) -> ramsey.SequenceSpec:
    s = dict(cfg_seq)
    extra = {k: s.pop(k) for k in ("thermal_samples", "thermal_sampling") if k in s}
    s["beta"] = _complex(s.get("beta", 0.0), "sequence.beta")
    try:
        return ramsey.SequenceSpec(**s), extra
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sequence: {exc}") from None


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12e}"
    return str(x)


def write_table(path: Path, header: dict, columns, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# nvramsey {__version__}\n")
        for key, val in header.items():
            fh.write(f"# {key}: {json.dumps(val, sort_keys=True)}\n")
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")
    return path


def cmd_fringe(cfg, out: Path, jobs=1):
    cp = dict(cfg["couplings"])
    lam = cp.pop("lambda")
    k = cp.pop("K", None)
    if k is not None:
        if "dlambda" in cp:
            raise ConfigError("couplings: give K or dlambda, not both (set couplings.K to null)")
        cp["dlambda"] = k / (8 * lam * 2 * np.pi)
    cp.pop("c_x", None), cp.pop("c_y", None)
    try:
        c = CouplingSet(lambda_=lam, **cp)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"couplings: {exc}") from None
    spec, _ = _sequence(cfg["sequence"])
    g = cfg["grid"]
    if int(g["theta_points"]) < 1 or not g["c_x"]:
        raise ConfigError("grid: theta_points and c_x must be non-empty")
    theta = np.linspace(g["theta_min"], g["theta_max"], int(g["theta_points"]))
    scan = ramsey.fringe_scan(theta, g["c_x"], spec, c, jobs=jobs)
    header = {"command": "fringe", "config": cfg,
              "truncation": {"n_levels": spec.n_levels or "auto", "model": scan.model}}
    rows = [(th, cx, scan.p0[i, j]) for i, cx in enumerate(scan.cx_grid)
            for j, th in enumerate(scan.theta_grid)]
    prefix = cfg["output"]["prefix"]
    a = write_table(out / f"{prefix}.tsv", header, ("theta_rad", "c_x", "p0"), rows)
    b = write_table(out / f"{prefix}_visibility.tsv", header, ("c_x", "visibility"),
                    zip(scan.cx_grid, scan.visibility_per_row))
    return [a, b]


def _fidelity_point(args):
    lam, gx, gy, beta, specs, couplings, convergence = args
    kw = dict(dlambda=couplings.get("dlambda", 0.1), D=couplings.get("D", 0.0),
              dlambda_x=couplings.get("dlambda_x", 0.0), dlambda_y=couplings.get("dlambda_y", 0.0))
    f = perturb.perturbation_fidelity(lam, gx, gy, beta, specs, **kw)
    if not convergence:
        return f, float("nan")
    f2 = perturb.perturbation_fidelity(lam, gx, gy, beta, tuple(2 * n for n in specs), **kw)
    return f, abs(f2 - f)


def cmd_fidelity_grid(cfg, out: Path, jobs=1):
    g, tr = cfg["grid"], cfg["truncation"]
    beta = _complex(g["beta"], "grid.beta")
    specs = (int(tr["n_xy"]), int(tr["n_xy"]), int(tr["n_z"]))
    if g["pairing"] == "diagonal":
        gammas = [(x, x) for x in g["gamma"]]
    elif g["pairing"] == "product":
        gammas = [(x, y) for x in g["gamma"] for y in g["gamma"]]
    else:
        raise ConfigError("grid.pairing must be 'diagonal' or 'product'")
    extra = set(cfg["couplings"]) - {"dlambda", "D", "dlambda_x", "dlambda_y"}
    if extra:
        raise ConfigError(f"couplings: unsupported keys {sorted(extra)} for fidelity-grid")
    tasks = [(lam, gx, gy, beta, specs, cfg["couplings"], bool(tr["convergence"]))
             for lam in g["lambda"] for gx, gy in gammas]
    if jobs > 1:
        with cf.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fidelity_point, tasks))
    else:
        results = [_fidelity_point(t) for t in tasks]
    rows = [(t[0], t[1], t[2], f, d) for t, (f, d) in zip(tasks, results)]
    header = {"command": "fidelity-grid", "config": cfg,
              "truncation": {"n_xyz": list(specs), "convergence_check": "doubled n_xyz"}}
    path = write_table(out / f"{cfg['output']['prefix']}.tsv", header,
                       ("lambda", "gamma_x", "gamma_y", "fidelity", "convergence_delta"), rows)
    return [path]


def cmd_ramsey(cfg, out: Path, seed=0):
    c = couplings_from_config(cfg)
    spec, extra = _sequence(cfg["sequence"])
    if spec.motion == "thermal":
        sampling = extra.get("thermal_sampling", "p_sample")
        p0, spread = ramsey.thermal_p0(spec, c, sampling=sampling,
                                       count=int(extra.get("thermal_samples", 256)), seed=seed)
        phase = float("nan")
    else:
        res = ramsey.run_sequence(spec, c)
        p0, spread = res.p0, 0.0
        phase = ramsey.spin_phase(res.hold_state) if res.hold_state is not None else float("nan")
    from .analytic import gravitational_phase, ramsey_population
    dphi = gravitational_phase(c, spec.t_hold)
    header = {"command": "ramsey", "config": cfg, "seed": seed,
              "couplings": {"lambda": c.lambda_, "dlambda": c.dlambda, "D": c.D,
                            "gamma_x": c.gamma_x, "gamma_y": c.gamma_y,
                            **{k: v for k, v in c.diagnostics.items()}},
              "truncation": {"n_levels": spec.n_levels or ramsey.auto_levels(c, spec.initial_beta)}}
    path = write_table(out / f"{cfg['output']['prefix']}.tsv", header,
                       ("p0", "p0_spread", "spin_phase", "analytic_phase", "analytic_p0"),
                       [(p0, spread, phase, dphi, ramsey_population(dphi))])
    return [path]


def cmd_psd(cfg, out: Path, input_path):
    ts = trapdata.read_series(input_path)
    p = cfg["psd"]
    seg = min(int(p["segment_length"]), ts.samples.size)
    try:
        rec = trapdata.psd(ts, seg, float(p["overlap"]), p["window"])
    except ValueError as exc:
        raise ConfigError(f"psd: {exc}") from None
    peaks = trapdata.fit_peaks(rec, int(p["n_peaks"]))
    digest = hashlib.sha256(Path(input_path).read_bytes()).hexdigest()
    header = {"command": "psd", "config": cfg, "input": str(input_path), "input_sha256": digest,
              "sample_rate": ts.sample_rate, "segments": rec.segments}
    prefix = cfg["output"]["prefix"]
    a = write_table(out / f"{prefix}.tsv", header, ("freq_hz", "power"), zip(rec.freqs, rec.power))
    b = write_table(out / f"{prefix}_peaks.tsv", header,
                    ("center_hz", "width_hz", "amplitude", "converged"),
                    [(pk.center, pk.width, pk.amplitude, int(pk.converged)) for pk in peaks])
    return [a, b]


def cmd_synth(cfg, out: Path, seed=0):
    s = cfg["synth"]
    try:
        ts = trapdata.synthesize_trace(s["freqs_hz"], s["damping_hz"], s["temperature_scale"],
                                       s["sample_rate"], s["duration"], seed=seed)
    except ValueError as exc:
        raise ConfigError(f"synth: {exc}") from None
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg['output']['prefix']}.txt"
    trapdata.write_series(ts, path, [f"nvramsey {__version__}",
                                     f"config: {json.dumps(cfg, sort_keys=True)}",
                                     f"seed: {seed}"])
    return [path]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvramsey", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("fringe", "fidelity-grid", "ramsey", "psd", "synth"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", type=Path, default=Path("."))
        p.add_argument("--set", action="append", default=[], metavar="KEY.PATH=JSON",
                       help="override one config key, e.g. grid.theta_points=50")
        if name == "psd":
            p.add_argument("input", type=Path)
    return parser


def parse_overrides(items) -> dict:
    """``a.b=value`` strings into a nested dict; values are JSON, else plain strings."""
    out: dict = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY.PATH=VALUE, got {item!r}")
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = val
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args.config, parse_overrides(args.set))
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.command == "fringe":
            paths = cmd_fringe(cfg, args.out, args.jobs)
        elif args.command == "fidelity-grid":
            paths = cmd_fidelity_grid(cfg, args.out, args.jobs)
        elif args.command == "ramsey":
            paths = cmd_ramsey(cfg, args.out, args.seed)
        elif args.command == "psd":
            paths = cmd_psd(cfg, args.out, args.input)
        else:
            paths = cmd_synth(cfg, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TruncationError, DegeneracyError, DimensionError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, trapdata.ParseError, trapdata.EmptyInput) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
