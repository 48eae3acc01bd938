"""Command-line interface.

Subcommands
-----------
bounds     error-bound sweep over an SNR grid -> CSV (+ figure)
mc         Monte Carlo error study -> CSV + JSON (+ figure)
simulate   synthesize a process/homodyne trace or photon-count record
estimate   maximum-likelihood fit of a stored record -> JSON
calibrate  amplitude-calibration factor from X/Y trace directories -> JSON

Flags override keys of an optional JSON/TOML config file (--config); the
environment variable SPECFISHER_SEED is the fallback seed.  Exit codes:
0 success, 2 usage or configuration error, 3 numeric failure,
4 statistically invalid run.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import CalibrationError, NumericError
from .estimator import moment_init, noise_floor_estimate, periodogram, spc_mle, whittle_mle
from .fisher import coherent_state_floor
from .harness import (McConfig, Measurement, bounds_sweep, calibrate_scale,
                      load_traces, run_trials, write_bounds_csv, write_mc_csv,
                      write_mc_json)
from .psdmodel import ParamVector, ou_model, snr_C
from .synth import (add_homodyne_noise, load_photon_record, load_trace,
                    save_photon_record, save_trace, spc_counts, synth_process)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_INVALID_RUN = 4


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ValueError(f"config file {p} does not exist")
    if p.suffix.lower() == ".json":
        with p.open() as fh:
            return json.load(fh)
    if p.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with p.open("rb") as fh:
            return tomllib.load(fh)
    raise ValueError(f"unsupported config extension {p.suffix!r}; use .json or .toml")


def _setting(args, config: dict, key: str, default=None, required: bool = False,
             cast=None):
    """Flag value if given, else config key, else default; error if required."""
    val = getattr(args, key, None)
    if val is None:
        val = config.get(key, default)
    if val is None:
        if required:
            raise ValueError(f"missing required setting --{key.replace('_', '-')}")
        return None
    return cast(val) if cast else val


def _seed(args, config: dict) -> int:
    val = getattr(args, "seed", None)
    if val is None:
        val = config.get("seed")
    if val is None:
        val = os.environ.get("SPECFISHER_SEED")
    return int(val) if val is not None else 0


def _parse_band(spec) -> tuple:
    if isinstance(spec, (list, tuple)):
        lo, hi = spec
    else:
        parts = str(spec).replace(":", ",").split(",")
        if len(parts) != 2:
            raise ValueError(f"band must be 'lo:hi', got {spec!r}")
        lo, hi = parts
    return (float(lo), float(hi))


def _parse_grid(spec) -> list:
    if isinstance(spec, (list, tuple)):
        vals = [float(v) for v in spec]
    else:
        vals = [float(v) for v in str(spec).split(",") if v.strip()]
    if not vals:
        raise ValueError("empty value grid")
    return vals


def _theta(args, config) -> ParamVector:
    t1 = _setting(args, config, "theta1", required=True, cast=float)
    t2 = _setting(args, config, "theta2", required=True, cast=float)
    return ParamVector(t1, t2)


def cmd_bounds(args) -> int:
    config = _load_config(args.config) if args.config else {}
    theta = _theta(args, config)
    T = _setting(args, config, "T", required=True, cast=float)
    grid = sorted(_parse_grid(_setting(args, config, "C", required=True)))
    rows = bounds_sweep(theta, T, grid)
    out = Path(_setting(args, config, "output", default="bounds.csv"))
    write_bounds_csv(out, theta, T, rows)
    print(f"wrote {out} ({len(rows)} rows)")
    if not args.no_plot:
        from .plots import save_bounds_figure
        fig = save_bounds_figure(rows, out.with_suffix(".png"))
        print(f"wrote {fig}")
    return EXIT_OK


def _mc_config(args, config) -> McConfig:
    theta = _theta(args, config)
    kind = _setting(args, config, "kind", default="homodyne")
    C = _setting(args, config, "C", cast=float)
    flux = _setting(args, config, "s_i" if kind == "homodyne" else "photon_flux",
                    cast=float)
    if flux is None:
        if C is None:
            raise ValueError("provide --C or the measurement flux level")
        flux = C * theta.theta2 / (8.0 * theta.theta1)
    meas = Measurement.homodyne(flux) if kind == "homodyne" else Measurement.spc(flux)
    band = _setting(args, config, "band")
    return McConfig(
        theta_true=theta,
        measurement=meas,
        T=_setting(args, config, "T", required=True, cast=float),
        dt=_setting(args, config, "dt", required=True, cast=float),
        trials=_setting(args, config, "trials", required=True, cast=int),
        seed=_seed(args, config),
        band=_parse_band(band) if band is not None else None,
        workers=_setting(args, config, "workers", default=1, cast=int),
    )


def cmd_mc(args) -> int:
    config = _load_config(args.config) if args.config else {}
    cfg = _mc_config(args, config)
    stats = run_trials(cfg)
    out = Path(_setting(args, config, "output", default="mc.csv"))
    write_mc_csv(out, cfg, stats)
    write_mc_json(out.with_suffix(".json"), cfg, stats)
    C = snr_C(cfg.theta_true, cfg.measurement.flux_level)
    print(f"C = {C:.4g}, trials = {cfg.trials}, excluded = {stats.n_excluded}, "
          f"at_bound = {stats.n_at_bound}")
    from .harness import _mc_rows
    for row in _mc_rows(cfg, stats):
        print(f"  param {row['param_index']}: eps_bar = {row['eps_bar']:.4g} "
              f"+- {row['se']:.4g} | homodyne limit {row['bound_homodyne']:.4g}, "
              f"quantum limit {row['bound_quantum']:.4g} (normalized units)")
    print(f"wrote {out} and {out.with_suffix('.json')}")
    if not args.no_plot:
        from .plots import save_mc_figure
        fig = save_mc_figure(cfg, stats, out.with_suffix(".png"))
        print(f"wrote {fig}")
    if not stats.valid:
        print(f"run invalid: {stats.n_excluded}/{cfg.trials} trials excluded",
              file=sys.stderr)
        return EXIT_INVALID_RUN
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _load_config(args.config) if args.config else {}
    theta = _theta(args, config)
    T = _setting(args, config, "T", required=True, cast=float)
    seed = _seed(args, config)
    kind = _setting(args, config, "kind", default="process")
    out = Path(_setting(args, config, "output", required=True))
    model = ou_model()
    if kind in ("process", "homodyne"):
        dt = _setting(args, config, "dt", required=True, cast=float)
        trace = synth_process(model, theta, T, dt, (seed, 0, 0))
        if kind == "homodyne":
            s_eta = _setting(args, config, "s_eta", cast=float)
            if s_eta is None:
                s_i = _setting(args, config, "s_i", required=True, cast=float)
                s_eta = coherent_state_floor(s_i)
            trace = add_homodyne_noise(trace, s_eta, (seed, 0, 1))
        save_trace(trace, out)
    elif kind == "spc":
        flux = _setting(args, config, "photon_flux", required=True, cast=float)
        m_max = _setting(args, config, "m_max", cast=int)
        if m_max is None:
            band = _setting(args, config, "band")
            hi = _parse_band(band)[1] if band is not None else 10.15 * theta.theta2
            m_max = int(np.floor(hi * T / (2.0 * np.pi)))
        rec = spc_counts(model, theta, flux, T, m_max, (seed, 0, 0))
        save_photon_record(rec, out)
    else:
        raise ValueError(f"unknown simulate kind {kind!r}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    config = _load_config(args.config) if args.config else {}
    kind = _setting(args, config, "kind", default="homodyne")
    inp = Path(_setting(args, config, "input", required=True))
    out = _setting(args, config, "output")
    model = ou_model()
    t1_init = _setting(args, config, "init_theta1", cast=float)
    t2_init = _setting(args, config, "init_theta2", cast=float)

    if kind == "homodyne":
        trace = load_trace(inp)
        p = periodogram(trace)
        band = _setting(args, config, "band")
        band = _parse_band(band) if band is not None else (0.0, float(p.omega[-1]))
        s_eta = _setting(args, config, "s_eta", cast=float)
        floor_band = _setting(args, config, "floor_band")
        if s_eta is None and floor_band is not None:
            s_eta = noise_floor_estimate(p, _parse_band(floor_band))
        if s_eta is None:
            s_eta = 0.0
        if t1_init is None or t2_init is None:
            guess = moment_init(p, s_eta, band)
            t1_init = t1_init if t1_init is not None else guess.theta1
            t2_init = t2_init if t2_init is not None else guess.theta2
        est = whittle_mle(p, model, s_eta, band, ParamVector(t1_init, t2_init))
    elif kind == "spc":
        flux = _setting(args, config, "photon_flux", required=True, cast=float)
        rec = load_photon_record(inp, flux)
        if t1_init is None or t2_init is None:
            raise ValueError("spc estimation requires --init-theta1 and --init-theta2")
        est = spc_mle(rec, model, init=ParamVector(t1_init, t2_init))
    else:
        raise ValueError(f"unknown estimate kind {kind!r}")

    payload = {
        "theta1": est.theta_hat.theta1,
        "theta2": est.theta_hat.theta2,
        "loglik": est.loglik,
        "converged": est.converged,
        "n_evals": est.n_evals,
        "band": list(est.band),
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = _load_config(args.config) if args.config else {}
    x_dir = _setting(args, config, "x_dir", required=True)
    y_dir = _setting(args, config, "y_dir", required=True)
    s_eta = _setting(args, config, "s_eta", default=0.0, cast=float)
    band = _setting(args, config, "band")
    factor = calibrate_scale(load_traces(x_dir), load_traces(y_dir),
                             s_eta=s_eta,
                             band=_parse_band(band) if band is not None else None)
    payload = {"scale_factor": factor}
    out = _setting(args, config, "output")
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specfisher",
        description="Fisher-information limits and Monte Carlo verification "
                    "for spectrum-parameter estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON or TOML config file; flags take precedence")
        p.add_argument("--output", "-o", help="output path")
        p.add_argument("--seed", type=int, help="RNG seed (fallback: SPECFISHER_SEED, then 0)")

    p = sub.add_parser("bounds", help="error-bound sweep over an SNR grid")
    common(p)
    p.add_argument("--theta1", type=float, help="process variance, rad^2")
    p.add_argument("--theta2", type=float, help="process bandwidth, rad/s")
    p.add_argument("--T", type=float, help="observation time, s")
    p.add_argument("--C", help="comma-separated SNR values, e.g. 23.5,64.8")
    p.add_argument("--no-plot", action="store_true", help="skip the figure")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("mc", help="Monte Carlo error study")
    common(p)
    p.add_argument("--theta1", type=float)
    p.add_argument("--theta2", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--kind", choices=["homodyne", "spc"])
    p.add_argument("--C", type=float, help="SNR value; sets the flux level")
    p.add_argument("--s-i", dest="s_i", type=float, help="photon-flux PSD, 1/s")
    p.add_argument("--photon-flux", dest="photon_flux", type=float)
    p.add_argument("--band", help="analysis band 'lo:hi' in rad/s")
    p.add_argument("--workers", type=int, help="max concurrent trials")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("simulate", help="synthesize a record")
    common(p)
    p.add_argument("--kind", choices=["process", "homodyne", "spc"])
    p.add_argument("--theta1", type=float)
    p.add_argument("--theta2", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--s-eta", dest="s_eta", type=float, help="homodyne noise floor")
    p.add_argument("--s-i", dest="s_i", type=float,
                   help="photon-flux PSD; floor defaults to 1/(4 s_i)")
    p.add_argument("--photon-flux", dest="photon_flux", type=float)
    p.add_argument("--m-max", dest="m_max", type=int, help="number of sidebands")
    p.add_argument("--band", help="band 'lo:hi' used to choose m_max")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="fit a stored record")
    common(p)
    p.add_argument("--kind", choices=["homodyne", "spc"])
    p.add_argument("--input", help="trace or photon-record CSV")
    p.add_argument("--s-eta", dest="s_eta", type=float)
    p.add_argument("--floor-band", dest="floor_band",
                   help="high band 'lo:hi' for estimating the noise floor")
    p.add_argument("--photon-flux", dest="photon_flux", type=float)
    p.add_argument("--band", help="analysis band 'lo:hi'")
    p.add_argument("--init-theta1", dest="init_theta1", type=float)
    p.add_argument("--init-theta2", dest="init_theta2", type=float)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("calibrate", help="amplitude calibration from X/Y traces")
    common(p)
    p.add_argument("--x-dir", dest="x_dir", help="directory of reference traces")
    p.add_argument("--y-dir", dest="y_dir", help="directory of measured traces")
    p.add_argument("--s-eta", dest="s_eta", type=float,
                   help="noise floor of the reference traces (default 0)")
    p.add_argument("--band", help="analysis band 'lo:hi'")
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, CalibrationError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
