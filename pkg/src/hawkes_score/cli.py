"""Command-line entry points: simulate, fit, score-test, mc-null, mc-power.

Settings resolve in order: explicit flag, then ``--config`` file, then the
built-in default. Errors print one JSON object on stderr; exit code 1 means
bad input or configuration, 2 means a numeric or convergence failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import HawkesScoreError, NumericError, ValidationError
from .harness import DEFAULT_LEVELS, McConfig, run_local_power, run_null_calibration
from .io import RunArtifact, provenance, read_config, read_events, write_csv, write_events, write_run_log
from .likelihood import FitOptions, fit_qmle
from .marks import MarkModel
from .model import BoostSpec, HawkesParams
from .score import run_score_test, score_test_from_fit
from .simulation import SimConfig, simulate_detailed
from .stats import chi2_quantile, noncentral_chi2_cdf

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2


def _floats(text) -> tuple:
    return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v != "")


def _canon(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_canon(v) for v in value)
    return str(value)


# key: (parser, default); every key is also a flag with '-' for '_'
SETTINGS = {
    "eta": (float, 0.5),
    "branch": (float, 0.5),
    "alpha": (float, 1.0),
    "T": (float, 2000.0),
    "burn_in": (float, None),
    "seed": (int, 0),
    "boost": (str, "linear"),
    "psi": (_floats, None),
    "gamma": (_floats, None),
    "ncp": (float, 4.0),
    "mark_model": (str, "iid-gauss"),
    "mark_dim": (int, 1),
    "initial_rule": (str, "baseline"),
    "replicates": (int, 1000),
    "workers": (int, 1),
    "levels": (_floats, DEFAULT_LEVELS),
    "horizon": (float, None),
    "events": (str, None),
    "format": (str, None),
    "hist_bins": (int, 20),
    "curve_scales": (_floats, (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)),
    "omega_from": (str, None),
}

# settings each subcommand echoes into its provenance record; worker count
# never changes results, so it stays out to keep reports byte-identical
USED = {
    "simulate": ("eta", "branch", "alpha", "T", "burn_in", "seed", "boost", "psi", "mark_model", "mark_dim",
                 "initial_rule"),
    "fit": ("events", "horizon", "format", "initial_rule"),
    "score-test": ("events", "horizon", "format", "boost", "initial_rule"),
    "mc-null": ("eta", "branch", "alpha", "T", "burn_in", "seed", "boost", "mark_model", "mark_dim",
                "initial_rule", "replicates", "levels", "hist_bins"),
    "mc-power": ("eta", "branch", "alpha", "T", "burn_in", "seed", "boost", "mark_model", "mark_dim",
                 "initial_rule", "replicates", "levels", "hist_bins", "gamma", "ncp",
                 "curve_scales", "omega_from"),
}

DEFAULT_OUT = {"simulate": "events.csv", "fit": "fit.json", "score-test": "score_test.json",
               "mc-null": "mc_null.json", "mc-power": "mc_power.json"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _add(p, *names):
    for key in names:
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar=key.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hawkes-score", description="Score test for mark effects in Hawkes processes.")
    parser.add_argument("--version", action="version", version=f"hawkes-score {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    model_keys = ("eta", "branch", "alpha", "T", "burn_in", "seed", "boost", "mark_model", "mark_dim",
                  "initial_rule")
    mc_keys = ("replicates", "workers", "levels", "hist_bins")

    p = sub.add_parser("simulate", help="simulate a marked Hawkes stream to CSV")
    _add(p, *model_keys, "psi")
    p = sub.add_parser("fit", help="fit the unmarked model by quasi-maximum likelihood")
    _add(p, "events", "horizon", "format", "initial_rule")
    p = sub.add_parser("score-test", help="test whether marks affect the intensity")
    _add(p, "events", "horizon", "format", "boost", "initial_rule")
    p.add_argument("--qq-out", dest="qq_out", default=None, metavar="PATH",
                   help="CSV of (empirical quantile, chi-squared quantile) pairs")
    p = sub.add_parser("mc-null", help="size calibration under the null")
    _add(p, *model_keys, *mc_keys)
    p = sub.add_parser("mc-power", help="power under local alternatives psi = gamma / sqrt(T)")
    _add(p, *model_keys, *mc_keys, "gamma", "ncp", "curve_scales", "omega_from")
    for p in sub.choices.values():
        p.add_argument("--config", default=None, metavar="PATH", help="flat key=value settings file")
        p.add_argument("--out", default=None, metavar="PATH")
        p.add_argument("--run-log", dest="run_log", action="store_true",
                       help="also write <out>.run.json with a wall-clock timestamp")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over defaults and parse each value."""
    file_cfg = read_config(args.config) if args.config else {}
    unknown = sorted(set(file_cfg) - set(SETTINGS) - {"out", "qq_out"})
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")
    out = {}
    for key, (conv, default) in SETTINGS.items():
        raw = getattr(args, key, None)
        if raw is None:
            raw = file_cfg.get(key)
        if raw is None or raw == "":
            out[key] = default
            continue
        try:
            out[key] = conv(raw)
        except ValueError:
            raise ValidationError(f"bad value for {key}: {raw!r}") from None
    out["out"] = args.out or file_cfg.get("out") or DEFAULT_OUT[args.command]
    out["qq_out"] = getattr(args, "qq_out", None) or file_cfg.get("qq_out")
    return out


def _echo(command: str, cfg: dict) -> dict:
    return {k: _canon(cfg[k]) for k in USED[command] if cfg[k] is not None}


def _sim_config(cfg: dict, psi=None) -> SimConfig:
    dim = cfg["mark_dim"]
    spec = BoostSpec.parse(cfg["boost"], mark_dim=dim)
    return SimConfig(
        params=HawkesParams(cfg["eta"], cfg["branch"], cfg["alpha"]),
        horizon=cfg["T"], boost=spec, psi=psi if psi is not None else (0.0,) * spec.psi_dim,
        mark_model=MarkModel.parse(cfg["mark_model"], dim=dim), burn_in=cfg["burn_in"], seed=cfg["seed"],
        initial_rule=cfg["initial_rule"],
    )


def _mc_config(cfg: dict) -> McConfig:
    sim = _sim_config(cfg)
    return McConfig(sim=sim, replicates=cfg["replicates"], boost_under_test=sim.boost, gamma=cfg["gamma"],
                    nominal_levels=cfg["levels"], master_seed=cfg["seed"], workers=cfg["workers"],
                    fit_options=FitOptions(initial_rule=cfg["initial_rule"]))


def _sibling(out: str, suffix: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + suffix)


def _load(cfg):
    if not cfg["events"]:
        raise ValidationError("--events is required")
    return read_events(cfg["events"], cfg["format"], cfg["horizon"])


def cmd_simulate(cfg: dict) -> dict:
    sim = _sim_config(cfg, cfg["psi"])
    stream, diag = simulate_detailed(sim)
    write_events(stream, cfg["out"], "csv")
    prov_path = _sibling(cfg["out"], ".provenance.json")
    art = RunArtifact("SimOutput", {
        "events_file": Path(cfg["out"]).name, "n_events": stream.n_events, "horizon": stream.horizon,
        "mark_dim": stream.mark_dim, "intensity_at_zero": diag.intensity_at_zero,
        "candidates": diag.candidates, "max_bound_ratio": diag.max_bound_ratio, "mu_h": diag.mu_h,
    }, provenance("simulate", _echo("simulate", cfg), cfg["seed"]))
    art.write(prov_path)
    return {"events": cfg["out"], "provenance": str(prov_path), "n_events": stream.n_events}


class _Unconverged(NumericError):
    code = "convergence"

    def __init__(self, termination, out):
        super().__init__(f"fit did not converge ({termination}); result written to {out}")


def cmd_fit(cfg: dict) -> dict:
    stream = _load(cfg)
    fit = fit_qmle(stream, opts=FitOptions(initial_rule=cfg["initial_rule"]))
    art = RunArtifact("FitOutput", fit.as_dict(), provenance("fit", _echo("fit", cfg)))
    art.write(cfg["out"])
    if not fit.converged:
        raise _Unconverged(fit.termination, cfg["out"])
    return {"out": cfg["out"], "converged": fit.converged, "loglik": fit.loglik}


def screening_statistics(stream, spec: BoostSpec, fit) -> list:
    """One statistic per mark column (each column tested alone), or the
    single joint statistic when the family uses a scalar mark."""
    if stream.mark_dim == 1 or spec.family == "poly":
        return [score_test_from_fit(stream, spec, fit).statistic]
    out = []
    col_spec = BoostSpec(spec.family, mark_dim=1)
    for k in range(stream.mark_dim):
        sub = stream.with_marks(stream.marks[:, k:k + 1])
        out.append(score_test_from_fit(sub, col_spec, fit).statistic)
    return out


def qq_pairs(statistics, df: int) -> list:
    q = np.sort(np.asarray(statistics, dtype=np.float64))
    n = q.size
    return [(float(v), chi2_quantile((i + 0.5) / n, df)) for i, v in enumerate(q)]


def cmd_score_test(cfg: dict) -> dict:
    stream = _load(cfg)
    spec = BoostSpec.parse(cfg["boost"], mark_dim=stream.mark_dim)
    res = run_score_test(stream, spec, FitOptions(initial_rule=cfg["initial_rule"]))
    RunArtifact("ScoreTestOutput", res.as_dict(), provenance("score-test", _echo("score-test", cfg))).write(cfg["out"])
    if cfg["qq_out"]:
        df = 1 if stream.mark_dim > 1 and spec.family != "poly" else spec.psi_dim
        write_csv(cfg["qq_out"], ["empirical_quantile", "chi2_quantile"],
                  qq_pairs(screening_statistics(stream, spec, res.fit), df))
    return {"out": cfg["out"], "statistic": res.statistic, "p_value": res.p_value}


def _plot_data(report, cfg: dict) -> list:
    written = []
    p = report.p_values
    if p.size:
        bins = cfg["hist_bins"]
        counts, edges = np.histogram(p, bins=bins, range=(0.0, 1.0))
        rows = [(float(edges[i]), float(edges[i + 1]), int(counts[i]), float(counts[i] * bins / p.size))
                for i in range(bins)]
        path = _sibling(cfg["out"], ".pvalue_hist.csv")
        write_csv(path, ["bin_lo", "bin_hi", "count", "density"], rows)
        written.append(str(path))
        path = _sibling(cfg["out"], ".qq.csv")
        write_csv(path, ["empirical_quantile", "chi2_quantile"], qq_pairs(report.statistics, report.df))
        written.append(str(path))
    return written


def _write_report(command: str, report, cfg: dict) -> dict:
    RunArtifact("McReportOutput", report.as_dict(), provenance(command, _echo(command, cfg), cfg["seed"])).write(
        cfg["out"])
    files = _plot_data(report, cfg)
    return {"out": cfg["out"], "plot_data": files, "valid": report.valid,
            "empirical_rate": {repr(a): report.rejection_rates[a] for a in report.levels}}


def cmd_mc_null(cfg: dict) -> dict:
    return _write_report("mc-null", run_null_calibration(_mc_config(cfg)), cfg)


def cmd_mc_power(cfg: dict) -> dict:
    mc = _mc_config(cfg)
    omega = None
    if cfg["omega_from"]:
        doc = RunArtifact.read(cfg["omega_from"]).payload
        omega = doc.get("omega_hat")
        if omega is None:
            raise ValidationError(f"{cfg['omega_from']} has no omega_hat")
    report = run_local_power(mc, omega=omega, target_ncp=None if mc.gamma else cfg["ncp"])
    summary = _write_report("mc-power", report, cfg)
    gamma = np.asarray(report.gamma)
    om = np.asarray(report.omega_reference)
    rows = []
    for scale in cfg["curve_scales"]:
        g = scale * gamma
        ncp = float(g @ om @ g)
        for a in report.levels:
            pred = 1.0 - noncentral_chi2_cdf(chi2_quantile(1.0 - a, report.df), report.df, ncp)
            emp = report.rejection_rates[a] if math.isclose(scale, 1.0) else None
            rows.append((float(scale), float(np.linalg.norm(g)), ncp, float(a), float(pred), emp))
    path = _sibling(cfg["out"], ".power_curve.csv")
    write_csv(path, ["scale", "gamma_norm", "ncp", "level", "predicted_power", "empirical_power"], rows)
    summary["plot_data"].append(str(path))
    return summary


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "score-test": cmd_score_test,
            "mc-null": cmd_mc_null, "mc-power": cmd_mc_power}


def _fail(exc: Exception, code: int) -> int:
    err = {"error": getattr(exc, "code", type(exc).__name__), "type": type(exc).__name__,
           "message": str(exc), "exit_code": code}
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
        summary = COMMANDS[args.command](cfg)
        if args.run_log:
            write_run_log(cfg["out"], args.command)
    except NumericError as exc:
        return _fail(exc, EXIT_NUMERIC)
    except (ValidationError, HawkesScoreError) as exc:
        return _fail(exc, EXIT_VALIDATION)
    except (ValueError, OSError) as exc:
        return _fail(exc, EXIT_VALIDATION)
    except ArithmeticError as exc:
        return _fail(exc, EXIT_NUMERIC)
    print(json.dumps(summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
