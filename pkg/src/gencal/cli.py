"""Command-line interface: simulate data, assess predictions, run the demo.

Options resolve in three layers: built-in defaults, then a flat
``key = value`` config file (``--config``), then explicit flags.  Every
run writes a ``run-manifest.json`` with the resolved configuration, which
is sufficient to reproduce the run byte for byte.
"""

import argparse
import json
import sys
from pathlib import Path

from gencal import __version__
from gencal._kernels import KERNEL_FLAVOR
from gencal.boosting import (BoostConfig, boost_fit, boost_predict,
                             cv_grid_search)
from gencal.calibration import AssessOptions, assess, make_prediction_set
from gencal.errors import ConfigError, DataError, FitError, GencalError
from gencal.families import canonical_link, get_family, get_link
from gencal.models import (MODEL_IDS, fit_model, predict_validation,
                           true_lambda_predictions)
from gencal.report import PlotSpec, export_summary, render_svg
from gencal.rng import Rng
from gencal.simdata import DEFAULT_SEED, SimConfig, dataset_to_csv, generate

REDUCED_T_GRID = (100, 200, 400, 800, 1600, 3200)
REDUCED_D_GRID = (1, 2, 3, 5)
FULL_T_GRID = tuple(range(100, 5001, 100))
FULL_D_GRID = tuple(range(1, 11))

GBM2_CONFIG = {"n_trees": 5000, "depth": 5}
GBM3_CONFIG = {"n_trees": 200, "depth": 1}

def _parse_beta(text):
    vals = tuple(float(v) for v in text.split(","))
    if len(vals) != 6:
        raise ValueError("beta needs 6 comma-separated values")
    return vals


def _parse_sigma(text):
    rows = tuple(tuple(float(v) for v in row.split(",")) for row in text.split(";"))
    if len(rows) != 5 or any(len(r) != 5 for r in rows):
        raise ValueError("sigma needs 5 semicolon-separated rows of 5 values")
    return rows


_DEFAULTS = {
    "seed": DEFAULT_SEED,
    "out_dir": "gencal-out",
    "family": "poisson",
    "link": None,
    "span": 0.75,
    "degree": 2,
    "bins": 10,
    "grid_points": 101,
    "n_population": 1_000_000,
    "n_train": 5000,
    "n_valid": 1000,
    "beta": None,   # falls back to the built-in coefficient vector
    "sigma": None,  # falls back to the built-in covariance matrix
    "skip_gbm": False,
    "full_grid": False,
    "jobs": 1,
}

_CASTS = {
    "seed": int, "span": float, "degree": int, "bins": int, "grid_points": int,
    "n_population": int, "n_train": int, "n_valid": int, "jobs": int,
    "beta": _parse_beta, "sigma": _parse_sigma,
    "skip_gbm": lambda s: s.lower() in ("1", "true", "yes"),
    "full_grid": lambda s: s.lower() in ("1", "true", "yes"),
}


def _log(msg):
    print(f"[gencal] {msg}", file=sys.stderr)


def _read_config_file(path):
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown option '{key}'")
        cast = _CASTS.get(key, str)
        try:
            values[key] = cast(value.strip())
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {value.strip()!r}") from None
    return values


def _resolve(args, keys):
    """defaults <- config file <- explicit flags, restricted to keys."""
    resolved = {k: _DEFAULTS[k] for k in keys}
    if getattr(args, "config", None):
        from_file = _read_config_file(args.config)
        for k, v in from_file.items():
            if k in resolved:
                resolved[k] = v
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            resolved[k] = v
    return resolved


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _write_manifest(out_dir, command, resolved):
    manifest = {
        "command": command,
        "package_version": __version__,
        "kernel": KERNEL_FLAVOR,
        "options": {k: resolved[k] for k in sorted(resolved) if k != "jobs"},
    }
    _write(out_dir / "run-manifest.json", json.dumps(manifest, indent=2) + "\n")


def _write_assessment(out_dir, name, assessment, title=""):
    svg = render_svg(assessment, PlotSpec(title=title or name))
    json_text, csv_text = export_summary(assessment)
    _write(out_dir / f"{name}.svg", svg)
    _write(out_dir / f"{name}.json", json_text)
    _write(out_dir / f"{name}.csv", csv_text)


def _sim_config(resolved):
    extra = {}
    if resolved.get("beta") is not None:
        extra["beta"] = resolved["beta"]
    if resolved.get("sigma") is not None:
        extra["sigma"] = resolved["sigma"]
    return SimConfig(n_population=resolved["n_population"],
                     n_train=resolved["n_train"],
                     n_valid=resolved["n_valid"],
                     seed=resolved["seed"], **extra)


def cmd_simulate(args):
    keys = ("seed", "out_dir", "n_population", "n_train", "n_valid", "beta", "sigma")
    resolved = _resolve(args, keys)
    config = _sim_config(resolved)
    out_dir = Path(resolved["out_dir"])
    _log(f"simulating population of {config.n_population} (seed {config.seed})")
    population, train, valid = generate(config)
    for ds, name in ((population, "population"), (train, "train"), (valid, "valid")):
        _write(out_dir / f"{name}.csv", dataset_to_csv(ds))
        print(f"{name}: n={ds.n} mean_y={ds.y.mean():.6f} mean_lambda={ds.lam.mean():.6f}")
    _write_manifest(out_dir, "simulate", resolved)
    _log(f"wrote population/train/valid CSVs to {out_dir}")
    return 0


def _read_predictions_csv(path):
    try:
        text = Path(path).read_text()
    except OSError:
        raise
    lines = text.splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if header != ["y", "mu_hat"]:
        raise DataError(f"{path}: expected header 'y,mu_hat', got {lines[0]!r}")
    ys, mus = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 2:
            raise DataError(f"{path}: row {lineno}: expected 2 fields, got {len(parts)}")
        try:
            ys.append(float(parts[0]))
            mus.append(float(parts[1]))
        except ValueError:
            raise DataError(f"{path}: row {lineno}: non-numeric value in {raw!r}") from None
    if not ys:
        raise DataError(f"{path}: no data rows")
    return ys, mus


def cmd_assess(args):
    keys = ("seed", "out_dir", "family", "link", "span", "degree", "bins", "grid_points")
    resolved = _resolve(args, keys)
    family = get_family(resolved["family"])
    link = get_link(resolved["link"]) if resolved["link"] else canonical_link(family)
    ys, mus = _read_predictions_csv(args.predictions)

    # name support violations by data row before building the set
    import numpy as np
    y_arr = np.asarray(ys)
    try:
        family.check_support(y_arr)
    except DataError:
        for i, yv in enumerate(ys):
            try:
                family.check_support(np.asarray([yv]))
            except DataError as exc:
                raise DataError(f"{args.predictions}: row {i + 2}: {exc}") from None
        raise

    preds = make_prediction_set(ys, mus, family, link)
    if preds.clamped_count:
        _log(f"clamped {preds.clamped_count} boundary prediction(s) inward by 1e-10")
    options = AssessOptions(span=resolved["span"], degree=resolved["degree"],
                            n_bins=resolved["bins"], grid_points=resolved["grid_points"])
    assessment = assess(preds, options)

    out_dir = Path(resolved["out_dir"])
    stem = Path(args.predictions).stem
    if (out_dir / f"{stem}.csv").resolve() == Path(args.predictions).resolve():
        raise DataError("output directory would overwrite the input file; pick another --out-dir")
    _write_assessment(out_dir, stem, assessment)
    _write_manifest(out_dir, "assess", resolved)
    _log(f"wrote {stem}.svg/.json/.csv to {out_dir}")
    if assessment.errors:
        for component, message in sorted(assessment.errors.items()):
            print(f"component '{component}' failed: {message}", file=sys.stderr)
        return 3
    print(f"n={assessment.n} slope={assessment.glm.zeta:.6f} "
          f"intercept={assessment.intercept.alpha_c:.6f}")
    return 0


def cmd_demo(args):
    keys = ("seed", "out_dir", "span", "degree", "bins", "grid_points",
            "n_population", "n_train", "n_valid", "beta", "sigma",
            "skip_gbm", "full_grid", "jobs")
    resolved = _resolve(args, keys)
    seed = resolved["seed"]
    out_dir = Path(resolved["out_dir"])
    options = AssessOptions(span=resolved["span"], degree=resolved["degree"],
                            n_bins=resolved["bins"], grid_points=resolved["grid_points"])
    config = _sim_config(resolved)

    _log(f"simulating (seed {seed}, kernel {KERNEL_FLAVOR})")
    _population, train, valid = generate(config)

    prediction_sets = {}
    _log("fitting true-lambda reference and GLMs 1-3")
    prediction_sets["true-lambda"] = true_lambda_predictions(valid)
    for model_id in MODEL_IDS:
        fitted = fit_model(model_id, train)
        prediction_sets[model_id] = predict_validation(fitted, valid)

    cv_result = None
    if not resolved["skip_gbm"]:
        t_grid = FULL_T_GRID if resolved["full_grid"] else REDUCED_T_GRID
        d_grid = FULL_D_GRID if resolved["full_grid"] else REDUCED_D_GRID
        _log(f"cross-validating gbm-1 over {len(t_grid) * len(d_grid)} configurations")
        cv_result = cv_grid_search(train.X, train.y, t_grid, d_grid, k=10,
                                   seed=Rng(seed).derive("gbm-cv").seed,
                                   jobs=resolved["jobs"])
        best_t, best_d = cv_result.best
        _log(f"gbm-1 grid selected T={best_t}, d={best_d}")
        gbm_specs = {
            "gbm-1": {"n_trees": best_t, "depth": best_d},
            "gbm-2": dict(GBM2_CONFIG),
            "gbm-3": dict(GBM3_CONFIG),
        }
        for name, spec in gbm_specs.items():
            _log(f"fitting {name} (T={spec['n_trees']}, d={spec['depth']})")
            cfg = BoostConfig(seed=Rng(seed).derive(name).seed, **spec)
            model = boost_fit(train.X, train.y, cfg)
            mu = boost_predict(model, valid.X)
            prediction_sets[name] = make_prediction_set(
                valid.y.astype(float), mu, get_family("poisson"), get_link("log"))

    _log("assessing calibration")
    rows = ["model,slope,slope_se,intercept,intercept_se,alpha_unconstrained,status"]
    all_names = ("true-lambda",) + MODEL_IDS + ("gbm-1", "gbm-2", "gbm-3")
    for name in all_names:
        if name not in prediction_sets:
            rows.append(f"{name},,,,,,skipped")
            continue
        assessment = assess(prediction_sets[name], options)
        _write_assessment(out_dir, name, assessment, title=name)
        if assessment.errors:
            rows.append(f"{name},,,,,,error: " + "; ".join(sorted(assessment.errors)))
            continue
        rows.append(",".join([
            name,
            repr(assessment.glm.zeta), repr(assessment.glm.zeta_se),
            repr(assessment.intercept.alpha_c), repr(assessment.intercept.se),
            repr(assessment.glm.alpha), "ok",
        ]))
    _write(out_dir / "comparison.csv", "\n".join(rows) + "\n")

    if cv_result is not None:
        grid_rows = ["n_trees,depth,mean_cv_deviance"]
        for t, d, dev in cv_result.grid:
            grid_rows.append(f"{t},{d},{repr(dev)}")
        grid_rows.append(f"# best: T={cv_result.best[0]} d={cv_result.best[1]}")
        _write(out_dir / "gbm-1-cvgrid.csv", "\n".join(grid_rows) + "\n")

    _write_manifest(out_dir, "demo", resolved)
    _log(f"wrote {len(prediction_sets)} assessment triples to {out_dir}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gencal",
        description="Calibration assessment for exponential-family prediction models")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", dest="out_dir", default=None)
        p.add_argument("--config", default=None, help="flat key = value option file")

    p_sim = sub.add_parser("simulate", help="generate the synthetic datasets")
    common(p_sim)
    p_sim.add_argument("--n-population", dest="n_population", type=int, default=None)
    p_sim.add_argument("--n-train", dest="n_train", type=int, default=None)
    p_sim.add_argument("--n-valid", dest="n_valid", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_assess = sub.add_parser("assess", help="assess a y,mu_hat prediction file")
    common(p_assess)
    p_assess.add_argument("predictions", help="CSV file with header y,mu_hat")
    p_assess.add_argument("--family", default=None)
    p_assess.add_argument("--link", default=None)
    p_assess.add_argument("--span", type=float, default=None)
    p_assess.add_argument("--degree", type=int, default=None)
    p_assess.add_argument("--bins", type=int, default=None)
    p_assess.add_argument("--grid-points", dest="grid_points", type=int, default=None)
    p_assess.set_defaults(func=cmd_assess)

    p_demo = sub.add_parser("demo", help="replicate the full simulation study")
    common(p_demo)
    p_demo.add_argument("--n-population", dest="n_population", type=int, default=None)
    p_demo.add_argument("--n-train", dest="n_train", type=int, default=None)
    p_demo.add_argument("--n-valid", dest="n_valid", type=int, default=None)
    p_demo.add_argument("--span", type=float, default=None)
    p_demo.add_argument("--degree", type=int, default=None)
    p_demo.add_argument("--bins", type=int, default=None)
    p_demo.add_argument("--grid-points", dest="grid_points", type=int, default=None)
    p_demo.add_argument("--skip-gbm", dest="skip_gbm", action="store_const", const=True,
                        default=None)
    p_demo.add_argument("--full-grid", dest="full_grid", action="store_const", const=True,
                        default=None)
    p_demo.add_argument("--jobs", type=int, default=None)
    p_demo.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except GencalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
