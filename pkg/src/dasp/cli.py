"""Command-line entry point: ``dasp <command> [options]``.

Commands
--------
omega generate / omega estimate
    Write a parametric correlation matrix, or the prior correlation matrix
    built from a design.
analyze kl-curve / analyze contours / analyze meff
    Prior analytics: KL divergence curves, bivariate prior histograms and
    the prior distribution of the effective number of parameters.
fit
    MCMC fit of one prior to a dataset.
simulate
    Paired simulation study over priors and Omega modes.
compare
    Paired differences against a baseline Omega mode.
loo
    Exact leave-one-out comparison of several models.
report
    Summary tables from a results directory.

Settings are resolved as defaults < ``--config`` file < command-line flags.
The config file is a JSON object of option names, or a manifest written by a
previous run (its ``config`` entry is used). The seed falls back to the
``DASP_SEED`` environment variable and then to 0. Exit status is 0 on
success, 1 on usage or input errors and 2 on numerical failures.
"""

import argparse
import datetime as _dt
import json
import math
import os
import sys
from dataclasses import fields
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import io as dio
from .corr_structures import StructureSpec, make_structure
from .cov_estimation import OmegaMode, OmegaSpec, build_omega
from .data import RegressionDataset
from .errors import DaspError, InvalidParameter, MissingColumns
from .prior_analytics import GridSpec, kl_curve, mc_prior_grid, prior_meff_draws
from .priors import PriorKind, default_spec
from .sampler import McmcConfig, fit, summarize
from .sim_harness import ScenarioSpec, compare_loo, evaluate, generate, loo_exact, roc_auc, roc_curve
from .sim_harness.metrics import MetricsReport

PRIOR_CHOICES = [k.value for k in PriorKind]
DELTA_METRICS = ("elpd", "rmse_all", "rmse_zero", "rmse_nonzero")
COVERAGE_FIELDS = ("coverage", "specificity", "sensitivity", "avg_width", "coverage_zero", "coverage_nonzero")
# keys of the parsed namespace that are not settings
_NON_CONFIG = {"command", "subcommand", "config", "handler"}


class UsageError(Exception):
    """Bad command line; the message is preceded by the relevant help text."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(self.format_help())
        raise UsageError(f"{self.prog}: error: {message}")


# -- argument helpers -----------------------------------------------------------

def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _str_list(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def parse_grid(text):
    """``"a:b:step"`` (inclusive of ``b``) or a comma-separated list."""
    text = str(text)
    if ":" not in text:
        return _float_list(text)
    parts = [float(v) for v in text.split(":")]
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise InvalidParameter(f"grid {text!r} must be start:stop:step with step > 0")
    start, stop, step = parts
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def parse_overrides(items):
    """``["key=value", ...]`` into a dict of floats."""
    out = {}
    for item in items or []:
        key, sep, value = str(item).partition("=")
        if not sep or not key.strip():
            raise InvalidParameter(f"override {item!r} is not of the form key=value")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise InvalidParameter(f"override {item!r} needs a numeric value") from None
    return out


def resolve_seed(value):
    if value is not None:
        return int(value)
    env = os.environ.get("DASP_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise InvalidParameter(f"DASP_SEED={env!r} is not an integer") from None
    return 0


def derive_seed(master, *keys):
    """Deterministic 32-bit seed for a task identified by ``keys``."""
    seq = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, np.uint32)[0])


def _add_mcmc(p):
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="master seed (default: $DASP_SEED, then 0)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")


def _add_common(p):
    p.add_argument("--config", default=None, help="JSON settings file or a previous manifest")


def _mcmc_config(args, seed):
    return McmcConfig(chains=args.chains, warmup=args.warmup, draws=args.draws, seed=seed, thin=args.thin)


def build_parser():
    parser = _Parser(prog="dasp", description="Dependency-aware shrinkage priors for linear regression.")
    parser.add_argument("--version", action="version", version=f"dasp {__version__}")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="command")
    commands.required = True
    leaves = {}

    omega = commands.add_parser("omega", help="generate or estimate correlation matrices")
    omega_cmds = omega.add_subparsers(dest="subcommand", parser_class=_Parser, metavar="subcommand")
    omega_cmds.required = True
    p = omega_cmds.add_parser("generate", help="parametric correlation matrix")
    p.add_argument("--kind", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--block", type=int, default=5)
    p.add_argument("--ma-form", choices=["correlation", "process"], default="correlation")
    p.add_argument("--strict", action="store_true", help="refuse a dimension not divisible by the block size")
    p.add_argument("--out", default=None, help="output CSV (standard output when omitted)")
    _add_common(p)
    p.set_defaults(handler=cmd_omega_generate)
    leaves[("omega", "generate")] = p

    p = omega_cmds.add_parser("estimate", help="prior correlation matrix from a design")
    p.add_argument("--data", required=True, help="n x p numeric CSV")
    p.add_argument("--header", action="store_true", help="the data file has a header row")
    p.add_argument("--mode", default="ledoit-wolf", help="identity, sample, ledoit-wolf or known")
    p.add_argument("--sigma-x", default=None, help="covariance CSV for --mode known")
    p.add_argument("--no-center", action="store_true")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(handler=cmd_omega_estimate)
    leaves[("omega", "estimate")] = p

    analyze = commands.add_parser("analyze", help="prior analytics")
    an_cmds = analyze.add_subparsers(dest="subcommand", parser_class=_Parser, metavar="subcommand")
    an_cmds.required = True
    p = an_cmds.add_parser("kl-curve", help="KL divergence against rho")
    p.add_argument("--structure", required=True)
    p.add_argument("--dims", default="10,20,50")
    p.add_argument("--rho-grid", default="0:0.95:0.05")
    p.add_argument("--block", type=int, default=5)
    p.add_argument("--ma-form", choices=["correlation", "process"], default="correlation")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(handler=cmd_kl_curve)
    leaves[("analyze", "kl-curve")] = p

    p = an_cmds.add_parser("contours", help="2-D histogram of the bivariate prior")
    p.add_argument("--prior", default="hs", choices=PRIOR_CHOICES)
    p.add_argument("--rho", default="0,0.5,0.9", help="comma-separated correlations")
    p.add_argument("--draws", type=int, default=200000)
    p.add_argument("--lo", type=float, default=-6.0)
    p.add_argument("--hi", type=float, default=6.0)
    p.add_argument("--bins", type=int, default=200)
    p.add_argument("--n", type=int, default=100, help="sample size used by data-dependent defaults")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(handler=cmd_contours)
    leaves[("analyze", "contours")] = p

    p = an_cmds.add_parser("meff", help="prior draws of the effective number of parameters")
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--rho", default="0,0.5,0.9")
    p.add_argument("--prior", default="hs", help="one or more comma-separated prior kinds")
    p.add_argument("--structure", default="equicorrelation")
    p.add_argument("--block", type=int, default=5)
    p.add_argument("--draws", type=int, default=20000)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(handler=cmd_meff)
    leaves[("analyze", "meff")] = p

    p = commands.add_parser("fit", help="fit one model by MCMC")
    p.add_argument("--data", required=True, help="CSV with a header row")
    p.add_argument("--response", required=True)
    p.add_argument("--predictors", default=None, help="comma-separated columns (default: all others)")
    p.add_argument("--prior", default="hs", choices=PRIOR_CHOICES)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="hyperparameter override")
    p.add_argument("--omega", default="identity", help="identity, sample, ledoit-wolf, known or user")
    p.add_argument("--sigma-x", default=None, help="covariance CSV for --omega known")
    p.add_argument("--omega-file", default=None, help="correlation CSV for --omega user")
    p.add_argument("--no-intercept", action="store_true")
    _add_mcmc(p)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(handler=cmd_fit)
    leaves[("fit", None)] = p

    p = commands.add_parser("simulate", help="paired simulation study")
    p.add_argument("--scenario", default=None, help="scenario JSON (defaults for missing fields)")
    p.add_argument("--scenario-set", action="append", default=[], metavar="FIELD=VALUE",
                   help="override one scenario field")
    p.add_argument("--priors", default="hs,rhs,dl,r2d2,bp")
    p.add_argument("--omegas", default="identity,known")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="hyperparameter override applied to every prior that has the key")
    _add_mcmc(p)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_simulate)
    leaves[("simulate", None)] = p

    p = commands.add_parser("compare", help="paired differences against a baseline Omega mode")
    p.add_argument("--results", required=True, help="results.csv or the directory holding it")
    p.add_argument("--baseline", default="identity")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(handler=cmd_compare)
    leaves[("compare", None)] = p

    p = commands.add_parser("loo", help="exact leave-one-out model comparison")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--predictors", default=None)
    p.add_argument("--priors", default="hs")
    p.add_argument("--omegas", default="identity,ledoit-wolf")
    p.add_argument("--sigma-x", default=None)
    p.add_argument("--max-n", type=int, default=200)
    p.add_argument("--no-intercept", action="store_true")
    _add_mcmc(p)
    p.add_argument("--out", required=True, help="output CSV of fold contributions")
    _add_common(p)
    p.set_defaults(handler=cmd_loo)
    leaves[("loo", None)] = p

    p = commands.add_parser("report", help="summary tables from a results directory")
    p.add_argument("--results", required=True)
    p.add_argument("--baseline", default="identity")
    p.add_argument("--out", default=None, help="output directory (default: <results>/report)")
    _add_common(p)
    p.set_defaults(handler=cmd_report)
    leaves[("report", None)] = p
    return parser, leaves


# -- configuration and manifests ------------------------------------------------------

def _load_config(path, leaf):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise InvalidParameter(f"cannot read config {path}: {err}") from None
    if isinstance(data, dict) and isinstance(data.get("config"), dict):
        data = data["config"]
    if not isinstance(data, dict):
        raise InvalidParameter(f"config {path} must hold a JSON object")
    known = {a.dest for a in leaf._actions}
    settings = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest in _NON_CONFIG:
            continue
        if dest not in known:
            raise InvalidParameter(f"config {path}: unknown setting {key!r}")
        settings[dest] = value
    return settings


def _effective_config(args):
    return {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _manifest(argv, args, started, seeds=None, inputs=(), extra=None):
    out = {
        "tool_version": __version__,
        "command_line": ["dasp"] + list(argv),
        "command": [args.command] + ([args.subcommand] if getattr(args, "subcommand", None) else []),
        "config": _effective_config(args),
        "seeds": seeds or {},
        "inputs": {os.fspath(p): dio.file_sha256(p) for p in inputs if p},
        "started": started,
        "finished": _now(),
    }
    if extra:
        out.update(extra)
    return out


def _sidecar(path, suffix):
    stem, _ = os.path.splitext(os.fspath(path))
    return stem + suffix


def _emit(args, schema, rows, argv, started, seeds=None, inputs=()):
    """Write a CSV (or print it) plus, for files, a manifest next to it."""
    if args.out is None:
        sys.stdout.write(dio.render_csv(schema, rows))
        return
    dio.write_csv(args.out, schema, rows)
    dio.write_json(_sidecar(args.out, ".manifest.json"), _manifest(argv, args, started, seeds, inputs))


# -- omega ---------------------------------------------------------------------------------

def cmd_omega_generate(args, argv, started):
    spec = StructureSpec(args.kind, args.rho, block_size=args.block, ma_form=args.ma_form, strict=args.strict)
    m = make_structure(spec, args.dim)
    if args.out is None:
        sys.stdout.write(dio.render_csv("matrix", m.tolist()))
        return
    dio.write_matrix(args.out, m)
    dio.write_json(_sidecar(args.out, ".manifest.json"), _manifest(argv, args, started))


def _omega_spec(mode, sigma_x_path=None, omega_path=None):
    mode = OmegaMode.parse(mode)
    if mode == OmegaMode.KNOWN:
        if not sigma_x_path:
            raise InvalidParameter("Omega mode 'known' needs --sigma-x")
        return OmegaSpec(mode, sigma_x=dio.read_matrix(sigma_x_path))
    if mode == OmegaMode.USER:
        if not omega_path:
            raise InvalidParameter("Omega mode 'user' needs --omega-file")
        return OmegaSpec(mode, omega=dio.read_matrix(omega_path))
    return OmegaSpec(mode)


def cmd_omega_estimate(args, argv, started):
    X = dio.read_matrix(args.data, header=args.header)
    spec = _omega_spec(args.mode, args.sigma_x)
    spec = OmegaSpec(spec.mode, sigma_x=spec.sigma_x, center=not args.no_center)
    m = build_omega(X, spec)
    if args.out is None:
        sys.stdout.write(dio.render_csv("matrix", m.tolist()))
        return
    dio.write_matrix(args.out, m)
    dio.write_json(_sidecar(args.out, ".manifest.json"),
                   _manifest(argv, args, started, inputs=[args.data, args.sigma_x]))


# -- analyze -------------------------------------------------------------------------------

def cmd_kl_curve(args, argv, started):
    kind = StructureSpec(args.structure, 0.0).kind.value
    rows = [(kind, d, r, kl) for d, r, kl in kl_curve(args.structure, _int_list(args.dims),
                                                       parse_grid(args.rho_grid), args.block, args.ma_form)]
    _emit(args, "kl_curve", rows, argv, started)


def cmd_contours(args, argv, started):
    seed = resolve_seed(args.seed)
    prior = default_spec(args.prior, args.n, 2, **parse_overrides(args.set))
    grid = GridSpec(args.lo, args.hi, args.bins)
    rows = []
    for i, rho in enumerate(_float_list(args.rho)):
        omega = np.array([[1.0, rho], [rho, 1.0]])
        result = mc_prior_grid(prior, omega, args.draws, grid, seed=derive_seed(seed, i))
        centers = result.centers
        for a in range(centers.size):
            for b in range(centers.size):
                rows.append((rho, centers[a], centers[b], int(result.counts[a, b])))
    _emit(args, "contours", rows, argv, started, seeds={"master": seed})


def cmd_meff(args, argv, started):
    seed = resolve_seed(args.seed)
    overrides = parse_overrides(args.set)
    rows = []
    for k, kind in enumerate(_str_list(args.prior)):
        prior = default_spec(kind, args.n, args.p, **overrides)
        for i, rho in enumerate(_float_list(args.rho)):
            omega = make_structure(StructureSpec(args.structure, rho, block_size=args.block), args.p)
            draws = prior_meff_draws(prior, omega, args.draws, seed=derive_seed(seed, k, i))
            rows.extend((prior.kind.value, rho, d, v) for d, v in enumerate(draws))
    _emit(args, "meff", rows, argv, started, seeds={"master": seed})


# -- fit -----------------------------------------------------------------------------------

def _predictors(args):
    return _str_list(args.predictors) if args.predictors else None


def draw_rows(draws):
    """Long-format rows ``(chain, iter, parameter, value)`` of a fit."""
    series = []
    for name in ("b", "lam"):
        arr = getattr(draws, name)
        series.extend((f"{name}[{k}]", arr[:, :, k]) for k in range(arr.shape[2]))
    series.extend((name, getattr(draws, name)) for name in ("tau", "sigma", "intercept"))
    series.extend(sorted(draws.extras.items()))
    rows = []
    for c in range(draws.n_chains):
        for it in range(draws.n_draws):
            rows.extend((c, it, label, arr[c, it]) for label, arr in series)
    return rows


def cmd_fit(args, argv, started):
    seed = resolve_seed(args.seed)
    X, y, names = dio.read_regression(args.data, args.response, _predictors(args))
    data = RegressionDataset(X, y)
    prior = default_spec(args.prior, data.n, data.p, y=y, X=X, **parse_overrides(args.set))
    omega = _omega_spec(args.omega, args.sigma_x, args.omega_file)
    draws = fit(data, prior, omega, _mcmc_config(args, seed), intercept=not args.no_intercept, jobs=args.jobs)
    diag = summarize(draws, names=("b", "lam", "tau", "sigma", "intercept") + tuple(sorted(draws.extras)))
    os.makedirs(args.out, exist_ok=True)
    dio.write_csv(os.path.join(args.out, "draws.csv"), "draws", draw_rows(draws))
    dio.write_csv(os.path.join(args.out, "diagnostics.csv"), "diagnostics",
                  [[row[c] for c in dio.SCHEMAS["diagnostics"]] for row in diag])
    extra = {"fit": draws.manifest, "predictors": names, "response": args.response}
    dio.write_json(os.path.join(args.out, "manifest.json"),
                   _manifest(argv, args, started, {"master": seed}, [args.data, args.sigma_x, args.omega_file], extra))


# -- simulate ------------------------------------------------------------------------------

def _coerce_field(value):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if value.lower() in ("none", "null"):
        return None
    return value


def load_scenario(path, overrides):
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise InvalidParameter(f"cannot read scenario {path}: {err}") from None
    for item in overrides or []:
        key, sep, value = str(item).partition("=")
        if not sep:
            raise InvalidParameter(f"scenario override {item!r} is not of the form field=value")
        data[key.strip()] = _coerce_field(value.strip())
    return ScenarioSpec.from_dict(data)


def _prior_for(kind, train, overrides):
    base = default_spec(kind, train.n, train.p, y=train.y, X=train.X)
    own = {k: v for k, v in overrides.items() if k in base.params or k in ("sigma_nu", "sigma_eta")}
    return base.with_overrides(**own) if own else base


def _simulation_task(task):
    """Fit every Omega mode for one (replication, prior) pair on shared data and seed."""
    rep, kind, scenario, omega_modes, config, level, overrides = task
    sim = generate(scenario)
    train, test = sim.train, sim.test
    prior = _prior_for(kind, train, overrides)
    rows, failures, hashes = [], [], {}
    for mode in omega_modes:
        spec = OmegaSpec(mode, sigma_x=train.sigma_x_true) if OmegaMode.parse(mode) == OmegaMode.KNOWN else OmegaSpec(mode)
        label = spec.mode.value
        try:
            draws = fit(train, prior, spec, config)
            omega = build_omega(train.X, spec)
            report = evaluate(draws, train, test, omega=omega, level=level)
            values = report.as_dict()
            fpr, tpr, _ = roc_curve(draws, train.b_true)
            values["roc_auc"] = roc_auc(fpr, tpr)
            hashes[label] = draws.manifest["data_hash"]
        except (DaspError, np.linalg.LinAlgError, FloatingPointError) as err:
            failures.append({"rep": rep, "prior": kind, "omega_mode": label, "error": f"{type(err).__name__}: {err}"})
            values = {}
        for metric in _metric_names():
            rows.append((rep, prior.kind.value, label, metric, float(values.get(metric, float("nan")))))
    return rows, failures, {"rep": rep, "prior": prior.kind.value, "data_hash": hashes,
                            "prior_spec": prior.to_dict()}


def _metric_names():
    return [f.name for f in fields(MetricsReport)] + ["roc_auc"]


def _parallel_map(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks), os.cpu_count() or 1)) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def cmd_simulate(args, argv, started):
    seed = resolve_seed(args.seed)
    scenario = load_scenario(args.scenario, args.scenario_set)
    kinds = [PriorKind.parse(k).value for k in _str_list(args.priors)]
    modes = [OmegaMode.parse(m).value for m in _str_list(args.omegas)]
    if not kinds or not modes:
        raise InvalidParameter("need at least one prior and one Omega mode")
    overrides = parse_overrides(args.set)
    tasks, seeds = [], []
    for rep in range(args.reps):
        data_seed = derive_seed(scenario.seed, rep)
        fit_seed = derive_seed(seed, rep)
        seeds.append({"rep": rep, "data_seed": data_seed, "sampler_seed": fit_seed})
        rep_scenario = ScenarioSpec.from_dict({**scenario.to_dict(), "seed": data_seed})
        config = _mcmc_config(args, fit_seed)
        tasks.extend((rep, k, rep_scenario, modes, config, args.level, overrides) for k in kinds)
    results = _parallel_map(_simulation_task, tasks, args.jobs)
    rows = [r for res in results for r in res[0]]
    failures = [f for res in results for f in res[1]]
    runs = [res[2] for res in results]
    os.makedirs(args.out, exist_ok=True)
    dio.write_csv(os.path.join(args.out, "results.csv"), "results", rows)
    extra = {"scenario": scenario.to_dict(), "runs": runs, "failures": failures}
    dio.write_json(os.path.join(args.out, "manifest.json"),
                   _manifest(argv, args, started, {"master": seed, "replications": seeds}, [args.scenario], extra))
    if failures:
        sys.stderr.write(f"{len(failures)} fit(s) failed; their metrics are nan (see manifest.json)\n")


# -- compare and report --------------------------------------------------------------------

def _results_path(path):
    path = os.fspath(path)
    if os.path.isdir(path):
        path = os.path.join(path, "results.csv")
    if not os.path.isfile(path):
        raise MissingColumns(f"no results table at {path}")
    return path


def load_results(path):
    """``{(rep, prior, omega_mode): {metric: value}}`` from a results table."""
    header, rows = dio.read_table(_results_path(path), required=dio.SCHEMAS["results"])
    col = {h: i for i, h in enumerate(header)}
    table = {}
    for row in rows:
        key = (int(row[col["rep"]]), row[col["prior"]], row[col["omega_mode"]])
        table.setdefault(key, {})[row[col["metric"]]] = float(row[col["value"]])
    if not table:
        raise MissingColumns(f"{path} holds no results")
    return table


def paired_deltas(table, baseline):
    """Rows ``(rep, prior, omega_mode, baseline, metric, delta)``.

    When the baseline is the only mode present it is compared with itself.
    """
    baseline = OmegaMode.parse(baseline).value
    modes = sorted({k[2] for k in table})
    targets = [m for m in modes if m != baseline] or [baseline]
    out = []
    for (rep, prior, mode), metrics in sorted(table.items()):
        if mode not in targets:
            continue
        base = table.get((rep, prior, baseline))
        if base is None:
            raise MissingColumns(f"replication {rep}, prior {prior}: no {baseline!r} run to pair with")
        for metric in sorted(metrics):
            out.append((rep, prior, mode, baseline, metric, metrics[metric] - base.get(metric, float("nan"))))
    return out


def cmd_compare(args, argv, started):
    table = load_results(args.results)
    rows = paired_deltas(table, args.baseline)
    _emit(args, "deltas", rows, argv, started, inputs=[_results_path(args.results)])


def model_id(prior, mode):
    """Table label: ``HS`` without Omega, ``HSO`` with the known Omega, ``HSO[mode]`` otherwise."""
    name = prior.upper()
    if mode == OmegaMode.IDENTITY.value:
        return name
    if mode == OmegaMode.KNOWN.value:
        return name + "O"
    return f"{name}O[{mode}]"


def delta_summary(deltas):
    groups = {}
    for rep, prior, mode, _, metric, value in deltas:
        if metric in DELTA_METRICS:
            groups.setdefault((prior, mode, metric), []).append(value)
    rows = []
    for (prior, mode, metric), values in sorted(groups.items()):
        v = np.asarray(values, float)
        v = v[np.isfinite(v)]
        if v.size:
            q25, med, q75 = np.quantile(v, [0.25, 0.5, 0.75])
            rows.append((prior, mode, metric, v.size, v.mean(), med, q25, q75, v.min(), v.max()))
        else:
            rows.append((prior, mode, metric, 0) + (float("nan"),) * 6)
    return rows


def coverage_table(table):
    groups = {}
    for (rep, prior, mode), metrics in table.items():
        groups.setdefault((prior, mode), []).append(metrics)
    rows = []
    for (prior, mode), runs in sorted(groups.items()):
        cells = []
        for name in COVERAGE_FIELDS:
            v = np.array([r.get(name, float("nan")) for r in runs], float)
            cells.append(float(np.nanmean(v)) if np.any(np.isfinite(v)) else float("nan"))
        rows.append((model_id(prior, mode), *cells))
    return rows


def _text_table(columns, rows):
    cells = [list(columns)] + [[format(v, ".4g") if isinstance(v, float) else str(v) for v in row]
                               for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cmd_report(args, argv, started):
    results_dir = os.fspath(args.results)
    out_dir = args.out or os.path.join(results_dir, "report")
    loo_tables = []
    if os.path.isdir(results_dir):
        for name in sorted(os.listdir(results_dir)):
            path = os.path.join(results_dir, name)
            if name.endswith(".csv") and dio.read_schema_name(path) == "loo_compare":
                loo_tables.append(path)
    has_results = os.path.isfile(os.path.join(results_dir, "results.csv")) or os.path.isfile(results_dir)
    if not has_results and not loo_tables:
        raise MissingColumns(f"{results_dir} holds neither a results table nor LOO comparisons")
    text, inputs = [], []
    os.makedirs(out_dir, exist_ok=True)
    if has_results:
        path = _results_path(results_dir)
        inputs.append(path)
        table = load_results(path)
        summary = delta_summary(paired_deltas(table, args.baseline))
        cover = coverage_table(table)
        dio.write_csv(os.path.join(out_dir, "delta_summary.csv"), "delta_summary", summary)
        dio.write_csv(os.path.join(out_dir, "coverage_table.csv"), "coverage_table", cover)
        text.append(f"Paired differences against '{OmegaMode.parse(args.baseline).value}'")
        text.append(_text_table(dio.SCHEMAS["delta_summary"], summary))
        text.append("")
        text.append("Marginal 95% interval summaries (means over replications)")
        text.append(_text_table(dio.SCHEMAS["coverage_table"], cover))
    for path in loo_tables:
        inputs.append(path)
        header, rows = dio.read_table(path, required=dio.SCHEMAS["loo_compare"])
        text.append("")
        text.append(f"Leave-one-out comparison ({os.path.basename(path)})")
        text.append(_text_table(header, [[_maybe_float(v) for v in r] for r in rows]))
    dio.write_atomic(os.path.join(out_dir, "report.txt"), "\n".join(text).strip() + "\n")
    dio.write_json(os.path.join(out_dir, "manifest.json"), _manifest(argv, args, started, inputs=inputs))


def _maybe_float(v):
    try:
        return float(v)
    except ValueError:
        return v


# -- loo -----------------------------------------------------------------------------------

def cmd_loo(args, argv, started):
    seed = resolve_seed(args.seed)
    X, y, names = dio.read_regression(args.data, args.response, _predictors(args))
    data = RegressionDataset(X, y)
    kinds = [PriorKind.parse(k).value for k in _str_list(args.priors)]
    modes = _str_list(args.omegas)
    config = _mcmc_config(args, seed)
    results = {}
    for kind in kinds:
        for mode in modes:
            spec = _omega_spec(mode, args.sigma_x)
            res = loo_exact(data, kind, spec, config, max_n=args.max_n, jobs=args.jobs,
                            intercept=not args.no_intercept)
            results[(kind, spec.mode.value)] = res
    rows = [(k, m, i, v) for (k, m), res in results.items() for i, v in enumerate(res.pointwise)]
    best = max(results, key=lambda key: results[key].elpd)
    compare_rows = []
    for key, res in results.items():
        d, se = compare_loo(res, results[best])
        compare_rows.append((model_id(*key), key[0], key[1], res.elpd, d, se, len(res.failed)))
    compare_rows.sort(key=lambda r: -r[3])
    dio.write_csv(args.out, "loo", rows)
    dio.write_csv(_sidecar(args.out, "_compare.csv"), "loo_compare", compare_rows)
    failed = {f"{k}/{m}": res.messages for (k, m), res in results.items() if res.failed}
    dio.write_json(_sidecar(args.out, ".manifest.json"),
                   _manifest(argv, args, started, {"master": seed}, [args.data, args.sigma_x],
                             {"failed_folds": failed, "predictors": names}))


# -- dispatch ------------------------------------------------------------------------------

# failures of the computation itself, as opposed to bad input
_NUMERICAL = (np.linalg.LinAlgError, ArithmeticError, RuntimeError)


def _prescan(argv, leaves):
    """Config path and target subparser, found before the full parse."""
    config = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
        elif token.startswith("--config="):
            config = token.split("=", 1)[1]
    skip = {i + 1 for i, t in enumerate(argv) if t == "--config"}
    words = [t for i, t in enumerate(argv) if not t.startswith("-") and i not in skip]
    leaf = None
    if words:
        leaf = leaves.get((words[0], None))
        if leaf is None and len(words) > 1:
            leaf = leaves.get((words[0], words[1]))
    return config, leaf


def main(argv=None):
    """Run one command; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    started = _now()
    try:
        config_path, leaf = _prescan(argv, leaves)
        if config_path and leaf is not None:
            settings = _load_config(config_path, leaf)
            for action in leaf._actions:
                if action.dest in settings:
                    action.required = False
            leaf.set_defaults(**settings)
        try:
            args, extra = parser.parse_known_args(argv)
        except SystemExit as exc:  # --help and --version
            return int(exc.code or 0)
        leaf = leaves.get((args.command, getattr(args, "subcommand", None)), parser)
        if extra:
            leaf.error(f"unrecognized arguments: {' '.join(extra)}")
        args.handler(args, argv, started)
        return 0
    except UsageError as err:
        sys.stderr.write(f"{err}\n")
        return 1
    except _NUMERICAL as err:
        sys.stderr.write(f"dasp: numerical failure: {type(err).__name__}: {err}\n")
        return 2
    except (DaspError, OSError, ValueError) as err:
        sys.stderr.write(f"dasp: error: {err}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
