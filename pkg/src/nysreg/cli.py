"""Command-line front end.

Commands: fit, predict, evaluate, cross-validate, aggregate, diagnose,
rate-check, gen-synth.  Report commands (cross-validate, diagnose,
rate-check) write a PNG figure next to their CSV output.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Flags override an optional key=value config file, which overrides the
built-in defaults.  All randomness flows through --seed.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import modelsel
from .aggregation import aggregate_lfs
from .data import (
    DataError,
    SyntheticTarget,
    gen_synthetic,
    load_csv,
    load_features_csv,
)
from .evaluation import (
    confusion,
    decide,
    metrics,
    rate_experiment,
    run_cv,
    write_cv_long,
    write_cv_summary,
    write_rate_csv,
)
from .graph import exp_weights, laplacian
from .kernels import gram, parse_kernel
from .model_io import load_model, save_model
from .modelsel import RateRuleConfig, grid_search, write_cv_table
from .solver import (
    NumericalError,
    RegularizationConfig,
    fit_nystrom,
    select_landmarks,
)

F17 = "{:.17g}"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


DEFAULTS = {
    "fit": {"lambda0": 1e-8, "lambda1": 1.0, "kernel": "gaussian:0.04",
            "graph_b": 1e-3, "landmark_mode": "uniform", "label_col": -1,
            "scaling": "times_m", "knn": None, "labeled": None, "header": False},
    "predict": {"header": False},
    "evaluate": {"label_col": -1, "labeled": None, "header": False},
    "cross-validate": {"lambda0": 1e-8, "lambda1": 1.0, "kernel": "gaussian:0.04",
                       "graph_b": 1e-3, "folds": 10, "sizes": "10,50,250",
                       "redraws": 50, "protocol": "paper_sequential",
                       "label_col": -1, "labeled": None, "header": False,
                       "lambda0_grid": None, "lambda1_grid": None,
                       "grid_folds": 3, "no_full": False, "knn": None,
                       "scaling": "times_m", "out_dir": "."},
    "aggregate": {"label_col": -1, "labeled": None, "header": False},
    "diagnose": {"kernel": "gaussian:0.04", "gamma_grid": "1e-4,1e-2,1",
                 "landmarks": None, "label_col": -1, "eta": 0.05,
                 "delta": 0.1, "lambda0": None, "header": False,
                 "features_only": False, "out_dir": "."},
    "rate-check": {"r": 0.5, "b": None, "sizes": "100,200,400,800,1600",
                   "trials": 5, "noise": 0.1, "dim": 1, "anchors": 5,
                   "kernel": "gaussian:8", "graph_b": 0.25, "out_dir": "."},
    "gen-synth": {"n": 200, "labeled": None, "dim": 1, "anchors": 5,
                  "noise": 0.1, "kernel": "gaussian:8", "truth_out": None},
}

_BOOL_KEYS = {"header", "no_full", "features_only"}
_INT_KEYS = {"labeled", "label_col", "folds", "redraws", "grid_folds", "seed",
             "knn", "n", "dim", "anchors", "trials"}
_FLOAT_KEYS = {"lambda0", "lambda1", "graph_b", "eta", "delta", "r", "b",
               "noise"}


def _convert(key, raw):
    if raw is None or not isinstance(raw, str):
        return raw
    if key in _BOOL_KEYS:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    return raw


def _read_config_file(path):
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"config file {path}: bad line {line!r}")
            key, _, val = line.partition("=")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _merge(command, args):
    """flag > config file > default."""
    opts = dict(DEFAULTS.get(command, {}))
    supplied = {k: v for k, v in vars(args).items()
                if k not in ("command", "config") and v is not None}
    config_path = getattr(args, "config", None)
    if config_path:
        for key, raw in _read_config_file(config_path).items():
            if key in supplied:
                continue
            opts[key] = _convert(key, raw)
    opts.update(supplied)
    ns = argparse.Namespace(**opts)
    for key, value in list(vars(ns).items()):
        setattr(ns, key, _convert(key, value))
    return ns


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v != ""]


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v != ""]


def build_parser():
    parser = _Parser(prog="nysreg", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def add(name, *flags):
        p = sub.add_parser(name, add_help=True)
        p.add_argument("--config", default=None)
        for flag, kwargs in flags:
            p.add_argument(flag, **kwargs)
        return p

    add("fit",
        ("--data", {"required": True}),
        ("--labeled", {"type": int}),
        ("--label-col", {"type": int, "dest": "label_col"}),
        ("--kernel", {}),
        ("--lambda0", {"type": float}),
        ("--lambda1", {"type": float}),
        ("--graph-b", {"type": float, "dest": "graph_b"}),
        ("--knn", {"type": int}),
        ("--landmarks", {"required": True}),
        ("--landmark-mode", {"dest": "landmark_mode",
                             "choices": ["uniform", "first_s"]}),
        ("--scaling", {"choices": ["times_m", "none"]}),
        ("--seed", {"type": int, "required": True}),
        ("--header", {"action": "store_true", "default": None}),
        ("--out", {"required": True}))
    add("predict",
        ("--model", {"required": True}),
        ("--data", {"required": True}),
        ("--header", {"action": "store_true", "default": None}),
        ("--out", {"required": True}))
    add("evaluate",
        ("--model", {"required": True}),
        ("--data", {"required": True}),
        ("--labeled", {"type": int}),
        ("--label-col", {"type": int, "dest": "label_col"}),
        ("--header", {"action": "store_true", "default": None}),
        ("--out", {"required": True}))
    add("cross-validate",
        ("--data", {"required": True}),
        ("--labeled", {"type": int}),
        ("--label-col", {"type": int, "dest": "label_col"}),
        ("--kernel", {}),
        ("--lambda0", {"type": float}),
        ("--lambda1", {"type": float}),
        ("--lambda0-grid", {"dest": "lambda0_grid"}),
        ("--lambda1-grid", {"dest": "lambda1_grid"}),
        ("--grid-folds", {"type": int, "dest": "grid_folds"}),
        ("--graph-b", {"type": float, "dest": "graph_b"}),
        ("--knn", {"type": int}),
        ("--folds", {"type": int}),
        ("--sizes", {}),
        ("--redraws", {"type": int}),
        ("--protocol", {"choices": ["paper_sequential", "kfold_sequential",
                                    "kfold_shuffled"]}),
        ("--scaling", {"choices": ["times_m", "none"]}),
        ("--no-full", {"action": "store_true", "dest": "no_full", "default": None}),
        ("--seed", {"type": int, "required": True}),
        ("--header", {"action": "store_true", "default": None}),
        ("--out-dir", {"dest": "out_dir"}))
    add("aggregate",
        ("--models", {"required": True}),
        ("--data", {"required": True}),
        ("--labeled", {"type": int}),
        ("--label-col", {"type": int, "dest": "label_col"}),
        ("--header", {"action": "store_true", "default": None}),
        ("--out", {"required": True}))
    add("diagnose",
        ("--data", {"required": True}),
        ("--kernel", {}),
        ("--gamma-grid", {"dest": "gamma_grid"}),
        ("--landmarks", {}),
        ("--lambda0", {"type": float}),
        ("--eta", {"type": float}),
        ("--delta", {"type": float}),
        ("--label-col", {"type": int, "dest": "label_col"}),
        ("--features-only", {"action": "store_true", "dest": "features_only",
                             "default": None}),
        ("--seed", {"type": int, "required": True}),
        ("--header", {"action": "store_true", "default": None}),
        ("--out-dir", {"dest": "out_dir"}))
    add("rate-check",
        ("--r", {"type": float}),
        ("--b", {"type": float}),
        ("--sizes", {}),
        ("--trials", {"type": int}),
        ("--noise", {"type": float}),
        ("--dim", {"type": int}),
        ("--anchors", {"type": int}),
        ("--kernel", {}),
        ("--graph-b", {"type": float, "dest": "graph_b"}),
        ("--seed", {"type": int, "required": True}),
        ("--out-dir", {"dest": "out_dir"}))
    add("gen-synth",
        ("--n", {"type": int}),
        ("--labeled", {"type": int}),
        ("--dim", {"type": int}),
        ("--anchors", {"type": int}),
        ("--noise", {"type": float}),
        ("--kernel", {}),
        ("--truth-out", {"dest": "truth_out"}),
        ("--seed", {"type": int, "required": True}),
        ("--out", {"required": True}))
    return parser


def _build_config(ds, opts):
    penalties = ()
    if opts.lambda1 > 0:
        L = laplacian(exp_weights(ds.X, opts.graph_b, knn=opts.knn))
        penalties = ((opts.lambda1, L),)
    return RegularizationConfig(opts.lambda0, penalties, opts.scaling)


def _cmd_fit(opts):
    ds = load_csv(opts.data, opts.label_col, opts.labeled, opts.header)
    kernel = parse_kernel(opts.kernel)
    config = _build_config(ds, opts)
    sizes = _int_list(opts.landmarks)
    rng = np.random.default_rng(opts.seed)
    models = []
    for s in sizes:
        lm = select_landmarks(ds.n, s, seed=int(rng.integers(2**32)),
                              mode=opts.landmark_mode)
        models.append(fit_nystrom(ds.X, ds.Y, kernel, lm, config))
    if len(models) == 1:
        save_model(models[0], opts.out)
    else:
        save_model(aggregate_lfs(models, ds), opts.out)
    return 0


def _cmd_predict(opts):
    model = load_model(opts.model)
    X = load_features_csv(opts.data, opts.header)
    preds = model.predict(X)
    with open(opts.out, "w") as fh:
        for row in np.atleast_2d(preds):
            fh.write(",".join(F17.format(v) for v in row) + "\n")
    return 0


def _cmd_evaluate(opts):
    model = load_model(opts.model)
    ds = load_csv(opts.data, opts.label_col, opts.labeled, opts.header)
    scores = model.predict(ds.X[:ds.m])
    try:
        cm = confusion(decide(scores[:, 0]), ds.Y[:, 0])
    except ValueError as exc:
        raise DataError(str(exc)) from None
    result = metrics(cm)
    with open(opts.out, "w") as fh:
        fh.write("metric,value\n")
        fh.write(f"tp,{cm.tp}\nfn,{cm.fn}\nfp,{cm.fp}\ntn,{cm.tn}\n")
        for name, value in result.as_floats().items():
            fh.write(f"{name},{'' if value is None else F17.format(value)}\n")
    for name, value in result.as_floats().items():
        shown = "undefined" if value is None else f"{value:.4g}"
        print(f"{name}: {shown}")
    return 0


def _cmd_cross_validate(opts):
    from . import plots

    ds = load_csv(opts.data, opts.label_col, opts.labeled, opts.header)
    kernel = parse_kernel(opts.kernel)
    os.makedirs(opts.out_dir, exist_ok=True)
    lambda0, lambda1 = opts.lambda0, opts.lambda1
    if opts.lambda0_grid or opts.lambda1_grid:
        grid0 = _float_list(opts.lambda0_grid or str(lambda0))
        grid1 = _float_list(opts.lambda1_grid or str(lambda1))
        best, rows = grid_search(ds, kernel, grid0, grid1, opts.grid_folds,
                                 opts.seed, graph_b=opts.graph_b,
                                 laplacian_scaling=opts.scaling)
        write_cv_table(rows, os.path.join(opts.out_dir, "cv_grid.csv"))
        lambda0, lambda1 = best["lambda0"], best["lambda1"]
        print(f"grid search selected lambda0={lambda0:.4g} lambda1={lambda1:.4g} "
              f"({best['metric']} {best['mean_metric']:.4g})")
    rows = run_cv(ds, kernel, lambda0, lambda1, opts.graph_b,
                  folds=opts.folds, sizes=tuple(_int_list(opts.sizes)),
                  redraws=opts.redraws, seed=opts.seed,
                  protocol=opts.protocol, include_full=not opts.no_full,
                  laplacian_scaling=opts.scaling, knn=opts.knn)
    write_cv_long(rows, os.path.join(opts.out_dir, "cv_long.csv"))
    write_cv_summary(rows, os.path.join(opts.out_dir, "cv_summary.csv"))
    plots.plot_cv_accuracy(rows, os.path.join(opts.out_dir, "cv_accuracy.png"))
    for r in rows:
        print(f"[{r.protocol}] fold {r.fold + 1} {r.estimator}: "
              f"{100 * r.mean_accuracy:.4g}% ({100 * r.std_accuracy:.4g})")
    return 0


def _cmd_aggregate(opts):
    members = []
    for path in opts.models.split(","):
        if not path:
            continue
        model = load_model(path)
        # an aggregate file contributes its members; the LFS re-weights them
        members.extend(getattr(model, "members", [model]))
    ds = load_csv(opts.data, opts.label_col, opts.labeled, opts.header)
    agg = aggregate_lfs(members, ds)
    save_model(agg, opts.out)
    print("cbar: " + " ".join(F17.format(v) for v in agg.cbar))
    return 0


def _cmd_diagnose(opts):
    from . import plots

    if opts.features_only:
        X = load_features_csv(opts.data, opts.header)
    else:
        X = load_csv(opts.data, opts.label_col, None, opts.header).X
    kernel = parse_kernel(opts.kernel)
    gammas = _float_list(opts.gamma_grid)
    if not gammas:
        raise UsageError("empty gamma grid")
    os.makedirs(opts.out_dir, exist_ok=True)
    K = gram(kernel, X).values
    n = K.shape[0]
    kappa_sq = float(np.diag(K).max())

    eff, bounds, lev_max = [], [], []
    for g in gammas:
        eff.append(modelsel.effective_dimension(K, g))
        bounds.append(float(np.trace(K) / n / g))
        lev_max.append(float(modelsel.point_leverage(K, g).max()))
    mid_gamma = gammas[len(gammas) // 2]
    leverages = modelsel.point_leverage(K, mid_gamma)

    gaps = []
    if opts.landmarks:
        # nested landmark chain so the gap decay over s is meaningful
        sizes = sorted(min(s, n) for s in _int_list(opts.landmarks))
        perm = np.random.default_rng(opts.seed).permutation(n)
        for s in sizes:
            lm = np.sort(perm[:s])
            gaps.append((s, modelsel.nystrom_gap(K, K[:, lm], K[np.ix_(lm, lm)])))
    lambda0 = opts.lambda0 if opts.lambda0 is not None else mid_gamma
    cond_ok = modelsel.check_sample_condition(n, kappa_sq, lambda0, opts.eta)
    n_inf = modelsel.estimate_n_inf(K, lambda0 / 3.0)
    rec = modelsel.recommend_subsample_size(lambda0, opts.delta, kappa_sq, n_inf)

    with open(os.path.join(opts.out_dir, "diagnostics.csv"), "w") as fh:
        fh.write("gamma,effective_dimension,trace_bound,max_leverage\n")
        for g, e, tb, lm_ in zip(gammas, eff, bounds, lev_max):
            fh.write(",".join(F17.format(v) for v in (g, e, tb, lm_)) + "\n")
    with open(os.path.join(opts.out_dir, "diagnostics_summary.csv"), "w") as fh:
        fh.write("quantity,value\n")
        fh.write(f"kappa_sq,{F17.format(kappa_sq)}\n")
        fh.write(f"lambda0,{F17.format(lambda0)}\n")
        for s, gap in gaps:
            fh.write(f"nystrom_gap_sq_s{s},{F17.format(gap)}\n")
        fh.write(f"sample_condition_ok,{int(cond_ok)}\n")
        fh.write(f"n_inf,{F17.format(n_inf)}\n")
        fh.write(f"recommended_subsample,{rec}\n")
    plots.plot_diagnostics(gammas, eff, bounds, leverages,
                           os.path.join(opts.out_dir, "diagnostics.png"))
    print("effective dimension over gamma grid: "
          + ", ".join(f"{v:.4g}" for v in eff))
    for s, gap in gaps:
        print(f"nystrom gap^2 at s={s}: {gap:.4g} "
              f"(gap^2 <= lambda0: {'yes' if gap <= lambda0 else 'no'})")
    print(f"sample condition holds: {'yes' if cond_ok else 'no'}; "
          f"recommended subsample size: {rec}")
    return 0


def _make_target(opts, seed_seq):
    rng = np.random.default_rng(seed_seq.generate_state(1)[0])
    anchors = rng.random((opts.anchors, opts.dim))
    amplitudes = rng.standard_normal(opts.anchors)
    amplitudes /= max(np.abs(amplitudes).max(), 1e-12)
    kernel = parse_kernel(opts.kernel)
    return SyntheticTarget(anchors, amplitudes, kernel, opts.noise)


def _cmd_rate_check(opts):
    from . import plots

    root = np.random.SeedSequence(opts.seed)
    target_seq, experiment_seq = root.spawn(2)
    target = _make_target(opts, target_seq)
    cfg = RateRuleConfig(r=opts.r, b=opts.b, m=max(_int_list(opts.sizes)))
    report = rate_experiment(target, cfg, _int_list(opts.sizes), opts.trials,
                             seed=experiment_seq.generate_state(1)[0],
                             graph_b=opts.graph_b)
    os.makedirs(opts.out_dir, exist_ok=True)
    write_rate_csv(report, os.path.join(opts.out_dir, "rate.csv"))
    plots.plot_rate(report, os.path.join(opts.out_dir, "rate.png"))
    print(f"fitted slope {report.slope:.4g} "
          f"(theory {report.theoretical_exponent:.4g})")
    return 0


def _cmd_gen_synth(opts):
    root = np.random.SeedSequence(opts.seed)
    target_seq, data_seq = root.spawn(2)
    target = _make_target(opts, target_seq)
    m = opts.labeled if opts.labeled is not None else opts.n
    ds, truth = gen_synthetic(target, m, opts.n, seed=data_seq.generate_state(1)[0])
    with open(opts.out, "w") as fh:
        for i in range(ds.n):
            label = ds.Y[i, 0] if i < ds.m else 0.0
            fh.write(",".join(F17.format(v) for v in ds.X[i])
                     + "," + F17.format(label) + "\n")
    if opts.truth_out:
        with open(opts.truth_out, "w") as fh:
            for v in truth:
                fh.write(F17.format(v) + "\n")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "cross-validate": _cmd_cross_validate,
    "aggregate": _cmd_aggregate,
    "diagnose": _cmd_diagnose,
    "rate-check": _cmd_rate_check,
    "gen-synth": _cmd_gen_synth,
}


def run(argv):
    """Parse argv (without the program name) and execute; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        opts = _merge(args.command, args)
        return _COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
