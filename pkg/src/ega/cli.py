"""Command-line harness: gen, train, eval, sweep, bound, report.

Every run resolves its options from defaults, then a flat key=value
config file, then explicit flags (flags win), and writes the resolved
view to <out>/<run-id>/config.snapshot. The snapshot's hash names the
run and tags every report, and nothing reads the wall clock, so a rerun
with the same inputs is byte-identical.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bound as bound_mod
from .adapters import AdapterConfig, adapter_forward, load_params, save_params
from .data import SplitSpec, gen_synthetic, load_embeddings, make_split, save_embeddings
from .errors import ConfigError, DataFormatError, DegenerateNormError, EgaError, NumericError
from .metrics import MetricsReport, distance_histograms, evaluate_grid, worst_case_lp
from .training import TrainConfig, TrainTelemetry, train

log = logging.getLogger("ega")

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _parse_config_file(path):
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = stripped.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _int_list(text):
    try:
        return tuple(int(x) for x in str(text).split(","))
    except ValueError as e:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from e


def _float_list(text):
    try:
        return tuple(float(x) for x in str(text).split(","))
    except ValueError as e:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from e


class Options:
    """Layered option lookup: CLI flag, then config file, then default."""

    def __init__(self, args):
        self.args = vars(args)
        self.file = _parse_config_file(args.config) if getattr(args, "config", None) else {}

    def get(self, key, default=None, convert=None):
        flag = self.args.get(key.replace("-", "_"))
        if flag is not None:
            return flag
        if key in self.file:
            raw = self.file[key]
            if convert is not None:
                try:
                    return convert(raw)
                except (TypeError, ValueError) as e:
                    raise ConfigError(f"config key {key}={raw!r}: {e}") from e
            return raw
        return default


def _out_root(opts):
    return Path(opts.get("out-dir") or os.environ.get("EGA_OUT_DIR") or "runs")


def _snapshot_text(resolved):
    lines = [f"{k}={resolved[k]}" for k in sorted(resolved)]
    return "\n".join(lines) + "\n"


def _make_run_dir(opts, command, resolved):
    text = _snapshot_text(resolved)
    digest = hashlib.sha256(text.encode()).hexdigest()[:8]
    run_id = opts.get("run-id") or f"{command}-{digest}"
    run_dir = _out_root(opts) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.snapshot").write_text(text)
    return run_dir, digest


def _split_spec(opts):
    return SplitSpec(
        mode=opts.get("split", "id"),
        db_fraction=float(opts.get("db-fraction", 0.75, convert=float)),
        seen_fraction=float(opts.get("seen-fraction", 0.8, convert=float)),
        seed=int(opts.get("split-seed", 0, convert=int)),
    )


def _adapter_cfg(opts, d, seed):
    ablate = opts.get("ablate") or ()
    if isinstance(ablate, str):
        ablate = tuple(x for x in ablate.split(",") if x)
    use_residual = "no-residual" not in ablate
    # a zero-initialized map without its residual path is identically zero,
    # so that ablation implies non-zero init
    use_zero_init = "no-zero-init" not in ablate and use_residual
    return AdapterConfig(
        variant=opts.get("variant", "ega"),
        d=d,
        h=int(opts.get("hidden", 2048, convert=int)),
        r=int(opts.get("rank", 128, convert=int)),
        use_residual=use_residual,
        use_zero_init=use_zero_init,
        use_l2_norm="no-l2-norm" not in ablate,
        seed=seed,
    ).validate()


def _train_cfg(opts, seed):
    lr = opts.get("lr", convert=float)
    return TrainConfig(
        loss=opts.get("loss", "triplet"),
        epochs=int(opts.get("epochs", 50, convert=int)),
        batch_size=int(opts.get("batch-size", 256, convert=int)),
        lr=None if lr is None else float(lr),
        lr_min=float(opts.get("lr-min", 0.0, convert=float)),
        weight_decay=float(opts.get("weight-decay", 1e-4, convert=float)),
        margin=float(opts.get("margin", 0.2, convert=float)),
        temperature=float(opts.get("temperature", 0.07, convert=float)),
        seed=seed,
        snapshot_every=int(opts.get("snapshot-every", 0, convert=int)),
    ).validate()


def _resolved_train_keys(opts, data, seed):
    cfg = {
        "command": "train",
        "data": data,
        "seed": seed,
        "variant": opts.get("variant", "ega"),
        "loss": opts.get("loss", "triplet"),
        "epochs": opts.get("epochs", 50, convert=int),
        "batch_size": opts.get("batch-size", 256, convert=int),
        "lr": opts.get("lr", "default", convert=float),
        "lr_min": opts.get("lr-min", 0.0, convert=float),
        "weight_decay": opts.get("weight-decay", 1e-4, convert=float),
        "margin": opts.get("margin", 0.2, convert=float),
        "temperature": opts.get("temperature", 0.07, convert=float),
        "hidden": opts.get("hidden", 2048, convert=int),
        "rank": opts.get("rank", 128, convert=int),
        "ablate": ",".join(opts.get("ablate") or ()) if not isinstance(opts.get("ablate"), str) else opts.get("ablate"),
        "split": opts.get("split", "id"),
        "db_fraction": opts.get("db-fraction", 0.75, convert=float),
        "seen_fraction": opts.get("seen-fraction", 0.8, convert=float),
        "split_seed": opts.get("split-seed", 0, convert=int),
        "snapshot_every": opts.get("snapshot-every", 0, convert=int),
    }
    return cfg


def cmd_gen(args):
    opts = Options(args)
    out = opts.get("out")
    es = gen_synthetic(
        d=int(opts.get("d", 64, convert=int)),
        n_classes=int(opts.get("classes", 10, convert=int)),
        n_per_class=int(opts.get("per-class", 200, convert=int)),
        sigma=float(opts.get("sigma", 0.05, convert=float)),
        seed=int(opts.get("seed", 42, convert=int)),
    )
    save_embeddings(es, out)
    log.info("wrote %d x %d embeddings to %s", len(es), es.d, out)
    return 0


def cmd_train(args):
    opts = Options(args)
    data_path = opts.get("data")
    if data_path is None:
        raise ConfigError("train requires --data")
    seed = int(opts.get("seed", 42, convert=int))
    es = load_embeddings(data_path)
    split = make_split(es, _split_spec(opts))
    adapter_cfg = _adapter_cfg(opts, es.d, seed)
    train_cfg = _train_cfg(opts, seed)
    resolved = _resolved_train_keys(opts, data_path, seed)
    run_dir, digest = _make_run_dir(opts, "train", resolved)

    result = train(es.vectors[split.train], es.labels[split.train], train_cfg, adapter_cfg)
    save_params(run_dir / "params.egap", result.params, adapter_cfg)
    result.telemetry.to_csv(run_dir / "telemetry.csv")
    if result.snapshots:
        ckpt_dir = run_dir / "checkpoints"
        ckpt_dir.mkdir(exist_ok=True)
        for epoch, params in result.snapshots:
            save_params(ckpt_dir / f"ep{epoch:04d}.egap", params, adapter_cfg)
    log.info("run %s: %d steps, final loss %s", run_dir.name, len(result.telemetry), result.telemetry.loss[-1] if len(result.telemetry) else "n/a")
    return 0


def _apply_adapter(vectors, params, cfg):
    if params is None:
        return vectors
    return np.asarray(adapter_forward(vectors, params, cfg), dtype=np.float32)


def _eval_one(es, split, params, adapter_cfg, opts, metadata):
    base_v = _apply_adapter(es.vectors[split.database], params, adapter_cfg)
    query_v = _apply_adapter(es.vectors[split.queries], params, adapter_cfg)
    return evaluate_grid(
        base_v,
        es.labels[split.database],
        query_v,
        es.labels[split.queries],
        nlist=int(opts.get("nlist", 10, convert=int)),
        nprobes=_int_list(opts.get("nprobes", "1,5,10")),
        ks=_int_list(opts.get("ks", "1,3,5,10")),
        seed=int(opts.get("seed", 0, convert=int)),
        metadata=metadata,
    )


def cmd_eval(args):
    opts = Options(args)
    data_path = opts.get("data")
    if data_path is None:
        raise ConfigError("eval requires --data")
    es = load_embeddings(data_path)
    split = make_split(es, _split_spec(opts))

    compare = opts.get("compare")
    resolved = {
        "command": "eval",
        "data": data_path,
        "params": opts.get("params", ""),
        "compare": ",".join(compare) if compare else "",
        "split": opts.get("split", "id"),
        "db_fraction": opts.get("db-fraction", 0.75, convert=float),
        "seen_fraction": opts.get("seen-fraction", 0.8, convert=float),
        "split_seed": opts.get("split-seed", 0, convert=int),
        "nlist": opts.get("nlist", 10, convert=int),
        "nprobes": opts.get("nprobes", "1,5,10"),
        "ks": opts.get("ks", "1,3,5,10"),
        "seed": opts.get("seed", 0, convert=int),
    }
    run_dir, digest = _make_run_dir(opts, "eval", resolved)

    if compare:
        # worst-case LP@1 across the benchmarks listed in config, one row
        # per checkpoint
        bench = opts.get("benchmarks")
        if not bench:
            raise ConfigError("--compare needs a benchmarks=name:path,... config entry")
        benches = []
        for item in bench.split(","):
            name, _, path = item.partition(":")
            if not path:
                raise ConfigError(f"benchmark entry {item!r} is not name:path")
            benches.append((name, path))
        rows = []
        for ckpt in compare:
            params, cfg = load_params(ckpt)
            per_bench = {}
            for name, path in benches:
                bes = load_embeddings(path)
                bsplit = make_split(bes, _split_spec(opts))
                rep = _eval_one(bes, bsplit, params, cfg, opts, {})
                per_bench[name] = rep.lp[(1, max(rep.nprobes))]
            worst, worst_key = worst_case_lp(per_bench)
            rows.append((ckpt, worst, worst_key, per_bench))
        with open(run_dir / "compare.csv", "w") as f:
            names = [n for n, _ in benches]
            f.write("checkpoint,worst_lp1,worst_benchmark," + ",".join(names) + "\n")
            for ckpt, worst, worst_key, per in rows:
                f.write(f"{ckpt},{worst!r},{worst_key}," + ",".join(repr(per[n]) for n in names) + "\n")
        log.info("wrote %s", run_dir / "compare.csv")
        return 0

    params = None
    adapter_cfg = None
    params_path = opts.get("params")
    if params_path:
        params, adapter_cfg = load_params(params_path, variant=opts.get("variant"))
        if adapter_cfg.d != es.d:
            raise ConfigError(f"params expect d={adapter_cfg.d}, data has d={es.d}")
    metadata = {
        "config_hash": digest,
        "data": str(data_path),
        "provenance": es.provenance,
        "params": str(params_path or ""),
        "split": resolved["split"],
    }
    report = _eval_one(es, split, params, adapter_cfg, opts, metadata)
    report.to_json(run_dir / "metrics.json")
    report.to_csv(run_dir / "metrics.csv")
    if opts.get("histograms"):
        base_v = _apply_adapter(es.vectors[split.database], params, adapter_cfg)
        query_v = _apply_adapter(es.vectors[split.queries], params, adapter_cfg)
        hist = distance_histograms(
            base_v, query_v, k=max(_int_list(opts.get("ks", "1,3,5,10"))),
            seed=int(opts.get("seed", 0, convert=int)),
        )
        hist.to_csv(run_dir / "histograms.csv")
    log.info("wrote metrics under %s", run_dir)
    return 0


SWEEPABLE = ("margin", "rank", "hidden")


def cmd_sweep(args):
    opts = Options(args)
    param = opts.get("param")
    if param not in SWEEPABLE:
        raise ConfigError(f"--param must be one of {SWEEPABLE}, got {param!r}")
    values_raw = opts.get("values")
    if not values_raw:
        raise ConfigError("sweep requires --values")
    values = _float_list(values_raw) if param == "margin" else _int_list(values_raw)
    data_path = opts.get("data")
    if data_path is None:
        raise ConfigError("sweep requires --data")
    seeds = _int_list(opts.get("seeds", "42,123,456"))

    es = load_embeddings(data_path)
    split = make_split(es, _split_spec(opts))
    resolved = {
        "command": "sweep",
        "param": param,
        "values": values_raw,
        "seeds": ",".join(str(s) for s in seeds),
        "data": data_path,
        "variant": opts.get("variant", "ega"),
        "loss": opts.get("loss", "triplet"),
        "epochs": opts.get("epochs", 50, convert=int),
        "split": opts.get("split", "id"),
    }
    run_dir, _ = _make_run_dir(opts, "sweep", resolved)

    rows = []
    for value in values:
        for seed in seeds:
            sub = Options(args)
            sub.args = dict(sub.args)
            sub.args[param] = value
            adapter_cfg = _adapter_cfg(sub, es.d, seed)
            train_cfg = _train_cfg(sub, seed)
            child = _resolved_train_keys(sub, data_path, seed)
            child[param] = value
            digest = hashlib.sha256(_snapshot_text(child).encode()).hexdigest()[:8]
            result = train(es.vectors[split.train], es.labels[split.train], train_cfg, adapter_cfg)
            rep = _eval_one(es, split, result.params, adapter_cfg, sub, {"config_hash": digest})
            kmax_probe = max(rep.nprobes)
            rows.append((value, seed, digest, rep.lp[(1, kmax_probe)], rep.ar[(1, kmax_probe)]))
            log.info("%s=%s seed=%d lp1=%.4f", param, value, seed, rows[-1][3])

    with open(run_dir / "sweep.csv", "w") as f:
        f.write(f"{param},seed,config_hash,lp1,ar1\n")
        for value, seed, digest, lp1, ar1 in rows:
            f.write(f"{value},{seed},{digest},{lp1!r},{ar1!r}\n")
    with open(run_dir / "sweep_summary.csv", "w") as f:
        f.write(f"{param},lp1_mean,lp1_std,ar1_mean,ar1_std\n")
        for value in values:
            lps = [r[3] for r in rows if r[0] == value]
            ars = [r[4] for r in rows if r[0] == value]
            f.write(
                f"{value},{np.mean(lps)!r},{np.std(lps)!r},{np.mean(ars)!r},{np.std(ars)!r}\n"
            )
    log.info("wrote %s", run_dir / "sweep.csv")
    return 0


def _load_trajectory(run_dir):
    ckpt_dir = Path(run_dir) / "checkpoints"
    if not ckpt_dir.is_dir():
        raise ConfigError(f"{run_dir}: no checkpoints/ directory (train with --snapshot-every)")
    trajectory = []
    cfg = None
    for path in sorted(ckpt_dir.glob("ep*.egap")):
        params, cfg = load_params(path)
        trajectory.append((int(path.stem[2:]), params))
    if not trajectory:
        raise ConfigError(f"{ckpt_dir}: holds no checkpoints")
    return trajectory, cfg


def _bound_probes(run_dir, opts):
    snapshot = _parse_config_file(Path(run_dir) / "config.snapshot")
    data_path = opts.get("data") or snapshot.get("data")
    if data_path is None:
        raise ConfigError("bound needs --data or a data path in the run snapshot")
    es = load_embeddings(data_path)
    spec = SplitSpec(
        mode=snapshot.get("split", "id"),
        db_fraction=float(snapshot.get("db_fraction", 0.75)),
        seen_fraction=float(snapshot.get("seen_fraction", 0.8)),
        seed=int(snapshot.get("split_seed", 0)),
    )
    split = make_split(es, spec)
    if spec.mode == "ood":
        held_out = np.concatenate([split.database, split.queries])
    else:
        held_out = split.queries
    n_probes = int(opts.get("probes", 64, convert=int))
    rng = np.random.default_rng(int(opts.get("seed", 0, convert=int)))
    if held_out.size > n_probes:
        held_out = np.sort(rng.choice(held_out, size=n_probes, replace=False))
    return es.vectors[held_out], snapshot


def _run_bound_rows(run_dir, opts):
    trajectory, cfg = _load_trajectory(run_dir)
    telemetry = TrainTelemetry.from_csv(Path(run_dir) / "telemetry.csv")
    probes, snapshot = _bound_probes(run_dir, opts)
    rho_one = snapshot.get("loss") == "infonce"
    g_hat = opts.get("g-hat", convert=float)
    if g_hat is not None:
        g_hat = float(g_hat)
    return bound_mod.bound_report(
        trajectory,
        telemetry,
        probes,
        cfg,
        g_hat=g_hat,
        rho_one=rho_one,
        power_iters=int(opts.get("power-iters", 20, convert=int)),
        seed=int(opts.get("seed", 0, convert=int)),
    )


def cmd_bound(args):
    opts = Options(args)
    if opts.get("linear_demo"):
        seed = int(opts.get("seed", 0, convert=int))
        resolved = {"command": "bound-linear", "seed": seed}
        run_dir, _ = _make_run_dir(opts, "bound-linear", resolved)
        report = bound_mod.linear_illustration(seed=seed)
        report.to_json(run_dir / "linear_report.json")
        report.to_csv(run_dir / "linear_report.csv")
        log.info(
            "linear demo: drift %.4g <= bound %.4g; orthogonal probe drift %.4g",
            report.checkpoints[-1].drift,
            report.checkpoints[-1].bound,
            report.orthogonal_probe_drift,
        )
        return 0
    run_dir_arg = opts.get("run-dir")
    if run_dir_arg is None:
        raise ConfigError("bound requires --run-dir or --linear-demo")
    resolved = {
        "command": "bound",
        "run_dir": run_dir_arg,
        "contrast_run": opts.get("contrast-run", ""),
        "probes": opts.get("probes", 64, convert=int),
        "power_iters": opts.get("power-iters", 20, convert=int),
        "seed": opts.get("seed", 0, convert=int),
    }
    out_dir, _ = _make_run_dir(opts, "bound", resolved)
    rows = _run_bound_rows(run_dir_arg, opts)
    bound_mod.write_bound_csv(rows, out_dir / "bound_report.csv")
    contrast = opts.get("contrast-run")
    if contrast:
        other = _run_bound_rows(contrast, opts)
        with open(out_dir / "contrast.csv", "w") as f:
            f.write("run,final_max_drift,final_bound\n")
            f.write(f"{run_dir_arg},{rows[-1].max_drift!r},{rows[-1].bound_value!r}\n")
            f.write(f"{contrast},{other[-1].max_drift!r},{other[-1].bound_value!r}\n")
    log.info("wrote %s", out_dir / "bound_report.csv")
    return 0


def cmd_report(args):
    opts = Options(args)
    runs = opts.get("runs")
    if not runs:
        raise ConfigError("report requires --runs")
    reports = []
    for run in runs:
        path = Path(run) / "metrics.json"
        if not path.exists():
            raise ConfigError(f"{run}: no metrics.json")
        reports.append(MetricsReport.from_json(path))
    ks, nprobes = reports[0].ks, reports[0].nprobes
    for r in reports[1:]:
        if (r.ks, r.nprobes) != (ks, nprobes):
            raise ConfigError("runs evaluate different (K, nprobe) grids; cannot aggregate")
    out = Path(opts.get("out") or "report.csv")
    with open(out, "w") as f:
        f.write("k,nprobe,lp_mean,lp_std,ar_mean,ar_std,n_runs\n")
        for k in ks:
            for p in nprobes:
                lps = [r.lp[(k, p)] for r in reports]
                ars = [r.ar[(k, p)] for r in reports]
                f.write(
                    f"{k},{p},{float(np.mean(lps))!r},{float(np.std(lps))!r},"
                    f"{float(np.mean(ars))!r},{float(np.std(ars))!r},{len(reports)}\n"
                )
    log.info("wrote %s", out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ega", description="Adapter training and retrieval evaluation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file; flags override it")
        p.add_argument("--out-dir", help="output root (default: $EGA_OUT_DIR or ./runs)")
        p.add_argument("--run-id", help="override the derived run directory name")
        p.add_argument("--seed", type=int)

    g = sub.add_parser("gen", help="generate synthetic unit embeddings")
    common(g)
    g.add_argument("--d", type=int)
    g.add_argument("--classes", type=int)
    g.add_argument("--per-class", type=int)
    g.add_argument("--sigma", type=float)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="fit an adapter and log telemetry")
    common(t)
    t.add_argument("--data")
    t.add_argument("--variant", choices=["ega", "lora"])
    t.add_argument("--loss", choices=["triplet", "infonce"])
    t.add_argument("--margin", type=float)
    t.add_argument("--temperature", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--lr-min", type=float)
    t.add_argument("--weight-decay", type=float)
    t.add_argument("--hidden", type=int)
    t.add_argument("--rank", type=int)
    t.add_argument("--ablate", action="append", choices=["no-residual", "no-zero-init", "no-l2-norm"])
    t.add_argument("--split", choices=["id", "ood"])
    t.add_argument("--db-fraction", type=float)
    t.add_argument("--seen-fraction", type=float)
    t.add_argument("--split-seed", type=int)
    t.add_argument("--snapshot-every", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="retrieval metrics over the (K, nprobe) grid")
    common(e)
    e.add_argument("--data")
    e.add_argument("--params")
    e.add_argument("--variant", choices=["ega", "lora"])
    e.add_argument("--split", choices=["id", "ood"])
    e.add_argument("--db-fraction", type=float)
    e.add_argument("--seen-fraction", type=float)
    e.add_argument("--split-seed", type=int)
    e.add_argument("--nlist", type=int)
    e.add_argument("--nprobes")
    e.add_argument("--ks")
    e.add_argument("--histograms", action="store_true", default=None)
    e.add_argument("--compare", nargs=2, metavar=("A", "B"))
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="train/eval across one hyperparameter and seeds")
    common(s)
    s.add_argument("--param", choices=list(SWEEPABLE))
    s.add_argument("--values")
    s.add_argument("--seeds")
    s.add_argument("--data")
    s.add_argument("--variant", choices=["ega", "lora"])
    s.add_argument("--loss", choices=["triplet", "infonce"])
    s.add_argument("--margin", type=float)
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--weight-decay", type=float)
    s.add_argument("--hidden", type=int)
    s.add_argument("--rank", type=int)
    s.add_argument("--split", choices=["id", "ood"])
    s.add_argument("--db-fraction", type=float)
    s.add_argument("--seen-fraction", type=float)
    s.add_argument("--split-seed", type=int)
    s.add_argument("--nlist", type=int)
    s.add_argument("--nprobes")
    s.add_argument("--ks")
    s.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bound", help="drift vs update-budget bound over a checkpoint trajectory")
    common(b)
    b.add_argument("--run-dir")
    b.add_argument("--contrast-run")
    b.add_argument("--data")
    b.add_argument("--probes", type=int)
    b.add_argument("--power-iters", type=int)
    b.add_argument("--g-hat", type=float)
    b.add_argument("--linear-demo", action="store_true", default=None, dest="linear_demo")
    b.set_defaults(func=cmd_bound)

    r = sub.add_parser("report", help="aggregate metrics.json files across runs")
    common(r)
    r.add_argument("--runs", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        log.error("%s", e)
        return EXIT_CONFIG
    except DataFormatError as e:
        log.error("%s", e)
        return EXIT_DATA
    except (NumericError, DegenerateNormError) as e:
        log.error("%s", e)
        return EXIT_NUMERIC
    except EgaError as e:
        log.error("%s", e)
        return EXIT_CONFIG
    except OSError as e:
        log.error("%s", e)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
