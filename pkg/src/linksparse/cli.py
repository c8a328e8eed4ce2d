"""Command-line entry point: ``linksparse <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .ecdf import fit_ecdf, load_ecdf, read_samples, save_ecdf, write_samples
from .gcn import GcnModel, save_model
from .search import NetUtilityObjective, OverheadModel, peak_search
from .training import TrainConfig, UtilityProxy, alt_sgd_train

log = logging.getLogger("linksparse")

CLI_PROTOCOLS = ("lgs", "lgs-deadline", "lgs-flexible", "qcsma", "csma")
CLI_POLICIES = ("zero", "stat", "stat-scaled", "gcn", "hybrid")
# config keys read by other subcommands; one file can drive the whole pipeline
SHARED_KEYS = {"rows", "train", "n_samples"}
OVERHEAD_FOR = {"lgs_deadline": "fixed_deadline", "lgs_flexible": "flexible", "qcsma": "csma", "csma": "csma"}


class CliError(Exception):
    """Validation failure reported as a diagnostic with a nonzero exit code."""


def _read_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file {p} does not exist")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise CliError(f"config file {p} is not valid JSON: {e}") from e


def _need(args, name: str, cfg: dict | None = None, key: str | None = None):
    v = getattr(args, name, None)
    if v is None and cfg is not None:
        v = cfg.get(key or name)
    if v is None:
        raise CliError(f"missing required --{name.replace('_', '-')}")
    return v


def _protocol(args, cfg: dict, default: str) -> str:
    return (args.protocol or cfg.get("protocol") or default).replace("-", "_")


def _graphs(args, cfg: dict):
    if args.dataset:
        return ex.load_dataset(args.dataset)
    preset = args.preset or cfg.get("preset")
    if preset:
        return ex.generate_datasets(ex.preset_rows(preset, args.full or cfg.get("full", False)),
                                    ex.derive_seed(args.seed, "dataset"))
    if cfg.get("dataset"):
        return ex.load_dataset(cfg["dataset"])
    raise CliError("give --dataset DIR or --preset NAME")


def _traffic(cfg: dict):
    return ex.TrafficConfig(timing=ex.TimingConfig(**cfg.get("timing", {})), **cfg.get("traffic", {}))


def cmd_gen_graphs(args) -> int:
    cfg = _read_config(args.config)
    out = _need(args, "out", cfg)
    if cfg.get("rows"):
        rows = tuple(ex.row_from_dict(r) for r in cfg["rows"])
    else:
        rows = ex.preset_rows(_need(args, "preset", cfg), args.full or cfg.get("full", False))
    made = ex.generate_datasets(rows, ex.derive_seed(args.seed, "dataset"), out)
    print(f"wrote {len(made)} graphs to {out}")
    return 0


def cmd_collect_ecdf(args) -> int:
    cfg = _read_config(args.config)
    out = _need(args, "out", cfg)
    graphs = _graphs(args, cfg)
    protocol = _protocol(args, cfg, "lgs")
    samples = ex.collect_ecdf([g for _, g in graphs], protocol, _traffic(cfg), ex.derive_seed(args.seed, "ecdf"),
                              names=[n for n, _ in graphs])
    write_samples(out, samples)
    print(f"wrote {samples.size} utility samples to {out}")
    return 0


def cmd_fit_ecdf(args) -> int:
    src = _need(args, "samples")
    out = _need(args, "out")
    samples = read_samples(src)
    model = fit_ecdf(samples, n_knots=args.knots, provenance={"samples": str(src), "count": int(samples.size)})
    save_ecdf(out, model)
    print(f"fitted eCDF on {samples.size} samples; support {model.support}")
    return 0


def cmd_train(args) -> int:
    cfg = _read_config(args.config)
    out = _need(args, "out", cfg)
    graphs = [g for _, g in _graphs(args, cfg)]
    ecdf = load_ecdf(_need(args, "ecdf", cfg))
    tc = dict(cfg.get("train", {}))
    proxy = tc.pop("proxy", None)
    layers = int(tc.pop("layers", 1))
    hidden = int(tc.pop("hidden", 8))
    init = tc.pop("init", "identity")
    if args.epochs is not None:
        tc["epochs"] = args.epochs
    train_cfg = TrainConfig(proxy=UtilityProxy(**proxy) if proxy else None, **tc)
    rng = np.random.default_rng(ex.derive_seed(args.seed, "train"))
    if init == "identity":
        model = GcnModel.identity(layers, hidden)
    elif init == "random":
        model = GcnModel.random(layers, hidden, seed=ex.derive_seed(args.seed, "init"))
    else:
        raise CliError(f"unknown init {init!r}; use 'identity' or 'random'")
    model, tlog = alt_sgd_train(model, graphs, ecdf, train_cfg, rng)
    model.metadata["seed"] = args.seed
    save_model(out, model)
    if args.log:
        tlog.write_csv(args.log)
    v = tlog.epoch_violation[-1]
    print(f"trained {train_cfg.epochs} epochs on {len(graphs)} graphs; final-epoch violation fraction {v:.3f}")
    return 0


def cmd_search_eta(args) -> int:
    cfg = _read_config(args.config)
    graphs = [g for _, g in _graphs(args, cfg)]
    ecdf = load_ecdf(_need(args, "ecdf", cfg))
    protocol = _protocol(args, cfg, "lgs_deadline")
    if protocol not in OVERHEAD_FOR:
        raise CliError(f"search-eta needs a protocol with an overhead model, got {protocol!r}")
    tm = ex.TimingConfig(**cfg.get("timing", {}))
    om = OverheadModel(OVERHEAD_FOR[protocol], tau=tm.tau_ms / tm.slot_ms, K=tm.deadline_messages,
                       W=tm.contention_window)
    obj = NetUtilityObjective(graphs, ecdf, om, n_samples=int(cfg.get("n_samples", args.samples)),
                              seed=ex.derive_seed(args.seed, "search"))
    grid = [round(0.05 * i, 2) for i in range(1, 21)]
    rows = [{"eta": e, "objective": obj(e)} for e in grid]
    res = peak_search(obj, 0.0, 1.0, args.epsilon)
    rows.append({"eta": res.x, "objective": res.value})
    if args.out:
        ex.write_rows(args.out, rows)
    for r in rows[:-1]:
        print(f"{r['eta']:.2f},{r['objective']:.6g}")
    print(f"eta*={res.x:.4f} objective={res.value:.6g} iterations={res.iterations}")
    return 0


def _cli_policies(args, cfg: dict) -> list[dict]:
    if args.policy is None:
        return cfg.get("policies", [{"kind": "zero"}])
    doc = {"kind": args.policy}
    if args.eta is not None:
        doc["eta"] = args.eta
    if args.model:
        doc["model"] = args.model
    if args.hybrid_degree is not None:
        doc["hybrid_degree"] = args.hybrid_degree
    return [doc]


def cmd_sweep(args) -> int:
    cfg = _read_config(args.config)
    doc = dict(cfg)
    doc["seed"] = args.seed
    doc["policies"] = _cli_policies(args, cfg)
    for key in ("protocol", "ecdf", "dataset", "preset"):
        if getattr(args, key, None) is not None:
            doc[key] = getattr(args, key)
    if args.full:
        doc["full"] = True
    doc.pop("out", None)
    for key in SHARED_KEYS:
        doc.pop(key, None)
    known = set(ex.ExperimentConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    ecfg = ex.ExperimentConfig(**doc)
    out = _need(args, "out", cfg)
    rows = ex.run_sweep(
        ecfg.load_graphs(),
        ecfg.load_policies(),
        ecfg.protocol,
        ecfg.traffic_config() if ecfg.mode == "episode" else None,
        ecfg.seed,
        ecdf=ecfg.load_ecdf(),
        mode=ecfg.mode,
        states_per_graph=ecfg.states_per_graph,
        workers=ecfg.workers,
    )
    ex.write_rows(out, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_report(args) -> int:
    src = _need(args, "results")
    rows = ex.read_rows(src)
    ratios = ex.report_ratios(rows, args.reference)
    agg = ex.aggregate(ratios, keys=("degree_bin", "policy"))
    if args.out:
        ex.write_rows(args.out, ratios)
    cols = ["degree_bin", "policy", "count", "total_utility_ratio", "retained_count_ratio",
            "sparse_edge_count_ratio", "mean_backlog_ratio", "message_total_ratio"]
    print(",".join(cols))
    for r in agg:
        print(",".join(f"{r[c]:.4g}" if isinstance(r[c], float) else str(r[c]) for c in cols))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linksparse", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="JSON experiment configuration")
        sp.add_argument("--seed", type=int, default=0, help="master seed (sub-seeds are derived per role)")
        if out:
            sp.add_argument("--out", help="output path")
        return sp

    def data(sp):
        sp.add_argument("--dataset", help="directory of graph JSON files")
        sp.add_argument("--preset", choices=sorted(ex.TABLE_PRESETS), help="generate a preset grid in memory")
        sp.add_argument("--full", action="store_true", help="full-size instance counts")

    sp = common(sub.add_parser("gen-graphs", help="generate a graph dataset"))
    sp.add_argument("--preset", choices=sorted(ex.TABLE_PRESETS))
    sp.add_argument("--full", action="store_true", help="full-size instance counts")
    sp.set_defaults(func=cmd_gen_graphs)

    sp = common(sub.add_parser("collect-ecdf", help="record per-link utilities under the zero policy"))
    data(sp)
    sp.add_argument("--protocol", choices=CLI_PROTOCOLS)
    sp.set_defaults(func=cmd_collect_ecdf)

    sp = common(sub.add_parser("fit-ecdf", help="fit the smooth utility CDF"))
    sp.add_argument("--samples", help="utility sample file, one value per line")
    sp.add_argument("--knots", type=int, default=256)
    sp.set_defaults(func=cmd_fit_ecdf)

    sp = common(sub.add_parser("train", help="train the threshold GCN with alternating SGD"))
    data(sp)
    sp.add_argument("--ecdf", help="fitted eCDF file")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--log", help="per-batch training log CSV")
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("search-eta", help="locate the net-utility-maximizing cut-off quantile"))
    data(sp)
    sp.add_argument("--ecdf", help="fitted eCDF file")
    sp.add_argument("--protocol", choices=CLI_PROTOCOLS[1:])
    sp.add_argument("--samples", type=int, default=200, help="frozen network-state draws")
    sp.add_argument("--epsilon", type=float, default=0.01)
    sp.set_defaults(func=cmd_search_eta)

    sp = common(sub.add_parser("sweep", help="run policies over a dataset and record metrics"))
    data(sp)
    sp.add_argument("--ecdf", help="fitted eCDF file")
    sp.add_argument("--protocol", choices=CLI_PROTOCOLS)
    sp.add_argument("--policy", choices=CLI_POLICIES)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--model", help="trained GCN model file")
    sp.add_argument("--hybrid-degree", type=int)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="ratios against the zero-threshold reference")
    sp.add_argument("--results", help="sweep results CSV")
    sp.add_argument("--reference", default="zero")
    sp.add_argument("--out", help="per-row ratio CSV")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, FileNotFoundError, KeyError, TypeError) as e:
        print(f"linksparse {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
