"""Command-line entry point wiring the toolkit into reproducible pipelines.

Layering: built-in defaults < --config file values < explicit flags. Every
subcommand echoes its effective configuration to <out-dir>/run.json, and
re-running `provkit <cmd> --config run.json` reproduces the outputs byte for
byte. Exit codes: 0 success, 2 usage, 3 malformed artifact, 4 contract
violation. PVK_THREADS sets the default worker count; thread count never
changes output bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bias_eval import read_bias_csv, summarize
from .dataloader import (
    DataOrderPlan,
    TrainingStream,
    checkpoint_schedule,
    write_sample_index,
)
from .dataset import open_dataset, write_dataset
from .dedup import dedup_dataset, dedup_texts
from .errors import ContractError, FormatError
from .intervention import InterventionPlan, apply_intervention, write_manifest
from .memorization import (
    ConstantOracle,
    FileOracle,
    LookupOracle,
    NgramOracle,
    fit_poisson,
    scan,
    write_summary,
)
from .term_frequency import (
    binned_accuracy,
    count_up_to,
    load_terms_json,
    performance_gap,
    read_accuracy_csv,
    read_counts_csv,
    write_bins_csv,
    write_counts_csv,
)

PLAN_KEYS = ("seed", "batch_size", "seq_len", "train_iters", "eod_token")

# built-in detokenizers usable from the command line; the library API takes
# arbitrary callbacks instead
def _numeric_detok(tokens) -> str:
    return " ".join(str(int(t)) for t in tokens)


def _numeric_retok(text: str) -> list[int]:
    return [int(w) for w in text.split()]


DETOKS = {"numeric": (_numeric_detok, _numeric_retok)}


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("PVK_THREADS", "1")))
    except ValueError:
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="provkit",
        description="training-data provenance toolkit",
    )
    parser.add_argument("--version", action="version", version=f"provkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out-dir", default=None, help="output directory (default: .)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $PVK_THREADS or 1)")

    def plan_flags(p):
        p.add_argument("--plan", help="plan JSON file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--seq-len", type=int, default=None)
        p.add_argument("--train-iters", type=int, default=None)
        p.add_argument("--eod-token", type=int, default=None)

    p = sub.add_parser("build-dataset", help="serialize token documents to .bin/.idx")
    common(p)
    p.add_argument("--input", default=None, help="text file: one doc per line, space-separated ids")
    p.add_argument("--dtype", default=None, choices=["u16", "u32"])
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--out", default=None, help="output base path")

    p = sub.add_parser("reconstruct", help="dump the batches served at given steps")
    common(p)
    plan_flags(p)
    p.add_argument("--data", default=None, help="dataset base path")
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--count", type=int, default=None, help="number of consecutive steps")
    p.add_argument("--export-index", default=None, help="also write the sample index (u64 LE)")

    p = sub.add_parser("schedule", help="print checkpoint steps, one per line")
    common(p)
    p.add_argument("--train-iters", type=int, default=None)
    p.add_argument("--interval", type=int, default=None)

    p = sub.add_parser("dedup", help="near-deduplicate documents with MinHash LSH")
    common(p)
    p.add_argument("--text", default=None, help="newline-delimited raw text documents")
    p.add_argument("--data", default=None, help="dataset base path")
    p.add_argument("--detok", default=None, choices=sorted(DETOKS))
    p.add_argument("--verify-threshold", type=float, default=None)
    p.add_argument("--write-kept", default=None, help="base path for the deduplicated dataset")

    p = sub.add_parser("scan-mem", help="scan the training stream for memorized sequences")
    common(p)
    plan_flags(p)
    p.add_argument("--data", default=None)
    p.add_argument("--oracle", default=None,
                   help="lookup:DATASET_BASE | ngram:ORDER | file:PATH | constant:TOKEN")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--slice-size", type=int, default=None)

    p = sub.add_parser("fit-poisson", help="dispersion test of slice counts")
    common(p)
    p.add_argument("--counts", default=None, help="CSV with a count column, or bare integers")

    p = sub.add_parser("count-freq", help="count terms over the stream seen up to a step")
    common(p)
    plan_flags(p)
    p.add_argument("--data", default=None)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--terms", default=None, help="terms JSON file")
    p.add_argument("--detok", default=None, choices=sorted(DETOKS))

    p = sub.add_parser("gap-report", help="top/bottom-decile accuracy gap")
    common(p)
    p.add_argument("--counts", default=None, help="counts CSV (term,step,count)")
    p.add_argument("--accuracy", default=None, help="accuracy CSV (term,accuracy[,shots])")
    p.add_argument("--model", default=None)
    p.add_argument("--shots", type=int, default=None)

    p = sub.add_parser("swap-pronouns", help="masculine-to-feminine counterfactual stream")
    common(p)
    plan_flags(p)
    p.add_argument("--text-in", default=None, help="plain text file to transform")
    p.add_argument("--text-out", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--fraction", type=float, default=None)
    p.add_argument("--mode", default=None, choices=["text", "token"])
    p.add_argument("--detok", default=None, choices=sorted(DETOKS))
    p.add_argument("--token-map", default=None, help="JSON file {source_id: target_id}")
    p.add_argument("--out", default=None, help="output dataset base path")

    p = sub.add_parser("score-bias", help="score CrowS-Pairs / WinoBias style CSVs")
    common(p)
    p.add_argument("--input", default=None, help="CSV: id,value_stereo,value_anti,metric")

    return parser


DEFAULTS: dict[str, dict] = {
    "build-dataset": {"dtype": "u16", "vocab_size": 0},
    "reconstruct": {"count": 1},
    "schedule": {"train_iters": 143000, "interval": 1000},
    "dedup": {},
    "scan-mem": {"k": 32, "ell": 32, "slice_size": 512},
    "fit-poisson": {},
    "count-freq": {"detok": "numeric"},
    "gap-report": {"model": "model", "shots": 0},
    "swap-pronouns": {"mode": "text", "detok": "numeric", "fraction": 0.07},
    "score-bias": {},
}

PLAN_DEFAULTS = {"batch_size": 1024, "seq_len": 2048, "train_iters": 143000,
                 "eod_token": None, "seed": 0}


def _effective_config(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags; None marks 'not given'."""
    cmd = args.command
    cfg = dict(DEFAULTS.get(cmd, {}))
    cfg["out_dir"] = "."
    cfg["threads"] = _default_threads()
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ContractError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: invalid JSON config: {e}") from e
        loaded.pop("command", None)
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg[key] = value
    return cfg


def _plan_from(cfg: dict) -> DataOrderPlan:
    base = dict(PLAN_DEFAULTS)
    if cfg.get("plan"):
        base.update(json.loads(Path(cfg["plan"]).read_text()))
    for key in PLAN_KEYS:
        if cfg.get(key) is not None and key in cfg:
            base[key] = cfg[key]
    return DataOrderPlan(**{k: base[k] for k in PLAN_KEYS})


def _write_run_json(cfg: dict, command: str, out_dir: Path) -> None:
    payload = {"command": command, **{k: v for k, v in cfg.items()}}
    (out_dir / "run.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ContractError(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")


# --- subcommand bodies ------------------------------------------------------


def _cmd_build_dataset(cfg, out_dir):
    _require(cfg, "input", "out")
    docs = []
    for line in Path(cfg["input"]).read_text().splitlines():
        docs.append([int(w) for w in line.split()])
    write_dataset(docs, cfg["dtype"], cfg["out"], vocab_size=cfg["vocab_size"])
    print(f"wrote {len(docs)} documents to {cfg['out']}.bin/.idx")


def _cmd_reconstruct(cfg, out_dir):
    _require(cfg, "data", "step")
    ds = open_dataset(cfg["data"])
    plan = _plan_from(cfg)
    stream = TrainingStream(ds, plan)
    for step in range(cfg["step"], cfg["step"] + cfg["count"]):
        batch = stream.batch(step)
        cids = stream.index[step * plan.batch_size : (step + 1) * plan.batch_size]
        path = out_dir / f"batch_{step}.csv"
        with open(path, "w") as fh:
            fh.write("step,slot,context_id,tokens\n")
            for slot, (cid, row) in enumerate(zip(cids, batch)):
                toks = " ".join(str(int(t)) for t in row)
                fh.write(f"{step},{slot},{int(cid)},{toks}\n")
        print(f"wrote {path}")
    if cfg.get("export_index"):
        write_sample_index(stream.index, cfg["export_index"])
        print(f"wrote {cfg['export_index']}")


def _cmd_schedule(cfg, out_dir):
    sched = checkpoint_schedule(cfg["train_iters"], save_interval=cfg["interval"])
    for step in sched:
        print(step)


def _cmd_dedup(cfg, out_dir):
    threads = cfg["threads"]
    verify = cfg.get("verify_threshold")
    if cfg.get("text"):
        texts = Path(cfg["text"]).read_text().splitlines()
        report = dedup_texts(texts, verify_threshold=verify, threads=threads)
        ds = None
    elif cfg.get("data"):
        _require(cfg, "detok")
        ds = open_dataset(cfg["data"])
        detok = DETOKS[cfg["detok"]][0]
        report = dedup_dataset(ds, detok, verify_threshold=verify, threads=threads)
    else:
        raise ContractError("dedup needs --text or --data")
    (out_dir / "dedup_report.json").write_text(report.to_json() + "\n")
    print(f"{report.doc_count} docs -> {len(report.kept)} kept")
    if cfg.get("write_kept"):
        if ds is None:
            raise ContractError("--write-kept requires --data input")
        write_dataset([ds.document(i) for i in report.kept], ds.dtype_code,
                      cfg["write_kept"], vocab_size=ds.vocab_size)
        print(f"wrote kept docs to {cfg['write_kept']}.bin/.idx")


def _parse_oracle(spec: str, k: int, ell: int):
    kind, _, arg = spec.partition(":")
    if kind == "lookup":
        strings_ds = open_dataset(arg)
        return LookupOracle([d for d in strings_ds.documents()], k=k, ell=ell)
    if kind == "ngram":
        raise ContractError("ngram oracle needs the corpus; resolved in scan-mem")
    if kind == "file":
        return FileOracle(arg, ell=ell)
    if kind == "constant":
        return ConstantOracle(int(arg), ell=ell)
    raise ContractError(f"unknown oracle spec {spec!r}")


def _cmd_scan_mem(cfg, out_dir):
    _require(cfg, "data", "oracle")
    ds = open_dataset(cfg["data"])
    plan = _plan_from(cfg)
    stream = TrainingStream(ds, plan)
    k, ell = cfg["k"], cfg["ell"]
    kind, _, arg = cfg["oracle"].partition(":")
    if kind == "ngram":
        joined = stream.fetch(np.arange(stream.n_contexts * plan.context_len, dtype=np.uint64))
        oracle = NgramOracle([joined], order=int(arg), ell=ell)
    else:
        oracle = _parse_oracle(cfg["oracle"], k, ell)
    result = scan(ds, plan, oracle, k=k, ell=ell, slice_size=cfg["slice_size"], stream=stream)
    result.write_csv(out_dir / "scan_records.csv")
    fit = fit_poisson(result.slice_counts) if len(result.slice_counts) >= 2 else None
    summary = {
        "k": k, "ell": ell, "slice_size": cfg["slice_size"],
        "total_scanned": result.total_scanned,
        "memorized": result.memorized_count,
        "rate": result.rate,
    }
    if fit is not None:
        summary.update(fit.to_dict())
    (out_dir / "scan_summary.json").write_text(json.dumps(summary, sort_keys=True) + "\n")
    print(f"scanned {result.total_scanned}, memorized {result.memorized_count}")


def _read_counts_file(path: Path) -> list[int]:
    lines = path.read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty counts file")
    if lines[0].strip().lower() in ("count", "counts"):
        lines = lines[1:]
    try:
        return [int(ln.strip()) for ln in lines if ln.strip()]
    except ValueError as e:
        raise FormatError(f"{path}: counts must be integers: {e}") from e


def _cmd_fit_poisson(cfg, out_dir):
    _require(cfg, "counts")
    counts = _read_counts_file(Path(cfg["counts"]))
    fit = fit_poisson(counts)
    write_summary(fit, out_dir / "poisson_fit.json")
    print(f"lambda_hat={fit.lambda_hat:.6g} dispersion={fit.dispersion:.6g} "
          f"p_value={fit.p_value:.6g}")


def _cmd_count_freq(cfg, out_dir):
    _require(cfg, "data", "step", "terms")
    ds = open_dataset(cfg["data"])
    plan = _plan_from(cfg)
    terms = load_terms_json(cfg["terms"])
    detok = DETOKS[cfg["detok"]][0]
    counts = count_up_to(ds, plan, detok, cfg["step"], terms)
    write_counts_csv(counts, cfg["step"], out_dir / "counts.csv")
    print(f"counted {len(terms)} terms over {cfg['step'] * plan.batch_size} contexts")


def _cmd_gap_report(cfg, out_dir):
    _require(cfg, "counts", "accuracy")
    # counts/accuracy are keyed by term labels; the binning and decile rules
    # only need count order, so the library functions apply directly
    label_counts, step = read_counts_csv(Path(cfg["counts"]))
    accuracy = read_accuracy_csv(Path(cfg["accuracy"]))
    accs = {t: accuracy[t] for t in label_counts if t in accuracy}
    report = performance_gap(label_counts, accs)
    payload = {
        "model": cfg["model"],
        "step": step,
        "shots": cfg["shots"],
        **report.to_dict(),
    }
    (out_dir / "gap.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
    write_bins_csv(binned_accuracy(label_counts, accs), out_dir / "bins.csv")
    print(f"delta={report.delta:.6g} over {report.n_terms} terms")


def _cmd_swap_pronouns(cfg, out_dir):
    if cfg.get("text_in"):
        _require(cfg, "text_out")
        from .intervention import swap_pronouns_text

        text = Path(cfg["text_in"]).read_text()
        Path(cfg["text_out"]).write_text(swap_pronouns_text(text))
        print(f"wrote {cfg['text_out']}")
        return
    _require(cfg, "data", "out", "fraction")
    ds = open_dataset(cfg["data"])
    plan = _plan_from(cfg)
    iplan = InterventionPlan(fraction=cfg["fraction"], train_iters=plan.train_iters,
                             mode=cfg["mode"])
    if cfg["mode"] == "token":
        _require(cfg, "token_map")
        raw = json.loads(Path(cfg["token_map"]).read_text())
        token_map = {int(k): int(v) for k, v in raw.items()}
        _, manifest = apply_intervention(ds, plan, iplan, cfg["out"], token_map=token_map)
    else:
        detok, retok = DETOKS[cfg["detok"]]
        _, manifest = apply_intervention(ds, plan, iplan, cfg["out"], detok=detok, retok=retok)
    write_manifest(manifest, out_dir / "intervention_manifest.json")
    print(f"start_step={manifest['start_step']} "
          f"replacements={sum(manifest['replacements'].values())}")


def _cmd_score_bias(cfg, out_dir):
    _require(cfg, "input")
    grouped = read_bias_csv(cfg["input"])
    payload = {metric: summarize(records) for metric, records in sorted(grouped.items())}
    (out_dir / "bias_scores.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
    for metric, s in payload.items():
        print(f"{metric}: score={s['score']:.6g} n={s['n']} ties={s['ties']}")


HANDLERS = {
    "build-dataset": _cmd_build_dataset,
    "reconstruct": _cmd_reconstruct,
    "schedule": _cmd_schedule,
    "dedup": _cmd_dedup,
    "scan-mem": _cmd_scan_mem,
    "fit-poisson": _cmd_fit_poisson,
    "count-freq": _cmd_count_freq,
    "gap-report": _cmd_gap_report,
    "swap-pronouns": _cmd_swap_pronouns,
    "score-bias": _cmd_score_bias,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
        out_dir = Path(cfg["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_run_json(cfg, args.command, out_dir)
        HANDLERS[args.command](cfg, out_dir)
        return 0
    except FormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return 3
    except (ContractError, OverflowError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
