"""``longdist`` command line.

Exit codes: 0 success, 2 usage/validation, 3 I/O or malformed input,
4 numeric failure (training divergence).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import distance as dist
from . import equations as eqn
from . import fidelity as fid
from . import mlp
from .traces import TraceError, TraceFormatError, read_trace, write_trace

log = logging.getLogger("longdist")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
METRICS = {"ld": dist.DistanceKind.LONGITUDINAL, "sld": dist.DistanceKind.STRICT}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_USAGE, f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise CliError(EXIT_USAGE, f"{path} must hold a JSON object")
    return obj


def _outdir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create output directory {p}: {exc}") from exc
    if not os.access(p, os.W_OK):
        raise CliError(EXIT_IO, f"output directory {p} is not writable")
    return p


def _read_trace(path):
    try:
        return read_trace(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    except TraceFormatError as exc:
        raise CliError(EXIT_IO, f"{path}: {exc}") from exc


def _parse_kinds(text: str) -> Tuple[dist.DistanceKind, ...]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    try:
        return tuple(METRICS[n] for n in names)
    except KeyError as exc:
        raise CliError(EXIT_USAGE, f"unknown metric {exc.args[0]!r}; use ld or sld") from exc


# --- configs ----------------------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    sample_n: int = 1000
    seed: int = 0
    epsilon: float = 0.0
    kinds: Tuple[str, ...] = ("ld", "sld")

    def __post_init__(self):
        if self.sample_n < 1:
            raise ValueError("sample_n must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not self.kinds or any(k not in METRICS for k in self.kinds):
            raise ValueError(f"kinds must be a non-empty subset of {sorted(METRICS)}")
        object.__setattr__(self, "kinds", tuple(self.kinds))


@dataclass(frozen=True)
class RunConfig:
    data: eqn.DataConfig = field(default_factory=eqn.DataConfig)
    train: mlp.TrainConfig = field(default_factory=mlp.TrainConfig)
    evaluate: EvalConfig = field(default_factory=EvalConfig)
    output_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        """Nested ``data``/``train``/``evaluate`` sections; a top-level ``seed``
        fills every section that does not set its own."""
        unknown = set(d) - {"data", "train", "evaluate", "seed", "output_dir"}
        if unknown:
            raise ValueError(f"unknown run config keys: {sorted(unknown)}")
        seed = d.get("seed")
        sections = {}
        for name in ("data", "train", "evaluate"):
            sec = dict(d.get(name) or {})
            if seed is not None:
                sec.setdefault("seed", seed)
            sections[name] = sec
        ev = sections["evaluate"]
        if "kinds" in ev:
            ev["kinds"] = tuple(ev["kinds"])
        return cls(
            data=eqn.DataConfig.from_dict(sections["data"]),
            train=mlp.TrainConfig.from_dict(sections["train"]),
            evaluate=EvalConfig(**ev),
            output_dir=d.get("output_dir"),
        )


# --- commands ---------------------------------------------------------------


def gen_data(config: eqn.DataConfig, out) -> dict:
    out = _outdir(out)
    train, test = eqn.generate(config)
    eqn.write_csv(train, out / "train.csv")
    eqn.write_csv(test, out / "test.csv")
    manifest = {
        "config": config.to_dict(),
        "equations": {str(i): f for i, f in enumerate(config.equations)},
        "interval": [config.interval_lo, config.interval_hi],
        "seed": config.seed,
        "files": {
            "train.csv": sha256_file(out / "train.csv"),
            "test.csv": sha256_file(out / "test.csv"),
        },
    }
    _write_json(out / "data_manifest.json", manifest)
    log.info("wrote %d train / %d test rows to %s", len(train), len(test), out)
    return manifest


def train_model(data_dir, out, config: mlp.TrainConfig) -> dict:
    data_dir = Path(data_dir)
    out = _outdir(out)
    n_classes = len(eqn.DEFAULT_EQUATIONS)
    data_manifest_hash = None
    manifest_path = data_dir / "data_manifest.json"
    if manifest_path.exists():
        n_classes = len(_load_json(manifest_path)["equations"])
        data_manifest_hash = sha256_file(manifest_path)
    try:
        train = eqn.read_csv(data_dir / "train.csv", n_classes)
        test = eqn.read_csv(data_dir / "test.csv", n_classes)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read data: {exc}") from exc
    except eqn.DataError as exc:
        raise CliError(EXIT_IO, f"malformed data in {data_dir}: {exc}") from exc
    if len(train) == 0 or len(test) == 0:
        raise CliError(EXIT_IO, "train.csv and test.csv must both hold rows")
    try:
        std = eqn.fit_standardizer(train)
    except eqn.DataError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc

    weight_files: List[str] = []

    def on_epoch(snap: mlp.EpochSnapshot) -> None:
        if snap.weights is not None:
            name = f"epoch_{snap.epoch}.wts"
            (out / name).write_bytes(snap.weights)
            weight_files.append(name)

    try:
        result = mlp.train(
            eqn.standardize(std, train), train.labels,
            eqn.standardize(std, test), test.labels,
            config, n_classes=n_classes, on_epoch_end=on_epoch,
        )
    except mlp.DivergenceError as exc:
        raise CliError(EXIT_NUMERIC, f"training diverged: {exc}") from exc

    write_trace(result.train_trace, out / "train.ldtr")
    write_trace(result.test_trace, out / "test.ldtr")
    n_in, n_hidden, n_out = result.model.dims
    manifest = {
        "architecture": {
            "inputs": n_in, "hidden": n_hidden, "outputs": n_out,
            "hidden_activation": "relu", "output_activation": "softmax",
            "loss": "categorical_cross_entropy", "optimizer": "sgd",
        },
        "seed": config.seed,
        "config": config.to_dict(),
        "standardizer": std.to_dict(),
        "history": [
            {"epoch": h.epoch, "train_loss": h.train_loss,
             "train_accuracy": h.train_accuracy, "test_accuracy": h.test_accuracy}
            for h in result.history
        ],
        "weights_layout": "little-endian float64: W1 row-major, b1, W2 row-major, b2",
        "weight_files": weight_files,
        "inputs": {
            "data_manifest_sha256": data_manifest_hash,
            "train_csv_sha256": sha256_file(data_dir / "train.csv"),
            "test_csv_sha256": sha256_file(data_dir / "test.csv"),
        },
        "outputs": {
            "train.ldtr": sha256_file(out / "train.ldtr"),
            "test.ldtr": sha256_file(out / "test.ldtr"),
        },
    }
    _write_json(out / "model.json", manifest)
    log.info("final test accuracy %.4f", result.history[-1].test_accuracy)
    return manifest


def _explainer_block(train, res: dist.ExplainerResult, zero) -> dict:
    members = list(res.member_indices)
    labels = None
    if train.true_labels is not None:
        labels = [int(v) for v in train.true_labels[members]]
    block = {
        "explainer_distance": res.explainer_distance,
        "epsilon": res.epsilon,
        "polarity": res.polarity.value,
        "size": len(members),
        "members": members,
        "member_true_labels": labels,
    }
    if zero is not None:
        block["member_zero_weight_flags"] = [bool(zero[i]) for i in members]
        block["zero_weight_rows_total"] = int(np.count_nonzero(zero))
    return block


def explain(train_path, test_path, index: int, metric: str = "ld", epsilon: float = 0.0,
            negative: bool = False, union: bool = False) -> dict:
    kind = METRICS[metric]
    train = _read_trace(train_path)
    test = _read_trace(test_path)
    if not 0 <= index < test.n_instances:
        raise CliError(EXIT_USAGE, f"index {index} out of range [0, {test.n_instances})")
    if epsilon < 0:
        raise CliError(EXIT_USAGE, "epsilon must be nonnegative")
    row = test.predictions[index]
    try:
        pos_dv = dist.distances_to_all(train, row, kind, dist.Polarity.POSITIVE, index)
        pos = dist.explainer_set(pos_dv, epsilon)
        out = {"target_index": index, "metric": metric, "epsilon": epsilon,
               "target_predictions": [int(v) for v in row],
               "positive": _explainer_block(train, pos, pos_dv.zero_weight)}
        if negative or union:
            neg_dv = dist.distances_to_all(train, row, kind, dist.Polarity.NEGATIVE, index)
            neg = dist.explainer_set(neg_dv, epsilon)
            if negative:
                out["negative"] = _explainer_block(train, neg, neg_dv.zero_weight)
            if union:
                out["union"] = [[i, p.value] for i, p in dist.explainer_union(pos, neg)]
    except dist.DistanceError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    return out


def evaluate(train_path, test_path, out, sample_n: int = 1000, seed: int = 0,
             kinds: Sequence[dist.DistanceKind] = tuple(METRICS.values()),
             epsilon: float = 0.0) -> fid.FidelityReport:
    out = _outdir(out)
    train = _read_trace(train_path)
    test = _read_trace(test_path)
    try:
        report = fid.evaluate(train, test, sample_n, seed, kinds, epsilon)
    except (fid.FidelityError, dist.DistanceError) as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    _write_text(out / "outcomes.csv", fid.outcomes_to_csv(report.outcomes))
    summary = report.to_dict()
    model_manifest = Path(train_path).parent / "model.json"
    summary["inputs"] = {
        "train_trace_sha256": sha256_file(train_path),
        "test_trace_sha256": sha256_file(test_path),
        "model_manifest_sha256": sha256_file(model_manifest) if model_manifest.exists() else None,
    }
    summary["outcomes_csv"] = {"file": "outcomes.csv", "sha256": sha256_file(out / "outcomes.csv")}
    _write_json(out / "report.json", summary)
    return report


def _fmt_r(r: Optional[float]) -> str:
    return "undefined" if r is None else f"{r:.4f}"


def analyze(report_path, test_path, out, filter: str = "clf_wrong_expl_correct",
            metric: str = "ld") -> fid.AnalysisTable:
    if filter not in fid.FILTERS:
        raise CliError(EXIT_USAGE, f"unknown filter {filter!r}; choose from {fid.FILTERS}")
    report_path = Path(report_path)
    report = _load_json(report_path)
    test_hash = sha256_file(test_path)
    recorded = (report.get("inputs") or {}).get("test_trace_sha256")
    if recorded != test_hash:
        raise CliError(EXIT_USAGE, "report and test trace come from different runs (hash mismatch)")
    csv_info = report.get("outcomes_csv") or {}
    csv_path = report_path.parent / csv_info.get("file", "outcomes.csv")
    try:
        text = csv_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {csv_path}: {exc}") from exc
    if csv_info.get("sha256") and hashlib.sha256(text.encode("utf-8")).hexdigest() != csv_info["sha256"]:
        raise CliError(EXIT_USAGE, f"{csv_path} does not match the report's recorded hash")
    try:
        outcomes = fid.outcomes_from_csv(text)
        table = fid.analysis_table(outcomes, _read_trace(test_path), filter, METRICS[metric])
    except fid.FidelityError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    out = _outdir(out)
    stem = f"analysis_{metric}_{filter}"
    _write_text(out / f"{stem}.csv", fid.analysis_to_csv(table))
    summary = table.summary()
    summary["report_sha256"] = sha256_file(report_path)
    summary["test_trace_sha256"] = test_hash
    _write_json(out / f"{stem}.json", summary)
    return table


def pipeline(config: RunConfig, out) -> dict:
    out = _outdir(out)
    _write_json(out / "run_config.json", {
        "data": config.data.to_dict(), "train": config.train.to_dict(),
        "evaluate": {"sample_n": config.evaluate.sample_n, "seed": config.evaluate.seed,
                     "epsilon": config.evaluate.epsilon, "kinds": list(config.evaluate.kinds)},
    })
    gen_data(config.data, out / "data")
    train_model(out / "data", out / "model", config.train)
    ev = config.evaluate
    report = evaluate(out / "model" / "train.ldtr", out / "model" / "test.ldtr", out / "eval",
                      ev.sample_n, ev.seed, tuple(METRICS[k] for k in ev.kinds), ev.epsilon)
    tables = {}
    for metric in ev.kinds:
        for preset in ("clf_wrong_expl_correct", "clf_wrong_expl_wrong"):
            t = analyze(out / "eval" / "report.json", out / "model" / "test.ldtr",
                        out / "analysis", preset, metric)
            tables[f"{metric}/{preset}"] = t.summary()
    return {"report": report, "analysis": tables}


# --- argparse wiring --------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="longdist", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate the equation dataset")
    g.add_argument("--config", help="DataConfig JSON (defaults if omitted)")
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train the MLP and write prediction traces")
    t.add_argument("--data", required=True, help="directory with train.csv/test.csv")
    t.add_argument("--out", required=True)
    t.add_argument("--config", help="TrainConfig JSON")
    t.add_argument("--seed", type=int)

    e = sub.add_parser("explain", help="explainer set for one target")
    e.add_argument("train_trace")
    e.add_argument("test_trace")
    e.add_argument("--index", type=int, required=True)
    e.add_argument("--metric", choices=sorted(METRICS), default="ld")
    e.add_argument("--epsilon", type=float, default=0.0)
    e.add_argument("--negative", action="store_true")
    e.add_argument("--union", action="store_true")
    e.add_argument("--out", help="write JSON here instead of stdout")
    e.add_argument("--distances", help="also export the positive distance vector as CSV")

    v = sub.add_parser("evaluate", help="explanation fidelity over sampled targets")
    v.add_argument("train_trace")
    v.add_argument("test_trace")
    v.add_argument("--n", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--metrics", default="ld,sld")
    v.add_argument("--epsilon", type=float, default=0.0)
    v.add_argument("--out", required=True)

    a = sub.add_parser("analyze", help="prediction-history table for a report subset")
    a.add_argument("report")
    a.add_argument("test_trace")
    a.add_argument("--filter", default="clf_wrong_expl_correct")
    a.add_argument("--metric", choices=sorted(METRICS), default="ld")
    a.add_argument("--out", required=True)

    r = sub.add_parser("pipeline", help="gen-data, train, evaluate and analyze in one run")
    r.add_argument("--config", help="RunConfig JSON")
    r.add_argument("--seed", type=int, help="overrides every section's seed")
    r.add_argument("--out", help="output directory (or output_dir in the config)")
    return p


def _run(args) -> int:
    if args.command == "gen-data":
        try:
            cfg = eqn.DataConfig.from_dict(_load_json(args.config)) if args.config else eqn.DataConfig()
        except (eqn.DataError, TypeError, ValueError) as exc:
            raise CliError(EXIT_USAGE, f"invalid data config: {exc}") from exc
        gen_data(cfg, args.out)
    elif args.command == "train":
        try:
            d = _load_json(args.config) if args.config else {}
            if args.seed is not None:
                d["seed"] = args.seed
            cfg = mlp.TrainConfig.from_dict(d)
        except (TypeError, ValueError) as exc:
            raise CliError(EXIT_USAGE, f"invalid train config: {exc}") from exc
        train_model(args.data, args.out, cfg)
    elif args.command == "explain":
        result = explain(args.train_trace, args.test_trace, args.index, args.metric,
                         args.epsilon, args.negative, args.union)
        if args.distances:
            train = _read_trace(args.train_trace)
            test = _read_trace(args.test_trace)
            dv = dist.distances_to_all(train, test.predictions[args.index], METRICS[args.metric])
            dist.write_distance_csv(dv, args.distances)
        text = json.dumps(result, indent=2, sort_keys=True) + "\n"
        if args.out:
            _write_text(Path(args.out), text)
        else:
            sys.stdout.write(text)
    elif args.command == "evaluate":
        report = evaluate(args.train_trace, args.test_trace, args.out, args.n, args.seed,
                          _parse_kinds(args.metrics), args.epsilon)
        print(report.summary_line())
    elif args.command == "analyze":
        table = analyze(args.report, args.test_trace, args.out, args.filter, args.metric)
        print(f"rows={len(table.rows)} r_distinct={_fmt_r(table.r_distinct)} "
              f"r_changes={_fmt_r(table.r_changes)}")
    elif args.command == "pipeline":
        try:
            d = _load_json(args.config) if args.config else {}
            if args.seed is not None:
                d["seed"] = args.seed
                for sec in ("data", "train", "evaluate"):
                    if isinstance(d.get(sec), dict):
                        d[sec].pop("seed", None)
            cfg = RunConfig.from_dict(d)
        except (TypeError, ValueError) as exc:
            raise CliError(EXIT_USAGE, f"invalid run config: {exc}") from exc
        out = args.out or cfg.output_dir
        if not out:
            raise CliError(EXIT_USAGE, "no output directory: pass --out or set output_dir")
        res = pipeline(cfg, out)
        print(res["report"].summary_line())
        for name, s in res["analysis"].items():
            print(f"{name}: rows={s['n_rows']} r_distinct={_fmt_r(s['r_distinct'])} "
                  f"r_changes={_fmt_r(s['r_changes'])}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except CliError as exc:
        print(f"longdist: error: {exc}", file=sys.stderr)
        return exc.code
    except (TraceError, eqn.DataError) as exc:
        print(f"longdist: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"longdist: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
