"""Command-line front door: synth, quantify, plan, train, evaluate, grid.

Conventions shared by all commands:
  - alpha/beta are given in percent on the command line (40 means 0.40) and
    as fractions in config files and manifests;
  - every run directory gets exactly one manifest.json; re-running a manifest
    reproduces the checkpoint and reports byte for byte;
  - exit codes: 0 success, 2 validation/format/consistency, 3 I/O, 4 numeric.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from .data import SyntheticSpec, generate_synthetic, load_dataset, save_dataset
from .difficulty import (
    MODALITY_BOTH,
    build_index,
    count_confusable,
    write_difficulty_report,
)
from .errors import ConsistencyError, FormatError, NumericError, ValidationError
from .evaluate import Direction, compute_metrics, metrics_report_line
from .intensity import IntensityCurve, intensity_at
from .model import TrainerConfig, load_model, save_model
from .schedule import CurriculumConfig, active_count_at, sample_fraction, usage_ratio
from .trainer import train

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

_CURVES = {c.value: c for c in IntensityCurve}

DATASET_FILES = ("text.emb", "molecule.emb", "ids.txt")


# ---------------------------------------------------------------- config I/O

_CONFIG_FIELDS = {
    "alpha": float,
    "beta": float,
    "sigma": float,
    "epochs": int,
    "curve": str,
    "difficulty_modality": str,
    "proj_dim": int,
    "margin": float,
    "learning_rate": float,
    "batch_size": int,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_epsilon": float,
    "seed": int,
}

_TRAINER_KEYS = (
    "proj_dim",
    "margin",
    "learning_rate",
    "batch_size",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "seed",
)


def parse_config_file(path) -> dict:
    """Flat `key = value` lines; `#` starts a comment. alpha/beta are fractions here."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected `key = value`, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_FIELDS:
            raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            out[key] = _CONFIG_FIELDS[key](value)
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


def build_config(overrides: dict) -> CurriculumConfig:
    values = {k: v for k, v in overrides.items() if v is not None}
    curve = values.get("curve", IntensityCurve.RATIONAL.value)
    if isinstance(curve, str):
        if curve not in _CURVES:
            raise ValidationError(f"unknown curve {curve!r}, expected one of {sorted(_CURVES)}")
        curve = _CURVES[curve]
    trainer = TrainerConfig(**{k: values[k] for k in _TRAINER_KEYS if k in values})
    return CurriculumConfig(
        alpha=values.get("alpha", 0.40),
        beta=values.get("beta", 0.03),
        sigma=values.get("sigma", 0.99),
        epochs=values.get("epochs", 60),
        curve=curve,
        difficulty_modality=values.get("difficulty_modality", MODALITY_BOTH),
        trainer=trainer,
    )


def config_to_dict(cfg: CurriculumConfig) -> dict:
    return {
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "sigma": cfg.sigma,
        "epochs": cfg.epochs,
        "curve": cfg.curve.value,
        "difficulty_modality": cfg.difficulty_modality,
        "trainer": dataclasses.asdict(cfg.trainer),
    }


def config_from_dict(d: dict) -> CurriculumConfig:
    flat = {k: v for k, v in d.items() if k != "trainer"}
    flat.update(d.get("trainer", {}))
    return build_config(flat)


# ------------------------------------------------------------------ manifest


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, cfg: CurriculumConfig, train_paths, val_paths, outputs) -> Path:
    paths = {"train": train_paths, "val": val_paths}
    manifest = {
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seed": cfg.trainer.seed,
        "config": config_to_dict(cfg),
        "datasets": {
            split: {name: str(Path(p).resolve()) for name, p in triple.items()}
            for split, triple in paths.items()
        },
        "hashes": {
            str(Path(p).resolve()): _sha256(p)
            for triple in paths.values()
            for p in triple.values()
        },
        "outputs": outputs,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(path) -> dict:
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    for key in ("config", "datasets", "hashes"):
        if key not in manifest:
            raise FormatError(f"{path}: manifest is missing the {key!r} section")
    return manifest


def verify_manifest_hashes(manifest: dict) -> None:
    for path, expect in manifest["hashes"].items():
        actual = _sha256(path)
        if actual != expect:
            raise ConsistencyError(f"dataset {path} hash {actual} does not match manifest {expect}")


# ------------------------------------------------------------------ reports


def _metrics_dict(report) -> dict:
    return {
        "direction": report.direction.value,
        "query_count": report.query_count,
        "hits_at_1": report.hits_at_1,
        "hits_at_10": report.hits_at_10,
        "mrr": report.mrr,
        "mean_rank": report.mean_rank,
    }


def train_report_to_dict(report) -> dict:
    return {
        "epochs": [dataclasses.asdict(r) for r in report.epochs],
        "final": {
            "text_to_mol": _metrics_dict(report.final_text_to_mol),
            "mol_to_text": _metrics_dict(report.final_mol_to_text),
        },
        "total_presentations": report.total_presentations,
    }


def write_metrics_file(path, reports) -> None:
    Path(path).write_text(
        "".join(metrics_report_line(r) + "\n" for r in reports), encoding="utf-8"
    )


# ----------------------------------------------------------------- commands


def _parse_per_cluster(raw: str, n_clusters: int) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in raw.split(","))
    except ValueError as exc:
        raise ValidationError(f"--per-cluster expects an int or comma list, got {raw!r}") from exc
    if len(sizes) == 1:
        return sizes * n_clusters
    return sizes


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_clusters=args.clusters,
        samples_per_cluster=_parse_per_cluster(args.per_cluster, args.clusters),
        dim_text=args.dim_text,
        dim_molecule=args.dim_molecule,
        noise_scale=args.noise,
        seed=args.seed,
    )
    ds = generate_synthetic(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / name for name in DATASET_FILES]
    save_dataset(ds, *paths)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_quantify(args) -> int:
    ds = load_dataset(args.text, args.molecule, args.ids)
    counts = count_confusable(
        ds,
        args.sigma,
        workers=args.workers,
        block_size=args.block_size,
        modality=args.modality,
    )
    index = build_index(counts, args.sigma)
    write_difficulty_report(args.out, ds.ids, index)
    print(
        f"samples={ds.count}\tsigma={args.sigma!r}\tmin_count={counts.min()}"
        f"\tmax_count={counts.max()}\treport={args.out}"
    )
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = build_config(
        {
            "alpha": _fraction(args.alpha) if args.alpha is not None else None,
            "beta": _fraction(args.beta) if args.beta is not None else None,
            "epochs": args.epochs,
            "curve": args.curve,
        }
    )
    n = args.num_samples
    lines = ["epoch\tfraction\tactive_count\tintensity"]
    for k in range(1, cfg.epochs + 1):
        lines.append(
            f"{k}\t{sample_fraction(cfg, k)!r}\t{active_count_at(cfg, k, n)}"
            f"\t{intensity_at(cfg.curve, k)!r}"
        )
    ratio = usage_ratio(cfg, n)
    lines.append(f"usage_ratio={ratio!r}")
    text = "".join(ln + "\n" for ln in lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"usage_ratio={ratio!r}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _fraction(percent: float) -> float:
    if percent < 0:
        raise ValidationError(f"percentages must be >= 0, got {percent}")
    return percent / 100.0


def _config_from_args(args) -> CurriculumConfig:
    overrides = {}
    if args.config:
        overrides.update(parse_config_file(args.config))
    flag_map = {
        "alpha": _fraction(args.alpha) if args.alpha is not None else None,
        "beta": _fraction(args.beta) if args.beta is not None else None,
        "sigma": args.sigma,
        "epochs": args.epochs,
        "curve": args.curve,
        "difficulty_modality": args.modality,
        "proj_dim": args.proj_dim,
        "margin": args.margin,
        "learning_rate": args.lr,
        "batch_size": args.batch_size,
        "seed": args.seed,
    }
    overrides.update({k: v for k, v in flag_map.items() if v is not None})
    if args.no_curriculum:
        overrides.update({"alpha": 1.0, "beta": 0.0, "curve": IntensityCurve.CONSTANT_ONE.value})
    return build_config(overrides)


def _dataset_paths(args, split: str) -> dict:
    return {
        "text": getattr(args, f"{split}_text"),
        "molecule": getattr(args, f"{split}_molecule"),
        "ids": getattr(args, f"{split}_ids"),
    }


def _run_training(cfg: CurriculumConfig, train_paths: dict, val_paths: dict, out_dir: Path) -> dict:
    ds_train = load_dataset(train_paths["text"], train_paths["molecule"], train_paths["ids"])
    ds_val = load_dataset(val_paths["text"], val_paths["molecule"], val_paths["ids"])
    params, report = train(ds_train, ds_val, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {
        "checkpoint": "model.ckpt",
        "train_report": "train_report.json",
        "metrics_report": "metrics.txt",
    }
    save_model(params, out_dir / outputs["checkpoint"])
    (out_dir / outputs["train_report"]).write_text(
        json.dumps(train_report_to_dict(report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    write_metrics_file(
        out_dir / outputs["metrics_report"],
        (report.final_text_to_mol, report.final_mol_to_text),
    )
    write_manifest(out_dir, cfg, train_paths, val_paths, outputs)
    return {
        "report": report,
        "outputs": {name: out_dir / rel for name, rel in outputs.items()},
    }


def cmd_train(args) -> int:
    if args.from_manifest:
        manifest = read_manifest(args.from_manifest)
        verify_manifest_hashes(manifest)
        cfg = config_from_dict(manifest["config"])
        train_paths = manifest["datasets"]["train"]
        val_paths = manifest["datasets"]["val"]
    else:
        for split in ("train", "val"):
            missing = [k for k, v in _dataset_paths(args, split).items() if v is None]
            if missing:
                raise ValidationError(
                    f"missing --{split}-{'/--'.join(missing)} (or use --from-manifest)"
                )
        cfg = _config_from_args(args)
        train_paths = _dataset_paths(args, "train")
        val_paths = _dataset_paths(args, "val")
    result = _run_training(cfg, train_paths, val_paths, Path(args.out_dir))
    report = result["report"]
    print(f"presentations={report.total_presentations}")
    print(metrics_report_line(report.final_text_to_mol))
    print(metrics_report_line(report.final_mol_to_text))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    params = load_model(args.checkpoint)
    ds = load_dataset(args.text, args.molecule, args.ids)
    reports = [
        compute_metrics(params, ds, Direction.TEXT_TO_MOL),
        compute_metrics(params, ds, Direction.MOL_TO_TEXT),
    ]
    if args.out:
        write_metrics_file(args.out, reports)
    for r in reports:
        print(metrics_report_line(r))
    return EXIT_OK


_GRID_METRICS = ("hits_at_1", "hits_at_10", "mrr", "mean_rank")


def _normalize_column(values: list) -> list:
    """Max-min normalization to [0, 1]; mean_rank callers pass negated values."""
    finite = [v for v in values if v == v]
    if not finite:
        return values
    lo, hi = min(finite), max(finite)
    if hi == lo:
        return [1.0 if v == v else v for v in values]
    return [(v - lo) / (hi - lo) if v == v else v for v in values]


def grid_summary_rows(cells: list) -> list:
    """cells: dicts with alpha, beta, status, and per-direction metric dicts."""
    rows = [dict(c) for c in cells]
    for direction in ("text_to_mol", "mol_to_text"):
        normalized = {}
        for metric in _GRID_METRICS:
            column = [
                (c[direction][metric] if c["status"] == "ok" else float("nan")) for c in rows
            ]
            if metric == "mean_rank":
                column = [-v for v in column]
            normalized[metric] = _normalize_column(column)
        for i, row in enumerate(rows):
            parts = [normalized[m][i] for m in _GRID_METRICS]
            row[f"agg_{direction}"] = (
                sum(parts) / len(parts) if row["status"] == "ok" else float("nan")
            )
    return rows


def _parse_percent_list(raw: str, flag: str) -> list:
    try:
        return [float(part) for part in raw.split(",") if part]
    except ValueError as exc:
        raise ValidationError(f"{flag} expects a comma-separated number list, got {raw!r}") from exc


def cmd_grid(args) -> int:
    alphas = _parse_percent_list(args.alphas, "--alphas")
    betas = _parse_percent_list(args.betas, "--betas")
    if not alphas or not betas:
        raise ValidationError("grid needs at least one alpha and one beta")
    out_root = Path(args.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    train_paths = _dataset_paths(args, "train")
    val_paths = _dataset_paths(args, "val")
    base = _config_from_args(args)
    cells = []
    for a_pct in alphas:
        for b_pct in betas:
            cell_dir = out_root / f"a{a_pct:g}_b{b_pct:g}"
            cell = {"alpha": _fraction(a_pct), "beta": _fraction(b_pct), "dir": cell_dir.name}
            try:
                cfg = dataclasses.replace(base, alpha=cell["alpha"], beta=cell["beta"])
                result = _run_training(cfg, train_paths, val_paths, cell_dir)
                report = result["report"]
                cell["status"] = "ok"
                cell["text_to_mol"] = _metrics_dict(report.final_text_to_mol)
                cell["mol_to_text"] = _metrics_dict(report.final_mol_to_text)
            except (ValidationError, FormatError, ConsistencyError, NumericError, OSError) as exc:
                print(f"cell a={a_pct} b={b_pct} failed: {exc}", file=sys.stderr)
                cell["status"] = "failed"
                nan = float("nan")
                cell["text_to_mol"] = {m: nan for m in _GRID_METRICS}
                cell["mol_to_text"] = {m: nan for m in _GRID_METRICS}
            cells.append(cell)
    rows = grid_summary_rows(cells)
    header = ["alpha", "beta", "status"]
    header += [f"{d}_{m}" for d in ("text_to_mol", "mol_to_text") for m in _GRID_METRICS]
    header += ["agg_text_to_mol", "agg_mol_to_text"]
    lines = ["\t".join(header)]
    for row in rows:
        fields = [repr(row["alpha"]), repr(row["beta"]), row["status"]]
        fields += [repr(row[d][m]) for d in ("text_to_mol", "mol_to_text") for m in _GRID_METRICS]
        fields += [repr(row["agg_text_to_mol"]), repr(row["agg_mol_to_text"])]
        lines.append("\t".join(fields))
    summary = out_root / "grid_summary.tsv"
    summary.write_text("".join(ln + "\n" for ln in lines), encoding="utf-8")
    print(summary)
    return EXIT_OK


# ------------------------------------------------------------------- parser


def _add_dataset_flags(sub, splits=("train", "val")) -> None:
    for split in splits:
        sub.add_argument(f"--{split}-text", dest=f"{split}_text")
        sub.add_argument(f"--{split}-molecule", dest=f"{split}_molecule")
        sub.add_argument(f"--{split}-ids", dest=f"{split}_ids")


def _add_config_flags(sub) -> None:
    sub.add_argument("--config", help="flat key = value config file (alpha/beta as fractions)")
    sub.add_argument("--alpha", type=float, help="initial sample percentage, e.g. 40")
    sub.add_argument("--beta", type=float, help="per-epoch growth percentage, e.g. 3")
    sub.add_argument("--sigma", type=float, help="difficulty similarity threshold, e.g. 0.99")
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--curve", choices=sorted(_CURVES))
    sub.add_argument("--modality", choices=("both", "text", "molecule"),
                     help="similarity sides used for difficulty counting")
    sub.add_argument("--proj-dim", dest="proj_dim", type=int)
    sub.add_argument("--margin", type=float)
    sub.add_argument("--lr", type=float, help="Adam learning rate")
    sub.add_argument("--batch-size", dest="batch_size", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--no-curriculum", action="store_true",
                     help="alpha=100, beta=0, curve=off (baseline run)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curimol",
        description="Curriculum-paced training and evaluation for text-molecule retrieval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a clustered synthetic dataset")
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--per-cluster", dest="per_cluster", required=True,
                   help="samples per cluster: one int or a comma list")
    p.add_argument("--dim-text", dest="dim_text", type=int, default=300)
    p.add_argument("--dim-molecule", dest="dim_molecule", type=int, default=300)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("quantify", help="write the per-sample difficulty report")
    p.add_argument("--text", required=True)
    p.add_argument("--molecule", required=True)
    p.add_argument("--ids", required=True)
    p.add_argument("--sigma", type=float, default=0.99)
    p.add_argument("--modality", choices=("both", "text", "molecule"), default="both")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--block-size", dest="block_size", type=int, default=512)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quantify)

    p = sub.add_parser("plan", help="emit the per-epoch admission schedule")
    p.add_argument("--alpha", type=float, help="initial sample percentage, e.g. 40")
    p.add_argument("--beta", type=float, help="per-epoch growth percentage, e.g. 3")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--curve", choices=sorted(_CURVES), default=None)
    p.add_argument("--num-samples", dest="num_samples", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("train", help="run the full curriculum training pipeline")
    _add_dataset_flags(p)
    _add_config_flags(p)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--from-manifest", dest="from_manifest",
                   help="reproduce a previous run from its manifest.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset, both directions")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--molecule", required=True)
    p.add_argument("--ids", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid", help="train/evaluate every (alpha, beta) cell")
    _add_dataset_flags(p)
    _add_config_flags(p)
    p.add_argument("--alphas", required=True, help="comma list of alpha percentages")
    p.add_argument("--betas", required=True, help="comma list of beta percentages")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_grid)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FormatError, ConsistencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
