"""Command-line pipeline driver.

Every command reads one JSON config file (see README for the schemas) plus
optional ``--seed`` / ``--out`` overrides. Overrides never silently replace
conflicting config values: a mismatch is a config error. All artifacts are
written atomically into the output directory together with a provenance
record (config hash, seed, artifact hashes) that is free of timestamps, so a
repeated run reproduces the output bytes.

Exit codes: 0 success, 2 invalid config or missing input, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from emoforensics.boost import (
    EmoBoostConfig,
    EmoBoostHeads,
    MockDetector,
    MockDetectorConfig,
    SidecarDetector,
    compute_joint_reprs,
    detector_features,
    train_emoboost,
)
from emoforensics.evaluation import (
    SplitMetrics,
    build_report,
    evaluate_split,
    metrics_for,
)
from emoforensics.manifest import load_manifest
from emoforensics.metrics import ScoredSet, average_auc, stability_area
from emoforensics.model import EmoForensicsModel
from emoforensics.reports import render_text_table, write_csv, write_text_table
from emoforensics.seeding import derive_seed
from emoforensics.splits import (
    SplitPlan,
    load_plans,
    make_in_domain_split,
    make_leave_one_out_splits,
    save_plans,
)
from emoforensics.synth import SynthConfig, generate_synthetic_dataset
from emoforensics.training import TrainConfig, save_history, train_emoforensics

COMMANDS = ("synth", "splits", "train-emoforensics", "train-emoboost", "eval", "ablate", "report")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


def _check_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def _load_config(path: str, seed_flag: int | None, out_flag: str | None) -> dict:
    cfg_path = Path(path)
    if not cfg_path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(cfg_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    if seed_flag is not None:
        if "seed" in cfg and cfg["seed"] != seed_flag:
            raise ConfigError(f"--seed {seed_flag} conflicts with config seed {cfg['seed']}")
        cfg["seed"] = seed_flag
    if out_flag is not None:
        if "out_dir" in cfg and cfg["out_dir"] != out_flag:
            raise ConfigError(f"--out {out_flag} conflicts with config out_dir {cfg['out_dir']}")
        cfg["out_dir"] = out_flag
    if "out_dir" not in cfg:
        raise ConfigError("out_dir required (config key or --out)")
    cfg["__config_path__"] = cfg_path
    return cfg


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _global_seed(cfg: dict) -> int:
    if "seed" not in cfg:
        raise ConfigError("seed required (config key or --seed)")
    return int(cfg["seed"])


def _input_path(raw: str, cfg: dict, what: str) -> Path:
    """Paths in configs resolve relative to the config file's directory."""
    path = Path(raw)
    if not path.is_absolute():
        path = cfg["__config_path__"].parent / path
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _atomic_json(obj, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def _write_provenance(cfg: dict, out: Path, artifacts: list[Path]) -> None:
    config_view = {k: v for k, v in cfg.items() if k != "__config_path__"}
    record = {
        "config": config_view,
        "config_sha256": hashlib.sha256(
            json.dumps(config_view, sort_keys=True).encode()
        ).hexdigest(),
        "seed": cfg.get("seed"),
        "artifacts": {
            str(p.relative_to(out)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(artifacts)
        },
    }
    _atomic_json(record, out / "provenance.json")


def _detector_from_config(section: dict, cfg: dict):
    _check_keys(section, {"type", "feature_dim", "signal_strength", "blind_tags", "seed", "index"},
                {"type"}, "detector")
    kind = section["type"]
    if kind == "mock":
        seed = section["seed"] if "seed" in section else _global_seed(cfg)
        return MockDetector(
            MockDetectorConfig(
                feature_dim=int(section.get("feature_dim", 256)),
                signal_strength=float(section.get("signal_strength", 1.0)),
                blind_tags=frozenset(section.get("blind_tags", [])),
                seed=int(seed),
            )
        )
    if kind == "sidecar":
        if "index" not in section:
            raise ConfigError("sidecar detector needs an 'index' path")
        return SidecarDetector(_input_path(section["index"], cfg, "detector index"))
    raise ConfigError(f"unknown detector type {kind!r}")


def _load_plan(cfg: dict, section: dict) -> SplitPlan:
    plans = load_plans(_input_path(section["plan_file"], cfg, "plan file"))
    if "plan" in section:
        matches = [p for p in plans if p.name == section["plan"]]
        if not matches:
            raise ConfigError(f"plan {section['plan']!r} not in plan file")
        return matches[0]
    if len(plans) != 1:
        raise ConfigError("plan file holds multiple plans; set 'plan' to choose one")
    return plans[0]


def _train_config(section: dict, seed: int) -> TrainConfig:
    body = dict(section)
    body.setdefault("seed", seed)
    try:
        return TrainConfig.from_json(body)
    except TypeError as exc:
        raise ConfigError(f"bad train config: {exc}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(cfg: dict) -> None:
    _check_keys(cfg, {"seed", "out_dir", "synth", "__config_path__"}, {"synth"}, "config")
    out = _out_dir(cfg)
    section = dict(cfg["synth"])
    if "seed" not in section:
        section["seed"] = _global_seed(cfg)
    try:
        synth_cfg = SynthConfig.from_json(section)
    except TypeError as exc:
        raise ConfigError(f"bad synth config: {exc}") from None
    dataset_dir = out / "dataset"
    manifest = generate_synthetic_dataset(synth_cfg, dataset_dir)
    artifacts = [dataset_dir / "manifest.json"]
    artifacts += sorted((dataset_dir / "embeddings").iterdir())
    _write_provenance(cfg, out, artifacts)
    print(f"wrote {len(manifest)} samples to {dataset_dir}")


def cmd_splits(cfg: dict) -> None:
    _check_keys(cfg, {"seed", "out_dir", "splits", "__config_path__"}, {"splits"}, "config")
    out = _out_dir(cfg)
    section = dict(cfg["splits"])
    _check_keys(
        section,
        {"manifest", "mode", "ratios", "val_test_fraction", "tag_sets", "name"},
        {"manifest", "mode"},
        "splits",
    )
    manifest = load_manifest(_input_path(section["manifest"], cfg, "manifest"), verify_files=False)
    seed = _global_seed(cfg)
    ratios = tuple(section.get("ratios", (0.6, 0.1, 0.3)))
    if section["mode"] == "in_domain":
        plans = [make_in_domain_split(manifest, ratios, seed, name=section.get("name", "in_domain"))]
    elif section["mode"] == "leave_one_out":
        tag_sets = None
        if "tag_sets" in section:
            tag_sets = {k: frozenset(v) for k, v in section["tag_sets"].items()}
        plans = make_leave_one_out_splits(
            manifest,
            tag_sets,
            ratios,
            val_test_fraction=float(section.get("val_test_fraction", 0.2)),
            seed=seed,
        )
    else:
        raise ConfigError(f"unknown splits mode {section['mode']!r}")
    path = out / "splits.json"
    save_plans(plans, path)
    _write_provenance(cfg, out, [path])
    print(f"wrote {len(plans)} plan(s) to {path}")


def cmd_train_emoforensics(cfg: dict) -> None:
    _check_keys(cfg, {"seed", "out_dir", "train_emoforensics", "__config_path__"},
                {"train_emoforensics"}, "config")
    out = _out_dir(cfg)
    section = dict(cfg["train_emoforensics"])
    _check_keys(section, {"manifest", "plan_file", "plan", "config"},
                {"manifest", "plan_file"}, "train_emoforensics")
    manifest = load_manifest(_input_path(section["manifest"], cfg, "manifest"), verify_files=False)
    plan = _load_plan(cfg, section)
    train_cfg = _train_config(section.get("config", {}), _global_seed(cfg))
    result = train_emoforensics(manifest.subset(plan.train), manifest.subset(plan.val), train_cfg)
    ckpt_path = out / "emoforensics.ckpt"
    result.model.save(ckpt_path, extra_meta={"train_config": train_cfg.to_json(), "plan": plan.name})
    history_path = out / "history.json"
    save_history(result.history, history_path)
    _write_provenance(cfg, out, [ckpt_path, history_path])
    print(f"best epoch {result.best_epoch}, val loss {result.best_val_loss:.6f} -> {ckpt_path}")


def cmd_train_emoboost(cfg: dict) -> None:
    _check_keys(cfg, {"seed", "out_dir", "train_emoboost", "__config_path__"},
                {"train_emoboost"}, "config")
    out = _out_dir(cfg)
    section = dict(cfg["train_emoboost"])
    _check_keys(
        section,
        {"manifest", "plan_file", "plan", "emoforensics_checkpoint", "detector", "config", "val_part"},
        {"manifest", "plan_file", "emoforensics_checkpoint", "detector"},
        "train_emoboost",
    )
    manifest = load_manifest(_input_path(section["manifest"], cfg, "manifest"), verify_files=False)
    plan = _load_plan(cfg, section)
    model = EmoForensicsModel.load(
        _input_path(section["emoforensics_checkpoint"], cfg, "checkpoint")
    )
    seed = _global_seed(cfg)
    detector = _detector_from_config(section["detector"], cfg)
    body = dict(section.get("config", {}))
    body.setdefault("seed", seed)
    try:
        boost_cfg = EmoBoostConfig.from_json(body)
    except TypeError as exc:
        raise ConfigError(f"bad emoboost config: {exc}") from None
    val_part = section.get("val_part", "val_test" if plan.val_test else "val")
    if val_part not in ("val", "val_test"):
        raise ConfigError("val_part must be 'val' or 'val_test'")
    val_ids = plan.val_test if val_part == "val_test" else plan.val
    if not val_ids:
        raise ConfigError(f"plan {plan.name} has an empty {val_part} part")
    result = train_emoboost(
        manifest.subset(plan.train), manifest.subset(val_ids), model, detector, boost_cfg
    )
    ckpt_path = out / "emoboost.ckpt"
    result.heads.save(
        ckpt_path,
        extra_meta={"detector_id": detector.detector_id, "plan": plan.name, "val_part": val_part},
    )
    history_path = out / "history.json"
    save_history(result.history, history_path)
    _write_provenance(cfg, out, [ckpt_path, history_path])
    print(f"best epoch {result.best_epoch}, val loss {result.best_val_loss:.6f} -> {ckpt_path}")


def _eval_one_plan(cfg, section, manifest, plan, model) -> SplitMetrics:
    reunite = bool(section.get("reunite", True))
    if "emoboost_checkpoint" in section:
        heads = EmoBoostHeads.load(_input_path(section["emoboost_checkpoint"], cfg, "checkpoint"))
        detector = _detector_from_config(section["detector"], cfg)
        ids = plan.test_with_val_test if reunite else list(plan.test)
        emotion = compute_joint_reprs(model, manifest, ids)
        features = detector_features(detector, manifest, ids)
        lookup = manifest.by_id()
        labels = np.array([lookup[i].label for i in ids])
        return metrics_for(plan.name, ScoredSet(heads.scores(emotion, features), labels))
    return evaluate_split(model, manifest, plan, reunite=reunite)


def cmd_eval(cfg: dict) -> None:
    _check_keys(cfg, {"seed", "out_dir", "eval", "__config_path__"}, {"eval"}, "config")
    out = _out_dir(cfg)
    section = dict(cfg["eval"])
    _check_keys(
        section,
        {"manifest", "plan_file", "plan", "checkpoint", "emoboost_checkpoint", "detector", "reunite"},
        {"manifest", "plan_file", "checkpoint"},
        "eval",
    )
    if "emoboost_checkpoint" in section and "detector" not in section:
        raise ConfigError("eval with emoboost_checkpoint needs a detector section")
    manifest = load_manifest(_input_path(section["manifest"], cfg, "manifest"), verify_files=False)
    ckpt_path = _input_path(section["checkpoint"], cfg, "checkpoint")
    model = EmoForensicsModel.load(ckpt_path)
    plans = load_plans(_input_path(section["plan_file"], cfg, "plan file"))
    if "plan" in section:
        plans = [p for p in plans if p.name == section["plan"]]
        if not plans:
            raise ConfigError(f"plan {section['plan']!r} not in plan file")
    report = build_report([_eval_one_plan(cfg, section, manifest, p, model) for p in plans])
    report_path = out / "report.json"
    report.save(report_path)
    csv_path = out / "report.csv"
    write_csv(report, csv_path)
    table_path = out / "summary.txt"
    write_text_table(report, table_path)
    _write_provenance(cfg, out, [report_path, csv_path, table_path])
    print(render_text_table(report), end="")


ABLATION_VARIANTS = (
    ("full", {}),
    ("no_contrastive", {"disable_contrastive": True}),
    ("no_transformers", {"model.disable_temporal_transformers": True}),
    ("video_only", {"model.modality": "video_only"}),
    ("video_only_no_transformers", {"model.modality": "video_only",
                                    "model.disable_temporal_transformers": True}),
    ("audio_only", {"model.modality": "audio_only"}),
    ("audio_only_no_transformers", {"model.modality": "audio_only",
                                    "model.disable_temporal_transformers": True}),
    ("fusion_concat", {"model.fusion_strategy": "concat"}),
    ("fusion_product", {"model.fusion_strategy": "product"}),
)


def apply_variant(base: TrainConfig, overrides: dict, seed: int) -> TrainConfig:
    body = base.to_json()
    body["seed"] = seed
    for dotted, value in overrides.items():
        target = body
        *parents, leaf = dotted.split(".")
        for key in parents:
            target = target[key]
        target[leaf] = value
    return TrainConfig.from_json(body)


def cmd_ablate(cfg: dict) -> None:
    _check_keys(cfg, {"seed", "out_dir", "ablate", "__config_path__"}, {"ablate"}, "config")
    out = _out_dir(cfg)
    section = dict(cfg["ablate"])
    _check_keys(
        section,
        {"manifest", "plan_file", "plan", "train", "variants", "detector", "emoboost"},
        {"manifest", "plan_file"},
        "ablate",
    )
    manifest = load_manifest(_input_path(section["manifest"], cfg, "manifest"), verify_files=False)
    plan = _load_plan(cfg, section)
    seed = _global_seed(cfg)
    base = _train_config(section.get("train", {}), seed)
    wanted = section.get("variants")
    variants = [v for v in ABLATION_VARIANTS if wanted is None or v[0] in wanted]
    if wanted is not None:
        known = {name for name, _ in ABLATION_VARIANTS}
        bad = set(wanted) - known
        if bad:
            raise ConfigError(f"unknown ablation variants {sorted(bad)}")

    rows = []
    full_model = None
    for name, overrides in variants:
        run_cfg = apply_variant(base, overrides, derive_seed(seed, name))
        result = train_emoforensics(manifest.subset(plan.train), manifest.subset(plan.val), run_cfg)
        metrics = evaluate_split(result.model, manifest, plan)
        rows.append({"variant": name, "auc": metrics.auc, "ap": metrics.ap})
        if name == "full":
            full_model = result.model

    if "detector" in section and full_model is not None:
        detector = _detector_from_config(section["detector"], cfg)
        boost_base = dict(section.get("emoboost", {}))
        val_ids = plan.val_test if plan.val_test else plan.val
        for strategy in ("product", "add", "concat"):
            body = dict(boost_base)
            body["fusion"] = strategy
            body.setdefault("seed", derive_seed(seed, f"emoboost_{strategy}"))
            boost_cfg = EmoBoostConfig.from_json(body)
            result = train_emoboost(
                manifest.subset(plan.train), manifest.subset(val_ids), full_model, detector, boost_cfg
            )
            ids = plan.test_with_val_test
            emotion = compute_joint_reprs(full_model, manifest, ids)
            features = detector_features(detector, manifest, ids)
            lookup = manifest.by_id()
            labels = np.array([lookup[i].label for i in ids])
            scored = ScoredSet(result.heads.scores(emotion, features), labels)
            metrics = metrics_for(f"late_fusion_{strategy}", scored)
            rows.append({"variant": f"late_fusion_{strategy}", "auc": metrics.auc, "ap": metrics.ap})

    table_path = out / "ablation.json"
    _atomic_json(rows, table_path)
    csv_lines = ["variant,auc,ap"] + [f"{r['variant']},{r['auc']!r},{r['ap']!r}" for r in rows]
    csv_path = out / "ablation.csv"
    tmp = csv_path.with_name(csv_path.name + ".tmp")
    tmp.write_text("\n".join(csv_lines) + "\n")
    os.replace(tmp, csv_path)
    width = max(len(r["variant"]) for r in rows) + 2
    text = "\n".join(f"{r['variant']:<{width}} auc={r['auc']:.4f} ap={r['ap']:.4f}" for r in rows)
    print(text)
    _write_provenance(cfg, out, [table_path, csv_path])


def cmd_report(cfg: dict) -> None:
    _check_keys(cfg, {"seed", "out_dir", "report", "__config_path__"}, {"report"}, "config")
    out = _out_dir(cfg)
    section = dict(cfg["report"])
    _check_keys(section, {"eval_reports", "split_aucs", "figures"}, set(), "report")
    series: dict[str, tuple[list[str], list[float]]] = {}
    if "split_aucs" in section:
        for method, mapping in section["split_aucs"].items():
            names = list(mapping)
            series[method] = (names, [float(mapping[n]) for n in names])
    if "eval_reports" in section:
        for method, raw_path in section["eval_reports"].items():
            doc = json.loads(_input_path(raw_path, cfg, "eval report").read_text())
            names = [m["name"] for m in doc["splits"]]
            series[method] = (names, [float(m["auc"]) for m in doc["splits"]])
    if not series:
        raise ConfigError("report needs split_aucs and/or eval_reports")

    summary = {
        method: {
            "splits": dict(zip(names, aucs)),
            "average_auc": average_auc(aucs),
            "stability_area": stability_area(aucs),
        }
        for method, (names, aucs) in series.items()
    }
    report_path = out / "report.json"
    _atomic_json(summary, report_path)
    csv_path = out / "report.csv"
    lines = ["method,split,auc"]
    for method, (names, aucs) in series.items():
        lines += [f"{method},{n},{a!r}" for n, a in zip(names, aucs)]
        lines.append(f"{method},average,{summary[method]['average_auc']!r}")
        lines.append(f"{method},stability_area,{summary[method]['stability_area']!r}")
    tmp = csv_path.with_name(csv_path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, csv_path)

    artifacts = [report_path, csv_path]
    if section.get("figures", True):
        from emoforensics import figures

        stability_png = out / "stability.png"
        figures.stability_step_plot(series, stability_png)
        artifacts.append(stability_png)
        for method, (names, aucs) in series.items():
            bar_png = out / f"auc_{method}.png"
            figures.split_auc_bars(names, aucs, bar_png)
            artifacts.append(bar_png)
    _write_provenance(cfg, out, artifacts)
    for method, body in summary.items():
        print(
            f"{method}: average_auc={body['average_auc']:.4f} "
            f"stability_area={body['stability_area']:.4f}"
        )


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


HANDLERS = {
    "synth": cmd_synth,
    "splits": cmd_splits,
    "train-emoforensics": cmd_train_emoforensics,
    "train-emoboost": cmd_train_emoboost,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="emoforensics", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the run's JSON config")
    parser.add_argument("--seed", type=int, default=None, help="global seed override")
    parser.add_argument("--out", default=None, help="output directory override")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config, args.seed, args.out)
        HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single-line machine-parsable failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
