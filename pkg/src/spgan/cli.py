"""Command line entry point: ``spgan run``, ``spgan report`` and ``spgan export``.

metrics.csv has one row per generation with these leading columns, in order::

    generation, validation_auc, train_auc, n_candidates, n_features, floor,
    top_feature_ig, max_candidate_ig, feature_gap, alignment, inner_steps,
    reward_first, reward_last, reward_mean, stopped_by, error

followed by the domain's invariant columns prefixed with ``inv_`` (lines:
f_mean, mean_diff_mean, length_mean; brackets: validity, uniqueness,
novelty, length_mean; points2d: mean_poi_within_<r> per radius).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import traceback
from pathlib import Path

from . import generator as G
from .config import ConfigError, ExperimentConfig, load_config
from .domains import build_domain
from .experiment import run_seed
from .training import mean_or_nan

log = logging.getLogger("spgan")

OUT_ENV = "SPGAN_OUT"
ARTIFACTS = ("metrics.csv", "features_gen<k>.json", "samples_gen<k>.txt", "summary.json")
BASE_COLUMNS = ("generation", "validation_auc", "train_auc", "n_candidates", "n_features", "floor",
                "top_feature_ig", "max_candidate_ig", "feature_gap", "alignment", "inner_steps",
                "reward_first", "reward_last", "reward_mean", "stopped_by", "error")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


class RunWriter:
    """Writes per-generation artifacts as reports arrive, so failures leave partial output."""

    def __init__(self, run_dir: Path, invariant_keys):
        self.dir = run_dir
        self.dir.mkdir(parents=True, exist_ok=True)
        self.inv_keys = list(invariant_keys)
        self.columns = list(BASE_COLUMNS) + [f"inv_{k}" for k in self.inv_keys]
        with open(self.dir / "metrics.csv", "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(self.columns)

    def __call__(self, report):
        trace = report.reward_trace
        row = {
            "generation": report.generation,
            "validation_auc": report.validation_auc,
            "train_auc": report.train_auc,
            "n_candidates": report.n_candidates,
            "n_features": len(report.features),
            "floor": report.floor,
            "top_feature_ig": report.top_feature_ig,
            "max_candidate_ig": report.max_candidate_ig,
            "feature_gap": report.feature_gap,
            "alignment": report.alignment,
            "inner_steps": report.inner_steps,
            "reward_first": trace[0] if trace else None,
            "reward_last": trace[-1] if trace else None,
            "reward_mean": mean_or_nan(trace) if trace else None,
            "stopped_by": report.stopped_by,
            "error": report.error,
        }
        for k in self.inv_keys:
            row[f"inv_{k}"] = report.invariants.get(k)
        with open(self.dir / "metrics.csv", "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow([_fmt(row[c]) for c in self.columns])
        k = report.generation
        _write_json(self.dir / f"features_gen{k}.json", {
            "generation": k,
            "validation_auc": report.validation_auc,
            "n_candidates": report.n_candidates,
            "floor": report.floor,
            "features": report.features,
        })
        with open(self.dir / f"samples_gen{k}.txt", "w") as fh:
            fh.writelines(s + "\n" for s in report.snapshot)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def output_root(cfg: ExperimentConfig, override: str | None) -> Path:
    return Path(override or cfg.output_dir or os.environ.get(OUT_ENV) or "runs")


def _seed_dirs(root: Path, cfg: ExperimentConfig, seeds):
    for label, params in cfg.variants():
        base = root / cfg.name / label if label else root / cfg.name
        for seed in seeds:
            yield label, params, seed, base / f"seed-{seed}"


def run_config(cfg: ExperimentConfig, root: Path, seeds=None, plots=True) -> int:
    from .plotting import plot_run

    seeds = list(seeds) if seeds is not None else list(cfg.seeds)
    (root / cfg.name).mkdir(parents=True, exist_ok=True)
    (root / cfg.name / "config.json").write_text(cfg.dumps())
    status = 0
    for label, params, seed, run_dir in _seed_dirs(root, cfg, seeds):
        probe = build_domain(cfg.domain, params, seed)
        writer = RunWriter(run_dir, probe.invariants(probe.actual).keys())
        log.info("run %s %s seed %d -> %s", cfg.name, label or "", seed, run_dir)
        try:
            run = run_seed(cfg, seed, label, params, on_report=writer)
        except Exception as exc:  # noqa: BLE001 - recorded, then the next seed runs
            status = 1
            _write_json(run_dir / "error.json", {
                "type": type(exc).__name__, "message": str(exc),
                "traceback": traceback.format_exc()})
            print(f"{run_dir}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            continue
        summary = {"seed": seed, "variant": label, **run.summary}
        _write_json(run_dir / "summary.json", summary)
        G.save_generator(run.result.generator, run_dir / "generator.json")
        if plots:
            plot_run(run_dir, run.result.reports, cfg.training.epsilon)
        print(_one_line(run_dir, summary))
    return status


def _one_line(run_dir, s) -> str:
    parts = [f"{run_dir}", f"gens={s['generations']}", f"stop={s['stopped_by']}",
             f"auc={s['auc_gen0']:.3f}->{s['auc_final']:.3f}"]
    if "improvement_factor" in s:
        parts.append(f"f={s['f_mle']:.3f}->{s['f_final']:.3f} (x{s['improvement_factor']:.2f})")
    if "validity_final" in s:
        parts.append(f"validity={s['validity_mle']:.2f}->{s['validity_final']:.2f}")
    if "ig_ratio" in s:
        parts.append(f"ig_ratio={s['ig_ratio']:.2f}")
    return " ".join(parts)


# --------------------------------------------------------------------------
# report


def _missing(run_dir: Path) -> list:
    missing = []
    if not (run_dir / "metrics.csv").is_file():
        missing.append("metrics.csv")
    if not any(run_dir.glob("features_gen*.json")):
        missing.append("features_gen<k>.json")
    if not any(run_dir.glob("samples_gen*.txt")):
        missing.append("samples_gen<k>.txt")
    if not (run_dir / "summary.json").is_file():
        missing.append("summary.json")
    return missing


def _is_run_dir(p: Path) -> bool:
    return any((p / a).exists() for a in ("metrics.csv", "summary.json", "error.json"))


def find_run_dirs(path: Path) -> list:
    if _is_run_dir(path):
        return [path]
    return sorted(p.parent for p in path.rglob("metrics.csv"))


def report_run(run_dir: Path, out=None) -> bool:
    """Print one run's summary; returns False when artifacts are missing."""
    out = out or sys.stdout
    print(f"== {run_dir}", file=out)
    missing = _missing(run_dir)
    if (run_dir / "error.json").is_file():
        err = json.loads((run_dir / "error.json").read_text())
        print(f"run failed: {err['type']}: {err['message']}", file=out)
    if (run_dir / "metrics.csv").is_file():
        with open(run_dir / "metrics.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        print("gen  val_auc  features (train IG)", file=out)
        for row in rows:
            k = row["generation"]
            feats = ""
            fpath = run_dir / f"features_gen{k}.json"
            if fpath.is_file():
                fr = json.loads(fpath.read_text())["features"]
                feats = ", ".join(f"{f['name']} ({f['train_ig']:.3f})" for f in fr[:3])
            auc = float(row["validation_auc"]) if row["validation_auc"] else float("nan")
            note = f"  [{row['error']}]" if row["error"] else ""
            print(f"{k:>3}  {auc:7.3f}  {feats}{note}", file=out)
    if (run_dir / "summary.json").is_file():
        s = json.loads((run_dir / "summary.json").read_text())
        if "improvement_factor" in s:
            print(f"f: {s['f_mle']:.4f} -> {s['f_final']:.4f}, "
                  f"improvement factor {s['improvement_factor']:.2f}", file=out)
        if "validity_final" in s:
            print(f"validity {s['validity_mle']:.3f} -> {s['validity_final']:.3f}, "
                  f"novelty {s['novelty_mle']:.3f} -> {s['novelty_final']:.3f}", file=out)
        if "ig_ratio" in s:
            print(f"top IG gen0 {s['top_ig_gen0']:.3f}, final max candidate IG "
                  f"{s['max_candidate_ig_final']:.3f}, ratio {s['ig_ratio']:.2f}", file=out)
        print(f"stopped by {s['stopped_by']} after {s['generations']} generations", file=out)
        for name, ok in s.get("verdicts", {}).items():
            print(f"  {'PASS' if ok else 'FAIL'}  {name}", file=out)
    if missing:
        print("missing artifacts: " + ", ".join(missing), file=out)
    return not missing


def cmd_report(path: Path) -> int:
    if not path.is_dir():
        print(f"{path}: not a directory", file=sys.stderr)
        return 2
    dirs = find_run_dirs(path)
    if not dirs:
        print(f"{path}: missing artifacts: " + ", ".join(ARTIFACTS))
        return 1
    ok = [report_run(d) for d in dirs]
    return 0 if all(ok) else 1


# --------------------------------------------------------------------------
# export


def cmd_export(cfg: ExperimentConfig, seed: int, out) -> int:
    """Write the configured domain's actual data as tab-separated text."""
    for label, params in cfg.variants():
        domain = build_domain(cfg.domain, params, seed)
        for i, s in enumerate(domain.actual):
            prefix = f"{label}\t" if label else ""
            out.write(f"{prefix}{i}\t{domain.format_sample(s)}\n")
    return 0


def _seed_list(text: str) -> list:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    if not seeds or min(seeds) < 0:
        raise argparse.ArgumentTypeError("seeds must be non-negative integers")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spgan", description="Semantic-feature adversarial training runs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="JSON config path, or a bundled name such as lines-16")
    r.add_argument("--seed-override", type=_seed_list, help="comma-separated seeds replacing the config's")
    r.add_argument("--out", help=f"output root (default: config output_dir, ${OUT_ENV}, or ./runs)")
    r.add_argument("--no-plots", action="store_true", help="skip PNG figures")

    rep = sub.add_parser("report", help="summarize a run directory (read-only)")
    rep.add_argument("run_dir")

    e = sub.add_parser("export", help="write a config's actual dataset as tab-separated text")
    e.add_argument("config")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="output file (default: stdout)")
    return p


def resolve_config(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    bundled = Path(__file__).parent / "configs" / f"{name.removesuffix('.json')}.json"
    return bundled if bundled.exists() else p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        return cmd_report(Path(args.run_dir))
    try:
        cfg = load_config(resolve_config(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.command == "export":
        if args.out:
            with open(args.out, "w") as fh:
                return cmd_export(cfg, args.seed, fh)
        return cmd_export(cfg, args.seed, sys.stdout)
    return run_config(cfg, output_root(cfg, args.out), args.seed_override, plots=not args.no_plots)


if __name__ == "__main__":
    sys.exit(main())
