"""Benchmark report rendering: canonical JSON, delimited CSV, a plain-text
table, and matplotlib figures written next to the data files."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import BenchmarkReport


def report_json_bytes(report: BenchmarkReport) -> bytes:
    """Canonical serialization: sorted keys, fixed separators, trailing newline."""
    return (json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n").encode("utf-8")


def render_table(report: BenchmarkReport) -> str:
    obj = report.to_json()
    lines = [
        f"{'metric':<14}{'value':>14}",
        "-" * 28,
        f"{'clip_t2i':<14}{obj['clip_t2i']:>14.6f}",
        f"{'c_fid':<14}{obj['c_fid']:>14.6f}",
        f"{'c_kid':<14}{obj['c_kid']:>14.6f}",
        f"{'mean_time_s':<14}{obj['mean_time_s']:>14.6f}",
        f"{'evaluated':<14}{report.evaluated_count:>10d}/{report.instance_count:<3d}",
    ]
    if report.excluded:
        lines.append(f"excluded ({len(report.excluded)}):")
        lines.extend(f"  {entry}" for entry in report.excluded)
    return "\n".join(lines)


def _write_csv(report: BenchmarkReport, path: Path) -> None:
    obj = report.to_json()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scope", "name", "c_fid", "c_kid", "clip_t2i", "mean_time_s"])
        writer.writerow(["summary", "all", obj["c_fid"], obj["c_kid"], obj["clip_t2i"], obj["mean_time_s"]])
        for scene, vals in sorted(obj["per_scene"].items()):
            writer.writerow(["scene", scene, vals["c_fid"], vals["c_kid"], "", ""])


def _bar_figure(labels, values, title, ylabel, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * len(labels) + 1.5), 3.2))
    ax.bar(range(len(labels)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report_files(report: BenchmarkReport, out_dir, figures: bool = True) -> dict:
    """Write report.json, report.csv, and per-scene figures under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    json_path.write_bytes(report_json_bytes(report))
    csv_path = out_dir / "report.csv"
    _write_csv(report, csv_path)
    written = {"json": str(json_path), "csv": str(csv_path)}
    if figures and report.per_scene:
        fig_dir = out_dir / "figures"
        fig_dir.mkdir(exist_ok=True)
        scenes = sorted(report.per_scene)
        _bar_figure(
            scenes,
            [report.per_scene[s]["c_fid"] for s in scenes],
            "Per-scene Fréchet distance",
            "C-FID",
            fig_dir / "per_scene_c_fid.png",
        )
        _bar_figure(
            scenes,
            [report.per_scene[s]["c_kid"] for s in scenes],
            "Per-scene kernel MMD",
            "C-KID",
            fig_dir / "per_scene_c_kid.png",
        )
        written["figures"] = str(fig_dir)
    return written
