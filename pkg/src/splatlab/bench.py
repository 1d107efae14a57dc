"""Scene-edit benchmark: manifest schema, validation, asymmetric training-pair
construction, and the evaluation driver.

A manifest is JSON with relative paths so a benchmark tree is relocatable:

    {"scenes": [{"id", "view_count", "resolution"}],
     "instances": [{"scene_id", "prompt", "category", "input_views",
                    "edited_views", "seed", "editor_tag"}]}

Evaluation consumes a feature tree (one reference ".ftc" per scene; one
rendered ".ftc" and one prompt ".ftc" per instance), a render tree, and a
timings JSON keyed by instance key.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import FeatureSet, ImageBuffer, IntrinsicsSpec, load_feature_set
from .errors import SchemaError, ValidationError
from .metrics import clip_t2i, scene_conditioned_metrics

DROP_PROBABILITY = 0.5


class EditCategory(str, Enum):
    ADD = "Add"
    REMOVE = "Remove"
    MODIFY = "Modify"
    GLOBAL = "Global"

    @classmethod
    def parse(cls, value: str) -> "EditCategory":
        try:
            return cls(value)
        except ValueError as exc:
            raise ValidationError(f"unknown edit category {value!r}") from exc


@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    view_count: int
    resolution: tuple[int, int]


@dataclass(frozen=True)
class EditInstance:
    scene_id: str
    prompt: str
    category: EditCategory
    input_views: tuple[str, ...]
    edited_views: tuple[str, ...] | None = None
    seed: int = 0
    editor_tag: str = "ip2p"

    def __post_init__(self):
        if not self.prompt.strip():
            raise ValidationError(f"scene {self.scene_id}: prompt must be non-empty")
        if len(self.input_views) < 2:
            raise ValidationError(f"scene {self.scene_id}: need at least 2 input views")
        if self.edited_views is not None and len(self.edited_views) != len(self.input_views):
            raise ValidationError(f"scene {self.scene_id}: edited_views not aligned with input_views")


@dataclass(frozen=True)
class EditManifest:
    scenes: tuple[SceneRecord, ...]
    instances: tuple[EditInstance, ...]

    def instance_key(self, index: int) -> str:
        """Stable per-instance key: scene id plus the instance's rank in its scene."""
        inst = self.instances[index]
        rank = sum(1 for other in self.instances[:index] if other.scene_id == inst.scene_id)
        return f"{inst.scene_id}__{rank:03d}"

    def to_json(self) -> dict:
        return {
            "scenes": [
                {"id": s.scene_id, "view_count": s.view_count, "resolution": list(s.resolution)}
                for s in self.scenes
            ],
            "instances": [
                {
                    "scene_id": i.scene_id,
                    "prompt": i.prompt,
                    "category": i.category.value,
                    "input_views": list(i.input_views),
                    "edited_views": list(i.edited_views) if i.edited_views is not None else None,
                    "seed": i.seed,
                    "editor_tag": i.editor_tag,
                }
                for i in self.instances
            ],
        }


def save_manifest(manifest: EditManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest.to_json(), indent=2) + "\n", encoding="utf-8")


def load_manifest(path) -> EditManifest:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed manifest JSON {path}: {exc.msg} at byte offset {exc.pos}") from exc
    try:
        scenes = tuple(
            SceneRecord(s["id"], int(s["view_count"]), tuple(int(v) for v in s["resolution"]))
            for s in obj["scenes"]
        )
        instances = tuple(
            EditInstance(
                scene_id=i["scene_id"],
                prompt=i["prompt"],
                category=EditCategory.parse(i["category"]),
                input_views=tuple(i["input_views"]),
                edited_views=tuple(i["edited_views"]) if i.get("edited_views") else None,
                seed=int(i.get("seed", 0)),
                editor_tag=i.get("editor_tag", "ip2p"),
            )
            for i in obj["instances"]
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: missing or malformed manifest field: {exc}") from exc
    return EditManifest(scenes=scenes, instances=instances)


def build_manifest(
    scene_dir,
    prompts_file,
    targets: Mapping[str, int] | None = None,
    base_seed: int = 0,
    editor_tag: str = "ip2p",
) -> EditManifest:
    """Assemble a manifest from a scene tree and a prompts file.

    scene_dir holds one subdirectory per scene containing the view PNGs; the
    prompts file is a JSON array of {"scene_id", "prompt", "category"}
    triples. Exactly prompts_per_scene prompts are required for every scene.
    """
    targets = dict(targets or {})
    n_scenes = int(targets.get("scenes", 20))
    per_scene = int(targets.get("prompts_per_scene", 5))
    scene_dir = Path(scene_dir)
    scene_paths = sorted(p for p in scene_dir.iterdir() if p.is_dir())
    if len(scene_paths) != n_scenes:
        raise ValidationError(f"expected {n_scenes} scene directories under {scene_dir}, found {len(scene_paths)}")
    try:
        prompt_rows = json.loads(Path(prompts_file).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed prompts JSON {prompts_file}: {exc.msg} at byte offset {exc.pos}") from exc
    by_scene: dict[str, list[tuple[str, EditCategory]]] = {}
    for row in prompt_rows:
        by_scene.setdefault(str(row["scene_id"]), []).append(
            (str(row["prompt"]), EditCategory.parse(row["category"]))
        )

    scenes, instances = [], []
    counter = 0
    for sp in scene_paths:
        views = tuple(str(p.relative_to(scene_dir)) for p in sorted(sp.glob("*.png")))
        if len(views) < 2:
            raise ValidationError(f"scene {sp.name}: found {len(views)} views, need at least 2")
        resolution = _png_size(sp / Path(views[0]).name)
        scenes.append(SceneRecord(sp.name, len(views), resolution))
        prompts = by_scene.get(sp.name, [])
        if len(prompts) != per_scene:
            raise ValidationError(f"scene {sp.name}: {len(prompts)} prompts, expected {per_scene}")
        for prompt, category in prompts:
            instances.append(
                EditInstance(
                    scene_id=sp.name,
                    prompt=prompt,
                    category=category,
                    input_views=views,
                    seed=base_seed + counter,
                    editor_tag=editor_tag,
                )
            )
            counter += 1
    return EditManifest(scenes=tuple(scenes), instances=tuple(instances))


def _png_size(path: Path) -> tuple[int, int]:
    """Read width/height from the PNG IHDR chunk without decoding the image."""
    with open(path, "rb") as fh:
        head = fh.read(24)
    if len(head) < 24 or head[:8] != b"\x89PNG\r\n\x1a\n":
        raise SchemaError(f"{path}: not a PNG file")
    width = int.from_bytes(head[16:20], "big")
    height = int.from_bytes(head[20:24], "big")
    return (width, height)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]
    category_counts: dict
    instance_count: int

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "violations": list(self.violations),
            "category_counts": dict(self.category_counts),
            "instance_count": self.instance_count,
        }


def validate_manifest(
    manifest: EditManifest,
    root=None,
    category_tolerance: int = 5,
    strict: bool = False,
) -> ValidationReport:
    """Check manifest invariants; returns a report instead of raising.

    Category balance is checked against instances/4 per category with the
    given tolerance (exact counts when strict). File existence is checked
    only when a root directory is supplied.
    """
    violations: list[str] = []
    scene_ids = {s.scene_id for s in manifest.scenes}
    counts = {c.value: 0 for c in EditCategory}
    for idx, inst in enumerate(manifest.instances):
        key = manifest.instance_key(idx)
        counts[inst.category.value] += 1
        if inst.scene_id not in scene_ids:
            violations.append(f"{key}: unknown scene_id {inst.scene_id!r}")
        if len(inst.input_views) < 2:
            violations.append(f"{key}: min views violation ({len(inst.input_views)} < 2)")
        if root is not None:
            for rel in list(inst.input_views) + list(inst.edited_views or ()):
                if not (Path(root) / rel).is_file():
                    violations.append(f"{key}: dangling image path {rel}")
    expected = len(manifest.instances) / len(EditCategory)
    for name, count in sorted(counts.items()):
        if strict:
            if count != expected:
                violations.append(f"category {name}: count {count} != required {expected:g}")
        elif abs(count - expected) > category_tolerance:
            violations.append(f"category {name}: count {count} outside {expected:g} +/- {category_tolerance}")
    return ValidationReport(tuple(violations), counts, len(manifest.instances))


@dataclass(frozen=True, eq=False)
class TrainingPair:
    """Asymmetric input pair: recolored reference view plus raw auxiliary view,
    with recolored supervision targets and the seed for the view-drop draw."""

    reference: tuple[ImageBuffer, IntrinsicsSpec]
    auxiliary: tuple[ImageBuffer, IntrinsicsSpec]
    supervision_views: tuple[ImageBuffer, ...]
    drop_seed: int
    drop_probability: float = DROP_PROBABILITY

    def digest(self) -> str:
        h = hashlib.sha256()
        for img, intr in (self.reference, self.auxiliary):
            h.update(img.data.tobytes())
            h.update(repr((intr.fx, intr.fy, intr.cx, intr.cy, intr.width, intr.height)).encode())
        for img in self.supervision_views:
            h.update(img.data.tobytes())
        h.update(str(self.drop_seed).encode())
        h.update(repr(self.drop_probability).encode())
        return h.hexdigest()


def make_training_pair(
    originals: Sequence[ImageBuffer],
    recolored: Sequence[ImageBuffer],
    intrinsics: Sequence[IntrinsicsSpec],
    drop_seed: int = 0,
) -> TrainingPair:
    """reference = recolored frame 0, auxiliary = original frame 1, supervision
    = all recolored frames. Inputs are never mutated."""
    if len(originals) != len(recolored) or len(originals) != len(intrinsics):
        raise ValidationError("originals, recolored, and intrinsics must be aligned")
    if len(originals) < 2:
        raise ValidationError("need at least 2 accepted frames to build a training pair")
    return TrainingPair(
        reference=(recolored[0], intrinsics[0]),
        auxiliary=(originals[1], intrinsics[1]),
        supervision_views=tuple(recolored),
        drop_seed=drop_seed,
    )


@dataclass(frozen=True)
class BenchmarkReport:
    clip_t2i: float
    c_fid: float
    c_kid: float
    mean_time_s: float
    instance_count: int
    evaluated_count: int
    excluded: tuple[str, ...]
    per_scene: dict
    seed: int

    def to_json(self) -> dict:
        def num(v: float) -> float:
            # report values are rounded so serialized reports are byte-stable
            r = round(float(v), 9)
            return 0.0 if r == 0 else r

        return {
            "clip_t2i": num(self.clip_t2i),
            "c_fid": num(self.c_fid),
            "c_kid": num(self.c_kid),
            "mean_time_s": num(self.mean_time_s),
            "instance_count": self.instance_count,
            "evaluated_count": self.evaluated_count,
            "excluded": list(self.excluded),
            "per_scene": {
                scene: {"c_fid": num(vals["c_fid"]), "c_kid": num(vals["c_kid"])}
                for scene, vals in sorted(self.per_scene.items())
            },
            "seed": self.seed,
        }


def evaluate_run(
    manifest: EditManifest,
    render_dir,
    features_dir,
    timings: Mapping[str, float],
    subset_size: int = 100,
    n_subsets: int = 10,
    seed: int = 0,
) -> BenchmarkReport:
    """Aggregate CLIP text-image similarity, scene-conditioned Fréchet distance
    and kernel MMD, and mean per-view time over a finished benchmark run.

    Instances missing renders, features, or a timing entry are excluded and
    listed; their scene pools shrink accordingly. Results do not depend on
    instance order.
    """
    render_dir, features_dir = Path(render_dir), Path(features_dir)
    clip_scores: list[float] = []
    times: list[float] = []
    excluded: list[str] = []
    rendered_pool: dict[str, list[np.ndarray]] = {}

    for idx, inst in enumerate(manifest.instances):
        key = manifest.instance_key(idx)
        inst_feature_dir = features_dir / inst.scene_id / key
        rendered_path = inst_feature_dir / "rendered.ftc"
        prompt_path = inst_feature_dir / "prompt.ftc"
        render_path = render_dir / inst.scene_id / key
        missing = []
        if not rendered_path.is_file() or not prompt_path.is_file():
            missing.append("features")
        if not render_path.is_dir() or not any(render_path.glob("*.png")):
            missing.append("renders")
        if key not in timings:
            missing.append("timing")
        if missing:
            excluded.append(f"{key}: missing {', '.join(missing)}")
            continue
        rendered = load_feature_set(rendered_path)
        prompt = load_feature_set(prompt_path)
        if prompt.count != 1:
            raise SchemaError(f"{prompt_path}: prompt container must hold exactly 1 vector")
        clip_scores.append(clip_t2i(prompt.vectors[0], rendered))
        times.append(float(timings[key]))
        rendered_pool.setdefault(inst.scene_id, []).append(np.asarray(rendered.vectors, dtype=np.float64))

    per_scene_sets: dict[str, tuple[FeatureSet, FeatureSet]] = {}
    for scene in manifest.scenes:
        if scene.scene_id not in rendered_pool:
            continue
        reference_path = features_dir / scene.scene_id / "reference.ftc"
        if not reference_path.is_file():
            excluded.append(f"{scene.scene_id}: missing reference features")
            continue
        reference = load_feature_set(reference_path)
        stacked = np.vstack(rendered_pool[scene.scene_id]).astype(np.float32)
        per_scene_sets[scene.scene_id] = (FeatureSet(stacked), reference)

    if not clip_scores or not per_scene_sets:
        raise ValidationError("no instance survived evaluation; nothing to report")

    per_scene_vals = {}
    fids, kids = [], []
    for scene_id, pair in per_scene_sets.items():
        fid, kid = scene_conditioned_metrics(
            {scene_id: pair}, subset_size=subset_size, n_subsets=n_subsets, seed=seed
        )
        per_scene_vals[scene_id] = {"c_fid": fid, "c_kid": kid}
        fids.append(fid)
        kids.append(kid)

    return BenchmarkReport(
        clip_t2i=float(np.mean(clip_scores)),
        c_fid=float(np.mean(fids)),
        c_kid=float(np.mean(kids)),
        mean_time_s=float(np.mean(times)),
        instance_count=len(manifest.instances),
        evaluated_count=len(clip_scores),
        excluded=tuple(excluded),
        per_scene=per_scene_vals,
        seed=seed,
    )
