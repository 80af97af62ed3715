"""Batch orchestration: detect -> segment -> TV-init -> exemplar inpaint,
plus thin osmosis and stereo runners, config files and run manifests.

A manifest records every parameter, seed, input hash and output hash of a
run; replaying it re-executes the stage chain and must reproduce every
output byte for byte (all stages are deterministic given their seeds).
Config files are INI: sections chan_vese, kmeans, damage, tv, exemplar and
an optional crop section with x0/y0/x1/y1.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidInputError
from .exemplar import PatchParams, inpaint_exemplar
from .osmosis import osmosis_restore
from .raster import (
    AnnotationMask,
    Image,
    Label,
    compute_features,
    load_annotation,
    load_image,
    save_annotation,
    save_image,
)
from .segmentation import (
    ChanVeseParams,
    chan_vese_segment,
    kmeans_label,
    propagate_training_labels,
    refine_mask,
)
from .stereo import CameraPose, compose_depth, make_stereo_outputs, parse_scene, synthesize_view
from .tv import TvParams, tv_inpaint

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 35
    restarts: int = 5
    rng_seed: int = 0


@dataclass(frozen=True)
class DamageConfig:
    min_overlap: float = 0.05
    min_area: int = 20
    closing_radius: int = 2


@dataclass(frozen=True)
class PipelineConfig:
    chan_vese: ChanVeseParams = field(default_factory=ChanVeseParams)
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    damage: DamageConfig = field(default_factory=DamageConfig)
    tv: TvParams = field(default_factory=TvParams)
    exemplar: PatchParams = field(default_factory=PatchParams)
    crop: tuple[int, int, int, int] | None = None

    def to_dict(self) -> dict:
        out = {
            "chan_vese": asdict(self.chan_vese),
            "kmeans": asdict(self.kmeans),
            "damage": asdict(self.damage),
            "tv": asdict(self.tv),
            "exemplar": asdict(self.exemplar),
        }
        if self.crop is not None:
            out["crop"] = list(self.crop)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> PipelineConfig:
        return cls(
            chan_vese=ChanVeseParams(**data.get("chan_vese", {})),
            kmeans=KMeansConfig(**data.get("kmeans", {})),
            damage=DamageConfig(**data.get("damage", {})),
            tv=TvParams(**data.get("tv", {})),
            exemplar=PatchParams(**data.get("exemplar", {})),
            crop=tuple(data["crop"]) if "crop" in data else None,
        )


def load_config(path: str | Path) -> PipelineConfig:
    """Read an INI config; missing sections and keys keep their defaults."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise InvalidInputError(f"cannot read config file {path}")

    def section(name: str) -> dict[str, str]:
        return dict(parser[name]) if parser.has_section(name) else {}

    cv = section("chan_vese")
    km = section("kmeans")
    dm = section("damage")
    tv = section("tv")
    ex = section("exemplar")
    crop_sec = section("crop")

    config = PipelineConfig(
        chan_vese=ChanVeseParams(
            mu=float(cv.get("mu", 0.2)),
            nu=float(cv.get("nu", 0.0)),
            lambda1=float(cv.get("lambda1", 1.0)),
            lambda2=float(cv.get("lambda2", 1.0)),
            max_iter=int(cv.get("max_iter", 1000)),
            tol=float(cv.get("tol", 0.0)),
        ),
        kmeans=KMeansConfig(
            k=int(km.get("k", 35)),
            restarts=int(km.get("restarts", 5)),
            rng_seed=int(km.get("rng_seed", 0)),
        ),
        damage=DamageConfig(
            min_overlap=float(dm.get("min_overlap", 0.05)),
            min_area=int(dm.get("min_area", 20)),
            closing_radius=int(dm.get("closing_radius", 2)),
        ),
        tv=TvParams(
            lam=float(tv.get("lambda", 1000.0)),
            max_iter=int(tv.get("max_iter", 1000)),
            tol=float(tv.get("tol", 1e-5)),
        ),
        exemplar=PatchParams(
            patch_side=int(ex.get("patch_side", 7)),
            propagation_iters=int(ex.get("propagation_iters", 12)),
            scales=int(ex.get("scales", 2)),
            rng_seed=int(ex.get("rng_seed", 0)),
        ),
        crop=(
            (
                int(crop_sec["x0"]),
                int(crop_sec["y0"]),
                int(crop_sec["x1"]),
                int(crop_sec["y1"]),
            )
            if crop_sec
            else None
        ),
    )
    return config


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RestoreResult:
    final: Image
    artifacts: dict[str, Path]
    manifest_path: Path


def _write_manifest(out_dir: Path, payload: dict) -> Path:
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def run_restore(
    image_path: str | Path,
    out_dir: str | Path,
    seeds: list[tuple[int, int]] | None = None,
    mask_path: str | Path | None = None,
    config: PipelineConfig | None = None,
    stop_after: str | None = None,
) -> RestoreResult:
    """Execute the restoration chain, writing every intermediate artifact
    plus a manifest of parameters, seeds and content hashes.

    Exactly one of seeds or mask_path selects how the damage is found.
    stop_after="damage" ends the run once detection artifacts are written
    (the segment subcommand's behavior).
    """
    if (seeds is None) == (mask_path is None):
        raise InvalidInputError("provide exactly one of seeds or mask_path")
    if stop_after not in (None, "damage"):
        raise InvalidInputError(f"unsupported stop_after stage {stop_after!r}")
    config = config or PipelineConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    image_path = Path(image_path)
    img = load_image(image_path)
    if config.crop is not None:
        x0, y0, x1, y1 = config.crop
        img = Image(img.data[y0:y1, x0:x1], colorspace=img.colorspace)

    inputs = {"image": {"path": str(image_path), "sha256": sha256_file(image_path)}}
    artifacts: dict[str, Path] = {}

    def emit_annotation(name: str, mask: np.ndarray, label: Label) -> None:
        path = out_dir / f"{name}.png"
        save_annotation(AnnotationMask.from_binary(mask, label=label), path)
        artifacts[name] = path

    if mask_path is not None:
        mask_path = Path(mask_path)
        annotation = load_annotation(mask_path, expected_size=(img.height, img.width))
        damage = annotation.inpaint
        inputs["mask"] = {"path": str(mask_path), "sha256": sha256_file(mask_path)}
        emit_annotation("damage", damage, Label.INPAINT)
    else:
        training = chan_vese_segment(img, seeds, config.chan_vese).mask
        emit_annotation("d1", training, Label.TRAINING)

        features = compute_features(img)
        label_map, _ = kmeans_label(
            features, k=config.kmeans.k, restarts=config.kmeans.restarts,
            rng_seed=config.kmeans.rng_seed,
        )
        labels_path = out_dir / "labels.png"
        _save_label_map(label_map.ids, labels_path)
        artifacts["labels"] = labels_path

        raw = propagate_training_labels(label_map, training, config.damage.min_overlap)
        damage = refine_mask(raw, config.damage.min_area, config.damage.closing_radius)
        emit_annotation("damage", damage, Label.INPAINT)

    final = img
    if stop_after != "damage":
        tv_result = tv_inpaint(img, damage, config.tv)
        tv_path = out_dir / "tv.png"
        save_image(tv_result.image, tv_path)
        artifacts["tv"] = tv_path

        final = inpaint_exemplar(img, damage, config.exemplar, init_image=tv_result.image).image
        final_path = out_dir / "final.png"
        save_image(final, final_path)
        artifacts["final"] = final_path

    manifest = {
        "tool": "folio",
        "version": __version__,
        "command": "segment" if stop_after == "damage" else "restore",
        "config": config.to_dict(),
        "seeds": [list(s) for s in seeds] if seeds else None,
        "inputs": inputs,
        "outputs": {
            name: {"file": path.name, "sha256": sha256_file(path)}
            for name, path in sorted(artifacts.items())
        },
    }
    manifest_path = _write_manifest(out_dir, manifest)
    return RestoreResult(final=final, artifacts=artifacts, manifest_path=manifest_path)


def _save_label_map(ids: np.ndarray, path: Path) -> None:
    if ids.max() > 255:
        raise InvalidInputError("label map ids exceed 8-bit range")
    from PIL import Image as PILImage

    PILImage.fromarray(ids.astype(np.uint8), mode="L").save(path)


def replay_manifest(manifest_path: str | Path, out_dir: str | Path) -> bool:
    """Re-run a recorded restore and verify byte-identical outputs.

    Returns True when every artifact hash matches the manifest.
    """
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("command") != "restore":
        raise InvalidInputError("only restore manifests can be replayed")

    config = PipelineConfig.from_dict(manifest["config"])
    inputs = manifest["inputs"]
    image_path = Path(inputs["image"]["path"])
    if not image_path.is_absolute():
        image_path = manifest_path.parent / image_path
    if sha256_file(image_path) != inputs["image"]["sha256"]:
        raise InvalidInputError(f"input image {image_path} changed since the recorded run")

    seeds = [tuple(s) for s in manifest["seeds"]] if manifest.get("seeds") else None
    mask_path = None
    if "mask" in inputs:
        mask_path = Path(inputs["mask"]["path"])
        if not mask_path.is_absolute():
            mask_path = manifest_path.parent / mask_path
        if sha256_file(mask_path) != inputs["mask"]["sha256"]:
            raise InvalidInputError(f"input mask {mask_path} changed since the recorded run")

    result = run_restore(
        image_path, out_dir, seeds=seeds, mask_path=mask_path, config=config
    )
    expected = manifest["outputs"]
    for name, path in result.artifacts.items():
        if name not in expected or sha256_file(path) != expected[name]["sha256"]:
            return False
    return True


def run_osmosis(
    rgb_path: str | Path,
    mask_path: str | Path,
    out_path: str | Path,
    ir_path: str | Path | None = None,
) -> Image:
    """CLI-facing wrapper over osmosis_restore."""
    rgb = load_image(rgb_path)
    annotation = load_annotation(mask_path, expected_size=(rgb.height, rgb.width))
    ir = load_image(ir_path) if ir_path is not None else None
    out = osmosis_restore(rgb, ir, annotation)
    save_image(out, out_path)
    return out


def run_stereo(
    image_path: str | Path,
    scene_path: str | Path,
    out_path: str | Path,
    baseline: float | None = None,
    fov_degrees: float = 40.0,
    output_mode: str = "side_by_side",
    rng_seed: int = 0,
) -> Image:
    """Compose the scene depth, synthesize the other eye and pack the pair.

    The input image is taken as the right eye view; the left eye sits at
    -baseline along x.  Without an explicit baseline, 2% of the scene depth
    range is used (or 2% of the mean depth for flat scenes).
    """
    img = load_image(image_path)
    layers, background_depth = parse_scene(scene_path)
    depth = compose_depth(layers, background_depth, (img.height, img.width))
    if baseline is None:
        span = float(depth.values.max() - depth.values.min())
        baseline = 0.02 * (span if span > 0 else float(depth.values.mean()))
    cam = CameraPose(fov_degrees=fov_degrees, baseline=np.array([-baseline, 0.0, 0.0]))
    left = synthesize_view(img, depth, cam, inpaint_params=PatchParams(rng_seed=rng_seed))
    packed = make_stereo_outputs(left, img, output_mode)
    save_image(packed, out_path)
    return packed
