"""Dataset plumbing: probability-map files, manifests, synthetic corpora.

Probability maps are stored in a small lossless binary format ("BTPM"):
magic b"BTPM", version u16, width u32, height u32 (all little-endian),
followed by width*height float32 little-endian values, row-major, each
in [0, 1]. PNG would quantise, hence the custom format.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    BadDimensions,
    BadMagic,
    DuplicateId,
    MissingFile,
    SchemaError,
    ValueOutOfRange,
)
from .model import (
    ABSENT,
    LABEL_NAMES,
    LABEL_VALUES,
    PRESENT,
    ProbMap,
    ThetaParams,
    classify,
    image_prob,
)

MAGIC = b"BTPM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHII")


def write_probmap(path, pmap: ProbMap) -> None:
    path = Path(path)
    payload = pmap.values.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, pmap.width, pmap.height))
        fh.write(payload)


def read_probmap(path) -> ProbMap:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise BadMagic(f"{path}: file too short for a probability-map header")
    magic, version, width, height = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise BadMagic(f"{path}: bad magic/version {magic!r} v{version}")
    if width < 1 or height < 1:
        raise BadDimensions(f"{path}: degenerate dimensions {width}x{height}")
    expected = _HEADER.size + 4 * width * height
    if len(raw) != expected:
        raise BadDimensions(
            f"{path}: payload is {len(raw) - _HEADER.size} bytes, "
            f"expected {expected - _HEADER.size} for {width}x{height}")
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(height, width)
    if not np.all(np.isfinite(values)):
        raise ValueOutOfRange(f"{path}: non-finite values")
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueOutOfRange(f"{path}: values outside [0, 1]")
    return ProbMap(values.copy())


@dataclass(frozen=True)
class LabeledImage:
    """One dataset entry: id, map file, optional display x-ray, labels."""

    id: str
    probmap_path: Path
    ground_truth: int
    xray_path: Path | None = None
    model_prob: float | None = None

    def __post_init__(self):
        if self.ground_truth not in (ABSENT, PRESENT):
            raise ValueError(f"ground_truth must be 0/1, got {self.ground_truth!r}")
        if self.model_prob is not None and not 0.0 <= self.model_prob <= 1.0:
            raise ValueError(f"model_prob {self.model_prob!r} outside [0, 1]")

    @property
    def model_label(self) -> int | None:
        if self.model_prob is None:
            return None
        return classify(self.model_prob, 0.5)

    @property
    def category(self) -> str | None:
        """Confusion category of the model's call against ground truth."""
        label = self.model_label
        if label is None:
            return None
        if label == PRESENT:
            return "tp" if self.ground_truth == PRESENT else "fp"
        return "tn" if self.ground_truth == ABSENT else "fn"


def load_manifest(path) -> list[LabeledImage]:
    """Read a dataset manifest; paths are resolved relative to the file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        raise SchemaError(f"{path}: expected an object with an 'images' list")
    root = path.parent
    images = []
    seen = set()
    for i, entry in enumerate(doc["images"]):
        if not isinstance(entry, dict):
            raise SchemaError(f"{path}: images[{i}] is not an object")
        try:
            image_id = entry["id"]
            probmap = entry["probmap"]
            ground_truth = entry["ground_truth"]
        except KeyError as e:
            raise SchemaError(f"{path}: images[{i}] missing key {e}") from e
        if not isinstance(image_id, str) or not image_id:
            raise SchemaError(f"{path}: images[{i}].id must be a non-empty string")
        if image_id in seen:
            raise DuplicateId(f"{path}: duplicate image id {image_id!r}")
        seen.add(image_id)
        if ground_truth not in LABEL_VALUES:
            raise SchemaError(
                f"{path}: images[{i}].ground_truth must be 'present' or 'absent'")
        probmap_path = root / probmap
        if not probmap_path.is_file():
            raise MissingFile(f"{path}: probmap {probmap_path} does not exist")
        xray = entry.get("xray")
        xray_path = None
        if xray is not None:
            xray_path = root / xray
            if not xray_path.is_file():
                raise MissingFile(f"{path}: xray {xray_path} does not exist")
        model_prob = entry.get("model_prob")
        if model_prob is not None and not isinstance(model_prob, (int, float)):
            raise SchemaError(f"{path}: images[{i}].model_prob must be a number")
        images.append(LabeledImage(
            id=image_id,
            probmap_path=probmap_path,
            ground_truth=LABEL_VALUES[ground_truth],
            xray_path=xray_path,
            model_prob=None if model_prob is None else float(model_prob),
        ))
    return images


def save_manifest(path, images: list[LabeledImage]) -> None:
    """Write a manifest with paths relative to its directory."""
    path = Path(path)
    root = path.parent

    def rel(p: Path) -> str:
        try:
            return p.relative_to(root).as_posix()
        except ValueError:
            return str(p)

    entries = []
    for img in images:
        entry = {
            "id": img.id,
            "probmap": rel(img.probmap_path),
            "ground_truth": LABEL_NAMES[img.ground_truth],
        }
        if img.xray_path is not None:
            entry["xray"] = rel(img.xray_path)
        if img.model_prob is not None:
            entry["model_prob"] = img.model_prob
        entries.append(entry)
    path.write_text(json.dumps({"images": entries}, indent=2) + "\n")


class ImageStore:
    """Id-keyed access to a dataset with cached probability maps."""

    def __init__(self, images, maps=None):
        self._images = {img.id: img for img in images}
        if len(self._images) != len(list(images)):
            raise DuplicateId("image ids must be unique")
        self._order = [img.id for img in images]
        self._maps = dict(maps) if maps else {}

    def __len__(self):
        return len(self._order)

    @property
    def images(self) -> list[LabeledImage]:
        return [self._images[i] for i in self._order]

    def image_for(self, image_id: str) -> LabeledImage:
        try:
            return self._images[image_id]
        except KeyError:
            raise KeyError(f"unknown image id {image_id!r}") from None

    def map_for(self, image_id: str) -> ProbMap:
        if image_id not in self._maps:
            self._maps[image_id] = read_probmap(self.image_for(image_id).probmap_path)
        return self._maps[image_id]

    def annotate(self, theta: ThetaParams) -> "ImageStore":
        """New store whose images carry this model's probability and label."""
        annotated = [
            replace(img, model_prob=image_prob(self.map_for(img.id), theta))
            for img in self.images
        ]
        return ImageStore(annotated, maps=self._maps)


def generate_synthetic_corpus(n: int, width: int, height: int,
                              label_noise: float, seed: int,
                              out_dir) -> list[LabeledImage]:
    """Write a deterministic synthetic corpus and its manifest.

    Even-indexed images hold a smooth gaussian blob (peak in [0.7, 0.97])
    over low background noise; odd-indexed images hold only sub-0.3
    noise, some with a handful of admitted speckle pixels and some with
    none. Ground truth is the content label flipped with probability
    label_noise, which is what makes false positives/negatives exist for
    an accurate model. Returns the image list (paths resolved).
    """
    if n < 8:
        raise ValueError("a corpus needs at least 8 images")
    if not 0.0 <= label_noise < 1.0:
        raise ValueError("label_noise must lie in [0, 1)")
    out_dir = Path(out_dir)
    maps_dir = out_dir / "probmaps"
    maps_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    images = []
    for i in range(n):
        background = rng.uniform(0.0, 0.04, (height, width))
        if i % 2 == 0:
            peak = rng.uniform(0.70, 0.97)
            frac = rng.uniform(0.03, 0.22)
            # integer centre so the realised maximum equals the drawn peak
            cy = int(rng.integers(int(0.3 * height), int(0.7 * height) + 1))
            cx = int(rng.integers(int(0.3 * width), int(0.7 * width) + 1))
            radius = math.sqrt(frac * width * height / math.pi)
            sigma = radius / math.sqrt(2.0 * math.log(peak / 0.05))
            blob = peak * np.exp(
                -((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma * sigma))
            values = np.maximum(background, blob)
            content = PRESENT
        else:
            values = background
            if rng.random() < 0.65:
                k = int(rng.integers(3, max(4, (width * height) // 100)))
                pos = rng.choice(width * height, size=k, replace=False)
                values.ravel()[pos] = rng.uniform(0.055, 0.25, k)
            content = ABSENT
        ground_truth = content
        if rng.random() < label_noise:
            ground_truth = PRESENT if content == ABSENT else ABSENT
        image_id = f"img{i:04d}"
        pmap = ProbMap(np.clip(values, 0.0, 1.0))
        map_path = maps_dir / f"{image_id}.btpm"
        write_probmap(map_path, pmap)
        images.append(LabeledImage(
            id=image_id, probmap_path=map_path, ground_truth=ground_truth))
    save_manifest(out_dir / "manifest.json", images)
    return images
