"""Assembly of the ten-image explanation bundle for one target.

A bundle holds the target and its four teaching examples (ordered
tp, tn, fp, fn), each as a display PNG plus a saliency PNG, and a
bundle.json manifest with the model's calls and selection metadata.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .data import ImageStore, LabeledImage
from .model import LABEL_NAMES
from .saliency import render_grayscale, render_saliency, write_png
from .teaching import CATEGORIES, TeachingSet

BUNDLE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class BundleEntry:
    """One image of the bundle with its two rendered files."""

    role: str                      # "target", "tp", "tn", "fp", "fn"
    image: LabeledImage
    display_path: Path
    saliency_path: Path


@dataclass(frozen=True)
class ExplanationBundle:
    target: BundleEntry
    examples: tuple[BundleEntry, ...]   # ordered tp, tn, fp, fn
    teaching: TeachingSet
    manifest_path: Path

    @property
    def image_paths(self) -> list[Path]:
        out = []
        for entry in (self.target, *self.examples):
            out.append(entry.display_path)
            out.append(entry.saliency_path)
        return out


def _write_display(store: ImageStore, image: LabeledImage, path: Path) -> None:
    if image.xray_path is not None:
        Image.open(image.xray_path).convert("RGB").save(path, format="PNG")
    else:
        write_png(render_grayscale(store.map_for(image.id)), path)


def _entry_json(entry: BundleEntry, root: Path, include_truth: bool) -> dict:
    img = entry.image
    doc = {
        "role": entry.role,
        "id": img.id,
        "model_label": LABEL_NAMES[img.model_label],
        "model_prob": img.model_prob,
        "display": entry.display_path.relative_to(root).as_posix(),
        "saliency": entry.saliency_path.relative_to(root).as_posix(),
    }
    if include_truth:
        doc["ground_truth"] = LABEL_NAMES[img.ground_truth]
    return doc


def assemble_bundle(target: LabeledImage, teaching_set: TeachingSet,
                    store: ImageStore, out_dir) -> ExplanationBundle:
    """Render the ten PNGs and the bundle manifest into out_dir.

    Requires model annotations on the target and all examples. The
    target's ground truth is deliberately left out of the manifest: a
    study participant must never see it.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if target.model_prob is None:
        raise ValueError("target has no model annotation")

    def build_entry(role: str, image: LabeledImage) -> BundleEntry:
        if image.model_prob is None:
            raise ValueError(f"example {image.id!r} has no model annotation")
        display = out_dir / f"{role}_display.png"
        sal = out_dir / f"{role}_saliency.png"
        _write_display(store, image, display)
        write_png(render_saliency(store.map_for(image.id)), sal)
        return BundleEntry(role=role, image=image,
                           display_path=display, saliency_path=sal)

    target_entry = build_entry("target", target)
    examples = tuple(
        build_entry(role, store.image_for(image_id))
        for role, image_id in zip(CATEGORIES, teaching_set.ids))

    theta = teaching_set.candidate.learner_theta
    doc = {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "target": _entry_json(target_entry, out_dir, include_truth=False),
        "examples": [_entry_json(e, out_dir, include_truth=True) for e in examples],
        "learner_theta": {"w1": theta.w1, "b1": theta.b1,
                          "w2": theta.w2, "b2": theta.b2},
        "metadata": {
            "seed": teaching_set.seed,
            "epsilon": teaching_set.epsilon,
            "n_candidates": teaching_set.n_candidates,
            "accepted_count": teaching_set.accepted_count,
            "selection_mode": teaching_set.selection_mode,
            "learner_prob": teaching_set.candidate.learner_prob,
        },
    }
    manifest_path = out_dir / "bundle.json"
    manifest_path.write_text(json.dumps(doc, indent=2) + "\n")
    return ExplanationBundle(target=target_entry, examples=examples,
                             teaching=teaching_set, manifest_path=manifest_path)
