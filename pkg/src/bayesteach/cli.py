"""Command-line interface.

Subcommands: gen-synth, train, explain, render, serve. Exit codes:
0 success, 2 validation problem, 3 no teaching set found, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bundle import assemble_bundle
from .data import ImageStore, generate_synthetic_corpus, load_manifest, read_probmap
from .errors import BayesTeachError, NoTeachingSetFound
from .model import ThetaParams
from .saliency import render_saliency, write_png
from .service import create_app, prepare_study_assets
from .study import build_study_plan
from .teaching import TeachingConfig, build_category_pools, select_teaching_set
from .training import TrainConfig, TrainItem, default_train_config, evaluate_accuracy, train_theta

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_TEACHING_SET = 3
EXIT_IO = 4


def _load_theta(path) -> ThetaParams:
    doc = json.loads(Path(path).read_text())
    return ThetaParams(w1=doc["w1"], b1=doc["b1"], w2=doc["w2"], b2=doc["b2"])


def _train_config(n_items: int, args) -> TrainConfig:
    cfg = default_train_config(n_items)
    return TrainConfig(
        learning_rate=args.lr if args.lr is not None else cfg.learning_rate,
        max_iterations=args.max_iter if args.max_iter is not None else cfg.max_iterations,
        loss_tolerance=args.tol if args.tol is not None else cfg.loss_tolerance,
    )


def cmd_gen_synth(args) -> int:
    images = generate_synthetic_corpus(
        n=args.n, width=args.width, height=args.height,
        label_noise=args.label_noise, seed=args.seed, out_dir=args.out)
    print(f"wrote {len(images)} images to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    images = load_manifest(args.manifest)
    if not images:
        print("manifest has no images", file=sys.stderr)
        return EXIT_VALIDATION
    store = ImageStore(images)
    items = [TrainItem(store.map_for(img.id), img.ground_truth) for img in images]
    result = train_theta(items, _train_config(len(items), args))
    accuracy = evaluate_accuracy(items, result.theta, 0.5)
    doc = {"w1": result.theta.w1, "b1": result.theta.b1,
           "w2": result.theta.w2, "b2": result.theta.b2,
           "final_loss": result.loss, "iterations": result.iterations,
           "training_accuracy": accuracy}
    Path(args.out_theta).write_text(json.dumps(doc, indent=2) + "\n")
    print(f"trained on {len(items)} images: loss={result.loss:.6g} "
          f"iterations={result.iterations} accuracy={accuracy:.3f}")
    return EXIT_OK


def cmd_explain(args) -> int:
    theta = _load_theta(args.theta)
    store = ImageStore(load_manifest(args.manifest)).annotate(theta)
    target = store.image_for(args.target_id)
    pools = build_category_pools(store, theta, exclude=target.id)
    cfg = TeachingConfig(
        n_candidates=args.candidates, epsilon=args.epsilon, seed=args.seed,
        selection_mode=("uniform_among_accepted" if args.selection == "uniform"
                        else "maximum_posterior"))
    teaching_set = select_teaching_set(target, pools, store, cfg,
                                       _train_config(4, args))
    bundle = assemble_bundle(target, teaching_set, store, args.out)
    print(f"target {target.id}: accepted {teaching_set.accepted_count}"
          f"/{cfg.n_candidates} candidates; "
          f"learner probability {teaching_set.candidate.learner_prob:.9f}")
    print(f"bundle written to {bundle.manifest_path}")
    return EXIT_OK


def cmd_render(args) -> int:
    pmap = read_probmap(args.probmap)
    write_png(render_saliency(pmap), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    theta = _load_theta(args.theta)
    store = ImageStore(load_manifest(args.manifest)).annotate(theta)
    assets_dir = Path(args.assets_dir) if args.assets_dir else Path(args.sessions_dir) / "assets"
    teaching_cfg = TeachingConfig(n_candidates=args.candidates,
                                  epsilon=args.epsilon, seed=args.seed)
    print("preparing study bundles (one per study target)...")
    bundles = prepare_study_assets(store, theta, assets_dir, teaching_cfg,
                                   _train_config(4, args))
    # fail fast if the corpus cannot support a full plan
    build_study_plan(store, bundles, participant_seed=0)
    app = create_app(store, bundles, assets_dir, args.sessions_dir,
                     ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bayesteach",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--label-noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="fit the classifier on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-theta", required=True)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="select a teaching set and write its bundle")
    p.add_argument("--manifest", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--target-id", required=True)
    p.add_argument("--candidates", type=int, default=10_000)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--selection", choices=("uniform", "map"), default="uniform")
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("render", help="render a probability map as a saliency PNG")
    p.add_argument("--probmap", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("serve", help="run the study service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--sessions-dir", required=True)
    p.add_argument("--assets-dir", default=None)
    p.add_argument("--ui-dir", default=None,
                   help="serve a built browser UI from this directory at /")
    p.add_argument("--candidates", type=int, default=2000)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoTeachingSetFound as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NO_TEACHING_SET
    except (BayesTeachError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
