"""Example-based explanations for a soft-threshold image classifier.

The package trains a four-parameter logistic gate model on per-pixel
probability maps, searches for four-example teaching sets that make a
freshly trained learner reproduce the model's call on a target image,
renders saliency maps, and runs the accompanying human study over HTTP.
"""

__version__ = "0.1.0"

from .bundle import ExplanationBundle, assemble_bundle
from .data import (
    ImageStore,
    LabeledImage,
    generate_synthetic_corpus,
    load_manifest,
    read_probmap,
    save_manifest,
    write_probmap,
)
from .model import (
    ABSENT,
    PRESENT,
    PixelFeatures,
    ProbMap,
    ThetaParams,
    classify,
    compute_features,
    image_prob,
    pixel_prob,
)
from .saliency import RgbRaster, hot_colormap, render_grayscale, render_saliency, write_png
from .study import (
    ResponseRecord,
    Session,
    SessionStore,
    StudyPlan,
    TrialSpec,
    build_study_plan,
    export_sessions,
    pair_by_l1,
)
from .teaching import (
    CategoryPools,
    TeachingCandidate,
    TeachingConfig,
    TeachingSet,
    build_category_pools,
    learner_posterior,
    sample_candidate,
    select_teaching_set,
)
from .training import (
    TrainConfig,
    TrainItem,
    TrainResult,
    cross_entropy_loss,
    default_train_config,
    evaluate_accuracy,
    loss_gradient,
    train_theta,
)
