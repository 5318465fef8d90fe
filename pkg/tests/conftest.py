"""Shared corpus builders for the test suite."""
import math

import numpy as np
import pytest

from bayesteach.model import ProbMap


def blob_map(peak, admitted_frac, width=24, height=24, rng=None, center=None):
    """Smooth gaussian blob with the given peak over low background noise."""
    rng = rng or np.random.default_rng(0)
    if center is None:
        cy, cx = height / 2.0, width / 2.0
    else:
        cy, cx = center
    r = math.sqrt(admitted_frac * width * height / math.pi)
    sigma = r / math.sqrt(2.0 * math.log(peak / 0.05))
    yy, xx = np.mgrid[0:height, 0:width]
    blob = peak * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma * sigma))
    bg = rng.uniform(0.0, 0.04, (height, width))
    return ProbMap(np.clip(np.maximum(bg, blob), 0.0, 1.0))


def speckle_map(vmax, n_speckles, width=24, height=24, rng=None):
    """Low noise with a few isolated pixels in (0.05, vmax]."""
    rng = rng or np.random.default_rng(0)
    m = rng.uniform(0.0, 0.04, (height, width))
    if n_speckles:
        pos = rng.choice(width * height, size=n_speckles, replace=False)
        m.ravel()[pos] = rng.uniform(0.055, vmax, n_speckles)
    return ProbMap(m)


def quiet_map(width=24, height=24, rng=None):
    """No admitted pixels at all."""
    rng = rng or np.random.default_rng(0)
    return ProbMap(rng.uniform(0.0, 0.045, (height, width)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory):
    """Small noisy corpus with a trained model, shared across modules.

    96 images at 24x24 with 20% label noise (seed picked so every
    confusion category holds at least 6 images). Returns the annotated
    store, the fitted parameters, and the corpus directory.
    """
    from bayesteach.data import ImageStore, generate_synthetic_corpus
    from bayesteach.training import TrainItem, default_train_config, train_theta

    root = tmp_path_factory.mktemp("desk_corpus")
    images = generate_synthetic_corpus(
        n=96, width=24, height=24, label_noise=0.2, seed=5, out_dir=root)
    store = ImageStore(images)
    items = [TrainItem(store.map_for(img.id), img.ground_truth) for img in images]
    result = train_theta(items, default_train_config(len(items)))
    annotated = store.annotate(result.theta)
    return annotated, result.theta, root


@pytest.fixture(scope="session")
def desk_bundles(desk_corpus, tmp_path_factory):
    """Bundles for every study target of the desk corpus.

    Uses a wide epsilon and a short learner fit: the study-protocol tests
    exercise the service machinery, not the teaching acceptance regime.
    """
    from bayesteach.service import prepare_study_assets
    from bayesteach.teaching import TeachingConfig
    from bayesteach.training import TrainConfig

    store, theta, _ = desk_corpus
    assets = tmp_path_factory.mktemp("desk_assets")
    bundles = prepare_study_assets(
        store, theta, assets,
        teaching_cfg=TeachingConfig(n_candidates=40, epsilon=0.45, seed=100),
        train_cfg=TrainConfig(learning_rate=10.0, max_iterations=1500,
                              loss_tolerance=4e-9),
    )
    return bundles, assets
