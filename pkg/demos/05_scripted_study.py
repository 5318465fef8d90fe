"""Run the whole study pipeline in-process with a scripted participant.

Builds a corpus, trains the model, prepares explanation bundles for the
24 study targets, starts the HTTP service in a test client, and walks a
robot participant through all three blocks: 8 prediction trials (two
ratings each) and 16 certification trials. Ends with the CSV export.
"""
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from bayesteach import (
    ImageStore,
    TeachingConfig,
    TrainItem,
    default_train_config,
    generate_synthetic_corpus,
    train_theta,
)
from bayesteach.service import create_app, prepare_study_assets
from bayesteach.training import TrainConfig

workdir = Path(tempfile.mkdtemp(prefix="bayesteach_demo_"))
images = generate_synthetic_corpus(
    n=96, width=24, height=24, label_noise=0.2, seed=5, out_dir=workdir)
store = ImageStore(images)
items = [TrainItem(store.map_for(img.id), img.ground_truth) for img in images]
theta = train_theta(items, default_train_config(len(items))).theta
store = store.annotate(theta)

# A quick study setup: modest candidate counts and a loose epsilon keep
# this demo fast; a real deployment would use the defaults (10,000
# candidates, epsilon 1e-6).
print("preparing bundles for the study targets...")
bundles = prepare_study_assets(
    store, theta, workdir / "assets",
    teaching_cfg=TeachingConfig(n_candidates=40, epsilon=0.45, seed=100),
    train_cfg=TrainConfig(learning_rate=10.0, max_iterations=1500,
                          loss_tolerance=4e-9))
print(f"bundled {len(bundles)} targets")

app = create_app(store, bundles, workdir / "assets", workdir / "sessions")
with TestClient(app) as client:
    session = client.post("/sessions", json={"seed": 7}).json()
    sid = session["session_id"]
    print(f"\nsession {sid[:8]}… with {session['n_trials']} trials")

    trials_seen = 0
    while True:
        payload = client.get(f"/sessions/{sid}/trial").json()
        if payload["done"]:
            break
        body = {"trial_id": payload["trial_id"], "phase": payload["phase"]}
        if payload["phase"] == "diagnose":
            body["rating"] = 72
        elif payload["phase"] == "predict":
            body["rating"] = 81
            trials_seen += 1
        else:
            body.update(certify=True, agree=True,
                        justifications=["looked_right_place"])
            trials_seen += 1
        ack = client.post(f"/sessions/{sid}/response", json=body).json()
        if "feedback" in ack:
            fb = ack["feedback"]
            print(f"  {payload['trial_id']}: predicted present -> "
                  f"{'correct' if fb['correct'] else 'wrong'} "
                  f"(model said {fb['ai_label']})")

    print(f"\ncompleted {trials_seen} trials")
    export = client.get("/export").text
    print(f"export has {export.count(chr(10)) - 1} response rows")
