"""A tour of the soft-threshold classifier on a hand-made probability map.

The model never sees raw pixels: its input is a per-pixel probability
map (how likely each pixel belongs to a pneumothorax region). Pixels
above 0.05 are "admitted"; each gets two features and a score from two
logistic gates, and the image score is the best pixel's score.
"""
import numpy as np

from bayesteach import ProbMap, ThetaParams, classify, compute_features, image_prob, pixel_prob

# A 4x4 map with a bright corner and some sub-threshold background.
values = np.array([
    [0.90, 0.60, 0.02, 0.01],
    [0.55, 0.30, 0.01, 0.02],
    [0.01, 0.02, 0.01, 0.04],
    [0.02, 0.01, 0.03, 0.01],
])
pmap = ProbMap(values)

features = compute_features(pmap)
print(f"{len(features)} of {pmap.width * pmap.height} pixels are admitted (> 0.05):")
for f in features:
    print(f"  pixel {f.pixel_index:2d}: x1={f.x1:.2f}  x2={f.x2:.4f}")

# x1 is the pixel's own probability; x2 ranks it among admitted pixels,
# normalised by the total pixel count. The brightest pixel of a fully
# admitted map would get x2 = 1.

theta = ThetaParams(w1=10.0, b1=5.0, w2=10.0, b2=-1.0)
print("\nPer-pixel scores under theta =", theta)
for f in features:
    print(f"  pixel {f.pixel_index:2d}: p = {pixel_prob(f, theta):.4f}")

p = image_prob(pmap, theta)
print(f"\nimage probability = max over pixels = {p:.4f}")
print("classification:", "present" if classify(p, 0.5) else "absent")

# An empty map (nothing admitted) carries no evidence at all.
quiet = ProbMap(np.full((4, 4), 0.02))
print(f"\nquiet map image probability = {image_prob(quiet, theta)}")
