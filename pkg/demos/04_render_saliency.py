"""Render probability maps as saliency PNGs with the pinned hot colormap.

Zero probability maps to pure black, one to pure white; in between the
map ramps through red and yellow. Values are used as-is, with no
normalisation, so the same probability always gets the same colour.
"""
import tempfile
from pathlib import Path

import numpy as np

from bayesteach import ProbMap, hot_colormap, render_grayscale, render_saliency, write_png

print("colormap anchors:")
for v in (0.0, 0.25, 0.5, 0.75, 1.0):
    print(f"  v={v:.2f} -> rgb{hot_colormap(v)}")

# A radial ramp makes the full palette visible at a glance.
yy, xx = np.mgrid[0:128, 0:128]
d = np.sqrt((yy - 64.0) ** 2 + (xx - 64.0) ** 2)
pmap = ProbMap(np.clip(1.0 - d / 64.0, 0.0, 1.0))

outdir = Path(tempfile.mkdtemp(prefix="bayesteach_demo_"))
write_png(render_saliency(pmap), outdir / "saliency.png")
write_png(render_grayscale(pmap), outdir / "grayscale.png")
print("\nwrote", outdir / "saliency.png")
print("wrote", outdir / "grayscale.png")
