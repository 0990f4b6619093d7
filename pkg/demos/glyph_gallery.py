# %% [markdown]
# The ten cell glyphs
#
# One cell per class, drawn side by side, with its visual duty ratio.
# Classes 7-10 reuse the triangles of 3-6 and add umbrella strokes.

# %%
from pathlib import Path

from astf.metrics import visual_duty_ratio
from astf.render import Rect, render_cell

W, H, GAP = 40, 120, 20
parts = []
for k, cls in enumerate(range(1, 11)):
    x = GAP + k * (W + GAP)
    parts.append(f'<rect x="{x}" y="20" width="{W}" height="{H}" fill="none" stroke="#ccc"/>')
    parts.append(render_cell(cls, "high", False, False, Rect(x, 20, W, H)))
    parts.append(f'<text x="{x + W / 2}" y="{H + 40}" text-anchor="middle" font-size="11">{cls}: {visual_duty_ratio(cls):.2f}</text>')
    print(f"class {cls:2d}  visual duty ratio {visual_duty_ratio(cls):.2f}")

width = GAP + 10 * (W + GAP)
svg = f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{H + 60}">' + "".join(parts) + "</svg>\n"
Path("glyphs.svg").write_text(svg)
