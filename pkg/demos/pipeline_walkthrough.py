# %% [markdown]
# From raw spectrum frames to a diagram
#
# Synthesize one hour of a 100-136 MHz capture, pull out the signals,
# segment their state sequences and draw the result.

# %%
from pathlib import Path

from astf.abstraction import abstract_signal
from astf.bench import synthesize_capture
from astf.preprocess import binarize_states, detect_anomalies, group_by_signal, identify_signals
from astf.render import render_diagram
from astf.segmentation import SegmentationConfig, bssva

frames = synthesize_capture(T=3600, n_signals=5, seed=3, n_anomalies=2)
records = identify_signals(frames)
print(f"{len(frames)} frames, {len(records)} signal records")

# %%
t0, T = frames[0].timestamp, len(frames)
anomalies = detect_anomalies(records)
abstractions = []
for sid, recs in sorted(group_by_signal(records).items()):
    seq = binarize_states(recs, t0, T, sid)
    res = bssva(seq, SegmentationConfig(10, 20))
    mine = [a for a in anomalies if a.signal_id == sid]
    a = abstract_signal(seq, res.segmentation, recs, mine)
    abstractions.append(a)
    classes = "".join(str(c.cell_class % 10) for c in a.cells)  # class 10 shows as 0
    print(f"{sid} {a.center_freq / 1e6:7.2f} MHz  n={res.n:2d}  loss={res.loss:.4f}  classes {classes}")

# %%
out = Path("walkthrough.svg")
out.write_text(render_diagram(abstractions))
print("wrote", out.resolve())
