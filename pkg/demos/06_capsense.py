"""Touch sensing through the water layer.

Water pulls the raw reading down to about 0.56, and its noise is larger. A
gain-only recalibration on a quiet window brings the baseline back to one,
after which a fixed threshold with debounce picks out each grasp.

Run: python3 demos/06_capsense.py
"""
import numpy as np

from thermoshell.capsense import STACKS, baseline, grasp_protocol, process_stream, synthetic_stream

print("stack                       mean     std")
for s in STACKS:
    b = baseline(s)
    print(f"  {s:<25} {b.mean:5.3f}  {b.std:.2e}")

contacts = grasp_protocol()
t, raw = synthetic_stream("foam_channels_gel_water", 180.0, contacts=contacts, seed=3)
cal, norm, flags = process_stream(t, raw)
onsets = t[1:][np.diff(flags.astype(int)) == 1]
print(f"\ngain {cal.gain:.3f}, quiet-window mean after recalibration {norm[t < 20].mean():.4f}")
print(f"scripted grasps at {[c[0] for c in contacts]}")
print(f"detected onsets at {np.round(onsets, 1).tolist()}")
