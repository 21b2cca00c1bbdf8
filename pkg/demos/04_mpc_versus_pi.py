"""Same square-wave profile, two controllers.

The PI loop only sees the current error, so it reacts once the slow water has
already fallen behind. The MPC plans against the reduced model over a four
minute horizon and spends the actuator range earlier.

Run: python3 demos/04_mpc_versus_pi.py
"""
import os

from thermoshell import runner
from thermoshell.config import parse_config

path = os.path.join(os.path.dirname(__file__), os.pardir, "src", "thermoshell", "scenarios", "fig7_square.ini")
cfg = parse_config(path)
for kind in ("pi", "mpc"):
    s = runner.run_scenario(cfg, kind).summary
    print(f"{kind:>4}: rms {s.rms_error_C:5.2f} degC, IAE {s.iae_C_s:7.0f} degC s, "
          f"longest saturation {s.max_clamp_duration_s:5.1f} s, fallback ticks {s.fallback_ticks}")
