"""Digital twin of a water-circulating thermal cover for a robot arm.

Subpackages and modules:

- ``materials``, ``peltier``, ``loop``: plant building blocks
- ``simulator``: the coupled plant and its time stepping
- ``calibration``: fit of the free parameters to measured dynamics
- ``controller``: reduced-model MPC, PI baseline, pump schedule, setpoint profiles
- ``capsense``: capacitive sensing baselines, recalibration and contact detection
- ``config``, ``runner``, ``cli``: scenario files and the ``thermoshell`` command
"""

__version__ = "0.1.0"
