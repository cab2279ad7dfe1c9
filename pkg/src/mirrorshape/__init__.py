"""Encounter-type haptic rendering simulator.

Subpackages mirror the pipeline stages: geometry, tracking, contact,
arm_kinematics, mirrorglide (shape display), controller, twin_protocol,
plant, and the harness CLI.
"""

__version__ = "0.1.0"
