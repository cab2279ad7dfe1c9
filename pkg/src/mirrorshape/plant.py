"""Simulated robot plant: first-order lag toward the commanded setpoint."""
from dataclasses import dataclass

import numpy as np

DEFAULT_TAU = 0.05  # s; dominant time constant of a position-controlled arm


@dataclass(frozen=True)
class PlantState:
    joints: np.ndarray              # (6,) rad
    joint_velocities: np.ndarray    # (6,) rad/s
    linkage: np.ndarray             # (3,) actuated display coordinates
    clock: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "joints", np.asarray(self.joints, dtype=float))
        object.__setattr__(self, "joint_velocities",
                           np.asarray(self.joint_velocities, dtype=float))
        object.__setattr__(self, "linkage", np.asarray(self.linkage, dtype=float))

    @staticmethod
    def at_rest(joints, linkage):
        return PlantState(joints=np.asarray(joints, dtype=float).copy(),
                          joint_velocities=np.zeros(6),
                          linkage=np.asarray(linkage, dtype=float).copy(),
                          clock=0.0)


def plant_step(state, joint_command, linkage_command, dt, tau=DEFAULT_TAU):
    """Advance the plant by dt toward the commanded values.

    Each coordinate follows q <- q + (q_cmd - q) * (1 - exp(-dt/tau));
    tau = 0 tracks exactly.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if tau < 0.0:
        raise ValueError("tau must be non-negative")
    alpha = 1.0 if tau == 0.0 else 1.0 - np.exp(-dt / tau)
    q_cmd = np.asarray(joint_command, dtype=float)
    l_cmd = np.asarray(linkage_command, dtype=float)
    q_new = state.joints + (q_cmd - state.joints) * alpha
    l_new = state.linkage + (l_cmd - state.linkage) * alpha
    return PlantState(joints=q_new,
                      joint_velocities=(q_new - state.joints) / dt,
                      linkage=l_new,
                      clock=state.clock + dt)
