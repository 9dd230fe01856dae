"""Sensor-selection rules over the belief simplex.

A policy is any callable Belief -> sensor index that is total on the
simplex.  Three realizations cover everything the tools need: a constant
sensor, a two-state threshold rule, and nearest-cell lookup into a grid
policy table produced by the solver.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConstantPolicy:
    sensor: int

    def __call__(self, belief):
        return self.sensor


@dataclass(frozen=True)
class ThresholdPolicy:
    """Two-state rule: sensor_high if pi[0] >= theta else sensor_low."""

    theta: float
    sensor_high: int = 0
    sensor_low: int = 1

    def __call__(self, belief):
        if belief.num_states != 2:
            raise ValueError("threshold policies are only defined for M=2")
        return self.sensor_high if belief.probs[0] >= self.theta \
            else self.sensor_low


@dataclass(frozen=True)
class GridLookupPolicy:
    """Act by the table entry of the nearest grid cell to the belief."""

    grid: object            # BeliefGrid
    table: np.ndarray       # grid ordinal -> sensor index

    def __call__(self, belief):
        return int(self.table[self.grid.project_point(belief.probs)])
