"""Robust LQ wind-turbine power-tracking control.

Gain synthesis for curtailed active-power tracking via linear matrix
inequalities over vertex sets of linearized operating points, a blended
two-region runtime controller, a closed-loop nonlinear simulator with
actuator saturations, and rainflow/damage-equivalent-load metrics.
"""

__version__ = "0.1.0"
