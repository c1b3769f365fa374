"""Trapezoidal speed profile along a path of known remaining length."""

from __future__ import annotations

import math
from dataclasses import dataclass

_EPS = 1e-12


@dataclass(frozen=True)
class MotionLimits:
    v_max: float = 2.0
    a_max: float = 2.0
    robot_radius: float = 0.15

    def problems(self) -> list[str]:
        return [f"motion.{k} must be > 0" for k in ("v_max", "a_max", "robot_radius")
                if not getattr(self, k) > 0]


def trapezoid_advance(v0: float, remaining: float, v_max: float, a_max: float,
                      dt: float) -> tuple[float, float]:
    """Integrate one step of a rest-to-rest trapezoid exactly.

    Returns ``(distance travelled, speed at end of step)``; the profile
    accelerates at ``a_max`` up to ``v_max`` and brakes so speed reaches zero
    exactly at ``remaining``.
    """
    s = 0.0
    v = min(v0, v_max)
    left = remaining
    tau = dt
    while tau > _EPS and left > _EPS:
        if v * v / (2.0 * a_max) >= left - 1e-12:
            if v <= _EPS:
                return remaining, 0.0
            a = v * v / (2.0 * left)
            t_stop = 2.0 * left / v
            if tau >= t_stop - 1e-9:
                return remaining, 0.0
            return s + v * tau - 0.5 * a * tau * tau, v - a * tau
        if v < v_max - _EPS:
            v_peak = math.sqrt(a_max * left + 0.5 * v * v)
            t_acc = (min(v_max, v_peak) - v) / a_max
            t = min(tau, t_acc)
            d = v * t + 0.5 * a_max * t * t
            s += d
            left -= d
            v += a_max * t
            tau -= t
            if t_acc <= t and v_peak <= v_max:
                v = v_peak
        else:
            v = v_max
            d_cruise = left - v * v / (2.0 * a_max)
            t = min(tau, d_cruise / v)
            s += v * t
            left -= v * t
            tau -= t
            if t >= d_cruise / v:
                left = v * v / (2.0 * a_max)
    if left <= _EPS:
        return remaining, 0.0
    return s, v
