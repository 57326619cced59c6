"""Longitudinal driving policy: corridor gating plus a headway braking law."""

from __future__ import annotations

from ..geometry import xy_from_polar
from ..inject import PerceivedObject
from .world import ActorState, PolicyConfig

# Perceived objects carry no extent, so the planner inflates every obstacle by
# a worst-case half length when converting a center offset into a gap.
OBSTACLE_INFLATION_M = 2.25


def driving_policy(perceived: list[PerceivedObject], ego: ActorState, cfg: PolicyConfig) -> float:
    """Commanded longitudinal acceleration (m/s^2, negative = braking).

    The nearest perceived object ahead (positive longitudinal offset) within
    the reaction corridor sets the gap. Commanded deceleration ramps linearly
    from 0 at gap = v * headway + standstill up to max_decel at the max-brake
    stopping distance (v^2 / (2 * max_decel) + standstill); with no relevant
    obstacle the command is comfort_accel toward cruise (the integrator caps
    speed at the scenario's cruise target). Fully deterministic.
    """
    nearest = None
    for obj in perceived:
        x, y = xy_from_polar(obj.position)
        if abs(x) <= cfg.corridor_half_width_m and y > 0.0 and (nearest is None or y < nearest):
            nearest = y
    if nearest is None:
        return cfg.comfort_accel

    gap = nearest - 0.5 * ego.length - OBSTACLE_INFLATION_M
    d_brake_full = ego.speed * ego.speed / (2.0 * cfg.max_decel) + cfg.standstill_m
    d_brake_start = ego.speed * cfg.headway_s + cfg.standstill_m
    if gap <= d_brake_full:
        return -cfg.max_decel
    if gap <= d_brake_start:
        return -cfg.max_decel * (d_brake_start - gap) / (d_brake_start - d_brake_full)
    return cfg.comfort_accel
