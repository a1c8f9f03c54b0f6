"""Layout, routing, optimization and scheduling onto a device coupling map."""
from __future__ import annotations

from ..circuit import Circuit, decompose_to_native
from .coupling import CouplingError, CouplingMap, build_coupling_map, heavy_hex_edges
from .layout import LAYOUT_METHODS, Layout, LayoutError, apply_layout, dense_subset, vf2_embeddings
from .optimize import OPT_LEVELS, optimize
from .routing import ROUTING_METHODS, RoutingResult, embed, route
from .schedule import (
    SCHEDULE_METHODS, GateDurations, Provenance, ScheduledGate, ScheduleError, TimedSchedule,
    overlap_violations, schedule,
)


def transpile(c: Circuit, cmap: CouplingMap, layout: str | Layout = "sabre", routing: str = "sabre",
              opt: str = "O3lite", scheduling: str = "alap", seed: int = 0,
              durations: GateDurations = GateDurations()) -> TimedSchedule:
    native = decompose_to_native(c)
    lay = layout if isinstance(layout, Layout) else apply_layout(native, cmap, layout, seed)
    routed = route(native, lay, cmap, routing, seed)
    body = optimize(routed.circuit, opt)
    prov = Provenance(lay.method, routing, opt, scheduling, seed, lay.fallback)
    return schedule(body, durations, scheduling, cmap, provenance=prov,
                    layout=lay.logical_to_physical, permutation=routed.permutation)


def transpile_variants(c: Circuit, cmap: CouplingMap, seed: int = 0,
                       durations: GateDurations = GateDurations()) -> list[TimedSchedule]:
    """The 4 layouts x 4 routings cross product, each optimized with O3lite and scheduled ALAP."""
    native = decompose_to_native(c)
    layouts = [apply_layout(native, cmap, m, seed) for m in LAYOUT_METHODS]
    return [
        transpile(native, cmap, lay, r, "O3lite", "alap", seed, durations)
        for lay in layouts for r in ROUTING_METHODS
    ]


__all__ = [
    "CouplingError", "CouplingMap", "build_coupling_map", "heavy_hex_edges",
    "LAYOUT_METHODS", "Layout", "LayoutError", "apply_layout", "dense_subset", "vf2_embeddings",
    "OPT_LEVELS", "optimize", "ROUTING_METHODS", "RoutingResult", "embed", "route",
    "SCHEDULE_METHODS", "GateDurations", "Provenance", "ScheduledGate", "ScheduleError", "TimedSchedule",
    "overlap_violations", "schedule", "transpile", "transpile_variants",
]
