"""Hand-built circuits and schedules shipped as reference fixtures."""
from __future__ import annotations

import math

from .circuit import CX, RZ, SX, Circuit, Gate, H, Measure, u3_native
from .transpiler import GateDurations, Provenance, ScheduledGate, TimedSchedule, build_coupling_map

FIXTURE_BUCKET = 2000


def two_local_timed_fixture() -> TimedSchedule:
    """4-qubit two-local ansatz on physical qubits 1..4 of line(5); qubit 0 stays idle.

    CX start times are pinned so that 2000 dt buckets hold 1, 2, 2 and 1 CX gates.
    """
    d = GateDurations()
    cmap = build_coupling_map("line(5)")
    active = (1, 2, 3, 4)
    events: list[tuple[int, Gate]] = []

    def rot(t0: int, q: int, theta: float):
        events.extend([(t0, RZ(theta, q)), (t0, SX(q)), (t0 + d.sx, RZ(math.pi - theta, q))])

    for k, q in enumerate(active):
        rot(0, q, 0.3 * (k + 1))
    events += [(1000, CX(1, 2)), (2200, CX(2, 3)), (2400, CX(3, 4))]
    for k, q in enumerate(active):
        rot(3000, q, 0.2 * (k + 2))
    events += [(4500, CX(1, 2)), (5000, CX(2, 3)), (6500, CX(3, 4))]
    for k, q in enumerate(active):
        rot(6700, q, 0.1 * (k + 3))
    events += [(6716, Measure(q)) for q in active]
    events.sort(key=lambda e: e[0])
    gates = tuple(ScheduledGate(g, t, d.of(g)) for t, g in events)
    return TimedSchedule(
        cmap, gates, max(sg.end for sg in gates), Provenance("manual", "none", "O0", "manual"), d,
        layout=active, permutation=tuple(range(5)), name="twolocal_fixture", family="twolocal",
    )


QAOA_EDGES = ((0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2), (1, 3))


def qaoa_fixture(p: int = 2, gamma: float = 0.7, beta: float = 0.4) -> Circuit:
    """QAOA-style MaxCut ansatz on a 5-node graph with two chords."""
    gates: list[Gate] = [H(q) for q in range(5)]
    for layer in range(p):
        g, b = gamma * (layer + 1), beta / (layer + 1)
        for a, c in QAOA_EDGES:
            gates += [CX(a, c), RZ(2 * g, c), CX(a, c)]
        for q in range(5):
            gates += u3_native(2 * b, -math.pi / 2, math.pi / 2, q)
    return Circuit(5, gates, name="qaoa_n5", family="qaoa")
