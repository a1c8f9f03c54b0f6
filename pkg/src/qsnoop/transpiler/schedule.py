"""Gate durations, ASAP/ALAP list scheduling, and the timed schedule container."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..circuit import Circuit, Gate, pair
from .coupling import CouplingMap

SCHEDULE_METHODS = ("asap", "alap")


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class GateDurations:
    """Durations in device cycles (dt)."""

    cx: int = 180
    sx: int = 16
    x: int = 16
    rz: int = 0
    measure: int = 1000
    barrier: int = 0
    dt_ns: float = 2.22

    def __post_init__(self):
        if self.cx <= 0:
            raise ScheduleError("CX duration must be positive")
        if self.rz != 0:
            raise ScheduleError("RZ is virtual and must take zero time")
        if min(self.sx, self.x, self.measure, self.barrier) < 0 or self.dt_ns <= 0:
            raise ScheduleError("durations must be non-negative")

    def of(self, g: Gate) -> int:
        if g.kind == "delay":
            return int(round(g.param))
        try:
            return int(getattr(self, g.kind))
        except AttributeError:
            raise ScheduleError(f"no duration for non-native gate {g.kind}") from None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Provenance:
    layout: str = "none"
    routing: str = "none"
    opt: str = "O0"
    scheduling: str = "alap"
    seed: int = 0
    layout_fallback: bool = False

    def label(self) -> str:
        return f"{self.layout}+{self.routing}+{self.opt}+{self.scheduling}"


@dataclass(frozen=True)
class ScheduledGate:
    gate: Gate
    start: int
    duration: int

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class TimedSchedule:
    coupling: CouplingMap
    gates: tuple[ScheduledGate, ...]
    total_duration: int
    provenance: Provenance = Provenance()
    durations: GateDurations = GateDurations()
    layout: tuple[int, ...] = ()
    permutation: tuple[int, ...] = ()
    name: str = "schedule"
    family: str | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))

    @property
    def n_qubits(self) -> int:
        return self.coupling.n_physical

    def cx_events(self) -> list[ScheduledGate]:
        return [sg for sg in self.gates if sg.gate.kind == "cx"]

    def cx_total(self) -> int:
        return len(self.cx_events())

    def to_circuit(self) -> Circuit:
        return Circuit(self.n_qubits, [sg.gate for sg in self.gates], self.name, self.family)

    def active_qubits(self) -> set[int]:
        return {q for sg in self.gates if sg.gate.kind not in ("barrier", "measure") for q in sg.gate.qubits}

    def used_edges(self) -> set[tuple[int, int]]:
        return {pair(*sg.gate.qubits) for sg in self.cx_events()}

    def replace(self, gates, **changes) -> "TimedSchedule":
        gates = tuple(gates)
        total = max((sg.end for sg in gates), default=0)
        kw = dict(
            coupling=self.coupling, gates=gates, total_duration=total, provenance=self.provenance,
            durations=self.durations, layout=self.layout, permutation=self.permutation,
            name=self.name, family=self.family, meta=dict(self.meta),
        )
        kw.update(changes)
        return TimedSchedule(**kw)

    # text IO -------------------------------------------------------------
    def to_text(self) -> str:
        lines = [
            f"# name={self.name}",
            f"# family={self.family or ''}",
            f"# device={self.coupling.name}",
            f"# n_physical={self.n_qubits}",
            "# edges=" + ",".join(f"{a}-{b}" for a, b in self.coupling.sorted_edges),
            f"# total_duration={self.total_duration}",
            f"# provenance={self.provenance.layout},{self.provenance.routing},{self.provenance.opt},"
            f"{self.provenance.scheduling},{self.provenance.seed},{int(self.provenance.layout_fallback)}",
            "# layout=" + ",".join(map(str, self.layout)),
            "# permutation=" + ",".join(map(str, self.permutation)),
            f"# dt_ns={self.durations.dt_ns}",
        ]
        for sg in self.gates:
            kind = sg.gate.kind if sg.gate.param is None else f"{sg.gate.kind}({sg.gate.param!r})"
            lines.append(f"{kind} {','.join(map(str, sg.gate.qubits))} {sg.start} {sg.duration}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TimedSchedule":
        head: dict[str, str] = {}
        gates = []
        for ln, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                head[k.strip()] = v.strip()
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ScheduleError(f"line {ln}: expected 'kind operands start duration'")
            kind, ops, start, dur = parts
            param = None
            if "(" in kind:
                kind, _, rest = kind.partition("(")
                param = float(rest.rstrip(")"))
            gates.append(ScheduledGate(Gate(kind, tuple(int(q) for q in ops.split(",")), param), int(start), int(dur)))
        edges = [tuple(int(x) for x in e.split("-")) for e in head.get("edges", "").split(",") if e]
        cmap = CouplingMap(int(head["n_physical"]), frozenset(edges), head.get("device", "custom"))
        pv = head.get("provenance", "none,none,O0,alap,0,0").split(",")
        prov = Provenance(pv[0], pv[1], pv[2], pv[3], int(pv[4]), bool(int(pv[5])))
        ints = lambda key: tuple(int(x) for x in head.get(key, "").split(",") if x)
        return cls(
            cmap, tuple(gates), int(head.get("total_duration", max((g.end for g in gates), default=0))), prov,
            GateDurations(dt_ns=float(head.get("dt_ns", 2.22))), ints("layout"), ints("permutation"),
            head.get("name", "schedule"), head.get("family") or None,
        )


def _asap_starts(gates: list[Gate], n: int, d: GateDurations) -> tuple[list[int], int]:
    avail = [0] * n
    starts = []
    for g in gates:
        t = max(avail[q] for q in g.qubits)
        dur = d.of(g)
        starts.append(t)
        for q in g.qubits:
            avail[q] = t + dur
    return starts, max(avail, default=0)


def schedule(c: Circuit, d: GateDurations = GateDurations(), method: str = "alap",
             cmap: CouplingMap | None = None, **kw) -> TimedSchedule:
    """List-schedule a native circuit.

    ALAP is computed as ASAP on the reversed gate list, mirrored onto the ASAP makespan.
    """
    if method not in SCHEDULE_METHODS:
        raise ScheduleError(f"unknown scheduling method {method!r}; choose from {SCHEDULE_METHODS}")
    if cmap is None:
        cmap = CouplingMap(max(c.n_qubits, 1), frozenset((i, i + 1) for i in range(c.n_qubits - 1)), "implicit")
    if c.n_qubits != cmap.n_physical:
        raise ScheduleError(f"circuit spans {c.n_qubits} qubits, device {cmap.n_physical}")
    for g in c.gates:
        if g.kind == "cx" and not cmap.has_edge(*g.qubits):
            raise ScheduleError(f"{g} is not on a coupling edge of {cmap.name}")
    gates = list(c.gates)
    durs = [d.of(g) for g in gates]
    starts, makespan = _asap_starts(gates, c.n_qubits, d)
    if method == "alap":
        rstarts, rspan = _asap_starts(gates[::-1], c.n_qubits, d)
        assert rspan == makespan
        starts = [makespan - rs - dur for rs, dur in zip(rstarts[::-1], durs)]
    sg = tuple(ScheduledGate(g, s, dur) for g, s, dur in zip(gates, starts, durs))
    prov = kw.pop("provenance", Provenance(scheduling=method))
    return TimedSchedule(cmap, sg, makespan, prov, d, name=c.name, family=c.family, **kw)


def overlap_violations(s: TimedSchedule) -> list[tuple[int, ScheduledGate, ScheduledGate]]:
    """Pairs of intervals that overlap on a qubit (sweep line over each qubit's gates)."""
    per_q: dict[int, list[ScheduledGate]] = {}
    for sg in s.gates:
        if sg.duration == 0:
            continue
        for q in sg.gate.qubits:
            per_q.setdefault(q, []).append(sg)
    bad = []
    for q, lst in per_q.items():
        lst = sorted(lst, key=lambda x: (x.start, x.end))
        for a, b in zip(lst, lst[1:]):
            if b.start < a.end:
                bad.append((q, a, b))
    return bad
