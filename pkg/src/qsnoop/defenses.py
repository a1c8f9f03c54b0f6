"""Victim-side countermeasures: CX retiming, dummy CX pairs, and layout ensembles."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import CX, Circuit, Delay, Gate, X
from .encoder import build_dataset, encode_graph
from .gcn import TrainConfig, fit, metrics_for, make_batch, predict
from .traces import CnotTrace, oracle_trace
from .transpiler import CouplingMap, Layout, TimedSchedule, apply_layout, schedule, transpile, transpile_variants
from .transpiler.schedule import ScheduledGate

DEFENSE_KINDS = ("none", "pad_retime", "dummy_pairs", "ensemble_remap")
PAD_TRIALS = 32  # candidate CX gates tried per padding insertion


class DefenseError(ValueError):
    pass


@dataclass(frozen=True)
class DefensePolicy:
    kind: str = "none"
    budget: int = 0
    ensemble_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DEFENSE_KINDS:
            raise DefenseError(f"unknown defense {self.kind!r}; choose from {DEFENSE_KINDS}")
        if self.budget < 0 or self.ensemble_size < 1:
            raise DefenseError("budget must be >= 0 and ensemble size >= 1")

    @property
    def is_noop(self) -> bool:
        if self.kind == "ensemble_remap":
            return self.ensemble_size == 1
        return self.kind == "none" or self.budget == 0

    def label(self) -> str:
        if self.kind == "ensemble_remap":
            return f"ensemble_remap(M={self.ensemble_size})"
        return f"{self.kind}({self.budget})"


@dataclass(frozen=True)
class GateDiff:
    single_qubit: int
    cx: int


def gate_diff(before: TimedSchedule, after: TimedSchedule) -> GateDiff:
    """Added gates, by structural comparison of the two gate multisets."""
    count = lambda s: Counter(sg.gate.kind for sg in s.gates)
    a, b = count(before), count(after)
    oneq = sum(b[k] - a[k] for k in ("x", "sx", "rz"))
    return GateDiff(oneq, b["cx"] - a["cx"])


def _reschedule(s: TimedSchedule, gates: list[Gate], **meta) -> TimedSchedule:
    c = Circuit(s.n_qubits, gates, s.name, s.family)
    out = schedule(c, s.durations, s.provenance.scheduling, s.coupling, provenance=s.provenance,
                   layout=s.layout, permutation=s.permutation)
    return out.replace(out.gates, meta=dict(s.meta, **meta))


def _cx_starts(s: TimedSchedule) -> list[int]:
    return [sg.start for sg in s.cx_events()]


# ---------------------------------------------------------------------------
# padding / retiming


def pad_retime(s: TimedSchedule, budget: int, seed: int = 0) -> TimedSchedule:
    """Insert up to `budget` X-Delay-X identities before CX gates and reschedule.

    Each insertion tries up to PAD_TRIALS seeded candidates and keeps the first one that moves
    a CX start without growing the makespan; failing that, the first one that moves any CX.
    """
    if budget < 0:
        raise DefenseError("budget must be non-negative")
    if budget == 0:
        return s
    rng = np.random.default_rng([seed, 0xBAD])
    gates = [sg.gate for sg in s.gates]
    cur = s
    inserted = 0
    for _ in range(budget):
        cx_idx = [i for i, g in enumerate(gates) if g.kind == "cx"]
        if not cx_idx:
            break
        order = rng.permutation(len(cx_idx))[:PAD_TRIALS]
        base = _cx_starts(cur)
        fallback = None
        chosen = None
        for j in order:
            i = cx_idx[j]
            q = gates[i].qubits[int(rng.integers(2))]
            trial_gates = gates[:i] + [X(q), Delay(cur.durations.cx, q), X(q)] + gates[i:]
            trial = _reschedule(s, trial_gates)
            if _cx_starts(trial) == base:
                continue
            if trial.total_duration <= cur.total_duration:
                chosen = (trial_gates, trial)
                break
            if fallback is None:
                fallback = (trial_gates, trial)
        pick = chosen or fallback
        if pick is None:
            break
        gates, cur = pick
        inserted += 1
    return _reschedule(s, gates, pad_inserted=inserted, pad_requested=budget,
                       makespan_delta=cur.total_duration - s.total_duration)


# ---------------------------------------------------------------------------
# dummy CX pairs


def victim_allocation(s: TimedSchedule) -> set[int]:
    return set(s.layout) | s.active_qubits()


def _idle_slots(s: TimedSchedule, edges, min_len: int) -> list[tuple[tuple[int, int], int]]:
    """(edge, start) for every common idle interval of length >= min_len on an edge."""
    # zero-duration gates (RZ, barriers) count as busy instants so no pair straddles them
    busy: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for sg in s.gates:
        for q in sg.gate.qubits:
            busy[q].append((sg.start, sg.end))

    def free(q):
        out, t = [], 0
        for a, b in sorted(busy[q]):
            if a > t:
                out.append((t, a))
            t = max(t, b)
            if a == b and a >= t:
                t = a + 1  # an instant splits the interval; the pair may not start on it either
        if t < s.total_duration:
            out.append((t, s.total_duration))
        return out

    slots = []
    for a, b in edges:
        for fa in free(a):
            for fb in free(b):
                lo, hi = max(fa[0], fb[0]), min(fa[1], fb[1])
                if hi - lo >= min_len:
                    slots.append(((a, b), lo))
    return slots


def insert_dummy_pairs(s: TimedSchedule, k: int, seed: int = 0,
                       allocation: Sequence[int] | None = None, extend: bool = True) -> TimedSchedule:
    """Place k back-to-back CX pairs on edges inside the victim allocation.

    Pairs go into common idle slots first, leaving the original timing untouched. Once slots run
    out, the rest form a lead-in block before the program (shifting it, counted in
    meta["makespan_delta"]) unless `extend` is False, in which case meta["dummy_partial"] is set.
    """
    if k < 0:
        raise DefenseError("k must be non-negative")
    if k == 0:
        return s
    alloc = set(allocation) if allocation is not None else victim_allocation(s)
    edges = [e for e in s.coupling.sorted_edges if e[0] in alloc and e[1] in alloc]
    if not edges:
        raise DefenseError("victim allocation holds no coupling edge")
    rng = np.random.default_rng([seed, 0xD0D])
    cx = s.durations.cx
    cur = s
    extra: list[tuple[int, int, ScheduledGate]] = []  # (start, tiebreak, gate)
    placed = 0
    while placed < k:
        slots = _idle_slots(cur, edges, 2 * cx)
        if not slots:
            break
        (a, b), t = slots[int(rng.integers(len(slots)))]
        if rng.random() < 0.5:
            a, b = b, a
        new = [ScheduledGate(CX(a, b), t, cx), ScheduledGate(CX(a, b), t + cx, cx)]
        extra += [(sg.start, placed, sg) for sg in new]
        cur = cur.replace(list(cur.gates) + new)
        placed += 1
    lead = (k - placed) if extend else 0
    shift = 2 * cx * lead
    for j in range(lead):
        a, b = edges[int(rng.integers(len(edges)))]
        for r in range(2):
            extra.append((2 * cx * j + cx * r, -1, ScheduledGate(CX(a, b), 2 * cx * j + cx * r, cx)))
    moved = lambda sg: ScheduledGate(sg.gate, sg.start + shift, sg.duration)
    # order by start; on ties the lead-in comes first, then original gates, then slot pairs,
    # which keeps every qubit's gate order intact
    keyed = [(sg.start + shift, 0, i, moved(sg)) for i, sg in enumerate(s.gates)]
    keyed += [(t + (shift if n >= 0 else 0), 1 if n >= 0 else -1, n, sg if n < 0 else moved(sg))
              for t, n, sg in extra]
    keyed.sort(key=lambda x: x[:3])
    inserted = placed + lead
    meta = dict(s.meta, dummy_requested=k, dummy_inserted=inserted, dummy_lead_in=lead,
                dummy_partial=inserted < k, makespan_delta=shift,
                cost_cx=s.meta.get("cost_cx", 0) + 2 * inserted)
    return s.replace([x[3] for x in keyed], total_duration=s.total_duration + shift, meta=meta)


# ---------------------------------------------------------------------------
# layout ensembles


@dataclass
class Ensemble:
    schedules: list[TimedSchedule]
    weights: list[float]
    flags: tuple[str, ...] = ()

    def mixture_trace(self, bucket_duration: int, label: str | None = None) -> CnotTrace:
        return mixture_trace(self.schedules, self.weights, bucket_duration, label)


def ensemble_remap(c: Circuit, cmap: CouplingMap, M: int, seed: int = 0, base: TimedSchedule | None = None,
                   routing: str = "sabre", max_attempts: int | None = None) -> Ensemble:
    """M schedules whose physical edge usage differs pairwise; equal shot weights.

    `base`, when given, is the first member (so M = 1 returns it unchanged); other members come
    from dense and seeded sabre layouts. Returns fewer members with flag "short" if the search
    runs out of attempts.
    """
    if M < 1:
        raise DefenseError("ensemble size must be at least 1")
    members: list[TimedSchedule] = [base] if base is not None else []
    seen = [frozenset(m.used_edges()) for m in members]
    seen_layouts = {m.layout for m in members}
    attempts = max_attempts if max_attempts is not None else 20 * M
    rng = np.random.default_rng([seed, 0xE45])
    for a in range(attempts):
        if len(members) >= M:
            break
        if a == 0 and base is None:
            lay = apply_layout(c, cmap, "dense", seed)
        else:
            lay = apply_layout(c, cmap, "sabre", int(rng.integers(2**31)))
        if lay.logical_to_physical in seen_layouts:
            continue
        seen_layouts.add(lay.logical_to_physical)
        s = transpile(c, cmap, Layout(lay.logical_to_physical, lay.method), routing, "O3lite", "alap", seed)
        used = frozenset(s.used_edges())
        if used in seen:
            continue
        members.append(s)
        seen.append(used)
    flags = ("short",) if len(members) < M else ()
    return Ensemble(members, [1.0 / len(members)] * len(members), flags)


def mixture_trace(schedules: Sequence[TimedSchedule], weights: Sequence[float], bucket_duration: int,
                  label: str | None = None) -> CnotTrace:
    """What the attacker sees when shots are spread over several layouts: a weighted count sum."""
    if len(schedules) != len(weights) or not schedules:
        raise DefenseError("need one weight per schedule")
    traces = [oracle_trace(s, bucket_duration, label) for s in schedules]
    if len(traces) == 1 and weights[0] == 1.0:
        return traces[0]
    nb = max(t.n_buckets for t in traces)
    counts: dict = defaultdict(float)
    for t, w in zip(traces, weights):
        for key, v in t.counts.items():
            counts[key] += w * v
    t0 = traces[0]
    return CnotTrace(t0.n_qubits, t0.bucket_duration, nb, dict(counts), t0.edges, t0.cx_duration,
                     t0.label, "mixture", meta={"weights": list(weights)})


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class DefenseReport:
    policy: str
    undefended_accuracy: float
    defended_accuracy: float
    added_single_qubit: int
    added_cx: int
    makespan_delta: int
    n_test: int
    meta: dict = field(default_factory=dict)

    @property
    def accuracy_delta(self) -> float:
        return self.defended_accuracy - self.undefended_accuracy

    def row(self) -> dict:
        return {
            "policy": self.policy, "undefended_accuracy": self.undefended_accuracy,
            "defended_accuracy": self.defended_accuracy, "accuracy_delta": self.accuracy_delta,
            "added_single_qubit": self.added_single_qubit, "added_cx": self.added_cx,
            "makespan_delta": self.makespan_delta, "n_test": self.n_test,
        }


def defend_schedule(s: TimedSchedule, policy: DefensePolicy, seed: int, circuit: Circuit | None = None,
                    bucket_duration: int | None = None, label: str | None = None):
    """Apply one policy; returns (defended schedules, attacker-observed trace or None)."""
    if policy.kind == "pad_retime":
        return [pad_retime(s, policy.budget, seed)], None
    if policy.kind == "dummy_pairs":
        return [insert_dummy_pairs(s, policy.budget, seed)], None
    if policy.kind == "ensemble_remap":
        if policy.ensemble_size == 1:
            return [s], None
        if circuit is None:
            raise DefenseError("ensemble_remap needs the logical circuit")
        ens = ensemble_remap(circuit, s.coupling, policy.ensemble_size, seed, base=s, routing=s.provenance.routing)
        trace = ens.mixture_trace(bucket_duration, label) if bucket_duration else None
        return ens.schedules, trace
    return [s], None


def evaluate_defense(victims: Sequence[tuple[str, Circuit]], cmap: CouplingMap, policy: DefensePolicy,
                     train_cfg: TrainConfig = TrainConfig(), resolution: float = 1.0,
                     split_fraction: float = 0.8, seed: int = 0,
                     variants: dict[str, list[TimedSchedule]] | None = None) -> DefenseReport:
    """Train the attack on undefended traces, then score the test split with and without the defense."""
    from .inference import hash_seed

    if variants is None:
        variants = {lab: transpile_variants(c, cmap, seed) for lab, c in victims}
    circuits = dict(victims)
    tb = None
    plain: list[CnotTrace] = []
    scheds: list[tuple[str, TimedSchedule]] = []
    for lab, _ in victims:
        for s in variants[lab]:
            tb = s.durations.cx
            plain.append(oracle_trace(s, tb, lab))
            scheds.append((lab, s))
    d = build_dataset(plain, resolution, split_fraction, seed, class_names=[lab for lab, _ in victims])
    model, met = fit(d, train_cfg)
    test = [int(i) for i in d.test_idx]
    defended_graphs = list(d.graphs)
    add_1q = add_cx = dspan = 0
    for i in test:
        lab, s = scheds[i]
        out, trace = defend_schedule(s, policy, hash_seed(policy.seed, i), circuits[lab], tb, lab)
        if trace is None:
            trace = oracle_trace(out[0], tb, lab)
        if len(out) == 1:
            diff = gate_diff(s, out[0])
            add_1q += diff.single_qubit
            add_cx += diff.cx
        dspan += max(o.total_duration for o in out) - s.total_duration
        defended_graphs[i] = encode_graph(trace, resolution, d.b_max, int(d.labels[i]))
    dd = d.with_graphs(defended_graphs)
    b = make_batch(dd.subset(test), dd.labels[test])
    defended = metrics_for(b.y, predict(model.copy(), b), d.n_classes)
    return DefenseReport(policy.label(), met.accuracy, defended.accuracy, add_1q, add_cx, dspan, len(test),
                         {"undefended_confusion": met.confusion.tolist(), "defended_confusion": defended.confusion.tolist()})
