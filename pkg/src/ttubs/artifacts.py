"""Deployment artifacts derived from a solved schedule.

* ShaperOffsetTable -- per-stream eligibility offsets for the table-driven
  per-stream shapers (one row per stream per egress port, plus the talker
  send rows).
* GateControlList   -- per-port cyclic gate states with exact nanosecond
  windows (published tables round to whole microseconds; rounding there is
  presentation, not semantics, since a window narrower than its frame
  could never transmit it under length-aware gating).
* Closed-form end-to-end latency, bounds and jitter from the table alone.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .model import InvalidInputError, Scenario, Stream, bytes_to_duration, ns_to_us_str
from .schedule import Schedule

__all__ = [
    "ShaperRow",
    "ShaperOffsetTable",
    "GclInterval",
    "GateControlList",
    "LatencyBreakdown",
    "Deployment",
    "build_shaper_offset_table",
    "build_gcl",
    "build_deployment",
    "schedule_from_table",
    "e2e_closed_form",
    "e2e_per_slot",
    "e2e_bounds_and_jitter",
    "latency_breakdown",
]

LinkKey = tuple[str, str]
N_QUEUES = 8


@dataclass(frozen=True)
class ShaperRow:
    switch: str
    egress: LinkKey
    ingress: LinkKey | None  # None on talker rows: the stream match suffices
    stream: str
    eligibility_offsets_ns: tuple[int, ...]
    cycle_time_ns: int


@dataclass
class ShaperOffsetTable:
    rows: list[ShaperRow] = field(default_factory=list)

    def row_for(self, stream: str, egress: LinkKey) -> ShaperRow:
        for row in self.rows:
            if row.stream == stream and row.egress == egress:
                return row
        raise InvalidInputError(f"no shaper row for {stream} at {egress[0]}->{egress[1]}")

    def has_stream(self, stream: str) -> bool:
        return any(r.stream == stream for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["Switch", "Port", "Stream", "EligibilityOffset", "CycleTime"])
        for row in self.rows:
            port = f"{row.ingress[0]}->{row.ingress[1]}" if row.ingress else "talker"
            for off in row.eligibility_offsets_ns:
                w.writerow([row.switch, port, row.stream, ns_to_us_str(off), ns_to_us_str(row.cycle_time_ns)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "switch": r.switch,
                    "egress": list(r.egress),
                    "ingress": list(r.ingress) if r.ingress else None,
                    "stream": r.stream,
                    "eligibility_offsets_ns": list(r.eligibility_offsets_ns),
                    "eligibility_offsets_us": [ns_to_us_str(o) for o in r.eligibility_offsets_ns],
                    "cycle_time_ns": r.cycle_time_ns,
                }
                for r in self.rows
            ]
        }


@dataclass(frozen=True)
class GclInterval:
    start_ns: int
    end_ns: int
    gates: tuple[bool, ...]  # True = open, index = queue


@dataclass
class GateControlList:
    cycle_time_ns: int
    intervals: tuple[GclInterval, ...]

    def gates_at(self, t: int) -> tuple[bool, ...]:
        pos = t % self.cycle_time_ns
        for iv in self.intervals:
            if iv.start_ns <= pos < iv.end_ns:
                return iv.gates
        raise InvalidInputError(f"gate control list does not tile position {pos}")

    def open_until(self, queue: int, t: int) -> int | None:
        """Absolute time the queue's gate closes if open at ``t`` (contiguous
        open intervals merged, looking at most one full cycle ahead), else
        None."""
        cycle = self.cycle_time_ns
        pos = t % cycle
        base = t - pos
        idx = None
        for k, iv in enumerate(self.intervals):
            if iv.start_ns <= pos < iv.end_ns:
                idx = k
                break
        if idx is None or not self.intervals[idx].gates[queue]:
            return None
        end = base + self.intervals[idx].end_ns
        k = idx
        for _ in range(2 * len(self.intervals)):
            k += 1
            if k == len(self.intervals):
                k = 0
                base += cycle
            iv = self.intervals[k]
            if not iv.gates[queue]:
                break
            end = base + iv.end_ns
        return end

    def next_fit_start(self, queue: int, t: int, duration: int) -> int | None:
        """Earliest absolute time >= t at which a frame of ``duration`` can
        start so that it completes before the queue's gate closes.  None if
        no window within one full cycle fits (then none ever will)."""
        cycle = self.cycle_time_ns
        cand = t
        horizon = t + 2 * cycle
        while cand < horizon:
            until = self.open_until(queue, cand)
            if until is None:
                # jump to the next opening of this queue's gate
                pos = cand % cycle
                base = cand - pos
                nxt = None
                for iv in self.intervals:
                    if iv.gates[queue] and iv.start_ns > pos:
                        nxt = base + iv.start_ns
                        break
                if nxt is None:
                    for iv in self.intervals:
                        if iv.gates[queue]:
                            nxt = base + cycle + iv.start_ns
                            break
                if nxt is None:
                    return None
                cand = nxt
                continue
            if cand + duration <= until:
                return cand
            cand = until
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["Interval (us)"] + [f"Q{q}" for q in range(N_QUEUES)])
        for iv in self.intervals:
            label = f"{ns_to_us_str(iv.start_ns)}-{ns_to_us_str(iv.end_ns)}"
            w.writerow([label] + ["o" if g else "C" for g in iv.gates])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "cycle_time_ns": self.cycle_time_ns,
            "intervals": [
                {"start_ns": iv.start_ns, "end_ns": iv.end_ns, "gates": ["o" if g else "C" for g in iv.gates]}
                for iv in self.intervals
            ],
        }


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-hop delay components; the hop total is their sum."""

    shaped_queue_ns: int
    forwarding_ns: int
    shared_queue_ns: int
    transmission_ns: int
    propagation_ns: int

    @property
    def total_ns(self) -> int:
        return (
            self.shaped_queue_ns
            + self.forwarding_ns
            + self.shared_queue_ns
            + self.transmission_ns
            + self.propagation_ns
        )


# ---------------------------------------------------------------------------
# builders

def build_shaper_offset_table(scenario: Scenario, schedule: Schedule) -> ShaperOffsetTable:
    """One row per (stream, egress link) with the schedule's absolute
    offsets as eligibility offsets; talker send times become the talker's
    own row.  Cycle time is the scenario hyper-period."""
    kinds = dict(scenario.nodes)
    cycle = scenario.hyper_period_ns
    table = ShaperOffsetTable()
    for s in scenario.streams:
        n = scenario.slots_of(s)
        for hop, key in enumerate(s.route):
            offs = tuple(schedule.offset(s.id, key, slot) for slot in range(n))
            ingress = s.route[hop - 1] if hop > 0 else None
            table.rows.append(
                ShaperRow(
                    switch=key[0],
                    egress=key,
                    ingress=ingress,
                    stream=s.id,
                    eligibility_offsets_ns=offs,
                    cycle_time_ns=cycle,
                )
            )
            if kinds.get(key[0]) == "switch" and list(offs) != sorted(offs):
                raise InvalidInputError(f"offsets not increasing for {s.id} at {key}")
    return table


def schedule_from_table(scenario: Scenario, table: ShaperOffsetTable) -> Schedule:
    """Inverse of :func:`build_shaper_offset_table` (offsets only; queue
    assignments are not part of the table)."""
    sched = Schedule()
    for s in scenario.streams:
        for key in s.route:
            row = table.row_for(s.id, key)
            for slot, off in enumerate(row.eligibility_offsets_ns):
                sched.offsets[(s.id, key, slot)] = off
    return sched


def build_gcl(scenario: Scenario, schedule: Schedule, link: LinkKey) -> GateControlList:
    """Cyclic gate list for one egress port: inside each reserved frame
    window exactly the frame's queue is open and every other queue closed;
    between windows the port's time-triggered queues close and the rest
    open.  Windows use the exact wire time of the largest admissible
    frame."""
    cycle = scenario.hyper_period_ns
    rate = scenario.link(link).rate_bps
    windows: list[tuple[int, int, int]] = []  # start, end, queue
    tt_queues: set[int] = set()
    for s in scenario.streams:
        if link not in s.route:
            continue
        dur = bytes_to_duration(s.payload_max, rate)
        q = schedule.queue_of(s.id, link)
        tt_queues.add(q)
        for slot in range(scenario.slots_of(s)):
            start = schedule.offset(s.id, link, slot)
            windows.append((start, start + dur, q))
    windows.sort()
    for (s1, e1, _), (s2, e2, _) in zip(windows, windows[1:]):
        if s2 < e1:
            raise InvalidInputError(f"overlapping windows on {link[0]}->{link[1]}: {e1} > {s2}")
    if windows and windows[-1][1] > cycle:
        raise InvalidInputError(f"window past cycle end on {link[0]}->{link[1]}")

    idle = tuple(q not in tt_queues for q in range(N_QUEUES))
    intervals: list[GclInterval] = []
    pos = 0
    for start, end, q in windows:
        if start > pos:
            intervals.append(GclInterval(pos, start, idle))
        gates = tuple(i == q for i in range(N_QUEUES))
        intervals.append(GclInterval(start, end, gates))
        pos = end
    if pos < cycle or not intervals:
        intervals.append(GclInterval(pos, cycle, idle))
    return GateControlList(cycle, tuple(intervals))


@dataclass
class Deployment:
    """Everything a device needs: shaper table, per-port gate lists, talker
    send schedule and shared-queue assignments."""

    table: ShaperOffsetTable
    gcls: dict[LinkKey, GateControlList]
    talker_offsets: dict[tuple[str, int], int]
    queues: dict[tuple[str, LinkKey], int]

    def to_dict(self) -> dict:
        return {
            "shaper_offset_table": self.table.to_dict(),
            "gcls": {f"{a}->{b}": g.to_dict() for (a, b), g in self.gcls.items()},
            "talker_offsets_ns": [
                {"stream": s, "slot": slot, "offset_ns": off}
                for (s, slot), off in sorted(self.talker_offsets.items())
            ],
            "queues": [
                {"stream": s, "link": [a, b], "queue": q}
                for (s, (a, b)), q in sorted(self.queues.items())
            ],
        }


def build_deployment(scenario: Scenario, schedule: Schedule) -> Deployment:
    kinds = dict(scenario.nodes)
    table = build_shaper_offset_table(scenario, schedule)
    gcls: dict[LinkKey, GateControlList] = {}
    queues: dict[tuple[str, LinkKey], int] = {}
    for s in scenario.streams:
        for key in s.route:
            if kinds.get(key[0]) != "switch":
                continue
            if key not in gcls:
                gcls[key] = build_gcl(scenario, schedule, key)
            queues[(s.id, key)] = schedule.queue_of(s.id, key)
    return Deployment(table, gcls, schedule.talker_offsets(scenario), queues)


# ---------------------------------------------------------------------------
# closed-form latency

def _stream_of(scenario: Scenario, stream: str) -> Stream:
    for s in scenario.streams:
        if s.id == stream:
            return s
    raise InvalidInputError(f"unknown stream {stream!r}")


def e2e_per_slot(scenario: Scenario, stream: str, table: ShaperOffsetTable, payload: int) -> list[int]:
    """Closed-form end-to-end latency per slot: last-hop eligibility minus
    talker send time plus the payload's wire time on the last link.
    Assumes the deployment's zero forwarding/propagation defaults."""
    s = _stream_of(scenario, stream)
    if not table.has_stream(stream):
        raise InvalidInputError(f"stream {stream!r} absent from table")
    first = table.row_for(stream, s.route[0])
    last = table.row_for(stream, s.route[-1])
    tx = bytes_to_duration(payload, scenario.link(s.route[-1]).rate_bps)
    return [
        (em - e0) + tx
        for e0, em in zip(first.eligibility_offsets_ns, last.eligibility_offsets_ns)
    ]


def e2e_closed_form(
    scenario: Scenario, stream: str, table: ShaperOffsetTable, payload: int, slot: int | None = None
) -> int:
    per_slot = e2e_per_slot(scenario, stream, table, payload)
    if slot is not None:
        return per_slot[slot]
    return max(per_slot)


def e2e_bounds_and_jitter(
    scenario: Scenario, stream: str, table: ShaperOffsetTable
) -> tuple[int, int, int]:
    """(max latency, min latency, jitter): maximum over slots at the
    largest payload, minimum over slots at the smallest, difference."""
    s = _stream_of(scenario, stream)
    hi = max(e2e_per_slot(scenario, stream, table, s.payload_max))
    lo = min(e2e_per_slot(scenario, stream, table, s.payload_min))
    return hi, lo, hi - lo


def latency_breakdown(
    scenario: Scenario, stream: str, table: ShaperOffsetTable, payload: int, slot: int = 0
) -> tuple[int, list[LatencyBreakdown]]:
    """(talker wire time, per switch-hop delay components) for one frame.

    The talker wire time plus the hop totals equals the closed form for the
    same payload and slot."""
    s = _stream_of(scenario, stream)
    rows = [table.row_for(stream, key) for key in s.route]
    out: list[LatencyBreakdown] = []
    prev_elig = rows[0].eligibility_offsets_ns[slot]
    for hop in range(1, len(s.route)):
        link_prev = scenario.link(s.route[hop - 1])
        link_here = scenario.link(s.route[hop])
        arrival = prev_elig + bytes_to_duration(payload, link_prev.rate_bps) + link_prev.prop_delay_ns
        elig = rows[hop].eligibility_offsets_ns[slot]
        out.append(
            LatencyBreakdown(
                shaped_queue_ns=elig - arrival,
                forwarding_ns=0,
                shared_queue_ns=0,
                transmission_ns=bytes_to_duration(payload, link_here.rate_bps),
                propagation_ns=link_here.prop_delay_ns,
            )
        )
        prev_elig = elig
    talker_tx = bytes_to_duration(payload, scenario.link(s.route[0]).rate_bps)
    return talker_tx, out
