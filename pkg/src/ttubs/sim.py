"""Deterministic discrete-event simulator of talkers, switches and
listeners.

Switch egress runs in one of two modes:

* ``tas``   -- gate-controlled shared priority queues.  Transmission
  selection is strict priority over open, non-empty queues; a frame starts
  only when the line is idle, its gate is open, and the transmission fits
  before the gate closes (length-aware guard).  Once started it is never
  aborted.  A frame that misses its window waits for the next opening
  that fits.
* ``ttubs`` -- per-stream shaped queues ahead of the shared queues.  The
  shaper releases each frame at its table eligibility time, discards
  frames whose eligibility already passed in the current cycle, and keeps
  at most one frame per shaped queue (a newer arrival displaces an older
  held frame).  Shared-queue gates for time-triggered traffic stay open.

Ingress carries per-stream filter chains; a fault meter bound to a chain
can drop or delay designated frames.  A delayed frame holds back later
frames of its own chain (released in order with it), other chains are
unaffected.

Everything is integer nanoseconds and rng-seeded; identical configs give
byte-identical traces.  Event ordering at equal times: shaper releases,
then link arrivals, then meter releases, then transmission retries.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .artifacts import Deployment, GateControlList
from .model import InvalidInputError, Scenario, bytes_to_duration
from .schedule import NFIC_QUEUE

__all__ = [
    "AttackConfig",
    "SimConfig",
    "StreamMetrics",
    "SimReport",
    "run",
    "collect_metrics",
    "gcl_gate_state",
    "eligibility_decision",
    "MeterState",
]

LinkKey = tuple[str, str]

# event phases at equal timestamps
PH_SHAPER = 0
PH_ARRIVAL = 1
PH_METER = 2
PH_SERVICE = 3
PH_SEND = 4

DROP_CAUSES = ("attack_dropped", "timeout_discarded", "displaced", "stranded")


@dataclass(frozen=True)
class AttackConfig:
    """Fault injection bound to one ingress filter chain of a switch.

    ``attack_type`` 1/'drop' discards, 2/'delay' holds frames for
    ``delay_time_ns``.  The first ``frame_count`` matching frames fully
    received at or after ``startup_time_ns`` are acted on.  ``match_stream``
    narrows the chain to one stream; None matches every stream on the
    ingress."""

    switch: str
    ingress: LinkKey
    attack_type: str  # "drop" | "delay"
    startup_time_ns: int
    frame_count: int
    delay_time_ns: int = 0
    match_stream: str | None = None

    def __post_init__(self):
        if self.frame_count < 0 or self.delay_time_ns < 0:
            raise InvalidInputError("frame_count and delay_time must be >= 0")
        if self.attack_type not in ("drop", "delay"):
            raise InvalidInputError(f"unknown attack_type {self.attack_type!r}")


@dataclass
class SimConfig:
    scenario: Scenario
    deployment: Deployment
    egress_mode: str | dict[str, str] = "ttubs"
    faults: tuple[AttackConfig, ...] = ()
    rng_seed: int = 1
    sim_duration_ns: int = 10_000_000_000

    def mode_of(self, switch: str) -> str:
        mode = self.egress_mode if isinstance(self.egress_mode, str) else self.egress_mode[switch]
        if mode not in ("tas", "ttubs"):
            raise InvalidInputError(f"unknown egress mode {mode!r}")
        return mode


@dataclass
class StreamMetrics:
    sent: int = 0
    delivered: int = 0
    drops: dict[str, int] = field(default_factory=lambda: {c: 0 for c in DROP_CAUSES})
    e2e_max_ns: int | None = None
    e2e_min_ns: int | None = None
    e2e_mean_ns: float | None = None
    jitter_ns: int | None = None
    deadline_violations: int = 0
    jitter_violation: bool = False
    frames: list[tuple[int, int, int]] = field(default_factory=list)  # (slot, payload, e2e)


@dataclass
class SimReport:
    metrics: dict[str, StreamMetrics]
    shaper_discards: int  # timeout + displaced, network-wide
    trace_path: str | None = None


def gcl_gate_state(gcl: GateControlList, t: int) -> tuple[bool, ...]:
    """Gate vector (True = open) of the interval containing ``t`` within
    the cyclic list."""
    return gcl.gates_at(t)


def eligibility_decision(now: int, offsets: tuple[int, ...], cycle_ns: int, period_ns: int):
    """Shaper decision for a frame entering its shaped queue at ``now``:
    ('hold', release_time) when the current slot's eligibility offset is
    still ahead, ('timeout', None) when it already passed."""
    cur = now % cycle_ns
    slot = cur // period_ns
    intended = offsets[slot]
    if intended < cur:
        return "timeout", None
    return "hold", now - cur + intended


class MeterState:
    """Runtime state of one fault meter (pass/drop/delay decisions)."""

    def __init__(self, config: AttackConfig):
        self.config = config
        self.remaining = config.frame_count
        self.holding = False  # a delayed frame is pending release

    def matches(self, stream: str) -> bool:
        return self.config.match_stream is None or self.config.match_stream == stream

    def decide(self, stream: str, now: int) -> str:
        """One of 'pass', 'drop', 'delay', 'queue' (held behind a pending
        delayed frame of the same chain)."""
        if not self.matches(stream):
            return "pass"
        if self.holding:
            return "queue"
        if self.remaining > 0 and now >= self.config.startup_time_ns:
            self.remaining -= 1
            return self.config.attack_type
        return "pass"


class _Frame:
    __slots__ = ("stream_idx", "slot", "payload", "send_time", "hop", "dur")

    def __init__(self, stream_idx, slot, payload, send_time):
        self.stream_idx = stream_idx
        self.slot = slot
        self.payload = payload
        self.send_time = send_time
        self.hop = 0
        self.dur = 0


class _ShapedQueue:
    __slots__ = ("held", "epoch", "offsets", "cycle", "period", "queue_idx")

    def __init__(self, offsets, cycle, period, queue_idx):
        self.held: _Frame | None = None
        self.epoch = 0
        self.offsets = offsets
        self.cycle = cycle
        self.period = period
        self.queue_idx = queue_idx


class _Port:
    __slots__ = (
        "link", "mode", "rate", "prop", "dst", "busy_until", "queues",
        "gcl", "shaped", "next_wake",
    )

    def __init__(self, link, mode, rate, prop, dst, gcl):
        self.link = link
        self.mode = mode  # "direct" | "tas" | "ttubs"
        self.rate = rate
        self.prop = prop
        self.dst = dst
        self.busy_until = 0
        self.queues = [[] for _ in range(8)]  # FIFO via index head pointer-free pops
        self.gcl = gcl
        self.shaped: dict[int, _ShapedQueue] = {}
        self.next_wake: int | None = None


class _Engine:
    def __init__(self, config: SimConfig, trace_path: str | None):
        self.config = config
        scenario = config.scenario
        self.scenario = scenario
        dep = config.deployment
        self.kinds = dict(scenario.nodes)
        self.streams = list(scenario.streams)
        self.sidx = {s.id: i for i, s in enumerate(self.streams)}
        self.cycle = scenario.hyper_period_ns
        if config.sim_duration_ns < self.cycle:
            raise InvalidInputError("simulation shorter than one hyper-period")

        self.heap: list = []
        self.seq = 0
        self.rng = np.random.default_rng(config.rng_seed)
        self.trace = open(trace_path, "w") if trace_path else None
        if self.trace:
            self.trace.write("time_ns,node,event,stream,slot,disposition\n")

        self.metrics = {s.id: StreamMetrics() for s in self.streams}
        self.shaper_discards = 0
        self.in_flight = 0

        # ports
        self.ports: dict[LinkKey, _Port] = {}
        for ln in scenario.links:
            if self.kinds[ln.src] == "end-station":
                mode = "direct"
                gcl = None
            else:
                mode = config.mode_of(ln.src)
                gcl = dep.gcls.get(ln.key)
                if mode == "tas" and gcl is None and scenario.streams_on_link(ln.key):
                    raise InvalidInputError(f"no gate control list for {ln.src}->{ln.dst}")
            self.ports[ln.key] = _Port(ln.key, mode, ln.rate_bps, ln.prop_delay_ns, ln.dst, gcl)

        # shaped queues + shared-queue assignment per (stream, link)
        self.queue_idx: dict[tuple[int, LinkKey], int] = {}
        for s in scenario.streams:
            i = self.sidx[s.id]
            for hop, key in enumerate(s.route):
                if self.kinds[key[0]] != "switch":
                    continue
                q = dep.queues.get((s.id, key), NFIC_QUEUE)
                self.queue_idx[(i, key)] = q
                port = self.ports[key]
                if port.mode == "ttubs":
                    row = dep.table.row_for(s.id, key)
                    port.shaped[i] = _ShapedQueue(
                        row.eligibility_offsets_ns, row.cycle_time_ns, s.period_ns, q
                    )

        # meters keyed by (switch, ingress)
        self.meters: dict[tuple[str, LinkKey], list] = {}
        for cfg in config.faults:
            state = MeterState(cfg)
            self.meters.setdefault((cfg.switch, cfg.ingress), []).append([state, []])

        # talker sends
        self.talker = dep.talker_offsets
        for s in scenario.streams:
            i = self.sidx[s.id]
            for slot in range(scenario.slots_of(s)):
                if (s.id, slot) not in self.talker:
                    raise InvalidInputError(f"deployment lacks talker offset for {s.id} slot {slot}")
                t0 = self.talker[(s.id, slot)]
                if t0 < config.sim_duration_ns:
                    self.push(t0, PH_SEND, (i, slot))

    # ------------------------------------------------------------------
    def push(self, t, phase, data):
        self.seq += 1
        heapq.heappush(self.heap, (t, phase, self.seq, data))

    def emit(self, t, node, event, stream_idx, slot, disposition=""):
        if self.trace:
            sid = self.streams[stream_idx].id if stream_idx is not None else ""
            self.trace.write(f"{t},{node},{event},{sid},{slot},{disposition}\n")

    def drop(self, t, node, frame: _Frame, cause: str, event: str):
        self.metrics[self.streams[frame.stream_idx].id].drops[cause] += 1
        if cause in ("timeout_discarded", "displaced"):
            self.shaper_discards += 1
        self.in_flight -= 1
        self.emit(t, node, event, frame.stream_idx, frame.slot, cause)

    # ------------------------------------------------------------------
    def run(self):
        handlers = {
            PH_SEND: self.on_send,
            PH_ARRIVAL: self.on_arrival,
            PH_METER: self.on_meter_release,
            PH_SHAPER: self.on_shaper_release,
            PH_SERVICE: self.on_service,
        }
        heap = self.heap
        while heap:
            t, phase, _, data = heapq.heappop(heap)
            handlers[phase](t, data)
        if self.trace:
            self.trace.close()

    # ------------------------------------------------------------------
    def on_send(self, t, data):
        i, slot = data
        s = self.streams[i]
        payload = int(self.rng.integers(s.payload_min, s.payload_max + 1))
        frame = _Frame(i, slot, payload, t)
        self.metrics[s.id].sent += 1
        self.in_flight += 1
        self.emit(t, s.talker, "send", i, slot)
        nxt = t + self.cycle
        if nxt < self.config.sim_duration_ns:
            self.push(nxt, PH_SEND, (i, slot))
        self.enqueue(t, self.ports[s.route[0]], frame)

    def on_arrival(self, t, data):
        frame, link = data
        s = self.streams[frame.stream_idx]
        node = link[1]
        frame.hop += 1
        if frame.hop == len(s.route):
            self.deliver(t, node, frame)
            return
        self.emit(t, node, "arrive", frame.stream_idx, frame.slot)
        for entry in self.meters.get((node, link), ()):
            state, pending = entry
            action = state.decide(s.id, t)
            if action == "drop":
                self.drop(t, node, frame, "attack_dropped", "meter_drop")
                return
            if action == "delay":
                state.holding = True
                pending.append(frame)
                self.emit(t, node, "meter_capture", frame.stream_idx, frame.slot)
                self.push(t + state.config.delay_time_ns, PH_METER, entry)
                return
            if action == "queue":
                pending.append(frame)
                self.emit(t, node, "meter_queue", frame.stream_idx, frame.slot)
                return
        self.to_egress(t, frame)

    def on_meter_release(self, t, entry):
        state, pending = entry
        state.holding = False
        frames, pending[:] = list(pending), []
        for frame in frames:
            self.emit(t, state.config.switch, "meter_release", frame.stream_idx, frame.slot)
            self.to_egress(t, frame)

    def to_egress(self, t, frame: _Frame):
        s = self.streams[frame.stream_idx]
        key = s.route[frame.hop]
        port = self.ports[key]
        if port.mode == "ttubs":
            self.shaper_admit(t, port, frame)
        else:
            self.enqueue(t, port, frame)

    # ------------------------------------------------------------------
    def shaper_admit(self, t, port: _Port, frame: _Frame):
        sq = port.shaped[frame.stream_idx]
        node = port.link[0]
        if sq.held is not None:
            older = sq.held
            sq.held = None
            sq.epoch += 1
            self.drop(t, node, older, "displaced", "shaper_displace")
        verdict, release = eligibility_decision(t, sq.offsets, sq.cycle, sq.period)
        if verdict == "timeout":
            self.drop(t, node, frame, "timeout_discarded", "shaper_timeout")
            return
        if release == t:
            self.emit(t, node, "shaper_release", frame.stream_idx, frame.slot)
            self.enqueue(t, port, frame, sq.queue_idx)
            return
        sq.held = frame
        self.emit(t, node, "shaper_hold", frame.stream_idx, frame.slot)
        self.push(release, PH_SHAPER, (port, sq, sq.epoch))

    def on_shaper_release(self, t, data):
        port, sq, epoch = data
        if epoch != sq.epoch or sq.held is None:
            return  # displaced meanwhile
        frame = sq.held
        sq.held = None
        sq.epoch += 1
        self.emit(t, port.link[0], "shaper_release", frame.stream_idx, frame.slot)
        self.enqueue(t, port, frame, sq.queue_idx)

    # ------------------------------------------------------------------
    def enqueue(self, t, port: _Port, frame: _Frame, queue: int | None = None):
        if queue is None:
            if port.mode == "direct":
                queue = 0
            else:
                queue = self.queue_idx[(frame.stream_idx, port.link)]
        frame.dur = bytes_to_duration(frame.payload, port.rate)
        port.queues[queue].append(frame)
        self.service(t, port)

    def wake(self, port: _Port, t: int):
        if port.next_wake is None or t < port.next_wake:
            port.next_wake = t
            self.push(t, PH_SERVICE, port)

    def on_service(self, t, port: _Port):
        if port.next_wake is not None and t >= port.next_wake:
            port.next_wake = None
        self.service(t, port)

    def service(self, t, port: _Port):
        if port.busy_until > t:
            self.wake(port, port.busy_until)
            return
        gcl = port.gcl if port.mode == "tas" else None
        best_retry: int | None = None
        for q in range(7, -1, -1):
            dq = port.queues[q]
            while dq:
                head = dq[0]
                if gcl is None:
                    start_ok = True
                else:
                    until = gcl.open_until(q, t)
                    start_ok = until is not None and t + head.dur <= until
                if start_ok:
                    dq.pop(0)
                    port.busy_until = t + head.dur
                    self.emit(t, port.link[0], "tx_start", head.stream_idx, head.slot)
                    self.push(t + head.dur + port.prop, PH_ARRIVAL, (head, port.link))
                    self.wake(port, port.busy_until)
                    return
                nxt = gcl.next_fit_start(q, t, head.dur)
                if nxt is None:
                    dq.pop(0)
                    self.drop(t, port.link[0], head, "stranded", "stranded")
                    continue
                if best_retry is None or nxt < best_retry:
                    best_retry = nxt
                break
        if best_retry is not None:
            self.wake(port, best_retry)

    # ------------------------------------------------------------------
    def deliver(self, t, node, frame: _Frame):
        s = self.streams[frame.stream_idx]
        e2e = t - frame.send_time
        m = self.metrics[s.id]
        m.delivered += 1
        m.frames.append((frame.slot, frame.payload, e2e))
        self.in_flight -= 1
        self.emit(t, node, "deliver", frame.stream_idx, frame.slot, "delivered")


def collect_metrics(scenario: Scenario, metrics: dict[str, StreamMetrics]) -> dict[str, StreamMetrics]:
    """Finalize aggregate fields from the per-frame records."""
    for s in scenario.streams:
        m = metrics[s.id]
        if m.frames:
            e2es = [e for (_, _, e) in m.frames]
            m.e2e_max_ns = max(e2es)
            m.e2e_min_ns = min(e2es)
            m.e2e_mean_ns = sum(e2es) / len(e2es)
            m.jitter_ns = m.e2e_max_ns - m.e2e_min_ns
            m.deadline_violations = sum(1 for e in e2es if e > s.e2e_deadline_ns)
            m.jitter_violation = m.jitter_ns > s.jitter_req_ns
        total_drops = sum(m.drops.values())
        if m.sent != m.delivered + total_drops:
            raise AssertionError(
                f"conservation violated for {s.id}: sent {m.sent} != "
                f"delivered {m.delivered} + drops {total_drops}"
            )
    return metrics


def run(config: SimConfig, trace_path: str | None = None) -> SimReport:
    """Execute the scenario under the deployment; returns per-stream
    metrics (and writes a CSV event trace when ``trace_path`` is given)."""
    engine = _Engine(config, trace_path)
    engine.run()
    if engine.in_flight != 0:
        raise AssertionError(f"{engine.in_flight} frames unaccounted at drain")
    metrics = collect_metrics(config.scenario, engine.metrics)
    return SimReport(metrics=metrics, shaper_discards=engine.shaper_discards, trace_path=trace_path)
