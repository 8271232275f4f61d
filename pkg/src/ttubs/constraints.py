"""Ground scheduling constraints over per-frame offset and per-stream queue
variables.

Five constraint families are generated from a scenario:

* frame        -- each transmission window fits inside its own period
* link         -- reserved windows on one link never overlap
* flow         -- a hop's window starts only after the frame fully arrived
                  from the upstream hop (clock offset included)
* e2e          -- last-hop completion minus first-hop start meets the
                  stream deadline
* isolation    -- two streams may share an egress queue only if one frame
                  has left the queue before the other arrives, or they are
                  queue-separated (3-way disjunction)

Constraints are emitted fully ground: slot indices are expanded, all
constants folded.  Offset variables are slot-relative; the ``slot * period``
displacement appears only inside folded constants.  Builders iterate in
scenario order, so identical scenarios yield identical constraint lists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .model import (
    FrameInstance,
    InvalidInputError,
    Scenario,
    Stream,
    expand_frame_instances,
)
from .schedule import NFIC_QUEUE, Schedule

__all__ = [
    "Atom",
    "GroundConstraint",
    "QueueVar",
    "ConstraintSet",
    "ConstraintCensus",
    "CATEGORIES",
    "build_frame_constraints",
    "build_link_constraints",
    "build_flow_constraints",
    "build_e2e_constraints",
    "build_isolation_constraints",
    "build_constraint_set",
    "census",
    "validate_schedule",
    "queue_var_name",
]

LinkKey = tuple[str, str]
CATEGORIES = ("frame", "link", "flow", "e2e", "isolation")


@dataclass(frozen=True)
class Atom:
    """Linear atom ``sum(coef * var) <op> const`` with integer coefficients.

    ``op`` is one of ``>=``, ``<=``, ``!=``.
    """

    terms: tuple[tuple[str, int], ...]
    op: str
    const: int

    def holds(self, assignment: dict[str, int]) -> bool:
        lhs = 0
        for var, coef in self.terms:
            try:
                lhs += coef * assignment[var]
            except KeyError:
                raise InvalidInputError(f"unassigned variable {var}") from None
        if self.op == ">=":
            return lhs >= self.const
        if self.op == "<=":
            return lhs <= self.const
        if self.op == "!=":
            return lhs != self.const
        raise InvalidInputError(f"unknown atom op {self.op}")


@dataclass(frozen=True)
class GroundConstraint:
    """Disjunction of conjunctions of atoms; satisfied when at least one
    disjunct has all atoms true."""

    category: str
    disjuncts: tuple[tuple[Atom, ...], ...]
    label: str

    def holds(self, assignment: dict[str, int]) -> bool:
        return any(all(a.holds(assignment) for a in conj) for conj in self.disjuncts)


@dataclass(frozen=True)
class QueueVar:
    """Queue-index variable of one stream on one switch egress link.

    ``fixed`` pins the value (isolation disabled); a free variable ranges
    over ``[0, domain_max]``.
    """

    name: str
    stream: str
    link: LinkKey
    domain_max: int
    fixed: int | None = None


def queue_var_name(stream: str, link: LinkKey) -> str:
    clean = lambda t: "".join(c if c.isalnum() else "_" for c in t)
    return f"q_{clean(stream)}_{clean(link[0])}__{clean(link[1])}"


@dataclass
class ConstraintSet:
    mode: str  # "wa" | "nfic"
    instances: list[FrameInstance]
    queue_vars: list[QueueVar]
    constraints: list[GroundConstraint]

    @property
    def offset_var_names(self) -> list[str]:
        return [fi.var_name for fi in self.instances]

    def free_queue_vars(self) -> list[QueueVar]:
        return [q for q in self.queue_vars if q.fixed is None]


@dataclass(frozen=True)
class ConstraintCensus:
    frame: int
    link: int
    flow: int
    e2e: int
    isolation: int

    @property
    def total(self) -> int:
        return self.frame + self.link + self.flow + self.e2e + self.isolation

    def as_dict(self) -> dict[str, int]:
        return {
            "frame": self.frame,
            "link": self.link,
            "flow": self.flow,
            "e2e": self.e2e,
            "isolation": self.isolation,
            "total": self.total,
        }


# ---------------------------------------------------------------------------
# helpers

def _instances_by_stream_link(instances: Sequence[FrameInstance]):
    by: dict[tuple[str, LinkKey], list[FrameInstance]] = {}
    for fi in instances:
        by.setdefault((fi.stream, fi.link), []).append(fi)
    return by


def _ge(lhs: Sequence[tuple[str, int]], const: int) -> Atom:
    return Atom(tuple(lhs), ">=", const)


def _le(lhs: Sequence[tuple[str, int]], const: int) -> Atom:
    return Atom(tuple(lhs), "<=", const)


def _queue_links(scenario: Scenario) -> list[tuple[str, LinkKey]]:
    """(stream, link) pairs owning a queue variable: switch egress hops."""
    kinds = dict(scenario.nodes)
    out = []
    for s in scenario.streams:
        for key in s.route:
            if kinds.get(key[0]) == "switch":
                out.append((s.id, key))
    return out


# ---------------------------------------------------------------------------
# builders

def build_frame_constraints(scenario: Scenario) -> list[GroundConstraint]:
    """One constraint per frame instance: ``0 <= phi <= T - L``."""
    out = []
    for fi in expand_frame_instances(scenario):
        var = fi.var_name
        atoms = (_ge([(var, 1)], 0), _le([(var, 1)], fi.period_ns - fi.duration_ns))
        out.append(GroundConstraint("frame", (atoms,), f"frame[{fi.stream}@{fi.link[0]}->{fi.link[1]}#{fi.slot}]"))
    return out


def build_link_constraints(scenario: Scenario) -> list[GroundConstraint]:
    """Pairwise non-overlap of reserved windows on each link.

    For streams i, j sharing a link and every slot pair (a, b):
    ``i after j`` or ``j after i`` on absolute offsets.
    """
    out = []
    by = _instances_by_stream_link(expand_frame_instances(scenario))
    for ln in scenario.links:
        on_link = [s for s in scenario.streams if ln.key in s.route]
        for ia in range(len(on_link)):
            for ib in range(ia + 1, len(on_link)):
                si, sj = on_link[ia], on_link[ib]
                for fi in by[(si.id, ln.key)]:
                    for fj in by[(sj.id, ln.key)]:
                        a_disp = fi.slot * fi.period_ns
                        b_disp = fj.slot * fj.period_ns
                        # i starts after j ends:  phi_i + aT >= phi_j + bT + Lj
                        first = _ge([(fi.var_name, 1), (fj.var_name, -1)], b_disp + fj.duration_ns - a_disp)
                        # j starts after i ends
                        second = _ge([(fj.var_name, 1), (fi.var_name, -1)], a_disp + fi.duration_ns - b_disp)
                        out.append(
                            GroundConstraint(
                                "link",
                                ((first,), (second,)),
                                f"link[{ln.src}->{ln.dst}: {si.id}#{fi.slot} vs {sj.id}#{fj.slot}]",
                            )
                        )
    return out


def _hop_pairs(n_up: int, n_down: int) -> list[tuple[int, int]]:
    """Distinct (upstream slot, downstream slot) pairs taken by successive
    periods of one stream when the two links have different hyper-periods."""
    reps = math.lcm(n_up, n_down)
    return [(m % n_up, m % n_down) for m in range(reps)]


def build_flow_constraints(scenario: Scenario) -> list[GroundConstraint]:
    """Hop ordering along each route: the downstream window opens only after
    full arrival from upstream plus propagation, processing and the worst
    clock offset between the two devices."""
    out = []
    by = _instances_by_stream_link(expand_frame_instances(scenario))
    delta = scenario.sync_precision_ns
    for s in scenario.streams:
        for up_key, down_key in zip(s.route, s.route[1:]):
            up = by[(s.id, up_key)]
            down = by[(s.id, down_key)]
            link_up = scenario.link(up_key)
            lag = up[0].duration_ns + link_up.prop_delay_ns + link_up.proc_delay_ns + delta
            for a, b in _hop_pairs(len(up), len(down)):
                fu, fd = up[a], down[b]
                # both offsets displace by the same global period index, so
                # the slot terms cancel and only the arrival lag remains
                atom = _ge([(fd.var_name, 1), (fu.var_name, -1)], lag)
                out.append(
                    GroundConstraint(
                        "flow",
                        ((atom,),),
                        f"flow[{s.id}: {up_key[0]}->{up_key[1]}#{fu.slot} => {down_key[0]}->{down_key[1]}#{fd.slot}]",
                    )
                )
    return out


def build_e2e_constraints(scenario: Scenario) -> list[GroundConstraint]:
    """Per stream and slot: last-hop completion minus first-hop start stays
    within the stream deadline."""
    out = []
    by = _instances_by_stream_link(expand_frame_instances(scenario))
    for s in scenario.streams:
        first = by[(s.id, s.route[0])]
        last = by[(s.id, s.route[-1])]
        for a, b in _hop_pairs(len(first), len(last)):
            ff, fl = first[a], last[b]
            # global period displacement cancels between first and last hop
            atom = _le([(fl.var_name, 1), (ff.var_name, -1)], s.e2e_deadline_ns - fl.duration_ns)
            out.append(GroundConstraint("e2e", ((atom,),), f"e2e[{s.id}#{ff.slot}->{fl.slot}]"))
    return out


def build_isolation_constraints(scenario: Scenario, mode: str = "wa") -> list[GroundConstraint]:
    """Egress-queue isolation: for each egress link and stream pair, either
    one stream's frame arrives at the device only after the other's has
    left the queue (left = reached its egress offset), or the two streams
    use different queues.

    Arrival time is the upstream absolute offset plus upstream wire time,
    upstream propagation delay and the worst clock offset.  On a stream's
    first hop the "upstream offset" is its talker send offset on that very
    link and no wire/propagation time is added.  In ``nfic`` mode nothing
    is emitted: per-stream shaped queues make enqueue order immaterial.
    """
    if mode == "nfic":
        return []
    out = []
    by = _instances_by_stream_link(expand_frame_instances(scenario))
    delta = scenario.sync_precision_ns
    kinds = dict(scenario.nodes)

    def arrival_parts(s: Stream, egress: LinkKey, egress_slot: int):
        """(var name, folded constant) of the stream's arrival at the device
        feeding `egress`, for the frame that uses `egress_slot` there.  The
        displacement uses the egress-cycle slot: the upstream link may have a
        shorter hyper-period, in which case one upstream variable serves
        several egress slots."""
        hop = s.route.index(egress)
        if hop == 0:
            fi = by[(s.id, egress)][egress_slot]
            return fi.var_name, egress_slot * s.period_ns + delta
        up_key = s.route[hop - 1]
        ups = by[(s.id, up_key)]
        fu = ups[egress_slot % len(ups)]
        link_up = scenario.link(up_key)
        const = (
            egress_slot * s.period_ns
            + fu.duration_ns
            + link_up.prop_delay_ns
            + delta
        )
        return fu.var_name, const

    for ln in scenario.links:
        on_link = [s for s in scenario.streams if ln.key in s.route]
        has_queue = kinds.get(ln.src) == "switch"
        for ia in range(len(on_link)):
            for ib in range(ia + 1, len(on_link)):
                si, sj = on_link[ia], on_link[ib]
                for fi in by[(si.id, ln.key)]:
                    for fj in by[(sj.id, ln.key)]:
                        vj, cj = arrival_parts(sj, ln.key, fj.slot)
                        vi, ci = arrival_parts(si, ln.key, fi.slot)
                        # j arrives only after i left the queue
                        d1 = _ge([(vj, 1), (fi.var_name, -1)], fi.slot * fi.period_ns - cj)
                        # i arrives only after j left the queue
                        d2 = _ge([(vi, 1), (fj.var_name, -1)], fj.slot * fj.period_ns - ci)
                        disjuncts: list[tuple[Atom, ...]] = [(d1,), (d2,)]
                        if has_queue:
                            qi = queue_var_name(si.id, ln.key)
                            qj = queue_var_name(sj.id, ln.key)
                            disjuncts.append((Atom(((qi, 1), (qj, -1)), "!=", 0),))
                        out.append(
                            GroundConstraint(
                                "isolation",
                                tuple(disjuncts),
                                f"isolation[{ln.src}->{ln.dst}: {si.id}#{fi.slot} vs {sj.id}#{fj.slot}]",
                            )
                        )
    return out


def build_constraint_set(scenario: Scenario, mode: str = "nfic") -> ConstraintSet:
    """Expand the scenario into the full ground constraint system."""
    if mode not in ("wa", "nfic"):
        raise InvalidInputError(f"unknown mode {mode!r} (expected 'wa' or 'nfic')")
    instances = expand_frame_instances(scenario)
    names = [fi.var_name for fi in instances]
    if len(set(names)) != len(names):
        # distinct ids can sanitize to one symbol (e.g. "s-1" vs "s_1")
        raise InvalidInputError("stream/node ids collide after symbol sanitization")
    constraints = (
        build_frame_constraints(scenario)
        + build_link_constraints(scenario)
        + build_flow_constraints(scenario)
        + build_e2e_constraints(scenario)
        + build_isolation_constraints(scenario, mode)
    )
    queue_vars = []
    for stream_id, key in _queue_links(scenario):
        cmax = scenario.link(key).queue_count - 1
        fixed = NFIC_QUEUE if mode == "nfic" else None
        queue_vars.append(QueueVar(queue_var_name(stream_id, key), stream_id, key, cmax, fixed))
    return ConstraintSet(mode, instances, queue_vars, constraints)


def census(scenario: Scenario, mode: str = "wa") -> ConstraintCensus:
    """Per-category constraint counts, without solving."""
    cs = build_constraint_set(scenario, mode)
    counts = {c: 0 for c in CATEGORIES}
    for gc in cs.constraints:
        counts[gc.category] += 1
    return ConstraintCensus(
        frame=counts["frame"],
        link=counts["link"],
        flow=counts["flow"],
        e2e=counts["e2e"],
        isolation=counts["isolation"],
    )


# ---------------------------------------------------------------------------
# schedule validation (ground-truth oracle for every solver)

def validate_schedule(
    scenario: Scenario, schedule: Schedule, mode: str = "nfic"
) -> list[GroundConstraint]:
    """Evaluate every ground constraint; returns the violated ones (empty =
    schedule is valid in the requested mode).  Raises
    :class:`InvalidInputError` when the schedule leaves a variable
    unassigned."""
    cs = build_constraint_set(scenario, mode)
    assignment: dict[str, int] = {}
    for fi in cs.instances:
        absolute = schedule.offset(fi.stream, fi.link, fi.slot)
        assignment[fi.var_name] = absolute - fi.slot * fi.period_ns
    for qv in cs.queue_vars:
        assignment[qv.name] = qv.fixed if qv.fixed is not None else schedule.queue_of(qv.stream, qv.link)
    return [gc for gc in cs.constraints if not gc.holds(assignment)]
