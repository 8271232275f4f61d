"""Experiment harness: chained-topology generation, census and solver
sweeps, fixture replay, and CSV reporting."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fixtures
from .artifacts import build_deployment
from .constraints import CATEGORIES, census, validate_schedule
from .lstb import LstbLimits, lstb_solve
from .model import InvalidInputError, Link, Scenario, Stream, ns_to_us_str
from .sim import AttackConfig, SimConfig, StreamMetrics, run
from .smt import SolveRequest, solve

__all__ = [
    "ChainSpec",
    "ExperimentPlan",
    "gen_chain",
    "run_census_study",
    "run_solver_study",
    "replay_fixture",
    "table5_drop",
    "table5_delay",
    "census_csv",
    "solver_csv",
    "metrics_csv",
    "report_census",
    "report_metrics",
]

MS = 1_000_000


@dataclass(frozen=True)
class ChainSpec:
    """Chained topology: ``switch_count`` switches in a line, three end
    stations per switch, random unicast streams along shortest paths."""

    switch_count: int
    stream_count: int
    rng_seed: int = 0
    stations_per_switch: int = 3
    rate_bps: int = 1_000_000_000
    periods_ns: tuple[int, ...] = (10 * MS, 20 * MS)
    sizes: tuple[int, ...] = (400, 600, 800, 1000, 1500)

    @property
    def device_count(self) -> int:
        return self.switch_count * (1 + self.stations_per_switch)


@dataclass(frozen=True)
class ExperimentPlan:
    switch_counts: tuple[int, ...]
    stream_counts: tuple[int, ...]
    repetitions: int = 50
    timeout_s: float = 300.0
    rng_seed: int = 0
    workers: int = 4

    def __post_init__(self):
        if self.repetitions < 1:
            raise InvalidInputError("repetitions must be >= 1")


def gen_chain(spec: ChainSpec) -> Scenario:
    """Deterministic random scenario for the given chain spec."""
    if not (1 <= spec.switch_count):
        raise InvalidInputError("switch_count must be >= 1")
    rng = np.random.default_rng(spec.rng_seed)
    nodes: list[tuple[str, str]] = []
    links: list[Link] = []
    switches = [f"SW{i + 1}" for i in range(spec.switch_count)]
    stations: list[str] = []
    station_switch: dict[str, int] = {}
    for i, sw in enumerate(switches):
        nodes.append((sw, "switch"))
        for j in range(spec.stations_per_switch):
            es = f"ES{i + 1}_{j + 1}"
            nodes.append((es, "end-station"))
            stations.append(es)
            station_switch[es] = i
            links.append(Link(es, sw, spec.rate_bps))
            links.append(Link(sw, es, spec.rate_bps))
    for a, b in zip(switches, switches[1:]):
        links.append(Link(a, b, spec.rate_bps))
        links.append(Link(b, a, spec.rate_bps))

    streams: list[Stream] = []
    for k in range(spec.stream_count):
        talker = stations[int(rng.integers(len(stations)))]
        listener = talker
        while listener == talker:
            listener = stations[int(rng.integers(len(stations)))]
        size = int(spec.sizes[int(rng.integers(len(spec.sizes)))])
        period = int(spec.periods_ns[int(rng.integers(len(spec.periods_ns)))])
        si, li = station_switch[talker], station_switch[listener]
        route: list[tuple[str, str]] = [(talker, switches[si])]
        step = 1 if li > si else -1
        for i in range(si, li, step):
            route.append((switches[i], switches[i + step]))
        route.append((switches[li], listener))
        streams.append(
            Stream(
                id=f"s{k}",
                period_ns=period,
                payload_min=size,
                payload_max=size,
                route=tuple(route),
                e2e_deadline_ns=period,
                jitter_req_ns=period // 10,
                queue=4,
                priority=k,
            )
        )
    return Scenario(
        nodes=tuple(nodes),
        links=tuple(links),
        streams=tuple(streams),
        name=f"chain_sw{spec.switch_count}_st{spec.stream_count}_seed{spec.rng_seed}",
    )


# ---------------------------------------------------------------------------
# census study

def _census_cell(args) -> dict:
    switches, streams, reps, seed = args
    sums = {c: 0 for c in CATEGORIES}
    for rep in range(reps):
        sc = gen_chain(ChainSpec(switches, streams, rng_seed=seed + rep))
        c = census(sc, "wa").as_dict()
        for cat in CATEGORIES:
            sums[cat] += c[cat]
    row = {
        "devices": switches * 4,
        "streams": streams,
        "repetitions": reps,
    }
    for cat in CATEGORIES:
        row[f"mean_{cat}"] = sums[cat] / reps
    row["mean_total"] = sum(sums.values()) / reps
    row["mean_total_nfic"] = (sum(sums.values()) - sums["isolation"]) / reps
    return row


def run_census_study(plan: ExperimentPlan) -> list[dict]:
    """Mean per-category constraint counts over seeded repetitions for each
    (switch count, stream count) cell."""
    cells = [
        (sw, st, plan.repetitions, plan.rng_seed + 1000 * sw + st)
        for sw in plan.switch_counts
        for st in plan.stream_counts
    ]
    if plan.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            return list(pool.map(_census_cell, cells))
    return [_census_cell(c) for c in cells]


# ---------------------------------------------------------------------------
# solver study

def _solver_cell(args) -> list[dict]:
    switches, streams, rep, seed, timeout_s = args
    sc = gen_chain(ChainSpec(switches, streams, rng_seed=seed))
    rows = []
    for mode in ("nfic", "wa"):
        out = solve(SolveRequest(sc, mode, timeout_s=timeout_s))
        rows.append(
            {
                "devices": switches * 4,
                "streams": streams,
                "rep": rep,
                "engine": "smt",
                "mode": mode,
                "status": out.status,
                "solve_time_s": round(out.solve_time_s, 6),
                "census_total": out.constraint_census.total,
                "backjumps": "",
            }
        )
    for mode in ("nfic", "fic"):
        res = lstb_solve(sc, mode, LstbLimits(wall_clock_s=timeout_s))
        rows.append(
            {
                "devices": switches * 4,
                "streams": streams,
                "rep": rep,
                "engine": "lstb",
                "mode": mode,
                "status": res.status,
                "solve_time_s": round(res.solve_time_s, 6),
                "census_total": "",
                "backjumps": res.backjumps,
            }
        )
    return rows


def run_solver_study(plan: ExperimentPlan) -> list[dict]:
    """Solve every cell with the external-solver route (isolation on and
    off) and the heuristic search (isolation checks on and off); one row
    per engine/mode/repetition.  Each solve owns its scenario and child
    process, so a timeout in one cell never corrupts another."""
    cells = [
        (sw, st, rep, plan.rng_seed + 1000 * sw + st + rep, plan.timeout_s)
        for sw in plan.switch_counts
        for st in plan.stream_counts
        for rep in range(plan.repetitions)
    ]
    rows: list[dict] = []
    if plan.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            for chunk in pool.map(_solver_cell, cells):
                rows.extend(chunk)
    else:
        for cell in cells:
            rows.extend(_solver_cell(cell))
    return rows


# ---------------------------------------------------------------------------
# fixture replay

def table5_drop() -> AttackConfig:
    """Frame-loss fault: drop one camera-2 frame received at or after 21 us."""
    return AttackConfig("SW2", ("AV2", "SW2"), "drop", 21_000, 1, match_stream="cam2")


def table5_delay(delay_ns: int = 10_000) -> AttackConfig:
    """Frame-timeout fault: hold one camera-2 frame at the inter-switch
    ingress for the given time."""
    return AttackConfig("SW1", ("SW2", "SW1"), "delay", 21_000, 1, delay_ns, match_stream="cam2")


def fault_preset(name: str) -> tuple[AttackConfig, ...]:
    if name == "none":
        return ()
    if name == "loss":
        return (table5_drop(),)
    if name == "timeout":
        return (table5_delay(10_000),)
    if name == "timeout-long":
        return (table5_delay(221_000),)
    raise InvalidInputError(f"unknown fault preset {name!r}")


@dataclass
class ReplayReport:
    fixture: str
    egress_mode: str
    validation_ok: bool
    partial_fill: list
    metrics: dict[str, StreamMetrics]
    shaper_discards: int
    requirements_met: bool
    trace_path: str | None = None


def replay_fixture(
    name: str,
    egress_mode: str = "ttubs",
    faults: tuple[AttackConfig, ...] = (),
    rng_seed: int = 1,
    sim_duration_ns: int = 10_000_000_000,
    trace_path: str | None = None,
) -> ReplayReport:
    """Validate a bundled schedule, deploy it, simulate, and judge the
    outcome against the traffic requirements (deadline and jitter)."""
    sc = fixtures.adas_scenario()
    sched, filled = fixtures.fixture_schedule(name, sc)
    mode = "wa" if name == "table6" else "nfic"
    violations = validate_schedule(sc, sched, mode)
    dep = build_deployment(sc, sched)
    rep = run(
        SimConfig(sc, dep, egress_mode, tuple(faults), rng_seed, sim_duration_ns),
        trace_path=trace_path,
    )
    met = all(
        m.deadline_violations == 0 and not m.jitter_violation for m in rep.metrics.values()
    )
    return ReplayReport(
        fixture=name,
        egress_mode=egress_mode,
        validation_ok=not violations,
        partial_fill=filled,
        metrics=rep.metrics,
        shaper_discards=rep.shaper_discards,
        requirements_met=met,
        trace_path=trace_path,
    )


# ---------------------------------------------------------------------------
# CSV rendering

def _rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def census_csv(rows: list[dict]) -> str:
    return _rows_to_csv(rows)


def solver_csv(rows: list[dict]) -> str:
    return _rows_to_csv(rows)


def metrics_csv(metrics: dict[str, StreamMetrics]) -> str:
    rows = []
    for sid, m in metrics.items():
        rows.append(
            {
                "stream": sid,
                "sent": m.sent,
                "delivered": m.delivered,
                "attack_dropped": m.drops["attack_dropped"],
                "timeout_discarded": m.drops["timeout_discarded"],
                "displaced": m.drops["displaced"],
                "stranded": m.drops["stranded"],
                "e2e_max_us": ns_to_us_str(m.e2e_max_ns) if m.e2e_max_ns is not None else "",
                "e2e_min_us": ns_to_us_str(m.e2e_min_ns) if m.e2e_min_ns is not None else "",
                "e2e_mean_us": f"{m.e2e_mean_ns / 1000:.3f}" if m.e2e_mean_ns is not None else "",
                "jitter_us": ns_to_us_str(m.jitter_ns) if m.jitter_ns is not None else "",
                "deadline_violations": m.deadline_violations,
                "jitter_violation": int(m.jitter_violation),
            }
        )
    return _rows_to_csv(rows)


def report_census(rows: list[dict]) -> str:
    """Pivot: devices down, stream counts across, mean totals in cells."""
    devices = sorted({r["devices"] for r in rows})
    streams = sorted({r["streams"] for r in rows})
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["devices \\ streams"] + streams)
    for d in devices:
        line = [d]
        for st in streams:
            cell = [r for r in rows if r["devices"] == d and r["streams"] == st]
            line.append(round(cell[0]["mean_total"], 1) if cell else "")
        w.writerow(line)
    return buf.getvalue()


def report_metrics(reports: list[ReplayReport]) -> str:
    """One row per (fixture, egress, stream): max latency and jitter, the
    per-stream axes of the replay studies."""
    rows = []
    for rep in reports:
        for sid, m in rep.metrics.items():
            rows.append(
                {
                    "fixture": rep.fixture,
                    "egress": rep.egress_mode,
                    "stream": sid,
                    "e2e_max_us": ns_to_us_str(m.e2e_max_ns) if m.e2e_max_ns is not None else "",
                    "jitter_us": ns_to_us_str(m.jitter_ns) if m.jitter_ns is not None else "",
                    "requirements_met": int(
                        m.deadline_violations == 0 and not m.jitter_violation
                    ),
                }
            )
    return _rows_to_csv(rows)
