"""Solved schedule: the single source of truth for deployment artifacts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .model import InvalidInputError, Scenario, ns_to_us_str

NFIC_QUEUE = 4  # shared-queue index all streams use when isolation is disabled

__all__ = ["NFIC_QUEUE", "Schedule", "load_schedule", "save_schedule"]

LinkKey = tuple[str, str]


@dataclass
class Schedule:
    """Absolute transmission offsets per (stream, link, slot) plus queue
    assignments per (stream, switch egress link).

    Offsets are nanoseconds within the link hyper-period and include the
    slot displacement (``slot_relative + slot * period``).  The talker's
    send times are the offsets on each stream's first route link.
    """

    offsets: dict[tuple[str, LinkKey, int], int] = field(default_factory=dict)
    queues: dict[tuple[str, LinkKey], int] = field(default_factory=dict)

    def talker_offsets(self, scenario: Scenario) -> dict[tuple[str, int], int]:
        out: dict[tuple[str, int], int] = {}
        for s in scenario.streams:
            first = s.route[0]
            n = scenario.slots_of(s)
            for slot in range(n):
                key = (s.id, first, slot)
                if key in self.offsets:
                    out[(s.id, slot)] = self.offsets[key]
        return out

    def offset(self, stream: str, link: LinkKey, slot: int) -> int:
        try:
            return self.offsets[(stream, link, slot)]
        except KeyError:
            raise InvalidInputError(
                f"schedule has no offset for {stream} on {link[0]}->{link[1]} slot {slot}"
            ) from None

    def queue_of(self, stream: str, link: LinkKey) -> int:
        return self.queues.get((stream, link), NFIC_QUEUE)

    def to_dict(self) -> dict:
        return {
            "offsets": [
                {
                    "stream": st,
                    "link": [src, dst],
                    "slot": slot,
                    "offset_ns": off,
                    "offset_us": ns_to_us_str(off),
                }
                for (st, (src, dst), slot), off in sorted(self.offsets.items())
            ],
            "queues": [
                {"stream": st, "link": [src, dst], "queue": q}
                for (st, (src, dst)), q in sorted(self.queues.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Schedule":
        sched = cls()
        for row in doc["offsets"]:
            sched.offsets[(row["stream"], tuple(row["link"]), int(row["slot"]))] = int(row["offset_ns"])
        for row in doc.get("queues", []):
            sched.queues[(row["stream"], tuple(row["link"]))] = int(row["queue"])
        return sched


def save_schedule(schedule: Schedule, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(schedule.to_dict(), fh, indent=2)
        fh.write("\n")


def load_schedule(path: str | Path) -> Schedule:
    with open(path) as fh:
        return Schedule.from_dict(json.load(fh))
