"""Solve offset schedules two ways: an external constraint solver speaking
SMT-LIB 2, and a backjumping list scheduler that needs no solver at all.

The solver route pipes the encoded problem to a child process (the bundled
``ttubs-smt-solver`` by default; point TTUBS_SMT_SOLVER or
``--solver-cmd`` at ``z3 -in`` to swap in a real SMT solver).
"""

from dataclasses import replace

from ttubs.constraints import build_constraint_set, validate_schedule
from ttubs.fixtures import adas_scenario
from ttubs.lstb import lstb_solve
from ttubs.model import ns_to_us_str
from ttubs.smt import SolveRequest, encode, solve

scenario = adas_scenario()

# What goes over the wire: declarations plus one assertion per constraint.
text = encode(build_constraint_set(scenario, "nfic"))
print("encoded problem starts with:")
print("\n".join(text.splitlines()[:6]))
print(f"... {text.count('(assert')} assertions total\n")

for mode in ("nfic", "wa"):
    out = solve(SolveRequest(scenario, mode, timeout_s=120))
    ok = not validate_schedule(scenario, out.schedule, mode)
    print(f"solver [{mode}]: {out.status} in {out.solve_time_s:.2f}s, "
          f"{out.constraint_census.total} constraints, validator: {'ok' if ok else 'VIOLATED'}")

for mode in ("nfic", "fic"):
    res = lstb_solve(scenario, mode)
    check = "nfic" if mode == "nfic" else "wa"
    ok = not validate_schedule(scenario, res.schedule, check)
    print(f"search [{mode}]: {res.status} in {res.solve_time_s * 1000:.1f}ms, "
          f"{res.backjumps} backjumps, validator: {'ok' if ok else 'VIOLATED'}")

# The heuristic packs frames greedily; its inter-switch offsets:
res = lstb_solve(scenario, "nfic")
print("\nheuristic offsets on SW2->SW1 (us):")
for (stream, link, slot), off in sorted(res.schedule.offsets.items()):
    if link == ("SW2", "SW1"):
        print(f"  {stream:8s} slot {slot}: {ns_to_us_str(off)}")

# Infeasible inputs are proved, not guessed: shrink a camera deadline below
# the three-hop lower bound and the solver answers unsat.
tight = replace(
    scenario,
    streams=tuple(
        replace(s, e2e_deadline_ns=5_000) if s.id == "cam1" else s for s in scenario.streams
    ),
)
print("\n5us camera deadline:", solve(SolveRequest(tight, "nfic", timeout_s=120)).status)
