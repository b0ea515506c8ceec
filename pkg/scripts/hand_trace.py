"""Simulate the two-arrival hand trace and print the trajectory and event log."""

from srpt_ht.engine import PrimitiveStream, simulate_coupled

stream = PrimitiveStream([], [1.0, 2.5], [2.0, 0.5], 4.0)
traj = simulate_coupled(stream, (1.0, 2.0), 0.5, record_events=True)
print(traj.to_csv(), end="")
print(traj.events_jsonl(), end="")
