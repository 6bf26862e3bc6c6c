"""Walk one heart-rate stream through the sensor-side filter."""

import numpy as np

from wban import Decision, FilterParams, FilterState, assess
from wban.datasets import synthetic_vitals

# Ten minutes of smooth synthetic vitals at 1 Hz; column 4 is HR.
hr = synthetic_vitals(600, seed=1).series[:, 4]
print("HR range: %.1f to %.1f bpm" % (hr.min(), hr.max()))

# The filter keeps five numbers per attribute and decides each reading on arrival.
params = FilterParams(epsilon=0.2)
state = FilterState()
decisions = []
for x in hr:
    decision, state = assess(state, params, float(x))
    decisions.append(decision)

counts = {d: sum(1 for e in decisions if e is d) for d in Decision}
for d, n in counts.items():
    print(f"{d.value:>14}: {n:4d}  ({100 * n / len(hr):.1f}%)")

# The first 30 readings always go out while the running statistics warm up.
print("first 30 all transmitted:", all(d is Decision.TRANSMIT for d in decisions[:30]))
print("running mean %.2f, std %.2f over %d transmitted readings"
      % (state.m, np.sqrt(state.v), state.n))

# A sensor glitch far outside the running distribution is dropped as faulty.
decision, _ = assess(state, params, state.m + 10 * np.sqrt(state.v))
print("10-sigma glitch ->", decision.value)

# A larger epsilon holds back more readings.
for eps in (0.0, 0.05, 0.2, 0.5):
    s, sent = FilterState(), 0
    for x in hr:
        d, s = assess(s, FilterParams(epsilon=eps), float(x))
        sent += d is Decision.TRANSMIT
    print(f"epsilon {eps:4.2f}: {sent:3d} of {len(hr)} transmitted")
