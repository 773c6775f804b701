"""
When the reverse-flow cut bites
===============================

The HUANG augmentation forbids sizeable reverse flows on lines that feed
other lines. A fixed capacitor bank at a lightly loaded bus pushes reactive
power back up the feeder, and that alone makes the problem infeasible.
Letting the bank vary restores feasibility.
"""

import numpy as np

from distrelax import FormulationConfig, build_program, fixture_path, load_feeder
from distrelax.network import Scenario
from distrelax.program import solve_program

feeder = load_feeder(fixture_path("four_bus"))
print("capacitor (p.u.):", {lab: float(q) for lab, q in zip(feeder.labels, feeder.q_cap) if q})

# night, 2% of nominal load, no PV
common = dict(hour=0, p_load=0.02 * feeder.p_load, q_load=0.02 * feeder.q_load,
              pv_avail=np.zeros(feeder.n + 1), pv_cap=np.zeros(feeder.n + 1), q_cap=feeder.q_cap)

for label, variable in (("fixed", np.zeros(feeder.n + 1, dtype=bool)), ("variable", feeder.q_cap > 0)):
    sc = Scenario(cap_variable=variable, **common)
    for method in ("GAN", "HUANG"):
        sol = solve_program(build_program(feeder, sc, FormulationConfig.for_configuration("NS-C", method)))
        print(f"{label:>8} capacitor, {method:<5}: {sol.status}")
