"""
A relaxation you can check by hand
==================================

One line, one load. The cone constraint should be tight at the optimum, so
the relaxed solution, a load flow and the closed-form operating point all
land on the same numbers.
"""

import math

from distrelax import FormulationConfig, build_program, fixed_scenario, residuals, run_loadflow, simple_feeder
from distrelax.program import solve_program

r, x, p, q = 0.02, 0.04, 0.6, 0.25
feeder = simple_feeder([-1, 0], [0, complex(r, x)], vmin=0.9, vmax=1.1, p_load=[0, p], q_load=[0, q])

sol = solve_program(build_program(feeder, fixed_scenario(feeder), FormulationConfig()))
print("relaxation:", sol.status, "import", round(sol.objective, 9))

# load flow at the same withdrawals
lf = run_loadflow(feeder, feeder.p_load, feeder.q_load)

# by hand: v1 solves v1^2 - (1 - 2(rp + xq)) v1 + |z|^2 (p^2 + q^2) = 0, high root
z2 = r * r + x * x
b = 1 - 2 * (r * p + x * q)
v1 = (b + math.sqrt(b * b - 4 * z2 * (p * p + q * q))) / 2
f1 = (p * p + q * q) / v1

for name, v, f in (("relaxation", sol[("v", 1)], sol[("f", 1)]), ("load flow", lf.v[1], lf.f[1]),
                   ("by hand", v1, f1)):
    print(f"{name:>10}  v1 = {v:.9f}  f1 = {f:.9f}")

print("cone residual:", residuals(sol, feeder)[1])
