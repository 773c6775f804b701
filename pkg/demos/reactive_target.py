"""
Chasing a reactive power target
===============================

Minimise (Q_import - Q_ref)^2 for three targets: one too low to reach, one
that is reachable, one too high. Low targets reward small currents, which
keeps the cones tight. High targets reward big ones, and the relaxation
invents them. Reachable targets have many optimal points and the solver
happily returns a loose one.
"""

from distrelax import FormulationConfig, ScenarioOptions, build_program, build_scenario, classify, load_feeder
from distrelax import fixture_path, load_profiles, profiles_path
from distrelax.exactness import true_objective
from distrelax.program import solve_program

feeder = load_feeder(fixture_path("four_bus"))
profiles = load_profiles(profiles_path())
scenario = build_scenario(feeder, profiles, 4140, ScenarioOptions(capacitor_mode="variable"))


def run(method, conf, q_ref, eps=0.0):
    cfg = FormulationConfig.for_configuration(conf, method, objective="q-target", q_ref=q_ref, epsilon=eps)
    return solve_program(build_program(feeder, scenario, cfg))


for method, conf in (("GAN", "NS-NC"), ("HUANG", "NS-C"), ("NICK", "S-C")):
    for q_ref in (-3.0, 0.0, 3.0):
        ref = run("ROPF", conf, q_ref)
        rep = classify(run(method, conf, q_ref), ropf_value=true_objective(ref))
        print(f"{method:>5} {conf:<5} Q_ref={q_ref:+.0f}  {rep.classification:<22} rho={rep.max_residual:.2e}")

# the reachable case again, with a penalty
rep = classify(run("NICK", "S-C", 0.0, eps=0.01), gap_bound=0.0)
print("NICK S-C Q_ref=0, eps=0.01:", rep.classification, f"rho={rep.max_residual:.1e}")
