"""Branch-flow OPF relaxations for radial feeders as conic programs.

Five problem variants share one variable layout:

* ``ROPF``  - the direct cone relaxation of the branch-flow OPF;
* ``GAN``   - adds a lossless power-flow/voltage system whose voltages
  over-estimate the true ones and must respect the upper voltage bound;
* ``HUANG`` - the lossless system plus cuts forbidding reverse flows that
  would lower downstream voltages (``r_m P + x_m Q >= 0``);
* ``NICK``  - shunt-aware lossless system plus a lossy "upper" system that
  over-estimates flows and currents, with voltage and current bounds applied
  to the over-estimates.

The non-convex equality ``f = |S^t + j v_up b|^2 / v_up`` is never a
constraint; the cone relaxation replaces it and the exactness module
measures its residual.

Variables (per bus/line ``l``): ``v`` squared voltage, ``f`` squared series
current, ``Pt/Qt`` flow entering the line, ``Pb/Qb`` flow arriving at the
bus, ``p/q`` withdrawal, device set-points ``p_pv/q_pv/q_c`` and the
augmentation auxiliaries (``Phb/Qhb``, ``Pht/Qht``, ``vbar``, ``Pbt/Qbt``,
``Pbb/Qbb``, ``fbar``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .network import Feeder, Scenario, downstream_sets
from .program import Affine, ConicProgram, total

METHODS = ("ROPF", "GAN", "HUANG", "NICK")
OBJECTIVES = ("min-import", "fixed-q", "q-target")
# configuration name -> (line shunts, current bounds)
CONFIGURATIONS = {"NS-NC": (False, False), "NS-C": (False, True), "S-C": (True, True)}

# constraint families
BUS_END_BALANCE = "bus-end-balance"
LINE_START_BALANCE = "line-start-balance"
VOLTAGE_DROP = "voltage-drop"
VOLTAGE_BOUNDS = "voltage-bounds"
END_CURRENT_BOUNDS = "end-current-bounds"
APPARENT_FLOW_BOUNDS = "apparent-flow-bounds"
WITHDRAWAL_REGION = "withdrawal-region"
CONE_RELAXATION = "cone-relaxation"
LOSSLESS_FLOW = "lossless-flow"
LOSSLESS_VOLTAGE = "lossless-voltage"
LOSSLESS_VOLTAGE_CAP = "lossless-voltage-cap"
REVERSE_FLOW_CUT = "reverse-flow-cut"
SHUNT_LOSSLESS_FLOW = "shunt-lossless-flow"
SHUNT_LOSSLESS_VOLTAGE = "shunt-lossless-voltage"
UPPER_FLOW = "upper-flow"
UPPER_CURRENT_BUS_END = "upper-current-bus-end"
UPPER_CURRENT_LINE_START = "upper-current-line-start"
AUX_BUS_END_FLOW = "aux-bus-end-flow"
AUX_VOLTAGE_CAP = "aux-voltage-cap"
AUX_CURRENT_BUS_END = "aux-current-bus-end"
AUX_CURRENT_LINE_START = "aux-current-line-start"
UPPER_FLOW_BRACKET = "upper-flow-bracket"
IMPORT_Q_FIXED = "import-reactive-fixed"
Q_DEVIATION = "reactive-deviation-epigraph"

BRACKET_SLACK = 10.0


class FormulationError(ValueError):
    """Inconsistent formulation configuration."""


@dataclass(frozen=True)
class FormulationConfig:
    """What to build.

    ``cost_p``/``cost_q`` are optional per-bus linear withdrawal costs (arrays
    indexed by bus). ``nick_current_side`` selects which voltage scales the
    line-start current bound of the ``NICK`` augmentation: ``"bus"`` (the
    downstream voltage) or ``"up"``.
    """

    method: str = "ROPF"
    shunts: bool = False
    current_bounds: bool = False
    flow_bounds: bool = False
    objective: str = "min-import"
    q_value: float | None = None
    q_ref: float | None = None
    epsilon: float = 0.0
    cost_p: tuple | None = None
    cost_q: tuple | None = None
    nick_current_side: str = "bus"

    @classmethod
    def for_configuration(cls, configuration: str, method: str = "ROPF", **kw) -> "FormulationConfig":
        try:
            shunts, current = CONFIGURATIONS[configuration.upper()]
        except KeyError:
            raise FormulationError(f"unknown configuration {configuration!r}; "
                                   f"expected one of {', '.join(CONFIGURATIONS)}") from None
        return cls(method=method.upper(), shunts=shunts, current_bounds=current, **kw)

    def with_method(self, method: str) -> "FormulationConfig":
        return replace(self, method=method.upper())

    def validate(self) -> None:
        if self.method not in METHODS:
            raise FormulationError(f"unknown method {self.method!r}")
        if self.method in ("GAN", "HUANG") and self.shunts:
            raise FormulationError(f"method {self.method} does not model line shunts; use a configuration "
                                   "without shunts (NS-NC or NS-C)")
        if self.objective not in OBJECTIVES:
            raise FormulationError(f"unknown objective {self.objective!r}")
        if self.objective == "fixed-q" and self.q_value is None:
            raise FormulationError("objective fixed-q needs q_value")
        if self.objective == "q-target":
            if self.q_ref is None:
                raise FormulationError("objective q-target needs q_ref")
            if self.q_value is not None:
                raise FormulationError("a reactive import target cannot be combined with a fixed reactive import")
        if self.epsilon < 0:
            raise FormulationError("penalty weight must be nonnegative")
        if self.nick_current_side not in ("bus", "up"):
            raise FormulationError("nick_current_side must be 'bus' or 'up'")


class _Vars:
    """Shorthand accessors over a program's named variables."""

    def __init__(self, prog: ConicProgram, v0: float):
        self.prog, self.v0 = prog, v0

    def __call__(self, name, l):
        return self.prog.var((name, l))

    def volt(self, l, name="v"):
        # squared voltage, with the root fixed at v0 for both real and auxiliary systems
        return Affine(const=self.v0) if l == 0 else self.prog.var((name, l))


def effective_shunts(feeder: Feeder, config: FormulationConfig) -> np.ndarray:
    return np.array(feeder.b) if config.shunts else np.zeros(feeder.n + 1)


def _current_bound(feeder: Feeder, config: FormulationConfig, l: int):
    if not config.current_bounds:
        return None
    im = feeder.imax[l]
    return None if np.isnan(im) else float(im)


def build_base_constraints(feeder: Feeder, scenario: Scenario, config: FormulationConfig) -> ConicProgram:
    """Branch-flow balances, voltage drops, bounds and withdrawal regions.

    Shunt terms are dropped when ``config.shunts`` is off.
    """
    config.validate()
    if scenario.n != feeder.n:
        raise FormulationError("scenario and feeder sizes differ")
    prog = ConicProgram()
    n = feeder.n
    b = effective_shunts(feeder, config)
    for l in range(1, n + 1):
        for nm in ("v", "f", "Pt", "Qt", "Pb", "Qb", "p", "q"):
            prog.add_var((nm, l))
    X = _Vars(prog, feeder.v0)
    kids = feeder.children()

    for l in range(1, n + 1):
        r, x = feeder.r[l], feeder.x[l]
        vu, vl, f = X.volt(feeder.up[l]), X("v", l), X("f", l)
        Pt, Qt, Pb, Qb = X("Pt", l), X("Qt", l), X("Pb", l), X("Qb", l)
        prog.add_eq(Pb, X("p", l) + total(X("Pt", m) for m in kids[l]), BUS_END_BALANCE, ("bal_b_P", l))
        prog.add_eq(Qb, X("q", l) + total(X("Qt", m) for m in kids[l]), BUS_END_BALANCE, ("bal_b_Q", l))
        prog.add_eq(Pt, Pb + r * f, LINE_START_BALANCE, ("bal_t_P", l))
        prog.add_eq(Qt, Qb + x * f - b[l] * (vu + vl), LINE_START_BALANCE, ("bal_t_Q", l))
        prog.add_eq(vl, vu - 2.0 * (r * Pt + x * (Qt + b[l] * vu)) + (r * r + x * x) * f,
                    VOLTAGE_DROP, ("drop", l))
        prog.add_le(feeder.vmin[l], vl, VOLTAGE_BOUNDS, ("vmin", l))
        prog.add_le(vl, feeder.vmax[l], VOLTAGE_BOUNDS, ("vmax", l))
        im = _current_bound(feeder, config, l)
        if im is not None:
            prog.add_rsoc(0.5 * im * vl, 1.0, [Pb, Qb], END_CURRENT_BOUNDS, ("imax_b", l))
            prog.add_rsoc(0.5 * im * vu, 1.0, [Pt, Qt], END_CURRENT_BOUNDS, ("imax_t", l))
        if config.flow_bounds and not np.isnan(feeder.smax[l]):
            sm = float(feeder.smax[l])
            prog.add_soc(sm, [Pb, Qb], APPARENT_FLOW_BOUNDS, ("smax_b", l))
            prog.add_soc(sm, [Pt, Qt], APPARENT_FLOW_BOUNDS, ("smax_t", l))
        _withdrawal_region(prog, X, scenario, l)

    prog.meta.update(feeder=feeder, scenario=scenario, config=config, b=b)
    return prog


def _withdrawal_region(prog: ConicProgram, X: _Vars, sc: Scenario, l: int):
    p, q = X("p", l), X("q", l)
    if sc.is_fixed(l):
        # inflexible bus: the region is a single point
        prog.add_eq(p, sc.p_load[l], WITHDRAWAL_REGION, ("p_fix", l))
        prog.add_eq(q, sc.q_load[l] - sc.q_cap[l], WITHDRAWAL_REGION, ("q_fix", l))
        return
    p_inj = Affine()
    q_inj = Affine()
    if sc.pv_cap[l] > 0:
        ppv, qpv = prog.add_var(("p_pv", l)), prog.add_var(("q_pv", l))
        if sc.pv_avail[l] > 0:
            prog.add_le(-ppv, 0.0, WITHDRAWAL_REGION, ("pv_min", l))
            prog.add_le(ppv, sc.pv_avail[l], WITHDRAWAL_REGION, ("pv_avail", l))
        else:
            prog.add_eq(ppv, 0.0, WITHDRAWAL_REGION, ("pv_avail", l))
        prog.add_soc(float(sc.pv_cap[l]), [ppv, qpv], WITHDRAWAL_REGION, ("pv_cap", l))
        p_inj, q_inj = p_inj + ppv, q_inj + qpv
    if sc.q_cap[l] > 0:
        if sc.cap_variable[l]:
            qc = prog.add_var(("q_c", l))
            prog.add_le(-qc, 0.0, WITHDRAWAL_REGION, ("cap_min", l))
            prog.add_le(qc, sc.q_cap[l], WITHDRAWAL_REGION, ("cap_max", l))
            q_inj = q_inj + qc
        else:
            q_inj = q_inj + float(sc.q_cap[l])
    prog.add_eq(p, sc.p_load[l] - p_inj, WITHDRAWAL_REGION, ("p_def", l))
    prog.add_eq(q, sc.q_load[l] - q_inj, WITHDRAWAL_REGION, ("q_def", l))


def add_socp_relaxation(prog: ConicProgram, feeder: Feeder) -> ConicProgram:
    """``v_up f >= Pt^2 + (Qt + v_up b)^2`` for every line."""
    b = prog.meta["b"]
    X = _Vars(prog, feeder.v0)
    for l in range(1, feeder.n + 1):
        vu = X.volt(feeder.up[l])
        prog.add_rsoc(vu, 0.5 * X("f", l), [X("Pt", l), X("Qt", l) + b[l] * vu], CONE_RELAXATION, ("soc", l))
    return prog


def add_gan_augmentation(prog: ConicProgram, feeder: Feeder) -> ConicProgram:
    """Lossless flows and voltages; the lossless voltage must respect ``vmax``."""
    if np.any(prog.meta["b"] != 0):
        raise FormulationError("the lossless-voltage augmentation requires line shunts off")
    n = feeder.n
    for l in range(1, n + 1):
        for nm in ("Phb", "Qhb", "vbar"):
            prog.add_var((nm, l))
    X = _Vars(prog, feeder.v0)
    kids = feeder.children()
    for l in range(1, n + 1):
        Ph, Qh = X("Phb", l), X("Qhb", l)
        prog.add_eq(Ph, X("p", l) + total(X("Phb", m) for m in kids[l]), LOSSLESS_FLOW, ("lossless_P", l))
        prog.add_eq(Qh, X("q", l) + total(X("Qhb", m) for m in kids[l]), LOSSLESS_FLOW, ("lossless_Q", l))
        prog.add_eq(X("vbar", l), X.volt(feeder.up[l], "vbar") - 2.0 * (feeder.r[l] * Ph + feeder.x[l] * Qh),
                    LOSSLESS_VOLTAGE, ("lossless_v", l))
        prog.add_le(X("vbar", l), feeder.vmax[l], LOSSLESS_VOLTAGE_CAP, ("vbar_max", l))
    prog.meta["augmentations"] = prog.meta.get("augmentations", ()) + ("GAN",)
    return prog


def add_huang_augmentation(prog: ConicProgram, feeder: Feeder) -> ConicProgram:
    """``r_m Phb_l + x_m Qhb_l >= 0`` for every line ``l`` and downstream ``m``."""
    if not prog.has_var(("Phb", 1)):
        raise FormulationError("the reverse-flow cuts need the lossless-flow auxiliaries")
    X = _Vars(prog, feeder.v0)
    down = downstream_sets(feeder)
    for l in range(1, feeder.n + 1):
        Ph, Qh = X("Phb", l), X("Qhb", l)
        for m in sorted(down[l]):
            prog.add_le(-(feeder.r[m] * Ph + feeder.x[m] * Qh), 0.0, REVERSE_FLOW_CUT, ("reverse", l, m))
    prog.meta["augmentations"] = prog.meta.get("augmentations", ()) + ("HUANG",)
    return prog


def bracket_limits(scenario: Scenario):
    """Deliberately slack caps for the upper-system flows.

    Ten times the sum over buses of the largest admissible withdrawal
    magnitude (at least one p.u.), far outside any reachable flow.
    """
    sp_, sq_ = 0.0, 0.0
    for l in range(1, scenario.n + 1):
        pmin, pmax, qmin, qmax = scenario.withdrawal_bounds(l)
        sp_ += max(abs(pmin), abs(pmax))
        sq_ += max(abs(qmin), abs(qmax))
    return BRACKET_SLACK * max(sp_, 1.0), BRACKET_SLACK * max(sq_, 1.0)


def add_nick_augmentation(prog: ConicProgram, feeder: Feeder, scenario: Scenario) -> ConicProgram:
    """Shunt-aware lossless system and lossy upper system with bounds on both.

    The max-of-squares cones are expanded into one cone per candidate pair.
    """
    config: FormulationConfig = prog.meta["config"]
    b = prog.meta["b"]
    n = feeder.n
    for l in range(1, n + 1):
        for nm in ("Pht", "Qht", "Phb", "Qhb", "vbar", "Pbt", "Qbt", "Pbb", "Qbb", "fbar"):
            prog.add_var((nm, l))
    X = _Vars(prog, feeder.v0)
    kids = feeder.children()
    pmax, qmax = bracket_limits(scenario)
    for l in range(1, n + 1):
        u = feeder.up[l]
        r, x = feeder.r[l], feeder.x[l]
        vl, vu = X("v", l), X.volt(u)
        vbl, vbu = X("vbar", l), X.volt(u, "vbar")
        Pht, Qht, Phb, Qhb = X("Pht", l), X("Qht", l), X("Phb", l), X("Qhb", l)
        Pbt, Qbt, Pbb, Qbb = X("Pbt", l), X("Qbt", l), X("Pbb", l), X("Qbb", l)
        fb = X("fbar", l)
        p, q = X("p", l), X("q", l)
        sum_ht_P = total(X("Pht", m) for m in kids[l])
        sum_ht_Q = total(X("Qht", m) for m in kids[l])
        sum_bt_P = total(X("Pbt", m) for m in kids[l])
        sum_bt_Q = total(X("Qbt", m) for m in kids[l])

        prog.add_eq(Pht, p + sum_ht_P, SHUNT_LOSSLESS_FLOW, ("sl_flow_P", l))
        prog.add_eq(Qht, q + sum_ht_Q - b[l] * (vbu + vbl), SHUNT_LOSSLESS_FLOW, ("sl_flow_Q", l))
        prog.add_eq(vbl, vbu - 2.0 * (r * Pht + x * (Qht + b[l] * vbu)), SHUNT_LOSSLESS_VOLTAGE, ("sl_v", l))
        prog.add_eq(Pbt, p + sum_bt_P + r * fb, UPPER_FLOW, ("up_flow_P", l))
        prog.add_eq(Qbt, q + sum_bt_Q + x * fb, UPPER_FLOW, ("up_flow_Q", l))
        prog.add_eq(Pbb, p + sum_bt_P, AUX_BUS_END_FLOW, ("upb_P", l))
        prog.add_eq(Qbb, q + sum_bt_Q, AUX_BUS_END_FLOW, ("upb_Q", l))
        prog.add_eq(Phb, p + sum_ht_P, AUX_BUS_END_FLOW, ("lb_P", l))
        prog.add_eq(Qhb, q + sum_ht_Q, AUX_BUS_END_FLOW, ("lb_Q", l))

        # upper current over-estimates, one cone per (P, Q) candidate
        bus_P = (Phb, Pbb)
        bus_Q = (Qhb - b[l] * vbl, Qbb - b[l] * vl)
        top_P = (Pht, Pbt)
        top_Q = (Qht + b[l] * vbu, Qbt + b[l] * vu)
        for i, a in enumerate(bus_P):
            for j, c in enumerate(bus_Q):
                prog.add_rsoc(vl, 0.5 * fb, [a, c], UPPER_CURRENT_BUS_END, ("ucur_b", l, i, j))
        for i, a in enumerate(top_P):
            for j, c in enumerate(top_Q):
                prog.add_rsoc(vu, 0.5 * fb, [a, c], UPPER_CURRENT_LINE_START, ("ucur_t", l, i, j))

        prog.add_le(vbl, feeder.vmax[l], AUX_VOLTAGE_CAP, ("vbar_max", l))
        im = _current_bound(feeder, config, l)
        if im is not None:
            side = vl if config.nick_current_side == "bus" else vu
            for i, a in enumerate((Phb, Pbb)):
                for j, c in enumerate((Qhb, Qbb)):
                    prog.add_rsoc(0.5 * im * vl, 1.0, [a, c], AUX_CURRENT_BUS_END, ("aimax_b", l, i, j))
            for i, a in enumerate((Pht, Pbt)):
                for j, c in enumerate((Qht, Qbt)):
                    prog.add_rsoc(0.5 * im * side, 1.0, [a, c], AUX_CURRENT_LINE_START, ("aimax_t", l, i, j))

        prog.add_le(X("Pt", l), Pbt, UPPER_FLOW_BRACKET, ("bracket_P_lo", l))
        prog.add_le(Pbt, pmax, UPPER_FLOW_BRACKET, ("bracket_P_hi", l))
        prog.add_le(X("Qt", l), Qbt, UPPER_FLOW_BRACKET, ("bracket_Q_lo", l))
        prog.add_le(Qbt, qmax, UPPER_FLOW_BRACKET, ("bracket_Q_hi", l))
    prog.meta["augmentations"] = prog.meta.get("augmentations", ()) + ("NICK",)
    return prog


def import_flow(prog: ConicProgram, feeder: Feeder, part: str = "P") -> Affine:
    """Power imported through the root (sum over lines leaving bus 0)."""
    return total(prog.var((part + "t", l)) for l in range(1, feeder.n + 1) if feeder.up[l] == 0)


def set_objective(prog: ConicProgram, config: FormulationConfig) -> ConicProgram:
    """Install the operational objective (without any current penalty)."""
    feeder: Feeder = prog.meta["feeder"]
    config.validate()
    obj = Affine()
    for costs, nm in ((config.cost_p, "p"), (config.cost_q, "q")):
        if costs is not None:
            obj = obj + total(float(costs[l]) * prog.var((nm, l)) for l in range(1, feeder.n + 1) if costs[l])
    P0, Q0 = import_flow(prog, feeder, "P"), import_flow(prog, feeder, "Q")
    if config.objective == "min-import":
        obj = obj + P0
    elif config.objective == "fixed-q":
        prog.add_eq(Q0, float(config.q_value), IMPORT_Q_FIXED, ("q_import",))
        obj = obj + P0
    else:
        t = prog.add_var(("q_dev",))
        prog.add_rsoc(t, 0.5, [Q0 - float(config.q_ref)], Q_DEVIATION, ("q_dev",))
        obj = obj + t
    prog.objective = obj
    prog.meta["true_objective"] = obj
    return prog


def add_current_penalty(prog: ConicProgram, epsilon: float) -> ConicProgram:
    """Add ``epsilon * sum(f)`` to the objective (auxiliary currents are not penalised)."""
    if epsilon < 0:
        raise FormulationError("penalty weight must be nonnegative")
    if epsilon == 0:
        return prog
    feeder: Feeder = prog.meta["feeder"]
    prog.objective = prog.objective + epsilon * total(prog.var(("f", l)) for l in range(1, feeder.n + 1))
    prog.meta["epsilon"] = epsilon
    return prog


def build_program(feeder: Feeder, scenario: Scenario, config: FormulationConfig) -> ConicProgram:
    """Full relaxation for ``config.method`` with objective and penalty."""
    config.validate()
    prog = build_base_constraints(feeder, scenario, config)
    add_socp_relaxation(prog, feeder)
    if config.method in ("GAN", "HUANG"):
        add_gan_augmentation(prog, feeder)
    if config.method == "HUANG":
        add_huang_augmentation(prog, feeder)
    if config.method == "NICK":
        add_nick_augmentation(prog, feeder, scenario)
    set_objective(prog, config)
    add_current_penalty(prog, config.epsilon)
    prog.meta.setdefault("epsilon", config.epsilon)
    return prog


def negative_candidates(solution, tol: float = 1e-7) -> list:
    """Lines whose current-bound candidates of the shunt-aware augmentation go negative.

    The all-pairs cone expansion bounds every squared (P, Q) candidate pair;
    this equals a bound on the squared maxima only when the candidates are
    nonnegative, so solutions listed here deserve a closer look.
    """
    prog = solution.program
    feeder: Feeder = prog.meta["feeder"]
    flagged = []
    for l in range(1, feeder.n + 1):
        if not prog.has_constraint(("aimax_b", l, 0, 0)):
            continue
        names = ("Phb", "Pbb", "Qhb", "Qbb", "Pht", "Pbt", "Qht", "Qbt")
        if any(solution[(nm, l)] < -tol for nm in names):
            flagged.append(l)
    return flagged
