"""Radial feeders, per-unit bookkeeping, yearly profiles and hourly scenarios.

Feeder file format (``distrelax-feeder 1``)
------------------------------------------
UTF-8 text. ``#`` starts a comment. The first non-comment line is the
version header ``distrelax-feeder 1``. Sections follow in any order:

``[bases]``  ``key = value`` pairs::

    power_mva = 1.0          three-phase power base, MVA (required)
    zone <name> = <kV>       phase-to-phase voltage base per zone (at least one)
    root = <label>           label of the root (substation) bus (required)
    v0 = 1.0                 root voltage magnitude, p.u.
    vmin = 0.9, vmax = 1.1   default bus voltage magnitude bounds, p.u.
    imax = 4.0               default line current magnitude bound, p.u. (optional)

``[buses]``, ``[lines]``, ``[capacitors]``, ``[pv]`` are whitespace tables.
Their first row names the columns; ``-`` means "use the default".

* buses: ``bus zone p_kw q_kvar [load_mult] [profile] [vmin] [vmax]``.
  Loads are peak values; ``load_mult`` (default 1) scales them, e.g. 3 for
  loads on single-phase laterals. ``profile`` is the load profile key
  (default ``load``).
* lines: ``bus up r x [bsh] [units] [imax] [smax] [kind]``. Line ``bus`` ends at
  bus ``bus``. With ``units = ohm`` (default) ``r``/``x`` are ohms and ``bsh``
  the total shunt susceptance in microsiemens, referred to the zone of the
  downstream bus; with ``units = pu`` all three are on the system base.
  ``kind`` is ``line`` or ``xfmr`` (transformers are series impedances).
  ``imax`` (current magnitude, p.u.) and ``smax`` (apparent power, p.u.)
  override the defaults.
* capacitors: ``bus kvar [mode]`` with ``mode`` in ``fixed``/``variable``.
* pv: ``bus [share]``. When the section is present, PV is installed only at
  the listed buses, split by ``share``; otherwise at every bus with load,
  split in proportion to peak load.

Squared quantities (``v``, ``f``, bounds) are stored in p.u.^2.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FEEDER_FORMAT = "distrelax-feeder"
FEEDER_VERSION = 1
HOURS_PER_YEAR = 8760


class FeederError(ValueError):
    """Invalid feeder or profile data."""


class RadialityError(FeederError):
    """The line set does not form a tree rooted at the substation."""


@dataclass(frozen=True)
class Line:
    index: int
    up: int
    r: float
    x: float
    b: float
    imax: float | None = None
    smax: float | None = None
    kind: str = "line"

    @property
    def z(self) -> complex:
        return complex(self.r, self.x)


@dataclass(frozen=True)
class Bus:
    index: int
    label: str
    vmin: float
    vmax: float
    p_load: float
    q_load: float
    profile: str = "load"


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Feeder:
    """Immutable radial feeder in per-unit.

    Arrays are indexed by bus (``0`` is the root); line ``l`` ends at bus
    ``l``, so line arrays share the bus indexing and entry ``0`` is unused.
    Non-root buses are numbered in breadth-first order from the root, hence
    ``up[l] < l``.
    """

    labels: tuple
    up: np.ndarray
    r: np.ndarray
    x: np.ndarray
    b: np.ndarray
    vmin: np.ndarray
    vmax: np.ndarray
    imax: np.ndarray  # squared, nan where unbounded
    smax: np.ndarray  # nan where unbounded
    p_load: np.ndarray  # peak, load_mult applied
    q_load: np.ndarray
    load_mult: np.ndarray
    profiles: tuple
    zones: tuple
    kinds: tuple
    q_cap: np.ndarray
    cap_mode: tuple
    pv_share: np.ndarray | None
    v0: float
    base_power: float
    base_voltages: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        n = len(self.labels) - 1
        if n < 1:
            raise FeederError("feeder needs at least one non-root bus")
        for attr in ("up", "r", "x", "b", "vmin", "vmax", "imax", "smax", "p_load", "q_load",
                     "load_mult", "q_cap"):
            val = getattr(self, attr)
            if len(val) != n + 1:
                raise FeederError(f"{attr} has length {len(val)}, expected {n + 1}")
            object.__setattr__(self, attr, _frozen(val, int if attr == "up" else float))
        if self.pv_share is not None:
            object.__setattr__(self, "pv_share", _frozen(self.pv_share))
        _check_tree(self.up)
        if np.any(self.up[1:] >= np.arange(1, n + 1)):
            raise FeederError("buses must be numbered parent-first (up(l) < l)")
        z = np.hypot(self.r[1:], self.x[1:])
        if np.any(z <= 0) or np.any(self.r[1:] < 0):
            bad = int(np.argmax((z <= 0) | (self.r[1:] < 0))) + 1
            raise FeederError(f"line {self.labels[bad]}: impedance must have r >= 0 and |z| > 0")
        if np.any(self.b[1:] < 0):
            raise FeederError("shunt susceptances must be nonnegative")
        if np.any(self.vmin[1:] <= 0) or np.any(self.vmin[1:] >= self.vmax[1:]):
            bad = int(np.argmax((self.vmin[1:] <= 0) | (self.vmin[1:] >= self.vmax[1:]))) + 1
            raise FeederError(f"bus {self.labels[bad]}: need 0 < vmin < vmax")
        im = self.imax[1:]
        if np.any(im[~np.isnan(im)] <= 0):
            raise FeederError("current bounds must be positive")
        if self.v0 <= 0 or self.base_power <= 0:
            raise FeederError("v0 and base_power must be positive")

    @property
    def n(self) -> int:
        return len(self.labels) - 1

    def children(self) -> list[list[int]]:
        ch = [[] for _ in range(self.n + 1)]
        for l in range(1, self.n + 1):
            ch[self.up[l]].append(l)
        return ch

    def line(self, l: int) -> Line:
        im = None if math.isnan(self.imax[l]) else float(self.imax[l])
        sm = None if math.isnan(self.smax[l]) else float(self.smax[l])
        return Line(l, int(self.up[l]), float(self.r[l]), float(self.x[l]), float(self.b[l]), im, sm, self.kinds[l])

    def bus(self, l: int) -> Bus:
        return Bus(l, self.labels[l], float(self.vmin[l]), float(self.vmax[l]),
                   float(self.p_load[l]), float(self.q_load[l]), self.profiles[l])

    @property
    def peak_load(self) -> float:
        """Total peak active load, p.u."""
        return float(np.sum(self.p_load[1:]))

    def index_of(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise FeederError(f"unknown bus {label!r}") from None

    def replace(self, **changes) -> "Feeder":
        """Copy with some fields replaced (arrays are re-validated)."""
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return Feeder(**kw)


def _check_tree(up):
    n = len(up) - 1
    if up[0] != -1:
        raise RadialityError("root bus must have no upstream bus")
    seen = 0
    for l in range(1, n + 1):
        if not 0 <= up[l] <= n or up[l] == l:
            raise RadialityError(f"bus index {l} has invalid upstream {up[l]}")
    # every bus must reach the root without revisiting (count = n)
    depth = np.full(n + 1, -1)
    depth[0] = 0
    for l in range(1, n + 1):
        path = []
        k = l
        while depth[k] < 0:
            path.append(k)
            k = up[k]
            if len(path) > n:
                raise RadialityError("upstream map contains a cycle")
        for d, node in enumerate(reversed(path), start=depth[k] + 1):
            depth[node] = d
        seen += len(path)
    if seen != n:
        raise RadialityError("upstream map does not reach every bus")


def downstream_sets(feeder: Feeder) -> dict[int, frozenset]:
    """Map each non-root bus ``l`` to the buses of the subtree rooted at ``l``."""
    acc: list[set] = [{l} for l in range(feeder.n + 1)]
    # children have larger indices than their parents
    for l in range(feeder.n, 0, -1):
        u = feeder.up[l]
        if u > 0:
            acc[u] |= acc[l]
    return {l: frozenset(acc[l]) for l in range(1, feeder.n + 1)}


# --------------------------------------------------------------------- parsing

_NUM = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


def _num(tok, ctx):
    if not _NUM.match(tok):
        raise FeederError(f"{ctx}: expected a number, got {tok!r}")
    return float(tok)


def _parse_sections(text: str, source: str):
    sections: dict[str, list] = {}
    header_seen = False
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            parts = line.split()
            if len(parts) != 2 or parts[0] != FEEDER_FORMAT:
                raise FeederError(f"{source}:{lineno}: missing '{FEEDER_FORMAT} <version>' header")
            if parts[1] != str(FEEDER_VERSION):
                raise FeederError(f"{source}:{lineno}: unsupported feeder format version {parts[1]}")
            header_seen = True
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in ("bases", "buses", "lines", "capacitors", "pv"):
                raise FeederError(f"{source}:{lineno}: unknown section [{current}]")
            if current in sections:
                raise FeederError(f"{source}:{lineno}: duplicate section [{current}]")
            sections[current] = []
            continue
        if current is None:
            raise FeederError(f"{source}:{lineno}: data outside of a section")
        sections[current].append((lineno, line))
    if not header_seen:
        raise FeederError(f"{source}: empty feeder file")
    return sections


def _table(rows, name, required, optional, source):
    if not rows:
        return []
    lineno, head = rows[0]
    cols = head.split()
    missing = [c for c in required if c not in cols]
    if missing:
        raise FeederError(f"{source}:{lineno}: [{name}] header lacks column(s) {', '.join(missing)}")
    unknown = [c for c in cols if c not in required and c not in optional]
    if unknown:
        raise FeederError(f"{source}:{lineno}: [{name}] unknown column(s) {', '.join(unknown)}")
    out = []
    for lineno, line in rows[1:]:
        toks = line.split()
        if len(toks) != len(cols):
            raise FeederError(f"{source}:{lineno}: [{name}] row has {len(toks)} fields, expected {len(cols)}")
        rec = {c: (None if t == "-" else t) for c, t in zip(cols, toks)}
        rec["_ctx"] = f"{source}:{lineno}"
        out.append(rec)
    return out


def _field(rec, key, default=None, numeric=True):
    val = rec.get(key)
    if val is None:
        return default
    return _num(val, f"{rec['_ctx']}: field '{key}'") if numeric else val


def parse_feeder(text: str, source: str = "<feeder>", name: str = "") -> Feeder:
    sec = _parse_sections(text, source)
    if "bases" not in sec:
        raise FeederError(f"{source}: missing [bases] section")
    bases: dict = {}
    zones: dict = {}
    for lineno, line in sec["bases"]:
        if "=" not in line:
            raise FeederError(f"{source}:{lineno}: expected 'key = value' in [bases]")
        key, val = (t.strip() for t in line.split("=", 1))
        ctx = f"{source}:{lineno}: field '{key}'"
        if key.startswith("zone "):
            zones[key[5:].strip()] = _num(val, ctx)
        elif key == "root":
            bases["root"] = val
        elif key in ("power_mva", "v0", "vmin", "vmax", "imax"):
            bases[key] = _num(val, ctx)
        else:
            raise FeederError(f"{source}:{lineno}: unknown [bases] key {key!r}")
    for key in ("power_mva", "root"):
        if key not in bases:
            raise FeederError(f"{source}: [bases] missing '{key}'")
    if not zones:
        raise FeederError(f"{source}: [bases] declares no voltage zone")
    mva = bases["power_mva"]
    root = bases["root"]

    buses = _table(sec.get("buses", []), "buses", ["bus", "zone", "p_kw", "q_kvar"],
                   ["load_mult", "profile", "vmin", "vmax"], source)
    lines = _table(sec.get("lines", []), "lines", ["bus", "up", "r", "x"],
                   ["bsh", "units", "imax", "smax", "kind"], source)
    caps = _table(sec.get("capacitors", []), "capacitors", ["bus", "kvar"], ["mode"], source)
    pv = _table(sec["pv"], "pv", ["bus"], ["share"], source) if "pv" in sec else None

    bus_rec = {}
    for rec in buses:
        lab = rec["bus"]
        if lab == root:
            raise FeederError(f"{rec['_ctx']}: root bus {root} cannot carry a bus record")
        if lab in bus_rec:
            raise FeederError(f"{rec['_ctx']}: duplicate bus {lab}")
        if rec["zone"] not in zones:
            raise FeederError(f"{rec['_ctx']}: field 'zone': undeclared zone {rec['zone']!r}")
        bus_rec[lab] = rec
    line_rec = {}
    for rec in lines:
        lab = rec["bus"]
        if lab in line_rec:
            raise RadialityError(f"{rec['_ctx']}: bus {lab} has more than one upstream line")
        if lab not in bus_rec:
            raise FeederError(f"{rec['_ctx']}: line ends at unknown bus {lab}")
        if rec["up"] != root and rec["up"] not in bus_rec:
            raise FeederError(f"{rec['_ctx']}: unknown upstream bus {rec['up']}")
        line_rec[lab] = rec
    for lab in bus_rec:
        if lab not in line_rec:
            raise RadialityError(f"{bus_rec[lab]['_ctx']}: bus {lab} has no upstream line")

    # breadth-first numbering from the root
    kids: dict[str, list] = {}
    for lab, rec in line_rec.items():
        kids.setdefault(rec["up"], []).append(lab)
    order = [root]
    head = 0
    while head < len(order):
        order.extend(kids.get(order[head], []))
        head += 1
    if len(order) != len(bus_rec) + 1:
        raise RadialityError(f"{source}: lines do not form a tree rooted at bus {root}")
    idx = {lab: i for i, lab in enumerate(order)}
    n = len(order) - 1

    def arr(fill=0.0):
        return np.full(n + 1, fill, dtype=float)

    up = np.full(n + 1, -1, dtype=int)
    r, x, b = arr(), arr(), arr()
    vmin, vmax = arr(np.nan), arr(np.nan)
    imax, smax = arr(np.nan), arr(np.nan)
    p_load, q_load, mult = arr(), arr(), arr(1.0)
    profiles = ["-"] * (n + 1)
    zone_of = ["-"] * (n + 1)
    kinds = ["-"] * (n + 1)
    dvmin, dvmax = bases.get("vmin", 0.9), bases.get("vmax", 1.1)
    dimax = bases.get("imax")
    for lab, rec in bus_rec.items():
        i = idx[lab]
        zone_of[i] = rec["zone"]
        mult[i] = _field(rec, "load_mult", 1.0)
        p_load[i] = _field(rec, "p_kw") / 1000.0 / mva * mult[i]
        q_load[i] = _field(rec, "q_kvar") / 1000.0 / mva * mult[i]
        profiles[i] = _field(rec, "profile", "load", numeric=False)
        vmin[i] = _field(rec, "vmin", dvmin) ** 2
        vmax[i] = _field(rec, "vmax", dvmax) ** 2
    for lab, rec in line_rec.items():
        i = idx[lab]
        up[i] = idx[rec["up"]]
        units = _field(rec, "units", "ohm", numeric=False)
        rr, xx, bsh = _field(rec, "r"), _field(rec, "x"), _field(rec, "bsh", 0.0)
        if units == "ohm":
            zb = zones[zone_of[i]] ** 2 / mva
            r[i], x[i], b[i] = rr / zb, xx / zb, bsh * 1e-6 * zb / 2.0
        elif units == "pu":
            r[i], x[i], b[i] = rr, xx, bsh / 2.0
        else:
            raise FeederError(f"{rec['_ctx']}: field 'units': expected ohm or pu, got {units!r}")
        im = _field(rec, "imax", dimax)
        imax[i] = np.nan if im is None else im ** 2
        sm = _field(rec, "smax", None)
        smax[i] = np.nan if sm is None else sm
        kinds[i] = _field(rec, "kind", "line", numeric=False)
        if kinds[i] not in ("line", "xfmr"):
            raise FeederError(f"{rec['_ctx']}: field 'kind': expected line or xfmr")

    q_cap = arr()
    cap_mode = ["none"] * (n + 1)
    for rec in caps:
        if rec["bus"] not in idx or rec["bus"] == root:
            raise FeederError(f"{rec['_ctx']}: capacitor at unknown bus {rec['bus']}")
        i = idx[rec["bus"]]
        q_cap[i] += _field(rec, "kvar") / 1000.0 / mva
        mode = _field(rec, "mode", "fixed", numeric=False)
        if mode not in ("fixed", "variable"):
            raise FeederError(f"{rec['_ctx']}: field 'mode': expected fixed or variable")
        cap_mode[i] = mode
    pv_share = None
    if pv is not None:
        pv_share = arr()
        for rec in pv:
            if rec["bus"] not in idx or rec["bus"] == root:
                raise FeederError(f"{rec['_ctx']}: PV at unknown bus {rec['bus']}")
            share = _field(rec, "share", 1.0)
            if share < 0:
                raise FeederError(f"{rec['_ctx']}: field 'share' must be nonnegative")
            pv_share[idx[rec["bus"]]] += share

    v0 = bases.get("v0", 1.0) ** 2
    try:
        return Feeder(labels=tuple(order), up=up, r=r, x=x, b=b, vmin=vmin, vmax=vmax, imax=imax, smax=smax,
                      p_load=p_load, q_load=q_load, load_mult=mult, profiles=tuple(profiles),
                      zones=tuple(zone_of), kinds=tuple(kinds), q_cap=q_cap, cap_mode=tuple(cap_mode),
                      pv_share=pv_share, v0=v0, base_power=mva, base_voltages=dict(zones), name=name)
    except FeederError as exc:
        raise FeederError(f"{source}: {exc}") from None


def load_feeder(path) -> Feeder:
    """Read and validate a feeder file; quantities are converted to per-unit."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FeederError(f"{path}: {exc.strerror or exc}") from None
    return parse_feeder(text, source=str(path), name=path.stem)


def _fmt(v) -> str:
    return repr(float(v))


def format_feeder(feeder: Feeder, units: str = "ohm") -> str:
    """Serialise ``feeder`` back to the text format (physical units by default)."""
    mva = feeder.base_power
    out = [f"{FEEDER_FORMAT} {FEEDER_VERSION}", "", "[bases]", f"power_mva = {_fmt(mva)}"]
    for zname, kv in feeder.base_voltages.items():
        out.append(f"zone {zname} = {_fmt(kv)}")
    out += [f"root = {feeder.labels[0]}", f"v0 = {_fmt(math.sqrt(feeder.v0))}", "", "[buses]",
            "bus zone p_kw q_kvar load_mult profile vmin vmax"]
    for l in range(1, feeder.n + 1):
        m = feeder.load_mult[l]
        p = feeder.p_load[l] / m * 1000.0 * mva
        q = feeder.q_load[l] / m * 1000.0 * mva
        out.append(f"{feeder.labels[l]} {feeder.zones[l]} {_fmt(p)} {_fmt(q)} {_fmt(m)} {feeder.profiles[l]} "
                   f"{_fmt(math.sqrt(feeder.vmin[l]))} {_fmt(math.sqrt(feeder.vmax[l]))}")
    out += ["", "[lines]", "bus up r x bsh units imax smax kind"]
    for l in range(1, feeder.n + 1):
        if units == "ohm":
            zb = feeder.base_voltages[feeder.zones[l]] ** 2 / mva
            r, x, bsh = feeder.r[l] * zb, feeder.x[l] * zb, 2.0 * feeder.b[l] / zb * 1e6
        else:
            r, x, bsh = feeder.r[l], feeder.x[l], 2.0 * feeder.b[l]
        im = "-" if math.isnan(feeder.imax[l]) else repr(math.sqrt(feeder.imax[l]))
        sm = "-" if math.isnan(feeder.smax[l]) else repr(float(feeder.smax[l]))
        out.append(f"{feeder.labels[l]} {feeder.labels[feeder.up[l]]} {_fmt(r)} {_fmt(x)} {_fmt(bsh)} {units} "
                   f"{im} {sm} {feeder.kinds[l]}")
    caps = [l for l in range(1, feeder.n + 1) if feeder.cap_mode[l] != "none"]
    if caps:
        out += ["", "[capacitors]", "bus kvar mode"]
        for l in caps:
            out.append(f"{feeder.labels[l]} {_fmt(feeder.q_cap[l] * 1000.0 * mva)} {feeder.cap_mode[l]}")
    if feeder.pv_share is not None:
        out += ["", "[pv]", "bus share"]
        for l in range(1, feeder.n + 1):
            if feeder.pv_share[l] > 0:
                out.append(f"{feeder.labels[l]} {_fmt(float(feeder.pv_share[l]))}")
    return "\n".join(out) + "\n"


def write_feeder(feeder: Feeder, path, units: str = "ohm") -> None:
    Path(path).write_text(format_feeder(feeder, units), encoding="utf-8")


# -------------------------------------------------------------------- profiles

@dataclass(frozen=True, eq=False)
class ProfileSet:
    """Hourly multipliers in [0, 1] keyed by profile name (all series equal length)."""

    series: dict

    def __post_init__(self):
        lengths = {len(v) for v in self.series.values()}
        if len(lengths) > 1:
            raise FeederError("profile series have different lengths")
        frozen = {}
        for key, vals in self.series.items():
            a = _frozen(vals)
            if np.any(~np.isfinite(a)) or np.any(a < 0) or np.any(a > 1):
                raise FeederError(f"profile {key!r}: multipliers must lie in [0, 1]")
            frozen[key] = a
        object.__setattr__(self, "series", frozen)

    @property
    def hours(self) -> int:
        return len(next(iter(self.series.values()))) if self.series else 0

    def value(self, key: str, hour: int) -> float:
        if key not in self.series:
            raise FeederError(f"profile key {key!r} not present in profile set")
        if not 0 <= hour < self.hours:
            raise FeederError(f"hour {hour} outside profile range 0..{self.hours - 1}")
        return float(self.series[key][hour])


def load_profiles(path) -> ProfileSet:
    """Read a ``hour,key,multiplier`` CSV."""
    path = Path(path)
    data: dict[str, dict[int, float]] = {}
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise FeederError(f"{path}: {exc.strerror or exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["hour", "key", "multiplier"]:
            raise FeederError(f"{path}:1: expected header 'hour,key,multiplier'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                hour, key, val = int(row[0]), row[1].strip(), float(row[2])
            except (ValueError, IndexError):
                raise FeederError(f"{path}:{lineno}: malformed profile row {row!r}") from None
            if hour in data.setdefault(key, {}):
                raise FeederError(f"{path}:{lineno}: duplicate entry for hour {hour}, key {key!r}")
            data[key][hour] = val
    series = {}
    for key, d in data.items():
        hours = sorted(d)
        if hours != list(range(len(hours))):
            raise FeederError(f"{path}: profile {key!r} hours are not contiguous from 0")
        series[key] = [d[h] for h in hours]
    try:
        return ProfileSet(series)
    except FeederError as exc:
        raise FeederError(f"{path}: {exc}") from None


def write_profiles(profiles: ProfileSet, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", "key", "multiplier"])
        for key in sorted(profiles.series):
            for h, v in enumerate(profiles.series[key]):
                w.writerow([h, key, f"{v:.6f}"])


def synthetic_profiles(seed: int = 0, hours: int = HOURS_PER_YEAR, load_range=(0.15, 1.0)) -> ProfileSet:
    """Deterministic year of load (``load``) and PV availability (``pv``) multipliers.

    Loads follow daily and seasonal cycles rescaled onto ``load_range``; PV
    follows a clear-sky daylight curve with seasonal amplitude and cloud
    attenuation, scaled to a peak of 1.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(hours)
    hod = t % 24
    doy = (t // 24) % 365
    daily = 0.55 + 0.25 * np.exp(-((hod - 8) / 2.5) ** 2) + 0.45 * np.exp(-((hod - 19) / 3.0) ** 2)
    seasonal = 1.0 + 0.25 * np.cos(2 * np.pi * (doy - 15) / 365)
    noise = np.exp(rng.normal(0, 0.08, size=hours))
    load = daily * seasonal * noise
    lo, hi = load_range
    load = lo + (hi - lo) * (load - load.min()) / (load.max() - load.min())

    day_len = 12 + 4 * np.sin(2 * np.pi * (doy - 80) / 365)
    sunrise = 12 - day_len / 2
    phase = (hod + 0.5 - sunrise) / day_len
    shape = np.where((phase > 0) & (phase < 1), np.sin(np.pi * np.clip(phase, 0, 1)) ** 1.5, 0.0)
    amplitude = 0.7 + 0.3 * np.sin(2 * np.pi * (doy - 80) / 365)
    cloud_day = np.clip(rng.beta(5, 1.6, size=366), 0.05, 1.0)[t // 24 % 366]
    cloud_hour = np.clip(1 - 0.15 * rng.random(hours), 0, 1)
    pv = shape * amplitude * cloud_day * cloud_hour
    pv = pv / pv.max()
    return ProfileSet({"load": np.round(load, 6), "pv": np.round(pv, 6)})


# -------------------------------------------------------------------- scenarios

@dataclass(frozen=True)
class ScenarioOptions:
    """How an hour's withdrawal regions are assembled.

    ``capacitor_mode`` overrides the per-capacitor mode from the feeder file
    when set.
    """

    pv_penetration: float = 2.5
    nameplate_ratio: float = 1.1
    pv_profile: str = "pv"
    capacitor_mode: str | None = None


@dataclass(frozen=True, eq=False)
class Scenario:
    """One hour's withdrawal regions, arrays indexed by bus (entry 0 unused).

    Withdrawal at bus ``l`` is ``p_load - p_pv + j(q_load - q_pv - q_c)`` with
    ``0 <= p_pv <= pv_avail``, ``|p_pv + j q_pv| <= pv_cap`` and ``q_c = q_cap``
    (fixed) or ``0 <= q_c <= q_cap`` (variable).
    """

    hour: int
    p_load: np.ndarray
    q_load: np.ndarray
    pv_avail: np.ndarray
    pv_cap: np.ndarray
    q_cap: np.ndarray
    cap_variable: np.ndarray

    def __post_init__(self):
        for attr in ("p_load", "q_load", "pv_avail", "pv_cap", "q_cap"):
            object.__setattr__(self, attr, _frozen(getattr(self, attr)))
        object.__setattr__(self, "cap_variable", _frozen(self.cap_variable, bool))
        if np.any(self.pv_avail < 0) or np.any(self.pv_cap < 0) or np.any(self.q_cap < 0):
            raise FeederError("PV availability, nameplates and capacitor sizes must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.p_load) - 1

    @property
    def has_pv(self) -> np.ndarray:
        return self.pv_cap > 0

    def is_fixed(self, l: int) -> bool:
        """True when bus ``l``'s region is a single point."""
        return not (self.pv_cap[l] > 0 or (self.cap_variable[l] and self.q_cap[l] > 0))

    def withdrawal_bounds(self, l: int):
        """Box ``(p_min, p_max, q_min, q_max)`` enclosing the region at bus ``l``."""
        cap = self.pv_cap[l]
        qc_lo = 0.0 if self.cap_variable[l] else self.q_cap[l]
        p_max = self.p_load[l]
        p_min = self.p_load[l] - min(self.pv_avail[l], cap)
        q_max = self.q_load[l] + cap - qc_lo
        q_min = self.q_load[l] - cap - self.q_cap[l]
        return p_min, p_max, q_min, q_max

    def fixed_withdrawals(self):
        """Withdrawals with PV and variable capacitors switched off."""
        p = np.array(self.p_load)
        q = np.array(self.q_load) - np.where(self.cap_variable, 0.0, self.q_cap)
        return p, q


def build_scenario(feeder: Feeder, profiles: ProfileSet, hour: int,
                   options: ScenarioOptions | None = None) -> Scenario:
    """Assemble the withdrawal regions of ``hour``.

    Loads are scaled by their profile multiplier. Installed PV totals
    ``pv_penetration`` times the feeder peak load, split by the feeder's PV
    shares (by default in proportion to peak bus load); availability is the
    installed capacity times the PV multiplier and the nameplate is
    ``nameplate_ratio`` times the installed capacity.
    """
    opts = options or ScenarioOptions()
    if not 0 <= hour < profiles.hours:
        raise FeederError(f"hour {hour} outside profile range 0..{profiles.hours - 1}")
    n = feeder.n
    mult = np.zeros(n + 1)
    for l in range(1, n + 1):
        key = feeder.profiles[l]
        if key not in profiles.series:
            raise FeederError(f"bus {feeder.labels[l]}: load profile key {key!r} not in profile set")
        mult[l] = profiles.series[key][hour]
    p_load = feeder.p_load * mult
    q_load = feeder.q_load * mult

    if feeder.pv_share is None:
        share = np.where(feeder.p_load > 0, feeder.p_load, 0.0)
    else:
        share = np.array(feeder.pv_share)
    share[0] = 0.0
    installed = np.zeros(n + 1)
    if share.sum() > 0 and opts.pv_penetration > 0:
        installed = opts.pv_penetration * feeder.peak_load * share / share.sum()
    pv_mult = profiles.value(opts.pv_profile, hour) if np.any(installed > 0) else 0.0

    if opts.capacitor_mode is None:
        cap_var = np.array([m == "variable" for m in feeder.cap_mode])
    elif opts.capacitor_mode in ("fixed", "variable"):
        cap_var = np.full(n + 1, opts.capacitor_mode == "variable")
    else:
        raise FeederError(f"unknown capacitor mode {opts.capacitor_mode!r}")
    return Scenario(hour=hour, p_load=p_load, q_load=q_load, pv_avail=installed * pv_mult,
                    pv_cap=opts.nameplate_ratio * installed, q_cap=np.array(feeder.q_cap),
                    cap_variable=cap_var & (feeder.q_cap > 0))


def fixed_scenario(feeder: Feeder, p=None, q=None) -> Scenario:
    """Scenario with inflexible withdrawals (defaults to the feeder's peak loads)."""
    n = feeder.n
    p = np.array(feeder.p_load if p is None else p, dtype=float)
    q = np.array(feeder.q_load if q is None else q, dtype=float)
    zeros = np.zeros(n + 1)
    return Scenario(hour=-1, p_load=p, q_load=q, pv_avail=zeros, pv_cap=zeros, q_cap=zeros,
                    cap_variable=np.zeros(n + 1, dtype=bool))


def simple_feeder(up, z, b=None, vmin=0.9, vmax=1.1, imax=None, p_load=None, q_load=None, v0=1.0,
                  name="synthetic") -> Feeder:
    """Build a per-unit feeder directly from arrays (bus 0 is the root).

    ``up``, ``z`` and ``b`` are indexed by bus with entry 0 ignored; bounds
    are voltage and current magnitudes.
    """
    n = len(up) - 1
    up = np.array(up, dtype=int)
    up[0] = -1
    z = np.asarray(z, dtype=complex)
    bb = np.zeros(n + 1) if b is None else np.asarray(b, dtype=float)
    im = np.full(n + 1, np.nan) if imax is None else np.broadcast_to(np.asarray(imax, float) ** 2, (n + 1,)).copy()
    zero = np.zeros(n + 1)
    return Feeder(labels=tuple(str(i) for i in range(n + 1)), up=up, r=z.real, x=z.imag, b=bb,
                  vmin=np.broadcast_to(np.asarray(vmin, float) ** 2, (n + 1,)).copy(),
                  vmax=np.broadcast_to(np.asarray(vmax, float) ** 2, (n + 1,)).copy(),
                  imax=im, smax=np.full(n + 1, np.nan),
                  p_load=zero if p_load is None else np.asarray(p_load, float),
                  q_load=zero if q_load is None else np.asarray(q_load, float),
                  load_mult=np.ones(n + 1), profiles=("load",) * (n + 1), zones=("pu",) * (n + 1),
                  kinds=("line",) * (n + 1), q_cap=zero, cap_mode=("none",) * (n + 1), pv_share=None,
                  v0=v0 ** 2, base_power=1.0, base_voltages={"pu": 1.0}, name=name)
