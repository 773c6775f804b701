import math

import numpy as np
import pytest

from distrelax.network import (
    FeederError,
    RadialityError,
    ScenarioOptions,
    build_scenario,
    downstream_sets,
    format_feeder,
    load_profiles,
    parse_feeder,
    simple_feeder,
    synthetic_profiles,
    write_profiles,
)

TINY = """distrelax-feeder 1
[bases]
power_mva = 10
zone a = 12.47
zone b = 4.16
root = s
vmin = 0.95
vmax = 1.05
imax = 2.0

[buses]
bus zone p_kw q_kvar load_mult
x   a    200  100    1
y   b    50   20     3

[lines]
bus up r   x   bsh  units kind
x   s  1.5 3.0 10   ohm   line
y   x  0.01 0.08 0  pu    xfmr
"""


def test_parse_per_unit_values():
    f = parse_feeder(TINY)
    zb = 12.47 ** 2 / 10
    assert f.labels == ("s", "x", "y")
    assert f.r[1] == pytest.approx(1.5 / zb, rel=1e-12)
    assert f.x[1] == pytest.approx(3.0 / zb, rel=1e-12)
    # half of the line charging sits at each end
    assert f.b[1] == pytest.approx(0.5 * 10e-6 * zb, rel=1e-12)
    assert f.p_load[2] == pytest.approx(3 * 0.05 / 10)
    assert f.vmax[1] == pytest.approx(1.05 ** 2)
    assert f.imax[2] == pytest.approx(4.0)
    assert f.kinds[2] == "xfmr"


@pytest.mark.parametrize("units", ["ohm", "pu"])
def test_format_roundtrip(feeders, units):
    for f in feeders.values():
        g = parse_feeder(format_feeder(f, units))
        for attr in ("r", "x", "b", "vmin", "vmax", "p_load", "q_load", "q_cap"):
            np.testing.assert_allclose(getattr(g, attr), getattr(f, attr), rtol=1e-12, atol=1e-15)
        np.testing.assert_array_equal(g.up, f.up)
        np.testing.assert_allclose(g.imax, f.imax, rtol=1e-12, equal_nan=True)
        assert g.labels == f.labels


@pytest.mark.parametrize("text,fragment", [
    ("nope 1\n", "header"),
    (TINY.replace("power_mva = 10\n", ""), "power_mva"),
    (TINY.replace("x   s  1.5", "x   s  abc"), "'r'"),
    (TINY.replace("zone a = 12.47\n", ""), "zone"),
    (TINY.replace("y   x  0.01", "y   q  0.01"), "q"),
])
def test_parse_errors_name_the_problem(text, fragment):
    with pytest.raises(FeederError) as err:
        parse_feeder(text, source="tiny.feeder")
    assert fragment in str(err.value)


def test_parse_error_carries_line_number():
    with pytest.raises(FeederError, match=r"tiny.feeder:\d+"):
        parse_feeder(TINY.replace("x   s  1.5", "x   s  abc"), source="tiny.feeder")


def test_cycle_is_rejected():
    text = TINY.replace("x   s  1.5 3.0", "x   y  1.5 3.0")
    with pytest.raises(RadialityError):
        parse_feeder(text)


def test_duplicate_line_is_rejected():
    text = TINY.replace("y   x  0.01 0.08 0  pu    xfmr", "y   x  0.01 0.08 0  pu    xfmr\ny   s  0.01 0.08 0  pu    line")
    with pytest.raises(FeederError):
        parse_feeder(text)


def _brute_downstream(up, l):
    out = set()
    for k in range(1, len(up)):
        j = k
        while j > 0:
            if j == l:
                out.add(k)
                break
            j = up[j]
    return out


def test_downstream_sets_match_brute_force(feeders):
    for f in feeders.values():
        ds = downstream_sets(f)
        for l in range(1, f.n + 1):
            assert ds[l] == _brute_downstream(f.up, l)


def test_fixture_shapes(feeders):
    four = feeders["four_bus"]
    assert four.n == 4
    assert np.count_nonzero(four.q_cap) == 1
    assert np.count_nonzero(four.pv_share) == 1
    fifteen = feeders["fifteen_bus"]
    assert fifteen.n == 15 and np.all(fifteen.b[1:] >= 0) and np.any(fifteen.b > 0)


def test_profiles_roundtrip(tmp_path):
    prof = synthetic_profiles(seed=3, hours=48)
    path = tmp_path / "p.csv"
    write_profiles(prof, path)
    back = load_profiles(path)
    for key in prof.series:
        np.testing.assert_array_equal(back.series[key], prof.series[key])


def test_packaged_profiles_range(profiles):
    load = profiles.series["load"]
    assert profiles.hours == 8760
    assert load.min() >= 0.15 - 1e-9 and load.max() <= 1.0
    assert 0.0 <= profiles.series["pv"].min() and profiles.series["pv"].max() <= 1.0


def test_profile_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("hour,key,multiplier\n0,load,0.5\n0,load,0.6\n")
    with pytest.raises(FeederError, match="duplicate"):
        load_profiles(path)
    path.write_text("hour,key,multiplier\n0,load,1.5\n")
    with pytest.raises(FeederError, match=r"\[0, 1\]"):
        load_profiles(path)


def test_scenario_scaling(feeders, profiles):
    f = feeders["four_bus"]
    sc = build_scenario(f, profiles, 4140)
    m = profiles.value("load", 4140)
    np.testing.assert_allclose(sc.p_load, f.p_load * m)
    installed = 2.5 * f.peak_load
    assert sc.pv_cap.sum() == pytest.approx(1.1 * installed)
    assert sc.pv_avail.sum() == pytest.approx(installed * profiles.value("pv", 4140))
    assert not sc.cap_variable.any()
    var = build_scenario(f, profiles, 4140, ScenarioOptions(capacitor_mode="variable"))
    assert var.cap_variable.sum() == 1


def test_scenario_rejects_bad_hour(feeders, profiles):
    with pytest.raises(FeederError, match="hour"):
        build_scenario(feeders["four_bus"], profiles, 9000)


def test_simple_feeder_squares_bounds():
    f = simple_feeder([-1, 0], [0, 0.01 + 0.02j], vmin=0.9, vmax=1.1, imax=2.0)
    assert f.vmax[1] == pytest.approx(1.21)
    assert f.imax[1] == pytest.approx(4.0)
    assert math.isclose(f.v0, 1.0)
