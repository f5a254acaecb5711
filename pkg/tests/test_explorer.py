import math

import numpy as np
import pytest

from conftest import lambda_scheme, load, two_level
from dressed_limit.exceptions import CapExceeded, OpenManifold
from dressed_limit.explorer import (
    SATURATION_SLACK,
    Parameter,
    ParameterSpace,
    random_scheme,
    scan,
    search_max_saturation,
    search_max_snr_at_fixed_destruction,
    two_level_reference_snr,
)
from dressed_limit.manifold import analyze_manifold
from dressed_limit.serialize import dumps


def _two_level_space(delta=(1.0, 200.0), rabi=(0.1, 10.0)):
    return ParameterSpace(two_level(), [Parameter("detuning.2", *delta),
                                        Parameter("rabi.1", *rabi)])


def _lambda_space(s=None):
    s = lambda_scheme(two_photon=0.5) if s is None else s
    return ParameterSpace(s, [Parameter("detuning.2", -100.0, 100.0),
                              Parameter("detuning.3", -5.0, 5.0),
                              Parameter("rabi.1", 0.0, 10.0),
                              Parameter("rabi.2", 0.0, 10.0)])


def _check_trace(result):
    assert len(result.trace) == result.evaluations
    for e in result.trace:
        for sat in e.saturation:
            assert sat is None or sat <= 1 + SATURATION_SLACK


def test_parameter_space_rejects_bad_input():
    s = two_level()
    with pytest.raises(ValueError):
        ParameterSpace(s, [Parameter("detuning.2", 1.0, 1.0)])
    with pytest.raises(ValueError):
        ParameterSpace(s, [Parameter("rabi.1", -1.0, 1.0)])
    with pytest.raises(ValueError):
        ParameterSpace(s, [Parameter("detuning.7", 0.0, 1.0)])
    with pytest.raises(ValueError):
        ParameterSpace(s, [Parameter("phase.1", 0.0, 1.0)])
    with pytest.raises(OpenManifold):
        ParameterSpace(load("double_laser_invalid.json"), [Parameter("rabi.1.1.2", 0.0, 1.0)])


def test_apply_substitutes_values():
    space = _lambda_space()
    s = space.apply([1.0, 2.0, 3.0, 4.0])
    assert (s.level(2).detuning, s.level(3).detuning) == (1.0, 2.0)
    assert [t.rabi for t in s.transitions] == [3.0, 4.0]
    loop = ParameterSpace(load("fig1c_loop.json"), [Parameter("rabi.1.3.4", 0.0, 1e9)])
    assert loop.apply([5.0]).transitions[1].rabi == 5.0


def test_scan_saturation_increases_with_detuning():
    space = ParameterSpace(two_level(rabi=1.0), [Parameter("detuning.2", 1.0, 100.0)])
    table = scan(space, 50)
    sat = table.column("saturation", 1)
    assert np.all(np.diff(sat) > 0)
    assert sat[-1] >= 0.9999
    expected = np.cos(0.5 * np.arctan(1.0 / np.linspace(1.0, 100.0, 50)))
    assert np.allclose(sat, expected, rtol=1e-12, atol=0)


def test_scan_needs_two_points_per_axis():
    with pytest.raises(ValueError):
        scan(_two_level_space(), [1, 5])


def test_scan_cap():
    with pytest.raises(CapExceeded):
        scan(_two_level_space(), [100, 100], cap=9999)


def test_scan_order_and_csv():
    table = scan(_two_level_space(), [2, 3])
    points = [r.point for r in table.rows]
    assert points[:3] == [(1.0, 0.1), (1.0, 5.05), (1.0, 10.0)]
    lines = table.to_csv().splitlines()
    assert lines[0] == "detuning.2,rabi.1,snr_1,bound_1,saturation_1,destruction"
    assert len(lines) == 7
    assert lines[1].split(",")[0] == "1.0000000000000000e+00"


def test_scan_threads_do_not_change_output():
    space = _lambda_space()
    a = scan(space, [3, 3, 2, 2], threads=1).to_csv()
    b = scan(space, [3, 3, 2, 2], threads=3).to_csv()
    assert a == b


def test_scan_keeps_failed_points():
    # detuning.3 = 0 makes the bare ground level degenerate under overlap tracking
    space = ParameterSpace(lambda_scheme(two_photon=0.5), [Parameter("detuning.3", -1.0, 1.0)])
    table = scan(space, 3)
    assert table.rows[1].report is None and "degenerate" in table.rows[1].error
    assert "nan" in table.to_csv().splitlines()[2]


def test_lambda_scan_dark_resonance():
    space = ParameterSpace(lambda_scheme(rabi_a=2.0, rabi_b=2.0),
                           [Parameter("detuning.3", -1.0, 1.0)])
    table = scan(space, 21, rule="min-excited")
    assert table.rows[10].point == (0.0,)
    for laser in (1, 2):
        snr = table.column("snr", laser)
        assert snr[10] < 1e-12 * snr.max()
        assert np.all(snr[:10] > 1e3 * snr[10]) and np.all(snr[11:] > 1e3 * snr[10])
    assert table.column("destruction")[10] < 1e-14


def test_search_two_level_saturation():
    result = search_max_saturation(_two_level_space(), budget=300, seed=0)
    assert 0.9999 <= result.best_value <= 1 + 1e-6
    assert result.best_value == max(e.objective for e in result.trace)
    _check_trace(result)


def test_search_lambda_saturation_never_exceeds_one():
    result = search_max_saturation(_lambda_space(), budget=600, seed=3)
    assert result.best_value <= 1 + 1e-6
    _check_trace(result)


def test_search_budget_one():
    space = _two_level_space()
    result = search_max_saturation(space, budget=1, seed=0)
    assert result.evaluations == 1 and len(result.trace) == 1
    assert result.best_point == tuple(space.current())


def test_search_is_deterministic():
    a = search_max_saturation(_lambda_space(), budget=150, seed=11)
    b = search_max_saturation(_lambda_space(), budget=150, seed=11)
    assert dumps(a.to_dict()) == dumps(b.to_dict())


def test_scan_and_search_agree():
    space = _two_level_space()
    grid_best = np.nanmax(scan(space, 10).column("saturation", 1))
    result = search_max_saturation(space, budget=200, seed=0)
    assert grid_best <= result.best_value + 1e-12


def _fixed_destruction_two_level(budget=400, seed=0):
    space = ParameterSpace(two_level(delta=30.0, rabi=2.0),
                           [Parameter("detuning.2", 0.5, 200.0),
                            Parameter("rabi.1", 0.01, 20.0)])
    return search_max_snr_at_fixed_destruction(space, 0.01, 1e-6, budget, seed)


def test_fixed_destruction_two_level_follows_closed_form():
    # a two-level atom has SNR = prefactor * sqrt(R) * sqrt(1 - R / gamma);
    # the 1e-6 destruction tolerance allows 5e-5 relative spread in sqrt(R)
    result = _fixed_destruction_two_level()
    assert result.feasible
    assert result.reference_snr == two_level_reference_snr(two_level(), 1, 0.01)
    ratio = result.best_value / result.reference_snr
    assert ratio == pytest.approx(math.sqrt(1 - 0.01), rel=6e-5)
    for e in result.trace:
        if e.error is None and abs(e.destruction - 0.01) <= 1e-6:
            expected = math.sqrt(e.destruction * (1 - e.destruction)) / math.sqrt(0.01)
            assert e.snr[0] / result.reference_snr == pytest.approx(expected, rel=1e-9)


@pytest.mark.xfail(strict=True, reason="the two-level SNR at R = 0.01 gamma sits "
                   "sqrt(0.99) below the reference, a 5e-3 relative gap")
def test_fixed_destruction_two_level_within_1e3_of_reference():
    result = _fixed_destruction_two_level()
    assert result.best_value == pytest.approx(result.reference_snr, rel=1e-3)


def test_fixed_destruction_lambda_stays_below_reference():
    result = search_max_snr_at_fixed_destruction(_lambda_space(), 0.01, 1e-6, 800, 1)
    assert result.feasible
    assert result.best_value <= result.reference_snr * (1 + 1e-3)
    _check_trace(result)


def test_fixed_destruction_infeasible():
    # a dressed two-level state never has more than half its population excited
    result = search_max_snr_at_fixed_destruction(_two_level_space(), 0.9, 1e-3, 200, 0)
    assert not result.feasible
    assert result.best_point is None and result.best_value is None
    assert result.evaluations == 200


@pytest.mark.parametrize("topology", ["chain", "lambda", "loop"])
def test_random_schemes_are_closed_and_bounded(topology):
    rng = np.random.default_rng(5)
    for _ in range(50):
        s = random_scheme(rng, topology)
        m = analyze_manifold(s)
        assert m.closed
        assert 2 <= len(s.levels) <= 6 and 1 <= len(s.lasers) <= 4
        assert all(-50 <= lv.detuning <= 50 for lv in s.levels)
        assert all(1e-2 <= t.rabi <= 1e2 for t in s.transitions)
