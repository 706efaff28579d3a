import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hieropinion.timeseries import CSV_HEADER, TimeSeries, ensemble_mean


def make_series(rng, n_t=4, n_l=3, weights=True):
    ts = TimeSeries.empty_like(np.arange(n_t) * 0.1, np.linspace(0, 1, n_l))
    for name in ("mean_ns", "var_ns", "support_ns", "mean_all"):
        setattr(ts, name, rng.uniform(-1, 1, (n_t, n_l)))
    if weights:
        ts.weights = rng.uniform(1, 5, n_l)
    return ts


def assert_same(a: TimeSeries, b: TimeSeries):
    for name in ("times", "h", "mean_ns", "var_ns", "support_ns", "mean_all"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_csv_header_and_row_count():
    ts = make_series(np.random.default_rng(0))
    lines = ts.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) == "t,level,h,mean_ns,var_ns,support_ns,mean_all"
    assert len(lines) == 1 + 4 * 3


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=100, deadline=None)
@given(
    hnp.arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 4)), elements=finite),
)
def test_csv_round_trip_is_bit_exact(values):
    n_t, n_l = values.shape
    ts = TimeSeries.empty_like(np.arange(n_t) / 3.0, np.arange(n_l) / 7.0)
    ts.mean_ns = values
    ts.var_ns = values * 0.5
    ts.support_ns = -values
    ts.mean_all = values / 3.0
    assert_same(TimeSeries.from_csv(ts.to_csv()), ts)


def test_csv_round_trip_with_nan():
    ts = make_series(np.random.default_rng(1))
    ts.mean_ns[2, 1] = np.nan
    back = TimeSeries.from_csv(ts.to_csv())
    assert np.isnan(back.mean_ns[2, 1])
    np.testing.assert_array_equal(np.nan_to_num(back.mean_ns), np.nan_to_num(ts.mean_ns))


def test_csv_rejects_foreign_header():
    with pytest.raises(ValueError):
        TimeSeries.from_csv("a,b,c\n1,2,3\n")


def test_json_round_trip_keeps_weights_meta_and_nan():
    ts = make_series(np.random.default_rng(2))
    ts.var_ns[0, 0] = np.nan
    ts.meta = {"seed": 3}
    doc = json.loads(ts.to_json())
    assert doc["levels"][0]["var_ns"][0] is None
    back = TimeSeries.from_json(ts.to_json())
    np.testing.assert_array_equal(back.weights, ts.weights)
    assert back.meta == {"seed": 3}
    np.testing.assert_array_equal(np.isnan(back.var_ns), np.isnan(ts.var_ns))
    np.testing.assert_array_equal(back.mean_ns, ts.mean_ns)


def test_dumps_dispatch():
    ts = make_series(np.random.default_rng(3))
    assert ts.dumps("csv") == ts.to_csv()
    assert ts.dumps("json") == ts.to_json()
    with pytest.raises(ValueError):
        ts.dumps("xml")


def test_population_mean_uses_weights():
    ts = make_series(np.random.default_rng(4), n_t=1, n_l=2)
    ts.mean_all[:] = [[-1.0, 1.0]]
    ts.weights = np.array([1.0, 3.0])
    assert ts.population_mean()[0] == pytest.approx(0.5)
    ts.weights = None
    with pytest.raises(ValueError):
        ts.population_mean()


def test_ensemble_mean_order_independent_and_correct():
    rng = np.random.default_rng(5)
    runs = [make_series(rng) for _ in range(5)]
    keys = [4, 0, 3, 1, 2]
    a = ensemble_mean(runs, keys)
    perm = [2, 0, 4, 1, 3]
    b = ensemble_mean([runs[k] for k in perm], [keys[k] for k in perm])
    assert_same(a, b)
    np.testing.assert_allclose(a.mean_ns, np.mean([r.mean_ns for r in runs], axis=0), atol=1e-15)


def test_ensemble_mean_requires_common_grid():
    rng = np.random.default_rng(6)
    with pytest.raises(ValueError):
        ensemble_mean([make_series(rng, n_t=3), make_series(rng, n_t=4)])
    with pytest.raises(ValueError):
        ensemble_mean([])
