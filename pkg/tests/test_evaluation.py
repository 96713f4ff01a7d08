import numpy as np
import pytest

from shelfvib import io
from shelfvib.config import RunConfig
from shelfvib.dataset import FeatureTable
from shelfvib.estimator import fit_linear
from shelfvib.evaluation import (
    GLOBAL,
    LOCAL,
    QUADRATIC,
    ChangeErrors,
    Summary,
    TableSource,
    change_errors,
    data_efficiency_specs,
    dense_ladder,
    evaluate_weight_change,
    results_summary,
    results_table,
    run_ablation_study,
    run_data_efficiency_study,
    run_sensor_study,
)

WEIGHTS = [50.0 * k for k in range(1, 11)]


def synthetic_table(n_loc=3, per_class=28, seed=0, n_sensors=3, noise=2e-3, order=None):
    """Features affine in weight with a location- and sensor-specific direction."""
    rng = np.random.default_rng(seed)
    rows, w, loc, idx = [], [], [], []
    dirs = rng.standard_normal((n_loc, n_sensors, 191))
    base = rng.uniform(1, 2, (n_loc, n_sensors, 191))
    for li in range(n_loc):
        for c in WEIGHTS:
            for k in range(per_class):
                rows.append(base[li] + dirs[li] * c * 1e-3 + noise * rng.standard_normal((n_sensors, 191)))
                w.append(c)
                loc.append(f"L{li + 1}")
                idx.append(k)
    X = np.stack(rows)
    ids = tuple(range(1, n_sensors + 1))
    if order is not None:
        X = X[:, [i - 1 for i in order]]
        ids = tuple(order)
    return FeatureTable(X, ids, np.array(w), np.array(loc, dtype=object), np.array(idx))


def cfg_for(seeds=3):
    cfg = RunConfig()
    cfg.studies.seeds = seeds
    return cfg


def source(table):
    return TableSource(cfg_for(), factory=lambda rep: table)


# -- metrics ------------------------------------------------------------------


def test_change_errors_pairs():
    y = np.array([50.0, 100.0, 100.0, 300.0])
    e = change_errors(y, y, ["L1"] * 4)
    # distinct-weight pairs only, each once
    assert e.true.size == 5 and np.all(e.true > 0)
    assert Summary.of(e).mae_g == 0 and Summary.of(e).std_g == 0


def test_constant_bias_cancels():
    rng = np.random.default_rng(0)
    y = np.repeat([50.0, 200.0, 400.0], 5)
    p = y + rng.normal(0, 5, y.size)
    loc = ["A"] * 15
    a = change_errors(p, y, loc).abs_error
    b = change_errors(p + 10.0, y, loc).abs_error
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert Summary.of(change_errors(y + 10.0, y, loc)).mae_g == pytest.approx(0, abs=1e-12)


def test_summary_arithmetic():
    e = ChangeErrors(np.array([110.0, 220.0, 330.0]), np.array([100.0, 200.0, 300.0]), np.array(["L"] * 3, dtype=object))
    s = Summary.of(e)
    assert s.mae_g == pytest.approx(20.0) and s.n_pairs == 3
    assert s.std_g == pytest.approx(np.std([10, 20, 30]))
    assert s.big_change_ok == 1.0


def test_signed_errors_antisymmetric():
    rng = np.random.default_rng(1)
    y = np.repeat([50.0, 150.0, 250.0], 4)
    p = y + rng.normal(0, 3, y.size)
    i, j = np.triu_indices(y.size, 1)
    fwd = (p[j] - p[i]) - (y[j] - y[i])
    bwd = (p[i] - p[j]) - (y[i] - y[j])
    np.testing.assert_allclose(fwd, -bwd)


def test_pairs_stay_within_location():
    y = np.array([50.0, 100.0, 50.0, 100.0])
    e = change_errors(y, y, ["A", "A", "B", "B"])
    assert e.true.size == 2 and set(e.location_ids) == {"A", "B"}


def test_evaluate_weight_change_needs_models():
    t = synthetic_table(n_loc=2)
    X = t.matrix([1])
    m = {"L1": fit_linear(X[t.location_ids == "L1"], t.weights_g[t.location_ids == "L1"], "L1")}
    with pytest.raises(KeyError):
        evaluate_weight_change(m, t)
    one = t.subset(np.flatnonzero(t.location_ids == "L1"))
    assert evaluate_weight_change(m, one).mae_g < 5


# -- studies ------------------------------------------------------------------


def test_ablation_direction_on_location_dependent_data():
    t = synthetic_table()
    res = run_ablation_study(cfg_for(), source(t))
    local = res.cell(LOCAL).summary.mae_g
    assert local < res.cell(GLOBAL).summary.mae_g
    assert res.notes["global_over_local"] > 1
    assert {c.spec.variant for c in res.cells} == {LOCAL, GLOBAL, QUADRATIC}
    assert res.cell(LOCAL).seeds == 3


def test_single_location_global_equals_local():
    t = synthetic_table(n_loc=1)
    res = run_ablation_study(cfg_for(), source(t))
    assert res.cell(LOCAL).summary.mae_g == pytest.approx(res.cell(GLOBAL).summary.mae_g, rel=1e-12)


def test_data_efficiency_grid():
    cfg = cfg_for()
    specs = data_efficiency_specs(cfg)
    span = [s for s in specs if s.study == "span"]
    assert len(span) == 9 and all(s.classes_g[0] == 50.0 for s in span)
    counts = [s.classes_g for s in specs if s.study == "class-count"]
    assert counts == [(50.0, 500.0), (50.0, 300.0, 500.0), (50.0, 200.0, 350.0, 500.0)]
    fr = [s.fraction for s in specs if s.study == "fraction"]
    assert fr[0] == 0.1 and fr[-1] == 1.0
    res = run_data_efficiency_study(cfg, source(synthetic_table()))
    assert len(res.cells) == 9 + 3 + 5
    assert res.cell("50+500").summary.mae_g <= res.cell("50+100").summary.mae_g


def test_sensor_study_cells_and_storage_order_invariance():
    cfg = cfg_for(2)
    a = run_sensor_study(cfg, source(synthetic_table()))
    b = run_sensor_study(cfg, source(synthetic_table(order=(3, 1, 2))))
    assert [c.spec.cell for c in a.cells] == ["1", "2", "3", "1+3", "1+2+3"]
    assert a.cell("1").spec.sensors == (1,)
    for ca, cb in zip(a.cells, b.cells):
        assert ca.summary.mae_g == cb.summary.mae_g


def test_sensor_study_needs_two_sensors():
    with pytest.raises(ValueError):
        run_sensor_study(cfg_for(), source(synthetic_table(n_sensors=1)))


def test_feature_matrix_concatenation_order():
    t = synthetic_table(order=(2, 3, 1))
    M = t.matrix([3, 1])
    assert M.shape[1] == 2 * 191
    np.testing.assert_array_equal(M[:, :191], t.X[:, t.sensor_ids.index(1)])
    with pytest.raises(KeyError):
        t.matrix([4])


def test_dense_ladder():
    ladder = dense_ladder(RunConfig())
    assert ladder == [2997.0, 3058.0, 3119.0, 3180.0, 3241.0, 3302.0]
    assert {2997.0, 3180.0, 3302.0} <= set(ladder)
    diffs = {abs(a - b) for a in ladder for b in ladder} - {0.0}
    assert all(d % 61 == 0 for d in diffs)


def test_results_reproducible_and_serialisable():
    cfg = cfg_for(2)
    t = synthetic_table()
    r1 = [run_ablation_study(cfg, source(t))]
    r2 = [run_ablation_study(cfg, source(t))]
    assert results_table(r1) == results_table(r2)
    text = io.dumps_kv(results_summary(r1))
    assert io.loads_kv(text)["ablation.global_over_local"] == r1[0].notes["global_over_local"]
    header = results_table(r1).splitlines()[0].split("\t")
    assert header[:2] == ["study", "cell"] and "mae_g" in header and "seeds" in header


def test_feature_table_kv_round_trip(tmp_path):
    t = synthetic_table(n_loc=1, per_class=2)
    t = FeatureTable(t.X, t.sensor_ids, t.weights_g, t.location_ids, t.sample_index,
                     tuple(f"s{i}" for i in range(len(t))))
    p = tmp_path / "f.kv"
    io.write_kv(p, t.to_kv())
    back = FeatureTable.from_kv(io.read_kv(p))
    assert back.X.tobytes() == t.X.tobytes() and back.names == t.names
    assert back.find("s3") == 3
    assert back.find("L1/100/1") == int(np.flatnonzero((t.weights_g == 100) & (t.sample_index == 1))[0])
    with pytest.raises(KeyError):
        back.find("L9/1/1")
