import logging

import numpy as np
import pytest
from scipy.stats import ks_2samp

from otrepair import Dataset, RepairRng, design_repair_model, repair_dataset, repair_value
from otrepair.exceptions import (DataValidationError, DegenerateRangeError, EmptyCellError,
                                 SchemaMismatchError)
from otrepair.model import CELLS
from otrepair.repair import (RepairReport, _RowSampler, geometric_repair, resolve_n_states)
from otrepair.transport import TransportPlan

from conftest import make_dataset


@pytest.fixture(scope="module")
def model():
    return design_repair_model(make_dataset(n=600, seed=3), n_states=30)


def test_design_invariants(model):
    model.check_invariants(1e-9)
    assert len(model.plans) == 8
    assert model.n_states.tolist() == [[30, 30], [30, 30]]
    for (u, s, k), plan in model.plans.items():
        assert plan.is_staircase()
        assert plan.shape == (30, 30)


def test_barycenter_mean_is_midpoint(model):
    for u in (0, 1):
        for k in range(model.d):
            m0 = model.source_pmfs[(u, 0, k)].mean()
            m1 = model.source_pmfs[(u, 1, k)].mean()
            assert model.barycenters[(u, k)].mean() == pytest.approx(0.5 * (m0 + m1), abs=1e-9)


def test_design_single_record_cells(caplog):
    ds = Dataset([[0.0], [1.0], [2.0], [4.0]], [0, 1, 0, 1], [0, 0, 1, 1])
    with caplog.at_level(logging.WARNING, logger="otrepair"):
        m = design_repair_model(ds, n_states=8)
    assert "single record" in caplog.text
    m.check_invariants(1e-9)


def test_design_rejects_empty_cell_and_constant_slice():
    ds = Dataset([[0.0], [1.0], [2.0]], [0, 1, 0], [0, 0, 1])
    with pytest.raises(EmptyCellError):
        design_repair_model(ds)
    ds = Dataset([[0.0], [1.0], [2.0], [2.0]], [0, 1, 0, 1], [0, 0, 1, 1])
    with pytest.raises(DegenerateRangeError, match="u=1, k=0"):
        design_repair_model(ds)


def test_design_bad_t(small_data):
    with pytest.raises(DataValidationError):
        design_repair_model(small_data, t=1.5)


def test_resolve_n_states():
    assert resolve_n_states(5, 2).tolist() == [[5, 5], [5, 5]]
    assert resolve_n_states([[3, 4], [5, 6]], 2).tolist() == [[3, 4], [5, 6]]
    mapping = {(0, 0): 3, (1, 0): 9}
    assert resolve_n_states(mapping, 1).tolist() == [[3], [9]]
    with pytest.raises(DataValidationError):
        resolve_n_states({(0, 0): 3}, 1)
    with pytest.raises(DataValidationError):
        resolve_n_states(1, 1)
    with pytest.raises(DataValidationError):
        resolve_n_states(2.5, 1)


def test_per_stratum_support_sizes(small_data):
    m = design_repair_model(small_data, [[10, 20], [30, 40]])
    assert m.n_states.tolist() == [[10, 20], [30, 40]]
    m.check_invariants()


def test_repair_preserves_labels_and_order(model, archive_data):
    out = repair_dataset(archive_data, model, seed=11)
    assert out.n == archive_data.n
    assert np.array_equal(out.s, archive_data.s) and np.array_equal(out.u, archive_data.u)
    for u in (0, 1):
        for k in range(model.d):
            states = model.supports[(u, k)].states
            assert np.all(np.isin(out.slice(u, k=k), states))


def test_repair_deterministic_and_batch_independent(model, archive_data):
    a = repair_dataset(archive_data, model, seed=5)
    b = repair_dataset(archive_data, model, seed=5)
    assert np.array_equal(a.X, b.X)
    parts = []
    for start in range(0, archive_data.n, 333):
        idx = np.arange(start, min(start + 333, archive_data.n))
        parts.append(repair_dataset(archive_data.subset(idx), model, 5, offset=start).X)
    assert np.array_equal(np.vstack(parts), a.X)
    c = repair_dataset(archive_data, model, seed=6)
    assert not np.array_equal(a.X, c.X)


def test_repair_value_matches_dataset(model, archive_data):
    out = repair_dataset(archive_data, model, seed=9)
    rng = RepairRng(9)
    for i in (0, 17, 1999):
        x, s, u = archive_data.X[i], archive_data.s[i], archive_data.u[i]
        for k in range(model.d):
            assert repair_value(x[k], u, s, k, model, rng, index=i) == out.X[i, k]


def test_top_state_maps_through_its_row(model):
    support = model.supports[(0, 0)]
    plan = model.plans[(0, 0, 0)].mass
    assert plan[-1].sum() >= 1e-12
    live_cols = np.flatnonzero(plan[-1] > 0)
    rng = RepairRng(0)
    vals = {repair_value(support.hi, 0, 0, 0, model, rng, index=i) for i in range(200)}
    assert vals <= set(support.states[live_cols])


def test_repair_law_matches_column_marginal(model):
    # inputs drawn from the source pmf land on grid states (tau = 0), so the
    # outputs follow the plan's column marginal
    u, s, k = 1, 0, 0
    src = model.source_pmfs[(u, s, k)]
    n = 20000
    x = np.random.default_rng(0).choice(src.states, size=n, p=src.mass)
    data = Dataset(np.column_stack([x, np.zeros(n)]), np.full(n, s), np.full(n, u))
    out = repair_dataset(data, model, seed=1).X[:, k]
    hist = np.array([np.count_nonzero(out == z) for z in src.states]) / n
    target = model.plans[(u, s, k)].col_marginal()
    assert 0.5 * np.abs(hist - target).sum() <= 0.05


def test_clamping_is_reported(model):
    lo = model.supports[(0, 0)].lo
    data = Dataset([[lo - 10.0, 0.0], [lo - 20.0, 0.0]], [0, 0], [0, 0])
    report = RepairReport()
    out = repair_dataset(data, model, seed=0, report=report)
    assert report.n_records == 2
    assert report.clamped == {(0, 0, 0): 2}
    assert report.to_dict()["clamped_total"] == 2
    assert np.all(np.isfinite(out.X))


def test_schema_mismatch(model):
    with pytest.raises(SchemaMismatchError):
        repair_dataset(Dataset([[0.0]], [0], [0]), model, 0)
    with pytest.raises(SchemaMismatchError):
        repair_dataset(Dataset([[0.0, 1.0]], [0], [0], feature_names=("a", "b")), model, 0)


def test_repair_value_rejects_nan(model):
    with pytest.raises(DataValidationError):
        repair_value(float("nan"), 0, 0, 0, model, RepairRng(0))


def test_empty_dataset(model):
    out = repair_dataset(Dataset(np.empty((0, 2)), [], []), model, 0)
    assert out.n == 0


def test_zero_rows_redirect_to_nearest_live_row():
    states = np.arange(5.0)
    mass = np.zeros((5, 5))
    mass[1, 2] = 0.5
    mass[3, 4] = 0.5
    sampler = _RowSampler.from_plan(TransportPlan.from_dense(states, states, mass))
    # row 2 is equidistant from rows 1 and 3: the lower index wins
    assert sampler.row_of.tolist() == [1, 1, 1, 3, 3]


def test_identical_marginals_fixed_point():
    rng = np.random.default_rng(7)
    n = 1000
    base = rng.normal(size=n)
    ds = Dataset(np.concatenate([base, base])[:, None], np.repeat([0, 1], n),
                 np.tile(rng.integers(0, 2, n), 2))
    m = design_repair_model(ds, n_states=50)
    for (u, s, k), plan in m.plans.items():
        assert np.allclose(plan.mass, np.diag(np.diag(plan.mass)), atol=1e-12)
    fresh = rng.normal(size=10000)
    data = Dataset(fresh[:, None], np.zeros(10000), np.zeros(10000))
    out = repair_dataset(data, m, seed=3).X[:, 0]
    assert ks_2samp(np.clip(fresh, m.supports[(0, 0)].lo, m.supports[(0, 0)].hi),
                    out).statistic <= 0.05


def test_geometric_hand_values():
    ds = Dataset([[0.0], [1.0], [3.0]], [0, 1, 1], [0, 0, 0])
    ds = Dataset(np.vstack([ds.X, [[5.0], [6.0]]]), [0, 1, 1, 0, 1], [0, 0, 0, 1, 1])
    out = geometric_repair(ds)
    # u=0: x0=[0], x1=[1, 3] -> 0.5*0 + 0.5*(1+3)/2 = 1.0; 0.5*0 + 0.5*1 = 0.5; 0.5*3 = 1.5
    assert out.X[:3, 0].tolist() == [1.0, 0.5, 1.5]
    assert out.X[3:, 0].tolist() == [5.5, 5.5]


def test_geometric_equalizes_equal_sized_cells():
    rng = np.random.default_rng(1)
    n = 50
    x = np.concatenate([rng.normal(size=n), rng.normal(2, 1, size=n), [0.0, 1.0]])
    ds = Dataset(x[:, None], np.r_[np.repeat([0, 1], n), 0, 1], np.r_[np.zeros(2 * n), 1, 1])
    out = geometric_repair(ds)
    assert np.allclose(np.sort(out.X[:n, 0]), np.sort(out.X[n:2 * n, 0]))


def test_geometric_all_cells_required():
    with pytest.raises(EmptyCellError):
        geometric_repair(Dataset([[0.0], [1.0]], [0, 1], [0, 0]))


def test_model_cells_cover_all(model):
    assert {(u, s) for u, s, _ in model.plans} == set(CELLS)
