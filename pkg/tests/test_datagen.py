import numpy as np
import pytest

from otrepair.datagen import (CURVE_COLUMNS, MixtureSpec, SweepSpec, run_monte_carlo,
                              run_replication, run_sweep, sample_mixture)
from otrepair.exceptions import DataValidationError, EmptyCellError
from otrepair.model import CELLS, partition_groups


def test_default_cell_probabilities():
    probs = MixtureSpec().cell_probabilities()
    assert probs == pytest.approx({(0, 0): 0.15, (0, 1): 0.35, (1, 0): 0.05, (1, 1): 0.45})


def test_cell_counts_within_four_sigma():
    spec = MixtureSpec(n_research=5000, n_archive=45000)
    research, archive = sample_mixture(spec, rng=1)
    n = research.n + archive.n
    for key, p in spec.cell_probabilities().items():
        count = partition_groups(research).counts[key] + partition_groups(archive).counts[key]
        assert abs(count - n * p) <= 4 * np.sqrt(n * p * (1 - p))


def test_cell_means():
    spec = MixtureSpec(n_research=2000, n_archive=20000)
    research, _ = sample_mixture(spec, rng=2)
    for (u, s), mean in spec.means.items():
        x = research.slice(u, s)
        assert np.all(np.abs(x.mean(axis=0) - mean) < 5 / np.sqrt(len(x)))


def test_sampling_is_seeded():
    a, _ = sample_mixture(MixtureSpec(), rng=4)
    b, _ = sample_mixture(MixtureSpec(), rng=4)
    assert np.array_equal(a.X, b.X)
    c, _ = sample_mixture(MixtureSpec(seed=4))
    assert np.array_equal(a.X, c.X)


def test_empty_cells():
    with pytest.raises(EmptyCellError, match="zero probability"):
        sample_mixture(MixtureSpec(p_s0_given_u=(0.0, 0.5)))
    tiny = MixtureSpec(n_research=4, n_archive=0)
    with pytest.raises(EmptyCellError):
        for seed in range(50):
            sample_mixture(tiny, rng=seed, on_empty="error")
    research, _ = sample_mixture(tiny, rng=0)
    assert not partition_groups(research).empty_cells()


def test_spec_dict_round_trip():
    spec = MixtureSpec(p_u0=0.4, n_research=50, seed=9)
    back = MixtureSpec.from_dict(spec.to_dict())
    assert back.to_dict() == spec.to_dict()
    with pytest.raises(DataValidationError):
        MixtureSpec(means={(0, 0): [0.0]})
    with pytest.raises(DataValidationError):
        MixtureSpec(covs={key: -np.eye(2) for key in CELLS})
    with pytest.raises(DataValidationError):
        MixtureSpec.from_dict({"means": {"0": [0.0]}})


def test_replication_keys():
    spec = MixtureSpec(n_research=200, n_archive=500)
    rep = run_replication(spec, 20, np.random.SeedSequence(0), eval_grid_size=128)
    assert set(rep) == {"research", "archive", "research_dist", "archive_dist",
                        "composite_dist", "research_geom"}
    assert np.all(rep["research_dist"].E_k < rep["research"].E_k)


def test_monte_carlo_reproducible_and_parallel_safe():
    spec = MixtureSpec(n_research=150, n_archive=300)
    a = run_monte_carlo(spec, 3, n_states=15, eval_grid_size=128)
    b = run_monte_carlo(spec, 3, n_states=15, eval_grid_size=128, n_jobs=2)
    assert a.records.equals(b.records)
    assert len(a.records) == 3 * 5 * 2
    table = a.table()
    assert table.shape == (3, 4)
    assert table.loc["geometric", "archive:x0"] == "-"
    assert a.wide().shape == (3, 10)
    assert set(a.summary().columns) == {"repair", "dataset", "feature", "mean", "sd", "n"}


def test_sweeps():
    mix = MixtureSpec(n_research=120, n_archive=300)
    curve = run_sweep(SweepSpec("nQ", [5, 10], 2, mix), eval_grid_size=128)
    assert list(curve.columns) == CURVE_COLUMNS
    assert curve["value"].tolist() == [5, 10]
    assert curve["replications"].tolist() == [2, 2]
    # the data sample is shared across an n_Q sweep: unrepaired E is constant
    assert curve["archive_unrepaired_sd"].notna().all()
    assert curve["archive_unrepaired_mean"].nunique() == 1
    curve = run_sweep(SweepSpec("n_R", [30, 60], 2, mix, n_states=10), eval_grid_size=128)
    assert curve["variable"].eq("n_R").all()
    with pytest.raises(DataValidationError):
        SweepSpec("x", [1])
    with pytest.raises(DataValidationError):
        SweepSpec("nR", [2])
