import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.stats import gaussian_kde

from otrepair import Dataset, conditional_fairness, disparate_impact, symmetrized_kld
from otrepair.density import silverman_bandwidth
from otrepair.exceptions import DataValidationError
from otrepair.metrics import PAD_BANDWIDTHS


def _oracle_kld(x0, x1, floor=1e-12):
    """Same quantity from scipy's KDE, integrated adaptively."""
    h0, h1 = silverman_bandwidth(x0), silverman_bandwidth(x1)
    k0 = gaussian_kde(x0, bw_method=h0 / np.std(x0, ddof=1))
    k1 = gaussian_kde(x1, bw_method=h1 / np.std(x1, ddof=1))
    pad = PAD_BANDWIDTHS * max(h0, h1)
    lo, hi = min(x0.min(), x1.min()) - pad, max(x0.max(), x1.max()) + pad

    def integrand(z):
        f0, f1 = max(k0(z)[0], floor), max(k1(z)[0], floor)
        return (f0 - f1) * np.log(f0 / f1)

    breaks = np.linspace(lo, hi, 41)
    return 0.5 * sum(quad(integrand, a, b, limit=200)[0] for a, b in zip(breaks, breaks[1:]))


def test_kld_matches_quadrature_oracle():
    rng = np.random.default_rng(0)
    x0, x1 = rng.normal(-1, 1, 5000), rng.normal(0, 1, 5000)
    ours = symmetrized_kld(x0, x1)
    assert ours == pytest.approx(_oracle_kld(x0, x1), rel=0.02)
    # ten-fold grid refinement changes little
    assert ours == pytest.approx(symmetrized_kld(x0, x1, eval_grid_size=10240), rel=0.02)


def test_kld_close_to_analytic_gaussians():
    # unit-variance normals one apart: 0.5 * (0.5 + 0.5)
    rng = np.random.default_rng(1)
    e = symmetrized_kld(rng.normal(0, 1, 20000), rng.normal(1, 1, 20000))
    assert e == pytest.approx(0.5, rel=0.1)


def test_kld_identical_samples_is_zero():
    x = np.random.default_rng(2).normal(size=300)
    assert symmetrized_kld(x, x) == 0.0


def test_kld_rejects_degenerate():
    with pytest.raises(DataValidationError):
        symmetrized_kld([1.0, 1.0], [0.0, 2.0])
    with pytest.raises(DataValidationError):
        symmetrized_kld([0.0, 1.0], [0.0, 2.0], eval_grid_size=1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=40).filter(lambda v: np.ptp(v) > 0.1),
       st.lists(st.floats(-50, 50), min_size=3, max_size=40).filter(lambda v: np.ptp(v) > 0.1))
def test_kld_nonnegative_and_symmetric(a, b):
    e_ab = symmetrized_kld(a, b, eval_grid_size=256)
    e_ba = symmetrized_kld(b, a, eval_grid_size=256)
    assert e_ab >= 0
    assert e_ab == pytest.approx(e_ba, rel=1e-12, abs=1e-15)


def test_conditional_fairness_weights_and_report(small_data):
    rep = conditional_fairness(small_data, eval_grid_size=256)
    assert rep.E.shape == (2, 2)
    n1 = np.count_nonzero(small_data.u == 1)
    assert rep.weights.tolist() == [1 - n1 / small_data.n, n1 / small_data.n]
    expected = rep.weights @ rep.E
    assert np.allclose(rep.E_k, expected)
    assert rep.aggregate == pytest.approx(expected.sum())
    d = rep.to_dict()
    assert set(d["E_k"]) == {"x0", "x1"}
    assert sum(d["counts"].values()) == small_data.n


def test_conditional_fairness_undefined_group(caplog):
    rng = np.random.default_rng(3)
    X = np.r_[rng.normal(size=40), [1.0, 1.0, 2.0, 3.0]][:, None]
    s = np.r_[np.repeat([0, 1], 20), [0, 0, 1, 1]]
    u = np.r_[np.zeros(40), np.ones(4)]
    with caplog.at_level(logging.WARNING, logger="otrepair"):
        rep = conditional_fairness(Dataset(X, s, u), eval_grid_size=128)
    assert np.isnan(rep.E[1, 0])
    assert rep.E_k[0] == pytest.approx(rep.E[0, 0])
    assert rep.to_dict()["E_uk"][1][0] is None
    assert "undefined" in caplog.text


def test_repair_lowers_dependence(small_data):
    from otrepair import design_repair_model, repair_dataset
    before = conditional_fairness(small_data, 256).E_k
    after = conditional_fairness(
        repair_dataset(small_data, design_repair_model(small_data), 0), 256).E_k
    assert np.all(after < before / 5)


def test_disparate_impact():
    data = Dataset(np.zeros((8, 1)), [0, 0, 1, 1, 0, 0, 1, 1], [0, 0, 0, 0, 1, 1, 1, 1])
    preds = [1, 0, 1, 1, 1, 1, 1, 1]
    di = disparate_impact(data, preds)
    assert di[0].value == pytest.approx(0.5) and di[0].fair is False
    assert di[1].value == pytest.approx(1.0) and di[1].fair is True
    undefined = disparate_impact(data, [1, 0, 0, 0, 1, 1, 1, 1])[0]
    assert undefined.value is None and undefined.fair is None
    with pytest.raises(DataValidationError):
        disparate_impact(data, [2] * 8)
    with pytest.raises(DataValidationError):
        disparate_impact(data, [1] * 7)
