import numpy as np
import pytest

import mvtc


def small(**extra):
    cfg = dict(I=8, J=5, K=3, S=24, F=2, seed=1, fractions=[0.6, 0.3, 0.1])
    cfg.update(extra)
    return cfg


def dataset(events, horizon=23):
    return mvtc.ingest(events, I=8, J=5, K=3, horizon=horizon)


def test_ingest_shapes_and_mask():
    data = mvtc.synthesize(**small())
    ds = dataset(data["events"])
    assert (ds.I, ds.J, ds.K, ds.S) == (8, 5, 3, 24)
    assert ds.fully_observed_slabs == 22
    assert ds.updates.shape == (8, 5, 3, 24)
    assert ds.mask[:, :, :, :22].all()
    assert not ds.mask[:, :, 1:, 23].any()
    # Fully reported GDs aggregate to the true totals.
    np.testing.assert_allclose(ds.aggregate()[:, :, :22], data["totals"][:, :, :22], rtol=1e-12)


def test_fit_recovers_noiseless_data():
    data = mvtc.synthesize(**small())
    ds = dataset(data["events"])
    naive = mvtc.score_cells(ds.naive(), data["withheld"])
    f = mvtc.fit(ds, rho=0.0, rho_A=0.0, max_outer_iters=2000)
    est = mvtc.score_cells(f.hybrid, data["withheld"])
    assert est["relative_rmse"] < 1e-4 < naive["relative_rmse"]
    assert min(m.min() for m in (f.A, f.B, f.C, f.D)) >= 0.0
    assert f.diagnostics["iterations"] >= 1
    trace = np.array(f.diagnostics["objective_trace"])
    assert trace[-1] <= trace[0]


def test_fit_is_deterministic_and_takes_a_graph():
    data = mvtc.synthesize(**small(communities=2, noise_scale=0.2))
    ds = dataset(data["events"])
    a = mvtc.fit(ds, data["adjacency"], seed=3, max_outer_iters=50)
    b = mvtc.fit(ds, data["adjacency"], seed=3, max_outer_iters=50)
    assert np.array_equal(a.estimate, b.estimate)


def test_tracker_follows_the_stream():
    data = mvtc.synthesize(**small(), horizon=23)
    ev = data["events"]
    early = {k: v[ev["ld"] <= 20] for k, v in ev.items()}
    tr = mvtc.Tracker(dataset(early, horizon=20), rank=2)
    for ld in (21, 22, 23):
        arriving = {k: v[ev["ld"] == ld] for k, v in ev.items()}
        rep = tr.arrive(arriving, ld)
        assert rep["window"].shape == (8, 5, 2)
        assert rep["first_window_gd"] == ld - 1
    assert tr.arrivals == 3
    assert tr.dataset.S == 24
    est = np.zeros((8, 5, 24))
    est[:, :, 22:] = rep["window"]
    assert mvtc.score_cells(est, data["withheld"])["relative_rmse"] < 0.05


def test_kernels_agree_with_numpy():
    rng = np.random.default_rng(0)
    A, B, C, D = (rng.random((n, 2)) for n in (3, 4, 2, 5))
    X = mvtc.reconstruct(A, B, C, D)
    np.testing.assert_allclose(X, np.einsum("if,jf,kf,sf->ijks", A, B, C, D), rtol=1e-13)
    # Mode-1 unfolding: remaining modes in Kronecker order, the last fastest.
    np.testing.assert_allclose(mvtc.unfold(X, 1), X.reshape(3, -1, order="C"), rtol=1e-13)
    kr = mvtc.khatri_rao([B, C, D])
    np.testing.assert_allclose(mvtc.unfold(X, 1), A @ kr.T, rtol=1e-12)
    np.testing.assert_allclose(mvtc.mttkrp(X, [B, C, D], 1), mvtc.unfold(X, 1) @ kr, rtol=1e-12)
    np.testing.assert_allclose(mvtc.marginalize(X), X.sum(axis=2), rtol=1e-13)


def test_score_matches_definitions():
    r = mvtc.score(np.array([1.0, 2.0, 4.0]), np.array([1.0, 2.0, 3.0]))
    assert r["rmse"] == pytest.approx(np.sqrt(1 / 3))
    assert r["mae"] == pytest.approx(1 / 3)
    assert r["n"] == 3


def test_errors_surface_as_value_errors():
    data = mvtc.synthesize(**small())
    ds = dataset(data["events"])
    with pytest.raises(ValueError):
        mvtc.fit(ds, alpha=1.5)
    with pytest.raises(ValueError, match="alhpa"):
        mvtc.fit(ds, alhpa=0.5)
    bad = dict(data["events"])
    bad["location"] = bad["location"].copy()
    bad["location"][3] = 99
    with pytest.raises(mvtc.IngestError, match="record 4"):
        dataset(bad)
    with pytest.raises(ValueError):
        mvtc.ingest({"location": [0]}, I=1, J=1, K=1, horizon=0)
