import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gdsmat import geometry as geo
from gdsmat.gauges import L1, L2, OWL, GaugeConstants, KSupport, KyFan
from gdsmat.measurements import Ensemble
from gdsmat.spectral import SpectralNorm


def truth(d, p, spectrum, seed=0):
    rng = np.random.default_rng(seed)
    r = len(spectrum)
    u, _ = np.linalg.qr(rng.standard_normal((d, r)))
    v, _ = np.linalg.qr(rng.standard_normal((p, r)))
    return (u * np.asarray(spectrum)) @ v.T


def test_psi_bound_examples():
    for r in range(1, 6):
        assert_allclose(geo.psi_bound(L1(10).constants(), r, 1.0), 4 * math.sqrt(r), rtol=1e-15)
    for r, rho in [(1, 1.0), (2, 1.7), (3, 4.0)]:
        got = geo.psi_bound(KSupport(10, r).constants(), r, rho)
        assert_allclose(got, math.sqrt(2) * (3 + rho), rtol=1e-12)
    c = L2(5).constants()
    assert geo.psi_bound(c, 2, 1.0) == geo.psi_bound(c, 2, math.inf) == 2 + 1
    assert math.isinf(geo.psi_bound(L1(5).constants(), 2, math.inf))
    with pytest.raises(ValueError):
        geo.psi_bound(c, 0, 1.0)


def test_psi_bound_doubling():
    c = GaugeConstants(1.0, 0.0, 1.0, lambda r: math.sqrt(r))
    c2 = GaugeConstants(2.0, 0.0, 1.0, lambda r: 2 * math.sqrt(r))
    assert geo.psi_bound(c2, 3, 2.0) == 2 * geo.psi_bound(c, 3, 2.0)


def test_width_cone_bound_examples():
    assert_allclose(geo.width_cone_bound(10, 10, 1, 1.0), math.sqrt(57))
    assert geo.width_cone_bound(10, 10, 1, math.inf) == 10
    assert geo.width_cone_bound(6, 6, 6, 1.0) == 6
    with pytest.raises(ValueError):
        geo.width_cone_bound(4, 5, 5, 1.0)


def test_width_ball_bound_examples():
    assert_allclose(geo.width_ball_bound(1.0, 10, 10), 2 * math.sqrt(10))
    nu = KSupport(10, 3).constants().nu
    assert_allclose(geo.width_ball_bound(nu, 10, 12), math.sqrt(3) * (math.sqrt(10) + math.sqrt(12)))
    assert_allclose(geo.width_ball_bound(0.25, 4, 9), 2 * geo.width_ball_bound(0.5, 4, 9))
    with pytest.raises(ValueError):
        geo.width_ball_bound(0.0, 3, 3)


def test_alpha_pred_examples():
    assert geo.alpha_pred(1.0, 100, 0.0) == 100
    # xi kappa^2 w / sqrt(n) = 1/2
    assert_allclose(geo.alpha_pred(1.0, 400, 5.0, xi=2.0), 200)
    assert geo.alpha_pred(1.0, 100, 20.0) == 0
    with pytest.raises(ValueError):
        geo.alpha_pred(1.0, 0, 1.0)


def test_error_bound_examples():
    assert geo.error_bound_pred(3.0, 0.0, 10.0) == 0
    assert geo.error_bound_pred(6.0, 2.0, 10.0) == 2 * geo.error_bound_pred(3.0, 2.0, 10.0)
    assert math.isinf(geo.error_bound_pred(3.0, 1.0, 0.0))
    assert math.isinf(geo.error_bound_pred(math.inf, 1.0, 5.0))
    # with alpha ~ n, doubling n shrinks the trace-norm bound by sqrt(2)
    norm = SpectralNorm(L1(8), 8, 8)
    psi = geo.psi_bound(L1(8).constants(), 2, 1.0)
    b1 = geo.error_bound_pred(psi, geo.lambda_theory(norm, 10**6, 0.1), geo.alpha_pred(1, 10**6, 0.0))
    b2 = geo.error_bound_pred(psi, geo.lambda_theory(norm, 2 * 10**6, 0.1), geo.alpha_pred(1, 2 * 10**6, 0.0))
    assert_allclose(b1 / b2, math.sqrt(2))


@pytest.mark.parametrize("gauge_cls", [L1, KSupport], ids=["trace", "ksupport"])
def test_width_cone_mc_below_bound(gauge_cls):
    d, p = 10, 10
    th = truth(d, p, [0.9, 0.4])
    gauge = L1(d) if gauge_cls is L1 else KSupport(d, 2)
    dec = SpectralNorm(gauge, d, p).decompose(th)
    est = geo.width_cone_mc(dec, 2000, 1)
    assert est.value <= geo.width_cone_bound(d, p, 2, dec.rho) + 3 * est.stderr
    with pytest.raises(ValueError):
        geo.width_cone_mc(dec, 50, 1)


def test_width_cone_mc_full_rank():
    th = truth(4, 4, [1.0, 0.8, 0.6, 0.3])
    dec = SpectralNorm(L1(4), 4, 4).decompose(th)
    est = geo.width_cone_mc(dec, 1000, 0)
    assert est.value <= 4 + 3 * est.stderr


def test_width_cone_mc_stderr_scaling():
    dec = SpectralNorm(L1(6), 6, 6).decompose(truth(6, 6, [1.0]))
    a = geo.width_cone_mc(dec, 2000, 3)
    b = geo.width_cone_mc(dec, 4000, 4)
    assert 1.2 < a.stderr / b.stderr < 1.7


def test_cone_distance_matches_grid_search():
    dec = SpectralNorm(KSupport(5, 2), 5, 6).decompose(truth(5, 6, [0.8, 0.6]))
    rng = np.random.default_rng(0)
    g = rng.standard_normal((5, 5, 6))
    got = geo.cone_distance_sq(dec, g)
    gam = np.diag(dec.theta[:2])
    ts = np.linspace(0, 20, 400_001)
    for k in range(5):
        g1 = dec.u.T @ g[k] @ dec.v
        s = np.linalg.svd(dec.u_perp.T @ g[k] @ dec.v_perp, compute_uv=False)
        q = np.sum(g1**2) - 2 * ts * np.sum(g1 * gam) + ts**2 * np.sum(gam**2)
        tail = np.maximum(s[None, :] - ts[:, None] * dec.theta[2:2 + s.size], 0)
        perp = np.sum(g[k] ** 2) - np.sum(g1**2) - np.sum(s**2)
        brute = (q + np.sum(tail**2, axis=1)).min() + perp
        assert got[k] <= brute + 1e-9
        assert got[k] >= brute - 1e-6


def test_projector_dimensions_in_expectation():
    dec = SpectralNorm(L1(6), 6, 8).decompose(truth(6, 8, [1.0, 0.5]))
    rng = np.random.default_rng(1)
    g = rng.standard_normal((4000, 6, 8))
    for proj, dim in zip((dec.p1, dec.p2, dec.p_perp), dec.dims()):
        sq = np.array([np.sum(proj(x) ** 2) for x in g])
        assert abs(sq.mean() - dim) <= 4 * sq.std() / math.sqrt(sq.size)


def test_p2_operator_norm_mean():
    d, p, r = 6, 8, 2
    dec = SpectralNorm(L1(d), d, p).decompose(truth(d, p, [1.0, 0.5]))
    rng = np.random.default_rng(2)
    vals = np.array([np.linalg.norm(dec.p2(rng.standard_normal((d, p))), 2) for _ in range(3000)])
    assert vals.mean() <= math.sqrt(d - r) + math.sqrt(p - r) + 3 * vals.std() / math.sqrt(vals.size)


@pytest.mark.parametrize("gauge", [L1(6), L2(6), KSupport(6, 2), OWL(np.linspace(1, 0.2, 6)), KyFan(6, 2)], ids=repr)
def test_width_ball_mc_below_bound(gauge):
    norm = SpectralNorm(gauge, 6, 7)
    est = geo.width_ball_mc(norm, 2000, 0)
    assert est.value <= geo.width_ball_bound(gauge.constants().nu, 6, 7) + 3 * est.stderr


def test_width_ball_mc_frobenius_jensen():
    est = geo.width_ball_mc(SpectralNorm(L2(5), 5, 5), 2000, 0)
    assert est.value <= 5 + 3 * est.stderr


def test_lambda_rules():
    norm = SpectralNorm(L1(6), 6, 6)
    ens = Ensemble("gaussian", 6, 6)
    assert geo.lambda_rules(norm, ens, 50, 0.0) == {"lambda_theory": 0.0, "lambda_empirical": 0.0}
    lams = geo.lambda_rules(norm, ens, 50, 0.1, c0=2.0, mc_samples=100, seed=3)
    assert_allclose(lams["lambda_theory"], 2.0 * 0.1 * math.sqrt(50) * 2 * math.sqrt(6))
    assert lams["lambda_empirical"] > 0
    assert lams == geo.lambda_rules(norm, ens, 50, 0.1, c0=2.0, mc_samples=100, seed=3)
    with pytest.raises(ValueError):
        geo.lambda_rules(norm, ens, 50, -1.0)


def test_lambda_theory_dominates_with_calibrated_c0():
    cal = geo.default_calibration()
    norm = SpectralNorm(KSupport(10, 2), 10, 10)
    ens = Ensemble("gaussian", 10, 10)
    lams = geo.lambda_rules(norm, ens, 300, 0.1, c0=cal["c0"], mc_samples=200, seed=5)
    assert lams["lambda_theory"] >= lams["lambda_empirical"]


def test_geometry_report_json_round_trip(tmp_path):
    norm = SpectralNorm(KyFan(5, 1), 5, 5)
    th = truth(5, 5, [1.0, 0.5])
    rep = geo.geometry_report(norm, th, 80, Ensemble("gaussian", 5, 5), 0.1, samples=200,
                              lambda_samples=50, xi=1.0, c0=1.5, seed=2)
    assert math.isinf(rep.rho) and math.isinf(rep.psi_bound) and math.isinf(rep.error_bound_pred)
    text = rep.to_json(tmp_path / "g.json")
    data = json.loads(text)
    assert data["psi_bound"] == "inf"
    assert data["config"]["xi"] == 1.0 and data["config"]["c0"] == 1.5
    assert data["config"]["samples"] == 200 and data["config"]["seed"] == 2
    back = geo.GeometryReport.from_dict(data)
    assert math.isinf(back.psi_bound)
    assert back.width_cone_mc == rep.width_cone_mc


def test_geometry_report_invariants():
    norm = SpectralNorm(L1(8), 8, 8)
    rep = geo.geometry_report(norm, truth(8, 8, [1.0]), 200, Ensemble("gaussian", 8, 8), 0.1,
                              samples=1000, lambda_samples=50)
    assert rep.width_cone_mc.value <= rep.width_cone_bound + 3 * rep.width_cone_mc.stderr
    assert rep.width_ball_mc.value <= rep.width_ball_bound + 3 * rep.width_ball_mc.stderr
    assert rep.psi_bound == 4
    assert rep.rank == 1
