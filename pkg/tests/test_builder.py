import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polylift.algebra import IndexSet, MatrixBouquet, MatrixPolynomial, bouquet_of_graph
from polylift.builder import (
    NetParams,
    PipelineConfig,
    certify_base_lift,
    certify_signing,
    epsilon_net,
    expected_signed_trace,
    explicit_good_lift,
    explicit_polynomial_lift,
    nearest_net_point,
    net_size,
    nontrivial_adjacency_spectrum,
    signed_trace_bruteforce,
    signing_seed,
)
from polylift.catalog import biregular_spectrum
from polylift.errors import ConstructionFailed, SizeGuardError, ValidationError
from polylift.graphview import bicycle_free_radius, lift_graph
from polylift.lifting import (
    SeedConfig,
    Signing,
    lift_from_perms,
    random_lift,
    seeded_lift_family,
    small_bias_bits,
    small_bias_seed_space,
)
from polylift.limitspec import rho_B_infinity
from polylift.spectra import (
    SpectrumSet,
    nonbacktracking_matrix,
    power_norm_root,
    restrict_nontrivial,
)

from conftest import random_bouquet
from oracles import trace_oracle

I3 = IndexSet(3, 0)


# nets


def test_net_scalar_grid():
    params = NetParams(R=2, grid_delta=0.5)
    assert not params.fine
    net = epsilon_net(IndexSet(1, 0), 1, params)
    vals = sorted(float(K.a(1)[0, 0].real) for K in net)
    # |g| <= 2 and |1/g| <= 4 keeps every multiple of 1/2 in [-2, 2]
    assert vals == [-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2]


def test_net_fine_flag():
    assert NetParams(R=1, grid_delta=0.25).fine
    assert not NetParams(R=1, grid_delta=0.5).fine


def test_default_net_size():
    assert net_size(I3, 1, NetParams()) == 343
    assert len(epsilon_net(I3, 1, NetParams())) == 343


@pytest.mark.parametrize("iset,r,params", [(IndexSet(1, 1), 1, NetParams(1, grid_delta=0.25)), (IndexSet(1, 0), 2, NetParams(0.9, grid_delta=0.5))])
def test_net_bounded(iset, r, params):
    for K in epsilon_net(iset, r, params):
        assert K.to_polynomial().is_self_adjoint()
        for i in iset.colors:
            a = K.a(i)
            assert np.linalg.norm(a) <= params.R + 1e-9
            if np.linalg.svd(a, compute_uv=False)[-1] > 1e-12:
                assert np.linalg.norm(np.linalg.inv(a)) <= 2 * params.R + 1e-9


@pytest.mark.parametrize("iset", [IndexSet(1, 1), IndexSet(2, 0)])
def test_net_covers_bounded_bouquets(iset):
    params = NetParams(R=2, grid_delta=0.2)
    assert params.fine
    keys = {tuple(np.round([K.a(i)[0, 0] for i in iset.colors], 9)) for K in epsilon_net(iset, 1, params)}
    rng = np.random.default_rng(7)
    for _ in range(100):
        # |a| and |1/a| both at most R
        coeffs = {}
        for c in iset.undirected_colors():
            z = rng.uniform(1 / params.R, params.R)
            z = z * rng.choice([-1, 1]) if iset.is_matching(c) else z * np.exp(2j * np.pi * rng.uniform())
            coeffs[c], coeffs[iset.star(c)] = z, np.conj(z)
        K = MatrixBouquet(iset, [np.array([[coeffs[i]]]) for i in iset.colors])
        g = nearest_net_point(K, params)
        for i in iset.colors:
            assert np.linalg.norm(g.a(i) - K.a(i)) <= params.grid_delta + 1e-9
        assert tuple(np.round([g.a(i)[0, 0] for i in iset.colors], 9)) in keys


@pytest.mark.parametrize("iset", [IndexSet(1, 0), IndexSet(0, 1)])
def test_nearest_point_within_delta_matrix(iset, rng):
    params = NetParams(R=1.5, grid_delta=0.3)
    for _ in range(100):
        K = random_bouquet(iset, 2, rng)
        g = nearest_net_point(K, params)
        for i in iset.colors:
            assert np.linalg.norm(g.a(i) - K.a(i)) <= params.grid_delta + 1e-9
        if iset.is_matching(1):
            assert np.allclose(g.a(1), g.a(1).conj().T)


def test_net_size_guard():
    with pytest.raises(SizeGuardError):
        epsilon_net(IndexSet(3, 0), 2, NetParams(grid_delta=0.25, max_size=1000))


def test_net_params_validation():
    with pytest.raises(ValidationError):
        NetParams(R=0)
    with pytest.raises(ValidationError):
        NetParams(grid_delta=-1)


# configs


def test_config_defaults():
    cfg = PipelineConfig(N=64)
    assert cfg.base_size == 32
    assert cfg.doublings == 1
    assert cfg.output_size == 64
    assert cfg.certificate_power == math.ceil(32 * math.log(64))
    assert cfg.lambda_target == 2
    assert cfg.trace_length >= cfg.lambda_target


def test_config_validation():
    with pytest.raises(ValidationError):
        PipelineConfig(eps=0)
    with pytest.raises(ValidationError):
        PipelineConfig(lam=3, ell=2)
    with pytest.raises(ValidationError):
        PipelineConfig(n0=5)
    with pytest.raises(ValidationError):
        PipelineConfig(d=0, e=0)


# certificates


def test_tiny_lift_fails():
    lift = random_lift(I3, 4, 0)
    cert = certify_base_lift(lift, epsilon_net(I3, 1, NetParams()), PipelineConfig(N=4, n0=4, lam=2))
    assert not cert.passed
    assert not cert.structure_passed


def test_random_lift_n200_passes():
    net = epsilon_net(I3, 1, NetParams())
    sub = [net[k] for k in np.random.default_rng(0).choice(len(net), 8, replace=False)]
    cfg = PipelineConfig(N=200, n0=200, lam=2)
    cert = certify_base_lift(random_lift(I3, 200, 0), sub, cfg)
    assert cert.passed
    assert all(c.norm_root <= c.bound for c in cert.checks)
    assert cert.to_json()["passed"] is True


def _base_and_net():
    cfg = PipelineConfig()
    lift, cert = explicit_good_lift(None, cfg)
    base = seeded_lift_family(I3, cfg.base_size, cfg.t, cert.stages[0].seed)
    return cfg, base, epsilon_net(I3, 1, NetParams())


@pytest.fixture(scope="module")
def base_and_net():
    return _base_and_net()


def test_all_plus_signing_fails(base_and_net):
    cfg, base, net = base_and_net
    # chi = +1 keeps the trivial eigenvalue d - 1 = 2 in the signed operator
    assert not certify_signing(base, Signing.ones(base), net, cfg)


def test_signing_certificate_deterministic_and_sometimes_passes(base_and_net):
    cfg, base, net = base_and_net
    space = small_bias_seed_space(base.total_edges(), cfg.bias_delta)
    results = []
    for k in range(6):
        s = signing_seed(1, k, space)
        chi = Signing.from_bits(base, small_bias_bits(base.total_edges(), SeedConfig(s, cfg.t, cfg.bias_delta)))
        results.append(certify_signing(base, chi, net, cfg))
        assert certify_signing(base, chi, net, cfg) == results[-1]
    assert any(results)


def test_signing_seed_deterministic():
    assert signing_seed(1, 3, 1000) == signing_seed(1, 3, 1000)
    assert 0 <= signing_seed(2, 5, 17) < 17


# pipeline


@pytest.fixture(scope="module")
def pipeline():
    cfg = PipelineConfig(N=64)
    return (cfg, *explicit_good_lift(None, cfg))


def test_pipeline_passes(pipeline):
    cfg, lift, cert = pipeline
    assert cert.passed
    assert 64 <= lift.n <= 96
    assert len(cert.stages) == cfg.doublings + 1
    assert lift.n == cert.n


def test_pipeline_deterministic(pipeline):
    cfg, lift, cert = pipeline
    lift2, cert2 = explicit_good_lift(None, cfg)
    assert all(np.array_equal(a, b) for a, b in zip(lift.sigmas, lift2.sigmas))
    assert cert.to_json() == cert2.to_json()


def test_pipeline_chaining_matches_recompute(pipeline):
    cfg, lift, cert = pipeline
    net = epsilon_net(I3, 1, cfg.net_params)
    for k in (0, 100, 342):
        K = net[k]
        B = restrict_nontrivial(nonbacktracking_matrix(lift, K), lift.n, I3.size)
        root = power_norm_root(B, cfg.certificate_power)
        assert root == pytest.approx(cert.checks[k].norm_root, rel=1e-8, abs=1e-10)
        assert root <= rho_B_infinity(K) + cfg.eps / 3


def test_pipeline_keeps_bicycle_radius(pipeline):
    cfg, lift, cert = pipeline
    radius = bicycle_free_radius(lift_graph(lift), cfg.lambda_target)
    assert radius >= cert.stages[0].bicycle_free_radius >= cfg.lambda_target


def test_pipeline_budget_exhausted():
    cfg = PipelineConfig(N=64, eps=1e-4, stage0_budget=2)
    with pytest.raises(ConstructionFailed) as info:
        explicit_good_lift(None, cfg)
    assert info.value.diagnostics["stages"][0]["tried"] == 2


def test_polynomial_lift_three_matchings():
    p = MatrixPolynomial.from_terms(I3, 1, [((1,), 1.0), ((2,), 1.0), ((3,), 1.0)])
    ref = SpectrumSet.union([(-2 * math.sqrt(2), 2 * math.sqrt(2))])
    lift, report = explicit_polynomial_lift((1, 1, 1.0), 0.3, 64, PipelineConfig(), [p], [ref])
    assert report["certificate"]["passed"]
    assert report["tests"][0]["hausdorff"] <= 0.3
    assert len(nontrivial_adjacency_spectrum(lift, p)) == lift.n - 1


@pytest.mark.slow
def test_polynomial_lift_k23():
    K = bouquet_of_graph(nx.complete_bipartite_graph(2, 3))
    cfg = PipelineConfig(N=64, d=0, e=6, r=5, eps=0.3, check_structure=False)
    lift, report = explicit_polynomial_lift((5, 1, 1.0), 0.3, 64, cfg, [K.to_polynomial()], [biregular_spectrum(2, 3)], net=[K])
    assert report["n"] == 64
    assert report["certificate"]["passed"]
    assert report["tests"][0]["within_eps"]


# signed traces


TRACE_CASES = [(IndexSet(2, 0), 2), (IndexSet(2, 0), 4), (IndexSet(1, 1), 2), (IndexSet(0, 1), 3), (IndexSet(0, 1), 4), (IndexSet(3, 0), 2)]


@pytest.mark.parametrize("iset,n", TRACE_CASES)
@pytest.mark.parametrize("ell", [1, 2])
def test_trace_matches_oracle(iset, n, ell):
    rng = np.random.default_rng(n * 10 + ell)
    lift = random_lift(iset, n, int(rng.integers(1000)))
    K = random_bouquet(iset, 1 + (n == 2), rng)
    want = trace_oracle(lift, K, ell)
    assert expected_signed_trace(lift, K, ell) == pytest.approx(want, rel=1e-9)
    assert signed_trace_bruteforce(lift, K, ell) == pytest.approx(want, rel=1e-9)


def test_trace_single_matching_is_zero():
    # with one color every walk must backtrack after the first step
    lift = random_lift(IndexSet(1, 0), 4, 0)
    K = MatrixBouquet(IndexSet(1, 0), [np.eye(1)])
    assert expected_signed_trace(lift, K, 2) == 0.0


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.floats(0.2, 3.0), st.integers(1, 2))
def test_trace_homogeneous(seed, c, ell):
    rng = np.random.default_rng(seed)
    lift = random_lift(IndexSet(1, 1), 4, seed)
    K = random_bouquet(IndexSet(1, 1), 1, rng)
    scaled = MatrixBouquet(K.index_set, [c * K.a(i) for i in K.index_set.colors])
    assert expected_signed_trace(lift, scaled, ell) == pytest.approx(c ** (2 * ell) * expected_signed_trace(lift, K, ell), rel=1e-9)


def test_trace_size_guard():
    lift = random_lift(IndexSet(3, 0), 100, 0)
    K = MatrixBouquet(IndexSet(3, 0), [np.eye(1)] * 3)
    with pytest.raises(SizeGuardError):
        expected_signed_trace(lift, K, 8)


def test_trace_fixed_perms():
    iset = IndexSet(0, 1)
    lift = lift_from_perms(iset, [np.array([1, 2, 0])])
    K = random_bouquet(iset, 1, np.random.default_rng(3))
    assert expected_signed_trace(lift, K, 2) == pytest.approx(trace_oracle(lift, K, 2), rel=1e-9)
