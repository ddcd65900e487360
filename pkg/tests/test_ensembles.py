import numpy as np
import pytest

from epinet.ensembles import (
    CommunitySpec,
    ExpectedDegreeSpec,
    PowerLawSpec,
    community_abar_dense,
    community_operator,
    community_quotient,
    community_stats,
    ensemble_from_dict,
    expected_degree_operator,
    expected_degree_stats,
    power_law_degree_blocks,
    power_law_degrees,
    power_law_stats,
    realize_switched_spec,
)
from epinet.netmodel import stationary_stats
from epinet.spectral import lambda_max_dense


def small_community():
    return CommunitySpec(n1=7, n2=5, theta1=0.6, theta2=0.3, phi=0.15)


def test_quotient_matches_dense_eigenvalue():
    spec = small_community()
    stats = community_stats(spec)
    dense = community_abar_dense(spec)
    assert stats.lambda_max == pytest.approx(lambda_max_dense(dense), rel=1e-12)
    # quotient layout
    q = community_quotient(spec)
    assert q[0, 0] == pytest.approx(0.6 * 6)
    assert q[0, 1] == pytest.approx(0.15 * 5)
    assert q[1, 0] == pytest.approx(0.15 * 7)
    assert q[1, 1] == pytest.approx(0.3 * 4)


def test_community_delta_matches_dense():
    spec = small_community()
    stats = community_stats(spec)
    dense = community_abar_dense(spec)
    rows = (dense * (1.0 - dense)).sum(axis=1)
    assert stats.delta_uncertainty == pytest.approx(rows.max(), rel=1e-12)


def test_community_operator_matches_dense():
    spec = small_community()
    dense = community_abar_dense(spec)
    op = community_operator(spec)
    rng = np.random.default_rng(3)
    for _ in range(5):
        v = rng.standard_normal(spec.n)
        assert np.allclose(op.matvec(v), dense @ v, atol=1e-12)


def test_community_frozen_reference_values():
    spec = CommunitySpec(n1=10_000, n2=100_000, theta1=0.5, theta2=0.3, phi=0.1)
    stats = community_stats(spec)
    # frozen from the closed form evaluated independently
    assert stats.lambda_max == pytest.approx(30393.493904092742, rel=1e-12)
    assert stats.delta_uncertainty == pytest.approx(21899.79, rel=1e-12)


def test_community_edge_cases():
    # single-vertex communities: no within-community edges at all
    spec = CommunitySpec(n1=1, n2=1, theta1=0.9, theta2=0.8, phi=0.5)
    stats = community_stats(spec)
    assert stats.lambda_max == pytest.approx(0.5, abs=1e-14)
    with pytest.raises(ValueError):
        CommunitySpec(n1=0, n2=5, theta1=0.5, theta2=0.5, phi=0.5)
    with pytest.raises(ValueError):
        CommunitySpec(n1=2, n2=5, theta1=1.5, theta2=0.5, phi=0.5)


def test_expected_degree_stats_small():
    d = np.array([3.0, 2.0, 1.0])
    stats = expected_degree_stats(ExpectedDegreeSpec(degrees=d))
    assert stats.rho == pytest.approx(1.0 / 6.0)
    assert stats.d_tilde == pytest.approx(14.0 / 6.0)
    abar = np.outer(d, d) / 6.0
    np.fill_diagonal(abar, 0.0)
    assert stats.delta_uncertainty == pytest.approx(
        (abar * (1 - abar)).sum(axis=1).max(), rel=1e-12
    )
    assert stats.power_converged
    assert stats.lambda_power == pytest.approx(lambda_max_dense(abar), rel=1e-6)
    # rank-one bound sandwiches the true eigenvalue
    assert stats.lambda_power <= stats.d_tilde + 1e-9
    assert stats.lambda_power >= stats.d_tilde - stats.rho * 9.0 - 1e-9


def test_expected_degree_operator_matches_dense():
    rng = np.random.default_rng(11)
    d = rng.uniform(0.5, 3.0, size=30)
    op = expected_degree_operator(d)
    abar = np.outer(d, d) / d.sum()
    np.fill_diagonal(abar, 0.0)
    for _ in range(5):
        v = rng.standard_normal(30)
        assert np.allclose(op.matvec(v), abar @ v, atol=1e-12)


def test_power_law_calibration_targets():
    spec = PowerLawSpec(n=200_000, exponent=2.5, max_degree=2e4, avg_degree=10.0)
    d = power_law_degrees(spec)
    assert d[0] == pytest.approx(spec.max_degree, rel=1e-12)
    assert np.all(np.diff(d) <= 0)
    assert d.min() > 0
    # the offset construction tracks the average-degree target closely when
    # max_degree >> avg_degree
    assert d.mean() == pytest.approx(spec.avg_degree, rel=0.02)


def test_power_law_blocks_match_materialized():
    spec = PowerLawSpec(n=10_450, exponent=2.2, max_degree=500.0, avg_degree=3.0)
    direct = power_law_degrees(spec)
    blocks = list(power_law_degree_blocks(spec, block_size=999))
    assert sum(b.size for b in blocks) == spec.n
    assert np.array_equal(np.concatenate(blocks), direct)


def test_power_law_frozen_coefficients():
    spec = PowerLawSpec(n=10_000_000, exponent=2.2, max_degree=5e5, avg_degree=1e3)
    # frozen from independent evaluation of the closed forms
    assert spec.coefficient == pytest.approx(113548678.17577, rel=1e-9)
    assert spec.offset == pytest.approx(672.1320, rel=1e-6)


def test_power_law_validation():
    with pytest.raises(ValueError, match="exponent"):
        PowerLawSpec(n=100, exponent=2.0, max_degree=10.0, avg_degree=1.0)
    with pytest.raises(ValueError, match="avg_degree"):
        PowerLawSpec(n=100, exponent=2.5, max_degree=1.0, avg_degree=5.0)
    with pytest.raises(ValueError, match="n >= 2"):
        PowerLawSpec(n=1, exponent=2.5, max_degree=10.0, avg_degree=1.0)


def test_power_law_stats_consistency():
    spec = PowerLawSpec(n=5_000, exponent=2.4, max_degree=200.0, avg_degree=4.0)
    stats = power_law_stats(spec)
    direct = expected_degree_stats(power_law_degrees(spec))
    assert stats.d_tilde == direct.d_tilde
    assert stats.delta_uncertainty == direct.delta_uncertainty
    assert stats.max_pair_prob == direct.max_pair_prob


def test_realize_switched_spec_round_trip():
    rng = np.random.default_rng(2)
    n = 6
    abar = np.triu(rng.uniform(0.05, 0.95, size=(n, n)), 1)
    abar[0, 1] = 1.0  # always-on edge: q_rate = 0 must be accepted
    abar[2, 3] = 0.0  # absent edge: no chain at all
    abar = abar + abar.T
    spec = realize_switched_spec(abar, kappa=2.5)
    pairs = {(e.i, e.j) for e in spec.edges}
    assert (3, 4) not in pairs
    for e in spec.edges:
        assert e.p_rate + e.q_rate == pytest.approx(2.5, rel=1e-12)
    stats = stationary_stats(spec)
    assert np.allclose(stats.abar, abar, atol=1e-12)


def test_realize_switched_spec_validation():
    ok = np.array([[0.0, 0.5], [0.5, 0.0]])
    with pytest.raises(ValueError, match="kappa"):
        realize_switched_spec(ok, kappa=0.0)
    with pytest.raises(ValueError, match="symmetric"):
        realize_switched_spec(np.array([[0.0, 0.5], [0.4, 0.0]]), kappa=1.0)
    with pytest.raises(ValueError, match="diagonal"):
        realize_switched_spec(np.array([[0.1, 0.5], [0.5, 0.0]]), kappa=1.0)
    with pytest.raises(ValueError, match="lie in"):
        realize_switched_spec(np.array([[0.0, 1.5], [1.5, 0.0]]), kappa=1.0)


def test_ensemble_from_dict_dispatch():
    com = ensemble_from_dict(
        {
            "ensemble": "community",
            "n1": 3, "n2": 4,
            "theta1": 0.5, "theta2": 0.25, "phi": 0.1,
        }
    )
    assert isinstance(com, CommunitySpec) and com.n == 7
    exd = ensemble_from_dict(
        {"ensemble": "expected-degree", "degrees": [1.0, 2.0, 3.0]}
    )
    assert isinstance(exd, ExpectedDegreeSpec) and exd.n == 3
    pl = ensemble_from_dict(
        {
            "ensemble": "power-law",
            "n": 100, "exponent": 2.5,
            "max_degree": 10.0, "avg_degree": 2.0,
        }
    )
    assert isinstance(pl, PowerLawSpec)
    with pytest.raises(ValueError, match="unknown ensemble"):
        ensemble_from_dict({"ensemble": "smallworld"})
    with pytest.raises(ValueError, match="missing field"):
        ensemble_from_dict({"ensemble": "community", "n1": 3})
