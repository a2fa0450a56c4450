"""Exact enumeration and MCMC moment engines against naive oracles."""

import math

import numpy as np
import pytest

from chaoslab import (CapacityError, McmcConfig, SeedSpec, couple,
                      lattice_graph, make_diluted, make_ea, make_field_system,
                      make_rfim, make_vector_sk)
from chaoslab.gibbs import (MomentTable, draw_residual_slices, exact_moments,
                            exact_moment_batch, mcmc_moments,
                            moment_table_for_family, overlap_from_tables,
                            replica_variance)
from chaoslab.models import FactorFamily, FactorSystem
from chaoslab.topology import site_family

import oracles


# --- exact engine: closed forms ----------------------------------------------

def test_single_site_tanh():
    sys_ = make_field_system(1, 0.8)
    for g in (-1.3, 0.0, 0.4, 2.5):
        table = exact_moments(sys_, [g])
        assert table.first[0] == pytest.approx(math.tanh(0.8 * g), abs=1e-14)
        assert table.second[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_single_bond_tanh():
    sys_ = make_ea(lattice_graph([2]), 1.4)
    for g in (-0.9, 0.3, 1.7):
        table = exact_moments(sys_, [g])
        assert table.first[0] == pytest.approx(math.tanh(1.4 * g), abs=1e-14)


def test_single_site_log_partition():
    # Z = 2 cosh(gamma g)
    sys_ = make_field_system(1, 1.0)
    table = exact_moments(sys_, [0.7])
    assert table.log_partition == pytest.approx(
        math.log(2 * math.cosh(0.7)), rel=1e-12)


# --- exact engine vs naive enumeration ---------------------------------------

def test_exact_moments_match_oracle_ea_with_field():
    sys_ = make_ea(lattice_graph([2, 2]), 1.1, 0.6)
    g = SeedSpec(1).rng().standard_normal(sys_.index_count)
    res = draw_residual_slices(sys_, SeedSpec(2))
    table = exact_moments(sys_, g, residual_slices=res)
    first, second = oracles.naive_moments(sys_, g, res)
    assert np.allclose(table.first, first, atol=1e-12)
    assert np.allclose(table.second, second, atol=1e-12)


def test_exact_moments_match_oracle_rfim():
    sys_ = make_rfim(lattice_graph([2, 3]), 0.5, 1.2)
    g = SeedSpec(3).rng().standard_normal(sys_.index_count)
    table = exact_moments(sys_, g)
    first, second = oracles.naive_moments(sys_, g)
    assert np.allclose(table.first, first, atol=1e-12)
    assert np.allclose(table.second, second, atol=1e-12)


def test_exact_moments_match_oracle_vector():
    sys_ = make_vector_sk(2, [[1.0, 0.0], [0.0, 1.0], [-0.6, 0.8]], 0.9,
                          [0.5, 0.3, 0.2])
    g = SeedSpec(4).rng().standard_normal(sys_.index_count)
    table = exact_moments(sys_, g)
    first, second = oracles.naive_moments(sys_, g)
    assert np.allclose(table.first, first, atol=1e-12)
    assert np.allclose(table.second, second, atol=1e-12)


def test_family_table_matches_oracle():
    sys_ = make_rfim(lattice_graph([2, 2]), 0.8, 1.0)
    g = SeedSpec(5).rng().standard_normal(4)
    fam = FactorFamily("prod", ((0,), (1,), (0, 1), (0, 3)))
    table = moment_table_for_family(sys_, fam, g)
    first, second = oracles.family_moments(sys_, fam, g)
    assert np.allclose(table.first, first, atol=1e-12)
    assert np.allclose(table.second, second, atol=1e-12)


def test_batched_moments_match_single_calls():
    sys_ = make_ea(lattice_graph([2, 3]), 0.9)
    g_batch = SeedSpec(6).rng().standard_normal((5, sys_.index_count))
    first, second, log_z = exact_moment_batch(sys_, g_batch)
    for i in range(5):
        t = exact_moments(sys_, g_batch[i])
        assert np.allclose(first[i], t.first, atol=1e-13)
        assert np.allclose(second[i], t.second, atol=1e-13)
        assert log_z[i] == pytest.approx(t.log_partition, rel=1e-12)


def test_moment_table_structure():
    sys_ = make_ea(lattice_graph([2, 2]), 1.0)
    table = exact_moments(sys_, SeedSpec(7).rng().standard_normal(4))
    assert np.allclose(table.second, table.second.T, atol=1e-15)
    assert np.allclose(np.diag(table.second), 1.0, atol=1e-14)
    assert np.all(np.abs(table.first) <= 1.0 + 1e-14)


def test_log_space_survives_huge_couplings():
    sys_ = make_ea(lattice_graph([2]), 400.0)
    table = exact_moments(sys_, [1.3])
    assert math.isfinite(table.log_partition)
    assert table.first[0] == pytest.approx(1.0, abs=1e-12)


def test_capacity_limits():
    with pytest.raises(CapacityError):
        exact_moments(make_field_system(25, 1.0), np.zeros(25))
    fat = FactorSystem(family="field", indices=site_family(4), n_sites=4,
                       spin_kind="ising", gamma=1.0,
                       chaos=FactorFamily("prod", ((0,),) * 600))
    with pytest.raises(CapacityError):
        exact_moments(fat, np.zeros(600))


# --- MCMC engine -------------------------------------------------------------

MCMC = McmcConfig(sweeps=40_000, burn_in=4_000)


def test_mcmc_config_validation():
    with pytest.raises(ValueError):
        McmcConfig(sweeps=10, burn_in=10)
    with pytest.raises(ValueError):
        McmcConfig(sweeps=10, thin=0)


def test_mcmc_reproducible():
    sys_ = make_ea(lattice_graph([2, 2]), 0.7)
    g = SeedSpec(8).rng().standard_normal(4)
    a = mcmc_moments(sys_, g, config=MCMC, seed=SeedSpec(9))
    b = mcmc_moments(sys_, g, config=MCMC, seed=SeedSpec(9))
    assert np.array_equal(a.first, b.first)
    assert np.array_equal(a.second, b.second)


def test_mcmc_matches_exact_prod():
    sys_ = make_ea(lattice_graph([2, 2]), 0.8, 0.5)
    g = SeedSpec(10).rng().standard_normal(sys_.index_count)
    res = draw_residual_slices(sys_, SeedSpec(11))
    exact = exact_moments(sys_, g, residual_slices=res)
    est = mcmc_moments(sys_, g, config=MCMC, seed=SeedSpec(12),
                       residual_slices=res)
    dev1 = np.abs(est.first - exact.first) / np.maximum(est.stderr_first,
                                                        1e-12)
    dev2 = np.abs(est.second - exact.second) / np.maximum(est.stderr_second,
                                                          1e-12)
    assert float(dev1.max()) <= 6.0
    assert float(dev2.max()) <= 6.0


def test_mcmc_matches_exact_dot():
    sys_ = make_vector_sk(3, [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], 0.7,
                          [0.4, 0.3, 0.3])
    g = SeedSpec(13).rng().standard_normal(sys_.index_count)
    exact = exact_moments(sys_, g)
    est = mcmc_moments(sys_, g, config=MCMC, seed=SeedSpec(14))
    dev = np.abs(est.first - exact.first) / np.maximum(est.stderr_first, 1e-12)
    assert float(dev.max()) <= 6.0


def test_mcmc_occupancy_matches_gibbs_distribution():
    # reconstruct the full 2-spin law from observed moments; total variation
    # against the exact distribution must be small
    sys_ = make_ea(lattice_graph([2]), 0.9)
    g = np.array([0.8])
    fam = FactorFamily("prod", ((0,), (1,), (0, 1)))
    est = mcmc_moments(sys_, g, config=McmcConfig(sweeps=200_000,
                                                  burn_in=10_000),
                       seed=SeedSpec(15), observe=fam)
    exact = moment_table_for_family(sys_, fam, g)
    tv = 0.0
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            recon = lambda t: (1 + s1 * t.first[0] + s2 * t.first[1]
                               + s1 * s2 * t.first[2]) / 4.0
            tv += 0.5 * abs(recon(est) - recon(exact))
    assert tv < 0.01


def test_mcmc_stderr_cap_raises():
    from chaoslab import NonConvergenceError
    sys_ = make_ea(lattice_graph([2, 2]), 1.0)
    g = SeedSpec(16).rng().standard_normal(4)
    with pytest.raises(NonConvergenceError):
        mcmc_moments(sys_, g, config=McmcConfig(sweeps=640, burn_in=0),
                     seed=SeedSpec(17), stderr_cap=1e-6)


# --- replica factorization and the overlap -----------------------------------

def test_overlap_assembly_matches_brute_force():
    for dims, b1, b2, t in [([3], 1.0, 0.7, 0.5), ([2, 2], 0.6, 1.2, 0.25)]:
        g = lattice_graph(dims)
        pair = couple(make_ea(g, b1), make_ea(g, b2), t, SeedSpec(18))
        d = pair.disorder
        t1 = exact_moments(pair.system1, d.g1)
        t2 = exact_moments(pair.system2, d.g2)
        q_mean, q_sq = overlap_from_tables(t1, t2)
        ref_mean, ref_sq = oracles.pair_overlap_moments(
            pair.system1, d.g1, (), pair.system2, d.g2, ())
        assert q_mean == pytest.approx(ref_mean, abs=1e-10)
        assert q_sq == pytest.approx(ref_sq, abs=1e-10)


def test_overlap_empty_family_convention():
    empty = MomentTable(first=np.zeros(0), second=np.zeros((0, 0)),
                        log_partition=0.0, method="exact")
    assert overlap_from_tables(empty, empty) == (1.0, 1.0)


def test_replica_variance_engines_agree():
    g = lattice_graph([2, 2])
    pair = couple(make_ea(g, 0.8), make_ea(g, 1.1), 0.5, SeedSpec(19))
    v_exact, se_exact = replica_variance(pair, "exact")
    assert se_exact == 0.0
    v_mcmc, se_mcmc = replica_variance(pair, "mcmc", mcmc_config=MCMC)
    assert se_mcmc > 0.0
    assert abs(v_mcmc - v_exact) <= 6.0 * se_mcmc


def test_replica_variance_diluted_zero_clauses():
    # with no clauses the overlap is identically 1, so its variance vanishes
    found = None
    for s in range(200):
        sys_ = make_diluted(3, 0.01, 2, 1.0, SeedSpec(s))
        if sys_.index_count == 0:
            found = s
            break
    assert found is not None
    sys_ = make_diluted(3, 0.01, 2, 1.0, SeedSpec(found))
    pair = couple(sys_, sys_, 0.5, SeedSpec(found))
    for realization in range(5):
        v, _ = replica_variance(pair, "exact", realization=realization)
        s1 = pair.system1.with_structure(
            pair.seed.stream(realization).child(9))
        if s1.index_count == 0:
            assert v == 0.0
        assert v >= -1e-12


def test_replica_variance_unknown_engine():
    g = lattice_graph([2])
    pair = couple(make_ea(g, 1.0), make_ea(g, 1.0), 0.5, SeedSpec(20))
    with pytest.raises(ValueError):
        replica_variance(pair, "tensor")
    with pytest.raises(ValueError):
        replica_variance(pair, "mcmc")
