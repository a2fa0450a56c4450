"""Quenched variances of overlaps, magnetizations, and Hermite fields."""

import math

import numpy as np
import pytest

from chaoslab import (SeedSpec, couple, lattice_graph, make_ea,
                      make_field_system, make_rfim, sample_coupled)
from chaoslab.gibbs import draw_pair_realization, exact_moments
from chaoslab.observables import (WeightVector, bond_overlap_variance,
                                  draw_system_realization, field_variance,
                                  fkg_check, intermediate_identity_check,
                                  magnetization_variance,
                                  overlap_mean_disorder_variance,
                                  site_overlap_variance)

import oracles


# --- weight vectors ----------------------------------------------------------

def test_weight_vector_norms():
    w = WeightVector(a=(0.5, -1.5, 2.0))
    assert w.norm1 == pytest.approx(4.0)
    assert w.norm2 == pytest.approx(math.sqrt(0.25 + 2.25 + 4.0))
    u = WeightVector.uniform(4)
    assert u.a == (0.25,) * 4
    assert WeightVector.uniform(3, 1.0).a == (1.0,) * 3


# --- bond overlap variance ---------------------------------------------------

def test_single_edge_replica_variance_closed_form():
    # <Q> = tanh(b1 g1) tanh(b2 g2) and Q^2 = 1 on one edge
    g = lattice_graph([2])
    pair = couple(make_ea(g, 1.0), make_ea(g, 2.0), 0.5, SeedSpec(1))
    for r in range(5):
        d = sample_coupled(1, 0.5, pair.seed.stream(r).child(0))
        expect = 1.0 - math.tanh(d.g1[0])**2 * math.tanh(2.0 * d.g2[0])**2
        from chaoslab.gibbs import replica_variance
        value, _ = replica_variance(pair, "exact", realization=r)
        assert value == pytest.approx(expect, abs=1e-12)


def test_single_edge_variance_matches_quadrature():
    g = lattice_graph([2])
    t = 0.5
    pair = couple(make_ea(g, 1.0), make_ea(g, 1.0), t, SeedSpec(2))
    qv = bond_overlap_variance(pair, 2000)
    expect = oracles.gauss2d_correlated(
        lambda g1, g2: 1.0 - np.tanh(g1)**2 * np.tanh(g2)**2, t)
    assert abs(qv.value - expect) <= 3.0 * qv.stderr


def test_single_edge_variance_fully_coupled_low_temperature():
    beta, t = 20.0, 1.0
    g = lattice_graph([2])
    pair = couple(make_ea(g, beta), make_ea(g, beta), t, SeedSpec(3))
    qv = bond_overlap_variance(pair, 3000)
    expect = oracles.gauss1d_dense(lambda x: 1.0 - np.tanh(beta * x)**4)
    assert abs(qv.value - expect) <= 3.0 * qv.stderr


def test_bond_overlap_variance_validation():
    g = lattice_graph([2])
    pair = couple(make_ea(g, 1.0), make_ea(g, 1.0), 0.5, SeedSpec(4))
    with pytest.raises(ValueError):
        bond_overlap_variance(pair, 1)


def test_bond_overlap_thread_determinism(monkeypatch):
    g = lattice_graph([2, 2])
    pair = couple(make_ea(g, 1.0), make_ea(g, 0.6), 0.25, SeedSpec(5))
    seq = bond_overlap_variance(pair, 24)
    monkeypatch.setenv("CHAOSLAB_THREADS", "4")
    par = bond_overlap_variance(pair, 24)
    assert par.value == seq.value and par.stderr == seq.stderr


def test_disorder_replica_error_is_labelled():
    g = lattice_graph([2])
    pair = couple(make_ea(g, 1.0), make_ea(g, 1.0), 0.5, SeedSpec(6))
    with pytest.raises(ValueError, match="disorder replica 0"):
        bond_overlap_variance(pair, 4, engine="warp")


# --- site overlap variance ---------------------------------------------------

def test_single_site_overlap_variance_quadrature():
    # R = <s>^2 on one site, so E[<R^2>-<R>^2] = E[1 - tanh^4(h g)]
    h = 1.3
    sys_ = make_field_system(1, h)
    sv = site_overlap_variance(sys_, 3000, SeedSpec(7))
    expect = oracles.gauss1d(lambda x: 1.0 - np.tanh(h * x)**4)
    assert abs(sv.value - expect) <= 3.0 * sv.stderr


def test_site_overlap_matches_oracle_rfim():
    sys_ = make_rfim(lattice_graph([2, 2]), 0.6, 1.0)
    n_v = sys_.n_sites
    fam_members = tuple((i,) for i in range(n_v))

    def one_oracle(r):
        sys_r, g, res = draw_system_realization(sys_, SeedSpec(8), r)
        from chaoslab.models import FactorFamily
        first, second = oracles.family_moments(
            sys_r, FactorFamily("prod", fam_members), g, res)
        r_mean = float((first**2).sum()) / n_v
        r_sq = float((second**2).sum()) / n_v**2
        return r_sq - r_mean**2

    sv = site_overlap_variance(sys_, 6, SeedSpec(8))
    expect = np.mean([one_oracle(r) for r in range(6)])
    assert sv.value == pytest.approx(float(expect), abs=1e-10)


# --- magnetization variance --------------------------------------------------

def test_single_site_magnetization_quadrature():
    gamma = 0.9
    sys_ = make_field_system(1, gamma)
    w = WeightVector(a=(1.0,))
    mv = magnetization_variance(sys_, w, 3000, SeedSpec(9))
    expect = oracles.gauss1d(lambda x: 1.0 - np.tanh(gamma * x)**2)
    assert abs(mv.value - expect) <= 3.0 * mv.stderr


def test_magnetization_matches_oracle_rfim():
    sys_ = make_rfim(lattice_graph([2, 3]), 0.4, 1.0)
    w = WeightVector(a=tuple(SeedSpec(10).rng().standard_normal(6) / 6))
    a = np.asarray(w.a)

    def one_oracle(r):
        sys_r, g, res = draw_system_realization(sys_, SeedSpec(11), r)
        first, second = oracles.naive_moments(sys_r, g, res)
        return float(a @ (second - np.outer(first, first)) @ a)

    mv = magnetization_variance(sys_, w, 5, SeedSpec(11))
    expect = np.mean([one_oracle(r) for r in range(5)])
    assert mv.value == pytest.approx(float(expect), abs=1e-10)


def test_magnetization_weight_length_checked():
    sys_ = make_field_system(3, 1.0)
    with pytest.raises(ValueError):
        magnetization_variance(sys_, WeightVector.uniform(4), 4, SeedSpec(12))


# --- Hermite field variance --------------------------------------------------

def test_field_variance_degree_zero_is_magnetization():
    sys_ = make_rfim(lattice_graph([2, 2]), 0.5, 1.0)
    w = WeightVector.uniform(4)
    fv = field_variance(sys_, w, 0, 8, SeedSpec(13))
    mv = magnetization_variance(sys_, w, 8, SeedSpec(13))
    assert fv.value == mv.value and fv.stderr == mv.stderr


def test_field_variance_degree_one_quadrature():
    # single site: Var = g^2 (1 - tanh^2(gamma g))
    gamma = 1.1
    sys_ = make_field_system(1, gamma)
    fv = field_variance(sys_, WeightVector(a=(1.0,)), 1, 4000, SeedSpec(14))
    expect = oracles.gauss1d(
        lambda x: x**2 * (1.0 - np.tanh(gamma * x)**2))
    assert abs(fv.value - expect) <= 3.0 * fv.stderr


def test_field_variance_degree_checked():
    sys_ = make_field_system(2, 1.0)
    w = WeightVector.uniform(2)
    with pytest.raises(ValueError):
        field_variance(sys_, w, -1, 4, SeedSpec(15))
    with pytest.raises(ValueError):
        field_variance(sys_, w, 9, 4, SeedSpec(15))


# --- three-replica identity --------------------------------------------------

def test_identity_cross_term_matches_brute_force():
    g = lattice_graph([3])
    pair = couple(make_ea(g, 1.0), make_ea(g, 0.7), 0.4, SeedSpec(16))
    sys1, sys2, dis, res1, res2 = draw_pair_realization(pair, 0)
    t1 = exact_moments(sys1, dis.g1, residual_slices=res1)
    t2 = exact_moments(sys2, dis.g2, residual_slices=res2)
    n_e = sys1.index_count
    q_cross = float(t1.first @ t2.second @ t1.first) / n_e**2
    ref = oracles.three_replica_cross(sys1, dis.g1, res1, sys2, dis.g2, res2)
    assert q_cross == pytest.approx(ref, abs=1e-12)


def test_identity_vanishes_fully_coupled():
    g = lattice_graph([2, 2])
    pair = couple(make_ea(g, 1.0), make_ea(g, 1.0), 1.0, SeedSpec(17))
    chk = intermediate_identity_check(pair, 20)
    assert chk.value == pytest.approx(0.0, abs=1e-14)
    assert chk.bound == pytest.approx(0.5)


def test_identity_bound_holds():
    for dims in ([2], [2, 2]):
        g = lattice_graph(dims)
        pair = couple(make_ea(g, 1.0), make_ea(g, 2.0), 0.25, SeedSpec(18))
        chk = intermediate_identity_check(pair, 400)
        assert chk.value <= chk.bound + 3.0 * chk.stderr


# --- positive correlation check ----------------------------------------------

def test_fkg_gap_positive_for_ferromagnet():
    sys_ = make_rfim(lattice_graph([2, 2]), 0.8, 1.0)
    for r in range(10):
        sys_r, g, res = draw_system_realization(sys_, SeedSpec(19), r)
        assert fkg_check(sys_r, g, res) >= -1e-10


def test_fkg_gap_zero_without_bonds():
    sys_ = make_rfim(lattice_graph([2, 2]), 0.0, 1.0)
    g = SeedSpec(20).rng().standard_normal(4)
    assert fkg_check(sys_, g) >= -1e-12


def test_fkg_gap_negative_for_antiferromagnet():
    sys_ = make_rfim(lattice_graph([2, 2]), 1.5, 0.2, bond_sign=-1.0)
    gaps = []
    for r in range(10):
        sys_r, g, res = draw_system_realization(sys_, SeedSpec(21), r)
        gaps.append(fkg_check(sys_r, g, res))
    assert min(gaps) < -1e-3


# --- diagnostics -------------------------------------------------------------

def test_overlap_mean_disorder_variance_diagnostic():
    g = lattice_graph([2, 2])
    pair = couple(make_ea(g, 1.0), make_ea(g, 1.0), 0.5, SeedSpec(22))
    diag = overlap_mean_disorder_variance(pair, 50)
    assert 0.0 <= diag.value <= 1.0
    assert diag.n_disorder == 50
