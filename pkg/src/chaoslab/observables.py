"""Overlap, magnetization, and random-field observables with their quenched
variances, plus the numerical positive-correlation checker."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .disorder import SeedSpec, hermite_eval
from .gibbs import (McmcConfig, MomentTable, draw_pair_realization,
                    draw_residual_slices, exact_moments, mcmc_moments,
                    moment_table_for_family, overlap_from_tables,
                    replica_variance)
from .models import CoupledPair, FactorFamily, FactorSystem


@dataclass(frozen=True)
class WeightVector:
    """Weights a = (a_e) over the index family, with their 1- and 2-norms."""

    a: tuple

    @property
    def norm1(self) -> float:
        return float(np.abs(np.asarray(self.a)).sum())

    @property
    def norm2(self) -> float:
        return float(np.linalg.norm(np.asarray(self.a)))

    @classmethod
    def uniform(cls, n: int, value: Optional[float] = None) -> "WeightVector":
        v = 1.0 / n if value is None else value
        return cls(a=tuple(v for _ in range(n)))


@dataclass(frozen=True)
class QuenchedVariance:
    """Disorder average of an inner Gibbs variance, with MC error across
    disorder draws."""

    value: float
    stderr: float
    n_disorder: int
    engine: str


def _map_replicas(fn, n: int) -> list:
    """Apply fn to replica indices 0..n-1, optionally thread-parallel.

    Results come back in replica order regardless of thread count, so
    downstream reductions are bit-reproducible. CHAOSLAB_THREADS caps the
    pool size (default 1: sequential).
    """
    threads = max(1, int(os.environ.get("CHAOSLAB_THREADS", "1")))
    if threads == 1 or n == 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def _summarize(values, engine) -> QuenchedVariance:
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return QuenchedVariance(value=float(values.mean()), stderr=stderr,
                            n_disorder=n, engine=engine)


def draw_system_realization(system: FactorSystem, seed: SeedSpec,
                            realization: int):
    """One disorder realization of a single system: (system, g, residuals)."""
    s = seed.stream(realization)
    sys_r = system.with_structure(s.child(9))
    g = s.child(0).rng().standard_normal(sys_r.index_count)
    res = draw_residual_slices(sys_r, s.child(1))
    return sys_r, g, res


def _system_table(system, g, res, engine, mcmc_config, seed, realization,
                  observe=None) -> MomentTable:
    if engine == "exact":
        if observe is not None:
            return moment_table_for_family(system, observe, g,
                                           residual_slices=res)
        return exact_moments(system, g, residual_slices=res)
    if engine != "mcmc":
        raise ValueError(f"unknown engine {engine!r}")
    if mcmc_config is None:
        raise ValueError("mcmc engine needs an McmcConfig")
    return mcmc_moments(system, g, config=mcmc_config,
                        seed=seed.stream(realization).child(100),
                        residual_slices=res, observe=observe)


def bond_overlap_variance(pair: CoupledPair, n_disorder: int,
                          engine: str = "exact",
                          mcmc_config: Optional[McmcConfig] = None
                          ) -> QuenchedVariance:
    """E<(Q_11 - <Q_11>)^2> over independent coupled disorder draws."""
    if n_disorder < 2:
        raise ValueError("need n_disorder >= 2 for a stderr")

    def one(r):
        try:
            return replica_variance(pair, engine, mcmc_config=mcmc_config,
                                    realization=r)[0]
        except Exception as exc:
            raise type(exc)(f"disorder replica {r}: {exc}") from exc

    return _summarize(_map_replicas(one, n_disorder), engine)


def _site_family(system: FactorSystem) -> FactorFamily:
    fam = FactorFamily("prod", tuple((i,) for i in range(system.n_sites)))
    if system.chaos.members == fam.members:
        return system.chaos
    return fam


def site_overlap_variance(system: FactorSystem, n_disorder: int,
                          seed: SeedSpec, engine: str = "exact",
                          mcmc_config: Optional[McmcConfig] = None
                          ) -> QuenchedVariance:
    """E[<R^2> - <R>^2] for the site overlap of two same-measure replicas."""
    if n_disorder < 2:
        raise ValueError("need n_disorder >= 2 for a stderr")
    fam = _site_family(system)
    n_v = system.n_sites

    def one(r):
        sys_r, g, res = draw_system_realization(system, seed, r)
        table = _system_table(sys_r, g, res, engine, mcmc_config, seed, r,
                              observe=fam)
        r_mean = float((table.first**2).sum()) / n_v
        r_sq = float((table.second**2).sum()) / n_v**2
        return r_sq - r_mean**2

    return _summarize(_map_replicas(one, n_disorder), engine)


def _weighted_variance(table: MomentTable, coeffs: np.ndarray) -> float:
    centered = table.second - np.outer(table.first, table.first)
    return float(coeffs @ centered @ coeffs)


def magnetization_variance(system: FactorSystem, weights: WeightVector,
                           n_disorder: int, seed: SeedSpec,
                           engine: str = "exact",
                           mcmc_config: Optional[McmcConfig] = None
                           ) -> QuenchedVariance:
    """E<(m - <m>)^2> for m(sigma) = sum_e a_e f_e(sigma)."""
    if len(weights.a) != system.index_count:
        raise ValueError("weights are not indexed compatibly with E")
    a = np.asarray(weights.a)

    def one(r):
        sys_r, g, res = draw_system_realization(system, seed, r)
        table = _system_table(sys_r, g, res, engine, mcmc_config, seed, r)
        return _weighted_variance(table, a)

    return _summarize(_map_replicas(one, n_disorder), engine)


def field_variance(system: FactorSystem, weights: WeightVector, k: int,
                   n_disorder: int, seed: SeedSpec, engine: str = "exact",
                   mcmc_config: Optional[McmcConfig] = None
                   ) -> QuenchedVariance:
    """E[<W^2> - <W>^2] for W(sigma) = sum_e a_e He_k(g_e) f_e(sigma).

    k = 0 reduces exactly to magnetization_variance; k = 1 is the plain
    Gaussian random field.
    """
    if k < 0 or k > 8:
        raise ValueError("k must lie in [0, 8]")
    if len(weights.a) != system.index_count:
        raise ValueError("weights are not indexed compatibly with E")
    a = np.asarray(weights.a)

    def one(r):
        sys_r, g, res = draw_system_realization(system, seed, r)
        table = _system_table(sys_r, g, res, engine, mcmc_config, seed, r)
        coeffs = a * hermite_eval(k, g)
        return _weighted_variance(table, coeffs)

    return _summarize(_map_replicas(one, n_disorder), engine)


@dataclass(frozen=True)
class IdentityCheck:
    """|gamma_1 sqrt(1-t) E<Q_11^2 - Q_11 Q_21>| with its bound 1/sqrt(|E|)."""

    value: float
    stderr: float
    bound: float
    n_disorder: int


def intermediate_identity_check(pair: CoupledPair,
                                n_disorder: int) -> IdentityCheck:
    """Exact-engine check of the three-replica overlap identity's bound."""
    n_e = pair.system1.index_count
    prefactor = pair.gamma1 * math.sqrt(1.0 - pair.t)
    values = []
    for r in range(n_disorder):
        sys1, sys2, dis, res1, res2 = draw_pair_realization(pair, r)
        t1 = exact_moments(sys1, dis.g1[:sys1.index_count],
                           residual_slices=res1)
        t2 = exact_moments(sys2, dis.g2[:sys2.index_count],
                           residual_slices=res2)
        _, q_sq = overlap_from_tables(t1, t2)
        # <Q_11 Q_21> factorizes as |E|^-2 sum_{e,e'} <f_e>_1 <f_e'>_1 <f_e f_e'>_2
        q_cross = float(t1.first @ t2.second @ t1.first) / n_e**2
        values.append(q_sq - q_cross)
    values = np.asarray(values)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(n_disorder)) \
        if n_disorder > 1 else 0.0
    return IdentityCheck(value=abs(prefactor * mean),
                         stderr=prefactor * stderr,
                         bound=1.0 / math.sqrt(n_e), n_disorder=n_disorder)


def fkg_check(system: FactorSystem, disorder_slice,
              residual_slices=None) -> float:
    """Worst spin-covariance gap min_{i,j} <s_i s_j> - <s_i><s_j> for one
    disorder realization; >= -1e-10 certifies positive correlation."""
    fam = _site_family(system)
    table = moment_table_for_family(system, fam, disorder_slice,
                                    residual_slices=residual_slices)
    gaps = table.second - np.outer(table.first, table.first)
    return float(gaps.min())


def overlap_mean_disorder_variance(pair: CoupledPair, n_disorder: int,
                                   engine: str = "exact",
                                   mcmc_config: Optional[McmcConfig] = None
                                   ) -> QuenchedVariance:
    """Disorder-level variance of <Q_11> itself, exposed as a diagnostic.

    No bound is attached; this measures how much the quenched overlap average
    moves from one disorder draw to the next.
    """
    means = []
    for r in range(n_disorder):
        sys1, sys2, dis, res1, res2 = draw_pair_realization(pair, r)
        t1 = exact_moments(sys1, dis.g1[:sys1.index_count],
                           residual_slices=res1)
        t2 = exact_moments(sys2, dis.g2[:sys2.index_count],
                           residual_slices=res2)
        q_mean, _ = overlap_from_tables(t1, t2)
        means.append(q_mean)
    means = np.asarray(means)
    var = float(means.var(ddof=1))
    stderr = var * math.sqrt(2.0 / max(n_disorder - 1, 1))
    return QuenchedVariance(value=var, stderr=stderr, n_disorder=n_disorder,
                            engine=engine)
