"""Gibbs moments per disorder realization: exact enumeration or Metropolis MCMC.

All exact sums run in log space with a max shift, so large beta*|E| cannot
overflow. Two-replica quantities are never simulated jointly: replicas are
independent given the disorder, so products of single-system moment tables
are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._kernels import run_dot_mcmc, run_prod_mcmc
from .disorder import SeedSpec, sample_coupled
from .errors import CapacityError, NonConvergenceError
from .models import CoupledPair, FactorFamily, FactorSystem

MAX_CONFIGS = 2**24
MAX_DENSE_FACTORS = 512
N_BATCHES = 32


@dataclass(eq=False)
class MomentTable:
    """Single-system Gibbs moments <f_e> and <f_e f_e'> for one realization."""

    first: np.ndarray
    second: np.ndarray
    log_partition: float
    method: str
    stderr_first: Optional[np.ndarray] = None
    stderr_second: Optional[np.ndarray] = None
    batch_first: Optional[np.ndarray] = None
    batch_second: Optional[np.ndarray] = None


@dataclass(frozen=True)
class McmcConfig:
    sweeps: int
    burn_in: int = 0
    thin: int = 1
    chains: int = 1

    def __post_init__(self):
        if self.sweeps <= self.burn_in:
            raise ValueError("sweeps must exceed burn_in")
        if self.thin < 1 or self.chains < 1:
            raise ValueError("thin and chains must be positive")


# --- configuration enumeration ---------------------------------------------

def _n_configs(system: FactorSystem) -> int:
    base = 2 if system.spin_kind == "ising" else len(system.spin_states)
    n = base ** system.n_sites
    if n > MAX_CONFIGS:
        raise CapacityError(
            f"{n} configurations exceeds exact-engine cap {MAX_CONFIGS}")
    return n


def enumerate_configs(system: FactorSystem) -> np.ndarray:
    """All configurations: +-1 matrix (ising) or state-index matrix (vector)."""
    n = system.n_sites
    count = _n_configs(system)
    idx = np.arange(count)
    if system.spin_kind == "ising":
        return ((idx[:, None] >> np.arange(n)) & 1).astype(np.float64) * 2.0 - 1.0
    n_states = len(system.spin_states)
    out = np.empty((count, n), dtype=np.int64)
    for i in range(n):
        out[:, i] = (idx // n_states**i) % n_states
    return out


def factor_matrix(system: FactorSystem, family: FactorFamily,
                  configs: np.ndarray) -> np.ndarray:
    """F[c, e] = f_e(sigma_c) over all enumerated configurations."""
    count = configs.shape[0]
    out = np.empty((count, family.cardinality))
    if family.kind == "prod":
        for e, member in enumerate(family.members):
            col = np.ones(count)
            for i in member:
                col = col * configs[:, i]
            out[:, e] = col
    else:
        gram = system.spin_states @ system.spin_states.T
        for e, (i, j) in enumerate(family.members):
            out[:, e] = gram[configs[:, i], configs[:, j]]
    return out


def _base_log_weights(system: FactorSystem, configs: np.ndarray) -> np.ndarray:
    if system.spin_kind == "ising":
        return np.zeros(configs.shape[0])
    log_nu = np.log(np.asarray(system.state_weights))
    return log_nu[configs].sum(axis=1)


def require_residual_slices(system: FactorSystem, residual_slices) -> list:
    gaussian = [r for r in system.residuals if r.mode == "gaussian"]
    if residual_slices is None:
        residual_slices = []
    if len(residual_slices) != len(gaussian):
        raise ValueError(
            f"system has {len(gaussian)} Gaussian residual families; "
            f"got {len(residual_slices)} residual slices")
    return list(residual_slices)


def draw_residual_slices(system: FactorSystem, seed: SeedSpec) -> list:
    """Independent standard-Gaussian draws for each Gaussian residual family."""
    out = []
    k = 0
    for r in system.residuals:
        if r.mode == "gaussian":
            out.append(seed.child(k).rng().standard_normal(r.factors.cardinality))
            k += 1
    return out


# --- exact engine ----------------------------------------------------------

def exact_moment_batch(system: FactorSystem, g_batch: np.ndarray,
                       residual_batches: Optional[Sequence[np.ndarray]] = None):
    """Vectorized exact moments for a batch of disorder realizations.

    g_batch: (n, |E|) chaos Gaussians. Returns (first (n,|E|),
    second (n,|E|,|E|), log_partition (n,)).
    """
    if system.index_count > MAX_DENSE_FACTORS:
        raise CapacityError(
            f"dense second-moment table needs |E| <= {MAX_DENSE_FACTORS}")
    residual_batches = require_residual_slices(system, residual_batches)
    configs = enumerate_configs(system)
    n_real = g_batch.shape[0]

    energy = np.tile(_base_log_weights(system, configs), (n_real, 1))
    if system.index_count > 0:
        f_chaos = factor_matrix(system, system.chaos, configs)
        energy += system.gamma * (g_batch @ f_chaos.T)
    else:
        f_chaos = np.zeros((configs.shape[0], 0))
    ridx = 0
    for r in system.residuals:
        f_res = factor_matrix(system, r.factors, configs)
        if r.mode == "fixed":
            energy += r.gamma * (f_res @ np.asarray(r.coeffs))[None, :]
        else:
            energy += r.gamma * (residual_batches[ridx] @ f_res.T)
            ridx += 1

    if not np.all(np.isfinite(energy)):
        raise ValueError("non-finite Gibbs weights")
    shift = energy.max(axis=1, keepdims=True)
    log_z = shift[:, 0] + np.log(np.exp(energy - shift).sum(axis=1))
    probs = np.exp(energy - log_z[:, None])

    first = probs @ f_chaos
    second = np.einsum("nc,ce,cf->nef", probs, f_chaos, f_chaos)
    return first, second, log_z


def exact_moments(system: FactorSystem, disorder_slice,
                  wanted=None, residual_slices=None) -> MomentTable:
    """Exact Gibbs moments for one disorder realization.

    `wanted` restricts which second moments are meaningful to the caller;
    the dense table is always small here (|E| <= 512), so it is returned
    in full regardless.
    """
    g = np.atleast_1d(np.asarray(disorder_slice, dtype=np.float64))
    first, second, log_z = exact_moment_batch(system, g[None, :],
                                              residual_slices)
    return MomentTable(first=first[0], second=second[0],
                       log_partition=float(log_z[0]), method="exact")


def moment_table_for_family(system: FactorSystem, family: FactorFamily,
                            disorder_slice, residual_slices=None) -> MomentTable:
    """Exact moments of an arbitrary observable family under the system's
    Gibbs measure (the family need not appear in the Hamiltonian)."""
    residual_slices = require_residual_slices(system, residual_slices)
    configs = enumerate_configs(system)
    g = np.atleast_1d(np.asarray(disorder_slice, dtype=np.float64))
    energy = _base_log_weights(system, configs)
    if system.index_count > 0:
        energy = energy + system.gamma * (factor_matrix(system, system.chaos,
                                                        configs) @ g)
    ridx = 0
    for r in system.residuals:
        f_res = factor_matrix(system, r.factors, configs)
        if r.mode == "fixed":
            energy = energy + r.gamma * (f_res @ np.asarray(r.coeffs))
        else:
            energy = energy + r.gamma * (f_res @ residual_slices[ridx])
            ridx += 1
    shift = energy.max()
    log_z = shift + math.log(np.exp(energy - shift).sum())
    probs = np.exp(energy - log_z)
    f_obs = factor_matrix(system, family, configs)
    first = probs @ f_obs
    second = f_obs.T @ (probs[:, None] * f_obs)
    return MomentTable(first=first, second=second, log_partition=float(log_z),
                       method="exact")


# --- MCMC engine -----------------------------------------------------------

def _build_incidence(n_sites, members, kind):
    inc = [[] for _ in range(n_sites)]
    for f, member in enumerate(members):
        if kind == "prod":
            for i in set(member):
                if member.count(i) % 2 == 1:
                    inc[i].append(f)
        else:
            for i in set(member):
                inc[i].append(f)
    offsets = np.zeros(n_sites + 1, dtype=np.int64)
    flat = []
    for i in range(n_sites):
        offsets[i + 1] = offsets[i] + len(inc[i])
        flat.extend(inc[i])
    return offsets, np.asarray(flat, dtype=np.int64)


def _assemble_energy_terms(system, g, residual_slices, observe):
    """Flatten all factor families into one coupling vector + member list.

    Returns (members, couplings, record_slice) where record_slice indexes the
    observed family inside the flattened list.
    """
    members = list(system.chaos.members)
    couplings = list(system.gamma * np.asarray(g, dtype=np.float64))
    ridx = 0
    for r in system.residuals:
        if r.factors.kind != system.chaos.kind:
            raise ValueError("mixed factor kinds are not supported by MCMC")
        members.extend(r.factors.members)
        if r.mode == "fixed":
            couplings.extend(r.gamma * np.asarray(r.coeffs))
        else:
            couplings.extend(r.gamma * residual_slices[ridx])
            ridx += 1
    if observe is None or observe.members == system.chaos.members:
        record = np.arange(system.index_count, dtype=np.int64)
    else:
        start = len(members)
        members.extend(observe.members)
        couplings.extend(0.0 for _ in observe.members)
        record = np.arange(start, start + observe.cardinality, dtype=np.int64)
    return members, np.asarray(couplings, dtype=np.float64), record


def _initial_factor_values(system, members, spins_or_states):
    vals = np.empty(len(members))
    if system.chaos.kind == "prod":
        for f, member in enumerate(members):
            v = 1.0
            for i in member:
                v *= spins_or_states[i]
            vals[f] = v
    else:
        gram = system.spin_states @ system.spin_states.T
        for f, (i, j) in enumerate(members):
            vals[f] = gram[spins_or_states[i], spins_or_states[j]]
    return vals


def mcmc_moments(system: FactorSystem, disorder_slice, wanted=None, *,
                 config: McmcConfig, seed: SeedSpec, residual_slices=None,
                 observe: Optional[FactorFamily] = None,
                 stderr_cap: Optional[float] = None) -> MomentTable:
    """Metropolis estimate of the same moments as exact_moments.

    One sweep = one proposal per site in fixed order. Standard errors come
    from batch means over 32 batches of the pooled measurements.
    """
    residual_slices = require_residual_slices(system, residual_slices)
    members, couplings, record = _assemble_energy_terms(
        system, np.atleast_1d(disorder_slice), residual_slices, observe)
    kind = system.chaos.kind
    offsets, flat = _build_incidence(system.n_sites, members, kind)

    n_rec = len(record)
    per_chain = (config.sweeps - config.burn_in + config.thin - 1) // config.thin
    chunks = []
    for c in range(config.chains):
        rng = seed.child(c).rng()
        out = np.empty((per_chain, n_rec))
        uniforms = rng.random((config.sweeps, system.n_sites))
        if kind == "prod":
            spins = rng.choice(np.array([-1.0, 1.0]), size=system.n_sites)
            fvals = _initial_factor_values(system, members, spins)
            m = run_prod_mcmc(spins, fvals, couplings, offsets, flat,
                              config.sweeps, config.burn_in, config.thin,
                              uniforms, record, out)
        else:
            n_states = len(system.spin_states)
            states = rng.choice(n_states, size=system.n_sites,
                                p=np.asarray(system.state_weights))
            fvals = _initial_factor_values(system, members, states)
            proposals = rng.integers(0, n_states - 1,
                                     size=(config.sweeps, system.n_sites))
            member_arr = np.asarray(members, dtype=np.int64)
            gram = system.spin_states @ system.spin_states.T
            log_nu = np.log(np.asarray(system.state_weights))
            m = run_dot_mcmc(states, fvals, couplings, offsets, flat,
                             member_arr, gram, log_nu, config.sweeps,
                             config.burn_in, config.thin, uniforms,
                             proposals, record, out)
        chunks.append(out[:m])

    meas = np.concatenate(chunks, axis=0)
    n_use = (meas.shape[0] // N_BATCHES) * N_BATCHES
    if n_use == 0:
        raise ValueError("too few measurements for batch-means error bars")
    meas = meas[:n_use].reshape(N_BATCHES, n_use // N_BATCHES, n_rec)

    batch_first = meas.mean(axis=1)
    batch_second = np.einsum("bmr,bms->brs", meas, meas) / meas.shape[1]
    first = batch_first.mean(axis=0)
    second = batch_second.mean(axis=0)
    se_first = batch_first.std(axis=0, ddof=1) / math.sqrt(N_BATCHES)
    se_second = batch_second.std(axis=0, ddof=1) / math.sqrt(N_BATCHES)
    if stderr_cap is not None:
        worst = max(se_first.max(initial=0.0), se_second.max(initial=0.0))
        if worst > stderr_cap:
            raise NonConvergenceError(
                f"MCMC stderr {worst:.3e} exceeds cap {stderr_cap:.3e}")
    return MomentTable(first=first, second=second, log_partition=float("nan"),
                       method="mcmc", stderr_first=se_first,
                       stderr_second=se_second, batch_first=batch_first,
                       batch_second=batch_second)


# --- coupled-pair realizations and the overlap variance --------------------

def draw_pair_realization(pair: CoupledPair, realization: int):
    """Deterministically draw realization r of a coupled pair.

    Returns (system1, system2, disorder, residual_slices1, residual_slices2).
    Random structure (diluted clauses) is redrawn per realization, shared by
    both systems; residual Gaussians are drawn as coupled pairs with the
    pair's residual correlation.
    """
    s = pair.seed.stream(realization)
    sys1 = pair.system1.with_structure(s.child(9))
    sys2 = pair.system2.with_structure(s.child(9))
    disorder = sample_coupled(max(sys1.index_count, 1), pair.t, s.child(0))
    res1, res2 = [], []
    k = 0
    for r in sys1.residuals:
        if r.mode == "gaussian":
            d = sample_coupled(r.factors.cardinality, pair.residual_t,
                               s.child(1 + k))
            res1.append(d.g1)
            res2.append(d.g2)
            k += 1
    return sys1, sys2, disorder, res1, res2


def overlap_from_tables(table1: MomentTable, table2: MomentTable):
    """(<Q>, <Q^2>) assembled by replica factorization; Q == 1 when |E| = 0."""
    n_e = len(table1.first)
    if n_e == 0:
        return 1.0, 1.0
    q_mean = float(table1.first @ table2.first) / n_e
    q_sq = float((table1.second * table2.second).sum()) / n_e**2
    return q_mean, q_sq


def replica_variance(pair: CoupledPair, engine: str = "exact", *,
                     mcmc_config: Optional[McmcConfig] = None,
                     realization: int = 0):
    """Inner bond-overlap variance <Q^2> - <Q>^2 for one disorder realization.

    Returns (value, stderr); stderr is zero for the exact engine.
    """
    sys1, sys2, dis, res1, res2 = draw_pair_realization(pair, realization)
    g1 = dis.g1[:sys1.index_count]
    g2 = dis.g2[:sys2.index_count]
    if engine == "exact":
        t1 = exact_moments(sys1, g1, residual_slices=res1)
        t2 = exact_moments(sys2, g2, residual_slices=res2)
        q_mean, q_sq = overlap_from_tables(t1, t2)
        return q_sq - q_mean**2, 0.0
    if engine != "mcmc":
        raise ValueError(f"unknown engine {engine!r}")
    if mcmc_config is None:
        raise ValueError("mcmc engine needs an McmcConfig")
    if sys1.index_count == 0:
        return 0.0, 0.0
    s = pair.seed.stream(realization)
    t1 = mcmc_moments(sys1, g1, config=mcmc_config, seed=s.child(100),
                      residual_slices=res1)
    t2 = mcmc_moments(sys2, g2, config=mcmc_config, seed=s.child(101),
                      residual_slices=res2)
    q_mean, q_sq = overlap_from_tables(t1, t2)
    n_e = len(t1.first)
    vals = np.empty(N_BATCHES)
    for b in range(N_BATCHES):
        qm = float(t1.batch_first[b] @ t2.batch_first[b]) / n_e
        qs = float((t1.batch_second[b] * t2.batch_second[b]).sum()) / n_e**2
        vals[b] = qs - qm**2
    stderr = float(vals.std(ddof=1) / math.sqrt(N_BATCHES))
    return q_sq - q_mean**2, stderr
