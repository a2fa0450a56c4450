"""Factor systems Y(sigma) = sum_e g_e f_e(sigma) and the model families.

Every model is expressed as a "chaos" factor family (the one carrying the
correlated Gaussians) over a reference measure that may itself be reweighted
by residual families: Gaussian-weighted ones drawn from independent streams,
or deterministic ones (e.g. a ferromagnetic bond term).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .disorder import CoupledDisorder, SeedSpec, sample_coupled
from .topology import (Graph, IndexFamily, diluted_clauses, graph_edge_family,
                       p_tuple_family, site_family)


@dataclass(frozen=True, eq=False)
class FactorFamily:
    """A family of bond functions, identified by the sites each factor touches.

    kind "prod": f_e(sigma) = product of scalar spins at the member sites.
    kind "dot":  f_e(sigma) = scalar product of the two member site vectors.
    """

    kind: str
    members: tuple

    def __post_init__(self):
        if self.kind not in ("prod", "dot"):
            raise ValueError(f"unknown factor kind {self.kind!r}")
        if self.kind == "dot" and any(len(m) != 2 for m in self.members):
            raise ValueError("dot factors must have exactly two sites")

    @property
    def cardinality(self) -> int:
        return len(self.members)


@dataclass(frozen=True, eq=False)
class ResidualFamily:
    """A reference-measure reweighting term gamma * sum_e c_e f_e(sigma).

    mode "gaussian": c_e are standard Gaussians drawn per disorder replica
    from streams independent of the chaos Gaussians.
    mode "fixed": c_e are the stored coefficients (deterministic term).
    """

    gamma: float
    factors: FactorFamily
    mode: str
    coeffs: Optional[tuple] = None

    def __post_init__(self):
        if self.mode not in ("gaussian", "fixed"):
            raise ValueError(f"unknown residual mode {self.mode!r}")
        if self.mode == "fixed" and self.coeffs is None:
            object.__setattr__(self, "coeffs",
                               tuple(1.0 for _ in self.factors.members))


@dataclass(frozen=True, eq=False)
class FactorSystem:
    """One system: chaos family, coupling strength, and reference measure.

    spin_kind "ising": spins in {-1,+1}; spin_kind "vector": each spin is a
    row of spin_states (a finite subset of R^d) drawn under state_weights.
    """

    family: str
    indices: IndexFamily
    n_sites: int
    spin_kind: str
    chaos: FactorFamily
    gamma: float
    residuals: tuple = ()
    spin_states: Optional[np.ndarray] = None
    state_weights: Optional[np.ndarray] = None
    scale_factor: float = 1.0
    regen: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.spin_kind not in ("ising", "vector"):
            raise ValueError(f"unknown spin_kind {self.spin_kind!r}")
        if self.spin_kind == "vector":
            if self.spin_states is None or self.state_weights is None:
                raise ValueError("vector systems need spin_states and weights")
            w = np.asarray(self.state_weights, dtype=np.float64)
            if w.ndim != 1 or len(w) != len(self.spin_states) or np.any(w <= 0):
                raise ValueError("state_weights must be positive, one per state")
            if abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("state_weights must sum to 1")

    @property
    def index_count(self) -> int:
        return self.chaos.cardinality

    def with_structure(self, seed: SeedSpec) -> "FactorSystem":
        """Redraw random structure (diluted clauses) for a new replica."""
        if self.regen is None:
            return self
        return self.regen(seed)


def bond_eval(system: FactorSystem, member, sigma) -> float:
    """Evaluate one bond function f_e on a configuration.

    For Ising systems sigma is a +-1 sequence over sites; for vector systems
    sigma is a sequence of state indices into spin_states.
    """
    if system.chaos.kind == "prod":
        val = 1.0
        for i in member:
            val *= sigma[i]
        return float(val)
    i, j = member
    a = system.spin_states[sigma[i]]
    b = system.spin_states[sigma[j]]
    return float(np.dot(a, b))


def evaluate_y(system: FactorSystem, g: np.ndarray, sigma) -> float:
    """Naive reference summation Y(sigma) = sum_e g_e f_e(sigma)."""
    return float(sum(ge * bond_eval(system, m, sigma)
                     for ge, m in zip(g, system.chaos.members)))


def audit_bounded(system: FactorSystem, n_samples: int, seed: SeedSpec) -> float:
    """Randomized |f_e| <= 1 audit; returns the max |f_e| observed."""
    rng = seed.rng()
    worst = 0.0
    n_e = system.index_count
    for _ in range(n_samples):
        member = system.chaos.members[rng.integers(n_e)] if n_e else None
        if member is None:
            break
        if system.spin_kind == "ising":
            sigma = rng.choice([-1, 1], size=system.n_sites)
        else:
            sigma = rng.integers(0, len(system.spin_states), size=system.n_sites)
        worst = max(worst, abs(bond_eval(system, member, sigma)))
    return worst


@dataclass(frozen=True, eq=False)
class CoupledPair:
    """Two systems sharing indices and bond functions; only the coupling
    strengths and the Gaussian streams differ."""

    system1: FactorSystem
    system2: FactorSystem
    t: float
    seed: SeedSpec
    disorder: CoupledDisorder
    residual_t: float = 1.0

    @property
    def gamma1(self) -> float:
        return self.system1.gamma

    @property
    def gamma2(self) -> float:
        return self.system2.gamma


def _same_structure(a: FactorSystem, b: FactorSystem) -> bool:
    if a.chaos.kind != b.chaos.kind or a.chaos.members != b.chaos.members:
        return False
    if a.spin_kind != b.spin_kind or a.n_sites != b.n_sites:
        return False
    if len(a.residuals) != len(b.residuals):
        return False
    for ra, rb in zip(a.residuals, b.residuals):
        if (ra.factors.members != rb.factors.members or ra.mode != rb.mode
                or ra.gamma != rb.gamma or ra.coeffs != rb.coeffs):
            return False
    return True


def couple(system_a: FactorSystem, system_b: FactorSystem, t: float,
           seed: SeedSpec, residual_t: float = 1.0) -> CoupledPair:
    """Attach one correlated disorder realization to a pair of systems."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if not _same_structure(system_a, system_b):
        raise ValueError("systems do not share index family and bond functions")
    disorder = sample_coupled(max(system_a.index_count, 1), t,
                              seed.stream(0).child(0))
    return CoupledPair(system1=system_a, system2=system_b, t=t, seed=seed,
                       disorder=disorder, residual_t=residual_t)


# --- model constructors ----------------------------------------------------

def make_ea(graph: Graph, beta: float, h: float = 0.0,
            chaos: str = "bond") -> FactorSystem:
    """Edwards-Anderson model: Gaussian bonds, optional Gaussian site fields.

    `chaos` selects which family carries the correlated Gaussians; the other
    (if present) becomes a Gaussian residual in the reference measure.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if h < 0:
        raise ValueError("h must be non-negative")
    bond = FactorFamily("prod", graph.edges)
    sites = FactorFamily("prod", tuple((i,) for i in range(graph.vertex_count)))
    if chaos == "bond":
        residuals = ()
        if h > 0:
            residuals = (ResidualFamily(gamma=h, factors=sites, mode="gaussian"),)
        return FactorSystem(family="ea_bond", indices=graph_edge_family(graph),
                            n_sites=graph.vertex_count, spin_kind="ising",
                            chaos=bond, gamma=beta, residuals=residuals)
    if chaos == "field":
        if h <= 0:
            raise ValueError("field chaos requires h > 0")
        residuals = (ResidualFamily(gamma=beta, factors=bond, mode="gaussian"),)
        return FactorSystem(family="ea_site", indices=site_family(graph.vertex_count),
                            n_sites=graph.vertex_count, spin_kind="ising",
                            chaos=sites, gamma=h, residuals=residuals)
    raise ValueError(f"chaos must be 'bond' or 'field', got {chaos!r}")


def make_rfim(graph: Graph, beta: float, h: float,
              bond_sign: float = 1.0) -> FactorSystem:
    """Random field Ising model: deterministic (ferromagnetic) bonds of
    strength beta plus a Gaussian site field of strength h.

    bond_sign=-1 flips the bonds to antiferromagnetic (negative control for
    the positive-correlation hypothesis).
    """
    if beta < 0 or h <= 0:
        raise ValueError("need beta >= 0 and h > 0")
    sites = FactorFamily("prod", tuple((i,) for i in range(graph.vertex_count)))
    residuals = ()
    if beta > 0:
        bond = FactorFamily("prod", graph.edges)
        residuals = (ResidualFamily(gamma=beta, factors=bond, mode="fixed",
                                    coeffs=tuple(bond_sign for _ in graph.edges)),)
    return FactorSystem(family="rfim", indices=site_family(graph.vertex_count),
                        n_sites=graph.vertex_count, spin_kind="ising",
                        chaos=sites, gamma=h, residuals=residuals)


def make_field_system(n_sites: int, gamma: float) -> FactorSystem:
    """Pure Gaussian-field system: f_i(sigma) = sigma_i, no bonds."""
    sites = FactorFamily("prod", tuple((i,) for i in range(n_sites)))
    return FactorSystem(family="field", indices=site_family(n_sites),
                        n_sites=n_sites, spin_kind="ising",
                        chaos=sites, gamma=gamma)


def make_mixed_pspin(n: int, betas: dict, chaos_p: int) -> FactorSystem:
    """Mixed p-spin model; the p = chaos_p term carries the chaos Gaussians
    with gamma = beta_p / N^{(p-1)/2}; every other p-term folds into the
    reference measure with its own independent Gaussians."""
    if chaos_p not in betas or betas[chaos_p] <= 0:
        raise ValueError("chaos_p must have a positive beta entry")
    chaos_fam = FactorFamily("prod", p_tuple_family(n, chaos_p).members)
    gamma = betas[chaos_p] / n ** ((chaos_p - 1) / 2.0)
    residuals = []
    for p, beta_p in sorted(betas.items()):
        if p == chaos_p or beta_p == 0:
            continue
        if beta_p < 0:
            raise ValueError("beta_p must be non-negative")
        fam = FactorFamily("prod", p_tuple_family(n, p).members)
        residuals.append(ResidualFamily(gamma=beta_p / n ** ((p - 1) / 2.0),
                                        factors=fam, mode="gaussian"))
    return FactorSystem(family="mixed_pspin", indices=p_tuple_family(n, chaos_p),
                        n_sites=n, spin_kind="ising", chaos=chaos_fam,
                        gamma=gamma, residuals=tuple(residuals))


def make_vector_sk(n: int, points: Sequence[Sequence[float]], beta: float,
                   nu: Sequence[float]) -> FactorSystem:
    """SK-type model with spins in a finite point set S in R^d.

    Points are rescaled (and the factor recorded) if any pairwise scalar
    product exceeds 1 in absolute value, keeping |f_e| <= 1.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    states = np.asarray(points, dtype=np.float64)
    if states.ndim != 2 or len(states) == 0:
        raise ValueError("points must be a non-empty set of R^d vectors")
    nu = np.asarray(nu, dtype=np.float64)
    if len(nu) != len(states) or np.any(nu <= 0) or abs(nu.sum() - 1.0) > 1e-9:
        raise ValueError("nu must be a positive probability vector over points")
    gram_max = float(np.max(np.abs(states @ states.T)))
    scale = 1.0
    if gram_max > 1.0:
        scale = math.sqrt(gram_max)
        states = states / scale
    members = tuple((i, j) for i in range(n) for j in range(n))
    fam = FactorFamily("dot", members)
    indices = IndexFamily(kind="p_tuples", cardinality=n * n,
                          members=members, n_sites=n)
    return FactorSystem(family="vector_sk", indices=indices, n_sites=n,
                        spin_kind="vector", chaos=fam, gamma=beta / math.sqrt(n),
                        spin_states=states, state_weights=nu,
                        scale_factor=scale)


def make_diluted(n: int, lam: float, p: int, beta: float,
                 seed: SeedSpec) -> FactorSystem:
    """Diluted p-spin model: Poisson(lam*n) clauses of uniform site indices.

    The clause structure is drawn from `seed` and is independent of the
    Gaussians; with_structure(new_seed) redraws it for a fresh replica.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    clauses = diluted_clauses(n, lam, p, seed)
    fam = FactorFamily("prod", clauses.members)
    return FactorSystem(family="diluted", indices=clauses, n_sites=n,
                        spin_kind="ising", chaos=fam, gamma=beta,
                        regen=lambda s: make_diluted(n, lam, p, beta, s))
