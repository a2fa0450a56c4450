"""Correlated Gaussian disorder, Hermite polynomials, and seeded random streams.

Hermite polynomials here are always the probabilists' convention (weight
e^{-x^2/2}, recurrence He_{k+1}(x) = x He_k(x) - k He_{k-1}(x)), NOT the
physicists' convention. Under the standard Gaussian they are orthogonal
with E He_k(g)^2 = k!.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import NonConvergenceError


@dataclass(frozen=True)
class SeedSpec:
    """Deterministic stream identity: (master_seed, stream_id) plus a child path.

    Distinct (master_seed, stream_id, path) triples give statistically
    independent streams via numpy's SeedSequence spawning; identical triples
    give bit-identical draws.
    """

    master_seed: int
    stream_id: int = 0
    path: tuple = ()

    def __post_init__(self):
        if not (0 <= self.master_seed < 2**64):
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.stream_id < 0:
            raise ValueError("stream_id must be non-negative")

    def rng(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed,
                                     spawn_key=(self.stream_id, *self.path))
        return np.random.default_rng(seq)

    def child(self, k: int) -> "SeedSpec":
        """Derived independent sub-stream."""
        return replace(self, path=self.path + (k,))

    def stream(self, stream_id: int) -> "SeedSpec":
        """Same master seed, different top-level stream (disorder replica index)."""
        return replace(self, stream_id=stream_id)


@dataclass(frozen=True)
class CoupledDisorder:
    """Per-index Gaussian pairs (g1[e], g2[e]) with cross-correlation t.

    Constructed from the latent triple (z, z1, z2) of independent standard
    Gaussians via g1 = sqrt(t) z + sqrt(1-t) z1, g2 = sqrt(t) z + sqrt(1-t) z2.
    The latent arrays are kept so downstream checks can reuse them.
    """

    index_count: int
    t: float
    g1: np.ndarray
    g2: np.ndarray
    z: np.ndarray
    z1: np.ndarray
    z2: np.ndarray


def sample_coupled(index_count: int, t: float, seed: SeedSpec) -> CoupledDisorder:
    """Draw |E| correlated Gaussian pairs with unit marginals and correlation t."""
    if index_count <= 0:
        raise ValueError("index_count must be positive")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"correlation t must lie in [0, 1], got {t}")
    rng = seed.rng()
    z, z1, z2 = rng.standard_normal((3, index_count))
    st, s1t = math.sqrt(t), math.sqrt(1.0 - t)
    g1 = st * z + s1t * z1
    g2 = st * z + s1t * z2
    return CoupledDisorder(index_count=index_count, t=t,
                           g1=g1, g2=g2, z=z, z1=z1, z2=z2)


def hermite_eval(k: int, x):
    """Probabilists' Hermite polynomial He_k(x) by the three-term recurrence.

    Accepts scalars or arrays; vectorized over x.
    """
    if k < 0:
        raise ValueError("degree k must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.ones_like(x)
    if k == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for j in range(1, k):
        h, h_prev = x * h - j * h_prev, h
    return h if h.ndim else float(h)


def hermite_second_moment(k: int) -> float:
    """E He_k(g)^2 = k! for a standard Gaussian g."""
    if k < 0:
        raise ValueError("degree k must be non-negative")
    return float(math.factorial(k))


@lru_cache(maxsize=None)
def gauss_hermite_nodes(order: int):
    """Cached nodes and probability weights for E F(g) = sum w_i F(x_i)."""
    if order < 1:
        raise ValueError("quadrature order must be positive")
    x, w = np.polynomial.hermite_e.hermegauss(order)
    return x, w / math.sqrt(2.0 * math.pi)


def gaussian_expectation(func: Callable, order: int = 80) -> float:
    """E F(g) over the standard Gaussian by Gauss-Hermite quadrature."""
    x, w = gauss_hermite_nodes(order)
    return float(w @ np.asarray(func(x), dtype=np.float64))


def hermite_ibp_residual(k: int, func: Callable, dfunc: Callable,
                         quadrature_order: int = 80) -> float:
    """|E He_k(g)F(g) - E He_{k-1}(g)F'(g)|, a self-test of the math stack.

    Evaluated at two quadrature orders; raises NonConvergenceError if they
    disagree by more than 1e-8.
    """
    if k < 1:
        raise ValueError("degree k must be positive")
    if quadrature_order < 40:
        raise ValueError("quadrature_order must be >= 40")

    def residual(order):
        lhs = gaussian_expectation(lambda x: hermite_eval(k, x) * func(x), order)
        rhs = gaussian_expectation(lambda x: hermite_eval(k - 1, x) * dfunc(x), order)
        return abs(lhs - rhs)

    r_lo = residual(quadrature_order)
    r_hi = residual(quadrature_order + 8)
    if abs(r_lo - r_hi) > 1e-8:
        raise NonConvergenceError(
            f"hermite_ibp_residual: orders {quadrature_order} and "
            f"{quadrature_order + 8} disagree by {abs(r_lo - r_hi):.3e}")
    return r_hi
