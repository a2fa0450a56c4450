"""Numba-jitted single-site Metropolis kernels.

One sweep proposes every site once in fixed index order, which keeps runs
reproducible given the pre-generated uniforms. Factor values are maintained
incrementally; factors listed in the incidence table of a site are exactly
those whose value changes when that site moves.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def run_prod_mcmc(spins, fvals, couplings, inc_off, inc_list,
                  sweeps, burn_in, thin, uniforms, record_idx, out):
    """Metropolis for scalar +-1 spins with product factors.

    spins: (n_sites,) float64 in {-1,+1}; fvals: current factor values;
    couplings: energy coefficient per factor; inc_off/inc_list: CSR incidence
    of odd-multiplicity factors per site; uniforms: (sweeps, n_sites);
    out: (n_meas, n_rec) measurement buffer filled in place.
    """
    n_sites = spins.shape[0]
    m = 0
    for s in range(sweeps):
        for i in range(n_sites):
            delta = 0.0
            for a in range(inc_off[i], inc_off[i + 1]):
                f = inc_list[a]
                delta -= 2.0 * couplings[f] * fvals[f]
            if delta >= 0.0 or uniforms[s, i] < np.exp(delta):
                spins[i] = -spins[i]
                for a in range(inc_off[i], inc_off[i + 1]):
                    f = inc_list[a]
                    fvals[f] = -fvals[f]
        if s >= burn_in and (s - burn_in) % thin == 0:
            if m < out.shape[0]:
                for r in range(record_idx.shape[0]):
                    out[m, r] = fvals[record_idx[r]]
                m += 1
    return m


@njit(cache=True)
def run_dot_mcmc(states, fvals, couplings, inc_off, inc_list, members,
                 gram, log_nu, sweeps, burn_in, thin, uniforms, proposals,
                 record_idx, out):
    """Metropolis for finite-state vector spins with scalar-product factors.

    states: (n_sites,) int64 indices into the state set; members: (n_fac, 2)
    site pairs; gram: pairwise scalar products of the states; proposals:
    (sweeps, n_sites) int64 in [0, n_states-2], mapped to a uniform draw
    over states other than the current one.
    """
    n_sites = states.shape[0]
    m = 0
    for s in range(sweeps):
        for i in range(n_sites):
            cur = states[i]
            cand = proposals[s, i]
            if cand >= cur:
                cand += 1
            delta = log_nu[cand] - log_nu[cur]
            for a in range(inc_off[i], inc_off[i + 1]):
                f = inc_list[a]
                p, q = members[f, 0], members[f, 1]
                if p == i and q == i:
                    new_val = gram[cand, cand]
                elif p == i:
                    new_val = gram[cand, states[q]]
                else:
                    new_val = gram[states[p], cand]
                delta += couplings[f] * (new_val - fvals[f])
            if delta >= 0.0 or uniforms[s, i] < np.exp(delta):
                states[i] = cand
                for a in range(inc_off[i], inc_off[i + 1]):
                    f = inc_list[a]
                    p, q = members[f, 0], members[f, 1]
                    fvals[f] = gram[states[p], states[q]]
        if s >= burn_in and (s - burn_in) % thin == 0:
            if m < out.shape[0]:
                for r in range(record_idx.shape[0]):
                    out[m, r] = fvals[record_idx[r]]
                m += 1
    return m
