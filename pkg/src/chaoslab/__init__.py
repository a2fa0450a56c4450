"""Numerical verification of quenched variance bounds for Gaussian-disorder
spin systems: disorder chaos of the bond overlap, self-averaging of bond
magnetizations, site overlaps under positive spin correlation, and Hermite
random fields."""

__version__ = "0.1.0"

from .disorder import (CoupledDisorder, SeedSpec, gaussian_expectation,
                       hermite_eval, hermite_ibp_residual,
                       hermite_second_moment, sample_coupled)
from .errors import (CapacityError, ChaoslabError, HypothesisFailedError,
                     NonConvergenceError)
from .gibbs import (McmcConfig, MomentTable, exact_moments, mcmc_moments,
                    replica_variance)
from .models import (CoupledPair, FactorFamily, FactorSystem, ResidualFamily,
                     couple, make_diluted, make_ea, make_field_system,
                     make_mixed_pspin, make_rfim, make_vector_sk)
from .observables import (QuenchedVariance, WeightVector,
                          bond_overlap_variance, field_variance, fkg_check,
                          intermediate_identity_check, magnetization_variance,
                          site_overlap_variance)
from .bounds import (BoundReport, CkEstimate, diluted_tail, estimate_ck,
                     rhs_chatterjee_ref, rhs_family, rhs_thm2_1, run_theorem)
from .topology import (Graph, IndexFamily, complete_graph, diluted_clauses,
                       lattice_graph, read_graph, write_graph)
