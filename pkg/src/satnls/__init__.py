"""Numerical construction and verification of compactly supported
self-similar states of the saturated Schrodinger equation."""

from .mesh import (ComplexGridFn, DiscreteOperator, Mesh, build_mesh, duality,
                   h1_norm, h1_seminorm, laplacian, lq_norm, norms,
                   poincare_constant)
from .saturation import (RegLevel, SectionPolicy, modulus_clamp,
                         regularized_nonlinearity, regularized_sign,
                         saturated_section)
from .solver import (AdmissibilityReport, ProblemSpec, SolveConfig,
                     SolveReport, apriori_audit, check_admissibility,
                     null_threshold, solve_regularized, solve_saturated,
                     weak_residual)
from .gauge import (SelfSimilarParams, SpaceTimeField, componentwise_residual,
                    evolution_residual, gauge_forward, gauge_inverse,
                    profile_spec, reconstruct, reconstruct_section, rescale,
                    time_continuity_check)
from .support import (LocalEnergyProbe, SupportReport, dead_core_scan,
                      local_energy, multi_bump, support_expansion,
                      support_report)
from .audit import (AuditResult, lemma_bounds, symmetry_audit,
                    uniqueness_probe)

__version__ = "0.1.0"
