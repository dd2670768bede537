"""cyclecert: certify and locate stable limit cycles of ODEs x' = -Ax + F(x).

The pipeline checks a three-part checklist (invariant box, unique unstable
equilibrium, spectral gap over the Lipschitz constant of F) and then finds
the guaranteed stable cycle with a Poincare return map and verifies it with
Floquet multipliers.
"""

from .certify import CertifyConfig, LimitCycleCertifier, TheoremVerdict, certify
from .equilibria import (EquilibriumInfo, find_equilibria, instability_spectrum,
                         routh_hurwitz_3, satellite_instability)
from .expressions import ExpressionError, parse_expression, parse_system
from .flow import (CycleInfo, CycleSearchError, CycleSettings, IntegrationError,
                   Trajectory, exponential_tracking_probe, graph_property_check,
                   integrate, liouville_check, locate_cycle, monodromy,
                   monodromy_from_anchor)
from .invariance import InvarianceReport, check_inward, empirical_trapping
from .linalg import (AsymmetricMatrixError, SymSpectrum, det, norm_1, norm_2,
                     norm_inf, sym_eigen)
from .lipschitz import (GapReport, LipschitzEstimate, cone_condition_check,
                        estimate_lipschitz, gap_report, region_scan)
from .systems import (BoxDomain, LinearChange, ModelError, OdeSystem,
                      apply_change, cell_domain, cell_system, hopf_domain,
                      hopf_oracle, satellite_domain, satellite_equilibrium,
                      satellite_system)

__version__ = "0.1.0"

__all__ = [
    "AsymmetricMatrixError", "BoxDomain", "CertifyConfig", "CycleInfo",
    "CycleSearchError", "CycleSettings", "EquilibriumInfo", "ExpressionError",
    "GapReport", "IntegrationError", "InvarianceReport", "LimitCycleCertifier",
    "LinearChange", "LipschitzEstimate", "ModelError", "OdeSystem",
    "SymSpectrum", "TheoremVerdict", "Trajectory", "apply_change",
    "cell_domain", "cell_system", "certify", "check_inward",
    "cone_condition_check", "det", "empirical_trapping", "estimate_lipschitz",
    "exponential_tracking_probe", "find_equilibria", "gap_report",
    "graph_property_check", "hopf_domain", "hopf_oracle",
    "instability_spectrum", "integrate", "liouville_check", "locate_cycle",
    "monodromy",
    "monodromy_from_anchor", "norm_1", "norm_2", "norm_inf",
    "parse_expression", "parse_system", "region_scan", "routh_hurwitz_3",
    "satellite_domain", "satellite_equilibrium", "satellite_instability",
    "satellite_system", "sym_eigen",
]
