"""Trace and extension machinery for Sobolev and Besov functions on weighted point clouds."""
from .space import (Ball, CodimBounds, MassExponents, PointCloudSpace, Region, ScalarField,
                    ball_mass, ball_members, codim_hausdorff, estimate_codim_bounds,
                    estimate_mass_exponents, load_field, load_space, save_field, save_space,
                    shell_mass)
from .domains import DomainKind, DomainSpec, build_chain, generate, john_check, uniform_check
from .functionals import (BesovParams, GradientPair, besov_norm_bp, besov_norm_gks,
                          frac_maximal, inequality_suite, select_small_row)
from .trace import TraceReport, detect_no_trace, trace, trace_field, weighted_trace
from .whitney import WhitneyCover, build_cover, check_cover, partition_of_unity
from .extension import (ExtensionReport, extend_besov, extend_lp, lipschitz_approximation,
                        roundtrip_error)

__version__ = "0.1.0"
