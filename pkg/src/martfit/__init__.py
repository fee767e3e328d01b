"""Fit martingales to prescribed marginal laws.

Validate families of marginals, interpolate them in time along the extremal
call surface, sample exact martingale paths through a max-ladder Skorokhod
embedding, and cross-check smooth surfaces with local volatility.
"""
from __future__ import annotations

from .diagnostics import (Check, DiagnosticsReport, convex_order_test, crossing_test,
                          empirical_call, fit_report, martingale_test, pair_crosses)
from .errors import DomainError, MartfitError, ParseError, ValidationError
from .extremal import (BarrierFunctions, ExtremalSurface, build_fstar, compute_alpha,
                       extremal_chain, extremal_pair_call, quantile_beta, tangent_g)
from .families import normal_call, quantize
from .formats import (format_marginals, parse_gridded, parse_marginals, read_gridded,
                      read_marginals, write_marginals)
from .localvol import LocalVolGrid, dupire_sigma, euler_simulate
from .marginals import (CallSlice, CallSurface, GriddedSurface, MarginalDistribution,
                        ValidationReport, call_from_marginal, check_convex_order,
                        marginal_from_call_slice, mean, validate_cp)
from .metric import metric_d
from .scenarios import build_scenario, gaussian_family, scenario_gap, scenario_sticky
from .skorokhod import (PathEnsemble, PathSample, TransitionBarrier, build_barrier,
                        exact_kernel, jump_time_of, mix_kernel, path_value,
                        sample_transition, simulate, simulate_paths)

__version__ = "0.1.0"
