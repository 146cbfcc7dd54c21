"""Spatial birth-death link dynamics on a torus: exact event simulation,
stability threshold, steady-state fixed-point predictions, Palm spatial
statistics, and the cell-coarsened validation chain."""

from ._kernels import backend_name, get_kernels
from .errors import ConfigError, NumericsError, PreconditionError
from .torus import (Bounded, IntegralResult, PathLossModel, PowerLaw, Tabulated,
                    TorusDomain, constant_pathloss, pathloss_integral_a,
                    torus_distance)
from .network import (ChannelParams, Link, LinkConfiguration, MimoConfig,
                      faded_rate, interference, interference_per_link,
                      mimo_channel_draws, mimo_indep_rate, shannon_rate,
                      workload_derivative)
from .simulator import (FileSizeDist, RunMetrics, SimulationConfig, delay_ccdf,
                        delay_correlation, empirical_ccdf,
                        phase_transition_probe, run)
from .comparators import mm1_ps_comparator, mminf_comparator
from .heuristics import (HeuristicSolution, critical_lambda, heuristics_sweep,
                         log_moment_integral, light_traffic_beta,
                         mimo_critical_lambda, poisson_heuristic_beta,
                         second_moment_approx, second_order_beta)
from .spatial_stats import (PalmEstimate, ShotNoiseKernel, binomial_surrogate,
                            palm_laplace_interference, palm_shot_noise,
                            rate_conservation_check, ripley_k)
from .chain import (FluidTrajectory, Tessellation, build_tessellation,
                    coupled_dominance_run, drain_time_bound, fluid_ode,
                    simulate_cell_chain)

__version__ = "0.1.0"
