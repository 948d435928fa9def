"""Simulation and verification toolkit for QLA/MaxWeight control of queueing
networks whose conditions follow a finite Markov chain."""
from ._accel import backend
from .controller import QLA, ControllerConfig, Randomized, Trace, qla_decide, simulate, simulate_replications
from .drift import BoundReport, check_drift, renewal_decompose, sweep, qla_bounds
from .dual import g, g_si, maximize_dual, optimal_stationary_cost, solve_convexified_lp, verify_strong_duality
from .markov import (
    MarkovChainSpec,
    bound_constants,
    return_and_hitting_moments,
    sample_path,
    stationary_distribution,
)
from .model import Action, NetworkSpec, SlacknessCertificate, compute_B, make_spec, verify_slackness
from .queues import lyapunov, step_queues
from .specfile import load_spec

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BoundReport",
    "ControllerConfig",
    "MarkovChainSpec",
    "NetworkSpec",
    "QLA",
    "Randomized",
    "SlacknessCertificate",
    "Trace",
    "backend",
    "bound_constants",
    "check_drift",
    "compute_B",
    "g",
    "g_si",
    "load_spec",
    "lyapunov",
    "make_spec",
    "maximize_dual",
    "optimal_stationary_cost",
    "qla_decide",
    "renewal_decompose",
    "return_and_hitting_moments",
    "sample_path",
    "simulate",
    "simulate_replications",
    "solve_convexified_lp",
    "stationary_distribution",
    "step_queues",
    "sweep",
    "qla_bounds",
    "verify_slackness",
    "verify_strong_duality",
]
