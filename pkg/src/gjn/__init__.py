"""Product-form steady-state approximation for generalized Jackson networks."""

from .approx import ApproxModel, UnstableNetworkError, build_approx
from .flow import TrafficSolution, compute_w, oracle_w_linear, oracle_w_montecarlo, solve_traffic
from .network import DistributionSpec, NetworkError, NetworkSpec, sample, validate
from .sim import SimConfig, SimEstimate, jackson_oracle, simulate
from .stats import ContingencyTable, batch_ci, chi2_sf, g_test, joint_product_report

__all__ = [
    "ApproxModel",
    "ContingencyTable",
    "DistributionSpec",
    "NetworkError",
    "NetworkSpec",
    "SimConfig",
    "SimEstimate",
    "TrafficSolution",
    "UnstableNetworkError",
    "batch_ci",
    "build_approx",
    "chi2_sf",
    "compute_w",
    "g_test",
    "jackson_oracle",
    "joint_product_report",
    "oracle_w_linear",
    "oracle_w_montecarlo",
    "sample",
    "simulate",
    "solve_traffic",
    "validate",
]
