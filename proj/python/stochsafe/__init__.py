"""Certified unsafe-probability bounds for polynomial stochastic systems."""

import json

from ._core import CertificateError, ConfigError, Problem, clopper_pearson, export_sdpa, load_problem
from . import _core

__all__ = [
    "CertificateError",
    "ConfigError",
    "Problem",
    "bound",
    "clopper_pearson",
    "export_sdpa",
    "load_problem",
    "risk",
    "simulate",
]


def bound(problem, order, allow_inexact=False):
    """Bound record {order, bound, solver_status, wall_time_s, residuals, certificate}."""
    return json.loads(_core._bound(problem, order, allow_inexact))


def risk(problem, order, allow_inexact=False):
    """Risk-contour record; `bound` holds the mean of v(t0, .) over the scaled box."""
    return json.loads(_core._risk(problem, order, allow_inexact))


def simulate(problem, n=5000, seed=0, dt=None):
    """Ever-hit estimate {p_hat, ci_lo, ci_hi, N, seed, ...}."""
    return json.loads(_core._simulate(problem, n, seed, dt))
