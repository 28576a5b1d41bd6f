"""Python access to the DUST-MNS core library."""

import json

from ._dustmns import (
    NumericalError,
    ValidationError,
    beta_model_re,
    calibration_map,
    delta_theta,
    exact_bias,
    lambda_bound,
    leading_bias,
    max_exceed_prob,
    re_mns_vs_dustsrs,
    reg_inc_beta,
    table_csv,
    theta_star,
    var_dust_mns,
)
from ._dustmns import _estimate_dust_mns, _estimate_tau

__all__ = [
    "NumericalError",
    "ValidationError",
    "beta_model_re",
    "calibration_map",
    "delta_theta",
    "estimate",
    "exact_bias",
    "lambda_bound",
    "leading_bias",
    "max_exceed_prob",
    "re_mns_vs_dustsrs",
    "reg_inc_beta",
    "table_csv",
    "theta_star",
    "var_dust_mns",
]


def estimate(r_n, n, k, tau=None):
    """Estimate theta from r_n exceeding nominees out of n sets of size k.

    With tau, the Kendall tau working model for imperfect ranking is inverted.
    Returns a dict with the report keys plus a "details" entry.
    """
    if tau is None:
        return json.loads(_estimate_dust_mns(r_n, n, k))
    return json.loads(_estimate_tau(r_n, n, k, tau))
