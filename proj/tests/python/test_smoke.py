import math

import pytest

import dustmns


def test_estimate_counts():
    report = dustmns.estimate(10, 20, 3)
    assert report["theta_hat"] == pytest.approx(1 - 0.5 ** (1 / 3), abs=1e-12)
    assert report["method"] == "dust_mns"


def test_tau_model():
    report = dustmns.estimate(10, 20, 2, tau=0.5)
    assert report["theta_hat"] == pytest.approx((5 - math.sqrt(17)) / 2, abs=1e-8)


def test_kernels():
    assert dustmns.reg_inc_beta(0.3, 2, 3) == pytest.approx(0.3483, abs=5e-5)
    assert round(dustmns.theta_star(5), 4) == 0.4643
    assert dustmns.calibration_map(dustmns.max_exceed_prob(0.2, 3), 3) == pytest.approx(0.2)


def test_table_csv():
    text = dustmns.table_csv("theta_star")
    assert text.splitlines()[0] == "k,theta_star"
    assert "5,0.4643" in text.splitlines()


def test_errors_are_typed():
    with pytest.raises(dustmns.NumericalError):
        dustmns.theta_star(1)
