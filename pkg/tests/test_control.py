import numpy as np
import pytest

from hormander import control
from hormander.vfield import VectorField


def test_constant_fields_closed_form():
    U, V = VectorField.constant([1.0, 0.0]), VectorField.constant([0.0, 2.0])
    for n in (3, 8):
        num = control.oscillatory_control(U, V, n, 1.0)
        assert np.allclose(num, control.constant_fields_endpoint(U, V, n, 1.0), atol=1e-9)


def test_closed_form_needs_constants():
    with pytest.raises(ValueError):
        control.constant_fields_endpoint(VectorField.parse("1 ; 0"), VectorField.parse("0 ; x1"), 4, 1.0)


def test_area_rule_converges():
    U, V = VectorField.parse("1 ; 0"), VectorField.parse("0 ; x1")
    rows = control.area_sweep(U, V, (8, 32))
    assert rows[1].error < rows[0].error < 0.2
    # [U, V] = e2 for this pair, so the reference flow moves x2 by T/2
    assert rows[0].reference == pytest.approx((0.0, 0.5), abs=1e-12)


def test_drift_perturbation_deviation_halves():
    U, V = VectorField.parse("1 ; 0"), VectorField.parse("0 ; x1")
    a, b = control.drift_sweep(U, V, (8, 16))
    assert a.rms_deviation / b.rms_deviation == pytest.approx(2.0, abs=0.3)


def test_effective_drift_is_closer_than_plain_flow():
    U, V = VectorField.parse("1 ; 0"), VectorField.parse("0 ; x1")
    n = 8
    x = control.drift_perturbation_control(U, V, n, 1.0)
    eff = control.effective_drift_flow(U, V, n, 1.0)
    plain = control.bracket_flow(U, V, 1.0, scale=0.0, with_u=1.0, n_freq=n)
    assert np.linalg.norm(x - eff) < np.linalg.norm(x - plain)
