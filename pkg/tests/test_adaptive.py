import numpy as np
import pytest
from hypothesis import given, strategies as st

from mtrack.adaptive import TrackingFactorState, sigma_trace, update_error_ema, update_sigma
from mtrack.errors import DomainError
from mtrack.rewards import TrackingFactors


def fresh(**kw):
    return TrackingFactorState.from_factors(TrackingFactors.preset("ours_init"), ("jpos", "jvel"), **kw)


def test_ema_formula():
    s = fresh()
    update_error_ema(s, {"jpos": 0.1, "jvel": 3.0})
    np.testing.assert_allclose(s.x_hat, [0.999 * 0.3 + 0.001 * 0.1, 0.999 * 30 + 0.001 * 3.0], rtol=1e-15)


def test_sigma_takes_minimum():
    s = fresh(x_hat=[0.1, 50.0])
    update_sigma(s)
    np.testing.assert_array_equal(s.sigma, [0.1, 30.0])


@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 50)), min_size=1, max_size=40))
def test_sigma_never_grows(errors):
    s = fresh(ema_lambda=0.5)
    for e in errors:
        update_error_ema(s, e)
        update_sigma(s)
    assert (np.diff(sigma_trace(s), axis=0) <= 0).all()
    assert (s.sigma > 0).all()


def test_floor_keeps_sigma_positive():
    s = fresh(ema_lambda=0.0)
    update_error_ema(s, [0.0, 0.0])
    update_sigma(s)
    assert (s.sigma == 1e-9).all()


def test_apply_to_only_touches_terms():
    s = fresh(x_hat=[0.01, 0.02])
    update_sigma(s)
    f = s.apply_to(TrackingFactors.preset("ours_init"))
    assert f.jpos == 0.01 and f.jvel == 0.02 and f.pos == 0.015


def test_snapshot_is_independent():
    s = fresh()
    snap = s.snapshot()
    update_error_ema(s, [0.0, 0.0])
    assert snap.x_hat[0] == 0.3


@pytest.mark.parametrize("kw", [dict(ema_lambda=1.0), dict(x_hat=[-1.0, 1.0]), dict(x_hat=[1.0])])
def test_validation(kw):
    with pytest.raises(DomainError):
        fresh(**kw)


def test_bad_error_input():
    with pytest.raises(DomainError):
        update_error_ema(fresh(), [-0.1, 0.0])
