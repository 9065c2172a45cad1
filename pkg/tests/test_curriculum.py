import pytest

from mtrack.curriculum import (make_schedule, penalty_curriculum, scaled_penalty, step_schedule, table,
                               termination_curriculum, value_after)


def test_constants():
    t, p = termination_curriculum(), penalty_curriculum()
    assert (t.value, t.lo, t.hi, t.rate, t.direction) == (1.5, 0.3, 2.0, 2.5e-5, "decay")
    assert (p.value, p.lo, p.hi, p.rate, p.direction) == (0.1, 0.0, 1.0, 1e-4, "growth")


def test_one_step():
    assert step_schedule(termination_curriculum()).value == 1.5 * (1 - 2.5e-5)
    assert step_schedule(penalty_curriculum()).value == 0.1 * (1 + 1e-4)


def test_saturation():
    assert value_after(termination_curriculum(), 10 ** 7) == 0.3
    assert value_after(penalty_curriculum(), 10 ** 7) == 1.0


def test_penalty_scaling():
    assert scaled_penalty(penalty_curriculum(), -20.0) == pytest.approx(-2.0)


def test_table_rows():
    rows = list(table(5, every=2))
    assert [r[0] for r in rows] == [0, 2, 4, 5]
    assert rows[0][1:] == (1.5, 0.1)


@pytest.mark.parametrize("kw", [dict(initial=3.0, lo=0.0, hi=1.0, rate=0.1), dict(initial=0.5, lo=1.0, hi=0.0, rate=0.1),
                                dict(initial=0.5, lo=0.0, hi=1.0, rate=-0.1),
                                dict(initial=0.5, lo=0.0, hi=1.0, rate=0.1, direction="up")])
def test_validation(kw):
    with pytest.raises(ValueError):
        make_schedule(**kw)


def test_negative_k():
    with pytest.raises(ValueError):
        value_after(penalty_curriculum(), -1)
