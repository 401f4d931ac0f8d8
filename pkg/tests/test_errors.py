import pickle

import numpy as np
import pytest

import laplace_learn as ll


@pytest.mark.parametrize(
    "cls, base",
    [
        (ll.StructureError, ValueError),
        (ll.DisconnectedGraphError, ValueError),
        (ll.PositiveDefinitenessError, ArithmeticError),
        (ll.PivotingError, ArithmeticError),
        (ll.NonConvergenceWarning, RuntimeWarning),
        (ll.DisconnectedGraphWarning, RuntimeWarning),
    ],
)
def test_hierarchy(cls, base):
    assert issubclass(cls, base)
    assert cls.__module__ == "laplace_learn"


def test_pickle():
    e = pickle.loads(pickle.dumps(ll.StructureError("bad mask")))
    assert type(e) is ll.StructureError
    assert str(e) == "bad mask"


def test_numerical_errors_are_not_validation_errors():
    # The CLI maps these to different exit codes.
    with pytest.raises(ArithmeticError) as catcher:
        ll.kkt_report(np.zeros((2, 2)), np.eye(2), ll.ConnectivityMask.full(2), "ggl")
    assert not isinstance(catcher.value, ValueError)


def test_warning_is_not_an_error():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((20, 4))
    cfg = ll.EstimatorConfig(epsilon=1e-15, max_cycles=1)
    with pytest.warns(ll.NonConvergenceWarning):
        result = ll.estimate_ggl(ll.build_statistic(x), ll.ConnectivityMask.full(4), cfg=cfg)
    assert result.theta.kind is ll.LaplacianClass.GGL
