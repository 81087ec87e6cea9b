import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levy_stop import (
    BrownianDrift,
    CramerLundbergExp,
    DomainError,
    ModelError,
    StableSN,
    laplace_exponent,
    phi_right_inverse,
)
from levy_stop.levy_model import model_to_dict


def test_laplace_exponent_values(jump_model):
    assert laplace_exponent(jump_model, 1.0) == pytest.approx(0.15, abs=1e-14)
    assert laplace_exponent(BrownianDrift(0.0, math.sqrt(2.0)), 3.0) == pytest.approx(9.0, rel=1e-14)
    assert laplace_exponent(StableSN(1.5), 4.0) == pytest.approx(8.0, rel=1e-14)


def test_laplace_exponent_vectorised(jump_model):
    lam = np.array([0.0, 0.5, 1.0, 2.0])
    out = laplace_exponent(jump_model, lam)
    assert out.shape == lam.shape
    assert out[0] == 0.0


def test_negative_argument_rejected(jump_model):
    with pytest.raises(DomainError):
        laplace_exponent(jump_model, -0.1)


@pytest.mark.parametrize(
    "build",
    [
        lambda: BrownianDrift(0.0, 0.0),
        lambda: CramerLundbergExp(-0.1, 0.0, 1.0, 1.0),
        lambda: CramerLundbergExp(0.1, 0.1, -1.0, 1.0),
        lambda: CramerLundbergExp(0.1, 0.1, 1.0, 0.0),
        lambda: StableSN(1.0),
        lambda: StableSN(2.5),
        lambda: BrownianDrift(float("nan"), 1.0),
    ],
)
def test_invalid_parameters(build):
    with pytest.raises(ModelError):
        build()


def test_right_inverse_examples(jump_model):
    assert phi_right_inverse(BrownianDrift(0.0, math.sqrt(2.0)), 1.0) == pytest.approx(1.0, abs=1e-12)
    phi = phi_right_inverse(jump_model, 0.18)
    # frozen from brentq on psi(l) - 0.18 over [0.5, 3]; the quoted "about 1.1627" is 1.16259 rounded up
    assert phi == pytest.approx(1.1625914087, abs=1e-9)
    assert phi == pytest.approx(1.1627, abs=1.5e-4)
    assert laplace_exponent(jump_model, phi) == pytest.approx(0.18, abs=1e-10)
    assert phi_right_inverse(jump_model, 0.0) == 0.0


def test_right_inverse_with_negative_drift():
    # psi(l) = -l + l^2 / 2 has roots 0 and 2, so Phi(0) = 2
    assert phi_right_inverse(BrownianDrift(-1.0, 1.0), 0.0) == pytest.approx(2.0, abs=1e-11)


def test_right_inverse_rejects_negative_q(jump_model):
    with pytest.raises(DomainError):
        phi_right_inverse(jump_model, -1.0)


models = st.one_of(
    st.builds(BrownianDrift, st.floats(-2, 2), st.floats(0.1, 3)),
    st.builds(CramerLundbergExp, st.floats(-1, 1), st.floats(0.05, 2), st.floats(0, 3), st.floats(0.5, 10)),
    st.builds(StableSN, st.floats(1.05, 2.0)),
)


@settings(max_examples=150, deadline=None)
@given(models, st.floats(0.0, 5.0))
def test_phi_inverts_psi(model, q):
    phi = phi_right_inverse(model, q)
    assert phi >= 0.0
    assert laplace_exponent(model, phi) == pytest.approx(q, abs=1e-9 * max(1.0, q))
    # nothing larger solves psi = q: psi increases beyond Phi
    assert laplace_exponent(model, phi + 0.1) > q


@settings(max_examples=150, deadline=None)
@given(models, st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.0, 1.0))
def test_psi_convex(model, a, b, t):
    mid = t * a + (1 - t) * b
    lhs = laplace_exponent(model, mid)
    rhs = t * laplace_exponent(model, a) + (1 - t) * laplace_exponent(model, b)
    assert lhs <= rhs + 1e-9 * (1.0 + abs(rhs))


@settings(max_examples=100, deadline=None)
@given(models, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_phi_nondecreasing(model, q1, q2):
    lo, hi = sorted((q1, q2))
    assert phi_right_inverse(model, lo) <= phi_right_inverse(model, hi) + 1e-10


def test_model_serialisation(jump_model):
    assert model_to_dict(jump_model) == {
        "type": "cramer_lundberg_exp",
        "mu": 0.18,
        "sigma": 0.2,
        "jump_rate": 0.25,
        "jump_decay": 4.0,
    }
    assert model_to_dict(StableSN(1.5)) == {"type": "stable_sn", "beta": 1.5}
