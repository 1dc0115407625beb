import json

import pytest

from whittaker import intertwining as I
from whittaker.shapes import AlphaSpec, Shape, staircase


@pytest.mark.parametrize("r,alpha", [(2, (1, 0)), (3, (0, 1, 2)), (4, ())])
def test_iq_intertwining_and_control(r, alpha):
    a = AlphaSpec(alpha)
    assert I.verify_prop_iq(r, a, 3)
    assert not I.verify_prop_iq(r, a, 3, perturb=True)


@pytest.mark.parametrize("lam,mu", [((2, 2), (1,)), ((3, 3, 2), (2, 1)), ((3, 3, 1), (2,)), ((2, 1), ())])
def test_multi_shape_intertwining(lam, mu):
    lam, mu = Shape(lam), Shape(mu)
    rep = I.verify_mf_rpp(lam, mu, AlphaSpec(), roof=2)
    assert rep, str(rep)
    if mu.size:
        assert not I.verify_mf_rpp(lam, mu, AlphaSpec(), roof=2, perturb=True)


def test_literal_weight_is_a_negative_control():
    # keeping every binomial breaks the intertwining off the staircase
    assert not I.verify_mf_rpp(Shape((3, 3, 1)), Shape((2,)), AlphaSpec(), roof=2, literal_weight=True)


def test_iq_needs_two_rows():
    with pytest.raises(ValueError):
        I.verify_prop_iq(1, AlphaSpec(), 3)


def test_mu_outside_interior_rejected():
    with pytest.raises(ValueError):
        I.verify_mf_rpp(Shape((3, 2)), Shape((2, 1)))


def test_inner_shapes():
    inner = I.all_inner_shapes(staircase(3))
    assert Shape((2, 1)) in inner
    assert all(staircase(2).contains(mu) for mu in inner)


def test_staircase_doob():
    assert I.verify_staircase_doob(2, AlphaSpec((1, 1)), 3)


@pytest.mark.parametrize("which", ["B2", "B3", "BC1", "BC2", "G2"])
def test_root_systems(which):
    assert I.verify_root_system(which, 3)
    assert not I.verify_root_system(which, 3, perturb=True)


@pytest.mark.parametrize("tilde", [False, True])
def test_bc2_annihilation(tilde):
    assert I.bc2_annihilation(8, tilde=tilde)
    assert not I.bc2_annihilation(8, tilde=tilde, f=lambda n, m: 2 ** (n + m))


def test_exact_projection():
    rep = I.verify_projection_exact(staircase(2), Shape((1,)), AlphaSpec(), (2, 2), 0.7)
    assert rep, str(rep)
    assert not I.verify_projection_exact(staircase(2), Shape((1,)), AlphaSpec(), (2, 2), 0.7, perturb=True)


def test_first_row_bose():
    assert I.verify_first_row_bose(Shape((2, 2)), 3)
    assert not I.verify_first_row_bose(Shape((2, 2)), 3, perturb=True)


def test_report_json():
    rep = I.verify_BC1(3)
    data = json.loads(rep.to_json())
    assert data["ok"] is True and data["checked"] == rep.checked > 0
    assert str(rep).startswith("PASS")
