import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polylift.csp import (
    MAX_CUT,
    NAE3,
    SORT4,
    Constraint,
    ConstraintType,
    CSPInstance,
    Layout,
    brute_force_opt,
    csp_polynomial,
    eig_bound,
    instance_from_lift,
    instance_graph,
    maxcut_layout,
    nae3_layout,
    random_instance,
    random_regular_instance,
    to_dimacs_2xor,
)
from polylift.errors import InvalidIndexError, SizeGuardError, ValidationError
from polylift.lifting import Signing, trivial_lift
from polylift.spectra import adjacency_matrix


def test_maxcut_graph():
    inst = CSPInstance(2, (Constraint(MAX_CUT, (0, 1), (1, 1)),))
    assert np.allclose(instance_graph(inst), [[0, -0.25], [-0.25, 0]])
    assert MAX_CUT.constant == 0.5
    assert eig_bound(inst) == pytest.approx(0.5)


def test_nae3_weights():
    inst = CSPInstance(3, (Constraint(NAE3, (0, 1, 2), (1, 1, 1)),))
    A = instance_graph(inst)
    assert np.allclose(A[np.triu_indices(3, 1)], -1 / 8)
    assert NAE3.constant == 0.75


def test_sort4_matches_table():
    # 1/2 + (x1x2 + x2x3 + x3x4 - x1x4)/4 on all 16 points
    pts = np.array(np.meshgrid(*[[1, -1]] * 4)).reshape(4, -1).T
    want = 0.5 + (pts[:, 0] * pts[:, 1] + pts[:, 1] * pts[:, 2] + pts[:, 2] * pts[:, 3] - pts[:, 0] * pts[:, 3]) / 4
    assert np.allclose(SORT4.constant + SORT4.value(pts), want)


def test_empty_instance():
    inst = CSPInstance(4, ())
    assert np.array_equal(instance_graph(inst), np.zeros((4, 4)))
    assert eig_bound(inst) == 0.0
    assert brute_force_opt(inst) == 0.0


def test_predicate_with_linear_part_rejected():
    with pytest.raises(ValidationError):
        ConstraintType.from_predicate("first", 2, lambda x: float(x[0] == 1))


def test_instance_validation():
    with pytest.raises(InvalidIndexError):
        CSPInstance(2, (Constraint(MAX_CUT, (0, 2), (1, 1)),))
    with pytest.raises(ValidationError):
        CSPInstance(2, (Constraint(MAX_CUT, (0, 0), (1, 1)),))
    with pytest.raises(ValidationError):
        CSPInstance(2, (Constraint(MAX_CUT, (0, 1), (1, 0)),))


@given(st.integers(0, 10**6))
def test_objective_is_quadratic_form(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(NAE3, 8, 10, seed)
    A = instance_graph(inst)
    X = rng.choice([-1.0, 1.0], size=(100, 8))
    assert np.allclose(inst.objective(X), np.einsum("bi,ij,bj->b", X, A, X))


@pytest.mark.parametrize("atom", [MAX_CUT, NAE3, SORT4])
@pytest.mark.parametrize("seed", range(3))
def test_eig_bound_dominates_brute_force(atom, seed):
    inst = random_instance(atom, 12, 20, seed)
    assert eig_bound(inst) >= brute_force_opt(inst) - 1e-9


def test_brute_force_guard():
    with pytest.raises(SizeGuardError):
        brute_force_opt(CSPInstance(30, ()))


def test_maxcut_polynomial():
    p = csp_polynomial(maxcut_layout(1))
    assert len(p.terms) == 2
    for a in p.terms.values():
        assert np.allclose(a[a != 0], -0.25)
    assert p.is_self_adjoint()


@pytest.mark.parametrize("layout", [maxcut_layout(2), nae3_layout(4), Layout(4, ((SORT4, (0, 1, 2, 3)), (MAX_CUT, (0, 2))))])
def test_one_lift_is_base(layout):
    inst = instance_from_lift(layout, trivial_lift(layout.index_set))
    assert np.allclose(instance_graph(inst), instance_graph(layout.base_instance()))


@pytest.mark.parametrize("layout", [maxcut_layout(3), nae3_layout(4)])
@pytest.mark.parametrize("signed", [True, False])
def test_regular_instance_graph_is_lift_adjacency(layout, signed):
    inst, lift, chi = random_regular_instance(layout, 10, 3, signed)
    A = adjacency_matrix(lift, csp_polynomial(layout), chi)
    assert np.allclose(instance_graph(inst), A)
    counts = np.zeros(inst.n, dtype=int)
    for c in inst.constraints:
        counts[list(c.scope)] += 1
    assert np.all(counts == layout.c)


def test_all_plus_signing_matches_unsigned():
    layout = nae3_layout(4)
    _, lift, _ = random_regular_instance(layout, 8, 1)
    a = instance_graph(instance_from_lift(layout, lift, Signing.ones(lift)))
    b = instance_graph(instance_from_lift(layout, lift))
    assert np.array_equal(a, b)


def test_json_round_trip():
    inst = random_instance(SORT4, 9, 6, 2)
    back = CSPInstance.from_json(json.loads(inst.dumps()))
    assert back == inst
    with pytest.raises(ValidationError):
        CSPInstance.from_json({"n": 3})


def test_dimacs_export():
    inst = CSPInstance(3, (Constraint(MAX_CUT, (0, 2), (1, -1)), Constraint(MAX_CUT, (1, 2), (-1, -1))))
    assert to_dimacs_2xor(inst) == "p xor2 3 2\n1 -3 0\n-2 -3 0\n"
    with pytest.raises(ValidationError):
        to_dimacs_2xor(random_instance(NAE3, 4, 1, 0))
