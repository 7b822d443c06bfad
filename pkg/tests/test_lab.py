import csv

import mpmath
import numpy as np
import pytest

from lpvi.lab import (
    check_pairing_inequality,
    random_pairs,
    flawed_contraction_factor,
    pairing_inequality_batch,
    pairing_inequality_rows,
    verify_proof_chain,
    write_batch_csv,
)
from lpvi.mappings import Affine, ScaledIdentity
from lpvi.sets import Box
from lpvi.solver import SolverConfig, solve_vi, step_size_window
from lpvi.space import SpacePoint

from conftest import P_VALUES, scaled_target

SQUARE = Box([0, 0], [1, 1])


# ------------------------------------------------------------ pairing inequality

def test_equal_points():
    x = SpacePoint([0.3, -2.0, 1.0], 3.0)
    lhs, rhs, ok = check_pairing_inequality(x, x)
    assert lhs == 0.0 and ok
    assert rhs == pytest.approx(4 * (0.3 ** 3 + 8 + 1) ** (2 / 3), rel=1e-14)


def test_orthogonal_unit_vectors():
    lhs, rhs, ok = check_pairing_inequality(SpacePoint([1, 0], 2.0), SpacePoint([0, 1], 2.0))
    assert lhs == pytest.approx(2.0, rel=1e-15)
    assert rhs == pytest.approx(6.0, rel=1e-15)
    assert ok


def test_pointwise_against_mpmath():
    mpmath.mp.dps = 50
    rng = np.random.default_rng(3)
    for p in P_VALUES:
        for _ in range(10):
            a, b = rng.normal(size=4), rng.normal(size=4)
            lhs, rhs, _ = check_pairing_inequality(SpacePoint(a, p), SpacePoint(b, p))
            P = mpmath.mpf(p)

            def norm(v):
                return mpmath.power(sum(mpmath.power(abs(mpmath.mpf(float(t))), P) for t in v), 1 / P)

            def J(v):
                n = norm(v)
                return [n ** (2 - P) * mpmath.sign(t) * mpmath.power(abs(mpmath.mpf(float(t))), P - 1) for t in v]

            d = a - b
            ja, jb = J(a), J(b)
            ref_lhs = norm(d) ** 2
            ref_rhs = sum(mpmath.mpf(float(d[i])) * (ja[i] - jb[i]) for i in range(4)) + 4 * norm(a) * norm(b)
            assert abs(lhs - float(ref_lhs)) <= 1e-12 * max(1, float(ref_lhs))
            assert abs(rhs - float(ref_rhs)) <= 1e-12 * max(1, abs(float(ref_rhs)))


@pytest.mark.parametrize("p", P_VALUES)
def test_batch_has_no_violations(p):
    res = pairing_inequality_batch(p, n=3000, seed=11)
    assert res.n_pairs == 3000 and res.violations == 0
    assert sorted(res.per_dim) == list(range(1, 17))


def test_batch_matches_pointwise_check():
    rows = list(pairing_inequality_rows(3.0, 64, range(1, 5), seed=2))
    rng = np.random.default_rng([2, 3000])
    pid = 0
    for d in range(1, 5):
        X, Y = random_pairs(d, 16, rng)
        for i in range(16):
            lhs, rhs, ok = check_pairing_inequality(SpacePoint(X[i], 3.0), SpacePoint(Y[i], 3.0))
            assert rows[pid][3] == pytest.approx(lhs, rel=1e-12, abs=1e-300)
            assert rows[pid][4] == pytest.approx(rhs, rel=1e-12, abs=1e-300)
            assert rows[pid][5] == ok
            pid += 1


def test_batch_rejects_empty():
    with pytest.raises(ValueError):
        pairing_inequality_batch(2.0, n=0)


def test_csv_output(tmp_path):
    path = tmp_path / "pairs.csv"
    write_batch_csv(path, pairing_inequality_rows(1.5, 20, [2, 3], seed=0))
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["pair_id", "p", "dim", "lhs", "rhs", "holds"]
    assert len(rows) == 21
    assert {r[2] for r in rows[1:]} == {"2", "3"}
    assert all(r[5] == "1" for r in rows[1:])


# ------------------------------------------------------------ flawed factor

def test_flawed_factor_examples():
    assert flawed_contraction_factor(1, 1, 0.1, 1) == pytest.approx(-0.97, abs=1e-12)
    assert flawed_contraction_factor(1, 1, 0.1, 1e-15) == pytest.approx(1.0, abs=1e-12)
    assert flawed_contraction_factor(2, 1, 1, 1) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        flawed_contraction_factor(1, 1, 0, 1)


def test_flawed_factor_is_affine_in_r():
    # three-point collinearity along the affine direction
    f = [flawed_contraction_factor(r, 1.0, 0.1, 1.0) for r in (0.5, 1.0, 1.5)]
    assert f[2] - f[1] == pytest.approx(f[1] - f[0], abs=1e-12)


def test_flawed_factor_second_differences_in_s():
    # 1 - s (2 (r - g mu^2)) + s^2 mu^2: the second difference is 2 mu^2 h^2
    h, mu = 0.25, 0.1
    f = [flawed_contraction_factor(1.0, 1.0, mu, s) for s in (1.0, 1.0 + h, 1.0 + 2 * h)]
    assert f[2] - 2 * f[1] + f[0] == pytest.approx(2 * mu * mu * h * h, abs=1e-12)


# ------------------------------------------------------------ proof chain

def test_chain_on_scaled_identity():
    B = ScaledIdentity(0.5)
    x, y = SpacePoint([0.9, 0.1], 2.0), SpacePoint([0.2, 0.6], 2.0)
    rep = verify_proof_chain(x, y, B, SQUARE, 1.0, 0.5, 0.5, 0.05)
    st = {(s.left, s.right): s.status for s in rep.steps}
    assert st[("L1", "L2")] == "pass"
    assert st[("L2", "L3")] == "pass" and st[("L3", "L4")] == "pass"
    assert st[("L5", "L5a")] == "pass" and st[("L5a", "L6")] == "pass"
    assert rep.ok
    assert rep.values["L1"] <= rep.values["L2"] + 1e-12
    assert rep.values["L2"] <= rep.values["L4"] + 1e-12


def test_chain_on_equal_points():
    x = SpacePoint([0.4, 0.4], 3.0)
    rep = verify_proof_chain(x, x, ScaledIdentity(0.5), SQUARE, 1.0, 0.6, 0.1, 4.5)
    for key in ("L1", "L2", "L3", "L4", "L5", "L5a", "L6", "L7"):
        assert rep.values[key] == 0.0
    assert all(s.status == "pass" for s in rep.steps)


@pytest.mark.parametrize("p", P_VALUES)
def test_chain_identities_hold_at_every_p(p, rng):
    B = Affine([[1.0, 0.4], [-0.3, 2.0]], [0.1, -0.2])
    for _ in range(30):
        a, b = SQUARE.sample(rng, 2, p)
        rep = verify_proof_chain(SpacePoint(a, p), SpacePoint(b, p), B, SQUARE, 1.0, 0.6, 0.1, 0.7)
        for s in rep.steps:
            if s.relation == "=" or (s.left, s.right) == ("L3", "L4"):
                assert s.status == "pass", s
        if p == 2.0:
            assert rep.steps[0].status == "pass"


def test_chain_marks_hypothesis_steps_conditional():
    # declared constants that this B cannot satisfy
    B = ScaledIdentity(0.5)
    x, y = SpacePoint([0.9, 0.1], 2.0), SpacePoint([0.2, 0.6], 2.0)
    rep = verify_proof_chain(x, y, B, SQUARE, 1.0, 0.6, 0.1, 4.5)
    st = {(s.left, s.right): s for s in rep.steps}
    assert st[("L5a", "L6")].status == "conditional"
    assert st[("L5a", "L6")].depends_on == "lipschitz"
    assert rep.ok


def test_chain_rejects_points_outside_c():
    with pytest.raises(ValueError):
        verify_proof_chain(SpacePoint([2, 0], 2.0), SpacePoint([0, 0], 2.0),
                           ScaledIdentity(0.5), SQUARE, 1.0, 0.6, 0.1, 1.0)


@pytest.mark.parametrize("p", P_VALUES)
def test_chain_factor_matches_certified_q(p):
    B = scaled_target([2.0, 0.5])
    rep = solve_vi(B, SQUARE, p, SolverConfig(mode="certified", u=1.0, v=0.6, mu=0.1))
    x, y = SpacePoint([0.1, 0.2], p), SpacePoint([0.8, 0.9], p)
    chain = verify_proof_chain(x, y, B, SQUARE, 1.0, 0.6, 0.1, rep.lam)
    assert chain.factor == pytest.approx(rep.certified_q ** 2, abs=1e-12)
    w = step_size_window(1.0, 0.71, 0.1)
    chain = verify_proof_chain(x, y, B, SQUARE, 1.0, 0.71, 0.1, w.chosen_lambda)
    assert chain.factor == pytest.approx(w.certified_q ** 2, abs=1e-12)
