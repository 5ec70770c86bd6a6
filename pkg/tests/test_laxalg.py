"""Matrix algebra, tensor operations and the divided-difference r-matrix form."""

import random

import pytest

from nlsdual.ringcore import Coeff, DiffPoly, JetVar
from nlsdual.laxalg import (LaxMatrix, TensorMatrix, divided_difference, embed1, embed2,
                            field_matrix, identity2, lax_from_entries, permutation,
                            rmatrix_bracket_rhs, sigma3)
from nlsdual.hierarchy import build_u, generate_partner
from helpers import pj, qj, v, mono, cf, random_poly

Z = DiffPoly.zero()


def random_lax(rng, deg=2):
    coeffs = {}
    for p in range(deg + 1):
        coeffs[p] = tuple(random_poly(rng, n_terms=2, max_deg=2) for _ in range(4))
    return LaxMatrix(coeffs)


def test_commutator_antisymmetry_and_self():
    rng = random.Random(7)
    for _ in range(5):
        A, B = random_lax(rng), random_lax(rng)
        assert A.commutator(A).is_zero()
        assert (A.commutator(B) + B.commutator(A)).is_zero()


def test_trace_of_commutator_vanishes():
    rng = random.Random(11)
    for _ in range(5):
        A, B = random_lax(rng), random_lax(rng)
        assert not A.commutator(B).trace()


def test_sigma3_field_matrix_commutator():
    # [sigma3, Q] = 2 sigma3 Q  (oracle: direct 2x2 multiplication)
    s3, Q = sigma3(), field_matrix()
    lhs = s3.commutator(Q)
    rhs = s3.matmul(Q).scale(2)
    assert (lhs - rhs).is_zero()


def test_u_structure():
    U = build_u()
    assert U.trace_zero()
    assert U.sigma_symmetric("s1")
    assert U.graded(1)


def test_sigma_symmetry_closure():
    # the commutator of two symmetric traceless matrices is traceless, and --
    # since entrywise conjugation is multiplicative -- itself sigma-symmetric;
    # multiplying by i breaks the symmetry
    U = build_u()
    V2 = generate_partner(U, 1, 2)
    C = U.commutator(V2)
    assert C.trace_zero()
    assert C.sigma_symmetric("s1")
    assert not C.scale(Coeff.i()).sigma_symmetric("s1")


def test_grading_of_commutator():
    U = build_u()
    V2 = generate_partner(U, 1, 2)
    C = U.commutator(V2)
    assert C.graded(3)


def test_sigma2_branch():
    # sqrt(kappa)(psibar E12 - psi E21) is symmetric in the kappa<0 branch only
    sk = Coeff.make(1, 0, 1)
    M = lax_from_entries({0: (Z, v(qj(), sk), v(pj(), -sk), Z)})
    assert M.sigma_symmetric("s2")
    assert not M.sigma_symmetric("s1")


# --- tensor space -------------------------------------------------------------

def test_permutation_squares_to_identity():
    P = permutation()
    PP = P.matmul(P)
    ident = TensorMatrix({(0, 0): tuple(DiffPoly.const(1) if i % 5 == 0 else Z for i in range(16))})
    assert (PP - ident).is_zero()


def test_permutation_swaps_slots():
    s3 = sigma3()
    P = permutation()
    assert (embed1(s3).matmul(P) - P.matmul(embed2(s3))).is_zero()
    rng = random.Random(3)
    A = random_lax(rng, deg=1)
    # P A1 P = A2 needs the mu-grading moved; compare at fixed powers
    lhs = P.matmul(embed1(A)).matmul(P)
    rhs = TensorMatrix({(0, p): e for (p, _), e in embed2(A).coeffs.items()})
    # embed2 grades in mu already; embed1 in lambda: P A1 P swaps the slot but
    # keeps the lambda grading
    rhs = TensorMatrix({(p, 0): e for (_, p), e in embed2(A).coeffs.items()})
    assert (lhs - rhs).is_zero()


def test_divided_difference_exactness():
    # (mu - lambda) * DA == A(mu) - A(lambda), compared by bigraded coefficients
    rng = random.Random(5)
    A = random_lax(rng, deg=3)
    DA = divided_difference(A)
    # (mu - lambda) * DA at bigrade (a, b): DA[(a, b-1)] - DA[(a-1, b)]
    prod = {}
    for (a, b), e in DA.items():
        cur = prod.setdefault((a, b + 1), [Z] * 4)
        prod[(a, b + 1)] = [x + y for x, y in zip(cur, e)]
        cur = prod.setdefault((a + 1, b), [Z] * 4)
        prod[(a + 1, b)] = [x - y for x, y in zip(cur, e)]
    # A(mu) - A(lambda): +A_j at (0, j), -A_j at (j, 0)
    want = {}
    for j, e in A.coeffs.items():
        cur = want.setdefault((0, j), [Z] * 4)
        want[(0, j)] = [x + y for x, y in zip(cur, e)]
        cur = want.setdefault((j, 0), [Z] * 4)
        want[(j, 0)] = [x - y for x, y in zip(cur, e)]
    keys = set(prod) | set(want)
    for kk in keys:
        a = prod.get(kk, [Z] * 4)
        b = want.get(kk, [Z] * 4)
        assert all((x - y).is_zero() for x, y in zip(a, b)), kk


def test_rmatrix_rhs_lambda_free_input():
    assert rmatrix_bracket_rhs(sigma3(), 1).is_zero()


def test_rmatrix_rhs_gamma_linearity():
    U = build_u()
    plus = rmatrix_bracket_rhs(U, 1)
    minus = rmatrix_bracket_rhs(U, -1)
    assert (plus + minus).is_zero()


def test_rmatrix_rhs_u_entries():
    # the ((1,2),(2,1)) tensor entry at lambda^0 mu^0 must be -i kappa,
    # matching the equal-time bracket of the two off-diagonal entries of U
    U = build_u()
    R = rmatrix_bracket_rhs(U, 1)
    e = R.coeffs[(0, 0)]
    # row (i,k) = (1,2) -> index 1; column (j,l) = (2,1) -> index 2
    assert e[4 * 1 + 2] == DiffPoly.const(cf(0, -1, 2))
    assert e[4 * 2 + 1] == DiffPoly.const(cf(0, 1, 2))


def test_rmatrix_rhs_against_bruteforce_products():
    # independent route: gamma*kappa*(embed1(DA) - embed2(DA'))*P via tensor products
    U = build_u()
    V2 = generate_partner(U, 1, 2)
    for A in (U, V2):
        DA = divided_difference(A)
        acc = TensorMatrix({})
        P = permutation()
        for (a, b), e in DA.items():
            M1 = embed1(LaxMatrix({0: e}))
            M2 = embed2(LaxMatrix({0: e}))
            term = (M1 - TensorMatrix({(0, 0): M2.coeffs[(0, 0)]})).matmul(P)
            shifted = TensorMatrix({(a, b): ee for (_, _), ee in term.coeffs.items()})
            acc = acc + shifted
        kap = Coeff.make(1, 0, 2)
        acc = TensorMatrix({pw: tuple(x.scale(kap) for x in e) for pw, e in acc.coeffs.items()})
        assert (acc - rmatrix_bracket_rhs(A, 1)).is_zero()


def test_rmatrix_rhs_rejects_laurent():
    M = lax_from_entries({-1: (DiffPoly.const(1), Z, Z, DiffPoly.const(-1))})
    with pytest.raises(ValueError):
        rmatrix_bracket_rhs(M, 1)


def test_latex_and_json_emitters():
    U = build_u()
    tex = U.to_latex()
    assert tex.startswith("\\begin{pmatrix}") and "\\lambda" in tex and "\\psi" in tex
    obj = U.to_json_obj()
    assert set(obj) == {"xi", "level", "coeffs"}
