"""Shared builders for the test suite: jets, frozen reference expressions,
random-polynomial generators."""

from __future__ import annotations

import random
from fractions import Fraction

from nlsdual.ringcore import Coeff, DiffPoly, JetVar

I = Coeff.i()
SK = Coeff.make(1, 0, 1)       # sqrt(kappa)
K = Coeff.make(1, 0, 2)        # kappa
K32 = Coeff.make(1, 0, 3)      # kappa^(3/2)


def pj(dx=0, t=()) -> JetVar:
    return JetVar("psi", dx, tuple(t))


def qj(dx=0, t=()) -> JetVar:
    return JetVar("psibar", dx, tuple(t))


def v(var: JetVar, c=1) -> DiffPoly:
    return DiffPoly.var(var, c if isinstance(c, Coeff) else Coeff.make(c))


def mono(jets, c=1) -> DiffPoly:
    return DiffPoly.monomial(jets, c if isinstance(c, Coeff) else Coeff.make(c))


def cf(re=0, im=0, skpow=0) -> Coeff:
    return Coeff.make(Fraction(re) if not isinstance(re, Fraction) else re,
                      Fraction(im) if not isinstance(im, Fraction) else im, skpow)


# --- frozen reference expressions (exact forms of the printed objects) -----

def x_block() -> DiffPoly:
    """-kappa (psibar_x psi - psi_x psibar)."""
    return mono([qj(1), pj()], cf(-1, 0, 2)) + mono([pj(1), qj()], cf(1, 0, 2))


def y_block() -> DiffPoly:
    """sqrt(kappa) psi_xx - 2 kappa^(3/2) |psi|^2 psi."""
    return v(pj(2), cf(1, 0, 1)) + mono([pj(), pj(), qj()], cf(-2, 0, 3))


def nls_hamiltonian_density() -> DiffPoly:
    """psi_x psibar_x + kappa (psi psibar)^2."""
    return mono([pj(1), qj(1)]) + mono([pj(), pj(), qj(), qj()], cf(1, 0, 2))


def random_coeff(rng: random.Random) -> Coeff:
    c = Coeff.zero()
    for _ in range(rng.randint(1, 2)):
        c = c + Coeff.make(Fraction(rng.randint(-3, 3), rng.randint(1, 3)),
                           Fraction(rng.randint(-3, 3), rng.randint(1, 3)),
                           rng.randint(-1, 2))
    return c


def random_poly(rng: random.Random, jets=None, n_terms=3, max_deg=2) -> DiffPoly:
    if jets is None:
        jets = [pj(), qj(), pj(1), qj(1), pj(0, [(2, 1)])]
    out = DiffPoly.zero()
    for _ in range(rng.randint(1, n_terms)):
        deg = rng.randint(0, max_deg)
        monomial = [rng.choice(jets) for _ in range(deg)]
        out = out + DiffPoly.monomial(monomial, random_coeff(rng))
    return out


def random_x_poly(rng: random.Random, n_terms=3, max_deg=3) -> DiffPoly:
    jets = [pj(), qj(), pj(1), qj(1), pj(2), qj(2)]
    return random_poly(rng, jets, n_terms, max_deg)


# --- frozen flow matrices (exact renditions of the published displays) -----

def _sigma3_const(c: Coeff):
    from nlsdual.laxalg import lax_from_entries
    Z = DiffPoly.zero()
    return lax_from_entries({0: (DiffPoly.const(c), Z, Z, DiffPoly.const(-c))})


def printed_v(n: int):
    """The first four flow matrices of the hierarchy, entered literally."""
    from nlsdual.laxalg import lax_from_entries
    Z = DiffPoly.zero()
    sk = SK
    i = I
    half_i = Coeff.make(0, Fraction(1, 2))
    ik = i * K
    if n == 0:
        return _sigma3_const(half_i)
    if n == 1:
        return lax_from_entries({1: _sigma3_const(half_i).lam_coeff(0),
                                 0: (Z, v(qj(), -sk), v(pj(), -sk), Z)})
    level0 = (mono([pj(), qj()], ik), v(qj(1), -i * sk),
              v(pj(1), i * sk), mono([pj(), qj()], -ik))
    if n == 2:
        return lax_from_entries({2: _sigma3_const(half_i).lam_coeff(0),
                                 1: (Z, v(qj(), -sk), v(pj(), -sk), Z),
                                 0: level0})
    if n == 3:
        X = x_block()
        Y = y_block()
        return lax_from_entries({3: _sigma3_const(half_i).lam_coeff(0),
                                 2: (Z, v(qj(), -sk), v(pj(), -sk), Z),
                                 1: level0,
                                 0: (X, Y.conjugate(), Y, -X)})
    raise ValueError(n)


def printed_dual(m: int):
    """The dual table built on the level-2 flow matrix.

    The level-3 member's lambda-free off-diagonal entry is
    -i sqrt(kappa) psi_t2 (the value forced by the recursion; the variant
    carrying an extra -2 kappa^(3/2)|psi|^2 psi is proven inconsistent in
    the test suite)."""
    from nlsdual.laxalg import lax_from_entries
    Z = DiffPoly.zero()
    sk = SK
    i = I
    mhalf_i = Coeff.make(0, Fraction(-1, 2))
    ik = i * K
    if m == 0:
        return _sigma3_const(mhalf_i)
    if m == 1:
        return lax_from_entries({1: _sigma3_const(mhalf_i).lam_coeff(0),
                                 0: (Z, v(qj(), sk), v(pj(), sk), Z)})
    level0 = (mono([pj(), qj()], -ik), v(qj(1), i * sk),
              v(pj(1), -i * sk), mono([pj(), qj()], ik))
    if m == 2:
        return lax_from_entries({2: _sigma3_const(mhalf_i).lam_coeff(0),
                                 1: (Z, v(qj(), sk), v(pj(), sk), Z),
                                 0: level0})
    if m == 3:
        Phi = x_block()
        Om = v(pj(0, [(2, 1)]), -i * sk)
        return lax_from_entries({3: _sigma3_const(mhalf_i).lam_coeff(0),
                                 2: (Z, v(qj(), sk), v(pj(), sk), Z),
                                 1: level0,
                                 0: (-Phi, -Om.conjugate(), -Om, Phi)})
    raise ValueError(m)
