"""Exact differential-polynomial algebra over jet variables.

The ring elements are polynomials in commuting jet variables (a field name
together with an x-derivative order and t_n-derivative orders), with
coefficients that are Gaussian rationals times integer powers of sqrt(kappa).
Everything is exact; no floating point enters this module.  Values are
immutable after construction, so they can be shared freely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

# ---------------------------------------------------------------------------
# coefficients: Laurent polynomials in sqrt(kappa) over the Gaussian rationals
# ---------------------------------------------------------------------------


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected int or Fraction, got {type(x).__name__}")


class Coeff:
    """Sum of terms (re + i*im) * sqrt(kappa)**p with exact rational re, im.

    Stored as a sorted tuple of (p, re, im); zero terms are never kept.
    """

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[int, tuple[Fraction, Fraction]] | None = None):
        items = []
        if terms:
            for pw, (re, im) in terms.items():
                if re or im:
                    items.append((pw, re, im))
        items.sort()
        object.__setattr__(self, "terms", tuple(items))
        object.__setattr__(self, "_hash", hash(self.terms))

    # -- constructors ------------------------------------------------------
    @staticmethod
    def make(re=0, im=0, skpow: int = 0) -> "Coeff":
        """Coefficient (re + i*im) * sqrt(kappa)**skpow."""
        return Coeff({skpow: (_frac(re), _frac(im))})

    @staticmethod
    def zero() -> "Coeff":
        return _ZERO

    @staticmethod
    def one() -> "Coeff":
        return _ONE

    @staticmethod
    def i() -> "Coeff":
        return _I

    # -- predicates --------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_single_term(self) -> bool:
        return len(self.terms) == 1

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, Coeff) and self.terms == other.terms

    def __hash__(self) -> int:
        return self._hash

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other: "Coeff") -> "Coeff":
        acc = {pw: (re, im) for pw, re, im in self.terms}
        for pw, re, im in other.terms:
            r0, i0 = acc.get(pw, (Fraction(0), Fraction(0)))
            acc[pw] = (r0 + re, i0 + im)
        return Coeff(acc)

    def __neg__(self) -> "Coeff":
        return Coeff({pw: (-re, -im) for pw, re, im in self.terms})

    def __sub__(self, other: "Coeff") -> "Coeff":
        return self + (-other)

    def __mul__(self, other: "Coeff") -> "Coeff":
        acc: dict[int, tuple[Fraction, Fraction]] = {}
        for p1, r1, i1 in self.terms:
            for p2, r2, i2 in other.terms:
                pw = p1 + p2
                re = r1 * r2 - i1 * i2
                im = r1 * i2 + i1 * r2
                r0, i0 = acc.get(pw, (Fraction(0), Fraction(0)))
                acc[pw] = (r0 + re, i0 + im)
        return Coeff(acc)

    def conjugate(self) -> "Coeff":
        """Complex conjugation; sqrt(kappa) is real and stays put."""
        return Coeff({pw: (re, -im) for pw, re, im in self.terms})

    def inverse(self) -> "Coeff":
        """Exact inverse.  Only single-term coefficients are invertible here."""
        if len(self.terms) != 1:
            raise ArithmeticError(f"coefficient not invertible in this ring: {self}")
        pw, re, im = self.terms[0]
        n = re * re + im * im
        return Coeff({-pw: (re / n, -im / n)})

    # -- numerics / io -----------------------------------------------------
    def to_complex(self, kappa: float) -> complex:
        """Evaluate with a concrete kappa > 0 (sqrt taken positive)."""
        sk = kappa ** 0.5
        return sum((float(re) + 1j * float(im)) * sk**pw for pw, re, im in self.terms)

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for pw, re, im in self.terms:
            if im == 0:
                num = str(re)
            elif re == 0:
                if im == 1:
                    num = "i"
                elif im == -1:
                    num = "-i"
                else:
                    num = f"({im})i"
            else:
                num = f"({re}{'+' if im > 0 else '-'}({abs(im)})i)"
            if pw == 0:
                parts.append(num)
            else:
                kp = "k" if pw == 2 else ("sqrt(k)" if pw == 1 else f"k^({Fraction(pw, 2)})")
                parts.append(f"{num}*{kp}" if num != "1" else kp)
        return " + ".join(parts)


_ZERO = Coeff()
_ONE = Coeff({0: (Fraction(1), Fraction(0))})
_I = Coeff({0: (Fraction(0), Fraction(1))})
SQRT_KAPPA = Coeff({1: (Fraction(1), Fraction(0))})
KAPPA = Coeff({2: (Fraction(1), Fraction(0))})

# fields that are complex conjugates of each other
_CONJ_PAIRS = {"psi": "psibar", "psibar": "psi"}
_FIELD_RANK = {"psi": 0, "psibar": 1}


# ---------------------------------------------------------------------------
# jet variables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=False)
class JetVar:
    """A jet variable: derivative of a field, treated as a coordinate.

    ``dt`` maps hierarchy level n to the t_n-derivative order and is stored as
    a sorted tuple of (level, order) pairs with no zero orders.
    """

    field: str
    dx: int = 0
    dt: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.dx < 0:
            raise ValueError("negative x-derivative order")
        for lvl, ordr in self.dt:
            if lvl < 0 or ordr <= 0:
                raise ValueError(f"bad t-order entry {(lvl, ordr)}")
        object.__setattr__(self, "dt", tuple(sorted(self.dt)))

    # -- basic structure ---------------------------------------------------
    def sort_key(self):
        return (_FIELD_RANK.get(self.field, 2), self.field, self.dx, self.dt)

    def __lt__(self, other: "JetVar") -> bool:
        return self.sort_key() < other.sort_key()

    def prolong_x(self) -> "JetVar":
        return JetVar(self.field, self.dx + 1, self.dt)

    def prolong_t(self, n: int) -> "JetVar":
        d = dict(self.dt)
        d[n] = d.get(n, 0) + 1
        return JetVar(self.field, self.dx, tuple(sorted(d.items())))

    def conjugate_var(self) -> "JetVar":
        try:
            return JetVar(_CONJ_PAIRS[self.field], self.dx, self.dt)
        except KeyError:
            raise ValueError(f"no conjugate defined for field {self.field!r}")

    def dim(self) -> int:
        """Scaling dimension: 1 for the field, +1 per d_x, +n per d_{t_n}."""
        return 1 + self.dx + sum(n * k for n, k in self.dt)

    def __repr__(self) -> str:
        base = {"psi": "psi", "psibar": "psibar"}.get(self.field, self.field)
        sub = "x" * self.dx + "".join(f"t{n}" * k for n, k in self.dt)
        return f"{base}_{sub}" if sub else base


PSI = JetVar("psi")
PSIBAR = JetVar("psibar")


def jet(field: str, dx: int = 0, dt: Iterable[tuple[int, int]] = ()) -> JetVar:
    return JetVar(field, dx, tuple(dt))


# ---------------------------------------------------------------------------
# differential polynomials
# ---------------------------------------------------------------------------

Monomial = tuple  # sorted tuple of JetVar, with repetition


class DiffPoly:
    """Polynomial in jet variables with Coeff coefficients, in canonical form.

    Monomials are multisets of jets stored as sorted tuples; zero coefficients
    are purged, so equality is plain dictionary comparison.
    """

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Coeff] | None = None):
        clean = {}
        if terms:
            for mono, c in terms.items():
                if c:
                    clean[mono] = c
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_hash", None)

    # -- constructors ------------------------------------------------------
    @staticmethod
    def zero() -> "DiffPoly":
        return DiffPoly()

    @staticmethod
    def const(c: Coeff | int | Fraction) -> "DiffPoly":
        if isinstance(c, (int, Fraction)):
            c = Coeff.make(c)
        return DiffPoly({(): c})

    @staticmethod
    def var(v: JetVar, c: Coeff | int | Fraction = 1) -> "DiffPoly":
        if isinstance(c, (int, Fraction)):
            c = Coeff.make(c)
        return DiffPoly({(v,): c})

    @staticmethod
    def monomial(vars_: Iterable[JetVar], c: Coeff | int | Fraction = 1) -> "DiffPoly":
        if isinstance(c, (int, Fraction)):
            c = Coeff.make(c)
        return DiffPoly({tuple(sorted(vars_)): c})

    # -- predicates --------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, DiffPoly) and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(tuple(sorted(self.terms.items(), key=lambda kv: _mono_key(kv[0])))))
        return self._hash

    # -- ring operations ---------------------------------------------------
    def __add__(self, other: "DiffPoly") -> "DiffPoly":
        acc = dict(self.terms)
        for mono, c in other.terms.items():
            if mono in acc:
                acc[mono] = acc[mono] + c
            else:
                acc[mono] = c
        return DiffPoly(acc)

    def __neg__(self) -> "DiffPoly":
        return DiffPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "DiffPoly") -> "DiffPoly":
        return self + (-other)

    def __mul__(self, other) -> "DiffPoly":
        if isinstance(other, (Coeff, int, Fraction)):
            return self.scale(other)
        acc: dict[Monomial, Coeff] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(sorted(m1 + m2))
                c = c1 * c2
                if mono in acc:
                    acc[mono] = acc[mono] + c
                else:
                    acc[mono] = c
        return DiffPoly(acc)

    __rmul__ = __mul__

    def scale(self, c: Coeff | int | Fraction) -> "DiffPoly":
        if isinstance(c, (int, Fraction)):
            c = Coeff.make(c)
        return DiffPoly({m: cc * c for m, cc in self.terms.items()})

    # -- calculus ----------------------------------------------------------
    def diff(self, v: JetVar) -> "DiffPoly":
        """Formal partial derivative with respect to one jet variable."""
        acc: dict[Monomial, Coeff] = {}
        for mono, c in self.terms.items():
            mult = mono.count(v)
            if not mult:
                continue
            rest = list(mono)
            rest.remove(v)
            key = tuple(rest)
            cc = c * Coeff.make(mult)
            acc[key] = acc.get(key, Coeff.zero()) + cc
        return DiffPoly(acc)

    def _total_derivative(self, prolong) -> "DiffPoly":
        out = DiffPoly()
        for mono, c in self.terms.items():
            for idx in range(len(mono)):
                lifted = list(mono)
                lifted[idx] = prolong(mono[idx])
                out = out + DiffPoly({tuple(sorted(lifted)): c})
        return out

    def d_x(self) -> "DiffPoly":
        """Total x-derivative (Leibniz over all jets)."""
        return self._total_derivative(lambda v: v.prolong_x())

    def d_t(self, n: int) -> "DiffPoly":
        """Total t_n-derivative."""
        return self._total_derivative(lambda v: v.prolong_t(n))

    def conjugate(self) -> "DiffPoly":
        """Swap psi <-> psibar jets and conjugate all coefficients."""
        acc: dict[Monomial, Coeff] = {}
        for mono, c in self.terms.items():
            key = tuple(sorted(v.conjugate_var() for v in mono))
            acc[key] = acc.get(key, Coeff.zero()) + c.conjugate()
        return DiffPoly(acc)

    # -- structure queries --------------------------------------------------
    def jets(self) -> set[JetVar]:
        out = set()
        for mono in self.terms:
            out.update(mono)
        return out

    def max_x_order(self) -> int:
        return max((v.dx for v in self.jets()), default=0)

    def t_levels(self) -> set[int]:
        out = set()
        for v in self.jets():
            out.update(n for n, _ in v.dt)
        return out

    def scaling_dimension(self):
        """Common scaling dimension of all monomials, or None if inhomogeneous.

        Fields carry dimension 1, d_x adds 1, d_{t_n} adds n; sqrt(kappa) and
        numbers are dimensionless.  The zero polynomial is homogeneous of any
        dimension and reported as 0.
        """
        dims = {sum(v.dim() for v in mono) for mono in self.terms}
        if not dims:
            return 0
        if len(dims) > 1:
            return None
        return dims.pop()

    def coefficient(self, mono: Iterable[JetVar]) -> Coeff:
        return self.terms.get(tuple(sorted(mono)), Coeff.zero())

    # -- Euler operator ----------------------------------------------------
    def euler(self, field: str) -> "DiffPoly":
        """Variational derivative in the x-direction for the given field.

        Returns sum_k (-d_x)^k d/d(field_k-jet).  Rejects input containing
        t-jets: the kernel characterisation (total x-derivatives) only makes
        sense for purely spatial densities.
        """
        for v in self.jets():
            if v.dt:
                raise ValueError("euler operator requires x-jets only")
        out = DiffPoly()
        for k in range(self.max_x_order() + 1):
            term = self.diff(JetVar(field, k))
            for _ in range(k):
                term = -term.d_x()
            out = out + term
        return out

    # -- substitution ------------------------------------------------------
    def substitute(self, rules: Mapping[JetVar, "DiffPoly"], max_passes: int = 64) -> "DiffPoly":
        """Exact substitution with automatic prolongation of the rules.

        A rule for e.g. the first t_2-jet of psi induces rules for all its
        x/t-prolongations by total differentiation.  Raises on rule sets that
        never terminate (cyclic).
        """
        if not rules:
            return self
        cur = self
        for _ in range(max_passes):
            needed = {}
            for v in cur.jets():
                if v in rules:
                    needed[v] = rules[v]
                    continue
                key = _best_rule_key(v, rules)
                if key is not None:
                    needed[v] = _prolong_rule(rules[key], key, v)
            if not needed:
                return cur
            cur = cur._replace_jets(needed)
        raise ValueError("cyclic rule set: substitution did not terminate")

    def _replace_jets(self, mapping: Mapping[JetVar, "DiffPoly"]) -> "DiffPoly":
        out = DiffPoly()
        for mono, c in self.terms.items():
            piece = DiffPoly.const(c)
            for v in mono:
                piece = piece * mapping.get(v, DiffPoly.var(v))
            out = out + piece
        return out

    # -- numerics ----------------------------------------------------------
    def evaluate(self, values: Mapping[JetVar, complex], kappa: float):
        """Numerical evaluation; jet values may be scalars or numpy arrays."""
        out = 0
        for mono, c in self.terms.items():
            acc = c.to_complex(kappa)
            for v in mono:
                acc = acc * values[v]
            out = out + acc
        return out

    # -- io / display ------------------------------------------------------
    def to_json_obj(self) -> list:
        items = []
        for mono in sorted(self.terms, key=_mono_key):
            c = self.terms[mono]
            for pw, re, im in c.terms:
                items.append({
                    "coeff": {
                        "sqrtkappa_pow": pw,
                        "re": [re.numerator, re.denominator],
                        "im": [im.numerator, im.denominator],
                    },
                    "jets": [
                        {"field": v.field, "dx": v.dx, "dt": [[n, k] for n, k in v.dt]}
                        for v in mono
                    ],
                })
        return items

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"))

    @staticmethod
    def from_json_obj(items: list) -> "DiffPoly":
        out = DiffPoly()
        for it in items:
            c = it["coeff"]
            coeff = Coeff({int(c["sqrtkappa_pow"]): (
                Fraction(c["re"][0], c["re"][1]),
                Fraction(c["im"][0], c["im"][1]),
            )})
            mono = tuple(sorted(
                JetVar(j["field"], int(j["dx"]), tuple((int(n), int(k)) for n, k in j["dt"]))
                for j in it["jets"]
            ))
            out = out + DiffPoly({mono: coeff})
        return out

    @staticmethod
    def from_json(text: str) -> "DiffPoly":
        return DiffPoly.from_json_obj(json.loads(text))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mono in sorted(self.terms, key=_mono_key):
            c = self.terms[mono]
            factors = "*".join(repr(v) for v in mono)
            if not factors:
                parts.append(f"({c!r})")
            else:
                parts.append(f"({c!r})*{factors}")
        return " + ".join(parts)


def _mono_key(mono: Monomial):
    return (len(mono), tuple(v.sort_key() for v in mono))


def _best_rule_key(v: JetVar, rules: Mapping[JetVar, DiffPoly]):
    """Most specific rule key that v prolongs, if any."""
    best = None
    best_dist = None
    for key in rules:
        if key.field != v.field or v.dx < key.dx:
            continue
        kd = dict(key.dt)
        vd = dict(v.dt)
        if any(vd.get(n, 0) < k for n, k in kd.items()):
            continue
        dist = (v.dx - key.dx) + sum(vd.values()) - sum(kd.values())
        if best_dist is None or dist < best_dist:
            best, best_dist = key, dist
    return best


def _prolong_rule(rhs: DiffPoly, key: JetVar, target: JetVar) -> DiffPoly:
    out = rhs
    for _ in range(target.dx - key.dx):
        out = out.d_x()
    kd = dict(key.dt)
    for n, k in target.dt:
        for _ in range(k - kd.get(n, 0)):
            out = out.d_t(n)
    return out


# -- module-level operation aliases (the public functional surface) --------


def add(a: DiffPoly, b: DiffPoly) -> DiffPoly:
    return a + b


def mul(a: DiffPoly, b: DiffPoly) -> DiffPoly:
    return a * b


def scale(c: Coeff, a: DiffPoly) -> DiffPoly:
    return a.scale(c)


def d_x(a: DiffPoly) -> DiffPoly:
    return a.d_x()


def d_t(n: int, a: DiffPoly) -> DiffPoly:
    return a.d_t(n)


def conjugate(a: DiffPoly) -> DiffPoly:
    return a.conjugate()


def scaling_dimension(a: DiffPoly):
    return a.scaling_dimension()


def euler_operator(a: DiffPoly, field: str) -> DiffPoly:
    return a.euler(field)


def substitute(a: DiffPoly, rules: Mapping[JetVar, DiffPoly]) -> DiffPoly:
    return a.substitute(rules)


def is_total_x_derivative(a: DiffPoly) -> bool:
    """Kernel test: a polynomial density with no constant term is a total
    x-derivative iff its variational derivatives in every field vanish."""
    fields = {v.field for v in a.jets()}
    return all(a.euler(f).is_zero() for f in fields)
