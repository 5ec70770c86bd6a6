"""Ultralocal Poisson/Dirac bracket engine and the Lagrangian pipeline.

A bracket table declares a finite set of jet coordinates and the delta-
coefficients of their mutual brackets; everything else follows by the
Leibniz rule.  On top of that this module implements

* the variational bracket of an integrated density with a local polynomial,
* the tensor bracket {A_1(lambda), B_2(mu)} of Lax matrices and the check
  of the ultralocal r-matrix identity against its divided-difference form,
* the Legendre/Dirac analysis of the hierarchy Lagrangians in either the
  time or the space direction, including the auxiliary-field reduction of
  higher-order Lagrangians, yielding the equal-time table and the level-
  dependent equal-space tables together with their Hamiltonian densities,
* integration-by-parts normalisation of densities and the construction of
  the level-n Lagrangian from the conserved-density ladder.

Conventions: {p, q} = 1 for a momentum p conjugate to a coordinate q, and
f' = {H, f} for the evolution generated by H.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .ringcore import Coeff, DiffPoly, JetVar, PSI, PSIBAR
from . import hierarchy
from .laxalg import LaxMatrix, TensorMatrix, rmatrix_bracket_rhs

_Z = DiffPoly.zero()
_I = Coeff.i()
_HALF = Fraction(1, 2)


# ---------------------------------------------------------------------------
# bracket tables
# ---------------------------------------------------------------------------


class BracketTable:
    """Ultralocal bracket on a declared, ordered set of jet coordinates.

    ``entries`` holds the delta-coefficients for ordered pairs; the
    antisymmetric completion is generated automatically, and closure (every
    entry a polynomial in the declared coordinates) is enforced.
    """

    def __init__(self, coords: Sequence[JetVar], entries: Mapping[tuple[JetVar, JetVar], DiffPoly],
                 label: str = ""):
        self.coords = tuple(coords)
        cset = set(self.coords)
        full: dict[tuple[JetVar, JetVar], DiffPoly] = {}
        for (a, b), v in entries.items():
            if a not in cset or b not in cset:
                raise ValueError(f"table entry uses undeclared coordinate {(a, b)}")
            if v.is_zero():
                continue
            if not v.jets() <= cset:
                raise ValueError(f"table entry for {(a, b)} depends on undeclared jets")
            if (a, b) in full and not (full[(a, b)] - v).is_zero():
                raise ValueError(f"inconsistent duplicate entry for {(a, b)}")
            full[(a, b)] = v
            if (b, a) in entries:
                if not (entries[(b, a)] + v).is_zero():
                    raise ValueError(f"entries for {(a, b)} and {(b, a)} are not antisymmetric")
            full[(b, a)] = -v
        self.entries = full
        self.label = label

    def entry(self, a: JetVar, b: JetVar) -> DiffPoly:
        return self.entries.get((a, b), _Z)

    def is_antisymmetric(self) -> bool:
        return all((self.entry(b, a) + v).is_zero() for (a, b), v in self.entries.items())

    def nonzero_pairs(self):
        seen = set()
        for (a, b), v in sorted(self.entries.items(), key=lambda kv: (kv[0][0].sort_key(), kv[0][1].sort_key())):
            if (b, a) in seen:
                continue
            seen.add((a, b))
            yield a, b, v

    def __repr__(self) -> str:
        lines = [f"BracketTable({self.label or 'unnamed'}; coords={list(self.coords)})"]
        for a, b, v in self.nonzero_pairs():
            lines.append(f"  {{{a!r}, {b!r}}} = {v!r}")
        return "\n".join(lines)


def leibniz_bracket(f: DiffPoly, g: DiffPoly, table: BracketTable) -> DiffPoly:
    """Bilinear Leibniz extension of the table; strictly ultralocal.

    Both arguments must be polynomials in the declared coordinates alone;
    differentiated coordinates are rejected.
    """
    cset = set(table.coords)
    for h in (f, g):
        bad = h.jets() - cset
        if bad:
            raise ValueError(f"undeclared jets in bracket argument: {sorted(bad, key=JetVar.sort_key)}")
    out = _Z
    for (a, b), t in table.entries.items():
        fa = f.diff(a)
        if fa.is_zero():
            continue
        gb = g.diff(b)
        if gb.is_zero():
            continue
        out = out + fa * gb * t
    return out


def jacobi_defect(table: BracketTable, a: JetVar, b: JetVar, c: JetVar) -> DiffPoly:
    """{a,{b,c}} + {b,{c,a}} + {c,{a,b}} for coordinate triples."""
    A, B, C = (DiffPoly.var(v) for v in (a, b, c))
    out = leibniz_bracket(A, leibniz_bracket(B, C, table), table)
    out = out + leibniz_bracket(B, leibniz_bracket(C, A, table), table)
    out = out + leibniz_bracket(C, leibniz_bracket(A, B, table), table)
    return out


def _prolong(v: JetVar, w, k: int = 1) -> JetVar:
    for _ in range(k):
        v = v.prolong_x() if w == "x" else v.prolong_t(w[1])
    return v


def _d_along(e: DiffPoly, w) -> DiffPoly:
    return e.d_x() if w == "x" else e.d_t(w[1])


def _euler_along(h: DiffPoly, base: JetVar, w, max_order: int = 12) -> DiffPoly:
    """sum_k (-d_w)^k dh/d(base prolonged k times in w)."""
    out = _Z
    for k in range(max_order + 1):
        term = h.diff(_prolong(base, w, k))
        if term.is_zero():
            continue
        for _ in range(k):
            term = -_d_along(term, w)
        out = out + term
    return out


def hamiltonian_flows(h: DiffPoly, table: BracketTable, w) -> dict[JetVar, DiffPoly]:
    """Flow {integral of h, c} for every coordinate c of the table.

    ``w`` is the variable the bracket is ultralocal in; h may contain
    w-prolongations of the coordinates (and nothing else).
    """
    for v in h.jets():
        if _strip_prolongation(v, table.coords, w) is None:
            raise ValueError(f"density contains undeclared jet {v}")
    flows = {}
    for c in table.coords:
        acc = _Z
        for b in table.coords:
            t = table.entry(b, c)
            if t.is_zero():
                continue
            eb = _euler_along(h, b, w)
            if eb.is_zero():
                continue
            acc = acc + eb * t
        flows[c] = acc
    return flows


def _strip_prolongation(v: JetVar, coords: Sequence[JetVar], w):
    """The coordinate that v is a w-prolongation of, or None."""
    for c in coords:
        if v.field != c.field:
            continue
        if w == "x":
            if v.dt == c.dt and v.dx >= c.dx:
                return c
        else:
            n = w[1]
            vd, cd = dict(v.dt), dict(c.dt)
            if v.dx == c.dx and vd.get(n, 0) >= cd.get(n, 0):
                rest_v = {k: o for k, o in vd.items() if k != n}
                rest_c = {k: o for k, o in cd.items() if k != n}
                if rest_v == rest_c:
                    return c
    return None


def integral_bracket(h: DiffPoly, g: DiffPoly, table: BracketTable, w) -> DiffPoly:
    """{integral of h, g} for a local polynomial g in the coordinates and
    their w-prolongations."""
    flows = hamiltonian_flows(h, table, w)
    out = _Z
    for v in g.jets():
        base = _strip_prolongation(v, table.coords, w)
        if base is None:
            raise ValueError(f"undeclared jet {v} in bracket argument")
    for c in table.coords:
        for k in range(0, 12):
            vk = _prolong(c, w, k)
            gk = g.diff(vk)
            if gk.is_zero():
                continue
            fl = flows[c]
            for _ in range(k):
                fl = _d_along(fl, w)
            out = out + gk * fl
    return out


# ---------------------------------------------------------------------------
# tensor bracket of Lax matrices and the r-matrix identity
# ---------------------------------------------------------------------------


def matrix_bracket(A: LaxMatrix, B: LaxMatrix, table: BracketTable) -> TensorMatrix:
    """{A_1(lambda), B_2(mu)} entrywise, as a (lambda, mu)-bigraded 4x4."""
    acc: dict[tuple[int, int], list] = {}
    for pa, ea in A.coeffs.items():
        for pb, eb in B.coeffs.items():
            cur = acc.setdefault((pa, pb), [_Z] * 16)
            for i in range(2):
                for j in range(2):
                    x = ea[2 * i + j]
                    if x.is_zero():
                        continue
                    for k in range(2):
                        for l in range(2):
                            y = eb[2 * k + l]
                            if y.is_zero():
                                continue
                            v = leibniz_bracket(x, y, table)
                            if not v.is_zero():
                                idx = 4 * (2 * i + k) + (2 * j + l)
                                cur[idx] = cur[idx] + v
    return TensorMatrix({k: tuple(v) for k, v in acc.items()})


def verify_rmatrix(A: LaxMatrix, table: BracketTable, gamma: int) -> dict:
    """Check {A_1, A_2} = gamma * [rational-r-matrix form] entry by entry.

    Returns a structured report; status is 'pass' only when every entry of
    the difference vanishes identically.
    """
    lhs = matrix_bracket(A, A, table)
    rhs = rmatrix_bracket_rhs(A, gamma)
    diff = lhs - rhs
    residuals = [
        {"lambda_pow": pw[0], "mu_pow": pw[1], "row": i, "col": j, "residual": repr(v)}
        for pw, i, j, v in diff.entries()
    ]
    return {
        "identity": f"ultralocal r-matrix algebra, table {table.label or 'unnamed'}",
        "gamma": gamma,
        "status": "pass" if not residuals else "fail",
        "per_entry_residuals": residuals,
    }


# ---------------------------------------------------------------------------
# integration-by-parts normal form for densities
# ---------------------------------------------------------------------------


def byparts_normal_form(h: DiffPoly, max_steps: int = 400) -> DiffPoly:
    """Equivalent density (same Euler derivatives) in the balanced form.

    First every monomial whose single highest-order jet sits at least two
    orders above the rest is depressed by parts; then conjugate monomial
    pairs whose sum is a total derivative are antisymmetrised.  For the
    hierarchy densities this lands on the form whose top term is
    d^p psibar d^p psi (even level) or i(d^p psibar d^(p+1) psi - c.c.)
    (odd level).
    """
    for v in h.jets():
        if v.dt:
            raise ValueError("normal form applies to x-jet densities only")
    cur = h
    for _ in range(max_steps):
        target = None
        for mono in sorted(cur.terms, key=lambda m: tuple(v.sort_key() for v in m)):
            if not mono:
                continue
            kmax = max(v.dx for v in mono)
            top = [v for v in mono if v.dx == kmax]
            rest_max = max((v.dx for v in mono if v.dx != kmax), default=-10)
            if len(top) == 1 and kmax >= rest_max + 2 and len(mono) > 1:
                target = (mono, top[0])
                break
        if target is None:
            break
        mono, topjet = target
        c = cur.terms[mono]
        rest = list(mono)
        rest.remove(topjet)
        lowered = DiffPoly.var(JetVar(topjet.field, topjet.dx - 1, topjet.dt))
        repl = -(lowered * DiffPoly.monomial(rest).d_x())
        cur = cur - DiffPoly({mono: c}) + repl.scale(c)
    else:
        raise RuntimeError("by-parts depression did not terminate")

    # antisymmetrise conjugate pairs equivalent to each other's negative
    done = set()
    for mono in sorted(cur.terms, key=lambda m: tuple(v.sort_key() for v in m)):
        if mono in done or mono not in cur.terms:
            continue
        conj = tuple(sorted(v.conjugate_var() for v in mono))
        if conj == mono or conj in done:
            continue
        done.add(mono)
        done.add(conj)
        pair_sum = DiffPoly.monomial(mono) + DiffPoly.monomial(conj)
        fields = {v.field for v in mono} | {v.field for v in conj}
        if not all(pair_sum.euler(f).is_zero() for f in fields):
            continue
        cm = cur.terms.get(mono, Coeff.zero())
        cc = cur.terms.get(conj, Coeff.zero())
        a = (cm - cc) * Coeff.make(_HALF)
        cur = cur - DiffPoly({mono: cm, conj: cc}) + DiffPoly({mono: a, conj: -a})
    return cur


def kinetic_term(n: int) -> DiffPoly:
    """(i/2)(psibar * psi_{t_n} - psi * psibar_{t_n})."""
    half_i = Coeff.make(0, _HALF)
    pt = JetVar("psi", 0, ((n, 1),))
    qt = JetVar("psibar", 0, ((n, 1),))
    return DiffPoly.monomial([PSIBAR, pt], half_i) - DiffPoly.monomial([PSI, qt], half_i)


def build_level_lagrangian(n: int) -> DiffPoly:
    """Level-n Lagrangian: kinetic term minus the normalised level-n density.

    The density is the (n+1)-st entry of the conserved-density ladder of the
    x-translation matrix, brought to the balanced by-parts normal form; the
    relative normalisation between the ladder and the Hamiltonian densities
    is exactly 1 in these conventions (fixed by the level-2 match).
    """
    U = hierarchy.build_u()
    dens = hierarchy.conserved_density(U, n + 1)
    return kinetic_term(n) - byparts_normal_form(dens)


# ---------------------------------------------------------------------------
# Ostrogradski reduction of higher-order Lagrangians
# ---------------------------------------------------------------------------

_BASE_FIELDS = ("phi1", "phi2")


def _chain_field(k: int, j: int) -> str:
    return _BASE_FIELDS[j] if k == 0 else f"c{k}_{j + 1}"


def _mu_field(k: int, j: int) -> str:
    return f"m{k}_{j + 1}"


@dataclass
class Reduction:
    """First-order auxiliary system equivalent to a higher-order Lagrangian."""

    original: DiffPoly
    level: int                      # t-level of the kinetic term
    order: int                      # highest x-derivative in the original
    lagrangian: DiffPoly            # auxiliary first-order Lagrangian
    coord_fields: tuple[str, ...]   # phi's, chain fields, multipliers (in order)
    chain_len: int

    def chain_jet_of_psi(self, dx: int, j: int, dt=()) -> JetVar:
        """Phase-space symbol representing the dx-th x-jet of field j."""
        if dx < self.chain_len:
            return JetVar(_chain_field(dx, j), 0, dt)
        if dx == self.chain_len:
            return JetVar(_chain_field(self.chain_len - 1, j), 1, dt)
        raise ValueError("jet beyond the reduced order")

    def multipliers_from_euler_lagrange(self) -> dict[JetVar, DiffPoly]:
        """Solve the chain-field variational equations for the multipliers."""
        out = {}
        for k in range(1, self.chain_len):
            for j in range(2):
                mu = JetVar(_mu_field(k, j), 0)
                el = full_euler(self.lagrangian, _chain_field(k, j), self.level)
                c = el.diff(mu).coefficient(())
                if c.is_zero():
                    raise ValueError("multiplier does not appear in its variational equation")
                rest = el - DiffPoly.var(mu, c)
                out[mu] = rest.scale(-(c.inverse()))
        return out

    def euler_lagrange_check(self) -> bool:
        """The auxiliary variational equations reproduce the original ones.

        Substituting the constraints (chain fields -> x-jets) and the solved
        multipliers into the base-field equations must give exactly the
        Euler-Lagrange equations of the original Lagrangian.
        """
        mus = self.multipliers_from_euler_lagrange()
        back = self._back_to_jets()
        for j, fld in enumerate(_BASE_FIELDS):
            el = full_euler(self.lagrangian, fld, self.level)
            el = el.substitute(mus).substitute(back)
            orig = full_euler(self.original, ("psi", "psibar")[j], self.level)
            if not (el - orig).is_zero():
                return False
        return True

    def _back_to_jets(self) -> dict[JetVar, DiffPoly]:
        rules = {}
        for j, psi_name in enumerate(("psi", "psibar")):
            rules[JetVar(_BASE_FIELDS[j], 0)] = DiffPoly.var(JetVar(psi_name, 0))
            for k in range(1, self.chain_len):
                rules[JetVar(_chain_field(k, j), 0)] = DiffPoly.var(JetVar(psi_name, k))
        return rules


def full_euler(L: DiffPoly, fld: str, level: int, max_order: int = 10) -> DiffPoly:
    """Variational derivative over both x and t_level derivatives."""
    out = _Z
    for k in range(max_order + 1):
        for l in range(0, 3):
            dt = ((level, l),) if l else ()
            term = L.diff(JetVar(fld, k, dt))
            if term.is_zero():
                continue
            for _ in range(k):
                term = -term.d_x()
            for _ in range(l):
                term = -term.d_t(level)
            out = out + term
    return out


def ostrogradski_reduce(L: DiffPoly, max_x_order: int | None = None) -> Reduction:
    """Rewrite a Lagrangian with x-derivatives of order up to K as a first-
    order system, adjoining chain fields for the lower jets and one Lagrange
    multiplier per chain constraint.

    A first-order Lagrangian passes through with only the field renaming.
    """
    levels = L.t_levels()
    if len(levels) != 1:
        raise ValueError("expected exactly one t-level in the Lagrangian")
    level = levels.pop()
    K = L.max_x_order() if max_x_order is None else max_x_order
    K = max(K, 1)
    for v in L.jets():
        if v.dt and v.dx:
            raise ValueError("mixed x/t jets are not supported in the Lagrangian")
        if v.field not in ("psi", "psibar"):
            raise ValueError(f"unexpected field {v.field!r} in the Lagrangian")

    rules = {}
    for j, psi_name in enumerate(("psi", "psibar")):
        for dx in range(0, K + 1):
            target = (JetVar(_chain_field(dx, j), 0) if dx < K
                      else JetVar(_chain_field(K - 1, j), 1))
            rules[JetVar(psi_name, dx)] = DiffPoly.var(target)
        rules[JetVar(psi_name, 0, ((level, 1),))] = DiffPoly.var(JetVar(_BASE_FIELDS[j], 0, ((level, 1),)))
    Laux = L._replace_jets(rules)

    coord_fields = list(_BASE_FIELDS)
    for k in range(1, K):
        coord_fields += [_chain_field(k, 0), _chain_field(k, 1)]
    for k in range(1, K):
        for j in range(2):
            mu = JetVar(_mu_field(k, j), 0)
            lower = JetVar(_chain_field(k - 1, j), 1)  # x-velocity of the previous link
            chain = JetVar(_chain_field(k, j), 0)
            Laux = Laux + DiffPoly.var(mu) * (DiffPoly.var(chain) - DiffPoly.var(lower))
            coord_fields.append(_mu_field(k, j))
    return Reduction(L, level, K, Laux, tuple(coord_fields), K)


# ---------------------------------------------------------------------------
# the Dirac pipeline
# ---------------------------------------------------------------------------


@dataclass
class ConstraintSystem:
    coords: tuple[JetVar, ...]            # coordinates, in declaration order
    momenta: tuple[JetVar, ...]           # conjugate momenta, same order
    lagrangian: DiffPoly
    constraints: tuple[DiffPoly, ...]     # primary constraints, paper ordering
    constraint_names: tuple[str, ...]
    M: tuple[tuple[Coeff, ...], ...]      # {C_j, C_k}, constant entries
    Minv: tuple[tuple[Coeff, ...], ...]
    multipliers: tuple[DiffPoly, ...]     # fixed by the consistency conditions
    second_class: bool
    dirac_full: "BracketTable"            # Dirac table on the full phase space


@dataclass
class LegendreResult:
    direction: object                     # ('t', n) for time, 'x' for space
    level: int
    hamiltonian_density: DiffPoly         # in psi/psibar jets
    table: BracketTable                   # in psi/psibar jets
    constraints: ConstraintSystem | None
    reduced_hamiltonian: DiffPoly         # in phase-space coordinates
    reduced_table: BracketTable           # Dirac table on the reduced coordinates
    jet_map: dict[JetVar, DiffPoly]       # psi-jets -> reduced-coordinate expressions


def _momentum_of(c: JetVar) -> JetVar:
    return JetVar("P_" + c.field, 0)


def _solve_linear_coeff_system(A: list[list[Coeff]], rhs: list[DiffPoly]) -> list[DiffPoly]:
    """Solve A x = rhs exactly (A constant, entries invertible where pivoted)."""
    n = len(A)
    M = [row[:] for row in A]
    b = rhs[:]
    perm = list(range(n))
    for col in range(n):
        piv = None
        for r in range(col, n):
            if not M[r][col].is_zero() and M[r][col].is_single_term():
                piv = r
                break
        if piv is None:
            raise ValueError("constraint matrix is singular (first-class constraints present?)")
        M[col], M[piv] = M[piv], M[col]
        b[col], b[piv] = b[piv], b[col]
        inv = M[col][col].inverse()
        M[col] = [x * inv for x in M[col]]
        b[col] = b[col].scale(inv)
        for r in range(n):
            if r == col or M[r][col].is_zero():
                continue
            f = M[r][col]
            M[r] = [x - f * y for x, y in zip(M[r], M[col])]
            b[r] = b[r] - b[col].scale(f)
    return b


def _invert_coeff_matrix(A: list[list[Coeff]]) -> list[list[Coeff]]:
    n = len(A)
    cols = []
    for j in range(n):
        e = [DiffPoly.const(Coeff.one()) if i == j else _Z for i in range(n)]
        cols.append(_solve_linear_coeff_system(A, e))
    out = [[cols[j][i].coefficient(()) for j in range(n)] for i in range(n)]
    return out


def dirac_pipeline(L: DiffPoly, direction: str) -> LegendreResult:
    """Full Legendre / Dirac analysis of a hierarchy Lagrangian.

    direction 'time': momenta taken with respect to the t_n-derivatives; the
    bracket is ultralocal in x and the analysis yields the (level-
    independent) equal-time table on (psi, psibar).
    direction 'space': momenta with respect to x-derivatives, after the
    auxiliary-field reduction when the Lagrangian is of higher order; yields
    the level-n equal-space table on the jets up to order n-1 and the dual
    Hamiltonian density.
    """
    levels = L.t_levels()
    if len(levels) != 1:
        raise ValueError("expected exactly one t-level in the Lagrangian")
    level = levels.pop()

    if direction == "time":
        xi = ("t", level)       # evolution variable (velocities)
        w = "x"                 # the bracket's ultralocal direction
        coords = [PSI, PSIBAR]
        Lwork = L
    elif direction == "space":
        xi = "x"
        w = ("t", level)
        reduction = ostrogradski_reduce(L)
        Lwork = reduction.lagrangian
        coords = [JetVar(f, 0) for f in reduction.coord_fields]
    else:
        raise ValueError("direction must be 'time' or 'space'")

    momenta = [_momentum_of(c) for c in coords]
    velocities = [_prolong(c, xi) for c in coords]

    # momentum relations
    pi_exprs = [Lwork.diff(v) for v in velocities]
    vel_set = set(velocities)
    constrained_idx = [i for i, e in enumerate(pi_exprs) if not (e.jets() & vel_set)]
    solvable_idx = [i for i in range(len(coords)) if i not in constrained_idx]

    # solve the regular block for its velocities
    sol_vel: dict[JetVar, DiffPoly] = {}
    if solvable_idx:
        A = []
        bvec = []
        for i in solvable_idx:
            e = pi_exprs[i]
            row = []
            rest = e
            for j in solvable_idx:
                cj = e.diff(velocities[j])
                c0 = cj.coefficient(())
                if not (cj - DiffPoly.const(c0)).is_zero():
                    raise ValueError("momentum relation is not linear with constant coefficients")
                row.append(c0)
                rest = rest - DiffPoly.var(velocities[j], c0)
            A.append(row)
            bvec.append(DiffPoly.var(momenta[i]) - rest)
        sols = _solve_linear_coeff_system(A, bvec)
        for j, i in enumerate(solvable_idx):
            sol_vel[velocities[i]] = sols[j]

    # canonical Hamiltonian: sum pi v - L, solved velocities substituted,
    # residual velocities must appear multiplied by their own constraint
    Hc = _Z
    for i in range(len(coords)):
        Hc = Hc + DiffPoly.var(momenta[i]) * DiffPoly.var(velocities[i])
    Hc = (Hc - Lwork)._replace_jets(sol_vel)

    constraints = []
    names = []
    order_key = []
    for i in constrained_idx:
        C = DiffPoly.var(momenta[i]) - pi_exprs[i]
        coeff_v = Hc.diff(velocities[i])
        if not (coeff_v - C).is_zero():
            raise AssertionError("unsolved velocity does not factor through its constraint")
        Hc = Hc - DiffPoly.var(velocities[i]) * C
        constraints.append(C)
        fieldname = coords[i].field
        names.append(f"C[{fieldname}]")
        if fieldname.startswith("m"):
            kind = 2
        elif fieldname.startswith("c"):
            kind = -int(fieldname[1:].split("_")[0])
        else:
            kind = 0
        order_key.append((kind, i))
    if any(v in Hc.jets() for v in velocities):
        raise AssertionError("velocities survive the Legendre transform")
    # multiplier momenta (identically zero relations) also yield constraints Lambda_j = 0
    # (already covered: their pi_exprs are velocity-free)

    order = sorted(range(len(constraints)), key=lambda idx: order_key[idx])
    constraints = [constraints[idx] for idx in order]
    names = [names[idx] for idx in order]

    # canonical table on the full phase space
    can_entries = {}
    for c, pm in zip(coords, momenta):
        can_entries[(pm, c)] = DiffPoly.const(1)
    phase = list(coords) + list(momenta)
    canonical = BracketTable(phase, can_entries, label="canonical")

    # constraint matrix
    m = len(constraints)
    Mmat = [[_Z for _ in range(m)] for _ in range(m)]
    for a in range(m):
        for b in range(m):
            Mmat[a][b] = leibniz_bracket(constraints[a], constraints[b], canonical)
    Mc = []
    for a in range(m):
        row = []
        for b in range(m):
            v = Mmat[a][b]
            c0 = v.coefficient(())
            if not (v - DiffPoly.const(c0)).is_zero():
                raise ValueError("field-dependent constraint matrix is not supported")
            row.append(c0)
        Mc.append(row)
    Minv = _invert_coeff_matrix(Mc)

    # elimination of one variable per constraint (preferring multiplier
    # momenta, then multipliers, then momenta)
    def elim_priority(v: JetVar) -> int:
        if v.field.startswith("P_m"):
            return 0
        if v.field.startswith("m"):
            return 1
        if v.field.startswith("P_"):
            return 2
        return 3

    elim: dict[JetVar, DiffPoly] = {}
    for C in constraints:
        cands = sorted((v for v in C.jets() if v not in elim), key=lambda v: (elim_priority(v), v.sort_key()))
        chosen = None
        for v in cands:
            dv = C.diff(v)
            c0 = dv.coefficient(())
            if (dv - DiffPoly.const(c0)).is_zero() and not c0.is_zero() and c0.is_single_term():
                chosen = (v, c0)
                break
        if chosen is None:
            raise ValueError("cannot solve a constraint for any variable")
        v, c0 = chosen
        elim[v] = (DiffPoly.var(v, c0) - C).scale(c0.inverse())
    # close the substitution
    for _ in range(len(elim) + 1):
        changed = False
        for v, e in list(elim.items()):
            e2 = e._replace_jets({u: elim[u] for u in e.jets() if u in elim})
            if not (e2 - e).is_zero():
                elim[v] = e2
                changed = True
        if not changed:
            break

    reduced = [v for v in phase if v not in elim]

    def dirac(f: DiffPoly, g: DiffPoly) -> DiffPoly:
        out = leibniz_bracket(f, g, canonical)
        fc = [leibniz_bracket(f, C, canonical) for C in constraints]
        cg = [leibniz_bracket(C, g, canonical) for C in constraints]
        for a in range(m):
            if fc[a].is_zero():
                continue
            for b in range(m):
                if Minv[a][b].is_zero() or cg[b].is_zero():
                    continue
                out = out - (fc[a] * cg[b]).scale(Minv[a][b])
        return out

    full_entries = {}
    for i1 in range(len(phase)):
        for i2 in range(i1 + 1, len(phase)):
            v = dirac(DiffPoly.var(phase[i1]), DiffPoly.var(phase[i2]))
            if not v.is_zero():
                full_entries[(phase[i1], phase[i2])] = v
    dirac_full = BracketTable(phase, full_entries, label="dirac-full")

    red_entries = {}
    for i1 in range(len(reduced)):
        for i2 in range(i1 + 1, len(reduced)):
            v = dirac(DiffPoly.var(reduced[i1]), DiffPoly.var(reduced[i2]))
            v = v._replace_jets({u: elim[u] for u in v.jets() if u in elim})
            if not v.is_zero():
                red_entries[(reduced[i1], reduced[i2])] = v
    red_table = BracketTable(reduced, red_entries, label=f"dirac-reduced-{direction}")

    Hred = Hc._replace_jets({u: elim[u] for u in Hc.jets() if u in elim})

    # multipliers from the consistency conditions {H*, C_j} = 0
    rhs = []
    for C in constraints:
        v = integral_bracket(Hred, C, canonical, w)
        v = v._replace_jets({u: elim[u] for u in v.jets() if u in elim})
        rhs.append(-v)
    # sum_k alpha_k {C_k, C_j} = -{H, C_j}  (j-th equation)
    At = [[Mc[k][j] for k in range(m)] for j in range(m)]
    alphas = _solve_linear_coeff_system(At, rhs)

    constraint_system = ConstraintSystem(
        coords=tuple(coords), momenta=tuple(momenta), lagrangian=Lwork,
        constraints=tuple(constraints), constraint_names=tuple(names),
        M=tuple(tuple(r) for r in Mc), Minv=tuple(tuple(r) for r in Minv),
        multipliers=tuple(alphas), second_class=True, dirac_full=dirac_full,
    )

    # translate to psi/psibar jets
    if direction == "time":
        # reduced coordinates are the fields themselves
        jet_map = {PSI: DiffPoly.var(PSI), PSIBAR: DiffPoly.var(PSIBAR)}
        table = BracketTable([PSI, PSIBAR],
                             {(PSI, PSIBAR): red_table.entry(PSI, PSIBAR)},
                             label="S")
        return LegendreResult(("t", level), level, Hred, table, constraint_system,
                              Hred, red_table, jet_map)

    # space direction: build psi-jets as Dirac-Hamilton flows of the base fields
    njets = level
    jet_map = {}
    exprs = {}
    for j, psi_name in enumerate(("psi", "psibar")):
        cur = DiffPoly.var(JetVar(_BASE_FIELDS[j], 0))
        exprs[(j, 0)] = cur
        jet_map[JetVar(psi_name, 0)] = cur
        for k in range(1, njets):
            cur = integral_bracket(Hred, cur, red_table, w)
            exprs[(j, k)] = cur
            jet_map[JetVar(psi_name, k)] = cur

    # invert the triangular jet map: reduced coordinates in terms of jets
    inverse: dict[JetVar, DiffPoly] = {}
    pending = sorted(exprs, key=lambda t: (t[1], t[0]))
    for _ in range(len(pending) + 2):
        progress = False
        for (j, k) in list(pending):
            e = exprs[(j, k)]
            unknown = [v for v in e.jets() if _strip_prolongation(v, list(inverse), w) is None]
            target = DiffPoly.var(JetVar(("psi", "psibar")[j], k))
            if not unknown:
                pending.remove((j, k))
                progress = True
                continue
            if len(unknown) == 1:
                v = unknown[0]
                dv = e.diff(v)
                c0 = dv.coefficient(())
                if (dv - DiffPoly.const(c0)).is_zero() and c0.is_single_term() and not c0.is_zero():
                    rest = (e - DiffPoly.var(v, c0)).substitute(inverse)
                    inverse[v] = (target - rest).scale(c0.inverse())
                    pending.remove((j, k))
                    progress = True
        if not progress:
            break
    missing = [c for c in reduced if c not in inverse]
    if missing:
        raise ValueError(f"could not express phase coordinates in jets: {missing}")
    rules = dict(inverse)

    jet_coords = [JetVar(f, k) for k in range(njets) for f in ("psi", "psibar")]
    table_entries = {}
    for a in range(len(jet_coords)):
        for b in range(a + 1, len(jet_coords)):
            ja, jb = jet_coords[a], jet_coords[b]
            v = leibniz_bracket(jet_map[ja], jet_map[jb], red_table)
            v = v.substitute(rules)
            if not v.is_zero():
                table_entries[(ja, jb)] = v
    table = BracketTable(jet_coords, table_entries, label=f"T{level}")

    Hdens = Hred.substitute(rules)
    return LegendreResult("x", level, Hdens, table, constraint_system,
                          Hred, red_table, jet_map)


# ---------------------------------------------------------------------------
# Hamilton-equation verification
# ---------------------------------------------------------------------------


def hamilton_check(result: LegendreResult, rules: Mapping[JetVar, DiffPoly]) -> dict:
    """Verify that the produced table and density generate the right flow.

    For the time direction the flow of each field must equal the level's
    evolution rule; for the space direction the flow of every jet coordinate,
    with the evolution rules substituted, must equal its next x-jet.
    """
    checks = []
    h = result.hamiltonian_density
    table = result.table
    if result.direction == "x":
        w = ("t", result.level)
        for c in table.coords:
            flow = integral_bracket(h, DiffPoly.var(c), table, w)
            expected = DiffPoly.var(c.prolong_x())
            got = flow.substitute(rules)
            checks.append({
                "coordinate": repr(c),
                "status": "pass" if (got - expected.substitute(rules)).is_zero() else "fail",
                "flow": repr(flow),
            })
    else:
        w = "x"
        for c in table.coords:
            flow = integral_bracket(h, DiffPoly.var(c), table, w)
            key = c.prolong_t(result.level)
            expected = rules.get(key)
            ok = expected is not None and (flow - expected).is_zero()
            checks.append({
                "coordinate": repr(c),
                "status": "pass" if ok else "fail",
                "flow": repr(flow),
            })
    status = "pass" if all(c["status"] == "pass" for c in checks) else "fail"
    return {"identity": "hamilton equations", "status": status, "checks": checks}
