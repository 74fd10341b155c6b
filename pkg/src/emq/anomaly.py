"""Slicing corrections for the reduced action built from a generating function.

The continuum reduction is exact, but a sliced action has to carry the
canonical transformation across each time step through a mixed-variable
generating function F(old momenta; new coordinates).  Doing that consistently
adds per-slice correction terms: four coefficients multiplying the increments
of the reduced pair and of the gauge pair.  This module derives the
transformation relations implied by F, assembles the coefficients, restricts
them to the gauge surface z = p_z = 0, expands the gauge-fixed slice
Hamiltonian to first order in the increments, and measures how the surviving
corrections scale with the slice width (the 3/2-power law that makes them
drop out of the continuum limit).

Every correction term carries a third derivative of F, so for quadratic
generating functions all four coefficients vanish identically and the check
is structural.  For the non-quadratic free-particle chart the coefficients
ship as reference data in the model file; the direct positional assembly is
kept as a diagnostic (see direct_assembly for why it is not the oracle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .expr import (
    Expr, Const, Sym, Add, Mul, Div, ZERO,
    EvalError, ExprError, SampleDomain, ComparisonResult,
    differentiate, evaluate, normalize, numeric_compare, substitute,
)
from .reduction import CanonicalMap, UnsupportedPatternError
from .symplectic import PhaseSpace

__all__ = [
    "AnomalyError", "ChartSingularityError",
    "GeneratingFunction", "AnomalyCoeffs",
    "SurfaceEntry", "SurfaceReport", "SlicedTerm", "SlicedExpansionReport",
    "ScalingFit", "MeasureCheck",
    "increment_symbol", "consistency_report", "anomaly_coefficients",
    "direct_assembly", "constraint_surface_vanishing",
    "sliced_expansion_check", "correction_scaling",
    "jacobian_exponentiation_check", "measure_increments",
    "exponentiation_deviation_slope", "implicit_partials_fd",
]

COEFF_NAMES = ("A_zeta", "A_z", "B_zeta", "B_z")


class AnomalyError(ExprError):
    """Generating-function data inconsistent with the chart it claims."""


class ChartSingularityError(AnomalyError):
    """The old momenta cannot be recovered at this parameter point."""


def increment_symbol(name: str) -> str:
    """Symbol holding the inter-slice increment of a chart variable."""
    return "delta_" + name


# ---------------------------------------------------------------------------
# generating function and implied relations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratingFunction:
    """Mixed generating function F(old momenta, new coordinates).

    momentum_pairs lists (old momentum, old coordinate it determines) and
    coordinate_pairs lists (new coordinate, new momentum it determines); the
    transformation is read off through

        old coordinate = -dF/d(old momentum)
        new momentum   = -dF/d(new coordinate)

    Only those four derivatives are ever used, so F is defined up to an
    additive function of the parameters.
    """

    expr: Expr
    momentum_pairs: Tuple[Tuple[str, str], ...]
    coordinate_pairs: Tuple[Tuple[str, str], ...]

    @classmethod
    def for_chart(cls, expr: Expr, ps: PhaseSpace,
                  map: CanonicalMap) -> "GeneratingFunction":
        mom_pairs = tuple((ps.conjugate_momentum(c), c) for c in ps.coordinates)
        coord_pairs = tuple(map.pairs) + (map.gauge,)
        gen = cls(expr, mom_pairs, coord_pairs)
        # mixed-type: F may not depend on the variables its relations define
        defined = {q for _, q in mom_pairs} | {m for _, m in coord_pairs}
        bad = set(expr.free_symbols()) & defined
        if bad:
            raise AnomalyError(
                f"generating function depends on the defined variables "
                f"{sorted(bad)}; it must be written in the old momenta and "
                f"new coordinates only")
        return gen

    @property
    def arguments(self) -> Tuple[str, ...]:
        return tuple(v for v, _ in self.momentum_pairs + self.coordinate_pairs)

    def relations(self) -> Tuple[Tuple[str, Expr], ...]:
        """(defined name, expression) pairs, old coordinates first."""
        out = []
        for var, defines in self.momentum_pairs + self.coordinate_pairs:
            d = differentiate(self.expr, var)
            out.append((defines, normalize(Mul((Const(-1), d)))))
        return tuple(out)

    def is_quadratic(self) -> bool:
        """True when every third partial in the arguments vanishes structurally."""
        names = self.arguments
        for i, a in enumerate(names):
            da = differentiate(self.expr, a)
            for j in range(i, len(names)):
                dab = differentiate(da, names[j])
                for k in range(j, len(names)):
                    if differentiate(dab, names[k]) != ZERO:
                        return False
        return True


def consistency_report(gen: GeneratingFunction, map: CanonicalMap,
                       chart: SampleDomain, n: int = 64, tol: float = 1e-8,
                       seed: int = 0) -> Dict[str, ComparisonResult]:
    """Check the relations implied by F against the shipped chart.

    Each relation is pushed to the source chart by substituting the forward
    expressions for the new coordinates, then compared against the forward
    expression it should reproduce (or against the source symbol itself for
    an old coordinate).
    """
    on_shell = {coord: map.forward_expr(coord)
                for coord, _ in gen.coordinate_pairs}
    new_momenta = {m for _, m in gen.coordinate_pairs}
    out = {}
    for defines, rel in gen.relations():
        lhs = normalize(substitute(rel, on_shell))
        if defines in new_momenta:
            rhs = map.forward_expr(defines)
        else:
            rhs = Sym(defines)
        out[defines] = numeric_compare(lhs, rhs, chart, n=n, tol=tol, seed=seed)
    return out


# ---------------------------------------------------------------------------
# correction coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnomalyCoeffs:
    """Per-slice correction coefficients on the target chart.

    A_zeta and A_z multiply the coordinate increments of the reduced pair and
    the gauge pair; B_zeta and B_z multiply the momentum increments.  source
    records how the values were obtained ("third-derivative structure",
    "reference data" or "direct assembly"); notes carry caveats that any
    report built on top should surface verbatim.
    """

    A_zeta: Expr
    A_z: Expr
    B_zeta: Expr
    B_z: Expr
    source: str
    notes: Tuple[str, ...] = ()

    def as_pairs(self) -> Tuple[Tuple[str, Expr], ...]:
        return (("A_zeta", self.A_zeta), ("A_z", self.A_z),
                ("B_zeta", self.B_zeta), ("B_z", self.B_z))

    @property
    def all_zero(self) -> bool:
        return all(e == ZERO for _, e in self.as_pairs())


def anomaly_coefficients(gen: GeneratingFunction, map: CanonicalMap,
                         reference_A_z: Optional[Expr] = None) -> AnomalyCoeffs:
    """Correction coefficients for the sliced transformation generated by F.

    Quadratic F: all four coefficients are structurally zero because every
    correction term carries a third derivative of F.  Non-quadratic F with
    shipped reference data: the gauge-coordinate coefficient is the reference
    closed form and the other three vanish on this chart family.  Otherwise
    fall back to the direct assembly, which is diagnostic rather than
    authoritative (see direct_assembly).
    """
    if gen.is_quadratic():
        return AnomalyCoeffs(
            ZERO, ZERO, ZERO, ZERO,
            source="third-derivative structure",
            notes=("quadratic generating function: every correction term "
                   "carries one of its third derivatives, so all four "
                   "coefficients vanish identically",))
    if reference_A_z is not None:
        return AnomalyCoeffs(
            ZERO, reference_A_z, ZERO, ZERO,
            source="reference data",
            notes=("non-quadratic generating function: coefficients taken "
                   "from shipped reference data for this chart family",
                   "an end-to-end derivation of the gauge-coordinate "
                   "coefficient from F alone is not settled here; "
                   "direct_assembly records the candidate route and where "
                   "it disagrees"))
    return direct_assembly(gen, map)


def direct_assembly(gen: GeneratingFunction, map: CanonicalMap) -> AnomalyCoeffs:
    """Positional assembly of the four coefficients from third derivatives of F.

    Bookkeeping: each term is (1/2) * (third partial of F) * (inverse-map
    partial of an old momentum by the increment direction) * (forward partial
    of a new coordinate by an old variable), everything pushed to the source
    chart through the forward map.  For quadratic F the result is zero under
    any grouping.  For the non-quadratic free-particle chart this grouping
    reproduces the vanishing gauge-momentum coefficient but not the shipped
    closed form for A_z: the off-surface third partials of that F are
    singular where the reference form is finite, so some regrouping has to
    happen before the surface restriction and the two-term display alone does
    not pin it down.  Several alternative pairings were tried and none match,
    hence reference data is preferred whenever present.
    """
    if len(gen.momentum_pairs) != 2 or len(gen.coordinate_pairs) != 2:
        raise UnsupportedPatternError(
            "direct assembly expects two old pairs and two new pairs")
    moms = tuple(v for v, _ in gen.momentum_pairs)
    src_coords = tuple(q for _, q in gen.momentum_pairs)
    newc = tuple(v for v, _ in gen.coordinate_pairs)
    newm = tuple(m for _, m in gen.coordinate_pairs)
    fwd = dict(map.forward)
    inv = dict(map.inverse)
    on_shell = {name: fwd[name] for name in newc}
    all_fwd = {name: fwd[name] for name in map.target_names}
    half = Const(Fraction(1, 2))

    def push(e: Expr) -> Expr:
        return normalize(substitute(e, on_shell))

    def f3(a: str, b: str, c: str) -> Expr:
        d = differentiate(differentiate(differentiate(gen.expr, a), b), c)
        return push(d)

    def d_inv(mom: str, target: str) -> Expr:
        # inverse-map partial, pushed back to the source chart
        return normalize(substitute(differentiate(inv[mom], target), all_fwd))

    def pp_block(direction: str, weights: Sequence[str]) -> list:
        out = []
        for b in moms:
            sb = d_inv(b, direction)
            if sb == ZERO:
                continue
            for ci, c in enumerate(moms):
                for nu in newc:
                    third = f3(b, c, nu)
                    if third == ZERO:
                        continue
                    w = differentiate(fwd[nu], weights[ci])
                    if w == ZERO:
                        continue
                    out.append(Mul((half, third, sb, w)))
        return out

    def qq_block(direction: str) -> list:
        out = []
        for bi, b in enumerate(moms):
            for ni, nu in enumerate(newc):
                third = f3(b, nu, direction)
                if third == ZERO:
                    continue
                w = differentiate(fwd[newc[bi]], src_coords[ni])
                if w == ZERO:
                    continue
                out.append(Mul((half, third, w)))
        return out

    def total(terms: list) -> Expr:
        if not terms:
            return ZERO
        if len(terms) == 1:
            return normalize(terms[0])
        return normalize(Add(tuple(terms)))

    a_zeta = total(pp_block(newc[0], moms) + qq_block(newc[0]))
    a_z = total(pp_block(newc[1], moms) + qq_block(newc[1]))
    b_zeta = total(pp_block(newm[0], src_coords))
    b_z = total(pp_block(newm[1], src_coords))
    return AnomalyCoeffs(
        a_zeta, a_z, b_zeta, b_z,
        source="direct assembly",
        notes=("positional grouping; diagnostic only for non-quadratic "
               "generating functions, prefer shipped reference data",))


# ---------------------------------------------------------------------------
# gauge-surface restriction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceEntry:
    name: str
    restricted: Expr
    vanishes: bool
    max_abs_err: float


@dataclass(frozen=True)
class SurfaceReport:
    entries: Tuple[SurfaceEntry, ...]

    @property
    def all_vanish(self) -> bool:
        return all(e.vanishes for e in self.entries)

    def entry(self, name: str) -> SurfaceEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def constraint_surface_vanishing(coeffs: AnomalyCoeffs, map: CanonicalMap,
                                 chart: SampleDomain, n: int = 64,
                                 tol: float = 1e-9,
                                 seed: int = 0) -> SurfaceReport:
    """Restrict each coefficient to z = p_z = 0 and test for zero.

    Structural zeros are reported with error 0; anything else is sampled on
    the chart.  The physical statement is that the corrections are pure gauge:
    they multiply increments of variables the gauge fixing freezes, or vanish
    once the frozen values are substituted.
    """
    surface = {map.z: ZERO, map.p_z: ZERO}
    entries = []
    for name, e in coeffs.as_pairs():
        restricted = normalize(substitute(e, surface))
        if restricted == ZERO:
            entries.append(SurfaceEntry(name, restricted, True, 0.0))
            continue
        cmp = numeric_compare(restricted, ZERO, chart, n=n, tol=tol, seed=seed)
        entries.append(SurfaceEntry(name, restricted, cmp.equal, cmp.max_abs_err))
    return SurfaceReport(tuple(entries))


# ---------------------------------------------------------------------------
# sliced expansion of the gauge-fixed Hamiltonian
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlicedTerm:
    name: str
    derived: Expr
    expected: Optional[Expr]
    comparison: Optional[ComparisonResult]

    @property
    def matches(self) -> Optional[bool]:
        return None if self.comparison is None else self.comparison.equal


@dataclass(frozen=True)
class SlicedExpansionReport:
    terms: Tuple[SlicedTerm, ...]
    determinant: Expr

    @property
    def all_match(self) -> bool:
        checked = [t for t in self.terms if t.comparison is not None]
        return bool(checked) and all(t.comparison.equal for t in checked)

    def term(self, name: str) -> SlicedTerm:
        for t in self.terms:
            if t.name == name:
                return t
        raise KeyError(name)


def _midpoint_shift(e: Expr, block: Sequence[str]) -> Expr:
    """e minus half its differential along the block's increments."""
    terms = [e]
    for name in block:
        d = differentiate(e, name)
        if d == ZERO:
            continue
        terms.append(Mul((Const(Fraction(-1, 2)), d,
                          Sym(increment_symbol(name)))))
    if len(terms) == 1:
        return normalize(e)
    return normalize(Add(tuple(terms)))


def sliced_expansion_check(gen: GeneratingFunction, map: CanonicalMap,
                           hamiltonian: Expr, chart: SampleDomain,
                           expected: Optional[Tuple[Expr, Expr, Expr]] = None,
                           n: int = 100, tol: float = 1e-8,
                           seed: int = 0) -> SlicedExpansionReport:
    """Expand the gauge-fixed slice Hamiltonian to first order in increments.

    The midpoint form of each relation shifts it by minus half its
    differential in the conjugate block.  The two new-momentum relations are
    then solved for the old momenta (they must be affine; the 2x2 determinant
    is the chart-regularity certificate), the old coordinates and momenta in
    the Hamiltonian are replaced, the old-momentum increments are expanded
    through the inverse-map differentials, and the gauge surface
    z = p_z = delta_z = delta_p_z = 0 is imposed.  What survives is the
    reduced Hamiltonian plus one correction linear in each remaining
    increment; expected, when given, holds reference forms for
    (constant, delta-momentum coefficient, delta-coordinate coefficient).
    """
    if len(gen.momentum_pairs) != 2 or len(gen.coordinate_pairs) != 2:
        raise UnsupportedPatternError(
            "sliced expansion expects two old pairs and two new pairs")
    moms = tuple(v for v, _ in gen.momentum_pairs)
    newc = tuple(v for v, _ in gen.coordinate_pairs)
    newm = tuple(m for _, m in gen.coordinate_pairs)
    rel = dict(gen.relations())

    # midpoint relations: coordinates shift in the old momenta, momenta in
    # the new coordinates
    sym_rel = {}
    for mom, coord in gen.momentum_pairs:
        sym_rel[coord] = _midpoint_shift(rel[coord], moms)
    for coord, mom in gen.coordinate_pairs:
        sym_rel[mom] = _midpoint_shift(rel[mom], newc)

    # solve the two momentum relations for the old momenta (affine, Cramer)
    zero_moms = {b: ZERO for b in moms}
    matrix = []
    residual = []
    for m in newm:
        row = []
        for b in moms:
            entry = differentiate(sym_rel[m], b)
            for c in moms:
                if differentiate(entry, c) != ZERO:
                    raise UnsupportedPatternError(
                        f"relation for {m} is not affine in the old momenta")
            row.append(entry)
        matrix.append(row)
        residual.append(normalize(substitute(sym_rel[m], zero_moms)))
    det = normalize(Add((Mul((matrix[0][0], matrix[1][1])),
                         Mul((Const(-1), matrix[0][1], matrix[1][0])))))
    if det == ZERO:
        raise ChartSingularityError(
            "the generated relations do not determine the old momenta")
    rhs = [normalize(Add((Sym(m), Mul((Const(-1), r)))))
           for m, r in zip(newm, residual)]
    sol = {
        moms[0]: normalize(Div(Add((Mul((rhs[0], matrix[1][1])),
                                    Mul((Const(-1), rhs[1], matrix[0][1])))),
                               det)),
        moms[1]: normalize(Div(Add((Mul((matrix[0][0], rhs[1])),
                                    Mul((Const(-1), matrix[1][0], rhs[0])))),
                               det)),
    }

    # chart regularity at the sample points used below
    points = chart.sample(n, seed=seed)
    for pt in points:
        try:
            value = evaluate(det, pt)
        except EvalError as exc:
            raise ChartSingularityError(
                f"old-momentum solve degenerates at {pt}: {exc}") from exc
        if abs(value) < 1e-9:
            raise ChartSingularityError(
                f"old-momentum solve degenerates at {pt}")

    # old-momentum increments through the inverse-map differentials
    inv = dict(map.inverse)
    delta_subs = {}
    for b in moms:
        pieces = []
        for t in map.target_names:
            d = differentiate(inv[b], t)
            if d == ZERO:
                continue
            pieces.append(Mul((d, Sym(increment_symbol(t)))))
        if not pieces:
            raise AnomalyError(f"inverse expression for {b} is constant")
        delta_subs[increment_symbol(b)] = (
            pieces[0] if len(pieces) == 1 else Add(tuple(pieces)))

    h1 = substitute(hamiltonian,
                    {coord: sym_rel[coord] for _, coord in gen.momentum_pairs})
    h2 = substitute(h1, sol)
    h3 = substitute(h2, delta_subs)
    surface = {newc[1]: ZERO, newm[1]: ZERO,
               increment_symbol(newc[1]): ZERO,
               increment_symbol(newm[1]): ZERO}
    h_surface = normalize(substitute(h3, surface))

    dp = increment_symbol(newm[0])
    dq = increment_symbol(newc[0])
    no_delta = {dp: ZERO, dq: ZERO}
    constant = normalize(substitute(h_surface, no_delta))
    coeff_p = normalize(substitute(differentiate(h_surface, dp), no_delta))
    coeff_q = normalize(substitute(differentiate(h_surface, dq), no_delta))

    derived = (("constant", constant), ("momentum_shift", coeff_p),
               ("coordinate_shift", coeff_q))
    terms = []
    for i, (name, e) in enumerate(derived):
        want = expected[i] if expected is not None else None
        cmp = None
        if want is not None:
            cmp = numeric_compare(e, want, chart, n=n, tol=tol, seed=seed)
        terms.append(SlicedTerm(name, e, want, cmp))
    return SlicedExpansionReport(tuple(terms), det)


# ---------------------------------------------------------------------------
# scaling of the surviving corrections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    widths: Tuple[float, ...]
    means: Tuple[float, ...]
    slope: float


def correction_scaling(report: SlicedExpansionReport, chart: SampleDomain,
                       widths: Tuple[float, ...] = tuple(2.0 ** -k
                                                         for k in range(4, 11)),
                       n_samples: int = 4000, seed: int = 0) -> ScalingFit:
    """Per-slice contribution of the correction terms versus slice width.

    Increments of a thermal path scale like sqrt(width), and the correction
    enters the sliced action multiplied by the width itself, so the mean
    absolute per-slice contribution follows width^(3/2).  The fit returns the
    log-log slope over the given widths.
    """
    c_p = report.term("momentum_shift").derived
    c_q = report.term("coordinate_shift").derived
    point = chart.sample(1, seed=seed)[0]
    vp = evaluate(c_p, point)
    vq = evaluate(c_q, point)
    rng = np.random.default_rng(seed)
    means = []
    for eps in widths:
        sd = math.sqrt(eps)
        dp = rng.normal(0.0, sd, size=n_samples)
        dq = rng.normal(0.0, sd, size=n_samples)
        means.append(eps * float(np.mean(np.abs(vp * dp + vq * dq))))
    slope = float(np.polyfit(np.log(widths), np.log(means), 1)[0])
    return ScalingFit(tuple(widths), tuple(means), slope)


# ---------------------------------------------------------------------------
# measure factor: product versus exponential
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureCheck:
    product: float
    exponential: float
    rel_deviation: float


def jacobian_exponentiation_check(increments: Sequence[float]) -> MeasureCheck:
    """Compare prod_j (1 + s_j) against exp(sum_j s_j).

    The sliced measure produces the product; the continuum argument replaces
    it by the exponential.  The two agree up to second order in the per-slice
    corrections, which is what makes coefficients that vanish on the gauge
    surface harmless.
    """
    prod = 1.0
    total = 0.0
    for s in increments:
        prod *= 1.0 + float(s)
        total += float(s)
    expo = math.exp(total)
    scale = max(abs(expo), 1e-300)
    return MeasureCheck(prod, expo, abs(prod - expo) / scale)


def measure_increments(coeffs: AnomalyCoeffs, map: CanonicalMap,
                       chart: SampleDomain, n_slices: int = 128,
                       width: float = 1.0 / 128.0,
                       seed: int = 0) -> Tuple[float, ...]:
    """Per-slice corrections along a random gauge-surface path.

    The chart variables are frozen at one sampled point with z = p_z = 0;
    the four increments are Gaussian with standard deviation sqrt(width),
    except the gauge pair's, which the gauge fixing forces to zero.
    """
    point = dict(chart.sample(1, seed=seed)[0])
    point[map.z] = 0.0
    point[map.p_z] = 0.0
    names = [c for c, _ in coeffs.as_pairs()]
    values = {}
    for name, e in coeffs.as_pairs():
        values[name] = evaluate(e, point)
    rng = np.random.default_rng(seed)
    sd = math.sqrt(width)
    out = []
    for _ in range(n_slices):
        d_zeta = rng.normal(0.0, sd)
        d_pzeta = rng.normal(0.0, sd)
        s = (values[names[0]] * d_zeta + values[names[2]] * d_pzeta)
        # gauge-pair increments are frozen on the surface, so A_z and B_z
        # never enter here
        out.append(width * s)
    return tuple(out)


def exponentiation_deviation_slope(
        magnitudes: Sequence[float] = (1e-3, 3e-3, 1e-2, 3e-2),
        n_slices: int = 64, seed: int = 0) -> float:
    """Log-log slope of the product/exponential deviation, expected near 2."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(-1.0, 1.0, size=n_slices)
    devs = []
    for m in magnitudes:
        devs.append(jacobian_exponentiation_check(m * base).rel_deviation)
    return float(np.polyfit(np.log(magnitudes), np.log(devs), 1)[0])


# ---------------------------------------------------------------------------
# finite-difference oracle for inverse-map partials
# ---------------------------------------------------------------------------

def implicit_partials_fd(map: CanonicalMap, sources: Sequence[str],
                         point: Dict[str, float],
                         h: float = 1e-6) -> Dict[Tuple[str, str], float]:
    """d(source)/d(target) by inverting the differenced forward Jacobian.

    point binds every source variable and parameter.  This never touches the
    shipped inverse expressions, so it works as an oracle for them; a
    non-invertible Jacobian raises instead of silently pseudo-inverting.
    """
    sources = tuple(sources)
    targets = map.target_names
    if len(sources) != len(targets):
        raise AnomalyError(
            f"need a square Jacobian: {len(sources)} sources, "
            f"{len(targets)} targets")
    jac = np.empty((len(targets), len(sources)))
    for j, s in enumerate(sources):
        up = dict(point)
        dn = dict(point)
        up[s] = point[s] + h
        dn[s] = point[s] - h
        for i, t in enumerate(targets):
            e = map.forward_expr(t)
            jac[i, j] = (evaluate(e, up) - evaluate(e, dn)) / (2.0 * h)
    det = float(np.linalg.det(jac))
    if not math.isfinite(det) or abs(det) < 1e-12:
        raise AnomalyError(
            f"forward Jacobian is numerically singular at {point} "
            f"(det = {det:g})")
    inv = np.linalg.inv(jac)
    out = {}
    for j, s in enumerate(sources):
        for i, t in enumerate(targets):
            out[(s, t)] = float(inv[j, i])
    return out
