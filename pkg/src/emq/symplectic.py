"""Phase-space structure: Poisson brackets, Hamilton fields, charge splitting.

Coordinates follow the momenta-first convention throughout: the state vector
is xi = (p_1..p_N, q^1..q^N) and the symplectic matrix has the block form
[[0, I], [-I, 0]] in that ordering.  Systems whose Hamiltonian is linear in
every momentum (H = f^a(q) p_a, optionally plus a momentum-free potential)
get their q-dynamics decoupled from the momenta; conserved charges and a
positive combination rho of them drive the splitting H = H_plus - H_minus
with both halves nonnegative wherever rho > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

from .expr import (
    Expr, Const, Sym, Add, Mul, Pow, Div, ZERO,
    SampleDomain, differentiate, normalize, numeric_compare, numeric_equal,
    ExprError,
)

__all__ = [
    "PhaseSpace", "FlowSystem", "HamiltonianSplit",
    "ChargeReport", "ChargeEntry",
    "poisson_bracket", "hamilton_vector_field", "split_hamiltonian",
    "verify_charges", "gauge_pair_check",
    "StructureError", "RhoNotConservedError",
]


class StructureError(ExprError):
    """A declared system violates a structural requirement."""


class RhoNotConservedError(StructureError):
    pass


@dataclass(frozen=True)
class PhaseSpace:
    """N conjugate pairs; state ordering is momenta first, then coordinates."""

    coordinates: Tuple[str, ...]
    momenta: Tuple[str, ...]

    def __post_init__(self):
        if len(self.coordinates) != len(self.momenta):
            raise StructureError("coordinate/momentum count mismatch")
        names = self.coordinates + self.momenta
        if len(set(names)) != len(names):
            raise StructureError("coordinate and momentum names must be disjoint")

    @classmethod
    def from_coordinates(cls, coordinates: Sequence[str]) -> "PhaseSpace":
        coords = tuple(coordinates)
        return cls(coords, tuple("p_" + c for c in coords))

    @property
    def dof(self) -> int:
        return len(self.coordinates)

    @property
    def xi(self) -> Tuple[str, ...]:
        return self.momenta + self.coordinates

    def omega_entry(self, i: int, j: int) -> int:
        """Entry of the block matrix [[0, I], [-I, 0]] in xi ordering."""
        n = self.dof
        if j == i + n:
            return 1
        if i == j + n:
            return -1
        return 0

    def omega(self) -> Tuple[Tuple[int, ...], ...]:
        dim = 2 * self.dof
        return tuple(tuple(self.omega_entry(i, j) for j in range(dim))
                     for i in range(dim))

    def conjugate_momentum(self, coordinate: str) -> str:
        return self.momenta[self.coordinates.index(coordinate)]


def poisson_bracket(f: Expr, g: Expr, ps: PhaseSpace) -> Expr:
    """{f, g} = sum_a df/dq^a dg/dp_a - df/dp_a dg/dq^a, normalized."""
    terms = []
    for q, p in zip(ps.coordinates, ps.momenta):
        terms.append(Mul((differentiate(f, q), differentiate(g, p))))
        terms.append(Mul((Const(-1), differentiate(f, p), differentiate(g, q))))
    return normalize(Add(tuple(terms)))


def hamilton_vector_field(H: Expr, ps: PhaseSpace) -> Tuple[Expr, ...]:
    """xi-dot in xi ordering: (pdot_1.., qdot^1..) = (-dH/dq, +dH/dp)."""
    pdot = tuple(normalize(Mul((Const(-1), differentiate(H, q))))
                 for q in ps.coordinates)
    qdot = tuple(differentiate(H, p) for p in ps.momenta)
    return pdot + qdot


def _structurally_zero(e: Expr) -> bool:
    n = normalize(e)
    return isinstance(n, Const) and n.value == 0


def _is_momentum_free(e: Expr, ps: PhaseSpace) -> bool:
    return not (e.free_symbols() & set(ps.momenta))


@dataclass(frozen=True)
class FlowSystem:
    """Momentum-linear system q-dot^a = f^a(q) with declared charges.

    velocities holds one expression per coordinate (the f^a, momentum-free);
    charges are (name, expression) pairs the caller asserts conserved;
    rho_coefficients maps charge names to coefficient expressions (usually
    bare parameters) whose combination rho = sum coeff_i C^i feeds the
    splitting.  potential is an optional momentum-free additive term, so H
    stays affine in every momentum.  chart is the sampling domain on which
    all numeric verification for this system runs.
    """

    space: PhaseSpace
    velocities: Tuple[Expr, ...]
    charges: Tuple[Tuple[str, Expr], ...]
    rho_coefficients: Tuple[Tuple[str, Expr], ...]
    chart: SampleDomain
    potential: Expr = ZERO
    parameters: Tuple[str, ...] = ()

    def __post_init__(self):
        ps = self.space
        if len(self.velocities) != ps.dof:
            raise StructureError("need one velocity function per coordinate")
        for v in self.velocities:
            if not _is_momentum_free(v, ps):
                raise StructureError(f"velocity {v} depends on a momentum")
        if not _is_momentum_free(self.potential, ps):
            raise StructureError("potential must be momentum-free")
        H = self.hamiltonian
        for pa in ps.momenta:
            dHa = differentiate(H, pa)
            for pb in ps.momenta:
                if not _structurally_zero(differentiate(dHa, pb)):
                    raise StructureError(
                        f"H is not affine in momenta: d2H/d{pa}d{pb} != 0")
        names = {name for name, _ in self.charges}
        for name, _ in self.rho_coefficients:
            if name not in names:
                raise StructureError(f"rho references unknown charge {name!r}")

    @property
    def hamiltonian(self) -> Expr:
        terms = [Mul((v, Sym(p))) for v, p in zip(self.velocities, self.space.momenta)]
        if not _structurally_zero(self.potential):
            terms.append(self.potential)
        if len(terms) == 1:
            return normalize(terms[0])
        return normalize(Add(tuple(terms)))

    @property
    def rho(self) -> Expr:
        by_name = dict(self.charges)
        terms = [Mul((coeff, by_name[name])) for name, coeff in self.rho_coefficients]
        if not terms:
            return ZERO
        if len(terms) == 1:
            return normalize(terms[0])
        return normalize(Add(tuple(terms)))

    def charge(self, name: str) -> Expr:
        for n, c in self.charges:
            if n == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class ChargeEntry:
    name: str
    conserved: bool
    max_err: float
    momentum_free: bool


@dataclass(frozen=True)
class ChargeReport:
    entries: Tuple[ChargeEntry, ...]

    @property
    def all_conserved(self) -> bool:
        return all(e.conserved for e in self.entries)

    def entry(self, name: str) -> ChargeEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def verify_charges(sys: FlowSystem, n: int = 100, tol: float = 1e-12,
                   seed: int = 0) -> ChargeReport:
    """Check {C, H} = 0 for each declared charge; flag momentum-free ones."""
    H = sys.hamiltonian
    entries = []
    for name, C in sys.charges:
        bracket = poisson_bracket(C, H, sys.space)
        cmp = numeric_compare(bracket, ZERO, sys.chart, n=n, tol=tol, seed=seed)
        entries.append(ChargeEntry(
            name=name,
            conserved=cmp.equal,
            max_err=cmp.max_abs_err,
            momentum_free=_is_momentum_free(C, sys.space),
        ))
    return ChargeReport(tuple(entries))


@dataclass(frozen=True)
class HamiltonianSplit:
    h_plus: Expr
    h_minus: Expr
    rho: Expr


def split_hamiltonian(sys: FlowSystem, n: int = 64, tol: float = 1e-9,
                      seed: int = 0) -> HamiltonianSplit:
    """H_plus = (H+rho)^2/(4 rho), H_minus = (H-rho)^2/(4 rho).

    Both halves are nonnegative wherever rho > 0 and H_plus - H_minus = H
    identically; H_minus = 0 is the information-loss surface H = rho.
    Requires {rho, H} = 0 on the chart, else the splitting would not commute.
    """
    H = sys.hamiltonian
    rho = sys.rho
    if _structurally_zero(rho):
        raise RhoNotConservedError("rho is identically zero")
    bracket = poisson_bracket(rho, H, sys.space)
    cmp = numeric_compare(bracket, ZERO, sys.chart, n=n, tol=tol, seed=seed)
    if not cmp.equal:
        raise RhoNotConservedError(
            f"rho not conserved: {{rho, H}} = {bracket} "
            f"(max err {cmp.max_abs_err:.3e} at {cmp.worst_point})")
    four_rho = Mul((Const(4), rho))
    h_plus = normalize(Div(Pow(Add((H, rho)), 2), four_rho))
    h_minus = normalize(Div(Pow(Add((H, Mul((Const(-1), rho)))), 2), four_rho))
    return HamiltonianSplit(h_plus=h_plus, h_minus=h_minus, rho=rho)


def gauge_pair_check(phi: Expr, chi: Expr, ps: PhaseSpace) -> Expr:
    """Bracket {phi, chi}; the caller decides non-vanishing on the surface."""
    return poisson_bracket(phi, chi, ps)
