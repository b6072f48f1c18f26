"""
Shift automorphisms of BB codes.

A shift by the monomial delta moves (L, alpha) -> (L, delta*alpha) and
(R, alpha) -> (R, delta*alpha). The twelve basic shifts are the ones the
syndrome connectivity can realize with two rounds of swaps:
delta = A_i A_j^T (L qubits pass through X checks, R through Z checks) or
delta = B_i B_j^T (L through Z checks, R through X checks).
"""
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

import gf2
from bbcode import BBCode
from errors import InfeasibleError, ValidationError
from torus_algebra import Monomial, TorusParams

log = logging.getLogger(__name__)

SHIFT_DURATION = 14


@dataclass(frozen=True)
class ShiftAutomorphism:
    delta: Monomial
    route: str
    terms: tuple
    duration: int = SHIFT_DURATION

    @property
    def name(self) -> str:
        return self.delta.label()

    def stages(self) -> list:
        """Check types visited by the L and R qubits, in order."""
        other = "Z" if self.route == "X" else "X"
        return [("L", self.route), ("R", other)]


def basic_shifts(code: BBCode) -> list:
    """
    The 12 basic shifts A_i A_j^T and B_i B_j^T (i != j), ordered by exponent.
    """
    p = code.params
    out = {}
    for route, poly in (("X", code.A), ("Z", code.B)):
        terms = poly.sorted_terms()
        for i, j in itertools.permutations(range(len(terms)), 2):
            delta = p.canon(terms[i].i - terms[j].i, terms[i].j - terms[j].j)
            out.setdefault(delta, ShiftAutomorphism(delta, route, (i, j)))
    shifts = [out[d] for d in sorted(out)]
    if len(shifts) != 12:
        raise ValidationError(f"expected 12 distinct basic shifts, got {len(shifts)}")
    return shifts


def _trivial_steps(params: TorusParams):
    return math.gcd(6, params.ell), math.gcd(6, params.m)


def is_logically_trivial(params: TorusParams, delta: Monomial) -> bool:
    """True iff delta lies in <x^6, y^6>."""
    gi, gj = _trivial_steps(params)
    d = params.canon(delta.i, delta.j)
    return d.i % gi == 0 and d.j % gj == 0


def shift_class(params: TorusParams, delta: Monomial) -> tuple:
    gi, gj = _trivial_steps(params)
    d = params.canon(delta.i, delta.j)
    return d.i % gi, d.j % gj


def nontrivial_shift_classes(params: TorusParams) -> list:
    gi, gj = _trivial_steps(params)
    return [Monomial(i, j) for i in range(gi) for j in range(gj) if (i, j) != (0, 0)]


def two_generator_decomposition(code: BBCode, delta: Monomial, shifts=None) -> list:
    """
    Returns one or two basic shifts whose product equals delta modulo
    <x^6, y^6>. A single generator is preferred, then the lexicographically
    smallest pair.
    """
    p = code.params
    shifts = shifts or basic_shifts(code)
    target = shift_class(p, delta)
    if target == (0, 0):
        return []
    for s in shifts:
        if shift_class(p, s.delta) == target:
            return [s]
    for a, b in itertools.combinations_with_replacement(shifts, 2):
        prod = p.canon(a.delta.i + b.delta.i, a.delta.j + b.delta.j)
        if shift_class(p, prod) == target:
            return [a, b]
    raise InfeasibleError(f"{delta.label()} is not a product of at most two basic shifts")


def verify_decompositions(code: BBCode) -> dict:
    """Decomposes every nontrivial class; raises if any class fails."""
    shifts = basic_shifts(code)
    table = {}
    for cls in nontrivial_shift_classes(code.params):
        table[cls] = two_generator_decomposition(code, cls, shifts)
    log.debug("%s: %d nontrivial shift classes decomposed", code.name, len(table))
    return table


# -------------------- logical action --------------------
@dataclass(frozen=True, eq=False)
class LogicalActionMatrix:
    delta: Monomial
    a6: np.ndarray
    x_action: np.ndarray
    z_action: np.ndarray

    def order(self, cap: int = 64) -> int:
        power = self.a6.copy()
        eye = np.eye(6, dtype=np.uint8)
        for k in range(1, cap + 1):
            if np.array_equal(power, eye):
                return k
            power = gf2.matmul(power, self.a6)
        raise ValidationError(f"action of {self.delta.label()} has order > {cap}")

    @property
    def symplectic(self) -> np.ndarray:
        """24x24 map on [X1..X12 | Z1..Z12] coefficient columns."""
        out = np.zeros((24, 24), dtype=np.uint8)
        out[:12, :12] = self.x_action
        out[12:, 12:] = self.z_action
        return out

    def to_text(self) -> str:
        return "\n".join(" ".join(str(int(v)) for v in row) for row in self.a6) + "\n"


def _images(code: BBCode, ops: dict, kind: str, delta: Monomial) -> np.ndarray:
    part = "x" if kind == "X" else "z"
    checks = code.hx if kind == "X" else code.hz
    labels = [f"{kind}{i}" for i in range(1, 13)]
    basis = np.stack([getattr(ops[k].pauli, part) for k in labels])
    rows = np.vstack([basis, checks])
    mat = np.zeros((12, 12), dtype=np.uint8)
    for col, label in enumerate(labels):
        image = getattr(code.apply_shift(ops[label].pauli, delta), part)
        coeffs = gf2.express(rows, image)
        if coeffs is None:
            raise ValidationError(f"shift {delta.label()} maps {label} outside the logical span")
        mat[:, col] = coeffs[:12]
    return mat


def logical_action(code: BBCode, ops: dict, delta: Monomial) -> LogicalActionMatrix:
    """
    Column i of the result is the image of X_{i+1} in the X1..X6 basis,
    modulo stabilizers. The 12-qubit action is validated to be block
    diagonal with the second block equal to the transpose of the first, and
    the independently computed Z action must preserve commutation.

    The transpose is the a6 (x) a6 form written in image columns: X7..X12
    are the ZX duals of Z1..Z6, duality sends a shift to its inverse, and
    with an identity Gram matrix the Z1..Z6 block of the inverse shift is
    inv(a6^-1)^T = a6^T.
    """
    delta = code.params.canon(delta.i, delta.j)
    mx = _images(code, ops, "X", delta)
    mz = _images(code, ops, "Z", delta)
    a6 = mx[:6, :6].copy()
    problems = []
    if mx[:6, 6:].any() or mx[6:, :6].any():
        problems.append("X action mixes the two blocks")
    if not np.array_equal(mx[6:, 6:], a6.T):
        problems.append("second block is not the transpose of the first")
    if gf2.rank(a6) != 6:
        problems.append("action is singular")
    gram = np.zeros((12, 12), dtype=np.uint8)
    for i in range(12):
        for j in range(12):
            gram[i, j] = 0 if ops[f"X{i + 1}"].pauli.commutes(ops[f"Z{j + 1}"].pauli) else 1
    if not np.array_equal(gf2.matmul(gf2.matmul(mx.T, gram), mz), gram):
        problems.append("action does not preserve commutation")
    if problems:
        raise ValidationError(f"inconsistent logical action for {delta.label()}", problems)
    return LogicalActionMatrix(delta, a6, mx, mz)


def action_for_product(code: BBCode, ops: dict, shifts) -> LogicalActionMatrix:
    """Action of the product of the given shifts."""
    i = sum(s.delta.i for s in shifts)
    j = sum(s.delta.j for s in shifts)
    return logical_action(code, ops, Monomial(i, j))
