"""
Bivariate bicycle codes on the ell x m torus and symplectic Pauli arithmetic
over their qubits.

Qubit layout: index = (0 for L, ell*m for R) + j*ell + i for the unit cell
x^i y^j. Check indices use the same j*ell + i ordering within each of the X
and Z blocks.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np

import gf2
from errors import ValidationError
from torus_algebra import GROSS, TWO_GROSS, BivariatePoly, Monomial, ParameterError, TorusParams

log = logging.getLogger(__name__)

GROSS_A = "1+y+x^3*y^-1"
GROSS_B = "1+x+x^-1*y^-3"

CODE_PARAMS = {
    "gross": GROSS,
    "two-gross": TWO_GROSS,
}


# -------------------- Pauli operators --------------------
@dataclass(eq=False)
class PauliOperator:
    x: np.ndarray
    z: np.ndarray
    sign: int = 1

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.uint8) & 1
        self.z = np.asarray(self.z, dtype=np.uint8) & 1
        if self.x.shape != self.z.shape:
            raise ValueError(f"x/z parts differ in length: {self.x.shape} vs {self.z.shape}")

    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(np.zeros(n, np.uint8), np.zeros(n, np.uint8))

    @classmethod
    def x_type(cls, n: int, support) -> "PauliOperator":
        x = np.zeros(n, np.uint8)
        x[list(support)] = 1
        return cls(x, np.zeros(n, np.uint8))

    @classmethod
    def z_type(cls, n: int, support) -> "PauliOperator":
        z = np.zeros(n, np.uint8)
        z[list(support)] = 1
        return cls(np.zeros(n, np.uint8), z)

    @classmethod
    def from_vector(cls, vec, sign: int = 1) -> "PauliOperator":
        vec = np.asarray(vec, dtype=np.uint8)
        n = vec.shape[0] // 2
        return cls(vec[:n], vec[n:], sign)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    def support(self) -> list:
        return [int(k) for k in np.flatnonzero(self.x | self.z)]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.z])

    def key(self) -> bytes:
        return self.vector().tobytes()

    def is_identity(self) -> bool:
        return not (self.x.any() or self.z.any())

    def __eq__(self, other):
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)

    def __hash__(self):
        return hash(self.key())

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        # phases from reordering are not tracked
        _check_len(self, other)
        return PauliOperator(self.x ^ other.x, self.z ^ other.z, self.sign * other.sign)

    def commutes(self, other: "PauliOperator") -> bool:
        return symplectic_commutes(self, other)

    def extended(self, n: int) -> "PauliOperator":
        """Pads with identity on qubits [self.n, n)."""
        x = np.zeros(n, np.uint8)
        z = np.zeros(n, np.uint8)
        x[: self.n] = self.x
        z[: self.n] = self.z
        return PauliOperator(x, z, self.sign)

    def restricted(self, qubits) -> "PauliOperator":
        idx = list(qubits)
        return PauliOperator(self.x[idx], self.z[idx], self.sign)

    def permuted(self, perm) -> "PauliOperator":
        """perm[q] is the image of qubit q."""
        x = np.zeros_like(self.x)
        z = np.zeros_like(self.z)
        x[perm] = self.x
        z[perm] = self.z
        return PauliOperator(x, z, self.sign)

    def to_sparse(self) -> str:
        parts = []
        for q in self.support():
            letter = "Y" if (self.x[q] and self.z[q]) else ("X" if self.x[q] else "Z")
            parts.append(f"{letter}{q}")
        return " ".join(parts) if parts else "I"

    def __repr__(self):
        sign = "-" if self.sign < 0 else "+"
        return f"PauliOperator({sign}{self.to_sparse()})"


def _check_len(a: PauliOperator, b: PauliOperator):
    if a.n != b.n:
        raise ValueError(f"Pauli length mismatch: {a.n} vs {b.n}")


def symplectic_commutes(a: PauliOperator, b: PauliOperator) -> bool:
    """
    Returns True iff a * Lambda * b^T = 0 over F2. Signs are ignored.
    """
    _check_len(a, b)
    return (int(np.count_nonzero(a.x & b.z)) + int(np.count_nonzero(a.z & b.x))) % 2 == 0


def paulis_to_matrix(paulis, n=None) -> np.ndarray:
    paulis = list(paulis)
    if not paulis:
        return np.zeros((0, 2 * (n or 0)), dtype=np.uint8)
    return np.stack([p.vector() for p in paulis])


# -------------------- the code --------------------
@dataclass
class BBCode:
    params: TorusParams
    A: BivariatePoly
    B: BivariatePoly
    name: str = "custom"
    _perm_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def half(self) -> int:
        return self.params.size

    @property
    def n(self) -> int:
        return 2 * self.params.size

    # indices
    def qubit_index(self, side: str, mono: Monomial) -> int:
        mono = self.params.canon(mono.i, mono.j)
        offset = 0 if side == "L" else self.half
        if side not in ("L", "R"):
            raise ValueError(f"unknown qubit side {side!r}")
        return offset + self.params.index(mono)

    def qubit_label(self, index: int):
        side = "L" if index < self.half else "R"
        return side, self.params.monomial_at(index % self.half)

    def qubit_name(self, index: int) -> str:
        side, mono = self.qubit_label(index)
        return f"{mono.label()}{side}"

    def check_index(self, kind: str, mono: Monomial) -> int:
        if kind not in ("X", "Z"):
            raise ValueError(f"unknown check type {kind!r}")
        return self.params.index(self.params.canon(mono.i, mono.j))

    # checks
    def check_polys(self, kind: str, alpha: Monomial):
        """Returns the (L, R) supports of the check at cell alpha."""
        if kind == "X":
            return self.A.shift(alpha), self.B.shift(alpha)
        return self.B.T.shift(alpha), self.A.T.shift(alpha)

    def check_support(self, kind: str, alpha: Monomial) -> list:
        left, right = self.check_polys(kind, alpha)
        out = [self.qubit_index("L", t) for t in left]
        out += [self.qubit_index("R", t) for t in right]
        return sorted(out)

    def check(self, kind: str, alpha: Monomial) -> PauliOperator:
        sup = self.check_support(kind, alpha)
        if kind == "X":
            return PauliOperator.x_type(self.n, sup)
        return PauliOperator.z_type(self.n, sup)

    def checks(self, kind: str) -> list:
        return [self.check(kind, a) for a in self.params.monomials()]

    @cached_property
    def hx(self) -> np.ndarray:
        return np.hstack([self.A.to_matrix(), self.B.to_matrix()])

    @cached_property
    def hz(self) -> np.ndarray:
        return np.hstack([self.B.T.to_matrix(), self.A.T.to_matrix()])

    @cached_property
    def stabilizer_matrix(self) -> np.ndarray:
        """Symplectic rows [Hx | 0] followed by [0 | Hz]."""
        zeros = np.zeros_like(self.hx)
        return np.vstack([np.hstack([self.hx, zeros]), np.hstack([zeros, self.hz])])

    @cached_property
    def stabilizer_rank(self) -> int:
        return gf2.rank(self.hx) + gf2.rank(self.hz)

    @cached_property
    def k(self) -> int:
        return self.n - self.stabilizer_rank

    def z_checks_adjacent(self, qubits) -> set:
        """Cells alpha whose Z check touches any of the given qubits."""
        cols = self.hz[:, sorted(qubits)]
        return {self.params.monomial_at(int(r)) for r in np.flatnonzero(cols.any(axis=1))}

    def x_checks_adjacent(self, qubits) -> set:
        cols = self.hx[:, sorted(qubits)]
        return {self.params.monomial_at(int(r)) for r in np.flatnonzero(cols.any(axis=1))}

    # operators from polynomials
    def pauli_from_polys(self, kind: str, p: BivariatePoly, q: BivariatePoly) -> PauliOperator:
        """X(p, q) or Z(p, q): type `kind` on L qubits p and R qubits q."""
        for poly in (p, q):
            if poly.params != self.params:
                raise ParameterError(f"polynomial on {poly.params}, code on {self.params}")
        sup = [self.qubit_index("L", t) for t in p] + [self.qubit_index("R", t) for t in q]
        if kind == "X":
            return PauliOperator.x_type(self.n, sup)
        return PauliOperator.z_type(self.n, sup)

    def polys_from_pauli(self, pauli: PauliOperator, part: str = "x"):
        bits = pauli.x if part == "x" else pauli.z
        left = BivariatePoly.from_vector(self.params, bits[: self.half])
        right = BivariatePoly.from_vector(self.params, bits[self.half :])
        return left, right

    # translations
    def shift_permutation(self, delta: Monomial) -> np.ndarray:
        """perm[q] = index of the qubit that q moves to under translation by delta."""
        key = self.params.canon(delta.i, delta.j)
        if key not in self._perm_cache:
            perm = np.empty(self.n, dtype=np.int64)
            for q in range(self.n):
                side, mono = self.qubit_label(q)
                perm[q] = self.qubit_index(side, Monomial(mono.i + key.i, mono.j + key.j))
            self._perm_cache[key] = perm
        return self._perm_cache[key]

    def apply_shift(self, pauli: PauliOperator, delta: Monomial) -> PauliOperator:
        return pauli.permuted(self.shift_permutation(delta))

    def tanner_graph(self) -> nx.Graph:
        graph = nx.Graph()
        for q in range(self.n):
            graph.add_node(("q", q), kind="data", label=self.qubit_name(q))
        for kind, mat in (("X", self.hx), ("Z", self.hz)):
            for row in range(mat.shape[0]):
                node = (kind, row)
                graph.add_node(node, kind=kind)
                for q in np.flatnonzero(mat[row]):
                    graph.add_edge(node, ("q", int(q)), pauli=kind)
        return graph


# -------------------- construction --------------------
def build_bb_code(params: TorusParams, A: BivariatePoly, B: BivariatePoly, name="custom", strict=True) -> BBCode:
    """
    Returns the BB code with X check alpha on L qubits alpha*A, R qubits alpha*B,
    and Z check alpha on L qubits alpha*B^T, R qubits alpha*A^T.
    """
    if A.params != params or B.params != params:
        raise ParameterError("A and B must live on the code torus")
    if strict and (A.weight != 3 or B.weight != 3):
        raise ValidationError(f"A and B must each have 3 terms, got {A.weight} and {B.weight}")
    code = BBCode(params, A, B, name)
    problems = []
    if gf2.matmul(code.hx, code.hz.T).any():
        problems.append("Hx * Hz^T != 0")
    if strict:
        weights = set(code.hx.sum(axis=1).tolist()) | set(code.hz.sum(axis=1).tolist())
        if weights != {6}:
            problems.append(f"check weights {sorted(weights)} != [6]")
    if problems:
        raise ValidationError(f"invalid BB code {name}", problems)
    log.debug("built %s code: n=%d", name, code.n)
    return code


def code_from_name(code_name: str) -> BBCode:
    try:
        params = CODE_PARAMS[code_name]
    except KeyError:
        raise KeyError(f"unknown code name {code_name!r}; expected one of {sorted(CODE_PARAMS)}") from None
    A = BivariatePoly.parse(params, GROSS_A)
    B = BivariatePoly.parse(params, GROSS_B)
    return build_bb_code(params, A, B, name=code_name)


def logical_qubit_count(code: BBCode) -> int:
    return code.k


# -------------------- export --------------------
def sparse_lines(paulis, kinds=None) -> str:
    """
    One row per line: "<type> <qubit indices>". Pure X / pure Z rows get type
    X / Z; mixed rows list "P" followed by letter-prefixed indices.
    """
    lines = []
    for idx, p in enumerate(paulis):
        if kinds is not None:
            kind = kinds[idx]
        elif not p.z.any():
            kind = "X"
        elif not p.x.any():
            kind = "Z"
        else:
            kind = "P"
        if kind == "P":
            lines.append("P " + p.to_sparse())
        else:
            lines.append(kind + " " + " ".join(str(q) for q in p.support()))
    return "\n".join(lines) + "\n"


def export_sparse(code: BBCode) -> str:
    rows = code.checks("X") + code.checks("Z")
    return sparse_lines(rows)


def export_alist(mat) -> str:
    """MacKay alist text for a 0/1 check matrix (rows = checks)."""
    mat = gf2.as_bits(mat)
    m, n = mat.shape
    col_w = mat.sum(axis=0)
    row_w = mat.sum(axis=1)
    out = [f"{n} {m}", f"{int(col_w.max(initial=0))} {int(row_w.max(initial=0))}"]
    out.append(" ".join(str(int(w)) for w in col_w))
    out.append(" ".join(str(int(w)) for w in row_w))
    for c in range(n):
        out.append(" ".join(str(int(r) + 1) for r in np.flatnonzero(mat[:, c])))
    for r in range(m):
        out.append(" ".join(str(int(c) + 1) for c in np.flatnonzero(mat[r])))
    return "\n".join(out) + "\n"
