"""
Logical operators of BB codes: logicality tests, the fixed gross/two-gross
bases, basis property checks, ZX duality and randomized low-weight search.

X(p, q) means X on L qubits p and R qubits q; Z(r, s) likewise.
"""
import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

import gf2
from bbcode import BBCode, PauliOperator, code_from_name
from errors import ValidationError
from torus_algebra import BivariatePoly, Monomial, TorusParams

log = logging.getLogger(__name__)


# -------------------- logicality --------------------
def is_x_logical(code: BBCode, p: BivariatePoly, q: BivariatePoly) -> bool:
    """X(p, q) commutes with every Z check iff pB + qA = 0."""
    return not (p * code.B + q * code.A)


def is_z_logical(code: BBCode, r: BivariatePoly, s: BivariatePoly) -> bool:
    """Z(r, s) commutes with every X check iff rA^T + sB^T = 0."""
    return not (r * code.A.T + s * code.B.T)


def logicals_commute(px, qx, pz, qz) -> bool:
    """X(px, qx) and Z(pz, qz) commute iff 1 is not a term of px pz^T + qx qz^T."""
    return not (px * pz.T + qx * qz.T).contains_one()


# -------------------- operators --------------------
@dataclass(eq=False)
class LogicalOperator:
    kind: str
    p: BivariatePoly
    q: BivariatePoly
    pauli: PauliOperator
    label: str = None

    @classmethod
    def from_polys(cls, code: BBCode, kind: str, p, q, label=None) -> "LogicalOperator":
        return cls(kind, p, q, code.pauli_from_polys(kind, p, q), label)

    @property
    def weight(self) -> int:
        return self.pauli.weight

    def shifted(self, code: BBCode, delta: Monomial) -> "LogicalOperator":
        return LogicalOperator.from_polys(code, self.kind, self.p.shift(delta), self.q.shift(delta))

    def __eq__(self, other):
        if not isinstance(other, LogicalOperator):
            return NotImplemented
        return self.kind == other.kind and self.pauli == other.pauli

    def __hash__(self):
        return hash((self.kind, self.pauli.key()))

    def __repr__(self):
        name = self.label or f"{self.kind}({self.p}, {self.q})"
        return f"LogicalOperator({name}, weight={self.weight})"


def zx_dual(code: BBCode, op: LogicalOperator) -> LogicalOperator:
    """X(p, q) <-> Z(q^T, p^T)."""
    kind = "Z" if op.kind == "X" else "X"
    dual = LogicalOperator.from_polys(code, kind, op.q.T, op.p.T)
    if op.label:
        dual.label = op.label + "^dual"
    return dual


# -------------------- bases --------------------
BASIS_DATA = {
    "gross": {
        "p": "x^4+x^5+x^6*y+x^4*y^2+x^5*y^4+x^6*y^5",
        "q": "x^3+x^4+x^3*y+x^3*y^2+x^4*y^2+x^3*y^5",
        "r": "1+x^8+x*y+x^9*y+x^3*y^4+x^11*y^4",
        "s": "x+x^9+x^4*y^4+x^8*y^4+y^5+x^8*y^5",
        "mu": (1, 1),
        "nu": (1, 1),
        "alpha": [(0, 0), (3, 5), (11, 5), (10, 1), (5, 4), (4, 2)],
        "beta": [(0, 0), (2, 4), (1, 2), (2, 5), (1, 1), (3, 1)],
    },
    "two-gross": {
        "p": "x^2+x^2*y^2+x^8*y^2+x^9*y^2+x^3*y^3+x^4*y^3+x^7*y^4+x^8*y^6+x^6*y^7+x^7*y^11",
        "q": "x^3*y^2+x^5*y^3+x^7*y^3+x^11*y^3+x^8*y^4+x^8*y^5+x^6*y^7+x^4*y^8+x*y^9+x*y^10",
        "r": "x^4*y^2+x^11*y^2+y^5+x*y^5+x^5*y^5+x^6*y^5+x*y^8+x^8*y^8+x^2*y^11+x^10*y^11",
        "s": "x^2*y^6+x^2*y^9+x^2*y^10+x^11*y^6+x^11*y^9+x^11*y^10+x^8*y^7+x^11*y^7+x^5*y^8+x^11*y^8",
        "mu": (1, 1),
        "nu": (1, 1),
        "alpha": [(0, 0), (0, 3), (3, 7), (11, 11), (2, 9), (7, 4)],
        "beta": [(0, 0), (1, 1), (4, 0), (5, 4), (4, 3), (3, 5)],
    },
}


@dataclass(frozen=True)
class LogicalBasis:
    code_name: str
    p: BivariatePoly
    q: BivariatePoly
    r: BivariatePoly
    s: BivariatePoly
    mu: Monomial
    nu: Monomial
    alpha: tuple
    beta: tuple

    @property
    def params(self) -> TorusParams:
        return self.p.params

    def _mono(self, mono: Monomial) -> BivariatePoly:
        return BivariatePoly.monomial(self.params, mono.i, mono.j)

    def operators(self, code: BBCode) -> dict:
        """
        Returns {"X1": ..., "X12": ..., "Z1": ..., "Z12": ...} built from
        X1 = X(p, q), X7 = X(r, s), Z1 = Z(nu s^T, nu r^T), Z7 = Z(mu q^T, mu p^T)
        and the alpha / beta shifts.
        """
        mu = self._mono(self.mu)
        nu = self._mono(self.nu)
        z1 = (nu * self.s.T, nu * self.r.T)
        z7 = (mu * self.q.T, mu * self.p.T)
        ops = {}
        for i in range(6):
            a = self._mono(self.alpha[i])
            b = self._mono(self.beta[i])
            ops[f"X{i + 1}"] = LogicalOperator.from_polys(code, "X", a * self.p, a * self.q, f"X{i + 1}")
            ops[f"X{i + 7}"] = LogicalOperator.from_polys(code, "X", b.T * self.r, b.T * self.s, f"X{i + 7}")
            ops[f"Z{i + 1}"] = LogicalOperator.from_polys(code, "Z", b * z1[0], b * z1[1], f"Z{i + 1}")
            ops[f"Z{i + 7}"] = LogicalOperator.from_polys(code, "Z", a.T * z7[0], a.T * z7[1], f"Z{i + 7}")
        return {label: ops[label] for label in basis_labels()}


def basis_labels() -> list:
    return [f"X{i}" for i in range(1, 13)] + [f"Z{i}" for i in range(1, 13)]


def load_basis(code_name: str, params: TorusParams) -> LogicalBasis:
    try:
        data = BASIS_DATA[code_name]
    except KeyError:
        raise KeyError(f"no logical basis defined for {code_name!r}") from None
    parse = lambda key: BivariatePoly.parse(params, data[key])  # noqa: E731
    return LogicalBasis(
        code_name=code_name,
        p=parse("p"),
        q=parse("q"),
        r=parse("r"),
        s=parse("s"),
        mu=Monomial(*data["mu"]),
        nu=Monomial(*data["nu"]),
        alpha=tuple(Monomial(*a) for a in data["alpha"]),
        beta=tuple(Monomial(*b) for b in data["beta"]),
    )


def logical_rank(code: BBCode, ops) -> int:
    """Rank of the operators' symplectic images modulo the stabilizer group."""
    stab = code.stabilizer_matrix
    mat = np.vstack([stab] + [op.pauli.vector()[None, :] for op in ops])
    return gf2.rank(mat) - code.stabilizer_rank


def build_basis(code_name: str, code: BBCode = None):
    """
    Returns (LogicalBasis, {label: LogicalOperator}) for the named code after
    checking every operator is logical and the 24 together generate the
    logical Pauli group.
    """
    code = code or code_from_name(code_name)
    basis = load_basis(code_name, code.params)
    ops = basis.operators(code)
    problems = []
    for label, op in ops.items():
        ok = is_x_logical(code, op.p, op.q) if op.kind == "X" else is_z_logical(code, op.p, op.q)
        if not ok:
            problems.append(f"{label} is not a logical operator")
    rank = logical_rank(code, ops.values())
    if rank != 24:
        problems.append(f"basis generates rank {rank}, expected 24")
    if problems:
        raise ValidationError(f"{code_name} logical basis is inconsistent", problems)
    log.debug("%s basis built, weights %s", code_name, sorted({op.weight for op in ops.values()}))
    return basis, ops


def gram_matrix(ops: dict) -> np.ndarray:
    """G[i, j] = 1 iff X_{i+1} anticommutes with Z_{j+1}."""
    g = np.zeros((12, 12), dtype=np.uint8)
    for i in range(12):
        for j in range(12):
            g[i, j] = 0 if ops[f"X{i + 1}"].pauli.commutes(ops[f"Z{j + 1}"].pauli) else 1
    return g


# -------------------- basis properties --------------------
@dataclass
class BasisReport:
    code_name: str
    failures: dict = field(default_factory=lambda: {1: [], 2: [], 3: [], 4: []})

    @property
    def ok(self) -> bool:
        return not any(self.failures.values())

    def passed(self, prop: int) -> bool:
        return not self.failures[prop]

    def lines(self) -> list:
        out = []
        for prop in sorted(self.failures):
            msgs = self.failures[prop]
            out.append(f"property {prop}: " + ("ok" if not msgs else "; ".join(msgs)))
        return out


def validate_basis_properties(code: BBCode, basis: LogicalBasis) -> BasisReport:
    """
    Checks the four properties that make a basis usable for the LPU:
    1. X1/Z1 and X7/Z7 anticommute, the other pairs commute
    2. the operators and their shifts generate all 24 logical Paulis
    3. commuting pairs are disjoint, anticommuting pairs share one qubit
    4. Z checks touching X1 and X7 are disjoint (and dually for Z1, Z7)
    """
    report = BasisReport(basis.code_name)
    ops = basis.operators(code)
    core = {k: ops[k] for k in ("X1", "X7", "Z1", "Z7")}

    anti = {("X1", "Z1"), ("X7", "Z7")}
    for a, b in (("X1", "Z1"), ("X7", "Z7"), ("X1", "Z7"), ("X7", "Z1")):
        commute = core[a].pauli.commutes(core[b].pauli)
        if (a, b) in anti and commute:
            report.failures[1].append(f"{a} and {b} commute")
        if (a, b) not in anti and not commute:
            report.failures[1].append(f"{a} and {b} anticommute")

    for label, op in ops.items():
        ok = is_x_logical(code, op.p, op.q) if op.kind == "X" else is_z_logical(code, op.p, op.q)
        if not ok:
            report.failures[2].append(f"{label} is not logical")
    rank = logical_rank(code, ops.values())
    if rank != 24:
        report.failures[2].append(f"rank {rank} < 24")

    names = list(core)
    for idx, a in enumerate(names):
        for b in names[idx + 1 :]:
            overlap = len(set(core[a].pauli.support()) & set(core[b].pauli.support()))
            commute = core[a].pauli.commutes(core[b].pauli)
            if commute and overlap:
                report.failures[3].append(f"{a} and {b} commute but overlap on {overlap} qubits")
            if not commute and overlap != 1:
                report.failures[3].append(f"{a} and {b} anticommute with overlap {overlap}")

    zx1 = code.z_checks_adjacent(core["X1"].pauli.support())
    zx7 = code.z_checks_adjacent(core["X7"].pauli.support())
    if zx1 & zx7:
        report.failures[4].append(f"{len(zx1 & zx7)} Z checks touch both X1 and X7")
    xz1 = code.x_checks_adjacent(core["Z1"].pauli.support())
    xz7 = code.x_checks_adjacent(core["Z7"].pauli.support())
    if xz1 & xz7:
        report.failures[4].append(f"{len(xz1 & xz7)} X checks touch both Z1 and Z7")
    return report


# -------------------- low-weight search --------------------
def shift_canonical(code: BBCode, bits: np.ndarray) -> bytes:
    """Lexicographically smallest bit-vector among all translates."""
    best = None
    for delta in code.params.monomials():
        perm = code.shift_permutation(delta)
        moved = np.zeros_like(bits)
        moved[perm] = bits
        key = moved.tobytes()
        if best is None or key < best:
            best = key
    return best


def shift_orbit(code: BBCode, bits: np.ndarray) -> set:
    out = set()
    for delta in code.params.monomials():
        moved = np.zeros_like(bits)
        moved[code.shift_permutation(delta)] = bits
        out.add(moved.tobytes())
    return out


@dataclass
class SearchResult:
    code_name: str
    kind: str
    target_weight: int
    operators: set = field(default_factory=set)
    shift_unique: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False

    def census(self) -> list:
        """Rows of (weight, shift-unique count, total count)."""
        rows = []
        for w in sorted({op.weight for op in self.operators}):
            total = sum(1 for op in self.operators if op.weight == w)
            unique = sum(1 for v in self.shift_unique.values() if v == w)
            rows.append((w, unique, total))
        return rows

    @property
    def min_weight(self):
        return min((op.weight for op in self.operators), default=None)

    def census_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["weight", "shift_unique", "total"])
        writer.writerows(self.census())
        return buf.getvalue()


def _op_from_bits(code: BBCode, kind: str, bits: np.ndarray) -> LogicalOperator:
    left = BivariatePoly.from_vector(code.params, bits[: code.half])
    right = BivariatePoly.from_vector(code.params, bits[code.half :])
    return LogicalOperator.from_polys(code, kind, left, right)


def low_weight_logical_search(code: BBCode, kind: str, target_weight: int, budget: int, seed=0, basis_ops=None, sweep=1):
    """
    Randomized information-set search for logicals of the given type with
    weight <= target_weight.

    Each trial demands commutation with every check of the other type and
    anticommutation with a random nontrivial logical of the other type, draws
    per-qubit priors from U[0.01, 0.99) and eliminates the most likely columns
    first. Results are closed under translation. The search stops early once
    the number of consecutive non-novel finds reaches ten times the number of
    shift-unique operators.
    """
    rng = np.random.default_rng(seed)
    if basis_ops is None:
        _, basis_ops = build_basis(code.name, code)
    if kind == "X":
        checks = code.hz
        duals = np.stack([basis_ops[f"Z{i}"].pauli.z for i in range(1, 13)])
    else:
        checks = code.hx
        duals = np.stack([basis_ops[f"X{i}"].pauli.x for i in range(1, 13)])

    result = SearchResult(code.name, kind, target_weight)
    seen = set()
    stale = 0
    for it in range(budget):
        result.iterations = it + 1
        coeffs = rng.integers(0, 2, size=12)
        if not coeffs.any():
            coeffs[rng.integers(0, 12)] = 1
        target = gf2.matmul(coeffs[None, :], duals)[0]
        mat = np.vstack([checks, target[None, :]])
        rhs = np.zeros(mat.shape[0], dtype=np.uint8)
        rhs[-1] = 1
        priors = rng.uniform(0.01, 0.99, size=code.n)
        order = np.argsort(-priors, kind="stable")
        for bits in gf2.low_weight_solutions(mat, rhs, order, target_weight, sweep=sweep):
            canon = shift_canonical(code, bits)
            weight = int(bits.sum())
            if canon in seen:
                stale += 1
                continue
            seen.add(canon)
            stale = 0
            result.shift_unique[canon] = weight
            for moved in shift_orbit(code, bits):
                result.operators.add(_op_from_bits(code, kind, np.frombuffer(moved, dtype=np.uint8).copy()))
            log.debug("%s: new weight-%d %s-logical (unique=%d)", code.name, weight, kind, len(seen))
        if seen and stale >= 10 * len(seen):
            result.converged = True
            break
    log.info(
        "%s %s-logical search: %d operators, %d shift-unique, %d iterations",
        code.name, kind, len(result.operators), len(seen), result.iterations,
    )
    return result
