"""
Minimum-weight Pauli searches for code and surgery distances.

A DistanceProblem asks for the lightest Pauli p that commutes with every row
of a constraint matrix M and anticommutes with a target q. With M the
stabilizers and q a logical this gives the code distance; with M the center
of the surgery gauge group and q the measured operator it gives the
time-like distance.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

import gf2
from bbcode import BBCode, PauliOperator
from errors import InfeasibleError
from lpu import DeformedCode, subsystem_gauge_decomposition
from torus_algebra import Monomial

log = logging.getLogger(__name__)

# Circuit-level upper bounds from full circuit-noise searches. Not recomputed.
CIRCUIT_DISTANCE_BOUNDS = {
    "gross": {"memory": 10, "in-module": 10, "inter-module": 10},
    "two-gross": {"memory": 18, "in-module": 18, "inter-module": 17},
}


def _swap(rows: np.ndarray) -> np.ndarray:
    """Rows (x|z) -> (z|x), so that swapped @ p is the commutation parity."""
    rows = gf2.as_bits(rows)
    if rows.ndim == 1:
        rows = rows[None, :]
    n = rows.shape[1] // 2
    return np.hstack([rows[:, n:], rows[:, :n]])


def pauli_weight(vec) -> int:
    vec = np.asarray(vec)
    n = vec.shape[0] // 2
    return int(np.count_nonzero(vec[:n] | vec[n:]))


@dataclass
class DistanceProblem:
    constraints: np.ndarray
    target: PauliOperator
    name: str = ""

    @property
    def n(self) -> int:
        return self.target.n

    def system(self):
        """(matrix, rhs) of the F2 system for p: M Lambda p = 0, q Lambda p = 1."""
        mat = np.vstack([_swap(self.constraints), _swap(self.target.vector())])
        rhs = np.zeros(mat.shape[0], dtype=np.uint8)
        rhs[-1] = 1
        return mat, rhs

    def check(self):
        if self.constraints.shape[1] != 2 * self.n:
            raise ValueError(f"constraint width {self.constraints.shape[1]} does not match {self.n} qubits")
        if gf2.in_row_space(self.constraints, self.target.vector()):
            raise InfeasibleError(f"{self.name or 'target'} lies in the span of the constraints")

    def satisfied_by(self, pauli: PauliOperator) -> bool:
        mat, rhs = self.system()
        return bool(np.array_equal(gf2.matmul(mat, pauli.vector()), rhs))


@dataclass
class DistanceResult:
    bound_kind: str
    weight: int
    witness: PauliOperator
    trials: int = 0

    def __str__(self):
        sign = "=" if self.bound_kind == "exact" else "<="
        return f"d {sign} {self.weight}"


# -------------------- exact --------------------
class _XorBasis:
    """Span of F2 vectors keyed by leading index."""

    def __init__(self, rows=None):
        self.rows = dict(rows or {})

    def copy(self) -> "_XorBasis":
        return _XorBasis(self.rows)

    def reduce(self, vec: np.ndarray) -> np.ndarray:
        vec = vec.copy()
        while True:
            nz = np.flatnonzero(vec)
            if nz.size == 0 or int(nz[0]) not in self.rows:
                return vec
            vec ^= self.rows[int(nz[0])]

    def add(self, vec: np.ndarray):
        rest = self.reduce(vec)
        if rest.any():
            self.rows[int(np.flatnonzero(rest)[0])] = rest

    def spans(self, vec: np.ndarray) -> bool:
        return not self.reduce(vec).any()


def min_weight_exact(problem: DistanceProblem, weight_cap: int = 4, fallback_trials: int = 200, node_budget: int = 1_000_000) -> DistanceResult:
    """
    Branch and bound over the qubits in index order, each set to I, X, Z or
    Y. A branch is cut when it cannot beat the incumbent, or when its
    residual syndrome lies outside the span of the undecided qubits.
    Weights above weight_cap are not searched. With no solution up to the
    cap the randomized search returns an upper bound; an exhausted node
    budget returns the incumbent as an upper bound.
    """
    problem.check()
    mat, rhs = problem.system()
    n = problem.n
    effects = []
    for q in range(n):
        x, z = mat[:, q], mat[:, n + q]
        effects.append([(kind, e) for kind, e in (("X", x), ("Z", z), ("Y", x ^ z)) if e.any()])
    suffix = [_XorBasis()] * (n + 1)
    for q in range(n - 1, -1, -1):
        suffix[q] = suffix[q + 1].copy()
        for _, e in effects[q]:
            suffix[q].add(e)

    best = {"weight": weight_cap + 1, "choice": None}
    nodes = 0

    def dfs(k, residual, chosen):
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            return
        if not residual.any():
            best["weight"], best["choice"] = len(chosen), list(chosen)
            return
        if len(chosen) + 1 >= best["weight"] or not suffix[k].spans(residual):
            return
        for kind, e in effects[k]:
            chosen.append((k, kind))
            dfs(k + 1, residual ^ e, chosen)
            chosen.pop()
        dfs(k + 1, residual, chosen)

    dfs(0, rhs.copy(), [])
    exhausted = nodes > node_budget
    if best["choice"] is None:
        reason = f"node budget {node_budget} spent" if exhausted else f"no solution up to weight {weight_cap}"
        log.warning("%s: %s, falling back to randomized search", problem.name, reason)
        return min_weight_upper(problem, fallback_trials)
    vec = np.zeros(2 * n, dtype=np.uint8)
    for q, kind in best["choice"]:
        if kind in ("X", "Y"):
            vec[q] = 1
        if kind in ("Z", "Y"):
            vec[n + q] = 1
    kind = "upper" if exhausted else "exact"
    log.debug("%s: %s weight %d after %d nodes", problem.name, kind, best["weight"], nodes)
    return DistanceResult(kind, best["weight"], PauliOperator.from_vector(vec))


# -------------------- randomized --------------------
def _pair_order(rng, n: int) -> np.ndarray:
    perm = rng.permutation(n)
    return np.column_stack([perm, perm + n]).ravel()


def _search(mat, rhs, n, trials, seed, sweep, best_vec):
    rng = np.random.default_rng(seed)
    best = pauli_weight(best_vec) if best_vec is not None else 2 * n + 1
    for _ in range(trials):
        found = gf2.low_weight_solutions(
            mat, rhs, _pair_order(rng, n), max_weight=best - 1, sweep=sweep, weight_fn=pauli_weight
        )
        for vec in found:
            w = pauli_weight(vec)
            if w < best:
                best, best_vec = w, vec
    return best_vec


def min_weight_upper(problem: DistanceProblem, trials: int = 100, seed: int = 0, sweep: int = 1, start=(), workers: int = 1) -> DistanceResult:
    """
    Randomized information-set search. Columns are permuted in qubit pairs
    (x_q next to z_q) so each trial favours one random set of qubits. Known
    solutions in `start` seed the incumbent. For a fixed seed and worker
    count the result is nonincreasing in `trials`.
    """
    problem.check()
    mat, rhs = problem.system()
    n = problem.n
    best_vec = None
    for cand in start:
        if problem.satisfied_by(cand) and (best_vec is None or cand.weight < pauli_weight(best_vec)):
            best_vec = cand.vector()

    if workers > 1 and trials > 1:
        seeds = np.random.SeedSequence(seed).spawn(workers)
        chunks = [trials // workers + (1 if k < trials % workers else 0) for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_search, mat, rhs, n, chunk, s, sweep, best_vec)
                for chunk, s in zip(chunks, seeds) if chunk
            ]
            results = [f.result() for f in futures]
        for vec in results:
            if vec is not None and (best_vec is None or pauli_weight(vec) < pauli_weight(best_vec)):
                best_vec = vec
    else:
        best_vec = _search(mat, rhs, n, trials, seed, sweep, best_vec)

    if best_vec is None:
        raise InfeasibleError(f"{problem.name}: no solution found in {trials} trials")
    witness = PauliOperator.from_vector(best_vec)
    log.debug("%s: weight <= %d after %d trials", problem.name, witness.weight, trials)
    return DistanceResult("upper", witness.weight, witness, trials)


# -------------------- code and surgery distances --------------------
def logical_basis(stabilizers) -> np.ndarray:
    """Rows completing the stabilizer span to its symplectic complement."""
    stab = gf2.as_bits(stabilizers)
    commuting = gf2.null_space(_swap(stab))
    rows, r = stab, gf2.rank(stab)
    k2 = 2 * (stab.shape[1] // 2 - r)
    out = []
    for v in commuting:
        if len(out) == k2:
            break
        trial = np.vstack([rows, v])
        if gf2.rank(trial) > r:
            rows, r = trial, r + 1
            out.append(v)
    return np.array(out, dtype=np.uint8).reshape(-1, stab.shape[1])


def code_distance(stabilizers, trials: int = 100, seed: int = 0, start=(), exact_cap: int = 0, name: str = "code") -> DistanceResult:
    """
    Minimum over a logical basis of the lightest logical anticommuting with
    each basis element. exact_cap > 0 uses the exact search.
    """
    stab = gf2.as_bits(stabilizers)
    best = None
    for k, q in enumerate(logical_basis(stab)):
        problem = DistanceProblem(stab, PauliOperator.from_vector(q), f"{name}/L{k}")
        if exact_cap:
            res = min_weight_exact(problem, exact_cap, trials)
        else:
            res = min_weight_upper(problem, trials, seed + k, start=start)
        if best is None or res.weight < best.weight or (res.weight == best.weight and res.bound_kind == "exact"):
            best = res
    if best is None:
        raise InfeasibleError(f"{name} encodes no logical qubits")
    return best


@dataclass
class SurgeryDistances:
    space: DistanceResult
    time_star: DistanceResult
    cycles: int

    @property
    def time(self) -> int:
        return min(self.cycles, self.time_star.weight)

    def row(self) -> dict:
        return {
            "d_s_star": self.space.weight,
            "d_t_star": self.time_star.weight,
            "d_t": self.time,
            "bound": self.space.bound_kind,
        }


def surgery_distances(code: BBCode, deformed: DeformedCode, trials: int = 100, seed: int = 0, cycles: int = 10, known=()) -> SurgeryDistances:
    """
    Space-like distance of the deformed code and time-like distance against
    the gauge center. `known` code-level Paulis (e.g. the logical basis) are
    padded and offered as starting witnesses.
    """
    n = deformed.n_total
    start = [p.extended(n) for p in known]
    space = code_distance(deformed.stabilizers, trials, seed, start=start, name=deformed.name)
    gauge = subsystem_gauge_decomposition(deformed)
    problem = DistanceProblem(gauge.center, gauge.measured, f"{deformed.name}/time")
    time_star = min_weight_upper(problem, trials, seed, start=start)
    log.info("%s (%s): d_s* <= %d, d_t* <= %d", deformed.name, code.name, space.weight, time_star.weight)
    return SurgeryDistances(space, time_star, cycles)


def zx_transport(code: BBCode, pauli: PauliOperator) -> PauliOperator:
    """
    Image under the code's ZX duality: L qubit a <-> R qubit a^T with X and
    Z exchanged. Maps stabilizers to stabilizers and X(p, q) to Z(q^T, p^T).
    """
    perm = np.zeros(code.n, dtype=np.int64)
    for q in range(code.n):
        side, mono = code.qubit_label(q)
        other = "R" if side == "L" else "L"
        perm[q] = code.qubit_index(other, Monomial(-mono.i, -mono.j))
    swapped = PauliOperator(pauli.z, pauli.x, pauli.sign)
    return swapped.permuted(perm)


# -------------------- LP export --------------------
def export_lp(problem: DistanceProblem) -> str:
    """
    LP-format integer program: minimize sum(x_i + z_i - b_i) with
    b_i <= x_i, b_i <= z_i, b_i >= x_i + z_i - 1 and each parity written
    with an integer slack.
    """
    mat, rhs = problem.system()
    n = problem.n
    names = [f"x{i}" for i in range(n)] + [f"z{i}" for i in range(n)]
    obj = " + ".join(f"x{i} + z{i} - b{i}" for i in range(n))
    out = ["Minimize", f" obj: {obj}", "Subject To"]
    for r, (row, b) in enumerate(zip(mat, rhs)):
        terms = [names[c] for c in np.flatnonzero(row)]
        if not terms:
            continue
        out.append(f" par{r}: {' + '.join(terms)} - 2 k{r} = {int(b)}")
    for i in range(n):
        out.append(f" bx{i}: b{i} - x{i} <= 0")
        out.append(f" bz{i}: b{i} - z{i} <= 0")
        out.append(f" by{i}: b{i} - x{i} - z{i} >= -1")
    out.append(" nonzero: " + " + ".join(names) + " >= 1")
    out.append("Bounds")
    out += [f" 0 <= k{r} <= {max(1, int(row.sum()) // 2)}" for r, row in enumerate(mat)]
    out.append("General")
    out += [f" k{r}" for r in range(mat.shape[0])]
    out.append("Binary")
    out += [f" {v}" for v in names + [f"b{i}" for i in range(n)]]
    out.append("End")
    return "\n".join(out) + "\n"
