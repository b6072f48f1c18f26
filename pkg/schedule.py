"""
Syndrome-extraction scheduling.

A ConnectivityGraph holds one row per check with its single-qubit Paulis on
data qubits. Bell rows are split over two check qubits that share no data
qubit. A Schedule assigns an integer timestep to every (row, data) gate and
one to every Bell preparation.
"""
import csv
import io
import itertools
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

from bbcode import BBCode
from errors import InfeasibleError, UnsupportedError, ValidationError
from torus_algebra import Monomial

log = logging.getLogger(__name__)

LETTERS = {(1, 0): "X", (0, 1): "Z", (1, 1): "Y"}


# -------------------- graph --------------------
@dataclass
class ConnectivityGraph:
    n_data: int
    supports: list
    labels: list
    bell_rows: frozenset = frozenset()
    n_code: int = None
    row_kinds: list = None

    def __post_init__(self):
        if self.n_code is None:
            self.n_code = self.n_data
        if self.row_kinds is None:
            self.row_kinds = ["code"] * len(self.supports)

    @classmethod
    def from_stabilizers(cls, stab, n_data: int, labels=None, bell_rows=(), n_code=None, row_kinds=None):
        supports = []
        for row in stab:
            sup = {}
            for q in range(n_data):
                key = (int(row[q]), int(row[n_data + q]))
                if key != (0, 0):
                    sup[q] = LETTERS[key]
            supports.append(sup)
        labels = labels or [f"c{r}" for r in range(len(supports))]
        return cls(n_data, supports, list(labels), frozenset(bell_rows), n_code, row_kinds)

    @classmethod
    def from_code(cls, code: BBCode):
        labels = [f"{kind}{r}" for kind in ("X", "Z") for r in range(code.half)]
        return cls.from_stabilizers(code.stabilizer_matrix, code.n, labels)

    @classmethod
    def from_deformed(cls, deformed):
        labels, kinds, bell = [], [], []
        for r, role in enumerate(deformed.roles):
            labels.append(role[1] if role[0] == "code" else f"{role[0]}:{role[1]}")
            kinds.append("code" if role[0] == "code" else "lpu")
            if role in deformed.bell:
                bell.append(r)
        return cls.from_stabilizers(
            deformed.stabilizers, deformed.n_total, labels, bell, deformed.n_code, kinds
        )

    @property
    def n_rows(self) -> int:
        return len(self.supports)

    def half_of(self, row: int, q: int) -> int:
        if row not in self.bell_rows:
            return 0
        sup = sorted(self.supports[row])
        return 0 if sup.index(q) < (len(sup) + 1) // 2 else 1

    def edges(self) -> list:
        return [(r, q) for r, sup in enumerate(self.supports) for q in sorted(sup)]

    @cached_property
    def check_qubits(self) -> dict:
        """(row, half) -> sorted data qubits."""
        out = defaultdict(list)
        for r, q in self.edges():
            out[(r, self.half_of(r, q))].append(q)
        return dict(out)

    @cached_property
    def data_gates(self) -> dict:
        out = defaultdict(list)
        for r, q in self.edges():
            out[q].append(r)
        return dict(out)

    @cached_property
    def anticommuting_overlaps(self) -> dict:
        """{(r1, r2): [data qubits where the two rows' Paulis anticommute]}."""
        out = defaultdict(list)
        for q, rows in self.data_gates.items():
            for r1, r2 in itertools.combinations(sorted(rows), 2):
                if self.supports[r1][q] != self.supports[r2][q]:
                    out[(r1, r2)].append(q)
        return dict(out)

    def degree_lower_bound(self) -> int:
        check = max((len(v) for v in self.check_qubits.values()), default=0)
        data = max((len(v) for v in self.data_gates.values()), default=0)
        return max(check + 2, data)


@dataclass
class Schedule:
    times: dict
    bell_times: dict = field(default_factory=dict)
    t_max: int = None

    def __post_init__(self):
        if self.t_max is None:
            self.t_max = max(self.times.values(), default=0)

    def to_csv(self, graph: ConnectivityGraph) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["check", "data", "timestep"])
        for (r, q), t in sorted(self.times.items(), key=lambda kv: (kv[1], kv[0])):
            writer.writerow([graph.labels[r], q, t])
        for r, t in sorted(self.bell_times.items()):
            writer.writerow([graph.labels[r], "bell", t])
        return buf.getvalue()


@dataclass
class ScheduleReport:
    check_lifetimes: dict
    data_lifetimes: dict
    period: int
    offset: int
    span: int
    serial_period: int = 0

    def cycle_time(self, cycles: int) -> int:
        return self.period * cycles + self.offset

    def serial_time(self, cycles: int) -> int:
        """C cycles that cannot overlap, each between one initialization and one measurement step."""
        return self.serial_period * cycles


def _span(values) -> int:
    values = list(values)
    return max(values) - min(values) + 1 if values else 0


def report(graph: ConnectivityGraph, schedule: Schedule) -> ScheduleReport:
    """
    Lifetimes l = max t - min t + 1 per qubit; period F = max(l_check + 2,
    l_data); C cycles take F*C + b where b is the one-cycle span (with
    initialization and measurement) minus F.
    """
    t = schedule.times
    checks = {cq: _span(t[(cq[0], q)] for q in qs) for cq, qs in graph.check_qubits.items()}
    data = {q: _span(t[(r, q)] for r in rows) for q, rows in graph.data_gates.items()}
    period = max(max(checks.values(), default=0) + 2, max(data.values(), default=0))
    span = _span(list(t.values()) + list(schedule.bell_times.values()))
    serial = _span(t.values()) + 2
    return ScheduleReport(checks, data, period, span + 2 - period, span, serial)


# -------------------- validation --------------------
def validate(graph: ConnectivityGraph, schedule: Schedule) -> list:
    """Returns violations as "<family>: <detail>" strings; empty iff valid."""
    t = schedule.times
    out = []
    for r, q in graph.edges():
        if (r, q) not in t:
            out.append(f"missing: {graph.labels[r]} on {q}")
    if out:
        return out

    for cq, qs in graph.check_qubits.items():
        seen = Counter(t[(cq[0], q)] for q in qs)
        for step, count in seen.items():
            if count > 1:
                out.append(f"unequality: {graph.labels[cq[0]]}/{cq[1]} has {count} gates at t={step}")
    for q, rows in graph.data_gates.items():
        seen = Counter(t[(r, q)] for r in rows)
        for step, count in seen.items():
            if count > 1:
                out.append(f"unequality: data {q} has {count} gates at t={step}")

    for r in graph.bell_rows:
        prep = schedule.bell_times.get(r)
        if prep is None:
            out.append(f"bellprep: {graph.labels[r]} has no preparation time")
            continue
        late = [q for q in graph.supports[r] if t[(r, q)] <= prep]
        if late:
            out.append(f"bellprep: {graph.labels[r]} prepared at t={prep} after gates on {late}")

    for (r1, r2), qs in graph.anticommuting_overlaps.items():
        prod = 1
        for q in qs:
            prod *= t[(r1, q)] - t[(r2, q)]
        if prod <= 0:
            out.append(f"overlap: {graph.labels[r1]} and {graph.labels[r2]} interleave on {qs}")

    for (r, q), step in t.items():
        if not 0 < step <= schedule.t_max:
            out.append(f"maxtime: {graph.labels[r]} on {q} at t={step} outside 1..{schedule.t_max}")
    return out


# -------------------- memory schedule --------------------
def _memory_terms(target: int, max_time: int):
    """
    Backtracking over the per-term timesteps of a translation-invariant
    schedule: a_i / b_j for the A and B terms of X checks, c_j / d_i for the
    B^T and A^T terms of Z checks. X check alpha and Z check alpha*A_i*B_j
    overlap on one L qubit (a_i vs c_j) and one R qubit (b_j vs d_i).
    """
    names = [f"{v}{i}" for v in "abcd" for i in range(3)]
    groups = [("a", "b"), ("c", "d"), ("a", "c"), ("b", "d")]

    def ok(assign):
        for g in groups:
            vals = [assign[k] for k in assign if k[0] in g]
            if len(vals) != len(set(vals)):
                return False
        for g, limit in ((("a", "b"), target - 2), (("c", "d"), target - 2), (("a", "c"), target), (("b", "d"), target)):
            vals = [assign[k] for k in assign if k[0] in g]
            if vals and _span(vals) > limit:
                return False
        for i in range(3):
            for j in range(3):
                keys = (f"a{i}", f"c{j}", f"b{j}", f"d{i}")
                if all(k in assign for k in keys):
                    a, c, b, d = (assign[k] for k in keys)
                    if (a - c) * (b - d) <= 0:
                        return False
        return True

    def search(assign, k):
        if k == len(names):
            return dict(assign)
        for value in range(1, max_time + 1):
            assign[names[k]] = value
            if ok(assign):
                found = search(assign, k + 1)
                if found:
                    return found
            del assign[names[k]]
        return None

    return search({}, 0)


@lru_cache(maxsize=None)
def memory_terms(max_period: int = 10) -> dict:
    for target in range(8, max_period + 1):
        found = _memory_terms(target, target - 1)
        if found:
            log.debug("memory schedule found with period %d: %s", target, found)
            return found
    raise InfeasibleError(f"no translation-invariant memory schedule with period <= {max_period}")


def memory_times(code: BBCode, terms: dict = None) -> dict:
    """{(kind, check_index, qubit): t} for the plain BB syndrome cycle."""
    terms = terms or memory_terms()
    p = code.params
    a_terms = code.A.sorted_terms()
    b_terms = code.B.sorted_terms()
    out = {}
    for alpha in p.monomials():
        row = p.index(alpha)
        for i, t in enumerate(a_terms):
            out[("X", row, code.qubit_index("L", Monomial(alpha.i + t.i, alpha.j + t.j)))] = terms[f"a{i}"]
            out[("Z", row, code.qubit_index("R", Monomial(alpha.i - t.i, alpha.j - t.j)))] = terms[f"d{i}"]
        for j, t in enumerate(b_terms):
            out[("X", row, code.qubit_index("R", Monomial(alpha.i + t.i, alpha.j + t.j)))] = terms[f"b{j}"]
            out[("Z", row, code.qubit_index("L", Monomial(alpha.i - t.i, alpha.j - t.j)))] = terms[f"c{j}"]
    return out


def schedule_memory(code: BBCode, terms: dict = None) -> Schedule:
    """Period-8 schedule for the BB code memory; C cycles take 8C+1 steps."""
    times = {}
    for (kind, row, q), t in memory_times(code, terms).items():
        times[(row + (0 if kind == "X" else code.half), q)] = t
    return Schedule(times)


# -------------------- coloring scheduler --------------------
def bipartite_edge_coloring(edges) -> list:
    """
    Splits bipartite (left, right) edges into max-degree many matchings.
    Each edge takes a color free at its left end; if that color is busy on
    the right end, the alternating path of the two colors starting there is
    swapped first (Konig). Colors are returned in ascending order.
    """
    edges = sorted(set(edges))
    if not edges:
        return []
    degree = Counter()
    for u, v in edges:
        degree[("L", u)] += 1
        degree[("R", v)] += 1
    colors = max(degree.values())
    at = defaultdict(dict)  # node -> {color: (edge index, other node)}
    color_of = {}

    def free(node):
        return next(c for c in range(colors) if c not in at[node])

    for k, (u, v) in enumerate(edges):
        left, right = ("L", u), ("R", v)
        a, b = free(left), free(right)
        if a in at[right]:
            path, node, c = [], right, a
            while c in at[node]:
                e, node = at[node][c]
                path.append(e)
                c = b if c == a else a
            for e in path:
                eu, ev = ("L", edges[e][0]), ("R", edges[e][1])
                del at[eu][color_of[e]], at[ev][color_of[e]]
            for e in path:
                eu, ev = ("L", edges[e][0]), ("R", edges[e][1])
                color_of[e] = b if color_of[e] == a else a
                at[eu][color_of[e]] = (e, ev)
                at[ev][color_of[e]] = (e, eu)
            if a in at[left] or a in at[right]:
                raise ValidationError("gate graph of one phase is not bipartite")
        color_of[k] = a
        at[left][a] = (k, right)
        at[right][a] = (k, left)

    layers = defaultdict(list)
    for k, c in color_of.items():
        layers[c].append(edges[k])
    return [sorted(layers[c]) for c in sorted(layers)]


def _frozen_times(graph: ConnectivityGraph, code: BBCode) -> dict:
    base = memory_times(code)
    out = {}
    for r, label in enumerate(graph.labels):
        if graph.row_kinds[r] != "code":
            continue
        prefix, _, name = label.rpartition(":")
        offset = code.n if prefix == "b" else 0
        kind, row = name[0], int(name[1:])
        for q in graph.supports[r]:
            if offset <= q < offset + code.n:
                out[(r, q)] = base[(kind, row, q - offset)]
    return out


PHASES = ("lpu-code", "bb", "lpu-x", "lpu-z", "code-lpu")


def _phases(graph: ConnectivityGraph, frozen: dict) -> dict:
    phases = {name: [] for name in PHASES}
    for r, q in graph.edges():
        if (r, q) in frozen:
            continue
        lpu_row = graph.row_kinds[r] == "lpu"
        code_qubit = q < graph.n_code
        if lpu_row and code_qubit:
            phases["lpu-code"].append((r, q))
        elif not lpu_row and code_qubit:
            phases["bb"].append((r, q))
        elif lpu_row:
            phases["lpu-x" if graph.supports[r][q] == "X" else "lpu-z"].append((r, q))
        else:
            phases["code-lpu"].append((r, q))
    return phases


def color_schedule(graph: ConnectivityGraph, code: BBCode = None, delta_bb: int = 0) -> Schedule:
    """
    Phased scheduler for deformed codes. Gates are ordered as Bell
    preparations, LPU checks onto code qubits, the frozen BB cycle,
    LPU-internal gates (X-type rows, then Z-type rows), then code checks onto
    LPU qubits; inside a phase by bipartite edge coloring. Each gate then
    takes the earliest step after every earlier gate on its data qubit at
    which its check qubit is free. Keeping the phase order on every data
    qubit keeps every anticommuting overlap consistently ordered.
    """
    frozen = _frozen_times(graph, code) if code is not None else {}
    phases = _phases(graph, frozen)

    times, bell_times = {}, {}
    last_data = defaultdict(int)
    busy = defaultdict(set)
    start = defaultdict(lambda: 1)
    for r in graph.bell_rows:
        bell_times[r] = 1
        start[r] = 2

    def place(r, q):
        cq = (r, graph.half_of(r, q))
        t = max(last_data[q] + 1, start[r])
        while t in busy[cq]:
            t += 1
        times[(r, q)] = t
        busy[cq].add(t)
        last_data[q] = t

    for name in PHASES:
        if name == "bb" and frozen:
            first = defaultdict(lambda: float("inf"))
            for (r, q), t in frozen.items():
                first[q] = min(first[q], t)
            shift = max([delta_bb] + [last_data[q] - first[q] + 1 for q in list(last_data) if q in first])
            for (r, q), t in sorted(frozen.items(), key=lambda kv: kv[1]):
                times[(r, q)] = shift + t
                busy[(r, graph.half_of(r, q))].add(shift + t)
                last_data[q] = max(last_data[q], shift + t)
            log.debug("frozen BB cycle shifted by %d", shift)
        keyed = [((r, graph.half_of(r, q)), q) for r, q in phases[name]]
        for layer in bipartite_edge_coloring(keyed):
            for (r, _), q in layer:
                place(r, q)
    t_max = max(times.values(), default=0)
    log.debug("coloring schedule: %d gates over %d steps", len(times), t_max)
    return Schedule(times, bell_times, t_max)


# -------------------- local improvement --------------------
def local_improve(graph: ConnectivityGraph, schedule: Schedule, node_budget: int = 50000) -> Schedule:
    """
    Revisits each check qubit and moves only its gates to shorten its
    lifetime, keeping every other gate fixed. Moves never raise any data
    lifetime above the current period.
    """
    times = dict(schedule.times)
    period = report(graph, schedule).period
    by_row = defaultdict(list)
    for (r1, r2), qs in graph.anticommuting_overlaps.items():
        by_row[r1].append((r1, r2, qs))
        by_row[r2].append((r1, r2, qs))

    for cq, qs in sorted(graph.check_qubits.items()):
        row = cq[0]
        current = _span(times[(row, q)] for q in qs)
        for length in range(len(qs), current):
            placed = _place(graph, schedule, times, row, qs, length, period, by_row[row], node_budget)
            if placed:
                times.update(placed)
                log.debug("check %s/%d lifetime %d -> %d", graph.labels[row], cq[1], current, length)
                break
    return Schedule(times, dict(schedule.bell_times), schedule.t_max)


def _place(graph, schedule, times, row, qs, length, period, overlaps, budget):
    prep = schedule.bell_times.get(row)
    others = {q: [times[(r, q)] for r in graph.data_gates[q] if r != row] for q in qs}
    nodes = [0]

    def fits(q, t):
        if prep is not None and t <= prep:
            return False
        if t in others[q]:
            return False
        return _span(others[q] + [t]) <= period

    def overlaps_ok(cand):
        for r1, r2, ds in overlaps:
            prod = 1
            for d in ds:
                t1 = cand.get(d, times[(r1, d)]) if r1 == row else times[(r1, d)]
                t2 = cand.get(d, times[(r2, d)]) if r2 == row else times[(r2, d)]
                prod *= t1 - t2
            if prod <= 0:
                return False
        return True

    def search(k, cand, used, window):
        nodes[0] += 1
        if nodes[0] > budget:
            return None
        if k == len(qs):
            return dict(cand) if overlaps_ok(cand) else None
        q = qs[k]
        for t in window:
            if t in used or not fits(q, t):
                continue
            cand[q] = t
            used.add(t)
            found = search(k + 1, cand, used, window)
            if found:
                return found
            used.discard(t)
            del cand[q]
        return None

    for start in range(1, schedule.t_max - length + 2):
        found = search(0, {}, set(), range(start, start + length))
        if found:
            return {(row, q): t for q, t in found.items()}
    return None


# -------------------- ILP export --------------------
def export_ilp(graph: ConnectivityGraph, t_max: int, big_m: int = None) -> str:
    """
    LP-format integer program minimizing the period F with lifetime
    auxiliaries, big-M linearized unequalities and two-qubit overlap
    orderings, and the 1..t_max horizon.
    """
    out = ["Minimize", " obj: F", "Subject To"]
    edges = graph.edges()
    if not edges:
        out.append("End")
        return "\n".join(out) + "\n"
    m = big_m or t_max + 1
    var = {(r, q): f"t_{r}_{q}" for r, q in edges}
    cons = []
    binaries = []

    for cq, qs in sorted(graph.check_qubits.items()):
        name = f"{cq[0]}_{cq[1]}"
        cons.append(f"F - cmax_{name} + cmin_{name} >= 3")
        for q in qs:
            cons.append(f"cmax_{name} - {var[(cq[0], q)]} >= 0")
            cons.append(f"cmin_{name} - {var[(cq[0], q)]} <= 0")
        for q1, q2 in itertools.combinations(qs, 2):
            y = f"u_{name}_{q1}_{q2}"
            binaries.append(y)
            cons.append(f"{var[(cq[0], q1)]} - {var[(cq[0], q2)]} + {m} {y} >= 1")
            cons.append(f"{var[(cq[0], q1)]} - {var[(cq[0], q2)]} + {m} {y} <= {m - 1}")
    for q, rows in sorted(graph.data_gates.items()):
        cons.append(f"F - dmax_{q} + dmin_{q} >= 1")
        for r in rows:
            cons.append(f"dmax_{q} - {var[(r, q)]} >= 0")
            cons.append(f"dmin_{q} - {var[(r, q)]} <= 0")
        for r1, r2 in itertools.combinations(rows, 2):
            y = f"v_{q}_{r1}_{r2}"
            binaries.append(y)
            cons.append(f"{var[(r1, q)]} - {var[(r2, q)]} + {m} {y} >= 1")
            cons.append(f"{var[(r1, q)]} - {var[(r2, q)]} + {m} {y} <= {m - 1}")
    for r in sorted(graph.bell_rows):
        for q in sorted(graph.supports[r]):
            cons.append(f"b_{r} - {var[(r, q)]} <= -1")
    for (r1, r2), qs in sorted(graph.anticommuting_overlaps.items()):
        if len(qs) != 2:
            raise UnsupportedError(f"overlap of size {len(qs)} between rows {r1} and {r2}")
        z = f"o_{r1}_{r2}"
        binaries.append(z)
        for q in qs:
            cons.append(f"{var[(r1, q)]} - {var[(r2, q)]} + {m} {z} >= 1")
            cons.append(f"{var[(r2, q)]} - {var[(r1, q)]} - {m} {z} >= {1 - m}")

    out += [f" c{k}: {c}" for k, c in enumerate(cons, 1)]
    out.append("Bounds")
    out += [f" 1 <= {v} <= {t_max}" for v in var.values()]
    out += [f" 0 <= b_{r} <= {t_max}" for r in sorted(graph.bell_rows)]
    out.append("General")
    out += [f" {v}" for v in var.values()]
    out.append("Binary")
    out += [f" {b}" for b in binaries]
    out.append("End")
    return "\n".join(out) + "\n"
