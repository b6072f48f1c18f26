"""
Logical processing unit (LPU).

The LPU of a module is an auxiliary graph gauged onto the code to measure
products of X1, Z1, X7, Z7. Vertices sit on the support of X1 (left half) and
X7 (right half); two vertices are joined when their qubits share a Z check.
Each vertex also attaches to the dual qubit xy * gamma^T, which lies on the
support of Z7 (left) or Z1 (right), so one graph serves both Pauli types.
The two halves share one vertex (realized as a Bell pair) and are joined by
a ladder of bridge edges.
"""
import logging
import math
import re
from collections import Counter, deque
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np

import gf2
from bbcode import BBCode, PauliOperator, code_from_name
from errors import InfeasibleError, UnsupportedError, ValidationError
from logical import build_basis
from lpu_data import CENSUS, DATA_VERSION, LPU_SIZE, LPU_TABLES
from torus_algebra import Monomial

log = logging.getLogger(__name__)

MAX_DEGREE = 7
CENSUS_PARTS = ("V_l", "E_l", "U_l", "B", "U_B", "U_r", "E_r", "V_r")
CORE_LABELS = ("X1", "Z1", "X7", "Z7")
HALF_L = frozenset({"X1", "Z7"})
HALF_R = frozenset({"X7", "Z1"})

_NAME = re.compile(r"^(?:(1)|(?:x(\d*))?(?:y(\d*))?)([LR])$")


# -------------------- vertex names --------------------
def vertex_name(side: str, mono: Monomial) -> str:
    def part(letter, e):
        if e == 0:
            return ""
        return letter if e == 1 else f"{letter}{e}"

    return (part("x", mono.i) + part("y", mono.j) or "1") + side


def parse_vertex(name: str):
    """'x3y2R' -> ('R', Monomial(3, 2))."""
    m = _NAME.match(name)
    if not m or (m.group(1) is None and m.group(2) is None and m.group(3) is None):
        raise ValueError(f"bad vertex name {name!r}")

    def exp(g):
        return 0 if g is None else int(g or 1)

    return m.group(4), Monomial(exp(m.group(2)), exp(m.group(3)))


def _dual_qubit(code: BBCode, q: int, shift: Monomial) -> int:
    side, mono = code.qubit_label(q)
    other = "R" if side == "L" else "L"
    return code.qubit_index(other, Monomial(shift.i - mono.i, shift.j - mono.j))


# -------------------- graph structure --------------------
@dataclass(frozen=True)
class AuxVertex:
    name: str
    part: str
    qubits: tuple


@dataclass(frozen=True)
class AuxEdge:
    ends: tuple
    part: str
    checks: tuple = ()
    # code qubits the Z check shares with the logical, then those of its X partner
    qubits: tuple = ()

    @property
    def name(self) -> str:
        return f"{self.ends[0]}~{self.ends[1]}"


@dataclass(frozen=True)
class AuxCycle:
    part: str
    vertices: tuple
    edges: tuple


@dataclass
class LPU:
    code_name: str
    vertices: dict
    edges: list
    cycles: list
    bell: str
    bridge_top: tuple
    bridge_bottom: tuple
    aliases: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {frozenset(e.ends): k for k, e in enumerate(self.edges)}

    def resolve(self, name: str) -> str:
        return self.aliases.get(name, name)

    def edge_between(self, u: str, v: str) -> int:
        key = frozenset((self.resolve(u), self.resolve(v)))
        try:
            return self._index[key]
        except KeyError:
            raise ValidationError(f"no LPU edge between {u} and {v}") from None

    @property
    def size(self) -> int:
        """Qubits added to the module: edges, vertex checks, cycle checks, plus one for the Bell pair."""
        return len(self.edges) + len(self.vertices) + len(self.cycles) + 1

    @property
    def bridges(self) -> list:
        return [k for k, e in enumerate(self.edges) if e.part == "B"]

    @property
    def squares(self) -> int:
        return len(self.bridge_top) - 1

    def checksum(self) -> tuple:
        return len(self.vertices), len(self.edges), len(self.cycles), sum(len(c.edges) for c in self.cycles)

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        for name, v in self.vertices.items():
            g.add_node(name, part=v.part)
        for k, e in enumerate(self.edges):
            g.add_edge(*e.ends, index=k, part=e.part)
        return g

    def vertex_degrees(self) -> Counter:
        degree = Counter()
        for e in self.edges:
            for v in e.ends:
                degree[v] += 1
        return degree

    @cached_property
    def _cycle_counts(self) -> Counter:
        return Counter(k for c in self.cycles for k in c.edges)

    def edge_degree(self, k: int) -> int:
        e = self.edges[k]
        return 2 + len(e.checks) + self._cycle_counts[k]

    def vertex_degree(self, name: str) -> int:
        return 2 + self.vertex_degrees()[name]

    def bell_split_degree(self) -> int:
        return math.ceil(self.vertex_degree(self.bell) / 2) + 1

    def census(self) -> dict:
        """{part: {degree: count}} for the full LPU; the Bell vertex is left out."""
        out = {part: Counter() for part in CENSUS_PARTS}
        degree = self.vertex_degrees()
        for name, v in self.vertices.items():
            if name != self.bell:
                out[v.part][2 + degree[name]] += 1
        for k, e in enumerate(self.edges):
            out[e.part][self.edge_degree(k)] += 1
        for c in self.cycles:
            out[c.part][len(c.edges)] += 1
        return {part: dict(sorted(c.items())) for part, c in out.items()}

    def census_table(self) -> str:
        census = self.census()
        degrees = sorted({d for c in census.values() for d in c})
        lines = ["degree " + " ".join(f"{p:>4}" for p in CENSUS_PARTS)]
        for d in degrees:
            cells = [str(census[p].get(d, "-")) for p in CENSUS_PARTS]
            lines.append(f"{d:>6} " + " ".join(f"{c:>4}" for c in cells))
        return "\n".join(lines) + "\n"


def census_mismatches(lpu: LPU) -> list:
    expected = CENSUS.get(lpu.code_name)
    if expected is None:
        return []
    actual = lpu.census()
    return [f"{p}: expected {expected[p]}, got {actual[p]}" for p in CENSUS_PARTS if actual[p] != expected[p]]


def _half_graph(code: BBCode, pauli: PauliOperator, shift: Monomial, tag: str):
    vertices = {}
    for q in pauli.support():
        name = vertex_name(*code.qubit_label(q))
        vertices[name] = AuxVertex(name, f"V_{tag}", (q, _dual_qubit(code, q, shift)))
    support = set(pauli.support())
    edges = []
    for alpha in sorted(code.z_checks_adjacent(support)):
        shared = sorted(support & set(code.check_support("Z", alpha)))
        if len(shared) != 2:
            raise ValidationError(f"Z check {alpha.label()} meets the {tag} logical on {len(shared)} qubits")
        u, v = sorted(vertex_name(*code.qubit_label(q)) for q in shared)
        partner = code.params.canon(shift.i - alpha.i, shift.j - alpha.j)
        duals = {vertices[u].qubits[1], vertices[v].qubits[1]}
        if not duals <= set(code.check_support("X", partner)):
            raise ValidationError(f"X check {partner.label()} does not mirror Z check {alpha.label()}")
        edges.append(AuxEdge((u, v), f"E_{tag}", (("Z", alpha), ("X", partner)), (tuple(shared), tuple(sorted(duals)))))
    return vertices, edges


def _held_by_ends(pair, held) -> bool:
    a, b = pair
    return (a in held[0] and b in held[1]) or (b in held[0] and a in held[1])


def build_lpu(code: BBCode, basis, ops: dict, tables: dict = None) -> LPU:
    """
    Builds and validates the LPU graph. Check edges are derived from the
    code; expanders, cycles and bridge paths come from the stored tables.
    """
    tables = tables or LPU_TABLES.get(code.name)
    if tables is None:
        raise UnsupportedError(f"no LPU layout for code {code.name!r}")
    keep, drop = tables["identify"]
    aliases = {drop: keep}

    def rename(name):
        return aliases.get(name, name)

    v_l, e_l = _half_graph(code, ops["X1"].pauli, basis.mu, "l")
    v_r, e_r = _half_graph(code, ops["X7"].pauli, basis.nu, "r")
    if keep not in v_l or drop not in v_r:
        raise ValidationError(f"identified vertices {keep}/{drop} are not on the logical supports")
    if set(v_l[keep].qubits) != set(v_r[drop].qubits):
        raise ValidationError(f"{keep} and {drop} attach to different code qubits")

    vertices = dict(v_l)
    vertices.update({n: v for n, v in v_r.items() if n != drop})
    vertices[keep] = AuxVertex(keep, "bell", v_l[keep].qubits)

    edges = list(e_l)
    edges += [AuxEdge(tuple(sorted(rename(x) for x in e.ends)), e.part, e.checks, e.qubits) for e in e_r]
    for tag, key in (("l", "expanders_l"), ("r", "expanders_r")):
        for u, v in tables[key]:
            edges.append(AuxEdge(tuple(sorted((rename(u), rename(v)))), f"E_{tag}"))
    top, bottom = tables["bridge_top"], tables["bridge_bottom"]
    if len(top) != len(bottom):
        raise ValidationError("bridge paths differ in length")
    for t, b in zip(top, bottom):
        edges.append(AuxEdge(tuple(sorted((t, rename(b)))), "B"))

    problems = []
    for e in edges:
        for v in e.ends:
            if v not in vertices:
                problems.append(f"edge {e.name} leaves the graph at {v}")
    if len({frozenset(e.ends) for e in edges}) != len(edges):
        problems.append("parallel edges")
    for e in edges:
        if not e.checks or any(v not in vertices for v in e.ends):
            continue
        if not all(_held_by_ends(group, [set(vertices[v].qubits) for v in e.ends]) for group in e.qubits):
            problems.append(f"check edge {e.name} does not attach to the qubits its checks share")
    if problems:
        raise ValidationError(f"{code.name} LPU edges are inconsistent", problems)

    lpu = LPU(code.name, vertices, edges, [], keep, tuple(top), tuple(rename(b) for b in bottom), aliases)
    seqs = [("U_l", c) for c in tables["cycles_l"]] + [("U_r", c) for c in tables["cycles_r"]]
    for k in range(len(top) - 1):
        seqs.append(("U_B", [top[k], top[k + 1], bottom[k + 1], bottom[k]]))
    seqs.append(("U_B", tables["triangle"]))
    for part, seq in seqs:
        seq = [rename(v) for v in seq]
        idx = tuple(lpu.edge_between(seq[a], seq[(a + 1) % len(seq)]) for a in range(len(seq)))
        lpu.cycles.append(AuxCycle(part, tuple(seq), idx))
    _validate_lpu(lpu, tables)
    log.info("%s LPU: %d vertices, %d edges, %d cycles, %d qubits", code.name, *lpu.checksum()[:3], lpu.size)
    return lpu


def _validate_lpu(lpu: LPU, tables: dict):
    problems = []
    incidence = np.zeros((len(lpu.cycles), len(lpu.edges)), dtype=np.uint8)
    for r, c in enumerate(lpu.cycles):
        incidence[r, list(c.edges)] = 1
    if gf2.rank(incidence) != len(lpu.cycles):
        problems.append("cycle checks are not independent")
    if not nx.is_connected(lpu.graph()):
        problems.append("graph is disconnected")
    if lpu.checksum() != tuple(tables["checksum"]):
        problems.append(f"checksum {lpu.checksum()} != stored {tuple(tables['checksum'])} (data v{DATA_VERSION})")
    expected = LPU_SIZE.get(lpu.code_name)
    if expected is not None and lpu.size != expected:
        problems.append(f"size {lpu.size} != {expected}")
    if problems:
        raise ValidationError(f"{lpu.code_name} LPU failed validation", problems)


@dataclass
class Module:
    code: BBCode
    basis: object
    ops: dict
    lpu: LPU

    @property
    def name(self) -> str:
        return self.code.name


def load_module(code_name: str) -> Module:
    code = code_from_name(code_name)
    basis, ops = build_basis(code_name, code)
    return Module(code, basis, ops, build_lpu(code, basis, ops))


# -------------------- targets --------------------
def normalize_target(target) -> tuple:
    """Accepts "X1*Z7", ("X1", "Z7") or "Y1"; returns sorted core labels."""
    if isinstance(target, str):
        target = [t for t in target.replace(" ", "").split("*") if t]
    labels = set()
    for t in target:
        parts = ["X" + t[1:], "Z" + t[1:]] if t.startswith("Y") else [t]
        for p in parts:
            if p not in CORE_LABELS:
                raise UnsupportedError(f"{t} is not measurable by the LPU; use products of {', '.join(CORE_LABELS)}")
            labels ^= {p}
    if not labels:
        raise UnsupportedError("target is the identity")
    return tuple(sorted(labels))


def target_name(labels) -> str:
    return "*".join(labels)


def in_module_targets() -> list:
    out = []
    for mask in range(1, 16):
        out.append(tuple(sorted(CORE_LABELS[b] for b in range(4) if mask >> b & 1)))
    return out


def half_targets() -> list:
    return [("X1",), ("Z7",), ("X1", "Z7"), ("X7",), ("Z1",), ("X7", "Z1")]


def inter_module_targets() -> list:
    return [(a, b) for a in half_targets() for b in half_targets()]


def region_for(labels) -> str:
    labels = set(labels)
    if labels <= HALF_L:
        return "l"
    if labels <= HALF_R:
        return "r"
    return "full"


REGIONS = {
    "l": ({"V_l", "bell"}, {"E_l"}, {"U_l"}),
    "r": ({"V_r", "bell"}, {"E_r"}, {"U_r"}),
    "full": ({"V_l", "V_r", "bell"}, {"E_l", "E_r", "B"}, {"U_l", "U_r", "U_B"}),
}


def target_pauli(ops: dict, labels) -> PauliOperator:
    out = None
    for label in labels:
        out = ops[label].pauli if out is None else out * ops[label].pauli
    return out


# -------------------- deformed codes --------------------
@dataclass(eq=False)
class DeformedCode:
    name: str
    n_code: int
    vertices: list
    vertex_parts: dict
    edges: list
    cycles: list
    stabilizers: np.ndarray
    roles: list
    measured: PauliOperator
    bell: frozenset = frozenset()

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_total(self) -> int:
        return self.n_code + len(self.edges)

    def rows(self, kind: str) -> list:
        return [r for r, role in enumerate(self.roles) if role[0] == kind]

    def operator(self, row: int) -> PauliOperator:
        return PauliOperator.from_vector(self.stabilizers[row])

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        for k, (_, u, v) in enumerate(self.edges):
            g.add_edge(u, v, index=k)
        return g

    @cached_property
    def logical_count(self) -> int:
        return self.n_total - gf2.rank(self.stabilizers)

    def commutation_violations(self) -> int:
        n = self.n_total
        x, z = self.stabilizers[:, :n], self.stabilizers[:, n:]
        sym = gf2.matmul(x, z.T) ^ gf2.matmul(z, x.T)
        return int(np.count_nonzero(np.triu(sym)))

    def vertex_product(self) -> PauliOperator:
        vec = np.zeros(2 * self.n_total, dtype=np.uint8)
        for r in self.rows("vertex"):
            vec ^= self.stabilizers[r]
        return PauliOperator.from_vector(vec)

    def degrees(self) -> dict:
        """Row and qubit degrees of the merged Tanner graph; Bell rows count as one half plus the coupler."""
        n = self.n_total
        touch = self.stabilizers[:, :n] | self.stabilizers[:, n:]
        rows = {}
        for r, role in enumerate(self.roles):
            w = int(touch[r].sum())
            rows[role] = math.ceil(w / 2) + 1 if role in self.bell else w
        qubits = touch.sum(axis=0)
        return {"rows": rows, "qubits": [int(d) for d in qubits]}

    @property
    def max_degree(self) -> int:
        deg = self.degrees()
        return max(max(deg["rows"].values()), max(deg["qubits"]))


class _Pieces:
    def __init__(self):
        self.vertices = []
        self.parts = {}
        self.edges = []
        self.attach = []
        self.cycles = []
        self.bell = set()
        self._pos = {}

    def vertex(self, name: str, part: PauliOperator, bell=False):
        self.vertices.append(name)
        self.parts[name] = part
        if bell:
            self.bell.add(("vertex", name))

    def edge(self, u: str, v: str, attach=()):
        key = frozenset((u, v))
        if key in self._pos:
            raise ValidationError(f"duplicate edge {u}~{v}")
        self._pos[key] = len(self.edges)
        self.edges.append((f"{u}~{v}", u, v))
        self.attach.append(frozenset(attach))

    def cycle(self, seq, bell=False):
        idx = []
        for a in range(len(seq)):
            key = frozenset((seq[a], seq[(a + 1) % len(seq)]))
            if key not in self._pos:
                raise ValidationError(f"cycle uses missing edge {seq[a]}~{seq[(a + 1) % len(seq)]}")
            idx.append(self._pos[key])
        if bell:
            self.bell.add(("cycle", len(self.cycles)))
        self.cycles.append(idx)


def _restrict(pauli: PauliOperator, qubits, n: int, offset: int = 0) -> PauliOperator:
    x = np.zeros(n, np.uint8)
    z = np.zeros(n, np.uint8)
    for q in qubits:
        x[offset + q] = pauli.x[q]
        z[offset + q] = pauli.z[q]
    return PauliOperator(x, z)


def _code_rows(code: BBCode, n: int, offset: int, prefix: str):
    rows, labels = [], []
    move = (np.arange(n) + offset) % n
    for kind in ("X", "Z"):
        for alpha in code.params.monomials():
            rows.append(code.check(kind, alpha).extended(n).permuted(move))
            labels.append(f"{prefix}{kind}{code.check_index(kind, alpha)}")
    return rows, labels


def _tree_paths(pieces: _Pieces):
    """Parent edge of every vertex in a BFS tree rooted at the first vertex."""
    adj = {v: [] for v in pieces.vertices}
    for k, (_, u, v) in enumerate(pieces.edges):
        adj[u].append((v, k))
        adj[v].append((u, k))
    root = pieces.vertices[0]
    parent = {root: None}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v, k in adj[u]:
            if v not in parent:
                parent[v] = (u, k)
                queue.append(v)
    if len(parent) != len(pieces.vertices):
        raise ValidationError("auxiliary graph is disconnected")
    return parent


def _gauge(name: str, n_code: int, rows, labels, pieces: _Pieces, measured: PauliOperator) -> DeformedCode:
    """
    Deforms the code checks by the auxiliary graph: vertex checks are the
    target restricted to the vertex's code qubits times X on incident edges,
    cycle checks are Z on the cycle, and each code check picks up Z on an
    edge set whose boundary is the set of vertices it anticommutes with.
    """
    n_edges = len(pieces.edges)
    n = n_code + n_edges
    vmat = np.stack([pieces.parts[v].vector() for v in pieces.vertices])
    cmat = np.stack([r.vector() for r in rows])
    # anticommutation between every code check and every vertex part
    anti = gf2.matmul(cmat[:, :n_code], vmat[:, n_code:].T) ^ gf2.matmul(cmat[:, n_code:], vmat[:, :n_code].T)
    parent = None

    stab = np.zeros((len(rows) + len(pieces.vertices) + len(pieces.cycles), 2 * n), dtype=np.uint8)
    roles = []
    for r, (row, label) in enumerate(zip(rows, labels)):
        stab[r, :n_code] = row.x
        stab[r, n : n + n_code] = row.z
        roles.append(("code", label))
        hit = [pieces.vertices[v] for v in np.flatnonzero(anti[r])]
        if not hit:
            continue
        if len(hit) % 2:
            raise ValidationError(f"code check {label} anticommutes with the target")
        chosen = [
            k for k, (_, u, v) in enumerate(pieces.edges)
            if label in pieces.attach[k] and {u, v} == set(hit)
        ]
        if chosen:
            stab[r, n + n_code + chosen[0]] = 1
            continue
        parent = parent or _tree_paths(pieces)
        log.debug("%s: check %s touches %d vertices, using tree paths", name, label, len(hit))
        for v in hit:
            while parent[v] is not None:
                v, k = parent[v]
                stab[r, n + n_code + k] ^= 1

    base = len(rows)
    for a, v in enumerate(pieces.vertices):
        part = pieces.parts[v]
        if part.is_identity() and ("vertex", v) not in pieces.bell:
            raise ValidationError(f"vertex {v} carries no part of the target")
        stab[base + a, :n_code] = part.x
        stab[base + a, n : n + n_code] = part.z
        for k, (_, u, w) in enumerate(pieces.edges):
            if v in (u, w):
                stab[base + a, n_code + k] = 1
        roles.append(("vertex", v))
    base += len(pieces.vertices)
    for c, idx in enumerate(pieces.cycles):
        for k in idx:
            stab[base + c, n + n_code + k] = 1
        roles.append(("cycle", c))

    deformed = DeformedCode(
        name=name,
        n_code=n_code,
        vertices=list(pieces.vertices),
        vertex_parts=dict(pieces.parts),
        edges=list(pieces.edges),
        cycles=[list(c) for c in pieces.cycles],
        stabilizers=stab,
        roles=roles,
        measured=measured,
        bell=frozenset(pieces.bell),
    )
    problems = []
    if deformed.commutation_violations():
        problems.append(f"{deformed.commutation_violations()} anticommuting pairs")
    if deformed.vertex_product() != measured.extended(n):
        problems.append("vertex checks do not multiply to the target")
    if deformed.max_degree > MAX_DEGREE:
        problems.append(f"max degree {deformed.max_degree} > {MAX_DEGREE}")
    if problems:
        raise ValidationError(f"deformed code {name} is invalid", problems)
    log.debug("%s: %d qubits, %d checks", name, n, stab.shape[0])
    return deformed


def deform(module: Module, target) -> DeformedCode:
    """Deformed code for measuring an in-module product of X1, Z1, X7, Z7."""
    labels = normalize_target(target)
    region = region_for(labels)
    vparts, eparts, cparts = REGIONS[region]
    code, lpu = module.code, module.lpu
    measured = target_pauli(module.ops, labels)
    pieces = _Pieces()
    for name, v in lpu.vertices.items():
        if v.part in vparts:
            bell = v.part == "bell" and region == "full"
            pieces.vertex(name, _restrict(measured, v.qubits, code.n), bell=bell)
    for e in lpu.edges:
        if e.part in eparts:
            attach = [f"{kind}{code.check_index(kind, alpha)}" for kind, alpha in e.checks]
            pieces.edge(*e.ends, attach=attach)
    for c in lpu.cycles:
        if c.part in cparts:
            pieces.cycle(c.vertices)
    rows, row_labels = _code_rows(code, code.n, 0, "")
    return _gauge(f"{code.name}:{target_name(labels)}", code.n, rows, row_labels, pieces, measured)


def merge_code_code(mod_a: Module, target_a, mod_b: Module, target_b, variant: str = "1-1") -> DeformedCode:
    """
    Deformed code joining the half-LPUs of two modules through their bridges.
    Bridge k of each module ends on a shared Bell vertex w_k, and the bridge
    squares of both modules fuse into six-edge Bell cycles.
    """
    if variant != "1-1":
        raise UnsupportedError(f"only the 1-1 code-code adapter has a deformed-code model, not {variant!r}")
    la, lb = normalize_target(target_a), normalize_target(target_b)
    regions = region_for(la), region_for(lb)
    if "full" in regions:
        raise UnsupportedError("inter-module targets must each lie in one half-LPU")
    if len(mod_a.lpu.bridge_top) != len(mod_b.lpu.bridge_top):
        raise UnsupportedError("modules have different bridge counts")
    n_code = mod_a.code.n + mod_b.code.n
    meas_a = target_pauli(mod_a.ops, la)
    meas_b = target_pauli(mod_b.ops, lb)
    measured = PauliOperator(np.concatenate([meas_a.x, meas_b.x]), np.concatenate([meas_a.z, meas_b.z]))

    pieces = _Pieces()
    rows, labels = [], []
    ends = {}
    for prefix, module, region, offset in (("a:", mod_a, regions[0], 0), ("b:", mod_b, regions[1], mod_a.code.n)):
        code, lpu = module.code, module.lpu
        vparts, eparts, cparts = REGIONS[region]
        for name, v in lpu.vertices.items():
            if v.part in vparts:
                pieces.vertex(prefix + name, _restrict(measured, [offset + q for q in v.qubits], n_code))
        for e in lpu.edges:
            if e.part in eparts:
                attach = [f"{prefix}{kind}{code.check_index(kind, alpha)}" for kind, alpha in e.checks]
                pieces.edge(prefix + e.ends[0], prefix + e.ends[1], attach=attach)
        for c in lpu.cycles:
            if c.part in cparts:
                pieces.cycle([prefix + v for v in c.vertices])
        path = lpu.bridge_top if region == "l" else lpu.bridge_bottom
        ends[prefix] = [prefix + v for v in path]
        r, lab = _code_rows(code, n_code, offset, prefix)
        rows += r
        labels += lab

    count = len(ends["a:"])
    for k in range(count):
        pieces.vertex(f"w{k}", PauliOperator.identity(n_code), bell=True)
        pieces.edge(ends["a:"][k], f"w{k}")
        pieces.edge(ends["b:"][k], f"w{k}")
    for k in range(count - 1):
        a0, a1 = ends["a:"][k], ends["a:"][k + 1]
        b0, b1 = ends["b:"][k], ends["b:"][k + 1]
        pieces.cycle([a0, a1, f"w{k + 1}", b1, b0, f"w{k}"], bell=True)

    name = f"{mod_a.name}:{target_name(la)}|{mod_b.name}:{target_name(lb)}"
    return _gauge(name, n_code, rows, labels, pieces, measured)


def coupler_manifest(deformed: DeformedCode) -> list:
    """(kind, left, right) for every Bell coupler of an inter-module merge."""
    out = []
    for role in sorted(deformed.bell, key=str):
        if role[0] == "vertex":
            u = [a if b == role[1] else b for _, a, b in deformed.edges if role[1] in (a, b)]
            left = next(x for x in u if x.startswith("a:"))
            right = next(x for x in u if x.startswith("b:"))
            out.append(("bell-vertex", left, right))
        else:
            out.append(("bell-cycle", f"a:square{role[1]}", f"b:square{role[1]}"))
    return out


# -------------------- measurement outcomes --------------------
@dataclass
class MeasurementOutcome:
    logical: int
    correction: PauliOperator
    flagged_cycles: list
    root: str


def measurement_outcome_rule(deformed: DeformedCode, vertex_outcomes: dict, edge_outcomes: dict, root: str = None):
    """
    The logical outcome is the product of the vertex outcomes. Edge Z
    outcomes are then walked along a BFS tree from the root; wherever the
    path product is -1 the vertex's code part is applied as a correction.
    Cycles whose edge product is -1 are reported.
    """
    missing = [v for v in deformed.vertices if v not in vertex_outcomes]
    missing += [e for e, _, _ in deformed.edges if e not in edge_outcomes]
    if missing:
        raise ValueError(f"missing outcomes for {missing[:5]}")
    logical = 1
    for v in deformed.vertices:
        logical *= vertex_outcomes[v]
    root = root or min(deformed.vertices)
    graph = deformed.graph()
    if not nx.is_connected(graph):
        raise ValidationError(f"{deformed.name} graph is disconnected")
    parity = {root: 1}
    for u, v in nx.bfs_edges(graph, root):
        edge = deformed.edges[graph.edges[u, v]["index"]][0]
        parity[v] = parity[u] * edge_outcomes[edge]
    correction = PauliOperator.identity(deformed.n_code)
    for v, sign in parity.items():
        if sign < 0:
            correction = correction * deformed.vertex_parts[v]
    flagged = []
    for c, idx in enumerate(deformed.cycles):
        prod = 1
        for k in idx:
            prod *= edge_outcomes[deformed.edges[k][0]]
        if prod < 0:
            flagged.append(c)
    return MeasurementOutcome(logical, correction, flagged, root)


def protocol_steps(deformed: DeformedCode, rounds: int) -> list:
    return [
        ("init", f"prepare {deformed.n_edges} edge qubits in |0>"),
        ("measure", f"measure {len(deformed.roles)} deformed checks for {rounds} rounds"),
        ("readout", f"logical outcome is the product of {len(deformed.rows('vertex'))} vertex outcomes"),
        ("ungauge", f"measure {deformed.n_edges} edge qubits in Z"),
        ("correct", "apply the tree-path correction"),
    ]


# -------------------- gauge structure --------------------
@dataclass
class GaugeDecomposition:
    gauge: np.ndarray
    center: np.ndarray
    measured: PauliOperator


def subsystem_gauge_decomposition(deformed: DeformedCode) -> GaugeDecomposition:
    """
    Gauge group: deformed checks plus Z on every edge. Center: the deformed
    checks without the vertex checks.
    """
    n = deformed.n_total
    edge_z = np.zeros((deformed.n_edges, 2 * n), dtype=np.uint8)
    for k in range(deformed.n_edges):
        edge_z[k, n + deformed.n_code + k] = 1
    gauge = np.vstack([deformed.stabilizers, edge_z])
    keep = [r for r, role in enumerate(deformed.roles) if role[0] != "vertex"]
    return GaugeDecomposition(gauge, deformed.stabilizers[keep], deformed.measured.extended(n))


# -------------------- adapters --------------------
@dataclass(frozen=True)
class AdapterPlan:
    kind: str
    variant: str
    check_qubits: int
    couplers: int
    path: tuple = ()
    folded: bool = False


def code_code_adapter(lpu: LPU, variant: str = "1-1") -> AdapterPlan:
    bridges = len(lpu.bridge_top)
    if variant == "1-1":
        per_side = bridges
    elif variant == "2-1":
        log.warning("2-1 code-code adapter counts are not validated against a deformed code")
        per_side = math.ceil(bridges / 2)
    else:
        raise UnsupportedError(f"unknown adapter variant {variant!r}")
    return AdapterPlan("code-code", variant, 2 * per_side, per_side + lpu.squares)


def _headroom_graph(lpu: LPU, parts=None) -> nx.Graph:
    vparts, eparts = parts or (None, None)
    g = nx.Graph()
    for name, v in lpu.vertices.items():
        if vparts is not None and v.part not in vparts:
            continue
        if name != lpu.bell and lpu.vertex_degree(name) < MAX_DEGREE:
            g.add_node(name)
    for k, e in enumerate(lpu.edges):
        if eparts is not None and e.part not in eparts:
            continue
        if all(v in g for v in e.ends) and lpu.edge_degree(k) < MAX_DEGREE:
            g.add_edge(*e.ends)
    return g


def _find_path(g: nx.Graph, length: int, budget: int):
    steps = 0
    for start in sorted(g.nodes):
        stack = [(start, [start])]
        while stack:
            node, path = stack.pop()
            steps += 1
            if steps > budget:
                return None
            if len(path) == length:
                return path
            for nxt in sorted(g.neighbors(node), reverse=True):
                if nxt not in path:
                    stack.append((nxt, path + [nxt]))
    return None


def code_factory_adapter(lpu: LPU, distance: int, budget: int = 200000, parts=None, allow_fold: bool = False) -> AdapterPlan:
    """
    Path of `distance` LPU vertices with a spare port on every vertex and
    edge. `parts` limits the path to (vertex parts, edge parts). With
    allow_fold, a path of half as many vertices is accepted, each adapter
    check on the factory side then touching two consecutive Z_T qubits.
    """
    if distance < 1:
        raise ValueError("factory distance must be positive")
    g = _headroom_graph(lpu, parts)
    path = _find_path(g, distance, budget)
    folded = False
    if path is None and allow_fold:
        path = _find_path(g, math.ceil(distance / 2), budget)
        folded = path is not None
    if path is None:
        raise InfeasibleError(f"no path of {distance} vertices with spare degree in the {lpu.code_name} LPU")
    if folded:
        log.info("%s: factory adapter folded onto %d vertices", lpu.code_name, len(path))
    a = 2 * distance - 1
    return AdapterPlan("code-factory", "folded" if folded else "path", a, a, tuple(path), folded)


# -------------------- code-factory merge --------------------
@dataclass(frozen=True)
class SurfacePatch:
    """Rotated surface code on a d x d grid; qubit (i, j) is i * d + j."""
    distance: int
    x_checks: tuple
    z_checks: tuple

    @property
    def n(self) -> int:
        return self.distance ** 2

    @property
    def z_logical(self) -> tuple:
        return tuple(range(self.distance))


def surface_patch(d: int) -> SurfacePatch:
    """
    Weight-4 faces alternate X/Z in a checkerboard; the top and bottom
    boundaries carry weight-2 X checks and the sides weight-2 Z checks, so
    the top row is a Z logical.
    """
    if d < 2:
        raise ValueError("surface patch needs distance >= 2")
    x_checks, z_checks = [], []
    for a in range(d + 1):
        for b in range(d + 1):
            corners = [(i, j) for i in (a - 1, a) for j in (b - 1, b) if 0 <= i < d and 0 <= j < d]
            qubits = tuple(sorted(i * d + j for i, j in corners))
            x_type = (a + b) % 2 == 0
            if len(corners) == 4:
                (x_checks if x_type else z_checks).append(qubits)
            elif len(corners) == 2 and a in (0, d) and x_type:
                x_checks.append(qubits)
            elif len(corners) == 2 and b in (0, d) and not x_type:
                z_checks.append(qubits)
    return SurfacePatch(d, tuple(x_checks), tuple(z_checks))


def merge_code_factory(module: Module, target, d_factory: int, budget: int = 200000) -> DeformedCode:
    """
    Deformed code measuring an in-module target times Z_T of a surface-code
    factory. The path vertices each gain one Z_T qubit and the path edges
    the factory X checks that meet Z_T.
    """
    labels = normalize_target(target)
    region = region_for(labels)
    vparts, eparts, cparts = REGIONS[region]
    code, lpu = module.code, module.lpu
    plan = code_factory_adapter(lpu, d_factory, budget, parts=(vparts, eparts))
    patch = surface_patch(d_factory)
    n_code = code.n + patch.n
    meas = target_pauli(module.ops, labels)
    fz = np.zeros(patch.n, dtype=np.uint8)
    fz[list(patch.z_logical)] = 1
    measured = PauliOperator(np.concatenate([meas.x, np.zeros(patch.n, np.uint8)]), np.concatenate([meas.z, fz]))
    attached = {name: code.n + q for name, q in zip(plan.path, patch.z_logical)}

    rows, row_labels = _code_rows(code, n_code, 0, "")
    meets = {}
    for kind, checks in (("X", patch.x_checks), ("Z", patch.z_checks)):
        for i, qubits in enumerate(checks):
            vec = np.zeros(n_code, dtype=np.uint8)
            vec[[code.n + q for q in qubits]] = 1
            zero = np.zeros(n_code, dtype=np.uint8)
            rows.append(PauliOperator(vec, zero) if kind == "X" else PauliOperator(zero, vec))
            row_labels.append(f"f:{kind}{i}")
            hit = frozenset(q for q in qubits if q in patch.z_logical)
            if kind == "X" and hit:
                meets[hit] = row_labels[-1]

    pieces = _Pieces()
    for name, v in lpu.vertices.items():
        if v.part in vparts:
            qubits = list(v.qubits) + ([attached[name]] if name in attached else [])
            bell = v.part == "bell" and region == "full"
            pieces.vertex(name, _restrict(measured, qubits, n_code), bell=bell)
    steps = {frozenset(pair): k for k, pair in enumerate(zip(plan.path, plan.path[1:]))}
    for e in lpu.edges:
        if e.part in eparts:
            attach = [f"{kind}{code.check_index(kind, alpha)}" for kind, alpha in e.checks]
            k = steps.get(frozenset(e.ends))
            if k is not None:
                attach.append(meets[frozenset((k, k + 1))])
            pieces.edge(*e.ends, attach=attach)
    for c in lpu.cycles:
        if c.part in cparts:
            pieces.cycle(c.vertices)
    name = f"{code.name}:{target_name(labels)}|factory-d{d_factory}"
    deformed = _gauge(name, n_code, rows, row_labels, pieces, measured)
    log.info("%s: factory path %s, max degree %d", name, "-".join(plan.path), deformed.max_degree)
    return deformed
