"""
Compiler from Clifford + Pauli-rotation circuits to bicycle instructions.

Pipeline:
  parse_circuit -> to_pbc -> assign_and_distribute -> synthesis per module
  (in-module measurements via the BFS table, small angles via T injection)
  -> optimize_dedup -> time_and_census.

Paulis are bitmask ints: qubit q is bit q of x and z, and the string form
puts qubit 0 leftmost. Rotations use P(phi) = exp(i phi P / 2).
"""
import hashlib
import json
import logging
import math
import re
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

import gf2
from automorphism import logical_action, nontrivial_shift_classes, two_generator_decomposition
from bbcode import BBCode
from errors import CapacityError, InfeasibleError, UnsupportedError, ValidationError
from lpu import in_module_targets, inter_module_targets, target_name
from torus_algebra import Monomial

log = logging.getLogger(__name__)

QUBITS_PER_MODULE = 11
FACTORY = "factory"
PIVOT_INIT = "Z1"
PIVOT_READOUT = "X1"
PIVOT_LINK = "Z1|Z1"
T_LABELS = ("X1", "Y1", "Z1", "X7", "Y7", "Z7")
CLASSES = ("I", "U", "M", "C", "T")


def _popcount(v: int) -> int:
    return bin(v).count("1")


# -------------------- Paulis --------------------
class Pauli:
    """i^phase X^x Z^z on n qubits."""

    __slots__ = ("n", "x", "z", "phase")

    def __init__(self, n: int, x: int = 0, z: int = 0, phase: int = 0):
        self.n = n
        self.x = x
        self.z = z
        self.phase = phase % 4

    @classmethod
    def from_str(cls, text: str) -> "Pauli":
        text = text.strip()
        sign = 0
        if text[:1] in "+-":
            sign = 2 if text[0] == "-" else 0
            text = text[1:]
        x = z = 0
        phase = sign
        for q, ch in enumerate(text.upper()):
            if ch == "X":
                x |= 1 << q
            elif ch == "Z":
                z |= 1 << q
            elif ch == "Y":
                x |= 1 << q
                z |= 1 << q
                phase += 1
            elif ch not in "I_":
                raise ValueError(f"bad Pauli character {ch!r} in {text!r}")
        return cls(len(text), x, z, phase)

    @classmethod
    def single(cls, n: int, q: int, letter: str) -> "Pauli":
        return cls.from_str("I" * q + letter + "I" * (n - q - 1))

    @property
    def y_count(self) -> int:
        return _popcount(self.x & self.z)

    @property
    def sign(self) -> complex:
        return 1j ** ((self.phase - self.y_count) % 4)

    def is_hermitian(self) -> bool:
        return (self.phase - self.y_count) % 2 == 0

    def unsigned(self) -> "Pauli":
        return Pauli(self.n, self.x, self.z, self.y_count)

    @property
    def key(self) -> tuple:
        return self.x, self.z

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    def is_identity(self) -> bool:
        return not (self.x or self.z)

    def commutes(self, other: "Pauli") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def __mul__(self, other: "Pauli") -> "Pauli":
        if self.n != other.n:
            raise ValueError(f"length mismatch: {self.n} vs {other.n}")
        phase = self.phase + other.phase + 2 * _popcount(self.z & other.x)
        return Pauli(self.n, self.x ^ other.x, self.z ^ other.z, phase)

    def scaled(self, quarter_turns: int) -> "Pauli":
        return Pauli(self.n, self.x, self.z, self.phase + quarter_turns)

    def __eq__(self, other):
        return isinstance(other, Pauli) and (self.n, self.x, self.z, self.phase) == (other.n, other.x, other.z, other.phase)

    def __hash__(self):
        return hash((self.n, self.x, self.z, self.phase))

    def letters(self) -> str:
        out = []
        for q in range(self.n):
            bx, bz = self.x >> q & 1, self.z >> q & 1
            out.append("IXZY"[bx + 2 * bz])
        return "".join(out)

    def __str__(self):
        prefix = {0: "+", 1: "+i", 2: "-", 3: "-i"}[(self.phase - self.y_count) % 4]
        return prefix + self.letters()

    __repr__ = __str__

    def vector(self) -> np.ndarray:
        bits = [(self.x >> q) & 1 for q in range(self.n)] + [(self.z >> q) & 1 for q in range(self.n)]
        return np.array(bits, dtype=np.uint8)

    @classmethod
    def from_vector(cls, vec) -> "Pauli":
        vec = np.asarray(vec)
        n = vec.shape[0] // 2
        x = sum(1 << q for q in range(n) if vec[q])
        z = sum(1 << q for q in range(n) if vec[n + q])
        return cls(n, x, z, _popcount(x & z))

    def restricted(self, lo: int, width: int) -> tuple:
        """(x, z) bits of qubits lo..lo+width-1, shifted down to bit 0."""
        mask = (1 << width) - 1
        return (self.x >> lo) & mask, (self.z >> lo) & mask

    def to_matrix(self) -> np.ndarray:
        single = {
            (0, 0): np.eye(2, dtype=complex),
            (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
            (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
            (1, 1): np.array([[0, -1], [1, 0]], dtype=complex),  # XZ
        }
        out = np.array([[1]], dtype=complex)
        for q in range(self.n):
            out = np.kron(out, single[(self.x >> q & 1, self.z >> q & 1)])
        return (1j ** self.phase) * out


# -------------------- Clifford tableaux --------------------
class Tableau:
    """
    Conjugation map P -> C P C^dagger, stored as the images of X_0..X_{n-1}
    followed by Z_0..Z_{n-1}.
    """

    def __init__(self, n: int, images):
        self.n = n
        self.images = list(images)

    @classmethod
    def identity(cls, n: int) -> "Tableau":
        xs = [Pauli(n, 1 << q, 0) for q in range(n)]
        zs = [Pauli(n, 0, 1 << q) for q in range(n)]
        return cls(n, xs + zs)

    def conjugate(self, p: Pauli) -> Pauli:
        out = Pauli(self.n, 0, 0, p.phase)
        for q in range(self.n):
            if p.x >> q & 1:
                out = out * self.images[q]
        for q in range(self.n):
            if p.z >> q & 1:
                out = out * self.images[self.n + q]
        return out

    def then(self, other: "Tableau") -> "Tableau":
        """Apply self first, then other."""
        return Tableau(self.n, [other.conjugate(img) for img in self.images])

    def symplectic(self) -> np.ndarray:
        return np.stack([img.vector() for img in self.images], axis=1)

    def inverse(self) -> "Tableau":
        inv = gf2.inverse(self.symplectic())
        generators = Tableau.identity(self.n).images
        images = []
        for j in range(2 * self.n):
            pre = Pauli.from_vector(inv[:, j])
            image = self.conjugate(pre)
            if image.key != generators[j].key:
                raise ValidationError("tableau is not invertible")
            images.append(pre if image.phase == generators[j].phase else pre.scaled(2))
        return Tableau(self.n, images)

    def problems(self) -> list:
        out = []
        for j, img in enumerate(self.images):
            if not img.is_hermitian():
                out.append(f"image {j} is not Hermitian")
        for a in range(2 * self.n):
            for b in range(a + 1, 2 * self.n):
                want = b == a + self.n
                if (not self.images[a].commutes(self.images[b])) != want:
                    out.append(f"images {a} and {b} break the commutation relations")
        return out

    def __eq__(self, other):
        return isinstance(other, Tableau) and self.n == other.n and self.images == other.images

    # ---- named gates ----
    @classmethod
    def gate(cls, name: str, n: int, *qubits) -> "Tableau":
        name = name.upper()
        t = cls.identity(n)
        imgs = t.images
        if name == "H":
            (q,) = qubits
            imgs[q], imgs[n + q] = imgs[n + q], imgs[q]
        elif name in ("S", "SDG"):
            (q,) = qubits
            imgs[q] = Pauli.single(n, q, "Y") if name == "S" else Pauli.single(n, q, "Y").scaled(2)
        elif name == "CX":
            c, tq = qubits
            imgs[c] = imgs[c] * imgs[tq]
            imgs[n + tq] = imgs[n + c] * imgs[n + tq]
        elif name == "CZ":
            a, b = qubits
            imgs[a] = imgs[a] * imgs[n + b]
            imgs[b] = imgs[n + a] * imgs[b]
        elif name in ("X", "Y", "Z"):
            (q,) = qubits
            p = Pauli.single(n, q, name)
            t.images = [img if img.commutes(p) else img.scaled(2) for img in imgs]
        else:
            raise UnsupportedError(f"{name} is not a supported Clifford gate")
        return t

    @classmethod
    def pauli_rotation(cls, p: Pauli, quarter_turns: int) -> "Tableau":
        """P(quarter_turns * pi/2) for quarter_turns = +-1."""
        base = cls.identity(p.n)
        return cls(p.n, [g if g.commutes(p) else (p * g).scaled(quarter_turns) for g in base.images])

    @classmethod
    def from_json(cls, data: dict) -> "Tableau":
        n = int(data["n"])
        images = [Pauli.from_str(s) for s in data["x_images"]] + [Pauli.from_str(s) for s in data["z_images"]]
        if len(images) != 2 * n or any(img.n != n for img in images):
            raise ValueError(f"tableau needs {n} X and {n} Z images of length {n}")
        t = cls(n, images)
        problems = t.problems()
        if problems:
            raise ValidationError("tableau is not a Clifford", problems)
        return t

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "x_images": [str(p) for p in self.images[: self.n]],
            "z_images": [str(p) for p in self.images[self.n:]],
        }


# -------------------- circuits --------------------
@dataclass(frozen=True)
class Rotation:
    pauli: Pauli
    angle: float


@dataclass(frozen=True)
class Measurement:
    pauli: Pauli


@dataclass(frozen=True)
class CliffordOp:
    tableau: Tableau
    name: str = ""


@dataclass
class InputCircuit:
    n: int
    ops: list = field(default_factory=list)


_ANGLE = re.compile(r"^([+-]?)(\d*\.?\d*)\*?pi(?:/(\d+(?:\.\d*)?))?$")


def parse_angle(text: str) -> float:
    t = text.strip().lower().replace(" ", "")
    if "pi" not in t:
        return float(t)
    m = _ANGLE.match(t)
    if not m:
        raise ValueError(f"cannot parse angle {text!r}")
    sign, coeff, den = m.groups()
    value = (float(coeff) if coeff else 1.0) * math.pi / (float(den) if den else 1.0)
    return -value if sign == "-" else value


def parse_circuit(text: str, base_dir=".") -> InputCircuit:
    """
    One op per line:
      QUBITS <n>
      ROT <pauli> <angle>       angle as a float or k*pi/m
      MEAS <pauli>
      CLIFF <gate> <qubits...>  H, S, SDG, X, Y, Z, CX, CZ
      CLIFF @<tableau.json>
    """
    n = None
    ops = []

    def check_width(p: Pauli, lineno: int):
        nonlocal n
        if n is None:
            n = p.n
        if p.n != n:
            raise ValueError(f"line {lineno}: Pauli has {p.n} qubits, circuit has {n}")

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *args = line.split()
        head = head.upper()
        if head == "QUBITS":
            n = int(args[0])
        elif head == "ROT":
            if len(args) != 2:
                raise ValueError(f"line {lineno}: ROT takes a Pauli and an angle")
            p = Pauli.from_str(args[0])
            check_width(p, lineno)
            ops.append(Rotation(p, parse_angle(args[1])))
        elif head == "MEAS":
            p = Pauli.from_str(args[0])
            check_width(p, lineno)
            ops.append(Measurement(p))
        elif head == "CLIFF":
            if args and args[0].startswith("@"):
                with open(Path(base_dir) / args[0][1:], "r", encoding="utf-8") as f:
                    tab = Tableau.from_json(json.load(f))
                if n is None:
                    n = tab.n
                if tab.n != n:
                    raise ValueError(f"line {lineno}: tableau has {tab.n} qubits, circuit has {n}")
                ops.append(CliffordOp(tab, args[0]))
            else:
                if n is None:
                    raise ValueError(f"line {lineno}: declare QUBITS before named gates")
                if args and args[0].upper() == "T":
                    raise UnsupportedError(f"line {lineno}: T is not Clifford; write it as ROT with angle pi/4")
                ops.append(CliffordOp(Tableau.gate(args[0], n, *(int(a) for a in args[1:])), " ".join(args)))
        else:
            raise UnsupportedError(f"line {lineno}: unknown op {head}")
    if n is None:
        raise ValueError("empty circuit")
    return InputCircuit(n, ops)


# -------------------- Pauli-based computation --------------------
@dataclass
class PbcProgram:
    n: int
    ops: list
    residual: Tableau

    def stats(self) -> dict:
        rotations = [op for op in self.ops if isinstance(op, Rotation)]
        weights = [op.pauli.weight for op in rotations]
        return {
            "qubits": self.n,
            "rotations": len(rotations),
            "measurements": len(self.ops) - len(rotations),
            "pi4_rotations": sum(1 for op in rotations if rotation_kind(op.angle) == "pi4"),
            "mean_weight": float(np.mean(weights)) if weights else 0.0,
        }


def to_pbc(circuit: InputCircuit) -> PbcProgram:
    """
    Pushes every Clifford to the end. With D the product of Cliffords seen
    so far, P(phi) D = D (D^dagger P D)(phi), so each Pauli is mapped
    through the inverse of D. D itself is returned as the residual.
    """
    n = circuit.n
    pull = None          # P -> D^dagger P D, None while D is the identity
    residual = Tableau.identity(n)
    out = []
    for op in circuit.ops:
        if isinstance(op, CliffordOp):
            inv = op.tableau.inverse()
            pull = inv if pull is None else inv.then(pull)
            residual = residual.then(op.tableau)
        elif isinstance(op, (Rotation, Measurement)):
            p = op.pauli if pull is None else pull.conjugate(op.pauli)
            out.append(Rotation(p, op.angle) if isinstance(op, Rotation) else Measurement(p))
        else:
            raise UnsupportedError(f"{type(op).__name__} is not a Clifford, rotation or measurement")
    log.debug("pbc: %d ops on %d qubits", len(out), n)
    return PbcProgram(n, out, residual)


def rotation_kind(angle: float, tol: float = 1e-9) -> str:
    """'identity', 'clifford' (multiple of pi/2), 'pi4' or 'small'."""
    turns = (angle / (math.pi / 4)) % 8
    nearest = round(turns)
    if abs(turns - nearest) > tol:
        return "small"
    nearest %= 8
    if nearest == 0:
        return "identity"
    return "clifford" if nearest % 2 == 0 else "pi4"


# -------------------- distribution over modules --------------------
@dataclass
class DistributedOp:
    index: int
    kind: str            # "rotation" | "measurement"
    pauli: Pauli
    angle: float
    lo: int
    hi: int
    parts: dict          # module -> (x, z) on its 11 data qubits
    zz_rounds: tuple

    @property
    def modules(self) -> range:
        return range(self.lo, self.hi + 1)

    @property
    def zz_count(self) -> int:
        return sum(len(r) for r in self.zz_rounds)


def module_of(qubit: int) -> int:
    return qubit // QUBITS_PER_MODULE


def zz_rounds(lo: int, hi: int) -> tuple:
    """Path lo..hi split into two rounds of disjoint adjacent pairs."""
    pairs = [(m, m + 1) for m in range(lo, hi)]
    return tuple(pairs[::2]), tuple(pairs[1::2])


def assign_and_distribute(pbc: PbcProgram, modules: int) -> list:
    """
    Splits each op over the modules. Rotations reach the last module, which
    sits next to the factory; measurements only span their own support.
    """
    if pbc.n > QUBITS_PER_MODULE * modules:
        raise CapacityError(f"{pbc.n} qubits do not fit in {modules} modules of {QUBITS_PER_MODULE}")
    out = []
    for index, op in enumerate(pbc.ops):
        p = op.pauli
        parts = {}
        for m in range(modules):
            x, z = p.restricted(m * QUBITS_PER_MODULE, QUBITS_PER_MODULE)
            if x or z:
                parts[m] = (x, z)
        if not parts:
            log.warning("op %d is the identity, skipped", index)
            continue
        is_rot = isinstance(op, Rotation)
        lo = min(parts)
        hi = modules - 1 if is_rot else max(parts)
        out.append(DistributedOp(
            index,
            "rotation" if is_rot else "measurement",
            p,
            op.angle if is_rot else 0.0,
            lo,
            hi,
            parts,
            zz_rounds(lo, hi),
        ))
    return out


# -------------------- instructions --------------------
@dataclass(frozen=True)
class Instruction:
    kind: str                  # one of CLASSES
    modules: tuple
    label: str
    op_index: int = -1
    conditioned_on: tuple = ()

    def to_record(self) -> dict:
        rec = {"kind": self.kind, "modules": list(self.modules), "label": self.label, "op": self.op_index}
        if self.conditioned_on:
            rec["conditioned_on"] = list(self.conditioned_on)
        return rec


# -------------------- synthesis table --------------------
STATE_BITS = 12
STATE_SPACE = 1 << (2 * STATE_BITS)
UNREACHED = 255
DATA_MASK = 0xFFE | (0xFFE << STATE_BITS)
PIVOT_MASK = 0x001 | (0x001 << STATE_BITS)
MAGIC = b"BBSYNTH1"


def _swap_halves(v):
    return (v >> STATE_BITS) | ((v & 0xFFF) << STATE_BITS)


def _parity(v: np.ndarray) -> np.ndarray:
    for s in (16, 8, 4, 2, 1):
        v = v ^ (v >> s)
    return v & 1


def anticommute(a: int, b: int) -> bool:
    return _popcount(a & _swap_halves(b)) % 2 == 1


def module_state(pivot: str, x: int, z: int) -> int:
    """12-qubit state index: pivot on bit 0, data qubit j on bit j+1."""
    px, pz = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}[pivot]
    return ((x << 1) | px) | (((z << 1) | pz) << STATE_BITS)


def labels_state(labels) -> int:
    s = 0
    for label in labels:
        q = int(label[1:]) - 1
        s ^= (1 << q) if label[0] == "X" else (1 << (q + STATE_BITS))
    return s


def _apply_action(action, state: int) -> int:
    x = np.array([(state >> q) & 1 for q in range(STATE_BITS)], dtype=np.uint8)
    z = np.array([(state >> (q + STATE_BITS)) & 1 for q in range(STATE_BITS)], dtype=np.uint8)
    x2 = gf2.matmul(action.x_action, x)
    z2 = gf2.matmul(action.z_action, z)
    return sum(int(b) << q for q, b in enumerate(x2)) | sum(int(b) << (q + STATE_BITS) for q, b in enumerate(z2))


@dataclass(frozen=True)
class NativeMeasurement:
    state: int
    target: tuple       # in-module labels measured after undoing the shift
    delta: Monomial


def native_measurements(code: BBCode, ops: dict) -> dict:
    """state -> NativeMeasurement for every shift class applied to the 15 targets."""
    p = code.params
    out = {}
    for delta in [Monomial(0, 0)] + nontrivial_shift_classes(p):
        action = logical_action(code, ops, delta)
        for target in in_module_targets():
            state = _apply_action(action, labels_state(target))
            out.setdefault(state, NativeMeasurement(state, target, delta))
    return out


def native_rotations(natives: dict) -> dict:
    """data part R -> native state that realizes R(pi/2)."""
    out = {}
    for state in sorted(natives):
        r = state & DATA_MASK
        if r:
            out.setdefault(r, state)
    return out


@dataclass(eq=False)
class SynthesisTable:
    code_name: str
    natives: dict
    rotations: dict
    dist: np.ndarray

    @property
    def generators(self) -> np.ndarray:
        return np.array(sorted(self.rotations), dtype=np.int64)

    def steps(self, state: int) -> int:
        k = int(self.dist[state])
        if k == UNREACHED:
            raise InfeasibleError(f"state {state:#08x} was not reached by the search")
        return k

    def path(self, state: int) -> tuple:
        """(seed, [R_1..R_k]) with state = R_1 ... R_k seed R_k^dagger ... R_1^dagger."""
        k = self.steps(state)
        seq = []
        cur = state
        gens = [int(g) for g in self.generators]
        while k:
            for g in gens:
                if anticommute(cur, g) and self.dist[cur ^ g] == k - 1:
                    seq.append(g)
                    cur ^= g
                    k -= 1
                    break
            else:
                raise ValidationError(f"no descent from state {cur:#08x} at distance {k}")
        return cur, seq

    # ---- persistence ----
    def digest(self) -> bytes:
        return hashlib.sha256(self.dist.tobytes()).digest()

    def save(self, path):
        name = self.code_name.encode()
        order = {t: i for i, t in enumerate(in_module_targets())}
        rows = sorted(self.natives.values(), key=lambda n: n.state)
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<H", len(name)) + name)
            f.write(struct.pack("<I", len(rows)))
            for nm in rows:
                f.write(struct.pack("<IBbb", nm.state, order[nm.target], nm.delta.i, nm.delta.j))
            f.write(self.digest())
            f.write(self.dist.tobytes())
        log.info("saved %s synthesis table to %s", self.code_name, path)

    @classmethod
    def load(cls, path, code_name: str = None) -> "SynthesisTable":
        targets = in_module_targets()
        with open(path, "rb") as f:
            if f.read(len(MAGIC)) != MAGIC:
                raise ValidationError(f"{path} is not a synthesis table")
            (length,) = struct.unpack("<H", f.read(2))
            name = f.read(length).decode()
            if code_name and name != code_name:
                raise ValidationError(f"{path} holds the {name} table, wanted {code_name}")
            (count,) = struct.unpack("<I", f.read(4))
            natives = {}
            for _ in range(count):
                state, t, di, dj = struct.unpack("<IBbb", f.read(7))
                natives[state] = NativeMeasurement(state, targets[t], Monomial(di, dj))
            digest = f.read(32)
            dist = np.frombuffer(f.read(), dtype=np.uint8).copy()
        table = cls(name, natives, native_rotations(natives), dist)
        if dist.size != STATE_SPACE or table.digest() != digest:
            raise ValidationError(f"{path}: checksum mismatch")
        return table


def build_synthesis_table(code: BBCode, ops: dict, max_depth: int = None) -> SynthesisTable:
    """
    Breadth-first search over 12-qubit Paulis mod phase. Seeds are the
    native measurements; a move conjugates by a native rotation R(pi/2),
    which flips the state by R exactly when the two anticommute.
    """
    natives = native_measurements(code, ops)
    rotations = native_rotations(natives)
    log.info("%s: %d native measurements, %d native rotations", code.name, len(natives), len(rotations))

    dist = np.full(STATE_SPACE, UNREACHED, dtype=np.uint8)
    frontier = np.array(sorted(natives), dtype=np.int64)
    dist[frontier] = 0
    gens = np.array(sorted(rotations), dtype=np.int64)
    swapped = _swap_halves(gens)
    depth = 0
    while frontier.size and (max_depth is None or depth < max_depth):
        found = []
        for g, gs in zip(gens, swapped):
            moved = frontier[_parity(frontier & gs).astype(bool)] ^ g
            moved = moved[dist[moved] == UNREACHED]
            dist[moved] = depth + 1
            found.append(moved)
        frontier = np.unique(np.concatenate(found)) if found else frontier[:0]
        depth += 1
        log.debug("%s: depth %d, %d new states", code.name, depth, frontier.size)
        if depth >= UNREACHED:
            raise ValidationError("search depth exceeds the byte range")
    return SynthesisTable(code.name, natives, rotations, dist)


def beta(k: int, convention: str = "2k+1") -> int:
    if convention == "2k+1":
        return 2 * k + 1
    if convention == "k+1":
        return k + 1
    raise ValueError(f"unknown convention {convention!r}")


def beta_statistics(table: SynthesisTable, convention: str = "2k+1") -> dict:
    """Mean measurement cost over all nontrivial 11-qubit data Paulis."""
    data = np.arange(1, 1 << 22, dtype=np.int64)
    x = data & 0x7FF
    z = data >> 11
    base = (x << 1) | (z << (STATE_BITS + 1))
    per_pivot = []
    for pivot in ("X", "Y", "Z"):
        k = table.dist[base | module_state(pivot, 0, 0)].astype(np.int64)
        if (k == UNREACHED).any():
            raise InfeasibleError(f"{table.code_name}: some pivot {pivot} targets are unreachable")
        per_pivot.append(beta(k, convention))
    stacked = np.stack(per_pivot)
    return {
        "code": table.code_name,
        "convention": convention,
        "mean_with_pivot": float(stacked.mean()),
        "mean_best_pivot": float(stacked.min(axis=0).mean()),
        "max_best_pivot": int(stacked.min(axis=0).max()),
    }


# -------------------- in-module synthesis --------------------
class TableSynthesizer:
    """Emits in-module measurement sequences read off a synthesis table."""

    def __init__(self, table: SynthesisTable, code: BBCode, convention: str = "2k+1"):
        self.table = table
        self.convention = convention
        self._routes = {}
        self._code = code

    def _shifts(self, delta: Monomial) -> list:
        if delta not in self._routes:
            self._routes[delta] = [s.name for s in two_generator_decomposition(self._code, delta)]
        return self._routes[delta]

    def choose(self, x: int, z: int) -> tuple:
        """(pivot letter, k) minimizing the step count."""
        best = None
        for pivot in ("Z", "X", "Y"):
            k = self.table.steps(module_state(pivot, x, z))
            if best is None or k < best[1]:
                best = (pivot, k)
        return best

    def native(self, module: int, state: int, op_index: int) -> list:
        nm = self.table.natives[state]
        p = self._code.params
        undo = p.canon(-nm.delta.i, -nm.delta.j)
        out = [Instruction("U", (module,), s, op_index) for s in self._shifts(undo)]
        out.append(Instruction("M", (module,), target_name(nm.target), op_index))
        out += [Instruction("U", (module,), s, op_index) for s in self._shifts(nm.delta)]
        return out

    def emit(self, module: int, pivot: str, x: int, z: int, op_index: int = -1) -> list:
        seed, rots = self.table.path(module_state(pivot, x, z))
        out = []
        for r in rots:
            out += self.native(module, self.table.rotations[r], op_index)
        out += self.native(module, seed, op_index)
        if self.convention == "2k+1":
            for r in reversed(rots):
                out += self.native(module, self.table.rotations[r], op_index)
        return out


class FixedCostSynthesizer:
    """
    Costing stand-in with a flat number of in-module measurements per
    module target. Labels cycle through the in-module set so that no two
    consecutive measurements coincide.
    """

    def __init__(self, measurements: int, shifts: int = 0, shift_name: str = "x"):
        self.measurements = measurements
        self.shifts = shifts
        self.shift_name = shift_name
        self._labels = [target_name(t) for t in in_module_targets() if target_name(t) not in (PIVOT_INIT, PIVOT_READOUT)]

    def choose(self, x: int, z: int) -> tuple:
        return "Z", 0

    def emit(self, module: int, pivot: str, x: int, z: int, op_index: int = -1) -> list:
        out = [Instruction("U", (module,), self.shift_name, op_index) for _ in range(self.shifts)]
        out += [Instruction("M", (module,), self._labels[i % len(self._labels)], op_index) for i in range(self.measurements)]
        return out


def synthesize_in_module(synth, module: int, x: int, z: int, op_index: int = -1) -> list:
    pivot, _ = synth.choose(x, z)
    return synth.emit(module, pivot, x, z, op_index)


# -------------------- small angles --------------------
@dataclass
class TCountModel:
    mode: str = "fixed"
    per_rotation: Fraction = Fraction(15542400, 184000)
    slope: float = 3.0
    intercept: float = 0.0

    def count(self, eps: float = None):
        if self.mode == "fixed":
            return self.per_rotation
        if self.mode == "affine":
            if not eps or eps <= 0 or eps >= 1:
                raise ValueError("affine T-count model needs 0 < eps < 1")
            return max(0.0, self.slope * math.log2(1 / eps) + self.intercept)
        raise ValueError(f"unknown T-count mode {self.mode!r}")

    @classmethod
    def from_config(cls, cfg: dict) -> "TCountModel":
        mode = cfg.get("mode", "fixed")
        if mode == "fixed":
            return cls(mode, Fraction(cfg.get("per_rotation", "15542400/184000")))
        return cls(mode, slope=float(cfg["slope"]), intercept=float(cfg.get("intercept", 0.0)))


@dataclass
class SmallAngleSequence:
    bases: list              # time order, letters X/Y/Z
    conditioned_on: list     # per injection: index of the frame-setting earlier injection, or None
    clifford: list           # trailing Clifford, matrix order

    @property
    def t_count(self) -> int:
        return len(self.bases)


_WORD = re.compile(r"^[HST\s]*$")


def _letter(p: Pauli) -> tuple:
    return p.letters(), 1 if p.sign == 1 else -1


def synthesize_small_angle(angle: float, word: str = None, model: TCountModel = None, eps: float = None) -> SmallAngleSequence:
    """
    Rewrites a word over {H, S, T} (matrix order, T = Z(pi/4), S = T^2)
    into T-rotations in Pauli bases followed by one Clifford. A Clifford V
    accumulated to the right of the scan point turns each T into the
    rotation (V Z V^dagger)(pi/4); a negative basis becomes the positive
    one times a (-pi/2) correction pushed into V.
    """
    if rotation_kind(angle) == "pi4" and word is None:
        return SmallAngleSequence(["Z"], [None], [])
    if word is None:
        if model is None:
            raise ValueError("small-angle rotation needs a word or a T-count model")
        word = "HT" * max(1, int(round(model.count(eps))))
    if not _WORD.match(word):
        raise ValueError(f"malformed small-angle word {word!r}")

    z = Pauli.from_str("Z")
    v = Tableau.identity(1)
    gates = []
    emitted = []
    for ch in word.replace(" ", "").replace("\n", ""):
        if ch == "T":
            letter, sign = _letter(v.conjugate(z))
            emitted.append(letter)
            if sign < 0:
                fix = Pauli.from_str(letter)
                v = v.then(Tableau.pauli_rotation(fix, -1))
                gates.insert(0, f"{letter}(-pi/2)")
        else:
            g = Tableau.gate("H", 1, 0) if ch == "H" else Tableau.pauli_rotation(z, 1)
            v = g.then(v)
            gates.append(ch)
    bases = emitted[::-1]
    cond = []
    for j, b in enumerate(bases):
        prior = [i for i in range(j) if bases[i] != b]
        cond.append(prior[-1] if prior else None)
    return SmallAngleSequence(bases, cond, gates)


# -------------------- programs --------------------
@dataclass
class BicycleProgram:
    modules: int
    instructions: list
    residual: Tableau = None
    stats: dict = field(default_factory=dict)

    def census(self) -> dict:
        out = dict.fromkeys(CLASSES, 0)
        for ins in self.instructions:
            out[ins.kind] += 1
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(ins.to_record()) + "\n" for ins in self.instructions)


def _injections(seq: SmallAngleSequence, module: int, op_index: int) -> list:
    """conditioned_on holds negative offsets back into the injection run."""
    out = []
    for j, (b, c) in enumerate(zip(seq.bases, seq.conditioned_on)):
        cond = () if c is None else (c - j,)
        out.append(Instruction("T", (module, FACTORY), f"{b}1", op_index, cond))
    return out


@lru_cache(maxsize=None)
def _ht_sequence(k: int) -> SmallAngleSequence:
    """Injections for k alternating T rotations; shared by every op with that T-count."""
    return synthesize_small_angle(0.0, word="HT" * k)


def compile_stream(pbc: PbcProgram, modules: int, synth, t_model: TCountModel = None, eps: float = None, words: dict = None):
    """
    Yields instructions op by op. Per op: pivot preparation on every module
    of the range, the ZZ spine in two rounds, the module targets, T
    injections on the last module for rotations, and pivot readouts.

    Small angles go through synthesize_small_angle: `words` maps an op index
    to its {H, S, T} word, other ops get an HT word of the model's T-count.
    """
    words = words or {}
    t_model = t_model or TCountModel()
    carry = Fraction(0)
    emitted = 0
    for op in assign_and_distribute(pbc, modules):
        kind = rotation_kind(op.angle) if op.kind == "rotation" else "measure"
        if kind in ("identity", "clifford"):
            log.debug("op %d is Clifford, folded into the frame", op.index)
            continue
        block = [Instruction("M", (m,), PIVOT_INIT, op.index) for m in op.modules]
        for rnd in op.zz_rounds:
            block += [Instruction("C", pair, PIVOT_LINK, op.index) for pair in rnd]
        for m in op.modules:
            x, z = op.parts.get(m, (0, 0))
            block += synthesize_in_module(synth, m, x, z, op.index)
        if kind == "pi4":
            seq = synthesize_small_angle(op.angle)
        elif kind == "small":
            if op.index in words:
                seq = synthesize_small_angle(op.angle, word=words[op.index])
            else:
                count = t_model.count(eps)
                if isinstance(count, Fraction):
                    carry += count
                    k = int(carry) - emitted
                    emitted += k
                else:
                    k = max(1, int(math.ceil(count)))
                seq = _ht_sequence(k)
        else:
            seq = None
        yield from block
        if seq is not None:
            yield from _injections(seq, modules - 1, op.index)
        for m in op.modules:
            yield Instruction("M", (m,), PIVOT_READOUT, op.index)


def compile_program(pbc: PbcProgram, modules: int, synth, t_model: TCountModel = None, eps: float = None, dedup: bool = True, words: dict = None) -> BicycleProgram:
    stream = compile_stream(pbc, modules, synth, t_model, eps, words)
    if dedup:
        stream = dedup_stream(stream)
    instructions = []
    for ins in stream:
        if ins.conditioned_on:
            absolute = tuple(len(instructions) + off for off in ins.conditioned_on)
            ins = Instruction(ins.kind, ins.modules, ins.label, ins.op_index, absolute)
        instructions.append(ins)
    return BicycleProgram(modules, instructions, pbc.residual, pbc.stats())


def legality_problems(program: BicycleProgram, shift_names=None) -> list:
    in_module = {target_name(t) for t in in_module_targets()}
    inter = {f"{target_name(a)}|{target_name(b)}" for a, b in inter_module_targets()}
    out = []
    for k, ins in enumerate(program.instructions):
        code_mods = [m for m in ins.modules if m != FACTORY]
        if any(not 0 <= m < program.modules for m in code_mods):
            out.append(f"{k}: module out of range in {ins.modules}")
        if ins.kind == "U" and shift_names is not None and ins.label not in shift_names:
            out.append(f"{k}: {ins.label} is not a basic shift")
        elif ins.kind == "M" and ins.label not in in_module:
            out.append(f"{k}: {ins.label} is not an in-module measurement")
        elif ins.kind == "C":
            if ins.label not in inter:
                out.append(f"{k}: {ins.label} is not an inter-module measurement")
            if len(code_mods) != 2 or abs(code_mods[0] - code_mods[1]) != 1:
                out.append(f"{k}: inter-module measurement between non-adjacent modules {ins.modules}")
        elif ins.kind == "T":
            if ins.label not in T_LABELS:
                out.append(f"{k}: {ins.label} is not a T-injection variant")
            if FACTORY not in ins.modules or code_mods != [program.modules - 1]:
                out.append(f"{k}: T injection must join the factory and the last module")
        elif ins.kind not in CLASSES:
            out.append(f"{k}: unknown instruction kind {ins.kind}")
    return out


# -------------------- dedup --------------------
def dedup_stream(stream):
    """Drops an in-module measurement equal to the previous instruction on its module."""
    last = {}
    for ins in stream:
        if ins.kind == "M":
            (m,) = ins.modules
            prev = last.get(m)
            if prev is not None and prev.kind == "M" and prev.label == ins.label:
                continue
        for m in ins.modules:
            last[m] = ins
        yield ins


def optimize_dedup(program: BicycleProgram) -> BicycleProgram:
    kept = list(dedup_stream(program.instructions))
    log.info("dedup removed %d in-module measurements", len(program.instructions) - len(kept))
    return BicycleProgram(program.modules, kept, program.residual, dict(program.stats))


# -------------------- timing --------------------
class LaneClock:
    """
    As-soon-as-possible timing over per-module lanes. A module waiting for
    a gap longer than zero is charged ceil(gap / tau_I) idles.
    """

    def __init__(self, modules: int, profile):
        self.modules = modules
        self.profile = profile
        self.free = dict.fromkeys(range(modules), 0)
        self.free[FACTORY] = 0
        self.counts = dict.fromkeys(CLASSES, 0)
        self._idle = profile.tau("I")

    def _idles(self, gap: int) -> int:
        return -(-gap // self._idle) if gap > 0 else 0

    def push(self, ins: Instruction) -> int:
        tau = self.profile.tau(ins.kind)
        start = max(self.free[m] for m in ins.modules)
        for m in ins.modules:
            if m != FACTORY:
                self.counts["I"] += self._idles(start - self.free[m])
            self.free[m] = start + tau
        self.counts[ins.kind] += 1
        return start

    @property
    def now(self) -> int:
        return max(self.free.values())

    def finish(self) -> tuple:
        end = self.now
        counts = dict(self.counts)
        for m in range(self.modules):
            counts["I"] += self._idles(end - self.free[m])
        return end, counts


def time_and_census(program: BicycleProgram, profile) -> tuple:
    """(runtime in timesteps, counts per instruction class including idles)."""
    clock = LaneClock(program.modules, profile)
    for ins in program.instructions:
        clock.push(ins)
    return clock.finish()
