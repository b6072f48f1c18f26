import json
import math
import re
from fractions import Fraction

import numpy as np
import pytest

from automorphism import basic_shifts
from compiler import (
    FACTORY,
    PIVOT_MASK,
    UNREACHED,
    BicycleProgram,
    FixedCostSynthesizer,
    Instruction,
    Measurement,
    Pauli,
    PbcProgram,
    Rotation,
    SynthesisTable,
    TableSynthesizer,
    Tableau,
    TCountModel,
    anticommute,
    assign_and_distribute,
    build_synthesis_table,
    compile_program,
    labels_state,
    legality_problems,
    native_measurements,
    native_rotations,
    optimize_dedup,
    parse_angle,
    parse_circuit,
    rotation_kind,
    synthesize_in_module,
    synthesize_small_angle,
    time_and_census,
    to_pbc,
)
from errors import CapacityError, InfeasibleError, MissingProfileError, UnsupportedError, ValidationError
from tables import InstructionProfile, load_factories

H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.diag([1, 1j])
CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


def rot(p: Pauli, angle: float) -> np.ndarray:
    return math.cos(angle / 2) * np.eye(2 ** p.n) + 1j * math.sin(angle / 2) * p.to_matrix()


def same_up_to_phase(a, b) -> bool:
    return abs(abs(np.trace(a.conj().T @ b)) - a.shape[0]) < 1e-8


def gate_matrix(name, n, *qubits):
    def embed(single, q):
        out = np.array([[1]], dtype=complex)
        for k in range(n):
            out = np.kron(out, single if k == q else np.eye(2))
        return out

    if name == "H":
        return embed(H, qubits[0])
    if name == "S":
        return embed(S, qubits[0])
    # two-qubit gates only on adjacent (q, q+1) here
    q = qubits[0]
    two = CX if name == "CX" else CZ
    return np.kron(np.kron(np.eye(2 ** q), two), np.eye(2 ** (n - q - 2)))


# -------------------- Paulis and tableaux --------------------
def test_pauli_products_and_strings():
    x, z = Pauli.from_str("X"), Pauli.from_str("Z")
    assert str(x * z) == "-iY"
    assert str(z * x) == "+iY"
    assert str(Pauli.from_str("-XYZ")) == "-XYZ"
    assert Pauli.from_str("Y").is_hermitian()
    assert np.allclose(Pauli.from_str("Y").to_matrix(), [[0, -1j], [1j, 0]])
    assert not x.commutes(z)
    assert Pauli.from_str("XX").commutes(Pauli.from_str("ZZ"))
    assert Pauli.from_str("IXIZ").weight == 2
    with pytest.raises(ValueError):
        Pauli.from_str("XQ")


@pytest.mark.parametrize("gate,qubits", [("H", (0,)), ("S", (1,)), ("CX", (0,)), ("CZ", (0,))])
def test_gates_match_matrices(gate, qubits):
    n = 2
    args = qubits if gate in ("H", "S") else (qubits[0], qubits[0] + 1)
    tab = Tableau.gate(gate, n, *args)
    u = gate_matrix(gate, n, *qubits)
    for p in Tableau.identity(n).images:
        assert np.allclose(tab.conjugate(p).to_matrix(), u @ p.to_matrix() @ u.conj().T)


def test_tableau_inverse():
    t = Tableau.identity(3)
    for g in [("H", 0), ("CX", 0, 2), ("S", 1), ("CZ", 1, 2), ("H", 2), ("SDG", 0)]:
        t = t.then(Tableau.gate(g[0], 3, *g[1:]))
    assert t.problems() == []
    assert t.then(t.inverse()) == Tableau.identity(3)
    assert t.inverse().then(t) == Tableau.identity(3)


def test_pauli_rotation_tableau():
    z = Pauli.from_str("Z")
    quarter = Tableau.pauli_rotation(z, 1)
    u = rot(z, math.pi / 2)
    x = Pauli.from_str("X")
    assert np.allclose(quarter.conjugate(x).to_matrix(), u @ x.to_matrix() @ u.conj().T)


# -------------------- parsing and PBC --------------------
def test_parse_angle():
    assert parse_angle("pi/4") == pytest.approx(math.pi / 4)
    assert parse_angle("-3*pi/8") == pytest.approx(-3 * math.pi / 8)
    assert parse_angle("pi") == pytest.approx(math.pi)
    assert parse_angle("0.5") == 0.5
    with pytest.raises(ValueError):
        parse_angle("pi/x")


def test_hadamard_moves_z_to_x():
    pbc = to_pbc(parse_circuit("QUBITS 1\nCLIFF H 0\nROT Z 0.3\n"))
    assert len(pbc.ops) == 1
    assert str(pbc.ops[0].pauli) == "+X"
    assert pbc.ops[0].angle == 0.3


def test_no_cliffords_is_identity():
    circ = parse_circuit("ROT XZI pi/8\nROT -YYZ 0.1\nMEAS ZZZ\n")
    pbc = to_pbc(circ)
    assert [op.pauli for op in pbc.ops] == [op.pauli for op in circ.ops]
    assert pbc.residual == Tableau.identity(3)
    assert pbc.stats()["rotations"] == 2


def test_parse_errors(tmp_path):
    with pytest.raises(UnsupportedError):
        parse_circuit("QUBITS 1\nCLIFF T 0\n")
    with pytest.raises(UnsupportedError):
        parse_circuit("SWAP 0 1\n")
    with pytest.raises(ValueError):
        parse_circuit("ROT XX pi/4\nROT XXX pi/4\n")
    (tmp_path / "h.json").write_text(json.dumps({"n": 1, "x_images": ["+Z"], "z_images": ["+X"]}))
    circ = parse_circuit("CLIFF @h.json\nROT Z pi/4\n", base_dir=tmp_path)
    assert str(to_pbc(circ).ops[0].pauli) == "+X"
    (tmp_path / "bad.json").write_text(json.dumps({"n": 1, "x_images": ["+X"], "z_images": ["+X"]}))
    with pytest.raises(ValidationError):
        parse_circuit("CLIFF @bad.json\n", base_dir=tmp_path)


def _random_circuit(rng, n, length):
    lines = [f"QUBITS {n}"]
    for _ in range(length):
        r = rng.integers(4)
        if r == 0:
            lines.append(f"CLIFF H {rng.integers(n)}")
        elif r == 1:
            lines.append(f"CLIFF S {rng.integers(n)}")
        elif r == 2:
            q = int(rng.integers(n - 1))
            lines.append(f"CLIFF CX {q} {q + 1}")
        else:
            letters = "".join(rng.choice(list("IXYZ"), n))
            if set(letters) == {"I"}:
                letters = "Z" + letters[1:]
            sign = "-" if rng.integers(2) else ""
            lines.append(f"ROT {sign}{letters} {rng.uniform(-3, 3)}")
    return "\n".join(lines)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_pbc_matches_dense_unitary(seed):
    rng = np.random.default_rng(seed)
    n = 3
    circ = parse_circuit(_random_circuit(rng, n, 14))
    direct = np.eye(2 ** n, dtype=complex)
    cliff = np.eye(2 ** n, dtype=complex)
    for op, line in zip(circ.ops, _random_circuit(np.random.default_rng(seed), n, 14).splitlines()[1:]):
        if isinstance(op, Rotation):
            direct = rot(op.pauli, op.angle) @ direct
        else:
            _, name, *qs = line.split()
            u = gate_matrix(name, n, int(qs[0]))
            direct = u @ direct
            cliff = u @ cliff
    pbc = to_pbc(circ)
    compiled = np.eye(2 ** n, dtype=complex)
    for op in pbc.ops:
        compiled = rot(op.pauli, op.angle) @ compiled
    assert same_up_to_phase(direct, cliff @ compiled)
    assert len(pbc.ops) == sum(isinstance(op, Rotation) for op in circ.ops)
    for p in Tableau.identity(n).images:
        assert np.allclose(pbc.residual.conjugate(p).to_matrix(), cliff @ p.to_matrix() @ cliff.conj().T)


# -------------------- distribution --------------------
def _pbc(n, ops):
    return PbcProgram(n, ops, Tableau.identity(1))


def _on(n, qubits, letter="Z"):
    chars = ["I"] * n
    for q in qubits:
        chars[q] = letter
    return Pauli.from_str("".join(chars))


def test_single_module_rotation_has_no_links():
    (op,) = assign_and_distribute(_pbc(11, [Rotation(_on(11, [0, 3]), 0.1)]), 1)
    assert (op.lo, op.hi, op.zz_count) == (0, 0, 0)


def test_two_module_measurement_has_one_link():
    (op,) = assign_and_distribute(_pbc(55, [Measurement(_on(55, [22, 33]))]), 5)
    assert (op.lo, op.hi, op.zz_count) == (2, 3, 1)
    assert sorted(op.parts) == [2, 3]
    assert op.parts[2] == (0, 1)


def test_rotations_reach_the_factory_module():
    ops = assign_and_distribute(_pbc(55, [Rotation(_on(55, [23]), 0.1), Rotation(_on(55, range(55), "X"), 0.1)]), 5)
    assert (ops[0].lo, ops[0].hi, ops[0].zz_count) == (2, 4, 2)
    full = ops[1]
    assert full.zz_count == 4
    assert full.zz_rounds == (((0, 1), (2, 3)), ((1, 2), (3, 4)))


def test_capacity():
    with pytest.raises(CapacityError):
        assign_and_distribute(_pbc(23, [Rotation(_on(23, [0]), 0.1)]), 2)


def test_rotation_kinds():
    assert rotation_kind(math.pi / 4) == "pi4"
    assert rotation_kind(-math.pi / 4) == "pi4"
    assert rotation_kind(3 * math.pi / 4) == "pi4"
    assert rotation_kind(math.pi / 2) == "clifford"
    assert rotation_kind(0.0) == "identity"
    assert rotation_kind(2 * math.pi) == "identity"
    assert rotation_kind(0.3) == "small"


# -------------------- small angles --------------------
def test_pi4_fast_path():
    seq = synthesize_small_angle(math.pi / 4)
    assert seq.bases == ["Z"] and seq.t_count == 1 and seq.clifford == []


def test_word_bases():
    seq = synthesize_small_angle(0.1, word="HTHT")
    assert seq.bases == ["Z", "X"]
    assert seq.conditioned_on == [None, 0]


def _word_matrix(word):
    t = np.diag([np.exp(1j * math.pi / 8), np.exp(-1j * math.pi / 8)])
    mats = {"H": H, "T": t, "S": t @ t}
    out = np.eye(2, dtype=complex)
    for ch in word.replace(" ", ""):
        out = out @ mats[ch]
    return out


def _gates_matrix(gates):
    t = np.diag([np.exp(1j * math.pi / 8), np.exp(-1j * math.pi / 8)])
    out = np.eye(2, dtype=complex)
    for g in gates:
        if g == "H":
            m = H
        elif g == "S":
            m = t @ t
        else:
            letter, angle = re.match(r"^([XYZ])\((.+)\)$", g).groups()
            m = rot(Pauli.from_str(letter), parse_angle(angle))
        out = out @ m
    return out


@pytest.mark.parametrize("word", ["HTHT", "THST", "SHTHTTHT", "HTSHTHTSHT", "SHSHTT"])
def test_rewrite_preserves_unitary(word):
    seq = synthesize_small_angle(0.1, word=word)
    assert seq.t_count == word.count("T")
    out = np.eye(2, dtype=complex)
    for b in reversed(seq.bases):
        out = out @ rot(Pauli.from_str(b), math.pi / 4)
    out = out @ _gates_matrix(seq.clifford)
    assert same_up_to_phase(out, _word_matrix(word))


def test_word_errors_and_models():
    with pytest.raises(ValueError):
        synthesize_small_angle(0.1, word="HXT")
    with pytest.raises(ValueError):
        synthesize_small_angle(0.1)
    affine = TCountModel("affine", slope=3.0)
    assert synthesize_small_angle(0.1, model=affine, eps=1e-3).t_count == 30
    assert TCountModel().count() * 184000 == 15542400
    assert TCountModel.from_config({"mode": "fixed"}).per_rotation == Fraction(15542400, 184000)


# -------------------- compiling with a flat synthesizer --------------------
@pytest.fixture
def profile():
    factory = load_factories()["1e-4-gross"]
    return InstructionProfile("gross", 1e-4, {"I": 8, "U": 14, "M": 120, "C": 120}, {}).with_factory(factory)


def test_compile_with_flat_cost(profile):
    pbc = _pbc(22, [Rotation(_on(22, [0, 12]), math.pi / 4), Rotation(_on(22, [1]), -math.pi / 4)])
    program = compile_program(pbc, 2, FixedCostSynthesizer(3))
    assert legality_problems(program) == []
    census = program.census()
    assert census["C"] == 2
    assert census["T"] == 2
    assert census["M"] == 2 * (2 + 2 * 3 + 2)
    runtime, counts = time_and_census(program, profile)
    assert runtime > 0 and counts["T"] == 2
    lines = program.to_jsonl().splitlines()
    assert len(lines) == len(program.instructions)
    assert json.loads(lines[0])["kind"] == "M"


def test_clifford_rotations_are_folded():
    pbc = _pbc(11, [Rotation(_on(11, [0]), math.pi / 2), Rotation(_on(11, [0]), 0.0)])
    assert compile_program(pbc, 1, FixedCostSynthesizer(1)).instructions == []


def test_small_angle_injections_are_chained():
    pbc = _pbc(11, [Rotation(_on(11, [0]), 0.1)])
    program = compile_program(pbc, 1, FixedCostSynthesizer(1), TCountModel("affine", slope=0.0, intercept=3.0), eps=0.5)
    ts = [k for k, ins in enumerate(program.instructions) if ins.kind == "T"]
    assert len(ts) == 3
    assert program.instructions[ts[0]].conditioned_on == ()
    assert program.instructions[ts[1]].conditioned_on == (ts[0],)
    assert program.instructions[ts[2]].modules == (0, FACTORY)


def _t_bases(program):
    return [ins.label[0] for ins in program.instructions if ins.kind == "T"]


def test_small_angle_injections_follow_the_synthesized_word():
    pbc = _pbc(11, [Rotation(_on(11, [0]), 0.1)])
    model = TCountModel("affine", slope=0.0, intercept=4.0)
    program = compile_program(pbc, 1, FixedCostSynthesizer(1), model, eps=0.5)
    assert _t_bases(program) == synthesize_small_angle(0.1, word="HT" * 4).bases
    given = compile_program(pbc, 1, FixedCostSynthesizer(1), model, eps=0.5, words={0: "THST"})
    expected = synthesize_small_angle(0.1, word="THST")
    assert _t_bases(given) == expected.bases
    ts = [ins for ins in given.instructions if ins.kind == "T"]
    assert len(ts) == expected.t_count == 2
    assert legality_problems(given) == []


def test_legality_flags_bad_instructions():
    bad = BicycleProgram(3, [
        Instruction("M", (0,), "X2"),
        Instruction("C", (0, 2), "Z1|Z1"),
        Instruction("T", (0, FACTORY), "Z1"),
        Instruction("U", (1,), "nope"),
    ])
    problems = legality_problems(bad, shift_names={"x"})
    assert len(problems) == 4


# -------------------- dedup and timing --------------------
def test_dedup():
    prog = BicycleProgram(2, [
        Instruction("M", (0,), "X1"),
        Instruction("M", (0,), "X1"),
        Instruction("M", (1,), "X1"),
        Instruction("M", (0,), "X1"),
        Instruction("U", (0,), "x"),
        Instruction("M", (0,), "X1"),
        Instruction("C", (0, 1), "Z1|Z1"),
        Instruction("M", (1,), "X1"),
    ])
    out = optimize_dedup(prog)
    assert [(i.kind, i.modules) for i in out.instructions] == [
        ("M", (0,)), ("M", (1,)), ("U", (0,)), ("M", (0,)), ("C", (0, 1)), ("M", (1,)),
    ]
    assert out.census()["C"] == prog.census()["C"]


def test_timing(profile):
    assert time_and_census(BicycleProgram(1, [Instruction("M", (0,), "X1")]), profile) == (
        120, {"I": 0, "U": 0, "M": 1, "C": 0, "T": 0},
    )
    runtime, counts = time_and_census(BicycleProgram(1, [Instruction("T", (0, FACTORY), "Z1")]), profile)
    assert runtime == 73 + 120 + 1 == 194
    runtime, counts = time_and_census(BicycleProgram(2, []), profile)
    assert runtime == 0 and set(counts.values()) == {0}
    runtime, counts = time_and_census(
        BicycleProgram(2, [Instruction("M", (0,), "X1"), Instruction("C", (0, 1), "Z1|Z1")]), profile
    )
    assert (runtime, counts["I"]) == (240, 15)
    runtime, counts = time_and_census(BicycleProgram(2, [Instruction("M", (0,), "X1")]), profile)
    assert (runtime, counts["I"]) == (120, 15)


def test_missing_profile():
    bare = InstructionProfile("gross", 1e-4, {"I": 8, "U": 14, "M": 120, "C": 120}, {})
    with pytest.raises(MissingProfileError):
        time_and_census(BicycleProgram(1, [Instruction("T", (0, FACTORY), "Z1")]), bare)


# -------------------- synthesis tables --------------------
@pytest.fixture(scope="module")
def gross_natives(gross, gross_basis):
    return native_measurements(gross, gross_basis[1])


@pytest.fixture(scope="module")
def shallow_table(gross, gross_basis):
    return build_synthesis_table(gross, gross_basis[1], max_depth=1)


def test_native_counts(gross_natives):
    assert len(gross_natives) == 540
    assert len(native_rotations(gross_natives)) == 510
    x1 = gross_natives[labels_state(("X1",))]
    assert x1.target == ("X1",) and tuple(x1.delta) == (0, 0)


def test_two_gross_native_counts(two_gross, two_gross_basis):
    natives = native_measurements(two_gross, two_gross_basis[1])
    assert len(natives) == 540
    assert len(native_rotations(natives)) == 510


def test_shallow_search(shallow_table):
    for state in shallow_table.natives:
        assert shallow_table.steps(state) == 0
    state = int(np.flatnonzero(shallow_table.dist == 1)[0])
    seed, rots = shallow_table.path(state)
    assert seed in shallow_table.natives and len(rots) == 1
    cur = seed
    for r in reversed(rots):
        assert anticommute(cur, r)
        cur ^= r
    assert cur == state
    far = int(np.flatnonzero(shallow_table.dist == UNREACHED)[1])
    with pytest.raises(InfeasibleError):
        shallow_table.steps(far)


def test_native_target_is_one_measurement(gross, shallow_table):
    synth = TableSynthesizer(shallow_table, gross)
    out = synthesize_in_module(synth, 0, 0, 0)
    assert [(i.kind, i.label) for i in out] == [("M", "Z1")]


def test_shifted_native_emits_basic_shifts(gross, shallow_table):
    names = {s.name for s in basic_shifts(gross)}
    synth = TableSynthesizer(shallow_table, gross)
    shifted = [nm for nm in shallow_table.natives.values() if tuple(nm.delta) != (0, 0)]
    assert shifted
    for nm in shifted[:20]:
        out = synth.native(0, nm.state, 0)
        assert [i.kind for i in out].count("M") == 1
        assert 2 <= len(out) <= 5
        assert all(i.label in names for i in out if i.kind == "U")
        assert legality_problems(BicycleProgram(1, out), names) == []


def test_depth_one_target_costs_three_measurements(gross, shallow_table):
    synth = TableSynthesizer(shallow_table, gross)
    state = next(int(s) for s in np.flatnonzero(shallow_table.dist == 1) if int(s) & PIVOT_MASK)
    pivot = "IXZY"[(state & 1) + 2 * (state >> 12 & 1)]
    x = (state & 0xFFF) >> 1
    z = (state >> 12) >> 1
    out = synth.emit(0, pivot, x, z)
    assert [i.kind for i in out].count("M") == 3
    short = TableSynthesizer(shallow_table, gross, convention="k+1").emit(0, pivot, x, z)
    assert [i.kind for i in short].count("M") == 2


def test_table_persistence(tmp_path, shallow_table):
    path = tmp_path / "gross.bbs"
    shallow_table.save(path)
    loaded = SynthesisTable.load(path, "gross")
    assert loaded.code_name == "gross"
    assert np.array_equal(loaded.dist, shallow_table.dist)
    assert loaded.natives == shallow_table.natives
    assert loaded.rotations == shallow_table.rotations
    with pytest.raises(ValidationError):
        SynthesisTable.load(path, "two-gross")
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ValidationError):
        SynthesisTable.load(path)


@pytest.mark.slow
def test_full_gross_table_reaches_everything(gross, gross_basis):
    table = build_synthesis_table(gross, gross_basis[1])
    assert int(np.count_nonzero(table.dist != UNREACHED)) == (1 << 24) - 1
