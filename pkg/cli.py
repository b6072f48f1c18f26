from dotenv import load_dotenv
load_dotenv()

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from bbcode import code_from_name, export_alist, export_sparse
from compiler import (
    CLASSES,
    FixedCostSynthesizer,
    SynthesisTable,
    TableSynthesizer,
    TCountModel,
    beta_statistics,
    build_synthesis_table,
    compile_program,
    legality_problems,
    parse_circuit,
    time_and_census,
    to_pbc,
)
from distance import CIRCUIT_DISTANCE_BOUNDS, DistanceProblem, code_distance, export_lp, surgery_distances
from errors import InfeasibleError, MissingProfileError, ValidationError
from estimate import (
    ArchitectureConfig,
    TfimParams,
    cultivation_cost,
    error_budget,
    fit_spectrum,
    largest_architecture,
    load_ansatz,
    qubit_count,
    random_capability,
    spectrum_logical_rate,
    surface_baseline,
    surface_tfim_threshold,
    tfim_census,
    tfim_crossover,
    tfim_failure,
    tfim_instruction_census,
    tfim_table_counts,
    write_series_csv,
)
from logical import validate_basis_properties
from lpu import census_mismatches, code_code_adapter, code_factory_adapter, deform, load_module
from records import RunManifest, connect, save_manifest, update_record_min
from schedule import ConnectivityGraph, color_schedule, export_ilp, report, schedule_memory, validate
from tables import DATA_DIR, OUT_DIR, ROOT, config_value, factory_for, load_config, load_factories, load_profile, load_table, module_sizes, profile_from_rates

log = logging.getLogger("cli")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -------------------- helpers --------------------
def resolve_factory(args, code_name, p):
    if args.factory:
        factories = load_factories(args.data_dir)
        if args.factory not in factories:
            raise UsageError(f"unknown factory {args.factory!r}; choose from {', '.join(factories)}")
        return factories[args.factory]
    return factory_for(code_name, p, args.data_dir)


def synthesizer_for(args, cfg, code, module=None):
    """Table-driven synthesizer when a table file is given, flat cost otherwise."""
    convention = config_value(cfg, "synthesis", "beta_convention")
    if args.table:
        path = Path(args.table)
        if path.exists():
            table = SynthesisTable.load(path, code.name)
        else:
            module = module or load_module(code.name)
            table = build_synthesis_table(code, module.ops)
            path.parent.mkdir(parents=True, exist_ok=True)
            table.save(path)
            print(f"[synthesis] ✅ table built and saved to {path}")
        return TableSynthesizer(table, code, convention), table
    per_target = int(config_value(cfg, "synthesis", "fallback_measurements"))
    log.warning("no synthesis table given, billing %d measurements per module target", per_target)
    return FixedCostSynthesizer(per_target), None


def write_report(args, name, payload: dict, manifest: RunManifest):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    body = json.dumps(payload, indent=2, sort_keys=True, default=str)
    manifest.add_output(name, body)
    doc = dict(payload, manifest=manifest.to_dict())
    path = out / f"{name}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    print(f"[{args.command}] ✅ wrote {path}")
    return path


def write_text(args, name, text):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


# -------------------- commands --------------------
def cmd_build_code(args, cfg, manifest):
    code = code_from_name(args.code)
    write_text(args, f"{code.name}.hx.alist", export_alist(code.hx))
    write_text(args, f"{code.name}.hz.alist", export_alist(code.hz))
    write_text(args, f"{code.name}.checks.txt", export_sparse(code))
    weights = sorted({int(w) for w in np.concatenate([code.hx.sum(axis=1), code.hz.sum(axis=1)])})
    print(f"[build-code] {code.name}: n={code.n}, k={code.k}, check weights {weights}")
    return {"code": code.name, "n": code.n, "k": code.k, "check_weights": weights}


def cmd_basis(args, cfg, manifest):
    module = load_module(args.code)
    rep = validate_basis_properties(module.code, module.basis)
    for line in rep.lines():
        print(f"[basis] {line}")
    if not rep.ok:
        raise ValidationError(f"{args.code} basis fails its properties", rep.lines())
    weights = {label: op.weight for label, op in module.ops.items()}
    return {"code": args.code, "properties": rep.lines(), "weights": weights}


def cmd_lpu(args, cfg, manifest):
    module = load_module(args.code)
    lpu = module.lpu
    problems = census_mismatches(lpu)
    if problems:
        raise ValidationError(f"{args.code} LPU census does not match the reference", problems)
    variant = config_value(cfg, "lpu", "adapter_variant")
    adapter = code_code_adapter(lpu, variant)
    factory = resolve_factory(args, args.code, args.p)
    try:
        factory_adapter = code_factory_adapter(lpu, factory.d_factory)
    except InfeasibleError:
        log.warning("%s: no %d-vertex factory path, counting the folded adapter", args.code, factory.d_factory)
        factory_adapter = code_factory_adapter(lpu, factory.d_factory, allow_fold=True)
    write_text(args, f"{args.code}.lpu_census.txt", lpu.census_table())
    print(f"[lpu] {args.code}: u={lpu.size}, a={adapter.check_qubits}, a'={factory_adapter.check_qubits}")
    return {
        "code": args.code,
        "u": lpu.size,
        "census": lpu.census(),
        "code_code_adapter": adapter.check_qubits,
        "code_factory_adapter": factory_adapter.check_qubits,
        "factory_adapter_folded": factory_adapter.folded,
    }


def cmd_schedule(args, cfg, manifest):
    code = code_from_name(args.code)
    cycles = int(config_value(cfg, f"codes.{args.code}", "cycles"))
    out = {"code": args.code, "cycles": cycles}
    graph = ConnectivityGraph.from_code(code)
    memory = schedule_memory(code)
    problems = validate(graph, memory)
    if problems:
        raise ValidationError("memory schedule is invalid", problems)
    rep = report(graph, memory)
    out["memory"] = {"period": rep.period, "timesteps": rep.cycle_time(cycles)}
    print(f"[schedule] memory: period {rep.period}, {rep.cycle_time(cycles)} timesteps for {cycles} cycles")
    if args.target:
        module = load_module(args.code)
        deformed = deform(module, args.target)
        dgraph = ConnectivityGraph.from_deformed(deformed)
        sched = color_schedule(dgraph, code, int(config_value(cfg, "schedule", "delta_bb")))
        problems = validate(dgraph, sched)
        if problems:
            raise ValidationError(f"schedule for {args.target} is invalid", problems)
        drep = report(dgraph, sched)
        write_text(args, f"{args.code}.{args.target}.schedule.csv", sched.to_csv(dgraph))
        if args.ilp:
            write_text(args, f"{args.code}.{args.target}.schedule.lp", export_ilp(dgraph, t_max=2 * drep.period))
        out["surgery"] = {"target": args.target, "period": drep.period, "per_cycle": drep.serial_period, "timesteps": drep.serial_time(cycles)}
        print(f"[schedule] {args.target}: {drep.serial_period} timesteps per cycle, {drep.serial_time(cycles)} for {cycles} cycles")
    return out


def cmd_distance(args, cfg, manifest):
    module = load_module(args.code)
    code = module.code
    trials = args.trials or int(config_value(cfg, "search", "distance_trials"))
    known = [op.pauli for op in module.ops.values()]
    out = {"code": args.code, "trials": trials, "circuit_bounds": CIRCUIT_DISTANCE_BOUNDS.get(args.code, {})}
    if args.target:
        deformed = deform(module, args.target)
        res = surgery_distances(code, deformed, trials, args.seed, known=known)
        out["surgery"] = dict(res.row(), target=args.target)
        key = f"{args.code}/{args.target}/d_s"
        weight = res.space.weight
    else:
        res = code_distance(code.stabilizer_matrix, trials, args.seed, start=known, name=args.code)
        out["distance"] = {"bound": res.bound_kind, "weight": res.weight}
        key = f"{args.code}/d"
        weight = res.weight
        if args.lp:
            problem = DistanceProblem(code.stabilizer_matrix, module.ops["Z1"].pauli, f"{args.code}/Z1")
            write_text(args, f"{args.code}.Z1.lp", export_lp(problem))
    if not args.no_db:
        conn = connect()
        changed, prev = update_record_min(conn, key, weight, {"trials": trials, "seed": args.seed})
        conn.close()
        if changed and prev is not None:
            print(f"[distance] new lightest witness for {key}: {weight} (was {prev[0]:.0f})")
    print(f"[distance] {key} <= {weight}")
    return out


def cmd_compile(args, cfg, manifest):
    code = code_from_name(args.code)
    path = Path(args.circuit)
    manifest.add_input("circuit", path)
    circuit = parse_circuit(path.read_text(encoding="utf-8"), base_dir=path.parent)
    pbc = to_pbc(circuit)
    modules = args.modules or -(-circuit.n // 11)
    synth, table = synthesizer_for(args, cfg, code)
    t_model = TCountModel.from_config(cfg.get("t_count", {}))
    program = compile_program(pbc, modules, synth, t_model, args.eps)
    problems = legality_problems(program)
    if problems:
        raise ValidationError("compiled program has illegal instructions", problems)
    write_text(args, f"{path.stem}.instructions.jsonl", program.to_jsonl())
    out = {"circuit": str(path), "modules": modules, "pbc": pbc.stats(), "census": program.census()}
    try:
        profile = load_profile(args.code, args.p, args.data_dir).with_factory(resolve_factory(args, args.code, args.p))
        runtime, counts = time_and_census(program, profile)
        out.update(runtime=runtime, counts=counts, failure=error_budget(counts, profile), assumed=profile.assumed_kinds())
    except MissingProfileError as e:
        log.warning("no timing: %s", e)
    if table is not None and args.beta_stats:
        out["beta"] = beta_statistics(table, synth.convention)
    print(f"[compile] {len(program.instructions)} instructions: {program.census()}")
    return out


def cmd_estimate(args, cfg, manifest):
    factory = resolve_factory(args, args.code, args.p)
    arch = largest_architecture(args.code, args.q, factory, args.data_dir)
    profile = load_profile(args.code, args.p, args.data_dir).with_factory(factory)
    out = {
        "code": args.code,
        "p": args.p,
        "factory": factory.name,
        "modules": arch.modules,
        "logical_qubits": arch.n,
        "physical_qubits": qubit_count(arch),
        "durations": {k: profile.tau(k) for k in "IUMCT"},
        "rates": {k: profile.rate(k) for k in "IUMCT"},
        "assumed": profile.assumed_kinds(),
    }
    if factory.approach == "cultivation":
        stage = load_table("cultivation", args.data_dir)["stages"].get("5" if args.code == "two-gross" else "3")
        if stage:
            tau, escape = cultivation_cost(stage["t_cult"], stage["t_escape"], stage["discard_cult"], stage["discard_e2e"])
            out["cultivation"] = {"tau": tau, "escape_discard": escape, "listed_tau": stage["listed_tau"]}
    if args.counts:
        counts = json.loads(Path(args.counts).read_text(encoding="utf-8"))
        manifest.add_input("counts", args.counts)
        out["failure"] = error_budget(counts, profile)
    print(f"[estimate] {args.code} at q={args.q}: {arch.modules} modules, n={arch.n}")
    return out


def cmd_tfim(args, cfg, manifest):
    tcfg = cfg.get("tfim", {})
    params = TfimParams.from_config(tcfg)
    modules = int(tcfg.get("modules", 10))
    target = float(tcfg.get("target", 1e-3))
    data = load_table("tfim", args.data_dir)
    factory = load_factories(args.data_dir)[config_value(cfg, "tfim.factories", args.code)]
    t_model = TCountModel.from_config(cfg.get("t_count", {}))
    counts = tfim_table_counts(args.code, args.data_dir)
    out = {"code": args.code, "p": args.p, "modules": modules}
    if args.recount:
        census = tfim_census(params, modules, t_model, args.eps)
        out["recount"] = census
        counts.update(C=census["C"], T=census["T"])
    if args.table:
        code = code_from_name(args.code)
        synth, _ = synthesizer_for(args, cfg, code)
        profile = profile_from_rates(args.code, args.p, {}, args.data_dir).with_factory(factory)
        derived = tfim_instruction_census(synth, profile, params, modules, t_model, args.eps)
        out["derived"] = derived
        counts = {kind: derived[kind] for kind in CLASSES}
        print(f"[tfim] compiled census: U={derived['U']} M={derived['M']} C={derived['C']} T={derived['T']}")
    out["counts"] = counts
    out["failure"] = tfim_failure(args.code, args.p, counts, args.data_dir)
    listed = data["listed_failure"].get(args.code, {})
    try:
        out["crossover_p"] = tfim_crossover(args.code, target, args.data_dir)
    except InfeasibleError as e:
        log.info("%s", e)
    qubits = qubit_count(ArchitectureConfig(args.code, modules, factory, module_sizes(args.code, args.data_dir)))
    listed_qubits = data.get("listed_qubits", {}).get(args.code)
    if listed_qubits and listed_qubits != qubits:
        log.warning("%s TFIM architecture needs %d qubits by the count formula, the listed figure is %d", args.code, qubits, listed_qubits)
    out["physical_qubits"] = qubits
    out["surface_threshold_p"] = surface_tfim_threshold(7, params.n_l, data["circuit"]["rotations"], counts["T"], target)
    out["listed_failure"] = listed
    print(f"[tfim] {args.code} at p={args.p:g}: failure {out['failure']:.6g}")
    return out


def cmd_capability(args, cfg, manifest):
    code = code_from_name(args.code)
    factory = resolve_factory(args, args.code, args.p)
    arch = largest_architecture(args.code, args.q, factory, args.data_dir)
    profile = load_profile(args.code, args.p, args.data_dir).with_factory(factory)
    synth, _ = synthesizer_for(args, cfg, code)
    rotations = args.rotations or int(config_value(cfg, "search", "capability_rotations"))
    trials = args.trials or int(config_value(cfg, "search", "capability_trials"))
    result = random_capability(arch, synth, profile, rotations, trials, args.seed, args.threads)
    xs, ys = result.series
    write_series_csv(Path(args.out) / f"capability_{args.code}_{args.q}_{args.p:g}.csv", xs, ys)
    surface = surface_baseline(args.q, args.p, factory, result.n_t) if np.isfinite(result.n_t) else None
    print(f"[capability] {args.code} q={args.q} p={args.p:g}: n={arch.n}, N_T ~ {result.n_t:.4g}")
    return {
        "code": args.code,
        "q": args.q,
        "p": args.p,
        "n": arch.n,
        "bicycle": result.row(),
        "surface": surface.__dict__ if surface else None,
    }


def cmd_fit_spectrum(args, cfg, manifest):
    if args.samples:
        manifest.add_input("samples", args.samples)
        rows = np.loadtxt(args.samples, delimiter=",", skiprows=1, ndmin=2)
        fit = fit_spectrum(rows[:, 0], rows[:, 1], rows[:, 2], args.w0, args.K, seed=args.seed)
        out = {"ln_f0": fit.ln_f0, "gamma": fit.gamma, "ln_f0_band": fit.ln_f0_band, "gamma_band": fit.gamma_band}
        if args.N:
            out["rate"] = spectrum_logical_rate(fit.ansatz(args.w0, args.K, args.N), args.p)
    else:
        ansatz = load_ansatz(args.key, args.data_dir)
        out = {"key": args.key, "rate": spectrum_logical_rate(ansatz, args.p)}
    print(f"[fit-spectrum] {out}")
    return out


COMMANDS = {
    "build-code": cmd_build_code,
    "basis": cmd_basis,
    "lpu": cmd_lpu,
    "schedule": cmd_schedule,
    "distance": cmd_distance,
    "compile": cmd_compile,
    "estimate": cmd_estimate,
    "tfim": cmd_tfim,
    "capability": cmd_capability,
    "fit-spectrum": cmd_fit_spectrum,
}


# -------------------- argument parsing --------------------
def build_parser() -> Parser:
    common = Parser(add_help=False)
    common.add_argument("--config", default=str(ROOT / "config.yaml"))
    common.add_argument("--code", choices=["gross", "two-gross"], default=None)
    common.add_argument("--p", type=float, default=None)
    common.add_argument("--factory", default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=OUT_DIR)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--data-dir", default=DATA_DIR)
    common.add_argument("--no-db", action="store_true")

    parser = Parser(prog="cli.py", description="Bicycle architecture compiler and resource estimator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)
    for name in ("build-code", "basis", "lpu"):
        sub.add_parser(name, parents=[common])
    p = sub.add_parser("schedule", parents=[common])
    p.add_argument("--target", default=None)
    p.add_argument("--ilp", action="store_true")
    p = sub.add_parser("distance", parents=[common])
    p.add_argument("--target", default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--lp", action="store_true")
    p = sub.add_parser("compile", parents=[common])
    p.add_argument("circuit")
    p.add_argument("--modules", type=int, default=None)
    p.add_argument("--table", default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--beta-stats", action="store_true")
    p = sub.add_parser("estimate", parents=[common])
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--counts", default=None)
    p = sub.add_parser("tfim", parents=[common])
    p.add_argument("--recount", action="store_true")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--table", default=None, help="synthesis table; compiles the TFIM circuit for the census")
    p = sub.add_parser("capability", parents=[common])
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--table", default=None)
    p.add_argument("--rotations", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p = sub.add_parser("fit-spectrum", parents=[common])
    p.add_argument("--samples", default=None, help="CSV of weight,failures,shots")
    p.add_argument("--key", default="gross/idle")
    p.add_argument("--w0", type=int, default=5)
    p.add_argument("--K", type=int, default=24)
    p.add_argument("--N", type=int, default=None)
    return parser


def apply_defaults(args, cfg):
    args.code = args.code or config_value(cfg, "defaults", "code")
    args.p = args.p if args.p is not None else float(config_value(cfg, "defaults", "p"))
    args.seed = args.seed if args.seed is not None else int(config_value(cfg, "defaults", "seed"))


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config)
        logging.basicConfig(
            level=getattr(logging, str(cfg.get("app", {}).get("log_level", "INFO")).upper(), logging.INFO),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        apply_defaults(args, cfg)
        manifest = RunManifest(args.command, args.config, args.seed)
        manifest.add_input("config", args.config)
        payload = COMMANDS[args.command](args, cfg, manifest)
        write_report(args, args.command.replace("-", "_"), payload, manifest)
        if not args.no_db:
            conn = connect()
            save_manifest(conn, manifest)
            conn.close()
        return 0
    except (ValidationError, InfeasibleError) as e:
        print(f"[error] ❌ {e}")
        return 2
    except (UsageError, KeyError, ValueError, FileNotFoundError) as e:
        print(f"[usage] ❌ {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
