"""
Resource estimates for the bicycle architecture: qubit counts, first-order
error budgets, random-circuit capability, the surface-code baseline, the
TFIM workload, cultivation costs and the failure-spectrum ansatz.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import logsumexp
from scipy.stats import binom, linregress

from compiler import (
    CLASSES,
    QUBITS_PER_MODULE,
    InputCircuit,
    LaneClock,
    Pauli,
    PbcProgram,
    Rotation,
    TCountModel,
    Tableau,
    assign_and_distribute,
    compile_program,
    compile_stream,
    dedup_stream,
    time_and_census,
    to_pbc,
)
from errors import CapacityError, InfeasibleError
from tables import FactoryProfile, ModuleSizes, load_factories, load_table, module_sizes, profile_from_rates, rate_entry

log = logging.getLogger(__name__)

FAILURE_TARGET = 1 / 3


# ---------- architecture + qubit counts ----------

@dataclass(frozen=True)
class ArchitectureConfig:
    code_name: str
    modules: int
    factory: FactoryProfile
    sizes: ModuleSizes

    def __post_init__(self):
        if self.modules < 1:
            raise CapacityError(f"an architecture needs at least one module, got {self.modules}")

    @property
    def p(self) -> float:
        return self.factory.p

    @property
    def n(self) -> int:
        return QUBITS_PER_MODULE * self.modules


def qubit_count(config: ArchitectureConfig) -> int:
    s = config.sizes
    return config.modules * (s.code + s.lpu + s.adapter) - s.adapter + config.factory.adapter + config.factory.qubits


def largest_architecture(code_name: str, budget: int, factory: FactoryProfile, data_dir=None) -> ArchitectureConfig:
    """Most modules whose total physical qubit count stays within budget."""
    sizes = module_sizes(code_name, data_dir)
    per_module = sizes.code + sizes.lpu + sizes.adapter
    fixed = -sizes.adapter + factory.adapter + factory.qubits
    modules = (budget - fixed) // per_module
    if modules < 1:
        raise CapacityError(f"{budget} qubits cannot hold one {code_name} module and the {factory.name} factory")
    return ArchitectureConfig(code_name, int(modules), factory, sizes)


# ---------- error budget ----------

def error_budget(counts: dict, profile) -> float:
    """Sum of N_j P_j over instruction classes; classes with zero count need no rate."""
    total = 0.0
    for kind, n in counts.items():
        if n:
            total += n * profile.rate(kind)
    return total


# ---------- random-circuit capability ----------

def random_pauli(n: int, rng) -> Pauli:
    while True:
        x = rng.integers(0, 2, n)
        z = rng.integers(0, 2, n)
        if x.any() or z.any():
            return Pauli.from_vector(np.concatenate([x, z]))


def random_rotations(n: int, count: int, rng) -> PbcProgram:
    ops = [Rotation(random_pauli(n, rng), math.pi / 4) for _ in range(count)]
    return PbcProgram(n, ops, Tableau.identity(n))


def cumulative_failure(pbc: PbcProgram, modules: int, synth, profile) -> tuple:
    """
    (rotation counts, cumulative failure probability, runtime). Each point
    bills every instruction so far plus the idles up to the current time.
    """
    clock = LaneClock(modules, profile)
    xs, ys = [], []
    current = None

    def snapshot():
        _, counts = clock.finish()
        xs.append(len(xs) + 1)
        ys.append(error_budget(counts, profile))

    for ins in dedup_stream(compile_stream(pbc, modules, synth)):
        if current is not None and ins.op_index != current:
            snapshot()
        current = ins.op_index
        clock.push(ins)
    if current is not None:
        snapshot()
    runtime, _ = clock.finish()
    return np.array(xs, dtype=float), np.array(ys), runtime


def failure_fit(xs, ys) -> float:
    """Rotation count where the least-squares line through the points meets 1/3."""
    if len(xs) < 2:
        raise InfeasibleError("capability fit needs at least two points")
    fit = linregress(xs, ys)
    if fit.slope <= 0:
        log.warning("failure does not grow with circuit size, capability is unbounded")
        return math.inf
    return float((FAILURE_TARGET - fit.intercept) / fit.slope)


@dataclass
class CapabilityResult:
    n_t: float
    n_t_std: float
    timesteps_per_t: float
    per_trial: list = field(default_factory=list)
    series: tuple = ()

    def row(self) -> dict:
        return {"N_T": self.n_t, "N_T_std": self.n_t_std, "timesteps_per_T": self.timesteps_per_t, "trials": len(self.per_trial)}


def _capability_trial(config, synth, profile, max_rotations, seed):
    rng = np.random.default_rng(seed)
    pbc = random_rotations(config.n, max_rotations, rng)
    xs, ys, runtime = cumulative_failure(pbc, config.modules, synth, profile)
    return failure_fit(xs, ys), runtime / max_rotations, (xs, ys)


def random_capability(config: ArchitectureConfig, synth, profile, max_rotations: int = 200, trials: int = 1, seed: int = 0, workers: int = 1) -> CapabilityResult:
    """
    Compiles random pi/4 rotations on every logical qubit, extrapolates the
    cumulative failure linearly and reports where it crosses 1/3.
    """
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(trials)]
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_capability_trial, config, synth, profile, max_rotations, s) for s in seeds]
            results = [f.result() for f in futures]
    else:
        results = [_capability_trial(config, synth, profile, max_rotations, s) for s in seeds]

    n_ts = np.array([r[0] for r in results])
    per_t = np.array([r[1] for r in results])
    result = CapabilityResult(
        float(n_ts.mean()),
        float(n_ts.std()),
        float(per_t.mean()),
        [(float(a), float(b)) for a, b in zip(n_ts, per_t)],
        results[0][2],
    )
    log.info("%s x%d at p=%g: N_T ~ %.4g, %.1f timesteps/T", config.code_name, config.modules, config.p, result.n_t, result.timesteps_per_t)
    return result


def write_series_csv(path, xs, ys, header="rotations,failure"):
    np.savetxt(path, np.column_stack([xs, ys]), delimiter=",", header=header, comments="")


# ---------- surface code baseline ----------

@dataclass(frozen=True)
class SurfacePoint:
    d: int
    n: int
    n_t: float
    timesteps_per_t: int


def surface_logical_rate(p: float, d: int) -> float:
    return 0.03 * (p / 0.01) ** (d / 2)


def surface_capability(q: int, p: float, d: int, factory: FactoryProfile) -> SurfacePoint:
    n = (q - factory.qubits) // (4 * d * d)
    n_t = FAILURE_TARGET / (2 * n * surface_logical_rate(p, d) * d) if n > 0 else 0.0
    return SurfacePoint(d, int(n), n_t, factory.tau_bar + 6 * d)


def surface_baseline(q: int, p: float, factory: FactoryProfile, target_n_t: float, distances=range(3, 41, 2)) -> SurfacePoint:
    """Distance whose capability lies closest to target_n_t on a log scale."""
    points = [surface_capability(q, p, d, factory) for d in distances]
    points = [pt for pt in points if pt.n > 0]
    if not points:
        raise InfeasibleError(f"{q} qubits hold no surface-code patch beside the {factory.name} factory")
    return min(points, key=lambda pt: abs(math.log(pt.n_t) - math.log(target_n_t)))


def surface_tfim_threshold(d: int, n: int, rotations: int, t_count: int, target: float = 1e-3) -> float:
    """Largest p with P_1 d (2 n N_R + N_T - N_R) <= target."""
    k = 2 * n * rotations + t_count - rotations
    return 0.01 * (target / (0.03 * d * k)) ** (2 / d)


# ---------- TFIM workload ----------

@dataclass(frozen=True)
class TfimParams:
    n_l: int = 100
    t: float = 20.0
    delta: float = 0.25
    j: float = 1.0
    g: float = 1.0

    @property
    def side(self) -> int:
        side = math.isqrt(self.n_l)
        if side * side != self.n_l:
            raise ValueError(f"n_L={self.n_l} is not a square grid")
        return side

    @property
    def steps(self) -> int:
        steps = round(self.t / self.delta)
        if abs(steps * self.delta - self.t) > 1e-9 * max(1.0, self.t):
            raise ValueError(f"t={self.t} is not a multiple of delta={self.delta}")
        return steps

    @classmethod
    def from_config(cls, cfg: dict) -> "TfimParams":
        return cls(int(cfg.get("n_L", 100)), float(cfg.get("t", 20)), float(cfg.get("delta", 0.25)),
                   float(cfg.get("J", 1.0)), float(cfg.get("g", 1.0)))


def suzuki_weights() -> list:
    gamma = 1 / (4 - 4 ** (1 / 3))
    return [gamma, gamma, 1 - 4 * gamma, gamma, gamma]


def grid_edges(side: int) -> list:
    edges = []
    for r in range(side):
        for c in range(side):
            q = side * r + c
            if c + 1 < side:
                edges.append((q, q + 1))
            if r + 1 < side:
                edges.append((q, q + side))
    return edges


def tfim_circuit(params: TfimParams = TfimParams()) -> InputCircuit:
    """
    Fourth-order product formula for H = -J sum ZZ - g sum X on an open
    square grid. Every step is five second-order blocks, each a half ZZ
    layer, a full X layer and another half ZZ layer.
    """
    n = params.n_l
    edges = grid_edges(params.side)
    zz = [Pauli.single(n, a, "Z") * Pauli.single(n, b, "Z") for a, b in edges]
    xs = [Pauli.single(n, q, "X") for q in range(n)]
    ops = []
    for _ in range(params.steps):
        for w in suzuki_weights():
            tau = w * params.delta
            half = [Rotation(p, params.j * tau) for p in zz]
            ops += half
            ops += [Rotation(p, 2 * params.g * tau) for p in xs]
            ops += half
    log.debug("tfim: %d rotations on %d qubits", len(ops), n)
    return InputCircuit(n, ops)


def tfim_census(params: TfimParams = TfimParams(), modules: int = 10, t_model: TCountModel = None, eps: float = None) -> dict:
    """Rotation, link (C) and T counts of the TFIM circuit distributed over modules."""
    t_model = t_model or TCountModel()
    pbc = to_pbc(tfim_circuit(params))
    links = sum(op.zz_count for op in assign_and_distribute(pbc, modules))
    rotations = len(pbc.ops)
    per = t_model.count(eps)
    t_count = per * rotations if t_model.mode == "fixed" else math.ceil(per) * rotations
    return {"rotations": rotations, "C": links, "T": int(t_count)}


def tfim_table_counts(code_name: str, data_dir=None) -> dict:
    """Stored census with U in instructions; the table lists one U per conjugation pair."""
    data = load_table("tfim", data_dir)
    counts = dict(data["counts"][code_name])
    counts["U"] *= int(data.get("u_per_entry", 1))
    return counts


def tfim_instruction_census(synth, profile, params: TfimParams = TfimParams(), modules: int = 10, t_model: TCountModel = None, eps: float = None) -> dict:
    """
    Instruction counts of the compiled and deduplicated TFIM program, with
    idles from the lane clock. Every Trotter step is the same op sequence,
    so one and two steps are compiled and the second step's increment is
    repeated for the rest.
    """
    steps = params.steps
    runs = []
    for k in (1, min(2, steps)):
        small = replace(params, t=k * params.delta)
        pbc = to_pbc(tfim_circuit(small))
        program = compile_program(pbc, modules, synth, t_model, eps)
        runtime, counts = time_and_census(program, profile)
        runs.append((runtime, counts, len(pbc.ops)))
    (rt1, c1, n1), (rt2, c2, n2) = runs
    if steps == 1:
        return {"rotations": n1, "runtime": rt1, **c1}
    out = {kind: c1[kind] + (steps - 1) * (c2[kind] - c1[kind]) for kind in c1}
    out["rotations"] = n1 + (steps - 1) * (n2 - n1)
    out["runtime"] = rt1 + (steps - 1) * (rt2 - rt1)
    log.info("tfim: %d rotations compiled to U=%d M=%d C=%d T=%d", out["rotations"], out["U"], out["M"], out["C"], out["T"])
    return out


def tfim_failure(code_name: str, p: float, counts: dict = None, data_dir=None) -> float:
    """Budget of the TFIM census with the factory error waived (P_T = P_C)."""
    data = load_table("tfim", data_dir)
    counts = counts or tfim_table_counts(code_name, data_dir)
    counts = {kind: n for kind, n in counts.items() if kind in CLASSES}
    rates = rate_entry(data["rates"][code_name], p, f"tfim rates for {code_name}")
    factory = next(f for f in load_factories(data_dir).values() if f.code_name == code_name)
    profile = profile_from_rates(code_name, p, rates, data_dir).with_factory(factory, waive_factory_error=True)
    return error_budget(counts, profile)


def tfim_crossover(code_name: str = "gross", target: float = 1e-3, data_dir=None) -> float:
    """Physical error rate where the TFIM failure crosses target, from a power law through the bracketing pair."""
    data = load_table("tfim", data_dir)
    points = sorted((float(k), tfim_failure(code_name, float(k), data_dir=data_dir)) for k in data["rates"][code_name])
    for (p_lo, f_lo), (p_hi, f_hi) in zip(points, points[1:]):
        if f_lo <= target <= f_hi:
            b = math.log(f_hi / f_lo) / math.log(p_hi / p_lo)
            return p_lo * (target / f_lo) ** (1 / b)
    raise InfeasibleError(f"TFIM failure on {code_name} never crosses {target:g} over the listed rates")


# ---------- cultivation ----------

def cultivation_cost(t_cult: float, t_escape: float, discard_cult: float, discard_e2e: float) -> tuple:
    """(mean timesteps per accepted state, escape-stage discard rate).

    The escape discard rate is kept to two decimals and each repetition
    factor 1/(1 - discard) to three significant figures.
    """
    for name, value in (("discard_cult", discard_cult), ("discard_e2e", discard_e2e)):
        if not 0 <= value < 1:
            raise ValueError(f"{name}={value} is outside [0, 1)")
    if discard_e2e < discard_cult:
        raise ValueError("end-to-end discard rate is below the cultivation-stage rate")
    p_escape = round((discard_e2e - discard_cult) / (1 - discard_cult), 2)
    if p_escape >= 1:
        raise ValueError(f"escape discard rate rounds to {p_escape}")
    repeat_cult = float(f"{1 / (1 - discard_cult):.3g}")
    repeat_escape = float(f"{1 / (1 - p_escape):.3g}")
    tau = repeat_cult * t_cult + repeat_escape * t_escape
    return round(tau), p_escape


# ---------- failure spectrum ----------

@dataclass(frozen=True)
class SpectrumAnsatz:
    ln_f0: float
    gamma: float
    w0: int
    K: int
    N: int

    @property
    def a(self) -> float:
        return 1 - 2.0 ** (-self.K)

    def log_f(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        out = np.full(w.shape, -np.inf)
        ok = w >= self.w0
        if not np.isfinite(self.ln_f0) or not ok.any():
            return out
        log_x = self.ln_f0 - math.log(self.a) + self.gamma * np.log(w[ok] / self.w0)
        x = np.exp(np.minimum(log_x, 700.0))
        with np.errstate(divide="ignore"):
            out[ok] = math.log(self.a) + np.where(log_x < -30, log_x, np.log(-np.expm1(-x)))
        return out

    def f(self, w) -> np.ndarray:
        return np.exp(self.log_f(w))


def load_ansatz(key: str, data_dir=None) -> SpectrumAnsatz:
    row = load_table("ansatz_fit_params", data_dir)["fits"][key]
    return SpectrumAnsatz(row["ln_f0"], row["gamma"], row["w0"], row["K"], row["N"])


def spectrum_logical_rate(ansatz: SpectrumAnsatz, p: float, truncation: int = None) -> float:
    """
    Logical failure at physical rate p: faults on N locations with
    probability q = p/15 each, weighted by f(w). Summed in log space.
    """
    if not np.isfinite(ansatz.ln_f0):
        return 0.0
    q = p / 15
    top = ansatz.N if truncation is None else min(ansatz.N, truncation)
    if top < ansatz.w0:
        return 0.0
    w = np.arange(ansatz.w0, top + 1)
    terms = ansatz.log_f(w) + binom.logpmf(w, ansatz.N, q)
    return float(np.exp(logsumexp(terms)))


@dataclass
class SpectrumFit:
    ln_f0: float
    gamma: float
    ln_f0_band: tuple
    gamma_band: tuple
    samples: int

    def ansatz(self, w0: int, K: int, N: int) -> SpectrumAnsatz:
        return SpectrumAnsatz(self.ln_f0, self.gamma, w0, K, N)


def _fit_once(w, k, shots, w0, K):
    f_hat = k / shots
    if not (k > 0).any():
        raise InfeasibleError("no failures observed at any weight")
    a = 1 - 2.0 ** (-K)

    def model(ww, ln_f0, gamma):
        return SpectrumAnsatz(ln_f0, gamma, w0, K, 0).f(ww)

    seen = f_hat > 0
    if seen.sum() >= 2:
        gamma0, ln0 = np.polyfit(np.log(w[seen] / w0), np.log(f_hat[seen] / a), 1)
    else:
        gamma0, ln0 = 1.0, float(np.log(f_hat[seen][0] / a))
    sigma = np.sqrt(np.maximum(f_hat * (1 - f_hat), 1.0 / shots) / shots)
    (ln_f0, gamma), _ = curve_fit(model, w, f_hat, p0=(ln0, gamma0), sigma=sigma, absolute_sigma=True, maxfev=10000)
    return float(ln_f0), float(gamma)


def fit_spectrum(weights, failures, shots, w0: int, K: int, bootstrap: int = 200, seed: int = 0) -> SpectrumFit:
    """
    Chi-squared fit of (ln f0, gamma) to observed failure fractions, with
    16-84 percentile bands from binomial resampling of the counts.
    """
    w = np.asarray(weights, dtype=float)
    k = np.asarray(failures, dtype=float)
    n = np.broadcast_to(np.asarray(shots, dtype=float), w.shape)
    if len(np.unique(w)) < 3:
        raise ValueError("fit needs at least three distinct weights")
    try:
        ln_f0, gamma = _fit_once(w, k, n, w0, K)
    except RuntimeError as e:
        raise InfeasibleError(f"spectrum fit did not converge: {e}") from e

    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(bootstrap):
        resampled = rng.binomial(n.astype(np.int64), k / n).astype(float)
        try:
            draws.append(_fit_once(w, resampled, n, w0, K))
        except (RuntimeError, InfeasibleError):
            continue
    if draws:
        arr = np.array(draws)
        ln_band = tuple(np.percentile(arr[:, 0], [16, 84]))
        g_band = tuple(np.percentile(arr[:, 1], [16, 84]))
    else:
        ln_band, g_band = (ln_f0, ln_f0), (gamma, gamma)
    log.info("spectrum fit: ln f0 = %.3f, gamma = %.3f (%d bootstrap draws)", ln_f0, gamma, len(draws))
    return SpectrumFit(ln_f0, gamma, ln_band, g_band, len(draws))


# ---------- failure table ----------

def failure_table_configs(data_dir=None) -> list:
    """Largest architecture for each bicycle row of the failure table, paired with the row."""
    factories = load_factories(data_dir)
    out = []
    for row in load_table("failure_table", data_dir)["bicycle"]:
        cfg = largest_architecture(row["code"], row["q"], factories[row["factory"]], data_dir)
        out.append((row, cfg))
    return out
