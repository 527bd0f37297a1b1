"""Configuration, orchestration and CSV persistence for protocol runs.

Everything is deterministic: a config resolves to a canonical JSON form
whose sha256 is embedded in every emitted CSV, and re-running the same
config reproduces the output files byte for byte.  CSV is the only data
output format (UTF-8, comma separated, floats in scientific notation
with 17 significant digits).
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .basis import SpinBasis, StateVector, coherent_state
from .dynamics import CycleRecord, PropagationConfig, QuenchSchedule, run_cycle
from .equilibrium import build_equilibrium, von_neumann_entropy
from .errors import ConfigError
from .observables import (
    branch_masses,
    delta_information,
    dissipated_energy,
    energy_distribution,
    equilibrium_jx_distribution,
    equilibrium_jx_expectation,
    jx_eigenbasis,
    time_average,
    total_variation,
)
from .spectral import DecompositionCache, gap_scan

CACHE_DIR_ENV = "LMGQUENCH_CACHE_DIR"


@dataclass(frozen=True)
class ExperimentConfig:
    """One reproducible experiment: physical parameters plus numerics."""

    n: int = 500
    mu: float = 0.5
    lambda0: float = 3.5
    lambda1: float = 0.5
    t_r: float = 9.0e4
    time_units: str = "tau_s"            # "tau_s" | "absolute"
    tau_q_ratios: tuple[float, ...] = (7200.0,)
    gap_grid_points: int = 201
    gap_refine: bool = True
    spectrum_grid_points: int = 41
    method: str = "cheby"
    magnus_order: int = 4
    step_tau_s: float = 0.01             # ramp step as a fraction of tau_s
    step_absolute: float | None = None   # overrides step_tau_s when set
    norm_tolerance: float = 1.0e-6
    sample_stride_tau_s: float = 0.1
    plateau_samples: int = 2048
    degeneracy_tolerance: float | None = None  # absolute; None -> 1e-8 * range
    relaxation_band: tuple[float, ...] = ()    # extra t_r values for the band
    out_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ConfigError(f"n must be an even particle count >= 2, got {self.n}")
        if not -1.0 <= self.mu <= 1.0:
            raise ConfigError(f"mu must lie in [-1, 1], got {self.mu}")
        if self.lambda0 <= 0 or self.lambda1 <= 0:
            raise ConfigError("lambda0 and lambda1 must be positive")
        if self.t_r <= 0:
            raise ConfigError("t_r must be positive")
        if self.time_units not in ("tau_s", "absolute"):
            raise ConfigError(f"time_units must be tau_s|absolute, got {self.time_units}")
        if not self.tau_q_ratios or any(r <= 0 for r in self.tau_q_ratios):
            raise ConfigError("tau_q_ratios must be a non-empty list of positive ratios")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        object.__setattr__(self, "tau_q_ratios", tuple(float(r) for r in self.tau_q_ratios))
        object.__setattr__(self, "relaxation_band",
                           tuple(float(v) for v in self.relaxation_band))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tau_q_ratios"] = list(self.tau_q_ratios)
        d["relaxation_band"] = list(self.relaxation_band)
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def write_csv(path: str, columns: list[tuple[str, list]], config_hash: str):
    """Atomic CSV write; first line carries version + config hash."""
    names = [name for name, _ in columns]
    rows = list(zip(*(vals for _, vals in columns))) if columns and len(columns[0][1]) else []
    text = [f"# lmgquench v{__version__} config_sha256={config_hash}",
            ",".join(names)]
    text.extend(",".join(_format_cell(v) for v in row) for row in rows)
    payload = "\n".join(text) + "\n"
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path: str) -> dict[str, list[str]]:
    """Read back one of our CSVs as raw string columns."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header = lines[0].split(",")
    cols = {name: [] for name in header}
    for ln in lines[1:]:
        for name, cell in zip(header, ln.split(",")):
            cols[name].append(cell)
    return cols


# ---------------------------------------------------------------------------
# Shared run machinery
# ---------------------------------------------------------------------------

def default_cache(config: ExperimentConfig) -> DecompositionCache:
    return DecompositionCache(directory=os.environ.get(CACHE_DIR_ENV))


def resolve_tau_s(config: ExperimentConfig, basis: SpinBasis) -> float:
    lo = min(config.lambda0, config.lambda1)
    hi = max(config.lambda0, config.lambda1)
    if lo == hi:  # null quench: the scan interval degenerates to one point
        from .spectral import _sector_eigenvalues
        gap = min(float(np.diff(_sector_eigenvalues(basis, lo, w)).min())
                  for w in (0, 1))
        return 1.0 / gap
    scan = gap_scan(basis, lo, hi, config.gap_grid_points, refine=config.gap_refine)
    return scan.tau_s


def build_schedule(config: ExperimentConfig, tau_s: float, ratio: float,
                   t_r: float | None = None) -> QuenchSchedule:
    t_r_val = config.t_r if t_r is None else t_r
    if config.time_units == "tau_s":
        t_r_val = t_r_val * tau_s
    return QuenchSchedule(lambda0=config.lambda0, lambda1=config.lambda1,
                          t_r=t_r_val, tau_q=ratio * tau_s)


def propagation_config(config: ExperimentConfig, tau_s: float) -> PropagationConfig:
    step = config.step_absolute if config.step_absolute else config.step_tau_s * tau_s
    return PropagationConfig(step=step, method=config.method,
                             magnus_order=config.magnus_order,
                             norm_tolerance=config.norm_tolerance,
                             sample_stride=config.sample_stride_tau_s * tau_s)


@dataclass
class CycleOutcome:
    """Everything a cycle run produces, ready for CSV emission and asserts."""

    config: ExperimentConfig
    tau_q_ratio: float
    tau_s: float
    record: CycleRecord
    summary: dict
    energy_initial: object
    energy_final: object
    jx_initial: object
    jx_final: object


def run_cycle_experiment(config: ExperimentConfig, ratio: float,
                         cache: DecompositionCache | None = None,
                         tau_s: float | None = None,
                         t_r: float | None = None) -> CycleOutcome:
    """Run one closed cycle and derive every figure-grade quantity."""
    basis = SpinBasis.for_particles(config.n)
    if cache is None:
        cache = default_cache(config)
    if tau_s is None:
        tau_s = resolve_tau_s(config, basis)
    schedule = build_schedule(config, tau_s, ratio, t_r=t_r)
    prop = propagation_config(config, tau_s)
    psi0 = coherent_state(basis, config.mu)
    record = run_cycle(psi0, schedule, prop, cache,
                       plateau_samples=config.plateau_samples)

    dec0 = cache.get(basis, config.lambda0)
    dec1 = cache.get(basis, config.lambda1)
    jxb = jx_eigenbasis(basis)
    tol = config.degeneracy_tolerance
    ens0 = build_equilibrium(record.boundary_states["relaxed0"], dec0, tol)
    ens1 = build_equilibrium(record.boundary_states["relaxed1"], dec1, tol)
    ens_f = build_equilibrium(record.boundary_states["final"], dec0, tol)
    s0, s1 = von_neumann_entropy(ens0), von_neumann_entropy(ens1)

    e_init = energy_distribution(record.boundary_states["relaxed0"], dec0)
    e_fin = energy_distribution(record.boundary_states["final"], dec0)
    jx_init = equilibrium_jx_distribution(ens0, dec0, jxb)
    jx_fin = equilibrium_jx_distribution(ens_f, dec0, jxb)
    dis = dissipated_energy(record, dec0)
    final_stream = record.segments["relax2"]
    jx_stream = time_average(final_stream.times, final_stream.jx)
    bn0, bp0 = branch_masses(jx_init)
    bnf, bpf = branch_masses(jx_fin)

    summary = {
        "n": config.n, "mu": config.mu,
        "lambda0": config.lambda0, "lambda1": config.lambda1,
        "tau_s": tau_s, "t_r": schedule.t_r, "tau_q": schedule.tau_q,
        "tau_q_ratio": ratio,
        "delta_s": s1 - s0, "s_initial": s0, "s_lambda1": s1,
        "e_initial": dis.e_initial, "e_final": dis.e_final,
        "e_dis": dis.e_dis, "e_dis_ratio": dis.ratio,
        "tv_energy": total_variation(e_init, e_fin),
        "tv_jx": total_variation(jx_init, jx_fin),
        "delta_i_h": delta_information(e_init, e_fin),
        "delta_i_jx": delta_information(jx_init, jx_fin),
        "jx_eq_initial": equilibrium_jx_expectation(ens0, dec0),
        "jx_eq_final": equilibrium_jx_expectation(ens_f, dec0),
        "jx_final_mean": jx_stream.mean,
        "jx_final_lo": jx_stream.lo, "jx_final_hi": jx_stream.hi,
        "branch_neg_initial": bn0, "branch_pos_initial": bp0,
        "branch_neg_final": bnf, "branch_pos_final": bpf,
        "max_norm_dev": record.max_norm_dev(),
        "parity_drift": record.parity_drift(),
    }
    return CycleOutcome(config=config, tau_q_ratio=ratio, tau_s=tau_s,
                        record=record, summary=summary,
                        energy_initial=e_init, energy_final=e_fin,
                        jx_initial=jx_init, jx_final=jx_fin)


SUMMARY_COLUMNS = (
    "n", "mu", "lambda0", "lambda1", "tau_s", "t_r", "tau_q", "tau_q_ratio",
    "delta_s", "s_initial", "s_lambda1", "e_initial", "e_final", "e_dis",
    "e_dis_ratio", "tv_energy", "tv_jx", "delta_i_h", "delta_i_jx",
    "jx_eq_initial", "jx_eq_final", "jx_final_mean", "jx_final_lo",
    "jx_final_hi", "jx_band_lo", "jx_band_hi",
    "branch_neg_initial", "branch_pos_initial", "branch_neg_final",
    "branch_pos_final", "max_norm_dev", "parity_drift",
)


def cycle_dir(config: ExperimentConfig, ratio: float) -> str:
    return os.path.join(config.out_dir, f"cycle_tq{ratio:g}")


def write_cycle_outputs(outcome: CycleOutcome,
                        band_values: tuple[float, float] | None = None) -> str:
    """Emit jx_trace / distributions / summary CSVs for one cycle.

    Partial outputs are removed if emission fails midway.
    """
    config = outcome.config
    chash = config.sha256()
    path = cycle_dir(config, outcome.tau_q_ratio)
    os.makedirs(path, exist_ok=True)
    try:
        rec = outcome.record
        times, lams, segs, jx, nd = [], [], [], [], []
        for name in ("relax0", "forward", "relax1", "backward", "relax2"):
            tr = rec.segments[name]
            times.extend(tr.times)
            lams.extend(tr.lambdas)
            segs.extend([name] * len(tr.times))
            jx.extend(tr.jx)
            nd.extend(tr.norm_dev)
        write_csv(os.path.join(path, "jx_trace.csv"),
                  [("t", times), ("lambda", lams), ("segment", segs),
                   ("jx", jx), ("norm_dev", nd)], chash)

        e0, ef = outcome.energy_initial, outcome.energy_final
        write_csv(os.path.join(path, "energy_distributions.csv"),
                  [("sector", list(e0.sectors)), ("index", list(e0.indices)),
                   ("energy", list(e0.values)),
                   ("p_initial", list(e0.probabilities)),
                   ("p_final", list(ef.probabilities))], chash)

        j0, jf = outcome.jx_initial, outcome.jx_final
        write_csv(os.path.join(path, "jx_distributions.csv"),
                  [("jx", list(j0.values)),
                   ("p_initial", list(j0.probabilities)),
                   ("p_final", list(jf.probabilities))], chash)

        summary = dict(outcome.summary)
        if band_values is None:
            summary["jx_band_lo"] = summary["jx_eq_final"]
            summary["jx_band_hi"] = summary["jx_eq_final"]
        else:
            summary["jx_band_lo"], summary["jx_band_hi"] = band_values
        write_csv(os.path.join(path, "summary.csv"),
                  [(k, [summary[k]]) for k in SUMMARY_COLUMNS], chash)
    except BaseException:
        shutil.rmtree(path, ignore_errors=True)
        raise
    return path


def run_cycle_command(config: ExperimentConfig, ratio: float,
                      cache: DecompositionCache | None = None) -> str:
    """One cycle plus (optionally) the t_r band sweep; writes its directory."""
    if cache is None:
        cache = default_cache(config)
    basis = SpinBasis.for_particles(config.n)
    tau_s = resolve_tau_s(config, basis)
    outcome = run_cycle_experiment(config, ratio, cache, tau_s)
    band = None
    if config.relaxation_band:
        finals = [outcome.summary["jx_eq_final"]]
        for t_r in config.relaxation_band:
            variant = run_cycle_experiment(config, ratio, cache, tau_s, t_r=t_r)
            finals.append(variant.summary["jx_eq_final"])
        band = (min(finals), max(finals))
    return write_cycle_outputs(outcome, band)


def run_sweep(config: ExperimentConfig,
              cache: DecompositionCache | None = None) -> tuple[str, list]:
    """Run every configured tau_q ratio (worker pool) and aggregate Fig.4 data.

    Per-ratio failures are recorded and the sweep continues.  The sweep CSV
    is assembled from the per-cycle summary files, never recomputed.
    """
    if cache is None:
        cache = default_cache(config)
    basis = SpinBasis.for_particles(config.n)
    tau_s = resolve_tau_s(config, basis)
    failures = []

    def one(ratio):
        outcome = run_cycle_experiment(config, ratio, cache, tau_s)
        write_cycle_outputs(outcome)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(one, r): r for r in config.tau_q_ratios}
            for fut, ratio in futures.items():
                try:
                    fut.result()
                except Exception as exc:
                    failures.append((ratio, f"{type(exc).__name__}: {exc}"))
    else:
        for ratio in config.tau_q_ratios:
            try:
                one(ratio)
            except Exception as exc:
                failures.append((ratio, f"{type(exc).__name__}: {exc}"))

    rows = {k: [] for k in ("tau_q_ratio", "delta_s", "e_dis_ratio",
                            "delta_i_h", "delta_i_jx")}
    for ratio in sorted(set(config.tau_q_ratios)):
        path = os.path.join(cycle_dir(config, ratio), "summary.csv")
        if not os.path.exists(path):
            continue
        cols = read_csv(path)
        for k in rows:
            rows[k].append(float(cols[k][0]))
    sweep_path = os.path.join(config.out_dir, "sweep.csv")
    write_csv(sweep_path, [(k, v) for k, v in rows.items()], config.sha256())
    if failures:
        write_csv(os.path.join(config.out_dir, "failures.csv"),
                  [("tau_q_ratio", [f[0] for f in failures]),
                   ("error", [f[1] for f in failures])], config.sha256())
    return sweep_path, failures


def run_spectrum(config: ExperimentConfig,
                 cache: DecompositionCache | None = None) -> str:
    """Eigenvalues vs Lambda per parity sector plus the E_c line."""
    if cache is None:
        cache = default_cache(config)
    basis = SpinBasis.for_particles(config.n)
    lo = min(config.lambda0, config.lambda1)
    hi = max(config.lambda0, config.lambda1)
    lams, sectors, indices, energies, ecs = [], [], [], [], []
    for lam in np.linspace(lo, hi, config.spectrum_grid_points):
        dec = cache.get(basis, float(lam))
        for name in ("even", "odd"):
            s = dec.sectors[name]
            lams.extend([float(lam)] * s.size)
            sectors.extend([name] * s.size)
            indices.extend(range(s.size))
            energies.extend(s.eigenvalues)
            ecs.extend([dec.critical_energy] * s.size)
    path = os.path.join(config.out_dir, "spectrum.csv")
    write_csv(path, [("lambda", lams), ("sector", sectors), ("index", indices),
                     ("energy", energies), ("e_c", ecs)], config.sha256())
    return path


def run_gaps(config: ExperimentConfig) -> tuple[str, str, float]:
    """Gap scan CSVs; returns (gaps_path, summary_path, tau_s)."""
    basis = SpinBasis.for_particles(config.n)
    lo = min(config.lambda0, config.lambda1)
    hi = max(config.lambda0, config.lambda1)
    scan = gap_scan(basis, lo, hi, config.gap_grid_points, refine=config.gap_refine)
    chash = config.sha256()
    gaps_path = os.path.join(config.out_dir, "gaps.csv")
    min_even = scan.min_gap_per_lambda("even")
    min_odd = scan.min_gap_per_lambda("odd")
    write_csv(gaps_path,
              [("lambda", list(scan.lambdas)),
               ("min_gap_even", list(min_even)),
               ("min_gap_odd", list(min_odd)),
               ("min_gap", list(np.minimum(min_even, min_odd)))], chash)
    summary_path = os.path.join(config.out_dir, "gap_summary.csv")
    write_csv(summary_path,
              [("delta_eff", [scan.delta_eff]), ("tau_s", [scan.tau_s]),
               ("lambda_at_min", [scan.argmin_lambda]),
               ("sector_at_min", [scan.argmin_sector]),
               ("level_index", [scan.argmin_index]),
               ("grid_points", [config.gap_grid_points]),
               ("grid_delta_eff", [scan.grid_delta_eff])], chash)
    return gaps_path, summary_path, scan.tau_s


MANIFEST_KINDS = {
    "spectrum.csv": ("spectrum", ["lambda", "sector", "index", "energy", "e_c"]),
    "gaps.csv": ("gaps", ["lambda", "min_gap_even", "min_gap_odd", "min_gap"]),
    "gap_summary.csv": ("gap_summary", ["delta_eff", "tau_s", "lambda_at_min",
                                        "sector_at_min", "level_index",
                                        "grid_points", "grid_delta_eff"]),
    "sweep.csv": ("sweep", ["tau_q_ratio", "delta_s", "e_dis_ratio",
                            "delta_i_h", "delta_i_jx"]),
    "jx_trace.csv": ("cycle_trace", ["t", "lambda", "segment", "jx", "norm_dev"]),
    "energy_distributions.csv": ("cycle_energy_dist",
                                 ["sector", "index", "energy", "p_initial", "p_final"]),
    "jx_distributions.csv": ("cycle_jx_dist", ["jx", "p_initial", "p_final"]),
    "summary.csv": ("cycle_summary", list(SUMMARY_COLUMNS)),
}


def manifest(out_dir: str) -> list[dict]:
    """CSV manifest of a results directory, for the figure renderer."""
    entries = []
    for root, _dirs, files in os.walk(out_dir):
        for fname in sorted(files):
            if fname in MANIFEST_KINDS:
                kind, columns = MANIFEST_KINDS[fname]
                entries.append({"path": os.path.join(root, fname),
                                "kind": kind, "columns": columns})
    entries.sort(key=lambda e: e["path"])
    return entries
