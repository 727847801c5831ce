"""Seeded Monte Carlo experiment orchestration and result persistence.

Every trial's random stream is derived from (base_seed, sweep index, trial
index, purpose tag) through a counter-based seed sequence, so runs are fully
reproducible, order-independent, and paired across methods: all methods at a
given (sweep value, trial) see the same channel, frame, and noise.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
import zlib
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from . import detector, metrics
from .channel import (
    ArrayGeometry,
    ChannelRealization,
    PathSet,
    bernoulli_gaussian_channel,
    clustered_channel,
)
from .detector import SolverOptions, SolveTrace
from .manifold import random_stiefel
from .metrics import TrialMetrics, theoretical_objective_bound
from .signal import (
    TransmitFrame,
    build_constellation,
    build_frame,
    concentration_statistic,
    header_length,
    snr_to_noise_variance,
    synthesize_received,
)

__all__ = [
    "SystemConfig",
    "TrialRecord",
    "Scenario",
    "DEFAULT_CONCENTRATION_C",
    "run_sweep",
    "run_concentration_experiment",
    "run_convergence_experiment",
    "iterations_to_level",
    "emit_report",
    "read_records",
    "concentration_tail_bound",
    "concentration_crossover",
]

KNOWN_METHODS = ("l3", "l4", "rgd", "pilot")

# Curve constants fitted to the concentration tail for QPSK frames.
DEFAULT_CONCENTRATION_C = {4: 0.416, 8: 0.464}

# Carrier frequency (GHz) for the log-distance fading model.
_FADING_FC_GHZ = 28.0


@dataclass(frozen=True)
class SystemConfig:
    """One simulated scenario: array, frame, channel, noise, and solver knobs.

    ``snr_db`` maps to the per-entry noise variance K / (SNR * T) under
    identity fading and sum(G) / (T * SNR) under log-distance fading; set
    ``sigma_z2`` to bypass the mapping with an explicit variance.  ``theta``
    drives the Bernoulli-Gaussian model and ``n_paths`` the clustered model.
    """

    k_users: int = 8
    t_len: int = 240
    n_h: int = 256
    n_v: int = 1
    snr_db: float = 20.0
    theta: float = 0.1
    n_paths: int = 5
    channel_model: str = "clustered"
    constellation: str = "qpsk"
    fading_model: str = "identity"
    power: Union[float, Tuple[float, ...]] = 1.0
    trials: int = 100
    base_seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    t_pilot: int = 6
    pilot_lambda: float = 2.0
    sigma_z2: Optional[float] = None

    def __post_init__(self) -> None:
        if min(self.k_users, self.t_len, self.n_h, self.n_v) < 1:
            raise ValueError("dimensions must be positive")
        if self.channel_model not in ("clustered", "bernoulli_gaussian"):
            raise ValueError(f"unknown channel model {self.channel_model!r}")
        if self.fading_model not in ("identity", "log_distance"):
            raise ValueError(f"unknown fading model {self.fading_model!r}")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not 1 <= self.t_pilot < self.t_len:
            raise ValueError("t_pilot must lie in [1, t_len)")
        c = build_constellation(self.constellation)
        hlen = header_length(self.k_users, c.size)
        if self.t_len <= 1 + hlen:
            raise ValueError("t_len too short for reference and header symbols")

    @property
    def m(self) -> int:
        return self.n_h * self.n_v

    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.n_h, self.n_v)

    def power_vector(self) -> np.ndarray:
        p = np.asarray(self.power, dtype=np.float64)
        if p.ndim == 0:
            p = np.full(self.k_users, float(p))
        if p.shape != (self.k_users,) or not np.all(p > 0):
            raise ValueError("power must be positive (scalar or length-K vector)")
        return p

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        d = dict(d)
        d.pop("sweep", None)
        solver = d.pop("solver", None)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "power" in d and isinstance(d["power"], list):
            d["power"] = tuple(d["power"])
        cfg = cls(**d)
        if solver is not None:
            cfg = replace(cfg, solver=SolverOptions(**solver))
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["power"], tuple):
            d["power"] = list(d["power"])
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _stream(base_seed: int, *tags: Union[int, str]) -> np.random.Generator:
    """Counter-based derived stream: independent of call order across trials."""
    words = [int(base_seed) & 0xFFFFFFFF]
    for t in tags:
        if isinstance(t, str):
            words.append(zlib.crc32(t.encode()))
        else:
            words.append(int(t) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))


def _stream_seed(base_seed: int, *tags: Union[int, str]) -> int:
    words = [int(base_seed) & 0xFFFFFFFF]
    for t in tags:
        words.append(zlib.crc32(t.encode()) if isinstance(t, str) else int(t) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1)[0])


@dataclass(frozen=True)
class Scenario:
    """Everything all methods share within one trial."""

    channel: ChannelRealization
    frame: TransmitFrame
    g_diag: np.ndarray
    p_diag: np.ndarray
    sigma_z2: float
    y_bar: np.ndarray
    theta_used: float

    @property
    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.y_bar).tobytes()).hexdigest()[:12]


def _draw_fading(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.fading_model == "identity":
        return np.ones(cfg.k_users)
    # Log-distance path loss at 28 GHz with complex-normal shadowing; the
    # real part of the shadowing term is used as the dB perturbation.
    d = rng.uniform(20.0, 200.0, cfg.k_users)
    chi = (rng.standard_normal(cfg.k_users) + 1j * rng.standard_normal(cfg.k_users))
    chi_db = np.sqrt(4.2 / 2.0) * chi.real
    g_db = -32.4 - 18.5 * np.log10(d) - 20.0 * np.log10(_FADING_FC_GHZ) + chi_db
    return 10.0 ** (g_db / 10.0)


def _noise_variance(cfg: SystemConfig, g_diag: np.ndarray) -> float:
    if cfg.sigma_z2 is not None:
        return float(cfg.sigma_z2)
    if cfg.fading_model == "identity":
        return snr_to_noise_variance(cfg.snr_db, cfg.k_users, cfg.t_len)
    snr_lin = 10.0 ** (cfg.snr_db / 10.0)
    return float(g_diag.sum()) / (cfg.t_len * snr_lin)


def _draw_channel(cfg: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    if cfg.channel_model == "bernoulli_gaussian":
        return bernoulli_gaussian_channel(cfg.m, cfg.k_users, cfg.theta, rng)
    paths = [PathSet(cfg.n_paths) for _ in range(cfg.k_users)]
    return clustered_channel(paths, cfg.geometry, rng)


def build_scenario(cfg: SystemConfig, rng: np.random.Generator) -> Scenario:
    """Draw fading, channel, frame, and noise for one trial."""
    c = build_constellation(cfg.constellation)
    g = _draw_fading(cfg, rng)
    p = cfg.power_vector()
    sigma_z2 = _noise_variance(cfg, g)
    channel = _draw_channel(cfg, rng)
    frame = build_frame(cfg.k_users, cfg.t_len, c, rng)
    received = synthesize_received(channel, frame, g, p, sigma_z2, rng)
    theta_used = cfg.theta if cfg.channel_model == "bernoulli_gaussian" else channel.theta_effective
    return Scenario(
        channel=channel,
        frame=frame,
        g_diag=g,
        p_diag=p,
        sigma_z2=sigma_z2,
        y_bar=received.y_bar,
        theta_used=theta_used,
    )


@dataclass(frozen=True)
class TrialRecord:
    """One (method, sweep value, trial) outcome, flat enough to serialize."""

    fingerprint: str
    sweep_param: str
    sweep_value: float
    method: str
    trial: int
    seed: int
    scenario_digest: str
    metrics: Optional[TrialMetrics]
    iters: int
    stop_reason: str
    final_eta: float
    error: Optional[str] = None

    def to_json_dict(self) -> dict:
        d = {
            "fingerprint": self.fingerprint,
            "sweep_param": self.sweep_param,
            "sweep_value": self.sweep_value,
            "method": self.method,
            "trial": self.trial,
            "seed": self.seed,
            "scenario_digest": self.scenario_digest,
            "metrics": None,
            "iters": self.iters,
            "stop_reason": self.stop_reason,
            "final_eta": self.final_eta,
            "error": self.error,
        }
        if self.metrics is not None:
            m = asdict(self.metrics)
            m.pop("wall_time")  # excluded: timings would break bit-reproducibility
            d["metrics"] = m
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        d = json.loads(line)
        m = d.pop("metrics")
        rec_metrics = TrialMetrics(**m) if m is not None else None
        return cls(metrics=rec_metrics, **d)


def _blind_metrics(
    cfg: SystemConfig,
    scenario: Scenario,
    result: detector.DetectionResult,
    elapsed: float,
) -> TrialMetrics:
    frame = scenario.frame
    start = frame.payload_start
    ser = metrics.symbol_error_rate(
        result.symbol_indices[:, start:], frame.symbol_indices[:, start:]
    )
    ber = metrics.bit_error_rate(result.bits[:, start:], frame.payload_bits)
    inv_snr = scenario.sigma_z2 / scenario.g_diag
    _, upper = theoretical_objective_bound(cfg.m, cfg.k_users, scenario.theta_used, inv_snr)
    return TrialMetrics(
        evm=metrics.evm(result.x_hat, frame.x),
        ser=ser,
        ber=ber,
        rate_blind=metrics.achievable_rate_blind(result.x_hat, frame.x, cfg.t_len),
        rate_training=None,
        normalized_objective=result.trace.final_objective / upper,
        iters=result.trace.iters_run,
        wall_time=elapsed,
    )


def _run_blind_method(
    cfg: SystemConfig, scenario: Scenario, method: str, rng: np.random.Generator
) -> Tuple[TrialMetrics, SolveTrace]:
    c = build_constellation(cfg.constellation)
    opts = cfg.solver
    if method == "l3":
        opts = replace(opts, p_exponent=3)
        solver = detector.solve
    elif method == "l4":
        opts = replace(opts, p_exponent=4)
        solver = detector.solve
    elif method == "rgd":
        opts = replace(opts, p_exponent=3)
        solver = detector.riemannian_gd_baseline
    else:
        raise ValueError(f"unknown blind method {method!r}")
    t0 = time.perf_counter()
    result = detector.detect(
        scenario.y_bar, scenario.g_diag, scenario.frame.meta, c, opts, rng, solver=solver
    )
    elapsed = time.perf_counter() - t0
    return _blind_metrics(cfg, scenario, result, elapsed), result.trace


def _run_pilot_method(
    cfg: SystemConfig, scenario: Scenario, rng: np.random.Generator
) -> TrialMetrics:
    c = build_constellation(cfg.constellation)
    frame = scenario.frame
    # Training phase: random unit-power pilot symbols with their own noise.
    # The 1/sqrt(T) frame scaling is a data-concentration device and does not
    # apply to pilots; unit symbol power keeps the l1 weight on a sane scale.
    idx = rng.integers(0, c.size, size=(cfg.k_users, cfg.t_pilot))
    x_pilot = c.points[idx] * np.sqrt(scenario.p_diag)[:, np.newaxis]
    noise = (
        rng.standard_normal((cfg.m, cfg.t_pilot))
        + 1j * rng.standard_normal((cfg.m, cfg.t_pilot))
    ) * np.sqrt(scenario.sigma_z2 / 2.0)
    y_train = (scenario.channel.h_bar * np.sqrt(scenario.g_diag)[np.newaxis, :]) @ x_pilot + noise
    t0 = time.perf_counter()
    x_hat = detector.pilot_zf_baseline(
        y_train, x_pilot, scenario.y_bar, scenario.g_diag, cfg.pilot_lambda
    )
    elapsed = time.perf_counter() - t0
    demod = detector.demodulate(x_hat, c)
    start = frame.payload_start
    return TrialMetrics(
        evm=metrics.evm(x_hat, frame.x),
        ser=metrics.symbol_error_rate(
            demod.indices[:, start:], frame.symbol_indices[:, start:]
        ),
        ber=metrics.bit_error_rate(demod.bits[:, start:], frame.payload_bits),
        rate_blind=None,
        rate_training=metrics.achievable_rate_training(
            x_hat, frame.x, cfg.t_len, cfg.t_pilot
        ),
        normalized_objective=None,
        iters=0,
        wall_time=elapsed,
    )


def run_sweep(
    cfg: SystemConfig,
    sweep_param: str,
    sweep_values: Sequence[float],
    methods: Sequence[str] = ("l3",),
) -> Iterator[TrialRecord]:
    """Monte Carlo sweep over one config parameter, one record per (method, value, trial).

    Per-trial solver errors are captured in the record rather than raised;
    the stream is deterministic given the config and base seed.
    """
    for m in methods:
        if m not in KNOWN_METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {KNOWN_METHODS}")
    if sweep_param not in SystemConfig.__dataclass_fields__:
        raise ValueError(f"unknown sweep parameter {sweep_param!r}")
    fingerprint = cfg.fingerprint()
    for si, value in enumerate(sweep_values):
        cfg_i = replace(cfg, **{sweep_param: value})
        for trial in range(cfg_i.trials):
            scenario = build_scenario(cfg_i, _stream(cfg.base_seed, si, trial, "scenario"))
            digest = scenario.digest
            for method in methods:
                seed = _stream_seed(cfg.base_seed, si, trial, method)
                rng = _stream(cfg.base_seed, si, trial, method)
                try:
                    if method == "pilot":
                        tm = _run_pilot_method(cfg_i, scenario, rng)
                        iters, stop_reason, final_eta = 0, "obj_tol", 0.0
                    else:
                        tm, trace = _run_blind_method(cfg_i, scenario, method, rng)
                        iters, stop_reason, final_eta = (
                            trace.iters_run,
                            trace.stop_reason,
                            trace.final_eta,
                        )
                    record = TrialRecord(
                        fingerprint=fingerprint,
                        sweep_param=sweep_param,
                        sweep_value=float(value),
                        method=method,
                        trial=trial,
                        seed=seed,
                        scenario_digest=digest,
                        metrics=tm,
                        iters=iters,
                        stop_reason=stop_reason,
                        final_eta=final_eta,
                    )
                except (detector.DegenerateGradientError, ValueError) as exc:
                    record = TrialRecord(
                        fingerprint=fingerprint,
                        sweep_param=sweep_param,
                        sweep_value=float(value),
                        method=method,
                        trial=trial,
                        seed=seed,
                        scenario_digest=digest,
                        metrics=None,
                        iters=0,
                        stop_reason="max_iters",
                        final_eta=float("nan"),
                        error=f"{type(exc).__name__}: {exc}",
                    )
                yield record


def concentration_tail_bound(
    t_len: int, k_users: int, threshold: float, c_const: float, s_infinity: float = 1.0
) -> float:
    """Tail bound on Pr[||XX^H - I||_F / sqrt(K) > threshold].

    The exponential concentration statement bounds the tail at level
    (1/ln 2) * S_inf^2 * max(delta, delta^2); inverting that level for the
    requested threshold gives the delta that enters the exponent
    2 exp(-(delta sqrt(T) / C - sqrt(K))^2).
    """
    tau = threshold * np.log(2.0) / s_infinity**2
    delta = tau if tau <= 1.0 else np.sqrt(tau)
    return float(2.0 * np.exp(-((delta * np.sqrt(t_len) / c_const - np.sqrt(k_users)) ** 2)))


def concentration_crossover(
    k_users: int, threshold: float, c_const: float, s_infinity: float = 1.0
) -> float:
    """Smallest T at which the tail bound drops below 1 (becomes informative)."""
    tau = threshold * np.log(2.0) / s_infinity**2
    delta = tau if tau <= 1.0 else np.sqrt(tau)
    return float((c_const * (np.sqrt(k_users) + np.sqrt(np.log(2.0))) / delta) ** 2)


def run_concentration_experiment(
    k_list: Sequence[int],
    t_list: Sequence[int],
    delta_sq: float,
    trials: int,
    constellation: str = "qpsk",
    c_by_k: Optional[Dict[int, float]] = None,
    base_seed: int = 0,
) -> List[dict]:
    """Empirical vs. theoretical Gram-concentration tail over i.i.d. frames.

    Counts the frequency of ||XX^H - I||_F / sqrt(K) exceeding sqrt(delta_sq)
    for i.i.d. constellation matrices normalized by 1/sqrt(T), next to the
    exponential tail bound with the supplied (or default) curve constant C.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials per point")
    c = build_constellation(constellation)
    c_by_k = {**DEFAULT_CONCENTRATION_C, **(c_by_k or {})}
    threshold = math.sqrt(delta_sq)
    rows = []
    for k in k_list:
        if k not in c_by_k:
            raise ValueError(f"no curve constant supplied for K={k}")
        c_const = c_by_k[k]
        for t in t_list:
            rng = _stream(base_seed, "concentration", k, t)
            exceed = 0
            for _ in range(trials):
                x = c.points[rng.integers(0, c.size, size=(k, t))] / np.sqrt(t)
                exceed += concentration_statistic(x) > threshold
            rows.append(
                {
                    "k_users": k,
                    "t_len": t,
                    "trials": trials,
                    "empirical": exceed / trials,
                    "theoretical": concentration_tail_bound(t, k, threshold, c_const, c.s_infinity),
                    "crossover_t": concentration_crossover(k, threshold, c_const, c.s_infinity),
                    "c_const": c_const,
                }
            )
    return rows


def run_convergence_experiment(
    variants: Dict[str, SystemConfig],
    trials: int = 30,
    base_seed: int = 0,
) -> Dict[str, dict]:
    """Normalized per-iteration objective traces for each config variant.

    Data is drawn with an exactly orthonormal frame (X^H on the Stiefel
    manifold) and a Bernoulli-Gaussian channel so the expected-objective
    upper envelope is the correct normalizer; traces are objective divided
    by that envelope.  Trials share one derived stream per trial index
    across variants, so equal-shape variants see identical draws (and a
    smaller theta sees a nested channel support): comparisons are paired.
    """
    out: Dict[str, dict] = {}
    for name, cfg in variants.items():
        if cfg.channel_model != "bernoulli_gaussian":
            raise ValueError("convergence experiment expects the bernoulli_gaussian model")
        sigma = _noise_variance(cfg, np.ones(cfg.k_users))
        _, upper = theoretical_objective_bound(
            cfg.m, cfg.k_users, cfg.theta, np.full(cfg.k_users, sigma)
        )
        traces = []
        for trial in range(trials):
            rng = _stream(base_seed, "convergence", trial)
            x = random_stiefel(cfg.t_len, cfg.k_users, rng).a.conj().T
            channel = bernoulli_gaussian_channel(cfg.m, cfg.k_users, cfg.theta, rng)
            noise = (
                rng.standard_normal((cfg.m, cfg.t_len))
                + 1j * rng.standard_normal((cfg.m, cfg.t_len))
            ) * np.sqrt(sigma / 2.0)
            y_bar = channel.h_bar @ x + noise
            _, trace = detector.solve(y_bar, np.ones(cfg.k_users), cfg.solver, rng)
            traces.append(trace.objective_per_iter / upper)
        out[name] = {"upper_bound": upper, "traces": traces, "sigma_z2": sigma}
    return out


def iterations_to_level(trace: np.ndarray, level: float) -> float:
    """First iteration index at which a trace reaches ``level``; inf if it never does."""
    above = np.flatnonzero(np.asarray(trace) >= level)
    return float(above[0]) if above.size else float("inf")


def read_records(path) -> List[TrialRecord]:
    """Load TrialRecords back from a JSON-lines file."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(TrialRecord.from_json(line))
    return records


_SUMMARY_FIELDS = ("evm", "ser", "ber", "rate_blind", "rate_training", "normalized_objective")


def _ci95_halfwidth(values: np.ndarray) -> float:
    n = values.size
    if n < 2:
        return 0.0
    return float(stats.t.ppf(0.975, n - 1) * values.std(ddof=1) / math.sqrt(n))


def emit_report(records: Iterable[TrialRecord], out_dir) -> List[str]:
    """Persist records and their aggregates; returns the written paths.

    Writes ``trials.jsonl`` (one record per line), ``summary.csv`` (mean,
    median, and 95% t-interval half-width per sweep point and method), and
    one ``plot_<metric>_<method>.dat`` whitespace-delimited file per method
    for the headline metrics.
    """
    records = list(records)
    os.makedirs(out_dir, exist_ok=True)
    written = []

    jsonl_path = os.path.join(out_dir, "trials.jsonl")
    with open(jsonl_path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")
    written.append(jsonl_path)

    groups: Dict[Tuple[str, str, float], List[TrialRecord]] = {}
    for rec in records:
        if rec.error is None and rec.metrics is not None:
            groups.setdefault((rec.method, rec.sweep_param, rec.sweep_value), []).append(rec)

    header = ["method", "sweep_param", "sweep_value", "n", "n_errors"]
    for f in _SUMMARY_FIELDS:
        header += [f"{f}_mean", f"{f}_median", f"{f}_ci95"]
    header += ["iters_mean"]

    n_errors: Dict[Tuple[str, str, float], int] = {}
    for rec in records:
        if rec.error is not None:
            key = (rec.method, rec.sweep_param, rec.sweep_value)
            n_errors[key] = n_errors.get(key, 0) + 1

    summary_path = os.path.join(out_dir, "summary.csv")
    rows_by_method: Dict[str, List[Tuple[float, float, float]]] = {}
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for key in sorted(groups, key=lambda k: (k[0], k[1], k[2])):
            method, param, value = key
            recs = groups[key]
            row: List[object] = [method, param, repr(value), len(recs), n_errors.get(key, 0)]
            for f in _SUMMARY_FIELDS:
                vals = np.array(
                    [getattr(r.metrics, f) for r in recs if getattr(r.metrics, f) is not None],
                    dtype=np.float64,
                )
                if vals.size:
                    row += [repr(float(vals.mean())), repr(float(np.median(vals))), repr(_ci95_halfwidth(vals))]
                else:
                    row += ["", "", ""]
            iters = np.array([r.metrics.iters for r in recs], dtype=np.float64)
            row.append(repr(float(iters.mean())))
            writer.writerow(row)
            evm_vals = np.array([r.metrics.evm for r in recs], dtype=np.float64)
            rows_by_method.setdefault(method, []).append(
                (value, float(evm_vals.mean()), _ci95_halfwidth(evm_vals))
            )
    written.append(summary_path)

    for method, rows in sorted(rows_by_method.items()):
        path = os.path.join(out_dir, f"plot_evm_{method}.dat")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# sweep_value mean_evm ci95_halfwidth\n")
            for value, mean, ci in sorted(rows):
                fh.write(f"{value!r} {mean!r} {ci!r}\n")
        written.append(path)
    return written
