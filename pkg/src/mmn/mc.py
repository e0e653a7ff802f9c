"""Monte Carlo studies: estimator bias/MSE, null critical values, test power.

Twelve scalar test statistics are derived from the skewness measures at
maximum-likelihood estimates (scalar measures directly, vector measures
through their coordinate sum and maximum).  Critical values come from
fitting the exponential-mixing model to standard multivariate normal
samples; power is the rejection frequency under a skewed alternative.

Replicates draw from independent substreams ``[seed, tag, index]`` of one
master seed, so results are bit-identical for a given configuration
regardless of worker count.  Replicates whose fit raises are recorded as
failures and excluded; a study aborts if more than one percent fail.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .density import DensityWorkspace
from .em import FitConfig, fit_best
from .errors import MmnError, StudyUnstable
from .mixing import ExponentialMixing
from .params import MmnParams
from .skewness import SkewnessReport, population_report

#: statistic order used in tables and CSV output
STATISTICS = (
    "mardia", "srivastava", "s_max", "s_sum", "b_max", "b_sum",
    "q_star", "t_max", "t_sum", "s_i", "s_c_max", "s_c_sum",
)

#: statistics tested one-sided (upper tail only); the rest are two-sided
ONE_SIDED = frozenset({"mardia", "srivastava", "q_star", "s_i"})

_TAG_NULL, _TAG_POWER, _TAG_BIAS = 0, 1, 2

#: studies abort when the fit-failure fraction exceeds this
FAILURE_LIMIT = 0.01


def report_to_vector(report: SkewnessReport) -> np.ndarray:
    """The twelve statistics in :data:`STATISTICS` order."""
    s = report.scalarized
    return np.array([
        report.mardia, report.srivastava, s["s_max"], s["s_sum"],
        s["b_max"], s["b_sum"], report.bbq_qstar, s["t_max"], s["t_sum"],
        report.isogai_si, s["s_c_max"], s["s_c_sum"],
    ])


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: the MMN_THREADS variable overrides the argument."""
    env = os.environ.get("MMN_THREADS")
    if env:
        return max(1, int(env))
    if threads is None:
        return os.cpu_count() or 1
    return max(1, int(threads))


@dataclass
class McConfig:
    """Shared configuration of the null and power studies."""

    replicates: int
    dim: int
    seed: int
    sample_size: int = 100
    alpha: float = 0.05
    statistics: tuple = STATISTICS
    fit: FitConfig = field(default_factory=FitConfig)
    threads: int | None = None

    def __post_init__(self):
        if self.replicates < 100:
            raise ValueError("replicates must be at least 100")
        if not 2 <= self.dim <= 8:
            raise ValueError("dim must be between 2 and 8")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class CriticalTable:
    """Empirical null quantiles per statistic plus study metadata."""

    statistics: tuple
    lower_2_5: np.ndarray
    upper_2_5: np.ndarray
    upper_5: np.ndarray
    sample_size: int
    dim: int
    replicates: int
    seed: int
    failures: int

    def to_dict(self) -> dict:
        return {
            "metadata": {
                "sample_size": self.sample_size, "dim": self.dim,
                "replicates": self.replicates, "seed": self.seed,
                "failures": self.failures,
            },
            "quantiles": {
                name: {
                    "lower_2.5": float(self.lower_2_5[i]),
                    "upper_2.5": float(self.upper_2_5[i]),
                    "upper_5": float(self.upper_5[i]),
                }
                for i, name in enumerate(self.statistics)
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CriticalTable":
        meta = d["metadata"]
        names = tuple(d["quantiles"].keys())
        q = d["quantiles"]
        return cls(
            statistics=names,
            lower_2_5=np.array([q[n]["lower_2.5"] for n in names]),
            upper_2_5=np.array([q[n]["upper_2.5"] for n in names]),
            upper_5=np.array([q[n]["upper_5"] for n in names]),
            sample_size=meta["sample_size"], dim=meta["dim"],
            replicates=meta["replicates"], seed=meta["seed"],
            failures=meta.get("failures", 0),
        )

    def csv_rows(self):
        yield ("statistic", "lower_2.5", "upper_2.5", "upper_5")
        for i, name in enumerate(self.statistics):
            yield (name, repr(float(self.lower_2_5[i])),
                   repr(float(self.upper_2_5[i])), repr(float(self.upper_5[i])))


@dataclass(frozen=True, eq=False)
class PowerResult:
    """Rejection frequency per statistic for one alternative."""

    statistics: tuple
    power: np.ndarray
    replicates: int
    failures: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "metadata": {"replicates": self.replicates,
                         "failures": self.failures, "seed": self.seed},
            "power": {name: float(self.power[i])
                      for i, name in enumerate(self.statistics)},
        }

    def csv_rows(self):
        yield ("statistic", "power")
        for i, name in enumerate(self.statistics):
            yield (name, repr(float(self.power[i])))


@dataclass(frozen=True, eq=False)
class ParamStats:
    mean: float
    std: float
    bias: float
    mse: float


@dataclass(frozen=True, eq=False)
class BiasMseStudy:
    """Per-parameter estimator summaries for each sample size."""

    n_list: tuple
    replicates: int
    seed: int
    stats: dict  # n -> {param name -> ParamStats}
    failures: dict  # n -> count
    avg_fit_seconds: dict  # n -> float


def _stat_vector_for_data(data: np.ndarray, fit_cfg: FitConfig) -> np.ndarray:
    res = fit_best(data, ExponentialMixing(), fit_cfg)
    return report_to_vector(population_report(res.params))


def _null_chunk(args) -> np.ndarray:
    seed, n, p, indices, fit_cfg = args
    out = np.full((len(indices), len(STATISTICS)), np.nan)
    for row, idx in enumerate(indices):
        rng = np.random.default_rng([seed, _TAG_NULL, idx])
        data = rng.standard_normal((n, p))
        try:
            out[row] = _stat_vector_for_data(data, fit_cfg)
        except MmnError:
            pass
    return out


def _power_chunk(args) -> np.ndarray:
    seed, n, alt, indices, fit_cfg = args
    out = np.full((len(indices), len(STATISTICS)), np.nan)
    ws = DensityWorkspace(alt)
    for row, idx in enumerate(indices):
        rng = np.random.default_rng([seed, _TAG_POWER, idx])
        data = ws.sample(rng, n)
        try:
            out[row] = _stat_vector_for_data(data, fit_cfg)
        except MmnError:
            pass
    return out


def _bias_chunk(args) -> tuple:
    seed, n, truth, indices, fit_cfg = args
    p = truth.p
    n_params = 2 * p + p * (p + 1) // 2
    out = np.full((len(indices), n_params), np.nan)
    ws = DensityWorkspace(truth)
    elapsed = 0.0
    for row, idx in enumerate(indices):
        rng = np.random.default_rng([seed, _TAG_BIAS, n, idx])
        data = ws.sample(rng, n)
        t0 = time.perf_counter()
        try:
            res = fit_best(data, ExponentialMixing(), fit_cfg)
        except MmnError:
            elapsed += time.perf_counter() - t0
            continue
        elapsed += time.perf_counter() - t0
        est = res.params
        tri = est.omega[np.triu_indices(p)]
        out[row] = np.concatenate([est.xi, est.delta, tri])
    return out, elapsed


def _run_chunks(worker, common, indices, threads: int):
    """Deterministic chunked map; merge order is fixed by chunk order."""
    threads = resolve_threads(threads)
    n_chunks = max(1, min(len(indices), threads * 4))
    splits = np.array_split(np.asarray(indices), n_chunks)
    tasks = [common[:-1] + (list(s),) + common[-1:] for s in splits if len(s)]
    if threads <= 1 or len(tasks) <= 1:
        results = [worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, tasks))
    return results


def _check_failures(mat: np.ndarray, what: str) -> int:
    bad = int(np.isnan(mat[:, 0]).sum())
    if bad > FAILURE_LIMIT * mat.shape[0]:
        raise StudyUnstable(
            f"{what}: {bad}/{mat.shape[0]} replicates failed to fit")
    return bad


def critical_values(cfg: McConfig) -> CriticalTable:
    """Empirical null quantiles under multivariate normality.

    Simulates standard normal samples, fits the exponential-mixing model,
    evaluates the twelve statistics at the estimates, and returns the
    lower/upper 2.5% and upper 5% order-statistic quantiles (linear
    interpolation).
    """
    indices = range(cfg.replicates)
    common = (cfg.seed, cfg.sample_size, cfg.dim, cfg.fit)
    results = _run_chunks(_null_chunk, common, list(indices), cfg.threads)
    mat = np.vstack(results)
    failures = _check_failures(mat, "critical value study")
    good = mat[~np.isnan(mat[:, 0])]
    lower = np.quantile(good, 0.025, axis=0)
    upper = np.quantile(good, 0.975, axis=0)
    upper5 = np.quantile(good, 0.95, axis=0)
    return CriticalTable(
        statistics=cfg.statistics, lower_2_5=lower, upper_2_5=upper,
        upper_5=upper5, sample_size=cfg.sample_size, dim=cfg.dim,
        replicates=cfg.replicates, seed=cfg.seed, failures=failures)


def rejection_mask(values: np.ndarray, table: CriticalTable) -> np.ndarray:
    """Boolean rejections per statistic for one vector of sample statistics.

    One-sided statistics reject above the upper 5% point; the others
    reject outside the central 95% band.
    """
    out = np.zeros(len(STATISTICS), dtype=bool)
    for i, name in enumerate(STATISTICS):
        if name in ONE_SIDED:
            out[i] = values[i] > table.upper_5[i]
        else:
            out[i] = (values[i] < table.lower_2_5[i]) or \
                     (values[i] > table.upper_2_5[i])
    return out


def power_study(alt: MmnParams, table: CriticalTable,
                cfg: McConfig) -> PowerResult:
    """Rejection frequencies under a skewed alternative."""
    if alt.p != table.dim:
        raise ValueError("alternative dimension does not match the table")
    indices = list(range(cfg.replicates))
    common = (cfg.seed, cfg.sample_size, alt, cfg.fit)
    results = _run_chunks(_power_chunk, common, indices, cfg.threads)
    mat = np.vstack(results)
    failures = _check_failures(mat, "power study")
    good = mat[~np.isnan(mat[:, 0])]
    rejections = np.zeros(len(STATISTICS))
    for row in good:
        rejections += rejection_mask(row, table)
    return PowerResult(statistics=cfg.statistics,
                       power=rejections / len(good),
                       replicates=cfg.replicates, failures=failures,
                       seed=cfg.seed)


def param_names(p: int) -> list:
    names = [f"xi{i + 1}" for i in range(p)]
    names += [f"delta{i + 1}" for i in range(p)]
    names += [f"omega{i + 1}{j + 1}"
              for i in range(p) for j in range(i, p)]
    return names


def bias_mse_study(truth: MmnParams, n_list, replicates: int, seed: int,
                   fit_config: FitConfig | None = None,
                   threads: int | None = None) -> BiasMseStudy:
    """Estimator mean/std/bias/MSE over replicated fits at each sample size.

    Bias and MSE are averages of ``theta_hat - theta`` and its square over
    replicates, per parameter component.
    """
    fit_cfg = fit_config or FitConfig()
    p = truth.p
    names = param_names(p)
    tri = truth.omega[np.triu_indices(p)]
    true_vec = np.concatenate([truth.xi, truth.delta, tri])
    stats: dict = {}
    failures: dict = {}
    timing: dict = {}
    for n in n_list:
        common = (seed, int(n), truth, fit_cfg)
        results = _run_chunks(_bias_chunk, common, list(range(replicates)),
                              threads)
        mat = np.vstack([r[0] for r in results])
        elapsed = sum(r[1] for r in results)
        failures[n] = _check_failures(mat, f"bias study at n={n}")
        good = mat[~np.isnan(mat[:, 0])]
        err = good - true_vec[None, :]
        stats[n] = {
            name: ParamStats(
                mean=float(good[:, j].mean()),
                std=float(good[:, j].std(ddof=1)),
                bias=float(err[:, j].mean()),
                mse=float((err[:, j] ** 2).mean()),
            )
            for j, name in enumerate(names)
        }
        timing[n] = elapsed / max(1, len(good))
    return BiasMseStudy(n_list=tuple(n_list), replicates=replicates,
                        seed=seed, stats=stats, failures=failures,
                        avg_fit_seconds=timing)
