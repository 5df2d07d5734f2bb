"""Monte Carlo estimation of MANOVA rejection rates.

Each replicate draws its data from its own substream keyed by
``(scenario_id, replicate_index)``, so results do not depend on how
replicates are distributed across worker processes.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from .errors import AbortError, MvTestError, SingularError, UnknownPreset
from .manova import CONVENTIONS, STATISTICS, TREATMENTS, Statistic, analyze
from .sampler import CovarianceSpec, RngState, gen_dataset, group_factors, rng_new, rng_substream

log = logging.getLogger(__name__)

DEFAULT_REPS = 10_000
DEFAULT_ALPHA = 0.05
FAILURE_BUDGET = 0.001


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: int
    sizes: tuple[int, ...]
    cov: CovarianceSpec
    treatment: str = "categorical"
    convention: str = "software"
    reps: int = DEFAULT_REPS
    alpha: float = DEFAULT_ALPHA
    master_seed: int = 0
    means: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        if len(self.sizes) != self.cov.g:
            raise ValueError(f"{len(self.sizes)} group sizes but covariance has g={self.cov.g}")
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.treatment not in TREATMENTS:
            raise ValueError(f"treatment must be one of {TREATMENTS}, got {self.treatment!r}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}, got {self.convention!r}")
        n_t, g, r = sum(self.sizes), self.g, self.r
        if self.treatment == "categorical" and n_t - g < r:
            raise ValueError(f"sizes {self.sizes} leave n_t - g < r = {r}")
        if self.treatment == "continuous" and n_t < r + 2:
            raise ValueError(f"sizes {self.sizes} leave n_t < r + 2 = {r + 2}")
        if self.means is not None:
            m = np.asarray(self.means, dtype=float)
            if m.shape != (g, r):
                raise ValueError(f"means must have shape {(g, r)}, got {m.shape}")
            object.__setattr__(self, "means", tuple(tuple(float(x) for x in row) for row in m))

    @property
    def r(self) -> int:
        return self.cov.r

    @property
    def g(self) -> int:
        return self.cov.g

    @property
    def size_label(self) -> str:
        return "-".join(str(n) for n in self.sizes)


@dataclass(frozen=True)
class RejectionRow:
    scenario_id: int
    statistic: Statistic
    rejections: int
    reps: int
    alpha: float
    sizes: tuple[int, ...] = ()
    cov_label: str = ""
    treatment: str = "categorical"
    convention: str = "software"
    seed: int = 0
    failures: int = 0

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.reps

    @property
    def mc_se(self) -> float:
        return mc_stderr(self.rejection_rate, self.reps)

    @property
    def size_label(self) -> str:
        return "-".join(str(n) for n in self.sizes)


@dataclass
class SimulationTable:
    rows: list[RejectionRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def rate(self, scenario_id: int, kind: Statistic) -> float:
        for row in self.rows:
            if row.scenario_id == scenario_id and row.statistic is kind:
                return row.rejection_rate
        raise KeyError((scenario_id, kind))

    def scenario_ids(self) -> list[int]:
        return sorted({row.scenario_id for row in self.rows})

    def by_scenario(self) -> dict[int, list[RejectionRow]]:
        out: dict[int, list[RejectionRow]] = {}
        for row in self.rows:
            out.setdefault(row.scenario_id, []).append(row)
        return out


def mc_stderr(rate: float, reps: int) -> float:
    """Binomial Monte Carlo standard error of a rejection rate."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    return math.sqrt(rate * (1.0 - rate) / reps)


def _replicate(cfg: ScenarioConfig, factors, master: RngState, index: int) -> tuple[float, ...]:
    rng = rng_substream(master, cfg.scenario_id, index)
    data = gen_dataset(cfg.cov, cfg.sizes, cfg.means, rng, factors=factors)
    return analyze(data, cfg.treatment, cfg.convention).p_values()


def run_replicate(cfg: ScenarioConfig, index: int) -> tuple[float, ...]:
    """p-values (Wilks, Pillai, Hotelling-Lawley, Roy) of one replicate."""
    if not 0 <= index < cfg.reps:
        raise IndexError(f"replicate index {index} outside [0, {cfg.reps})")
    return _replicate(cfg, group_factors(cfg.cov), rng_new(cfg.master_seed), index)


def _run_chunk(cfg: ScenarioConfig, start: int, stop: int):
    factors = group_factors(cfg.cov)
    master = rng_new(cfg.master_seed)
    counts = [0] * len(STATISTICS)
    failures = []
    alpha = cfg.alpha
    for index in range(start, stop):
        try:
            pvals = _replicate(cfg, factors, master, index)
        except SingularError as exc:
            failures.append((index, str(exc)))
            continue
        for k, p in enumerate(pvals):
            if p < alpha:
                counts[k] += 1
    return counts, failures


def _chunks(reps: int, workers: int) -> list[tuple[int, int]]:
    n_chunks = max(1, min(reps, workers * 4))
    bounds = np.linspace(0, reps, n_chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_scenario(cfg: ScenarioConfig, workers: int = 1, executor=None) -> list[RejectionRow]:
    """Rejection counts for all four statistics over ``cfg.reps`` replicates.

    Replicates whose error matrix is singular are counted as failures and
    excluded from the denominator; more than 0.1% failures aborts.
    """
    chunks = _chunks(cfg.reps, workers)
    if executor is None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return run_scenario(cfg, workers, pool)
    if executor is None:
        results = [_run_chunk(cfg, a, b) for a, b in chunks]
    else:
        futures = [executor.submit(_run_chunk, cfg, a, b) for a, b in chunks]
        results = [f.result() for f in futures]

    counts = np.zeros(len(STATISTICS), dtype=int)
    failures = []
    for c, f in results:
        counts += c
        failures.extend(f)
    if len(failures) > FAILURE_BUDGET * cfg.reps:
        index, msg = failures[0]
        raise AbortError(
            f"scenario {cfg.scenario_id}: {len(failures)} of {cfg.reps} replicates failed "
            f"(first at replicate {index}: {msg})"
        )
    if failures:
        log.warning("scenario %d: %d singular replicates excluded", cfg.scenario_id, len(failures))
    done = cfg.reps - len(failures)
    return [
        RejectionRow(
            scenario_id=cfg.scenario_id,
            statistic=kind,
            rejections=int(counts[k]),
            reps=done,
            alpha=cfg.alpha,
            sizes=cfg.sizes,
            cov_label=cfg.cov.label,
            treatment=cfg.treatment,
            convention=cfg.convention,
            seed=cfg.master_seed,
            failures=len(failures),
        )
        for k, kind in enumerate(STATISTICS)
    ]


def run_suite(cfgs: Sequence[ScenarioConfig], workers: int = 1) -> SimulationTable:
    ids = [c.scenario_id for c in cfgs]
    if len(set(ids)) != len(ids):
        raise ValueError(f"scenario ids must be distinct, got {ids}")
    rows: list[RejectionRow] = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for cfg in sorted(cfgs, key=lambda c: c.scenario_id):
            log.info("scenario %d: sizes %s, %s, %s", cfg.scenario_id, cfg.size_label,
                     cfg.cov.label, cfg.treatment)
            try:
                rows.extend(run_scenario(cfg, workers, pool))
            except AbortError:
                raise
            except MvTestError as exc:
                raise type(exc)(f"scenario {cfg.scenario_id}: {exc}") from exc
    finally:
        if pool is not None:
            pool.shutdown()
    conventions = sorted({c.convention for c in cfgs})
    seeds = sorted({c.master_seed for c in cfgs})
    meta = {
        "seed": seeds[0] if len(seeds) == 1 else seeds,
        "convention": conventions[0] if len(conventions) == 1 else conventions,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    return SimulationTable(rows, meta)


# ---------------------------------------------------------------------------
# presets

ATES_SIZES = (
    (10, 10, 10), (20, 20, 20), (50, 50, 50), (10, 10, 20), (10, 10, 50),
    (10, 20, 20), (10, 20, 50), (10, 50, 50), (20, 20, 50), (20, 50, 50),
)
ADEBAYO_SIZES = (
    (10, 10, 10), (100, 100, 100), (1000, 1000, 1000),
    (10, 20, 30), (100, 200, 300), (600, 800, 1000),
)
R, G = 3, 3


def _ates(treatment, seed, reps, convention, alpha):
    covs = [CovarianceSpec.identity(R, G), CovarianceSpec.shared_diagonal((1, 4, 9), G)]
    # both treatments share scenario ids, hence identical simulated data
    return [
        ScenarioConfig(1 + 10 * c + k, sizes, cov, treatment, convention, reps, alpha, seed)
        for c, cov in enumerate(covs)
        for k, sizes in enumerate(ATES_SIZES)
    ]


def _adebayo(base_id, cov, seed, reps, convention, alpha):
    return [
        ScenarioConfig(base_id + k, sizes, cov, "categorical", convention, reps, alpha, seed)
        for k, sizes in enumerate(ADEBAYO_SIZES)
    ]


PRESETS = {
    "ates-categorical": lambda *a: _ates("categorical", *a),
    "ates-continuous": lambda *a: _ates("continuous", *a),
    "adebayo-homogeneous": lambda *a: _adebayo(101, CovarianceSpec.identity(R, G), *a),
    "adebayo-heterogeneous-identity":
        lambda *a: _adebayo(201, CovarianceSpec.scaled_identity(R, (1, 4, 9)), *a),
    "adebayo-heterogeneous-toeplitz":
        lambda *a: _adebayo(301, CovarianceSpec.toeplitz(R, (0.75, 0.5, 0.25), sigma2=1.0), *a),
}


def preset_tables(name: str, seed: int = 0, reps: int = DEFAULT_REPS,
                  convention: str = "software", alpha: float = DEFAULT_ALPHA) -> list[ScenarioConfig]:
    """Scenario grid of a named reproduction table."""
    try:
        build = PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return build(seed, reps, convention, alpha)
