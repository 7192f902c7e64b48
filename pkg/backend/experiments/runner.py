"""
Benchmark harness: synthesize replicate datasets, learn structures, score
them against the truth and aggregate per setting.
"""
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from backend.models.SVRCD import SVRCDLearner
from backend.models.generators import generate_graph
from backend.models.graph import DagGraph
from backend.models.hill_climbing import hc_baseline
from backend.models.metrics import MetricsReport, aggregate, evaluate
from backend.models.multi_logit import Dataset, VariableSpec, gen_true_cpds, inject_noise, sample_dataset
from backend.models.score import HyperParams
from backend.utils.DataProcessor import EdgeListProcessor, RunArtifactManager
from backend.utils.config import (DEFAULT_CPD_RANGE, DEFAULT_EXPERIMENT, GAMMA_GRID, GRAPH_TYPES,
                                  LAMBDA1_GRID, LAMBDA2_GRID, METRIC_COLUMNS, MODES, NOISE_GRID,
                                  SCALABILITY_GRID)
from backend.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

HYPERPARAM_KEYS = {f.name for f in fields(HyperParams)}


@dataclass
class ExperimentConfig:
    graph_type: str = DEFAULT_EXPERIMENT['graph_type']
    p: int = DEFAULT_EXPERIMENT['p']
    n: int = DEFAULT_EXPERIMENT['n']
    replicates: int = DEFAULT_EXPERIMENT['replicates']
    hyperparams: HyperParams = field(default_factory=HyperParams)
    noise: Optional[List[float]] = DEFAULT_EXPERIMENT['noise']
    seed: int = DEFAULT_EXPERIMENT['seed']
    out: str = DEFAULT_EXPERIMENT['out']
    mode: str = DEFAULT_EXPERIMENT['mode']
    max_parents: int = DEFAULT_EXPERIMENT['max_parents']
    scale_free_power: float = DEFAULT_EXPERIMENT['scale_free_power']
    edge_count: Optional[int] = DEFAULT_EXPERIMENT['edge_count']
    sweep_values: Optional[List[float]] = None
    grid: Optional[List[Tuple[int, int]]] = None
    workers: int = DEFAULT_EXPERIMENT['workers']

    def __post_init__(self):
        if isinstance(self.hyperparams, dict):
            self.hyperparams = HyperParams(**self.hyperparams)
        if self.graph_type not in GRAPH_TYPES:
            raise ConfigError(f"graph_type must be one of {GRAPH_TYPES}, got {self.graph_type!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if self.n < 1 or self.p < 2:
            raise ConfigError(f"need n >= 1 and p >= 2, got n={self.n}, p={self.p}")
        if self.graph_type == 'bipartite' and self.p < 5:
            raise ConfigError(f"bipartite graphs need p >= 5, got {self.p}")
        if self.noise is not None:
            self.noise = [float(q) for q in self.noise]
            if any(not 0.0 <= q <= 1.0 for q in self.noise):
                raise ConfigError(f"noise fractions must lie in [0, 1], got {self.noise}")
            if self.mode != 'noise' and len(self.noise) > 1:
                raise ConfigError("several noise fractions only make sense with --mode noise")
        if self.grid is not None:
            self.grid = [(int(n), int(p)) for n, p in self.grid]
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        payload = dict(payload)
        hp = payload.pop('hyperparams', {}) or {}
        unknown = set(hp) - HYPERPARAM_KEYS
        if unknown:
            raise ConfigError(f"unknown hyperparameter keys: {', '.join(sorted(unknown))}")
        try:
            return cls(hyperparams=HyperParams(**hp), **payload)
        except TypeError as e:
            raise ConfigError(f"invalid config: {e}") from e

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            payload = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(payload, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(payload)

    def with_overrides(self, **flags) -> "ExperimentConfig":
        """Return a copy with every non-None flag applied on top."""
        flags = {k: v for k, v in flags.items() if v is not None}
        hp_flags = {k: flags.pop(k) for k in list(flags) if k in HYPERPARAM_KEYS}
        hp = replace(self.hyperparams, **hp_flags)
        return replace(self, hyperparams=hp, **flags)

    def to_dict(self) -> dict:
        payload = asdict(self)
        if payload['grid'] is not None:
            payload['grid'] = [list(pair) for pair in payload['grid']]
        return payload


@dataclass(frozen=True)
class Setting:
    label: str
    n: int
    p: int
    hp: HyperParams
    noise: float
    methods: Tuple[str, ...] = ('svrcd',)


@dataclass
class ReplicateResult:
    setting: str
    method: str
    replicate: int
    report: MetricsReport
    seconds: float
    truth: DagGraph
    data: Dataset
    estimated: DagGraph
    trace: Optional[pd.DataFrame] = None


@dataclass
class RunRecord:
    config: dict
    replicates: pd.DataFrame
    aggregate: pd.DataFrame
    wall_times: List[float]
    content_hash: str


def build_settings(cfg: ExperimentConfig) -> List[Setting]:
    hp = cfg.hyperparams
    noise = cfg.noise[0] if cfg.noise else 0.0
    sweeps = {'sweep-lambda1': ('lambda1', LAMBDA1_GRID),
              'sweep-lambda2': ('lambda2', LAMBDA2_GRID),
              'sweep-gamma': ('gamma', GAMMA_GRID)}
    if cfg.mode in sweeps:
        name, grid = sweeps[cfg.mode]
        values = cfg.sweep_values or grid
        return [Setting(f"{name}={v:g}", cfg.n, cfg.p, replace(hp, **{name: v}), noise) for v in values]
    if cfg.mode == 'compare':
        return [Setting(f"{cfg.graph_type}", cfg.n, cfg.p, hp, noise, ('svrcd', 'hc'))]
    if cfg.mode == 'scalability':
        grid = cfg.grid or SCALABILITY_GRID
        return [Setting(f"n={n},p={p}", n, p, hp, noise) for n, p in grid]
    levels = cfg.noise or NOISE_GRID
    return [Setting(f"noise={q:g}", cfg.n, cfg.p, hp, q) for q in levels]


def synthesize(cfg: ExperimentConfig, n: int, p: int, replicate: int, noise: float = 0.0):
    """Truth graph, CPDs and (optionally noisy) data for one replicate."""
    seed = cfg.seed + replicate
    cpd_seed, sample_seed, noise_seed = np.random.SeedSequence(seed).spawn(3)
    truth = generate_graph(cfg.graph_type, p, seed=seed, edge_count=cfg.edge_count,
                           power=cfg.scale_free_power)
    specs = VariableSpec.binary(p)
    params = gen_true_cpds(truth, specs, seed=cpd_seed, **DEFAULT_CPD_RANGE)
    data = sample_dataset(truth, params, n, seed=sample_seed)
    if noise > 0:
        data = inject_noise(data, noise, seed=noise_seed)
    return truth, data


def run_replicate(cfg: ExperimentConfig, setting: Setting, replicate: int) -> List[ReplicateResult]:
    truth, data = synthesize(cfg, setting.n, setting.p, replicate, setting.noise)
    learn_seed = np.random.SeedSequence([cfg.seed + replicate, 1])
    results = []
    for method in setting.methods:
        start = time.perf_counter()
        trace = None
        if method == 'svrcd':
            learned = SVRCDLearner(setting.hp, seed=learn_seed).fit(data)
            estimated, trace = learned.graph, learned.trace_frame()
        else:
            estimated = hc_baseline(data, cfg.max_parents)
        seconds = time.perf_counter() - start
        report = evaluate(estimated, truth)
        logger.debug("%s %s r%d: SHD=%g JI=%.3f (%.2fs)", setting.label, method, replicate,
                     report.SHD, report.JI, seconds)
        results.append(ReplicateResult(setting.label, method, replicate, report, seconds,
                                       truth, data, estimated, trace))
    return results


def _run_task(task):
    return run_replicate(*task)


def _content_hash(config: dict, results: Sequence[ReplicateResult]) -> str:
    digest = hashlib.sha256(json.dumps(config, sort_keys=True).encode())
    for res in results:
        digest.update(EdgeListProcessor.format(res.truth).encode())
        digest.update(res.data.values.tobytes())
        digest.update(EdgeListProcessor.format(res.estimated).encode())
    return digest.hexdigest()


def summarize(results: Sequence[ReplicateResult]) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Per-replicate metric rows and one aggregate row per (setting, method)."""
    per_rep = pd.DataFrame([
        {'setting': r.setting, 'method': r.method, 'replicate': r.replicate, **r.report.as_dict()}
        for r in results
    ])
    rows = []
    groups = {}
    for r in results:
        groups.setdefault((r.setting, r.method), []).append(r.report)
    for (setting, method), reports in groups.items():
        agg = aggregate(reports)
        row = {'setting': setting, 'method': method, 'replicates': agg.count, **agg.mean.as_dict()}
        row.update({f"var_{k}": agg.variance[k] for k in METRIC_COLUMNS})
        rows.append(row)
    return per_rep, pd.DataFrame(rows)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunRecord:
    settings = build_settings(cfg)
    tasks = [(cfg, s, r) for s in settings for r in range(cfg.replicates)]
    logger.info("experiment mode=%s graph=%s: %d setting(s) x %d replicate(s)",
                cfg.mode, cfg.graph_type, len(settings), cfg.replicates)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            batches = list(pool.map(_run_task, tasks))
    else:
        batches = [_run_task(t) for t in tasks]
    results = [res for batch in batches for res in batch]

    config = cfg.to_dict()
    per_rep, agg = summarize(results)
    record = RunRecord(config=config, replicates=per_rep, aggregate=agg,
                       wall_times=[r.seconds for r in results],
                       content_hash=_content_hash(config, results))
    if write:
        artifacts = RunArtifactManager(cfg.out)
        artifacts.write_json('config.json', config)
        for res in results:
            artifacts.write_replicate(res.setting, res.replicate, res.truth, res.data,
                                      res.estimated, res.trace, method=res.method)
        artifacts.write_table('metrics.csv', per_rep)
        artifacts.write_table('aggregate.csv', agg)
        artifacts.write_json('run.json', {'content_hash': record.content_hash})
        logger.info("wrote results to %s", artifacts.out_dir)
    logger.info("experiment finished in %.1fs of learner time", sum(record.wall_times))
    return record
