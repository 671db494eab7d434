"""Experiment orchestration: runs, ablation grids, checkpoints, CSV output.

A run directory holds

* ``config.txt``          the config snapshot (see :mod:`dads.config`)
* ``results.csv``         one row per (seed, evaluation step)
* ``checkpoints/``        final agent parameters per seed (``seed-<S>.npz``)
* ``errors.json``         only when a seed failed; the CSV then holds the
                          rows written before the failure
"""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import rng as rngs
from .agent import EvalRecord, Trainer, train
from .config import MU_GRID, ExperimentConfig
from .envs import OVERLAP_LEVELS, evaluate_policy, make_domain_pair
from .errors import ConfigurationError, InputError
from .sac import SacAgent
from . import tabular

CSV_HEADER = tuple(f.name for f in fields(EvalRecord))
SUITES = ("skew", "mixup", "mu")
MU_LABELS = ("0", "1_3", "2_3", "1", "2", "4")


# -- CSV ------------------------------------------------------------------------

def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(records) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for rec in records:
        buf.write(",".join(_cell(getattr(rec, name)) for name in CSV_HEADER) + "\n")
    return buf.getvalue()


def write_csv(path, records) -> None:
    Path(path).write_text(format_csv(records))


def read_csv(path) -> list[EvalRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise InputError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            out.append(EvalRecord(
                step=int(row["step"]), seed=int(row["seed"]), method=row["method"],
                env=row["env"], overlap=row["overlap"],
                **{k: float(row[k]) for k in CSV_HEADER[5:]}))
        return out


def aggregate(records) -> list[dict]:
    """Across-seed mean and sample std of return_mean per (method, step)."""
    groups: dict[tuple, list[float]] = {}
    for rec in records:
        groups.setdefault((rec.method, rec.overlap, rec.step), []).append(rec.return_mean)
    out = []
    for (method, overlap, step), vals in sorted(groups.items()):
        arr = np.array(vals)
        out.append({"method": method, "overlap": overlap, "step": step, "n": arr.size,
                    "mean": float(arr.mean()),
                    "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0})
    return out


def final_returns(records) -> dict[int, float]:
    """Return at each seed's last evaluation step."""
    last: dict[int, EvalRecord] = {}
    for rec in records:
        if rec.seed not in last or rec.step > last[rec.seed].step:
            last[rec.seed] = rec
    return {seed: rec.return_mean for seed, rec in sorted(last.items())}


# -- checkpoints ----------------------------------------------------------------

def save_checkpoint(path, trainer: Trainer, config: ExperimentConfig) -> None:
    meta = {"config": cfgmod.dumps(config), "seed": trainer.seed, "step": trainer.t,
            "env": config.env, "overlap": config.overlap,
            "noise_scale": trainer.pair.noise_scale}
    arrays = dict(trainer.agent.state_arrays())
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[SacAgent, ExperimentConfig, dict]:
    with np.load(path) as data:
        meta = json.loads(str(data["meta"]))
        config = cfgmod.loads(meta["config"])
        pair = make_domain_pair(config.env, config.overlap, noise_scale=meta["noise_scale"])
        env = pair.make_target(rngs.stream(meta["seed"], "env_eval"))
        agent = SacAgent(env.state_dim, env.action_dim, env.action_high, config.sac)
        agent.load_state_arrays({k: data[k] for k in data.files if k != "meta"})
    return agent, config, meta


def evaluate_checkpoint(path, episodes: int = 10, seed: int | None = None) -> tuple[float, float]:
    """Deterministic-policy return on the target domain of the checkpoint's pair."""
    agent, config, meta = load_checkpoint(path)
    seed = meta["seed"] if seed is None else seed
    pair = make_domain_pair(config.env, config.overlap, noise_scale=meta["noise_scale"])
    env = pair.make_target(rngs.stream(seed, "env_eval"), config.train.horizon)
    return evaluate_policy(env, lambda s: agent.act(s, deterministic=True), episodes)


# -- single experiment ----------------------------------------------------------

@dataclass
class RunFailure:
    seed: int
    step: int
    error: str
    message: str


@dataclass
class ExperimentResult:
    run_dir: Path
    records: list[EvalRecord]
    failures: list[RunFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def csv_path(self) -> Path:
        return self.run_dir / "results.csv"


def _run_seed(job):
    config_text, seed, run_dir = job
    config = cfgmod.loads(config_text)
    records: list[EvalRecord] = []
    started: list[Trainer] = []
    try:
        trainer, _ = train(config, seed, on_record=records.append, on_start=started.append)
        if run_dir is not None:
            save_checkpoint(Path(run_dir) / "checkpoints" / f"seed-{seed}.npz", trainer, config)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        step = started[0].t if started else 0
        return records, RunFailure(seed, step, type(exc).__name__, str(exc))
    return records, None


def run_experiment(config: ExperimentConfig, run_dir=None, workers: int = 1) -> ExperimentResult:
    """Train ``config.method`` once per seed and write the merged CSV.

    Seeds are independent jobs; with ``workers > 1`` they run in a process
    pool and the parent alone writes the output files.
    """
    cfgmod.validate(config)
    text = cfgmod.dumps(config)
    path = None if run_dir is None else Path(run_dir)
    if path is not None:
        path.mkdir(parents=True, exist_ok=True)
        (path / "config.txt").write_text(text)
    jobs = [(text, seed, None if path is None else str(path)) for seed in config.seeds]
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.get_context("fork").Pool(min(workers, len(jobs))) as pool:
            outcomes = pool.map(_run_seed, jobs)
    else:
        outcomes = [_run_seed(job) for job in jobs]

    records = [rec for recs, _ in outcomes for rec in recs]
    failures = [fail for _, fail in outcomes if fail is not None]
    result = ExperimentResult(path if path is not None else Path("."), records, failures)
    if path is not None:
        write_csv(path / "results.csv", records)
        err = path / "errors.json"
        if failures:
            err.write_text(json.dumps([asdict(f) for f in failures], indent=1) + "\n")
        elif err.exists():
            err.unlink()
    return result


# -- ablations --------------------------------------------------------------------

def plan_ablation(base: ExperimentConfig, suite: str, overlaps=None) -> list[tuple[str, ExperimentConfig]]:
    """(name, config) pairs for a suite.

    ``skew`` and ``mixup`` compare full DADS with one component removed at
    every overlap level in ``overlaps`` (default: all three); ``mu`` runs
    full DADS over the six-value mu grid at the base overlap.
    """
    cfgmod.validate(base)
    if suite not in SUITES:
        raise ConfigurationError(f"unknown suite {suite!r}; expected one of {SUITES}")
    if suite == "mu":
        return [(f"mu-{label}", base.replace(**{"train.method": "dads", "train.mu": mu}))
                for label, mu in zip(MU_LABELS, MU_GRID)]
    variant = "dads_no_skew" if suite == "skew" else "dads_no_mixup"
    levels = OVERLAP_LEVELS if overlaps is None else tuple(overlaps)
    plan = []
    for level in levels:
        for method in ("dads", variant):
            plan.append((f"{method}-{level}", base.replace(overlap=level, **{"train.method": method})))
    return plan


def run_ablation_suite(base: ExperimentConfig, suite: str, run_dir, overlaps=None,
                       workers: int = 1) -> dict[str, ExperimentResult]:
    plan = plan_ablation(base, suite, overlaps)
    root = Path(run_dir)
    return {name: run_experiment(cfg, root / name, workers) for name, cfg in plan}


# -- bound verification ----------------------------------------------------------

BOUND_CSV_HEADER = ("instance_id", "kind", "n_states", "n_actions", "gamma", "gap",
                    "term_A", "term_B", "bound", "tightness", "telescoping_error")


@dataclass
class BoundRow:
    instance_id: int
    kind: str  # "full" or "deficient"
    n_states: int
    n_actions: int
    gamma: float
    gap: float
    term_A: float
    term_B: float
    bound: float
    tightness: float
    telescoping_error: float

    @property
    def violated(self) -> bool:
        # relative slack for round-off only
        return self.gap > self.bound * (1.0 + 1e-12) + 1e-12


@dataclass
class BoundsReport:
    rows: list[BoundRow]

    def _kind(self, kind):
        return [r for r in self.rows if r.kind == kind]

    @property
    def violations(self) -> int:
        return sum(r.violated for r in self.rows)

    @property
    def full_violations(self) -> int:
        return sum(r.violated for r in self._kind("full"))

    @property
    def deficient_violations(self) -> int:
        return sum(r.violated for r in self._kind("deficient"))

    @property
    def max_telescoping_error(self) -> float:
        return max((r.telescoping_error for r in self.rows), default=0.0)

    def tightness(self, kind: str) -> dict:
        t = np.array([r.tightness for r in self._kind(kind) if np.isfinite(r.tightness)])
        if t.size == 0:
            return {"min": math.nan, "median": math.nan, "max": math.nan}
        return {"min": float(t.min()), "median": float(np.median(t)), "max": float(t.max())}

    def summary(self) -> str:
        lines = [f"instances: {len(self._kind('full'))} full-support, "
                 f"{len(self._kind('deficient'))} deficient-support",
                 f"violations: full {self.full_violations}, deficient {self.deficient_violations}",
                 f"max telescoping error: {self.max_telescoping_error:.3e}"]
        for kind in ("full", "deficient"):
            t = self.tightness(kind)
            lines.append(f"tightness gap/bound ({kind}): min {t['min']:.3g} "
                         f"median {t['median']:.3g} max {t['max']:.3g}")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BOUND_CSV_HEADER)
            for r in self.rows:
                w.writerow([_cell(getattr(r, k)) for k in BOUND_CSV_HEADER])


def _telescoping_error(m1, m2, policy) -> float:
    lhs, rhs = tabular.telescoping_gap(m1, m2, policy)
    return abs(lhs - rhs)


def verify_bounds(n_instances: int = 100, sizes=None, seed: int = 0,
                  gammas=(0.9, 0.99)) -> BoundsReport:
    """Check both gap bounds and the telescoping identity on random pairs.

    Each instance draws one full-support pair and one deficient pair with a
    random policy.  ``sizes`` is a list of (n_states, n_actions) cycled over
    the instances; by default sizes are drawn from 3-10 states, 2-4 actions.
    For full-support rows term_A is the KL bound and term_B is zero.
    """
    if n_instances < 1:
        raise ConfigurationError("n_instances must be >= 1")
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_instances):
        if sizes:
            n_s, n_a = sizes[i % len(sizes)]
        else:
            n_s, n_a = int(rng.integers(3, 11)), int(rng.integers(2, 5))
        gamma = float(gammas[int(rng.integers(len(gammas)))])

        src, tar = tabular.random_full_support_pair(n_s, n_a, gamma, rng)
        pi = tabular.random_policy(n_s, n_a, rng)
        gap, bound = tabular.bound_full_support(src, tar, pi)
        rows.append(BoundRow(i, "full", n_s, n_a, gamma, gap, bound, 0.0, bound,
                             gap / bound if bound > 0 else math.nan,
                             _telescoping_error(tar, src, pi)))

        src, tar = tabular.random_deficient_pair(n_s, n_a, gamma, rng)
        pi = tabular.random_policy(n_s, n_a, rng)
        gap, term_a, term_b, bound = tabular.bound_deficient_support(src, tar, pi)
        rows.append(BoundRow(i, "deficient", n_s, n_a, gamma, gap, term_a, term_b, bound,
                             gap / bound if bound > 0 else math.nan,
                             _telescoping_error(tar, src, pi)))
    return BoundsReport(rows)
