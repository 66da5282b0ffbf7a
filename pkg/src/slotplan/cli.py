"""Config-driven experiment commands: plan, sweep, oracle, replay.

Configs are flat key=value files with dotted keys, diff-friendly for
experiment tracking::

    planner = mcts
    search.c = 50.0
    search.n_sim = 256
    model.kind = synthetic
    model.k = 5
    model.l = 1
    model.dag_kind = chain
    model.decoy_count = 1
    model.instance_seeds = 1,2,3
    run.seeds = 0,1
    output.records = runs.jsonl

Every output is a deterministic function of the config file. Instance-level
runs may fan out over a worker pool; results are re-ordered by task key
before writing, and all files are written atomically (temp + rename) so an
aborted run never leaves truncated output. The environment variable
SLOTPLAN_REMOTE_URL overrides model.remote.url.

Exit codes: 0 success, 1 replay mismatch, 2 config/usage error, 3 model
backend unavailable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .analysis import (
    RunRecord,
    SWEEP_COLUMNS,
    record_from_jsonable,
    record_to_jsonable,
    search_config_from_jsonable,
    search_config_to_jsonable,
    sequentiality_rate,
    summarize_cell,
    trace_to_jsonable,
)
from .baselines import oracle_exhaustive, run_planner
from .core import SearchConfig
from .errors import InvalidConfig, ModelUnavailable, PlanAborted, TooLarge
from .model import (
    CachedModel,
    RemoteModel,
    SyntheticModel,
    generate_instance,
    instance_from_jsonable,
    instance_to_jsonable,
    register_remote_instance,
)

REMOTE_URL_ENV = "SLOTPLAN_REMOTE_URL"


class ConfigError(Exception):
    pass


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip() != ""]


def _parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


@dataclass
class RunConfig:
    planner: str = "mcts"
    search: SearchConfig = field(default_factory=SearchConfig)
    model_kind: str = "synthetic"
    k: int = 0
    l: int = 0
    dag_kind: str = "chain"
    decoy_count: int = 0
    instance_seeds: list[int] = field(default_factory=lambda: [0])
    remote_url: str = ""
    run_seeds: list[int] = field(default_factory=list)
    out_records: str = "runs.jsonl"
    out_csv: str = "sweep.csv"
    out_oracle: str = "oracle.jsonl"
    sweep_c_values: list[float] = field(default_factory=lambda: [2.0, 10.0, 50.0, 100.0])
    sweep_n_sim_values: list[int] = field(default_factory=lambda: [30, 270])
    oracle_objective: str = "both"
    parallelism: int = 1


_SEARCH_KEYS = {
    "search.c": ("exploration_c", float),
    "search.n_sim": ("n_sim", int),
    "search.lambda": ("lambda_mix", float),
    "search.tau": ("tau", float),
    "search.seed": ("seed", int),
    "search.rollouts_per_eval": ("rollouts_per_eval", int),
    "search.prior_mode": ("prior_mode", str),
    "search.root_visit_floor": ("root_visit_floor", str),
}

_TOP_KEYS = {
    "planner": ("planner", str),
    "model.kind": ("model_kind", str),
    "model.k": ("k", int),
    "model.l": ("l", int),
    "model.dag_kind": ("dag_kind", str),
    "model.decoy_count": ("decoy_count", int),
    "model.instance_seeds": ("instance_seeds", _parse_int_list),
    "model.remote.url": ("remote_url", str),
    "run.seeds": ("run_seeds", _parse_int_list),
    "output.records": ("out_records", str),
    "output.csv": ("out_csv", str),
    "output.oracle": ("out_oracle", str),
    "sweep.c_values": ("sweep_c_values", _parse_float_list),
    "sweep.n_sim_values": ("sweep_n_sim_values", _parse_int_list),
    "oracle.objective": ("oracle_objective", str),
    "parallelism": ("parallelism", int),
}


def parse_config(path: str) -> RunConfig:
    """Parse a flat dotted-key config file; unknown keys are errors."""
    cfg = RunConfig()
    search_kwargs: dict = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in stripped.split("=", 1))
        try:
            if key in _SEARCH_KEYS:
                attr, conv = _SEARCH_KEYS[key]
                search_kwargs[attr] = conv(value)
            elif key in _TOP_KEYS:
                attr, conv = _TOP_KEYS[key]
                setattr(cfg, attr, conv(value))
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        except (ValueError, InvalidConfig) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    try:
        cfg.search = SearchConfig(**search_kwargs)
    except InvalidConfig as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    env_url = os.environ.get(REMOTE_URL_ENV)
    if env_url:
        cfg.remote_url = env_url
    if cfg.model_kind not in ("synthetic", "remote"):
        raise ConfigError(f"{path}: unknown model.kind {cfg.model_kind!r}")
    if cfg.model_kind == "remote" and not cfg.remote_url:
        raise ConfigError(f"{path}: model.kind=remote requires model.remote.url")
    if cfg.instance_seeds and (cfg.k < 2 or cfg.l < 1):
        raise ConfigError(f"{path}: synthetic instances require model.k >= 2 and model.l >= 1")
    if not cfg.run_seeds:
        cfg.run_seeds = [cfg.search.seed]
    return cfg


# ---------------------------------------------------------------------------
# Run execution
# ---------------------------------------------------------------------------

def _make_tasks(cfg: RunConfig, grid: list[tuple[float, int]] | None = None) -> list[dict]:
    """One task per (cell x instance x run seed), in stable output order."""
    tasks = []
    cells = grid if grid is not None else [(cfg.search.exploration_c, cfg.search.n_sim)]
    for cell_index, (c, n_sim) in enumerate(cells):
        for instance_seed in cfg.instance_seeds:
            for run_seed in cfg.run_seeds:
                search = dataclasses.replace(
                    cfg.search, exploration_c=c, n_sim=n_sim, seed=run_seed
                )
                gen = {
                    "k": cfg.k,
                    "l": cfg.l,
                    "dag_kind": cfg.dag_kind,
                    "decoy_count": cfg.decoy_count,
                    "seed": instance_seed,
                }
                tasks.append(
                    {
                        "key": (cell_index, instance_seed, run_seed),
                        "planner": cfg.planner if grid is None else "mcts",
                        "search": search_config_to_jsonable(search),
                        "gen": gen,
                        "model_kind": cfg.model_kind,
                        "remote_url": cfg.remote_url,
                    }
                )
    return tasks


def _execute_task(task: dict) -> RunRecord:
    """Worker entry point; rebuilds everything from plain data so it pickles."""
    gen = task["gen"]
    instance = generate_instance(
        gen["k"], gen["l"], gen["dag_kind"], gen["decoy_count"], gen["seed"]
    )
    search = search_config_from_jsonable(task["search"])
    instance_id = (
        f"{gen['dag_kind']}-k{gen['k']}-d{gen['decoy_count']}-seed{gen['seed']}"
    )
    if task["model_kind"] == "remote":
        remote_id = register_remote_instance(task["remote_url"], gen)
        model = RemoteModel(task["remote_url"], remote_id, instance.l)
    else:
        model = CachedModel(SyntheticModel(instance))
    record = run_planner(task["planner"], instance, search, model=model, instance_id=instance_id)
    payload = {
        "id": instance_id,
        "gen": gen,
        "model": {"kind": task["model_kind"], "url": task["remote_url"] or None},
        "content": instance_to_jsonable(instance),
    }
    return dataclasses.replace(record, instance=payload)


def _run_tasks(tasks: list[dict], parallelism: int) -> list[RunRecord]:
    if parallelism > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(_execute_task, tasks))
    else:
        records = [_execute_task(t) for t in tasks]
    return records


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".slotplan-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl_atomic(path: str, rows: list[dict]) -> None:
    _write_atomic(path, "".join(json.dumps(row) + "\n" for row in rows))


def write_csv_atomic(path: str, columns: tuple[str, ...], rows: list[dict]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in columns))
    _write_atomic(path, "\n".join(lines) + "\n")


def _summary_line(records: list[RunRecord]) -> str:
    if not records:
        return "runs=0"
    accs = [r.accuracy for r in records if r.accuracy is not None]
    seqs = [sequentiality_rate(r.trace) for r in records]
    ents = [e for e in (r.mean_entropy_bits() for r in records) if e is not None]
    mean_acc = sum(accs) / len(accs) if accs else float("nan")
    mean_seq = sum(seqs) / len(seqs)
    mean_ent = f"{sum(ents) / len(ents):.4f}" if ents else "n/a"
    return (
        f"runs={len(records)} mean_accuracy={mean_acc:.4f} "
        f"mean_seq_rate={mean_seq:.4f} mean_entropy_bits={mean_ent}"
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_plan(config_path: str) -> int:
    try:
        cfg = parse_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    tasks = _make_tasks(cfg)
    try:
        records = _run_tasks(tasks, cfg.parallelism)
    except (ModelUnavailable, PlanAborted) as exc:
        print(f"model unavailable: {exc}", file=sys.stderr)
        return 3
    write_jsonl_atomic(cfg.out_records, [record_to_jsonable(r) for r in records])
    print(_summary_line(records))
    return 0


def cmd_sweep(config_path: str) -> int:
    try:
        cfg = parse_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    grid = [(c, n) for c in cfg.sweep_c_values for n in cfg.sweep_n_sim_values]
    tasks = _make_tasks(cfg, grid=grid)
    try:
        records = _run_tasks(tasks, cfg.parallelism)
    except (ModelUnavailable, PlanAborted) as exc:
        print(f"model unavailable: {exc}", file=sys.stderr)
        return 3
    runs_per_cell = len(cfg.instance_seeds) * len(cfg.run_seeds)
    rows = []
    for i, (c, n_sim) in enumerate(grid):
        cell = records[i * runs_per_cell : (i + 1) * runs_per_cell]
        rows.append(summarize_cell(c, n_sim, cell))
    write_csv_atomic(cfg.out_csv, SWEEP_COLUMNS, rows)
    write_jsonl_atomic(cfg.out_records, [record_to_jsonable(r) for r in records])
    print(f"cells={len(rows)} runs={len(records)} csv={cfg.out_csv}")
    return 0


def cmd_oracle(config_path: str) -> int:
    try:
        cfg = parse_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.oracle_objective not in ("mean_reward", "task_accuracy", "both"):
        print(f"config error: unknown oracle.objective {cfg.oracle_objective!r}", file=sys.stderr)
        return 2
    objectives = (
        ["mean_reward", "task_accuracy"]
        if cfg.oracle_objective == "both"
        else [cfg.oracle_objective]
    )
    rows = []
    for instance_seed in cfg.instance_seeds:
        instance = generate_instance(cfg.k, cfg.l, cfg.dag_kind, cfg.decoy_count, instance_seed)
        model = CachedModel(SyntheticModel(instance))
        state = model.initial_state()
        for objective in objectives:
            try:
                best_perm, best_score, table = oracle_exhaustive(state, model, objective)
            except TooLarge as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return 2
            rows.append(
                {
                    "instance_id": f"{cfg.dag_kind}-k{cfg.k}-d{cfg.decoy_count}-seed{instance_seed}",
                    "objective": objective,
                    "best_permutation": list(best_perm),
                    "best_score": best_score,
                    "table": [[list(p), s] for p, s in table],
                }
            )
    write_jsonl_atomic(cfg.out_oracle, rows)
    print(f"instances={len(cfg.instance_seeds)} objectives={objectives} out={cfg.out_oracle}")
    return 0


def _canonical_trace(trace_jsonable: dict) -> str:
    cleaned = dict(trace_jsonable)
    cleaned["decisions"] = [
        {k: v for k, v in d.items() if k != "wall_time"} for d in trace_jsonable["decisions"]
    ]
    return json.dumps(cleaned)


def _first_divergence(expected: dict, actual: dict) -> str:
    if expected["permutation"] != actual["permutation"]:
        for i, (a, b) in enumerate(zip(expected["permutation"], actual["permutation"])):
            if a != b:
                return f"decision {i}: chose slot {b}, recorded slot {a}"
    for i, (de, da) in enumerate(zip(expected["decisions"], actual["decisions"])):
        de = {k: v for k, v in de.items() if k != "wall_time"}
        da = {k: v for k, v in da.items() if k != "wall_time"}
        if de != da:
            return f"decision {i}: statistics differ"
    return "final state differs"


def cmd_replay(records_path: str, index: int | None) -> int:
    """Re-execute recorded runs and verify traces byte-for-byte (timings aside)."""
    try:
        with open(records_path, encoding="utf-8") as fh:
            raw = [json.loads(line) for line in fh if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot load records: {exc}", file=sys.stderr)
        return 2
    indices = range(len(raw)) if index is None else [index]
    for i in indices:
        if i < 0 or i >= len(raw):
            print(f"index {i} out of range for {len(raw)} records", file=sys.stderr)
            return 2
        record = record_from_jsonable(raw[i])
        payload = record.instance
        instance = instance_from_jsonable(payload["content"])
        if payload["model"]["kind"] == "remote":
            try:
                remote_id = register_remote_instance(payload["model"]["url"], payload["gen"])
                model = RemoteModel(payload["model"]["url"], remote_id, instance.l)
            except ModelUnavailable as exc:
                print(f"model unavailable: {exc}", file=sys.stderr)
                return 3
        else:
            model = CachedModel(SyntheticModel(instance))
        try:
            rerun = run_planner(
                record.planner, instance, record.search, model=model,
                instance_id=record.instance_id,
            )
        except (ModelUnavailable, PlanAborted) as exc:
            print(f"model unavailable: {exc}", file=sys.stderr)
            return 3
        expected = raw[i]["trace"]
        actual = trace_to_jsonable(rerun.trace)
        if _canonical_trace(expected) != _canonical_trace(actual):
            print(f"record {i}: MISMATCH ({_first_divergence(expected, actual)})")
            return 1
        print(f"record {i}: ok")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="slotplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("plan", "sweep", "oracle"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
    replay = sub.add_parser("replay")
    replay.add_argument("records")
    replay.add_argument("--index", type=int, default=None)
    args = parser.parse_args(argv)
    if args.command == "plan":
        return cmd_plan(args.config)
    if args.command == "sweep":
        return cmd_sweep(args.config)
    if args.command == "oracle":
        return cmd_oracle(args.config)
    return cmd_replay(args.records, args.index)


if __name__ == "__main__":
    sys.exit(main())
