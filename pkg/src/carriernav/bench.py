"""Benchmark harness: metrics, sequence execution, suite runner.

Metrics follow the standard navigation conventions: SR is the fraction of
successful tasks, SPL weights each success by shortest/max(shortest,
traveled) and scores failures zero, and Tasks_SR(i) is the fraction of
multi-task sequences whose first i tasks all succeeded.

``run_suite`` executes a (scenario x variant) matrix, optionally across a
process pool, and writes two artifacts: ``results.jsonl`` (one row per
episode, sorted) and ``report.json`` (per-variant aggregates).  Neither
file contains wall-clock times or other run-dependent values, so reruns
with the same inputs are byte-identical regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .graph import CrsgConfig, build_crsg
from .policy import (
    EpisodeResult,
    PolicyConfig,
    Task,
    VARIANTS,
    VariantSpec,
    apply_observation_updates,
    run_task,
)
from .priors import CarrierPriorOracle, KeywordPriorOracle
from .scenarios import Scenario, load_scenario
from .update import MatchConfig
from .world import GridWorld, SensorConfig, UnreachableGoalError


class BenchError(RuntimeError):
    pass


def spl(success: bool, shortest: float, traveled: float) -> float:
    """Success weighted by path efficiency; 0 on failure.

    A zero-length shortest path with zero travel counts as a perfect 1.0
    (the robot started on the goal).
    """
    if shortest < 0 or traveled < 0:
        raise BenchError("path lengths must be non-negative")
    if not success:
        return 0.0
    denom = max(shortest, traveled)
    if denom == 0.0:
        return 1.0
    return shortest / denom


def success_rate(results: Sequence[EpisodeResult]) -> float:
    if not results:
        return 0.0
    return sum(1 for r in results if r.success) / len(results)


def mean_spl(results: Sequence[EpisodeResult]) -> float:
    if not results:
        return 0.0
    return sum(spl(r.success, r.shortest, r.traveled) for r in results) / len(results)


def tasks_sr(sequences: Sequence[Sequence[EpisodeResult]]) -> List[float]:
    """Tasks_SR(i): fraction of sequences whose first i tasks all succeed,
    for i = 1 .. longest sequence."""
    if not sequences:
        return []
    depth = max(len(seq) for seq in sequences)
    out = []
    for i in range(1, depth + 1):
        good = 0
        for seq in sequences:
            head = seq[:i]
            if len(head) == i and all(r.success for r in head):
                good += 1
        out.append(good / len(sequences))
    return out


def episode_seed(scenario_name: str, variant: str, task_index: int) -> int:
    """Stable per-episode seed, independent of execution order."""
    digest = hashlib.sha256(
        f"{scenario_name}|{variant}|{task_index}".encode()
    ).digest()
    return int.from_bytes(digest[:8], "big")


def run_sequence(
    scenario: Scenario,
    variant: VariantSpec = VARIANTS["ours"],
    prior: Optional[CarrierPriorOracle] = None,
) -> List[EpisodeResult]:
    """Run a scenario's task list in order on one live world.

    The belief graph is built from the scenario's scene, then the events
    displace objects in the world only; the robot pose persists across
    tasks.  Events with trigger ``after-task-<k>`` fire once task k
    (1-based) completes.
    """
    prior = prior or KeywordPriorOracle()
    world = GridWorld(scenario.scene, start_pose=scenario.start_pose)
    crsg = build_crsg(scenario.scene, config=scenario.crsg, prior=prior)
    for spec in scenario.events_for("before-episode"):
        world.apply_displacement(spec.to_displacement(), scenario.crsg,
                                 spot_index=spec.spot_index)
    results = []
    for k, task_spec in enumerate(scenario.tasks):
        rng = Random(episode_seed(scenario.name, variant.name, k))
        result = run_task(
            world,
            crsg,
            task_spec.to_task(),
            policy_cfg=scenario.policy,
            sensor_cfg=scenario.sensor,
            match_cfg=scenario.match,
            crsg_cfg=scenario.crsg,
            prior=prior,
            variant=variant,
            rng=rng,
            task_index=k,
        )
        results.append(result)
        for spec in scenario.events_for(f"after-task-{k + 1}"):
            world.apply_displacement(spec.to_displacement(), scenario.crsg,
                                     spot_index=spec.spot_index)
    return results


def full_coverage_tour(
    world: GridWorld,
    crsg,
    sensor: Optional[SensorConfig] = None,
    match: Optional[MatchConfig] = None,
    crsg_cfg: Optional[CrsgConfig] = None,
) -> List[str]:
    """Visit every carrier in id order, reconciling the graph at each stop.

    Returns the ids visited.  After the tour the graph's carried relation
    matches the live world exactly, because every carrier was granted a
    full carried view at its side.
    """
    sensor = sensor or SensorConfig()
    match = match or MatchConfig()
    crsg_cfg = crsg_cfg or CrsgConfig()
    visited = []
    for cid in sorted(crsg.carriers):
        node = crsg.carriers[cid]
        try:
            path, _ = world.shortest_path(world.robot.position,
                                          node.object.centroid[:2])
        except UnreachableGoalError:
            raise BenchError(f"carrier {cid} unreachable during coverage tour")
        log = world.travel(path, sensor)
        merged = dict(log.observations)
        for obs in world.carried_observations(cid, world.robot, crsg_cfg):
            merged.setdefault(obs.object_id, obs)
        apply_observation_updates(world, crsg, merged, match, crsg_cfg)
        visited.append(cid)
    return visited


# --- suite runner


def _episode_row(scenario_name: str, variant: str, r: EpisodeResult) -> dict:
    return {
        "scenario": scenario_name,
        "variant": variant,
        "task_index": r.task_index,
        "success": r.success,
        "traveled": r.traveled,
        "shortest": r.shortest,
        "spl": spl(r.success, r.shortest, r.traveled),
        "actions": r.action_count,
    }


def _run_job(job: Tuple[str, str]) -> List[dict]:
    scenario_path, variant_name = job
    scenario = load_scenario(scenario_path)
    results = run_sequence(scenario, VARIANTS[variant_name])
    return [_episode_row(scenario.name, variant_name, r) for r in results]


@dataclass
class SuiteReport:
    rows: List[dict]
    variants: Dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"episodes": len(self.rows), "variants": self.variants}


def _aggregate(rows: List[dict]) -> Dict[str, dict]:
    by_variant: Dict[str, List[dict]] = {}
    for row in rows:
        by_variant.setdefault(row["variant"], []).append(row)
    out = {}
    for variant, vrows in sorted(by_variant.items()):
        sequences: Dict[str, List[dict]] = {}
        for row in vrows:
            sequences.setdefault(row["scenario"], []).append(row)
        seq_results = []
        for name in sorted(sequences):
            seq = sorted(sequences[name], key=lambda r: r["task_index"])
            seq_results.append([
                EpisodeResult(task_index=r["task_index"], success=r["success"],
                              traveled=r["traveled"], shortest=r["shortest"])
                for r in seq
            ])
        flat = [r for seq in seq_results for r in seq]
        out[variant] = {
            "episodes": len(vrows),
            "sr": success_rate(flat),
            "spl": mean_spl(flat),
            "tasks_sr": tasks_sr(seq_results),
        }
    return out


def run_suite(
    scenario_paths: Sequence[str],
    variant_names: Sequence[str] = ("ours",),
    out_dir: Optional[str] = None,
    workers: int = 1,
) -> SuiteReport:
    """Run every (scenario, variant) pair and aggregate the results.

    Jobs execute in sorted order (or across a process pool; the output is
    identical either way).  With ``out_dir`` set, writes ``results.jsonl``
    and ``report.json``.
    """
    for name in variant_names:
        if name not in VARIANTS:
            raise BenchError(f"unknown variant {name!r}; known: {sorted(VARIANTS)}")
    if workers < 1:
        raise BenchError("workers must be >= 1")
    jobs = sorted((str(p), v) for p in scenario_paths for v in sorted(set(variant_names)))
    if not jobs:
        raise BenchError("no scenarios to run")

    if workers == 1:
        chunks = [_run_job(job) for job in jobs]
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            chunks = pool.map(_run_job, jobs, chunksize=1)

    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["scenario"], r["variant"], r["task_index"]))
    report = SuiteReport(rows=rows, variants=_aggregate(rows))

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.jsonl", "w") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        with open(out / "report.json", "w") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    return report
