"""Belief-graph adaptation from observations.

Carriers are static, so an observed carrier is matched back to its graph
node by geometry and feature similarity.  Carried sets are reconciled only
for carriers the robot has fully observed: matched objects are kept,
unmatched observations are added (re-homing an object known elsewhere in
the graph), and unmatched graph entries are removed.  Partial views must
never trigger removals, which is why reconciliation is gated on a full
observation certificate upstream.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .features import cosine_similarity, is_zero_feature
from .graph import Crsg
from .scene import ObjectInstance
from .world import Observation


class UpdateError(ValueError):
    pass


@dataclass
class MatchConfig:
    max_center_dist: float = 0.5        # m, carrier matching
    max_size_ratio_dev: float = 0.3     # per-axis extent ratio tolerance
    min_text_sim: float = 0.7
    min_visual_sim: float = 0.7
    carried_match_center_dist: float = 0.3  # m, carried-object matching

    def __post_init__(self):
        for name in ("max_center_dist", "carried_match_center_dist"):
            if getattr(self, name) <= 0:
                raise UpdateError(f"{name} must be positive")
        if not (0.0 <= self.max_size_ratio_dev < 1.0):
            raise UpdateError("max_size_ratio_dev must be in [0, 1)")


@dataclass
class CarriedDiff:
    carrier_id: str
    added: List[Observation] = field(default_factory=list)
    removed: List[str] = field(default_factory=list)
    kept: List[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.added and not self.removed


def _sizes_compatible(a_ext: np.ndarray, b_ext: np.ndarray, dev: float) -> bool:
    for ea, eb in zip(a_ext, b_ext):
        if eb <= 0 or ea <= 0:
            if abs(ea - eb) > 1e-9:
                return False
            continue
        ratio = float(ea) / float(eb)
        if not (1.0 - dev <= ratio <= 1.0 + dev):
            return False
    return True


def _feature_gate(obs_feat: np.ndarray, node_feat: np.ndarray, threshold: float) -> bool:
    # zero sentinel on either side: nothing to compare, gate passes
    if is_zero_feature(obs_feat) or is_zero_feature(node_feat):
        return True
    if obs_feat.shape != node_feat.shape:
        return False
    return cosine_similarity(obs_feat, node_feat) >= threshold


def match_carrier(obs: Observation, crsg: Crsg, config: MatchConfig) -> Optional[str]:
    """Match an observation to a graph carrier, or None.

    Gates: center distance, per-axis size ratio, text similarity, visual
    similarity.  Among qualifying carriers the nearest center wins, ties
    broken by smaller id.
    """
    best: Optional[Tuple[float, str]] = None
    for cid, node in crsg.carriers.items():
        dist = float(np.linalg.norm(obs.centroid - node.object.centroid))
        if dist > config.max_center_dist:
            continue
        if not _sizes_compatible(obs.observed_box.extents, node.object.box.extents,
                                 config.max_size_ratio_dev):
            continue
        if not _feature_gate(obs.text_feature, node.object.text_feature, config.min_text_sim):
            continue
        if not _feature_gate(obs.visual_feature, node.object.visual_feature, config.min_visual_sim):
            continue
        key = (dist, cid)
        if best is None or key < best:
            best = key
    return best[1] if best else None


def reconcile_carried(
    carrier_id: str,
    observations: Sequence[Observation],
    crsg: Crsg,
    config: MatchConfig,
) -> CarriedDiff:
    """Diff a fully observed carrier's occupants against the graph.

    Precondition: ``observations`` covers everything currently on the
    carrier.  Observations are matched to existing carried entries by
    center distance (within ``carried_match_center_dist``), compatible
    sizes and text similarity; matching is greedy nearest-first and
    one-to-one.
    """
    if carrier_id not in crsg.carriers:
        raise UpdateError(f"unknown carrier {carrier_id!r}")
    node = crsg.carriers[carrier_id]
    entries = dict(node.carried)

    pairs = []
    for obs in observations:
        for eid, entry in entries.items():
            dist = float(np.linalg.norm(obs.centroid - entry.centroid))
            if dist > config.carried_match_center_dist:
                continue
            if not _sizes_compatible(obs.observed_box.extents, entry.box.extents,
                                     config.max_size_ratio_dev):
                continue
            if not _feature_gate(obs.text_feature, entry.text_feature, config.min_text_sim):
                continue
            pairs.append((dist, obs.object_id, eid))
    pairs.sort()

    matched_obs: Dict[str, str] = {}
    matched_entries = set()
    for _, obs_id, eid in pairs:
        if obs_id in matched_obs or eid in matched_entries:
            continue
        matched_obs[obs_id] = eid
        matched_entries.add(eid)

    diff = CarriedDiff(carrier_id=carrier_id)
    for obs in observations:
        if obs.object_id in matched_obs:
            diff.kept.append(matched_obs[obs.object_id])
        else:
            diff.added.append(obs)
    diff.removed = sorted(set(entries) - matched_entries)
    diff.kept = sorted(set(diff.kept))
    return diff


def _instance_from_observation(obs: Observation, template: Optional[ObjectInstance]) -> ObjectInstance:
    if template is not None:
        return dataclasses.replace(
            template,
            box=obs.observed_box,
            centroid=obs.centroid.copy(),
            captions=list(obs.observed_captions),
            text_feature=obs.text_feature.copy(),
            visual_feature=obs.visual_feature.copy(),
        )
    return ObjectInstance(
        id=obs.object_id,
        captions=list(obs.observed_captions),
        box=obs.observed_box,
        centroid=obs.centroid.copy(),
        text_feature=obs.text_feature.copy(),
        visual_feature=obs.visual_feature.copy(),
    )


def apply_update(crsg: Crsg, diff: CarriedDiff) -> None:
    """Apply a carried-set diff to the graph in place.

    Added observations whose id is already known anywhere in the graph are
    re-homed (their old edge is dropped); unknown ids become new carried
    nodes.  Removed entries are parked in the graph's missing set so their
    identity survives until re-observed.  Applying the same diff twice is
    a no-op.
    """
    if diff.carrier_id not in crsg.carriers:
        raise UpdateError(f"unknown carrier {diff.carrier_id!r}")
    node = crsg.carriers[diff.carrier_id]
    before = set(node.carried)

    # Removals first: a move within one carrier shows up as removed+added
    # for the same id, and the addition must win.
    for rid in diff.removed:
        if rid in node.carried:
            crsg.missing[rid] = node.carried.pop(rid)

    for obs in diff.added:
        if obs.object_id in crsg.carriers:
            # carriers are static; never convert one into a carried object
            continue
        known = crsg.find(obs.object_id)
        if known is not None:
            crsg.detach(obs.object_id)
        node.carried[obs.object_id] = _instance_from_observation(obs, known)

    after = set(node.carried)
    if before != after:
        crsg.journal.append(
            {
                "seq": len(crsg.journal),
                "carrier": diff.carrier_id,
                "added": sorted(after - before),
                "removed": sorted(before - after),
            }
        )
