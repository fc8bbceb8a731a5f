"""Simulator checks: planning against an independent Dijkstra, sensing,
travel bookkeeping and ground-truth displacement."""

import math
from random import Random

import numpy as np
import pytest

from carriernav.graph import CrsgConfig
from carriernav.scene import scene_from_dict
from carriernav.world import (
    DisplacementError,
    DisplacementEvent,
    GridWorld,
    Pose,
    SensorConfig,
    UnreachableGoalError,
    WorldError,
)

import oracles
from conftest import item_on, obj_dict, scene_dict, table_dict

SQRT2 = math.sqrt(2.0)


def empty_world(width=16, height=12, blocked=(), resolution=0.25, start=None):
    scene = scene_from_dict(scene_dict([], width=width, height=height,
                                       resolution=resolution, blocked=blocked))
    return GridWorld(scene, start_pose=start)


def random_world(rng: Random, width=18, height=14, p_block=0.3):
    blocked = [(ix, iy) for ix in range(width) for iy in range(height)
               if rng.random() < p_block]
    # keep at least one free cell
    if len(blocked) == width * height:
        blocked.pop()
    scene = scene_from_dict(scene_dict([], width=width, height=height,
                                       blocked=blocked))
    return GridWorld(scene)


class TestGridGeometry:
    def test_cell_round_trip(self):
        w = empty_world()
        assert w.cell_of([0.0, 0.0]) == (0, 0)
        assert w.cell_of([0.26, 0.51]) == (1, 2)
        center = w.cell_center((3, 2))
        assert np.allclose(center, [0.875, 0.625])
        assert w.cell_of(center) == (3, 2)

    def test_cell_of_out_of_bounds_raises(self):
        w = empty_world()
        with pytest.raises(WorldError):
            w.cell_of([-0.1, 0.5])
        with pytest.raises(WorldError):
            w.cell_of([99.0, 0.5])

    def test_snap_free_cell_prefers_nearest(self):
        w = empty_world(blocked=[(2, 2)])
        # dead center of the blocked cell: the four orthogonal neighbors tie
        # on distance, (ix, iy) order picks the west one
        assert w.snap_free_cell([0.625, 0.625]) == (1, 2)
        # already free: identity
        assert w.snap_free_cell([0.875, 0.625]) == (3, 2)

    def test_blocked_start_pose_rejected(self):
        with pytest.raises(WorldError):
            empty_world(blocked=[(0, 0)], start=Pose([0.125, 0.125]))


class TestPlanning:
    def test_trivial_and_straight_paths(self):
        w = empty_world()
        path, length = w.shortest_path([0.125, 0.125], [0.125, 0.125])
        assert path == [(0, 0)] and length == 0.0
        path, length = w.shortest_path([0.125, 0.125], [1.125, 0.125])
        assert length == pytest.approx(4 * 0.25)
        assert path[0] == (0, 0) and path[-1] == (4, 0)

    def test_diagonal_costs_sqrt2(self):
        w = empty_world()
        _, length = w.shortest_path([0.125, 0.125], [1.125, 1.125])
        assert length == pytest.approx(4 * SQRT2 * 0.25)

    def test_no_corner_cutting(self):
        # start boxed in by its two orthogonal neighbors: squeezing out
        # through the diagonal gap would be corner cutting
        w = empty_world(width=3, height=3, blocked=[(1, 0), (0, 1)],
                        start=Pose([0.125, 0.125]))
        with pytest.raises(UnreachableGoalError):
            w.shortest_path(w.cell_center((0, 0)), w.cell_center((2, 2)))

    def test_detour_around_blocked_diagonal(self):
        w = empty_world(width=4, height=4, blocked=[(1, 1)])
        path, length = w.shortest_path(w.cell_center((0, 0)), w.cell_center((2, 2)))
        # every diagonal past the blocked cell is corner cutting, so the
        # detour is four axis steps
        assert length == pytest.approx(4 * 0.25)
        for a, b in zip(path, path[1:]):
            dx, dy = b[0] - a[0], b[1] - a[1]
            assert max(abs(dx), abs(dy)) == 1
            if dx != 0 and dy != 0:
                assert w.is_free((a[0] + dx, a[1])) and w.is_free((a[0], a[1] + dy))

    def test_unreachable_raises(self):
        # wall column splits the grid
        blocked = [(2, iy) for iy in range(6)]
        w = empty_world(width=6, height=6, blocked=blocked)
        with pytest.raises(UnreachableGoalError):
            w.shortest_path(w.cell_center((0, 0)), w.cell_center((5, 0)))

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_independent_dijkstra(self, seed):
        rng = Random(f"world/{seed}")
        w = random_world(rng)
        occ = [[bool(w.occupancy[iy, ix]) for ix in range(w.width)]
               for iy in range(w.height)]
        free = [(ix, iy) for ix in range(w.width) for iy in range(w.height)
                if w.is_free((ix, iy))]
        for _ in range(6):
            start = rng.choice(free)
            goal = rng.choice(free)
            expected = oracles.dijkstra_grid_length(occ, w.resolution, start, goal)
            if math.isinf(expected):
                with pytest.raises(UnreachableGoalError):
                    w.shortest_path(w.cell_center(start), w.cell_center(goal))
                continue
            path, length = w.shortest_path(w.cell_center(start), w.cell_center(goal))
            assert length == pytest.approx(expected, abs=1e-9)
            assert path[0] == start and path[-1] == goal
            for cell in path:
                assert w.is_free(cell)

    def test_symmetric_lengths(self):
        w = random_world(Random("world/sym"))
        free = [(ix, iy) for ix in range(w.width) for iy in range(w.height)
                if w.is_free((ix, iy))]
        rng = Random(0)
        for _ in range(5):
            a, b = rng.choice(free), rng.choice(free)
            try:
                _, l_ab = w.shortest_path(w.cell_center(a), w.cell_center(b))
                _, l_ba = w.shortest_path(w.cell_center(b), w.cell_center(a))
            except UnreachableGoalError:
                continue
            assert l_ab == pytest.approx(l_ba, abs=1e-12)

    def test_distance_field_agrees_with_planner(self):
        w = random_world(Random("world/field"), p_block=0.25)
        start = w.cell_center(w.snap_free_cell([0.5, 0.5]))
        field = w.distance_field(start)
        free = [(ix, iy) for ix in range(w.width) for iy in range(w.height)
                if w.is_free((ix, iy))]
        rng = Random(1)
        for _ in range(8):
            goal = rng.choice(free)
            d_field = field.to_cell(goal)
            try:
                _, d_astar = w.shortest_path(start, w.cell_center(goal))
            except UnreachableGoalError:
                assert math.isinf(d_field)
                continue
            assert d_field == pytest.approx(d_astar, abs=1e-9)

    def test_distance_field_blocked_cell_is_inf(self):
        w = empty_world(blocked=[(2, 2)])
        field = w.distance_field([0.125, 0.125])
        assert math.isinf(field.to_cell((2, 2)))
        assert field.to_point([0.125, 0.125]) == 0.0


def sensing_world():
    table = table_dict("table_0", 2.0, 2.0)
    objs = [
        table,
        item_on("cup_0", ["red cup", "red cup", "cup"], table),
        obj_dict("cup_far", ["blue cup", "blue cup", "cup"], 5.0, 2.0, 0.08, 0.08, 0.0, 0.12),
    ]
    scene = scene_from_dict(scene_dict(objs, width=28, height=20))
    return GridWorld(scene, start_pose=Pose([2.0, 3.5]))


class TestSensing:
    def test_radius_gate(self):
        w = sensing_world()
        seen = {o.object_id for o in w.observe(Pose([2.0, 3.5]), SensorConfig(radius=2.5))}
        assert seen == {"table_0", "cup_0"}
        seen_all = {o.object_id for o in w.observe(Pose([2.0, 3.5]), SensorConfig(radius=25.0))}
        assert seen_all == {"table_0", "cup_0", "cup_far"}

    def test_field_of_view_gate(self):
        w = sensing_world()
        # heading east with a quarter-circle fov: the cup 1.5 m north is out
        pose = Pose([2.0, 0.5], heading=0.0)
        seen = {o.object_id for o in w.observe(pose, SensorConfig(radius=25.0, fov=math.pi / 2))}
        assert "cup_far" in seen  # 27 degrees off-axis, inside the cone
        assert "table_0" not in seen  # straight north, outside
        pose_north = Pose([2.0, 0.5], heading=math.pi / 2)
        seen_north = {o.object_id for o in w.observe(pose_north, SensorConfig(radius=25.0, fov=math.pi / 2))}
        assert "table_0" in seen_north

    def test_occlusion_blocks_line_of_sight(self):
        wall = [(8, iy) for iy in range(20)]
        table = table_dict("table_0", 4.0, 2.0)
        scene = scene_from_dict(scene_dict([table], width=28, height=20, blocked=wall))
        w = GridWorld(scene, start_pose=Pose([0.5, 2.0]))
        pose = Pose([0.5, 2.0])
        assert w.observe(pose, SensorConfig(radius=25.0, occlusion=True)) == []
        assert [o.object_id for o in w.observe(pose, SensorConfig(radius=25.0))] == ["table_0"]

    def test_observation_payload(self):
        w = sensing_world()
        obs = {o.object_id: o for o in w.observe(Pose([2.0, 3.5]), SensorConfig())}
        cup = obs["cup_0"]
        assert cup.observed_captions == ["red cup", "red cup", "cup"]
        assert cup.mean_depth == pytest.approx(
            float(np.linalg.norm(cup.centroid[:2] - np.array([2.0, 3.5]))))
        # payload is a copy: mutating it must not touch ground truth
        cup.centroid[0] += 99.0
        assert w.object("cup_0").centroid[0] < 10.0

    def test_sensor_config_validation(self):
        with pytest.raises(WorldError):
            SensorConfig(radius=0.0)
        with pytest.raises(WorldError):
            SensorConfig(fov=0.0)


class TestTravel:
    def test_travel_moves_robot_and_measures(self):
        w = sensing_world()
        path, length = w.shortest_path(w.robot.position, [5.0, 2.0])
        log = w.travel(path, SensorConfig())
        assert log.length == pytest.approx(length)
        assert np.allclose(w.robot.position, w.cell_center(path[-1]))
        assert len(log.samples) == len(path)

    def test_travel_dedupes_observations(self):
        w = sensing_world()
        path, _ = w.shortest_path(w.robot.position, [5.0, 2.0])
        log = w.travel(path, SensorConfig())
        assert sorted(log.observations) == ["cup_0", "cup_far", "table_0"]
        fresh_ids = [o.object_id for _, fresh in log.samples for o in fresh]
        assert sorted(fresh_ids) == ["cup_0", "cup_far", "table_0"]  # once each

    def test_empty_path_is_a_noop(self):
        w = sensing_world()
        before = w.robot.position.copy()
        log = w.travel([], SensorConfig())
        assert log.length == 0.0 and log.observations == {}
        assert np.array_equal(w.robot.position, before)


class TestGroundTruth:
    def test_ground_truth_carried_matches_oracle(self):
        cfg = CrsgConfig()
        t0 = table_dict("table_0", 2.0, 2.0)
        t1 = table_dict("table_1", 5.0, 2.0)
        objs = [t0, t1,
                item_on("cup_0", ["red cup"], t0),
                item_on("cup_1", ["blue cup"], t1, dx=0.2),
                obj_dict("cup_2", ["green cup"], 3.5, 4.0, 0.08, 0.08, 0.0, 0.12)]
        w = GridWorld(scene_from_dict(scene_dict(objs, width=32, height=20)))
        for cid in ("table_0", "table_1"):
            carrier = w.object(cid)
            expected = set()
            for oid, obj in w.scene.objects.items():
                if oid == cid or not oracles.rests_on(carrier, obj, cfg):
                    continue
                best = None
                for other_id, other in w.scene.objects.items():
                    if other_id == oid or not oracles.geometric_base(other, cfg):
                        continue
                    if not oracles.rests_on(other, obj, cfg):
                        continue
                    d = float(np.linalg.norm(obj.centroid - other.centroid))
                    if best is None or (d, other_id) < best:
                        best = (d, other_id)
                if best and best[1] == cid:
                    expected.add(oid)
            assert set(w.ground_truth_carried(cid, cfg)) == expected

    def test_stacked_items_do_not_capture_each_other(self):
        # two near-coincident lamps: each one's nearest predicate-satisfying
        # object is the other lamp, but items are never bases, so the table
        # must keep both
        cfg = CrsgConfig()
        t0 = table_dict("table_0", 2.0, 2.0)
        objs = [t0,
                item_on("lamp_0", ["white lamp"], t0, dx=0.01, ex=0.18, ey=0.18, h=0.4),
                item_on("lamp_1", ["black lamp"], t0, dx=-0.01, ex=0.18, ey=0.18, h=0.4)]
        w = GridWorld(scene_from_dict(scene_dict(objs, width=32, height=20)))
        assert oracles.rests_on(w.object("lamp_0"), w.object("lamp_1"), cfg)
        assert w.ground_truth_carried("table_0", cfg) == ["lamp_0", "lamp_1"]

    def test_carried_observations_cover_the_carrier(self):
        cfg = CrsgConfig()
        w = sensing_world()
        obs = w.carried_observations("table_0", Pose([2.0, 3.5]), cfg)
        assert [o.object_id for o in obs] == ["cup_0"]

    def test_unknown_object_raises(self):
        w = sensing_world()
        with pytest.raises(WorldError):
            w.object("ghost_0")
        assert not w.has_object("ghost_0")


class TestDisplacement:
    CFG = CrsgConfig()

    def two_table_world(self):
        t0 = table_dict("table_0", 2.0, 2.0)
        t1 = table_dict("table_1", 5.0, 2.0)
        objs = [t0, t1, item_on("cup_0", ["red cup", "red cup", "cup"], t0)]
        return GridWorld(scene_from_dict(scene_dict(objs, width=32, height=20)))

    def test_move_reseats_object(self):
        w = self.two_table_world()
        w.apply_displacement(DisplacementEvent(kind="move", object_id="cup_0",
                                               target_carrier_id="table_1"), self.CFG)
        assert w.ground_truth_carried("table_0", self.CFG) == []
        assert w.ground_truth_carried("table_1", self.CFG) == ["cup_0"]
        cup = w.object("cup_0")
        assert cup.box.min[2] == pytest.approx(0.75)  # resting on the new top

    def test_move_spot_index_varies_placement(self):
        w1 = self.two_table_world()
        w2 = self.two_table_world()
        ev = DisplacementEvent(kind="move", object_id="cup_0", target_carrier_id="table_1")
        w1.apply_displacement(ev, self.CFG, spot_index=0)
        w2.apply_displacement(ev, self.CFG, spot_index=7)
        p1 = w1.object("cup_0").centroid
        p2 = w2.object("cup_0").centroid
        assert not np.allclose(p1, p2)

    def test_remove_deletes_object(self):
        w = self.two_table_world()
        w.apply_displacement(DisplacementEvent(kind="remove", object_id="cup_0"), self.CFG)
        assert not w.has_object("cup_0")
        assert w.ground_truth_carried("table_0", self.CFG) == []

    def test_add_places_new_object(self):
        w = self.two_table_world()
        w.apply_displacement(DisplacementEvent(
            kind="add", object_id="",
            target_carrier_id="table_1",
            new_object={"id": "phone_0", "captions": ["black phone", "phone"],
                        "extents": [0.15, 0.07, 0.02]}), self.CFG)
        assert w.ground_truth_carried("table_1", self.CFG) == ["phone_0"]
        assert w.object("phone_0").text_feature.any()

    def test_event_validation(self):
        with pytest.raises(DisplacementError):
            DisplacementEvent(kind="teleport", object_id="cup_0")
        with pytest.raises(DisplacementError):
            DisplacementEvent(kind="move", object_id="cup_0")  # no target
        with pytest.raises(DisplacementError):
            DisplacementEvent(kind="add")  # no payload
        w = self.two_table_world()
        with pytest.raises(DisplacementError):
            w.apply_displacement(DisplacementEvent(kind="remove", object_id="ghost"), self.CFG)
        with pytest.raises(DisplacementError):
            w.apply_displacement(DisplacementEvent(
                kind="add", target_carrier_id="table_1",
                new_object={"id": "cup_0"}), self.CFG)  # id collision

    def test_no_free_spot_raises(self):
        # a carrier already paved edge to edge with trays has no room left
        t0 = table_dict("table_0", 2.0, 2.0)
        objs = [t0]
        for i in range(4):
            objs.append(item_on(f"tray_{i}", ["white tray"], t0,
                                dx=-0.45 + 0.3 * i, ex=0.30, ey=0.78, h=0.02))
        objs.append(obj_dict("cup_0", ["red cup"], 5.0, 2.0, 0.08, 0.08, 0.0, 0.12))
        w = GridWorld(scene_from_dict(scene_dict(objs, width=32, height=20)))
        with pytest.raises(DisplacementError):
            w.apply_displacement(DisplacementEvent(
                kind="move", object_id="cup_0", target_carrier_id="table_0"), self.CFG)

    def test_world_copies_scene(self):
        # displacements must never leak back into the parsed scene object
        scene = scene_from_dict(scene_dict([
            table_dict("table_0", 2.0, 2.0),
            table_dict("table_1", 5.0, 2.0),
            item_on("cup_0", ["red cup"], table_dict("table_0", 2.0, 2.0)),
        ], width=32, height=20))
        original = scene.objects["cup_0"].centroid.copy()
        w = GridWorld(scene)
        w.apply_displacement(DisplacementEvent(kind="move", object_id="cup_0",
                                               target_carrier_id="table_1"), self.CFG)
        assert np.array_equal(scene.objects["cup_0"].centroid, original)
