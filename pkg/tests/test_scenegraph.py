import json
import math

import numpy as np
import pytest

from spath.envgen import rf1_like, rf2_like
from spath.scenegraph import (
    BLOCKED,
    Doorway,
    Room,
    SceneGraph,
    SceneGraphError,
    WallPlane,
    build_semantic_graph,
    dump_scene_graph,
    load_scene_graph,
    set_doorway_state,
)


def _box(rid, x0, y0, x1, y1):
    walls = (
        WallPlane((1, 0, 0), -x0),
        WallPlane((-1, 0, 0), x1),
        WallPlane((0, 1, 0), -y0),
        WallPlane((0, -1, 0), y1),
    )
    return Room(rid, ((x0 + x1) / 2, (y0 + y1) / 2, 0), walls)


def test_roundtrip(two_rooms):
    sg, _ = two_rooms
    again = load_scene_graph(dump_scene_graph(sg))
    assert again == sg
    assert again.n_walls == 8


def test_semantic_weights_are_centroid_distances(two_rooms):
    sg, _ = two_rooms
    g = build_semantic_graph(sg)
    assert g.weight("A", "D0") == pytest.approx(2.6)
    assert g.weight("D0", "B") == pytest.approx(2.5)
    assert g.kinds["D0"] == "doorway"


def test_blocked_doorway_weight_is_infinite(two_rooms):
    sg, _ = two_rooms
    g = build_semantic_graph(set_doorway_state(sg, "D0", False))
    assert g.weight("A", "D0") == BLOCKED == math.inf


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d["rooms"][0]["walls"].pop() and d["rooms"][0]["walls"].pop(), "fewer than 3"),
        (lambda d: d["rooms"][0].update(centroid=[20.0, 2.0, 0.0]), "outside"),
        (lambda d: d["doorways"][0].update(connects=["A", "Z"]), "unknown room"),
        (lambda d: d["doorways"][0].update(connects=["A", "A"]), "distinct"),
        (lambda d: d["doorways"][0].update(centroid=[2.5, 2.0, 0.0]), "farther"),
        (lambda d: d["doorways"][0].update(width=0.0), "non-positive"),
        (lambda d: d.update(schema="other/9"), "schema"),
        (lambda d: d["rooms"].append(dict(d["rooms"][0])), "duplicate"),
        (lambda d: d["rooms"][0]["walls"][0].update(normal=[2, 0, 0]), "non-unit"),
        (lambda d: d["rooms"][0].update(centroid=[1.0, 2.0]), "3 components"),
    ],
)
def test_validation_errors(two_rooms, mutate, message):
    doc = json.loads(dump_scene_graph(two_rooms[0]))
    mutate(doc)
    with pytest.raises(SceneGraphError, match=message):
        load_scene_graph(json.dumps(doc))


def test_invalid_json():
    with pytest.raises(SceneGraphError, match="invalid JSON"):
        load_scene_graph("{nope")


def test_from_lists_builds_valid_graph():
    sg = SceneGraph.from_lists(
        [_box("A", 0, 0, 4, 4), _box("B", 4.2, 0, 8, 4)],
        [Doorway("D", (4.1, 2, 0), 1.0, ("A", "B"))],
    )
    assert [d.id for d in sg.doorways_of("B")] == ["D"]
    assert sg.doorway_states() == {"D": True}


def test_reference_floor_counts():
    # RF1: 88 walls, 23 doorways, 22 rooms. RF2: 32 walls, 8 doorways, 8 rooms.
    sg1, _ = rf1_like()
    assert (sg1.n_walls, len(sg1.doorways), len(sg1.rooms)) == (88, 23, 22)
    sg2, _ = rf2_like()
    assert (sg2.n_walls, len(sg2.doorways), len(sg2.rooms)) == (32, 8, 8)


def _pair(traversable=True):
    walls = (WallPlane((1, 0, 0), 1.0), WallPlane((-1, 0, 0), 1.0), WallPlane((0, 1, 0), 1.0), WallPlane((0, -1, 0), 1.0))
    far = (WallPlane((1, 0, 0), -2.0), WallPlane((-1, 0, 0), 8.0), WallPlane((0, 1, 0), 1.0), WallPlane((0, -1, 0), 9.0))
    rooms = [Room("A", (0, 0, 0), walls), Room("B", (5, 5, 0), far)]
    return SceneGraph.from_lists(rooms, [Doorway("D", (3, 4, 0), 1.0, ("A", "B"), traversable)], validate=False)


def test_three_four_five_weight():
    assert build_semantic_graph(_pair()).weight("A", "D") == 5.0
    assert build_semantic_graph(_pair(False)).weight("A", "D") == math.inf


def test_doorway_state_toggle_and_idempotence(two_rooms):
    sg, _ = two_rooms
    closed = set_doorway_state(sg, "D0", False)
    assert set_doorway_state(closed, "D0", False) == closed
    g = build_semantic_graph(set_doorway_state(closed, "D0", True))
    assert math.isfinite(g.weight("A", "D0")) and math.isfinite(g.weight("D0", "B"))
    with pytest.raises(KeyError):
        set_doorway_state(sg, "nope", False)


def test_chain_graph_shape(chain3_env):
    g = chain3_env.semantic_graph
    assert len(g.nodes) == 5
    finite = [e for e in g.edges() if math.isfinite(e[2])]
    assert len(finite) == 4


def test_weights_symmetric_and_euclidean(rf2_env):
    g = rf2_env.semantic_graph
    for a, b, w in g.edges():
        assert g.weight(b, a) == w
        assert w == pytest.approx(float(np.linalg.norm(g.positions[a] - g.positions[b])), abs=1e-9)


def test_unknown_room_error_names_doorway(two_rooms):
    doc = json.loads(dump_scene_graph(two_rooms[0]))
    doc["doorways"][0]["connects"] = ["A", "Q"]
    with pytest.raises(SceneGraphError) as info:
        load_scene_graph(json.dumps(doc))
    assert info.value.entity == "D0"
