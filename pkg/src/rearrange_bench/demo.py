"""A small object database and five scene-graph templates.

Sizes are rough real-world bounding boxes in centimetres. Initial scenes live
on the left half of the default table and target scenes on the right half.
"""

from .geometry import BoundingBox, Pose
from .model import ObjectDatabase, ObjectModel, SetTag
from .scenegen.graph import Jitter, Relation, RelationEdge, SceneGraph, SlotNode, Template

_MODELS = [
    ("box_small", "box", (12, 10, 8), SetTag.TRIAL),
    ("box_flat", "box", (15, 12, 6), SetTag.CONTEST),
    ("cup_white", "cup", (8, 8, 10), SetTag.TRIAL),
    ("cup_mug", "cup", (9, 7, 9), SetTag.CONTEST),
    ("bowl_blue", "bowl", (15, 15, 6), SetTag.TRIAL),
    ("plate_round", "plate", (22, 22, 2.5), SetTag.TRIAL),
    ("plate_small", "plate", (20, 20, 2), SetTag.CONTEST),
    ("can_soup", "can", (7, 7, 12), SetTag.TRIAL),
    ("bottle_water", "bottle", (7, 7, 22), SetTag.CONTEST),
    ("pen_black", "pen", (14, 1.2, 1.2), SetTag.TRIAL),
    ("toy_duck", "toy", (9, 6, 7), SetTag.CONTEST),
]


def demo_database() -> ObjectDatabase:
    return ObjectDatabase(ObjectModel(mid, cat, BoundingBox(*dims), tag) for mid, cat, dims, tag in _MODELS)


def _root(slot, select, x, y, jitter=Jitter((2.0, 2.0, 0.0), 30.0)):
    return SlotNode(slot, tuple(select), Pose.from_translation(x, y, 0.0), jitter)


def _edge(parent, child, rel, dx=0.0, dy=0.0, jitter=Jitter((1.0, 1.0, 0.0), 20.0)):
    return RelationEdge(parent, child, Relation(rel), Pose.from_translation(dx, dy, 0.0), jitter)


def demo_templates() -> list[Template]:
    single = Template(
        "single",
        SceneGraph([_root("a", ["cup", "can", "toy"], -30, -15, Jitter((4.0, 4.0, 0.0), 45.0))]),
        SceneGraph([_root("a", ["cup", "can", "toy"], 30, 15, Jitter((4.0, 4.0, 0.0), 45.0))]),
    )
    stack = Template(
        "stack",
        SceneGraph(
            [_root("base", ["box"], -30, 0), SlotNode("top", ("cup", "can"))],
            [_edge("base", "top", "on_top_of")],
        ),
        SceneGraph(
            [_root("base", ["box"], 30, 0), SlotNode("top", ("cup", "can"))],
            [_edge("base", "top", "adjacent_to", dx=1.0)],
        ),
    )
    row = Template(
        "row",
        SceneGraph(
            [_root("plate", ["plate"], -30, 0), SlotNode("left", ("cup",)), SlotNode("right", ("bowl",))],
            [_edge("plate", "left", "adjacent_to", dy=1.0), _edge("plate", "right", "adjacent_to", dy=-1.0)],
        ),
        SceneGraph(
            [_root("plate", ["plate"], 30, 0), SlotNode("left", ("cup",)), SlotNode("right", ("bowl",))],
            [_edge("plate", "left", "adjacent_to", dx=-1.0), _edge("plate", "right", "on_top_of")],
        ),
    )
    tidy = Template(
        "tidy",
        SceneGraph(
            [
                _root("box", ["box"], -45, -25),
                _root("can", ["can"], -15, -25),
                _root("bottle", ["bottle"], -45, 20),
                _root("pen", ["pen"], -15, 20),
            ]
        ),
        SceneGraph(
            [_root("box", ["box"], 30, 0), SlotNode("can", ("can",)), SlotNode("bottle", ("bottle",)), SlotNode("pen", ("pen",))],
            [
                _edge("box", "can", "on_top_of"),
                _edge("box", "bottle", "adjacent_to", dx=1.0),
                _edge("box", "pen", "adjacent_to", dy=-1.0),
            ],
        ),
    )
    clutter = Template(
        "clutter",
        SceneGraph(
            [
                _root("plate", ["plate"], -22, 5),
                _root("bowl", ["bowl"], -48, 8),
                _root("cup", ["cup"], -48, -28),
                _root("can", ["can"], -20, -28),
                _root("toy", ["toy"], -30, 32),
            ]
        ),
        SceneGraph(
            [_root("plate", ["plate"], 28, 0), SlotNode("bowl", ("bowl",)), SlotNode("cup", ("cup",)),
             SlotNode("can", ("can",)), SlotNode("toy", ("toy",))],
            [
                _edge("plate", "bowl", "on_top_of"),
                _edge("plate", "cup", "adjacent_to", dx=1.0),
                _edge("plate", "can", "adjacent_to", dy=-1.0),
                _edge("plate", "toy", "adjacent_to", dy=1.0),
            ],
        ),
    )
    return [single, stack, row, tidy, clutter]
