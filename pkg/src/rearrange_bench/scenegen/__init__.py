from .generate import (
    GeneratedTask,
    derive_seed,
    generate_batch,
    generate_task,
    graph_relations,
    instantiate_poses,
    make_rng,
    sample_objects,
    splitmix64,
    trial_count,
)
from .graph import (
    GenerationConfig,
    Jitter,
    Relation,
    RelationEdge,
    SceneGraph,
    SlotNode,
    Template,
    Workspace,
)
from .validity import (
    SceneRelation,
    ValidationResult,
    Violation,
    sampled_overlap_count,
    validate_scene,
)

__all__ = [
    "GeneratedTask",
    "GenerationConfig",
    "Jitter",
    "Relation",
    "RelationEdge",
    "SceneGraph",
    "SceneRelation",
    "SlotNode",
    "Template",
    "ValidationResult",
    "Violation",
    "Workspace",
    "derive_seed",
    "generate_batch",
    "generate_task",
    "graph_relations",
    "instantiate_poses",
    "make_rng",
    "sample_objects",
    "sampled_overlap_count",
    "splitmix64",
    "trial_count",
    "validate_scene",
]
