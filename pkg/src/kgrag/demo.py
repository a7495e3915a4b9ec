"""Demo knowledge graph: screw-placement models trained at a robotic cell.

Four anonymized models (a23b, xT77, p1b3, qdk1) were trained with the
September 2024 niryo dataset to predict screw-placement success from screw
geometry and robot-arm attributes. The graph records the models, their
dataset, preprocessing runs, global-insight explanations, and both
manufacturing tasks.

Note on fixture data: the label "GlobalInsight" is used consistently for the
explanation class, and the four algorithm families (logistic regression,
decision tree, random forest, neural network) are assigned to the models
a23b/xT77/p1b3/qdk1 in that order; the assignment is descriptive metadata,
not ground truth.
"""

from __future__ import annotations

from pathlib import Path

from .kg import ClassDef, Edge, Instance, KnowledgeGraph, RelationDef, assemble_graph, dump_graph

NIRYO_DATASET = "niryo_dataset_september_2024"
MODEL_IDS = ("model_a23b", "model_xT77", "model_p1b3", "model_qdk1")

_CLASSES = [
    ClassDef(
        "Preprocessing",
        description="Describes the methods and algorithms with which the dataset was created",
    ),
    ClassDef("Dataset", description="A Dataset consisting of multiple Rows."),
    ClassDef(
        "GlobalInsight",
        description="A global insight is a concrete explanation of a model.",
    ),
    ClassDef("Model", description="A model is an algorithm trained on data."),
    ClassDef("Task", description="The task that a model fulfills"),
    ClassDef("Attribute", description="A measured or configured property of a component, dataset or task."),
    ClassDef("Gripper", description="The gripper mounted on a robot arm."),
    ClassDef("Material", description="A material a mechanical component is made of."),
    ClassDef("Mechanical_Component", description="A mechanical component of the manufacturing cell."),
    ClassDef("Robotarm", description="A robotic manipulator operating in the cell."),
    ClassDef("Screw", description="A screw handled by the manufacturing tasks."),
    ClassDef("TestCase", description="A recorded test case for a task execution."),
]

_ALGORITHMS = ("logistic regression", "decision tree", "random forest", "neural network")


def build_demo_kg() -> KnowledgeGraph:
    """Construct the demo graph; validated by the same path as file loading."""
    instances = [
        Instance(
            NIRYO_DATASET,
            types=("Dataset",),
            properties=(
                ("collected", "September 2024"),
                ("description", "Recordings of the niryo robot arm placing screws into holes at varying angles."),
            ),
        ),
    ]
    for model_id, algorithm in zip(MODEL_IDS, _ALGORITHMS):
        instances.append(
            Instance(model_id, types=("Model",), properties=(("algorithm", algorithm),))
        )
    instances += [
        Instance(
            "ScrewPlacement",
            types=("Task",),
            properties=(
                ("description", "Placing screws into holes at varying angles."),
            ),
        ),
        Instance(
            "ScrewPicking",
            types=("Task",),
            properties=(
                ("description", "Picking up screws from different positions."),
            ),
        ),
        Instance(
            "preprocessing_niryo_a23b",
            types=("Preprocessing",),
            properties=(("method", "outlier removal and angle normalization"),),
        ),
        Instance(
            "preprocessing_niryo_xT77",
            types=("Preprocessing",),
            properties=(("method", "feature scaling and class balancing"),),
        ),
        Instance(
            "global_insights_a23b",
            types=("GlobalInsight",),
            properties=(
                ("summary", "Screw length and insertion angle dominate the placement-success prediction of model_a23b."),
            ),
        ),
        Instance(
            "global_insights_xT77",
            types=("GlobalInsight",),
            properties=(
                ("summary", "Gripper force and screw head type drive most decisions of model_xT77."),
            ),
        ),
    ]

    edges = []
    for model_id in MODEL_IDS:
        edges.append(Edge(model_id, "trainedWith", NIRYO_DATASET))
        edges.append(Edge(NIRYO_DATASET, "usedBy", model_id))
        edges.append(Edge(model_id, "achieves", "ScrewPlacement"))
        edges.append(Edge("ScrewPlacement", "achievedBy", model_id))
    edges += [
        Edge("preprocessing_niryo_a23b", "done_for", "model_a23b"),
        Edge("preprocessing_niryo_a23b", "hasInput", NIRYO_DATASET),
        Edge("preprocessing_niryo_xT77", "done_for", "model_xT77"),
        Edge("preprocessing_niryo_xT77", "hasInput", NIRYO_DATASET),
        Edge("global_insights_a23b", "explains", "model_a23b"),
        Edge("global_insights_xT77", "explains", "model_xT77"),
    ]

    relation_schema = [
        RelationDef("Preprocessing", "done_for", "Model"),
        RelationDef("Preprocessing", "hasInput", "Dataset"),
        RelationDef("Model", "trainedWith", "Dataset"),
        RelationDef("Dataset", "usedBy", "Model"),
        RelationDef("Model", "achieves", "Task"),
        RelationDef("Task", "achievedBy", "Model"),
        RelationDef("GlobalInsight", "explains", "Model"),
    ]

    return assemble_graph(_CLASSES, instances, edges, relation_schema)


def export_demo_kg(path: str | Path) -> str:
    """Write the demo graph document to path; returns the serialized text."""
    document = dump_graph(build_demo_kg())
    Path(path).write_text(document, encoding="utf-8")
    return document
