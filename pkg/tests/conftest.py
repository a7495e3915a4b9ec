from pathlib import Path

import pytest

from kgrag import build_demo_kg

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURES = REPO_ROOT / "fixtures"

# The canonical scripted walkthrough on the demo graph: dataset class, its
# instance, the four models trained with it, their shared task, then stop.
WALKTHROUGH_QUESTION = (
    "List all tasks which are influenced by the dataset niryo september 2024?"
)
WALKTHROUGH_SCRIPT = [
    '["Dataset"]',
    '["niryo_dataset_september_2024"]',
    '["model_a23b", "model_xT77", "model_p1b3", "model_qdk1"]',
    '["ScrewPlacement"]',
    "<STOP>",
]
WALKTHROUGH_ANSWER = (
    "The only task explicitly linked to the *niryo_dataset_september_2024* in "
    "the ontology is **ScrewPlacement**. All models that achieve this task "
    "rely on the attributes and examples contained in that dataset to learn "
    "how to place screws correctly."
)
WALKTHROUGH_NODE_IDS = {
    "niryo_dataset_september_2024",
    "model_a23b",
    "model_xT77",
    "model_p1b3",
    "model_qdk1",
    "ScrewPlacement",
}


@pytest.fixture(scope="session")
def demo_graph():
    return build_demo_kg()


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"[ACCEPTANCE] {name}: {outcome}")
