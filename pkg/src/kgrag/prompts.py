"""Prompt catalog for the traversal dialog and the answer composer.

Templates are configuration, not code: the defaults below ship with the
package and can be overridden from a JSON template file keyed by step name.
Slots use {slot_name} markers filled by literal replacement, so template
text may freely contain JSON braces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

STOP_TOKEN = "<STOP>"
NO_INSTANCE_FOUND = "No instance found"

DEFAULT_STEP1_SYSTEM = (
    "The following structure illustrates the class level of the ontology, "
    "which will be used to answer the subsequent questions. The node classes "
    "have instances that are not listed here: {ontology_structure}."
)

DEFAULT_STEP1_USER = (
    "Only give as an answer a list of classes (following this syntax: "
    "[class1, class2, ...]) which are relevant for this user query {query} "
    "Return only JSON syntax without prefix."
)

DEFAULT_STEP1_FALLBACK = (
    "No classes were identified. Consider the user query again: {query} "
    "Name any ontology classes from the structure above that could hold "
    "related information, even if the match is loose. Only give as an answer "
    "a list of classes (following this syntax: [class1, class2, ...]). "
    "Return only JSON syntax without prefix."
)

DEFAULT_STEP2_USER = (
    "The relevant node classes are: {classes}. Now identify the instances of "
    "these classes that best match the user query {query} Only give as an "
    "answer a list of instance identifiers (following this syntax: "
    "[instance1, instance2, ...]). Return only JSON syntax without prefix."
)

DEFAULT_STEP3_SETUP = (
    "You are searching a knowledge graph to answer the user query {query} "
    "The identified starting nodes are: {start_nodes}. Each result below "
    "shows one node with its types, literal properties, and outgoing and "
    "incoming edges; edge endpoints are node identifiers you may request "
    "next. You can query further nodes by answering with a list of node "
    "identifiers (syntax: [id1, id2, ...]) or request every instance of a "
    'class by answering {"instances_of": "ClassName"}. Gather the '
    "information needed to answer the query."
)

DEFAULT_STEP3_FEEDBACK = (
    "Result to your query: {retrieved_info}. If you need more information, "
    "use another query, otherwise write <STOP>. Return JSON without prefix."
)

DEFAULT_ANSWER_SYSTEM = (
    "You answer questions about machine learning models, datasets and tasks "
    "using facts retrieved from a knowledge graph. Ground every statement in "
    "the retrieved context; do not invent node identifiers or facts. If the "
    "context does not contain the answer, say so."
)

DEFAULT_ANSWER_STYLES = {
    "none": "Answer the user query using only the retrieved context.",
    "worker": (
        "Answer for a shop-floor worker: start with a one- or two-sentence "
        "summary in plain language, avoid technical jargon and explain any "
        "term you must use. Keep the answer short; details may follow the "
        "summary only if they help the decision at hand."
    ),
    "developer": (
        "Answer for an ML developer: be precise and technical, reference the "
        "involved node identifiers, relations and model metadata explicitly, "
        "and describe the relevant graph structure."
    ),
}


def fill(template: str, **slots: str) -> str:
    """Substitute {slot} markers by literal replacement, leaving other braces alone."""
    text = template
    for name, value in slots.items():
        text = text.replace("{" + name + "}", value)
    return text


@dataclass(frozen=True)
class PromptCatalog:
    """All templates driving the retrieval dialog and answer composition."""

    step1_system: str = DEFAULT_STEP1_SYSTEM
    step1_user: str = DEFAULT_STEP1_USER
    fallback_user: str = DEFAULT_STEP1_FALLBACK
    step2_user: str = DEFAULT_STEP2_USER
    step3_setup: str = DEFAULT_STEP3_SETUP
    step3_feedback: str = DEFAULT_STEP3_FEEDBACK
    answer_system: str = DEFAULT_ANSWER_SYSTEM
    answer_styles: Mapping[str, str] = field(
        default_factory=lambda: dict(DEFAULT_ANSWER_STYLES)
    )

    def __post_init__(self) -> None:
        if STOP_TOKEN not in self.step3_feedback:
            raise ValueError(f"step3_feedback must instruct the {STOP_TOKEN} token")

    def answer_style(self, role_profile: str) -> str:
        try:
            return self.answer_styles[role_profile]
        except KeyError:
            raise ValueError(f"unknown role profile {role_profile!r}") from None


DEFAULT_CATALOG = PromptCatalog()

_STEP_KEYS = (
    "step1_system",
    "step1_user",
    "fallback_user",
    "step2_user",
    "step3_setup",
    "step3_feedback",
    "answer_system",
)


def load_catalog(path: str | Path) -> PromptCatalog:
    """Load a catalog from a JSON template file, falling back to defaults.

    Recognized keys: the step names above plus answer.none / answer.worker /
    answer.developer for the composer style guidance.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("template file must contain a JSON object")
    overrides = {key: data[key] for key in _STEP_KEYS if key in data}
    styles = dict(DEFAULT_ANSWER_STYLES)
    for profile in ("none", "worker", "developer"):
        key = f"answer.{profile}"
        if key in data:
            styles[profile] = data[key]
    return replace(DEFAULT_CATALOG, answer_styles=styles, **overrides)


def dump_catalog(catalog: PromptCatalog) -> str:
    """Serialize a catalog to the template-file format."""
    payload: dict[str, str] = {key: getattr(catalog, key) for key in _STEP_KEYS}
    for profile, text in catalog.answer_styles.items():
        payload[f"answer.{profile}"] = text
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
