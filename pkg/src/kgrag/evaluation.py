"""Evaluation machinery: question banks, transcripts, and rating statistics.

Question-bank runs record one transcript per question in a plain-text block
format that parses back losslessly. Rating analysis provides tie-corrected
Kendall rank correlation, pairwise correlation matrices over questions, and
boxplot-style descriptive statistics.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean, quantiles
from typing import Callable, Iterable, Mapping, Sequence, Union

from .compose import compose_answer
from .kg import KnowledgeGraph
from .llm import Backend
from .traversal import TraversalConfig, ontology_based_retrieval, render_trace

logger = logging.getLogger(__name__)

ROBUSTNESS_CATEGORIES = (
    "ambiguity",
    "contradictions",
    "out_of_scope",
    "overgeneralization_bias",
    "instructional_confusion",
    "complex_cross_referencing",
    "prompt_injection",
)
CATEGORIES = ROBUSTNESS_CATEGORIES + ("standard",)

CRITERIA = ("helpfulness_understandability", "structure", "length_appropriateness")


@dataclass(frozen=True)
class QuestionItem:
    """One evaluation question with its expected-response pattern."""

    id: str
    text: str
    category: str
    expected: str = ""
    role_profile: str = "none"

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.category != "standard" and not self.expected:
            raise ValueError(f"robustness item {self.id!r} needs an expected pattern")


@dataclass(frozen=True)
class Transcript:
    """One recorded run: question, answer, trace, notes and timing."""

    question: QuestionItem
    answer: str
    trace: str
    stop_reason: str
    notes: str = ""
    wall_time: float = 0.0


@dataclass(frozen=True)
class RatingRecord:
    """One participant's Likert score for one question and criterion."""

    participant: str
    role: str
    question: int
    criterion: str
    score: int

    def __post_init__(self) -> None:
        if self.role not in ("worker", "developer"):
            raise ValueError(f"unknown role {self.role!r}")
        if not 1 <= self.question <= 8:
            raise ValueError("question index must be in 1..8")
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if not 1 <= self.score <= 5:
            raise ValueError("score must be in 1..5")


def load_question_bank(path: Union[str, Path]) -> list[QuestionItem]:
    """Load a question bank from its JSON file."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError("question bank must be a JSON list")
    return [
        QuestionItem(
            id=entry["id"],
            text=entry["text"],
            category=entry["category"],
            expected=entry.get("expected", ""),
            role_profile=entry.get("role", "none"),
        )
        for entry in data
    ]


BackendSource = Union[Backend, Callable[[], Backend]]


def _backend_for_question(source: BackendSource) -> Backend:
    if callable(source) and not hasattr(source, "complete"):
        return source()
    return source  # type: ignore[return-value]


def run_question_bank(
    bank: Sequence[QuestionItem],
    graph: KnowledgeGraph,
    backend: BackendSource,
    config: TraversalConfig = TraversalConfig(),
    transcript_dir: Union[str, Path, None] = None,
) -> list[Transcript]:
    """Run every question sequentially with a fresh session per question.

    ``backend`` may be a live backend (shared across questions) or a
    zero-argument factory such as ``BackendConfig.build`` (fresh backend per
    question). Per-question failures are recorded in that transcript and the
    run continues. When ``transcript_dir`` is given, each transcript is also
    written there as ``<question id>.txt``.
    """
    transcripts = []
    for item in bank:
        question_backend = _backend_for_question(backend)
        started = time.perf_counter()
        notes = ""
        try:
            session = ontology_based_retrieval(graph, item.text, question_backend, config)
            explanation = compose_answer(
                session, item.role_profile, question_backend, config.catalog
            )
            answer = explanation.answer
            trace = render_trace(session)
            stop_reason = session.stop_reason.value if session.stop_reason else ""
        except Exception as exc:  # noqa: BLE001 - the run must survive bad questions
            logger.error("question %s failed: %s", item.id, exc)
            answer = ""
            trace = ""
            stop_reason = ""
            notes = f"- run failed: {exc}"
        transcript = Transcript(
            question=item,
            answer=answer,
            trace=trace,
            stop_reason=stop_reason,
            notes=notes,
            wall_time=time.perf_counter() - started,
        )
        transcripts.append(transcript)
        if transcript_dir is not None:
            target = Path(transcript_dir) / f"{item.id}.txt"
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(render_transcript(transcript), encoding="utf-8")
    return transcripts


_TRANSCRIPT_HEADERS = (
    "#Id",
    "#Category",
    "#Role",
    "#Question",
    "#Expected",
    "#Answer",
    "#Trace",
    "#StopReason",
    "#WallTime",
    "#Notes",
)


def render_transcript(transcript: Transcript) -> str:
    """Render a transcript as headed text blocks.

    Block content must not contain a line equal to one of the header markers;
    generated answers and traces never do.
    """
    q = transcript.question
    blocks = (
        q.id,
        q.category,
        q.role_profile,
        q.text,
        q.expected,
        transcript.answer,
        transcript.trace,
        transcript.stop_reason,
        repr(transcript.wall_time),
        transcript.notes,
    )
    parts = []
    for header, body in zip(_TRANSCRIPT_HEADERS, blocks):
        parts.append(header)
        parts.append(body)
    return "\n".join(parts) + "\n"


def parse_transcript(text: str) -> Transcript:
    """Parse a rendered transcript back; inverse of render_transcript."""
    lines = text.split("\n")
    blocks: dict[str, str] = {}
    current: str | None = None
    content: list[str] = []
    expected_iter = iter(_TRANSCRIPT_HEADERS)
    upcoming = next(expected_iter)
    for line in lines:
        if line == upcoming:
            if current is not None:
                blocks[current] = "\n".join(content)
            current = line
            content = []
            upcoming = next(expected_iter, "")
        else:
            content.append(line)
    if current is None:
        raise ValueError("not a transcript: missing #Id header")
    # The trailing newline from render adds one empty content line.
    if content and content[-1] == "":
        content = content[:-1]
    blocks[current] = "\n".join(content)
    missing = [h for h in _TRANSCRIPT_HEADERS if h not in blocks]
    if missing:
        raise ValueError(f"transcript is missing blocks: {missing}")
    question = QuestionItem(
        id=blocks["#Id"],
        text=blocks["#Question"],
        category=blocks["#Category"],
        expected=blocks["#Expected"],
        role_profile=blocks["#Role"],
    )
    return Transcript(
        question=question,
        answer=blocks["#Answer"],
        trace=blocks["#Trace"],
        stop_reason=blocks["#StopReason"],
        notes=blocks["#Notes"],
        wall_time=float(blocks["#WallTime"]),
    )


def load_transcripts(directory: Union[str, Path]) -> list[Transcript]:
    """Parse every .txt transcript in a directory, sorted by file name."""
    return [
        parse_transcript(path.read_text(encoding="utf-8"))
        for path in sorted(Path(directory).glob("*.txt"))
    ]


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-corrected Kendall rank correlation (tau-b) of two score lists.

    Returns NaN when either list has zero variance (the correlation is
    undefined, matching the blacked-out diagonal of a correlation matrix).
    Raises ValueError on length mismatch or fewer than two observations.
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise ValueError("need at least two observations")
    concordant = discordant = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = (x[i] > x[j]) - (x[i] < x[j])
            dy = (y[i] > y[j]) - (y[i] < y[j])
            product = dx * dy
            if product > 0:
                concordant += 1
            elif product < 0:
                discordant += 1
    pair_count = n * (n - 1) // 2
    ties_x = sum(c * (c - 1) // 2 for c in Counter(x).values())
    ties_y = sum(c * (c - 1) // 2 for c in Counter(y).values())
    denominator = math.sqrt((pair_count - ties_x) * (pair_count - ties_y))
    if denominator == 0:
        return math.nan
    return (concordant - discordant) / denominator


def _scores_by_question(
    ratings: Iterable[RatingRecord], role: str, criterion: str
) -> dict[int, dict[str, int]]:
    table: dict[int, dict[str, int]] = {q: {} for q in range(1, 9)}
    for record in ratings:
        if record.role == role and record.criterion == criterion:
            table[record.question][record.participant] = record.score
    return table


def pairwise_tau_matrix(
    ratings: Iterable[RatingRecord], role: str, criterion: str
) -> list[list[float]]:
    """8x8 matrix of tau between participant-aligned question score vectors.

    Scores are aligned on the participants that rated both questions; pairs
    with fewer than two common participants (and the diagonal) are NaN. The
    matrix is symmetric by construction.
    """
    table = _scores_by_question(ratings, role, criterion)
    matrix = [[math.nan] * 8 for _ in range(8)]
    for i in range(1, 9):
        for j in range(i + 1, 9):
            common = sorted(set(table[i]) & set(table[j]))
            if len(common) < 2:
                continue
            tau = kendall_tau(
                [table[i][p] for p in common], [table[j][p] for p in common]
            )
            matrix[i - 1][j - 1] = tau
            matrix[j - 1][i - 1] = tau
    return matrix


@dataclass(frozen=True)
class BoxplotStats:
    """Plot-ready descriptive statistics of one score distribution."""

    mean: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def descriptive_stats(scores: Sequence[float]) -> BoxplotStats:
    """Boxplot statistics with linearly interpolated quartiles.

    Whiskers extend to the most extreme data points within 1.5 IQR of the
    quartiles; everything beyond is an outlier.
    """
    if not scores:
        raise ValueError("need at least one score")
    data = sorted(float(s) for s in scores)
    if len(data) == 1:
        q1 = median = q3 = data[0]
    else:
        q1, median, q3 = quantiles(data, n=4, method="inclusive")
    iqr = q3 - q1
    low_fence = q1 - 1.5 * iqr
    high_fence = q3 + 1.5 * iqr
    inside = [s for s in data if low_fence <= s <= high_fence]
    whisker_low = min(inside)
    whisker_high = max(inside)
    outliers = tuple(s for s in data if s < whisker_low or s > whisker_high)
    return BoxplotStats(
        mean=fmean(data),
        median=median,
        q1=q1,
        q3=q3,
        whisker_low=whisker_low,
        whisker_high=whisker_high,
        outliers=outliers,
    )


def stats_table(per_question: Mapping[int, Sequence[float]], delimiter: str = "\t") -> str:
    """Tab-separated per-question statistics consumable by any plotting tool."""
    header = delimiter.join(
        ("question", "mean", "median", "q1", "q3", "whisker_low", "whisker_high", "outliers")
    )
    rows = [header]
    for question in sorted(per_question):
        stats = descriptive_stats(per_question[question])
        rows.append(
            delimiter.join(
                (
                    str(question),
                    f"{stats.mean:.6g}",
                    f"{stats.median:.6g}",
                    f"{stats.q1:.6g}",
                    f"{stats.q3:.6g}",
                    f"{stats.whisker_low:.6g}",
                    f"{stats.whisker_high:.6g}",
                    ";".join(f"{o:.6g}" for o in stats.outliers),
                )
            )
        )
    return "\n".join(rows) + "\n"


def load_ratings(path: Union[str, Path]) -> list[RatingRecord]:
    """Load rating records from a CSV file with a header row."""
    records = []
    with open(path, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            records.append(
                RatingRecord(
                    participant=row["participant"],
                    role=row["role"],
                    question=int(row["question"]),
                    criterion=row["criterion"],
                    score=int(row["score"]),
                )
            )
    return records


def load_tau_matrices(path: Union[str, Path]) -> dict[str, dict[str, list[list[float]]]]:
    """Load pre-recorded correlation matrices (role -> criterion -> 8x8).

    These reference matrices come from a previously collected user study
    whose raw ratings are not published; they support the rendering path
    only and are never recomputed here.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    matrices: dict[str, dict[str, list[list[float]]]] = {}
    for role, by_criterion in data.items():
        matrices[role] = {}
        for criterion, rows in by_criterion.items():
            matrices[role][criterion] = [
                [math.nan if value is None else float(value) for value in row]
                for row in rows
            ]
    return matrices


def render_tau_matrix(matrix: Sequence[Sequence[float]]) -> str:
    """Render a correlation matrix as an aligned text table."""
    size = len(matrix)
    header = "      " + " ".join(f"Q{j + 1:<6}" for j in range(size))
    lines = [header]
    for i, row in enumerate(matrix):
        cells = " ".join(
            "   nan " if math.isnan(value) else f"{value:+.4f}" for value in row
        )
        lines.append(f"Q{i + 1:<4} {cells}")
    return "\n".join(lines) + "\n"
