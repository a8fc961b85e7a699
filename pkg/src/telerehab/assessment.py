"""Subjective evaluation: configurable question tests and pain-scale capture."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ValidationError


@dataclass(frozen=True)
class Answer:
    text: str
    score: float


@dataclass(frozen=True)
class Question:
    text: str
    answers: tuple[Answer, ...]

    def __post_init__(self):
        object.__setattr__(self, "answers", tuple(self.answers))
        if len(self.answers) < 2:
            raise ValidationError(f"question {self.text!r} needs at least 2 answers")


@dataclass(frozen=True)
class Scoring:
    """How chosen answer scores collapse to one number.

    sum: total of the chosen scores.
    count_equal: how many chosen answers score exactly `target`.
    percent_of: 100 * total / `divisor`.
    """

    mode: str
    target: float = 0.0
    divisor: float = 1.0

    def __post_init__(self):
        if self.mode not in ("sum", "count_equal", "percent_of"):
            raise ValidationError(f"scoring mode must be sum/count_equal/percent_of, got {self.mode!r}")
        if self.mode == "percent_of" and self.divisor <= 0:
            raise ValidationError(f"percent_of divisor must be positive, got {self.divisor}")


SUM = Scoring("sum")


def count_equal(target: float) -> Scoring:
    return Scoring("count_equal", target=target)


def percent_of(divisor: float) -> Scoring:
    return Scoring("percent_of", divisor=divisor)


@dataclass(frozen=True)
class AutoTest:
    name: str
    questions: tuple[Question, ...]
    scoring: Scoring = SUM

    def __post_init__(self):
        if not self.name:
            raise ValidationError("test needs a name")
        object.__setattr__(self, "questions", tuple(self.questions))
        if not self.questions:
            raise ValidationError("test needs at least one question")


@dataclass(frozen=True)
class TestResponse:
    test: str
    choices: tuple[int, ...]
    date: str = ""

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(self.choices))


def score_autotest(test: AutoTest, response: TestResponse) -> float:
    """Collapse one response to a single number per the test's scoring rule."""
    if response.test != test.name:
        raise ValidationError(f"response is for test {response.test!r}, not {test.name!r}")
    if len(response.choices) != len(test.questions):
        missing = [
            q.text for q in test.questions[len(response.choices):]
        ] if len(response.choices) < len(test.questions) else []
        if missing:
            raise ValidationError(f"response incomplete, missing answers for: {', '.join(missing)}")
        raise ValidationError(
            f"response has {len(response.choices)} answers for {len(test.questions)} questions"
        )
    chosen = []
    for idx, (question, choice) in enumerate(zip(test.questions, response.choices)):
        if not 0 <= choice < len(question.answers):
            raise ValidationError(
                f"question {idx} choice {choice} out of range 0..{len(question.answers) - 1}"
            )
        chosen.append(question.answers[choice].score)
    if test.scoring.mode == "sum":
        return float(sum(chosen))
    if test.scoring.mode == "count_equal":
        return float(sum(1 for s in chosen if s == test.scoring.target))
    return 100.0 * sum(chosen) / test.scoring.divisor


def vas_from_mark(mark: float, length: float) -> float:
    """Map a mark along a pain line of the given length onto [0, 10]."""
    if length <= 0:
        raise ValidationError(f"line length must be positive, got {length}")
    if not 0 <= mark <= length:
        raise ValidationError(f"mark {mark} outside the line [0, {length}]")
    return 10.0 * mark / length


# ----------------------------------------------------------------------
# Document round-trip
# ----------------------------------------------------------------------

def test_to_doc(test: AutoTest) -> dict:
    scoring: dict = {"mode": test.scoring.mode}
    if test.scoring.mode == "count_equal":
        scoring["target"] = test.scoring.target
    elif test.scoring.mode == "percent_of":
        scoring["divisor"] = test.scoring.divisor
    return {
        "id": test.name,
        "questions": [
            {"text": q.text, "answers": [{"text": a.text, "score": a.score} for a in q.answers]}
            for q in test.questions
        ],
        "scoring": scoring,
    }


def test_from_doc(doc: Mapping) -> AutoTest:
    try:
        s = doc.get("scoring", {"mode": "sum"})
        scoring = Scoring(
            mode=s["mode"],
            target=float(s.get("target", 0.0)),
            divisor=float(s.get("divisor", 1.0)),
        )
        return AutoTest(
            name=doc["id"],
            questions=tuple(
                Question(
                    text=q["text"],
                    answers=tuple(Answer(text=a["text"], score=float(a["score"])) for a in q["answers"]),
                )
                for q in doc["questions"]
            ),
            scoring=scoring,
        )
    except KeyError as exc:
        raise ValidationError(f"test document missing field {exc}") from exc


def response_to_doc(response: TestResponse) -> dict:
    return {"test": response.test, "choices": list(response.choices), "date": response.date}


def response_from_doc(doc: Mapping) -> TestResponse:
    try:
        return TestResponse(
            test=doc["test"], choices=tuple(int(c) for c in doc["choices"]), date=doc.get("date", "")
        )
    except KeyError as exc:
        raise ValidationError(f"response document missing field {exc}") from exc
