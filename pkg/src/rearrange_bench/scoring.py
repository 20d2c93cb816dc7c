"""Task scoring, baselines, run aggregation and ranking.

Per object, the error is the mean displacement of the eight metric-cube
vertices between target and solution pose, capped at the object's upper
error bound. A task's error is the mean over its objects; a run's error is the
mean over tasks. All values are centimetres.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from . import kernels
from .errors import EmptyInput, FormatError, InvalidCounts, MissingObject, NonPositiveBaseline
from .geometry import Pose
from .model import SceneConfiguration, Task


class UebVariant(str, enum.Enum):
    SIZE_BASED_2020 = "size_based_2020"
    CONSTANT_2021 = "constant_2021"


@dataclass(frozen=True)
class UebPolicy:
    variant: UebVariant = UebVariant.SIZE_BASED_2020
    constant_value: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", UebVariant(self.variant))
        if self.variant is UebVariant.CONSTANT_2021:
            if self.constant_value is None or not (float(self.constant_value) > 0):
                raise ValueError("the constant UEB policy needs constant_value > 0")
            object.__setattr__(self, "constant_value", float(self.constant_value))

    @classmethod
    def size_based(cls) -> UebPolicy:
        return cls(UebVariant.SIZE_BASED_2020)

    @classmethod
    def constant(cls, value: float) -> UebPolicy:
        return cls(UebVariant.CONSTANT_2021, value)

    def to_doc(self) -> dict:
        return {"variant": self.variant.value, "constant_value": self.constant_value}

    @classmethod
    def from_doc(cls, doc: Mapping) -> UebPolicy:
        return cls(doc.get("variant", UebVariant.SIZE_BASED_2020), doc.get("constant_value"))


SIZE_BASED = UebPolicy.size_based()


# ---------------------------------------------------------------- metric


def ueb(obj, policy: UebPolicy = SIZE_BASED) -> float:
    """Upper error bound for one object (anything with a ``bbox``)."""
    if policy.variant is UebVariant.CONSTANT_2021:
        return policy.constant_value
    b = obj.bbox
    return 5.0 * (b.l + b.w + b.h) / 3.0


def ede_many(half_edges, rot_target, trans_target, rot_solution, trans_solution) -> np.ndarray:
    """Vectorised vertex-displacement error over ``n`` cases.

    ``half_edges`` is (n,), rotations (n, 3, 3), translations (n, 3).
    """
    return kernels.ede_batch(
        np.ascontiguousarray(half_edges, dtype=np.float64),
        np.ascontiguousarray(rot_target, dtype=np.float64),
        np.ascontiguousarray(trans_target, dtype=np.float64),
        np.ascontiguousarray(rot_solution, dtype=np.float64),
        np.ascontiguousarray(trans_solution, dtype=np.float64),
    )


def ede(obj, pose_target: Pose, pose_solution: Pose) -> float:
    """Mean distance of the metric-cube vertices under the two poses."""
    return float(
        ede_many(
            [obj.bbox.cube_edge / 2.0],
            pose_target.rotation[None],
            pose_target.translation[None],
            pose_solution.rotation[None],
            pose_solution.translation[None],
        )[0]
    )


@dataclass(frozen=True)
class TaskScore:
    task_id: str
    per_object_error: dict[str, float]
    task_error: float
    capped_count: int
    missing: tuple[str, ...] = ()

    def to_doc(self) -> dict:
        return {
            "task_id": self.task_id,
            "per_object_error": dict(self.per_object_error),
            "task_error": self.task_error,
            "capped_count": self.capped_count,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> TaskScore:
        return cls(
            task_id=doc["task_id"],
            per_object_error={k: float(v) for k, v in doc["per_object_error"].items()},
            task_error=float(doc["task_error"]),
            capped_count=int(doc["capped_count"]),
        )


def evaluate_task(
    task: Task, solution: SceneConfiguration, policy: UebPolicy = SIZE_BASED, *, strict: bool = False
) -> TaskScore:
    """Score a solution scene against the task's target scene.

    Objects missing from ``solution`` raise :class:`MissingObject` when
    ``strict``; otherwise they score exactly their UEB.
    """
    per_object: dict[str, float] = {}
    capped = 0
    missing = []
    for obj in task.objects:
        bound = ueb(obj, policy)
        pose = solution.get(obj.instance_id)
        if pose is None:
            if strict:
                raise MissingObject(obj.instance_id)
            missing.append(obj.instance_id)
            err = bound
        else:
            err = ede(obj, task.target[obj.instance_id], pose)
        if err >= bound:
            capped += 1
            err = bound
        per_object[obj.instance_id] = err
    total = math.fsum(per_object.values()) / len(per_object)
    return TaskScore(task.task_id, per_object, total, capped, tuple(missing))


def baseline_error(task: Task, policy: UebPolicy = SIZE_BASED) -> float:
    """Worst-case task error: mean UEB over the task's objects."""
    return math.fsum(ueb(o, policy) for o in task.objects) / len(task.objects)


def baseline_error_sum(task: Task, policy: UebPolicy = SIZE_BASED) -> float:
    """Literal sum of per-object UEBs (not on the same scale as task errors)."""
    return math.fsum(ueb(o, policy) for o in task.objects)


def taskset_baseline(tasks: Iterable[Task], policy: UebPolicy = SIZE_BASED) -> float:
    values = [baseline_error(t, policy) for t in tasks]
    if not values:
        raise EmptyInput("no tasks")
    return math.fsum(values) / len(values)


def improvement(error: float, baseline: float) -> float:
    """Signed percentage improvement of ``error`` over ``baseline``."""
    if not baseline > 0:
        raise NonPositiveBaseline(f"baseline must be positive, got {baseline}")
    return 100.0 * (baseline - error) / baseline


def display_improvement(error: float, baseline: float) -> float:
    """Improvement rounded to one decimal, floored at 0.0 for display."""
    return display_improvement_value(improvement(error, baseline))


# ---------------------------------------------------------------- formatting


def round_half_away(x: float, ndigits: int) -> float:
    """Round the shortest decimal form of ``x`` half away from zero."""
    q = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP))


def fmt_cm(x: float) -> str:
    return f"{round_half_away(x, 2):.2f}"


def fmt_pct(x: float | None) -> str:
    return "N/A" if x is None else f"{round_half_away(x, 1):.1f}%"


def grasp_success_rate(successes: int, attempts: int) -> float | None:
    """``successes / attempts``; ``None`` when nothing was attempted."""
    if successes < 0 or attempts < 0 or successes > attempts:
        raise InvalidCounts(f"need 0 <= successes <= attempts, got {successes}/{attempts}")
    if attempts == 0:
        return None
    return successes / attempts


def fmt_grasp(successes: int, attempts: int) -> str:
    rate = grasp_success_rate(successes, attempts)
    if rate is None:
        return "N/A"
    return f"{successes}/{attempts}={fmt_pct(100.0 * rate)}"


# ---------------------------------------------------------------- runs


@dataclass(frozen=True)
class RunScore:
    run_id: str
    task_scores: tuple[TaskScore, ...]
    average_error: float
    total_execution_time: float = 0.0
    grasp_successes: int = 0
    grasp_attempts: int = 0
    backend: str | None = None

    @classmethod
    def from_task_scores(
        cls,
        run_id: str,
        task_scores: Sequence[TaskScore],
        execution_times: Iterable[float] = (),
        grasp_successes: int = 0,
        grasp_attempts: int = 0,
        backend: str | None = None,
    ) -> RunScore:
        if not task_scores:
            raise EmptyInput("a run needs at least one task score")
        avg = math.fsum(s.task_error for s in task_scores) / len(task_scores)
        # execution time: per-task wall clock summed over the run
        return cls(
            run_id,
            tuple(task_scores),
            avg,
            math.fsum(execution_times),
            grasp_successes,
            grasp_attempts,
            backend,
        )

    def _key(self):
        return (self.average_error, self.total_execution_time, self.run_id)

    def to_doc(self) -> dict:
        return {
            "run_id": self.run_id,
            "backend": self.backend,
            "tasks": [s.to_doc() for s in self.task_scores],
            "average_error": self.average_error,
            "total_execution_time_s": self.total_execution_time,
            "grasp": {"successes": self.grasp_successes, "attempts": self.grasp_attempts},
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> RunScore:
        grasp = doc.get("grasp") or {}
        return cls(
            run_id=str(doc.get("run_id", "")),
            task_scores=tuple(TaskScore.from_doc(t) for t in doc.get("tasks", ())),
            average_error=float(doc["average_error"]),
            total_execution_time=float(doc.get("total_execution_time_s", 0.0)),
            grasp_successes=int(grasp.get("successes", 0)),
            grasp_attempts=int(grasp.get("attempts", 0)),
            backend=doc.get("backend"),
        )


def aggregate_best_of_runs(runs: Iterable[RunScore]) -> RunScore:
    """Lowest average error; ties go to less time, then the smaller run_id."""
    runs = list(runs)
    if not runs:
        raise EmptyInput("no runs to aggregate")
    return min(runs, key=RunScore._key)


def aggregate_better_backend(a: RunScore, b: RunScore) -> RunScore:
    """Better of two backend results; exact ties keep ``a``."""
    return b if b._key() < a._key() else a


# ---------------------------------------------------------------- ranking


@dataclass(frozen=True)
class TeamResult:
    team_id: str
    final_error: float
    total_execution_time: float = 0.0
    grasp_successes: int = 0
    grasp_attempts: int = 0


@dataclass(frozen=True)
class RankedEntry:
    team_id: str
    final_error: float
    improvement_pct: float | None
    total_execution_time: float
    grasp_successes: int
    grasp_attempts: int
    rank: int
    qualified: bool = field(default=False)

    @property
    def grasp_stats(self) -> tuple[int, int]:
        return (self.grasp_successes, self.grasp_attempts)

    def to_doc(self) -> dict:
        return {
            "rank": self.rank,
            "team_id": self.team_id,
            "final_error": self.final_error,
            "improvement_pct": self.improvement_pct,
            "total_execution_time_s": self.total_execution_time,
            "grasp": {"successes": self.grasp_successes, "attempts": self.grasp_attempts},
            "qualified": self.qualified,
        }


def rank(results: Iterable[TeamResult], baseline: float | None = None) -> list[RankedEntry]:
    """Order by error, then execution time, then team_id; ranks are 1..n.

    With a baseline, each entry carries its signed improvement and is
    qualified iff that improvement is positive.
    """
    ordered = sorted(results, key=lambda r: (r.final_error, r.total_execution_time, r.team_id))
    out = []
    for i, r in enumerate(ordered, start=1):
        imp = None if baseline is None else improvement(r.final_error, baseline)
        out.append(
            RankedEntry(
                team_id=r.team_id,
                final_error=r.final_error,
                improvement_pct=imp,
                total_execution_time=r.total_execution_time,
                grasp_successes=r.grasp_successes,
                grasp_attempts=r.grasp_attempts,
                rank=i,
                qualified=imp is not None and imp > 0,
            )
        )
    return out


# ---------------------------------------------------------------- reports


def score_report(team_id: str, policy: UebPolicy, run: RunScore) -> dict:
    return {
        "team_id": team_id,
        "policy": policy.to_doc(),
        "tasks": [s.to_doc() for s in run.task_scores],
        "average_error": run.average_error,
        "total_execution_time_s": run.total_execution_time,
        "grasp": {"successes": run.grasp_successes, "attempts": run.grasp_attempts},
    }


def team_result_from_report(doc: Mapping) -> TeamResult:
    try:
        grasp = doc.get("grasp") or {}
        return TeamResult(
            team_id=str(doc["team_id"]),
            final_error=float(doc["average_error"]),
            total_execution_time=float(doc.get("total_execution_time_s", 0.0)),
            grasp_successes=int(grasp.get("successes", 0)),
            grasp_attempts=int(grasp.get("attempts", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad score report: {exc}") from exc


LEADERBOARD_COLUMNS = ("rank", "team_id", "error_cm", "improvement_pct", "time_s", "grasp_rate")


def _fmt_seconds(t: float) -> str:
    return f"{round_half_away(t, 1):.1f}"


def leaderboard_rows(entries: Iterable[RankedEntry]) -> list[list[str]]:
    return [
        [
            str(e.rank),
            e.team_id,
            fmt_cm(e.final_error),
            "N/A" if e.improvement_pct is None else f"{display_improvement_value(e.improvement_pct):.1f}",
            _fmt_seconds(e.total_execution_time),
            fmt_grasp(e.grasp_successes, e.grasp_attempts),
        ]
        for e in entries
    ]


def display_improvement_value(signed_pct: float) -> float:
    return round_half_away(max(0.0, signed_pct), 1)


def leaderboard_csv(entries: Iterable[RankedEntry]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEADERBOARD_COLUMNS)
    w.writerows(leaderboard_rows(entries))
    return buf.getvalue()


def leaderboard_table(entries: Sequence[RankedEntry], baseline: float | None = None) -> str:
    rows = [list(LEADERBOARD_COLUMNS)] + leaderboard_rows(entries)
    if baseline is not None:
        rows.append(["", "Baseline", fmt_cm(baseline), "N/A", "", "N/A"])
    widths = [max(len(r[i]) for r in rows) for i in range(len(LEADERBOARD_COLUMNS))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"
