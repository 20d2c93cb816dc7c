"""Contest pipeline: submissions, evaluation, lifecycle and leaderboards.

All state changes go through :class:`~.store.RecordLog` before they are
acknowledged. Evaluation is a pure function of the stored payload and the
contest definition, so re-evaluating a submission reproduces its stored
result byte for byte.
"""

from __future__ import annotations

import enum
import logging
import queue
import threading
import time
import zlib
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from ..errors import (
    BenchError,
    ContestClosed,
    EvaluationFailed,
    FormatError,
    InvalidTransition,
    MalformedScript,
    PayloadTooLarge,
    TaskSetMismatch,
    UnknownContest,
    UnknownSubmission,
)
from ..harness import ActionScript, ExecutionConfig, ExecutionNoise, execute
from ..io import config_from_doc, load_task, read_json, task_from_doc, task_to_doc
from ..model import Task
from ..scenegen.graph import GenerationConfig, Workspace
from ..scenegen.generate import derive_seed
from ..scoring import (
    RunScore,
    TeamResult,
    UebPolicy,
    aggregate_best_of_runs,
    aggregate_better_backend,
    evaluate_task,
    rank,
    RankedEntry,
    taskset_baseline,
)
from .store import RecordLog, canonical

log = logging.getLogger(__name__)

SNAPSHOT_EVERY = 256


class Stage(str, enum.Enum):
    TRIAL = "trial"
    CONTEST = "contest"
    CLOSED = "closed"


_NEXT_STAGE = {Stage.TRIAL: Stage.CONTEST, Stage.CONTEST: Stage.CLOSED}


class Status(str, enum.Enum):
    QUEUED = "queued"
    EVALUATING = "evaluating"
    SCORED = "scored"
    REJECTED = "rejected"


@dataclass(frozen=True)
class ContestConfig:
    contest_id: str
    trial_tasks: tuple[Task, ...]
    contest_tasks: tuple[Task, ...]
    policy: UebPolicy = field(default_factory=UebPolicy.size_based)
    runs_per_team: int = 3
    backends: int = 1
    leaderboard_mode: str = "best"  # or "latest"
    beat_baseline_only: bool = True
    strict_scoring: bool = False
    execution: ExecutionConfig = field(default_factory=ExecutionConfig)
    max_payload_bytes: int = 16 * 1024 * 1024

    def __post_init__(self):
        if self.runs_per_team < 1:
            raise ValueError("runs_per_team must be at least 1")
        if self.backends not in (1, 2):
            raise ValueError("a contest uses one or two backends")
        if self.leaderboard_mode not in ("best", "latest"):
            raise ValueError("leaderboard_mode is 'best' or 'latest'")

    def tasks_for(self, stage: Stage) -> tuple[Task, ...]:
        return self.trial_tasks if Stage(stage) is Stage.TRIAL else self.contest_tasks


def _load_task_refs(ref, base: Path) -> tuple[Task, ...]:
    if ref is None:
        return ()
    if isinstance(ref, list):
        out = []
        for r in ref:
            out.extend(_load_task_refs(r, base))
        return tuple(out)
    if isinstance(ref, dict):
        if "path" in ref:  # {"path": ..., "set_tag": "trial"} selects by tag
            tag = ref.get("set_tag")
            return tuple(t for t in _load_task_refs(ref["path"], base) if tag is None or t.set_tag.value == tag)
        return (task_from_doc(ref),)
    p = (base / ref) if not Path(ref).is_absolute() else Path(ref)
    if p.is_dir():
        return tuple(load_task(f) for f in sorted(p.glob("*.json")) if f.name != "manifest.json")
    doc = read_json(p)
    if isinstance(doc, dict) and "tasks" in doc:
        return tuple(task_from_doc(t) for t in doc["tasks"])
    return (task_from_doc(doc),)


def contest_from_doc(doc: Mapping, base: Path = Path(".")) -> ContestConfig:
    ex = doc.get("execution", {})
    noise = ex.get("noise")
    validity = GenerationConfig(**doc["validity"]) if "validity" in doc else GenerationConfig()
    execution = ExecutionConfig(
        time_limit_s=float(ex.get("time_limit_s", 600.0)),
        per_action_cost_s=float(ex.get("per_action_cost_s", 15.0)),
        noise=ExecutionNoise(**noise) if noise else None,
        workspace=Workspace.from_doc(doc["workspace"]) if "workspace" in doc else Workspace(),
        validity=validity,
    )
    return ContestConfig(
        contest_id=str(doc["contest_id"]),
        trial_tasks=_load_task_refs(doc.get("trial_tasks"), base),
        contest_tasks=_load_task_refs(doc.get("contest_tasks"), base),
        policy=UebPolicy.from_doc(doc.get("policy", {})),
        runs_per_team=int(doc.get("runs_per_team", 3)),
        backends=int(doc.get("backends", 1)),
        leaderboard_mode=doc.get("leaderboard_mode", "best"),
        beat_baseline_only=bool(doc.get("beat_baseline_only", True)),
        strict_scoring=bool(doc.get("strict_scoring", False)),
        execution=execution,
        max_payload_bytes=int(doc.get("max_payload_bytes", 16 * 1024 * 1024)),
    )


def load_contest(path) -> ContestConfig:
    path = Path(path)
    return contest_from_doc(read_json(path), path.parent)


@dataclass(frozen=True)
class SubmissionRecord:
    submission_id: str
    contest_id: str
    team_id: str
    stage: Stage
    payload: dict
    received_at: str
    order: int
    status: Status = Status.QUEUED
    result: dict | None = None
    reason: str | None = None

    def to_doc(self, with_payload: bool = True) -> dict:
        doc = {
            "submission_id": self.submission_id,
            "contest_id": self.contest_id,
            "team_id": self.team_id,
            "stage": self.stage.value,
            "received_at": self.received_at,
            "order": self.order,
            "status": self.status.value,
            "result": self.result,
            "reason": self.reason,
        }
        if with_payload:
            doc["payload"] = self.payload
        return doc

    @classmethod
    def from_doc(cls, doc: Mapping) -> SubmissionRecord:
        return cls(
            submission_id=doc["submission_id"],
            contest_id=doc["contest_id"],
            team_id=doc["team_id"],
            stage=Stage(doc["stage"]),
            payload=doc["payload"],
            received_at=doc["received_at"],
            order=int(doc["order"]),
            status=Status(doc["status"]),
            result=doc.get("result"),
            reason=doc.get("reason"),
        )


@dataclass(frozen=True)
class LeaderboardSnapshot:
    contest_id: str
    stage: Stage
    entries: tuple[RankedEntry, ...]
    generated_at: str | None
    baseline_error: float

    def to_doc(self) -> dict:
        return {
            "contest_id": self.contest_id,
            "stage": self.stage.value,
            "generated_at": self.generated_at,
            "baseline_error": self.baseline_error,
            "entries": [e.to_doc() for e in self.entries],
        }


# ---------------------------------------------------------------- payloads


def _check_payload(payload: Any, cfg: ContestConfig, tasks: tuple[Task, ...]) -> None:
    if not isinstance(payload, Mapping):
        raise FormatError("payload must be an object")
    kind = payload.get("kind")
    if kind not in ("configurations", "scripts"):
        raise FormatError("payload kind must be 'configurations' or 'scripts'")
    runs = payload.get("runs")
    if not isinstance(runs, list) or not runs:
        raise FormatError("payload needs a non-empty 'runs' list")
    expected = {t.task_id for t in tasks}
    per_backend: dict[str, int] = {}
    seen_ids = set()
    for i, run in enumerate(runs):
        if not isinstance(run, Mapping) or not isinstance(run.get("tasks"), Mapping):
            raise FormatError(f"runs[{i}] needs a 'tasks' object")
        rid = str(run.get("run_id", i))
        if rid in seen_ids:
            raise FormatError(f"duplicate run_id {rid!r}")
        seen_ids.add(rid)
        backend = str(run.get("backend") or "default")
        per_backend[backend] = per_backend.get(backend, 0) + 1
        got = set(run["tasks"])
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise TaskSetMismatch(f"runs[{i}]: missing tasks {missing}, unexpected tasks {extra}")
        for tid, entry in run["tasks"].items():
            if kind == "scripts":
                ActionScript.from_doc(entry)
            else:
                if not isinstance(entry, Mapping) or "solution" not in entry:
                    raise FormatError(f"runs[{i}].tasks.{tid}: missing 'solution'")
                config_from_doc(entry["solution"], f"runs[{i}].tasks.{tid}.solution")
    if len(per_backend) > cfg.backends:
        raise FormatError(f"payload uses {len(per_backend)} backends, contest allows {cfg.backends}")
    for b, n in per_backend.items():
        if n > cfg.runs_per_team:
            raise FormatError(f"backend {b!r} has {n} runs, contest allows {cfg.runs_per_team}")


def _run_seed(base: int, *labels: str) -> int:
    return derive_seed(base, *(zlib.crc32(s.encode("utf-8")) for s in labels))


def evaluate_payload(payload: Mapping, cfg: ContestConfig, tasks: Iterable[Task], team_id: str = "") -> RunScore:
    """Score every run, keep the best run per backend, then the better backend."""
    tasks = {t.task_id: t for t in tasks}
    order = sorted(tasks)
    by_backend: dict[str, list[RunScore]] = {}
    for i, run in enumerate(payload["runs"]):
        rid = str(run.get("run_id", i))
        backend = str(run.get("backend") or "default")
        scores, times = [], []
        succ = att = 0
        for tid in order:
            entry = run["tasks"][tid]
            task = tasks[tid]
            if payload["kind"] == "scripts":
                ex = cfg.execution
                if ex.noise is not None:
                    ex = replace(ex, noise=replace(ex.noise, seed=_run_seed(ex.noise.seed, team_id, rid, backend, tid)))
                report = execute(task, ActionScript.from_doc(entry), ex)
                solution = report.final
                times.append(report.elapsed_s)
                succ += report.grasp_successes
                att += report.grasp_attempts
            else:
                solution = config_from_doc(entry["solution"])
                times.append(float(entry.get("execution_time_s", 0.0)))
                grasp = entry.get("grasp") or {}
                succ += int(grasp.get("successes", 0))
                att += int(grasp.get("attempts", 0))
            scores.append(evaluate_task(task, solution, cfg.policy, strict=cfg.strict_scoring))
        by_backend.setdefault(backend, []).append(
            RunScore.from_task_scores(rid, scores, times, succ, att, backend)
        )
    finals = [aggregate_best_of_runs(by_backend[b]) for b in sorted(by_backend)]
    best = finals[0]
    for other in finals[1:]:
        best = aggregate_better_backend(best, other)
    return best


# ---------------------------------------------------------------- service


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


class BenchService:
    """Thread-safe contest service backed by a record log in ``data_dir``."""

    def __init__(self, data_dir, contests: Iterable[ContestConfig] = (), load_dir_contests: bool = True):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self.contests: dict[str, ContestConfig] = {}
        if load_dir_contests:
            for p in sorted((self.data_dir / "contests").glob("*.json")):
                c = load_contest(p)
                self.contests[c.contest_id] = c
        for c in contests:
            self.contests[c.contest_id] = c
        self.stages: dict[str, Stage] = {cid: Stage.TRIAL for cid in self.contests}
        self.submissions: dict[str, SubmissionRecord] = {}
        self._next = 1
        self._since_snapshot = 0
        self.store = RecordLog(self.data_dir / "store")
        self._queues: dict[str, queue.Queue] = {}
        self._workers: list[threading.Thread] = []
        self._stop = threading.Event()
        self._recover()

    # -- persistence

    def _state_doc(self) -> dict:
        return {
            "stages": {k: v.value for k, v in self.stages.items()},
            "submissions": {k: s.to_doc() for k, s in self.submissions.items()},
            "next": self._next,
        }

    def _apply(self, rec: Mapping) -> None:
        kind = rec["type"]
        if kind == "stage":
            self.stages[rec["contest_id"]] = Stage(rec["stage"])
        elif kind == "submitted":
            sub = SubmissionRecord.from_doc({**rec["submission"], "status": Status.QUEUED.value})
            self.submissions[sub.submission_id] = sub
            self._next = max(self._next, sub.order + 1)
        elif kind == "evaluating":
            s = self.submissions[rec["submission_id"]]
            self.submissions[s.submission_id] = replace(s, status=Status.EVALUATING)
        elif kind == "scored":
            s = self.submissions[rec["submission_id"]]
            self.submissions[s.submission_id] = replace(s, status=Status.SCORED, result=rec["result"], reason=None)
        elif kind == "rejected":
            s = self.submissions[rec["submission_id"]]
            self.submissions[s.submission_id] = replace(s, status=Status.REJECTED, reason=rec["reason"])
        else:
            raise FormatError(f"unknown record type {kind!r}")

    def _recover(self) -> None:
        state, records = self.store.recover()
        if state is not None:
            for cid, st in state["stages"].items():
                self.stages[cid] = Stage(st)
            self.submissions = {k: SubmissionRecord.from_doc(v) for k, v in state["submissions"].items()}
            self._next = int(state["next"])
        for rec in records:
            self._apply(rec)
        if records:
            log.info("replayed %d records from %s", len(records), self.store.log_path)

    def _commit(self, rec: dict) -> dict:
        stored = self.store.append(rec)
        self._apply(stored)
        self._since_snapshot += 1
        if self._since_snapshot >= SNAPSHOT_EVERY:
            self.snapshot()
        return stored

    def snapshot(self) -> None:
        with self._lock:
            self.store.write_snapshot(self._state_doc())
            self._since_snapshot = 0

    def close(self) -> None:
        self.stop_workers()
        with self._lock:
            self.snapshot()
            self.store.close()

    # -- contests

    def _contest(self, contest_id: str) -> ContestConfig:
        try:
            return self.contests[contest_id]
        except KeyError:
            raise UnknownContest(f"unknown contest {contest_id!r}") from None

    def stage(self, contest_id: str) -> Stage:
        self._contest(contest_id)
        return self.stages[contest_id]

    def transition(self, contest_id: str, to: Stage | str) -> Stage:
        """Advance the lifecycle: trial -> contest -> closed, never backwards."""
        to = Stage(to)
        with self._lock:
            cur = self.stage(contest_id)
            if _NEXT_STAGE.get(cur) is not to:
                raise InvalidTransition(f"{contest_id}: cannot move from {cur.value} to {to.value}")
            self._commit({"type": "stage", "contest_id": contest_id, "stage": to.value})
            return to

    def visible_tasks(self, contest_id: str) -> tuple[Task, ...]:
        st = self.stage(contest_id)
        return () if st is Stage.CLOSED else self.contests[contest_id].tasks_for(st)

    # -- submissions

    def submit(self, contest_id: str, team_id: str, payload: Mapping) -> str:
        """Validate and durably record a submission; returns its id."""
        cfg = self._contest(contest_id)
        if not isinstance(team_id, str) or not team_id:
            raise FormatError("team_id must be a non-empty string")
        size = len(canonical(payload).encode("utf-8"))
        if size > cfg.max_payload_bytes:
            raise PayloadTooLarge(f"payload is {size} bytes, limit {cfg.max_payload_bytes}")
        with self._lock:
            st = self.stages[contest_id]
            if st is Stage.CLOSED:
                raise ContestClosed(f"contest {contest_id!r} is closed")
            try:
                _check_payload(payload, cfg, cfg.tasks_for(st))
            except MalformedScript as exc:
                raise FormatError(str(exc)) from exc
            sid = f"sub-{self._next:06d}"
            sub = SubmissionRecord(sid, contest_id, team_id, st, dict(payload), _now(), self._next)
            self._commit({"type": "submitted", "submission": sub.to_doc()})
        q = self._queues.get(contest_id)
        if q is not None:
            q.put(sid)
        return sid

    def get_submission(self, submission_id: str) -> SubmissionRecord:
        with self._lock:
            try:
                return self.submissions[submission_id]
            except KeyError:
                raise UnknownSubmission(f"unknown submission {submission_id!r}") from None

    def evaluate_submission(self, submission_id: str) -> RunScore:
        """Score a submission and record the result.

        Safe to repeat: a Scored submission is recomputed and must match.
        """
        sub = self.get_submission(submission_id)
        cfg = self._contest(sub.contest_id)
        if sub.status is Status.QUEUED:
            with self._lock:
                self._commit({"type": "evaluating", "submission_id": submission_id})
        try:
            result = evaluate_payload(sub.payload, cfg, cfg.tasks_for(sub.stage), sub.team_id)
        except BenchError as exc:
            with self._lock:
                self._commit({"type": "rejected", "submission_id": submission_id, "reason": str(exc)})
            raise EvaluationFailed(str(exc)) from exc
        doc = result.to_doc()
        with self._lock:
            self._commit({"type": "scored", "submission_id": submission_id, "result": doc})
        return result

    def pending(self) -> list[str]:
        with self._lock:
            subs = sorted(self.submissions.values(), key=lambda s: s.order)
            return [s.submission_id for s in subs if s.status in (Status.QUEUED, Status.EVALUATING)]

    def evaluate_pending(self) -> list[str]:
        done = []
        for sid in self.pending():
            try:
                self.evaluate_submission(sid)
            except EvaluationFailed:
                pass
            done.append(sid)
        return done

    # -- workers

    def start_workers(self) -> None:
        """One evaluation thread per contest; pending work is queued first."""
        self._stop.clear()
        for cid in self.contests:
            self._queues[cid] = queue.Queue()
        for sid in self.pending():
            self._queues[self.submissions[sid].contest_id].put(sid)
        for cid, q in self._queues.items():
            t = threading.Thread(target=self._work, args=(q,), name=f"eval-{cid}", daemon=True)
            t.start()
            self._workers.append(t)

    def _work(self, q: queue.Queue) -> None:
        while not self._stop.is_set():
            try:
                sid = q.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                self.evaluate_submission(sid)
            except EvaluationFailed as exc:
                log.info("submission %s rejected: %s", sid, exc)
            except Exception:  # keep the worker alive
                log.exception("evaluation of %s crashed", sid)

    def stop_workers(self) -> None:
        self._stop.set()
        for t in self._workers:
            t.join(timeout=5)
        self._workers.clear()
        self._queues.clear()

    def wait_idle(self, timeout: float = 30.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if not self.pending():
                return True
            time.sleep(0.02)
        return False

    # -- leaderboard

    def leaderboard(self, contest_id: str, stage: Stage | str = Stage.CONTEST) -> LeaderboardSnapshot:
        cfg = self._contest(contest_id)
        stage = Stage(stage)
        if stage is Stage.CLOSED:
            raise ValueError("leaderboards exist for the trial and contest stages")
        tasks = cfg.tasks_for(stage)
        baseline = taskset_baseline(tasks, cfg.policy) if tasks else 0.0
        with self._lock:
            scored = [
                s
                for s in self.submissions.values()
                if s.contest_id == contest_id and s.stage is stage and s.status is Status.SCORED
            ]
        per_team: dict[str, tuple[SubmissionRecord, RunScore]] = {}
        for s in sorted(scored, key=lambda s: s.order):
            run = RunScore.from_doc(s.result)
            cur = per_team.get(s.team_id)
            if cur is None or cfg.leaderboard_mode == "latest" or run._key() < cur[1]._key():
                per_team[s.team_id] = (s, run)
        results = [
            TeamResult(team, run.average_error, run.total_execution_time, run.grasp_successes, run.grasp_attempts)
            for team, (_, run) in per_team.items()
        ]
        entries = rank(results, baseline) if baseline > 0 else rank(results)
        if cfg.beat_baseline_only and baseline > 0:
            entries = [e for e in entries if e.qualified]
        latest = max((s.received_at for s, _ in per_team.values()), default=None)
        return LeaderboardSnapshot(contest_id, stage, tuple(entries), latest, baseline)

    def tasks_doc(self, contest_id: str) -> dict:
        st = self.stage(contest_id)
        return {
            "contest_id": contest_id,
            "stage": st.value,
            "tasks": [task_to_doc(t) for t in self.visible_tasks(contest_id)],
        }
