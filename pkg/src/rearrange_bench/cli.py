"""Command-line entry point.

Exit codes: 0 success, 1 usage/IO/parse error, 2 generation exhausted,
3 execution hazard.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import scoring
from .errors import BenchError, GenerationExhausted, MissingObject
from .harness import ExecutionConfig, ExecutionNoise, ExecutionReport, Termination, execute, load_script
from .io import config_from_doc, load_database, load_task, read_json, save_task, write_json
from .scenegen import GenerationConfig, Template, Workspace, generate_batch, validate_scene

EXIT_OK, EXIT_ERROR, EXIT_EXHAUSTED, EXIT_HAZARD = 0, 1, 2, 3

log = logging.getLogger("rearrange_bench")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return doc


def _workspace(conf: dict) -> Workspace:
    return Workspace.from_doc(conf["workspace"]) if "workspace" in conf else Workspace()


def _gen_config(conf: dict, **overrides) -> GenerationConfig:
    base = dict(conf.get("generation", {}))
    base.update({k: v for k, v in overrides.items() if v is not None})
    return GenerationConfig(**base)


def _policy(args, conf: dict) -> scoring.UebPolicy:
    if getattr(args, "ueb_constant", None) is not None:
        return scoring.UebPolicy.constant(args.ueb_constant)
    if "policy" in conf:
        return scoring.UebPolicy.from_doc(conf["policy"])
    return scoring.UebPolicy.size_based()


def _say(args, text: str = "") -> None:
    if not args.quiet:
        print(text)


# ---------------------------------------------------------------- gen-tasks


def cmd_gen_tasks(args, conf) -> int:
    db = load_database(args.db)
    templates = [Template.from_doc(read_json(p), default_id=Path(p).stem) for p in args.template]
    if len({t.template_id for t in templates}) != len(templates):
        raise UsageError("template ids must be unique")
    cfg = _gen_config(conf, seed=args.seed, max_rejections=args.max_rejections, set_tag=args.set_tag)
    frac = Fraction(args.trial_fraction) if args.trial_fraction is not None else None
    try:
        batch = generate_batch([(t, args.count) for t in templates], db, _workspace(conf), cfg, frac)
    except GenerationExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for g in batch:
        name = f"{g.task.task_id}.json"
        save_task(g.task, out / name)
        entries.append({**g.manifest_entry(), "file": name})
    write_json(out / "manifest.json", {"seed": cfg.seed, "tasks": entries})
    _say(args, f"wrote {len(entries)} task(s) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- score


def _read_solution(path):
    doc = read_json(path)
    if isinstance(doc, dict) and "final" in doc:
        rep = ExecutionReport.from_doc(doc)
        return rep.final, rep.elapsed_s, rep.grasp_successes, rep.grasp_attempts
    return config_from_doc(doc), 0.0, 0, 0


def cmd_score(args, conf) -> int:
    if args.error is not None:
        if args.baseline is None or args.baseline == "auto":
            raise UsageError("--error needs an explicit --baseline VALUE")
        base = float(args.baseline)
        _say(args, f"E = {scoring.fmt_cm(args.error)}")
        _say(args, f"baseline = {scoring.fmt_cm(base)}")
        _say(args, f"improvement {scoring.fmt_pct(scoring.improvement(args.error, base))}")
        return EXIT_OK
    if not args.task or len(args.task) != len(args.solution or []):
        raise UsageError("give one --solution per --task")
    policy = _policy(args, conf)
    tasks, scores, times = [], [], []
    succ = att = 0
    for tpath, spath in zip(args.task, args.solution):
        task = load_task(tpath)
        config, t, s, a = _read_solution(spath)
        try:
            ts = scoring.evaluate_task(task, config, policy, strict=args.strict)
        except MissingObject as exc:
            print(f"error: MissingObject: {exc}", file=sys.stderr)
            return EXIT_ERROR
        tasks.append(task)
        scores.append(ts)
        times.append(t)
        succ += s
        att += a
        _say(args, f"task {task.task_id}")
        for iid, err in ts.per_object_error.items():
            _say(args, f"  {iid}: {scoring.fmt_cm(err)} cm")
        _say(args, f"  E = {scoring.fmt_cm(ts.task_error)}  (capped {ts.capped_count})")
    run = scoring.RunScore.from_task_scores("cli", scores, times, succ, att)
    if len(scores) > 1:
        _say(args, f"average E = {scoring.fmt_cm(run.average_error)}")
    if args.baseline is not None:
        base = scoring.taskset_baseline(tasks, policy) if args.baseline == "auto" else float(args.baseline)
        _say(args, f"baseline = {scoring.fmt_cm(base)}")
        _say(args, f"improvement {scoring.fmt_pct(scoring.improvement(run.average_error, base))}")
    if args.out:
        write_json(args.out, scoring.score_report(args.team, policy, run))
    return EXIT_OK


# ---------------------------------------------------------------- run


def cmd_run(args, conf) -> int:
    task = load_task(args.task)
    script = load_script(args.script)
    ex = conf.get("execution", {})
    noise = None
    if args.noise_seed is not None:
        noise = ExecutionNoise(args.grasp_fail_prob, args.place_jitter, args.noise_seed)
    cfg = ExecutionConfig(
        time_limit_s=args.time_limit if args.time_limit is not None else float(ex.get("time_limit_s", 600.0)),
        per_action_cost_s=args.action_cost if args.action_cost is not None else float(ex.get("per_action_cost_s", 15.0)),
        noise=noise,
        workspace=_workspace(conf),
        validity=_gen_config(conf),
        wall_clock=args.wall_clock,
    )
    report = execute(task, script, cfg)
    if args.out:
        write_json(args.out, report.to_doc())
    _say(
        args,
        f"{report.terminated.value}: {report.elapsed_s:g} s, grasps "
        f"{scoring.fmt_grasp(report.grasp_successes, report.grasp_attempts)}",
    )
    return EXIT_HAZARD if report.terminated is Termination.HAZARD else EXIT_OK


# ---------------------------------------------------------------- rank


def cmd_rank(args, conf) -> int:
    results = [scoring.team_result_from_report(read_json(p)) for p in args.reports]
    baseline = None
    if args.baseline is not None:
        baseline = float(args.baseline)
    elif args.tasks:
        baseline = scoring.taskset_baseline([load_task(p) for p in args.tasks], _policy(args, conf))
    entries = scoring.rank(results, baseline)
    if baseline is not None and not args.all:
        entries = [e for e in entries if e.qualified]
    csv_text = scoring.leaderboard_csv(entries)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text(csv_text, encoding="utf-8")
    if args.format == "csv":
        sys.stdout.write(csv_text)
    else:
        _say(args, scoring.leaderboard_table(entries, baseline).rstrip("\n"))
    return EXIT_OK


# ---------------------------------------------------------------- validate-task


def cmd_validate_task(args, conf) -> int:
    ws = _workspace(conf)
    cfg = _gen_config(conf)
    ok = True
    for p in args.tasks:
        task = load_task(p)
        models = {o.instance_id: o for o in task.objects}
        for name in ("initial", "target"):
            res = validate_scene(getattr(task, name), models, ws, cfg)
            if not res.valid:
                ok = False
                for v in res.violations:
                    print(f"{p}: {name}: {v.kind} {', '.join(v.instances)} {v.detail}".rstrip(), file=sys.stderr)
        if ok:
            _say(args, f"{p}: ok")
    return EXIT_OK if ok else EXIT_ERROR


# ---------------------------------------------------------------- serve


def cmd_serve(args, conf) -> int:
    from .service.app import serve
    from .service.contest import load_contest

    contests = [load_contest(p) for p in args.contest]
    try:
        serve(args.data_dir, args.bind, contests)
    except (OSError, SystemExit) as exc:
        code = getattr(exc, "code", EXIT_ERROR)
        if code not in (0, None):
            print(f"error: cannot serve: {exc}", file=sys.stderr)
            return EXIT_ERROR
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_globals(p, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="JSON config file (workspace, generation, execution, policy)")
    p.add_argument("--data-dir", default=d(os.environ.get("BENCH_DATA_DIR")), help="service store root")
    p.add_argument("--quiet", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rearrange-bench", description=__doc__.splitlines()[0])
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-tasks", help="generate tasks from scene-graph templates")
    _add_globals(g, suppress=True)
    g.add_argument("--template", action="append", required=True, help="template JSON (repeatable)")
    g.add_argument("--db", required=True, help="object database JSON")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1, help="tasks per template")
    g.add_argument("--trial-fraction", help="split into trial/contest, e.g. 11/14")
    g.add_argument("--max-rejections", type=int)
    g.add_argument("--set-tag", choices=("trial", "contest"))
    g.set_defaults(func=cmd_gen_tasks)

    s = sub.add_parser("score", help="score solution scenes against task targets")
    _add_globals(s, suppress=True)
    s.add_argument("--task", action="append", help="task JSON (repeatable)")
    s.add_argument("--solution", action="append", help="scene configuration or run report (one per --task)")
    s.add_argument("--ueb-constant", type=float, help="use a constant UEB (cm) instead of the size-based one")
    s.add_argument("--strict", action="store_true", help="error on objects missing from the solution")
    s.add_argument("--baseline", nargs="?", const="auto", help="print baseline and improvement; optional value in cm")
    s.add_argument("--error", type=float, help="skip scoring and report improvement for this error")
    s.add_argument("--team", default="anonymous")
    s.add_argument("--out", help="write a JSON score report here")
    s.set_defaults(func=cmd_score)

    r = sub.add_parser("run", help="execute an action script in the kinematic world")
    _add_globals(r, suppress=True)
    r.add_argument("--task", required=True)
    r.add_argument("--script", required=True)
    r.add_argument("--out", help="write the execution report here")
    r.add_argument("--time-limit", type=float)
    r.add_argument("--action-cost", type=float)
    r.add_argument("--noise-seed", type=int)
    r.add_argument("--grasp-fail-prob", type=float, default=0.0)
    r.add_argument("--place-jitter", type=float, default=0.0, help="placement noise sigma (cm)")
    r.add_argument("--wall-clock", action="store_true")
    r.set_defaults(func=cmd_run)

    k = sub.add_parser("rank", help="rank teams from score reports")
    _add_globals(k, suppress=True)
    k.add_argument("reports", nargs="+")
    k.add_argument("--baseline", type=float)
    k.add_argument("--tasks", nargs="*", help="task files to derive the baseline from")
    k.add_argument("--ueb-constant", type=float)
    k.add_argument("--all", action="store_true", help="keep teams that did not beat the baseline")
    k.add_argument("--csv", help="write the leaderboard CSV here")
    k.add_argument("--format", choices=("table", "csv"), default="table")
    k.set_defaults(func=cmd_rank)

    v = sub.add_parser("validate-task", help="check task files parse and both scenes are valid")
    _add_globals(v, suppress=True)
    v.add_argument("tasks", nargs="+")
    v.set_defaults(func=cmd_validate_task)

    sv = sub.add_parser("serve", help="run the contest HTTP service")
    _add_globals(sv, suppress=True)
    sv.add_argument("--bind", default=None, help="host:port (default $BENCH_BIND or 127.0.0.1:8080)")
    sv.add_argument("--contest", action="append", default=[], help="contest definition JSON (repeatable)")
    sv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        conf = _load_config(args.config)
        return args.func(args, conf)
    except (BenchError, OSError, UsageError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
