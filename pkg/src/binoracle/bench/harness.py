"""Agent loop over a toolserver session, deterministic scripted agents and task manifests."""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass

from ..queryapi import canonical
from ..toolserver import ToolServer
from .config import BuildConfig, classify_diff_bucket, select_reference_build
from .tasks import K, Candidate, EvalResult, EvalTask, build_recognition_task, make_result

EMPTY_LIMIT = 10


class SessionFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Budget:
    wall_seconds: float = 3600.0
    empty_limit: int = EMPTY_LIMIT
    max_candidates: int = K
    max_steps: int = 500            # hard stop for agents that neither commit nor go quiet


# -- agent actions
@dataclass(frozen=True)
class ToolCall:
    method: str
    params: dict


@dataclass(frozen=True)
class Say:
    text: str


@dataclass(frozen=True)
class Commit:
    names: tuple


# -- transports: call(method, params) -> {tag, method, ok, payload}
class LocalTransport:
    def __init__(self, server: ToolServer, path: str, deadline: float | None = None):
        self.server = server
        self.session = server.open_session(path, deadline=deadline).session_id

    def call(self, method: str, params: dict) -> dict:
        try:
            return self.server.handle_call(self.session, method, params).to_dict()
        except Exception as exc:    # a vanished session is a transport loss, not a crash
            raise SessionFailure(str(exc)) from exc

    def close(self):
        try:
            self.server.close_session(self.session)
        except Exception:
            pass


class WireTransport:
    """Same contract over a ``toolserver.Client`` connection."""

    def __init__(self, client, path: str, deadline: float | None = None):
        self.client = client
        try:
            resp = client.call("open_session", {"path": path, "deadline": deadline})
        except (OSError, ValueError) as exc:
            raise SessionFailure(str(exc)) from exc
        if not resp.get("ok"):
            raise SessionFailure(json.dumps(resp.get("payload")))
        self.session = resp["payload"]["session"]

    def call(self, method: str, params: dict) -> dict:
        try:
            resp = self.client.call(method, params, session=self.session)
        except (OSError, ValueError) as exc:
            raise SessionFailure(str(exc)) from exc
        return {k: resp.get(k) for k in ("tag", "method", "ok", "payload")}

    def close(self):
        try:
            self.client.call("close_session", session=self.session)
        except (OSError, ValueError):
            pass


def prompt(task: EvalTask) -> str:
    names = ", ".join(task.candidate_names())
    return f"{task.kind} {task.cve_id}: which of these functions is vulnerable? {names}"


def run_scripted_session(task: EvalTask, agent, transport, budget: Budget = Budget(),
                         clock=time.monotonic) -> EvalResult:
    """Drive ``agent`` until it commits, goes quiet ``empty_limit`` times, or runs out of budget."""
    start = clock()
    empties, answers, log, reason = 0, [], [], "max_steps"
    obs = prompt(task)
    for _ in range(budget.max_steps):
        if clock() - start >= budget.wall_seconds:
            reason = "deadline"
            break
        action = agent.act(obs)
        if isinstance(action, Commit):
            answers = list(action.names)[:budget.max_candidates]
            log.append(("commit", canonical(answers)))
            reason = "commit"
            break
        if isinstance(action, Say):
            log.append(("say", action.text))
            if action.text.strip():
                empties = 0
                obs = "continue"
                continue
            empties += 1
            if empties >= budget.empty_limit:
                reason = "empty_limit"
                break
            obs = ""
            continue
        if isinstance(action, ToolCall):
            empties = 0
            try:
                resp = transport.call(action.method, dict(action.params))
            except SessionFailure as exc:
                log.append(("failure", str(exc)))
                return make_result(task.cve_id, [], task.ground_truth, task.bucket, "session_failure", log)
            text = f"[tag={resp['tag']}] {canonical(resp['payload'])}"
            log.append(("call", action.method, canonical(action.params), text))
            obs = text
            continue
        raise TypeError(f"agent returned {action!r}")
    return make_result(task.cve_id, answers, task.ground_truth, task.bucket, reason, log)


# -- deterministic agents
class NullAgent:
    """Never calls a tool, never answers."""

    def act(self, obs):
        return Say("")


class ScriptedAgent:
    """Replays a fixed list of actions, then stays silent."""

    def __init__(self, actions):
        self.actions = list(actions)
        self.i = 0

    def act(self, obs):
        if self.i < len(self.actions):
            self.i += 1
            return self.actions[self.i - 1]
        return Say("")


def _bare(name: str) -> str:
    return name.rsplit(":", 1)[-1]


class OracleAgent(ScriptedAgent):
    """Looks around with a few tool calls, then answers the ground truth first."""

    def __init__(self, task: EvalTask):
        names = task.candidate_names()
        truth = [n for n in names if n in task.ground_truth]
        rest = [n for n in names if n not in task.ground_truth]
        actions = [ToolCall("list_functions", {"offset": 0, "limit": 50})]
        if truth and task.binary and truth[0].startswith(_stem(task.binary) + ":"):
            actions.append(ToolCall("decompile", {"func": _bare(truth[0])}))
        actions += [Say("the first candidate matches the advisory"), Commit(tuple(truth + rest))]
        super().__init__(actions)


def oracle_agent(task):
    return OracleAgent(task)


def null_agent(task):
    return NullAgent()


AGENTS = {"oracle": oracle_agent, "null": null_agent}


# -- tasks from binaries
def _stem(path: str) -> str:
    return os.path.basename(path)


def function_bodies(server: ToolServer, path: str) -> list[Candidate]:
    api = server.handle(path)
    stem = _stem(path)
    return [Candidate(f"{stem}:{n}", api.decompile(n)) for n in api.function_names()]


def _default_build(server: ToolServer, path: str) -> BuildConfig:
    fmt = str(server.handle(path).binary_format).upper()
    return BuildConfig("windows", "msvc", "Debug", "v1") if "PE" in fmt else BuildConfig("linux", "gcc", "O0", "v1")


def smoke_tasks(server: ToolServer, paths, seed: int = 0) -> list[EvalTask]:
    """One recognition task per binary: its longest function is the 'vulnerable' one."""
    bodies = {p: function_bodies(server, p) for p in paths}
    pool = [c for p in paths for c in bodies[p]]
    tasks = []
    for i, p in enumerate(paths):
        if not bodies[p]:
            continue
        vuln = max(bodies[p], key=lambda c: (len(c.body), c.name))
        tasks.append(build_recognition_task(vuln, pool, seed=seed + i, cve_id=f"SMOKE-{i:04d}",
                                            build=_default_build(server, p), binary=p))
    return tasks


def run_harness(tasks, agent_factory, server: ToolServer, budget: Budget = Budget(), clock=time.monotonic,
                transport_factory=None) -> list[EvalResult]:
    """``transport_factory(binary, deadline)`` defaults to an in-process session on ``server``."""
    factory = transport_factory or (lambda path, deadline: LocalTransport(server, path, deadline))
    results = []
    for task in tasks:
        try:
            tr = factory(task.binary, budget.wall_seconds)
        except SessionFailure as exc:
            results.append(make_result(task.cve_id, [], task.ground_truth, task.bucket, "session_failure",
                                       [("failure", str(exc))]))
            continue
        try:
            results.append(run_scripted_session(task, agent_factory(task), tr, budget, clock))
        finally:
            tr.close()
    return results


# -- task manifest
MANIFEST_COLUMNS = ("cve_id", "ground_truth", "binary", "os", "compiler", "opt", "version", "role")


def read_task_manifest(path) -> list[dict]:
    """Tab-separated; ground_truth is comma-separated function names; role is reference, variant or a bucket."""
    with open(path, newline="") as fh:
        reader = csv.DictReader((line for line in fh if not line.startswith("#")), delimiter="\t")
        missing = [c for c in MANIFEST_COLUMNS[:7] if c not in (reader.fieldnames or ())]
        if missing:
            raise ValueError(f"task manifest lacks columns {missing}")
        rows = list(reader)
    for r in rows:
        missing = [c for c in MANIFEST_COLUMNS[:7] if not r.get(c)]
        if missing:
            raise ValueError(f"task manifest row missing {missing}: {r}")
        r["ground_truth"] = [g.strip() for g in r["ground_truth"].split(",") if g.strip()]
        r["build"] = BuildConfig(r["os"], r["compiler"], r["opt"], r["version"])
        r["role"] = (r.get("role") or "variant").strip()
    return rows


def write_task_manifest(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for r in rows:
            b = r["build"]
            w.writerow([r["cve_id"], ",".join(r["ground_truth"]), r["binary"], b.os, b.compiler, b.opt, b.version,
                        r.get("role", "variant")])


def tasks_from_manifest(rows, server: ToolServer, seed: int = 0, base_dir=None) -> list[EvalTask]:
    """Recognition tasks; distractors come from every function of every manifest binary."""
    def resolve(p):
        return p if base_dir is None or os.path.isabs(p) else os.path.join(base_dir, p)

    paths = list(dict.fromkeys(resolve(r["binary"]) for r in rows))
    bodies = {p: function_bodies(server, p) for p in paths}
    pool = [c for p in paths for c in bodies[p]]
    by_cve: dict[str, list] = {}
    for r in rows:
        by_cve.setdefault(r["cve_id"], []).append(r)
    tasks = []
    for i, r in enumerate(rows):
        path = resolve(r["binary"])
        group = by_cve[r["cve_id"]]
        refs = [g for g in group if g["role"] == "reference"]
        ref = refs[0]["build"] if refs else select_reference_build([g["build"] for g in group])
        if r["role"] == "reference" or (not refs and r["build"] == ref):
            bucket = None
        elif r["role"] == "variant":
            bucket = classify_diff_bucket(ref, r["build"])
        else:
            bucket = r["role"]
        truth = {f"{_stem(path)}:{g}" for g in r["ground_truth"]}
        vuln = next(c for c in bodies[path] if c.name in truth)
        tasks.append(build_recognition_task(vuln, pool, seed=seed + i, cve_id=r["cve_id"], ground_truth=truth,
                                            build=r["build"], binary=path, bucket=bucket))
    return tasks
