import itertools
import json
import random
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from binoracle.bench import (BUCKETS, COMPILERS, MEAN_DIFFS, OPT_RANK, OPTS, OSES, REFERENCE, Budget, BuildConfig,
                             Candidate, Commit, EvalResult, IdenticalConfigs, LocalTransport, MismatchedTaskSets,
                             NullAgent, OracleAgent, PoolTooSmall, Say, ScriptedAgent, SessionFailure, ToolCall,
                             aggregate_report, build_recognition_task, classify_diff_bucket, compute_uplift,
                             hit_at_k, make_result, ngram_similarity, read_task_manifest, report_tsv, run_harness,
                             run_scripted_session, select_reference_build, smoke_tasks, tasks_from_manifest,
                             write_task_manifest)
from binoracle.toolserver import ToolServer

from conftest import FIXTURE_NAMES, fixture_path

SMOKE = ["tiny_elf_x64", "diamond_elf", "loop_elf", "callchain_elf", "strings_pe", "diamond_pe"]

VALID_BUILDS = [BuildConfig(o, c, p, v) for o, c, p, v in itertools.product(OSES, COMPILERS, OPTS, ("v1", "v2"))
                if (c == "msvc") == (o == "windows")]


@pytest.fixture(scope="module")
def server(tmp_path_factory):
    return ToolServer(cache_dir=str(tmp_path_factory.mktemp("bench-cache")))


# ---------------------------------------------------------------- Hit@k
def test_hit_examples():
    assert not hit_at_k(["g", "f", "h"], {"f"}, 1)
    assert hit_at_k(["g", "f", "h"], {"f"}, 2)
    assert hit_at_k(["x", "f2", "f1"], {"f1", "f2"}, 2)
    assert not hit_at_k(["x", "f2", "f1"], {"f1", "f2"}, 1)
    assert not any(hit_at_k([], {"f"}, k) for k in range(1, 8))
    with pytest.raises(ValueError):
        hit_at_k(["f"], {"f"}, 0)


def _best_rank(answers, truth):
    ranks = [i + 1 for i, a in enumerate(answers) if a in truth]
    return min(ranks) if ranks else None


@given(st.lists(st.sampled_from("abcdefgh"), max_size=8), st.sets(st.sampled_from("abcdefgh"), min_size=1),
       st.integers(1, 10))
def test_hit_matches_best_rank(answers, truth, k):
    r = _best_rank(answers, truth)
    assert hit_at_k(answers, truth, k) == (r is not None and r <= k)


@given(st.lists(st.sampled_from("abcdefgh"), max_size=8), st.sets(st.sampled_from("abcdefgh"), min_size=1))
def test_result_hits_monotone(answers, truth):
    res = make_result("CVE-X", answers, truth)
    assert len(res.answers) <= 5
    flags = [res.hit_at[k] for k in range(1, 6)]
    assert flags == sorted(flags)


# ---------------------------------------------------------------- builds
def test_build_invariants():
    with pytest.raises(ValueError):
        BuildConfig("linux", "msvc", "O0", "v1")
    with pytest.raises(ValueError):
        BuildConfig("windows", "gcc", "Debug", "v1")
    with pytest.raises(ValueError):
        BuildConfig("linux", "gcc", "Os", "v1")


def test_reference_examples():
    o0, o2 = BuildConfig("linux", "gcc", "O0", "v1"), BuildConfig("linux", "gcc", "O2", "v1")
    dbg = BuildConfig("windows", "msvc", "Debug", "v1")
    assert select_reference_build([o2, o0]) == o0
    assert select_reference_build([o0, dbg]) == dbg
    assert select_reference_build([o2]) == o2
    rwdi = BuildConfig("windows", "msvc", "RelWithDebInfo", "v1")
    assert select_reference_build([o2, rwdi]) == rwdi
    assert select_reference_build([BuildConfig("windows", "msvc", "O1", "v1"),
                                   BuildConfig("linux", "clang", "O1", "v2")]).os == "linux"
    assert select_reference_build([BuildConfig("linux", "gcc", "O1", "v2"),
                                   BuildConfig("linux", "gcc", "O1", "v1")]).version == "v1"


def test_opt_order_is_documented_table():
    assert sorted(OPT_RANK, key=OPT_RANK.get) == ["Debug", "O0", "O1", "RelWithDebInfo", "O2", "O3"]


@given(st.lists(st.sampled_from(VALID_BUILDS), min_size=1, max_size=12))
def test_reference_is_minimum_of_total_order(builds):
    ref = select_reference_build(builds)
    order = ("Debug", "O0", "O1", "RelWithDebInfo", "O2", "O3")
    assert all(order.index(ref.opt) <= order.index(b.opt) for b in builds)
    assert select_reference_build(list(reversed(builds))) == ref


def test_bucket_examples():
    a = BuildConfig("linux", "gcc", "O0", "v1")
    assert classify_diff_bucket(a, BuildConfig("linux", "gcc", "O2", "v1")) == "Opt"
    assert classify_diff_bucket(a, BuildConfig("windows", "msvc", "Debug", "v1")) == "OS"
    assert classify_diff_bucket(a, BuildConfig("linux", "clang", "O2", "v2")) == "All"
    assert classify_diff_bucket(a, BuildConfig("linux", "clang", "O0", "v1")) == "Compiler"
    assert classify_diff_bucket(a, BuildConfig("linux", "gcc", "O0", "v2")) == "Version"
    assert classify_diff_bucket(a, BuildConfig("windows", "msvc", "O2", "v2")) == "All"
    with pytest.raises(IdenticalConfigs):
        classify_diff_bucket(a, BuildConfig("linux", "gcc", "O0", "v1"))


def test_bucket_total_and_symmetric():
    for a, b in itertools.product(VALID_BUILDS, repeat=2):
        if a == b:
            continue
        bucket = classify_diff_bucket(a, b)
        assert bucket in BUCKETS
        assert classify_diff_bucket(b, a) == bucket


# ---------------------------------------------------------------- recognition tasks
def _pool(n, seed=0):
    rng = random.Random(seed)
    words = ["x", "y", "buf", "len", "=", "+", ";", "(", ")", "if", "return", "0", "1", "memcpy"]
    return [Candidate(f"f{i}", " ".join(rng.choice(words) for _ in range(rng.randint(3, 30)))) for i in range(n)]


def test_pool_of_four_takes_all():
    pool = _pool(4)
    vuln = Candidate("v", "memcpy(buf, x, len);")
    task = build_recognition_task(vuln, pool, seed=1)
    assert set(task.candidate_names()) == {"v", "f0", "f1", "f2", "f3"}


def test_pool_too_small():
    with pytest.raises(PoolTooSmall):
        build_recognition_task(Candidate("v", "a"), _pool(3) + [Candidate("v", "a")])


@pytest.mark.parametrize("seed", range(10))
def test_distractors_are_brute_force_top4(seed):
    pool = _pool(30, seed) + [Candidate("dup0", "x y"), Candidate("dup1", "x y"), Candidate("dup2", "x y")]
    vuln = Candidate("v", pool[seed].body + " memcpy ( buf )")
    task = build_recognition_task(vuln, pool, seed=seed)
    # exhaustive: score everyone, stable sort by descending score
    scores = [ngram_similarity(vuln.body, c.body) for c in pool]
    order = sorted(range(len(pool)), key=lambda i: -scores[i])
    assert set(task.candidate_names()) - {"v"} == {pool[i].name for i in order[:4]}
    assert task == build_recognition_task(vuln, pool, seed=seed)


def test_ties_keep_input_order():
    pool = [Candidate(f"t{i}", "same body") for i in range(8)]
    task = build_recognition_task(Candidate("v", "same body"), pool, seed=0)
    assert set(task.candidate_names()) == {"v", "t0", "t1", "t2", "t3"}


def test_shuffle_depends_on_seed():
    pool = _pool(20)
    orders = {tuple(build_recognition_task(Candidate("v", "x y"), pool, seed=s).candidate_names()) for s in range(20)}
    assert len(orders) > 1


def test_ngram_similarity_basics():
    assert ngram_similarity("a b c d", "a b c d") == pytest.approx(1.0)
    assert ngram_similarity("a b", "c d") == 0.0
    assert ngram_similarity("a b c", "a b d") == pytest.approx(ngram_similarity("a b d", "a b c"))


# ---------------------------------------------------------------- uplift
def _res(cve, hit, bucket=None):
    return make_result(cve, ["t"] if hit else ["x"], {"t"}, bucket)


def test_uplift_examples():
    guided = [_res(f"C{i}", True) for i in range(4)]
    solo = [_res(f"C{i}", False) for i in range(4)]
    assert compute_uplift(guided, solo) == 1.0
    assert compute_uplift(guided, guided) == 0.0
    assert compute_uplift(solo, guided) == -1.0
    with pytest.raises(MismatchedTaskSets):
        compute_uplift(guided, solo[:3])
    with pytest.raises(MismatchedTaskSets):
        compute_uplift([], [])


# ---------------------------------------------------------------- sessions
class FakeClock:
    def __init__(self, step=1.0):
        self.t, self.step = 0.0, step

    def __call__(self):
        self.t += self.step
        return self.t


class DeadTransport:
    def call(self, method, params):
        raise SessionFailure("connection reset")

    def close(self):
        pass


def _task(server, name="diamond_elf"):
    return smoke_tasks(server, [fixture_path(name), fixture_path("loop_elf")])[0]


def test_empty_limit(server):
    task = _task(server)
    res = run_scripted_session(task, NullAgent(), DeadTransport(), Budget(empty_limit=10))
    assert res.stop_reason == "empty_limit" and res.answers == ()
    assert len(res.transcript) == 10


def test_nonempty_message_resets_empty_count(server):
    task = _task(server)
    acts = [Say("")] * 9 + [Say("thinking")] + [Say("")] * 9 + [Commit(("a",))]
    res = run_scripted_session(task, ScriptedAgent(acts), DeadTransport())
    assert res.stop_reason == "commit"


def test_commit_truncated_to_five(server):
    task = _task(server)
    names = tuple(f"n{i}" for i in range(7))
    res = run_scripted_session(task, ScriptedAgent([Commit(names)]), DeadTransport())
    assert res.answers == names[:5] and res.stop_reason == "commit"


def test_deadline_zero(server):
    task = _task(server)
    res = run_scripted_session(task, OracleAgent(task), DeadTransport(), Budget(wall_seconds=0))
    assert res.stop_reason == "deadline" and not res.hit_at[1]


def test_deadline_with_fake_clock(server):
    task = _task(server)
    res = run_scripted_session(task, ScriptedAgent([Say("hm")] * 100), DeadTransport(), Budget(wall_seconds=5),
                               clock=FakeClock())
    assert res.stop_reason == "deadline" and len(res.transcript) == 4


def test_max_steps(server):
    task = _task(server)
    res = run_scripted_session(task, ScriptedAgent([Say("hm")] * 100), DeadTransport(), Budget(max_steps=7))
    assert res.stop_reason == "max_steps" and len(res.transcript) == 7


def test_session_failure_is_a_miss(server):
    task = _task(server)
    res = run_scripted_session(task, OracleAgent(task), DeadTransport())
    assert res.stop_reason == "session_failure" and res.answers == () and not res.hit_at[5]


def test_local_session_transcript(server):
    task = _task(server)
    tr = LocalTransport(server, task.binary)
    try:
        res = run_scripted_session(task, OracleAgent(task), tr)
    finally:
        tr.close()
    assert res.stop_reason == "commit" and res.hit_at[1]
    calls = [t for t in res.transcript if t[0] == "call"]
    assert calls[0][3].startswith("[tag=t1] ") and calls[1][3].startswith("[tag=t2] ")


def test_bad_action_type(server):
    with pytest.raises(TypeError):
        run_scripted_session(_task(server), ScriptedAgent([42]), DeadTransport())


def test_tool_errors_are_observations(server):
    task = _task(server)
    tr = LocalTransport(server, task.binary)
    acts = [ToolCall("decompile", {"func": "nope"}), Commit(("x",))]
    try:
        res = run_scripted_session(task, ScriptedAgent(acts), tr)
    finally:
        tr.close()
    assert "UnknownName" in res.transcript[0][3] and res.stop_reason == "commit"


# ---------------------------------------------------------------- end to end
def test_smoke_uplift_and_replay(server):
    paths = [fixture_path(n) for n in SMOKE]
    tasks = smoke_tasks(server, paths, seed=3)
    assert len(tasks) == len(SMOKE)
    oracle = run_harness(tasks, OracleAgent, server)
    null = run_harness(tasks, lambda t: NullAgent(), server)
    assert compute_uplift(oracle, null, 1) == 1.0
    assert compute_uplift(oracle, null, 5) == 1.0
    again = run_harness(smoke_tasks(server, paths, seed=3), OracleAgent, server)
    assert [json.dumps(r.to_dict(), sort_keys=True) for r in again] == \
           [json.dumps(r.to_dict(), sort_keys=True) for r in oracle]


# ---------------------------------------------------------------- report
def test_report_hand_computed():
    rows = [("R1", True, True, None), ("R2", False, True, None),
            ("A", True, True, "Opt"), ("B", False, False, "Opt"), ("C", False, True, "Opt"),
            ("D", True, True, "OS"), ("E", False, False, "Compiler"), ("F", False, True, "Compiler"),
            ("G", True, True, "All"), ("H", False, False, "All")]
    results = []
    for cve, h1, h5, bucket in rows:
        answers = ["t"] if h1 else (["x", "y", "t"] if h5 else ["x"])
        results.append(make_result(cve, answers, {"t"}, bucket))
    rep = {r.name: r for r in aggregate_report(results)}
    assert (rep[REFERENCE].n, rep[REFERENCE].hit1, rep[REFERENCE].hit5) == (2, 0.5, 1.0)
    assert (rep["Opt"].hit1, rep["Opt"].hit5) == (pytest.approx(1 / 3), pytest.approx(2 / 3))
    assert (rep["OS"].hit1, rep["OS"].hit5) == (1.0, 1.0)
    assert (rep["Compiler"].hit1, rep["Compiler"].hit5) == (0.0, 0.5)
    assert (rep["All"].hit1, rep["All"].hit5) == (0.5, 0.5)
    assert rep["Version"].n == 0 and rep["Version"].hit1 is None
    # unweighted: mean of the four present bucket means
    assert rep[MEAN_DIFFS].hit1 == pytest.approx((1 / 3 + 1 + 0 + 0.5) / 4)
    assert rep[MEAN_DIFFS].hit5 == pytest.approx((2 / 3 + 1 + 0.5 + 0.5) / 4)
    w = {r.name: r for r in aggregate_report(results, weighted=True)}
    assert w[MEAN_DIFFS].n == 8 and w[MEAN_DIFFS].hit1 == pytest.approx(3 / 8)
    tsv = report_tsv(aggregate_report(results)).splitlines()
    assert tsv[0] == "row\tn\thit@1\thit@5"
    assert "Version\t0\t-\t-" in tsv
    assert tsv[-1].startswith("Mean Diffs\t8\t")


def test_report_pooling_examples():
    one = aggregate_report([_res("a", True, "Opt"), _res("b", False, "Opt")])
    assert one[-1].hit1 == one[1].hit1 == 0.5
    two = aggregate_report([_res("a", True, "Opt"), _res("b", False, "OS"), _res("c", False, "OS")])
    assert two[-1].hit1 == 0.5


def test_report_order_independent():
    results = [_res(f"c{i}", i % 3 == 0, random.Random(i).choice((None,) + BUCKETS)) for i in range(40)]
    shuffled = results[:]
    random.Random(1).shuffle(shuffled)
    assert report_tsv(aggregate_report(results)) == report_tsv(aggregate_report(shuffled))


def test_report_rejects_unknown_bucket():
    with pytest.raises(ValueError):
        aggregate_report([_res("a", True, "Linker")])


# ---------------------------------------------------------------- manifests and CLI
def _manifest_rows():
    return [
        {"cve_id": "CVE-1", "ground_truth": ["diamond"], "binary": "diamond_elf",
         "build": BuildConfig("linux", "gcc", "O0", "v1"), "role": "reference"},
        {"cve_id": "CVE-1", "ground_truth": ["diamond"], "binary": "diamond_pe",
         "build": BuildConfig("windows", "msvc", "Debug", "v1"), "role": "variant"},
        {"cve_id": "CVE-2", "ground_truth": ["loop3"], "binary": "loop_elf",
         "build": BuildConfig("linux", "gcc", "O2", "v1"), "role": "variant"},
        {"cve_id": "CVE-2", "ground_truth": ["loop3"], "binary": "loop_elf",
         "build": BuildConfig("linux", "gcc", "O0", "v1"), "role": "variant"},
    ]


@pytest.fixture
def manifest(tmp_path, server):
    import os
    import shutil
    for n in ("diamond_elf", "diamond_pe", "loop_elf"):
        shutil.copy(fixture_path(n), tmp_path / n)
    p = tmp_path / "tasks.tsv"
    rows = _manifest_rows()
    # keep only ground truths that really exist in the fixtures
    for r in rows:
        names = server.handle(str(tmp_path / r["binary"])).function_names()
        if r["ground_truth"][0] not in names:
            r["ground_truth"] = [names[0]]
    write_task_manifest(p, rows)
    return p


def test_manifest_roundtrip_and_buckets(manifest, server):
    rows = read_task_manifest(manifest)
    assert [r["build"] for r in rows] == [r["build"] for r in _manifest_rows()]
    tasks = tasks_from_manifest(rows, server, base_dir=str(manifest.parent))
    assert [t.bucket for t in tasks] == [None, "OS", "Opt", None]
    for t in tasks:
        assert t.ground_truth & set(t.candidate_names())


def test_cli_bench(manifest, tmp_path):
    out = tmp_path / "results.jsonl"
    cmd = [sys.executable, "-m", "binoracle.toolserver.cli", "--cache-dir", str(tmp_path / "c"), "bench",
           str(manifest), "--agent", "oracle", "--results", str(out)]
    p = subprocess.run(cmd, capture_output=True, text=True, timeout=120)
    assert p.returncode == 0, p.stderr
    lines = p.stdout.splitlines()
    assert lines[0] == "row\tn\thit@1\thit@5"
    assert lines[1] == "Reference\t2\t1.0000\t1.0000"
    assert len(out.read_text().splitlines()) == 4
    p2 = subprocess.run(cmd, capture_output=True, text=True, timeout=120)
    assert p2.stdout == p.stdout
    null = subprocess.run(cmd[:-4] + ["--agent", "null"], capture_output=True, text=True, timeout=120)
    assert "Reference\t2\t0.0000\t0.0000" in null.stdout


def test_cli_bench_bad_manifest(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("cve_id\tground_truth\n")
    p = subprocess.run([sys.executable, "-m", "binoracle.toolserver.cli", "bench", str(bad)],
                       capture_output=True, text=True, timeout=60)
    assert p.returncode == 2
