"""Evaluation-harness primitives: tasks, Hit@k, reference builds, diff buckets, uplift, scripted sessions."""
from .config import (BUCKETS, COMPILERS, OPT_RANK, OPTS, OSES, BuildConfig, IdenticalConfigs, classify_diff_bucket,
                     select_reference_build)
from .harness import (AGENTS, EMPTY_LIMIT, Budget, Commit, LocalTransport, NullAgent, OracleAgent, Say,
                      ScriptedAgent, SessionFailure, ToolCall, WireTransport, function_bodies, read_task_manifest,
                      run_harness, run_scripted_session, smoke_tasks, tasks_from_manifest, write_task_manifest)
from .report import MEAN_DIFFS, REFERENCE, ReportRow, aggregate_report, report_tsv
from .tasks import (K, Candidate, EvalResult, EvalTask, MismatchedTaskSets, PoolTooSmall, build_recognition_task,
                    compute_uplift, hit_at_k, lex, make_result, ngram_similarity)

__all__ = [
    "AGENTS", "BUCKETS", "Budget", "BuildConfig", "COMPILERS", "Candidate", "Commit", "EMPTY_LIMIT", "EvalResult",
    "EvalTask", "IdenticalConfigs", "K", "LocalTransport", "MEAN_DIFFS", "MismatchedTaskSets", "NullAgent",
    "OPTS", "OPT_RANK", "OSES", "OracleAgent", "PoolTooSmall", "REFERENCE", "ReportRow", "Say", "ScriptedAgent",
    "SessionFailure", "ToolCall", "WireTransport", "aggregate_report", "build_recognition_task",
    "classify_diff_bucket", "compute_uplift", "function_bodies", "hit_at_k", "lex", "make_result",
    "ngram_similarity", "read_task_manifest", "report_tsv", "run_harness", "run_scripted_session",
    "select_reference_build", "smoke_tasks", "tasks_from_manifest", "write_task_manifest",
]
