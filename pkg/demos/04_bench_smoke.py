# scripted agents against the fixture binaries: oracle vs null
from pathlib import Path

from binoracle.bench import (NullAgent, OracleAgent, aggregate_report, compute_uplift, report_tsv, run_harness,
                             smoke_tasks)
from binoracle.toolserver import ToolServer

BIN = Path(__file__).parent.parent / "fixtures/bin"
paths = [str(BIN / n) for n in ("tiny_elf_x64", "diamond_elf", "loop_elf", "callchain_elf", "strings_pe")]

server = ToolServer(cache=False)
tasks = smoke_tasks(server, paths, seed=0)
for t in tasks:
    print(t.cve_id, sorted(t.ground_truth), t.candidate_names())

oracle = run_harness(tasks, OracleAgent, server)
null = run_harness(tasks, lambda t: NullAgent(), server)
for r in oracle[:2]:
    for step in r.transcript:
        print("  ", step[0], step[-1][:100])

print(report_tsv(aggregate_report(oracle)))
print("uplift@1", compute_uplift(oracle, null, 1))
