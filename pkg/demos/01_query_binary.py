# walk one of the fixture binaries through the query facade
import sys
from pathlib import Path

from binoracle.queryapi import BinaryAPI

path = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).parent.parent / "fixtures/bin/dyn_imports_elf")
api = BinaryAPI(path, cache=False)
print(api.binary_format, api.list_functions(0, 10).to_dict())
print("imports:", api.get_imports(0, 50).items)

for imp in api.get_imports(0, 50).items:
    print(f"  {imp} <- {api.find_callers_of_import(imp)}")

f = api.function_names()[-1]
print("\n--", f, "callees", api.get_callees(f))
print(api.get_assembly(f))
print(api.get_pcode(f))
print(api.decompile(f))

cfg = api.get_cfg(f)
print(len(cfg["blocks"]), "blocks", [(e["source"], e["target"], e["edge_type"]) for e in cfg["edges"]])

hits = api.search_pcode(r"CALL \w+", 5)
print("search:", hits["total_match_count"], "matches, truncated =", hits["truncated"])
