"""``binoracle`` command line: one subcommand per query method, plus ``serve``."""
from __future__ import annotations

import argparse
import sys

from ..container import ContainerError
from ..queryapi import canonical
from .session import ToolServer, error_payload
from .wire import TCPToolServer, parse_addr, serve_stream

# subcommand -> (method, positional params)
_COMMANDS = {
    "functions": ("list_functions", ()),
    "imports": ("get_imports", ()),
    "strings": ("get_strings", ()),
    "callers-of-import": ("find_callers_of_import", ("import_name",)),
    "string-refs": ("find_functions_referencing_string", ("s",)),
    "callees": ("get_callees", ("func",)),
    "callers": ("get_callers", ("func",)),
    "decompile": ("decompile", ("func",)),
    "pcode": ("get_pcode", ("func",)),
    "assembly": ("get_assembly", ("func",)),
    "cfg": ("get_cfg", ("func",)),
}
_SEARCH = {"decompiled": "search_decompiled", "pcode": "search_pcode", "assembly": "search_assembly"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="binoracle", description="Read-only queries over stripped ELF/PE binaries.")
    p.add_argument("--cache-dir", help="analysis cache directory (default: $BINORACLE_CACHE_DIR)")
    p.add_argument("--no-cache", action="store_true", help="analyse from scratch, write nothing")
    p.add_argument("--symbols", action="store_true", help="name functions from surviving symbols")
    p.add_argument("--raw", action="store_true", help="print text results without the tag envelope")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (method, pos) in _COMMANDS.items():
        sp = sub.add_parser(name, help=method)
        sp.add_argument("path")
        for arg in pos:
            sp.add_argument(arg)
        if method in ("list_functions", "get_imports", "get_strings"):
            sp.add_argument("--offset", type=int, default=0)
            sp.add_argument("--limit", type=int, default=100)
        if name == "string-refs":
            sp.add_argument("--case-sensitive", action="store_true")
    sp = sub.add_parser("search", help="regex search over one representation")
    sp.add_argument("path")
    sp.add_argument("--repr", choices=sorted(_SEARCH), default="pcode")
    sp.add_argument("--pattern", required=True)
    sp.add_argument("--limit", type=int, default=200)
    sp = sub.add_parser("serve", help="line-delimited JSON service")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--addr", help="HOST:PORT to listen on (port 0 picks a free one)")
    g.add_argument("--stdio", action="store_true", help="serve requests on stdin/stdout")
    sub.add_parser("capabilities", help="protocol version, methods and regex dialect")
    sp = sub.add_parser("bench", help="run a scripted agent over a task manifest and print the report")
    sp.add_argument("manifest", help="tab-separated task manifest")
    sp.add_argument("--agent", choices=("oracle", "null"), default="oracle")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--wall-seconds", type=float, default=3600.0)
    sp.add_argument("--empty-limit", type=int, default=10)
    sp.add_argument("--max-candidates", type=int, default=5)
    sp.add_argument("--weighted", action="store_true", help="pool Mean Diffs over results, not bucket means")
    sp.add_argument("--results", help="also write one JSON result per line here")
    return p


def _bench(args, server) -> int:
    import json
    import os

    from .. import bench
    try:
        rows = bench.read_task_manifest(args.manifest)
        tasks = bench.tasks_from_manifest(rows, server, args.seed, os.path.dirname(os.path.abspath(args.manifest)))
    except (ValueError, OSError, ContainerError, StopIteration) as exc:
        print(f"binoracle bench: {exc or 'ground truth not found'}", file=sys.stderr)
        return 2
    budget = bench.Budget(args.wall_seconds, args.empty_limit, args.max_candidates)
    results = bench.run_harness(tasks, bench.AGENTS[args.agent], server, budget)
    if args.results:
        with open(args.results, "w") as fh:
            for r in results:
                fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    sys.stdout.write(bench.report_tsv(bench.aggregate_report(results, args.weighted)))
    return 0


def _params(args) -> tuple[str, dict]:
    if args.command == "search":
        return _SEARCH[args.repr], {"pattern": args.pattern, "limit": args.limit}
    method, pos = _COMMANDS[args.command]
    params = {k: getattr(args, k) for k in pos}
    if method in ("list_functions", "get_imports", "get_strings"):
        params.update(offset=args.offset, limit=args.limit)
    if args.command == "string-refs" and args.case_sensitive:
        params["case_sensitive"] = True
    return method, params


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    server = ToolServer(cache_dir=args.cache_dir, cache=not args.no_cache)
    if args.command == "capabilities":
        print(canonical(server.capabilities()))
        return 0
    if args.command == "bench":
        return _bench(args, server)
    if args.command == "serve":
        if args.stdio:
            serve_stream(server, sys.stdin, sys.stdout)
            return 0
        try:
            addr = parse_addr(args.addr)
        except ValueError as exc:
            parser.error(str(exc))
        with TCPToolServer(addr, server) as srv:
            host, port = srv.server_address[:2]
            print(f"listening on {host}:{port}", file=sys.stderr, flush=True)
            try:
                srv.serve_forever()
            except KeyboardInterrupt:
                pass
        return 0
    try:
        sess = server.open_session(args.path, strict=not args.symbols)
    except (ContainerError, OSError) as exc:
        print(canonical(error_payload(type(exc).__name__, str(exc))))
        return 1
    method, params = _params(args)
    resp = sess.call(method, params)
    if args.raw and resp.ok and isinstance(resp.payload, str):
        print(resp.payload)
    else:
        print(resp.text())
    return 0 if resp.ok else 1


if __name__ == "__main__":      # pragma: no cover
    sys.exit(main())
