"""Function discovery, basic blocks, CFGs and the direct call graph."""
from .cfg import CFG, BasicBlock, CFGEdge, build_cfg, split_blocks
from .discover import FunctionRecord, discover_functions, function_from_listing, function_name
from .callgraph import CallGraph, Resolver, build_call_graph, call_sites

__all__ = [
    "BasicBlock", "CFG", "CFGEdge", "CallGraph", "FunctionRecord", "Resolver", "build_call_graph",
    "build_cfg", "call_sites", "discover_functions", "function_from_listing", "function_name",
    "split_blocks",
]
