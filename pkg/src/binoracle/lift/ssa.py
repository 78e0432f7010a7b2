"""SSA construction: dominators, pruned PHI placement, renaming, DCE and renumbering."""
from __future__ import annotations

from dataclasses import dataclass, field

from .ir import COMPARISONS, SIDE_EFFECTS, Loc, PcodeOp, Value

_ROOT = "<root>"


@dataclass
class SsaBlock:
    label: str
    start: int
    ops: list


@dataclass
class SsaFunction:
    name: str
    entry_va: int
    blocks: list
    preds: dict
    succs: dict
    unsupported: list = field(default_factory=list)
    idom: dict = field(default_factory=dict, repr=False)

    def block(self, label: str) -> SsaBlock:
        return next(b for b in self.blocks if b.label == label)

    def values(self):
        """Every Value mentioned, in rendering order."""
        seen = {}
        for b in self.blocks:
            for op in b.ops:
                for v in list(op.inputs) + [op.output]:
                    if isinstance(v, Value):
                        seen.setdefault(id(v), v)
        return list(seen.values())


def _label_key(label: str):
    return int(label.split("_")[1]) if label.startswith("blk_") else -1


def dominators(labels, preds, roots):
    """Immediate dominators (Cooper/Harvey/Kennedy) with a virtual root over ``roots``."""
    succs = {l: [] for l in labels}
    for t, ps in preds.items():
        for p in ps:
            succs[p].append(t)
    order, seen = [], {_ROOT}
    for r in roots:
        if r in seen:
            continue
        stack = [(r, iter(sorted(set(succs[r]), key=_label_key, reverse=True)))]
        seen.add(r)
        while stack:
            node, it = stack[-1]
            nxt = next((s for s in it if s not in seen), None)
            if nxt is None:
                order.append(node)
                stack.pop()
            else:
                seen.add(nxt)
                stack.append((nxt, iter(sorted(set(succs[nxt]), key=_label_key, reverse=True))))
    rpo = [_ROOT] + order[::-1]
    index = {n: i for i, n in enumerate(rpo)}
    eff_preds = {n: [p for p in preds.get(n, ()) if p in index] for n in rpo}
    for r in roots:
        eff_preds[r] = eff_preds[r] + [_ROOT]
    idom = {_ROOT: _ROOT}

    def intersect(a, b):
        while a != b:
            while index[a] > index[b]:
                a = idom[a]
            while index[b] > index[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for n in rpo[1:]:
            done = [p for p in eff_preds[n] if p in idom]
            new = done[0]
            for p in done[1:]:
                new = intersect(p, new)
            if idom.get(n) != new:
                idom[n] = new
                changed = True
    return idom


def _roots(labels, preds, entry):
    succs = {l: set() for l in labels}
    for t, ps in preds.items():
        for p in ps:
            succs[p].add(t)
    roots, seen = [], set()

    def reach(r):
        work = [r]
        seen.add(r)
        while work:
            for s in succs[work.pop()]:
                if s not in seen:
                    seen.add(s)
                    work.append(s)

    for cand in [entry] + sorted(labels, key=_label_key):
        if cand not in seen:
            roots.append(cand)
            reach(cand)
    return roots


def dominates(idom, a, b) -> bool:
    while True:
        if a == b:
            return True
        if b == idom.get(b, b):
            return False
        b = idom[b]


def dominance_frontiers(idom, preds):
    df = {n: set() for n in idom}
    for n, ps in preds.items():
        ps = [p for p in ps if p in idom]
        if len(set(ps)) + (1 if idom.get(n) == _ROOT else 0) < 2:
            continue
        for p in set(ps):
            runner = p
            while runner != idom[n] and runner != _ROOT:
                df[runner].add(n)
                runner = idom[runner]
    return df


def _liveness(blocks, succs):
    """live-in sets of non-unique locations."""
    use, defs = {}, {}
    for b in blocks:
        u, d = set(), set()
        for op in b.ops:
            for x in op.inputs:
                if isinstance(x, Loc) and x not in d:
                    u.add(x)
            if isinstance(op.output, Loc):
                d.add(op.output)
        use[b.label], defs[b.label] = u, d
    live_in = {b.label: set() for b in blocks}
    changed = True
    while changed:
        changed = False
        for b in reversed(blocks):
            out = set()
            for s in succs[b.label]:
                out |= live_in[s]
            new = use[b.label] | (out - defs[b.label])
            if new != live_in[b.label]:
                live_in[b.label] = new
                changed = True
    return live_in, defs


def _out_type(op: PcodeOp, loc: Loc | None):
    if op.opcode in COMPARISONS or (loc is not None and loc.space == "flag"):
        return "bool"
    if op.opcode in ("PTRADD", "PTRSUB"):
        return "void *"
    return None


def construct_ssa(lifted) -> SsaFunction:
    """Rewrite ``lifted`` (a LiftedFunction) in place into SSA form."""
    blocks = lifted.blocks
    labels = [b.label for b in blocks]
    by_label = {b.label: b for b in blocks}
    preds = {l: list(lifted.preds.get(l, ())) for l in labels}
    succs = {l: list(lifted.succs.get(l, ())) for l in labels}
    if not blocks:
        return SsaFunction(lifted.name, lifted.entry_va, [], preds, succs, list(lifted.unsupported))
    roots = _roots(labels, preds, labels[0])
    idom = dominators(labels, preds, roots)
    df = dominance_frontiers(idom, preds)
    live_in, defs = _liveness(blocks, succs)

    # pruned PHI placement
    def_sites: dict[Loc, set] = {}
    for l, d in defs.items():
        for loc in d:
            def_sites.setdefault(loc, set()).add(l)
    phis: dict[str, list] = {l: [] for l in labels}
    for loc in sorted(def_sites, key=lambda x: (x.space, x.name or "", x.offset or 0, x.width)):
        work = list(def_sites[loc])
        placed = set()
        while work:
            n = work.pop()
            for y in df.get(n, ()):
                if y in placed or y == _ROOT or loc not in live_in[y] or not preds[y]:
                    continue
                placed.add(y)
                phis[y].append(PcodeOp("PHI", loc, [loc] * len(preds[y])))
                if y not in def_sites[loc]:
                    work.append(y)
    for l in labels:
        by_label[l].ops[:0] = phis[l]

    # renaming over the dominator tree
    children: dict[str, list] = {}
    for n, d in idom.items():
        if n != _ROOT:
            children.setdefault(d, []).append(n)
    entry_vals: dict[Loc, Value] = {}
    stacks: dict[Loc, list] = {}

    def current(loc: Loc) -> Value:
        st = stacks.get(loc)
        if st:
            return st[-1]
        if loc not in entry_vals:
            entry_vals[loc] = Value(loc.width, loc, "bool" if loc.space == "flag" else None)
        return entry_vals[loc]

    def rename(label):
        pushed = []
        for op in by_label[label].ops:
            if op.opcode != "PHI":
                op.inputs = [current(x) if isinstance(x, Loc) else x for x in op.inputs]
            if isinstance(op.output, Loc):
                loc = op.output
                v = Value(loc.width, loc, _out_type(op, loc))
                op.output = v
                stacks.setdefault(loc, []).append(v)
                pushed.append(loc)
            elif isinstance(op.output, Value) and op.output.type is None:
                op.output.type = _out_type(op, None)
        for s in dict.fromkeys(succs[label]):
            for op in by_label[s].ops:
                if op.opcode != "PHI":
                    break
                loc = op.output.loc if isinstance(op.output, Value) else op.output
                for j, p in enumerate(preds[s]):
                    if p == label:
                        op.inputs[j] = current(loc)
        return pushed

    # iterative DFS so deep dominator trees don't hit the recursion limit
    stack = [(r, False) for r in reversed(sorted(children.get(_ROOT, []), key=_label_key))]
    undo = []
    while stack:
        node, leaving = stack.pop()
        if leaving:
            for loc in undo.pop():
                stacks[loc].pop()
            continue
        undo.append(rename(node))
        stack.append((node, True))
        for c in sorted(children.get(node, []), key=_label_key, reverse=True):
            stack.append((c, False))

    _dce(blocks)
    ordered = sorted(blocks, key=lambda b: _label_key(b.label))
    _renumber(ordered)
    fn = SsaFunction(lifted.name, lifted.entry_va, [SsaBlock(b.label, b.start, b.ops) for b in ordered],
                     preds, succs, list(lifted.unsupported))
    fn.idom = {k: v for k, v in idom.items() if k != _ROOT}
    return fn


def _dce(blocks):
    """Drop unused unique-temp and flag definitions (including PHIs) until stable."""
    while True:
        used = set()
        for b in blocks:
            for op in b.ops:
                used.update(id(x) for x in op.inputs if isinstance(x, Value))
                if op.display is not None:
                    src = op.display[1]
                    used.add(id(src.output))
                    used.update(id(x) for x in src.inputs if isinstance(x, Value))
        removed = False
        for b in blocks:
            keep = []
            for op in b.ops:
                out = op.output
                dead = (isinstance(out, Value) and id(out) not in used and op.opcode not in SIDE_EFFECTS
                        and (out.loc is None or out.loc.space == "flag"))
                if dead:
                    removed = True
                else:
                    keep.append(op)
            b.ops[:] = keep
        if not removed:
            return


def _renumber(blocks):
    n = 0
    seen = set()
    for b in blocks:
        for v in b_values(b):
            if id(v) not in seen:
                seen.add(id(v))
                v.id = n
                n += 1


def b_values(b):
    for op in b.ops:
        for x in op.inputs:
            if isinstance(x, Value):
                yield x
        if op.display is not None:
            for x in op.display[1].inputs:
                if isinstance(x, Value):
                    yield x
        if isinstance(op.output, Value):
            yield op.output
