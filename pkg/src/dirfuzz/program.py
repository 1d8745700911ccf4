"""Program graph, static basic-block distances and sibling-branch groups.

A program is described by a JSON document::

    {"entry": 0, "targets": [7],
     "blocks": [{"id": 0, "label": "M", "func": "main"}, ...],
     "branches": [[0, 1], [0, 4], ...],
     "calls": [[caller_block, callee_entry_block], ...]}

Branch entries may carry a third element with runtime annotations (input
predicate, solver hints); those are interpreted by :mod:`dirfuzz.targets`
and ignored here.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

BlockId = int
Branch = tuple  # (src, dst) pair of block ids


class GraphError(ValueError):
    """Raised for malformed graph documents."""


class _Unreachable:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNREACHABLE"

    def __reduce__(self):
        return (_Unreachable, ())


# Distinguished distance value for blocks with no path to any target.
UNREACHABLE = _Unreachable()


@dataclass(frozen=True)
class SiblingGroup:
    src: BlockId
    members: tuple


@dataclass(frozen=True)
class ProgramGraph:
    blocks: tuple
    branches: tuple
    entry: BlockId
    targets: frozenset
    labels: Mapping[BlockId, str] = field(default_factory=dict)
    funcs: Mapping[BlockId, str] = field(default_factory=dict)
    calls: tuple = ()

    def __post_init__(self):
        block_set = set(self.blocks)
        if len(block_set) != len(self.blocks):
            raise GraphError("duplicate block id")
        if self.entry not in block_set:
            raise GraphError(f"unknown entry block {self.entry!r}")
        if not self.targets:
            raise GraphError("empty target set")
        for t in self.targets:
            if t not in block_set:
                raise GraphError(f"unknown target block {t!r}")
        seen = set()
        for br in self.branches:
            for end in br:
                if end not in block_set:
                    raise GraphError(f"dangling endpoint {end!r} in branch {list(br)}")
            if br in seen:
                raise GraphError(f"duplicate branch {list(br)}")
            seen.add(br)
        for call in self.calls:
            for end in call:
                if end not in block_set:
                    raise GraphError(f"dangling endpoint {end!r} in call {list(call)}")
        succ: dict = {b: [] for b in self.blocks}
        for src, dst in self.branches:
            succ[src].append((src, dst))
        object.__setattr__(self, "_out", {b: tuple(v) for b, v in succ.items()})

    def out_branches(self, block: BlockId) -> tuple:
        return self._out[block]

    def successors(self, block: BlockId) -> list:
        return [dst for _, dst in self._out[block]]

    def label(self, block: BlockId) -> str:
        return self.labels.get(block) or str(block)

    def block_by_label(self, label: str) -> BlockId:
        for b, lab in self.labels.items():
            if lab == label:
                return b
        raise KeyError(label)

    def to_document(self) -> dict:
        blocks = []
        for b in self.blocks:
            entry: dict[str, Any] = {"id": b}
            if b in self.labels:
                entry["label"] = self.labels[b]
            entry["func"] = self.funcs.get(b, "main")
            blocks.append(entry)
        return {
            "entry": self.entry,
            "targets": sorted(self.targets),
            "blocks": blocks,
            "branches": [list(br) for br in self.branches],
            "calls": [list(c) for c in self.calls],
        }


def _as_int(value, what):
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise GraphError(f"{what} must be a non-negative integer, got {value!r}")
    return value


def load_graph(source) -> ProgramGraph:
    """Build a validated graph from a document (dict, JSON text or path)."""
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith(("{", "[")):
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    if not isinstance(doc, Mapping):
        raise GraphError("graph document must be a JSON object")
    for key in ("entry", "targets", "blocks", "branches"):
        if key not in doc:
            raise GraphError(f"missing field {key!r}")

    blocks, labels, funcs = [], {}, {}
    for item in doc["blocks"]:
        if not isinstance(item, Mapping) or "id" not in item:
            raise GraphError(f"malformed block entry {item!r}")
        bid = _as_int(item["id"], "block id")
        blocks.append(bid)
        if item.get("label") is not None:
            labels[bid] = str(item["label"])
        funcs[bid] = str(item.get("func", "main"))

    branches = []
    for item in doc["branches"]:
        if not isinstance(item, (list, tuple)) or len(item) not in (2, 3):
            raise GraphError(f"malformed branch entry {item!r}")
        branches.append((_as_int(item[0], "branch src"), _as_int(item[1], "branch dst")))

    calls = []
    for item in doc.get("calls", []) or []:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise GraphError(f"malformed call entry {item!r}")
        calls.append((_as_int(item[0], "call src"), _as_int(item[1], "call dst")))

    targets = doc["targets"]
    if not isinstance(targets, list):
        raise GraphError("targets must be a list")
    return ProgramGraph(
        blocks=tuple(blocks),
        branches=tuple(branches),
        entry=_as_int(doc["entry"], "entry"),
        targets=frozenset(_as_int(t, "target") for t in targets),
        labels=labels,
        funcs=funcs,
        calls=tuple(calls),
    )


class BbDistanceMap(Mapping):
    """Block -> distance to the target set (float) or UNREACHABLE."""

    def __init__(self, dist: dict):
        self._dist = dist

    def __getitem__(self, block):
        return self._dist[block]

    def __iter__(self):
        return iter(self._dist)

    def __len__(self):
        return len(self._dist)

    def finite(self, block) -> bool:
        return self._dist[block] is not UNREACHABLE

    def __repr__(self):
        return f"BbDistanceMap({self._dist!r})"


def _reverse_adjacency(g: ProgramGraph) -> dict:
    # flat unified graph: CFG edges and call edges, all unit weight
    rev: dict = {b: [] for b in g.blocks}
    for src, dst in g.branches:
        rev[dst].append(src)
    for src, dst in g.calls:
        rev[dst].append(src)
    return rev


def compute_bb_distance(g: ProgramGraph) -> BbDistanceMap:
    """Harmonic mean of hop counts to each reachable target (0 for targets)."""
    rev = _reverse_adjacency(g)
    inv_sum = {b: 0.0 for b in g.blocks}
    reach = {b: 0 for b in g.blocks}
    for t in sorted(g.targets):
        hops = {t: 0}
        queue = deque([t])
        while queue:
            b = queue.popleft()
            for p in rev[b]:
                if p not in hops:
                    hops[p] = hops[b] + 1
                    queue.append(p)
        for b, h in hops.items():
            if h > 0:
                inv_sum[b] += 1.0 / h
                reach[b] += 1
    dist = {}
    for b in g.blocks:
        if b in g.targets:
            dist[b] = 0.0
        elif reach[b]:
            dist[b] = reach[b] / inv_sum[b]
        else:
            dist[b] = UNREACHABLE
    return BbDistanceMap(dist)


def sibling_groups(g: ProgramGraph) -> list:
    """One group per block with out-edges, members in declaration order."""
    return [SiblingGroup(b, g.out_branches(b)) for b in g.blocks if g.out_branches(b)]


def is_reachable(d: BbDistanceMap, b: BlockId) -> bool:
    if b not in d:
        raise KeyError(f"unknown block id {b!r}")
    return d[b] is not UNREACHABLE


def arithmetic_seed_distance(d: BbDistanceMap, blocks: Iterable) -> float | None:
    """Mean BB distance over the distinct blocks that have one (AFLGo-style)."""
    vals = [d[b] for b in dict.fromkeys(blocks) if d[b] is not UNREACHABLE]
    return sum(vals) / len(vals) if vals else None
