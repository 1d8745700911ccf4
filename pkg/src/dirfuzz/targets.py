"""Executable targets.

``PredicateProgram`` runs a program graph whose branches carry input
predicates such as ``{"byte": 3, "op": "lt", "val": 16}``: at each block the
first out-edge whose predicate holds is taken, and an edge without a
predicate is the fall-through. ``TracedProgram`` wraps a Python function that
reports the blocks it visits.

Both know how to build an input that flips a given branch of a seed's trace,
which is what the simulated solver relies on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .probability import TraceView
from .program import GraphError, ProgramGraph, load_graph

DEFAULT_EXEC_COST = 0.001
DEFAULT_SOLVE_COST = 1.0
MAX_STEPS = 4096

OPS = ("eq", "lt", "ge", "range")


class ExecutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Predicate:
    byte: int
    op: str
    val: object

    @classmethod
    def from_doc(cls, doc) -> "Predicate":
        try:
            off, op, val = doc["byte"], doc["op"], doc["val"]
        except (KeyError, TypeError):
            raise GraphError(f"malformed predicate {doc!r}") from None
        if op not in OPS:
            raise GraphError(f"unknown predicate op {op!r}")
        if not isinstance(off, int) or off < 0:
            raise GraphError(f"bad predicate offset {off!r}")
        if op == "eq":
            vals = list(val) if isinstance(val, (list, tuple)) else [val]
            if not vals or any(not isinstance(v, int) or not 0 <= v <= 255 for v in vals):
                raise GraphError(f"bad eq value {val!r}")
            val = tuple(vals)
        elif op == "range":
            if not isinstance(val, (list, tuple)) or len(val) != 2 or not 0 <= val[0] <= val[1] <= 255:
                raise GraphError(f"bad range value {val!r}")
            val = (int(val[0]), int(val[1]))
        else:
            if not isinstance(val, int) or not 0 <= val <= 256:
                raise GraphError(f"bad {op} value {val!r}")
        return cls(off, op, val)

    def to_doc(self) -> dict:
        val = self.val
        if self.op == "eq":
            val = val[0] if len(val) == 1 else list(val)
        elif self.op == "range":
            val = list(val)
        return {"byte": self.byte, "op": self.op, "val": val}

    def compile(self) -> Callable[[bytes], bool]:
        off, val = self.byte, self.val
        if self.op == "eq":
            if len(val) == 1:
                v = val[0]
                return lambda d: len(d) > off and d[off] == v
            vb = bytes(val)
            end = off + len(vb)
            return lambda d: d[off:end] == vb
        if self.op == "lt":
            return lambda d: len(d) > off and d[off] < val
        if self.op == "ge":
            return lambda d: len(d) > off and d[off] >= val
        lo, hi = val
        return lambda d: len(d) > off and lo <= d[off] <= hi

    def allowed(self) -> dict:
        """Per-offset value sets under which the predicate holds."""
        if self.op == "eq":
            return {self.byte + i: {v} for i, v in enumerate(self.val)}
        if self.op == "lt":
            return {self.byte: set(range(0, min(self.val, 256)))}
        if self.op == "ge":
            return {self.byte: set(range(self.val, 256))}
        lo, hi = self.val
        return {self.byte: set(range(lo, hi + 1))}

    def probability(self) -> float:
        """Probability of holding on uniformly random (long enough) input."""
        p = 1.0
        for vals in self.allowed().values():
            p *= len(vals) / 256
        return p


@dataclass(frozen=True)
class BranchAnnotation:
    pred: Predicate | None = None
    solvable: bool = True
    solve_cost_s: float = DEFAULT_SOLVE_COST

    def to_doc(self) -> dict:
        doc: dict = {}
        if self.pred is not None:
            doc["pred"] = self.pred.to_doc()
        doc["solvable"] = self.solvable
        doc["solve_cost_s"] = self.solve_cost_s
        return doc


class PredicateProgram:
    """Graph program whose control flow is decided by byte predicates."""

    def __init__(self, graph: ProgramGraph, annotations: dict, name: str = "program",
                 seeds=(), exec_cost: float = DEFAULT_EXEC_COST):
        self.graph = graph
        self.name = name
        self.exec_cost = exec_cost
        self.annotations = {br: annotations.get(br, BranchAnnotation()) for br in graph.branches}
        self.initial_seeds = [bytes(s) for s in seeds]
        edges = {}
        for b in graph.blocks:
            guarded, fallback = [], []
            for br in graph.out_branches(b):
                pred = self.annotations[br].pred
                if pred is None:
                    fallback.append((br, None))
                else:
                    guarded.append((br, pred.compile()))
            edges[b] = tuple(guarded + fallback)
        self._edges = edges

    # execution -----------------------------------------------------------

    def execute(self, data: bytes) -> TraceView:
        edges = self._edges
        b = self.graph.entry
        blocks = [b]
        taken = []
        for _ in range(MAX_STEPS):
            nxt = None
            for br, check in edges[b]:
                if check is None or check(data):
                    nxt = br
                    break
            if nxt is None:
                break
            taken.append(nxt)
            b = nxt[1]
            blocks.append(b)
        return TraceView(tuple(blocks), tuple(taken))

    def solver_annotation(self, br) -> BranchAnnotation:
        return self.annotations[br]

    # constraint synthesis ------------------------------------------------

    def _choice_constraints(self, br):
        """(must-hold, must-fail) predicates for taking ``br`` at its source."""
        pos, neg = [], []
        for other, _ in self._edges[br[0]]:
            pred = self.annotations[other].pred
            if other == br:
                if pred is not None:
                    pos.append(pred)
                break
            if pred is not None:
                neg.append(pred)
        return pos, neg

    def path_constraints(self, trace: TraceView, br) -> tuple:
        """Predicates fixing the trace prefix up to br's source, plus br itself."""
        try:
            k = trace.blocks.index(br[0])
        except ValueError:
            raise ValueError(f"branch source {br[0]} not on trace") from None
        pos, neg = [], []
        for step in trace.branches[:k] + (br,):
            p, n = self._choice_constraints(step)
            pos += p
            neg += n
        return pos, neg

    def synthesize(self, data: bytes, trace: TraceView, br) -> bytes | None:
        pos, neg = self.path_constraints(trace, br)
        allowed: dict = {}
        for pred in pos:
            for off, vals in pred.allowed().items():
                allowed[off] = allowed[off] & vals if off in allowed else set(vals)
        length = max([len(data)] + [off + 1 for off in allowed])
        for pred in neg:
            cells = pred.allowed()
            if pred.op == "eq" and len(cells) > 1:
                # negated multi-byte equality: one differing byte is enough
                if any(off >= length or off in allowed and not (allowed[off] & vals)
                       for off, vals in cells.items()):
                    continue
                for off in sorted(cells, reverse=True):
                    cur = allowed.get(off, set(range(256)))
                    if len(cur - cells[off]) > 0:
                        allowed[off] = cur - cells[off]
                        break
                else:
                    return None
                continue
            for off, vals in cells.items():
                if off < length:
                    allowed[off] = allowed.get(off, set(range(256))) - vals
        if any(not vals for vals in allowed.values()):
            return None
        out = bytearray(data) + bytes(length - len(data))
        for off, vals in allowed.items():
            if out[off] not in vals:
                out[off] = min(vals)
        candidate = bytes(out)
        if br not in self.execute(candidate).branches:
            return None
        return candidate

    # serialisation -------------------------------------------------------

    def to_document(self) -> dict:
        doc = self.graph.to_document()
        doc["name"] = self.name
        doc["branches"] = [list(br) + [self.annotations[br].to_doc()] for br in self.graph.branches]
        doc["seeds"] = [s.hex() for s in self.initial_seeds]
        doc["exec_cost_s"] = self.exec_cost
        return doc


def load_program(source) -> PredicateProgram:
    """Load a program document: the graph schema extended with branch annotations."""
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith(("{", "[")):
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    graph = load_graph(doc)
    annotations = {}
    for item in doc["branches"]:
        if len(item) == 3:
            extra = item[2]
            if not isinstance(extra, dict):
                raise GraphError(f"malformed branch annotation {extra!r}")
            pred = Predicate.from_doc(extra["pred"]) if extra.get("pred") is not None else None
            cost = extra.get("solve_cost_s", DEFAULT_SOLVE_COST)
            if not isinstance(cost, (int, float)) or cost < 0:
                raise GraphError(f"bad solve_cost_s {cost!r}")
            annotations[(item[0], item[1])] = BranchAnnotation(
                pred, bool(extra.get("solvable", True)), float(cost))
    try:
        seeds = [bytes.fromhex(s) for s in doc.get("seeds", [])]
    except (TypeError, ValueError):
        raise GraphError("seeds must be hex strings") from None
    return PredicateProgram(graph, annotations, name=str(doc.get("name", "program")),
                            seeds=seeds, exec_cost=float(doc.get("exec_cost_s", DEFAULT_EXEC_COST)))


class TracedProgram:
    """A Python function instrumented with explicit block ids.

    ``func(data, visit)`` must call ``visit(block_id)`` on entering each
    block, starting with the graph entry.
    """

    def __init__(self, graph: ProgramGraph, func, name: str, seeds=(),
                 annotations: dict | None = None, repair=None,
                 exec_cost: float = DEFAULT_EXEC_COST):
        self.graph = graph
        self.func = func
        self.name = name
        self.exec_cost = exec_cost
        self.initial_seeds = [bytes(s) for s in seeds]
        self.annotations = annotations or {}
        self.repair = repair

    def execute(self, data: bytes) -> TraceView:
        blocks: list = []
        self.func(data, blocks.append)
        if not blocks:
            raise ExecutionError(f"{self.name}: no blocks visited")
        return TraceView.from_blocks(blocks)

    def solver_annotation(self, br) -> BranchAnnotation:
        return self.annotations.get(br, BranchAnnotation())

    def synthesize(self, data: bytes, trace: TraceView, br) -> bytes | None:
        # exhaustive single-byte neighbourhood, optionally followed by the
        # target's own repair step (e.g. checksum fix-up)
        for pos in range(len(data) + 1):
            for val in range(256):
                cand = bytearray(data)
                if pos == len(data):
                    cand.append(val)
                elif cand[pos] == val:
                    continue
                else:
                    cand[pos] = val
                variants = [bytes(cand)]
                if self.repair is not None:
                    variants.append(self.repair(bytes(cand)))
                for v in variants:
                    if br in self.execute(v).branches:
                        return v
        return None
