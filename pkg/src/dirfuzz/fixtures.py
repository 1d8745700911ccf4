"""Built-in target programs."""

from __future__ import annotations

import random

from .program import ProgramGraph
from .targets import BranchAnnotation, Predicate, PredicateProgram, TracedProgram

MAGIC = (0xDE, 0xAD, 0xBE, 0xEF)


def _program(name, labels, edges, entry, targets, seeds, funcs=None):
    """edges: list of (src_label, dst_label, pred_or_None, solvable, cost)."""
    ids = {lab: i for i, lab in enumerate(labels)}
    branches, ann = [], {}
    for src, dst, pred, solvable, cost in edges:
        br = (ids[src], ids[dst])
        branches.append(br)
        ann[br] = BranchAnnotation(pred, solvable, cost)
    graph = ProgramGraph(
        blocks=tuple(range(len(labels))),
        branches=tuple(branches),
        entry=ids[entry],
        targets=frozenset(ids[t] for t in targets),
        labels={i: lab for lab, i in ids.items()},
        funcs={i: (funcs or {}).get(lab, "main") for lab, i in ids.items()},
    )
    return PredicateProgram(graph, ann, name=name, seeds=seeds)


FIG1_LEN = 12
FIG1_MAGIC_AT = 8
FIG1_GATE_BYTE = 6
FIG1_GATE_VALUE = 0x42


def fig1_seeds() -> tuple:
    """(trace-1 seed, trace-2 seed)."""
    # mid-range filler keeps the route guards true even when edits shift bytes
    base = bytearray([0x80] * FIG1_LEN)
    base[FIG1_GATE_BYTE] = 0x90
    t1 = bytes(base)
    base[FIG1_MAGIC_AT:FIG1_MAGIC_AT + 4] = bytes(MAGIC)
    return t1, bytes(base)


def fig1() -> PredicateProgram:
    """Two routes into T through d.

    The long route M-a-b-c-d only needs byte-range guards. The short route
    M-e-d sits behind a 4-byte magic compare near the end of the input, which
    random mutation essentially never reproduces once it is lost. d itself
    reaches T only on one exact byte value.
    """
    P = Predicate
    edges = [
        ("M", "e", P(FIG1_MAGIC_AT, "eq", MAGIC), True, 2.0),
        ("M", "a", None, True, 1.0),
        ("a", "b", P(1, "lt", 0xC0), True, 1.0),
        ("a", "f", None, True, 1.0),
        ("b", "c", P(2, "ge", 0x40), True, 1.0),
        ("b", "f", None, True, 1.0),
        ("c", "d", P(3, "range", (0x10, 0xEF)), True, 1.0),
        ("c", "f", None, True, 1.0),
        ("e", "d", None, True, 1.0),
        ("d", "T", P(FIG1_GATE_BYTE, "eq", (FIG1_GATE_VALUE,)), True, 0.5),
        ("d", "f", None, True, 1.0),
    ]
    return _program("fig1", ["M", "a", "b", "c", "d", "e", "f", "T"], edges,
                    "M", ["T"], fig1_seeds())


def fig3_seeds() -> tuple:
    """(seed A reaching b10 via b5/b8, seed B ending in b15)."""
    a = bytes([0x10, 0x10, 0x10, 0x10, 0x10, 0x00, 0x00, 0x00])
    b = bytes([0x90, 0x00, 0x00, 0x00, 0x00, 0x90, 0x90, 0x00])
    return a, b


def fig3() -> PredicateProgram:
    """Fifteen-block tree with targets b10 and b14.

    Thresholds give the b1 split 1/2 and the b2/b3 taken edges 77/256.
    """
    P = Predicate
    half = 0x80
    edges = [
        ("b1", "b2", P(0, "lt", half), True, 1.0),
        ("b1", "b11", None, True, 1.0),
        ("b2", "b3", P(1, "lt", 77), True, 1.0),
        ("b2", "b4", None, True, 1.0),
        ("b3", "b5", P(2, "lt", 77), True, 1.0),
        ("b3", "b6", None, True, 1.0),
        ("b5", "b8", P(3, "lt", half), True, 1.0),
        ("b5", "b7", None, True, 1.0),
        ("b8", "b10", P(4, "lt", half), True, 1.0),
        ("b8", "b9", None, True, 1.0),
        ("b11", "b12", P(5, "lt", half), True, 1.0),
        ("b11", "b13", None, True, 1.0),
        ("b12", "b10", None, True, 1.0),
        ("b13", "b14", P(6, "lt", half), True, 1.0),
        ("b13", "b15", None, True, 1.0),
    ]
    labels = [f"b{i}" for i in range(1, 16)]
    return _program("fig3", labels, edges, "b1", ["b10", "b14"], fig3_seeds())


PROLOGUE_LEN = 4
SPINE_DIVISOR = 8
EASY_WIDTH = 224
TIGHT_WIDTH = 16
GATE_EXP = 6


def random_cfg(n: int = 60, seed: int = 0, hardness: float = 0.5, input_len: int = 16) -> PredicateProgram:
    """Random program with one target at the end of a guarded spine.

    An unconditional prologue p0..p3 (start-up code every input runs)
    leads into a spine s0..sL-1 that needs only coarse byte guards and ends in a final
    gate in front of the target T. ``hardness`` controls how often a spine
    block also offers a shortcut further down the spine behind a 4-byte magic
    compare (a quarter of those are marked unsolvable), how often spine
    guards narrow to a quarter of the byte range, and how narrow the final
    gate is. Remaining blocks form dead-end side trees. The second initial
    seed carries the first shortcut's magic, so it starts statically close
    but on a path that random mutation rarely preserves.

    With hardness 0 there are no shortcuts and every guard holds for at
    least half of all byte values.
    """
    if not 0.0 <= hardness <= 1.0:
        raise ValueError("hardness must lie in [0, 1]")
    spine_len = max(4, n // SPINE_DIVISOR)
    if n < 2 * spine_len + PROLOGUE_LEN + 3:
        raise ValueError(f"random_cfg needs at least {2 * spine_len + PROLOGUE_LEN + 3} blocks")
    rng = random.Random(seed)
    prologue = [f"p{i}" for i in range(PROLOGUE_LEN)]
    labels = prologue + [f"s{i}" for i in range(spine_len)] + ["T", "exit"]
    edges = [(a, b, None, True, 1.0) for a, b in zip(prologue, prologue[1:] + ["s0"])]
    P = Predicate
    offsets = list(range(input_len))
    rng.shuffle(offsets)
    spine_bytes = offsets[:spine_len]
    free = offsets[spine_len:] or offsets

    def coarse(off):
        if rng.random() < hardness / 2:
            lo = rng.randrange(0, 257 - TIGHT_WIDTH)
            return P(off, "range", (lo, lo + TIGHT_WIDTH - 1))
        if rng.random() < 0.5:
            return P(off, "lt", EASY_WIDTH)
        return P(off, "ge", 256 - EASY_WIDTH)

    shortcuts = []
    budget = n - len(labels)
    for i in range(spine_len - 2):
        if budget > spine_len - i and rng.random() < hardness:
            k = f"k{i}"
            labels.append(k)
            budget -= 1
            at = rng.randrange(0, input_len - 3)
            magic = tuple(rng.randrange(256) for _ in range(4))
            solvable = rng.random() < 0.75
            jump = rng.randrange(i + 2, spine_len)
            edges.append((f"s{i}", k, P(at, "eq", magic), solvable, rng.choice((0.2, 0.4, 0.6))))
            edges.append((k, f"s{jump}", None, True, 1.0))
            shortcuts.append((at, magic))
        edges.append((f"s{i}", f"s{i + 1}", coarse(spine_bytes[i]), True, 1.0))
        edges.append((f"s{i}", "exit", None, True, 1.0))
    last = f"s{spine_len - 1}"
    prev = f"s{spine_len - 2}"
    edges.append((prev, last, coarse(spine_bytes[spine_len - 2]), True, 1.0))
    edges.append((prev, "exit", None, True, 1.0))
    width = max(1, round(128 * (1 - hardness) ** GATE_EXP))
    lo = rng.randrange(0, 257 - width)
    edges.append((last, "T", P(spine_bytes[-1], "range", (lo, lo + width - 1)), True, 0.2))
    edges.append((last, "exit", None, True, 1.0))

    # dead-end side trees hang off the exit block
    parents = ["exit"]
    while len(labels) < n:
        x = f"x{len(labels)}"
        labels.append(x)
        src = rng.choice(parents)
        guarded = any(e[0] == src and e[2] is None for e in edges)
        pred = coarse(rng.choice(free)) if guarded else None
        if pred is not None:
            # keep guarded edges ahead of the fall-through
            edges.insert(next(j for j, e in enumerate(edges) if e[0] == src and e[2] is None),
                         (src, x, pred, True, 1.0))
        else:
            edges.append((src, x, None, True, 1.0))
        parents.append(x)

    plain = bytearray(rng.randrange(256) for _ in range(input_len))
    # the starting corpus must not already pass the final gate
    plain[spine_bytes[-1]] = (lo + width + rng.randrange(256 - width)) % 256
    plain = bytes(plain)
    seeds = [plain]
    if shortcuts:
        at, magic = shortcuts[0]
        gated = bytearray(plain)
        gated[at:at + 4] = bytes(magic)
        seeds.append(bytes(gated))
    else:
        seeds.append(bytes(rng.randrange(256) for _ in range(input_len)))
    return _program(f"random_cfg:{n}:{seed}:{hardness}", labels, edges, labels[0], ["T"], seeds)


# -- TLV record parser --------------------------------------------------------

TLV_BLOCKS = [
    "entry", "short", "hdr", "bad_magic", "ver1", "ver2", "bad_version",
    "sum_check", "bad_sum", "loop", "rec_hdr", "truncated", "dispatch",
    "int_rec", "int_ok", "int_badlen", "str_rec", "str_nul", "str_plain",
    "ext_rec", "ext_v1", "ext_v2", "unknown", "done",
    "bug_str_overflow", "bug_ext_empty", "bug_int_neg",
]
TLV_EDGES = [
    ("entry", "short"), ("entry", "hdr"),
    ("hdr", "bad_magic"), ("hdr", "ver1"), ("hdr", "ver2"), ("hdr", "bad_version"),
    ("ver1", "sum_check"), ("ver2", "sum_check"),
    ("sum_check", "bad_sum"), ("sum_check", "loop"),
    ("loop", "rec_hdr"), ("loop", "done"),
    ("rec_hdr", "truncated"), ("rec_hdr", "dispatch"),
    ("dispatch", "int_rec"), ("dispatch", "str_rec"), ("dispatch", "ext_rec"), ("dispatch", "unknown"),
    ("int_rec", "int_ok"), ("int_rec", "int_badlen"),
    ("int_ok", "loop"), ("int_ok", "bug_int_neg"),
    ("int_badlen", "loop"),
    ("str_rec", "str_nul"), ("str_rec", "str_plain"),
    ("str_plain", "loop"), ("str_plain", "bug_str_overflow"),
    ("str_nul", "loop"),
    ("ext_rec", "ext_v1"), ("ext_rec", "ext_v2"),
    ("ext_v1", "loop"),
    ("ext_v2", "loop"), ("ext_v2", "bug_ext_empty"),
    ("unknown", "loop"),
]
TLV_TARGETS = ("bug_str_overflow", "bug_ext_empty", "bug_int_neg")


def tlv_checksum(body: bytes) -> int:
    return sum(body) & 0xFF


def tlv_repair(data: bytes) -> bytes:
    """Rewrite the trailing checksum byte to match the rest of the input."""
    if len(data) < 2:
        return data
    return data[:-1] + bytes([tlv_checksum(data[:-1])])


def tlv_encode(version: int, records) -> bytes:
    body = bytearray(b"TL") + bytes([version, len(records)])
    for rtype, value in records:
        body += bytes([rtype, len(value)]) + bytes(value)
    return bytes(body) + bytes([tlv_checksum(body)])


def _parse_tlv(data: bytes, visit) -> None:
    """Layout: "TL", version, count, count x (type, len, value), checksum."""
    B = _TLV_ID
    visit(B["entry"])
    if len(data) < 5:
        visit(B["short"])
        return
    visit(B["hdr"])
    if data[0:2] != b"TL":
        visit(B["bad_magic"])
        return
    version = data[2]
    if version == 1:
        visit(B["ver1"])
    elif version == 2:
        visit(B["ver2"])
    else:
        visit(B["bad_version"])
        return
    visit(B["sum_check"])
    if tlv_checksum(data[:-1]) != data[-1]:
        visit(B["bad_sum"])
        return
    count = min(data[3], 8)
    pos, end, i = 4, len(data) - 1, 0
    while True:
        visit(B["loop"])
        if i >= count or pos + 2 > end:
            visit(B["done"])
            return
        visit(B["rec_hdr"])
        rtype, length = data[pos], data[pos + 1]
        pos += 2
        if pos + length > end:
            visit(B["truncated"])
            return
        value = data[pos:pos + length]
        pos += length
        i += 1
        visit(B["dispatch"])
        if rtype == 1:
            visit(B["int_rec"])
            if length != 4:
                visit(B["int_badlen"])
                continue
            visit(B["int_ok"])
            if int.from_bytes(value, "little", signed=True) < -1000000:
                visit(B["bug_int_neg"])
                return
        elif rtype == 2:
            visit(B["str_rec"])
            if 0 in value:
                visit(B["str_nul"])
                continue
            visit(B["str_plain"])
            if length > 32 and version == 2:
                # would overrun a fixed 32-byte buffer
                visit(B["bug_str_overflow"])
                return
        elif rtype == 0x7F:
            visit(B["ext_rec"])
            if version == 1:
                visit(B["ext_v1"])
                continue
            visit(B["ext_v2"])
            if length == 0:
                visit(B["bug_ext_empty"])
                return
        else:
            visit(B["unknown"])


_TLV_ID = {lab: i for i, lab in enumerate(TLV_BLOCKS)}


def mini_record_parser() -> TracedProgram:
    ids = _TLV_ID
    graph = ProgramGraph(
        blocks=tuple(range(len(TLV_BLOCKS))),
        branches=tuple((ids[a], ids[b]) for a, b in TLV_EDGES),
        entry=ids["entry"],
        targets=frozenset(ids[t] for t in TLV_TARGETS),
        labels={i: lab for lab, i in ids.items()},
        funcs={i: ("parse_record" if lab not in ("entry", "short", "hdr") else "main")
               for lab, i in ids.items()},
    )
    seeds = [
        tlv_encode(1, [(1, b"\x01\x00\x00\x00"), (2, b"hi")]),
        tlv_encode(2, [(2, b"abc"), (9, b"")]),
    ]
    return TracedProgram(graph, _parse_tlv, "tlv", seeds=seeds, repair=tlv_repair)


def builtin_fixtures() -> dict:
    return {
        "fig1": fig1(),
        "fig3": fig3(),
        "random_cfg": random_cfg(),
        "tlv": mini_record_parser(),
    }


def resolve_program(source: str):
    """Builtin name (``fig1``, ``fig3``, ``tlv``, ``random:n:seed:hardness``) or a JSON path."""
    from .targets import load_program

    if source == "fig1":
        return fig1()
    if source == "fig3":
        return fig3()
    if source == "tlv":
        return mini_record_parser()
    if source.startswith("random"):
        parts = source.split(":")[1:]
        try:
            n = int(parts[0]) if len(parts) > 0 else 60
            s = int(parts[1]) if len(parts) > 1 else 0
            h = float(parts[2]) if len(parts) > 2 else 0.5
        except ValueError:
            raise ValueError(f"bad random program name {source!r}") from None
        return random_cfg(n, s, h)
    return load_program(source)
