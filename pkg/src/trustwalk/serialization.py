"""Canonical flat-text serialization of a TrustNetwork.

Layout (UTF-8, LF line endings):

    W3R 1
    <numUsers> <numItems> <numTrustEdges> <numAffinityEdges> <window> <fanout>
    U <index> <userId>          one per user, sorted by userId
    I <index> <itemId>          one per item, sorted by itemId
    T <srcIdx> <dstIdx> <weight> <timestamp>   sorted by (srcIdx, dstIdx)
    A <userIdx> <itemIdx> <weight> <timestamp> sorted by (userIdx, itemIdx)

Weights are printed with at most 12 significant digits; the format is stable
under a parse/re-print cycle, so serialize(deserialize(serialize(n))) is
byte-identical to serialize(n). Equal networks serialize identically.
"""

from __future__ import annotations

from .graph import TrustNetwork

MAGIC = "W3R"
FORMAT_VERSION = 1


class NetworkFormatError(ValueError):
    """Parse failure; carries the 1-based line number of the offending line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.reason = message


def format_weight(w: float) -> str:
    return format(float(w), ".12g")


def serialize(net: TrustNetwork) -> bytes:
    users = sorted(net.users)
    items = sorted(net.items)
    uidx = {u: k for k, u in enumerate(users)}
    iidx = {i: k for k, i in enumerate(items)}
    trust_lines = []
    aff_lines = []
    for edge in net.edges():
        if edge.is_trust:
            trust_lines.append((uidx[edge.src.id], uidx[edge.dst.id], edge.weight, edge.timestamp))
        else:
            u, i = edge.affinity_pair()
            aff_lines.append((uidx[u], iidx[i], edge.weight, edge.timestamp))
    trust_lines.sort(key=lambda t: (t[0], t[1]))
    aff_lines.sort(key=lambda t: (t[0], t[1]))
    out = [f"{MAGIC} {FORMAT_VERSION}"]
    out.append(
        f"{len(users)} {len(items)} {len(trust_lines)} {len(aff_lines)} "
        f"{net.window_capacity} {net.trust_fanout}"
    )
    out.extend(f"U {k} {u}" for k, u in enumerate(users))
    out.extend(f"I {k} {i}" for k, i in enumerate(items))
    out.extend(f"T {s} {d} {format_weight(w)} {ts}" for s, d, w, ts in trust_lines)
    out.extend(f"A {u} {i} {format_weight(w)} {ts}" for u, i, w, ts in aff_lines)
    return ("\n".join(out) + "\n").encode("utf-8")


def _parse_int(token: str, line: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise NetworkFormatError(line, f"{what} is not an integer: {token!r}") from None


def _parse_weight(token: str, line: int) -> float:
    try:
        w = float(token)
    except ValueError:
        raise NetworkFormatError(line, f"weight is not a number: {token!r}") from None
    if not (w >= 0.0):
        raise NetworkFormatError(line, f"weight must be >= 0, got {token}")
    return w


def deserialize(data: bytes | str) -> TrustNetwork:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    def need(lineno: int) -> str:
        if lineno > len(lines):
            raise NetworkFormatError(
                lineno, f"file truncated: header promised more lines but file ends at line {len(lines)}"
            )
        return lines[lineno - 1]

    header = need(1).split()
    if len(header) != 2 or header[0] != MAGIC or header[1] != str(FORMAT_VERSION):
        raise NetworkFormatError(1, f"bad magic/version header: expected '{MAGIC} {FORMAT_VERSION}'")
    counts = need(2).split()
    if len(counts) != 6:
        raise NetworkFormatError(2, f"count header must have 6 fields, got {len(counts)}")
    n_users, n_items, n_trust, n_aff, window, fanout = (
        _parse_int(tok, 2, name)
        for tok, name in zip(counts, ("numUsers", "numItems", "numTrustEdges", "numAffinityEdges", "window", "fanout"))
    )
    for name, val in (("numUsers", n_users), ("numItems", n_items), ("numTrustEdges", n_trust), ("numAffinityEdges", n_aff)):
        if val < 0:
            raise NetworkFormatError(2, f"{name} must be >= 0, got {val}")
    if window < 1 or fanout < 1:
        raise NetworkFormatError(2, "window and fanout must be >= 1")
    if n_aff > window:
        raise NetworkFormatError(2, f"invariant violation: {n_aff} affinity edges exceed window capacity {window}")

    net = TrustNetwork(window_capacity=window, trust_fanout=fanout)
    lineno = 2
    users: list[str] = []
    for k in range(n_users):
        lineno += 1
        parts = need(lineno).split()
        if len(parts) != 3 or parts[0] != "U":
            raise NetworkFormatError(lineno, f"expected 'U <index> <userId>', got {need(lineno)!r}")
        if _parse_int(parts[1], lineno, "user index") != k:
            raise NetworkFormatError(lineno, f"user index out of sequence: expected {k}, got {parts[1]}")
        if users and parts[2] <= users[-1]:
            raise NetworkFormatError(lineno, "user ids must be strictly sorted and unique")
        users.append(parts[2])
        net.add_user(parts[2])
    items: list[str] = []
    for k in range(n_items):
        lineno += 1
        parts = need(lineno).split()
        if len(parts) != 3 or parts[0] != "I":
            raise NetworkFormatError(lineno, f"expected 'I <index> <itemId>', got {need(lineno)!r}")
        if _parse_int(parts[1], lineno, "item index") != k:
            raise NetworkFormatError(lineno, f"item index out of sequence: expected {k}, got {parts[1]}")
        if items and parts[2] <= items[-1]:
            raise NetworkFormatError(lineno, "item ids must be strictly sorted and unique")
        items.append(parts[2])

    def node_ref(token: str, limit: int, what: str) -> int:
        idx = _parse_int(token, lineno, f"{what} index")
        if not (0 <= idx < limit):
            raise NetworkFormatError(lineno, f"dangling {what} index {idx} (declared {limit})")
        return idx

    per_src: dict[int, int] = {}
    seen_trust: set[tuple[int, int]] = set()
    for _ in range(n_trust):
        lineno += 1
        parts = need(lineno).split()
        if len(parts) != 5 or parts[0] != "T":
            raise NetworkFormatError(lineno, f"expected 'T <src> <dst> <weight> <ts>', got {need(lineno)!r}")
        s = node_ref(parts[1], n_users, "user")
        d = node_ref(parts[2], n_users, "user")
        if s == d:
            raise NetworkFormatError(lineno, "invariant violation: self-trust edge")
        if (s, d) in seen_trust:
            raise NetworkFormatError(lineno, f"duplicate trust edge {s} -> {d}")
        seen_trust.add((s, d))
        per_src[s] = per_src.get(s, 0) + 1
        if per_src[s] > fanout:
            raise NetworkFormatError(
                lineno, f"invariant violation: user index {s} has more than {fanout} trust edges"
            )
        w = _parse_weight(parts[3], lineno)
        ts = _parse_int(parts[4], lineno, "timestamp")
        if ts <= 0:
            raise NetworkFormatError(lineno, f"timestamp must be positive, got {ts}")
        net.set_trust(users[s], users[d], w, ts)
    seen_aff: set[tuple[int, int]] = set()
    for _ in range(n_aff):
        lineno += 1
        parts = need(lineno).split()
        if len(parts) != 5 or parts[0] != "A":
            raise NetworkFormatError(lineno, f"expected 'A <user> <item> <weight> <ts>', got {need(lineno)!r}")
        u = node_ref(parts[1], n_users, "user")
        i = node_ref(parts[2], n_items, "item")
        if (u, i) in seen_aff:
            raise NetworkFormatError(lineno, f"duplicate affinity edge {u} -> {i}")
        seen_aff.add((u, i))
        w = _parse_weight(parts[3], lineno)
        ts = _parse_int(parts[4], lineno, "timestamp")
        if ts <= 0:
            raise NetworkFormatError(lineno, f"timestamp must be positive, got {ts}")
        net._insert_affinity_raw(users[u], items[i], w, ts)
    if lineno < len(lines):
        raise NetworkFormatError(lineno + 1, "trailing content after declared edge lines")
    # items with no surviving edge are still part of the declared node set
    for item_id in items:
        net._items.add(item_id)
    return net


def save(net: TrustNetwork, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(net))


def load(path) -> TrustNetwork:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
