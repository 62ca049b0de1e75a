"""Timestamped dual-graph store: directed weighted user-to-user trust edges plus an
undirected weighted bipartite user-item affinity graph.

Affinity weights are play-count shares: for a user ``u`` with play counts
``PC(u, i)`` the stored edge weight is ``PC(u, i) / sum_x PC(u, x)``, so a
user's affinity weights always sum to 1. Affinity edges live inside a bounded
recency window (the oldest edges are evicted once the global user-item edge
count exceeds the window capacity), while trust edges persist but each user
keeps only its strongest ``trust_fanout`` outgoing edges.

All timestamps are caller-supplied integers (milliseconds); the library never
reads the wall clock, which keeps simulations reproducible.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

USER = "user"
ITEM = "item"

DEFAULT_WINDOW_CAPACITY = 100_000
DEFAULT_TRUST_FANOUT = 5


def _check_id(raw: str) -> str:
    if not isinstance(raw, str) or not raw or any(c.isspace() for c in raw):
        raise ValueError(f"node id must be a non-empty string without whitespace, got {raw!r}")
    return raw


@dataclass(frozen=True, slots=True, order=True)
class NodeId:
    """A typed node reference; user and item ids live in disjoint namespaces."""

    kind: str
    id: str

    def __post_init__(self):
        if self.kind not in (USER, ITEM):
            raise ValueError(f"unknown node kind {self.kind!r}")
        _check_id(self.id)

    @classmethod
    def user(cls, raw: str) -> "NodeId":
        return cls(USER, raw)

    @classmethod
    def item(cls, raw: str) -> "NodeId":
        return cls(ITEM, raw)

    @property
    def is_user(self) -> bool:
        return self.kind == USER

    @property
    def is_item(self) -> bool:
        return self.kind == ITEM

    def short(self) -> str:
        """Compact string form used in JSON exports: 'u:<id>' or 'i:<id>'."""
        return ("u:" if self.kind == USER else "i:") + self.id


@dataclass(frozen=True, slots=True)
class TimedEdge:
    """Unit of storage, gossip and merge: endpoints, weight and creation time."""

    src: NodeId
    dst: NodeId
    weight: float
    timestamp: int

    def __post_init__(self):
        if not (self.weight >= 0.0):
            raise ValueError(f"edge weight must be >= 0, got {self.weight}")
        if not isinstance(self.timestamp, int) or self.timestamp <= 0:
            raise ValueError(f"edge timestamp must be a positive integer, got {self.timestamp}")
        if self.src.is_user and self.dst.is_user:
            if self.src.id == self.dst.id:
                raise ValueError("trust edge endpoints must differ")
        elif self.src.is_user == self.dst.is_user:
            raise ValueError("edge must be user-user (trust) or user-item (affinity)")

    @property
    def is_trust(self) -> bool:
        return self.src.is_user and self.dst.is_user

    @property
    def is_affinity(self) -> bool:
        return not self.is_trust

    def affinity_pair(self) -> tuple[str, str]:
        """(user_id, item_id) regardless of the stored orientation."""
        if self.src.is_user:
            return self.src.id, self.dst.id
        return self.dst.id, self.src.id


class TrustNetwork:
    """The replicated dual graph a node keeps locally.

    Mutations assume a single writer; reads are safe while no mutation runs.
    The walk engine copies adjacency into an immutable snapshot before a query,
    so it never races with writers.
    """

    def __init__(
        self,
        window_capacity: int = DEFAULT_WINDOW_CAPACITY,
        trust_fanout: int = DEFAULT_TRUST_FANOUT,
    ):
        if window_capacity < 1:
            raise ValueError("window_capacity must be >= 1")
        if trust_fanout < 1:
            raise ValueError("trust_fanout must be >= 1")
        self.window_capacity = window_capacity
        self.trust_fanout = trust_fanout
        self._users: set[str] = set()
        self._items: set[str] = set()
        # src -> dst -> (weight, ts)
        self._trust: dict[str, dict[str, tuple[float, int]]] = {}
        self._trust_in: dict[str, set[str]] = {}
        # user -> item -> (weight, ts), plus the reverse orientation
        self._aff_u: dict[str, dict[str, tuple[float, int]]] = {}
        self._aff_i: dict[str, dict[str, tuple[float, int]]] = {}
        # play counts; ints for locally recorded interactions, floats for
        # pseudo-counts seeded from replicated weights
        self._plays: dict[str, dict[str, float]] = {}
        self._aff_count = 0
        # lazy min-heap of (ts, user, item) candidates for window eviction
        self._window_heap: list[tuple[int, str, str]] = []

    # ------------------------------------------------------------------ nodes

    def add_user(self, user_id: str) -> None:
        self._users.add(_check_id(user_id))

    def has_user(self, user_id: str) -> bool:
        return user_id in self._users

    def has_item(self, item_id: str) -> bool:
        return item_id in self._items

    @property
    def users(self) -> set[str]:
        return set(self._users)

    @property
    def items(self) -> set[str]:
        return set(self._items)

    # ------------------------------------------------------------- interaction

    def record_interaction(self, user_id: str, item_id: str, plays: int, timestamp: int) -> None:
        """Add `plays` to the user's play count for the item and refresh affinity.

        The user's whole affinity row is renormalized so the weights stay a
        probability vector. The edge timestamp becomes max(existing, given);
        window overflow evicts the globally oldest affinity edges.
        """
        _check_id(user_id)
        _check_id(item_id)
        if not isinstance(plays, int) or plays <= 0:
            raise ValueError(f"play count delta must be a positive integer, got {plays!r}")
        if not isinstance(timestamp, int) or timestamp <= 0:
            raise ValueError(f"timestamp must be a positive integer, got {timestamp!r}")
        self._users.add(user_id)
        self._items.add(item_id)
        row = self._aff_u.setdefault(user_id, {})
        plays_row = self._plays.setdefault(user_id, {})
        # replicated edges may exist without counts; treat their current weight
        # as the accumulated share so renormalization keeps proportions
        for iid, (w, _) in row.items():
            plays_row.setdefault(iid, w)
        plays_row[item_id] = plays_row.get(item_id, 0) + plays
        old = row.get(item_id)
        ts = timestamp if old is None else max(old[1], timestamp)
        if old is None:
            self._aff_count += 1
        row[item_id] = (0.0, ts)  # weight filled in by the recompute below
        self._aff_i.setdefault(item_id, {})[user_id] = row[item_id]
        self._recompute_affinity(user_id)
        heapq.heappush(self._window_heap, (ts, user_id, item_id))
        self._evict_window_overflow()

    def _recompute_affinity(self, user_id: str) -> None:
        row = self._aff_u.get(user_id)
        if not row:
            return
        plays_row = self._plays.get(user_id)
        if plays_row is not None and all(i in plays_row for i in row):
            total = sum(plays_row[i] for i in row)
            source = plays_row
        else:
            total = sum(w for w, _ in row.values())
            source = {i: w for i, (w, _) in row.items()}
        if total <= 0:
            return
        for iid, (_, ts) in row.items():
            entry = (source[iid] / total, ts)
            row[iid] = entry
            self._aff_i[iid][user_id] = entry

    def _evict_window_overflow(self) -> None:
        while self._aff_count > self.window_capacity:
            ts, uid, iid = heapq.heappop(self._window_heap)
            current = self._aff_u.get(uid, {}).get(iid)
            if current is None or current[1] != ts:
                continue  # stale heap entry
            self._remove_affinity_edge(uid, iid)

    def _remove_affinity_edge(self, user_id: str, item_id: str) -> None:
        del self._aff_u[user_id][item_id]
        del self._aff_i[item_id][user_id]
        plays_row = self._plays.get(user_id)
        if plays_row is not None:
            plays_row.pop(item_id, None)
        self._aff_count -= 1
        if not self._aff_i[item_id]:
            del self._aff_i[item_id]
            self._items.discard(item_id)
        if not self._aff_u[user_id]:
            del self._aff_u[user_id]
        else:
            self._recompute_affinity(user_id)

    def remove_affinity(self, user_id: str, item_id: str) -> None:
        """Remove one user-item edge (and its play count), renormalizing the rest."""
        if self._aff_u.get(user_id, {}).get(item_id) is None:
            raise KeyError(f"no affinity edge {user_id} -> {item_id}")
        self._remove_affinity_edge(user_id, item_id)

    def clear_affinity(self, user_id: str) -> None:
        """Drop every affinity edge of a user (used by attack conversions)."""
        for item_id in list(self._aff_u.get(user_id, {})):
            self._remove_affinity_edge(user_id, item_id)

    # ------------------------------------------------------------------- trust

    def set_trust(self, src_id: str, dst_id: str, weight: float, timestamp: int) -> bool:
        """Upsert a trust edge; returns False when an equal-or-newer copy wins.

        A strictly newer timestamp replaces the stored version (ties keep the
        local copy). If the source then exceeds the fanout cap, the minimum
        weight out-edge goes, ties broken by oldest timestamp then dst id.
        """
        _check_id(src_id)
        _check_id(dst_id)
        if src_id == dst_id:
            raise ValueError(f"self-trust rejected for {src_id!r}")
        if not (weight >= 0.0):
            raise ValueError(f"trust weight must be >= 0, got {weight}")
        if not isinstance(timestamp, int) or timestamp <= 0:
            raise ValueError(f"timestamp must be a positive integer, got {timestamp!r}")
        self._users.add(src_id)
        self._users.add(dst_id)
        row = self._trust.setdefault(src_id, {})
        old = row.get(dst_id)
        if old is not None and old[1] >= timestamp:
            return False
        row[dst_id] = (weight, timestamp)
        self._trust_in.setdefault(dst_id, set()).add(src_id)
        while len(row) > self.trust_fanout:
            victim = min(row, key=lambda d: (row[d][0], row[d][1], d))
            del row[victim]
            self._trust_in[victim].discard(src_id)
        return True

    def remove_trust(self, src_id: str, dst_id: str) -> None:
        row = self._trust.get(src_id, {})
        if dst_id not in row:
            raise KeyError(f"no trust edge {src_id} -> {dst_id}")
        del row[dst_id]
        self._trust_in[dst_id].discard(src_id)

    # ------------------------------------------------------------------- merge

    def merge_edge(self, edge: TimedEdge) -> bool:
        """Apply one gossiped edge: newest timestamp wins, ties keep local.

        Affinity weights arrive as replicated values and are stored verbatim
        (no renormalization; the sender already normalized its own rows).
        Fanout and window rules run after insertion, fanout first.
        """
        if edge.is_trust:
            return self.set_trust(edge.src.id, edge.dst.id, edge.weight, edge.timestamp)
        user_id, item_id = edge.affinity_pair()
        row = self._aff_u.setdefault(user_id, {})
        old = row.get(item_id)
        if old is not None and old[1] >= edge.timestamp:
            return False
        self._users.add(user_id)
        self._items.add(item_id)
        if old is None:
            self._aff_count += 1
        entry = (edge.weight, edge.timestamp)
        row[item_id] = entry
        self._aff_i.setdefault(item_id, {})[user_id] = entry
        heapq.heappush(self._window_heap, (edge.timestamp, user_id, item_id))
        self._evict_window_overflow()
        return True

    # ------------------------------------------------------------------- reads

    def trust_out(self, user_id: str) -> dict[str, tuple[float, int]]:
        return dict(self._trust.get(user_id, {}))

    def trusters(self, user_id: str) -> set[str]:
        return set(self._trust_in.get(user_id, set()))

    def affinity_of(self, user_id: str) -> dict[str, tuple[float, int]]:
        return dict(self._aff_u.get(user_id, {}))

    def raters_of(self, item_id: str) -> dict[str, tuple[float, int]]:
        return dict(self._aff_i.get(item_id, {}))

    def affinity_degree(self, user_id: str) -> int:
        return len(self._aff_u.get(user_id, {}))

    def play_count(self, user_id: str, item_id: str) -> float:
        return self._plays.get(user_id, {}).get(item_id, 0)

    @property
    def affinity_edge_count(self) -> int:
        return self._aff_count

    @property
    def trust_edge_count(self) -> int:
        return sum(len(row) for row in self._trust.values())

    def edges(self):
        """All edges in canonical order: trust by (src, dst), then affinity by
        (user, item). Yields TimedEdge values."""
        for src in sorted(self._trust):
            row = self._trust[src]
            for dst in sorted(row):
                w, ts = row[dst]
                yield TimedEdge(NodeId.user(src), NodeId.user(dst), w, ts)
        for uid in sorted(self._aff_u):
            row = self._aff_u[uid]
            for iid in sorted(row):
                w, ts = row[iid]
                yield TimedEdge(NodeId.user(uid), NodeId.item(iid), w, ts)

    def edge_version_map(self) -> dict[tuple[str, str, str], int]:
        """Edge identity -> timestamp, for replica divergence counting."""
        out: dict[tuple[str, str, str], int] = {}
        for src, row in self._trust.items():
            for dst, (_, ts) in row.items():
                out[("T", src, dst)] = ts
        for uid, row in self._aff_u.items():
            for iid, (_, ts) in row.items():
                out[("A", uid, iid)] = ts
        return out

    # ------------------------------------------------------------------- misc

    def copy(self) -> "TrustNetwork":
        dup = TrustNetwork(self.window_capacity, self.trust_fanout)
        dup._users = set(self._users)
        dup._items = set(self._items)
        dup._trust = {s: dict(r) for s, r in self._trust.items()}
        dup._trust_in = {d: set(s) for d, s in self._trust_in.items()}
        dup._aff_u = {u: dict(r) for u, r in self._aff_u.items()}
        dup._aff_i = {i: dict(r) for i, r in self._aff_i.items()}
        dup._plays = {u: dict(r) for u, r in self._plays.items()}
        dup._aff_count = self._aff_count
        dup._window_heap = list(self._window_heap)
        return dup

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrustNetwork):
            return NotImplemented
        return (
            self.window_capacity == other.window_capacity
            and self.trust_fanout == other.trust_fanout
            and self._users == other._users
            and self._items == other._items
            and self._trust == other._trust
            and self._aff_u == other._aff_u
        )

    def validate(self) -> None:
        """Assert structural invariants; intended for tests."""
        for uid, row in self._aff_u.items():
            assert uid in self._users, "affinity source must be a registered user"
            for iid, entry in row.items():
                assert iid in self._items, "affinity target must be a registered item"
                assert self._aff_i[iid][uid] == entry
        for iid, row in self._aff_i.items():
            for uid, entry in row.items():
                assert self._aff_u[uid][iid] == entry
        assert self._aff_count == sum(len(r) for r in self._aff_u.values())
        assert self._aff_count <= self.window_capacity
        for uid, row in self._aff_u.items():
            total = sum(w for w, _ in row.values())
            assert abs(total - 1.0) <= 1e-9, f"affinity of {uid} sums to {total}"
        for src, row in self._trust.items():
            assert len(row) <= self.trust_fanout
            assert src not in row
