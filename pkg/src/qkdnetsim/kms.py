"""Per-node key stores, key delivery, and rekeying consumers.

Completed blocks deposit deterministic pseudorandom key material, chunked at
a fixed granularity (32 B by default), into the stores at both endpoints of
the link; both copies carry identical key ids and octets. Delivery is FIFO
pull: a consumer fetches the oldest unconsumed chunks at one endpoint and its
peer fetches the same material by key id at the other.

Chunks are materialized lazily. A store keeps one compact segment per
deposited block and derives ids and octets on demand, so depositing a 500 kB
block costs O(1) regardless of chunk count.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from . import rng
from .linkmodel import US, BlockRecord

KEYID_DOMAIN = b"qkdnetsim.keyid.v1"


class InsufficientKeyError(Exception):
    """Buffered unconsumed bytes cannot cover the request; caller falls back."""

    def __init__(self, link_id: str, requested: int, available: int):
        super().__init__(f"link {link_id}: requested {requested} B, buffered {available} B")
        self.link_id = link_id
        self.requested = requested
        self.available = available


@dataclass(frozen=True)
class KeyBlockEntry:
    """One delivered or deliverable chunk of secret key."""

    key_id: str
    link_id: str
    bytes: bytes
    created_us: int
    consumed_us: Optional[int] = None

    @property
    def created(self) -> float:
        return self.created_us / US

    @property
    def consumed(self) -> Optional[float]:
        return None if self.consumed_us is None else self.consumed_us / US


@dataclass(frozen=True)
class RekeyEvent:
    time_us: int
    consumer_id: str
    link_id: str
    source: str  # "qkd" | "psk"
    key_id: Optional[str] = None

    @property
    def time(self) -> float:
        return self.time_us / US


def _key_id(seed: int, link_id: str, link_index: int, block_seq: int, chunk_idx: int) -> str:
    """128-bit identifier: 6-byte integrity tag + packed (link, block, chunk)."""
    coords = struct.pack("<HII", link_index, block_seq, chunk_idx)
    tag = hashlib.sha256(
        KEYID_DOMAIN + seed.to_bytes(8, "little") + link_id.encode("utf-8") + b"\x00" + coords
    ).digest()[:6]
    return (tag + coords).hex()


@dataclass
class _Segment:
    block_seq: int
    n_chunks: int
    created_us: int
    base: int  # absolute chunk offset of the segment's first chunk


class _LinkBucket:
    """FIFO chunk ledger for one link at one store."""

    __slots__ = (
        "segments",
        "by_seq",
        "total_chunks",
        "fifo_head",
        "consumed_ahead",
        "consumed_at",
    )

    def __init__(self) -> None:
        self.segments: list[_Segment] = []
        self.by_seq: dict[int, _Segment] = {}
        self.total_chunks = 0
        self.fifo_head = 0  # every offset below this is consumed
        self.consumed_ahead: set[int] = set()  # consumed offsets at/above fifo_head
        self.consumed_at: dict[int, int] = {}

    def consumed_chunks(self) -> int:
        return self.fifo_head + len(self.consumed_ahead)

    def locate(self, offset: int) -> tuple[int, int]:
        """(block_seq, chunk_idx) for an absolute chunk offset."""
        lo, hi = 0, len(self.segments) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.segments[mid].base <= offset:
                lo = mid
            else:
                hi = mid - 1
        seg = self.segments[lo]
        return seg.block_seq, offset - seg.base


class KeyStore:
    """Buffered secret-key material at one node, bucketed per link."""

    def __init__(self, node_id: str, seed: int, chunk_size: int, link_indices: dict[str, int]):
        if chunk_size <= 0:
            raise ValueError("chunk_size must be > 0")
        self.node_id = node_id
        self.seed = seed
        self.chunk_size = chunk_size
        self.link_indices = link_indices
        self._buckets: dict[str, _LinkBucket] = {}
        self.delivery_log: list[tuple[int, str, str]] = []  # (time_us, consumer, key_id)
        self._delivered_ids: set[str] = set()

    def _bucket(self, link_id: str) -> _LinkBucket:
        bucket = self._buckets.get(link_id)
        if bucket is None:
            bucket = self._buckets[link_id] = _LinkBucket()
        return bucket

    # -- derivation ---------------------------------------------------------

    def _chunk_id(self, link_id: str, block_seq: int, chunk_idx: int) -> str:
        return _key_id(self.seed, link_id, self.link_indices[link_id], block_seq, chunk_idx)

    def _chunk_bytes(self, link_id: str, block_seq: int, chunk_idx: int) -> bytes:
        return rng.key_material(self.seed, f"key:{link_id}:{block_seq}", chunk_idx, self.chunk_size)

    def _entry(self, link_id: str, bucket: _LinkBucket, offset: int) -> KeyBlockEntry:
        seq, idx = bucket.locate(offset)
        seg = bucket.by_seq[seq]
        return KeyBlockEntry(
            key_id=self._chunk_id(link_id, seq, idx),
            link_id=link_id,
            bytes=self._chunk_bytes(link_id, seq, idx),
            created_us=seg.created_us,
            consumed_us=bucket.consumed_at.get(offset),
        )

    # -- deposits -----------------------------------------------------------

    def _deposit_segment(self, link_id: str, block_seq: int, n_chunks: int, created_us: int) -> None:
        bucket = self._bucket(link_id)
        if block_seq in bucket.by_seq:
            raise ValueError(f"block {block_seq} already deposited on {link_id} at {self.node_id}")
        seg = _Segment(block_seq, n_chunks, created_us, bucket.total_chunks)
        bucket.segments.append(seg)
        bucket.by_seq[block_seq] = seg
        bucket.total_chunks += n_chunks

    # -- accounting ---------------------------------------------------------

    def deposited_bytes(self, link_id: str) -> int:
        return self._bucket(link_id).total_chunks * self.chunk_size

    def consumed_bytes(self, link_id: str) -> int:
        return self._bucket(link_id).consumed_chunks() * self.chunk_size

    def buffered_bytes(self, link_id: str) -> int:
        bucket = self._bucket(link_id)
        return (bucket.total_chunks - bucket.consumed_chunks()) * self.chunk_size

    def buffered_view(self, link_ids: Sequence[str]) -> dict[str, int]:
        return {link_id: self.buffered_bytes(link_id) for link_id in link_ids}

    def entries(self, link_id: str) -> Iterator[KeyBlockEntry]:
        """Materialize every entry ever deposited for a link (tests/inspection)."""
        bucket = self._bucket(link_id)
        for offset in range(bucket.total_chunks):
            yield self._entry(link_id, bucket, offset)

    # -- delivery -----------------------------------------------------------

    def _consume(self, bucket: _LinkBucket, offset: int, now_us: int) -> None:
        if offset == bucket.fifo_head:
            bucket.fifo_head += 1
            # Swallow any directly following chunks consumed earlier by id.
            while bucket.fifo_head in bucket.consumed_ahead:
                bucket.consumed_ahead.discard(bucket.fifo_head)
                bucket.fifo_head += 1
        else:
            bucket.consumed_ahead.add(offset)
        bucket.consumed_at[offset] = now_us

    def get_key(self, consumer_id: str, size: int, now_us: int, link_id: str) -> tuple[str, bytes]:
        """Deliver the oldest unconsumed material, rounded up to whole chunks.

        Returns (key id of the first chunk, concatenated octets) and records
        the delivery. Raises InsufficientKeyError when the buffer is short.
        """
        if size <= 0:
            raise ValueError("size must be > 0")
        chunks_needed = -(-size // self.chunk_size)
        bucket = self._bucket(link_id)
        available = bucket.total_chunks - bucket.consumed_chunks()
        if available < chunks_needed:
            raise InsufficientKeyError(link_id, chunks_needed * self.chunk_size, available * self.chunk_size)
        out = bytearray()
        first_id: Optional[str] = None
        offset = bucket.fifo_head
        taken = 0
        while taken < chunks_needed:
            if offset in bucket.consumed_ahead:
                offset += 1
                continue
            seq, idx = bucket.locate(offset)
            if first_id is None:
                first_id = self._chunk_id(link_id, seq, idx)
            out += self._chunk_bytes(link_id, seq, idx)
            self._consume(bucket, offset, now_us)
            taken += 1
            offset += 1
        assert first_id is not None
        self._record_delivery(now_us, consumer_id, first_id)
        return first_id, bytes(out)

    def get_key_with_id(self, key_id: str, consumer_id: str, size: int, now_us: int) -> bytes:
        """Deliver the peer copy of a key previously fetched at the other store."""
        if size <= 0:
            raise ValueError("size must be > 0")
        try:
            raw = bytes.fromhex(key_id)
            if len(raw) != 16:
                raise ValueError
            link_index, block_seq, chunk_idx = struct.unpack("<HII", raw[6:])
        except (ValueError, struct.error):
            raise KeyError(f"malformed key_id {key_id!r}") from None
        link_id = next((l for l, i in self.link_indices.items() if i == link_index), None)
        if link_id is None or self._chunk_id(link_id, block_seq, chunk_idx) != key_id:
            raise KeyError(f"unknown key_id {key_id!r}")
        bucket = self._bucket(link_id)
        seg = bucket.by_seq.get(block_seq)
        if seg is None or chunk_idx >= seg.n_chunks:
            raise KeyError(f"key_id {key_id!r} not deposited at {self.node_id}")
        chunks_needed = -(-size // self.chunk_size)
        out = bytearray()
        for i in range(chunks_needed):
            offset = seg.base + chunk_idx + i
            if offset >= bucket.total_chunks:
                raise InsufficientKeyError(link_id, chunks_needed * self.chunk_size, i * self.chunk_size)
            if offset < bucket.fifo_head or offset in bucket.consumed_ahead:
                raise KeyError(f"key_id {key_id!r} already consumed at {self.node_id}")
            s, x = bucket.locate(offset)
            out += self._chunk_bytes(link_id, s, x)
            self._consume(bucket, offset, now_us)
        self._record_delivery(now_us, consumer_id, key_id)
        return bytes(out)

    def _record_delivery(self, now_us: int, consumer_id: str, key_id: str) -> None:
        if key_id in self._delivered_ids:
            raise AssertionError(f"key_id {key_id} delivered twice from store {self.node_id}")
        self._delivered_ids.add(key_id)
        self.delivery_log.append((now_us, consumer_id, key_id))

    def materialize(self, key_id: str, size: int) -> bytes:
        """Re-derive delivered octets for a key id without consuming anything.

        Supports the debug hex dump used for cross-implementation comparison.
        """
        raw = bytes.fromhex(key_id)
        link_index, block_seq, chunk_idx = struct.unpack("<HII", raw[6:])
        link_id = next(l for l, i in self.link_indices.items() if i == link_index)
        if self._chunk_id(link_id, block_seq, chunk_idx) != key_id:
            raise KeyError(f"unknown key_id {key_id!r}")
        bucket = self._bucket(link_id)
        seg = bucket.by_seq.get(block_seq)
        if seg is None or chunk_idx >= seg.n_chunks:
            raise KeyError(f"key_id {key_id!r} not deposited at {self.node_id}")
        chunks_needed = -(-size // self.chunk_size)
        out = bytearray()
        for i in range(chunks_needed):
            offset = seg.base + chunk_idx + i
            if offset >= bucket.total_chunks:
                raise KeyError(f"key_id {key_id!r}: span exceeds deposited material")
            seq, idx = bucket.locate(offset)
            out += self._chunk_bytes(link_id, seq, idx)
        return bytes(out)

    # -- audits -------------------------------------------------------------

    def check_conservation(self, link_id: str) -> None:
        """deposited - consumed == buffered, in bytes, per link."""
        d, c, b = self.deposited_bytes(link_id), self.consumed_bytes(link_id), self.buffered_bytes(link_id)
        if d - c != b:
            raise AssertionError(f"store {self.node_id}/{link_id}: {d} deposited - {c} consumed != {b} buffered")

    def snapshot(self, link_id: str) -> tuple:
        """Comparable consumption state for cross-store symmetry checks."""
        bucket = self._bucket(link_id)
        return (
            tuple((s.block_seq, s.n_chunks, s.created_us) for s in bucket.segments),
            bucket.fifo_head,
            tuple(sorted(bucket.consumed_ahead)),
        )


class KeyBatchView(Sequence[KeyBlockEntry]):
    """Lazy view of the entries one deposit appended; indexing materializes."""

    def __init__(self, store: KeyStore, link_id: str, block_seq: int, n_chunks: int, created_us: int):
        self._store = store
        self._link_id = link_id
        self._block_seq = block_seq
        self._n = n_chunks
        self._created_us = created_us

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(self._n))]
        if i < 0:
            i += self._n
        if not 0 <= i < self._n:
            raise IndexError(i)
        return KeyBlockEntry(
            key_id=self._store._chunk_id(self._link_id, self._block_seq, i),
            link_id=self._link_id,
            bytes=self._store._chunk_bytes(self._link_id, self._block_seq, i),
            created_us=self._created_us,
        )


def deposit_block(store_a: KeyStore, store_b: KeyStore, block: BlockRecord) -> KeyBatchView:
    """Deposit one block's secret bytes into both endpoint stores.

    The material is chunked at the stores' granularity; a trailing partial
    chunk is discarded. Both stores receive identical (key_id, bytes) entries.
    Returns a lazy view of the appended entries (empty for zero-key blocks).
    """
    if store_a.chunk_size != store_b.chunk_size or store_a.seed != store_b.seed:
        raise ValueError("endpoint stores must share chunk size and seed")
    n_chunks = block.secret_bytes // store_a.chunk_size
    if n_chunks > 0:
        store_a._deposit_segment(block.link_id, block.seq, n_chunks, block.end_us)
        store_b._deposit_segment(block.link_id, block.seq, n_chunks, block.end_us)
    return KeyBatchView(store_a, block.link_id, block.seq, n_chunks, block.end_us)


def consumer_tick(
    consumer_id: str,
    link_id: str,
    key_size: int,
    store_a: KeyStore,
    store_b: KeyStore,
    now_us: int,
) -> RekeyEvent:
    """One rekey attempt: QKD key when buffered material suffices, else PSK.

    On success the peer store consumes its copy of the same key id, keeping
    both stores' consumption state identical.
    """
    try:
        key_id, octets = store_a.get_key(consumer_id, key_size, now_us, link_id)
    except InsufficientKeyError:
        return RekeyEvent(now_us, consumer_id, link_id, "psk")
    peer_octets = store_b.get_key_with_id(key_id, consumer_id, key_size, now_us)
    if peer_octets != octets:
        raise AssertionError(f"stores diverged on key {key_id}")
    return RekeyEvent(now_us, consumer_id, link_id, "qkd", key_id)
