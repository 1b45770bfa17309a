"""Long-term memory: five stores, hashing embedder, and exact top-k retrieval.

The embedder is a deterministic stand-in for a learned model: FNV-1a token
hashing into a signed 64-dimensional bag, L2-normalized. It is bit-exact
across platforms, which keeps retrieval fully testable offline. Swap it by
passing a different ``embed`` callable to MemoryStore.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

STORE_KINDS = (
    "agent_profile",
    "user_profile",
    "user_structured",
    "domain_knowledge",
    "tools",
)

EMBED_DIM = 64

CHUNK_WINDOW = 512
CHUNK_OVERLAP = 64
CHUNK_STRIDE = CHUNK_WINDOW - CHUNK_OVERLAP

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


class DuplicateDoc(ValueError):
    pass


class PolicyDenied(PermissionError):
    pass


class UnknownStore(LookupError):
    pass


def _fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def embed_text(text: str) -> list[float]:
    """Hash tokens into a signed 64-dim bag and L2-normalize.

    Zero-token input yields the all-zeros vector; everything else has unit
    norm. Sign comes from bit 6 of the token hash, the slot from hash mod 64.
    """
    vector = [0.0] * EMBED_DIM
    tokens = tokenize(text)
    if not tokens:
        return vector
    for token in tokens:
        h = _fnv1a_64(token.encode("utf-8"))
        sign = 1.0 if (h >> 6) & 1 == 0 else -1.0
        vector[h % EMBED_DIM] += sign
    norm = math.sqrt(sum(v * v for v in vector))
    if norm == 0.0:
        return [0.0] * EMBED_DIM
    return [v / norm for v in vector]


def cosine(a: list[float], b: list[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def chunk_document(text: str) -> list[str]:
    """Split into overlapping fixed-size token windows, rejoined by spaces.

    Documents at or below one window come back as a single chunk; larger
    documents produce a window at every stride offset below the token count,
    keeping the final partial window.
    """
    tokens = text.split()
    if not tokens:
        return []
    if len(tokens) <= CHUNK_WINDOW:
        return [" ".join(tokens)]
    return [
        " ".join(tokens[offset : offset + CHUNK_WINDOW])
        for offset in range(0, len(tokens), CHUNK_STRIDE)
    ]


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    store: str
    text: str
    vector: list[float]
    source_doc: str
    ordinal: int


@dataclass(frozen=True)
class SearchHit:
    chunk_id: str
    score: float
    text: str


@dataclass
class _PendingWrite:
    kind: str  # "record" | "conversation"
    payload: dict


class MemoryStore:
    """One agent's long-term memory: chunk indexes, key-value records,
    and the append-only conversation archive.

    User-derived writes are write-behind: they land in memory immediately and
    reach disk on flush(). Searches never block on pending writes.
    """

    def __init__(
        self,
        data_dir: Path | None = None,
        store_user_profile: bool = True,
        store_conversation: bool = True,
        embed=embed_text,
    ):
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.store_user_profile = store_user_profile
        self.store_conversation = store_conversation
        self.embed = embed
        self._chunks: dict[str, list[Chunk]] = {kind: [] for kind in STORE_KINDS}
        self._docs: dict[str, set[str]] = {kind: set() for kind in STORE_KINDS}
        self._records: dict[str, str] = {}
        self._conversations: dict[str, list[dict]] = {}
        self._pending: list[_PendingWrite] = []

    # --- chunk indexes -------------------------------------------------

    def _check_store(self, store: str) -> None:
        if store not in STORE_KINDS:
            raise UnknownStore(store)

    def ingest_document(self, store: str, doc_id: str, text: str) -> int:
        self._check_store(store)
        if doc_id in self._docs[store]:
            raise DuplicateDoc(f"{doc_id!r} already ingested into {store}")
        pieces = chunk_document(text)
        for ordinal, piece in enumerate(pieces):
            self._chunks[store].append(
                Chunk(
                    chunk_id=f"{doc_id}:{ordinal}",
                    store=store,
                    text=piece,
                    vector=self.embed(piece),
                    source_doc=doc_id,
                    ordinal=ordinal,
                )
            )
        self._docs[store].add(doc_id)
        return len(pieces)

    def search(self, store: str, query: str, k: int) -> list[SearchHit]:
        """Exact top-k by cosine over the whole store; ties keep insertion order."""
        self._check_store(store)
        if k < 1:
            raise ValueError("k must be >= 1")
        query_vector = self.embed(query)
        if all(v == 0.0 for v in query_vector):
            return []
        scored: list[tuple[float, int, Chunk]] = []
        for position, chunk in enumerate(self._chunks[store]):
            score = sum(q * v for q, v in zip(query_vector, chunk.vector))
            scored.append((score, position, chunk))
        scored.sort(key=lambda item: (-item[0], item[1]))
        return [
            SearchHit(chunk_id=c.chunk_id, score=s, text=c.text) for s, _, c in scored[:k]
        ]

    def chunks(self, store: str) -> list[Chunk]:
        self._check_store(store)
        return list(self._chunks[store])

    def store_text(self, store: str) -> str:
        """All chunk texts of a store joined by blank lines (profile sections)."""
        return "\n\n".join(chunk.text for chunk in self.chunks(store))

    # --- key-value records ----------------------------------------------

    def put_record(self, key: str, value: str) -> None:
        if not self.store_user_profile:
            raise PolicyDenied("store_user_profile is off")
        self._records[key] = value
        self._pending.append(_PendingWrite("record", {"key": key, "value": value}))

    def get_record(self, key: str) -> str | None:
        return self._records.get(key)

    def records(self) -> dict[str, str]:
        return dict(self._records)

    # --- conversation archive --------------------------------------------

    def archive_conversation(self, session_id: str, messages: list[dict]) -> int:
        """Append messages to the session's log; returns the log length."""
        if not self.store_conversation:
            raise PolicyDenied("store_conversation is off")
        log = self._conversations.setdefault(session_id, [])
        for message in messages:
            log.append(dict(message))
            self._pending.append(
                _PendingWrite("conversation", {"session_id": session_id, "message": dict(message)})
            )
        return len(log)

    def conversation(self, session_id: str) -> list[dict]:
        return list(self._conversations.get(session_id, []))

    def finalize_conversation(self, session_id: str) -> int:
        """Index the archived session as one user_structured document.

        Safe to call repeatedly; re-finalizing an already indexed session is
        a no-op.
        """
        log = self._conversations.get(session_id)
        if not log:
            return 0
        doc_id = f"conversation:{session_id}"
        if doc_id in self._docs["user_structured"]:
            return 0
        text = "\n".join(f"{m.get('actor', '?')}: {m.get('payload', '')}" for m in log)
        return self.ingest_document("user_structured", doc_id, text)

    # --- persistence -------------------------------------------------------

    def export_files(self) -> dict[str, str]:
        """Deterministic file map (relative path -> content) of all state."""
        files: dict[str, str] = {}
        for store in STORE_KINDS:
            lines = [
                json.dumps(
                    {
                        "chunk_id": c.chunk_id,
                        "doc_id": c.source_doc,
                        "ordinal": c.ordinal,
                        "text": c.text,
                        "vector": c.vector,
                    },
                    ensure_ascii=False,
                )
                for c in self._chunks[store]
            ]
            files[f"{store}.jsonl"] = "".join(line + "\n" for line in lines)
        files["records.json"] = json.dumps(self._records, ensure_ascii=False, sort_keys=True)
        for session_id in sorted(self._conversations):
            files[f"conversations/{session_id}.jsonl"] = "".join(
                json.dumps(m, ensure_ascii=False) + "\n"
                for m in self._conversations[session_id]
            )
        return files

    def import_files(self, files: dict[str, str]) -> None:
        """Rebuild state from an export_files map."""
        for store in STORE_KINDS:
            content = files.get(f"{store}.jsonl")
            if content is None:
                continue
            chunks: list[Chunk] = []
            docs: set[str] = set()
            for line in content.splitlines():
                if not line.strip():
                    continue
                entry = json.loads(line)
                chunks.append(
                    Chunk(
                        chunk_id=entry["chunk_id"],
                        store=store,
                        text=entry["text"],
                        vector=[float(v) for v in entry["vector"]],
                        source_doc=entry["doc_id"],
                        ordinal=int(entry["ordinal"]),
                    )
                )
                docs.add(entry["doc_id"])
            self._chunks[store] = chunks
            self._docs[store] = docs
        if "records.json" in files:
            self._records = {
                str(k): str(v) for k, v in json.loads(files["records.json"]).items()
            }
        for path, content in files.items():
            if path.startswith("conversations/") and path.endswith(".jsonl"):
                session_id = path[len("conversations/") : -len(".jsonl")]
                self._conversations[session_id] = [
                    json.loads(line) for line in content.splitlines() if line.strip()
                ]

    def flush(self) -> None:
        """Durability barrier: all pending write-behind records hit disk."""
        if self.data_dir is None:
            self._pending.clear()
            return
        self.data_dir.mkdir(parents=True, exist_ok=True)
        for rel_path, content in self.export_files().items():
            target = self.data_dir / rel_path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(content, encoding="utf-8")
        self._pending.clear()

    def load(self) -> None:
        """Rebuild in-memory state from the flush layout."""
        if self.data_dir is None or not self.data_dir.exists():
            return
        files: dict[str, str] = {}
        for path in self.data_dir.rglob("*"):
            if path.is_file():
                files[path.relative_to(self.data_dir).as_posix()] = path.read_text(
                    encoding="utf-8"
                )
        self.import_files(files)
