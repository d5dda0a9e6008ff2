"""Typed optimization-knowledge store: documents, their link graph, and the
embedding index. Persisted as one JSON-lines file per document type plus a
links file, all sorted by id so fixtures diff cleanly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .embed import CorpusStats, Embedder, EmbeddingPair, embed

DOC_TYPES = ("diagram", "code", "instruction", "algorithm")


@dataclass
class Document:
    """One knowledge item; diagram docs carry a caption as their text."""

    id: str
    doc_type: str
    text: str
    category: str
    links: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.doc_type not in DOC_TYPES:
            raise ValueError(
                f"unknown doc_type {self.doc_type!r}; expected one of {DOC_TYPES}")


class Database:
    """Document store that is immutable while queries run.

    build_index is the single writer phase; afterwards queries only read,
    so they can run concurrently.
    """

    def __init__(self):
        self._docs: dict[str, Document] = {}
        self._stats: CorpusStats | None = None
        self._pairs: dict[str, EmbeddingPair] = {}
        self._embedder: Embedder | None = None

    def __len__(self) -> int:
        return len(self._docs)

    def add(self, doc: Document) -> None:
        if doc.id in self._docs:
            raise ValueError(f"duplicate document id {doc.id!r}")
        self._docs[doc.id] = doc
        self._stats = None
        self._pairs.clear()

    def get(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    def all_docs(self) -> list[Document]:
        return [self._docs[i] for i in sorted(self._docs)]

    def by_type(self, doc_type: str) -> list[Document]:
        if doc_type not in DOC_TYPES:
            raise ValueError(
                f"unknown doc_type {doc_type!r}; expected one of {DOC_TYPES}")
        return [d for d in self.all_docs() if d.doc_type == doc_type]

    def check_links(self) -> None:
        """Every link must point at a stored id; cycles are fine."""
        for doc in self._docs.values():
            for target in doc.links:
                if target not in self._docs:
                    raise ValueError(
                        f"document {doc.id!r} links to missing id {target!r}")

    def stats(self) -> CorpusStats:
        if self._stats is None:
            self._stats = CorpusStats.from_texts(d.text for d in self.all_docs())
        return self._stats

    def build_index(self, embedder: Embedder | None = None) -> None:
        """Embed every document once. Call before issuing concurrent queries."""
        self.check_links()
        stats = self.stats()
        self._embedder = embedder
        self._pairs = {d.id: embed(d.text, stats, embedder)
                       for d in self.all_docs()}

    def ensure_index(self) -> None:
        # convenience for single-threaded callers; not safe to race
        if not self._pairs and self._docs:
            self.build_index(self._embedder)

    def pair(self, doc_id: str) -> EmbeddingPair:
        return self._pairs[doc_id]

    def embed_query(self, text: str) -> EmbeddingPair:
        """Encode a query with the same stats and embedder as the index."""
        return embed(text, self.stats(), self._embedder)

    def save(self, directory) -> None:
        out = Path(directory)
        self.check_links()
        out.mkdir(parents=True, exist_ok=True)
        for doc_type in DOC_TYPES:
            docs = self.by_type(doc_type)
            if not docs:
                continue
            lines = [json.dumps(
                {"id": d.id, "doc_type": d.doc_type, "text": d.text,
                 "category": d.category}, sort_keys=True) for d in docs]
            (out / f"{doc_type}.jsonl").write_text("\n".join(lines) + "\n")
        linked = [d for d in self.all_docs() if d.links]
        lines = [json.dumps({"id": d.id, "links": d.links}, sort_keys=True)
                 for d in linked]
        (out / "links.jsonl").write_text(
            "\n".join(lines) + "\n" if lines else "")

    @classmethod
    def load(cls, directory) -> "Database":
        src = Path(directory)
        db = cls()
        for doc_type in DOC_TYPES:
            path = src / f"{doc_type}.jsonl"
            if not path.exists():
                continue
            for line in path.read_text().splitlines():
                if not line.strip():
                    continue
                row = json.loads(line)
                db.add(Document(id=row["id"], doc_type=row["doc_type"],
                                text=row["text"], category=row["category"]))
        links_path = src / "links.jsonl"
        if links_path.exists():
            for line in links_path.read_text().splitlines():
                if not line.strip():
                    continue
                row = json.loads(line)
                if row["id"] not in db._docs:
                    raise ValueError(f"links file names unknown id {row['id']!r}")
                db.get(row["id"]).links = [str(t) for t in row["links"]]
        db.check_links()
        return db
