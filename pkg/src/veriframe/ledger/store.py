"""Append-only block storage with a frame index.

Each node keeps a block log (``blocks.log``): one record per block, made of
a u32 little-endian length and the block's canonical encoding followed by its
vote set. The first record is always the genesis block. Next to it lives
``index.json``, mapping stream ids to the frame ranges covered on the chain;
the index is derived data and is rebuilt from the log whenever it is missing
or out of date.
"""

import json
import os

from dataclasses import dataclass
from logging import Logger
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Set, Union

from veriframe.errors import BlockRejectedError, ParseError, StaleTipError
from veriframe.model import DigestRecord
from veriframe.utils import DummyLogger

from .blocks import Block, CommittedBlock, Vote, genesis_block
from .cluster import ClusterConfig
from .validation import LOG_LENGTH, check_block, iter_log_records

__all__ = ("BlockStore", "IndexEntry", "LedgerEntry")


LOG_FILE_NAME = "blocks.log"
INDEX_FILE_NAME = "index.json"


@dataclass(frozen=True)
class LedgerEntry:
    """A committed digest record with the block that holds it."""

    record: DigestRecord
    height: int
    timestamp: int
    """Timestamp of the block, in microseconds since the epoch."""


class IndexEntry(NamedTuple):
    """Position of a committed record on the chain."""

    frame_id_start: int
    frame_id_end: int
    height: int
    position: int


class BlockStore:
    """The chain of a single node.

    When `directory` is ``None`` the store only lives in memory; otherwise
    every appended block is written to the block log and synced to disk
    before `append_block()` returns.
    """

    cluster: Optional[ClusterConfig]
    directory: Optional[Path]
    log: Logger

    _chain: List[CommittedBlock]
    _index: Dict[bytes, List[IndexEntry]]
    _committed_keys: Set[tuple]
    _log_path: Optional[Path]

    def __init__(
        self,
        cluster: ClusterConfig,
        directory: Optional[Union[str, Path]] = None,
        *,
        log: Optional[Logger] = None,
    ):
        self.cluster = cluster
        self.directory = Path(directory) if directory is not None else None
        self.log = log or DummyLogger()  # type: ignore
        self._reset()

        if self.directory is None:
            self._add(CommittedBlock(genesis_block(cluster.genesis_timestamp)))
            return

        self.directory.mkdir(parents=True, exist_ok=True)
        self._log_path = self.directory / LOG_FILE_NAME
        if self._log_path.exists():
            self._load(self._log_path.read_bytes())
            genesis = genesis_block(cluster.genesis_timestamp)
            if self._chain[0].block != genesis:
                raise ParseError(f"{self._log_path} belongs to another cluster")
            self._load_index()
        else:
            self._write_record(CommittedBlock(genesis_block(cluster.genesis_timestamp)))
            self._save_index()

    @classmethod
    def open_snapshot(cls, path: Union[str, Path]) -> "BlockStore":
        """Opens a copy of a block log read-only, without checking votes.

        Callers that need to trust the snapshot validate it with
        `validate_chain()` first.
        """
        path = Path(path)
        if path.is_dir():
            path = path / LOG_FILE_NAME
        store = cls.__new__(cls)
        store.cluster = None
        store.directory = None
        store.log = DummyLogger()  # type: ignore
        store._reset()
        store._load(path.read_bytes())
        return store

    def _reset(self) -> None:
        self._chain = []
        self._index = {}
        self._committed_keys = set()
        self._log_path = None

    def _load(self, data: bytes) -> None:
        for offset, raw in iter_log_records(data):
            try:
                entry = CommittedBlock.decode(raw)
            except ParseError as ex:
                raise ParseError(
                    f"corrupt block log: {ex.msg}", offset + LOG_LENGTH.size
                ) from None
            if entry.height != len(self._chain):
                raise ParseError(
                    f"corrupt block log: expected block {len(self._chain)}, "
                    f"found {entry.height}",
                    offset,
                )
            self._add(entry)
        if not self._chain:
            raise ParseError("block log is empty")

    def _add(self, entry: CommittedBlock) -> None:
        self._chain.append(entry)
        for position, record in enumerate(entry.block.records):
            self._index.setdefault(record.stream_id, []).append(
                IndexEntry(
                    record.frame_id_start, record.frame_id_end, entry.height, position
                )
            )
            self._committed_keys.add(record.key)

    @property
    def tip(self) -> Block:
        return self._chain[-1].block

    @property
    def height(self) -> int:
        return self.tip.height

    @property
    def committed_keys(self) -> Set[tuple]:
        return self._committed_keys

    def __len__(self) -> int:
        return len(self._chain)

    def __iter__(self) -> Iterator[CommittedBlock]:
        return iter(self._chain)

    def block_at(self, height: int) -> CommittedBlock:
        return self._chain[height]

    def append_block(self, block: Block, votes: Iterable[Vote]) -> Block:
        """Appends a block with its vote set to the chain.

        Returns:
            the new tip

        Raises:
            StaleTipError: if the block does not directly follow the tip
            BlockRejectedError: if the block or its votes fail verification
        """
        if self.cluster is None:
            raise BlockRejectedError("snapshots are read-only")

        votes = tuple(sorted(votes, key=lambda vote: vote.validator_id))
        if block.height != self.height + 1:
            raise StaleTipError(
                f"block {block.height} does not follow the tip at height {self.height}"
            )

        reason = check_block(self.cluster, block, votes, self.tip, self._committed_keys)
        if reason:
            raise BlockRejectedError(reason, height=block.height)

        entry = CommittedBlock(block, votes)
        if self._log_path is not None:
            self._write_record(entry)
            self._save_index()
        else:
            self._add(entry)
        return block

    def query_digest(self, stream_id: bytes, frame_id: int) -> List[LedgerEntry]:
        """Returns every committed record of the stream whose covered range
        includes `frame_id`, in chain order.
        """
        result: List[LedgerEntry] = []
        for entry in self._index.get(stream_id, ()):
            if entry.frame_id_start <= frame_id <= entry.frame_id_end:
                block = self._chain[entry.height].block
                result.append(
                    LedgerEntry(
                        block.records[entry.position],
                        entry.height,
                        block.header.timestamp,
                    )
                )
        return result

    def records_for_stream(self, stream_id: bytes) -> List[LedgerEntry]:
        """Returns every committed record of the given stream, in chain order."""
        result: List[LedgerEntry] = []
        for entry in self._index.get(stream_id, ()):
            block = self._chain[entry.height].block
            result.append(
                LedgerEntry(
                    block.records[entry.position], entry.height, block.header.timestamp
                )
            )
        return result

    def raw_log(self) -> bytes:
        """Returns the bytes of the block log (re-encoded for memory stores)."""
        if self._log_path is not None:
            return self._log_path.read_bytes()
        return b"".join(_log_record(entry) for entry in self._chain)

    def _write_record(self, entry: CommittedBlock) -> None:
        assert self._log_path is not None
        with self._log_path.open("ab") as fp:
            fp.write(_log_record(entry))
            fp.flush()
            os.fsync(fp.fileno())
        self._add(entry)

    @property
    def index_path(self) -> Optional[Path]:
        return self.directory / INDEX_FILE_NAME if self.directory else None

    def _load_index(self) -> None:
        path = self.index_path
        assert path is not None
        try:
            with path.open() as fp:
                obj = json.load(fp)
            up_to_date = obj.get("tip_height") == self.height and obj.get(
                "tip_hash"
            ) == self.tip.hash.hex()
        except (OSError, ValueError, AttributeError):
            up_to_date = False

        if not up_to_date:
            self.log.warning(f"Rebuilding frame index from {self._log_path}")
            self._save_index()

    def rebuild_index(self) -> None:
        """Rebuilds the frame index by replaying the block log."""
        chain = self._chain
        self._index = {}
        self._committed_keys = set()
        self._chain = []
        for entry in chain:
            self._add(entry)
        if self.directory is not None:
            self._save_index()

    def _save_index(self) -> None:
        path = self.index_path
        if path is None:
            return
        obj = {
            "tip_height": self.height,
            "tip_hash": self.tip.hash.hex(),
            "streams": {
                stream_id.hex(): [list(entry) for entry in entries]
                for stream_id, entries in sorted(self._index.items())
            },
        }
        tmp_path = path.with_suffix(".tmp")
        with tmp_path.open("w") as fp:
            json.dump(obj, fp)
        os.replace(tmp_path, path)


def _log_record(entry: CommittedBlock) -> bytes:
    data = entry.encode()
    return LOG_LENGTH.pack(len(data)) + data
