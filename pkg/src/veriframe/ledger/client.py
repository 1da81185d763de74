"""Client-side access to a ledger cluster."""

import socket

from abc import ABCMeta, abstractmethod
from pathlib import Path
from time import monotonic, sleep
from typing import TYPE_CHECKING, BinaryIO, List, NamedTuple, Optional, Tuple, Union

from veriframe.errors import LedgerError, LedgerUnavailableError
from veriframe.model import DigestRecord
from veriframe.transport.wire import frame_payload, read_framed

from .store import BlockStore, LedgerEntry

if TYPE_CHECKING:
    from .protocol import Request

__all__ = (
    "ChainInfo",
    "LedgerClient",
    "LedgerEntry",
    "SnapshotLedger",
    "SocketLedgerClient",
)


class ChainInfo(NamedTuple):
    """Summary of the chain held by a node."""

    height: int
    tip_hash: bytes
    pending: int = 0
    """Number of transactions waiting in the node's pool."""


class LedgerClient(metaclass=ABCMeta):
    """Interface specification for everything that talks to a ledger."""

    @abstractmethod
    def submit(self, record: DigestRecord) -> None:
        """Submits a digest record as a transaction.

        Raises:
            LedgerError: if the ledger refused or could not be reached
        """
        raise NotImplementedError

    @abstractmethod
    def query_digest(self, stream_id: bytes, frame_id: int) -> List[LedgerEntry]:
        """Returns every committed record of the stream whose covered range
        includes the given frame; an empty list means "not on the ledger".
        """
        raise NotImplementedError

    @abstractmethod
    def chain_info(self) -> ChainInfo:
        raise NotImplementedError

    def flush(self, timeout: Optional[float] = None) -> None:
        """Blocks until every submitted transaction has been committed.

        Raises:
            LedgerError: if the cluster makes no progress
        """
        pass

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *args) -> None:
        self.close()


class SnapshotLedger(LedgerClient):
    """Read-only ledger access backed by a copy of a block log."""

    store: BlockStore

    def __init__(self, source: Union[str, Path, BlockStore]):
        if isinstance(source, BlockStore):
            self.store = source
        else:
            self.store = BlockStore.open_snapshot(source)

    def submit(self, record: DigestRecord) -> None:
        raise LedgerError("cannot submit transactions to a chain snapshot")

    def query_digest(self, stream_id: bytes, frame_id: int) -> List[LedgerEntry]:
        return self.store.query_digest(stream_id, frame_id)

    def chain_info(self) -> ChainInfo:
        return ChainInfo(self.store.height, self.store.tip.hash)


class SocketLedgerClient(LedgerClient):
    """Ledger client talking to a node over TCP."""

    def __init__(self, address: Tuple[str, int], *, timeout: float = 10.0):
        self.address = address
        self.timeout = timeout
        self._sock: Optional[socket.socket] = None
        self._file: Optional[BinaryIO] = None

    def _connect(self) -> None:
        try:
            self._sock = socket.create_connection(self.address, timeout=self.timeout)
        except OSError as ex:
            raise LedgerUnavailableError(
                f"cannot reach ledger node at {self.address[0]}:{self.address[1]}: {ex}"
            ) from None
        self._file = self._sock.makefile("rb")

    def _request(self, request: "Request") -> bytes:
        from .protocol import encode_request, unwrap_response

        if self._sock is None:
            self._connect()
        assert self._sock is not None and self._file is not None
        try:
            self._sock.sendall(frame_payload(encode_request(request)))
            payload = read_framed(self._file)
        except OSError as ex:
            self.close()
            raise LedgerUnavailableError(f"ledger connection failed: {ex}") from None
        if payload is None:
            self.close()
            raise LedgerUnavailableError("ledger node closed the connection")
        return unwrap_response(payload)

    def submit(self, record: DigestRecord) -> None:
        self._request(record)

    def query_digest(self, stream_id: bytes, frame_id: int) -> List[LedgerEntry]:
        from .protocol import QueryDigestRequest, decode_entries

        return decode_entries(self._request(QueryDigestRequest(stream_id, frame_id)))

    def chain_info(self) -> ChainInfo:
        from .protocol import ChainInfoRequest, decode_chain_info

        return decode_chain_info(self._request(ChainInfoRequest()))

    def flush(self, timeout: Optional[float] = None, *, poll: float = 0.1) -> None:
        deadline = None if timeout is None else monotonic() + timeout
        while self.chain_info().pending:
            if deadline is not None and monotonic() >= deadline:
                raise LedgerError("transactions still pending after the timeout")
            sleep(poll)

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None
