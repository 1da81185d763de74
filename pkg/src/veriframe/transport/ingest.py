"""The base-station side of capture: receives both channels, archives the
frames that arrived and forwards to the ledger only the digest records whose
frames can all be produced from the archive.
"""

import socket

from dataclasses import dataclass, field
from logging import Logger
from pathlib import Path
from queue import Empty, Queue
from threading import Event, Thread
from time import monotonic, sleep
from typing import (
    TYPE_CHECKING,
    Any,
    BinaryIO,
    Callable,
    Dict,
    List,
    Optional,
    Set,
    Tuple,
    Union,
)

from veriframe.errors import ConfigurationError, LedgerError, ParseError, ProtocolError
from veriframe.model import DigestRecord, StreamHeader
from veriframe.model.stream import HEADER_SIZE
from veriframe.utils import DummyLogger, load_yaml_file

from .wire import (
    EndOfStream,
    FrameDatagram,
    Reassembler,
    StreamAnnounce,
    decode_message,
    read_framed,
)

if TYPE_CHECKING:
    from veriframe.ledger.client import LedgerClient

__all__ = (
    "DigestConnection",
    "GapList",
    "IngestService",
    "IngestSummary",
    "TcpDigestListener",
    "UdpFrameListener",
    "archive_paths",
    "run_ingest",
)


DEFAULT_WINDOW = 2.0
"""Seconds to wait for late frame fragments after the end of a stream."""

DEFAULT_FLUSH_TIMEOUT = 60.0
"""Seconds to wait for the ledger to commit the forwarded records when the
run itself has no deadline."""

MAX_ORPHAN_FRAMES = 64
"""Frames kept per stream that arrive before the announce of their stream."""

MAX_ORPHAN_BYTES = 64 << 20
"""Pixel bytes kept over all streams for frames that arrive before the
announce of their stream."""


@dataclass
class IngestSummary:
    """Counters describing an ingest run."""

    frames_received: int = 0
    """Number of frames reassembled completely."""

    records_committed: int = 0
    """Number of digest records the ledger committed after the final flush."""

    records_discarded: int = 0
    """Number of digest records dropped because some covered frame is missing."""

    datagrams_malformed: int = 0
    """Number of datagrams that could not be decoded or did not fit a stream."""

    late_arrivals: int = 0
    """Number of datagrams and frames dropped because their stream had already
    been reconciled.
    """

    orphans_dropped: int = 0
    """Number of frames of not yet announced streams dropped because the
    buffer for them was full.
    """

    archives: List[Path] = field(default_factory=list)
    """Paths of the archives written, one per stream."""


@dataclass
class GapList:
    """Frames of a stream that never arrived, stored next to its archive as
    YAML: ``{stream_id: <hex>, frame_count: N, missing: [...]}``.
    """

    stream_id: bytes
    frame_count: int
    missing: List[int] = field(default_factory=list)

    def save(self, path: Union[str, Path]) -> None:
        from yaml import safe_dump

        with open(path, "w") as fp:
            safe_dump(
                {
                    "stream_id": self.stream_id.hex(),
                    "frame_count": self.frame_count,
                    "missing": sorted(self.missing),
                },
                fp,
                sort_keys=False,
                default_flow_style=None,
            )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GapList":
        obj = load_yaml_file(path)
        try:
            return cls(
                stream_id=bytes.fromhex(str(obj["stream_id"])),
                frame_count=int(obj["frame_count"]),
                missing=sorted(int(item) for item in obj.get("missing") or ()),
            )
        except (KeyError, TypeError, ValueError) as ex:
            raise ConfigurationError(f"invalid gap list {path}: {ex}") from None


def archive_paths(archive_dir: Union[str, Path], stream_id: bytes) -> Tuple[Path, Path]:
    """Returns the paths of the archive and the gap list of a stream."""
    base = Path(archive_dir) / stream_id.hex()
    return base.with_suffix(".sfv"), base.with_suffix(".gaps.yaml")


class _StreamState:
    """Reconciliation state of one stream."""

    header: StreamHeader
    archive_path: Path
    gaps_path: Path
    received: Set[int]
    records: List[DigestRecord]
    ended_at: Optional[float]
    reconciled: bool

    _fp: Optional[BinaryIO]

    def __init__(self, header: StreamHeader, archive_dir: Path):
        self.header = header
        self.archive_path, self.gaps_path = archive_paths(archive_dir, header.stream_id)
        self.received = set()
        self.records = []
        self.ended_at = None
        self.reconciled = False

        # Missing frames stay zero-filled in the archive.
        self._fp = open(self.archive_path, "wb")
        self._fp.write(header.encode())
        self._fp.truncate(header.total_size)

    def store_frame(self, frame_id: int, pixels: bytes) -> bool:
        if frame_id in self.received:
            return True
        if frame_id >= self.header.frame_count or len(pixels) != self.header.frame_size:
            return False
        assert self._fp is not None
        self._fp.seek(HEADER_SIZE + frame_id * self.header.frame_size)
        self._fp.write(pixels)
        self.received.add(frame_id)
        return True

    def missing_in(self, record: DigestRecord) -> List[int]:
        return [
            frame_id
            for frame_id in range(record.frame_id_start, record.frame_id_end + 1)
            if frame_id not in self.received
        ]

    def finish(self) -> GapList:
        if self._fp is not None:
            self._fp.close()
            self._fp = None
        gaps = GapList(
            self.header.stream_id,
            self.header.frame_count,
            sorted(set(range(self.header.frame_count)) - self.received),
        )
        gaps.save(self.gaps_path)
        return gaps


class DigestConnection:
    """One connection on the reliable digest channel, as seen by ingest.

    Decodes payloads and enforces that every record is preceded by exactly
    one announce of its stream; any violation terminates the connection
    while keeping everything delivered before it.
    """

    def __init__(self, service: "IngestService"):
        self._service = service
        self._announced: Set[bytes] = set()
        self._open = True

    @property
    def is_open(self) -> bool:
        return self._open

    def deliver(self, payload: bytes) -> bool:
        """Delivers a payload received on the connection.

        Returns:
            whether the connection remains open
        """
        if not self._open:
            return False
        try:
            message = decode_message(payload)
            if isinstance(message, StreamAnnounce):
                stream_id = message.header.stream_id
                if stream_id in self._announced:
                    raise ProtocolError(f"stream {stream_id.hex()} announced twice")
                self._announced.add(stream_id)
            else:
                stream_id = message.stream_id
                if stream_id not in self._announced:
                    raise ProtocolError(
                        f"message for unannounced stream {stream_id.hex()}"
                    )
        except ProtocolError as ex:
            self.close(str(ex))
            return False

        self._service._post(("digest", message))
        return True

    def close(self, error: Optional[str] = None) -> None:
        if self._open:
            self._open = False
            self._service._post(("digest-closed", error))


class IngestService:
    """Reconciliation of the two capture channels.

    Receive loops decode what arrives and post events; the events are applied
    by a single owner: the thread calling `run()`, or, for in-process
    channels created with ``inline=True``, the thread delivering them.
    """

    ledger: "LedgerClient"
    archive_dir: Path
    window: float
    flush_timeout: float
    max_orphan_frames: int
    max_orphan_bytes: int
    log: Logger
    summary: IngestSummary

    _inline: bool
    _clock: Callable[[], float]
    _events: "Queue[Tuple[Any, ...]]"
    _streams: Dict[bytes, _StreamState]
    _orphans: Dict[bytes, Dict[int, bytes]]
    _orphan_bytes: int
    _reassembler: Reassembler
    _default_connection: Optional[DigestConnection]
    _open_connections: int

    def __init__(
        self,
        ledger: "LedgerClient",
        archive_dir: Union[str, Path],
        *,
        window: float = DEFAULT_WINDOW,
        inline: bool = False,
        clock: Callable[[], float] = monotonic,
        flush_timeout: float = DEFAULT_FLUSH_TIMEOUT,
        max_orphan_frames: int = MAX_ORPHAN_FRAMES,
        max_orphan_bytes: int = MAX_ORPHAN_BYTES,
    ):
        if window < 0:
            raise ValueError(f"window must not be negative, got {window}")
        if flush_timeout <= 0:
            raise ValueError(f"flush timeout must be positive, got {flush_timeout}")
        self.ledger = ledger
        self.archive_dir = Path(archive_dir)
        self.archive_dir.mkdir(parents=True, exist_ok=True)
        self.window = window
        self.flush_timeout = flush_timeout
        self.max_orphan_frames = max_orphan_frames
        self.max_orphan_bytes = max_orphan_bytes
        self.log = DummyLogger()  # type: ignore
        self.summary = IngestSummary()
        self._inline = inline
        self._clock = clock
        self._events = Queue()
        self._streams = {}
        self._orphans = {}
        self._orphan_bytes = 0
        self._reassembler = Reassembler()
        self._default_connection = None
        self._open_connections = 0
        self._connections_seen = 0

    def use_logger(self, log: Logger) -> None:
        self.log = log

    def open_digest_connection(self) -> DigestConnection:
        self._post(("digest-opened",))
        return DigestConnection(self)

    def deliver_digest_payload(self, payload: bytes) -> bool:
        """Delivers a payload of the default (in-process) digest connection."""
        if self._default_connection is None:
            self._default_connection = self.open_digest_connection()
        return self._default_connection.deliver(payload)

    def deliver_digest_closed(self) -> None:
        if self._default_connection is not None:
            self._default_connection.close()

    def deliver_datagram(self, data: bytes) -> None:
        """Delivers a datagram received on the frame channel.

        Must be called from a single receive loop; malformed datagrams and
        datagrams of reconciled streams are dropped and counted.
        """
        try:
            datagram = FrameDatagram.decode(data)
            if self._reassembler.is_closed(datagram.stream_id):
                self._post(("late", datagram.stream_id, datagram.frame_id))
                return
            pixels = self._reassembler.add(datagram)
        except ParseError as ex:
            self._post(("malformed", str(ex)))
            return
        if pixels is not None:
            self._post(("frame", datagram.stream_id, datagram.frame_id, pixels))

    def _post(self, event: Tuple[Any, ...]) -> None:
        if self._inline:
            self._apply(event)
        else:
            self._events.put(event)

    def _apply(self, event: Tuple[Any, ...]) -> None:
        kind = event[0]
        if kind == "frame":
            self._on_frame(event[1], event[2], event[3])
        elif kind == "digest":
            self._on_digest_message(event[1])
        elif kind == "malformed":
            self.summary.datagrams_malformed += 1
            self.log.debug(f"Dropped malformed datagram: {event[1]}")
        elif kind == "late":
            self.summary.late_arrivals += 1
            self.log.debug(
                f"Dropped late datagram of frame {event[2]} of reconciled stream "
                f"{event[1].hex()}"
            )
        elif kind == "digest-opened":
            self._open_connections += 1
            self._connections_seen += 1
        elif kind == "digest-closed":
            self._open_connections -= 1
            if event[1]:
                self.log.error(f"Digest channel terminated: {event[1]}")
            now = self._clock()
            for state in self._streams.values():
                if state.ended_at is None:
                    self.log.warning(
                        f"Stream {state.header.stream_id.hex()} ended without "
                        f"end-of-stream marker"
                    )
                    state.ended_at = now

    def _on_digest_message(self, message) -> None:
        if isinstance(message, StreamAnnounce):
            header = message.header
            stream_id = header.stream_id
            if stream_id in self._streams:
                self.log.warning(f"Ignoring repeated announce of {stream_id.hex()}")
                return
            state = self._streams[stream_id] = _StreamState(header, self.archive_dir)
            self.summary.archives.append(state.archive_path)
            self.log.info(
                f"Receiving stream {stream_id.hex()}: {header.resolution}, "
                f"{header.frame_count} frames"
            )
            orphans = self._orphans.pop(stream_id, {})
            self._orphan_bytes -= sum(len(pixels) for pixels in orphans.values())
            for frame_id, pixels in sorted(orphans.items()):
                self._on_frame(stream_id, frame_id, pixels)
        elif isinstance(message, EndOfStream):
            state = self._streams[message.stream_id]
            if state.ended_at is None:
                state.ended_at = self._clock()
        else:
            self._streams[message.stream_id].records.append(message)

    def _on_frame(self, stream_id: bytes, frame_id: int, pixels: bytes) -> None:
        state = self._streams.get(stream_id)
        if state is None:
            self._keep_orphan(stream_id, frame_id, pixels)
            return
        if state.reconciled:
            self.summary.late_arrivals += 1
            self.log.debug(
                f"Dropped frame {frame_id} of reconciled stream {stream_id.hex()}"
            )
            return
        if frame_id in state.received:
            return
        if state.store_frame(frame_id, pixels):
            self.summary.frames_received += 1
        else:
            self.summary.datagrams_malformed += 1
            self.log.warning(
                f"Frame {frame_id} does not fit stream {stream_id.hex()}, dropped"
            )

    def _keep_orphan(self, stream_id: bytes, frame_id: int, pixels: bytes) -> None:
        frames = self._orphans.get(stream_id, {})
        if frame_id in frames:
            return
        if (
            len(frames) >= self.max_orphan_frames
            or self._orphan_bytes + len(pixels) > self.max_orphan_bytes
        ):
            self.summary.orphans_dropped += 1
            self.log.debug(
                f"Dropped frame {frame_id} of unannounced stream {stream_id.hex()}"
            )
            return
        self._orphans[stream_id] = frames
        frames[frame_id] = pixels
        self._orphan_bytes += len(pixels)

    def _reconcile(self, state: _StreamState) -> List[DigestRecord]:
        state.reconciled = True
        self._reassembler.close_stream(state.header.stream_id)
        forwarded: List[DigestRecord] = []
        for record in state.records:
            missing = state.missing_in(record)
            if missing:
                self.summary.records_discarded += 1
                shown = ", ".join(str(frame_id) for frame_id in missing[:5])
                if len(missing) > 5:
                    shown += ", ..."
                self.log.warning(
                    f"Discarding record for frames {record.frame_id_start}-"
                    f"{record.frame_id_end}: {len(missing)} frame(s) missing ({shown})"
                )
            else:
                forwarded.append(record)

        gaps = state.finish()
        if gaps.missing:
            self.log.warning(
                f"Stream {state.header.stream_id.hex()}: {len(gaps.missing)} of "
                f"{gaps.frame_count} frames missing"
            )

        for record in forwarded:
            self.ledger.submit(record)
        return forwarded

    def _due_streams(self) -> List[_StreamState]:
        now = self._clock()
        return [
            state
            for state in self._streams.values()
            if not state.reconciled
            and state.ended_at is not None
            and now - state.ended_at >= self.window
        ]

    def _pending_wait(self) -> Optional[float]:
        now = self._clock()
        waits = [
            state.ended_at + self.window - now
            for state in self._streams.values()
            if not state.reconciled and state.ended_at is not None
        ]
        return max(min(waits), 0.0) if waits else None

    def run(
        self,
        expected_streams: Optional[int] = None,
        *,
        timeout: Optional[float] = None,
        stop: Optional[Event] = None,
        poll: float = 0.05,
    ) -> IngestSummary:
        """Processes events until the expected number of streams has been
        reconciled (or, if not given, until every digest connection has
        closed and all announced streams are reconciled), then flushes the
        ledger for at most the remaining timeout (or `flush_timeout`).

        Returns:
            the summary of the run

        Raises:
            LedgerError: if the ledger does not commit the forwarded records
        """
        deadline = None if timeout is None else self._clock() + timeout
        forwarded = 0

        while True:
            if not self._inline:
                try:
                    self._apply(self._events.get(timeout=poll))
                    while True:
                        self._apply(self._events.get_nowait())
                except Empty:
                    pass
            else:
                wait = self._pending_wait()
                if wait:
                    sleep(wait)

            for state in self._due_streams():
                forwarded += len(self._reconcile(state))

            reconciled = sum(1 for state in self._streams.values() if state.reconciled)
            if expected_streams is not None:
                if reconciled >= expected_streams:
                    break
            elif (
                self._connections_seen
                and self._open_connections <= 0
                and reconciled == len(self._streams)
            ):
                break

            if self._inline and self._pending_wait() is None:
                # Nothing more can arrive in-process.
                break
            if stop is not None and stop.is_set():
                break
            if deadline is not None and self._clock() >= deadline:
                self.log.warning("Ingest timed out")
                break

        if forwarded:
            flush_timeout = self.flush_timeout
            if deadline is not None:
                flush_timeout = min(flush_timeout, max(deadline - self._clock(), 0.0))
            try:
                self.ledger.flush(flush_timeout)
            except LedgerError as ex:
                self.log.error(
                    f"Ledger did not commit {forwarded} forwarded records: {ex.msg}"
                )
                raise LedgerError(
                    f"{forwarded} digest records were not committed: {ex.msg}"
                ) from ex
            self.summary.records_committed += forwarded
        self.log.info(
            f"Ingest finished: {self.summary.frames_received} frames received, "
            f"{self.summary.records_committed} records committed, "
            f"{self.summary.records_discarded} discarded"
        )
        return self.summary


class TcpDigestListener:
    """Accepts digest-channel connections and feeds them to an ingest
    service, one thread per connection.
    """

    def __init__(self, service: IngestService, address: Tuple[str, int]):
        self.service = service
        self._sock = socket.create_server(address)
        self._sock.settimeout(0.2)
        self._stop = Event()
        self._thread = Thread(target=self._accept_loop, daemon=True)

    @property
    def address(self) -> Tuple[str, int]:
        return self._sock.getsockname()[:2]

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self._thread.join()
        self._sock.close()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            Thread(target=self._serve, args=(conn,), daemon=True).start()

    def _serve(self, conn: socket.socket) -> None:
        connection = self.service.open_digest_connection()
        with conn, conn.makefile("rb") as source:
            try:
                while connection.is_open:
                    payload = read_framed(source)
                    if payload is None or not connection.deliver(payload):
                        break
            except ProtocolError as ex:
                connection.close(str(ex))
            except OSError as ex:
                connection.close(f"connection failed: {ex}")
            finally:
                connection.close()


class UdpFrameListener:
    """Receives frame datagrams and feeds them to an ingest service."""

    def __init__(self, service: IngestService, address: Tuple[str, int]):
        self.service = service
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 22)
        self._sock.bind(address)
        self._sock.settimeout(0.2)
        self._stop = Event()
        self._thread = Thread(target=self._receive_loop, daemon=True)

    @property
    def address(self) -> Tuple[str, int]:
        return self._sock.getsockname()[:2]

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self._thread.join()
        self._sock.close()

    def _receive_loop(self) -> None:
        while not self._stop.is_set():
            try:
                data = self._sock.recv(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            self.service.deliver_datagram(data)


def run_ingest(
    digest_address: Tuple[str, int],
    frame_address: Tuple[str, int],
    ledger: "LedgerClient",
    archive_dir: Union[str, Path],
    *,
    window: float = DEFAULT_WINDOW,
    streams: Optional[int] = 1,
    timeout: Optional[float] = None,
    flush_timeout: float = DEFAULT_FLUSH_TIMEOUT,
    log: Optional[Logger] = None,
    ready: Optional[Callable[[Tuple[str, int], Tuple[str, int]], None]] = None,
) -> IngestSummary:
    """Listens on both channels until the given number of streams has been
    received and reconciled.

    Parameters:
        ready: called with the bound digest and frame addresses once both
            listeners accept traffic
    """
    service = IngestService(
        ledger, archive_dir, window=window, flush_timeout=flush_timeout
    )
    if log is not None:
        service.use_logger(log)

    digest_listener = TcpDigestListener(service, digest_address)
    frame_listener = UdpFrameListener(service, frame_address)
    frame_listener.start()
    digest_listener.start()
    if log is not None:
        log.info(
            f"Listening for digests on {digest_listener.address} and frames "
            f"on {frame_listener.address}"
        )
    if ready is not None:
        ready(digest_listener.address, frame_listener.address)

    try:
        return service.run(streams, timeout=timeout)
    finally:
        digest_listener.stop()
        frame_listener.stop()
