"""Endpoints of the reliable digest channel and the lossy frame channel.

Each channel has a socket implementation and an in-memory implementation
that feeds an `IngestService` directly; the capture agent does not know which
one it talks to.
"""

import socket

from abc import ABCMeta, abstractmethod
from typing import TYPE_CHECKING, Optional, Tuple

from veriframe.errors import ChannelError

from .wire import HashChannelMessage, encode_message, frame_payload

if TYPE_CHECKING:
    from .ingest import IngestService

__all__ = (
    "DigestChannel",
    "FrameChannel",
    "MemoryDigestChannel",
    "MemoryFrameChannel",
    "TcpDigestChannel",
    "UdpFrameChannel",
)


class DigestChannel(metaclass=ABCMeta):
    """Interface specification for the reliable, ordered digest channel.

    Delivery is all-or-error: `send()` either hands the message to the
    transport or raises `ChannelError`.
    """

    @abstractmethod
    def send(self, message: HashChannelMessage) -> None:
        """Sends a message on the channel.

        Raises:
            ChannelError: if the channel failed
        """
        raise NotImplementedError

    def close(self) -> None:
        """Closes the channel, signalling the end of the connection."""
        pass

    def __enter__(self):
        return self

    def __exit__(self, *args) -> None:
        self.close()


class FrameChannel(metaclass=ABCMeta):
    """Interface specification for the best-effort frame channel."""

    @abstractmethod
    def send(self, datagram: bytes) -> None:
        """Sends a single datagram.

        Raises:
            OSError: if the endpoint could not be reached
        """
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *args) -> None:
        self.close()


class TcpDigestChannel(DigestChannel):
    """Digest channel over a TCP connection."""

    _sock: Optional[socket.socket]

    def __init__(self, address: Tuple[str, int], *, timeout: float = 10.0):
        try:
            self._sock = socket.create_connection(address, timeout=timeout)
        except OSError as ex:
            raise ChannelError(
                f"cannot connect digest channel to {address[0]}:{address[1]}: {ex}"
            ) from None

    def send(self, message: HashChannelMessage) -> None:
        if self._sock is None:
            raise ChannelError("digest channel is closed")
        try:
            self._sock.sendall(frame_payload(encode_message(message)))
        except OSError as ex:
            self.close()
            raise ChannelError(f"digest channel failed: {ex}") from None

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.shutdown(socket.SHUT_WR)
            except OSError:
                pass
            self._sock.close()
            self._sock = None


class UdpFrameChannel(FrameChannel):
    """Frame channel over UDP; datagrams that the network drops are simply
    gone.
    """

    def __init__(self, address: Tuple[str, int]):
        self._address = address
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, datagram: bytes) -> None:
        self._sock.sendto(datagram, self._address)

    def close(self) -> None:
        self._sock.close()


class MemoryDigestChannel(DigestChannel):
    """Digest channel that delivers messages to an in-process ingest service.

    Messages still go through the wire encoding so that the ingest side
    decodes exactly what a socket would carry.
    """

    def __init__(self, service: "IngestService"):
        self._service = service
        self._closed = False

    def send(self, message: HashChannelMessage) -> None:
        if self._closed:
            raise ChannelError("digest channel is closed")
        if not self._service.deliver_digest_payload(encode_message(message)):
            self._closed = True
            raise ChannelError("ingest service terminated the digest channel")

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._service.deliver_digest_closed()


class MemoryFrameChannel(FrameChannel):
    """Frame channel that delivers datagrams to an in-process ingest service."""

    def __init__(self, service: "IngestService"):
        self._service = service

    def send(self, datagram: bytes) -> None:
        self._service.deliver_datagram(datagram)
