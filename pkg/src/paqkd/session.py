"""Networked protocol session: transports and the Alice/Bob message choreography.

Per packet the exchange is strictly sequential (no interleaving within a
session):

    Alice -> Bob   PACKET_META    (packet id, pulse count)
    Bob   -> Alice REVEAL_SET     (disclosed indices and measurements)
    Alice -> Bob   PARAM_ESTIMATE (fitted theta, phi, delta, T, xi)
    Alice -> Bob   KEYRATE_REPORT (I_AB, chi_BE, K at the estimates)

preceded by one HELLO carrying the session parameters both sides must agree on.
The classical channel is assumed authenticated, as usual for QKD; no
cryptography is applied here (simulation scope).

Both endpoints are built from the same campaign config, including the master
seed: the quantum signal never crosses the wire, so the endpoints co-simulate
the optical layer deterministically from the shared seed, and only the
classical messages above are exchanged.  Bob doubles as the statistician: he
reproduces the fit from the same revealed data to build the per-packet record,
and cross-checks Alice's wire estimates against it.  Results are identical to
the in-process pipeline for a fixed seed.

Reconciliation is represented only by its key-rate accounting (the
KEYRATE_REPORT message); no error-correcting code is run.
"""

from __future__ import annotations

import queue
import socket
import threading
from dataclasses import dataclass

import numpy as np

from .config import CampaignConfig
from .estimation import EstimationResult, RevealedSet, fit
from .keyrate import KeyRateResult
from .pipeline import (PacketRecord, alice_packet, keyrate_from_estimate,
                       simulate_packet)
from .receiver import DetectorConfig
from .wire import (Hello, KeyRateReport, MessageBody, PacketMeta, ParamEstimate,
                   RevealSet, decode_frame, encode_frame, _CRC, _HEADER)

_ESTIMATE_MATCH_TOL = 1e-9


class TransportError(ConnectionError):
    """Byte-stream transport failed or closed mid-session."""


class ProtocolError(RuntimeError):
    """Message choreography violated; the message names the packet involved."""


class LoopbackTransport:
    """In-memory reliable byte stream for same-process sessions.

    ``pair()`` returns two connected endpoints; each endpoint's ``send`` feeds
    the peer's ``recv_exact``.  A ``close`` wakes a blocked reader.
    """

    def __init__(self, inbox: "queue.Queue[bytes | None]",
                 outbox: "queue.Queue[bytes | None]", timeout: float = 60.0):
        self._inbox = inbox
        self._outbox = outbox
        self._buffer = bytearray()
        self._timeout = timeout
        self._closed = False

    @classmethod
    def pair(cls, timeout: float = 60.0) -> tuple["LoopbackTransport", "LoopbackTransport"]:
        a: "queue.Queue[bytes | None]" = queue.Queue()
        b: "queue.Queue[bytes | None]" = queue.Queue()
        return cls(a, b, timeout), cls(b, a, timeout)

    def send(self, data: bytes) -> None:
        if self._closed:
            raise TransportError("transport is closed")
        self._outbox.put(bytes(data))

    def recv_exact(self, n: int) -> bytes:
        while len(self._buffer) < n:
            try:
                chunk = self._inbox.get(timeout=self._timeout)
            except queue.Empty as exc:
                raise TransportError("timed out waiting for peer") from exc
            if chunk is None:
                raise TransportError("peer closed the transport")
            self._buffer.extend(chunk)
        data = bytes(self._buffer[:n])
        del self._buffer[:n]
        return data

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(None)


class TcpTransport:
    """Reliable byte stream over a connected TCP socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 30.0) -> "TcpTransport":
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.settimeout(timeout)
        return cls(sock)

    def send(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv_exact(self, n: int) -> bytes:
        chunks = bytearray()
        while len(chunks) < n:
            try:
                chunk = self._sock.recv(n - len(chunks))
            except OSError as exc:
                raise TransportError(f"recv failed: {exc}") from exc
            if not chunk:
                raise TransportError("peer closed the connection")
            chunks.extend(chunk)
        return bytes(chunks)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def send_message(transport, body: MessageBody) -> None:
    transport.send(encode_frame(body))


def recv_message(transport) -> MessageBody:
    header = transport.recv_exact(_HEADER.size)
    _, _, _, payload_len = _HEADER.unpack(header)
    rest = transport.recv_exact(payload_len + _CRC.size)
    return decode_frame(header + rest)


def _expect(transport, kind, packet_id: int) -> MessageBody:
    msg = recv_message(transport)
    if not isinstance(msg, kind):
        raise ProtocolError(f"packet {packet_id}: expected {kind.__name__}, "
                            f"got {type(msg).__name__}")
    if getattr(msg, "packet_id", packet_id) != packet_id:
        raise ProtocolError(f"packet {packet_id}: {kind.__name__} carries "
                            f"packet id {msg.packet_id}")
    return msg


def alice_session(transport, cfg: CampaignConfig) -> list[tuple[EstimationResult, KeyRateResult]]:
    """Transmitter endpoint: announce packets, fit revealed data, report estimates."""
    cfg.validate()
    det = DetectorConfig(eta=cfg.eta, epsilon=cfg.epsilon)
    send_message(transport, Hello(*cfg.session_fingerprint()))
    results = []
    for packet_id in range(cfg.packets):
        packet = alice_packet(cfg, packet_id)
        send_message(transport, PacketMeta(packet_id, cfg.pulses_per_packet))
        reveal = _expect(transport, RevealSet, packet_id)
        revealed = RevealedSet.from_packet(packet, _as_measurement(reveal, cfg),
                                           reveal.indices)
        est = fit(revealed, det)
        send_message(transport, ParamEstimate(packet_id, est.params_hat.theta,
                                              est.params_hat.phi, est.params_hat.delta,
                                              est.t_hat, est.xi_hat))
        rate = keyrate_from_estimate(cfg, est)
        send_message(transport, KeyRateReport(packet_id, rate.i_ab, rate.chi_be, rate.k))
        results.append((est, rate))
    return results


def _as_measurement(reveal: RevealSet, cfg: CampaignConfig):
    """Adapt a REVEAL_SET into the sparse measurement view RevealedSet expects."""
    x = np.full(cfg.pulses_per_packet, np.nan)
    p = np.full(cfg.pulses_per_packet, np.nan)
    x[reveal.indices] = reveal.x_bh
    p[reveal.indices] = reveal.p_bh
    from .receiver import Measurement

    return Measurement(x_bh=x, p_bh=p)


def bob_session(transport, cfg: CampaignConfig) -> list[PacketRecord]:
    """Receiver endpoint: measure, disclose, and cross-check the wire estimates."""
    cfg.validate()
    hello = recv_message(transport)
    if not isinstance(hello, Hello):
        raise ProtocolError(f"expected HELLO, got {type(hello).__name__}")
    expected = cfg.session_fingerprint()
    got = (hello.v_a, hello.pulse_count, hello.reveal_fraction)
    if got != expected:
        raise ProtocolError(f"HELLO mismatch: peer {got}, local {expected}")

    records = []
    for packet_id in range(cfg.packets):
        meta = _expect(transport, PacketMeta, packet_id)
        if meta.pulse_count != cfg.pulses_per_packet:
            raise ProtocolError(f"packet {packet_id}: pulse count {meta.pulse_count} "
                                f"!= configured {cfg.pulses_per_packet}")
        sim = simulate_packet(cfg, packet_id)
        send_message(transport, RevealSet(packet_id, sim.revealed.indices,
                                          sim.revealed.x_bh, sim.revealed.p_bh))
        est_msg = _expect(transport, ParamEstimate, packet_id)
        _check_close(packet_id, "PARAM_ESTIMATE", est_msg, sim.estimation)
        rate_msg = _expect(transport, KeyRateReport, packet_id)
        own_rate = keyrate_from_estimate(cfg, sim.estimation)
        for name, wire_value, own_value in (("i_ab", rate_msg.i_ab, own_rate.i_ab),
                                            ("chi_be", rate_msg.chi_be, own_rate.chi_be),
                                            ("k", rate_msg.k, own_rate.k)):
            if abs(wire_value - own_value) > _ESTIMATE_MATCH_TOL:
                raise ProtocolError(f"packet {packet_id}: KEYRATE_REPORT {name} "
                                    f"{wire_value} disagrees with local {own_value}")
        records.append(sim.record)
    return records


def _check_close(packet_id: int, label: str, msg: ParamEstimate,
                 est: EstimationResult) -> None:
    pairs = (("theta", msg.theta, est.params_hat.theta),
             ("phi", msg.phi, est.params_hat.phi),
             ("delta", msg.delta, est.params_hat.delta),
             ("t_hat", msg.t_hat, est.t_hat),
             ("xi_hat", msg.xi_hat, est.xi_hat))
    for name, wire_value, own_value in pairs:
        if abs(wire_value - own_value) > _ESTIMATE_MATCH_TOL:
            raise ProtocolError(f"packet {packet_id}: {label} {name} {wire_value} "
                                f"disagrees with local {own_value}")


def run_session(cfg: CampaignConfig, alice_transport=None, bob_transport=None
                ) -> tuple[list[PacketRecord], list[tuple[EstimationResult, KeyRateResult]]]:
    """Drive a full session; defaults to an in-memory loopback transport pair.

    Alice runs on a worker thread, Bob on the calling thread.  Returns Bob's
    per-packet records and Alice's (estimate, key rate) stream.
    """
    if (alice_transport is None) != (bob_transport is None):
        raise ValueError("provide both transports or neither")
    if alice_transport is None:
        alice_transport, bob_transport = LoopbackTransport.pair()

    alice_results: list = []
    alice_error: list[BaseException] = []

    def alice_main():
        try:
            alice_results.extend(alice_session(alice_transport, cfg))
        except BaseException as exc:  # noqa: BLE001 - propagated to the caller
            alice_error.append(exc)
            alice_transport.close()

    worker = threading.Thread(target=alice_main, name="alice-session", daemon=True)
    worker.start()
    try:
        records = bob_session(bob_transport, cfg)
    finally:
        bob_transport.close()
        worker.join(timeout=60.0)
    if alice_error:
        raise alice_error[0]
    return records, alice_results
