"""Bracha-style reliable broadcast, one state machine per (instance, local player).

Wire format: ``("RB", key, phase, digest, payload)`` where ``key`` names the
instance (e.g. ``(1, source)``) and ``phase`` is SEND, ECHO or READY. Every
phase carries the payload so a player can deliver from READYs alone.
"""

from __future__ import annotations

from .crypto_toy import digest as _digest

SEND, ECHO, READY = "SEND", "ECHO", "READY"
INIT, ECHOED, READIED, DELIVERED = "init", "echoed", "readied", "delivered"


class RBError(RuntimeError):
    pass


def payload_digest(payload) -> bytes:
    d = getattr(payload, "digest", None)
    if isinstance(d, bytes):
        return d
    if isinstance(payload, (bytes, bytearray)):
        return _digest(bytes(payload))
    raise TypeError(f"cannot digest payload of type {type(payload).__name__}")


class RBInstance:
    def __init__(self, me: int, source: int, n: int, t0: int, key=None,
                 echo_threshold: int | None = None):
        self.me = me
        self.source = source
        self.n = n
        self.t0 = t0
        self.key = key if key is not None else source
        self.echo_threshold = n - t0 if echo_threshold is None else echo_threshold
        self.ready_threshold = n - t0
        self.amplify_threshold = t0 + 1
        self.echo_set: dict[bytes, set] = {}
        self.ready_set: dict[bytes, set] = {}
        self._echoed_by: set = set()
        self._readied_by: set = set()
        self._payloads: dict[bytes, object] = {}
        self.started = False
        self.phase = INIT
        self.sent_echo = False
        self.sent_ready = False
        self.echo_digest: bytes | None = None
        self.ready_digest: bytes | None = None
        self.delivered = None
        self.delivered_digest: bytes | None = None

    def start(self, payload) -> list[tuple]:
        """Messages to broadcast to all n players."""
        if self.me != self.source:
            raise RBError(f"player {self.me} is not the source of instance {self.key}")
        if self.started:
            raise RBError(f"instance {self.key} already started")
        self.started = True
        return [("RB", self.key, SEND, payload_digest(payload), payload)]

    def handle(self, sender: int, phase: str, dig: bytes, payload):
        """Returns (messages to broadcast, delivered payload or None)."""
        out: list = []
        return out, self.receive(sender, phase, dig, payload, out)

    def receive(self, sender: int, phase: str, dig: bytes, payload, out: list):
        """Like :meth:`handle` but appends outgoing messages to ``out``."""
        payloads = self._payloads
        if payload is not None and dig not in payloads:
            if payload_digest(payload) != dig:
                return None
            payloads[dig] = payload
        if phase == ECHO:
            seen = self._echoed_by
            if sender in seen:
                return None
            seen.add(sender)
            s = self.echo_set.get(dig)
            if s is None:
                s = self.echo_set[dig] = set()
            s.add(sender)
            if not self.sent_ready and len(s) >= self.echo_threshold:
                self._send_ready(dig, out)
            return None
        if phase == READY:
            seen = self._readied_by
            if sender in seen:
                return None
            seen.add(sender)
            s = self.ready_set.get(dig)
            if s is None:
                s = self.ready_set[dig] = set()
            s.add(sender)
            count = len(s)
            if not self.sent_ready and count >= self.amplify_threshold:
                self._send_ready(dig, out)
            if self.delivered_digest is None and count >= self.ready_threshold and dig in payloads:
                self.delivered_digest = dig
                self.delivered = payloads[dig]
                self.phase = DELIVERED
                return self.delivered
            return None
        if phase == SEND:
            if sender != self.source or self.sent_echo:
                return None
            self.sent_echo = True
            self.echo_digest = dig
            if self.phase == INIT:
                self.phase = ECHOED
            out.append(("RB", self.key, ECHO, dig, payload))
        return None

    def _send_ready(self, dig: bytes, out: list):
        self.sent_ready = True
        self.ready_digest = dig
        if self.phase != DELIVERED:
            self.phase = READIED
        out.append(("RB", self.key, READY, dig, self._payloads.get(dig)))
