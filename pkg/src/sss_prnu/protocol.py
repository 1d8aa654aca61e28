"""Four-party matching protocol over untrusting cloud servers.

Entities and their trust boundaries:

  * Fingerprint Source: owns camera fingerprints, shares them out once
    at enrollment time.
  * Cloud servers (n of them): each stores exactly one share per
    fingerprint and computes partial correlations locally.  They never
    talk to each other and never see plaintext.
  * Match Maker Server: fans a query out, collects the first quorum of
    partials, reconstructs P, Q, R.
  * Match Maker: extracts the query residual, applies the threshold to
    the final r.

In this implementation the trusted roles are plain driver functions
(enroll, query, verify_consistency) and the servers are CloudServer
instances reachable through a link abstraction: LocalLink calls the
server in-process, TcpLink speaks the wire format over a socket.  Both
move identical frame bytes, so traffic observers see the same thing
either way.
"""

from __future__ import annotations

import os
import random
import socket
import socketserver
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field as dc_field
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np

from . import wire
from .correlation import (
    EncryptedVector,
    MatchResult,
    PartialCorrelation,
    center_shares,
    compute_partials,
    deserialize_partial,
    finalize,
    prepare_vector,
    reconstruct_partials,
    reconstruct_sum_ints,
    serialize_partial,
)
from .fixedpoint import Centering, Scaling
from .prnu import GaussianDenoiser, extract_residual
from .sharing import (
    ShareScheme,
    ShareVector,
    SharingError,
    deserialize_share_vector,
    lagrange_weights,
    serialize_share_vector,
)


class ProtocolError(Exception):
    """Base class for protocol-level failures."""


class TransportError(ProtocolError):
    """A server could not be reached or gave an unusable answer."""


class EnrollTimeout(ProtocolError):
    def __init__(self, points: Sequence[int]):
        self.points = tuple(points)
        super().__init__(f"enrollment failed at servers {self.points}; rolled back")


class QuorumNotReached(ProtocolError):
    def __init__(self, responded: int, required: int):
        self.responded = responded
        self.required = required
        super().__init__(f"only {responded} of the required {required} servers responded")


class UnknownFingerprint(ProtocolError):
    def __init__(self, points: Sequence[int]):
        self.points = tuple(points)
        super().__init__(f"servers {self.points} do not know this fingerprint id")


class NotApplicable(ProtocolError):
    """Consistency checking needs spare servers beyond the quorum."""


# Observer hook shared by both transports: (server point, "send"/"recv",
# raw frame bytes).  Used for golden traces and confidentiality audits.
Observer = Callable[[int, str, bytes], None]


@dataclass
class ProtocolConfig:
    """Deployment-wide constants every party must agree on."""

    scheme: ShareScheme
    threshold: float
    scaling: Scaling = dc_field(default_factory=Scaling)
    mode: Centering = Centering.PLAINTEXT
    denoiser: GaussianDenoiser = dc_field(default_factory=GaussianDenoiser)
    timeout_ms: int = 5000
    endpoints: Optional[tuple[tuple[str, int], ...]] = None

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.endpoints is not None and len(self.endpoints) != self.scheme.n:
            raise ValueError(
                f"{len(self.endpoints)} endpoints for {self.scheme.n} servers"
            )

    @property
    def quorum(self) -> int:
        return self.scheme.quorum


class ServerStore:
    """One server's share database: fingerprint id -> ShareVector.

    Optionally persistent: one file per id under `directory`, named by
    the hex of the id so arbitrary ids stay filesystem-safe.  All
    mutations go through one lock.
    """

    def __init__(self, point: int, directory: Optional[str] = None):
        self.point = point
        self.directory = directory
        self._lock = threading.Lock()
        self._vectors: dict[str, ShareVector] = {}
        if directory is not None:
            os.makedirs(directory, exist_ok=True)
            for name in os.listdir(directory):
                if not name.endswith(".share"):
                    continue
                fid = bytes.fromhex(name[: -len(".share")]).decode("utf-8")
                with open(os.path.join(directory, name), "rb") as fh:
                    self._vectors[fid] = deserialize_share_vector(fh.read())

    def _path(self, fid: str) -> str:
        return os.path.join(self.directory, fid.encode("utf-8").hex() + ".share")

    def put(self, fid: str, vec: ShareVector) -> None:
        if vec.point != self.point:
            raise ValueError(f"share for point {vec.point} stored at server {self.point}")
        with self._lock:
            self._vectors[fid] = vec
            if self.directory is not None:
                tmp = self._path(fid) + ".tmp"
                with open(tmp, "wb") as fh:
                    fh.write(serialize_share_vector(vec))
                os.replace(tmp, self._path(fid))

    def get(self, fid: str) -> Optional[ShareVector]:
        with self._lock:
            return self._vectors.get(fid)

    def delete(self, fid: str) -> None:
        with self._lock:
            self._vectors.pop(fid, None)
            if self.directory is not None and os.path.exists(self._path(fid)):
                os.remove(self._path(fid))

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._vectors)


class CloudServer:
    """Request handler for one share point; transport-agnostic."""

    def __init__(self, point: int, cfg: ProtocolConfig, store: Optional[ServerStore] = None):
        if point not in cfg.scheme.evaluation_points:
            raise ValueError(f"point {point} is not part of the scheme")
        self.point = point
        self.cfg = cfg
        self.store = store if store is not None else ServerStore(point)

    def safe_handle(self, ftype: int, payload: bytes) -> tuple[int, bytes]:
        """handle() with every failure mapped to an ERROR frame."""
        try:
            return self.handle(ftype, payload)
        except (wire.FrameError, SharingError, ValueError) as exc:
            return wire.MSG_ERROR, wire.pack_error(wire.ERR_MALFORMED, str(exc))
        except Exception as exc:
            return wire.MSG_ERROR, wire.pack_error(wire.ERR_INTERNAL, str(exc))

    def handle(self, ftype: int, payload: bytes) -> tuple[int, bytes]:
        if ftype == wire.MSG_ENROLL:
            return self._enroll(payload)
        if ftype == wire.MSG_QUERY:
            return self._query(payload)
        if ftype == wire.MSG_FETCH:
            return self._fetch(payload)
        return wire.MSG_ERROR, wire.pack_error(
            wire.ERR_MALFORMED, f"unexpected frame type {ftype:#04x}"
        )

    def _check_vector(self, vec: ShareVector) -> None:
        if vec.point != self.point:
            raise wire.FrameError(
                f"share for point {vec.point} routed to server {self.point}"
            )
        p = self.cfg.scheme.field.p
        if any(not 0 <= v < p for v in vec.values):
            raise wire.FrameError("share values outside the field")

    def _enroll(self, payload: bytes) -> tuple[int, bytes]:
        fid, rest = wire.unpack_identified(payload)
        vec = deserialize_share_vector(rest)
        if len(vec) == 0:
            # Zero-length vector is the delete marker used for rollback.
            self.store.delete(fid)
            return wire.MSG_ENROLL_ACK, b""
        if vec.degree_hint != self.cfg.scheme.fresh_degree:
            raise wire.FrameError("enrollment shares must be fresh-degree")
        self._check_vector(vec)
        self.store.put(fid, vec)
        return wire.MSG_ENROLL_ACK, b""

    def _query(self, payload: bytes) -> tuple[int, bytes]:
        fid, rest = wire.unpack_identified(payload)
        qvec = deserialize_share_vector(rest)
        self._check_vector(qvec)
        stored = self.store.get(fid)
        if stored is None:
            return wire.MSG_ERROR, wire.pack_error(
                wire.ERR_UNKNOWN_ID, f"no share stored under id {fid!r}"
            )
        cfg = self.cfg
        pre_centered = cfg.mode is Centering.PLAINTEXT
        a = EncryptedVector(stored, cfg.scaling, cfg.mode, centered=pre_centered)
        b = EncryptedVector(qvec, cfg.scaling, cfg.mode, centered=pre_centered)
        if cfg.mode is Centering.ENCRYPTED:
            a = center_shares(a, len(a.share), cfg.scheme)
            b = center_shares(b, len(b.share), cfg.scheme)
        pc = compute_partials(a, b, cfg.scheme)
        return wire.MSG_PARTIAL, serialize_partial(pc)

    def _fetch(self, payload: bytes) -> tuple[int, bytes]:
        fid, _ = wire.unpack_identified(payload)
        stored = self.store.get(fid)
        if stored is None:
            return wire.MSG_ERROR, wire.pack_error(
                wire.ERR_UNKNOWN_ID, f"no share stored under id {fid!r}"
            )
        return wire.MSG_SHARE, serialize_share_vector(stored)


class LocalLink:
    """In-process channel to a CloudServer, moving real frame bytes."""

    def __init__(
        self,
        server: CloudServer,
        observer: Optional[Observer] = None,
        down: bool = False,
    ):
        self.server = server
        self.observer = observer
        self.down = down

    @property
    def point(self) -> int:
        return self.server.point

    def request(self, ftype: int, payload: bytes) -> tuple[int, bytes]:
        if self.down:
            raise TransportError(f"server {self.point} is unreachable")
        frame = wire.encode_frame(ftype, payload)
        if self.observer is not None:
            self.observer(self.point, "send", frame)
        rtype, rpayload = self.server.safe_handle(ftype, payload)
        reply = wire.encode_frame(rtype, rpayload)
        if self.observer is not None:
            self.observer(self.point, "recv", reply)
        return rtype, rpayload

    def close(self) -> None:
        pass


class TcpLink:
    """Persistent client connection to one server over TCP."""

    def __init__(
        self,
        point: int,
        address: tuple[str, int],
        timeout_ms: int = 5000,
        observer: Optional[Observer] = None,
    ):
        self.point = point
        self.address = address
        self.timeout = timeout_ms / 1000.0
        self.observer = observer
        self._lock = threading.Lock()
        self._sock: Optional[socket.socket] = None
        self._fh = None

    def _connect(self) -> None:
        sock = socket.create_connection(self.address, timeout=self.timeout)
        sock.settimeout(self.timeout)
        self._sock = sock
        self._fh = sock.makefile("rwb")

    def request(self, ftype: int, payload: bytes) -> tuple[int, bytes]:
        with self._lock:
            try:
                if self._fh is None:
                    self._connect()
                frame = wire.encode_frame(ftype, payload)
                if self.observer is not None:
                    self.observer(self.point, "send", frame)
                self._fh.write(frame)
                self._fh.flush()
                rtype, rpayload = wire.read_frame(self._fh)
            except (OSError, wire.ConnectionClosed, wire.FrameError) as exc:
                self._teardown()
                raise TransportError(f"server {self.point}: {exc}") from exc
            if self.observer is not None:
                self.observer(self.point, "recv", wire.encode_frame(rtype, rpayload))
            return rtype, rpayload

    def _teardown(self) -> None:
        if self._fh is not None:
            try:
                self._fh.close()
            except OSError:
                pass
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        self._fh = None
        self._sock = None

    def close(self) -> None:
        with self._lock:
            self._teardown()


@dataclass
class FaultPlan:
    """Simulator-only description of which servers misbehave and how.

    A tamper rule rewrites that server's stored ShareVector; downed
    servers refuse transport entirely.  A server cannot be both.
    """

    downed: frozenset[int] = frozenset()
    tampered: dict[int, Callable[[ShareVector], ShareVector]] = dc_field(
        default_factory=dict
    )

    def __post_init__(self) -> None:
        overlap = self.downed & set(self.tampered)
        if overlap:
            raise ValueError(f"servers {sorted(overlap)} both down and tampered")


def flip_one_element(rng: random.Random, p: int) -> Callable[[ShareVector], ShareVector]:
    """Tamper rule: replace one stored element with a uniform field value."""

    def rule(vec: ShareVector) -> ShareVector:
        values = list(vec.values)
        values[rng.randrange(len(values))] = rng.randrange(p)
        return ShareVector(vec.point, values, vec.degree_hint)

    return rule


class LocalCluster:
    """All n servers plus their links, wired up in one process."""

    def __init__(
        self,
        cfg: ProtocolConfig,
        store_root: Optional[str] = None,
        observer: Optional[Observer] = None,
    ):
        self.cfg = cfg
        self.servers: dict[int, CloudServer] = {}
        self.links: list[LocalLink] = []
        for u in cfg.scheme.evaluation_points:
            directory = os.path.join(store_root, f"server_{u}") if store_root else None
            server = CloudServer(u, cfg, ServerStore(u, directory))
            self.servers[u] = server
            self.links.append(LocalLink(server, observer=observer))

    def set_down(self, points: Sequence[int]) -> None:
        down = set(points)
        for link in self.links:
            link.down = link.point in down

    def tamper_stored(
        self, point: int, fid: str, rule: Callable[[ShareVector], ShareVector]
    ) -> None:
        store = self.servers[point].store
        vec = store.get(fid)
        if vec is None:
            raise KeyError(f"server {point} has no share for {fid!r}")
        store.put(fid, rule(vec))

    def apply_fault_plan(self, plan: FaultPlan, fid: Optional[str] = None) -> None:
        self.set_down(plan.downed)
        for point, rule in plan.tampered.items():
            if fid is None:
                raise ValueError("tampering a store needs a fingerprint id")
            self.tamper_stored(point, fid, rule)


# ---------------------------------------------------------------------------
# Trusted-side drivers.


def _check_links(links: Sequence, cfg: ProtocolConfig) -> None:
    points = tuple(link.point for link in links)
    if points != tuple(cfg.scheme.evaluation_points):
        raise ValueError(
            f"links cover points {points}, scheme expects {cfg.scheme.evaluation_points}"
        )


def enroll(
    fingerprint: np.ndarray,
    fid: str,
    cfg: ProtocolConfig,
    links: Sequence,
    rng: Optional[random.Random] = None,
) -> tuple[int, ...]:
    """Share a fingerprint to every server; all-or-nothing.

    Every server must acknowledge.  On any failure the servers that did
    store the share receive a delete marker, so a partial enrollment
    never lingers.
    """
    _check_links(links, cfg)
    vectors = [
        ev.share for ev in prepare_vector(fingerprint, cfg.scaling, cfg.scheme, cfg.mode, rng)
    ]
    acked: list = []
    failed: list[int] = []
    for link, vec in zip(links, vectors):
        payload = wire.pack_identified(fid, serialize_share_vector(vec))
        try:
            rtype, rpayload = link.request(wire.MSG_ENROLL, payload)
        except TransportError:
            failed.append(link.point)
            continue
        if rtype == wire.MSG_ENROLL_ACK:
            acked.append(link)
        else:
            failed.append(link.point)
    if failed:
        tombstone = {link.point: _tombstone(link.point, cfg) for link in acked}
        for link in acked:
            try:
                link.request(
                    wire.MSG_ENROLL,
                    wire.pack_identified(
                        fid, serialize_share_vector(tombstone[link.point])
                    ),
                )
            except TransportError:
                pass  # best effort; the id was never fully enrolled
        raise EnrollTimeout(failed)
    return tuple(link.point for link in acked)


def _tombstone(point: int, cfg: ProtocolConfig) -> ShareVector:
    return ShareVector(point, [], cfg.scheme.fresh_degree)


class _ServerRefusal(Exception):
    """ERROR frame from a server, kept out of the public exception set."""

    def __init__(self, point: int, code: int, message: str):
        self.point = point
        self.code = code
        super().__init__(f"server {point}: {message} (code {code})")


def _send_query(link, fid: str, vec: ShareVector, cfg: ProtocolConfig) -> PartialCorrelation:
    payload = wire.pack_identified(fid, serialize_share_vector(vec))
    rtype, rpayload = link.request(wire.MSG_QUERY, payload)
    if rtype == wire.MSG_ERROR:
        code, message = wire.unpack_error(rpayload)
        raise _ServerRefusal(link.point, code, message)
    if rtype != wire.MSG_PARTIAL:
        raise TransportError(f"server {link.point} sent frame type {rtype:#04x}")
    pc = deserialize_partial(rpayload, cfg.scheme)
    if pc.point != vec.point:
        raise TransportError(
            f"server {link.point} answered for point {pc.point}"
        )
    return pc


def _fan_out(
    links: Sequence,
    vectors: Sequence[ShareVector],
    fid: str,
    cfg: ProtocolConfig,
    stop_at: Optional[int],
) -> tuple[list[PartialCorrelation], list[int]]:
    """Query all servers concurrently; collect partials in arrival order.

    Stops early once `stop_at` partials arrived (None collects all
    responses until the deadline).  Returns (partials, unknown-id points).
    """
    deadline = time.monotonic() + cfg.timeout_ms / 1000.0
    collected: list[PartialCorrelation] = []
    unknown: list[int] = []
    executor = ThreadPoolExecutor(max_workers=len(links))
    try:
        pending = {
            executor.submit(_send_query, link, fid, vec, cfg)
            for link, vec in zip(links, vectors)
        }
        while pending:
            if stop_at is not None and len(collected) >= stop_at:
                break
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                break
            done, pending = wait(pending, timeout=remaining, return_when=FIRST_COMPLETED)
            if not done:
                break
            for fut in done:
                try:
                    collected.append(fut.result())
                except _ServerRefusal as exc:
                    if exc.code == wire.ERR_UNKNOWN_ID:
                        unknown.append(exc.point)
                except TransportError:
                    pass
    finally:
        executor.shutdown(wait=False, cancel_futures=True)
    return collected, unknown


def query_residual(
    residual: np.ndarray,
    fid: str,
    cfg: ProtocolConfig,
    links: Sequence,
    rng: Optional[random.Random] = None,
) -> MatchResult:
    """Correlate an already-extracted residual against an enrolled id."""
    _check_links(links, cfg)
    flat = np.asarray(residual, dtype=np.float64).ravel()
    vectors = [ev.share for ev in prepare_vector(flat, cfg.scaling, cfg.scheme, cfg.mode, rng)]
    parts, unknown = _fan_out(links, vectors, fid, cfg, stop_at=cfg.quorum)
    if len(parts) < cfg.quorum:
        if unknown:
            raise UnknownFingerprint(unknown)
        raise QuorumNotReached(len(parts), cfg.quorum)
    first = parts[: cfg.quorum]
    p_val, q_val, r_val = reconstruct_partials(
        first, cfg.scheme, cfg.scaling, cfg.mode, int(flat.size)
    )
    return finalize(
        p_val, q_val, r_val, cfg.threshold, server_subset=[pc.point for pc in first]
    )


def query(
    image: np.ndarray,
    fid: str,
    cfg: ProtocolConfig,
    links: Sequence,
    rng: Optional[random.Random] = None,
) -> MatchResult:
    """Full query path: residual extraction, then encrypted correlation."""
    residual = extract_residual(np.asarray(image, dtype=np.float64), cfg.denoiser)
    return query_residual(residual, fid, cfg, links, rng)


def fetch_share(fid: str, link) -> ShareVector:
    """Pull one server's stored share for auditing."""
    rtype, rpayload = link.request(wire.MSG_FETCH, wire.pack_identified(fid))
    if rtype == wire.MSG_ERROR:
        code, message = wire.unpack_error(rpayload)
        if code == wire.ERR_UNKNOWN_ID:
            raise UnknownFingerprint([link.point])
        raise TransportError(f"server {link.point}: {message}")
    if rtype != wire.MSG_SHARE:
        raise TransportError(f"server {link.point} sent frame type {rtype:#04x}")
    return deserialize_share_vector(rpayload)


@dataclass
class ConsistencyReport:
    """Outcome of cross-checking every quorum subset of one query."""

    consistent: bool
    responding: tuple[int, ...]
    triples: dict[tuple[int, ...], tuple[int, int, int]]
    suspects: tuple[int, ...]
    implicated: dict[int, list[tuple[int, ...]]]


def _audit_stored_shares(
    fetched: dict[int, ShareVector], scheme: ShareScheme
) -> set[int]:
    """Identify servers whose stored vector leaves the polynomial.

    For each candidate, the remaining servers' values must elementwise
    agree with one fresh-degree polynomial; the candidate is a suspect
    when it deviates from that polynomial somewhere.  A tampered value
    that collides with the original is indistinguishable and escapes.
    """
    f = scheme.field
    points = sorted(fetched)
    suspects: set[int] = set()
    length = min(len(fetched[u]) for u in points)
    for s in points:
        others = [u for u in points if u != s]
        if len(others) < scheme.l:
            continue
        base, rest = others[: scheme.l], others[scheme.l :]
        check_targets = rest + [s]
        weight_rows = [lagrange_weights(base, t, f) for t in check_targets]
        others_ok = True
        s_deviates = False
        for k in range(length):
            base_vals = [fetched[u].values[k] for u in base]
            for t, weights in zip(check_targets, weight_rows):
                predicted = sum(w * v for w, v in zip(weights, base_vals)) % f.p
                actual = fetched[t].values[k]
                if predicted != actual:
                    if t == s:
                        s_deviates = True
                    else:
                        others_ok = False
                        break
            if not others_ok:
                break
        if others_ok and s_deviates:
            suspects.add(s)
    return suspects


def _audit_partials(
    fetched: dict[int, ShareVector],
    sent: dict[int, ShareVector],
    received: dict[int, PartialCorrelation],
    cfg: ProtocolConfig,
) -> set[int]:
    """Replay each server's local computation from its fetched store.

    A mismatch means the server lied about its arithmetic (a tampered
    store replays consistently and is caught by the polynomial audit
    instead).
    """
    suspects: set[int] = set()
    pre_centered = cfg.mode is Centering.PLAINTEXT
    for u, pc in received.items():
        if u not in fetched or u not in sent:
            continue
        try:
            a = EncryptedVector(fetched[u], cfg.scaling, cfg.mode, centered=pre_centered)
            b = EncryptedVector(sent[u], cfg.scaling, cfg.mode, centered=pre_centered)
            if cfg.mode is Centering.ENCRYPTED:
                a = center_shares(a, len(a.share), cfg.scheme)
                b = center_shares(b, len(b.share), cfg.scheme)
            expected = compute_partials(a, b, cfg.scheme)
        except Exception:
            suspects.add(u)
            continue
        if (expected.p_share, expected.q_share, expected.r_share) != (
            pc.p_share,
            pc.q_share,
            pc.r_share,
        ):
            suspects.add(u)
    return suspects


def verify_residual(
    residual: np.ndarray,
    fid: str,
    cfg: ProtocolConfig,
    links: Sequence,
    rng: Optional[random.Random] = None,
) -> ConsistencyReport:
    """Cross-check reconstruction over every quorum subset of servers.

    All subsets agree exactly on the integer (P, Q, R) triple when
    nobody tampered.  On disagreement, stored shares are fetched and
    audited to identify the culprit; spare servers beyond the quorum
    are what make any of this observable.
    """
    _check_links(links, cfg)
    scheme = cfg.scheme
    if scheme.n == scheme.quorum:
        raise NotApplicable(
            "with n equal to the quorum there is a single subset and nothing to compare"
        )
    flat = np.asarray(residual, dtype=np.float64).ravel()
    vectors = [ev.share for ev in prepare_vector(flat, cfg.scaling, scheme, cfg.mode, rng)]
    sent = {vec.point: vec for vec in vectors}
    parts, unknown = _fan_out(links, vectors, fid, cfg, stop_at=None)
    if len(parts) < cfg.quorum:
        if unknown:
            raise UnknownFingerprint(unknown)
        raise QuorumNotReached(len(parts), cfg.quorum)
    parts = sorted(parts, key=lambda pc: pc.point)
    by_point = {pc.point: pc for pc in parts}
    responding = tuple(pc.point for pc in parts)

    triples: dict[tuple[int, ...], tuple[int, int, int]] = {}
    for subset in combinations(parts, cfg.quorum):
        key = tuple(pc.point for pc in subset)
        triples[key] = reconstruct_sum_ints(list(subset), scheme)
    consistent = len(set(triples.values())) == 1

    suspects: set[int] = set()
    implicated: dict[int, list[tuple[int, ...]]] = {}
    if not consistent:
        fetched: dict[int, ShareVector] = {}
        for link in links:
            if link.point not in by_point:
                continue
            try:
                fetched[link.point] = fetch_share(fid, link)
            except (TransportError, UnknownFingerprint):
                continue
        suspects |= _audit_stored_shares(fetched, scheme)
        suspects |= _audit_partials(fetched, sent, by_point, cfg)
        honest = _honest_triple(triples, suspects)
        for s in sorted(suspects):
            bad = [
                subset
                for subset, triple in sorted(triples.items())
                if s in subset and (honest is None or triple != honest)
            ]
            implicated[s] = bad
    return ConsistencyReport(
        consistent=consistent,
        responding=responding,
        triples=triples,
        suspects=tuple(sorted(suspects)),
        implicated=implicated,
    )


def _honest_triple(
    triples: dict[tuple[int, ...], tuple[int, int, int]], suspects: set[int]
) -> Optional[tuple[int, int, int]]:
    """The agreed triple of subsets that avoid every suspect, if any."""
    clean = [t for subset, t in triples.items() if not (set(subset) & suspects)]
    if clean and all(t == clean[0] for t in clean):
        return clean[0]
    return None


def verify_consistency(
    image: np.ndarray,
    fid: str,
    cfg: ProtocolConfig,
    links: Sequence,
    rng: Optional[random.Random] = None,
) -> ConsistencyReport:
    residual = extract_residual(np.asarray(image, dtype=np.float64), cfg.denoiser)
    return verify_residual(residual, fid, cfg, links, rng)


# ---------------------------------------------------------------------------
# TCP serving side.


class _FrameHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        server: CloudServer = self.server.cloud_server  # type: ignore[attr-defined]
        while True:
            try:
                ftype, payload = wire.read_frame(self.rfile)
            except wire.ConnectionClosed:
                return
            except wire.FrameError as exc:
                # Framing is gone; answer once and drop the connection.
                try:
                    wire.write_frame(
                        self.wfile,
                        wire.MSG_ERROR,
                        wire.pack_error(wire.ERR_MALFORMED, str(exc)),
                    )
                except OSError:
                    pass
                return
            rtype, rpayload = server.safe_handle(ftype, payload)
            try:
                wire.write_frame(self.wfile, rtype, rpayload)
            except OSError:
                return


class TcpCloudServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], cloud_server: CloudServer):
        super().__init__(address, _FrameHandler)
        self.cloud_server = cloud_server


def run_server(cloud_server: CloudServer, address: tuple[str, int]) -> None:
    """Serve one share point forever; blocks the calling thread."""
    with TcpCloudServer(address, cloud_server) as srv:
        srv.serve_forever()
