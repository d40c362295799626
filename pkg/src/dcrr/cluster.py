"""Master/worker transport with communication accounting.

Two interchangeable backends: an in-process cluster holding all shards, and
a multi-process cluster speaking a length-prefixed binary protocol over TCP.
Both aggregate worker replies in machine-id order with the same reduction
code, so results agree to the last bit.

Wire format (normative), one frame per message:

    4 bytes   magic "DCR1"
    1 byte    tag: 0x01 LOAD_SHARD, 0x02 EVAL_GRAD, 0x03 EVAL_LOSS,
                   0x04 RESULT, 0x05 ERROR
    8 bytes   little-endian unsigned payload length
    payload   raw little-endian float64s (ERROR: UTF-8 text)

LOAD_SHARD carries [machine_id, kernel_code, h, n, p, X row-major..., y...];
EVAL_* carry beta; RESULT carries a gradient (p floats), a loss (1 float) or
an empty load acknowledgement.  The ledger charges broadcast/gather rounds
only (shard distribution is one-time setup), and the in-process backend
charges the byte counts the wire frames would have, so ledgers agree across
backends too.
"""

import socket
import struct
from dataclasses import dataclass, field

import numpy as np

from . import rankloss
from .datagen import Shard, master_shard
from .errors import AggregationError, ProtocolError
from .smoothing import SmoothedLoss, GaussianKernel, EpanechnikovKernel

MAGIC = b"DCR1"
TAG_LOAD_SHARD = 0x01
TAG_EVAL_GRAD = 0x02
TAG_EVAL_LOSS = 0x03
TAG_RESULT = 0x04
TAG_ERROR = 0x05

_HEADER = struct.Struct("<4sBQ")
HEADER_BYTES = _HEADER.size  # 13


def frame_bytes(n_floats: int) -> int:
    """Total on-wire size of a frame carrying n_floats float64 values."""
    return HEADER_BYTES + 8 * n_floats


def floats_to_payload(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def payload_to_floats(payload: bytes) -> np.ndarray:
    return np.frombuffer(payload, dtype="<f8").astype(np.float64, copy=True)


def write_frame(sock: socket.socket, tag: int, payload: bytes) -> None:
    sock.sendall(_HEADER.pack(MAGIC, tag, len(payload)) + payload)


def _recv_exact(sock: socket.socket, length: int) -> bytes:
    chunks = []
    remaining = length
    while remaining > 0:
        chunk = sock.recv(min(remaining, 1 << 20))
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket):
    header = _recv_exact(sock, HEADER_BYTES)
    magic, tag, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    return tag, _recv_exact(sock, length)


@dataclass
class CommLedger:
    """Round and byte counters for broadcast/gather traffic.

    rounds covers both gradient and loss gathers; the gradient_* fields
    isolate the gradient rounds, whose per-direction traffic is M*p floats
    plus headers.
    """

    rounds: int = 0
    bytes_up: int = 0
    bytes_down: int = 0
    gradient_rounds: int = 0
    loss_rounds: int = 0
    gradient_bytes_up: int = 0
    gradient_bytes_down: int = 0

    def record(self, kind: str, M: int, p: int) -> None:
        down = M * frame_bytes(p)
        if kind == "gradient":
            up = M * frame_bytes(p)
            self.gradient_rounds += 1
            self.gradient_bytes_up += up
            self.gradient_bytes_down += down
        else:
            up = M * frame_bytes(1)
            self.loss_rounds += 1
        self.rounds += 1
        self.bytes_up += up
        self.bytes_down += down


def _reduce_mean(vectors, sizes, weight_by_size: bool):
    """Average replies in machine-id order; fixed order keeps results bit-stable."""
    if weight_by_size:
        total = float(sum(sizes))
        acc = (sizes[0] / total) * vectors[0]
        for v, n_m in zip(vectors[1:], sizes[1:]):
            acc += (n_m / total) * v
        return acc
    acc = vectors[0].copy()
    for v in vectors[1:]:
        acc += v
    return acc / len(vectors)


class LocalCluster:
    """In-process backend: all shards live in this process."""

    def __init__(self, shards: list[Shard], sl: SmoothedLoss, weight_by_size: bool = False):
        self.shards = sorted(shards, key=lambda s: s.machine_id)
        self.sl = sl
        self.weight_by_size = weight_by_size
        self.ledger = CommLedger()
        self.M = len(self.shards)
        self.p = self.shards[0].p

    @property
    def master(self) -> Shard:
        return master_shard(self.shards)

    def _check(self, beta):
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.p,):
            raise ProtocolError(f"beta has dimension {beta.shape}, expected ({self.p},)")
        return beta

    def broadcast_gather_gradients(self, beta) -> np.ndarray:
        beta = self._check(beta)
        grads = [rankloss.local_gradient(s, self.sl, beta) for s in self.shards]
        self.ledger.record("gradient", self.M, self.p)
        return _reduce_mean(grads, [s.n for s in self.shards], self.weight_by_size)

    def broadcast_gather_losses(self, beta) -> float:
        beta = self._check(beta)
        losses = [np.array([rankloss.local_loss(s, self.sl, beta)]) for s in self.shards]
        self.ledger.record("loss", self.M, self.p)
        return float(_reduce_mean(losses, [s.n for s in self.shards], self.weight_by_size)[0])

    def close(self):
        pass


class NetworkCluster:
    """Multi-process backend over TCP; one worker endpoint per shard.

    Requests go out to all workers before any reply is read, so workers
    compute concurrently; replies are then collected and reduced in
    machine-id order.
    """

    def __init__(self, endpoints, shards: list[Shard], sl: SmoothedLoss,
                 weight_by_size: bool = False, timeout: float = 300.0):
        order = np.argsort([s.machine_id for s in shards])
        self.shards = [shards[i] for i in order]
        endpoints = [endpoints[i] for i in order]
        if len(endpoints) != len(self.shards):
            raise ProtocolError("need exactly one endpoint per shard")
        self.sl = sl
        self.weight_by_size = weight_by_size
        self.ledger = CommLedger()
        self.M = len(self.shards)
        self.p = self.shards[0].p
        self.socks = []
        for (host, port), shard in zip(endpoints, self.shards):
            sock = socket.create_connection((host, port), timeout=timeout)
            sock.settimeout(timeout)
            self.socks.append(sock)
            header = np.array([shard.machine_id, sl.kernel.code, sl.h, shard.n, shard.p])
            payload = floats_to_payload(np.concatenate([header, shard.X.ravel(), shard.y]))
            write_frame(sock, TAG_LOAD_SHARD, payload)
        for shard, sock in zip(self.shards, self.socks):
            self._expect_result(sock, shard.machine_id)

    @property
    def master(self) -> Shard:
        return master_shard(self.shards)

    def _expect_result(self, sock, machine_id) -> bytes:
        try:
            tag, payload = read_frame(sock)
        except (socket.timeout, ConnectionError, OSError) as exc:
            raise AggregationError(f"machine {machine_id}: {exc}") from exc
        if tag == TAG_ERROR:
            raise AggregationError(f"machine {machine_id}: {payload.decode('utf-8')}")
        if tag != TAG_RESULT:
            raise ProtocolError(f"machine {machine_id}: unexpected tag 0x{tag:02x}")
        return payload

    def _round(self, tag: int, beta, expect: int):
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.p,):
            raise ProtocolError(f"beta has dimension {beta.shape}, expected ({self.p},)")
        payload = floats_to_payload(beta)
        for shard, sock in zip(self.shards, self.socks):
            try:
                write_frame(sock, tag, payload)
            except OSError as exc:
                raise AggregationError(f"machine {shard.machine_id}: {exc}") from exc
        replies = []
        for shard, sock in zip(self.shards, self.socks):
            reply = payload_to_floats(self._expect_result(sock, shard.machine_id))
            if reply.shape[0] != expect:
                raise ProtocolError(
                    f"machine {shard.machine_id}: reply has {reply.shape[0]} values, "
                    f"expected {expect}")
            replies.append(reply)
        return replies

    def broadcast_gather_gradients(self, beta) -> np.ndarray:
        replies = self._round(TAG_EVAL_GRAD, beta, self.p)
        self.ledger.record("gradient", self.M, self.p)
        return _reduce_mean(replies, [s.n for s in self.shards], self.weight_by_size)

    def broadcast_gather_losses(self, beta) -> float:
        replies = self._round(TAG_EVAL_LOSS, beta, 1)
        self.ledger.record("loss", self.M, self.p)
        return float(_reduce_mean(replies, [s.n for s in self.shards], self.weight_by_size)[0])

    def close(self):
        for sock in self.socks:
            try:
                sock.close()
            except OSError:
                pass


def _shard_from_payload(payload: bytes):
    values = payload_to_floats(payload)
    if values.shape[0] < 5:
        raise ProtocolError("LOAD_SHARD payload too short")
    machine_id, kernel_code, h = int(values[0]), int(values[1]), float(values[2])
    n, p = int(values[3]), int(values[4])
    if values.shape[0] != 5 + n * p + n:
        raise ProtocolError("LOAD_SHARD payload size mismatch")
    X = values[5 : 5 + n * p].reshape(n, p)
    y = values[5 + n * p :]
    kernel = EpanechnikovKernel() if kernel_code == EpanechnikovKernel.code else GaussianKernel()
    return Shard(X=X, y=y, machine_id=machine_id), SmoothedLoss(kernel, h)


def serve_worker(host: str, port: int, max_sessions: int | None = None) -> None:
    """Run a worker: load one shard, then answer gradient/loss requests.

    Serves master connections sequentially; with max_sessions=None it loops
    until interrupted.  Prints the bound address so callers can use port 0.
    """
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    bound = srv.getsockname()
    print(f"dcrr worker listening on {bound[0]}:{bound[1]}", flush=True)
    sessions = 0
    try:
        while max_sessions is None or sessions < max_sessions:
            conn, _ = srv.accept()
            sessions += 1
            with conn:
                _serve_connection(conn)
    finally:
        srv.close()


def _serve_connection(conn: socket.socket) -> None:
    shard = None
    sl = None
    while True:
        try:
            tag, payload = read_frame(conn)
        except ConnectionError:
            return
        try:
            if tag == TAG_LOAD_SHARD:
                shard, sl = _shard_from_payload(payload)
                write_frame(conn, TAG_RESULT, b"")
            elif tag in (TAG_EVAL_GRAD, TAG_EVAL_LOSS):
                if shard is None:
                    raise ProtocolError("no shard loaded")
                beta = payload_to_floats(payload)
                if beta.shape[0] != shard.p:
                    raise ProtocolError(
                        f"beta has {beta.shape[0]} entries, shard has p={shard.p}")
                if tag == TAG_EVAL_GRAD:
                    out = rankloss.local_gradient(shard, sl, beta)
                else:
                    out = np.array([rankloss.local_loss(shard, sl, beta)])
                write_frame(conn, TAG_RESULT, floats_to_payload(out))
            else:
                raise ProtocolError(f"unexpected tag 0x{tag:02x}")
        except Exception as exc:  # report and keep serving
            try:
                write_frame(conn, TAG_ERROR, str(exc).encode("utf-8"))
            except OSError:
                return


PROTOCOL_DESCRIPTION = """\
dcrr wire protocol, version DCR1

Frame layout (all integers little-endian):
  offset 0   4 bytes  magic: ASCII "DCR1"
  offset 4   1 byte   message tag
  offset 5   8 bytes  payload length in bytes (unsigned)
  offset 13  payload

Tags:
  0x01 LOAD_SHARD  master -> worker.  Payload: float64 values
                   [machine_id, kernel_code, h, n, p] followed by the
                   n*p design matrix in row-major order and the n
                   responses.  kernel_code: 0 = gaussian, 1 = epanechnikov.
  0x02 EVAL_GRAD   master -> worker.  Payload: p float64 coefficients.
  0x03 EVAL_LOSS   master -> worker.  Payload: p float64 coefficients.
  0x04 RESULT      worker -> master.  Payload: float64 values (the local
                   gradient for EVAL_GRAD, one loss value for EVAL_LOSS,
                   empty to acknowledge LOAD_SHARD).
  0x05 ERROR       worker -> master.  Payload: UTF-8 diagnostic text.

A communication round is one broadcast of the coefficient vector followed by
one gather of all M worker replies; the master reduces replies in machine-id
order.  Failures abort the round (fail-fast).
"""
