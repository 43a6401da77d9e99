"""Worker fan-out backends and the wire protocol between them.

A campaign never depends on *how* its workers run: every backend feeds the
same (model, seed) pairs through :func:`engine.sampled_values_from_model`
semantics, so serial, threaded, and socket execution produce byte-identical
traces. The socket protocol is length-prefixed JSON:

    frame := 4-byte big-endian payload length | UTF-8 JSON payload

Message kinds (all carry ``proto_version``):

* ``SNAPSHOT``     coordinator -> worker: frozen surrogate for this round,
                   the evaluated-index set, and (first time only) the pool;
* ``PROPOSE``      coordinator -> worker: compute one ranked top-s list for
                   worker slot ``s`` with the given draw seed;
* ``RANKED_LIST``  worker -> coordinator: the slot's ranked entries;
* ``EVAL``         coordinator -> worker: reveal one merged candidate;
* ``EVAL_RESULT``  worker -> coordinator: its raw (native-sense) target;
* ``ERROR``        worker -> coordinator: protocol complaint, request dropped;
* ``SHUTDOWN``     coordinator -> worker: close up.

Floats cross the wire as JSON numbers; Python serializes them with shortest
round-trip repr, so values survive the hop bit-for-bit.
"""

from __future__ import annotations

import json
import os
import socket
import struct
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .acquisition import ranked_top_s
from .engine import model_from_snapshot
from .errors import ProtocolViolationError, WorkerUnavailableError
from .pool import CandidatePool, PoolView

PROTO_VERSION = 1
MAX_FRAME_BYTES = 1 << 30
DEFAULT_TIMEOUT = 60.0

KINDS = ("SNAPSHOT", "PROPOSE", "RANKED_LIST", "EVAL", "EVAL_RESULT", "ERROR", "SHUTDOWN")


def thread_budget(requested: int | None = None) -> int:
    """Worker-thread cap: explicit argument, else BATCHSCREEN_THREADS, else 1."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("BATCHSCREEN_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Framing
# ---------------------------------------------------------------------------


def _recvall(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        buf.extend(chunk)
    return bytes(buf)


def send_frame(sock: socket.socket, message: dict) -> None:
    data = json.dumps(message, separators=(",", ":")).encode("utf-8")
    if len(data) > MAX_FRAME_BYTES:
        raise ProtocolViolationError(f"frame of {len(data)} bytes exceeds the cap")
    sock.sendall(struct.pack("!I", len(data)) + data)


def recv_frame(sock: socket.socket) -> dict:
    (length,) = struct.unpack("!I", _recvall(sock, 4))
    if length > MAX_FRAME_BYTES:
        raise ProtocolViolationError(f"announced frame of {length} bytes exceeds the cap")
    try:
        message = json.loads(_recvall(sock, length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolViolationError(f"undecodable frame: {exc}") from exc
    if not isinstance(message, dict) or "kind" not in message:
        raise ProtocolViolationError("frame is not a keyed message")
    return message


def _check_version(message: dict) -> None:
    v = message.get("proto_version")
    if v != PROTO_VERSION:
        raise ProtocolViolationError(f"protocol version {v!r}, expected {PROTO_VERSION}")


# ---------------------------------------------------------------------------
# Worker process
# ---------------------------------------------------------------------------


class _WorkerState:
    def __init__(self) -> None:
        self.model = None
        self.pool: CandidatePool | None = None
        self.evaluated: frozenset[int] = frozenset()
        self.t: int | None = None


def _handle_snapshot(state: _WorkerState, msg: dict) -> None:
    state.model = model_from_snapshot(msg["model"])
    if msg.get("pool") is not None:
        state.pool = CandidatePool.from_payload(msg["pool"])
    if state.pool is None:
        raise ProtocolViolationError("snapshot carries no pool and none is cached")
    state.evaluated = frozenset(int(i) for i in msg["evaluated"])
    state.t = int(msg["t"])


def _handle_propose(state: _WorkerState, msg: dict) -> dict:
    if state.model is None or state.pool is None:
        raise ProtocolViolationError("PROPOSE before any SNAPSHOT")
    if int(msg["t"]) != state.t:
        raise ProtocolViolationError(f"PROPOSE for round {msg['t']}, snapshot is round {state.t}")
    view = PoolView(state.pool.features, state.evaluated)
    from .engine import sampled_values_from_model

    values = sampled_values_from_model(state.model, state.pool.features, int(msg["seed"]))
    entries = ranked_top_s(values, view, int(msg["top_s"]))
    return {
        "kind": "RANKED_LIST",
        "proto_version": PROTO_VERSION,
        "t": state.t,
        "s": int(msg["s"]),
        "entries": [int(e) for e in entries],
    }


def _handle_eval(state: _WorkerState, msg: dict) -> dict:
    if state.pool is None:
        raise ProtocolViolationError("EVAL before any SNAPSHOT")
    index = int(msg["index"])
    if not 0 <= index < state.pool.n:
        raise ProtocolViolationError(f"EVAL index {index} out of range")
    return {
        "kind": "EVAL_RESULT",
        "proto_version": PROTO_VERSION,
        "t": int(msg["t"]),
        "index": index,
        "y_raw": float(state.pool.hidden_targets[index]),
    }


def _serve_connection(conn: socket.socket) -> bool:
    """Serve one coordinator; True means SHUTDOWN was requested."""
    state = _WorkerState()
    while True:
        try:
            msg = recv_frame(conn)
        except ConnectionError:
            return False
        try:
            _check_version(msg)
            kind = msg["kind"]
            if kind == "SHUTDOWN":
                return True
            if kind == "SNAPSHOT":
                _handle_snapshot(state, msg)
                continue
            if kind == "PROPOSE":
                send_frame(conn, _handle_propose(state, msg))
                continue
            if kind == "EVAL":
                send_frame(conn, _handle_eval(state, msg))
                continue
            raise ProtocolViolationError(f"unexpected message kind {kind!r}")
        except ProtocolViolationError as exc:
            send_frame(conn, {
                "kind": "ERROR",
                "proto_version": PROTO_VERSION,
                "message": str(exc),
            })


def serve_worker(host: str = "127.0.0.1", port: int = 0, announce=None) -> None:
    """Run one worker until a coordinator says SHUTDOWN.

    Binds, prints ``listening on host:port`` (so a parent process scraping
    stdout learns the ephemeral port), then serves one connection at a time;
    a coordinator that merely disconnects can be replaced by the next one.
    Recoverable protocol trouble is answered with an ERROR frame; the worker
    stays up.
    """
    announce = announce or (lambda line: (print(line, flush=True)))
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(1)
        bound = server.getsockname()
        announce(f"listening on {bound[0]}:{bound[1]}")
        while True:
            conn, _ = server.accept()
            with conn:
                if _serve_connection(conn):
                    return


# ---------------------------------------------------------------------------
# Coordinator-side backends
# ---------------------------------------------------------------------------


class ThreadedBackend:
    """Fan-out across an in-process thread pool.

    Each worker slot still gets its own derived seed, and results are
    gathered in slot order, so the outcome matches the serial backend
    exactly; threads only overlap the linear algebra.
    """

    def __init__(self, n_threads: int | None = None):
        self.n_threads = thread_budget(n_threads)
        self._pool = ThreadPoolExecutor(max_workers=self.n_threads)

    def ranked_lists(self, driver, view, t, seeds, s):
        futures = [
            self._pool.submit(lambda sd: ranked_top_s(driver.sample_values(sd), view, s), seed)
            for seed in seeds
        ]
        return [f.result() for f in futures]

    def evaluate(self, t, batch, provenance):
        return None

    def close(self):
        self._pool.shutdown(wait=True)


class SocketBackend:
    """Fan-out across remote worker processes over TCP.

    Worker slot ``w`` maps to process ``w mod P``. Every round starts with a
    SNAPSHOT to each process (the pool rides along only on the first one);
    PROPOSE requests are then spread round-robin and answers collected per
    connection in send order. After the coordinator merges a batch, each
    entry is evaluated by the process whose ranked list contributed it, and
    the returned target is later cross-checked against the local pool.
    """

    def __init__(self, addresses, pool: CandidatePool, timeout: float = DEFAULT_TIMEOUT):
        if not addresses:
            raise ValueError("need at least one worker address")
        self.pool = pool
        self.addresses = list(addresses)
        self._socks: list[socket.socket] = []
        self._pool_sent: list[bool] = []
        try:
            for host, port in self.addresses:
                sock = socket.create_connection((host, port), timeout=timeout)
                sock.settimeout(timeout)
                self._socks.append(sock)
                self._pool_sent.append(False)
        except OSError as exc:
            self.close()
            raise WorkerUnavailableError(f"cannot reach worker {host}:{port}: {exc}") from exc
        self._last_provenance = None

    @property
    def n_processes(self) -> int:
        return len(self._socks)

    def _send(self, p: int, message: dict) -> None:
        try:
            send_frame(self._socks[p], message)
        except OSError as exc:
            raise WorkerUnavailableError(f"worker {self.addresses[p]} send failed: {exc}") from exc

    def _recv(self, p: int) -> dict:
        try:
            msg = recv_frame(self._socks[p])
        except (OSError, ConnectionError) as exc:
            raise WorkerUnavailableError(f"worker {self.addresses[p]} recv failed: {exc}") from exc
        if msg.get("kind") == "ERROR":
            raise ProtocolViolationError(f"worker {self.addresses[p]}: {msg.get('message')}")
        _check_version(msg)
        return msg

    def ranked_lists(self, driver, view, t, seeds, s):
        model_payload = driver.snapshot_payload()
        evaluated = sorted(view.evaluated)
        for p in range(self.n_processes):
            snap = {
                "kind": "SNAPSHOT",
                "proto_version": PROTO_VERSION,
                "t": t,
                "model": model_payload,
                "evaluated": evaluated,
                "pool": None if self._pool_sent[p] else self.pool.to_payload(),
            }
            self._send(p, snap)
            self._pool_sent[p] = True

        slot_order: list[list[int]] = [[] for _ in range(self.n_processes)]
        for w, seed in enumerate(seeds):
            p = w % self.n_processes
            self._send(p, {
                "kind": "PROPOSE",
                "proto_version": PROTO_VERSION,
                "t": t,
                "s": w,
                "seed": seed,
                "top_s": s,
            })
            slot_order[p].append(w)

        lists: list[list[int] | None] = [None] * len(seeds)
        for p in range(self.n_processes):
            for expected_slot in slot_order[p]:
                msg = self._recv(p)
                if msg.get("kind") != "RANKED_LIST":
                    raise ProtocolViolationError(
                        f"worker {self.addresses[p]}: expected RANKED_LIST, got {msg.get('kind')!r}"
                    )
                if int(msg["t"]) != t or int(msg["s"]) != expected_slot:
                    raise ProtocolViolationError(
                        f"worker {self.addresses[p]}: reply for round {msg['t']} slot {msg['s']},"
                        f" expected round {t} slot {expected_slot}"
                    )
                lists[expected_slot] = [int(e) for e in msg["entries"]]
        self._last_provenance = None
        return lists

    def evaluate(self, t, batch, provenance):
        if provenance is None:
            return None
        results: list[float] = []
        for idx, (worker_slot, _) in zip(batch, provenance):
            p = worker_slot % self.n_processes
            self._send(p, {
                "kind": "EVAL",
                "proto_version": PROTO_VERSION,
                "t": t,
                "index": int(idx),
            })
            msg = self._recv(p)
            if msg.get("kind") != "EVAL_RESULT" or int(msg["index"]) != int(idx):
                raise ProtocolViolationError(
                    f"worker {self.addresses[p]}: bad EVAL reply {msg.get('kind')!r}"
                )
            results.append(float(msg["y_raw"]))
        return results

    def close(self, shutdown: bool = True):
        """Disconnect; with ``shutdown`` the workers are told to exit too."""
        for sock in self._socks:
            if shutdown:
                try:
                    send_frame(sock, {"kind": "SHUTDOWN", "proto_version": PROTO_VERSION})
                except OSError:
                    pass
            try:
                sock.close()
            except OSError:
                pass
        self._socks = []


def shutdown_workers(addresses, timeout: float = DEFAULT_TIMEOUT) -> None:
    """Tell idle workers to exit (used after a multi-campaign run)."""
    for host, port in addresses:
        try:
            with socket.create_connection((host, port), timeout=timeout) as sock:
                send_frame(sock, {"kind": "SHUTDOWN", "proto_version": PROTO_VERSION})
        except OSError:
            pass


def coordinate(config, pool: CandidatePool, *, addresses=None, n_threads=None,
               timeout: float = DEFAULT_TIMEOUT):
    """Run one campaign on the backend implied by the arguments.

    ``addresses`` selects the socket backend, ``n_threads`` the threaded one;
    with neither the campaign runs serially in-process. The backend is closed
    (workers told to SHUTDOWN) when the campaign finishes or aborts.
    """
    from .engine import SerialBackend, run_campaign

    if addresses:
        backend = SocketBackend(addresses, pool, timeout=timeout)
    elif n_threads:
        backend = ThreadedBackend(n_threads)
    else:
        backend = SerialBackend()
    try:
        return run_campaign(config, pool, backend)
    finally:
        backend.close()


def parse_listen_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bad listen address {text!r}; expected host:port")
    return host, int(port)


def worker_main(argv=None) -> int:
    """Entry point for ``batchscreen worker``."""
    import argparse

    parser = argparse.ArgumentParser(prog="batchscreen worker")
    parser.add_argument("--listen", default="127.0.0.1:0", help="host:port (port 0 = ephemeral)")
    args = parser.parse_args(argv)
    host, port = parse_listen_address(args.listen)
    serve_worker(host, port)
    return 0


if __name__ == "__main__":
    sys.exit(worker_main())
