"""Wire protocol and state synchronization between controller and plant.

Wire format: one JSON object per line, UTF-8, fields `kind` (string), `seq`
(unsigned), `t` (seconds), `payload` (object). StateUpdate payload is
{"q": [6 numbers], "linkage": [3 numbers]}; TargetCommand payload is
{"pose": {"quat": [w,x,y,z], "pos": [x,y,z]}, "linkage": [3]}. Unknown
fields are ignored on decode for forward compatibility; unknown kinds are
rejected.

The simulated link is seeded and fully deterministic; a TCP line server /
client pair carries the identical framing for cross-process runs.
"""
import json
import math
import socket
import threading
from dataclasses import dataclass, field

import numpy as np

from .arm_kinematics import forward_kinematics
from .errors import MalformedMessage
from .geometry.core import Pose

KINDS = ("Hello", "StateUpdate", "TargetCommand", "Heartbeat", "Fault")
DESYNC_STALENESS = 0.2  # s; beyond this the twin is flagged desynchronized


@dataclass(frozen=True)
class TwinMessage:
    kind: str
    seq: int
    t: float
    payload: dict = field(default_factory=dict)


def hello(seq, t):
    return TwinMessage("Hello", seq, t, {})


def heartbeat(seq, t):
    return TwinMessage("Heartbeat", seq, t, {})


def state_update(seq, t, joints, linkage):
    return TwinMessage("StateUpdate", seq, t,
                       {"q": [float(v) for v in joints],
                        "linkage": [float(v) for v in linkage]})


def target_command(seq, t, pose, linkage):
    return TwinMessage("TargetCommand", seq, t,
                       {"pose": {"quat": [float(v) for v in pose.quat],
                                 "pos": [float(v) for v in pose.pos]},
                        "linkage": [float(v) for v in linkage]})


def fault(seq, t, code, text):
    return TwinMessage("Fault", seq, t, {"code": int(code), "text": str(text)})


def encode(msg):
    """One newline-terminated JSON line (bytes)."""
    obj = {"kind": msg.kind, "seq": msg.seq, "t": msg.t, "payload": msg.payload}
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


def _require_numbers(seq_val, n, what):
    if (not isinstance(seq_val, list) or len(seq_val) != n
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in seq_val)):
        raise MalformedMessage(f"{what} must be a list of {n} numbers")
    return [float(v) for v in seq_val]


def decode(line):
    """Parse and validate one wire line into a TwinMessage."""
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="strict")
    try:
        obj = json.loads(line)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedMessage(f"bad JSON: {exc}")
    if not isinstance(obj, dict):
        raise MalformedMessage("message is not a JSON object")
    for key in ("kind", "seq", "t"):
        if key not in obj:
            raise MalformedMessage(f"missing required field {key!r}")
    kind = obj["kind"]
    if kind not in KINDS:
        raise MalformedMessage(f"unknown kind {kind!r}")
    seq = obj["seq"]
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise MalformedMessage("seq must be an unsigned integer")
    t = obj["t"]
    if not isinstance(t, (int, float)) or isinstance(t, bool) or t < 0:
        raise MalformedMessage("t must be a non-negative number")
    payload = obj.get("payload", {})
    if not isinstance(payload, dict):
        raise MalformedMessage("payload must be an object")

    if kind == "StateUpdate":
        if "q" not in payload or "linkage" not in payload:
            raise MalformedMessage("StateUpdate payload needs q and linkage")
        clean = {"q": _require_numbers(payload["q"], 6, "q"),
                 "linkage": _require_numbers(payload["linkage"], 3, "linkage")}
    elif kind == "TargetCommand":
        pose = payload.get("pose")
        if not isinstance(pose, dict):
            raise MalformedMessage("TargetCommand payload needs pose")
        clean = {"pose": {"quat": _require_numbers(pose.get("quat"), 4, "quat"),
                          "pos": _require_numbers(pose.get("pos"), 3, "pos")},
                 "linkage": _require_numbers(payload.get("linkage"), 3, "linkage")}
    elif kind == "Fault":
        if not isinstance(payload.get("code"), int) or not isinstance(
                payload.get("text"), str):
            raise MalformedMessage("Fault payload needs int code and str text")
        clean = {"code": payload["code"], "text": payload["text"]}
    else:
        clean = {}
    return TwinMessage(kind=kind, seq=seq, t=float(t), payload=clean)


def decoded_pose(msg):
    """Pose carried by a TargetCommand."""
    p = msg.payload["pose"]
    return Pose(np.asarray(p["quat"], dtype=float),
                np.asarray(p["pos"], dtype=float))


@dataclass(frozen=True)
class LinkConfig:
    latency_mean: float = 0.0   # s
    jitter_std: float = 0.0     # s
    drop_prob: float = 0.0      # [0, 1)
    seed: int = 0

    def __post_init__(self):
        if self.latency_mean < 0.0 or self.jitter_std < 0.0:
            raise ValueError("latency and jitter must be non-negative")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ValueError("drop probability must be in [0, 1)")

    @staticmethod
    def from_dict(d):
        return LinkConfig(**d)


class SimulatedLink:
    """Seeded lossy link: per message one drop draw then one jitter draw,
    always in that order, so a replay with the same seed reproduces the
    delivery schedule exactly."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._rng = np.random.default_rng(cfg.seed)
        self._pending = []   # (deliver_time, send_index, msg)
        self._sent = 0

    def send(self, send_time, msg):
        """Queue a message; returns (deliver_time, msg) or None if dropped."""
        u = self._rng.random()
        jitter = self._rng.normal(0.0, 1.0)
        index = self._sent
        self._sent += 1
        if self.cfg.drop_prob > 0.0 and u < self.cfg.drop_prob:
            return None
        delay = self.cfg.latency_mean + self.cfg.jitter_std * jitter
        deliver_time = send_time + max(0.0, delay)
        self._pending.append((deliver_time, index, msg))
        return deliver_time, msg

    def poll(self, now):
        """Messages due by `now`, ordered by (deliver_time, send order)."""
        due = sorted(m for m in self._pending if m[0] <= now)
        self._pending = [m for m in self._pending if m[0] > now]
        return [(t, msg) for t, _, msg in due]


def link_deliver(link, send_time, msg):
    """Functional face of SimulatedLink.send."""
    return link.send(send_time, msg)


@dataclass(frozen=True)
class TwinState:
    """Mirror of the plant driven by StateUpdate messages, latest-wins."""

    last_seq: int = -1
    joints: np.ndarray = field(default_factory=lambda: np.zeros(6))
    linkage: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_update_t: float = 0.0
    staleness: float = 0.0
    desync: bool = False

    def __post_init__(self):
        object.__setattr__(self, "joints", np.asarray(self.joints, dtype=float))
        object.__setattr__(self, "linkage", np.asarray(self.linkage, dtype=float))


def twin_apply(state, msg, now):
    """Apply a decoded message to the twin; stale sequence numbers are
    discarded (latest-wins)."""
    if msg.kind != "StateUpdate" or msg.seq <= state.last_seq:
        return state
    staleness = max(0.0, now - msg.t)
    return TwinState(last_seq=msg.seq,
                     joints=np.asarray(msg.payload["q"], dtype=float),
                     linkage=np.asarray(msg.payload["linkage"], dtype=float),
                     last_update_t=msg.t,
                     staleness=staleness,
                     desync=staleness > DESYNC_STALENESS)


def twin_staleness(state, now):
    """Age of the newest applied update at time `now`."""
    if state.last_seq < 0:
        return math.inf
    return max(0.0, now - state.last_update_t)


def desync_metric(twin, plant_joints, dh):
    """TCP distance between the twin's pose and the plant's pose (m)."""
    p_twin = forward_kinematics(dh, twin.joints).pos
    p_plant = forward_kinematics(dh, np.asarray(plant_joints, dtype=float)).pos
    return float(np.linalg.norm(p_twin - p_plant))


class TcpLineServer:
    """Single-client line server speaking the wire format over TCP."""

    def __init__(self, host="127.0.0.1", port=0):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(1)
        self.address = self._sock.getsockname()
        self._conn = None
        self._received = []
        self._lock = threading.Lock()
        self._reader = None
        self._closed = False

    def accept(self, timeout=5.0):
        self._sock.settimeout(timeout)
        self._conn, _ = self._sock.accept()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        buf = b""
        try:
            while not self._closed:
                chunk = self._conn.recv(4096)
                if not chunk:
                    break
                buf += chunk
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    if line:
                        with self._lock:
                            self._received.append(decode(line))
        except OSError:
            pass

    def send(self, msg):
        self._conn.sendall(encode(msg))

    def drain(self):
        with self._lock:
            out = self._received
            self._received = []
        return out

    def close(self):
        self._closed = True
        for s in (self._conn, self._sock):
            if s is not None:
                try:
                    s.close()
                except OSError:
                    pass


class TcpLineClient:
    """Counterpart of TcpLineServer."""

    def __init__(self, host, port, timeout=5.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._received = []
        self._lock = threading.Lock()
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        buf = b""
        try:
            while not self._closed:
                chunk = self._sock.recv(4096)
                if not chunk:
                    break
                buf += chunk
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    if line:
                        with self._lock:
                            self._received.append(decode(line))
        except OSError:
            pass

    def send(self, msg):
        self._sock.sendall(encode(msg))

    def drain(self):
        with self._lock:
            out = self._received
            self._received = []
        return out

    def close(self):
        self._closed = True
        try:
            self._sock.close()
        except OSError:
            pass
