"""Client for the interactive Unix-socket protocol (see docs/protocol.md)."""

import socket
import struct

MAGIC = 0x54414D55
OP_OPEN, OP_INVOKE, OP_CLOSE, OP_RESUME = 1, 2, 3, 4
PAUSE_EVENT = 0x81

NONE, VALUE, MEMREF, SHM_PATH, MEMREF_SIZED = 0, 1, 2, 3, 4


def _slot(param):
    # None | ("value", a, b) | bytes | ("shm", path) | ("memref", bytes, declared)
    if param is None:
        return struct.pack("<BI", NONE, 0)
    if isinstance(param, (bytes, bytearray)):
        return struct.pack("<BI", MEMREF, len(param)) + bytes(param)
    kind = param[0]
    if kind == "value":
        return struct.pack("<BIII", VALUE, 8, param[1], param[2])
    if kind == "shm":
        path = param[1].encode()
        return struct.pack("<BI", SHM_PATH, len(path)) + path
    if kind == "memref":
        data = bytes(param[1])
        return struct.pack("<BII", MEMREF_SIZED, len(data) + 4, param[2]) + data
    raise ValueError(f"unknown parameter form {kind!r}")


def encode_request(op, session=0, cmd=0, param_types=0, params=()):
    params = list(params) + [None] * (4 - len(params))
    out = struct.pack("<IBIIH", MAGIC, op, session, cmd, param_types)
    return out + b"".join(_slot(p) for p in params[:4])


class Client:
    def __init__(self, path):
        self.sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self.sock.connect(path)

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _read(self, n):
        buf = b""
        while len(buf) < n:
            chunk = self.sock.recv(n - len(buf))
            if not chunk:
                raise ConnectionError("server closed the connection")
            buf += chunk
        return buf

    def _read_reply(self):
        (status,) = struct.unpack("<I", self._read(4))
        if status == MAGIC:
            kind, length = struct.unpack("<BH", self._read(3))
            if kind != PAUSE_EVENT:
                raise ConnectionError(f"unexpected event {kind:#x}")
            return ("pause", self._read(length).decode())
        (origin,) = struct.unpack("<B", self._read(1))
        payloads = []
        for _ in range(4):
            (length,) = struct.unpack("<I", self._read(4))
            payloads.append(self._read(length))
        return ("response", (status, origin, payloads))

    def send(self, frame, on_pause=None):
        """Sends a frame; on_pause(api) runs before each automatic resume."""
        self.sock.sendall(frame)
        while True:
            kind, body = self._read_reply()
            if kind == "response":
                return body
            if on_pause is not None:
                on_pause(body)
            self.sock.sendall(encode_request(OP_RESUME))

    def open(self, param_types=0, params=()):
        status, origin, payloads = self.send(
            encode_request(OP_OPEN, param_types=param_types, params=params))
        session = struct.unpack("<I", payloads[0])[0] if status == 0 else None
        return session, status, origin

    def invoke(self, session, cmd, param_types=0, params=(), on_pause=None):
        return self.send(
            encode_request(OP_INVOKE, session, cmd, param_types, params), on_pause)

    def close_session(self, session):
        return self.send(encode_request(OP_CLOSE, session))
