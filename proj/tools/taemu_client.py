#!/usr/bin/env python3
"""Scriptable normal-world client for `taemu serve`."""

import argparse
import importlib.util
import os
import sys

# The client is pure Python; load it without the compiled extension.
_spec = importlib.util.spec_from_file_location(
    "taemu_client", os.path.join(os.path.dirname(__file__), "..", "python", "taemu", "client.py"))
_client = importlib.util.module_from_spec(_spec)
_spec.loader.exec_module(_client)
Client = _client.Client


def parse_param(text):
    kind, _, arg = text.partition(":")
    if kind == "none":
        return None
    if kind == "value":
        a, b = arg.split(",")
        return ("value", int(a, 0), int(b, 0))
    if kind == "mem":
        return bytes.fromhex(arg)
    if kind == "memstr":
        return arg.encode()
    if kind == "shm":
        return ("shm", arg)
    raise SystemExit(f"unknown parameter form {text}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--socket", required=True)
    ap.add_argument("--cmd", type=lambda s: int(s, 0), default=0)
    ap.add_argument("--types", type=lambda s: int(s, 0), default=0)
    ap.add_argument("--param", action="append", default=[])
    ap.add_argument("--on-pause-write", metavar="PATH:OFFSET:HEX",
                    help="patch a shared-memory file whenever the server pauses")
    args = ap.parse_args()

    on_pause = None
    if args.on_pause_write:
        path, offset, data = args.on_pause_write.split(":")

        def on_pause(api):
            with open(path, "r+b") as f:
                f.seek(int(offset, 0))
                f.write(bytes.fromhex(data))
            print(f"paused after {api}; patched {path}")

    with Client(args.socket) as c:
        session, status, origin = c.open()
        if session is None:
            print(f"open failed: status {status:#010x} origin {origin}")
            return 2
        params = [parse_param(p) for p in args.param]
        status, origin, payloads = c.invoke(session, args.cmd, args.types, params, on_pause)
        print(f"return: {status:#010x}\norigin: {origin}")
        for i, p in enumerate(payloads):
            if p:
                print(f"param{i}: {p.hex()}")
        c.close_session(session)
    return 0


if __name__ == "__main__":
    sys.exit(main())
