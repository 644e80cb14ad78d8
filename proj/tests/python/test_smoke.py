import os
import struct
import subprocess
import time
from pathlib import Path

import pytest

import taemu

DATA = Path(os.environ.get("TAEMU_DATA", Path(__file__).resolve().parents[2] / "data"))
CLI = os.environ.get("TAEMU_CLI")
KEY = b"0123456789abcdef"


def fixture(name):
    return taemu.assemble((DATA / "tas" / f"{name}.s").read_text())


def harness(name):
    return (DATA / "harness" / f"{name}.txt").read_text()


def test_assemble_roundtrip():
    elf = fixture("identity")
    assert elf[:4] == b"\x7fELF"
    assert taemu.taelf_roundtrip(elf) == elf


def test_assemble_error_is_raised():
    with pytest.raises(taemu.TaemuError):
        taemu.assemble(".text\n.entry TA_InvokeCommandEntryPoint\n    BOGUS r0\n")


def test_cipher_invoke():
    m = taemu.Manager(fixture("cipher"))
    session, opened = m.open_session()
    assert session is not None and opened["return_code"] == 0
    msg = b"attack at dawn"
    r = m.invoke(session, 0, 0x0065, [msg, bytes(32)])
    assert r["return_code"] == 0
    assert r["params"][1][: len(msg)] == bytes(c ^ KEY[i % 16] for i, c in enumerate(msg))

    bad = m.invoke(session, 0, 0x0011, [("value", 1, 2), ("value", 3, 4)])
    assert bad["return_code"] == 0xFFFF0006
    assert bad["log"] == ["bad parameter types!"]


def test_confusion_crash_is_reported():
    m = taemu.Manager(fixture("confusion"))
    session, _ = m.open_session()
    r = m.invoke(session, 0, 0x0001, [("value", 0xDEAD0000, 0x10)])
    assert r["crashed"]
    assert r["return_code"] == 0xFFFF3024
    assert r["crash_class"] == "InvalidMemAccess"


def test_fuzz_and_replay(tmp_path):
    elf = fixture("oob")
    spec = harness("oob")
    result = taemu.fuzz(elf, spec, seed=1, iterations=20000, out_dir=str(tmp_path))
    assert result["crashes_bug"] >= 1
    key, triage, data = result["crashes"][0]
    assert triage == "bug" and "oob-write" in key
    assert taemu.replay(elf, spec, data)["dedup_key"] == key
    assert (tmp_path / "stats.txt").exists()
    # Inputs shorter than the harness minimum are not executed.
    assert taemu.replay(fixture("missing"), harness("missing"), b"\x00") is None


def test_fuzz_is_deterministic():
    elf, spec = fixture("oob"), harness("oob")
    a = taemu.fuzz(elf, spec, seed=3, iterations=3000)
    b = taemu.fuzz(elf, spec, seed=3, iterations=3000)
    assert a["corpus"] == b["corpus"]
    assert a["crashes"] == b["crashes"]


def test_rank_apis_chain():
    csv = taemu.rank_apis([(DATA / "icfg" / "chain.icfg").read_text()], gp=[], libc=[])
    lines = csv.strip().splitlines()
    assert lines[1].split(",")[1] == "t"


@pytest.fixture
def server(tmp_path):
    if not CLI:
        pytest.skip("TAEMU_CLI not set")
    sock = tmp_path / "taemu.sock"
    proc = subprocess.Popen(
        [CLI, "serve", str(DATA / "tas" / "tocttou.s"), "--socket", str(sock),
         "--pause-api", "TEE_MemMove", "--pause-nth", "1"],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    deadline = time.time() + 10
    while not sock.exists():
        if time.time() > deadline or proc.poll() is not None:
            proc.kill()
            pytest.fail("server did not start")
        time.sleep(0.02)
    yield sock
    proc.terminate()
    proc.wait(timeout=10)


def test_client_against_server(server, tmp_path):
    shm = tmp_path / "shm"

    def put(value):
        with open(shm, "r+b") as f:
            f.write(struct.pack("<I", value))

    shm.write_bytes(bytes(16))
    with taemu.Client(str(server)) as c:
        session, status, _ = c.open()
        assert status == 0
        put(4)
        paused = []

        def grow(api):
            paused.append(api)
            put(100)

        status, _, _ = c.invoke(session, 0, 0x0005, [("shm", str(shm))], on_pause=grow)
        assert paused == ["TEE_MemMove"]
        assert status == 0xDEAD0001

        put(4)
        status, _, _ = c.invoke(session, 0, 0x0005, [("shm", str(shm))])
        assert status == 0

        status, origin, _ = c.invoke(999, 0)
        assert (status, origin) == (0xFFFF0006, 1)
