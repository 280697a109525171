import io
import json
import math
import urllib.request
import wave
from pathlib import Path

import numpy as np
import pytest

import framebeat

DATA = Path(framebeat.data_dir())
IMAGES = [DATA / "fixtures" / "images" / f"{n}.jpg" for n in ("night_street", "beach_morning", "forest_rain")]


def test_crossfade_window_table():
    assert framebeat.crossfade_window(120) == 1.0
    assert framebeat.crossfade_window(240) == 0.5
    assert framebeat.crossfade_window(90) == pytest.approx(4 / 3, abs=1e-12)


def test_envelope_gains():
    g_out, g_in = framebeat.envelope_gains(100, 441)
    assert g_out**2 + g_in**2 == pytest.approx(1.0, abs=1e-9)
    assert framebeat.envelope_gains(50, 100, alpha=2.5)[1] == pytest.approx(0.5**2.5, abs=1e-12)
    with pytest.raises(framebeat.Error) as err:
        framebeat.envelope_gains(101, 100)
    assert err.value.args[0] == "IndexOutOfWindow"


def test_wav_round_trip():
    rng = np.random.default_rng(3)
    audio = rng.uniform(-1, 1, size=(2, 1000)).astype(np.float32)
    data = framebeat.encode_wav(audio)
    with wave.open(io.BytesIO(data)) as w:
        assert (w.getnchannels(), w.getframerate(), w.getsampwidth()) == (2, 44100, 2)
    back = framebeat.decode_wav(data)
    assert back.shape == (2, 1000)
    assert np.max(np.abs(back - audio)) <= 2**-15


def test_select_envelope_equal_level_noise():
    rng = np.random.default_rng(5)
    a = rng.uniform(-0.02, 0.02, size=(2, 5000)).astype(np.float32)
    b = rng.uniform(-0.02, 0.02, size=(2, 5000)).astype(np.float32)
    choice = framebeat.select_envelope(a, b, 4410)
    assert choice["family"] == "equal_power"
    assert choice["alpha"] is None


def test_prompt_golden():
    caption = {
        "description": "purple neon street light sign at night",
        "objects": ["neon sign", "street light"],
        "mood": ["moody", "lush"],
        "section_role": "verse",
        "genre": "ambient chill",
        "bpm": 90,
    }
    golden = (DATA / "golden" / "prompt_night_street_k1.txt").read_text().strip()
    assert framebeat.build_prompt(caption, ["keys", "guitar"], 1, "ambient chill", 90) == golden


def test_device_lines():
    assert framebeat.parse_device_line("B 4 d 1200") == "B 4 d 1200\n"
    line = framebeat.encode_display(90, "verse", 3, 0x0B, "ambient chill")
    assert line == "D 90 verse 3 0B ambient chill\n"
    with pytest.raises(framebeat.Error):
        framebeat.parse_device_line("Q 1")


def test_compose_is_deterministic_and_replays():
    a = framebeat.compose(IMAGES, "keys,guitar", zero_latency=True, auto_mix=True, master=True)
    b = framebeat.compose(IMAGES, ["keys", "guitar"], zero_latency=True, auto_mix=True, master=True)
    assert a["wav"] == b["wav"]
    assert len(a["state"]["sections"]) == 3
    assert a["state"]["session"]["bpm"] == 90.0
    assert framebeat.render(a["log"]) == a["wav"]
    header = json.loads(a["log"].splitlines()[0])
    assert header["schema"] == "framebeat.session-log"


def test_compose_latency_report():
    r = framebeat.compose(IMAGES, "keys,guitar")
    e2e = r["report"]["stages"]["end_to_end"]
    assert r["report"]["sections"] == 3
    assert 5.0 <= e2e["min"] <= e2e["max"] <= 6.5


def test_service_in_process_and_http():
    with framebeat.Service(zero_latency=True) as svc:
        status, body = svc.request("GET", "/health")
        assert status == 200 and body["ok"]
        status, body = svc.request("GET", "/state")
        assert status == 404 and body["error"] == "SessionNotActive"
        status, body = svc.request("POST", "/session")
        assert status == 201
        status, body = svc.request("POST", "/control", body={"action": "select_instruments", "instruments": ["bass"]})
        assert status == 200
        port = svc.start()
        with urllib.request.urlopen(f"http://127.0.0.1:{port}/state", timeout=10) as resp:
            state = json.load(resp)
        assert state["session"]["instruments"] == ["bass"]
        display = svc.device_line("B 0 d 10")
        assert display.startswith("D ")
        assert int(display.split()[4], 16) & 0b101 == 0b101
