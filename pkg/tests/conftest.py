import numpy as np
import pytest
from hypothesis import settings

from ise_asd.audio import Waveform
from ise_asd.synth import make_corpus, speech_shaped_noise

FS = 16000

settings.register_profile("ci", derandomize=True, deadline=None)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def corpus():
    return make_corpus(6, seed=101)


@pytest.fixture(scope="session")
def ssn():
    return speech_shaped_noise(20.0, FS, seed=202)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tone(freq, seconds=1.0, fs=FS, amp=0.5):
    t = np.arange(int(round(seconds * fs))) / fs
    return Waveform(amp * np.sin(2 * np.pi * freq * t), fs)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
