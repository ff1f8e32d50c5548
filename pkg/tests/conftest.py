import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mbrir.rooms import RoomConfig, Variant

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_config(dims=(6.0, 5.0, 3.0), src=(2.0, 2.0, 1.5), rec=(3.7, 2.0, 1.5),
                t60=0.4, bands=None, yaw=0.0, pitch=0.0, variant=Variant.MB, cid="hand"):
    bands = tuple(bands) if bands is not None else (float(t60),) * 6
    return RoomConfig(id=cid, seed=0, dims_m=tuple(map(float, dims)),
                      rec_pos_m=tuple(map(float, rec)), rec_yaw_deg=yaw, rec_pitch_deg=pitch,
                      src_pos_m=tuple(map(float, src)), t60_bands_s=bands,
                      t60_scalar_s=float(np.mean(bands)), variant=variant)


@pytest.fixture
def hand_config():
    return make_config()


# one line per acceptance criterion, printed after the run
ACCEPTANCE_RESULTS: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
