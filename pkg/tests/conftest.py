import numpy as np
import pytest

from geoprior.domain import validate_dataset


def obs_row(obs_id, lat=10.0, lon=20.0, date="2019-06-01", species="sp_a", genus="gen_a", family="fam_a"):
    return {
        "obs_id": obs_id,
        "latitude": str(lat),
        "longitude": str(lon),
        "date": date,
        "label_l1": family,
        "label_l2": genus,
        "label_l3": species,
    }


@pytest.fixture
def three_rows():
    return [
        obs_row("o1", 10.0, 20.0, "2019-01-01", "sp_a", "gen_a", "fam_x"),
        obs_row("o2", -5.5, 179.0, "2020-02-29", "sp_b", "gen_a", "fam_x"),
        obs_row("o3", 45.0, -120.0, "2018-12-31", "sp_c", "gen_c", "fam_y"),
    ]


@pytest.fixture
def three_obs(three_rows):
    return validate_dataset(three_rows)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    def report(number, passed, detail):
        ACCEPTANCE_LINES[number] = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}"
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
