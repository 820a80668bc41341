"""Wrapped (sin, cos) encoding of latitude, longitude and capture date."""

from __future__ import annotations

import calendar
import datetime as _dt
from collections.abc import Sequence

import numpy as np

from .domain import Observation

FEATURE_DIM = 6

# Checkpoints record which convention produced their inputs.
LAT_LON_DATE = "sincos-pi/lat90-lon180-dayfrac/lat,lon,date"
LAT_LON = "sincos-pi/lat90-lon180-dayfrac/lat,lon,date=0"
FEATURE_CONVENTIONS = {"lat_lon_date": LAT_LON_DATE, "lat_lon": LAT_LON}


def year_fraction(date: _dt.date) -> float:
    """Map a date to [-1, 1): Jan 1 is -1, the year end approaches 1."""
    day_index = date.timetuple().tm_yday - 1
    year_length = 366 if calendar.isleap(date.year) else 365
    return 2.0 * day_index / year_length - 1.0


def normalize_observation(obs: Observation) -> tuple[float, float, float]:
    return obs.latitude / 90.0, obs.longitude / 180.0, year_fraction(obs.date)


def cyclical_encode(x):
    """(sin(pi x), cos(pi x)); works elementwise on arrays."""
    angle = np.pi * np.asarray(x, dtype=np.float64)
    s, c = np.sin(angle), np.cos(angle)
    if s.ndim == 0:
        return float(s), float(c)
    return s, c


def encode_observation(obs: Observation) -> np.ndarray:
    out = np.empty(FEATURE_DIM)
    for i, v in enumerate(normalize_observation(obs)):
        out[2 * i], out[2 * i + 1] = cyclical_encode(v)
    return out


def encode_observations(
    observations: Sequence[Observation], convention: str = LAT_LON_DATE
) -> np.ndarray:
    """Encode many observations into an (N, 6) matrix.

    Under the ``LAT_LON`` convention the date pair is zeroed so a network
    trained on it sees no seasonal signal.
    """
    if convention not in (LAT_LON_DATE, LAT_LON):
        raise ValueError(f"unknown feature convention {convention!r}")
    if len(observations) == 0:
        return np.zeros((0, FEATURE_DIM))
    norm = np.array([normalize_observation(o) for o in observations], dtype=np.float64)
    s, c = cyclical_encode(norm)
    X = np.empty((len(observations), FEATURE_DIM))
    X[:, 0::2] = s
    X[:, 1::2] = c
    if convention == LAT_LON:
        X[:, 4:] = 0.0
    return X
