"""Synthetic sighting datasets: confusable species pairs with separate
ranges and alternating seasons, power-law class sizes, and a simulated
image classifier that mostly cannot tell pair members apart.
"""

from __future__ import annotations

import calendar
import dataclasses
import datetime as _dt
from dataclasses import dataclass

import numpy as np

from .domain import Dataset, ProbMatrix, validate_dataset
from .errors import InfeasibleSpec, InvalidConfig

IMAGE_LEAK = 0.05
YEARS = (2017, 2018, 2019, 2020)
DAYS = 365.0


@dataclass(frozen=True)
class SynthSpec:
    n_pairs: int = 10
    n_train: int = 5000
    n_test: int = 1000
    imbalance_gamma: float = 1.5
    geo_sigma: float = 3.0
    pair_separation: float = 6.0
    season_width: float = 20.0
    image_confusion: float = 0.45
    image_concentration: float = 1.0
    image_majority_bias: float = 1.0
    region: tuple[float, float, float, float] = (15.0, 70.0, -165.0, -55.0)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "region", tuple(float(v) for v in self.region))
        lat_lo, lat_hi, lon_lo, lon_hi = self.region
        checks = [
            (self.n_pairs >= 1, "n_pairs must be >= 1"),
            (self.n_train >= 2 * self.n_pairs, "n_train must give every class at least one sample"),
            (self.n_test >= 2 * self.n_pairs, "n_test must give every class at least one sample"),
            (self.imbalance_gamma >= 0, "imbalance_gamma must be >= 0"),
            (self.geo_sigma > 0, "geo_sigma must be positive"),
            (self.pair_separation > 0, "pair_separation must be positive"),
            (self.season_width > 0, "season_width must be positive"),
            (0 <= self.image_confusion < 0.5, "image_confusion must be in [0, 0.5)"),
            (self.image_concentration > 0, "image_concentration must be positive"),
            (0 <= self.image_majority_bias <= 1, "image_majority_bias must be in [0, 1]"),
            (self.seed >= 0, "seed must be non-negative"),
            (-90 <= lat_lo < lat_hi <= 90, "region latitudes must satisfy -90 <= min < max <= 90"),
            (-180 <= lon_lo < lon_hi < 180, "region longitudes must satisfy -180 <= min < max < 180"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidConfig(msg)

    @property
    def n_classes(self) -> int:
        return 2 * self.n_pairs


@dataclass(frozen=True)
class GeneratorParams:
    species: tuple[str, ...]
    genus: tuple[str, ...]
    family: tuple[str, ...]
    partner: tuple[int, ...]
    mass: tuple[float, ...]
    train_counts: tuple[int, ...]
    test_counts: tuple[int, ...]
    centers: tuple[tuple[float, float], ...]  # (lat, lon) per class
    season_center: tuple[float, ...]  # day of year per class
    season_width: float
    geo_sigma: float


@dataclass(frozen=True)
class SynthOutput:
    spec: SynthSpec
    train: Dataset
    test: Dataset
    image_probs: ProbMatrix
    params: GeneratorParams


def power_law_counts(n: int, n_classes: int, gamma: float) -> np.ndarray:
    """Split n over classes with mass (c+1)^-gamma.

    Largest-remainder rounding (ties to the lower class), then every class is
    lifted to at least one sample by taking from the largest classes.
    """
    mass = (np.arange(n_classes) + 1.0) ** -gamma
    mass /= mass.sum()
    raw = mass * n
    counts = np.floor(raw).astype(np.int64)
    order = sorted(range(n_classes), key=lambda c: (-(raw[c] - counts[c]), c))
    for c in order[: n - counts.sum()]:
        counts[c] += 1
    for c in range(n_classes):
        while counts[c] == 0:
            donor = int(np.argmax(counts))
            counts[donor] -= 1
            counts[c] += 1
    return counts


def _circular_day_gap(a, b):
    d = abs(a - b) % DAYS
    return min(d, DAYS - d)


def _place_centers(spec: SynthSpec, season, rng) -> np.ndarray:
    """Range centers inside the region.

    Partners are at least ``pair_separation * geo_sigma`` apart on the map.
    Every other pair of species is at least ``pair_separation`` apart in the
    joint space of (distance / geo_sigma, season gap / season_width), so two
    species may share ground only if their seasons differ.
    """
    lat_lo, lat_hi, lon_lo, lon_hi = spec.region
    sep = spec.pair_separation
    P = spec.n_pairs
    for _restart in range(50):
        centers: dict[int, np.ndarray] = {}
        for c in list(range(P)) + list(range(P, 2 * P)):
            for _attempt in range(2000):
                cand = np.array([rng.uniform(lat_lo, lat_hi), rng.uniform(lon_lo, lon_hi)])
                ok = True
                for o, oc in centers.items():
                    geo = np.hypot(*(cand - oc)) / spec.geo_sigma
                    if o % P == c % P:
                        ok = geo >= sep
                    else:
                        gap = _circular_day_gap(season[c], season[o]) / spec.season_width
                        ok = np.hypot(geo, gap) >= sep
                    if not ok:
                        break
                if ok:
                    centers[c] = cand
                    break
            else:
                break
        if len(centers) == spec.n_classes:
            return np.array([centers[c] for c in range(spec.n_classes)])
    raise InfeasibleSpec(
        f"cannot place {spec.n_classes} ranges with separation {sep:g} inside region {spec.region}"
    )


def _sample_coords(center, sigma, n, rng):
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        cand = center + sigma * rng.standard_normal((n - filled, 2))
        ok = (np.abs(cand[:, 0]) <= 90.0) & (cand[:, 1] >= -180.0) & (cand[:, 1] < 180.0)
        take = cand[ok]
        out[filled : filled + len(take)] = take
        filled += len(take)
    return out


def _sample_dates(center_day, width, n, rng):
    days = np.mod(center_day + width * rng.standard_normal(n), DAYS) / DAYS
    years = rng.choice(YEARS, size=n)
    dates = []
    for frac, year in zip(days, years):
        year_len = 366 if calendar.isleap(int(year)) else 365
        idx = min(int(frac * year_len), year_len - 1)
        dates.append(_dt.date(int(year), 1, 1) + _dt.timedelta(days=idx))
    return dates


def _make_rows(prefix, counts, params, spec, rng):
    per_class = []
    for c, n in enumerate(counts):
        coords = _sample_coords(np.array(params.centers[c]), spec.geo_sigma, int(n), rng)
        dates = _sample_dates(params.season_center[c], spec.season_width, int(n), rng)
        per_class += [(c, lat, lon, d) for (lat, lon), d in zip(coords, dates)]
    order = rng.permutation(len(per_class))
    rows = []
    for i, j in enumerate(order, start=1):
        c, lat, lon, d = per_class[j]
        rows.append(
            {
                "obs_id": f"{prefix}{i:06d}",
                "latitude": repr(round(float(lat), 6)),
                "longitude": repr(round(float(lon), 6)),
                "date": d.isoformat(),
                "label_l1": params.family[c],
                "label_l2": params.genus[c],
                "label_l3": params.species[c],
            }
        )
    return rows


def image_mean_vector(true_class, params: GeneratorParams, spec: SynthSpec) -> np.ndarray:
    """Expected output of the simulated image model for one true class.

    The true class gets 1 - confusion - leak, its pair partner gets the
    confusion mass, and the leak is spread over all other classes. With
    ``image_majority_bias`` > 0 mass shifts within the pair towards the more
    frequent member, as a classifier trained on imbalanced data would; the
    shifts are sized so the frequency-weighted true-class mass is unchanged.
    """
    C = spec.n_classes
    leak = IMAGE_LEAK if C > 2 else 0.0
    m = np.full(C, leak / max(C - 2, 1))
    t, q = true_class, params.partner[true_class]
    m[t] = 1.0 - spec.image_confusion - leak
    m[q] = spec.image_confusion
    if spec.image_majority_bias > 0:
        mass_t, mass_q = params.mass[t], params.mass[q]
        ratio = min(mass_t, mass_q) / max(mass_t, mass_q)
        shift = spec.image_majority_bias * spec.image_confusion * (1.0 - ratio)
        if mass_t < mass_q:
            m[t] -= shift
            m[q] += shift
        else:
            m[t] += shift * ratio
            m[q] -= shift * ratio
    return m


def _image_probs(test_rows, params, spec, rng):
    index = {s: i for i, s in enumerate(params.species)}
    means = np.array([image_mean_vector(c, params, spec) for c in range(spec.n_classes)])
    values = np.empty((len(test_rows), spec.n_classes))
    for r, row in enumerate(test_rows):
        alpha = spec.image_concentration * means[index[row["label_l3"]]]
        while True:
            g = rng.gamma(alpha)
            if g.sum() > 0:
                break
        values[r] = g / g.sum()
    return ProbMatrix(tuple(r["obs_id"] for r in test_rows), params.species, values)


def generate_dataset(spec: SynthSpec) -> SynthOutput:
    rng = np.random.default_rng(spec.seed)
    C, P = spec.n_classes, spec.n_pairs
    width = max(2, len(str(C - 1)))
    species = tuple(f"sp{c:0{width}d}" for c in range(C))
    pair_of = [c % P for c in range(C)]
    genus = tuple(f"gen{p:0{width}d}" for p in pair_of)
    family = tuple(f"fam{p // 4:0{width}d}" for p in pair_of)
    partner = tuple((c + P) % C for c in range(C))
    mass = (np.arange(C) + 1.0) ** -spec.imbalance_gamma
    mass /= mass.sum()

    pair_day = rng.uniform(0, DAYS, size=P)
    season = tuple(float((pair_day[c % P] + (DAYS / 2 if c >= P else 0.0)) % DAYS) for c in range(C))
    centers = _place_centers(spec, season, rng)

    params = GeneratorParams(
        species=species,
        genus=genus,
        family=family,
        partner=partner,
        mass=tuple(float(m) for m in mass),
        train_counts=tuple(int(n) for n in power_law_counts(spec.n_train, C, spec.imbalance_gamma)),
        test_counts=tuple(int(n) for n in power_law_counts(spec.n_test, C, spec.imbalance_gamma)),
        centers=tuple((float(a), float(b)) for a, b in centers),
        season_center=season,
        season_width=spec.season_width,
        geo_sigma=spec.geo_sigma,
    )
    train_rows = _make_rows("tr", params.train_counts, params, spec, rng)
    test_rows = _make_rows("te", params.test_counts, params, spec, rng)
    train = validate_dataset(train_rows)
    test = validate_dataset(test_rows, train.vocabulary)
    image = _image_probs(test_rows, params, spec, rng)
    return SynthOutput(spec, train, test, image, params)


def describe_generator(output: SynthOutput) -> str:
    p = output.params
    counts = np.array(p.train_counts)
    lines = [
        "# synthetic generator summary",
        *(f"{f.name} = {getattr(output.spec, f.name)}" for f in dataclasses.fields(output.spec)),
        f"classes = {len(p.species)}",
        f"imbalance_ratio = {counts.max() / counts.min():.6g}",
        "",
        "species\tgenus\tfamily\tpartner\ttrain_n\ttest_n\tcenter_lat\tcenter_lon\tseason_day",
    ]
    for c, s in enumerate(p.species):
        lat, lon = p.centers[c]
        lines.append(
            f"{s}\t{p.genus[c]}\t{p.family[c]}\t{p.species[p.partner[c]]}\t{p.train_counts[c]}\t"
            f"{p.test_counts[c]}\t{lat:.4f}\t{lon:.4f}\t{p.season_center[c]:.2f}"
        )
    return "\n".join(lines) + "\n"
