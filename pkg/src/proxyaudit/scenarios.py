"""Seeded synthetic datasets for the worked lending, admissions and hiring examples.

Every column draws from its own SplitMix64 substream keyed by
``(seed, scenario/column)``. Where a rate is a calibration target the
generator fixes the count exactly (largest-remainder allocation) and only the
row positions are random, so targets hold at any seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ColumnSchema, Dataset
from .errors import DataError
from .glm import FittedModel, predict
from .prng import Stream

SCENARIOS = ("marital_lending", "accent_origin", "segregated_school", "hiring_major", "digital_footprint")

DEFAULT_N = {
    "marital_lending": 5000,
    "accent_origin": 20000,
    "segregated_school": 5000,
    "hiring_major": 2000,
    "digital_footprint": 100000,
}
MIN_N = {
    "marital_lending": 100,
    "accent_origin": 1000,
    "segregated_school": 1000,
    "hiring_major": 1000,
    "digital_footprint": 10000,
}
DEFAULT_NOISE = {
    "marital_lending": 0.0,  # probability each proxy is flipped
    "accent_origin": 0.05,  # share of rows whose origin contradicts their accent
    "segregated_school": 0.0,  # share of segregated-school rows given another race
    "hiring_major": 1.0,  # multiplier on the profit noise sd
    "digital_footprint": 1.0,  # multiplier on the credit-score noise sd
}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    n: int | None = None
    seed: int = 0
    noise: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise DataError(f"unknown scenario {self.name!r}; expected one of {SCENARIOS}")
        if self.n is None:
            object.__setattr__(self, "n", DEFAULT_N[self.name])
        if self.noise is None:
            object.__setattr__(self, "noise", DEFAULT_NOISE[self.name])
        if self.noise < 0:
            raise DataError("noise must be >= 0")
        if self.n < MIN_N[self.name]:
            raise DataError(f"scenario {self.name} needs n >= {MIN_N[self.name]}, got {self.n}")


def _stream(cfg: ScenarioConfig, column: str) -> Stream:
    return Stream(cfg.seed, f"{cfg.name}/{column}")


def allocate(n: int, shares) -> np.ndarray:
    """Integer counts summing to ``n`` in proportion to ``shares`` (largest remainder)."""
    shares = np.asarray(shares, dtype=float)
    raw = n * shares / shares.sum()
    counts = np.floor(raw).astype(np.int64)
    short = n - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def _exact_labels(stream: Stream, n: int, shares) -> np.ndarray:
    """Category indices with exact counts, in a seeded random order."""
    counts = allocate(n, shares)
    labels = np.repeat(np.arange(len(counts)), counts)
    return labels[stream.permutation(n)]


def _flip_exact(stream: Stream, mask: np.ndarray, share: float) -> np.ndarray:
    """Boolean array marking floor(share * |mask|) randomly chosen rows inside ``mask``."""
    idx = np.flatnonzero(mask)
    k = int(np.floor(share * len(idx) + 1e-9))
    out = np.zeros(len(mask), dtype=bool)
    if k:
        chosen = idx[stream.permutation(len(idx))[:k]]
        out[chosen] = True
    return out


def generate(cfg: ScenarioConfig) -> Dataset:
    return GENERATORS[cfg.name](cfg)


# --------------------------------------------------------------------------- lending


def gen_marital_lending(cfg: ScenarioConfig) -> Dataset:
    """Two proxies that are copies of marital status up to random flips.

    Default depends on marital status alone (5% married, 20% divorced). At
    noise 0 both proxies are exact functions of marital status.
    """
    n = cfg.n
    flip = min(cfg.noise, 1.0)
    marital = _stream(cfg, "marital_status").bernoulli(0.4, n)
    name_flip = _stream(cfg, "name_change").bernoulli(flip, n)
    joint_flip = _stream(cfg, "joint_accounts").bernoulli(flip, n)
    name_change = marital ^ name_flip
    joint_accounts = 2.0 * (1 - (marital ^ joint_flip))
    p_default = np.where(marital == 1, 0.20, 0.05)
    default = (_stream(cfg, "default").uniform(n) < p_default).astype(float)
    schema = (
        ColumnSchema("marital_status", "binary", "protected", ("married", "divorced")),
        ColumnSchema("name_change", "binary", "predictor", ("no", "yes")),
        ColumnSchema("joint_accounts", "continuous", "predictor"),
        ColumnSchema("default", "binary", "outcome", ("repaid", "defaulted")),
    )
    return Dataset(
        schema,
        {"marital_status": marital, "name_change": name_change, "joint_accounts": joint_accounts, "default": default},
    )


# --------------------------------------------------------------------------- accent

ACCENTS = ("general_american", "southern", "northeastern", "spanish", "mandarin", "other_foreign")
FOREIGN_ACCENTS = ("spanish", "mandarin", "other_foreign")
# 2.25% of rows carry a foreign accent: with 5% exceptions this gives a
# McFadden R² of about 0.22 for origin ~ accent.
ACCENT_SHARES = (0.50, 0.25, 0.2275, 0.0075, 0.0075, 0.0075)


def gen_accent_origin(cfg: ScenarioConfig) -> Dataset:
    """Accent type and national origin.

    Within every accent category exactly ``noise`` (default 5%) of rows have
    the origin the accent does not suggest, so the accent -> origin majority
    map is right 95% of the time. Native-sounding accents are spread over
    three regional categories, so origin -> accent is a much weaker map.
    ``admitted`` (the fixture's decision outcome) penalises foreign accents.
    """
    n = cfg.n
    share = min(cfg.noise, 1.0)
    accent_idx = _exact_labels(_stream(cfg, "accent"), n, ACCENT_SHARES)
    accent = np.array(ACCENTS)[accent_idx]
    foreign_accent = np.isin(accent, FOREIGN_ACCENTS)
    exc = _stream(cfg, "national_origin")
    flipped = np.zeros(n, dtype=bool)
    for a in ACCENTS:
        flipped |= _flip_exact(Stream(exc.seed, f"{exc.key}/{a}"), accent == a, share)
    origin = (foreign_accent ^ flipped).astype(float)
    p_admit = np.where(foreign_accent, 0.2, 0.5)
    admitted = (_stream(cfg, "admitted").uniform(n) < p_admit).astype(float)
    schema = (
        ColumnSchema("accent", "categorical", "predictor", ACCENTS),
        ColumnSchema("national_origin", "binary", "protected", ("native", "foreign")),
        ColumnSchema("admitted", "binary", "outcome", ("rejected", "admitted")),
    )
    return Dataset(schema, {"accent": accent, "national_origin": origin, "admitted": admitted})


# --------------------------------------------------------------------------- admissions

RACES = ("asian", "black", "hispanic", "white")
RACE_SHARES = (0.10, 0.20, 0.20, 0.50)
RACE_SAT_SHIFT = {"asian": 40.0, "black": -60.0, "hispanic": -40.0, "white": 10.0}
RACE_GPA_SHIFT = {"asian": 0.10, "black": -0.15, "hispanic": -0.10, "white": 0.03}


def gen_segregated_school(cfg: ScenarioConfig) -> Dataset:
    """High schools, a fixed share of whose students attend single-race schools.

    ``params["segregated_share"]`` (default 0.20) of rows, rounded to a whole
    number, attend segregated schools of about 50 students each; the rest are
    spread over 20 mixed schools. Admission depends only on SAT and GPA, which
    are race-correlated.
    """
    n = cfg.n
    seg_share = float(cfg.params.get("segregated_share", 0.20))
    n_mixed_schools = int(cfg.params.get("mixed_schools", 20))
    if not 0.0 <= seg_share < 1.0:
        raise DataError("segregated_share must lie in [0, 1)")
    m = int(np.floor(seg_share * n + 0.5))
    n_seg_schools = max(1, int(round(m / 50))) if m else 0
    seg_names = [f"seg_{i + 1:02d}" for i in range(n_seg_schools)]
    mix_names = [f"mix_{i + 1:02d}" for i in range(n_mixed_schools)]

    order = _stream(cfg, "high_school/rows").permutation(n)
    school = np.empty(n, dtype=object)
    race = np.empty(n, dtype=object)
    seg_rows, mix_rows = order[:m], order[m:]

    if m:
        seg_school = np.array(seg_names)[_exact_labels(_stream(cfg, "high_school/seg"), m, np.ones(n_seg_schools))]
        school_race = np.array(RACES)[_stream(cfg, "race/seg_school").choice(RACE_SHARES, n_seg_schools)]
        race_of = dict(zip(seg_names, school_race))
        school[seg_rows] = seg_school
        race[seg_rows] = [race_of[s] for s in seg_school]
        if cfg.noise > 0:
            swap = _flip_exact(_stream(cfg, "race/seg_noise"), np.ones(m, dtype=bool), min(cfg.noise, 1.0))
            other = np.array(RACES)[_stream(cfg, "race/seg_other").choice(RACE_SHARES, m)]
            race[seg_rows[swap]] = other[swap]
    k = n - m
    school[mix_rows] = np.array(mix_names)[_exact_labels(_stream(cfg, "high_school/mix"), k, np.ones(n_mixed_schools))]
    race[mix_rows] = np.array(RACES)[_stream(cfg, "race/mix").choice(RACE_SHARES, k)]

    race = race.astype(str)
    sat_shift = np.array([RACE_SAT_SHIFT[r] for r in race])
    gpa_shift = np.array([RACE_GPA_SHIFT[r] for r in race])
    sat = np.clip(np.round(1050 + sat_shift + 150 * _stream(cfg, "sat").normal(n)), 400, 1600)
    gpa = np.clip(np.round(3.1 + gpa_shift + 0.4 * _stream(cfg, "gpa").normal(n), 2), 0.0, 4.0)
    logit = 1.6 * (sat - 1050) / 150 + 1.2 * (gpa - 3.1) / 0.4
    admit = (_stream(cfg, "admit").uniform(n) < 1 / (1 + np.exp(-logit))).astype(float)
    schema = (
        ColumnSchema("race", "categorical", "protected", RACES),
        ColumnSchema("high_school", "categorical", "predictor", tuple(seg_names + mix_names)),
        ColumnSchema("sat", "continuous", "predictor"),
        ColumnSchema("gpa", "continuous", "predictor"),
        ColumnSchema("admit", "binary", "outcome", ("rejected", "admitted")),
    )
    return Dataset(schema, {"race": race, "high_school": school.astype(str), "sat": sat, "gpa": gpa, "admit": admit})


# --------------------------------------------------------------------------- hiring

MAJORS = ("stem", "business", "humanities")
MAJOR_SHARES = {"male": (0.5, 0.3, 0.2), "female": (0.2, 0.3, 0.5)}
MAJOR_EFFECT = {"stem": 0.9, "business": 0.45, "humanities": 0.0}
HIRING_SKILL_WEIGHTS = (1.0, 0.6)
HIRING_NOISE_SD = 1.0


def _normal_grid(m: int) -> np.ndarray:
    from scipy.special import ndtri

    return ndtri((np.arange(m) + 0.5) / m)


def _interleave(stream: Stream, counts) -> np.ndarray:
    """Label sequence in which every label is spread evenly, with seeded offsets."""
    offsets = stream.uniform(len(counts))
    keys = np.concatenate([(np.arange(c) + offsets[i]) / c for i, c in enumerate(counts)])
    labels = np.repeat(np.arange(len(counts)), counts)
    return labels[np.argsort(keys, kind="stable")]


def gen_hiring_major(cfg: ScenarioConfig) -> Dataset:
    """Applicants with a sex-correlated undergraduate major and two skill scores.

    Men and women receive the same multiset of skill pairs (normal quantiles in
    seeded random pairing), so a skills-only ranking is sex-balanced. Majors are
    spread evenly along each sex's skill ranking, which keeps major independent
    of skill. Profit (mean 200) rewards skills and, mildly, a STEM or business
    major; a model that uses major tilts top selections toward men.
    """
    n = cfg.n
    m = n // 2
    grid = _normal_grid(m)
    pair1 = grid[_stream(cfg, "skill_technical").permutation(m)]
    pair2 = grid[_stream(cfg, "skill_teamwork").permutation(m)]
    w1, w2 = HIRING_SKILL_WEIGHTS
    sex = np.empty(n, dtype=object)
    major = np.empty(n, dtype=object)
    skill1 = np.empty(n)
    skill2 = np.empty(n)
    order = _stream(cfg, "sex").permutation(n)
    halves = {"male": order[:m], "female": order[m : 2 * m]}
    rank = np.argsort(-(w1 * pair1 + w2 * pair2), kind="stable")
    for s, rows in halves.items():
        sex[rows] = s
        skill1[rows] = pair1
        skill2[rows] = pair2
        labels = _interleave(_stream(cfg, f"undergrad_major/{s}"), allocate(m, MAJOR_SHARES[s]))
        major[rows[rank]] = np.array(MAJORS)[labels]
    if n % 2:
        last = order[-1]
        sex[last] = "female"
        major[last] = MAJORS[int(_stream(cfg, "undergrad_major/odd").choice(MAJOR_SHARES["female"], 1)[0])]
        skill1[last], skill2[last] = _stream(cfg, "skill/odd").normal(2)
    effect = np.array([MAJOR_EFFECT[mj] for mj in major])
    signal = w1 * skill1 + w2 * skill2 + effect
    eps = cfg.noise * HIRING_NOISE_SD * _stream(cfg, "profit").normal(n)
    profit = 200.0 + signal - signal.mean() + eps
    schema = (
        ColumnSchema("sex", "categorical", "protected", ("female", "male")),
        ColumnSchema("undergrad_major", "categorical", "predictor", MAJORS),
        ColumnSchema("skill_technical", "continuous", "predictor"),
        ColumnSchema("skill_teamwork", "continuous", "predictor"),
        ColumnSchema("profit", "continuous", "outcome"),
    )
    return Dataset(
        schema,
        {
            "sex": sex.astype(str),
            "undergrad_major": major.astype(str),
            "skill_technical": np.round(skill1, 12),
            "skill_teamwork": np.round(skill2, 12),
            "profit": profit,
        },
    )


def select_top(m: FittedModel, d: Dataset, k: int) -> np.ndarray:
    """Row indices of the ``k`` highest predictions (ties by row order)."""
    scores = predict(m, d)
    return np.sort(np.argsort(-scores, kind="stable")[:k])


# --------------------------------------------------------------------------- footprint

FOOTPRINT_RACES = ("asian", "white", "other", "hispanic", "black")
FOOTPRINT_RACE_SHARES = (0.06, 0.60, 0.04, 0.18, 0.12)
CREDIT_MEANS = {"asian": 745.0, "white": 734.0, "other": 732.0, "hispanic": 701.0, "black": 677.0}
INCOME_MEANS = {"asian": 88.0, "white": 80.0, "other": 70.0, "hispanic": 58.0, "black": 54.0}
# device and e-mail choice lean on race beyond income (unobserved mediators)
DEVICE_RACE_TILT = {"asian": -1.2, "white": -0.9, "other": 0.0, "hispanic": 1.8, "black": 2.7}
DEVICES = ("desktop", "tablet", "mobile")
DEVICE_DEFAULT_RATES = {"desktop": 0.0074, "tablet": 0.0091, "mobile": 0.0214}
EMAIL_HOSTS = ("paid", "free", "free_legacy")
# Footprint features deliberately left out of the generator; hooks for later work.
FOOTPRINT_EXTENSION_POINTS = (
    "device level 'not_tracked'",
    "operating_system",
    "email_host split into individual providers plus an affluent tier",
    "acquisition_channel (advertisement vs typed address)",
    "request_hour",
    "interaction features such as operating_system x request_hour",
)
EMAIL_TILT = 3.0
EMAIL_MULTIPLIER = {"paid": 0.2, "free": 1.0, "free_legacy": 4.0}


def gen_digital_footprint(cfg: ScenarioConfig) -> Dataset:
    """Device, e-mail host, income, credit score, age and loan default.

    Default probability is the device's target rate times an e-mail-host
    multiplier renormalised within each device, so every device's expected
    default rate equals its target exactly. Race shapes income, credit score
    (group means 745/734/732/701/677) and device choice, but not default
    directly: a footprint model already carries the race-linked signal, while
    a credit-score model leaves it for race to pick up.
    """
    n = cfg.n
    race = np.array(FOOTPRINT_RACES)[_exact_labels(_stream(cfg, "race"), n, FOOTPRINT_RACE_SHARES)]
    inc_mean = np.array([INCOME_MEANS[r] for r in race])
    income = np.round(np.maximum(8.0, inc_mean * np.exp(0.35 * _stream(cfg, "income").normal(n))), 3)
    z_income = (np.log(income) - np.log(70.0)) / 0.4
    tilt = np.array([DEVICE_RACE_TILT[r] for r in race])
    # multinomial-logit device choice: desktop baseline, mobile rises as income falls
    u_tab = 0.2 - 0.3 * z_income + 0.3 * tilt
    u_mob = 0.3 - 0.8 * z_income + 1.0 * tilt
    util = np.column_stack([np.zeros(n), u_tab, u_mob])
    probs = np.exp(util - util.max(axis=1, keepdims=True))
    device = np.array(DEVICES)[_stream(cfg, "device").choice(probs, n)]
    e_util = np.column_stack([0.6 * z_income, np.zeros(n), -0.4 * z_income + EMAIL_TILT * tilt])
    e_probs = np.exp(e_util - e_util.max(axis=1, keepdims=True))
    email = np.array(EMAIL_HOSTS)[_stream(cfg, "email_host").choice(e_probs, n)]
    credit = np.array([CREDIT_MEANS[r] for r in race]) + 8.0 * z_income
    credit = np.clip(np.round(credit + cfg.noise * 55.0 * _stream(cfg, "credit_score").normal(n)), 300, 850)
    age = np.round(21 + 49 * _stream(cfg, "age").uniform(n))

    mult = np.array([EMAIL_MULTIPLIER[e] for e in email])
    p = np.empty(n)
    for dev in DEVICES:
        rows = device == dev
        if rows.any():
            p[rows] = DEVICE_DEFAULT_RATES[dev] * mult[rows] / mult[rows].mean()
    default = (_stream(cfg, "default").uniform(n) < np.minimum(p, 1.0)).astype(float)
    schema = (
        ColumnSchema("race", "categorical", "protected", FOOTPRINT_RACES),
        ColumnSchema("device", "categorical", "predictor", DEVICES),
        ColumnSchema("email_host", "categorical", "predictor", EMAIL_HOSTS),
        ColumnSchema("income", "continuous", "predictor"),
        ColumnSchema("credit_score", "continuous", "predictor"),
        ColumnSchema("age", "continuous", "predictor"),
        ColumnSchema("default", "binary", "outcome", ("repaid", "defaulted")),
    )
    return Dataset(
        schema,
        {
            "race": race,
            "device": device,
            "email_host": email,
            "income": income,
            "credit_score": credit,
            "age": age,
            "default": default,
        },
    )


GENERATORS = {
    "marital_lending": gen_marital_lending,
    "accent_origin": gen_accent_origin,
    "segregated_school": gen_segregated_school,
    "hiring_major": gen_hiring_major,
    "digital_footprint": gen_digital_footprint,
}
