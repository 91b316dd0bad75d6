"""One test per acceptance criterion; each prints a PASS/FAIL line with the measured values."""

from __future__ import annotations

import itertools
import subprocess
import sys
from pathlib import Path

import numpy as np
from conftest import make_dataset
from fixtures import cumulative_r2_fixture
from oracles import fisher_enumerate, grid_search_mle, normal_equations

from proxyaudit.data import encode_design
from proxyaudit.glm import ModelSpec, fit, fit_logistic, fit_ols, predict
from proxyaudit.proxy import detect_substitute, semi_partial_r2, variable_importance
from proxyaudit.rules import Policy, capped_rule, compare_min_proxy_power
from proxyaudit.scenarios import DEVICE_DEFAULT_RATES, ScenarioConfig, generate, select_top
from proxyaudit.stats import fisher_exact_p, selection_rate_ratio


def check(number: int, title: str, ok: bool, detail: str) -> None:
    print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
    assert ok, detail


def test_criterion_01_lending_collapse():
    d = generate(ScenarioConfig("marital_lending", n=5000, seed=42, noise=0.0))
    full = ModelSpec("all", "logistic", "default", ("name_change", "joint_accounts", "marital_status"))
    dd = d.with_roles(marital_status="predictor")
    imp = {v: variable_importance(dd, full, v) for v in ("name_change", "joint_accounts")}
    sp = semi_partial_r2(d, ModelSpec("proxies", "logistic", "default", ("name_change", "joint_accounts")), ["marital_status"])
    ok = all(v < 0.01 for v in imp.values()) and sp < 0.01
    check(1, "proxy importance and semi-partial < 0.01", ok, f"importance={imp} semi_partial={sp:.3g}")


def test_criterion_02_accent_calibration():
    d = generate(ScenarioConfig("accent_origin", n=20000))
    fwd = detect_substitute(d, "accent", "national_origin").forward_rate
    m = fit(d.with_roles(national_origin="outcome", admitted="ignored"), ModelSpec("a", "logistic", "national_origin", ("accent",)))
    ok = abs(fwd - 0.95) <= 0.01 and abs(m.mcfadden_r2 - 0.22) <= 0.03
    check(2, "forward 0.95 +/- 0.01, McFadden 0.22 +/- 0.03", ok, f"forward={fwd:.4f} mcfadden={m.mcfadden_r2:.4f}")


def test_criterion_03_segregated_school():
    base = detect_substitute(generate(ScenarioConfig("segregated_school")), "high_school", "race").affected_fraction
    edge_data = generate(ScenarioConfig("segregated_school", n=40000, params={"segregated_share": 100 / 40000}))
    edge = detect_substitute(edge_data, "high_school", "race").affected_fraction
    ok = abs(base - 0.20) <= 0.02 and abs(edge - 0.0025) <= 1e-4
    check(3, "affected fraction 0.20 and 0.0025", ok, f"default={base:.4f} edge={edge:.5f}")


def test_criterion_04_cumulative_r2():
    d = cumulative_r2_fixture()
    spec = ModelSpec("x", "ols", "y", ("x",))
    base = fit(d, spec).r_squared
    sp = semi_partial_r2(d, spec, ["race"])
    ok = abs(sp - 0.05) <= 1e-6 and abs(base - 0.65) <= 1e-6
    check(4, "semi-partial 0.05 +/- 1e-6", ok, f"base={base:.9f} semi_partial={sp:.9f}")


def test_criterion_05_capped_rule():
    pol = Policy(cap=0.05)
    v1 = capped_rule([("m1", 0.04), ("m2", 0.06)], pol)
    v2 = capped_rule([("m1", 0.03), ("m2", 0.04)], pol)
    flagged = {x["model_id"] for x in v1.violations}
    ok = v1.winner == "m1" and flagged == {"m2"} and v2.winner == "tie" and not v2.violations
    check(5, "capped decisions", ok, f"(0.04,0.06)->{v1.winner} flagged={sorted(flagged)}; (0.03,0.04)->{v2.winner}")


def test_criterion_06_four_fifths():
    selected = np.array([1] * 8 + [0] * 2 + [1] * 2 + [0] * 8)
    group = np.array(["a"] * 10 + ["b"] * 10)
    r = selection_rate_ratio(selected, group)
    check(6, "ratio of 0.20 to 0.80", r == 0.25, f"ratio={r!r}")


def test_criterion_07_hiring_shift():
    d = generate(ScenarioConfig("hiring_major"))
    w = fit(d, ModelSpec("with_major", "ols", "profit", ("undergrad_major", "skill_technical", "skill_teamwork")))
    o = fit(d, ModelSpec("without", "ols", "profit", ("skill_technical", "skill_teamwork")))
    tw, to = select_top(w, d, 100), select_top(o, d, 100)
    mw, mo = (d["sex"][tw] == "male").mean(), (d["sex"][to] == "male").mean()
    pw, po = predict(w, d)[tw].sum(), predict(o, d)[to].sum()
    gap = abs(pw - po) / po
    ok = abs(mw - 0.60) <= 0.05 and abs(mo - 0.50) <= 0.05 and gap < 0.01
    check(7, "male share 0.60/0.50, profit gap < 1%", ok, f"with={mw:.2f} without={mo:.2f} profit_gap={gap:.4%}")


def test_criterion_08_footprint():
    d = generate(ScenarioConfig("digital_footprint", n=100000))
    rates = {dev: float(d["default"][d["device"] == dev].mean()) for dev in DEVICE_DEFAULT_RATES}
    rates_ok = all(abs(rates[k] - t) <= 0.003 for k, t in DEVICE_DEFAULT_RATES.items())
    specs = [
        ModelSpec("credit", "logistic", "default", ("credit_score", "income", "age")),
        ModelSpec("footprint", "logistic", "default", ("device", "email_host", "income", "age")),
    ]
    v = compare_min_proxy_power(d, specs, Policy(protected=("race",)))
    ok = rates_ok and v.winner == "footprint"
    shown = {k: round(r, 4) for k, r in rates.items()}
    check(8, "device rates within 0.3pp, footprint preferred", ok, f"rates={shown} winner={v.winner} proxy_gap={v.margins['proxy_gap']:.4f}")


def _ols_fixtures():
    g = np.random.default_rng(7)
    for k in range(1, 8):
        X = g.normal(size=(30, k))
        y = X @ g.normal(size=k) + g.normal(size=30)
        cols = [(f"x{j}", "continuous", "predictor", X[:, j]) for j in range(k)]
        yield make_dataset(*cols, ("y", "continuous", "outcome", y)), tuple(f"x{j}" for j in range(k))


def test_criterion_09_numerical_oracles():
    ols_err = 0.0
    for d, preds in _ols_fixtures():
        spec = ModelSpec("m", "ols", "y", preds)
        exact = np.array([float(b) for b in normal_equations(encode_design(d, preds).X, d["y"])])
        ols_err = max(ols_err, float(np.max(np.abs(fit_ols(d, spec).beta() - exact))))
    x8, y8 = np.arange(8.0), [0, 0, 1, 0, 1, 0, 1, 1]
    d8 = make_dataset(("x", "continuous", "predictor", x8), ("y", "binary", "outcome", y8))
    m = fit_logistic(d8, ModelSpec("m", "logistic", "y", ("x",)))
    oracle = grid_search_mle(np.column_stack([np.ones(8), x8]), y8)
    log_err = float(np.max(np.abs(m.beta() - oracle)))
    mismatches = 0
    for n in range(1, 31):
        for a, b, c in itertools.product(range(n + 1), repeat=3):
            if n - a - b - c >= 0:
                t = [[a, b], [c, n - a - b - c]]
                mismatches += fisher_exact_p(t) != fisher_enumerate(t)
    ok = ols_err <= 1e-8 and log_err <= 1e-3 and mismatches == 0
    check(9, "OLS 1e-8, logistic 1e-3, Fisher exact", ok, f"ols_err={ols_err:.2e} logistic_err={log_err:.2e} fisher_mismatches={mismatches}")


def test_criterion_10_property_suites():
    path = Path(__file__).with_name("test_properties.py")
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(path)], capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()
    check(10, "property suites", proc.returncode == 0, summary)
