import math

import numpy as np
import pytest
from scipy import stats

from rlncdtn.mobility import (ContactTrace, MobilityConfig, TraceFormatError, generate_trace,
                              iter_contacts, load_trace, save_trace)


def test_config_validation():
    for bad in [(1, 1.0, 1.0), (3, 0.0, 1.0), (3, 1.0, -1.0)]:
        with pytest.raises(ValueError):
            MobilityConfig(*bad)
    cfg = MobilityConfig(100, 0.005, 10.0)
    assert cfg.aggregate_rate == pytest.approx(24.75)


def test_two_nodes_gaps_are_exponential():
    lam = 0.5
    tr = generate_trace(MobilityConfig(2, lam, 25_000.0, seed=1))
    gaps = np.diff(np.concatenate([[0.0], tr.times]))
    assert len(gaps) >= 10_000
    se = (1 / lam) / math.sqrt(len(gaps))
    assert abs(gaps.mean() - 1 / lam) < 3 * se
    assert stats.kstest(gaps, "expon", args=(0, 1 / lam)).pvalue > 0.01


@pytest.mark.parametrize("n", [2, 10])
def test_per_pair_gaps_pass_ks(n):
    lam = 1.0
    tr = generate_trace(MobilityConfig(n, lam, 1100.0, seed=n))
    pairs = n * (n - 1) // 2
    for i in range(n):
        for j in range(i + 1, n):
            t = tr.times[(tr.a == i) & (tr.b == j)]
            gaps = np.diff(np.concatenate([[0.0], t]))
            assert len(gaps) >= 1000
            # Bonferroni over the pairs keeps the family-wise level at 0.01
            assert stats.kstest(gaps, "expon", args=(0, 1 / lam)).pvalue > 0.01 / pairs


def test_pair_selection_uniform_chi_square():
    n = 10
    cfg = MobilityConfig(n, 1.0, 100_000 / 45 * 1.02, seed=3)
    tr = generate_trace(cfg)
    assert len(tr) >= 100_000
    idx = tr.a * n + tr.b
    counts = np.bincount(idx, minlength=n * n)
    obs = np.array([counts[i * n + j] for i in range(n) for j in range(i + 1, n)])
    assert stats.chisquare(obs).pvalue > 0.01


def test_aggregate_rate_reference_setting():
    cfg = MobilityConfig(100, 0.005, 2000.0, seed=4)
    tr = generate_trace(cfg)
    rate = len(tr) / cfg.horizon
    assert abs(rate - 24.75) < 3 * math.sqrt(24.75 / cfg.horizon)


def test_trace_invariants_and_determinism():
    cfg = MobilityConfig(7, 0.3, 200.0, seed=9)
    t1, t2 = generate_trace(cfg), generate_trace(cfg)
    assert t1 == t2
    assert np.all(np.diff(t1.times) > 0)
    assert np.all(t1.a < t1.b) and t1.b.max() < 7 and t1.times.max() <= 200.0
    assert generate_trace(MobilityConfig(7, 0.3, 200.0, seed=10)) != t1


def test_stream_matches_rate():
    rng = np.random.default_rng(0)
    ev = []
    for e in iter_contacts(5, 2.0, rng):
        if e.time > 500:
            break
        ev.append(e)
    assert abs(len(ev) / 500 - 20.0) < 3 * math.sqrt(20.0 / 500)
    assert all(e.a != e.b for e in ev)


def test_round_trip(tmp_path):
    tr = generate_trace(MobilityConfig(6, 0.2, 100.0, seed=2))
    path = tmp_path / "t.txt"
    save_trace(tr, path, comments=["hello"])
    assert load_trace(path) == tr


def test_external_non_exponential_trace(tmp_path):
    path = tmp_path / "ext.txt"
    path.write_text("# regular schedule\nN=3\nlambda=1\nhorizon=10\n"
                    "1 0 1\n2 1 2\n2 0 2\n3 0 1\n")
    tr = load_trace(path)
    assert len(tr) == 4 and tr.config.seed is None
    assert tr[2] == (2.0, 0, 2)


@pytest.mark.parametrize("body,line", [
    ("N=3\nlambda=1\nhorizon=10\n1 0 1\nbad line here\n", 5),
    ("N=3\nlambda=1\nhorizon=10\n1 0 3\n", 4),
    ("N=3\nlambda=1\nhorizon=10\n2 0 1\n1 0 2\n", 5),
    ("N=3\nlambda=x\n", 2),
    ("N=3\nlambda=1\nhorizon=10\n1 1 1\n", 4),
    ("1 0 1\n", 1),
])
def test_parse_errors_name_line(tmp_path, body, line):
    path = tmp_path / "bad.txt"
    path.write_text(body)
    with pytest.raises(TraceFormatError) as exc:
        load_trace(path)
    assert exc.value.lineno == line
    assert f":{line}:" in str(exc.value)


def test_missing_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("N=3\nhorizon=10\n")
    with pytest.raises(TraceFormatError, match="lambda"):
        load_trace(path)


def test_columns_and_iteration():
    tr = ContactTrace(MobilityConfig(3, 1.0, 5.0), [1.0, 2.0], [0, 1], [1, 2])
    assert tr.events == [(1.0, 0, 1), (2.0, 1, 2)]
    assert tr.columns() == ([1.0, 2.0], [0, 1], [1, 2])
