"""Synthetic benchmark generators and their population oracles."""

import json

import numpy as np
import pytest
from scipy import stats

from dynavine import benchgen as bg
from dynavine.errors import ConfigError, DataError
from dynavine.numkernel import normal_cdf

_CACHE = {}


def scenario(name, seed=bg.BENCHMARK_SEED):
    key = (name, seed)
    if key not in _CACHE:
        _CACHE[key] = bg.generate(name, seed)
    return _CACHE[key]


def pairwise_corr(x):
    c = np.corrcoef(x, rowvar=False)
    return c[np.triu_indices_from(c, k=1)]


# ---------------------------------------------------------------------------
# dispatch and determinism


def test_unknown_scenario_rejected():
    with pytest.raises(ConfigError):
        bg.generate("nope")


def test_scenario_table_matches_generators():
    assert set(bg.SCENARIOS) == set(bg.GENERATORS)


def test_same_seed_is_byte_identical():
    a, _ = bg.gen_tail_switch(7)
    b, _ = bg.gen_tail_switch(7)
    for wa, wb in zip(a.windows, b.windows):
        assert wa.tobytes() == wb.tobytes()


def test_seed_changes_data_but_not_schedule():
    a, ta = scenario("tail_switch")
    b, tb = bg.gen_tail_switch(bg.BENCHMARK_SEED + 1)
    assert ta.schedule == tb.schedule
    assert ta.labels == tb.labels
    assert not np.array_equal(a.windows[0], b.windows[0])


# ---------------------------------------------------------------------------
# tail_df


def test_tail_df_dimensions():
    data, truth = scenario("tail_df")
    assert (data.spec.d, data.spec.T, data.spec.n_per_window) == (5, 24, 250)
    assert all(w.shape == (250, 5) for w in data.windows)
    assert truth.labels == ["t3"] * 12 + ["t30"] * 12


def test_tail_df_correlation_level():
    data, _ = scenario("tail_df")
    for half in (data.windows[:12], data.windows[12:]):
        pooled = np.vstack(half)
        # rank correlation is stable under the heavy t3 tails; convert
        # Kendall tau to the Pearson rho of the latent Gaussian scale
        taus = []
        d = pooled.shape[1]
        for i in range(d):
            for j in range(i + 1, d):
                taus.append(stats.kendalltau(pooled[:, i], pooled[:, j])[0])
        rho = np.sin(0.5 * np.pi * np.asarray(taus))
        assert np.all(np.abs(rho - 0.6) < 0.08)


def co_exceedance_rate(w, q=0.05):
    lo = np.quantile(w, q, axis=0)
    d = w.shape[1]
    hits = []
    for i in range(d):
        for j in range(i + 1, d):
            hits.append(np.mean((w[:, i] < lo[i]) & (w[:, j] < lo[j])))
    return float(np.mean(hits))


def test_tail_df_co_exceedance_drops_with_df():
    data, _ = scenario("tail_df")
    rates = np.array([co_exceedance_rate(w) for w in data.windows])
    mid = 0.5 * (rates[:12].mean() + rates[12:].mean())
    correct = int(np.sum(rates[:12] > mid) + np.sum(rates[12:] < mid))
    assert correct >= 20
    assert rates[:12].mean() > rates[12:].mean()


# ---------------------------------------------------------------------------
# tail_switch


def test_tail_switch_thetas():
    _, truth = scenario("tail_switch")
    data, _ = scenario("tail_switch")
    assert data.spec.params["clayton_theta"] == pytest.approx(4.0 / 3.0, abs=1e-12)
    assert data.spec.params["gumbel_theta"] == pytest.approx(5.0 / 3.0, abs=1e-12)
    assert truth.labels == ["clayton"] * 12 + ["gumbel"] * 12


def test_tail_switch_tau_level_every_window():
    # per window, averaged over the four star edges; a single edge at
    # N_t=250 has sampling SD ~0.04, so only the window mean supports a
    # 0.06 band across all 24 windows
    data, _ = scenario("tail_switch")
    for w in data.windows:
        taus = [stats.kendalltau(w[:, 0], w[:, leaf])[0] for leaf in range(1, 5)]
        assert abs(np.mean(taus) - 0.4) < 0.06
        assert np.max(np.abs(np.asarray(taus) - 0.4)) < 0.12


def test_tail_switch_tail_asymmetry_flips():
    data, _ = scenario("tail_switch")

    def tail_rates(w):
        lower = co_exceedance_rate(w, 0.05)
        upper = co_exceedance_rate(-w, 0.05)
        return lower, upper

    first = np.array([tail_rates(w) for w in data.windows[:12]]).mean(axis=0)
    second = np.array([tail_rates(w) for w in data.windows[12:]]).mean(axis=0)
    assert first[0] > second[0]      # lower-tail co-exceedance drops
    assert second[1] > first[1]      # upper-tail co-exceedance rises


def test_tail_switch_marginals_are_standard_normal():
    data, _ = scenario("tail_switch")
    pooled = np.vstack(data.windows)
    for j in range(pooled.shape[1]):
        assert stats.kstest(pooled[:, j], "norm").pvalue > 0.001


# ---------------------------------------------------------------------------
# hub_switch


def test_hub_switch_hub_moves_at_t12():
    data, truth = scenario("hub_switch")
    assert truth.labels == ["hub0"] * 12 + ["hub1"] * 12
    for half, hub in ((data.windows[:12], 0), (data.windows[12:], 1)):
        c = np.corrcoef(np.vstack(half), rowvar=False)
        spokes = [c[hub, j] for j in range(8) if j != hub]
        assert np.all(np.abs(np.asarray(spokes) - 0.7) < 0.05)
        others = [c[i, j] for i in range(8) for j in range(i + 1, 8)
                  if hub not in (i, j)]
        assert np.all(np.abs(np.asarray(others) - 0.49) < 0.05)


# ---------------------------------------------------------------------------
# agent_episodes


def test_agent_schedule_lengths():
    assert sum(bg.AGENT_SEGMENT_LENGTHS) == 48
    assert len(bg.AGENT_SEGMENT_LENGTHS) == len(bg.AGENT_SCHEDULE_TYPES) == 11
    _, truth = scenario("agent_episodes")
    assert len(truth.labels) == 48
    starts = [seg["start"] for seg in truth.schedule]
    assert starts == list(np.cumsum((0,) + bg.AGENT_SEGMENT_LENGTHS[:-1]))
    for seg in truth.schedule:
        for t in range(seg["start"], seg["start"] + seg["length"]):
            assert truth.labels[t] == seg["type"]


def test_agent_episode_signatures():
    data, truth = scenario("agent_episodes")
    by_label = {}
    for w, lab in zip(data.windows, truth.labels):
        by_label.setdefault(lab, []).append(w)
    pooled = {k: np.vstack(v) for k, v in by_label.items()}

    indep = np.abs(pairwise_corr(pooled["independence"]))
    assert indep.max() < 0.05

    pair_corr = np.corrcoef(pooled["pairwise"], rowvar=False)[0, 1]
    assert abs(pair_corr - 0.7) < 0.05

    higher = pooled["higher"]
    assert abs(np.corrcoef(higher, rowvar=False)[0, 1]) < 0.05   # pair stays off
    tau02 = stats.kendalltau(higher[:, 0], higher[:, 2])[0]
    assert abs(tau02 - 2.0 / np.pi * np.arcsin(0.5)) < 0.05

    mixed = pooled["mixed"]
    assert abs(np.corrcoef(mixed, rowvar=False)[0, 1] - 0.7) < 0.05


# ---------------------------------------------------------------------------
# xor_stress


def test_xor_near_zero_correlation_each_window():
    data, truth = scenario("xor_stress")
    assert truth.labels == ["independent"] * 4 + ["xor"] * 4
    for w in data.windows:
        assert np.max(np.abs(pairwise_corr(w))) < 0.05


def test_xor_third_coordinate_is_deterministic():
    data, _ = scenario("xor_stress")
    for w in data.windows[4:]:
        u = normal_cdf(w[:, 0])
        v = normal_cdf(w[:, 1])
        got = normal_cdf(w[:, 2])
        want = np.mod(u + v, 1.0)
        err = np.abs(got - want)
        circ = np.minimum(err, 1.0 - err)
        assert np.quantile(circ, 0.99) < 0.02


# ---------------------------------------------------------------------------
# mult_triplet and showcase


def test_mult_triplet_shape_and_scores():
    data, truth = scenario("mult_triplet")
    assert (data.spec.d, data.spec.T, data.spec.n_per_window) == (3, 1, 6000)
    w = data.windows[0]
    for j in range(3):
        assert stats.kstest(w[:, j], "norm").pvalue > 0.001
    assert set(truth.oracle) >= {"tc", "pair", "higher"}


def test_mult_triplet_oracle_is_additive():
    _, truth = scenario("mult_triplet")
    tc = truth.oracle["tc"][0]
    pair = truth.oracle["pair"][0]
    higher = truth.oracle["higher"][0]
    assert tc > 0 and pair > 0 and higher > 0
    assert abs(tc - pair - higher) < 0.02


def test_showcase_schedule():
    data, truth = scenario("showcase")
    assert (data.spec.d, data.spec.T, data.spec.n_per_window) == (10, 60, 300)
    assert [seg["start"] for seg in truth.schedule] == [0, 15, 30, 45]
    assert [seg["type"] for seg in truth.schedule] == [
        "independence", "pairwise", "triplet", "clayton"]


def test_showcase_phase_pooled_correlations():
    data, truth = scenario("showcase")
    phase1 = np.vstack(data.windows[:15])
    assert np.max(np.abs(pairwise_corr(phase1))) < 0.05
    phase2 = np.vstack(data.windows[15:30])
    c = np.corrcoef(phase2, rowvar=False)
    for leaf in (1, 2, 3):
        assert abs(c[0, leaf] - 0.55) < 0.04
    assert np.max(np.abs(pairwise_corr(phase2[:, 4:]))) < 0.05


def test_showcase_oracle_values():
    _, truth = scenario("showcase")
    star = truth.oracle["star_pair_mi"]
    assert star == pytest.approx(0.18013, abs=1e-5)
    assert truth.oracle["tc"][0] == 0.0
    assert truth.oracle["tc"][15] == pytest.approx(3 * star, abs=1e-12)
    assert truth.oracle["higher"][15] == 0.0
    assert truth.oracle["higher"][30] > 0.1
    assert truth.oracle["clayton_lower_tail"] == pytest.approx(
        2.0 ** (-1.0 / 3.5), abs=1e-12)
    assert truth.oracle["clayton_pair_mi"] > 0.3


# ---------------------------------------------------------------------------
# information oracles


def test_gaussian_pair_mi_values():
    assert bg.gaussian_pair_mi(0.0) == 0.0
    assert bg.gaussian_pair_mi(0.55) == pytest.approx(0.18013, abs=1e-5)
    assert bg.gaussian_pair_mi(0.6) == pytest.approx(0.223, abs=5e-4)


def test_clayton_pair_mi_monte_carlo_is_stable():
    a = bg.clayton_pair_mi(3.5, n_mc=10**5, seed=1)
    b = bg.clayton_pair_mi(3.5, n_mc=10**5, seed=2)
    assert abs(a - b) < 0.02
    assert bg.clayton_pair_mi(0.01, n_mc=10**5) == pytest.approx(0.0, abs=0.01)


def test_clayton_lower_tail_closed_form():
    assert bg.clayton_lower_tail(1.0) == pytest.approx(0.5, abs=1e-12)


def test_tail_df_oracle_orders_by_df():
    _, truth = scenario("tail_df")
    tc = truth.oracle["tc"]
    higher = truth.oracle["higher"]
    assert tc[0] > tc[23]
    assert higher[0] > higher[23]
    assert higher[0] > 0.05            # t3 tails carry beyond-pairwise content
    assert min(truth.oracle["pair"]) > 0


def test_oracle_requires_supported_scenario():
    spec = bg.ScenarioSpec("xor_stress", 3, 8, 3000, 1)
    with pytest.raises(ConfigError):
        bg.oracle_information(spec)


# ---------------------------------------------------------------------------
# dataset IO


def test_save_load_round_trip(tmp_path):
    data, truth = scenario("mult_triplet")
    out = bg.save_dataset(data, truth, str(tmp_path / "ds"))
    back, back_truth = bg.load_dataset(out)
    assert back.spec == data.spec
    assert back.var_names == data.var_names
    for wa, wb in zip(data.windows, back.windows):
        assert wa.tobytes() == wb.tobytes()
    assert back_truth.labels == truth.labels
    assert back_truth.schedule == truth.schedule
    assert back_truth.oracle == truth.oracle


def test_save_twice_is_hash_equal(tmp_path):
    data, truth = bg.gen_xor(11)
    bg.save_dataset(data, truth, str(tmp_path / "a"))
    data2, truth2 = bg.gen_xor(11)
    bg.save_dataset(data2, truth2, str(tmp_path / "b"))
    for name in ["manifest.json"] + [f"window_{t:03d}.csv" for t in range(8)]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_load_rejects_bad_schema(tmp_path):
    data, truth = scenario("mult_triplet")
    out = bg.save_dataset(data, truth, str(tmp_path / "ds"))
    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    manifest["schema"] = "dvc-dataset/99"
    (tmp_path / "ds" / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DataError):
        bg.load_dataset(out)


def test_load_missing_manifest(tmp_path):
    with pytest.raises(DataError):
        bg.load_dataset(str(tmp_path))
