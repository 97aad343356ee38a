import csv
import io
import json
import math
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from fragkernel.combinatorics import BicomponentConfiguration, enumerate_configs_1c, enumerate_configs_2c
from fragkernel.ensemble import config_probability_1c, config_probability_2c
from fragkernel.kernels import Family, KernelSpec, PowerLaw
from fragkernel.stochastic import (
    ConfigurationSampler,
    SimulationConfig,
    event_log_to_csv,
    replica_rng,
    sample_configuration,
    simulate_population,
    write_summary,
)

RANDOM2 = KernelSpec(Family.RANDOM, 2)
RANDOM3 = KernelSpec(Family.RANDOM, 3)


def draw(spec, parent, k, seed=1):
    rng = replica_rng(seed, 0)
    sampler = ConfigurationSampler(spec)
    return Counter(sampler.sample(parent, rng) for _ in range(k))


def test_uniform_binary_frequencies():
    k = 100_000
    freq = draw(RANDOM2, 5, k, seed=2)
    assert set(freq) == {(1, 4), (2, 3), (3, 2), (4, 1)}
    sigma = math.sqrt(0.25 * 0.75 / k)
    for c in freq.values():
        assert abs(c / k - 0.25) < 3 * sigma


def test_all_monomers_when_v_equals_n():
    assert set(draw(RANDOM3, 3, 50)) == {(1, 1, 1)}
    assert set(draw(KernelSpec(Family.WEIGHTED_FUNCTIONAL, 3, weights=PowerLaw(2)), 3, 50)) == {(1, 1, 1)}


def test_independent_support():
    spec = KernelSpec(Family.BICOMPONENT_INDEPENDENT, 2)
    seen = draw(spec, (2, 2), 200)
    assert {c.fragments for c in seen} == {((1, 1), (1, 1))}
    seen = draw(spec, (3, 4), 2000)
    assert all(a >= 1 and b >= 1 for c in seen for a, b in c.fragments)


def test_sample_configuration_wrapper():
    rng = replica_rng(3, 0)
    c = sample_configuration(RANDOM3, 7, 3, rng)
    assert len(c) == 3 and sum(c) == 7
    with pytest.raises(ValueError):
        sample_configuration(RANDOM3, 7, 2, rng)


def _chi2_1c(spec, v, k, seed):
    configs = enumerate_configs_1c(v, spec.n)
    freq = draw(spec, v, k, seed)
    observed = [freq.get(c, 0) for c in configs]
    expected = [k * config_probability_1c(spec, c) for c in configs]
    assert sum(observed) == k
    return chisquare(observed, expected).pvalue


def _chi2_2c(spec, parent, k, seed):
    configs = [c for c in enumerate_configs_2c(*parent, spec.n)]
    probs = [c.multiplicity * config_probability_2c(spec, c) for c in configs]
    configs = [c for c, p in zip(configs, probs) if p > 0]
    probs = [p for p in probs if p > 0]
    freq = draw(spec, parent, k, seed)
    observed = [freq.get(c, 0) for c in configs]
    assert sum(observed) == k
    return chisquare(observed, [k * p for p in probs]).pvalue


@pytest.mark.parametrize(
    "spec,v",
    [
        (RANDOM3, 6),
        (KernelSpec(Family.PARTIALLY_RANDOM, 2, kappa=PowerLaw(3)), 9),
        (KernelSpec(Family.WEIGHTED_FUNCTIONAL, 3, weights=PowerLaw(1)), 8),
        (KernelSpec(Family.WEIGHTED_FUNCTIONAL, 2, weights=PowerLaw(-1)), 12),
    ],
    ids=["random", "partially_random", "weighted_g1", "weighted_g-1"],
)
def test_chi_square_one_component(spec, v):
    assert _chi2_1c(spec, v, 100_000, seed=2024) > 0.001


@pytest.mark.parametrize(
    "spec,parent",
    [
        (KernelSpec(Family.BICOMPONENT_RANDOM, 2), (2, 3)),
        (KernelSpec(Family.BICOMPONENT_PARTIALLY_RANDOM, 3, kappa=PowerLaw(1)), (2, 2)),
        (KernelSpec(Family.BICOMPONENT_INDEPENDENT, 2), (4, 5)),
    ],
    ids=["bicomponent_random", "bicomponent_partially_random", "bicomponent_independent"],
)
def test_chi_square_bicomponent(spec, parent):
    assert _chi2_2c(spec, parent, 100_000, seed=99) > 0.001


def test_first_event_time_is_exponential_with_rate_two():
    res = simulate_population({3: 1}, RANDOM2, SimulationConfig(seed=17, replicas=5000, t_end=50, record_events=True))
    first = {}
    for e in res.events:
        first.setdefault(e.replica, e.time)
    times = np.array([first[r] for r in range(5000)])
    assert abs(times.mean() - 0.5) < 3 * 0.5 / math.sqrt(5000)
    # every replica ends as three monomers
    assert np.all(res.counts[:, -1, res.states.index(1)] == 3)


def test_monomers_only_have_no_events():
    res = simulate_population({1: 10}, RANDOM2, SimulationConfig(seed=1, replicas=3, t_end=5, record_events=True))
    assert res.events == []
    assert res.n_events.sum() == 0
    assert np.all(res.counts == 10)


def test_events_conserve_mass():
    spec = KernelSpec(Family.BICOMPONENT_RANDOM, 3)
    res = simulate_population({(4, 5): 2, (1, 3): 1}, spec, SimulationConfig(seed=8, replicas=20, t_end=5, record_events=True))
    assert res.events
    for e in res.events:
        frags = e.fragments
        assert (sum(f[0] for f in frags), sum(f[1] for f in frags)) == e.parent
    m = res.moment_samples()
    assert np.all(m["M1A"] == 9) and np.all(m["M1B"] == 13)


def test_determinism_and_thread_independence():
    spec = KernelSpec(Family.WEIGHTED_FUNCTIONAL, 3, weights=PowerLaw(0.5))
    logs = []
    for threads in (1, 1, 4):
        res = simulate_population({10: 3}, spec, SimulationConfig(seed=42, replicas=30, t_end=1, record_events=True, threads=threads))
        logs.append(event_log_to_csv(res.events))
    assert logs[0] == logs[1] == logs[2]
    other = simulate_population({10: 3}, spec, SimulationConfig(seed=43, replicas=30, t_end=1, record_events=True))
    assert event_log_to_csv(other.events) != logs[0]


def test_event_log_format():
    res = simulate_population({4: 1}, RANDOM2, SimulationConfig(seed=5, replicas=2, t_end=100, record_events=True))
    rows = list(csv.reader(io.StringIO(event_log_to_csv(res.events))))
    assert rows[0] == ["replica", "t", "parent", "fragments"]
    for r in rows[1:]:
        parts = [int(x) for x in r[3].split("|")]
        assert sum(parts) == int(r[2]) and len(parts) == 2
    spec = KernelSpec(Family.BICOMPONENT_RANDOM, 2)
    res = simulate_population({(1, 2): 1}, spec, SimulationConfig(seed=5, replicas=1, t_end=100, record_events=True))
    rows = list(csv.reader(io.StringIO(event_log_to_csv(res.events))))
    assert rows[1][2] == "1.2"
    assert all(len(f.split(".")) == 2 for f in rows[1][3].split("|"))


def test_summary_json():
    res = simulate_population({6: 1}, RANDOM3, SimulationConfig(seed=9, replicas=50, t_end=1, checkpoints=4))
    buf = io.StringIO()
    write_summary(res, buf)
    data = json.loads(buf.getvalue())
    assert data["metadata"]["seed"] == 9
    assert "Philox" in data["metadata"]["rng"]
    assert data["times"] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert set(data["moments"]) == {"M0", "M1", "M2"}
    assert data["moments"]["M1"]["mean"] == [6.0] * 5
    assert len(data["concentrations"]["6"]["stderr"]) == 5


def test_unseeded_run_records_entropy():
    cfg = SimulationConfig(replicas=1, t_end=1)
    assert isinstance(cfg.seed, int)


def test_bad_initial_state():
    with pytest.raises(ValueError):
        simulate_population({(1, 2): 1}, RANDOM2, SimulationConfig(seed=1))
    with pytest.raises(ValueError):
        simulate_population({3: 1.5}, RANDOM2, SimulationConfig(seed=1))


def test_bicomponent_sample_is_composition_level():
    c = sample_configuration(KernelSpec(Family.BICOMPONENT_RANDOM, 2), (2, 3), None, replica_rng(0, 0))
    assert isinstance(c, BicomponentConfiguration)
    assert c.parent == (2, 3)
