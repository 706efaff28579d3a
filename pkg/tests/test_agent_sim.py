import numpy as np
import pytest
from scipy import stats

from hieropinion import _rng, agent_sim
from hieropinion.agent_sim import SimSchedule, encounter, level_stats, run, run_ensemble
from hieropinion.model import LevelSpec, ModelConfig, OpinionDist, Population, build_population


def pair_population(w, stubborn=(False, False), p=1.0, gamma=0.01, levels=(0, 0)):
    lv = (LevelSpec(h=0.0, fraction=0.5), LevelSpec(h=1.0, fraction=0.5))
    cfg = ModelConfig(p=p, gamma=gamma, levels=lv, agents=2)
    return Population(
        w=np.array(w, dtype=float),
        level=np.array(levels, dtype=np.int64),
        stubborn=np.array(stubborn),
        config=cfg,
    )


# random stream


def test_xoshiro_reference_outputs():
    s = np.array([1, 2, 3, 4], dtype=np.uint64)
    got = [int(_rng.next_u64(s)) for _ in range(4)]
    assert got == [11520, 0, 1509978240, 1215971899390074240]


def test_splitmix_seeding_reference_outputs():
    state = _rng.make_state(1234567)
    assert [int(x) for x in state] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
        4593380528125082431,
    ]


def test_uniform_draws_are_uniform():
    s = _rng.make_state(5)
    u = np.array([_rng.uniform(s) for _ in range(20000)])
    assert u.min() >= 0.0 and u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 1e-4


def test_bounded_integers_are_uniform():
    s = _rng.make_state(9)
    k = np.array([_rng.below(s, 7) for _ in range(35000)])
    counts = np.bincount(k, minlength=7)
    assert counts.size == 7
    assert stats.chisquare(counts).pvalue > 1e-4


# single encounters


def test_encounter_between_stubborn_agents_only_advances_clock():
    pop = pair_population([0.1, -0.4], stubborn=(True, True))
    encounter(pop, np.random.default_rng(0))
    np.testing.assert_array_equal(pop.w, [0.1, -0.4])
    assert pop.encounters == 1 and pop.clock == 0.5


def test_encounter_at_identical_opinions():
    pop = pair_population([0.2, 0.2])
    encounter(pop, np.random.default_rng(0))
    np.testing.assert_array_equal(pop.w, [0.2, 0.2])


def test_encounter_updates_both_from_pre_encounter_values():
    pop = pair_population([0.0, 1.0], p=1.0, gamma=0.01)
    encounter(pop, np.random.default_rng(0))
    np.testing.assert_allclose(pop.w, [0.01, 0.99], atol=1e-15)


def test_encounter_pure_hierarchy_moves_only_the_lower_agent():
    pop = pair_population([0.0, 1.0], p=0.0, gamma=0.1, levels=(0, 1))
    encounter(pop, np.random.default_rng(0))
    np.testing.assert_allclose(pop.w, [0.1, 1.0], atol=1e-15)


def test_compiled_kernel_applies_the_same_rule():
    pop = pair_population([0.0, 1.0], p=0.0, gamma=0.1, levels=(0, 1))
    agent_sim._advance(agent_sim.dynamics_state(0), pop.w, pop.level, pop.stubborn, 0.0, 0.1, 1)
    np.testing.assert_allclose(pop.w, [0.1, 1.0], atol=1e-15)


def test_python_encounter_needs_two_agents():
    cfg = ModelConfig(p=0.0, gamma=0.1, levels=(LevelSpec(0.0, 1.0),), agents=1)
    pop = build_population(cfg, 0)
    with pytest.raises(ValueError):
        encounter(pop, np.random.default_rng(0))


# statistics


def test_level_stats_at_consensus():
    cfg = ModelConfig(p=0.0, gamma=0.1, levels=(LevelSpec(0.0, 1.0, ns_initial=OpinionDist.point(0.5)),), agents=50)
    st = level_stats(build_population(cfg, 0))
    assert st["mean_ns"][0] == 0.5 and st["var_ns"][0] == 0.0 and st["support_ns"][0] == 0.0


def test_level_stats_two_extremes():
    pop = pair_population([-1.0, 1.0])
    st = level_stats(pop)
    assert st["mean_ns"][0] == 0.0 and st["support_ns"][0] == 2.0 and st["var_ns"][0] == 1.0


def test_level_stats_empty_subpopulation_is_nan():
    pop = pair_population([-1.0, 1.0], stubborn=(True, True))
    st = level_stats(pop)
    assert np.isnan(st["mean_ns"][0]) and st["mean_all"][0] == 0.0
    assert st["count_ns"][0] == 0 and st["count_s"][0] == 2


def test_reference_initial_level_means(ref_stubborn):
    st = level_stats(build_population(ref_stubborn(0.0), 11))
    np.testing.assert_allclose(st["mean_ns"], [-0.8, 0.0, 0.9], atol=0.02)


# runs


def small(cfg, agents=2000):
    return cfg.with_(agents=agents)


def test_zero_length_run_records_initial_state(ref_stubborn):
    pop = build_population(small(ref_stubborn(0.25)), 0)
    before = level_stats(pop)
    ts = run(pop, SimSchedule(0.0, 1.0), seed=0)
    assert ts.times.tolist() == [0.0]
    np.testing.assert_array_equal(ts.mean_ns[0], before["mean_ns"])
    assert pop.encounters == 0


def test_record_grid_and_clock(ref_stubborn):
    cfg = small(ref_stubborn(0.25))
    pop = build_population(cfg, 0)
    ts = run(pop, SimSchedule(0.25, 0.1), seed=0)
    np.testing.assert_allclose(ts.times, [0.0, 0.1, 0.2, 0.25], atol=1e-12)
    assert pop.encounters == round(0.25 / cfg.gamma * cfg.agents)
    assert pop.clock == pytest.approx(0.25 / cfg.gamma)


def test_unscaled_schedule_uses_model_time(ref_stubborn):
    cfg = small(ref_stubborn(0.25))
    pop = build_population(cfg, 0)
    ts = run(pop, SimSchedule(3.0, 1.0, rescale_time=False), seed=0)
    np.testing.assert_allclose(ts.times, [0, 1, 2, 3])
    assert pop.encounters == 3 * cfg.agents


def test_stubborn_agents_keep_their_bits_and_opinions_stay_bounded(ref_stubborn):
    cfg = small(ref_stubborn(0.5)).with_(gamma=0.2)
    pop = build_population(cfg, 4)
    initial = pop.w.copy()
    run(pop, SimSchedule(5.0, 5.0), seed=4)
    np.testing.assert_array_equal(pop.w[pop.stubborn], initial[pop.stubborn])
    assert np.all(np.abs(pop.w) <= 1.0)
    assert not np.array_equal(pop.w[~pop.stubborn], initial[~pop.stubborn])


def test_top_level_consensus_is_untouched_under_pure_hierarchy():
    levels = (
        LevelSpec(0.0, 0.6, 0.3, ns_initial=OpinionDist.uniform(-1, 0)),
        LevelSpec(1.0, 0.4, 0.0, ns_initial=OpinionDist.point(0.37)),
    )
    cfg = ModelConfig(p=0.0, gamma=0.1, levels=levels, agents=2000)
    ts = run(build_population(cfg, 0), SimSchedule(3.0, 0.5), seed=0)
    assert np.all(ts.mean_ns[:, 1] == 0.37)


def test_runs_are_reproducible(ref_stubborn):
    cfg = small(ref_stubborn(0.25))
    a = run(build_population(cfg, 7), SimSchedule(0.5, 0.25), seed=7)
    b = run(build_population(cfg, 7), SimSchedule(0.5, 0.25), seed=7)
    c = run(build_population(cfg, 8), SimSchedule(0.5, 0.25), seed=8)
    np.testing.assert_array_equal(a.mean_ns, b.mean_ns)
    assert not np.array_equal(a.mean_ns, c.mean_ns)


def test_run_metadata(ref_stubborn):
    cfg = small(ref_stubborn(0.25))
    ts = run(build_population(cfg, 0), SimSchedule(0.1, 0.1), seed=0)
    assert ts.meta["count_s"] == [200, 420, 160]
    np.testing.assert_array_equal(ts.weights, [400, 1400, 200])


def test_ensemble_mean_is_order_independent(ref_stubborn):
    cfg = small(ref_stubborn(0.25))
    sched = SimSchedule(0.3, 0.1)
    runs, mean = run_ensemble(cfg, sched, [3, 1, 2])
    _, mean2 = run_ensemble(cfg, sched, [2, 3, 1])
    np.testing.assert_array_equal(mean.mean_ns, mean2.mean_ns)
    np.testing.assert_allclose(mean.mean_ns, np.mean([r.mean_ns for r in runs], axis=0), atol=1e-15)


def test_parallel_ensemble_matches_serial(ref_stubborn, monkeypatch):
    cfg = small(ref_stubborn(0.25))
    sched = SimSchedule(0.2, 0.1)
    monkeypatch.setenv("HIEROPINION_THREADS", "1")
    _, serial = run_ensemble(cfg, sched, [0, 1])
    monkeypatch.setenv("HIEROPINION_THREADS", "2")
    assert agent_sim.worker_count(2) == 2
    _, parallel = run_ensemble(cfg, sched, [0, 1])
    np.testing.assert_array_equal(serial.mean_ns, parallel.mean_ns)


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("HIEROPINION_THREADS", "3")
    assert agent_sim.worker_count(10) == 3
    assert agent_sim.worker_count(1) == 1


def test_schedule_validation():
    with pytest.raises(ValueError):
        SimSchedule(1.0, 0.0)
    with pytest.raises(ValueError):
        SimSchedule(-1.0, 0.1)


def test_expected_mean_drift_matches_mean_field(ref_stubborn):
    """Short-horizon level means follow the linear mean system (time factor included)."""
    from hieropinion import meanfield

    cfg = ref_stubborn(0.25).with_(gamma=0.05, exact_init=True)
    tau = 0.5
    _, mean = run_ensemble(cfg, SimSchedule(tau, tau), range(4))
    sys_ = meanfield.build_system(cfg)
    _, states = meanfield.integrate(sys_, cfg.ns_means(), agent_sim.MEANFIELD_TIME_FACTOR * tau, 1e-3)
    np.testing.assert_allclose(mean.final(), states[-1], atol=0.01)
