from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from services.engine import (
    ANALYTIC,
    NEURAL,
    AlertEvent,
    EngineConfig,
    EngineState,
    MissEvent,
    SimulationOracle,
    run,
    step,
    verify_retrain,
)
from services.exceptions import ConfigError, OutOfOrderFrameError, RecordFormatError
from services.features import FeatureConfig
from services.net_mlp import LabeledExample, Mlp, TrainConfig, batch_loss
from services.simgen import ScenarioConfig, generate
from services.track_model import Area, CircleZone, Frame, Position

TARGET = Position(500.0, 500.0)
FEATURES = FeatureConfig(
    area=Area(1000, 1000),
    target=TARGET,
    target_zone=CircleZone(TARGET, 200.0),
    suspect_zone=CircleZone(TARGET, 400.0),
)


def biased_net(bias, max_objects=6):
    """Network whose output is logistic(bias) for every slot."""
    m = Mlp.zeros(max_objects)
    return Mlp(m.w1, m.b1, m.w2, np.full(max_objects, float(bias)))


def approach_frames(n=21, bystander=True):
    """A vessel running straight at the target at 20 m/s, plus one far off and parked."""
    frames = []
    for k in range(n):
        points = [(100.0 + 20.0 * k, 500.0)]
        if bystander:
            points.append((900.0, 50.0))
        frames.append(Frame.from_points(float(k), points))
    return frames


class FixedOracle:
    def __init__(self, acts):
        self.acts = acts

    def acts_at(self, timestamp):
        return list(self.acts.get(timestamp, ()))


def initial(mlp, **overrides):
    return EngineState.initial(EngineConfig(**overrides), FEATURES, mlp)


class EngineConfigTests(SimpleTestCase):
    def test_round_trip(self):
        cfg = EngineConfig(theta=0.8, gate=45.0, max_coast=3, retrain=TrainConfig(learning_rate=0.3, seed=7))
        self.assertEqual(EngineConfig.from_dict(cfg.to_dict()), cfg)

    def test_validation(self):
        with self.assertRaises(ConfigError):
            EngineConfig(theta=1.0)
        with self.assertRaises(ConfigError):
            EngineConfig(gate=0.0)
        with self.assertRaises(ConfigError):
            EngineConfig.from_dict({"theta": 0.5, "sonar_gain": 2})
        with self.assertRaises(ConfigError):
            EngineConfig.from_dict({"gate": "wide"})


class StepTests(SimpleTestCase):
    def test_empty_frame(self):
        state = initial(biased_net(5.0))
        state, events = step(state, Frame(0.0))
        self.assertEqual(events, [])
        self.assertEqual(state.frames_processed, 1)
        self.assertEqual(len(state.tagger.table), 0)

    def test_frames_must_advance(self):
        state, _ = step(initial(biased_net(0.0)), Frame(3.0))
        with self.assertRaises(OutOfOrderFrameError):
            step(state, Frame(3.0))

    def test_jump_beyond_gate_gets_new_id(self):
        state = initial(biased_net(0.0), gate=30.0)
        state, _ = step(state, Frame.from_points(0.0, [(100, 100)]))
        state, _ = step(state, Frame.from_points(1.0, [(120, 100)]))
        self.assertEqual(set(state.last_assignment.matches.values()), {1})
        state, _ = step(state, Frame.from_points(2.0, [(300, 100)]))
        self.assertEqual(set(state.last_assignment.matches.values()), {2})

    def test_every_table_id_has_an_object(self):
        state = initial(biased_net(0.0))
        for frame in approach_frames(5):
            state, _ = step(state, frame)
            self.assertTrue(set(state.tagger.table.ids) <= set(state.objects))

    def test_only_in_zone_objects_are_flagged_once_per_visit(self):
        state = initial(biased_net(5.0))
        emitted = []
        for frame in approach_frames():
            state, events = step(state, frame)
            emitted.extend(events)
        neural = [e for e in emitted if isinstance(e, AlertEvent) and e.source == NEURAL]
        self.assertEqual(len(neural), 1)
        # x = 100 + 20k reaches the zone edge at x = 300
        self.assertEqual(neural[0].timestamp, 10.0)
        self.assertEqual(neural[0].object_id, 1)
        self.assertTrue(all(s.object_id == 1 for s in state.last_scores))

    def test_low_network_output_raises_no_neural_alert(self):
        state = initial(biased_net(-5.0))
        for frame in approach_frames():
            state, events = step(state, frame)
            self.assertFalse([e for e in events if getattr(e, "source", None) == NEURAL])

    def test_analytic_alert_near_target(self):
        state = initial(biased_net(-5.0), theta=0.6)
        for frame in approach_frames():
            state, _ = step(state, frame)
        self.assertIn(ANALYTIC, {a.source for a in state.alerts})


class MissAndRetrainTests(SimpleTestCase):
    def setUp(self):
        self.frames = approach_frames()
        self.oracle = FixedOracle({20.0: [TARGET]})
        self.initial = initial(
            biased_net(-4.0),
            retrain=TrainConfig(learning_rate=0.5),
            retrain_target_loss=0.05,
            retrain_max_steps=2000,
        )

    def test_miss_is_emitted_on_the_act_frame(self):
        state = self.initial
        for frame in self.frames[:-1]:
            state, events = step(state, frame, self.oracle)
            self.assertFalse([e for e in events if isinstance(e, MissEvent)])
        state, events = step(state, self.frames[-1], self.oracle)
        misses = [e for e in events if isinstance(e, MissEvent)]
        self.assertEqual(misses, [MissEvent(1, 20.0)])
        self.assertEqual(state.retrain_count, 1)
        self.assertFalse(np.array_equal(state.mlp.flat(), self.initial.mlp.flat()))
        self.assertTrue(state.replay)

        missed = []
        for vector, slot in state.visits[1].inputs:
            mask = np.zeros(6, dtype=bool)
            mask[slot] = True
            missed.append(LabeledExample(vector, mask.astype(float), mask))
        self.assertLessEqual(batch_loss(state.mlp, missed), 0.5 * batch_loss(self.initial.mlp, missed))

    def test_retrained_network_flags_the_miss_in_advance(self):
        report = run(self.initial, self.frames, oracle=self.oracle)
        self.assertEqual([m.object_id for m in report.misses], [1])
        first = verify_retrain(self.initial, self.frames, report)
        self.assertIsNotNone(first[1])
        self.assertLess(first[1], 20.0)

    def test_act_already_flagged_is_not_a_miss(self):
        state = replace(self.initial, mlp=biased_net(5.0))
        report = run(state, self.frames, oracle=self.oracle)
        self.assertEqual(report.misses, ())
        self.assertEqual([(a.object_id, a.alerted) for a in report.acts], [(1, True)])

    def test_act_far_from_any_track_is_ignored(self):
        oracle = FixedOracle({20.0: [Position(10.0, 990.0)]})
        with self.assertLogs("services.engine", level="WARNING"):
            report = run(self.initial, self.frames, oracle=oracle)
        self.assertEqual(report.misses, ())
        self.assertEqual(report.acts, ())


def track_frames(xs, empty_after=0):
    """One vessel along y = 500 at the given x per second, then empty frames."""
    frames = [Frame.from_points(float(k), [(x, 500.0)]) for k, x in enumerate(xs)]
    return frames + [Frame(float(len(xs) + k)) for k in range(empty_after)]


def labels(examples):
    return [float(label) for ex in examples for label in ex.target[ex.mask]]


class HeldNegativesTests(SimpleTestCase):
    def test_vessel_that_leaves_and_returns_to_act_never_feeds_benign_replay(self):
        # in the zone for t = 10..20, out until t = 29, back in from t = 30, act at t = 40
        xs = [100.0 + 20 * k for k in range(16)]
        xs += [400.0 - 20 * j for j in range(1, 11)]
        xs += [200.0 + 20 * j for j in range(1, 16)]
        frames = track_frames(xs)
        oracle = FixedOracle({40.0: [TARGET]})
        state = initial(biased_net(-4.0), retrain=TrainConfig(learning_rate=0.5))
        for frame in frames[:-1]:
            state, _ = step(state, frame, oracle)
        self.assertEqual(state.replay, ())
        self.assertEqual(len(state.pending[1]), 11)

        state, events = step(state, frames[-1], oracle)
        self.assertEqual([e for e in events if isinstance(e, MissEvent)], [MissEvent(1, 40.0)])
        self.assertEqual(state.pending, {})
        self.assertEqual(len(state.replay), 11)
        self.assertEqual(set(labels(state.replay)), {1.0})

    def test_benign_visit_reaches_replay_when_the_vessel_retires(self):
        # crosses the zone for t = 10..30, leaves, then vanishes for six frames
        frames = track_frames([100.0 + 20 * k for k in range(36)], empty_after=6)
        state = initial(biased_net(-4.0))
        oracle = FixedOracle({})
        for frame in frames[:-1]:
            state, _ = step(state, frame, oracle)
        self.assertEqual(state.replay, ())
        self.assertEqual(len(state.pending[1]), 21)

        state, _ = step(state, frames[-1], oracle)
        self.assertIn(1, state.last_assignment.retired)
        self.assertEqual(state.pending, {})
        self.assertEqual(labels(state.replay), [0.0] * 21)

    def test_run_end_releases_visits_of_vessels_that_never_acted(self):
        report = run(initial(biased_net(-4.0)), approach_frames(), oracle=FixedOracle({}))
        final = report.final_state
        self.assertEqual(final.pending, {})
        self.assertEqual(labels(final.replay), [0.0] * 11)

    def test_without_an_oracle_nothing_is_collected(self):
        report = run(initial(biased_net(-4.0)), approach_frames())
        self.assertEqual(report.final_state.replay, ())
        self.assertEqual(report.final_state.pending, {})


class RunTests(SimpleTestCase):
    def test_zero_frames(self):
        report = run(initial(biased_net(0.0)), [])
        self.assertEqual(report.frames_processed, 0)
        self.assertEqual(report.events(), [])
        self.assertEqual(report.objects, ())

    def test_deterministic(self):
        cfg = ScenarioConfig(duration=120.0, seed=21)
        frames, truth = generate(cfg)
        state = EngineState.initial(EngineConfig(), cfg.feature_config(), Mlp.initialize(6, seed=4))
        first = run(state, frames, truth=truth)
        second = run(state, frames, truth=truth)
        self.assertEqual(first.events(), second.events())
        self.assertEqual([s.csv_row() for s in first.scores], [s.csv_row() for s in second.scores])

    def test_all_benign_raises_no_neural_alert(self):
        cfg = ScenarioConfig(n_benign=5, n_hostile=0, seed=2)
        frames, truth = generate(cfg)
        state = EngineState.initial(EngineConfig(theta=0.9), cfg.feature_config(), Mlp.zeros(6))
        report = run(state, frames, truth=truth)
        self.assertEqual(report.alert_count, 0)
        self.assertEqual(report.misses, ())

    def test_summaries_follow_truth(self):
        cfg = ScenarioConfig(n_benign=2, n_hostile=1, seed=5, noise_sigma=0.0)
        frames, truth = generate(cfg)
        state = EngineState.initial(EngineConfig(), cfg.feature_config(), biased_net(-6.0))
        report = run(state, frames, truth=truth)
        hostile_id = truth.hostile_ids[0]
        hostile_rows = [o for o in report.objects if o.truth_id == hostile_id]
        self.assertTrue(hostile_rows)
        self.assertTrue(all(o.hostile for o in hostile_rows))
        self.assertEqual(len(report.misses), 1)
        self.assertIn(report.misses[0].object_id, {o.object_id for o in hostile_rows})
        payload = report.to_dict(config=EngineConfig().to_dict(), seed=5)
        self.assertEqual(payload["kind"], "run_report")
        self.assertEqual(len(payload["misses"]), 1)

    def test_events_put_alerts_before_misses(self):
        cfg = ScenarioConfig(n_benign=1, n_hostile=1, seed=9, noise_sigma=0.0)
        frames, truth = generate(cfg)
        state = EngineState.initial(EngineConfig(), cfg.feature_config(), biased_net(-6.0))
        events = run(state, frames, truth=truth).events()
        times = [e["t"] if e["type"] == "alert" else e["act_time"] for e in events]
        self.assertEqual(times, sorted(times))

    def test_truth_must_match_the_frames(self):
        frames, _ = generate(ScenarioConfig(duration=60.0, seed=1))
        _, other = generate(ScenarioConfig(duration=60.0, n_benign=1, seed=2))
        state = EngineState.initial(EngineConfig(), ScenarioConfig().feature_config(), Mlp.zeros(6))
        with self.assertRaises(RecordFormatError):
            run(state, frames, truth=other)
        with self.assertRaises(RecordFormatError):
            run(state, frames[:-1], truth=generate(ScenarioConfig(duration=60.0, seed=1))[1])

    def test_simulation_oracle(self):
        cfg = ScenarioConfig(n_benign=1, n_hostile=1, seed=3)
        _, truth = generate(cfg)
        hostile = truth.object(truth.hostile_ids[0])
        acts = SimulationOracle(truth).acts_at(hostile.act_time)
        self.assertEqual(acts, [dict(hostile.trajectory)[hostile.act_time]])
        self.assertEqual(SimulationOracle(truth).acts_at(-1.0), [])
