import numpy as np
from django.test import SimpleTestCase

from services.evaluation import identity_accuracy
from services.exceptions import ConfigError, EmptyInputError
from services.rng import XorShift64
from services.simgen import GroundTruth
from services.tagger_som import (
    Assignment,
    SomGrid,
    SomParams,
    TaggerState,
    associate,
    bmu,
    bmu_many,
    grid_from_text,
    grid_to_text,
    quantization_error,
    tag_frame,
    train_grid,
    train_step,
)
from services.track_model import Area, Frame, LocationTable, Position


def clustered_points(seed=0, per_cluster=50, spread=10.0):
    rng = np.random.default_rng(seed)
    centers = [(250, 250), (750, 250), (250, 750), (750, 750)]
    points, labels = [], []
    for label, (cx, cy) in enumerate(centers):
        for x, y in rng.normal((cx, cy), spread, size=(per_cluster, 2)):
            points.append(Position(float(x), float(y)))
            labels.append(label)
    return points, labels


def tag_sequence(frames, gate=60.0, area=Area(500, 500)):
    state = TaggerState.initial(area)
    assignments = []
    for frame in frames:
        state, assignment = tag_frame(state, frame, SomParams(), gate)
        assignments.append(assignment)
    return state, assignments


def parallel_movers(n_frames=50, noise=0.0, seed=0):
    """Five objects on parallel lanes 90 m apart, 5 m per frame, blips shuffled every frame."""
    rng = XorShift64(seed)
    frames, correspondence = [], []
    for k in range(n_frames):
        t = float(k)
        observed = []
        for object_id in range(5):
            x = 20.0 + 5.0 * k + (rng.gauss(0, noise) if noise else 0.0)
            y = 40.0 + 90.0 * object_id + (rng.gauss(0, noise) if noise else 0.0)
            observed.append((object_id, (x, y)))
        rng.shuffle(observed)
        frames.append(Frame.from_points(t, [p for _, p in observed]))
        correspondence.append(tuple(i for i, _ in observed))
    return frames, GroundTruth((), tuple(correspondence))


class BmuTests(SimpleTestCase):
    def test_single_node(self):
        grid = SomGrid(1, 1, [[3.0, 4.0]])
        self.assertEqual(bmu(grid, Position(100, -7)), 0)

    def test_nearest_prototype(self):
        grid = SomGrid(2, 1, [[0.0, 0.0], [10.0, 0.0]])
        self.assertEqual(bmu(grid, Position(1, 1)), 0)

    def test_tie_goes_to_lowest_index(self):
        grid = SomGrid(2, 1, [[0.0, 0.0], [10.0, 0.0]])
        self.assertEqual(bmu(grid, Position(5, 0)), 0)

    def test_matches_exhaustive_scan(self):
        grid = SomGrid.random(8, 8, Area(1000, 1000), seed=4)
        rng = np.random.default_rng(4)
        points = rng.uniform(0, 1000, size=(500, 2))
        many = bmu_many(grid, points)
        for (x, y), fast in zip(points, many):
            scan = min(range(grid.size), key=lambda i: (
                (grid.prototypes[i][0] - x) ** 2 + (grid.prototypes[i][1] - y) ** 2, i))
            self.assertEqual(bmu(grid, Position(x, y)), scan)
            self.assertEqual(int(fast), scan)

    def test_rigid_motion_keeps_bmu(self):
        grid = SomGrid.random(4, 4, Area(100, 100), seed=1)
        shift = np.array([37.0, -12.0])
        moved = SomGrid(4, 4, grid.prototypes + shift)
        p = Position(41.0, 58.0)
        self.assertEqual(bmu(grid, p), bmu(moved, Position(p.x + shift[0], p.y + shift[1])))


class TrainStepTests(SimpleTestCase):
    def test_full_rate_single_node_lands_on_point(self):
        grid = train_step(SomGrid(1, 1, [[0.0, 0.0]]), Position(3, 4), SomParams(alpha0=1.0))
        np.testing.assert_allclose(grid.prototypes[0], [3.0, 4.0])
        self.assertEqual(grid.step_counter, 1)

    def test_vanishing_rate_leaves_grid_unchanged(self):
        grid = SomGrid.random(3, 3, Area(10, 10), seed=2)
        late = SomGrid(3, 3, grid.prototypes, step_counter=10 ** 6)
        stepped = train_step(late, Position(5, 5), SomParams())
        np.testing.assert_array_equal(stepped.prototypes, grid.prototypes)

    def test_step_is_contraction(self):
        grid = SomGrid.random(5, 5, Area(100, 100), seed=8)
        p = Position(20.0, 70.0)
        stepped = train_step(grid, p, SomParams())
        target = np.array([p.x, p.y])
        before = np.linalg.norm(grid.prototypes - target, axis=1)
        after = np.linalg.norm(stepped.prototypes - target, axis=1)
        self.assertTrue(np.all(after <= before + 1e-12))

    def test_params_validation(self):
        with self.assertRaises(ConfigError):
            SomParams(alpha0=0.0)
        with self.assertRaises(ConfigError):
            SomParams(sigma_tau=-1.0)


class QuantizationTests(SimpleTestCase):
    def test_single_point(self):
        self.assertEqual(quantization_error(SomGrid(1, 1, [[0.0, 0.0]]), [Position(3, 4)]), 5.0)

    def test_exact_prototypes(self):
        points = [Position(1, 2), Position(5, 6)]
        self.assertEqual(quantization_error(SomGrid(2, 1, [[1, 2], [5, 6]]), points), 0.0)

    def test_empty_points(self):
        with self.assertRaises(EmptyInputError):
            quantization_error(SomGrid(1, 1, [[0, 0]]), [])

    def test_matches_brute_force(self):
        grid = SomGrid.random(4, 3, Area(50, 50), seed=3)
        rng = np.random.default_rng(3)
        points = [Position(float(x), float(y)) for x, y in rng.uniform(0, 50, size=(40, 2))]
        expected = np.mean([min(np.hypot(*(proto - [p.x, p.y])) for proto in grid.prototypes) for p in points])
        self.assertAlmostEqual(quantization_error(grid, points), expected, places=9)

    def test_error_drops_from_random_init(self):
        points, _ = clustered_points(seed=1)
        grid = SomGrid.random(8, 8, Area(1000, 1000), seed=1)
        trained = train_grid(grid, points, SomParams(steps=500), seed=1)
        self.assertLess(quantization_error(trained, points), quantization_error(grid, points))


class SomConvergenceTests(SimpleTestCase):
    def test_lattice_init_converges_on_clusters(self):
        points, labels = clustered_points(seed=2)
        grid = SomGrid.lattice(8, 8, Area(1000, 1000))
        initial = quantization_error(grid, points)
        trained = train_grid(grid, points, SomParams(steps=2000), seed=2)
        self.assertEqual(trained.step_counter, 2000)
        self.assertLessEqual(quantization_error(trained, points), 0.5 * initial)

        nodes = bmu_many(trained, np.array([p.as_tuple() for p in points]))
        majority = 0
        for node in set(nodes.tolist()):
            members = [labels[i] for i in range(len(points)) if nodes[i] == node]
            majority += max(members.count(label) for label in set(members))
        self.assertGreaterEqual(majority / len(points), 0.95)

    def test_checkpoint_round_trip(self):
        grid = train_step(SomGrid.random(3, 2, Area(10, 10), seed=5), Position(1, 1), SomParams())
        restored = grid_from_text(grid_to_text(grid))
        self.assertEqual((restored.width, restored.height, restored.step_counter), (3, 2, 1))
        np.testing.assert_array_equal(restored.prototypes, grid.prototypes)


class AssociateTests(SimpleTestCase):
    grid = SomGrid.lattice(2, 2, Area(100, 100))

    def test_empty_table_creates_ids(self):
        frame = Frame.from_points(0.0, [(1, 1), (50, 50), (90, 10)])
        assignment = associate(frame, LocationTable(), self.grid, gate=5.0)
        self.assertEqual(assignment.matches, {0: 1, 1: 2, 2: 3})
        self.assertEqual(assignment.created, frozenset({1, 2, 3}))
        self.assertEqual(assignment.next_id, 4)

    def test_match_within_gate(self):
        table = LocationTable({7: Position(0, 0)})
        assignment = associate(Frame.from_points(1.0, [(0.5, 0)]), table, self.grid, gate=2.0, next_id=8)
        self.assertEqual(assignment.matches, {0: 7})
        self.assertFalse(assignment.created)

    def test_outside_gate_gets_new_id(self):
        table = LocationTable({7: Position(0, 0)})
        assignment = associate(Frame.from_points(1.0, [(5, 0)]), table, self.grid, gate=2.0, next_id=8)
        self.assertEqual(assignment.matches, {0: 8})
        self.assertEqual(assignment.coasting, {7: 1})

    def test_globally_nearest_first(self):
        table = LocationTable({1: Position(0, 0), 2: Position(3, 0)})
        frame = Frame.from_points(1.0, [(1.0, 0), (2.9, 0)])
        assignment = associate(frame, table, self.grid, gate=5.0, next_id=3)
        self.assertEqual(assignment.matches, {0: 1, 1: 2})

    def test_injective(self):
        with self.assertRaises(ValueError):
            Assignment(matches={0: 1, 1: 1})

    def test_coast_then_retire(self):
        state = TaggerState.initial(Area(100, 100), 2, 2)
        state, _ = tag_frame(state, Frame.from_points(0.0, [(10, 10)]), SomParams(), 5.0, max_coast=5)
        for k in range(1, 6):
            state, assignment = tag_frame(state, Frame(float(k)), SomParams(), 5.0, max_coast=5)
            self.assertEqual(assignment.coasting, {1: k})
            self.assertIn(1, state.table)
        state, assignment = tag_frame(state, Frame(6.0), SomParams(), 5.0, max_coast=5)
        self.assertEqual(assignment.retired, frozenset({1}))
        self.assertNotIn(1, state.table)

    def test_deterministic(self):
        frames, _ = parallel_movers(n_frames=10)
        _, first = tag_sequence(frames)
        _, second = tag_sequence(frames)
        self.assertEqual([a.matches for a in first], [a.matches for a in second])


class TaggingAccuracyTests(SimpleTestCase):
    def test_noiseless_movers_keep_identity(self):
        frames, truth = parallel_movers()
        _, assignments = tag_sequence(frames)
        self.assertEqual(identity_accuracy(assignments, truth), 1.0)

    def test_noisy_movers(self):
        # noise sigma of 1% of the 500 m area extent
        frames, truth = parallel_movers(noise=5.0, seed=3)
        _, assignments = tag_sequence(frames)
        self.assertGreaterEqual(identity_accuracy(assignments, truth), 0.99)
