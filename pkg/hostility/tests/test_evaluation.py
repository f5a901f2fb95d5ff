import numpy as np
from django.test import SimpleTestCase

from services.evaluation import evaluate_reports, identity_accuracy, object_outcomes, roc_auc
from services.exceptions import EmptyInputError
from services.simgen import GroundTruth
from services.tagger_som import Assignment


def brute_force_auc(scores):
    positives = [p for p, y in scores if y]
    negatives = [p for p, y in scores if not y]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in positives for b in negatives)
    return wins / (len(positives) * len(negatives))


def object_row(truth_id, hostile, neural, entry=10.0, alert=None, object_id=None):
    return {
        "object_id": truth_id if object_id is None else object_id,
        "truth_id": truth_id,
        "hostile": hostile,
        "max_p": {"neural": neural, "analytic": neural / 2, "template": 0.0},
        "first_entry_time": entry,
        "first_alert": {"neural": alert, "analytic": None, "template": None},
        "act_time": None,
    }


class RocAucTests(SimpleTestCase):
    def test_perfect_separation(self):
        self.assertEqual(roc_auc([(0.9, True), (0.8, True), (0.2, False), (0.1, False)]), 1.0)
        self.assertEqual(roc_auc([(0.1, True), (0.9, False)]), 0.0)

    def test_ties_count_half(self):
        self.assertEqual(roc_auc([(0.5, True), (0.5, False)]), 0.5)

    def test_matches_pairwise_count(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(4, 40))
            p = np.round(rng.random(n), 2)
            labels = rng.random(n) < 0.5
            labels[0], labels[1] = True, False
            scores = list(zip(p.tolist(), labels.tolist()))
            self.assertAlmostEqual(roc_auc(scores), brute_force_auc(scores), delta=1e-12)

    def test_random_scores_near_half(self):
        rng = np.random.default_rng(1)
        scores = list(zip(rng.random(10_000).tolist(), (rng.random(10_000) < 0.5).tolist()))
        self.assertAlmostEqual(roc_auc(scores), 0.5, delta=0.03)

    def test_single_class(self):
        with self.assertRaises(EmptyInputError):
            roc_auc([(0.3, True), (0.7, True)])


class IdentityAccuracyTests(SimpleTestCase):
    def test_swap_halfway(self):
        truth = GroundTruth((), ((0, 1), (0, 1), (0, 1), (0, 1)))
        assignments = [Assignment(matches={0: 1, 1: 2})] * 2 + [Assignment(matches={0: 2, 1: 1})] * 2
        self.assertEqual(identity_accuracy(assignments, truth), 0.5)

    def test_no_blips(self):
        with self.assertRaises(EmptyInputError):
            identity_accuracy([Assignment(matches={})], GroundTruth((), ((),)))


class EvaluateReportsTests(SimpleTestCase):
    def reports(self):
        first = {"objects": [
            object_row(0, True, 0.95, entry=10.0, alert=14.0),
            object_row(1, False, 0.2),
            object_row(2, False, 0.8),
        ], "misses": []}
        second = {"objects": [
            object_row(0, True, 0.4),
            object_row(1, False, 0.1),
            {**object_row(2, False, 0.0), "truth_id": None},
        ], "misses": [{"object_id": 0, "act_time": 50.0, "first_alert_time": None}]}
        return [("scenario_000", first), ("scenario_001", second)]

    def test_confusion_counts(self):
        with self.assertLogs("services.evaluation", level="WARNING"):
            report = evaluate_reports(self.reports(), theta=0.7)
        self.assertEqual((report.tp, report.fp, report.tn, report.fn), (1, 1, 2, 1))
        self.assertEqual(report.precision, 0.5)
        self.assertEqual(report.recall, 0.5)
        self.assertEqual(report.mean_time_to_alert, 4.0)
        self.assertAlmostEqual(report.roc_auc["neural"], 5 / 6, places=12)
        self.assertEqual(report.scenarios[1]["misses"], 1)
        self.assertEqual(len(report.object_frame()), 5)

    def test_single_class_auc_is_undefined(self):
        reports = [("quiet", {"objects": [object_row(0, False, 0.1), object_row(1, False, 0.3)]})]
        with self.assertLogs("services.evaluation", level="WARNING"):
            report = evaluate_reports(reports, theta=0.7)
        self.assertIsNone(report.roc_auc["neural"])
        self.assertIsNone(report.precision)
        self.assertIsNone(report.recall)

    def test_fragments_collapse_onto_truth(self):
        rows = [object_row(0, True, 0.3, entry=12.0, object_id=4),
                object_row(0, True, 0.9, entry=20.0, alert=22.0, object_id=7)]
        [outcome] = object_outcomes("split", {"objects": rows})
        self.assertEqual(outcome.max_p["neural"], 0.9)
        self.assertEqual(outcome.first_entry_time, 12.0)
        self.assertEqual(outcome.first_alert_time, 22.0)

    def test_nothing_to_evaluate(self):
        with self.assertRaises(EmptyInputError):
            evaluate_reports([], theta=0.7)
        with self.assertRaises(EmptyInputError):
            evaluate_reports([("blank", {"objects": []})], theta=0.7)
