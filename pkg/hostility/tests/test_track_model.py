import math
import os
import tempfile

import numpy as np
from django.test import SimpleTestCase

from services.exceptions import ConfigError, EmptyWindowError, RecordFormatError
from services.track_model import (
    CircleZone,
    Frame,
    LocationTable,
    PolygonZone,
    Position,
    Track,
    contains,
    format_object_id,
    frame_from_line,
    frame_to_line,
    path_length,
    read_frames,
    record_entry,
    update_location_table,
    write_frames,
    zone_from_text,
    zone_to_text,
)


def make_track(points, object_id=1, dt=1.0):
    track = Track.start(object_id, 0.0, Position(*points[0]))
    for k, p in enumerate(points[1:], 1):
        track = track.append(k * dt, Position(*p))
    return track


def ray_cast(vertices, x, y):
    inside = False
    n = len(vertices)
    for i in range(n):
        (x1, y1), (x2, y2) = vertices[i], vertices[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            if x < x1 + (y - y1) * (x2 - x1) / (y2 - y1):
                inside = not inside
    return inside


class ContainsTests(SimpleTestCase):
    def test_circle_inside_and_outside(self):
        zone = CircleZone(Position(0, 0), 5)
        self.assertTrue(contains(zone, Position(3, 3)))
        self.assertFalse(contains(zone, Position(6, 0)))

    def test_circle_boundary_is_inclusive(self):
        self.assertTrue(contains(CircleZone(Position(0, 0), 5), Position(5, 0)))

    def test_pentagon_matches_ray_casting(self):
        corners = [(10 * math.cos(math.radians(90 + 72 * k)), 10 * math.sin(math.radians(90 + 72 * k)))
                   for k in range(5)]
        zone = PolygonZone(tuple(Position(x, y) for x, y in corners))
        rng = np.random.default_rng(7)
        for x, y in rng.uniform(-12, 12, size=(1000, 2)):
            self.assertEqual(contains(zone, Position(x, y)), ray_cast(corners, x, y), (x, y))

    def test_rigid_motion_invariance(self):
        zone_pts = [(0, 0), (4, 0), (5, 3), (1, 4)]
        rng = np.random.default_rng(3)
        angle, dx, dy = 0.7, 12.0, -5.0

        def move(x, y):
            return Position(x * math.cos(angle) - y * math.sin(angle) + dx,
                            x * math.sin(angle) + y * math.cos(angle) + dy)

        zone = PolygonZone(tuple(Position(*p) for p in zone_pts))
        moved = PolygonZone(tuple(move(*p) for p in zone_pts))
        for x, y in rng.uniform(-1, 6, size=(300, 2)):
            self.assertEqual(zone.contains(Position(x, y)), moved.contains(move(x, y)))

    def test_polygon_validation(self):
        with self.assertRaises(ConfigError):
            PolygonZone((Position(0, 0), Position(1, 0)))
        # clockwise
        with self.assertRaises(ConfigError):
            PolygonZone((Position(0, 0), Position(0, 1), Position(1, 1), Position(1, 0)))
        with self.assertRaises(ConfigError):
            CircleZone(Position(0, 0), 0)

    def test_zone_text_form(self):
        zone = PolygonZone((Position(0, 0), Position(4, 0), Position(0, 3)))
        self.assertEqual(zone_from_text(zone_to_text(zone)), zone)
        self.assertEqual(zone_from_text("circle 1 2 3"), CircleZone(Position(1, 2), 3))
        with self.assertRaises(RecordFormatError):
            zone_from_text("hexagon 1 2")


class RecordEntryTests(SimpleTestCase):
    zone = CircleZone(Position(0, 0), 5)

    def test_never_inside(self):
        self.assertIsNone(record_entry(make_track([(10, 0), (9, 0), (8, 0)]), self.zone))

    def test_first_inside_sample(self):
        entry = record_entry(make_track([(6, 0), (4, 0), (2, 0)]), self.zone)
        self.assertEqual(entry.entry_point, Position(4, 0))
        self.assertEqual(entry.entry_time, 1.0)
        self.assertTrue(contains(self.zone, entry.entry_point))

    def test_prior_kept_while_inside(self):
        track = make_track([(6, 0), (4, 0)])
        prior = record_entry(track, self.zone)
        track = track.append(2.0, Position(1, 1))
        self.assertIs(record_entry(track, self.zone, prior), prior)

    def test_reentry_gives_new_entry(self):
        track = make_track([(6, 0), (4, 0)])
        prior = record_entry(track, self.zone)
        track = track.append(2.0, Position(6, 0))
        self.assertIsNone(record_entry(track, self.zone, prior))
        track = track.append(3.0, Position(3, 0))
        entry = record_entry(track, self.zone, prior)
        self.assertEqual(entry.entry_point, Position(3, 0))
        self.assertEqual(entry.entry_time, 3.0)

    def test_track_starting_inside(self):
        entry = record_entry(make_track([(1, 0), (2, 0)]), self.zone)
        self.assertEqual(entry.entry_time, 0.0)


class PathLengthTests(SimpleTestCase):
    def test_single_point(self):
        self.assertEqual(path_length(make_track([(1, 1)]), 0.0), 0.0)

    def test_three_four(self):
        self.assertEqual(path_length(make_track([(0, 0), (3, 0), (3, 4)]), 0.0), 7.0)

    def test_window_after_last_sample(self):
        with self.assertRaises(EmptyWindowError):
            path_length(make_track([(0, 0), (3, 0)]), 5.0)

    def test_random_walk_against_fsum(self):
        rng = np.random.default_rng(11)
        points = np.cumsum(rng.normal(size=(101, 2)), axis=0)
        track = make_track([tuple(p) for p in points])
        expected = math.fsum(math.dist(points[i], points[i + 1]) for i in range(100))
        self.assertAlmostEqual(path_length(track, 0.0), expected, delta=1e-9)

    def test_additive_over_split(self):
        rng = np.random.default_rng(5)
        points = [tuple(p) for p in rng.uniform(0, 100, size=(20, 2))]
        whole = path_length(make_track(points), 0.0)
        head = path_length(make_track(points[:8]), 0.0)
        tail = path_length(make_track(points), 7.0)
        self.assertAlmostEqual(whole, head + tail, delta=1e-9)

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(9)
        points = rng.uniform(0, 100, size=(30, 2))
        angle = 1.1
        rotation = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        moved = points @ rotation.T + np.array([250.0, -40.0])
        a = path_length(make_track([tuple(p) for p in points]), 0.0)
        b = path_length(make_track([tuple(p) for p in moved]), 0.0)
        self.assertLess(abs(a - b), 1e-9)


class LocationTableTests(SimpleTestCase):
    def test_insert(self):
        table = update_location_table(LocationTable(), 1, Position(124, 256))
        self.assertEqual(table.get(1), Position(124, 256))
        self.assertEqual(table.rows(), [("001", 124, 256)])

    def test_overwrite(self):
        table = update_location_table(LocationTable(), 1, Position(124, 256))
        table = update_location_table(table, 1, Position(130, 250))
        self.assertEqual(len(table), 1)
        self.assertEqual(table.get(1), Position(130, 250))

    def test_five_rows(self):
        rows = [(1, 124, 256), (2, 300, 120), (3, 48, 77), (4, 512, 640), (5, 90, 410)]
        table = LocationTable()
        for object_id, x, y in rows:
            table = update_location_table(table, object_id, Position(x, y))
        self.assertEqual(len(table), 5)
        self.assertEqual(table.ids, [1, 2, 3, 4, 5])

    def test_copy_on_update(self):
        empty = LocationTable()
        update_location_table(empty, 7, Position(1, 1))
        self.assertEqual(len(empty), 0)
        self.assertEqual(format_object_id(7), "007")


class FrameCodecTests(SimpleTestCase):
    def test_line_round_trip(self):
        frame = Frame.from_points(2.5, [(0.1, 1e-7), (1234.5678901234, -3.0)])
        self.assertEqual(frame_from_line(frame_to_line(frame)), frame)

    def test_empty_frame_line(self):
        self.assertEqual(frame_from_line(frame_to_line(Frame(4.0))), Frame(4.0))

    def test_malformed_line(self):
        with self.assertRaises(RecordFormatError):
            frame_from_line("(1,2) (3,4)")
        with self.assertRaises(RecordFormatError):
            frame_from_line("t=1.0; (1,2) junk")

    def test_jsonl_and_text_files(self):
        frames = [Frame.from_points(t * 2.0, [(t + 0.3, 2 * t + 0.7)]) for t in range(5)]
        with tempfile.TemporaryDirectory() as tmp:
            for name in ("frames.jsonl", "frames.txt"):
                path = os.path.join(tmp, name)
                write_frames(path, frames)
                self.assertEqual(read_frames(path), frames)

    def test_frame_rejects_mismatched_blip_time(self):
        from services.track_model import Blip
        with self.assertRaises(ValueError):
            Frame(1.0, (Blip(Position(0, 0), 2.0),))
