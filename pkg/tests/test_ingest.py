from __future__ import annotations

import http.server
import json
import math
import threading

import pytest

from uavbench import datamodel as dm
from uavbench import geo, ingest
from uavbench.datamodel import InstructionForm, TaskType
from uavbench.geo import OutOfRange


def east_flight_log(t0=100.0, duration=4.0, dt=0.1, speed=1.0, lat0=47.0, lon0=8.0):
    """Constant eastward flight at `speed` m/s, sampled every dt."""
    lon_rate = speed / (math.cos(math.radians(lat0)) * geo.DEG_TO_M)
    rows = ["t_wall,lat,lon,alt,roll_deg,pitch_deg,yaw_deg"]
    t = t0
    while t <= t0 + duration + 1e-9:
        rows.append(f"{t!r},{lat0!r},{lon0 + (t - t0) * lon_rate!r},50.0,0,0,90")
        t = round(t + dt, 9)
    return ingest.parse_flight_log("\n".join(rows).encode())


def frame_index(t0=100.0, duration=4.0, dt=0.3):
    rows = []
    t = t0
    k = 0
    while t <= t0 + duration + 1e-9:
        rows.append(f"{t!r},cam/{k:05d}.jpg")
        t = round(t + dt, 9)
        k += 1
    return ingest.parse_frame_index("\n".join(rows).encode())


class TestParsing:
    def test_header_and_comment_lines_skipped(self):
        log = east_flight_log()
        assert len(log.times) == 41
        assert log.t_start == 100.0

    def test_angles_converted_to_radians(self):
        log = east_flight_log()
        assert log.poses[0].yaw == pytest.approx(math.pi / 2)

    def test_latitude_validation(self):
        bad = b"0.0,95.0,8.0,50.0,0,0,0\n"
        with pytest.raises(dm.ParseError) as e:
            ingest.parse_flight_log(bad)
        assert "latitude" in str(e.value)

    def test_non_monotone_rejected(self):
        rows = b"0.0,47.0,8.0,50.0,0,0,0\n0.0,47.0,8.0,50.0,0,0,0\n"
        with pytest.raises(ingest.NonMonotoneTimestamp):
            ingest.parse_flight_log(rows)

    def test_frame_index_rejects_missing_ref(self):
        with pytest.raises(dm.ParseError):
            ingest.parse_frame_index(b"1.0\n")


class TestInterpolation:
    def test_exact_at_sample_times(self):
        log = east_flight_log()
        for i in (0, 7, 40):
            p = ingest.interpolate_state(log, log.times[i])
            assert p == log.poses[i]

    def test_linear_between_samples(self):
        log = east_flight_log(speed=2.0)
        p = ingest.interpolate_state(log, 100.05)
        local = geo.gps_to_local(log.poses[0], p)
        assert local.x == pytest.approx(0.1, abs=1e-9)

    def test_angle_interpolation_shortest_arc(self):
        rows = (
            b"0.0,47.0,8.0,50.0,0,0,170\n"
            b"1.0,47.0,8.0,50.0,0,0,-170\n"
        )
        log = ingest.parse_flight_log(rows)
        p = ingest.interpolate_state(log, 0.5)
        assert p.yaw == pytest.approx(math.pi)

    def test_out_of_range(self):
        log = east_flight_log()
        with pytest.raises(OutOfRange):
            ingest.interpolate_state(log, 99.0)
        with pytest.raises(OutOfRange):
            ingest.interpolate_state(log, 105.0)


class TestAlignAndResample:
    def test_two_seconds_gives_eleven_frames(self):
        episode = ingest.align_and_resample(
            east_flight_log(duration=2.0), frame_index(duration=2.0, dt=0.25)
        )
        assert len(episode.frames) == 11

    def test_first_frame_is_zero_pose(self):
        episode = ingest.align_and_resample(east_flight_log(), frame_index())
        p = episode.frames[0].pose
        assert (p.x, p.y, p.z, p.roll, p.pitch, p.yaw) == (0, 0, 0, 0, 0, 0)

    def test_constant_speed_east_positions(self):
        # 1 m/s east: frame k sits at x = 0.2 k.
        episode = ingest.align_and_resample(east_flight_log(), frame_index())
        for k, f in enumerate(episode.frames):
            assert f.pose.x == pytest.approx(0.2 * k, abs=1e-9)
            assert f.pose.y == pytest.approx(0.0, abs=1e-9)

    def test_spacing_is_exact(self):
        episode = ingest.align_and_resample(east_flight_log(), frame_index())
        for i in range(1, len(episode.frames)):
            dt = episode.frames[i].t - episode.frames[i - 1].t
            assert abs(dt - 0.2) < 1e-9

    def test_grid_anchored_at_first_common_timestamp(self):
        log = east_flight_log(t0=100.0)
        frames = frame_index(t0=100.65)
        episode = ingest.align_and_resample(log, frames)
        # Origin pose equals the log interpolated at 100.65.
        expected = ingest.interpolate_state(log, 100.65)
        assert episode.origin == expected

    def test_nearest_frame_tie_breaks_earlier(self):
        log = east_flight_log(duration=1.0)
        # Grid anchors at 100.0; that tick is equidistant from 99.9 and 100.1.
        frames = ingest.parse_frame_index(b"99.9,early\n100.1,late\n101.0,far\n")
        episode = ingest.align_and_resample(log, frames)
        assert episode.frames[0].obs_ref == "early"

    def test_insufficient_overlap(self):
        log = east_flight_log(duration=4.0)
        frames = ingest.parse_frame_index(b"103.8,a\n103.9,b\n104.0,c\n")
        with pytest.raises(ingest.NoOverlap):
            ingest.align_and_resample(log, frames)

    def test_produces_serializable_episode(self):
        episode = ingest.align_and_resample(east_flight_log(), frame_index())
        assert dm.validate_episode(episode, v_max=2.0) == []
        back = dm.deserialize_episode(dm.serialize_episode(episode))
        assert back.id == episode.id


class TestDiversify:
    def fixed_pass_side(self):
        return dm.make_instruction(
            TaskType.PASS_SIDE, {"target": "car", "side": "right"}
        )

    def test_fallback_table_produces_n_variants(self):
        out = ingest.diversify_instruction(self.fixed_pass_side(), None, 2)
        assert len(out) == 2
        for ins in out:
            assert ins.form is InstructionForm.OPEN_VOCAB
            assert ins.task_type is TaskType.PASS_SIDE
            assert ins.params == self.fixed_pass_side().params
            assert "right" in ins.text

    def test_fallback_is_deterministic(self):
        a = ingest.diversify_instruction(self.fixed_pass_side(), None, 3)
        b = ingest.diversify_instruction(self.fixed_pass_side(), None, 3)
        assert [i.text for i in a] == [i.text for i in b]

    def test_distance_mentioned_verbatim(self):
        fixed = dm.make_instruction(TaskType.TAKEOFF, {"distance": 7.5})
        out = ingest.diversify_instruction(fixed, None, 3)
        for ins in out:
            assert "7.5" in ins.text

    def test_generator_output_validated(self):
        fixed = self.fixed_pass_side()
        with pytest.raises(ingest.ValidationFailed):
            ingest.diversify_instruction(fixed, lambda prompt: "fly anywhere", 1)

    def test_generator_failure_raises(self):
        def broken(prompt):
            raise ConnectionError("down")

        with pytest.raises(ingest.GeneratorUnavailable):
            ingest.diversify_instruction(self.fixed_pass_side(), broken, 1)

    def test_generator_failure_falls_back_when_configured(self):
        def broken(prompt):
            raise ConnectionError("down")

        out = ingest.diversify_instruction(
            self.fixed_pass_side(), broken, 2, fallback_on_error=True
        )
        assert len(out) == 2

    def test_http_generator_round_trip(self):
        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                n = int(self.headers["Content-Length"])
                prompt = json.loads(self.rfile.read(n))["prompt"]
                reply = json.dumps(
                    {"text": "pass the object on its right side"}
                ).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(reply)))
                self.end_headers()
                self.wfile.write(reply)

            def log_message(self, *args):
                pass

        server = http.server.HTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{server.server_port}/"
            gen = ingest.HttpTextGenerator(url, timeout=5.0)
            out = ingest.diversify_instruction(self.fixed_pass_side(), gen, 1)
            assert out[0].text == "pass the object on its right side"
        finally:
            server.shutdown()

    def test_http_generator_unreachable(self):
        gen = ingest.HttpTextGenerator("http://127.0.0.1:1/", timeout=0.2)
        with pytest.raises(ingest.GeneratorUnavailable):
            ingest.diversify_instruction(self.fixed_pass_side(), gen, 1)


class TestParseCommand:
    def test_canonical_round_trip(self):
        for task_type, params in (
            (TaskType.TAKEOFF, {"distance": 5.0}),
            (TaskType.TRANSLATE, {"distance": 3.5, "angle": math.pi / 2}),
            (TaskType.ROTATE, {"angle": -math.pi / 2}),
            (TaskType.PASS_SIDE, {"target": "car", "side": "left"}),
            (TaskType.ORBIT, {"target": "car"}),
        ):
            text = dm.canonical_text(task_type, params)
            parsed = ingest.parse_command(text)
            assert parsed is not None
            got_type, got_params = parsed
            assert got_type is task_type
            if "distance" in params:
                assert got_params["distance"] == pytest.approx(params["distance"])
            if "angle" in params:
                assert got_params["angle"] == pytest.approx(params["angle"], abs=1e-3)
            if "side" in params:
                assert got_params["side"] == params["side"]

    def test_variants_parse_too(self):
        fixed = dm.make_instruction(TaskType.DIVE, {"distance": 4.0})
        for ins in ingest.diversify_instruction(fixed, None, 3):
            parsed = ingest.parse_command(ins.text)
            assert parsed is not None and parsed[0] is TaskType.DIVE

    def test_unknown_text_returns_none(self):
        assert ingest.parse_command("do a barrel roll") is None


class TestCommandSetIO:
    def test_render_parse_round_trip(self):
        rendered = ingest.render_command_set(ingest.DEFAULT_COMMAND_SET)
        back = ingest.parse_command_set(rendered)
        assert back.templates == ingest.DEFAULT_COMMAND_SET.templates
        assert back.variants == ingest.DEFAULT_COMMAND_SET.variants

    def test_missing_template_rejected(self):
        with pytest.raises(dm.ParseError):
            ingest.parse_command_set("template\ttakeoff\tgo up\n")


class TestDatasetStats:
    def episodes(self, counts: dict[TaskType, int]):
        out = []
        k = 0
        for task_type, n in counts.items():
            for _ in range(n):
                if task_type is TaskType.TRANSLATE:
                    params = {"distance": 5.0, "angle": 0.0}
                else:
                    params = {"angle": math.pi / 2}
                frames = (
                    dm.Frame(0.0, geo.LocalPose(0, 0, 0, 0, 0, 0), "a"),
                    dm.Frame(0.2, geo.LocalPose(0.3, 0, 0, 0, 0, 0), "b"),
                )
                out.append(
                    dm.Episode(
                        id=f"ep-{k}",
                        instruction=dm.make_instruction(task_type, params),
                        origin=None,
                        frames=frames,
                        source=dm.EpisodeSource.SIM_RULE,
                    )
                )
                k += 1
        return out

    def test_composition_reproduced_exactly(self):
        eps = self.episodes({TaskType.TRANSLATE: 6, TaskType.ROTATE: 4})
        stats = ingest.dataset_stats(eps)
        assert stats.count == 10
        assert stats.type_distribution[TaskType.TRANSLATE] == pytest.approx(0.6)
        assert stats.type_distribution[TaskType.ROTATE] == pytest.approx(0.4)
        assert abs(sum(stats.type_distribution.values()) - 1.0) < 1e-9

    def test_histogram_counts_sum_to_count(self):
        eps = self.episodes({TaskType.TRANSLATE: 6, TaskType.ROTATE: 4})
        stats = ingest.dataset_stats(eps)
        assert sum(stats.distance_histogram) == stats.count

    def test_empty_set(self):
        stats = ingest.dataset_stats([])
        assert stats.count == 0
        assert stats.type_distribution == {}
        assert sum(stats.distance_histogram) == 0

    def test_table_and_summary_forms(self):
        eps = self.episodes({TaskType.TRANSLATE: 3, TaskType.ROTATE: 1})
        stats = ingest.dataset_stats(eps)
        table = ingest.stats_table(stats)
        assert "translate\t3\t0.750000" in table
        summary = ingest.stats_summary(stats)
        assert summary["type_counts"]["rotate"] == 1
        json.dumps(summary)  # must be JSON-serializable
