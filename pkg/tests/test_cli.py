import json

import pytest

from botguard.cli import main
from botguard.config import build_run_config, parse_flat_config
from botguard.errors import ConfigurationError
from botguard.stream import Mode

SEPARABLE_CONFIG = """
# separable end-to-end scenario
detector.radius = 1.0
detector.neighbor_threshold = 3
detector.window_span = 16.0
scenario.seed = 42
scenario.n_flows = 600
scenario.bot_fraction = 0.1
scenario.arrival_rate = 5.0
scenario.n_bot_sources = 1
scenario.n_legit_sources = 20
scenario.topology = centralized
pipeline.verify_delay = 2.0
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(SEPARABLE_CONFIG)
    return str(path)


class TestConfigParsing:
    def test_flat_keys_parse(self):
        values = parse_flat_config("detector.radius = 2.5\nscenario.seed = 7\n")
        assert values == {"detector.radius": 2.5, "scenario.seed": 7}

    def test_comments_and_blanks_ignored(self):
        values = parse_flat_config("# comment\n\ndetector.radius = 1.0  # tail\n")
        assert values == {"detector.radius": 1.0}

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError, match="unknown key"):
            parse_flat_config("detector.radiuss = 1.0\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigurationError, match="duplicate"):
            parse_flat_config("scenario.seed = 1\nscenario.seed = 2\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigurationError):
            parse_flat_config("scenario.seed = banana\n")

    def test_mode_parsing(self):
        config = build_run_config(parse_flat_config("detector.mode = approximate"))
        assert config.detector.mode is Mode.APPROXIMATE
        with pytest.raises(ConfigurationError):
            parse_flat_config("detector.mode = fuzzy")

    def test_seed_override(self):
        config = build_run_config({"scenario.seed": 1}, seed_override=99)
        assert config.scenario.seed == 99

    def test_mixture_override_must_still_sum_to_one(self):
        with pytest.raises(ConfigurationError):
            build_run_config({"scenario.mixture.irc_bot": 0.9})


class TestSimulateCommand:
    def test_writes_trace(self, tmp_path, config_file, capsys):
        out = str(tmp_path / "trace.jsonl")
        assert main(["simulate", "--config", config_file, "--out", out]) == 0
        lines = open(out).read().splitlines()
        assert len(lines) == 600
        assert "wrote 600 flows" in capsys.readouterr().out

    def test_rerun_byte_identical(self, tmp_path, config_file):
        out1, out2 = str(tmp_path / "a.jsonl"), str(tmp_path / "b.jsonl")
        main(["simulate", "--config", config_file, "--out", out1])
        main(["simulate", "--config", config_file, "--out", out2])
        assert open(out1, "rb").read() == open(out2, "rb").read()

    def test_invalid_mixture_exits_nonzero(self, tmp_path, capsys):
        conf = tmp_path / "bad.conf"
        conf.write_text(
            "scenario.mixture.irc_bot = 0.9\nscenario.mixture.http_bot = 0.6\n"
        )
        out = str(tmp_path / "trace.jsonl")
        assert main(["simulate", "--config", str(conf), "--out", out]) == 1
        assert "configuration error" in capsys.readouterr().err

    def test_unwritable_path_exits_two(self, config_file, capsys):
        code = main(["simulate", "--config", config_file,
                     "--out", "/nonexistent-dir/trace.jsonl"])
        assert code == 2


class TestDetectCommand:
    def test_separable_scenario_blocks_every_bot(self, tmp_path, config_file):
        trace = str(tmp_path / "trace.jsonl")
        verdicts = str(tmp_path / "verdicts.jsonl")
        main(["simulate", "--config", config_file, "--out", trace])
        assert main(["detect", "--config", config_file,
                     "--trace", trace, "--out", verdicts]) == 0
        flows = [json.loads(line) for line in open(trace)]
        records = [json.loads(line) for line in open(verdicts)]
        by_link = {r["link_id"]: r["verdict"] for r in records
                   if r["verdict"] in ("allow", "block")}
        for flow in flows:
            expected = "block" if flow["ground_truth"] != "legit" else "allow"
            assert by_link[flow["flow_id"]] == expected

    def test_pure_legit_trace_has_zero_blocks(self, tmp_path):
        conf = tmp_path / "legit.conf"
        conf.write_text(
            "scenario.seed = 8\nscenario.n_flows = 500\n"
            "scenario.bot_fraction = 0.0\nscenario.arrival_rate = 5.0\n"
        )
        trace = str(tmp_path / "trace.jsonl")
        verdicts = str(tmp_path / "verdicts.jsonl")
        main(["simulate", "--config", str(conf), "--out", trace])
        main(["detect", "--config", str(conf), "--trace", trace, "--out", verdicts])
        records = [json.loads(line) for line in open(verdicts)]
        assert all(r["verdict"] == "allow" for r in records)

    def test_empty_trace(self, tmp_path, config_file):
        trace = tmp_path / "empty.jsonl"
        trace.write_text("")
        verdicts = str(tmp_path / "verdicts.jsonl")
        assert main(["detect", "--config", config_file,
                     "--trace", str(trace), "--out", verdicts]) == 0
        assert open(verdicts).read() == ""

    def test_malformed_trace_line_exits_two(self, tmp_path, config_file, capsys):
        trace = tmp_path / "bad.jsonl"
        trace.write_text("{broken\n")
        verdicts = str(tmp_path / "verdicts.jsonl")
        assert main(["detect", "--config", config_file,
                     "--trace", str(trace), "--out", verdicts]) == 2
        assert "line 1" in capsys.readouterr().err


class TestEvaluateCommand:
    def run_pipeline(self, tmp_path, config_file):
        trace = str(tmp_path / "trace.jsonl")
        verdicts = str(tmp_path / "verdicts.jsonl")
        report = str(tmp_path / "report.json")
        main(["simulate", "--config", config_file, "--out", trace])
        main(["detect", "--config", config_file, "--trace", trace, "--out", verdicts])
        code = main(["evaluate", "--config", config_file, "--trace", trace,
                     "--verdicts", verdicts, "--out", report])
        return code, trace, verdicts, report

    def test_perfect_run_scores_one(self, tmp_path, config_file, capsys):
        code, _, _, report_path = self.run_pipeline(tmp_path, config_file)
        assert code == 0
        report = json.loads(open(report_path).read())
        assert report["detection_rate"] == 1.0
        assert report["false_positive_rate"] <= 0.01
        assert report["seed"] == 42
        assert "detection_rate: 1.0" in capsys.readouterr().out

    def test_mismatched_files_exit_three(self, tmp_path, config_file, capsys):
        code, trace, verdicts, _ = self.run_pipeline(tmp_path, config_file)
        short = tmp_path / "short.jsonl"
        lines = open(trace).read().splitlines()
        short.write_text("\n".join(lines[:100]) + "\n")
        out = str(tmp_path / "report2.json")
        assert main(["evaluate", "--config", config_file, "--trace", str(short),
                     "--verdicts", verdicts, "--out", out]) == 3
        assert "incomplete run" in capsys.readouterr().err

    def test_round_trip_byte_identical(self, tmp_path, config_file):
        _, trace1, verdicts1, report1 = self.run_pipeline(tmp_path, config_file)
        sub = tmp_path / "second"
        sub.mkdir()
        _, trace2, verdicts2, report2 = self.run_pipeline(sub, config_file)
        for a, b in ((trace1, trace2), (verdicts1, verdicts2), (report1, report2)):
            assert open(a, "rb").read() == open(b, "rb").read()


class TestDemoGate:
    def test_transcript_order_and_outcomes(self, capsys):
        assert main(["demo-gate"]) == 0
        out = capsys.readouterr().out
        assert "wrong captcha, valid credentials: rejected_captcha" in out
        assert "valid captcha, wrong password: rejected_credentials" in out
        assert "valid captcha, unknown user: rejected_credentials" in out
        assert "valid session: admitted" in out
        assert "expired captcha accepted: False" in out
        assert "reused captcha accepted: False" in out
        assert "retry after block: rejected_blocked" in out
        # captcha rejection is printed before any credential outcome
        assert out.index("rejected_captcha") < out.index("rejected_credentials")
