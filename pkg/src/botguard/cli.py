"""Command-line entry point: simulate, detect, evaluate, demo-gate.

Exit codes: 0 success, 1 configuration error, 2 I/O or parse error,
3 incomplete run (trace and verdict log do not match).
"""

import argparse
import json
import sys
from collections import Counter

from . import metrics, simulate
from .config import load_run_config
from .errors import (
    ConfigurationError, IncompleteRunError, OrderingError, TraceParseError,
)
from .pipeline import (
    AdmissionResult, BlockList, CaptchaGate, CredentialStore,
    DetectionPipeline, SessionRequest, replay_flows,
)
from .stream import Detector

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_INCOMPLETE = 3


def build_pipeline(config):
    detector = Detector(config.detector)
    captcha = CaptchaGate(seed=config.scenario.seed, ttl=config.captcha_ttl)
    credentials = CredentialStore(salt_seed=config.scenario.seed)
    return DetectionPipeline(
        detector, captcha, credentials, BlockList(),
        verify_delay=config.verify_delay,
    )


def cmd_simulate(args) -> int:
    config = load_run_config(args.config, seed_override=args.seed)
    flows = simulate.generate(config.scenario)
    simulate.write_trace(flows, args.out)
    counts = Counter(flow.ground_truth for flow in flows)
    print(f"wrote {len(flows)} flows to {args.out}")
    for cls in simulate.GROUND_TRUTH_VALUES:
        if counts[cls]:
            print(f"  {cls}: {counts[cls]}")
    return EXIT_OK


def cmd_detect(args) -> int:
    config = load_run_config(args.config, seed_override=args.seed)
    flows = simulate.read_trace(args.trace)
    pipeline = build_pipeline(config)
    records = replay_flows(flows, pipeline)
    with open(args.out, "w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    blocks = sum(1 for r in records if r["verdict"] == "block")
    print(f"wrote {len(records)} verdict records to {args.out}")
    print(f"  blocked flows: {blocks}")
    print(f"  blocked sources: {len(pipeline.blocklist)}")
    print(f"  counter-probe events: {len(pipeline.fightback_events)}")
    return EXIT_OK


def read_verdicts(path) -> list:
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceParseError(line_no, f"invalid JSON: {exc}") from exc
            missing = [f for f in ("verdict", "link_id") if f not in record]
            if missing:
                raise TraceParseError(line_no, f"missing fields {missing}")
            records.append(record)
    return records


def cmd_evaluate(args) -> int:
    config = load_run_config(args.config, seed_override=args.seed)
    flows = simulate.read_trace(args.trace)
    records = read_verdicts(args.verdicts)
    params = {
        "radius": config.detector.radius,
        "neighbor_threshold": config.detector.neighbor_threshold,
        "window_span": config.detector.window_span,
        "mode": config.detector.mode.value,
        "verify_delay": config.verify_delay,
    }
    report = metrics.evaluate_run(
        flows, records, seed=config.scenario.seed, params=params
    )
    metrics.write_report(report, args.out)
    rate = report["detection_rate"]
    print(f"detection_rate: {'undefined' if rate is None else rate}")
    fpr = report["false_positive_rate"]
    print(f"false_positive_rate: {'undefined' if fpr is None else fpr}")
    print(f"wrote report to {args.out}")
    return EXIT_OK


def cmd_demo_gate(args) -> int:
    """Scripted, interaction-free walk through the admission gates."""
    config = load_run_config(args.config, seed_override=args.seed)
    captcha = CaptchaGate(seed=config.scenario.seed, ttl=config.captcha_ttl)
    credentials = CredentialStore(salt_seed=config.scenario.seed)
    credentials.register("alice", "correct-horse")
    pipeline = DetectionPipeline(
        Detector(config.detector), captcha, credentials, BlockList(),
        verify_delay=config.verify_delay,
    )

    def attempt(label, source, answer_of, username, password, now):
        challenge = captcha.issue(now)
        session = SessionRequest(
            session_id=f"demo-{label}",
            source_ref=source,
            challenge_id=challenge.challenge_id,
            captcha_answer=answer_of(challenge),
            username=username,
            password=password,
            timestamp=now,
        )
        result = pipeline.admit(session, now)
        print(f"[{now:6.1f}] {label}: {result.value}")
        return result

    print("admission gate demo (order: blocklist -> captcha -> credentials)")
    attempt("wrong captcha, valid credentials", "host-a",
            lambda ch: "WRONG!", "alice", "correct-horse", 1.0)
    attempt("valid captcha, wrong password", "host-a",
            lambda ch: ch.code, "alice", "bad-password", 2.0)
    attempt("valid captcha, unknown user", "host-a",
            lambda ch: ch.code, "mallory", "whatever", 3.0)
    attempt("valid session", "host-a",
            lambda ch: ch.code, "alice", "correct-horse", 4.0)

    stale = captcha.issue(5.0)
    ok = captcha.verify(stale.challenge_id, stale.code, 5.0 + config.captcha_ttl + 1)
    print(f"[{5.0 + config.captcha_ttl + 1:6.1f}] expired captcha accepted: {ok}")
    reused = captcha.issue(6.0)
    captcha.verify(reused.challenge_id, reused.code, 6.0)
    ok = captcha.verify(reused.challenge_id, reused.code, 7.0)
    print(f"[   7.0] reused captcha accepted: {ok}")

    pipeline.blocklist.block("host-a", 8.0)
    print("[   8.0] host-a added to blocklist")
    result = attempt("retry after block", "host-a",
                     lambda ch: ch.code, "alice", "correct-horse", 9.0)
    assert result is AdmissionResult.REJECTED_BLOCKED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="botguard",
        description="Streaming botnet detection: simulate, detect, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat dotted-key config file")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("simulate", help="generate a labeled flow trace")
    common(p)
    p.add_argument("--out", required=True, help="output trace path (JSON Lines)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="replay a trace through the pipeline")
    common(p)
    p.add_argument("--trace", required=True, help="input trace path")
    p.add_argument("--out", required=True, help="output verdict log path")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score a verdict log against ground truth")
    common(p)
    p.add_argument("--trace", required=True, help="input trace path")
    p.add_argument("--verdicts", required=True, help="input verdict log path")
    p.add_argument("--out", required=True, help="output report path (JSON)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("demo-gate", help="scripted admission-gate transcript")
    common(p)
    p.set_defaults(func=cmd_demo_gate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceParseError, OrderingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IncompleteRunError as exc:
        print(f"incomplete run: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE


if __name__ == "__main__":
    sys.exit(main())
