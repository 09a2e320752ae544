"""Three-layer admission, analysis and mitigation pipeline.

Incoming sessions pass a blocklist check, a captcha gate and a credential
gate, strictly in that order.  Admitted sources feed flow features into the
stream detector; an outlier candidate is re-classified after a verification
delay (double check) and only blocked if it is still an outlier.  Mitigation
adds the source to the blocklist and records one inert counter-probe event on
the link the offending data arrived on.  No mitigation action ever carries an
executable payload.
"""

import hashlib
import heapq
import hmac
import random
import string
from dataclasses import dataclass, field
from enum import Enum

from .errors import GateError, TraceParseError, UnknownObjectError
from .simulate import to_stream
from .stream import Label

CAPTCHA_ALPHABET = string.ascii_uppercase + string.digits
CAPTCHA_LENGTH = 6
DEFAULT_CAPTCHA_TTL = 120.0
DEFAULT_VERIFY_DELAY = 2.0

# The only payload mitigation is ever allowed to reference: a constant,
# inert marker string.  The counter-probe is a log record, nothing more.
INERT_PAYLOAD_TAG = "inert-counter-probe"

VERDICT_LOG_FIELDS = (
    "decided_at", "session_id", "source_ref", "verdict", "evidence_ids", "link_id",
)


class AdmissionResult(Enum):
    ADMITTED = "admitted"
    REJECTED_CAPTCHA = "rejected_captcha"
    REJECTED_CREDENTIALS = "rejected_credentials"
    REJECTED_BLOCKED = "rejected_blocked"


class VerdictKind(Enum):
    ALLOW = "allow"
    BLOCK = "block"
    FIGHT_BACK = "fight_back"


@dataclass(frozen=True)
class CaptchaChallenge:
    challenge_id: str
    code: str
    issued_at: float
    ttl: float


@dataclass(frozen=True)
class SessionRequest:
    session_id: str
    source_ref: str
    challenge_id: str
    captcha_answer: str
    username: str
    password: str
    timestamp: float


@dataclass(frozen=True)
class Candidate:
    """An outlier flagged at scan time, awaiting second-pass verification."""

    object_id: int
    label: Label
    source_ref: str
    link_id: int
    scan_time: float


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    subject: str
    evidence: tuple  # ((object_id, Label), ...); nonempty for Block
    decided_at: float
    link_id: int = None


@dataclass(frozen=True)
class FightBackEvent:
    target: str
    link_id: int
    emitted_at: float
    payload_tag: str = INERT_PAYLOAD_TAG


class CaptchaGate:
    """Single-use, time-limited alphanumeric challenges from a seeded RNG."""

    def __init__(self, seed=0, ttl=DEFAULT_CAPTCHA_TTL):
        self._rng = random.Random(seed)
        self.ttl = ttl
        self._pending = {}
        self._issued = 0

    def issue(self, now) -> CaptchaChallenge:
        self._issued += 1
        code = "".join(self._rng.choice(CAPTCHA_ALPHABET) for _ in range(CAPTCHA_LENGTH))
        challenge = CaptchaChallenge(f"ch-{self._issued:06d}", code, now, self.ttl)
        self._pending[challenge.challenge_id] = challenge
        return challenge

    def verify(self, challenge_id, answer, now) -> bool:
        # consumed on first attempt regardless of outcome; unknown ids are
        # indistinguishable from expired ones
        challenge = self._pending.pop(challenge_id, None)
        if challenge is None:
            return False
        if now - challenge.issued_at > challenge.ttl:
            return False
        return answer == challenge.code


class CredentialStore:
    """Salted PBKDF2 credential map; plaintext passwords are never stored."""

    ITERATIONS = 10_000

    def __init__(self, salt_seed=0):
        self._users = {}
        self._salt_rng = random.Random(salt_seed)
        self._dummy_salt = b"\x00" * 16
        self._dummy_hash = self._digest("", self._dummy_salt)

    def register(self, username, password):
        salt = self._salt_rng.randbytes(16)
        self._users[username] = (salt, self._digest(password, salt))

    def authenticate(self, username, password) -> bool:
        # unknown users run the same hash work as wrong passwords
        salt, expected = self._users.get(username, (self._dummy_salt, self._dummy_hash))
        matched = hmac.compare_digest(self._digest(password, salt), expected)
        return matched and username in self._users

    def save(self, path):
        with open(path, "w") as fh:
            for username, (salt, digest) in sorted(self._users.items()):
                fh.write(f"{username}:{salt.hex()}:{digest.hex()}\n")

    @classmethod
    def load(cls, path):
        store = cls()
        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(":")
                if len(parts) != 3:
                    raise TraceParseError(line_no, "expected username:salt:hash")
                username, salt_hex, digest_hex = parts
                try:
                    store._users[username] = (
                        bytes.fromhex(salt_hex), bytes.fromhex(digest_hex)
                    )
                except ValueError as exc:
                    raise TraceParseError(line_no, str(exc)) from exc
        return store

    def _digest(self, password, salt):
        return hashlib.pbkdf2_hmac(
            "sha256", password.encode(), salt, self.ITERATIONS
        )


class BlockList:
    """Blocked sources with their block timestamps."""

    def __init__(self):
        self._blocked = {}

    def block(self, source_ref, now):
        self._blocked.setdefault(source_ref, now)

    def is_blocked(self, source_ref) -> bool:
        return source_ref in self._blocked

    def clear(self, source_ref):
        self._blocked.pop(source_ref, None)

    def blocked_at(self, source_ref):
        return self._blocked.get(source_ref)

    def __len__(self):
        return len(self._blocked)

    def __iter__(self):
        return iter(self._blocked)


class DetectionPipeline:
    """Admission gates in front of the scan / analyze-and-verify detector."""

    def __init__(self, detector, captcha: CaptchaGate, credentials: CredentialStore,
                 blocklist: BlockList = None, verify_delay=DEFAULT_VERIFY_DELAY):
        self.detector = detector
        self.captcha = captcha
        self.credentials = credentials
        self.blocklist = blocklist if blocklist is not None else BlockList()
        self.verify_delay = verify_delay
        self.fightback_events = []
        self.counters = {
            "admitted": 0,
            "rejected": 0,
            "scanned": 0,
            "scan_refused": 0,
        }
        self._admitted_sources = set()

    def admit(self, session: SessionRequest, now) -> AdmissionResult:
        """Evaluate the gates strictly in order blocklist -> captcha ->
        credentials; the first failure short-circuits."""
        if self.blocklist.is_blocked(session.source_ref):
            self.counters["rejected"] += 1
            return AdmissionResult.REJECTED_BLOCKED
        if not self.captcha.verify(session.challenge_id, session.captcha_answer, now):
            self.counters["rejected"] += 1
            return AdmissionResult.REJECTED_CAPTCHA
        if not self.credentials.authenticate(session.username, session.password):
            self.counters["rejected"] += 1
            return AdmissionResult.REJECTED_CREDENTIALS
        self.counters["admitted"] += 1
        self._admitted_sources.add(session.source_ref)
        return AdmissionResult.ADMITTED

    def is_admitted(self, source_ref) -> bool:
        return (source_ref in self._admitted_sources
                and not self.blocklist.is_blocked(source_ref))

    def scan(self, obj, link_id=None):
        """Insert one flow feature; return a Candidate iff it is an outlier."""
        if not self.is_admitted(obj.source_ref):
            self.counters["scan_refused"] += 1
            raise GateError(
                f"source {obj.source_ref!r} has no admitted session"
            )
        label = self.detector.insert(obj)
        self.counters["scanned"] += 1
        if label is Label.OUTLIER:
            return Candidate(
                object_id=obj.object_id,
                label=label,
                source_ref=obj.source_ref,
                link_id=link_id if link_id is not None else obj.object_id,
                scan_time=obj.arrival_time,
            )
        return None

    def analyze_and_verify(self, candidate: Candidate, now) -> Verdict:
        """Second-pass check: block only if the candidate is still an outlier
        and still live once the verification delay has elapsed."""
        if now > self.detector.current_time:
            self.detector.advance_time(now)
        try:
            label = self.detector.classify(candidate.object_id)
        except UnknownObjectError:
            # expired before verification: no live evidence remains
            return Verdict(VerdictKind.ALLOW, candidate.source_ref, (), now,
                           link_id=candidate.link_id)
        if label is Label.OUTLIER:
            return Verdict(
                VerdictKind.BLOCK, candidate.source_ref,
                ((candidate.object_id, label),), now, link_id=candidate.link_id,
            )
        return Verdict(VerdictKind.ALLOW, candidate.source_ref, (), now,
                       link_id=candidate.link_id)

    def mitigate(self, verdict: Verdict) -> list:
        """Apply a verdict: Allow is a no-op, Block updates the blocklist and
        emits exactly one inert counter-probe on the offending link."""
        if verdict.kind is VerdictKind.ALLOW:
            return []
        assert verdict.evidence, "block verdicts must carry evidence"
        self.blocklist.block(verdict.subject, verdict.decided_at)
        self._admitted_sources.discard(verdict.subject)
        event = FightBackEvent(
            target=verdict.subject,
            link_id=verdict.link_id,
            emitted_at=verdict.decided_at,
        )
        self.fightback_events.append(event)
        return [("block", verdict.subject), event]


def replay_flows(flows, pipeline: DetectionPipeline) -> list:
    """Drive a timestamp-ordered trace through the pipeline end to end.

    One synthetic session per source is admitted with a valid captcha and
    registered credentials, so detection is exercised on the flow features.
    Returns the verdict log: one Allow/Block record per flow (joined on
    link_id = flow_id) plus one FightBack record per block, all JSON-ready.
    """
    records = []
    sessions = {}          # source_ref -> session_id
    block_evidence = {}    # source_ref -> evidence ids from the blocking verdict
    pending = []           # heap of (deadline, order, Candidate)
    order = 0

    def log(decided_at, source_ref, verdict, evidence_ids, link_id):
        records.append({
            "decided_at": round(decided_at, 9),
            "session_id": sessions.get(source_ref),
            "source_ref": source_ref,
            "verdict": verdict,
            "evidence_ids": list(evidence_ids),
            "link_id": link_id,
        })

    def resolve(until=None):
        while pending and (until is None or pending[0][0] <= until):
            deadline, _, candidate = heapq.heappop(pending)
            source = candidate.source_ref
            if pipeline.blocklist.is_blocked(source):
                # source went down while this flow was awaiting verification
                log(deadline, source, "block",
                    block_evidence.get(source, [candidate.object_id]),
                    candidate.link_id)
                continue
            verdict = pipeline.analyze_and_verify(candidate, deadline)
            pipeline.mitigate(verdict)
            if verdict.kind is VerdictKind.BLOCK:
                evidence_ids = [oid for oid, _ in verdict.evidence]
                block_evidence[source] = evidence_ids
                log(deadline, source, "block", evidence_ids, candidate.link_id)
                log(deadline, source, "fight_back", evidence_ids, candidate.link_id)
            else:
                log(deadline, source, "allow", [], candidate.link_id)

    for obj, flow in zip(to_stream(flows), flows):
        resolve(until=flow.timestamp)
        source = flow.source_ref
        if source not in sessions:
            sessions[source] = f"s-{len(sessions):04d}"
            username, password = f"user-{source}", f"pw-{source}"
            pipeline.credentials.register(username, password)
            challenge = pipeline.captcha.issue(flow.timestamp)
            session = SessionRequest(
                session_id=sessions[source],
                source_ref=source,
                challenge_id=challenge.challenge_id,
                captcha_answer=challenge.code,
                username=username,
                password=password,
                timestamp=flow.timestamp,
            )
            pipeline.admit(session, flow.timestamp)
        if pipeline.blocklist.is_blocked(source):
            # dropped at the gate; scored as blocked with the source's evidence
            log(flow.timestamp, source, "block",
                block_evidence.get(source, []), flow.flow_id)
            continue
        candidate = pipeline.scan(obj, link_id=flow.flow_id)
        if candidate is None:
            log(flow.timestamp, source, "allow", [], flow.flow_id)
        else:
            order += 1
            heapq.heappush(
                pending,
                (candidate.scan_time + pipeline.verify_delay, order, candidate),
            )
    resolve()
    return records
