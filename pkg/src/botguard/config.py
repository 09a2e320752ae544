"""Run configuration: flat dotted-key config files merged over defaults.

The file format is line oriented: ``section.key = value`` with ``#`` comments
and blank lines ignored.  Unknown keys are errors so typos fail loudly.
"""

from dataclasses import dataclass, field

from .errors import ConfigurationError
from .pipeline import DEFAULT_CAPTCHA_TTL, DEFAULT_VERIFY_DELAY
from .simulate import BOT_CLASSES, ScenarioConfig
from .stream import DetectorParams, Mode


def _parse_mode(text):
    try:
        return Mode(text.strip().lower())
    except ValueError:
        raise ConfigurationError(f"detector.mode must be exact or approximate, got {text!r}")


_SCALAR_KEYS = {
    "detector.radius": float,
    "detector.neighbor_threshold": int,
    "detector.window_span": float,
    "detector.mode": _parse_mode,
    "detector.reservoir_size": int,
    "scenario.seed": int,
    "scenario.n_flows": int,
    "scenario.bot_fraction": float,
    "scenario.topology": str,
    "scenario.arrival_rate": float,
    "scenario.n_legit_sources": int,
    "scenario.n_bot_sources": int,
    "scenario.legit_feature.mean": float,
    "scenario.legit_feature.sd": float,
    "pipeline.verify_delay": float,
    "pipeline.captcha_ttl": float,
}

for _cls in BOT_CLASSES:
    _SCALAR_KEYS[f"scenario.mixture.{_cls}"] = float
    _SCALAR_KEYS[f"scenario.bot_feature.{_cls}.mean"] = float
    _SCALAR_KEYS[f"scenario.bot_feature.{_cls}.sd"] = float


@dataclass
class RunConfig:
    detector: DetectorParams = field(default_factory=DetectorParams)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    verify_delay: float = DEFAULT_VERIFY_DELAY
    captcha_ttl: float = DEFAULT_CAPTCHA_TTL

    def validate(self):
        self.scenario.validate()
        if self.verify_delay < 0:
            raise ConfigurationError(
                f"pipeline.verify_delay must be >= 0, got {self.verify_delay}"
            )
        if not self.captcha_ttl > 0:
            raise ConfigurationError(
                f"pipeline.captcha_ttl must be > 0, got {self.captcha_ttl}"
            )


def parse_flat_config(text) -> dict:
    """Parse ``key = value`` lines into a typed flat dict."""
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCALAR_KEYS:
            raise ConfigurationError(f"config line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"config line {line_no}: duplicate key {key!r}")
        caster = _SCALAR_KEYS[key]
        try:
            values[key] = caster(value)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(
                f"config line {line_no}: bad value for {key}: {exc}"
            ) from exc
    return values


def build_run_config(values: dict, seed_override=None) -> RunConfig:
    config = RunConfig()

    detector_kwargs = {}
    for short, full in (
        ("radius", "detector.radius"),
        ("neighbor_threshold", "detector.neighbor_threshold"),
        ("window_span", "detector.window_span"),
        ("mode", "detector.mode"),
        ("reservoir_size", "detector.reservoir_size"),
    ):
        if full in values:
            detector_kwargs[short] = values[full]
    config.detector = DetectorParams(**detector_kwargs)

    scenario = config.scenario
    for short, full in (
        ("seed", "scenario.seed"),
        ("n_flows", "scenario.n_flows"),
        ("bot_fraction", "scenario.bot_fraction"),
        ("topology", "scenario.topology"),
        ("arrival_rate", "scenario.arrival_rate"),
        ("n_legit_sources", "scenario.n_legit_sources"),
        ("n_bot_sources", "scenario.n_bot_sources"),
    ):
        if full in values:
            setattr(scenario, short, values[full])
    mean, sd = scenario.legit_feature_dist
    mean = values.get("scenario.legit_feature.mean", mean)
    sd = values.get("scenario.legit_feature.sd", sd)
    scenario.legit_feature_dist = (mean, sd)
    for cls in BOT_CLASSES:
        if f"scenario.mixture.{cls}" in values:
            scenario.bot_mixture[cls] = values[f"scenario.mixture.{cls}"]
        bot_mean, bot_sd = scenario.bot_feature_dist[cls]
        bot_mean = values.get(f"scenario.bot_feature.{cls}.mean", bot_mean)
        bot_sd = values.get(f"scenario.bot_feature.{cls}.sd", bot_sd)
        scenario.bot_feature_dist[cls] = (bot_mean, bot_sd)

    config.verify_delay = values.get("pipeline.verify_delay", config.verify_delay)
    config.captcha_ttl = values.get("pipeline.captcha_ttl", config.captcha_ttl)

    if seed_override is not None:
        scenario.seed = seed_override
    config.validate()
    return config


def load_run_config(path=None, seed_override=None) -> RunConfig:
    if path is None:
        return build_run_config({}, seed_override=seed_override)
    with open(path) as fh:
        text = fh.read()
    return build_run_config(parse_flat_config(text), seed_override=seed_override)
