"""JSON run manifests for the command line driver."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .errors import InvalidDomain, ManifestError
from .fields import EnvelopeConfig
from .geometry import DomainSpec

COMMANDS = (
    "solve-bounded",
    "solve-unbounded",
    "continuous-solution",
    "certify-continuity",
    "check-lupacciolu",
    "sandwich",
    "properties",
    "qsolve",
)
PLAN_KEYS = {"nu_max", "slab_step", "scan_spacing"}
SECTION_KEYS = {
    "certificate": {"kind", "eps", "z0", "params", "growth_expr", "xs", "samples"},
    "lupacciolu": {"terms", "sample_points"},
    "properties": {"h2_expr", "c"},
}


@dataclass
class RunManifest:
    command: str
    domain: dict
    trace_expr: str = "0"
    cfg: dict = field(default_factory=dict)
    plan: dict = field(default_factory=dict)
    output_dir: str = "out"
    spacing: float = 0.1
    box: list | None = None
    q: int = 0
    workers: int | None = None
    patch_radius: float | None = None
    certificate: dict = field(default_factory=dict)
    lupacciolu: dict = field(default_factory=dict)
    properties: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ManifestError(f"unknown command {self.command!r}")
        if not isinstance(self.domain, dict):
            raise ManifestError("domain must be an object")
        try:
            self.envelope_config().validate(self.domain_spec().n)
        except (InvalidDomain, ValueError, TypeError, KeyError) as err:
            raise ManifestError(f"invalid manifest: {err}") from None
        bad = set(self.plan) - PLAN_KEYS
        if bad:
            raise ManifestError(f"unknown plan keys: {sorted(bad)}")
        for name, allowed in SECTION_KEYS.items():
            sec = getattr(self, name)
            if not isinstance(sec, dict):
                raise ManifestError(f"{name} must be an object")
            bad = set(sec) - allowed
            if bad:
                raise ManifestError(f"unknown {name} keys: {sorted(bad)}")
        if not isinstance(self.trace_expr, str):
            raise ManifestError("trace_expr must be a string")
        if not self.spacing or self.spacing <= 0:
            raise ManifestError("spacing must be positive")

    def domain_spec(self):
        return DomainSpec.from_dict(self.domain)

    def envelope_config(self):
        return EnvelopeConfig.from_dict(self.cfg)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ManifestError("manifest must be a JSON object")
        names = {f.name for f in fields(cls)}
        bad = set(doc) - names
        if bad:
            raise ManifestError(f"unknown manifest keys: {sorted(bad)}")
        for key in ("command", "domain"):
            if key not in doc:
                raise ManifestError(f"missing manifest key {key!r}")
        try:
            return cls(**doc)
        except TypeError as err:
            raise ManifestError(str(err)) from None

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise ManifestError(f"JSON error at line {err.lineno}, column {err.colno}: {err.msg}") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())
