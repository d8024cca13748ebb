"""Run configuration: parsing, validation and canonical serialization."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ParseError, ValidationError

FORMAT_VERSION = 1
STAGES = ("profile", "background", "spectrum", "index", "algebra", "bosonmap")
DEPENDS = {
    "profile": (),
    "background": ("profile",),
    "spectrum": ("background",),
    "index": ("spectrum",),
    "algebra": ("background",),
    "bosonmap": ("spectrum",),
}
SCHEMES = ("central2", "central4")
METHODS = ("relaxation", "shooting")

# flat shorthand key -> section
_SHORTHAND = {
    "n": "vortex", "e": "vortex", "v": "vortex", "r_max": "vortex", "m_r": "vortex",
    "method": "vortex",
    "m_xy": "grid", "scheme": "grid",
    "k": "spectral", "tol_zero": "spectral", "seed": "spectral",
}
_SECTIONS = {
    "vortex": ("n", "e", "v", "r_max", "m_r", "method"),
    "grid": ("m_xy", "scheme"),
    "spectral": ("k", "tol_zero", "seed"),
}
_TOP = ("vortex", "grid", "spectral", "pipeline", "output_dir", "format_version")


@dataclass(frozen=True)
class VortexConfig:
    n: int = 1
    e: float = 1.0
    v: float = 1.0
    r_max: float = 12.0
    m_r: int = 2048
    method: str = "relaxation"


@dataclass(frozen=True)
class GridConfig:
    m_xy: int = 128
    scheme: str = "central2"


@dataclass(frozen=True)
class SpectralConfig:
    k: int = 6
    tol_zero: float = 1e-3
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    vortex: VortexConfig = field(default_factory=VortexConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    pipeline: tuple = STAGES
    output_dir: str = "lgvortex_out"
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pipeline"] = list(self.pipeline)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        """sha256 of the effective configuration, ignoring the output location."""
        d = self.to_dict()
        d.pop("output_dir")
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def stages_to_run(self) -> list[str]:
        """Requested stages plus their dependencies, in execution order."""
        need = set()

        def add(s):
            if s not in need:
                need.add(s)
                for d in DEPENDS[s]:
                    add(d)

        for s in self.pipeline:
            add(s)
        return [s for s in STAGES if s in need]


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return (isinstance(x, (int, float)) and not isinstance(x, bool)) and math.isfinite(x)


def _normalize(doc: dict, errors: dict) -> dict:
    """Fold shorthand keys into sections and reject unknown keys."""
    out = {"vortex": {}, "grid": {}, "spectral": {}}
    for key, val in doc.items():
        if key in _SHORTHAND:
            sec = _SHORTHAND[key]
            if key in out[sec]:
                errors[f"{sec}.{key}"] = "given twice"
            out[sec][key] = val
        elif key in _SECTIONS:
            if not isinstance(val, dict):
                errors[key] = "must be a mapping"
                continue
            for sub, sval in val.items():
                if sub not in _SECTIONS[key]:
                    errors[f"{key}.{sub}"] = "unknown key"
                elif sub in out[key]:
                    errors[f"{key}.{sub}"] = "given twice"
                else:
                    out[key][sub] = sval
        elif key in _TOP:
            out[key] = val
        else:
            errors[str(key)] = "unknown key"
    return out


def _validate(d: dict, errors: dict) -> RunConfig:
    vx, gr, spc = d["vortex"], d["grid"], d["spectral"]
    dv, dg, ds = VortexConfig(), GridConfig(), SpectralConfig()

    n = vx.get("n", dv.n)
    if not _is_int(n) or n < 0:
        errors["vortex.n"] = "must be an integer >= 0 (0 selects the vacuum)"
    e = vx.get("e", dv.e)
    v = vx.get("v", dv.v)
    for name, val in (("e", e), ("v", v)):
        if not _is_num(val) or val <= 0:
            errors[f"vortex.{name}"] = "must be a finite number > 0"
    scale_ok = "vortex.e" not in errors and "vortex.v" not in errors
    r_max = vx.get("r_max")
    if r_max is None:
        r_max = 12.0 / (e * v) if scale_ok else dv.r_max
    elif not _is_num(r_max) or r_max <= 0:
        errors["vortex.r_max"] = "must be a finite number > 0"
    m_r = vx.get("m_r", dv.m_r)
    if not _is_int(m_r) or m_r < 64:
        errors["vortex.m_r"] = "must be an integer >= 64"
    method = vx.get("method", dv.method)
    if method not in METHODS:
        errors["vortex.method"] = f"must be one of {list(METHODS)}"

    m_xy = gr.get("m_xy", dg.m_xy)
    if not _is_int(m_xy) or m_xy < 64:
        errors["grid.m_xy"] = "must be an integer >= 64"
    scheme = gr.get("scheme", dg.scheme)
    if scheme not in SCHEMES:
        errors["grid.scheme"] = f"must be one of {list(SCHEMES)}"

    k = spc.get("k", ds.k)
    if not _is_int(k) or k < 1:
        errors["spectral.k"] = "must be an integer >= 1"
    tol = spc.get("tol_zero")
    if tol is None:
        tol = 1e-3 * e * v if scale_ok else ds.tol_zero
    elif not _is_num(tol) or tol <= 0:
        errors["spectral.tol_zero"] = "must be a finite number > 0"
    seed = spc.get("seed", ds.seed)
    if not _is_int(seed) or seed < 0:
        errors["spectral.seed"] = "must be an integer >= 0"

    pipe = d.get("pipeline", ["all"])
    if isinstance(pipe, str):
        pipe = [pipe]
    stages = []
    if not isinstance(pipe, list) or not pipe:
        errors["pipeline"] = "must be a stage name or a non-empty list of stage names"
    else:
        for s in pipe:
            if s == "all":
                stages.extend(STAGES)
            elif s in STAGES:
                stages.append(s)
            else:
                errors["pipeline"] = f"unknown stage {s!r}; choose from {list(STAGES) + ['all']}"
    stages = tuple(s for s in STAGES if s in stages)

    out_dir = d.get("output_dir", RunConfig.output_dir)
    if not isinstance(out_dir, str) or not out_dir:
        errors["output_dir"] = "must be a non-empty path string"
    fv = d.get("format_version", FORMAT_VERSION)
    if fv != FORMAT_VERSION or not _is_int(fv):
        errors["format_version"] = f"must be {FORMAT_VERSION}"

    if errors:
        raise ValidationError(errors)
    return RunConfig(
        vortex=VortexConfig(n, float(e), float(v), float(r_max), m_r, method),
        grid=GridConfig(m_xy, scheme),
        spectral=SpectralConfig(k, float(tol), seed),
        pipeline=stages,
        output_dir=out_dir,
        format_version=fv,
    )


def config_from_mapping(doc, overrides: dict | None = None) -> RunConfig:
    """Validate a parsed document; ``overrides`` are flat shorthand keys
    (None values skipped) that take precedence over the document."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ParseError("configuration must be a key-value mapping")
    errors: dict = {}
    norm = _normalize(doc, errors)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key in _SHORTHAND:
            norm[_SHORTHAND[key]][key] = val
        else:
            norm[key] = val
    return _validate(norm, errors)


def parse_config(text: str) -> RunConfig:
    """Parse a YAML or JSON document into a validated RunConfig.

    Every violation is reported at once in a ValidationError keyed by dotted
    field path.
    """
    return config_from_mapping(load_document(text))


def load_document(text: str):
    """JSON documents go through the json module (YAML 1.1 would read
    exponent floats such as 1e-05 as strings); anything else is YAML."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed configuration: {exc}") from exc
