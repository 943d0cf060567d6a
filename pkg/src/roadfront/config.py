"""Run configuration: flat INI text with two-level ``section.key`` names.

Every key has a parser and a validator; anything invalid is reported as a
ConfigError naming the section, key and (when known) the line, before any
computation starts.  ``dump_config`` re-emits the normalized form, and
loading that text back gives the same configuration.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .dispersion import ModelParams
from .errors import ConfigError
from .kernel import PROFILES, Kernel
from .nonlinearity import make_nonlinearity
from .simulator import X_BOUNDARIES, Y_TOPS, BumpSpec, GridSpec

MODELS = ("invasion", "sirt", "transport")
COMMANDS = ("speed", "dstar", "decay", "transport", "reduced", "simulate")
MAX_AXES = 2


def _float(text: str) -> float:
    val = float(text)
    if not math.isfinite(val):
        raise ValueError(f"must be finite, got {text!r}")
    return val


def _positive(text: str) -> float:
    val = _float(text)
    if not val > 0:
        raise ValueError(f"must be positive, got {text!r}")
    return val


def _nonneg(text: str) -> float:
    val = _float(text)
    if val < 0:
        raise ValueError(f"must be nonnegative, got {text!r}")
    return val


def _fraction(text: str) -> float:
    val = _float(text)
    if not 0 < val <= 1:
        raise ValueError(f"must lie in (0, 1], got {text!r}")
    return val


def _choice(options):
    def parse(text: str) -> str:
        val = text.strip().lower()
        if val not in options:
            raise ValueError(f"must be one of {', '.join(options)}; got {text!r}")
        return val
    return parse


def _optional_dt(text: str):
    if text.strip().lower() in ("", "auto"):
        return None
    return _positive(text)


def _levels(text: str) -> tuple[float, ...]:
    vals = tuple(_float(t) for t in _split(text))
    if not vals or any(not 0 < v < 1 for v in vals):
        raise ValueError(f"levels must be a nonempty list in (0, 1), got {text!r}")
    return vals


_PROBE = re.compile(r"^(?:Y\s*/\s*(?P<den>[0-9.eE+-]+)|(?P<num>[0-9.eE+-]+))$")


def _probes(text: str) -> tuple[str, ...]:
    toks = tuple(t.replace(" ", "") for t in _split(text))
    if not toks:
        raise ValueError("probes must list at least one height")
    for tok in toks:
        m = _PROBE.match(tok)
        if m is None:
            raise ValueError(f"probe {tok!r} is neither a number nor of the form Y/n")
        val = float(m.group("den") or m.group("num"))
        if m.group("den") is not None and not val >= 1:
            raise ValueError(f"probe {tok!r} needs n >= 1")
        if m.group("num") is not None and val < 0:
            raise ValueError(f"probe {tok!r} must be nonnegative")
    return toks


def _window(text: str):
    if text.strip().lower() in ("", "auto"):
        return None
    vals = tuple(_nonneg(t) for t in _split(text))
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise ValueError(f"decay_window must be 'auto' or 'lo, hi' with lo < hi, got {text!r}")
    return vals


def _text(text: str) -> str:
    return text.strip()


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


# section -> key -> (parser, default text)
SCHEMA: dict[str, dict[str, tuple]] = {
    "model": {"kind": (_choice(MODELS), "invasion")},
    "params": {"d": (_positive, "1"), "D": (_nonneg, "1"), "mu": (_positive, "1"),
               "nu": (_positive, "1"), "q": (_float, "0")},
    "kernel": {"profile": (_choice(PROFILES), "epanechnikov"), "L": (_positive, "1")},
    "nonlinearity": {"kind": (_choice(("kpp", "sir")), "kpp"), "r": (_positive, "1"),
                     "S0": (_positive, "2"), "beta": (_positive, "1"), "alpha": (_positive, "1")},
    "grid": {"X": (_positive, "300"), "Y": (_positive, "15"), "dx": (_positive, "0.25"),
             "dy": (_positive, "0.25"), "dt": (_optional_dt, "auto"),
             "x_boundary": (_choice(X_BOUNDARIES), "neumann"),
             "y_top": (_choice(Y_TOPS), "dirichlet0")},
    "initial": {"height": (_nonneg, "1"), "radius": (_positive, "2"), "x0": (_float, "0"),
                "y0": (_float, "5"), "taper": (_fraction, "0.5")},
    "run": {"t_end": (_nonneg, "75"), "snapshot_every": (_positive, "0.5"),
            "levels": (_levels, "0.3, 0.5, 0.7"), "probes": (_probes, "0, Y/8, Y/4"),
            "fit_window": (_fraction, "0.4"), "tol": (_positive, "1e-9"),
            "t_max": (_positive, "2000"), "decay_window": (_window, "auto"),
            "speed_tolerance": (_positive, "0.1"), "decay_tolerance": (_positive, "0.1")},
    "output": {"dir": (_text, "")},
}
SWEEP_COMMAND_DEFAULT = "speed"


def _fmt(val) -> str:
    """Canonical text of a parsed value."""
    if val is None:
        return "auto"
    if isinstance(val, tuple):
        return ", ".join(_fmt(v) for v in val)
    if isinstance(val, float):
        return repr(val)
    return str(val)


def _locate(text: str, section: str, key: str) -> int | None:
    """1-based line of ``key`` inside ``[section]``, if present in the text."""
    current = None
    key_re = re.compile(rf"^\s*{re.escape(key)}\s*[=:]")
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and key_re.match(line):
            return n
    return None


@dataclass
class RunConfig:
    """Validated configuration; ``values`` holds the parsed, normalized keys."""

    values: dict[str, dict[str, object]]
    sweep_axes: list[tuple[str, tuple[float, ...]]] = field(default_factory=list)
    sweep_command: str = SWEEP_COMMAND_DEFAULT
    source: str = "<config>"

    def get(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    @property
    def model(self) -> str:
        return self.values["model"]["kind"]

    @property
    def kernel(self) -> Kernel:
        k = self.values["kernel"]
        return Kernel(k["profile"], k["L"])

    @property
    def nonlinearity(self):
        n = self.values["nonlinearity"]
        if n["kind"] == "kpp":
            return make_nonlinearity("kpp", r=n["r"])
        return make_nonlinearity("sir", S0=n["S0"], beta=n["beta"], alpha=n["alpha"])

    @property
    def params(self) -> ModelParams:
        p = self.values["params"]
        return ModelParams(d=p["d"], D=p["D"], kernel=self.kernel, mu=p["mu"], nu=p["nu"],
                           f=self.nonlinearity, q=p["q"])

    @property
    def grid(self) -> GridSpec:
        g = self.values["grid"]
        return GridSpec(X=g["X"], Y=g["Y"], dx=g["dx"], dy=g["dy"], dt=g["dt"],
                        x_boundary=g["x_boundary"], y_top=g["y_top"])

    @property
    def initial(self) -> BumpSpec:
        i = self.values["initial"]
        return BumpSpec(height=i["height"], radius=i["radius"], x0=i["x0"], y0=i["y0"],
                        taper=i["taper"])

    @property
    def levels(self) -> tuple[float, ...]:
        return self.values["run"]["levels"]

    @property
    def probes(self) -> tuple[float, ...]:
        """Probe heights with Y/n tokens resolved, snapped to grid rows, deduplicated."""
        Y, dy = self.values["grid"]["Y"], self.values["grid"]["dy"]
        out = []
        for tok in self.values["run"]["probes"]:
            y = Y / float(tok[2:]) if tok.startswith("Y") else float(tok)
            y = min(round(y / dy) * dy, Y)
            if y not in out:
                out.append(y)
        return tuple(out)

    def param_row(self) -> dict[str, object]:
        """The full parameter tuple carried by every output row."""
        p, k, n = self.values["params"], self.values["kernel"], self.values["nonlinearity"]
        kpp = n["kind"] == "kpp"
        return {
            "model": self.model, "d": p["d"], "D": p["D"], "mu": p["mu"], "nu": p["nu"],
            "q": p["q"],
            "kernel": k["profile"], "L": k["L"], "f": n["kind"],
            "r": n["r"] if kpp else "", "S0": "" if kpp else n["S0"],
            "beta": "" if kpp else n["beta"], "alpha": "" if kpp else n["alpha"],
        }


def _parse_text(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (d vs D)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cp


def apply_overrides(cp: configparser.ConfigParser, overrides) -> None:
    """Apply ``section.key=value`` overrides in place."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        name, value = item.split("=", 1)
        name = name.strip()
        if "." not in name:
            raise ConfigError(f"override {item!r} needs a dotted section.key name")
        section, key = name.split(".", 1)
        if section not in SCHEMA and section != "sweep":
            raise ConfigError(f"override {item!r}: unknown section [{section}]")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value.strip())


def _build(cp: configparser.ConfigParser, text: str, source: str, locate: bool = True) -> RunConfig:
    def fail(section, key, msg):
        line = _locate(text, section, key) if locate else None
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: [{section}] {key}: {msg}")

    values: dict[str, dict[str, object]] = {}
    for section in cp.sections():
        if section not in SCHEMA and section != "sweep":
            raise ConfigError(f"{source}: unknown section [{section}]")
        if section in SCHEMA:
            for key in cp[section]:
                if key not in SCHEMA[section]:
                    fail(section, key, f"unknown key (expected one of {', '.join(SCHEMA[section])})")
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (parse, default) in keys.items():
            raw = cp.get(section, key, fallback=default)
            try:
                values[section][key] = parse(raw)
            except ValueError as exc:
                fail(section, key, str(exc))

    axes: list[tuple[str, tuple[float, ...]]] = []
    command = SWEEP_COMMAND_DEFAULT
    if cp.has_section("sweep"):
        for key, raw in cp["sweep"].items():
            if key == "command":
                try:
                    command = _choice(COMMANDS)(raw)
                except ValueError as exc:
                    fail("sweep", key, str(exc))
                continue
            if "." not in key:
                fail("sweep", key, "axis names must be dotted section.key names")
            section, name = key.split(".", 1)
            if section not in SCHEMA or name not in SCHEMA[section]:
                fail("sweep", key, "axis does not name a known configuration key")
            parse = SCHEMA[section][name][0]
            try:
                pts = tuple(parse(t) for t in _split(raw))
            except ValueError as exc:
                fail("sweep", key, str(exc))
            if not pts:
                fail("sweep", key, "axis has no values")
            axes.append((key, pts))
        if len(axes) > MAX_AXES:
            raise ConfigError(f"{source}: [sweep] at most {MAX_AXES} axes are supported, got {len(axes)}")

    cfg = RunConfig(values, axes, command, source)
    _check_semantics(cfg, fail)
    return cfg


def _check_semantics(cfg: RunConfig, fail) -> None:
    """Cross-key invariants of the model and its nonlinearity."""
    v = cfg.values
    if cfg.model in ("sirt", "transport") and v["nonlinearity"]["kind"] != "sir":
        fail("nonlinearity", "kind", f"model {cfg.model!r} needs the 'sir' nonlinearity")
    if cfg.model == "invasion" and v["nonlinearity"]["kind"] != "kpp":
        fail("nonlinearity", "kind", "model 'invasion' needs the 'kpp' nonlinearity")
    if cfg.model == "transport" and v["params"]["q"] == 0:
        fail("params", "q", "transport model needs q != 0")
    if cfg.model != "transport" and v["params"]["q"] != 0:
        fail("params", "q", f"q is only used by the transport model, not {cfg.model!r}")


def check_simulation(cfg: RunConfig) -> None:
    """Grid, kernel-resolution and initial-datum invariants needed before simulating."""
    def fail(section, key, msg):
        raise ConfigError(f"{cfg.source}: [{section}] {key}: {msg}")

    v = cfg.values
    g = v["grid"]
    if g["dx"] >= g["X"] or g["dy"] >= g["Y"]:
        fail("grid", "dx", "mesh steps must be smaller than the domain extents")
    if v["params"]["D"] > 0 and g["dx"] >= v["kernel"]["L"] / 2:
        fail("grid", "dx", f"dx={g['dx']} does not resolve the kernel range L={v['kernel']['L']} "
                           "(need dx < L/2)")
    try:
        cfg.initial.check_support(cfg.grid)
    except ValueError as exc:
        fail("initial", "radius", str(exc))
    for y in cfg.probes:
        if y > g["Y"]:
            fail("run", "probes", f"probe height {y} exceeds Y={g['Y']}")
    win = v["run"]["decay_window"]
    if win is not None and win[1] > g["X"]:
        fail("run", "decay_window", f"window end {win[1]} exceeds X={g['X']}")


def load_config(path=None, overrides=(), text: str | None = None, locate: bool = True) -> RunConfig:
    """Load and validate a config file (or text); ``overrides`` are section.key=value strings."""
    if text is None:
        if path is None:
            text, source = "", "<defaults>"
        else:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            source = str(path)
    else:
        source = "<text>" if path is None else str(path)
    cp = _parse_text(text, source)
    apply_overrides(cp, overrides)
    return _build(cp, text, source, locate)


def dump_config(cfg: RunConfig) -> str:
    """Normalized INI text: every section and key, canonical value spelling."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_fmt(cfg.values[section][key])}")
        lines.append("")
    if cfg.sweep_axes or cfg.sweep_command != SWEEP_COMMAND_DEFAULT:
        lines.append("[sweep]")
        lines.append(f"command = {cfg.sweep_command}")
        for key, pts in cfg.sweep_axes:
            lines.append(f"{key} = {_fmt(pts)}")
        lines.append("")
    return "\n".join(lines)


def with_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """A new config with ``section.key=value`` overrides applied and revalidated."""
    text = dump_config(cfg)
    return load_config(text=text, overrides=overrides, path=cfg.source, locate=False)
