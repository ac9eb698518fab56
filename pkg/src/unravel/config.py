"""Experiment configuration: ``key = value`` files, presets and manifests.

A config names a ``preset``; every other key is optional and overrides the
preset default for the chosen ``scale`` (``desk`` or ``paper``).  Keys
starting with ``run_`` are generated fields of a manifest and are ignored,
so a manifest can be fed back in as a config.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from . import hilbert
from .errors import ConfigError
from .policies import CorrelationPolicy, parse_policy

PRESETS = ("fig1", "fig2", "fig3", "fig4", "fig5a", "fig5b",
           "hermitian_rates", "squeezing_decay", "oracle_check")
KICKED_PRESETS = ("fig5a", "fig5b")
SCALES = ("desk", "paper")

# keys that only make sense for the kicked-oscillator presets, and vice versa
_KICKED_ONLY = {"beta0", "tau1", "tau2", "chi", "lambdas", "dims", "periods", "dt_halving"}
_ENSEMBLE_ONLY = {"t_final", "initial", "truncation_tol"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description.

    For the kicked-oscillator presets ``dt`` and ``output_stride`` refer to
    ``lambda = 1``; at scale ``lambda`` both are multiplied by ``lambda``
    like every other time, and ``dims[i]`` is the basis size used for
    ``lambdas[i]``.  Those presets integrate a single trajectory, so
    ``n_traj`` must be 1.
    """

    preset: str
    scale: str
    dim: int
    n_traj: int
    dt: float
    t_final: float
    output_stride: float
    seed: int
    policy: tuple[CorrelationPolicy, ...]
    kappa: float
    initial: str
    truncation_tol: float
    scheme: str
    output_path: str
    beta0: float = 2.0
    tau1: float = 0.98
    tau2: float = 1.0
    chi: float = 1.0
    lambdas: tuple[float, ...] = ()
    dims: tuple[int, ...] = ()
    periods: int = 0
    dt_halving: bool = False

    @property
    def kicked(self) -> bool:
        return self.preset in KICKED_PRESETS


# ---------------------------------------------------------------------------
# value codecs

def _fmt_float(x: float) -> str:
    return repr(float(x))


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _split_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _parse_policies(text: str) -> tuple[CorrelationPolicy, ...]:
    items = re.findall(r"[a-z]+\s*\([^()]*\)", text)
    rest = re.sub(r"[a-z]+\s*\([^()]*\)", "", text)
    if not items or rest.replace(",", "").strip():
        raise ValueError(f"cannot parse policy list {text!r}")
    return tuple(parse_policy(p) for p in items)


_CODECS = {
    "preset": (str, str),
    "scale": (str, str),
    "dim": (_parse_int, str),
    "n_traj": (_parse_int, str),
    "dt": (float, _fmt_float),
    "t_final": (float, _fmt_float),
    "output_stride": (float, _fmt_float),
    "seed": (_parse_int, str),
    "policy": (_parse_policies, lambda ps: ", ".join(p.label for p in ps)),
    "kappa": (float, _fmt_float),
    "initial": (lambda s: s.replace(" ", ""), str),
    "truncation_tol": (float, _fmt_float),
    "scheme": (str, str),
    "output_path": (str, str),
    "beta0": (float, _fmt_float),
    "tau1": (float, _fmt_float),
    "tau2": (float, _fmt_float),
    "chi": (float, _fmt_float),
    "lambdas": (lambda s: tuple(float(x) for x in _split_list(s)),
                lambda v: ", ".join(_fmt_float(x) for x in v)),
    "dims": (lambda s: tuple(_parse_int(x) for x in _split_list(s)),
             lambda v: ", ".join(str(x) for x in v)),
    "periods": (_parse_int, str),
    "dt_halving": (_parse_bool, lambda b: "true" if b else "false"),
}
KEYS = tuple(f.name for f in fields(ExperimentConfig))
assert set(KEYS) == set(_CODECS)


# ---------------------------------------------------------------------------
# presets

_FIG_POLICIES = "covariance(1), fixed(0), fixed(1)"
_KICKED_POLICIES = "fixed(0), covariance(1)"

_COMMON = {"scale": "desk", "seed": "0", "kappa": "1", "truncation_tol": "1e-8",
           "scheme": "euler", "output_path": "out"}

_PRESET_DEFAULTS = {
    "fig1": {
        "desk": dict(initial="fock(8)", dim="24", n_traj="200", dt="1e-3", t_final="2",
                     output_stride="0.05", policy=_FIG_POLICIES),
        "paper": dict(initial="fock(24)", dim="40", n_traj="1000"),
    },
    "fig2": {
        "desk": dict(initial="fock_pair(7,9)", dim="24", n_traj="200", dt="1e-3", t_final="2",
                     output_stride="0.05", policy=_FIG_POLICIES),
        "paper": dict(initial="fock_pair(23,25)", dim="40", n_traj="1000"),
    },
    "fig3": {
        "desk": dict(initial="cat(2.5)", dim="40", n_traj="200", dt="1e-3", t_final="2",
                     output_stride="0.05", policy=_FIG_POLICIES),
        "paper": dict(initial="cat(4)", dim="60", n_traj="1000"),
    },
    "fig4": {
        "desk": dict(initial="fock_pair(7,9)", dim="24", n_traj="200", dt="1e-3", t_final="8",
                     output_stride="0.1", policy=_FIG_POLICIES),
        "paper": dict(initial="fock_pair(23,25)", dim="40", n_traj="1000"),
    },
    "hermitian_rates": {
        "desk": dict(initial="fock_pair(0,1)", dim="8", n_traj="5000", dt="1e-3", t_final="0.2",
                     output_stride="0.005", policy="fixed(1), fixed(0), fixed(-1)"),
        "paper": {},
    },
    "squeezing_decay": {
        "desk": dict(initial="squeezed(0.5)", dim="30", n_traj="100", dt="1e-3", t_final="2",
                     output_stride="0.05", truncation_tol="1e-4",
                     policy="squeezed(1), covariance(1), fixed(0), fixed(1)"),
        "paper": dict(dim="60", truncation_tol="1e-8"),
    },
    "oracle_check": {
        "desk": dict(initial="fock(1)", dim="2", n_traj="2000", dt="1e-3", t_final="1",
                     output_stride="0.1",
                     policy="fixed(0), fixed(1), fixed(-1), fixed(1j), covariance(1)"),
        "paper": {},
    },
}
_KICKED_DEFAULTS = {
    "desk": dict(dim="24", n_traj="1", dt="0.002", output_stride="0.02", kappa="0.5",
                 scheme="split", policy=_KICKED_POLICIES, beta0="2", tau1="0.98", tau2="1",
                 chi="1", lambdas="1, 2, 4", periods="200", dt_halving="true"),
    "paper": dict(periods="2500"),
}
for _p in KICKED_PRESETS:
    _PRESET_DEFAULTS[_p] = _KICKED_DEFAULTS


def auto_dims(dim: int, lambdas) -> tuple[int, ...]:
    """Basis size per scale: amplitudes grow like ``lambda``, so ``<n>`` like ``lambda**2``."""
    return tuple(int(math.ceil(dim * lam ** 1.5)) for lam in lambdas)


# ---------------------------------------------------------------------------
# parsing

def _raw_pairs(text: str) -> list[tuple[int, str, str]]:
    pairs = []
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("run_"):
            continue
        if key not in _CODECS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: key {key!r} already set on line {seen[key]}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        seen[key] = lineno
        pairs.append((lineno, key, value))
    return pairs


def parse_config(text: str, overrides: Optional[dict] = None,
                 paper_scale: bool = False) -> ExperimentConfig:
    """Parse and validate a config; ``overrides`` maps keys to already-typed values.

    >>> cfg = parse_config("preset = fig1\\nseed = 42")
    >>> cfg.initial, cfg.n_traj, [p.label for p in cfg.policy]
    ('fock(8)', 200, ['covariance(1.0)', 'fixed(0.0)', 'fixed(1.0)'])
    """
    pairs = _raw_pairs(text)
    given = {key: (lineno, value) for lineno, key, value in pairs}
    if "preset" not in given:
        raise ConfigError("missing required key 'preset'")
    preset_line, preset = given["preset"]
    if preset not in PRESETS:
        raise ConfigError(f"line {preset_line}: unknown preset {preset!r}; expected one of {PRESETS}")
    scale = "paper" if paper_scale else given.get("scale", (0, "desk"))[1]
    if scale not in SCALES:
        raise ConfigError(f"line {given['scale'][0]}: scale must be one of {SCALES}")

    kicked = preset in KICKED_PRESETS
    banned = _ENSEMBLE_ONLY if kicked else _KICKED_ONLY
    for key in banned & given.keys():
        raise ConfigError(f"line {given[key][0]}: key {key!r} does not apply to preset {preset!r}")

    raw = dict(_COMMON)
    raw.update(_PRESET_DEFAULTS[preset]["desk"])
    if scale == "paper":
        raw.update(_PRESET_DEFAULTS[preset]["paper"])
    raw["preset"], raw["scale"] = preset, scale
    lines = {}
    for key, (lineno, value) in given.items():
        if key not in ("preset", "scale"):
            raw[key] = value
            lines[key] = lineno

    values = {}
    for key in KEYS:
        if key not in raw:
            continue
        try:
            values[key] = _CODECS[key][0](raw[key])
        except ValueError as exc:
            where = f"line {lines[key]}: " if key in lines else ""
            raise ConfigError(f"{where}cannot parse {key!r}: {exc}") from None
    values.setdefault("t_final", 0.0)
    values.setdefault("initial", "")
    values.setdefault("truncation_tol", 1e-8)
    if kicked:
        if "dims" not in values:
            values["dims"] = auto_dims(values["dim"], values["lambdas"])
        values["t_final"] = values["periods"] * (values["tau1"] + values["tau2"])
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
        lines.update({k: 0 for k in overrides})
    cfg = ExperimentConfig(**values)
    _validate(cfg, lines)
    return cfg


def _validate(cfg: ExperimentConfig, lines: dict) -> None:
    def fail(key, msg):
        lineno = lines.get(key)
        where = f"line {lineno}: " if lineno else ("command line: " if lineno == 0 else "")
        raise ConfigError(f"{where}{key}: {msg}")

    for key in ("dim", "n_traj", "dt", "output_stride", "kappa", "truncation_tol"):
        if not getattr(cfg, key) > 0:
            fail(key, f"must be positive, got {getattr(cfg, key)}")
    if cfg.seed < 0:
        fail("seed", "must be non-negative")
    if not cfg.policy:
        fail("policy", "at least one policy is required")
    if cfg.scheme not in ("euler", "split"):
        fail("scheme", "must be 'euler' or 'split'")
    if not _multiple(cfg.output_stride, cfg.dt):
        fail("output_stride", f"must be a multiple of dt={cfg.dt}")
    if cfg.kicked:
        if cfg.n_traj != 1:
            fail("n_traj", "kicked-oscillator presets integrate a single trajectory; use 1")
        for key in ("beta0", "tau1", "tau2", "chi", "periods"):
            if not getattr(cfg, key) > 0:
                fail(key, f"must be positive, got {getattr(cfg, key)}")
        if not cfg.lambdas or any(lam < 1 for lam in cfg.lambdas):
            fail("lambdas", "need one or more scales, each >= 1")
        if len(cfg.dims) != len(cfg.lambdas) or any(d < 2 for d in cfg.dims):
            fail("dims", "need one basis size >= 2 per lambda")
        for key in ("tau1", "tau2"):
            if not _multiple(getattr(cfg, key), cfg.dt):
                fail(key, f"pulse timing must be a multiple of dt={cfg.dt}")
    else:
        if not cfg.t_final > 0:
            fail("t_final", f"must be positive, got {cfg.t_final}")
        if not _multiple(cfg.t_final, cfg.dt):
            fail("t_final", f"must be a multiple of dt={cfg.dt}")
        if cfg.n_traj < 2:
            fail("n_traj", "ensemble presets need at least 2 trajectories")
        try:
            initial_state(cfg)
        except (ValueError, IndexError) as exc:
            fail("initial", str(exc))


def _multiple(x: float, step: float) -> bool:
    k = round(x / step)
    return k >= 1 and abs(k * step - x) <= 1e-9 * max(1.0, x)


# ---------------------------------------------------------------------------
# initial states

_STATE_RE = re.compile(r"^(fock|fock_pair|cat|coherent|squeezed)\(([^()]*)\)$")


def initial_state(cfg: ExperimentConfig) -> np.ndarray:
    """Build the state named by ``cfg.initial``.

    Forms: ``fock(n)``, ``fock_pair(m,n)`` for ``(|m> + |n>)/sqrt 2``,
    ``coherent(alpha)``, ``cat(alpha)`` and ``squeezed(gamma[,alpha])``.
    """
    m = _STATE_RE.match(cfg.initial)
    if not m:
        raise ValueError(f"cannot parse initial state {cfg.initial!r}")
    kind = m.group(1)
    args = [complex(a) for a in _split_list(m.group(2))]
    dim = cfg.dim
    arity = {"fock": (1,), "fock_pair": (2,), "cat": (1,), "coherent": (1,), "squeezed": (1, 2)}
    if len(args) not in arity[kind]:
        raise ValueError(f"wrong number of arguments in {cfg.initial!r}")
    if kind in ("fock", "fock_pair"):
        ns = [a.real for a in args]
        if any(a.imag or not n.is_integer() for a, n in zip(args, ns)):
            raise ValueError("Fock labels must be integers")
        states = [hilbert.fock_state(dim, int(n)) for n in ns]
        return states[0] if kind == "fock" else hilbert.superposition(*states)
    if kind == "coherent":
        return hilbert.coherent_state(dim, args[0], tol=cfg.truncation_tol)
    if kind == "cat":
        return hilbert.cat_state(dim, args[0], tol=cfg.truncation_tol)
    params = hilbert.SqueezedParams(args[0], args[1] if len(args) > 1 else 0)
    return hilbert.squeezed_state(dim, params, tol=cfg.truncation_tol)


# ---------------------------------------------------------------------------
# manifests

def format_config(cfg: ExperimentConfig) -> str:
    """Canonical ``key = value`` text that :func:`parse_config` maps back to ``cfg``."""
    skip = (_ENSEMBLE_ONLY if cfg.kicked else _KICKED_ONLY)
    lines = []
    for key in KEYS:
        if key in skip:
            continue
        lines.append(f"{key} = {_CODECS[key][1](getattr(cfg, key))}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy of ``cfg`` with fields replaced, re-validated."""
    new = replace(cfg, **changes)
    _validate(new, {})
    return new
