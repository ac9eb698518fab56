"""Rules that choose the noise correlation factor of a channel at each step."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .errors import DomainError
from .noise import UNIT_DISK_TOL


def _check_scale(r: float) -> None:
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"correlation modulus scale must lie in [0, 1], got {r}")


@dataclass(frozen=True)
class Fixed:
    """Constant correlation factor: 0 is QSD, 1 real noise, -1 imaginary noise."""

    c: complex = 0.0

    def __post_init__(self):
        if abs(self.c) > 1 + UNIT_DISK_TOL:
            raise DomainError(f"|c| must be <= 1, got {abs(self.c)}")

    @property
    def label(self) -> str:
        return f"fixed({_format_complex(self.c)})"


@dataclass(frozen=True)
class CovariancePhase:
    """``c = r sigma(L^+, L)^* / |sigma(L^+, L)|`` evaluated on the current state."""

    r: float = 1.0

    def __post_init__(self):
        _check_scale(self.r)

    @property
    def label(self) -> str:
        return f"covariance({_format_real(self.r)})"


@dataclass(frozen=True)
class SqueezedPhase:
    """``c = r gamma^* / |gamma|`` with gamma the fitted squeezing parameter."""

    r: float = 1.0

    def __post_init__(self):
        _check_scale(self.r)

    @property
    def label(self) -> str:
        return f"squeezed({_format_real(self.r)})"


CorrelationPolicy = Union[Fixed, CovariancePhase, SqueezedPhase]

QSD = Fixed(0.0)
REAL_NOISE = Fixed(1.0)
IMAGINARY_NOISE = Fixed(-1.0)


def _format_real(x: float) -> str:
    return repr(float(x))


def _format_complex(c) -> str:
    c = complex(c)
    if c.imag == 0:
        return _format_real(c.real)
    return repr(c).strip("()")


_POLICY_RE = re.compile(r"^\s*(fixed|covariance|squeezed)\s*\(\s*([^()]*)\s*\)\s*$")


def parse_policy(text: str) -> CorrelationPolicy:
    """Parse ``fixed(c)``, ``covariance(r)`` or ``squeezed(r)``.

    >>> parse_policy("fixed(0.5+0.5j)")
    Fixed(c=(0.5+0.5j))
    """
    m = _POLICY_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse correlation policy {text!r}")
    kind, arg = m.group(1), m.group(2).replace(" ", "")
    if kind == "fixed":
        c = complex(arg)
        return Fixed(c.real if c.imag == 0 else c)
    r = float(arg)
    return CovariancePhase(r) if kind == "covariance" else SqueezedPhase(r)


def policy_slug(policy: CorrelationPolicy) -> str:
    """File-name friendly form of a policy label."""
    return re.sub(r"[^0-9a-zA-Z.+-]+", "_", policy.label).strip("_")
