"""Model parameters and potential specification."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigInvalid, PotentialInvalid


def default_tau_kam(nu: int, alpha: float, tau_tilde: float) -> float:
    """Smallest integer strictly above nu + 1 + alpha + tau_tilde / alpha."""
    return float(math.floor(nu + 1 + alpha + tau_tilde / alpha) + 1)


@dataclass(frozen=True)
class ModelConfig:
    """Continuous and truncation parameters of one experiment.

    ``J`` sine modes are kept (j = 1..J) and angle Fourier modes with
    ``|k|_inf <= K``.  The three (gamma, tau) pairs control, in order, the
    first order Diophantine set, the unperturbed balanced Melnikov set and
    the KAM step sets.
    """

    nu: int = 1
    mass: float = 0.0
    rho: float = 1.0
    M: float = 200.0
    J: int = 16
    K: int = 4
    alpha: float = 0.4
    s0: float = 1.0
    gamma0: float = 0.5
    tau0: float | None = None
    gammaTilde: float = 0.125
    tauTilde: float | None = None
    gammaKam: float = 0.06
    tauKam: float | None = None
    lieOrder: int = 8
    quadS: int = 6
    seed: int = 0
    k0: float = 1e-2

    def __post_init__(self):
        # unset exponents take the smallest admissible values for nu, alpha
        if self.tau0 is None:
            object.__setattr__(self, "tau0", float(self.nu))
        if self.tauTilde is None:
            object.__setattr__(self, "tauTilde", float(2 * self.nu + 3))
        if self.tauKam is None:
            object.__setattr__(self, "tauKam", default_tau_kam(self.nu, self.alpha, self.tauTilde))
        self.validate()

    def validate(self) -> None:
        if int(self.nu) != self.nu or self.nu < 1:
            raise ConfigInvalid("nu", "must be a positive integer")
        if self.mass < 0:
            raise ConfigInvalid("mass", "must be nonnegative")
        if not self.rho > 0:
            raise ConfigInvalid("rho", "must be positive")
        if not self.M > 1:
            raise ConfigInvalid("M", "must exceed 1")
        if int(self.J) != self.J or self.J < 2:
            raise ConfigInvalid("J", "need at least two spatial modes")
        if int(self.K) != self.K or self.K < 1:
            raise ConfigInvalid("K", "need K >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigInvalid("alpha", "must lie in (0, 1)")
        if not self.s0 > 0.5:
            raise ConfigInvalid("s0", "must exceed 1/2")
        for name in ("gamma0", "gammaTilde", "gammaKam", "k0"):
            if not getattr(self, name) > 0:
                raise ConfigInvalid(name, "must be positive")
        if not self.tau0 > self.nu - 1:
            raise ConfigInvalid("tau0", f"must exceed nu - 1 = {self.nu - 1}")
        if self.tauTilde < 2 * self.nu + 3:
            raise ConfigInvalid("tauTilde", f"must be >= 2 nu + 3 = {2 * self.nu + 3}")
        lower = self.nu + 1 + self.alpha + self.tauTilde / self.alpha
        if not self.tauKam > lower:
            raise ConfigInvalid("tauKam", f"must exceed nu + 1 + alpha + tauTilde/alpha = {lower:.6g}")
        if int(self.lieOrder) != self.lieOrder or self.lieOrder < 1:
            raise ConfigInvalid("lieOrder", "must be a positive integer")
        if int(self.quadS) != self.quadS or self.quadS < 1:
            raise ConfigInvalid("quadS", "must be a positive integer")

    @property
    def rho0(self) -> float:
        """Analyticity width at which the KAM iteration starts."""
        return self.rho / 4

    @property
    def lip_weight(self) -> float:
        return self.gammaKam / self.M**self.alpha

    def M0(self, rule: str = "min") -> float:
        """Lower threshold on M for the unperturbed Melnikov estimates.

        Two readings are in use, ``min(m**2, <m>**(1/alpha))`` and the
        stronger ``max`` of the same pair; ``rule`` picks one ("min" or "max").
        """
        a = self.mass**2
        b = math.sqrt(1 + self.mass**2) ** (1 / self.alpha)
        if rule == "min":
            return min(a, b)
        if rule == "max":
            return max(a, b)
        raise ValueError(f"unknown rule {rule!r}")

    def M0_report(self) -> dict:
        return {
            "M0_min": self.M0("min"),
            "M0_max": self.M0("max"),
            "M_ge_M0_min": self.M >= self.M0("min"),
            "M_ge_M0_max": self.M >= self.M0("max"),
            "ambiguous": (self.M >= self.M0("min")) != (self.M >= self.M0("max")),
        }

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigInvalid(sorted(unknown)[0], "unknown model parameter")
        return cls(**data)


@dataclass(frozen=True)
class PotentialTerm:
    k: tuple
    p: int
    v: complex


@dataclass(frozen=True)
class PotentialSpec:
    """V(theta, x) = sum of v * exp(i k.theta) * cos(p x) over the terms."""

    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        terms = []
        for t in self.terms:
            if not isinstance(t, PotentialTerm):
                k, p, v = t
                t = PotentialTerm(tuple(int(c) for c in k), int(p), complex(v))
            terms.append(t)
        object.__setattr__(self, "terms", tuple(terms))

    @property
    def nu(self) -> int | None:
        return len(self.terms[0].k) if self.terms else None

    def collected(self) -> dict:
        """Amplitudes summed per (k, p)."""
        out: dict = {}
        for t in self.terms:
            out[(t.k, t.p)] = out.get((t.k, t.p), 0) + t.v
        return out

    def validate(self, nu: int | None = None, atol: float = 1e-14) -> None:
        coll = self.collected()
        for (k, p), v in coll.items():
            if nu is not None and len(k) != nu:
                raise PotentialInvalid(f"term k={k} has length {len(k)}, expected nu={nu}")
            if p < 0:
                raise PotentialInvalid(f"negative spatial wavenumber p={p}")
            if abs(v) > atol and all(c == 0 for c in k):
                raise PotentialInvalid("term with k = 0: the angle average of V must vanish")
            mirror = coll.get((tuple(-c for c in k), p), 0)
            if abs(mirror - np.conj(v)) > atol * max(1.0, abs(v)):
                raise PotentialInvalid(f"term k={k}, p={p} lacks its conjugate partner; V must be real")

    @classmethod
    def cosine(cls, nu: int = 1, p: int = 1, amplitude: float = 1.0, direction=None) -> "PotentialSpec":
        """amplitude * cos(k.theta) * cos(p x) with k the first unit vector by default."""
        k = tuple(direction) if direction is not None else (1,) + (0,) * (nu - 1)
        half = amplitude / 2
        return cls(((k, p, half), (tuple(-c for c in k), p, half)))

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls(())

    @classmethod
    def random(cls, nu: int, K: int, P: int, rng, n_terms: int = 4, scale: float = 1.0) -> "PotentialSpec":
        """Random real potential with zero angle average (test helper)."""
        terms = []
        for _ in range(n_terms):
            k = tuple(int(c) for c in rng.integers(-K, K + 1, size=nu))
            if all(c == 0 for c in k):
                k = (1,) + k[1:]
            p = int(rng.integers(0, P + 1))
            v = scale * complex(rng.normal(), rng.normal()) / 2
            terms.append((k, p, v))
            terms.append((tuple(-c for c in k), p, np.conj(v)))
        return cls(tuple(terms))

    def to_records(self) -> list:
        return [{"k": list(t.k), "p": t.p, "re": t.v.real, "im": t.v.imag} for t in self.terms]

    @classmethod
    def from_records(cls, records) -> "PotentialSpec":
        try:
            return cls(tuple((r["k"], r["p"], complex(r["re"], r.get("im", 0.0))) for r in records))
        except (KeyError, TypeError) as exc:
            raise ConfigInvalid("potential", f"malformed term record ({exc})") from None
