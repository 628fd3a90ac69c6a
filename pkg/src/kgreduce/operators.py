"""Angle-dependent matrices and the 2x2 block operators built from them.

An :class:`AngleOperator` stores the Fourier coefficients ``A_hat(k)`` of a
theta-dependent J x J matrix for ``|k|_inf <= K``.  Matrices use the usual
row/column layout: entry ``[n, m]`` is the coefficient of ``sin(n x)`` in
``A sin(m x)``.

Products are truncated back to ``|k|_inf <= K``.  They are computed exactly
through an FFT on a grid of ``4K + 1`` points per angle, which is enough to
hold the degree ``2K`` product without aliasing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


class TruncationLog:
    """Accumulates the largest coefficient dropped by truncated products."""

    def __init__(self):
        self.max_dropped = 0.0
        self.n_products = 0

    def record(self, dropped: float) -> None:
        self.n_products += 1
        if dropped > self.max_dropped:
            self.max_dropped = float(dropped)

    def as_dict(self) -> dict:
        return {"max_dropped": self.max_dropped, "n_products": self.n_products}


def k_vectors(nu: int, K: int) -> np.ndarray:
    """All k with |k|_inf <= K, in the storage order of AngleOperator.coeffs."""
    grids = np.meshgrid(*([np.arange(-K, K + 1)] * nu), indexing="ij")
    return np.stack(grids, axis=-1)


class AngleOperator:
    """Finite Fourier family ``theta -> sum_k A_hat(k) exp(i k.theta)``."""

    __slots__ = ("coeffs", "nu", "K", "J")

    def __init__(self, coeffs: np.ndarray, nu: int):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim != nu + 2:
            raise ValueError(f"expected {nu + 2}-dimensional coefficient array, got {coeffs.ndim}")
        side = coeffs.shape[0]
        if side % 2 != 1 or coeffs.shape[:nu] != (side,) * nu:
            raise ValueError(f"bad angle-mode shape {coeffs.shape[:nu]}")
        if coeffs.shape[-1] != coeffs.shape[-2]:
            raise ValueError("blocks must be square")
        self.coeffs = coeffs
        self.nu = nu
        self.K = (side - 1) // 2
        self.J = coeffs.shape[-1]

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, nu: int, K: int, J: int) -> "AngleOperator":
        return cls(np.zeros((2 * K + 1,) * nu + (J, J), dtype=complex), nu)

    @classmethod
    def constant(cls, mat: np.ndarray, nu: int, K: int) -> "AngleOperator":
        op = cls.zeros(nu, K, mat.shape[0])
        op.coeffs[(K,) * nu] = mat
        return op

    @classmethod
    def from_dict(cls, modes: dict, nu: int, K: int, J: int) -> "AngleOperator":
        op = cls.zeros(nu, K, J)
        for k, mat in modes.items():
            k = tuple(int(c) for c in k)
            if max(abs(c) for c in k) > K:
                raise ValueError(f"mode {k} outside cutoff K={K}")
            op.coeffs[op._index(k)] += np.asarray(mat)
        return op

    def _index(self, k) -> tuple:
        return tuple(int(c) + self.K for c in k)

    # access ---------------------------------------------------------------
    def __getitem__(self, k) -> np.ndarray:
        if isinstance(k, (int, np.integer)):
            k = (k,)
        if max(abs(int(c)) for c in k) > self.K:
            return np.zeros((self.J, self.J), dtype=complex)
        return self.coeffs[self._index(k)]

    def to_dict(self, atol: float = 0.0) -> dict:
        out = {}
        for k in itertools.product(range(-self.K, self.K + 1), repeat=self.nu):
            mat = self.coeffs[self._index(k)]
            if np.abs(mat).max(initial=0.0) > atol:
                out[k] = mat
        return out

    @property
    def kvecs(self) -> np.ndarray:
        return k_vectors(self.nu, self.K)

    def k_norms(self, ord=1) -> np.ndarray:
        kv = self.kvecs
        if ord == 1:
            return np.abs(kv).sum(axis=-1)
        if ord == np.inf:
            return np.abs(kv).max(axis=-1)
        return np.linalg.norm(kv, ord=ord, axis=-1)

    def copy(self) -> "AngleOperator":
        return AngleOperator(self.coeffs.copy(), self.nu)

    # linear structure -----------------------------------------------------
    def _check(self, other: "AngleOperator") -> None:
        if (self.nu, self.K, self.J) != (other.nu, other.K, other.J):
            raise ValueError("incompatible truncations")

    def __add__(self, other):
        self._check(other)
        return AngleOperator(self.coeffs + other.coeffs, self.nu)

    def __sub__(self, other):
        self._check(other)
        return AngleOperator(self.coeffs - other.coeffs, self.nu)

    def __neg__(self):
        return AngleOperator(-self.coeffs, self.nu)

    def __mul__(self, scalar):
        return AngleOperator(self.coeffs * scalar, self.nu)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return AngleOperator(self.coeffs / scalar, self.nu)

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max(initial=0.0))

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    # involutions ------------------------------------------------------------
    def _flip(self) -> np.ndarray:
        return self.coeffs[(slice(None, None, -1),) * self.nu]

    def conj(self) -> "AngleOperator":
        """Operator conjugate: coefficients ``conj(A_hat(-k))``."""
        return AngleOperator(np.conj(self._flip()), self.nu)

    def adjoint(self) -> "AngleOperator":
        """Pointwise adjoint: coefficients ``A_hat(-k)^H``."""
        return AngleOperator(np.conj(np.swapaxes(self._flip(), -1, -2)), self.nu)

    def transpose(self) -> "AngleOperator":
        return AngleOperator(np.swapaxes(self.coeffs, -1, -2), self.nu)

    # diagonal multiplications ---------------------------------------------
    def lmul_diag(self, w) -> "AngleOperator":
        return AngleOperator(np.asarray(w)[:, None] * self.coeffs, self.nu)

    def rmul_diag(self, w) -> "AngleOperator":
        return AngleOperator(self.coeffs * np.asarray(w)[None, :], self.nu)

    def entrywise(self, factor: np.ndarray) -> "AngleOperator":
        return AngleOperator(self.coeffs * factor, self.nu)

    def time_derivative(self, omega) -> "AngleOperator":
        """Coefficients of ``omega . d/dtheta``: ``i (omega.k) A_hat(k)``."""
        wk = self.kvecs @ np.asarray(omega, dtype=float)
        return AngleOperator(1j * wk[..., None, None] * self.coeffs, self.nu)

    def project(self, N, ord=1) -> tuple["AngleOperator", "AngleOperator"]:
        """Split into modes with ``|k| <= N`` and the rest."""
        low = (self.k_norms(ord) <= N)[..., None, None]
        return AngleOperator(self.coeffs * low, self.nu), AngleOperator(self.coeffs * ~low, self.nu)

    # evaluation -------------------------------------------------------------
    def evaluate(self, theta) -> np.ndarray:
        theta = np.mod(np.atleast_1d(np.asarray(theta, dtype=float)), 2 * np.pi)
        phase = np.exp(1j * (self.kvecs @ theta))
        return np.tensordot(phase, self.coeffs, axes=(tuple(range(self.nu)), tuple(range(self.nu))))

    # products ---------------------------------------------------------------
    def _to_grid(self, L: int) -> np.ndarray:
        nu, K = self.nu, self.K
        buf = np.zeros((L,) * nu + (self.J, self.J), dtype=complex)
        idx = np.arange(-K, K + 1) % L
        buf[np.ix_(*([idx] * nu))] = self.coeffs
        return np.fft.ifftn(buf, axes=tuple(range(nu))) * L**nu

    @staticmethod
    def _from_grid(values: np.ndarray, nu: int, K: int, L: int) -> np.ndarray:
        spec = np.fft.fftn(values, axes=tuple(range(nu))) / L**nu
        idx = np.arange(-K, K + 1) % L
        return spec[np.ix_(*([idx] * nu))], spec

    def product(self, other: "AngleOperator") -> tuple["AngleOperator", float]:
        """Truncated product and the largest discarded coefficient."""
        self._check(other)
        K, nu = self.K, self.nu
        L = 4 * K + 1
        vals = np.matmul(self._to_grid(L), other._to_grid(L))
        kept, spec = self._from_grid(vals, nu, K, L)
        full_idx = np.arange(-2 * K, 2 * K + 1) % L
        full = spec[np.ix_(*([full_idx] * nu))]
        outer = k_vectors(nu, 2 * K)
        mask = np.abs(outer).max(axis=-1) > K
        dropped = float(np.abs(full[mask]).max(initial=0.0))
        return AngleOperator(kept, nu), dropped

    def matmul(self, other: "AngleOperator", log: TruncationLog | None = None) -> "AngleOperator":
        out, dropped = self.product(other)
        if log is not None:
            log.record(dropped)
        return out

    __matmul__ = matmul


@dataclass(frozen=True)
class BlockOperator:
    """``[[A^d, A^o], [-conj(A^o), -conj(A^d)]]`` with angle-dependent blocks."""

    d: AngleOperator
    o: AngleOperator

    def __post_init__(self):
        self.d._check(self.o)

    @classmethod
    def zeros(cls, nu: int, K: int, J: int) -> "BlockOperator":
        return cls(AngleOperator.zeros(nu, K, J), AngleOperator.zeros(nu, K, J))

    @classmethod
    def sigma4(cls, core: AngleOperator) -> "BlockOperator":
        """``core * sigma_4``: both blocks equal to ``core``."""
        return cls(core, core)

    @classmethod
    def diagonal(cls, lambdas, nu: int, K: int) -> "BlockOperator":
        """Time independent ``diag(lambdas) sigma_3``."""
        J = len(lambdas)
        return cls(AngleOperator.constant(np.diag(np.asarray(lambdas, dtype=complex)), nu, K),
                   AngleOperator.zeros(nu, K, J))

    @property
    def nu(self) -> int:
        return self.d.nu

    @property
    def K(self) -> int:
        return self.d.K

    @property
    def J(self) -> int:
        return self.d.J

    def __add__(self, other):
        return BlockOperator(self.d + other.d, self.o + other.o)

    def __sub__(self, other):
        return BlockOperator(self.d - other.d, self.o - other.o)

    def __neg__(self):
        return BlockOperator(-self.d, -self.o)

    def __mul__(self, scalar):
        return BlockOperator(self.d * scalar, self.o * scalar)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return self.d.is_zero() and self.o.is_zero()

    def max_abs(self) -> float:
        return max(self.d.max_abs(), self.o.max_abs())

    def time_derivative(self, omega) -> "BlockOperator":
        return BlockOperator(self.d.time_derivative(omega), self.o.time_derivative(omega))

    def project(self, N, ord=1) -> tuple["BlockOperator", "BlockOperator"]:
        dl, dh = self.d.project(N, ord)
        ol, oh = self.o.project(N, ord)
        return BlockOperator(dl, ol), BlockOperator(dh, oh)

    def evaluate(self, theta) -> np.ndarray:
        """Full 2J x 2J matrix at a real angle."""
        d = self.d.evaluate(theta)
        o = self.o.evaluate(theta)
        return np.block([[d, o], [-np.conj(o), -np.conj(d)]])

    def symmetry_defect(self) -> dict:
        """Violations of ``[A^d]^* = A^d`` and ``[A^o]^* = conj(A^o)``."""
        dd = (self.d.adjoint() - self.d).max_abs()
        do = (self.o.adjoint() - self.o.conj()).max_abs()
        return {"d": dd, "o": do, "max": max(dd, do)}

    def symmetrized(self) -> "BlockOperator":
        """Projection onto the symmetric structure (removes roundoff drift)."""
        d = (self.d + self.d.adjoint()) * 0.5
        o = (self.o + self.o.transpose()) * 0.5
        return BlockOperator(d, o)
