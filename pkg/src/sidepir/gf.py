"""Arithmetic over GF(2^w) and a systematic MDS code built on it.

Elements are plain integers in ``[0, 2**w)``; addition is XOR and
multiplication goes through log/antilog tables generated from a fixed
primitive polynomial per width (see :data:`PRIMITIVE_POLYNOMIALS`).
Bulk operations take and return numpy ``int64`` arrays.

The code evaluates a polynomial of degree ``< k`` at the points
``0, 1, ..., n-1``. The first ``k`` evaluations are the data itself, so
the code is systematic; any ``k`` evaluations pin the polynomial down,
so it is MDS.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import LengthError, PositionError, WidthError

MAX_WIDTH = 16

# Primitive polynomials, bit i is the coefficient of x^i.
PRIMITIVE_POLYNOMIALS = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x89,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}


class GF2w:
    """The field GF(2^w). Obtain instances through :func:`field`."""

    def __init__(self, width: int):
        if width not in PRIMITIVE_POLYNOMIALS:
            raise WidthError(f"width must be in [1, {MAX_WIDTH}], got {width}")
        self.width = width
        self.size = 1 << width
        self.order = self.size - 1  # multiplicative group order
        self.poly = PRIMITIVE_POLYNOMIALS[width]

        exp = np.zeros(2 * self.order, dtype=np.int64)
        log = np.zeros(self.size, dtype=np.int64)
        x = 1
        for i in range(self.order):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.size:
                x ^= self.poly
        if x != 1 or len(set(exp[: self.order].tolist())) != self.order:
            raise WidthError(f"polynomial {self.poly:#x} is not primitive")
        exp[self.order:] = exp[: self.order]
        self.exp = exp
        self.log = log
        self.exp.flags.writeable = False
        self.log.flags.writeable = False

    def __repr__(self) -> str:
        return f"GF2w(width={self.width})"

    def check(self, values) -> np.ndarray:
        arr = np.asarray(values, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.size):
            raise WidthError(f"symbols must lie in [0, {self.size}) for width {self.width}")
        return arr

    # scalar operations
    def add(self, a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[self.log[a] + self.log[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return int(self.exp[(self.order - self.log[a]) % self.order])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            return 1 if e == 0 else 0
        return int(self.exp[(self.log[a] * e) % self.order])

    # array operations
    def mul_array(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = self.exp[(self.log[a] + self.log[b]) % self.order]
        return np.where((a == 0) | (b == 0), 0, out)

    def sum(self, values, axis=None) -> np.ndarray:
        return np.bitwise_xor.reduce(np.asarray(values, dtype=np.int64), axis=axis)


@lru_cache(maxsize=None)
def field(width: int) -> GF2w:
    return GF2w(width)


@dataclass(frozen=True)
class FieldElement:
    """A single element with its field attached; convenient for scalar work."""

    value: int
    width: int

    def __post_init__(self):
        if not 1 <= self.width <= MAX_WIDTH:
            raise WidthError(f"width must be in [1, {MAX_WIDTH}], got {self.width}")
        if not 0 <= self.value < (1 << self.width):
            raise WidthError(f"{self.value} is not an element of GF(2^{self.width})")

    @property
    def field(self) -> GF2w:
        return field(self.width)

    def _other(self, other: "FieldElement") -> int:
        if not isinstance(other, FieldElement):
            return NotImplemented
        if other.width != self.width:
            raise WidthError("operands come from different fields")
        return other.value

    def __add__(self, other):
        v = self._other(other)
        return FieldElement(self.value ^ v, self.width)

    __sub__ = __add__

    def __mul__(self, other):
        v = self._other(other)
        return FieldElement(self.field.mul(self.value, v), self.width)

    def __truediv__(self, other):
        v = self._other(other)
        return FieldElement(self.field.div(self.value, v), self.width)

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field.inv(self.value), self.width)

    def __int__(self) -> int:
        return self.value


def _log_products(f: GF2w, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """For each x in xs, log of prod over y in ys of (x - y); requires x != y."""
    diff = xs[:, None] ^ ys[None, :]
    return f.log[diff].sum(axis=1) % f.order


class SystematicCode:
    """A systematic ``(n, k)`` MDS code over GF(2^w).

    Codeword layout: the ``k`` data symbols first, then ``n - k`` parity
    symbols in evaluation-point order.
    """

    def __init__(self, k: int, n: int, width: int):
        if k < 1 or n < k:
            raise LengthError(f"need 1 <= k <= n, got k={k}, n={n}")
        if n > (1 << width):
            raise WidthError(f"GF(2^{width}) has fewer than n={n} evaluation points")
        self.k, self.n, self.width = k, n, width
        self.field = field(width)
        self.points = np.arange(n, dtype=np.int64)
        self._parity_log = self._lagrange_logs(np.arange(k), np.arange(k, n))

    def __repr__(self) -> str:
        return f"SystematicCode(k={self.k}, n={self.n}, width={self.width})"

    def _lagrange_logs(self, known: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """Log of the Lagrange basis ``l_i(x_t)`` for known points i and targets t.

        Targets must be disjoint from the known points.
        """
        f = self.field
        xk = self.points[known]
        xt = self.points[targets]
        if len(xt) == 0:
            return np.zeros((0, len(xk)), dtype=np.int64)
        # barycentric weights: 1 / prod_{j != i} (x_i - x_j)
        diff = xk[:, None] ^ xk[None, :]
        np.fill_diagonal(diff, 1)
        denom = f.log[diff].sum(axis=1) % f.order
        node = _log_products(f, xt, xk)  # log prod_j (x_t - x_j)
        cross = f.log[xt[:, None] ^ xk[None, :]]
        return (node[:, None] - cross - denom[None, :]) % f.order

    def _apply(self, basis_log: np.ndarray, values: np.ndarray) -> np.ndarray:
        f = self.field
        if basis_log.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        terms = f.exp[(basis_log + f.log[values][None, :]) % f.order]
        terms = np.where(values[None, :] == 0, 0, terms)
        return f.sum(terms, axis=1)

    def _data(self, data: Sequence[int], length: int) -> np.ndarray:
        arr = np.asarray(data, dtype=np.int64).reshape(-1)
        if len(arr) != length:
            raise LengthError(f"expected {length} symbols, got {len(arr)}")
        return self.field.check(arr)

    def parity(self, data: Sequence[int]) -> np.ndarray:
        return self._apply(self._parity_log, self._data(data, self.k))

    def encode(self, data: Sequence[int]) -> np.ndarray:
        arr = self._data(data, self.k)
        return np.concatenate([arr, self._apply(self._parity_log, arr)])

    def reconstruct(self, known: Iterable[tuple[int, int]]) -> np.ndarray:
        """Recover the ``k`` data symbols from exactly ``k`` known positions."""
        pairs = list(known)
        positions = [int(pos) for pos, _ in pairs]
        if len(pairs) != self.k:
            raise PositionError(f"need exactly {self.k} known positions, got {len(pairs)}")
        if len(set(positions)) != len(positions):
            raise PositionError("duplicate positions")
        if any(not 0 <= pos < self.n for pos in positions):
            raise PositionError(f"positions must lie in [0, {self.n})")
        pos = np.asarray(positions, dtype=np.int64)
        vals = self.field.check([v for _, v in pairs])

        out = np.zeros(self.k, dtype=np.int64)
        missing = np.setdiff1d(np.arange(self.k), pos)
        present = pos < self.k
        out[pos[present]] = vals[present]
        if len(missing):
            basis = self._lagrange_logs(pos, missing)
            out[missing] = self._apply(basis, vals)
        return out


@lru_cache(maxsize=64)
def systematic_code(k: int, n: int, width: int) -> SystematicCode:
    return SystematicCode(k, n, width)
