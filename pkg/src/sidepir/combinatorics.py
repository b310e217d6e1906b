"""Closed-form quantities of the scheme, computed exactly.

Every value here is an int or a :class:`fractions.Fraction`; nothing is
ever converted to float.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError, InternalError, NonUniformError

Rational = Fraction


def _check_nk(N: int, K: int) -> None:
    if not isinstance(N, int) or N < 2:
        raise DomainError(f"need N >= 2 databases, got {N!r}")
    if not isinstance(K, int) or K < 1:
        raise DomainError(f"need K >= 1 messages, got {K!r}")


def optimal_cost(N: int, K: int, M: int) -> Fraction:
    """Optimal normalized download cost ``1 + 1/N + ... + 1/N**(K-M-1)``."""
    _check_nk(N, K)
    if not isinstance(M, int) or M < 0:
        raise DomainError(f"cache size M must be a nonnegative integer, got {M!r}")
    if M >= K:
        raise DomainError(f"cache size M={M} must be smaller than K={K}")
    return sum((Fraction(1, N**i) for i in range(K - M)), Fraction(0))


def capacity(N: int, K: int, M: int) -> Fraction:
    return 1 / optimal_cost(N, K, M)


def classical_cost(N: int, K: int) -> Fraction:
    """Download cost of classical PIR (no side information)."""
    return optimal_cost(N, K, 0)


def fully_known_cost(N: int, K: int, r: Fraction) -> Fraction:
    """Cost when the cache content is fully known to every database.

    ``r`` is the caching ratio in [0, 1]. Comparison helper only.
    """
    r = Fraction(r)
    if not 0 <= r <= 1:
        raise DomainError(f"caching ratio must lie in [0, 1], got {r}")
    return (1 - r) * classical_cost(N, K)


@dataclass(frozen=True)
class SchemeCounts:
    """Per-database geometry of the uniform-prefetching scheme."""

    N: int
    K: int
    M: int
    p: int  # queried systematic symbols per database
    q: int  # of those, determined by cached side information
    L: int  # symbols per message

    @property
    def m(self) -> int:
        return self.M // self.N

    @property
    def code_length(self) -> int:
        return 2 * self.p - self.q

    @property
    def parity_per_db(self) -> int:
        return self.p - self.q

    @property
    def downloaded(self) -> int:
        return self.N * self.parity_per_db

    @property
    def cost(self) -> Fraction:
        return Fraction(self.downloaded, self.L)

    def as_dict(self) -> dict:
        return {
            "N": self.N, "K": self.K, "M": self.M, "p": self.p, "q": self.q,
            "L": self.L, "code_length": self.code_length,
            "parity_per_db": self.parity_per_db,
        }


def _geometric(N: int, e: int) -> int:
    num = N**e - 1
    if num % (N - 1):
        raise InternalError(f"(N^{e} - 1) not divisible by N - 1 for N={N}")
    return num // (N - 1)


def scheme_counts(N: int, K: int, M: int) -> SchemeCounts:
    _check_nk(N, K)
    if not isinstance(M, int) or M < 0:
        raise DomainError(f"cache size M must be a nonnegative integer, got {M!r}")
    if M % N:
        raise NonUniformError(
            f"M={M} is not a multiple of N={N}; the scheme needs m = M/N cached "
            "messages from every database"
        )
    m = M // N
    if M >= K:
        raise DomainError(f"cache size M={M} must be smaller than K={K}")
    counts = SchemeCounts(
        N=N, K=K, M=M,
        p=_geometric(N, K - m),
        q=_geometric(N, (N - 1) * m),
        L=N ** (K - m),
    )
    if counts.q >= counts.p:
        raise InternalError(f"q={counts.q} >= p={counts.p}")
    if counts.cost != optimal_cost(N, K, M):
        raise InternalError(
            f"N(p-q)/L = {counts.cost} differs from optimal cost {optimal_cost(N, K, M)}"
        )
    return counts


def min_field_width(counts: SchemeCounts | int) -> int:
    """Smallest ``w >= 1`` with ``2**w >= code length``.

    Accepts either a :class:`SchemeCounts` or a bare code length.
    """
    n = counts.code_length if isinstance(counts, SchemeCounts) else int(counts)
    if n < 1:
        raise DomainError(f"code length must be positive, got {n}")
    return max(1, (n - 1).bit_length())


def unknown_side_info_code_length(N: int, K: int, M: int) -> int:
    """Code length ``2p~ - q~`` of the scheme designed for fully unknown side information.

    That scheme works on all K messages at every database, with
    ``p~ = (N^K - 1)/(N - 1)`` and ``q~ = (N^M - 1)/(N - 1)``.
    """
    _check_nk(N, K)
    if M < 0 or M >= K:
        raise DomainError(f"need 0 <= M < K, got M={M}, K={K}")
    return 2 * _geometric(N, K) - _geometric(N, M)
