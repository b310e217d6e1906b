"""End-to-end retrieval: replicated storage, database answers, user decoding."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .combinatorics import min_field_width, scheme_counts
from .errors import DimensionError, PeelError, PositionError, ReconstructError
from .gf import MAX_WIDTH, field, systematic_code
from .scheme import PrefetchPlan, QueryTable, build_query_table, peel_plan


@dataclass(frozen=True)
class SystemConfig:
    N: int
    K: int
    M: int
    width: int | None = None  # defaults to the smallest width the code needs
    seed: int | None = 0

    @property
    def counts(self):
        return scheme_counts(self.N, self.K, self.M)

    def field_width(self) -> int:
        need = min_field_width(self.counts)
        if self.width is None:
            return need
        if not need <= self.width <= MAX_WIDTH:
            raise DimensionError(f"width {self.width} outside [{need}, {MAX_WIDTH}] "
                                 f"for code length {self.counts.code_length}")
        return self.width


@dataclass
class MessageStore:
    """K messages of L symbols each; every database holds the same copy."""

    symbols: np.ndarray
    width: int

    def __post_init__(self):
        self.symbols = field(self.width).check(self.symbols)
        if self.symbols.ndim != 2:
            raise DimensionError("store must be a K x L matrix")
        self.symbols.flags.writeable = False

    @property
    def K(self) -> int:
        return self.symbols.shape[0]

    @property
    def L(self) -> int:
        return self.symbols.shape[1]

    def message(self, k: int) -> np.ndarray:
        return self.symbols[k - 1]

    @classmethod
    def random(cls, K: int, L: int, width: int, seed=None) -> "MessageStore":
        rng = np.random.default_rng(seed)
        return cls(rng.integers(0, 1 << width, size=(K, L), dtype=np.int64), width)

    @classmethod
    def zeros(cls, K: int, L: int, width: int) -> "MessageStore":
        return cls(np.zeros((K, L), dtype=np.int64), width)


@dataclass(frozen=True)
class AnswerBlock:
    n: int
    parity: tuple[int, ...]


def _code_for(table: QueryTable, width: int):
    c = table.counts
    if (1 << width) < c.code_length:
        raise DimensionError(f"GF(2^{width}) too small for code length {c.code_length}")
    return systematic_code(c.p, c.code_length, width)


def row_values(store: MessageStore, queries) -> np.ndarray:
    """Field sum of the referenced symbols, one value per query."""
    out = np.zeros(len(queries), dtype=np.int64)
    for i, spec in enumerate(queries):
        acc = 0
        for k, j in spec.terms:
            acc ^= int(store.symbols[k - 1, j - 1])
        out[i] = acc
    return out


def database_answer(store: MessageStore, table: QueryTable, n: int) -> AnswerBlock:
    """Parity part of the MDS-coded row values of database ``n``.

    Reads only the store and database n's own queries.
    """
    if store.K != table.K or store.L != table.L:
        raise DimensionError(f"store is {store.K}x{store.L}, table expects {table.K}x{table.L}")
    if n not in table.queries:
        raise DimensionError(f"no database {n}")
    code = _code_for(table, store.width)
    values = row_values(store, table.queries[n])
    return AnswerBlock(n, tuple(int(v) for v in code.parity(values)))


def user_decode(table: QueryTable, answers: list[AnswerBlock] | Mapping[int, AnswerBlock],
                cache: Mapping[int, np.ndarray], width: int) -> np.ndarray:
    """Recover W_theta from the parity answers and the cached messages."""
    if not isinstance(answers, Mapping):
        answers = {a.n: a for a in answers}
    missing = [k for k in table.plan.cached if k not in cache]
    if missing:
        raise DimensionError(f"cache lacks messages {sorted(missing)}")
    if sorted(answers) != list(range(1, table.N + 1)):
        raise DimensionError("need one answer block per database")
    c = table.counts
    code = _code_for(table, width)
    f = field(width)

    def cached_symbol(k: int, j: int) -> int:
        return int(cache[k][j - 1])

    values: dict[int, np.ndarray] = {}
    for n in range(1, table.N + 1):
        parity = answers[n].parity
        if len(parity) != c.parity_per_db:
            raise DimensionError(f"database {n} returned {len(parity)} symbols, "
                                 f"expected {c.parity_per_db}")
        known = []
        for i, (spec, is_known) in enumerate(zip(table.queries[n], table.known[n])):
            if is_known:
                acc = 0
                for k, j in spec.terms:
                    acc ^= cached_symbol(k, j)
                known.append((i, acc))
        known += [(c.p + i, v) for i, v in enumerate(parity)]
        try:
            values[n] = code.reconstruct(known)
        except PositionError as exc:
            raise ReconstructError(f"database {n}: {exc}") from exc

    cached = table.plan.cached
    out = np.zeros(table.L, dtype=np.int64)
    for n, i, j, side in peel_plan(table):
        spec = table.queries[n][i]
        acc = int(values[n][i])
        for k, jj in spec.terms:
            if k in cached:
                acc ^= cached_symbol(k, jj)
        if side is not None:
            n2, i2 = side
            other = int(values[n2][i2])
            for k, jj in table.queries[n2][i2].terms:
                if k in cached:
                    other ^= cached_symbol(k, jj)
            acc ^= other
        out[j - 1] = acc
    return f.check(out)


@dataclass
class RetrievalTranscript:
    config: SystemConfig
    table: QueryTable
    answers: list[AnswerBlock]
    decoded: np.ndarray
    downloaded_symbols: int
    expected: np.ndarray | None = None

    @property
    def L(self) -> int:
        return self.table.L

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.downloaded_symbols, self.L)

    @property
    def decode_ok(self) -> bool | None:
        if self.expected is None:
            return None
        return bool(np.array_equal(self.decoded, self.expected))

    def to_dict(self) -> dict:
        width = self.config.field_width()
        return {
            "config": {"N": self.config.N, "K": self.config.K, "M": self.config.M,
                       "width": width},
            "plan": self.table.plan.to_dict(),
            "theta": self.table.theta,
            "seed": self.table.seed,
            "L": self.L,
            "parity": {str(a.n): to_hex(a.parity, width) for a in self.answers},
            "decoded": to_hex(self.decoded, width),
            "downloaded_symbols": self.downloaded_symbols,
            "ratio": str(self.ratio),
            "decode_ok": self.decode_ok,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def to_hex(symbols, width: int) -> str:
    digits = (width + 3) // 4
    return "".join(format(int(s), f"0{digits}x") for s in symbols)


def from_hex(text: str, width: int) -> list[int]:
    digits = (width + 3) // 4
    return [int(text[i:i + digits], 16) for i in range(0, len(text), digits)]


def run_retrieval(config: SystemConfig, plan: PrefetchPlan, theta: int,
                  store: MessageStore, seed=None, jobs: int = 1,
                  mutation=None) -> RetrievalTranscript:
    """Build the table, collect every database's answer and decode.

    The prefetching phase is not metered; ``downloaded_symbols`` counts
    only parity symbols of the retrieval phase.
    """
    seed = config.seed if seed is None else seed
    width = config.field_width()
    if store.width != width:
        raise DimensionError(f"store width {store.width} differs from configured width {width}")
    table = build_query_table(config.N, config.K, config.M, theta, plan, seed, mutation)
    dbs = range(1, config.N + 1)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            answers = list(pool.map(lambda n: database_answer(store, table, n), dbs))
    else:
        answers = [database_answer(store, table, n) for n in dbs]
    cache = {k: store.message(k) for k in plan.cached}
    decoded = user_decode(table, answers, cache, width)
    downloaded = sum(len(a.parity) for a in answers)
    return RetrievalTranscript(config, table, answers, decoded, downloaded,
                               expected=store.message(theta).copy())


__all__ = [
    "SystemConfig", "MessageStore", "AnswerBlock", "RetrievalTranscript",
    "database_answer", "user_decode", "run_retrieval", "row_values",
    "to_hex", "from_hex", "PeelError",
]
