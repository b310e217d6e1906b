"""Query-table construction for the uniform-prefetching scheme.

Messages and databases are numbered from 1, as are symbol indices within
a message. The construction runs in two stages:

1. :func:`canonical_rows` lays out every database's rows deterministically
   in round order, using the *virtual* symbol index ``j`` of ``U_k(j)``
   (the j-th symbol of message k after its private permutation).
2. :func:`build_query_table` draws one uniform permutation per message and
   one uniform row order per database, producing the rows the databases
   actually see.

Round ``r`` at database ``n`` holds ``(N-1)**(r-1)`` rows for each
r-subset of the messages ``n`` did not provide. Rows containing the desired
message reuse the uncached part of a round ``r-1`` row from another
database as side information. Cached messages that database ``n`` itself
provided are swapped for the message in the same sorted position of the
other database's prefetch set, with a fresh symbol.
"""

from __future__ import annotations

import enum
import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .combinatorics import SchemeCounts, scheme_counts
from .errors import DomainError, InternalError, NonUniformError, PeelError, PlanError


class Mutation(enum.Enum):
    """Deliberate generator defects used to check that the audits bite."""

    SKIP_SUBSET = "skip-subset"  # drop the first desired-message pair of round 2
    NO_SHUFFLE = "no-shuffle"  # keep rows in construction order
    REUSE_INDEX = "reuse-index"  # round-2 desired symbol repeats the round-1 one


def _as_mutation(mutation) -> Mutation | None:
    if mutation is None or isinstance(mutation, Mutation):
        return mutation
    return Mutation(mutation)


@dataclass
class PrefetchPlan:
    """Which messages the user cached from which database."""

    assignments: dict[int, frozenset[int]]

    def __post_init__(self):
        self.assignments = {int(n): frozenset(int(k) for k in ks)
                            for n, ks in sorted(self.assignments.items())}
        if sorted(self.assignments) != list(range(1, len(self.assignments) + 1)):
            raise PlanError(f"databases must be numbered 1..N, got {sorted(self.assignments)}")
        seen: set[int] = set()
        for n, ks in self.assignments.items():
            if seen & ks:
                raise PlanError(f"database {n} shares cached messages {sorted(seen & ks)}")
            seen |= ks

    @property
    def N(self) -> int:
        return len(self.assignments)

    def __getitem__(self, n: int) -> frozenset[int]:
        return self.assignments[n]

    @property
    def cached(self) -> frozenset[int]:
        return frozenset().union(*self.assignments.values())

    def others(self, n: int) -> frozenset[int]:
        """Cached messages database ``n`` does not know about."""
        return self.cached - self.assignments[n]

    def sizes(self) -> list[int]:
        return [len(self.assignments[n]) for n in range(1, self.N + 1)]

    def is_uniform(self) -> bool:
        return len(set(self.sizes())) <= 1

    def validate(self, K: int, M: int) -> None:
        bad = [k for k in self.cached if not 1 <= k <= K]
        if bad:
            raise PlanError(f"cached messages {sorted(bad)} outside [1, {K}]")
        if len(self.cached) > M:
            raise PlanError(f"plan caches {len(self.cached)} messages but M={M}")

    def to_dict(self) -> dict[str, list[int]]:
        return {str(n): sorted(ks) for n, ks in self.assignments.items()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "PrefetchPlan":
        return cls({int(n): ks for n, ks in data.items()})

    @classmethod
    def empty(cls, N: int) -> "PrefetchPlan":
        return cls({n: () for n in range(1, N + 1)})


def uniform_prefetch(N: int, K: int, M: int, seed=None) -> PrefetchPlan:
    """Cache ``M/N`` uniformly chosen distinct messages from every database."""
    if N < 2 or K < 1 or M < 0:
        raise DomainError(f"invalid parameters N={N}, K={K}, M={M}")
    if M % N:
        raise NonUniformError(f"M={M} is not a multiple of N={N}")
    if M >= K:
        raise DomainError(f"cache size M={M} must be smaller than K={K}")
    m = M // N
    rng = np.random.default_rng(seed)
    chosen = (rng.permutation(K)[:M] + 1).tolist()
    return PrefetchPlan({n: chosen[(n - 1) * m: n * m] for n in range(1, N + 1)})


@dataclass(frozen=True)
class QuerySpec:
    """One queried sum: at most one ``(message, symbol)`` term per message."""

    terms: tuple[tuple[int, int], ...]

    def __post_init__(self):
        terms = tuple(sorted((int(k), int(j)) for k, j in self.terms))
        if not terms:
            raise DomainError("a query needs at least one term")
        if len({k for k, _ in terms}) != len(terms):
            raise DomainError(f"repeated message in query {terms}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def of(cls, mapping: Mapping[int, int]) -> "QuerySpec":
        return cls(tuple(mapping.items()))

    @property
    def messages(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.terms)

    def index(self, k: int) -> int | None:
        for msg, j in self.terms:
            if msg == k:
                return j
        return None

    def __len__(self) -> int:
        return len(self.terms)

    def render(self) -> str:
        return "+".join(f"{message_name(k)}{j}" for k, j in self.terms)


def message_name(k: int) -> str:
    return chr(ord("a") + k - 1) if k <= 26 else f"w{k}_"


@dataclass
class CanonicalRow:
    spec: QuerySpec
    round: int
    desired: bool
    known: bool


def _check_request(N: int, K: int, M: int, theta: int, plan: PrefetchPlan) -> SchemeCounts:
    if plan.N != N:
        raise PlanError(f"plan covers {plan.N} databases, expected N={N}")
    plan.validate(K, M)
    if M % N or not plan.is_uniform() or any(s != M // N for s in plan.sizes()):
        raise NonUniformError(
            f"prefetch sizes {plan.sizes()} are not uniform M/N; only uniform "
            "prefetching is supported by this scheme"
        )
    counts = scheme_counts(N, K, M)
    if not 1 <= theta <= K:
        raise DomainError(f"desired index {theta} outside [1, {K}]")
    if theta in plan.cached:
        raise DomainError(f"desired message {theta} is already cached")
    return counts


def canonical_rows(N: int, K: int, M: int, theta: int, plan: PrefetchPlan,
                   mutation=None) -> dict[int, list[CanonicalRow]]:
    """Deterministic rows per database, in virtual indices and round order."""
    mutation = _as_mutation(mutation)
    _check_request(N, K, M, theta, plan)
    m = M // N
    dbs = range(1, N + 1)
    cached = plan.cached
    uncached = frozenset(range(1, K + 1)) - cached - {theta}
    provided = {n: sorted(plan[n]) for n in dbs}
    # undesired messages each database may see, in index order
    others = {n: [k for k in range(1, K + 1) if k not in plan[n] and k != theta]
              for n in dbs}

    used = [0] * (K + 1)

    def fresh(k: int) -> int:
        used[k] += 1
        return used[k]

    rows: dict[int, list[CanonicalRow]] = {n: [] for n in dbs}
    prev_plain: dict[int, dict[tuple, list[dict]]] = {n: {} for n in dbs}
    first_desired: dict[int, int] = {}

    for r in range(1, K - m + 1):
        reps = (N - 1) ** (r - 1)
        for n in dbs:
            subsets = list(itertools.combinations(others[n], r - 1))
            if mutation is Mutation.SKIP_SUBSET and r == 2 and subsets:
                subsets = subsets[1:]
            for sub in subsets:
                side = [k for k in sub if k in uncached]
                new_terms: list[dict] = []
                if not side:
                    for _ in range(reps):
                        terms = {theta: fresh(theta)}
                        terms.update((c, fresh(c)) for c in sub)
                        new_terms.append(terms)
                else:
                    for off in range(1, N):
                        n2 = (n - 1 + off) % N + 1
                        # message at database n2 that maps onto each element of sub
                        back = {k: (provided[n][provided[n2].index(k)] if k in plan[n2] else k)
                                for k in sub}
                        key = tuple(sorted(back.values()))
                        for source in prev_plain[n2][key]:
                            terms = {theta: fresh(theta)}
                            for k in sub:
                                src = back[k]
                                terms[k] = fresh(k) if src in plan[n] else source[src]
                            new_terms.append(terms)
                for terms in new_terms:
                    if mutation is Mutation.REUSE_INDEX and r == 2 and n in first_desired:
                        terms[theta] = first_desired.pop(n)
                    if r == 1:
                        first_desired[n] = terms[theta]
                    rows[n].append(CanonicalRow(QuerySpec.of(terms), r, True, False))

        plain: dict[int, dict[tuple, list[dict]]] = {n: {} for n in dbs}
        for n in dbs:
            for sub in itertools.combinations(others[n], r):
                bucket = plain[n].setdefault(sub, [])
                known = all(k in cached for k in sub)
                for _ in range(reps):
                    terms = {k: fresh(k) for k in sub}
                    bucket.append(terms)
                    rows[n].append(CanonicalRow(QuerySpec.of(terms), r, False, known))
        prev_plain = plain
    return rows


def _self_check(rows: dict[int, list[CanonicalRow]], counts: SchemeCounts, theta: int) -> None:
    N, L = counts.N, counts.L
    desired_indices: list[int] = []
    for n, db_rows in rows.items():
        if len(db_rows) != counts.p:
            raise InternalError(f"database {n}: {len(db_rows)} rows, expected p={counts.p}")
        known = sum(row.known for row in db_rows)
        if known != counts.q:
            raise InternalError(f"database {n}: {known} known rows, expected q={counts.q}")
        mine = [row.spec.index(theta) for row in db_rows if row.desired]
        if len(mine) != L // N:
            raise InternalError(f"database {n}: {len(mine)} desired rows, expected {L // N}")
        desired_indices += mine
        per_message: dict[int, list[int]] = {}
        for row in db_rows:
            for k, j in row.spec.terms:
                per_message.setdefault(k, []).append(j)
        for k, js in per_message.items():
            if len(js) != len(set(js)):
                raise InternalError(f"database {n}: message {k} repeats a symbol index")
            if max(js) > L:
                raise InternalError(f"message {k} needs more than L={L} symbols")
    if sorted(desired_indices) != list(range(1, L + 1)):
        raise InternalError("desired symbols do not cover 1..L exactly once")


@dataclass
class QueryTable:
    """The realized query table for one retrieval.

    ``queries[n]`` are the rows sent to database ``n`` (1-based key), in the
    shuffled order and with real symbol indices. ``canonical`` keeps the
    construction-order rows in virtual indices; ``permutations[k][j-1]`` is
    the real index of virtual symbol ``j`` of message ``k`` and
    ``order[n][i]`` is the canonical position of realized row ``i``.
    """

    N: int
    K: int
    M: int
    theta: int
    plan: PrefetchPlan
    counts: SchemeCounts
    seed: int | None
    canonical: dict[int, list[CanonicalRow]]
    permutations: dict[int, list[int]]
    order: dict[int, list[int]]
    queries: dict[int, list[QuerySpec]] = field(init=False)
    known: dict[int, list[bool]] = field(init=False)
    mutation: Mutation | None = None

    def __post_init__(self):
        self.queries, self.known = {}, {}
        for n, rows in self.canonical.items():
            realized = [rows[i] for i in self.order[n]]
            self.queries[n] = [
                QuerySpec(tuple((k, self.permutations[k][j - 1]) for k, j in row.spec.terms))
                for row in realized
            ]
            self.known[n] = [row.known for row in realized]

    @property
    def L(self) -> int:
        return self.counts.L

    def active(self, n: int) -> list[int]:
        """Messages database ``n`` can be asked about."""
        return [k for k in range(1, self.K + 1) if k not in self.plan[n]]

    def desired_rows(self, n: int) -> list[int]:
        return [i for i, spec in enumerate(self.queries[n]) if self.theta in spec.messages]

    def render(self, canonical: bool = False) -> str:
        """Text layout with one column per database (known rows marked *).

        Known rows carry a trailing ``*``.
        """
        cols = []
        for n in range(1, self.N + 1):
            if canonical:
                cells = [row.spec.render() + ("*" if row.known else "")
                         for row in self.canonical[n]]
            else:
                cells = [spec.render() + ("*" if known else "")
                         for spec, known in zip(self.queries[n], self.known[n])]
            footer = "W_H%d={%s}" % (n, ",".join(f"W{k}" for k in sorted(self.plan[n])))
            cols.append([f"DB{n}"] + cells + [footer])
        width = max(len(c) for col in cols for c in col)
        lines = []
        for i in range(len(cols[0])):
            if i == len(cols[0]) - 1:
                lines.append("-" * ((width + 3) * self.N - 3))
            lines.append(" | ".join(col[i].ljust(width) for col in cols).rstrip())
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "N": self.N, "K": self.K, "M": self.M, "theta": self.theta,
            "seed": self.seed,
            "mutation": self.mutation.value if self.mutation else None,
            "plan": self.plan.to_dict(),
            "counts": self.counts.as_dict(),
            "permutations": {str(k): list(v) for k, v in self.permutations.items()},
            "databases": [
                {
                    "n": n,
                    "queries": [[list(t) for t in spec.terms] for spec in self.queries[n]],
                    "known": list(self.known[n]),
                    "order": list(self.order[n]),
                }
                for n in range(1, self.N + 1)
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: Mapping) -> "QueryTable":
        """Rebuild a table from :meth:`to_dict` output.

        The canonical layout is regenerated from the parameters and checked
        against the stored realized rows.
        """
        plan = PrefetchPlan.from_dict(data["plan"])
        mutation = _as_mutation(data.get("mutation"))
        rows = canonical_rows(data["N"], data["K"], data["M"], data["theta"], plan, mutation)
        table = cls(
            N=data["N"], K=data["K"], M=data["M"], theta=data["theta"], plan=plan,
            counts=scheme_counts(data["N"], data["K"], data["M"]), seed=data["seed"],
            canonical=rows,
            permutations={int(k): list(v) for k, v in data["permutations"].items()},
            order={db["n"]: list(db["order"]) for db in data["databases"]},
            mutation=mutation,
        )
        for db in data["databases"]:
            stored = [QuerySpec(tuple(tuple(t) for t in q)) for q in db["queries"]]
            if stored != table.queries[db["n"]] or list(db["known"]) != table.known[db["n"]]:
                raise PlanError(f"stored rows for database {db['n']} do not match the parameters")
        return table


def build_query_table(N: int, K: int, M: int, theta: int, plan: PrefetchPlan,
                      seed=None, mutation=None) -> QueryTable:
    """Build and randomize the full query table for retrieving ``W_theta``.

    Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64): first
    one permutation per message in message order, then one row order per
    database in database order.
    """
    mutation = _as_mutation(mutation)
    counts = _check_request(N, K, M, theta, plan)
    rows = canonical_rows(N, K, M, theta, plan, mutation)
    if mutation is None:
        _self_check(rows, counts, theta)
    rng = np.random.default_rng(seed)
    perms = {k: (rng.permutation(counts.L) + 1).tolist() for k in range(1, K + 1)}
    order = {}
    for n in range(1, N + 1):
        if mutation is Mutation.NO_SHUFFLE:
            order[n] = list(range(len(rows[n])))
        else:
            order[n] = rng.permutation(len(rows[n])).tolist()
    return QueryTable(N=N, K=K, M=M, theta=theta, plan=plan, counts=counts, seed=seed,
                      canonical=rows, permutations=perms, order=order, mutation=mutation)


def side_information_index(table: QueryTable) -> dict[frozenset, tuple[int, int]]:
    """Map the uncached undesired terms of every plain row to its location.

    Plain rows are rows without the desired message. Rows with no uncached
    terms are skipped.
    """
    skip = table.plan.cached | {table.theta}
    index: dict[frozenset, tuple[int, int]] = {}
    for n in range(1, table.N + 1):
        for i, spec in enumerate(table.queries[n]):
            if table.theta in spec.messages:
                continue
            key = frozenset(t for t in spec.terms if t[0] not in skip)
            if key:
                if key in index:
                    raise PeelError(f"side information {sorted(key)} queried twice")
                index[key] = (n, i)
    return index


def peel_plan(table: QueryTable) -> list[tuple[int, int, int, tuple[int, int] | None]]:
    """Symbolic decoding pass.

    Returns ``(n, row, desired_index, side_row)`` for every desired row,
    where ``side_row`` locates the plain row that cancels its uncached
    undesired terms (``None`` if only cached terms remain). Raises
    :class:`PeelError` when a row cannot be resolved or the desired
    symbols are not covered exactly once.
    """
    cached = table.plan.cached
    index = side_information_index(table)
    steps = []
    for n in range(1, table.N + 1):
        for i, spec in enumerate(table.queries[n]):
            j = spec.index(table.theta)
            if j is None:
                continue
            key = frozenset(t for t in spec.terms if t[0] not in cached and t[0] != table.theta)
            side = None
            if key:
                if key not in index:
                    raise PeelError(f"no side information for row {spec.render()} at database {n}")
                side = index[key]
                if side[0] == n:
                    raise PeelError(f"row {spec.render()} reuses side information from its own database")
            steps.append((n, i, j, side))
    got = sorted(j for _, _, j, _ in steps)
    if got != list(range(1, table.L + 1)):
        raise PeelError("desired symbols are not covered exactly once")
    return steps


@dataclass(frozen=True)
class Signature:
    """Canonical structure of what one database sees.

    Messages are relabeled by rank among the database's active messages;
    a message the database provided itself would appear under the label
    ``-k``.
    """

    active: int
    subsets: tuple[tuple[tuple[int, ...], int], ...]
    multiplicities: tuple[tuple[int, tuple[int, ...]], ...]

    def digest(self) -> str:
        import hashlib
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]


def structural_signature(table: QueryTable, n: int) -> Signature:
    if n not in table.queries:
        raise DomainError(f"database {n} outside [1, {table.N}]")
    active = table.active(n)
    if not active:
        raise DomainError("database has no active messages")
    rank = {k: i for i, k in enumerate(active)}

    def label(k: int) -> int:
        return rank.get(k, -k)

    subsets = Counter(tuple(sorted(label(k) for k in spec.messages)) for spec in table.queries[n])
    symbols: dict[int, Counter] = {}
    for spec in table.queries[n]:
        for k, j in spec.terms:
            symbols.setdefault(label(k), Counter())[j] += 1
    mult = tuple(sorted((lab, tuple(sorted(c.values()))) for lab, c in symbols.items()))
    return Signature(len(active), tuple(sorted(subsets.items())), mult)


def reference_signature(N: int, K: int, M: int) -> Signature:
    """The signature every database of a correct table must have."""
    counts = scheme_counts(N, K, M)
    size = K - counts.m
    subsets = []
    for r in range(1, size + 1):
        for sub in itertools.combinations(range(size), r):
            subsets.append((sub, (N - 1) ** (r - 1)))
    uses = N ** (size - 1)
    mult = tuple((lab, (1,) * uses) for lab in range(size))
    return Signature(size, tuple(sorted(subsets)), mult)


def signature_difference(sig: Signature, ref: Signature,
                         active: Iterable[int] | None = None) -> list[str]:
    """Human-readable differences, naming real messages when ``active`` is given."""
    names = list(active) if active is not None else None

    def show(labels) -> str:
        if names is None:
            return "{" + ",".join(map(str, labels)) + "}"
        return "{" + ",".join(f"W{names[l]}" if l >= 0 else f"W{-l}" for l in labels) + "}"

    out = []
    a, b = dict(sig.subsets), dict(ref.subsets)
    for sub in sorted(set(a) | set(b)):
        if a.get(sub, 0) != b.get(sub, 0):
            out.append(f"subset {show(sub)}: {a.get(sub, 0)} rows, expected {b.get(sub, 0)}")
    ma, mb = dict(sig.multiplicities), dict(ref.multiplicities)
    for lab in sorted(set(ma) | set(mb)):
        if ma.get(lab) != mb.get(lab):
            reused = sum(c > 1 for c in ma.get(lab, ()))
            out.append(f"message {show((lab,))}: symbol usage differs "
                       f"({reused} repeated indices)")
    return out
