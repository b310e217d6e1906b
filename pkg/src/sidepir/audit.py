"""Empirical checks of privacy, reliability and cost attainment.

Privacy is checked two ways. The structural audit compares the canonical
signature of every database's rows across all admissible
``(theta, H)`` sharing that database's own prefetch set. The statistical
audit samples realized views (permuted and shuffled) for two such
settings and compares their distributions with two-sample chi-square tests.

Only query distributions are audited: answers are a deterministic
function of the queries and the messages, so equal query distributions
give equal joint distributions with the answers.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np
from scipy import stats

from .combinatorics import optimal_cost, scheme_counts
from .engine import MessageStore, SystemConfig, run_retrieval
from .errors import BudgetError, DomainError, PIRError
from .scheme import (
    Mutation,
    PrefetchPlan,
    build_query_table,
    canonical_rows,
    reference_signature,
    signature_difference,
    structural_signature,
    uniform_prefetch,
    _as_mutation,
)

DEFAULT_ALPHA = 0.01
DEFAULT_SAMPLES = 10_000
DEFAULT_BUDGET = 10_000


@dataclass
class PrivacyReport:
    n: int
    mode: str  # "structural" or "statistical"
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"privacy/{self.mode} DB{self.n}: {verdict}"


def _completions(N: int, K: int, m: int, n: int, own: tuple[int, ...]) -> Iterator[PrefetchPlan]:
    """All uniform plans whose database ``n`` provided exactly ``own``."""
    others = [d for d in range(1, N + 1) if d != n]

    def rec(i: int, free: list[int], acc: dict):
        if i == len(others):
            yield PrefetchPlan(dict(acc))
            return
        for pick in itertools.combinations(free, m):
            acc[others[i]] = pick
            yield from rec(i + 1, [k for k in free if k not in pick], acc)
        acc.pop(others[i], None)

    free = [k for k in range(1, K + 1) if k not in own]
    yield from rec(0, free, {n: own})


def admissible(N: int, K: int, M: int, n: int, own: tuple[int, ...]):
    """Every ``(theta, plan)`` in which database ``n`` provided ``own``."""
    m = M // N
    for plan in _completions(N, K, m, n, own):
        for theta in range(1, K + 1):
            if theta not in plan.cached:
                yield theta, plan


def _grid_size(N: int, K: int, M: int, own_choices: int) -> int:
    m = M // N
    size = own_choices
    left = K - m
    for _ in range(N - 1):
        size *= math.comb(left, m)
        left -= m
    return size * (K - M)


def audit_privacy_structural(N: int, K: int, M: int, n: int, mutation=None,
                             own: Iterable[int] | None = None, seed: int = 0,
                             budget: int = DEFAULT_BUDGET) -> PrivacyReport:
    """Compare database ``n``'s signature over every admissible ``(theta, H)``.

    With ``own`` unset, every possible prefetch set of database ``n`` is
    tried in turn. Passes iff all signatures equal the reference signature
    (which in particular makes them identical to each other).
    """
    counts = scheme_counts(N, K, M)
    if not 1 <= n <= N:
        raise DomainError(f"database {n} outside [1, {N}]")
    m = counts.m
    owns = [tuple(sorted(own))] if own is not None else list(itertools.combinations(range(1, K + 1), m))
    size = _grid_size(N, K, M, len(owns))
    if size > budget:
        raise BudgetError(f"{size} settings exceed the budget of {budget}")

    ref = reference_signature(N, K, M)
    digests: dict[str, str] = {}
    problems: list[str] = []
    groups = {}
    for own_set in owns:
        seen = set()
        for theta, plan in admissible(N, K, M, n, own_set):
            table = build_query_table(N, K, M, theta, plan, seed, mutation)
            sig = structural_signature(table, n)
            tag = f"theta={theta} H={plan.to_dict()}"
            digests[tag] = sig.digest()
            seen.add(sig)
            if sig != ref:
                for diff in signature_difference(sig, ref, table.active(n)):
                    problems.append(f"{tag}: {diff}")
        groups[str(list(own_set))] = len(seen)
    passed = not problems and all(v == 1 for v in groups.values())
    return PrivacyReport(n, "structural", passed, {
        "settings": len(digests),
        "reference": ref.digest(),
        "distinct_signatures_per_own_set": groups,
        "digests": digests,
        "problems": problems,
    })


def two_sample_chi2(a: np.ndarray, b: np.ndarray, min_count: int = 10) -> tuple[float, int, float]:
    """Chi-square test that two samples of category labels share a distribution.

    Categories whose pooled count is below ``min_count`` are merged into a
    single bucket. Returns ``(statistic, dof, p_value)``.
    """
    labels, inverse = np.unique(np.concatenate([a, b]), return_inverse=True)
    ca = np.bincount(inverse[: len(a)], minlength=len(labels))
    cb = np.bincount(inverse[len(a):], minlength=len(labels))
    total = ca + cb
    rare = total < min_count
    if rare.any():
        ca = np.append(ca[~rare], ca[rare].sum())
        cb = np.append(cb[~rare], cb[rare].sum())
        keep = (ca + cb) > 0
        ca, cb = ca[keep], cb[keep]
    if len(ca) < 2:
        return 0.0, 0, 1.0
    res = stats.chi2_contingency(np.vstack([ca, cb]), correction=False)
    return float(res.statistic), int(res.dof), float(res.pvalue)


def _view_features(rows, L: int, count: int, rng: np.random.Generator,
                   shuffle: bool, subset_ids: dict) -> dict[str, np.ndarray]:
    """Sample ``count`` realized views of one database and project them.

    Each view draws a uniform permutation per message and a uniform row
    order, the same randomization :func:`build_query_table` applies.
    Projections: the message set at every row position; per message, the
    real index of its first appearance and the set of real indices used.
    """
    p = len(rows)
    ids = np.array([subset_ids.setdefault(row.spec.messages, len(subset_ids)) for row in rows])
    base = np.tile(np.arange(p), (count, 1))
    order = rng.permuted(base, axis=1) if shuffle else base
    feats = {f"position{i}": ids[order[:, i]] for i in range(p)}

    messages = sorted({k for row in rows for k in row.spec.messages})
    perm_base = np.tile(np.arange(L), (count, 1))
    idx = np.arange(count)
    for k in messages:
        perm = rng.permuted(perm_base, axis=1)
        virtual = np.array([row.spec.index(k) or 0 for row in rows])
        has = virtual > 0
        first = np.argmax(has[order], axis=1)
        first_row = order[idx, first]
        feats[f"first{k}"] = perm[idx, virtual[first_row] - 1]
        used = perm[:, virtual[has] - 1]
        if L <= 62:
            feats[f"set{k}"] = (np.int64(1) << np.sort(used, axis=1)).sum(axis=1)
        else:
            feats[f"set{k}"] = np.array([hash(tuple(r)) for r in np.sort(used, axis=1)])
    return feats


def audit_privacy_statistical(N: int, K: int, M: int, n: int,
                              samples: int = DEFAULT_SAMPLES, alpha: float = DEFAULT_ALPHA,
                              seed: int = 0, mutation=None,
                              own: Iterable[int] | None = None,
                              max_rows: int = 64) -> PrivacyReport:
    """Two-sample comparison of realized views for two admissible settings.

    Every projection is tested at level ``alpha / #projections``
    (Bonferroni); the audit fails if any projection rejects.
    """
    mutation = _as_mutation(mutation)
    counts = scheme_counts(N, K, M)
    if not 1 <= n <= N:
        raise DomainError(f"database {n} outside [1, {N}]")
    if samples < 1000:
        raise BudgetError("the statistical audit needs at least 1000 samples per setting")
    if counts.p > max_rows:
        raise BudgetError(f"p={counts.p} rows exceed the statistical audit limit of {max_rows}")
    own_set = tuple(sorted(own)) if own is not None else tuple(range(1, counts.m + 1))
    settings = list(admissible(N, K, M, n, own_set))
    first = settings[0]
    rest = [s for s in settings[1:] if s[0] != first[0]]
    better = [s for s in rest if s[1].cached != first[1].cached]
    if not rest:
        return PrivacyReport(n, "statistical", True, {
            "reason": "only one admissible desired message", "samples": samples,
        })
    second = (better or rest)[0]

    rng = np.random.default_rng(seed)
    shuffle = mutation is not Mutation.NO_SHUFFLE
    subset_ids: dict = {}
    views = []
    for theta, plan in (first, second):
        rows = canonical_rows(N, K, M, theta, plan, mutation)[n]
        views.append(_view_features(rows, counts.L, samples, rng, shuffle, subset_ids))

    names = sorted(set(views[0]) | set(views[1]))
    threshold = alpha / len(names)
    results = {}
    for name in names:
        if name not in views[0] or name not in views[1]:
            results[name] = {"statistic": math.inf, "dof": 0, "p_value": 0.0}
            continue
        stat, dof, pval = two_sample_chi2(views[0][name], views[1][name])
        results[name] = {"statistic": stat, "dof": dof, "p_value": pval}
    worst = min(results, key=lambda k: results[k]["p_value"])
    passed = results[worst]["p_value"] >= threshold
    return PrivacyReport(n, "statistical", passed, {
        "samples": samples,
        "alpha": alpha,
        "threshold": threshold,
        "settings": [{"theta": t, "plan": p.to_dict()} for t, p in (first, second)],
        "worst_feature": worst,
        "min_p_value": results[worst]["p_value"],
        "features": results,
    })


@dataclass
class GridCase:
    N: int
    K: int
    M: int
    trial: int
    theta: int
    plan: dict
    ratio: str | None
    expected: str
    decode_ok: bool
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and self.decode_ok and self.ratio == self.expected


@dataclass
class GridReport:
    cases: list[GridCase]

    @property
    def failures(self) -> list[GridCase]:
        return [c for c in self.cases if not c.passed]

    @property
    def passed(self) -> bool:
        return bool(self.cases) and not self.failures

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "cases": [asdict(c) | {"passed": c.passed} for c in self.cases],
            "failures": len(self.failures),
        }

    def summary(self) -> str:
        points = sorted({(c.N, c.K, c.M) for c in self.cases})
        lines = []
        for pt in points:
            mine = [c for c in self.cases if (c.N, c.K, c.M) == pt]
            bad = sum(not c.passed for c in mine)
            lines.append(f"capacity N={pt[0]} K={pt[1]} M={pt[2]}: D/L={mine[0].expected} "
                         f"runs={len(mine)} failures={bad} {'PASS' if not bad else 'FAIL'}")
        return "\n".join(lines)


def default_grid(Ns=(2, 3), Ks=range(2, 6), ms=(0, 1)) -> list[tuple[int, int, int]]:
    return [(N, K, N * m) for N in Ns for K in Ks for m in ms if N * m < K]


def _run_case(N: int, K: int, M: int, trial: int, theta: int, plan: PrefetchPlan,
              seed: int, mutation) -> GridCase:
    expected = str(optimal_cost(N, K, M))
    cfg = SystemConfig(N, K, M)
    try:
        width = cfg.field_width()
        store = MessageStore.random(K, cfg.counts.L, width, seed=[seed, N, K, M, trial, theta, 1])
        tr = run_retrieval(cfg, plan, theta, store, seed=[seed, N, K, M, trial, theta, 2],
                           mutation=mutation)
        return GridCase(N, K, M, trial, theta, plan.to_dict(), str(tr.ratio), expected,
                        bool(tr.decode_ok))
    except PIRError as exc:
        return GridCase(N, K, M, trial, theta, plan.to_dict(), None, expected, False,
                        f"{type(exc).__name__}: {exc}")


def audit_capacity_grid(points: Iterable[tuple[int, int, int]], trials: int = 5,
                        seed: int = 0, jobs: int = 1, mutation=None) -> GridReport:
    """Run retrievals over a grid and check decoding and the exact cost.

    Each trial draws a fresh uniform plan; every desired message not in
    that plan is retrieved with its own random store and table seed.
    Results are listed in grid order regardless of ``jobs``.
    """
    tasks = []
    for N, K, M in points:
        scheme_counts(N, K, M)
        for trial in range(trials):
            plan = uniform_prefetch(N, K, M, seed=[seed, N, K, M, trial])
            for theta in range(1, K + 1):
                if theta not in plan.cached:
                    tasks.append((N, K, M, trial, theta, plan, seed, mutation))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            cases = list(pool.map(lambda t: _run_case(*t), tasks))
    else:
        cases = [_run_case(*t) for t in tasks]
    return GridReport(cases)


def ratio_of(case: GridCase) -> Fraction | None:
    return Fraction(case.ratio) if case.ratio is not None else None
