"""Private information retrieval with partially known private side information.

The user caches ``M/N`` full messages from each of ``N`` replicated
databases, then privately retrieves one further message. This package
builds the query tables of the uniform-prefetching scheme, simulates the
databases and the decoder over GF(2^w), and audits privacy and the exact
download cost ``1 + 1/N + ... + 1/N**(K-M-1)``.
"""

from .combinatorics import (
    Rational,
    SchemeCounts,
    capacity,
    classical_cost,
    min_field_width,
    optimal_cost,
    scheme_counts,
)
from .engine import (
    AnswerBlock,
    MessageStore,
    RetrievalTranscript,
    SystemConfig,
    database_answer,
    run_retrieval,
    user_decode,
)
from .errors import *  # noqa: F401,F403
from .gf import FieldElement, SystematicCode, field
from .scheme import (
    Mutation,
    PrefetchPlan,
    QuerySpec,
    QueryTable,
    build_query_table,
    structural_signature,
    uniform_prefetch,
)

__all__ = [
    "Rational", "SchemeCounts", "capacity", "classical_cost", "min_field_width",
    "optimal_cost", "scheme_counts",
    "AnswerBlock", "MessageStore", "RetrievalTranscript", "SystemConfig",
    "database_answer", "run_retrieval", "user_decode",
    "FieldElement", "SystematicCode", "field",
    "Mutation", "PrefetchPlan", "QuerySpec", "QueryTable", "build_query_table",
    "structural_signature", "uniform_prefetch",
]
