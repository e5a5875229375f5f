"""Expanded query: the probabilistic item description driving retrieval.

The query blends explicit user constraints (indicator entries) with the
user model's priors for everything not yet discussed. Retrieval filters
items by the explicit constraints, scores the rest against the query, and
keeps what clears the similarity threshold. The same weights rank
attributes for asking (descending) and for relaxing (ascending).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catalog import SUM_TOLERANCE, Catalog, ConstraintSet, Item, relax_preview_counts
from .moves import SystemAct, UserAct
from .user_model import ItemStats, UserModel

MODE_DISTRIBUTION = "distribution"
MODE_CONSTRAINED = "constrained"
MODE_DROPPED = "dropped"

PROVENANCE_MODEL = "model-prior"
PROVENANCE_USER = "user-constraint"
PROVENANCE_RELAX = "relax-reset"


class QueryEffectError(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityParams:
    similarity_threshold: float = 0.05
    presentation_threshold: int = 3

    def __post_init__(self):
        if not 0 <= self.similarity_threshold < 1:
            raise ValueError("similarity_threshold must be in [0, 1)")
        if self.presentation_threshold < 1:
            raise ValueError("presentation_threshold must be >= 1")


@dataclass(frozen=True)
class DiversityParams:
    enabled: bool = False
    k_item: float = 1.0
    k_value: float = 1.0
    t_item_gap: int = 0
    t_value_gap: int = 0

    def __post_init__(self):
        if self.k_item <= 0 or self.k_value <= 0:
            raise ValueError("sigmoid slopes must be > 0")
        if self.t_item_gap < 0 or self.t_value_gap < 0:
            raise ValueError("diversity gaps must be >= 0")


@dataclass(frozen=True)
class AttributeEntry:
    mode: str
    values: dict[str, float]
    provenance: str

    def validate(self, weight: float):
        if self.mode == MODE_DISTRIBUTION:
            total = sum(self.values.values())
            if not math.isclose(total, 1.0, abs_tol=SUM_TOLERANCE):
                raise QueryEffectError(f"distribution sums to {total}")
        elif self.mode == MODE_CONSTRAINED:
            if not any(v == 1.0 for v in self.values.values()):
                raise QueryEffectError("constrained entry has no value set to 1")
            if any(v not in (0.0, 1.0) for v in self.values.values()):
                raise QueryEffectError("constrained entry has non-indicator value")
        elif self.mode == MODE_DROPPED:
            if weight != 0.0:
                raise QueryEffectError("dropped attribute must have zero weight")
        else:
            raise QueryEffectError(f"unknown entry mode {self.mode!r}")


@dataclass(frozen=True)
class ExpandedQuery:
    attribute_weights: dict[str, float]
    entries: dict[str, AttributeEntry]

    def validate(self):
        for attr, entry in self.entries.items():
            entry.validate(self.attribute_weights[attr])

    def constraints(self) -> ConstraintSet:
        """The explicitly constrained part, as attribute -> allowed value set."""
        out: ConstraintSet = {}
        for attr, entry in self.entries.items():
            if entry.mode == MODE_CONSTRAINED:
                out[attr] = frozenset(v for v, p in entry.values.items() if p == 1.0)
        return out

    def constrained_attributes(self) -> set[str]:
        return {a for a, e in self.entries.items() if e.mode == MODE_CONSTRAINED}

    def dropped_attributes(self) -> set[str]:
        return {a for a, e in self.entries.items() if e.mode == MODE_DROPPED}

    def value_probability(self, attribute: str, value: str) -> float:
        return self.entries[attribute].values.get(value, 0.0)


def init_query(model: UserModel) -> ExpandedQuery:
    """Start a conversation's query from the user model's priors."""
    entries = {
        attr: AttributeEntry(MODE_DISTRIBUTION, dict(prefs), PROVENANCE_MODEL)
        for attr, prefs in model.value_prefs.items()
    }
    return ExpandedQuery(dict(model.attribute_weights), entries)


def _with_entry(query: ExpandedQuery, attr: str, entry: AttributeEntry,
                weight: float | None = None) -> ExpandedQuery:
    entries = dict(query.entries)
    entries[attr] = entry
    weights = dict(query.attribute_weights)
    if weight is not None:
        weights[attr] = weight
    return ExpandedQuery(weights, entries)


def _constrain(query: ExpandedQuery, attr: str, values: tuple[str, ...],
               model: UserModel) -> ExpandedQuery:
    entry = query.entries.get(attr)
    if entry is None:
        raise QueryEffectError(f"unknown attribute {attr!r}")
    unknown = [v for v in values if v not in entry.values]
    if unknown:
        raise QueryEffectError(f"value {unknown[0]!r} not in domain of {attr!r}")
    if not values:
        raise QueryEffectError(f"no values provided for {attr!r}")
    indicator = {v: (1.0 if v in values else 0.0) for v in entry.values}
    weight = None
    if entry.mode == MODE_DROPPED:
        # A previously rejected attribute regains its model weight once the
        # user volunteers a value for it.
        weight = model.attribute_weights[attr]
    return _with_entry(
        query, attr, AttributeEntry(MODE_CONSTRAINED, indicator, PROVENANCE_USER), weight
    )


def _drop(query: ExpandedQuery, attr: str) -> ExpandedQuery:
    entry = query.entries.get(attr)
    if entry is None:
        raise QueryEffectError(f"unknown attribute {attr!r}")
    return _with_entry(
        query, attr, AttributeEntry(MODE_DROPPED, dict(entry.values), entry.provenance), 0.0
    )


def _reset_from_model(query: ExpandedQuery, attr: str, model: UserModel) -> ExpandedQuery:
    if attr not in query.entries:
        raise QueryEffectError(f"unknown attribute {attr!r}")
    entry = AttributeEntry(MODE_DISTRIBUTION, dict(model.value_prefs[attr]), PROVENANCE_RELAX)
    return _with_entry(query, attr, entry, model.attribute_weights[attr])


def apply_effect(
    query: ExpandedQuery,
    system_move: SystemAct,
    user_move: UserAct,
    payload,
    model: UserModel,
) -> ExpandedQuery:
    """Apply one (system move, user move) pair's effect on the query.

    PROVIDE_CONSTRAIN payload: dict attribute -> tuple of provided values.
    REJECT under ATTEMPT_CONSTRAIN and PROVIDE_RELAX / ACCEPT under
    SUGGEST_RELAX payload: the attribute name. Moves with no query effect
    (item accept/reject, relax reject) return the query unchanged.
    """
    if user_move is UserAct.START_OVER:
        return init_query(model)
    if user_move is UserAct.PROVIDE_CONSTRAIN:
        if not isinstance(payload, dict) or not payload:
            raise QueryEffectError("provide-constrain needs an attribute->values payload")
        for attr, values in sorted(payload.items()):
            query = _constrain(query, attr, tuple(values), model)
        return query
    if user_move is UserAct.PROVIDE_RELAX:
        if not isinstance(payload, str):
            raise QueryEffectError("provide-relax needs an attribute payload")
        return _reset_from_model(query, payload, model)
    if user_move is UserAct.REJECT:
        if system_move is SystemAct.ATTEMPT_CONSTRAIN:
            if not isinstance(payload, str):
                raise QueryEffectError("attribute rejection needs an attribute payload")
            return _drop(query, payload)
        if system_move in (SystemAct.SUGGEST_RELAX, SystemAct.RECOMMEND_ITEM):
            return query
        raise QueryEffectError(f"no effect defined for {system_move} + reject")
    if user_move is UserAct.ACCEPT:
        if system_move is SystemAct.SUGGEST_RELAX:
            if not isinstance(payload, str):
                raise QueryEffectError("relax acceptance needs an attribute payload")
            return _reset_from_model(query, payload, model)
        if system_move is SystemAct.RECOMMEND_ITEM:
            return query
        raise QueryEffectError(f"no effect defined for {system_move} + accept")
    raise QueryEffectError(f"no effect defined for {system_move} + {user_move}")


def similarity(query: ExpandedQuery, item: Item, item_ratio: float) -> float:
    """item_ratio times the weighted sum of the query's per-value probabilities."""
    total = 0.0
    for attr, entry in query.entries.items():
        weight = query.attribute_weights[attr]
        if weight == 0.0:
            continue
        total += weight * entry.values.get(item.values[attr], 0.0)
    return item_ratio * total


def retrieve_and_rank(
    query: ExpandedQuery,
    catalog: Catalog,
    item_stats: dict[str, ItemStats],
    params: SimilarityParams,
    model: UserModel | None = None,
    dparams: DiversityParams | None = None,
    now: int | None = None,
) -> list[tuple[Item, float]]:
    """Exact-match on the constrained part, score the rest, keep what clears
    the threshold, sorted by score descending (ties by item id).

    With an enabled DiversityParams (and the model carrying usage timestamps),
    recently chosen items and values are damped before the threshold applies.
    """
    if dparams is not None and dparams.enabled:
        if model is None or now is None:
            raise ValueError("diversity mode needs the user model and the current time")
        mask = catalog.index.match_mask(query.constraints())
        kept = []
        for ok, item in zip(mask, catalog.items):
            if not ok:
                continue
            score = diversity_adjusted_similarity(query, item, model, dparams, now)
            if score > params.similarity_threshold:
                kept.append((item, score))
        kept.sort(key=lambda pair: (-pair[1], pair[0].id))
        return kept
    index = catalog.index
    n = len(catalog.items)
    if n == 0:
        return []
    mask = index.match_mask(query.constraints())
    scores = np.zeros(n, dtype=np.float64)
    for col, attr in enumerate(catalog.schema.attributes):
        weight = query.attribute_weights[attr.name]
        if weight == 0.0:
            continue
        entry = query.entries[attr.name]
        vec = np.array([entry.values.get(v, 0.0) for v in attr.values], dtype=np.float64)
        scores += weight * vec[index.matrix[:, col]]
    ratios = np.fromiter(
        (item_stats[item.id].ratio for item in catalog.items), dtype=np.float64, count=n
    )
    scores *= ratios
    keep = mask & (scores > params.similarity_threshold)
    ranked = [(catalog.items[i], float(scores[i])) for i in np.flatnonzero(keep)]
    ranked.sort(key=lambda pair: (-pair[1], pair[0].id))
    return ranked


def _entropy(items: list[Item], attribute: str) -> float:
    counts: dict[str, int] = {}
    for item in items:
        v = item.values[attribute]
        counts[v] = counts.get(v, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts.values():
        p = c / total
        h -= p * math.log2(p)
    return h


def rank_constrain_candidates(
    query: ExpandedQuery,
    state,
    strategy: str = "by-weight",
    catalog: Catalog | None = None,
) -> list[str]:
    """Attributes worth asking about next, best first.

    Candidates are attributes neither constrained nor rejected (the state may
    exclude more, e.g. ones released by an accepted relaxation). by-weight
    orders by descending query weight; by-entropy by descending value entropy
    over the current candidate items.
    """
    excluded = set(state.constrained) | set(state.rejected)
    excluded |= set(getattr(state, "released", ()))
    excluded |= set(getattr(state, "asked", ()))
    candidates = [a for a in query.entries if a not in excluded]
    if strategy == "by-weight":
        return sorted(candidates, key=lambda a: (-query.attribute_weights[a], a))
    if strategy == "by-entropy":
        if catalog is None:
            raise ValueError("by-entropy ranking needs the catalog")
        rejected_items = set(getattr(state, "rejected_items", ()))
        items = [
            catalog.by_id[i] for i in getattr(state, "ranked_items", [])
            if i not in rejected_items
        ]
        return sorted(candidates, key=lambda a: (-_entropy(items, a), a))
    raise ValueError(f"unknown constrain strategy {strategy!r}")


def rank_relax_candidates(
    query: ExpandedQuery,
    state,
    strategy: str = "by-weight",
    catalog: Catalog | None = None,
) -> list[str]:
    """Constrained, non-fixed attributes the user is most likely to give up,
    best first: ascending weight, or ascending relaxed-match count (dropping
    attributes whose relaxation would still match nothing)."""
    excluded = set(state.fixed) | set(getattr(state, "relax_offered", ()))
    candidates = [a for a in sorted(state.constrained) if a not in excluded]
    if strategy == "by-weight":
        return sorted(candidates, key=lambda a: (query.attribute_weights[a], a))
    if strategy == "by-size":
        if catalog is None:
            raise ValueError("by-size ranking needs the catalog")
        constraints = query.constraints()
        previews = relax_preview_counts(catalog, constraints) if constraints else {}
        sized = [a for a in candidates if previews.get(a, 0) > 0]
        return sorted(sized, key=lambda a: (previews[a], a))
    raise ValueError(f"unknown relax strategy {strategy!r}")


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def diversity_adjusted_similarity(
    query: ExpandedQuery,
    item: Item,
    model: UserModel,
    dparams: DiversityParams,
    now: int,
) -> float:
    """Similarity with recently-used items and values damped by logistic factors.

    An item accepted t seconds ago is damped by sigmoid(k_item * (t - gap));
    likewise per value. Items and values never used carry no damping.
    """
    stats = model.item_stats[item.id]
    ratio = stats.ratio
    if stats.last_accepted_at is not None:
        ratio *= logistic(dparams.k_item * (now - stats.last_accepted_at - dparams.t_item_gap))
    total = 0.0
    for attr, entry in query.entries.items():
        weight = query.attribute_weights[attr]
        if weight == 0.0:
            continue
        value = item.values[attr]
        p = entry.values.get(value, 0.0)
        last = model.last_value_use(attr, value)
        if last is not None:
            p *= logistic(dparams.k_value * (now - last - dparams.t_value_gap))
        total += weight * p
    return ratio * total
