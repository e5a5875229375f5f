"""Long-term probabilistic user model and its update rules.

A model holds one weight distribution over attributes, one value
distribution per attribute, and accept/present counters per item. Updates
are pure: every operation returns a new model, so replaying the same event
stream reproduces the same model bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .catalog import SUM_TOLERANCE, AttributeSchema

MODEL_FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class UpdatePolicy:
    learn_rate: float = 0.1
    init_accepted: int = 9
    init_presented: int = 10

    def __post_init__(self):
        if not 0 < self.learn_rate < 1:
            raise ModelError("learn_rate must be in (0, 1)")
        if not 0 < self.init_accepted <= self.init_presented:
            raise ModelError("need 0 < init_accepted <= init_presented")


@dataclass(frozen=True)
class ItemStats:
    accepted: int
    presented: int
    last_accepted_at: int | None = None

    @property
    def ratio(self) -> float:
        return self.accepted / self.presented


@dataclass(frozen=True)
class UserModel:
    user_id: str
    attribute_weights: dict[str, float]
    value_prefs: dict[str, dict[str, float]]
    item_stats: dict[str, ItemStats]
    value_last_used: dict[str, dict[str, int]] = field(default_factory=dict)

    def validate(self):
        _check_distribution(self.attribute_weights, "attribute weights")
        for attr, prefs in self.value_prefs.items():
            _check_distribution(prefs, f"value prefs for {attr!r}")
        for item_id, stats in self.item_stats.items():
            if not 0 < stats.accepted <= stats.presented:
                raise ModelError(
                    f"item {item_id!r}: counts {stats.accepted}/{stats.presented} invalid"
                )

    def item_ratio(self, item_id: str) -> float:
        return self.item_stats[item_id].ratio

    def last_value_use(self, attribute: str, value: str) -> int | None:
        return self.value_last_used.get(attribute, {}).get(value)


def _check_distribution(dist: dict[str, float], label: str):
    total = sum(dist.values())
    if not math.isclose(total, 1.0, abs_tol=SUM_TOLERANCE):
        raise ModelError(f"{label} sum to {total}, expected 1")
    for key, p in dist.items():
        if p <= 0:
            raise ModelError(f"{label}: probability for {key!r} is {p}, must be > 0")


def init_user_model(
    user_id: str,
    schema: AttributeSchema,
    policy: UpdatePolicy,
    item_ids: list[str],
) -> UserModel:
    """Fresh model: schema prior weights, uniform value prefs, default item counts."""
    weights = {a.name: a.prior_weight for a in schema.attributes}
    prefs = {
        a.name: {v: 1.0 / len(a.values) for v in a.values} for a in schema.attributes
    }
    stats = {
        item_id: ItemStats(policy.init_accepted, policy.init_presented)
        for item_id in item_ids
    }
    return UserModel(user_id, weights, prefs, stats)


def _reinforced(dist: dict[str, float], target: str, learn_rate: float) -> dict[str, float]:
    boosted = {k: (v * (1 + learn_rate) if k == target else v) for k, v in dist.items()}
    total = sum(boosted.values())
    return {k: v / total for k, v in boosted.items()}


def reinforce(model: UserModel, kind: str, target, learn_rate: float) -> UserModel:
    """Raise one entry by a fraction of its current weight, then renormalize.

    kind is "attribute" (target: attribute name) or "value" (target:
    (attribute, value) pair). All other entries scale down proportionally;
    nothing reaches zero.
    """
    if kind == "attribute":
        if target not in model.attribute_weights:
            raise ModelError(f"unknown attribute {target!r}")
        return replace(
            model,
            attribute_weights=_reinforced(model.attribute_weights, target, learn_rate),
        )
    if kind == "value":
        attr, value = target
        prefs = model.value_prefs.get(attr)
        if prefs is None or value not in prefs:
            raise ModelError(f"unknown value {value!r} for attribute {attr!r}")
        new_prefs = dict(model.value_prefs)
        new_prefs[attr] = _reinforced(prefs, value, learn_rate)
        return replace(model, value_prefs=new_prefs)
    raise ModelError(f"unknown reinforcement kind {kind!r}")


def record_presentation(
    model: UserModel, item_id: str, accepted: bool, now: int | None = None
) -> UserModel:
    """presented += 1; on accept also accepted += 1 and stamp the time."""
    stats = model.item_stats.get(item_id)
    if stats is None:
        raise ModelError(f"unknown item {item_id!r}")
    new = ItemStats(
        accepted=stats.accepted + (1 if accepted else 0),
        presented=stats.presented + 1,
        last_accepted_at=now if accepted else stats.last_accepted_at,
    )
    new_stats = dict(model.item_stats)
    new_stats[item_id] = new
    return replace(model, item_stats=new_stats)


def _reinforce_bindings(
    model: UserModel,
    constrained: list[tuple[str, tuple[str, ...]]],
    policy: UpdatePolicy,
    now: int | None,
) -> UserModel:
    for attr, values in constrained:
        model = reinforce(model, "attribute", attr, policy.learn_rate)
        for value in values:
            model = reinforce(model, "value", (attr, value), policy.learn_rate)
    if now is not None and constrained:
        used = {a: dict(v) for a, v in model.value_last_used.items()}
        for attr, values in constrained:
            for value in values:
                used.setdefault(attr, {})[value] = now
        model = replace(model, value_last_used=used)
    return model


def on_item_accepted(
    model: UserModel,
    constrained: list[tuple[str, tuple[str, ...]]],
    item_id: str,
    policy: UpdatePolicy,
    now: int | None = None,
) -> UserModel:
    """Accepted recommendation: bump item counts and reinforce what the user asked for.

    `constrained` must list only constraints the user explicitly provided in
    this conversation, as (attribute, provided values) pairs.
    """
    model = record_presentation(model, item_id, accepted=True, now=now)
    return _reinforce_bindings(model, constrained, policy, now)


def on_item_rejected(model: UserModel, item_id: str, now: int | None = None) -> UserModel:
    """Rejected recommendation: a dislike for the item only; no preference change."""
    return record_presentation(model, item_id, accepted=False, now=now)


def on_relax_accepted(
    model: UserModel,
    constrained: list[tuple[str, tuple[str, ...]]],
    policy: UpdatePolicy,
    now: int | None = None,
) -> UserModel:
    """Accepted relaxation: the constraint set so far was satisfactory, so
    reinforce it exactly as an accepted item would, minus any item counts."""
    return _reinforce_bindings(model, constrained, policy, now)


def save_model(model: UserModel) -> bytes:
    """Serialize to JSON bytes; load_model(save_model(m)) == m exactly."""
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "user_id": model.user_id,
        "attribute_weights": model.attribute_weights,
        "value_prefs": model.value_prefs,
        "item_stats": {
            item_id: {
                "accepted": s.accepted,
                "presented": s.presented,
                "last_accepted_at": s.last_accepted_at,
            }
            for item_id, s in model.item_stats.items()
        },
        "value_last_used": model.value_last_used,
    }
    return json.dumps(payload, indent=1).encode("utf-8")


def load_model(data: bytes, schema: AttributeSchema | None = None) -> UserModel:
    """Parse a serialized model; optionally validate attribute names against a schema."""
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ModelError(f"corrupt model payload: {exc}") from exc
    if not isinstance(payload, dict):
        raise ModelError("corrupt model payload: not an object")
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelError(f"unsupported model format version {version!r}")
    try:
        model = UserModel(
            user_id=payload["user_id"],
            attribute_weights={k: float(v) for k, v in payload["attribute_weights"].items()},
            value_prefs={
                a: {v: float(p) for v, p in prefs.items()}
                for a, prefs in payload["value_prefs"].items()
            },
            item_stats={
                item_id: ItemStats(s["accepted"], s["presented"], s.get("last_accepted_at"))
                for item_id, s in payload["item_stats"].items()
            },
            value_last_used={
                a: {v: int(t) for v, t in used.items()}
                for a, used in payload.get("value_last_used", {}).items()
            },
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ModelError(f"corrupt model payload: {exc}") from exc
    if schema is not None:
        for attr in model.attribute_weights:
            if attr not in schema:
                raise ModelError(f"model names unknown attribute {attr!r}")
        for attr, prefs in model.value_prefs.items():
            if attr not in schema:
                raise ModelError(f"model names unknown attribute {attr!r}")
            domain = set(schema.attribute(attr).values)
            for value in prefs:
                if value not in domain:
                    raise ModelError(
                        f"model names unknown value {value!r} for attribute {attr!r}"
                    )
    model.validate()
    return model
