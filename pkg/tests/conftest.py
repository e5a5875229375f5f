import json

import pytest

from advisor.catalog import Attribute, AttributeSchema, Catalog, Display, Item
from advisor.datagen import bundled_demo_catalog
from advisor.user_model import UpdatePolicy, UserModel


def make_schema(layout: dict[str, tuple[float, list[str]]]) -> AttributeSchema:
    """layout: name -> (prior_weight, values)."""
    return AttributeSchema(
        attributes=tuple(
            Attribute(name=name, values=tuple(values), prior_weight=weight)
            for name, (weight, values) in layout.items()
        )
    )


def make_catalog(schema: AttributeSchema, rows: list[tuple[str, dict[str, str]]]) -> Catalog:
    items = [
        Item(id=item_id, values=values, display=Display(item_id, "1 Main St", "555-0000"))
        for item_id, values in rows
    ]
    return Catalog(schema, items)


# Mirrors the worked example tables used throughout the tests: one user's
# attribute weights and per-value probabilities.
PREF_WEIGHTS = {"cuisine": 0.4, "location": 0.3, "price": 0.2, "parking": 0.1}
CUISINE_PREFS = {
    "Italian": 0.35, "French": 0.2, "Turkish": 0.25,
    "Chinese": 0.1, "German": 0.1, "English": 0.0,
}
PRICE_PREFS = {"one": 0.2, "two": 0.3, "three": 0.3, "four": 0.1, "five": 0.1}
PARKING_PREFS = {"Valet": 0.5, "Street": 0.4, "Lot": 0.1}


@pytest.fixture(scope="session")
def pref_schema() -> AttributeSchema:
    return make_schema(
        {
            "cuisine": (0.4, list(CUISINE_PREFS)),
            "location": (0.3, ["Palo Alto", "Menlo Park", "San Jose"]),
            "price": (0.2, list(PRICE_PREFS)),
            "parking": (0.1, list(PARKING_PREFS)),
        }
    )


@pytest.fixture(scope="session")
def demo_catalog() -> Catalog:
    return bundled_demo_catalog()


@pytest.fixture
def policy() -> UpdatePolicy:
    return UpdatePolicy()


def pref_model(schema: AttributeSchema, item_stats=None) -> UserModel:
    """A user model carrying the worked-example numbers (built directly; the
    zero entry for English would never arise from the update rules)."""
    from advisor.user_model import ItemStats

    stats = item_stats or {"0815": ItemStats(23, 25), "5372": ItemStats(10, 19)}
    prefs = {
        "cuisine": dict(CUISINE_PREFS),
        "location": {"Palo Alto": 0.5, "Menlo Park": 0.3, "San Jose": 0.2},
        "price": dict(PRICE_PREFS),
        "parking": dict(PARKING_PREFS),
    }
    return UserModel(
        user_id="homer",
        attribute_weights=dict(PREF_WEIGHTS),
        value_prefs=prefs,
        item_stats=stats,
    )


def schema_json(schema: AttributeSchema) -> str:
    return json.dumps(
        {
            "attributes": [
                {
                    "name": a.name,
                    "values": list(a.values),
                    "synonyms": dict(a.synonyms),
                    "prior_weight": a.prior_weight,
                }
                for a in schema.attributes
            ]
        }
    )
