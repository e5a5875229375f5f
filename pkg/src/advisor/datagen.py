"""Synthetic catalog data.

The restaurant schema bundled with the package is fixture data: the real
database behind the original deployment is not available, so value domains
for rating, reservations, and payment are invented here. The demo item file
is built so the scripted demo conversation exercises every dialogue branch
(see tests), and the generator scales the same schema to any item count.
"""

from __future__ import annotations

import csv
import io
import json
import random
from pathlib import Path

from .catalog import Attribute, AttributeSchema, Catalog, Display, Item, load_catalog

# Cuisine and location carry dozens of values; the other attributes few.
CUISINES = [
    "Chinese", "Indian", "Mediterranean", "Italian", "French", "Turkish",
    "German", "English", "Thai", "Mexican", "Japanese", "American",
    "Greek", "Korean", "Vietnamese", "Spanish", "Moroccan", "Ethiopian",
    "Lebanese", "Persian", "Brazilian", "Peruvian", "Cajun", "Caribbean",
    "Russian", "Polish", "Malaysian", "Indonesian", "Filipino", "Burmese",
    "Nepalese", "Afghan", "Argentine", "Cuban", "Hawaiian", "Portuguese",
]
LOCATIONS = [
    "Palo Alto", "Menlo Park", "Mountain View", "San Jose", "Redwood City",
    "Sunnyvale", "Berkeley", "Oakland", "San Francisco", "Santa Clara",
    "Cupertino", "San Mateo", "Los Altos", "Burlingame", "Fremont", "Campbell",
    "Saratoga", "Los Gatos", "Milpitas", "Foster City", "San Bruno",
    "Daly City", "Hayward", "Alameda", "Emeryville", "San Carlos",
    "Belmont", "Millbrae", "Union City", "Newark",
]

DEMO_SCHEMA = {
    "attributes": [
        {
            "name": "cuisine",
            "values": CUISINES,
            "synonyms": {"szechwan": "Chinese", "hunan": "Chinese", "pasta": "Italian"},
            "prior_weight": 0.30,
        },
        {
            "name": "parking",
            "values": ["Valet", "Street", "Lot"],
            "synonyms": {"valet parking": "Valet", "parking lot": "Lot"},
            "prior_weight": 0.15,
        },
        {
            "name": "reservations",
            "values": ["required", "optional", "unavailable"],
            "synonyms": {"walk in": "unavailable", "walk ins": "unavailable"},
            "prior_weight": 0.13,
        },
        {
            "name": "location",
            "values": LOCATIONS,
            "synonyms": {"the city": "San Francisco"},
            "prior_weight": 0.12,
        },
        {
            "name": "payment",
            "values": ["cash-only", "credit-card", "debit-card"],
            "synonyms": {
                "cash": "cash-only",
                "credit": "credit-card",
                "visa": "credit-card",
                "mastercard": "credit-card",
                "debit": "debit-card",
            },
            "prior_weight": 0.12,
        },
        {
            "name": "rating",
            "values": ["two-star", "three-star", "four-star", "five-star"],
            "synonyms": {"top rated": "five-star", "highly rated": "four-star"},
            "prior_weight": 0.10,
        },
        {
            "name": "price",
            "values": ["one", "two", "three", "four", "five"],
            "synonyms": {
                "cheap": "one",
                "inexpensive": "one",
                "affordable": "two",
                "moderate": "three",
                "expensive": "four",
                "pricey": "four",
                "fancy": "five",
            },
            "prior_weight": 0.08,
        },
    ]
}

_NOUNS = ["Kitchen", "House", "Garden", "Table", "Bistro", "Cafe", "Grill", "Corner"]
_STREETS = [
    "Ramona", "Emerson Street", "Castro Street", "University Avenue",
    "Main Street", "El Camino Real", "Oak Avenue", "Park Boulevard",
]


def demo_schema() -> AttributeSchema:
    return AttributeSchema(
        attributes=tuple(
            Attribute(
                name=a["name"],
                values=tuple(a["values"]),
                synonyms=dict(a["synonyms"]),
                prior_weight=a["prior_weight"],
            )
            for a in DEMO_SCHEMA["attributes"]
        )
    )


def _address(rng: random.Random) -> str:
    return f"{rng.randint(100, 999)} {rng.choice(_STREETS)}"


def _phone(rng: random.Random) -> str:
    return f"(650) 555-{rng.randint(0, 9999):04d}"


def demo_items() -> list[dict]:
    """The bundled demo item table (64 rows), deterministic.

    Reserved combinations: exactly two items are Chinese / price one /
    Palo Alto, at least four are Indian / price one, and none are Indian /
    price one / Palo Alto.
    """
    rng = random.Random(20240923)
    rows = [
        {
            "id": "r001", "name": "Mandarin Gourmet", "address": "420 Ramona",
            "phone": "(650) 555-0400", "cuisine": "Chinese", "parking": "Street",
            "reservations": "optional", "location": "Palo Alto",
            "payment": "credit-card", "rating": "four-star", "price": "one",
        },
        {
            "id": "r002", "name": "Jing-Jing Szechwan Hunan Gourmet",
            "address": "443 Emerson Street", "phone": "(650) 555-0443",
            "cuisine": "Chinese", "parking": "Lot", "reservations": "optional",
            "location": "Palo Alto", "payment": "cash-only",
            "rating": "three-star", "price": "one",
        },
    ]
    indian_spots = ["Menlo Park", "Mountain View", "San Jose", "Berkeley"]
    for i, town in enumerate(indian_spots, start=3):
        rows.append({
            "id": f"r{i:03d}", "name": f"Indian {_NOUNS[i % len(_NOUNS)]} #{i}",
            "address": _address(rng), "phone": _phone(rng),
            "cuisine": "Indian", "parking": rng.choice(["Valet", "Street", "Lot"]),
            "reservations": rng.choice(["required", "optional", "unavailable"]),
            "location": town, "payment": rng.choice(["cash-only", "credit-card", "debit-card"]),
            "rating": rng.choice(["two-star", "three-star", "four-star", "five-star"]),
            "price": "one",
        })
    # A couple of pricier Indian places in Palo Alto so relaxing price has matches.
    for i, price in [(7, "two"), (8, "three")]:
        rows.append({
            "id": f"r{i:03d}", "name": f"Indian {_NOUNS[i % len(_NOUNS)]} #{i}",
            "address": _address(rng), "phone": _phone(rng),
            "cuisine": "Indian", "parking": rng.choice(["Valet", "Street", "Lot"]),
            "reservations": rng.choice(["required", "optional", "unavailable"]),
            "location": "Palo Alto",
            "payment": rng.choice(["cash-only", "credit-card", "debit-card"]),
            "rating": rng.choice(["two-star", "three-star", "four-star", "five-star"]),
            "price": price,
        })
    i = len(rows) + 1
    while len(rows) < 64:
        cuisine = rng.choice(CUISINES)
        price = rng.choice(["one", "two", "three", "four", "five"])
        location = rng.choice(LOCATIONS)
        if price == "one" and location == "Palo Alto" and cuisine in ("Chinese", "Indian"):
            continue
        rows.append({
            "id": f"r{i:03d}", "name": f"{cuisine} {_NOUNS[i % len(_NOUNS)]} #{i}",
            "address": _address(rng), "phone": _phone(rng),
            "cuisine": cuisine, "parking": rng.choice(["Valet", "Street", "Lot"]),
            "reservations": rng.choice(["required", "optional", "unavailable"]),
            "location": location,
            "payment": rng.choice(["cash-only", "credit-card", "debit-card"]),
            "rating": rng.choice(["two-star", "three-star", "four-star", "five-star"]),
            "price": price,
        })
        i += 1
    return rows


def rows_to_csv(rows: list[dict], schema: AttributeSchema) -> str:
    out = io.StringIO()
    header = ["id", "name", "address", "phone"] + schema.names
    writer = csv.writer(out)
    writer.writerow(header)
    for row in rows:
        writer.writerow([row[col] for col in header])
    return out.getvalue()


def write_demo_data(data_dir: str | Path) -> tuple[Path, Path]:
    """Write the bundled schema and demo items under data_dir/catalog/."""
    base = Path(data_dir) / "catalog"
    base.mkdir(parents=True, exist_ok=True)
    schema_path = base / "schema.json"
    items_path = base / "items.csv"
    schema_path.write_text(json.dumps(DEMO_SCHEMA, indent=2))
    items_path.write_text(rows_to_csv(demo_items(), demo_schema()))
    return schema_path, items_path


def bundled_demo_catalog() -> Catalog:
    schema_text = resources_text("schema.json")
    items_text = resources_text("items.csv")
    return load_catalog(schema_text, items_text)


def resources_text(name: str) -> str:
    from importlib import resources

    return resources.files("advisor.data").joinpath(name).read_text()


def _skewed_weights(rng: random.Random, n: int, s: float = 0.5) -> list[float]:
    ranks = list(range(1, n + 1))
    rng.shuffle(ranks)
    weights = [1.0 / r**s for r in ranks]
    total = sum(weights)
    return [w / total for w in weights]


def generate_catalog(
    schema: AttributeSchema | None = None,
    n_items: int = 1900,
    seed: int = 7,
) -> Catalog:
    """A synthetic catalog over the given schema with skewed value popularity."""
    schema = schema or demo_schema()
    rng = random.Random(seed)
    popularity = {
        a.name: _skewed_weights(rng, len(a.values)) for a in schema.attributes
    }
    items = []
    width = max(4, len(str(n_items)))
    for i in range(n_items):
        values = {
            a.name: rng.choices(a.values, weights=popularity[a.name])[0]
            for a in schema.attributes
        }
        noun = _NOUNS[rng.randrange(len(_NOUNS))]
        label = values.get("cuisine", "Local")
        items.append(
            Item(
                id=f"g{i:0{width}d}",
                values=values,
                display=Display(f"{label} {noun} #{i}", _address(rng), _phone(rng)),
            )
        )
    return Catalog(schema, items)


def random_schema(seed: int, n_attrs: int = 7) -> AttributeSchema:
    """A nonsense schema for fuzzing: random domain sizes and priors."""
    rng = random.Random(seed)
    attrs = []
    raw = [rng.random() + 0.05 for _ in range(n_attrs)]
    total = sum(raw)
    priors = [w / total for w in raw]
    priors[-1] = 1.0 - sum(priors[:-1])
    for i in range(n_attrs):
        size = rng.randint(2, 8)
        values = tuple(f"a{i}v{j}" for j in range(size))
        attrs.append(Attribute(name=f"attr{i}", values=values, prior_weight=priors[i]))
    return AttributeSchema(attributes=tuple(attrs))


def random_catalog(seed: int, max_items: int = 1000, n_attrs: int = 7) -> Catalog:
    rng = random.Random(seed ^ 0x5EED)
    schema = random_schema(seed, n_attrs)
    return generate_catalog(schema, n_items=rng.randint(1, max_items), seed=seed)
