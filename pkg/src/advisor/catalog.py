"""Item database: attribute schema, items, and exact-constraint queries.

The schema declares a fixed set of attributes, each with a finite value
domain, optional surface synonyms ("cheap" -> price "one"), and a prior
weight reflecting how important the attribute usually is to people.
Items assign exactly one value per attribute plus display fields.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Union

import numpy as np

SUM_TOLERANCE = 1e-9

# A constraint set maps attribute name -> set of allowed values (disjunction).
ConstraintSet = dict[str, frozenset[str]]


class CatalogError(ValueError):
    """Raised for malformed schema or item data; message carries the location."""


@dataclass(frozen=True)
class Attribute:
    name: str
    values: tuple[str, ...]
    synonyms: dict[str, str] = field(default_factory=dict, hash=False)
    prior_weight: float = 0.0

    def __post_init__(self):
        if len(set(self.values)) != len(self.values):
            raise CatalogError(f"attribute {self.name!r}: duplicate values")
        for token, value in self.synonyms.items():
            if value not in self.values:
                raise CatalogError(
                    f"attribute {self.name!r}: synonym {token!r} maps to "
                    f"unknown value {value!r}"
                )


@dataclass(frozen=True)
class AttributeSchema:
    attributes: tuple[Attribute, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise CatalogError("duplicate attribute names in schema")
        total = sum(a.prior_weight for a in self.attributes)
        if not math.isclose(total, 1.0, abs_tol=SUM_TOLERANCE):
            raise CatalogError(f"prior weights sum to {total}, expected 1")

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise CatalogError(f"unknown attribute {name!r}")

    def __contains__(self, name: str) -> bool:
        return any(a.name == name for a in self.attributes)


@dataclass(frozen=True)
class Display:
    name: str
    address: str
    phone: str


@dataclass(frozen=True)
class Item:
    id: str
    values: dict[str, str]
    display: Display

    def __hash__(self):
        return hash(self.id)


class Catalog:
    """Immutable collection of items validated against a schema."""

    def __init__(self, schema: AttributeSchema, items: Iterable[Item]):
        self.schema = schema
        self.items: tuple[Item, ...] = tuple(items)
        self.by_id: dict[str, Item] = {}
        for item in self.items:
            if item.id in self.by_id:
                raise CatalogError(f"duplicate item id {item.id!r}")
            self._validate_item(item)
            self.by_id[item.id] = item
        self._index = None

    def _validate_item(self, item: Item):
        for attr in self.schema.attributes:
            if attr.name not in item.values:
                raise CatalogError(f"item {item.id!r}: missing attribute {attr.name!r}")
            value = item.values[attr.name]
            if value not in attr.values:
                raise CatalogError(
                    f"item {item.id!r}: value {value!r} not in domain of "
                    f"attribute {attr.name!r}"
                )
        extra = set(item.values) - set(self.schema.names)
        if extra:
            raise CatalogError(f"item {item.id!r}: unknown attribute {sorted(extra)[0]!r}")

    def __len__(self):
        return len(self.items)

    @property
    def index(self) -> "CatalogIndex":
        """Lazy integer-coded view of the item table, for vectorized scoring."""
        if self._index is None:
            self._index = CatalogIndex(self)
        return self._index


class CatalogIndex:
    """Integer-coded item/value matrix over a catalog (items x attributes)."""

    def __init__(self, catalog: Catalog):
        self.catalog = catalog
        schema = catalog.schema
        self.value_codes: dict[str, dict[str, int]] = {
            a.name: {v: i for i, v in enumerate(a.values)} for a in schema.attributes
        }
        n = len(catalog.items)
        self.matrix = np.zeros((n, len(schema.attributes)), dtype=np.int32)
        for row, item in enumerate(catalog.items):
            for col, attr in enumerate(schema.attributes):
                self.matrix[row, col] = self.value_codes[attr.name][item.values[attr.name]]
        self.ids = [item.id for item in catalog.items]

    def match_mask(self, constraints: ConstraintSet) -> np.ndarray:
        mask = np.ones(len(self.ids), dtype=bool)
        for col, attr in enumerate(self.catalog.schema.attributes):
            allowed = constraints.get(attr.name)
            if allowed is None:
                continue
            codes = [self.value_codes[attr.name][v] for v in allowed]
            mask &= np.isin(self.matrix[:, col], codes)
        return mask


def _parse_schema(source: Union[str, bytes, IO]) -> AttributeSchema:
    if hasattr(source, "read"):
        raw = source.read()
    else:
        raw = source
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"schema is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "attributes" not in data:
        raise CatalogError("schema must be an object with an 'attributes' list")
    attrs = []
    for i, entry in enumerate(data["attributes"]):
        try:
            attrs.append(
                Attribute(
                    name=entry["name"],
                    values=tuple(entry["values"]),
                    synonyms=dict(entry.get("synonyms", {})),
                    prior_weight=float(entry["prior_weight"]),
                )
            )
        except KeyError as exc:
            raise CatalogError(f"schema attribute #{i}: missing field {exc}") from exc
    return AttributeSchema(attributes=tuple(attrs))


def _parse_items(source: Union[str, bytes, IO], schema: AttributeSchema) -> list[Item]:
    if hasattr(source, "read"):
        raw = source.read()
    else:
        raw = source
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    if not raw.strip():
        return []
    reader = csv.reader(io.StringIO(raw))
    header = next(reader)
    expected = ["id", "name", "address", "phone"] + schema.names
    if header != expected:
        raise CatalogError(f"items header {header!r} does not match schema {expected!r}")
    items = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise CatalogError(f"items row {lineno}: expected {len(expected)} cells, got {len(row)}")
        item_id, name, address, phone = row[:4]
        values = {}
        for attr, cell in zip(schema.attributes, row[4:]):
            if cell not in attr.values:
                raise CatalogError(
                    f"items row {lineno}: value {cell!r} not in domain of "
                    f"attribute {attr.name!r}"
                )
            values[attr.name] = cell
        items.append(Item(id=item_id, values=values, display=Display(name, address, phone)))
    return items


def load_catalog(schema_source, items_source) -> Catalog:
    """Load and validate a catalog from a schema (JSON) and items (CSV) source.

    Sources may be strings, bytes, or open file objects. Errors name the
    offending row and attribute.
    """
    schema = _parse_schema(schema_source)
    items = _parse_items(items_source, schema)
    return Catalog(schema, items)


def validate_constraints(schema: AttributeSchema, constraints: ConstraintSet):
    for attr, allowed in constraints.items():
        if attr not in schema:
            raise CatalogError(f"constraint on unknown attribute {attr!r}")
        if not allowed:
            raise CatalogError(f"constraint on {attr!r} has no allowed values")
        domain = set(schema.attribute(attr).values)
        bad = set(allowed) - domain
        if bad:
            raise CatalogError(
                f"constraint on {attr!r}: value {sorted(bad)[0]!r} not in domain"
            )


def query_exact(catalog: Catalog, constraints: ConstraintSet) -> list[Item]:
    """Items whose value for every constrained attribute is in the allowed set.

    Any allowed value satisfies the attribute; unconstrained attributes never
    filter. Preserves catalog order.
    """
    validate_constraints(catalog.schema, constraints)
    if not constraints:
        return list(catalog.items)
    mask = catalog.index.match_mask(constraints)
    return [item for item, ok in zip(catalog.items, mask) if ok]


def relax_preview_counts(catalog: Catalog, constraints: ConstraintSet) -> dict[str, int]:
    """For each constrained attribute, the match count if it alone were dropped."""
    if not constraints:
        raise CatalogError("relax preview requires at least one constrained attribute")
    counts = {}
    for attr in constraints:
        remaining = {a: v for a, v in constraints.items() if a != attr}
        counts[attr] = len(query_exact(catalog, remaining))
    return counts


def sample_values(
    catalog_or_schema,
    attribute: str,
    k: int,
    value_prefs: dict[str, float] | None = None,
) -> list[str]:
    """Up to k distinct example values for an attribute.

    With value_prefs, the k most probable (ties broken lexicographically);
    otherwise the first k in domain order.
    """
    schema = getattr(catalog_or_schema, "schema", catalog_or_schema)
    if attribute not in schema:
        raise CatalogError(f"unknown attribute {attribute!r}")
    if k < 1:
        raise CatalogError("k must be >= 1")
    domain = schema.attribute(attribute).values
    if value_prefs is None:
        return list(domain[:k])
    ranked = sorted(domain, key=lambda v: (-value_prefs.get(v, 0.0), v))
    return ranked[:k]
