"""Conversational recommendation engine with a long-term probabilistic user model."""

__version__ = "0.1.0"

from .catalog import (
    AttributeSchema,
    Catalog,
    CatalogError,
    Item,
    load_catalog,
    query_exact,
    relax_preview_counts,
    sample_values,
)
from .query_engine import (
    DiversityParams,
    ExpandedQuery,
    SimilarityParams,
    init_query,
    retrieve_and_rank,
    similarity,
)
from .user_model import UpdatePolicy, UserModel, init_user_model, load_model, save_model

__all__ = [
    "AttributeSchema",
    "Catalog",
    "CatalogError",
    "DiversityParams",
    "ExpandedQuery",
    "Item",
    "SimilarityParams",
    "UpdatePolicy",
    "UserModel",
    "init_query",
    "init_user_model",
    "load_catalog",
    "load_model",
    "query_exact",
    "relax_preview_counts",
    "retrieve_and_rank",
    "sample_values",
    "save_model",
    "similarity",
]
