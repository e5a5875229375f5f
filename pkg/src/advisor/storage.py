"""On-disk persistence for user models: one JSON file per user, written atomically."""

from __future__ import annotations

import os
import re
import threading
from pathlib import Path

from .catalog import AttributeSchema
from .user_model import ModelError, UpdatePolicy, UserModel, init_user_model, load_model, save_model

_USER_ID_RE = re.compile(r"^[A-Za-z0-9._-]{1,64}$")


def atomic_write(path: Path, data: bytes):
    """Write via a temp file in the same directory, then rename into place.

    A crash mid-write leaves either the old file or the new one, never a
    torn mix.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class ModelStore:
    """Loads, initializes, and saves user models under <data_dir>/users/."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def path_for(self, user_id: str) -> Path:
        if not _USER_ID_RE.match(user_id):
            raise ModelError(f"invalid user id {user_id!r}")
        return self.data_dir / "users" / f"{user_id}.json"

    def lock_for(self, user_id: str) -> threading.Lock:
        with self._locks_guard:
            if user_id not in self._locks:
                self._locks[user_id] = threading.Lock()
            return self._locks[user_id]

    def exists(self, user_id: str) -> bool:
        return self.path_for(user_id).exists()

    def load(self, user_id: str, schema: AttributeSchema | None = None) -> UserModel:
        return load_model(self.path_for(user_id).read_bytes(), schema)

    def save(self, model: UserModel):
        atomic_write(self.path_for(model.user_id), save_model(model))

    def load_or_init(
        self,
        user_id: str,
        schema: AttributeSchema,
        policy: UpdatePolicy,
        item_ids: list[str],
    ) -> UserModel:
        """Return the stored model, or a fresh default one (not yet persisted)."""
        if self.exists(user_id):
            return self.load(user_id, schema)
        return init_user_model(user_id, schema, policy, item_ids)
