"""Speech acts exchanged between system and user, with their payloads."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class SystemAct(enum.Enum):
    ATTEMPT_CONSTRAIN = "attempt-constrain"
    SUGGEST_RELAX = "suggest-relax"
    RECOMMEND_ITEM = "recommend-item"
    QUIT_START_MOD = "quit-start-mod"
    PROVIDE_VALUES = "provide-values"
    CLARIFY = "clarify"


class UserAct(enum.Enum):
    PROVIDE_CONSTRAIN = "provide-constrain"
    ACCEPT = "accept"
    REJECT = "reject"
    PROVIDE_RELAX = "provide-relax"
    START_OVER = "start-over"
    QUIT = "quit"
    QUERY_VALUES = "query-values"
    UNPARSEABLE = "unparseable"  # fallback marker; drives CLARIFY


class RejectTarget(enum.Enum):
    ATTRIBUTE = "attribute"
    RELAX = "relax"
    ITEM = "item"


@dataclass(frozen=True)
class SystemMove:
    act: SystemAct
    attribute: str | None = None
    item_id: str | None = None
    values: tuple[str, ...] = ()

    def __str__(self):
        target = self.attribute or self.item_id or ""
        return f"{self.act.value}({target})" if target else self.act.value


@dataclass(frozen=True)
class UserMove:
    act: UserAct
    # PROVIDE_CONSTRAIN: bindings attribute -> provided values (disjunction).
    bindings: tuple[tuple[str, tuple[str, ...]], ...] = ()
    # REJECT: what is being rejected, and of what (attribute name or item id).
    reject_target: RejectTarget | None = None
    attribute: str | None = None
    item_id: str | None = None

    def binding_dict(self) -> dict[str, tuple[str, ...]]:
        return {attr: values for attr, values in self.bindings}

    def __str__(self):
        if self.act is UserAct.PROVIDE_CONSTRAIN:
            inner = ", ".join(f"{a}={'|'.join(v)}" for a, v in self.bindings)
            return f"provide-constrain({inner})"
        target = self.attribute or self.item_id or ""
        if self.act is UserAct.REJECT and self.reject_target is not None:
            return f"reject-{self.reject_target.value}({target})"
        return f"{self.act.value}({target})" if target else self.act.value


def provide_constrain(bindings: dict[str, tuple[str, ...]]) -> UserMove:
    ordered = tuple(sorted((a, tuple(v)) for a, v in bindings.items()))
    return UserMove(UserAct.PROVIDE_CONSTRAIN, bindings=ordered)
