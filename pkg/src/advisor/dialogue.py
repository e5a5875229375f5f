"""Frame-based dialogue manager.

One conversation is a loop of system prompts and user replies. The system's
move is chosen from the number of items currently matching the query: ask
for another constraint while many match, propose relaxing one when nothing
does, and start recommending once few enough remain. Replies are parsed by
a deterministic grammar; a reply may combine several speech acts ("I don't
care, as long as it's in Palo Alto").
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .catalog import Catalog, sample_values
from .moves import RejectTarget, SystemAct, SystemMove, UserAct, UserMove, provide_constrain
from .query_engine import (
    DiversityParams,
    ExpandedQuery,
    SimilarityParams,
    apply_effect,
    init_query,
    rank_constrain_candidates,
    rank_relax_candidates,
    retrieve_and_rank,
)
from .user_model import (
    UpdatePolicy,
    UserModel,
    on_item_accepted,
    on_item_rejected,
    on_relax_accepted,
)

TERMINAL_ACCEPTED = "accepted-item"
TERMINAL_QUIT = "quit"
TERMINAL_START_OVER_CHAIN = "start-over-chain"

DEFAULT_START_OVER_LIMIT = 25


def load_messages() -> dict:
    with resources.files("advisor.data").joinpath("messages.json").open("rb") as fh:
        return json.load(fh)


@dataclass
class DialogueState:
    query: ExpandedQuery
    constrained: set[str] = field(default_factory=set)
    rejected: set[str] = field(default_factory=set)
    fixed: set[str] = field(default_factory=set)
    asked: set[str] = field(default_factory=set)          # ATTEMPT-CONSTRAIN targets so far
    released: set[str] = field(default_factory=set)       # relaxed attributes, not re-asked
    relax_offered: set[str] = field(default_factory=set)  # SUGGEST-RELAX targets so far
    user_bindings: dict[str, tuple[str, ...]] = field(default_factory=dict)
    ranked_items: list[str] = field(default_factory=list)
    scores: dict[str, float] = field(default_factory=dict)
    rejected_items: set[str] = field(default_factory=set)
    constrain_target: str | None = None
    relax_target: str | None = None
    pending_item: str | None = None
    pending_context: SystemMove | None = None  # last substantive question
    pending_reply: SystemMove | None = None    # reactive PROVIDE-VALUES / CLARIFY
    system_act: SystemAct | None = None
    user_move: UserMove | None = None
    terminal: str | None = None
    accepted_item_id: str | None = None
    clarify_count: int = 0
    start_over_count: int = 0

    @property
    def number_of_items(self) -> int:
        return len(self.ranked_items) - len(self.rejected_items & set(self.ranked_items))

    @property
    def presentation_cursor(self) -> int:
        for i, item_id in enumerate(self.ranked_items):
            if item_id not in self.rejected_items:
                return i
        return len(self.ranked_items)

    def presentable_item(self) -> str | None:
        cursor = self.presentation_cursor
        if cursor < len(self.ranked_items):
            return self.ranked_items[cursor]
        return None

    def check_invariants(self):
        assert not (self.constrained & self.rejected), "constrained and rejected overlap"
        assert self.fixed <= self.constrained, "fixed attribute not constrained"
        assert self.number_of_items == len(
            [i for i in self.ranked_items if i not in self.rejected_items]
        )
        assert set(self.user_bindings) <= self.constrained


def _recompute(state: DialogueState, catalog: Catalog, model: UserModel,
               params: SimilarityParams, dparams: DiversityParams | None = None,
               now: int | None = None):
    ranked = retrieve_and_rank(state.query, catalog, model.item_stats, params,
                               model=model, dparams=dparams, now=now)
    state.ranked_items = [item.id for item, _ in ranked]
    state.scores = {item.id: score for item, score in ranked}


def new_state(model: UserModel, catalog: Catalog, params: SimilarityParams,
              dparams: DiversityParams | None = None,
              now: int | None = None) -> DialogueState:
    state = DialogueState(query=init_query(model))
    _recompute(state, catalog, model, params, dparams, now)
    return state


def next_system_move(
    state: DialogueState,
    params: SimilarityParams,
    catalog: Catalog,
    constrain_strategy: str = "by-weight",
    relax_strategy: str = "by-weight",
) -> SystemMove:
    """Pick the system's next move from the current dialogue state."""
    if state.pending_reply is not None:
        return state.pending_reply
    n = state.number_of_items
    if n == 0:
        if state.ranked_items:
            # Matches exist but the user has rejected all of them.
            return SystemMove(SystemAct.QUIT_START_MOD)
        candidates = rank_relax_candidates(state.query, state, relax_strategy, catalog)
        if candidates:
            return SystemMove(SystemAct.SUGGEST_RELAX, attribute=candidates[0])
        return SystemMove(SystemAct.QUIT_START_MOD)
    if n > params.presentation_threshold:
        candidates = rank_constrain_candidates(state.query, state, constrain_strategy, catalog)
        if candidates:
            return SystemMove(SystemAct.ATTEMPT_CONSTRAIN, attribute=candidates[0])
    return SystemMove(SystemAct.RECOMMEND_ITEM, item_id=state.presentable_item())


def emit_move(state: DialogueState, move: SystemMove):
    """Record a move as uttered; updates targets and the pending question."""
    state.system_act = move.act
    if move.act is SystemAct.ATTEMPT_CONSTRAIN:
        state.constrain_target = move.attribute
        state.relax_target = None
        state.asked.add(move.attribute)
        state.pending_context = move
    elif move.act is SystemAct.SUGGEST_RELAX:
        state.relax_target = move.attribute
        state.constrain_target = None
        state.relax_offered.add(move.attribute)
        state.pending_context = move
    elif move.act is SystemAct.RECOMMEND_ITEM:
        state.pending_item = move.item_id
        state.constrain_target = None
        state.relax_target = None
        state.pending_context = move
    elif move.act is SystemAct.QUIT_START_MOD:
        state.constrain_target = None
        state.relax_target = None
        state.pending_item = None
        state.pending_context = move
    # PROVIDE_VALUES and CLARIFY leave the pending question standing.
    if state.pending_reply is move:
        state.pending_reply = None


# ---------------------------------------------------------------------------
# Parsing


_DONT_CARE = re.compile(r"\b(don'?t care|doesn'?t matter|no preference|whatever)\b")
_QUIT = re.compile(r"\b(quit|goodbye|bye|exit)\b")
_START_OVER = re.compile(r"\bstart over\b")
_QUERY_VALUES = re.compile(r"\bwhat\b.*\bare there\b|\boptions\b|\bhelp\b")
_YES = re.compile(r"\b(yes|yeah|yep|sure|ok|okay)\b|\bsounds (fine|good|great)\b")
_NO = re.compile(r"\b(no|nope|nah)\b")
_NEXT = re.compile(r"\bwhat else\b|\bnext\b|\bsomething else\b|\banother\b")


def _normalize(text: str) -> str:
    text = text.lower()
    text = re.sub(r"[^a-z0-9']+", " ", text)
    return " " + re.sub(r"\s+", " ", text).strip() + " "


@dataclass(frozen=True)
class _Grammar:
    # (compiled phrase pattern, attribute, value), longest phrases first
    value_patterns: tuple
    # attribute -> compiled "(any|relax) <attr-name>" pattern
    relax_patterns: tuple
    # attribute -> compiled bare attribute-name pattern
    name_patterns: tuple


@lru_cache(maxsize=16)
def _grammar(schema) -> _Grammar:
    rows = []
    for attr in schema.attributes:
        for value in attr.values:
            rows.append((_normalize(value).strip(), attr.name, value))
        for token, value in attr.synonyms.items():
            rows.append((_normalize(token).strip(), attr.name, value))
    rows.sort(key=lambda r: (-len(r[0]), r[0]))
    value_patterns = tuple(
        (re.compile(rf"\b{re.escape(p)}\b"), attr, value) for p, attr, value in rows
    )
    relax_patterns = []
    name_patterns = []
    for attr in schema.attributes:
        phrase = re.escape(_normalize(attr.name).strip())
        relax_patterns.append((attr.name, re.compile(rf"\b(any|relax)\s+{phrase}\b")))
        name_patterns.append((attr.name, re.compile(rf"\b{phrase}\b")))
    return _Grammar(value_patterns, tuple(relax_patterns), tuple(name_patterns))


def _context_attribute(context: SystemMove | None) -> str | None:
    if context is None:
        return None
    return context.attribute


def parse_utterance(text: str, context: SystemMove | None, schema) -> list[UserMove]:
    """Deterministic grammar: map one utterance to its component speech acts.

    Returns at least one move; an utterance nothing matches yields the
    unparseable marker, which the manager answers with a clarification.
    """
    t = _normalize(text)
    if not t.strip():
        return [UserMove(UserAct.UNPARSEABLE)]
    if _QUIT.search(t):
        return [UserMove(UserAct.QUIT)]
    if _START_OVER.search(t):
        return [UserMove(UserAct.START_OVER)]

    grammar = _grammar(schema)

    if _QUERY_VALUES.search(t):
        named = [a for a, pat in grammar.name_patterns if pat.search(t)]
        attr = named[0] if named else _context_attribute(context)
        return [UserMove(UserAct.QUERY_VALUES, attribute=attr)]

    context_act = context.act if context is not None else None
    moves: list[UserMove] = []
    relax_moves: list[UserMove] = []

    # "any <attr>" / "relax <attr>" fragments.
    for attr, pat in grammar.relax_patterns:
        m = pat.search(t)
        if not m:
            continue
        keyword = m.group(1)
        t = t.replace(m.group(0), " ")
        in_relax_context = context_act in (SystemAct.SUGGEST_RELAX, SystemAct.QUIT_START_MOD)
        if keyword == "relax" or in_relax_context:
            relax_moves.append(UserMove(UserAct.PROVIDE_RELAX, attribute=attr))
        else:
            moves.append(
                UserMove(UserAct.REJECT, reject_target=RejectTarget.ATTRIBUTE, attribute=attr)
            )

    if _DONT_CARE.search(t):
        t = _DONT_CARE.sub(" ", t)
        if context_act is SystemAct.SUGGEST_RELAX:
            moves.append(UserMove(UserAct.ACCEPT))
        else:
            moves.append(
                UserMove(
                    UserAct.REJECT,
                    reject_target=RejectTarget.ATTRIBUTE,
                    attribute=_context_attribute(context),
                )
            )

    if _NO.search(t) or (_NEXT.search(t) and context_act is SystemAct.RECOMMEND_ITEM):
        if context_act is SystemAct.RECOMMEND_ITEM:
            moves.append(
                UserMove(UserAct.REJECT, reject_target=RejectTarget.ITEM,
                         item_id=context.item_id)
            )
        elif context_act is SystemAct.SUGGEST_RELAX:
            moves.append(
                UserMove(UserAct.REJECT, reject_target=RejectTarget.RELAX,
                         attribute=context.attribute)
            )
        t = _NO.sub(" ", _NEXT.sub(" ", t))
    elif _YES.search(t):
        if context_act in (SystemAct.SUGGEST_RELAX, SystemAct.RECOMMEND_ITEM):
            moves.append(UserMove(UserAct.ACCEPT))
        t = _YES.sub(" ", t)

    bindings: dict[str, list[str]] = {}
    for pat, attr, value in grammar.value_patterns:
        if pat.search(t):
            t = pat.sub(" ", t)
            bindings.setdefault(attr, [])
            if value not in bindings[attr]:
                bindings[attr].append(value)

    moves.extend(relax_moves)
    if bindings:
        moves.append(provide_constrain({a: tuple(v) for a, v in bindings.items()}))

    # Deduplicate while preserving order (e.g. "no, what else" is one reject).
    seen = set()
    unique = []
    for move in moves:
        key = (move.act, move.reject_target, move.attribute, move.item_id, move.bindings)
        if key not in seen:
            seen.add(key)
            unique.append(move)
    if not unique:
        return [UserMove(UserAct.UNPARSEABLE)]
    return unique


# ---------------------------------------------------------------------------
# State transitions


def _bindings_list(state: DialogueState) -> list[tuple[str, tuple[str, ...]]]:
    return sorted(state.user_bindings.items())


def _clarify(state: DialogueState, reason: str, events: list):
    state.pending_reply = SystemMove(SystemAct.CLARIFY)
    state.clarify_count += 1
    events.append(("clarify", reason))


def apply_user_move(
    state: DialogueState,
    user_move: UserMove,
    model: UserModel,
    policy: UpdatePolicy,
    catalog: Catalog,
    params: SimilarityParams,
    now: int | None = None,
    dparams: DiversityParams | None = None,
) -> tuple[DialogueState, UserModel, list]:
    """Apply one user speech act: update the dialogue state and the query,
    fire the user-model updates it calls for, and recompute the match list.

    A move that makes no sense in context queues a clarification instead of
    failing. Returns (state, model, events); events name the model updates
    and clarifications that occurred.
    """
    events: list = []
    state.user_move = user_move
    act = user_move.act
    context = state.pending_context
    context_act = context.act if context is not None else None

    if act is UserAct.QUIT:
        state.terminal = TERMINAL_QUIT
        return state, model, events

    if act is UserAct.START_OVER:
        state.start_over_count += 1
        if state.start_over_count > DEFAULT_START_OVER_LIMIT:
            state.terminal = TERMINAL_START_OVER_CHAIN
            return state, model, events
        fresh = new_state(model, catalog, params, dparams, now)
        fresh.start_over_count = state.start_over_count
        fresh.clarify_count = state.clarify_count
        fresh.user_move = user_move
        return fresh, model, events

    if act is UserAct.UNPARSEABLE:
        _clarify(state, "unparseable", events)
        return state, model, events

    if act is UserAct.QUERY_VALUES:
        attr = user_move.attribute or state.constrain_target or state.relax_target
        if attr is None or attr not in catalog.schema:
            _clarify(state, "no attribute to list values for", events)
            return state, model, events
        values = sample_values(catalog.schema, attr, 3, model.value_prefs.get(attr))
        state.pending_reply = SystemMove(
            SystemAct.PROVIDE_VALUES, attribute=attr, values=tuple(values)
        )
        return state, model, events

    if act is UserAct.PROVIDE_CONSTRAIN:
        bindings = user_move.binding_dict()
        for attr, values in bindings.items():
            if attr not in catalog.schema:
                _clarify(state, f"unknown attribute {attr!r}", events)
                return state, model, events
            domain = set(catalog.schema.attribute(attr).values)
            if not values or not set(values) <= domain:
                _clarify(state, f"unknown value for {attr!r}", events)
                return state, model, events
        state.query = apply_effect(
            state.query, context_act or SystemAct.ATTEMPT_CONSTRAIN,
            UserAct.PROVIDE_CONSTRAIN, bindings, model,
        )
        for attr, values in bindings.items():
            state.constrained.add(attr)
            state.rejected.discard(attr)
            state.released.discard(attr)
            state.user_bindings[attr] = tuple(values)
        _recompute(state, catalog, model, params, dparams, now)
        return state, model, events

    if act is UserAct.REJECT:
        target = user_move.reject_target
        if target is None:
            _clarify(state, "nothing to reject", events)
            return state, model, events
        if target is RejectTarget.ATTRIBUTE:
            attr = user_move.attribute or state.constrain_target
            if attr is None or attr not in catalog.schema:
                _clarify(state, "no attribute to reject", events)
                return state, model, events
            state.query = apply_effect(
                state.query, SystemAct.ATTEMPT_CONSTRAIN, UserAct.REJECT, attr, model
            )
            state.rejected.add(attr)
            state.constrained.discard(attr)
            state.fixed.discard(attr)
            state.user_bindings.pop(attr, None)
            if state.constrain_target == attr:
                state.constrain_target = None
            _recompute(state, catalog, model, params, dparams, now)
            return state, model, events
        if target is RejectTarget.RELAX:
            attr = user_move.attribute or state.relax_target
            if attr is None or attr not in state.constrained:
                _clarify(state, "no relaxation to reject", events)
                return state, model, events
            state.fixed.add(attr)
            state.relax_target = None
            return state, model, events
        # RejectTarget.ITEM
        item_id = user_move.item_id or state.pending_item
        if item_id is None or item_id not in catalog.by_id:
            _clarify(state, "no item to reject", events)
            return state, model, events
        model = on_item_rejected(model, item_id, now)
        events.append(("item-rejected", item_id))
        state.rejected_items.add(item_id)
        state.pending_item = None
        _recompute(state, catalog, model, params, dparams, now)
        return state, model, events

    if act is UserAct.ACCEPT:
        if context_act is SystemAct.SUGGEST_RELAX and state.relax_target is not None:
            return _accept_relax(state, state.relax_target, model, policy, catalog,
                                 params, now, events, dparams)
        if context_act is SystemAct.RECOMMEND_ITEM and state.pending_item is not None:
            item_id = state.pending_item
            model = on_item_accepted(model, _bindings_list(state), item_id, policy, now)
            events.append(("item-accepted", item_id))
            state.terminal = TERMINAL_ACCEPTED
            state.accepted_item_id = item_id
            return state, model, events
        _clarify(state, "nothing to accept", events)
        return state, model, events

    if act is UserAct.PROVIDE_RELAX:
        attr = user_move.attribute
        if attr is None or attr not in state.constrained:
            _clarify(state, "attribute is not constrained", events)
            return state, model, events
        if context_act is SystemAct.SUGGEST_RELAX and attr == state.relax_target:
            # Naming the suggested attribute is accepting the suggestion.
            return _accept_relax(state, attr, model, policy, catalog, params, now,
                                 events, dparams)
        state.query = apply_effect(
            state.query, context_act or SystemAct.ATTEMPT_CONSTRAIN,
            UserAct.PROVIDE_RELAX, attr, model,
        )
        _release(state, attr)
        _recompute(state, catalog, model, params, dparams, now)
        return state, model, events

    raise AssertionError(f"unhandled user act {act}")


def _release(state: DialogueState, attr: str):
    state.constrained.discard(attr)
    state.fixed.discard(attr)
    state.released.add(attr)
    state.user_bindings.pop(attr, None)
    if state.relax_target == attr:
        state.relax_target = None


def _accept_relax(state, attr, model, policy, catalog, params, now, events,
                  dparams=None):
    # Model update happens before the query is actually relaxed.
    model = on_relax_accepted(model, _bindings_list(state), policy, now)
    events.append(("relax-accepted", attr))
    state.query = apply_effect(state.query, SystemAct.SUGGEST_RELAX, UserAct.ACCEPT,
                               attr, model)
    _release(state, attr)
    _recompute(state, catalog, model, params, dparams, now)
    return state, model, events


# ---------------------------------------------------------------------------
# Rendering


@dataclass(frozen=True)
class Rendered:
    text: str
    item_card: dict | None = None


def render_move(
    move: SystemMove,
    state: DialogueState,
    catalog: Catalog,
    messages: dict | None = None,
) -> Rendered:
    """Fixed template per move tag; recommendations carry a structured card."""
    msgs = messages if messages is not None else load_messages()
    act = move.act
    if act is SystemAct.ATTEMPT_CONSTRAIN:
        template = msgs.get("attempt_constrain_overrides", {}).get(
            move.attribute, msgs["attempt_constrain"]
        )
        return Rendered(template.format(attribute=move.attribute))
    if act is SystemAct.SUGGEST_RELAX:
        return Rendered(msgs["suggest_relax"].format(attribute=move.attribute))
    if act is SystemAct.RECOMMEND_ITEM:
        item = catalog.by_id[move.item_id]
        card = {
            "id": item.id,
            "name": item.display.name,
            "address": item.display.address,
            "phone": item.display.phone,
        }
        return Rendered(msgs["recommend_item"], item_card=card)
    if act is SystemAct.PROVIDE_VALUES:
        values = list(move.values)
        if len(values) > 1:
            listed = ", ".join(values[:-1]) + ", and " + values[-1]
        else:
            listed = values[0] if values else ""
        return Rendered(msgs["provide_values"].format(values=listed))
    if act is SystemAct.QUIT_START_MOD:
        key = "quit_start_mod_exhausted" if state.ranked_items else "quit_start_mod_no_match"
        return Rendered(msgs[key])
    if act is SystemAct.CLARIFY:
        context = state.pending_context
        hint_key = "clarify_hint_default"
        attribute = ""
        if context is not None:
            if context.act is SystemAct.ATTEMPT_CONSTRAIN:
                hint_key, attribute = "clarify_hint_constrain", context.attribute
            elif context.act is SystemAct.SUGGEST_RELAX:
                hint_key = "clarify_hint_relax"
            elif context.act is SystemAct.RECOMMEND_ITEM:
                hint_key = "clarify_hint_recommend"
            elif context.act is SystemAct.QUIT_START_MOD:
                hint_key = "clarify_hint_mod"
        hint = msgs[hint_key].format(attribute=attribute)
        return Rendered(msgs["clarify"].format(hint=hint))
    raise ValueError(f"cannot render {move}")


# ---------------------------------------------------------------------------
# Conversation loop


@dataclass
class Turn:
    system_move: SystemMove
    system_text: str
    item_card: dict | None
    user_text: str | None
    user_moves: list[UserMove]
    events: list
    timestamp: int


@dataclass
class Transcript:
    turns: list[Turn] = field(default_factory=list)
    terminal: str | None = None
    closing_text: str | None = None

    @property
    def system_prompt_count(self) -> int:
        return len(self.turns) + (1 if self.closing_text else 0)

    @property
    def interactions(self) -> int:
        return sum(1 for t in self.turns if t.user_text is not None)


class DialogueSession:
    """Stateful wrapper running one conversation turn at a time."""

    def __init__(
        self,
        catalog: Catalog,
        model: UserModel,
        params: SimilarityParams | None = None,
        policy: UpdatePolicy | None = None,
        constrain_strategy: str = "by-weight",
        relax_strategy: str = "by-weight",
        messages: dict | None = None,
        clock=None,
        dparams: DiversityParams | None = None,
    ):
        self.catalog = catalog
        self.model = model
        self.params = params or SimilarityParams()
        self.policy = policy or UpdatePolicy()
        self.constrain_strategy = constrain_strategy
        self.relax_strategy = relax_strategy
        self.messages = messages if messages is not None else load_messages()
        self.clock = clock or (lambda: int(time.time()))
        self.dparams = dparams
        self.state = new_state(model, catalog, self.params, dparams, self.clock())
        self.transcript = Transcript()

    @property
    def terminal(self) -> str | None:
        return self.state.terminal

    def prompt(self) -> tuple[SystemMove, Rendered]:
        """Choose, record, and render the next system move."""
        move = next_system_move(
            self.state, self.params, self.catalog,
            self.constrain_strategy, self.relax_strategy,
        )
        rendered = render_move(move, self.state, self.catalog, self.messages)
        emit_move(self.state, move)
        self.transcript.turns.append(
            Turn(move, rendered.text, rendered.item_card, None, [], [], self.clock())
        )
        return move, rendered

    def respond(self, text: str) -> list:
        """Parse and apply one user reply to the pending prompt."""
        if self.state.terminal is not None:
            raise RuntimeError("conversation already ended")
        turn = self.transcript.turns[-1]
        turn.user_text = text
        moves = parse_utterance(text, self.state.pending_context, self.catalog.schema)
        all_events = []
        for move in moves:
            if self.state.terminal is not None:
                break
            self.state, self.model, events = apply_user_move(
                self.state, move, self.model, self.policy,
                self.catalog, self.params, now=self.clock(), dparams=self.dparams,
            )
            turn.user_moves.append(move)
            all_events.extend(events)
        turn.events = all_events
        if self.state.terminal is not None:
            self.close()
        return all_events

    def force_quit(self):
        if self.state.terminal is None:
            self.state.terminal = TERMINAL_QUIT
            self.close()

    def close(self):
        self.transcript.terminal = self.state.terminal
        self.transcript.closing_text = self.messages["done"]


def run_conversation(
    catalog: Catalog,
    model: UserModel,
    move_source,
    params: SimilarityParams | None = None,
    policy: UpdatePolicy | None = None,
    constrain_strategy: str = "by-weight",
    relax_strategy: str = "by-weight",
    clock=None,
) -> tuple[Transcript, UserModel]:
    """Loop prompt -> reply until the conversation ends.

    move_source is called with (system move, dialogue state) and returns the
    user's text, or None when exhausted (which ends the conversation as a
    quit). The caller is responsible for persisting the returned model.
    """
    session = DialogueSession(
        catalog, model, params, policy, constrain_strategy, relax_strategy, clock=clock
    )
    while session.terminal is None:
        move, _rendered = session.prompt()
        text = move_source(move, session.state)
        if text is None:
            session.force_quit()
            break
        session.respond(text)
    return session.transcript, session.model
