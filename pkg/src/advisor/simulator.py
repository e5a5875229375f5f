"""Simulated users and the modeling-vs-control experiment harness.

Each simulated user hides an importance vector over attributes and a value
preference per attribute. They answer questions about attributes they care
about, say "don't care" otherwise, agree to relax only their least important
constraints, and accept recommendations with probability proportional to how
well the item matches their hidden preferences. All randomness is derived
from stable per-(user, session) seeds, so transcripts replay identically.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import random
import statistics
from dataclasses import dataclass, field

from scipy import stats as scipy_stats

from .catalog import Catalog, Item
from .dialogue import Transcript, run_conversation
from .moves import RejectTarget, SystemAct, SystemMove, UserAct
from .query_engine import SimilarityParams
from .user_model import UpdatePolicy, init_user_model

CONDITION_MODELING = "modeling"
CONDITION_CONTROL = "control"


def stable_seed(*parts) -> int:
    digest = hashlib.sha256(repr(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stable_rng(*parts) -> random.Random:
    return random.Random(stable_seed(*parts))


@dataclass(frozen=True)
class SimulatedUser:
    user_id: str
    seed: int
    hidden_attr_importance: dict[str, float]
    hidden_value_prefs: dict[str, dict[str, float]]
    care_threshold: float = 0.08
    accept_noise: float = 0.03

    def cares_about(self, attribute: str) -> bool:
        return self.hidden_attr_importance.get(attribute, 0.0) >= self.care_threshold

    def relaxable(self) -> set[str]:
        """Constraints the user would give up: everything they care about
        except the single most important attribute."""
        cared = sorted(
            (a for a in self.hidden_attr_importance if self.cares_about(a)),
            key=lambda a: (self.hidden_attr_importance[a], a),
        )
        return set(cared[:-1])

    def match_score(self, item: Item, requested: dict[str, str] | None = None) -> float:
        """How well an item fits the hidden preferences, in [0, 1].

        For attributes in `requested` (the values the user asked for, or
        would have, this session) the item is judged against that request:
        getting exactly what you asked for counts as a full match even when
        the request was not the all-time favorite.
        """
        total = 0.0
        for attr, importance in self.hidden_attr_importance.items():
            prefs = self.hidden_value_prefs[attr]
            if requested and attr in requested:
                baseline = prefs[requested[attr]]
            else:
                baseline = max(prefs.values())
            ratio = prefs.get(item.values[attr], 0.0) / baseline
            total += importance * min(1.0, ratio)
        return total

    def item_bias(self, item_id: str, spread: float = 0.5) -> float:
        """A stable like/dislike for the specific place, independent of its
        attributes (the taste component the accept/present ratio can learn)."""
        return (stable_rng(self.seed, "item-bias", item_id).random() - 0.5) * spread


def make_population(
    schema,
    n_users: int,
    seed: int,
    care_threshold: float = 0.08,
    accept_noise: float = 0.03,
) -> list[SimulatedUser]:
    """Users with one to three dominant attributes each.

    Dominant attributes are drawn with probability proportional to domain
    size: wide attributes (cuisine, location) are where individual taste
    differentiates most, and they give the searches enough pruning power.
    Fixture choice; see the experiment notes in the README.
    """
    users = []
    names = schema.names
    sizes = {a: len(schema.attribute(a).values) for a in names}
    for u in range(n_users):
        rng = stable_rng(seed, "user", u)
        n_dominant = rng.choice([2, 2, 3, 3])
        # Weighted sampling without replacement (one key per attribute).
        keys = {a: rng.random() ** (1.0 / sizes[a]) for a in names}
        dominant = set(sorted(names, key=lambda a: -keys[a])[:n_dominant])
        raw = {}
        for a in names:
            if a in dominant:
                raw[a] = 0.30 + rng.random() * 0.15
            else:
                # Skewed toward zero; the occasional mid-weight attribute keeps
                # item acceptance sensitive to qualities the user never states.
                raw[a] = 0.08 * rng.random() ** 1.5
        total = sum(raw.values())
        importance = {a: w / total for a, w in raw.items()}
        prefs = {}
        for a in names:
            domain = list(schema.attribute(a).values)
            rng.shuffle(domain)
            weights = [0.1**i for i in range(len(domain))]
            wtotal = sum(weights)
            prefs[a] = {v: w / wtotal for v, w in zip(domain, weights)}
        users.append(
            SimulatedUser(
                user_id=f"sim{u:03d}",
                seed=stable_seed(seed, "user-seed", u),
                hidden_attr_importance=importance,
                hidden_value_prefs=prefs,
                care_threshold=care_threshold,
                accept_noise=accept_noise,
            )
        )
    return users


@dataclass
class SessionRngState:
    """Deterministic randomness for one user session.

    Draws are keyed by purpose (sticky value per attribute, accept roll per
    item), not by order, so identical dialogue states always see identical
    responses regardless of how the conversation got there.
    """

    user: SimulatedUser
    session_index: int
    catalog: Catalog
    max_item_rejections: int = 3
    item_rejections: int = 0

    def sticky_value(self, attribute: str) -> str:
        prefs = self.user.hidden_value_prefs[attribute]
        values = sorted(prefs)
        rng = stable_rng(self.user.seed, self.session_index, "value", attribute)
        return rng.choices(values, weights=[prefs[v] for v in values])[0]

    def accepts_item(self, item_id: str) -> bool:
        item = self.catalog.by_id[item_id]
        requested = {
            a: self.sticky_value(a)
            for a in self.user.hidden_attr_importance
            if self.user.cares_about(a)
        }
        match = self.user.match_score(item, requested) + self.user.item_bias(item_id)
        p = min(1.0, max(0.0, match)) * (1.0 - self.user.accept_noise)
        roll = stable_rng(self.user.seed, self.session_index, "accept", item_id).random()
        return roll < p


def sim_respond(user: SimulatedUser, system_move: SystemMove, rng_state: SessionRngState) -> str:
    """The simulated user's reply text for one system move."""
    act = system_move.act
    if act is SystemAct.ATTEMPT_CONSTRAIN:
        attr = system_move.attribute
        if not user.cares_about(attr):
            return "don't care"
        return rng_state.sticky_value(attr)
    if act is SystemAct.SUGGEST_RELAX:
        return "yes" if system_move.attribute in user.relaxable() else "no"
    if act is SystemAct.RECOMMEND_ITEM:
        if rng_state.item_rejections >= rng_state.max_item_rejections:
            return "quit"
        if rng_state.accepts_item(system_move.item_id):
            return "yes"
        rng_state.item_rejections += 1
        return "what else"
    # QUIT_START_MOD and anything unexpected: the simulated user gives up.
    return "quit"


class SimResponder:
    """Adapts sim_respond to the conversation loop's move_source interface."""

    def __init__(self, user: SimulatedUser, session_index: int, catalog: Catalog,
                 max_item_rejections: int = 3):
        self.user = user
        self.rng_state = SessionRngState(
            user, session_index, catalog, max_item_rejections=max_item_rejections
        )

    def __call__(self, move: SystemMove, state) -> str:
        if move.act in (SystemAct.PROVIDE_VALUES, SystemAct.CLARIFY):
            pending = state.pending_context
            if pending is not None:
                return sim_respond(self.user, pending, self.rng_state)
            return "quit"
        return sim_respond(self.user, move, self.rng_state)


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class SessionRecord:
    user_id: str
    condition: str
    session_index: int
    interactions: int
    rejections: int
    first_item_accepted: bool
    interactions_before_first_item: int
    terminal: str


def measure_session(
    transcript: Transcript,
    user_id: str = "",
    condition: str = "",
    session_index: int = 1,
) -> SessionRecord:
    """Count the per-conversation metrics from a finished transcript."""
    if transcript.terminal is None:
        raise ValueError("transcript is not terminal")
    interactions = transcript.interactions
    rejections = 0
    first_recommend_index = None
    first_item_accepted = False
    for i, turn in enumerate(transcript.turns):
        if turn.system_move.act is SystemAct.ATTEMPT_CONSTRAIN:
            rejections += sum(
                1
                for m in turn.user_moves
                if m.act is UserAct.REJECT and m.reject_target is RejectTarget.ATTRIBUTE
            )
        if turn.system_move.act is SystemAct.RECOMMEND_ITEM and first_recommend_index is None:
            first_recommend_index = i
            first_item_accepted = any(e[0] == "item-accepted" for e in turn.events)
    if first_recommend_index is None:
        before_first = interactions
    else:
        before_first = sum(
            1 for t in transcript.turns[:first_recommend_index] if t.user_text is not None
        )
    return SessionRecord(
        user_id=user_id,
        condition=condition,
        session_index=session_index,
        interactions=interactions,
        rejections=rejections,
        first_item_accepted=first_item_accepted,
        interactions_before_first_item=before_first,
        terminal=transcript.terminal,
    )


# ---------------------------------------------------------------------------
# Experiment harness


@dataclass(frozen=True)
class ExperimentConfig:
    n_users: int = 20
    n_sessions: int = 15
    condition: str = CONDITION_MODELING
    seed: int = 42
    params: SimilarityParams = field(default_factory=SimilarityParams)
    policy: UpdatePolicy = field(default_factory=UpdatePolicy)
    constrain_strategy: str = "by-weight"
    relax_strategy: str = "by-weight"
    care_threshold: float = 0.08
    accept_noise: float = 0.03

    def __post_init__(self):
        if self.n_users < 1 or self.n_sessions < 1:
            raise ValueError("n_users and n_sessions must be >= 1")
        if self.condition not in (CONDITION_MODELING, CONDITION_CONTROL):
            raise ValueError(f"unknown condition {self.condition!r}")


def run_experiment(config: ExperimentConfig, catalog: Catalog) -> list[SessionRecord]:
    """Run n_users x n_sessions simulated conversations under one condition.

    The modeling condition carries each user's model across sessions; the
    control condition starts every session from the default model. Seeds do
    not depend on the condition, so a user's first session is identical in
    both.
    """
    population = make_population(
        catalog.schema, config.n_users, config.seed,
        config.care_threshold, config.accept_noise,
    )
    item_ids = [item.id for item in catalog.items]
    records = []
    ticker = itertools.count(1)
    for user in population:
        base_model = init_user_model(user.user_id, catalog.schema, config.policy, item_ids)
        model = base_model
        for session_index in range(1, config.n_sessions + 1):
            responder = SimResponder(
                user, session_index, catalog,
                max_item_rejections=config.params.presentation_threshold,
            )
            transcript, updated = run_conversation(
                catalog,
                model,
                responder,
                params=config.params,
                policy=config.policy,
                constrain_strategy=config.constrain_strategy,
                relax_strategy=config.relax_strategy,
                clock=lambda: next(ticker),
            )
            records.append(
                measure_session(transcript, user.user_id, config.condition, session_index)
            )
            model = updated if config.condition == CONDITION_MODELING else base_model
    return records


def fit_regression(points: list[tuple[float, float]]) -> tuple[float, float]:
    """Ordinary least squares fit; returns (slope, intercept)."""
    if len(points) < 2:
        raise ValueError("need at least two points")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    try:
        fit = statistics.linear_regression(xs, ys)
    except statistics.StatisticsError as exc:
        raise ValueError(f"degenerate regression input: {exc}") from exc
    return fit.slope, fit.intercept


def compare_slopes(
    group_a: list[float], group_b: list[float]
) -> tuple[float, float]:
    """Difference of mean slopes and a one-sided Welch p-value for a < b."""
    if len(group_a) < 2 or len(group_b) < 2:
        raise ValueError("need at least two slopes per group")
    result = scipy_stats.ttest_ind(group_a, group_b, equal_var=False, alternative="less")
    diff = statistics.fmean(group_a) - statistics.fmean(group_b)
    return diff, float(result.pvalue)


def per_user_slopes(records: list[SessionRecord], metric) -> dict[str, float]:
    by_user: dict[str, list[tuple[float, float]]] = {}
    for r in records:
        by_user.setdefault(r.user_id, []).append((r.session_index, metric(r)))
    return {
        u: fit_regression(points)[0]
        for u, points in sorted(by_user.items())
        if len(points) >= 2
    }


@dataclass
class ExperimentReport:
    records: dict[str, list[SessionRecord]]
    interaction_slopes: dict[str, dict[str, float]]
    before_first_slopes: dict[str, dict[str, float]]
    mean_interaction_slope: dict[str, float]
    mean_before_first_slope: dict[str, float]
    slope_difference: float
    p_value: float
    late_hit_rate: dict[str, float]

    def summary_table(self) -> str:
        lines = []
        conditions = sorted(self.records)
        sessions = sorted({r.session_index for rs in self.records.values() for r in rs})
        header = f"{'session':>8}" + "".join(f"{c + ' mean-int':>18}" for c in conditions)
        lines.append(header)
        for s in sessions:
            row = f"{s:>8}"
            for c in conditions:
                vals = [r.interactions for r in self.records[c] if r.session_index == s]
                row += f"{statistics.fmean(vals):>18.2f}"
            lines.append(row)
        for c in conditions:
            rejections = statistics.fmean(r.rejections for r in self.records[c])
            lines.append(
                f"{c}: mean interaction slope {self.mean_interaction_slope[c]:+.4f}, "
                f"mean before-first-item slope {self.mean_before_first_slope[c]:+.4f}, "
                f"hit rate (last third) {self.late_hit_rate[c]:.3f}, "
                f"mean rejections/conversation {rejections:.2f}"
            )
        if len(conditions) == 2:
            lines.append(
                f"slope comparison (modeling < control): difference "
                f"{self.slope_difference:+.4f}, one-sided p = {self.p_value:.4g}"
            )
        return "\n".join(lines)


def analyze(records: list[SessionRecord]) -> ExperimentReport:
    """Slopes, the one-sided slope comparison, and late-session hit rates."""
    by_condition: dict[str, list[SessionRecord]] = {}
    for r in records:
        by_condition.setdefault(r.condition, []).append(r)
    interaction_slopes = {
        c: per_user_slopes(rs, lambda r: r.interactions) for c, rs in by_condition.items()
    }
    before_first_slopes = {
        c: per_user_slopes(rs, lambda r: r.interactions_before_first_item)
        for c, rs in by_condition.items()
    }
    mean_int = {c: statistics.fmean(s.values()) if s else 0.0
                for c, s in interaction_slopes.items()}
    mean_before = {c: statistics.fmean(s.values()) if s else 0.0
                   for c, s in before_first_slopes.items()}
    diff, p_value = 0.0, 1.0
    if (len(interaction_slopes.get(CONDITION_MODELING, {})) >= 2
            and len(interaction_slopes.get(CONDITION_CONTROL, {})) >= 2):
        diff, p_value = compare_slopes(
            list(interaction_slopes[CONDITION_MODELING].values()),
            list(interaction_slopes[CONDITION_CONTROL].values()),
        )
    late_hit = {}
    for c, rs in by_condition.items():
        max_session = max(r.session_index for r in rs)
        cutoff = max(1, max_session - max(1, max_session // 3) + 1)
        late = [r for r in rs if r.session_index >= cutoff]
        late_hit[c] = statistics.fmean(1.0 if r.first_item_accepted else 0.0 for r in late)
    return ExperimentReport(
        records=by_condition,
        interaction_slopes=interaction_slopes,
        before_first_slopes=before_first_slopes,
        mean_interaction_slope=mean_int,
        mean_before_first_slope=mean_before,
        slope_difference=diff,
        p_value=p_value,
        late_hit_rate=late_hit,
    )


CSV_HEADER = [
    "user_id", "condition", "session_index", "interactions", "rejections",
    "first_item_accepted", "interactions_before_first_item", "terminal",
]


def records_to_csv(records: list[SessionRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([
            r.user_id, r.condition, r.session_index, r.interactions, r.rejections,
            str(r.first_item_accepted).lower(), r.interactions_before_first_item,
            r.terminal,
        ])
    return out.getvalue()
