"""Transition semantics: from located-agent systems to a CTMC.

Transitions are derived in two layers. The capability layer describes what a
component would do if a message arrived: each in-range listener either
receives and acts, or stays put, with probabilities read from its prefixes
and, for unicast, from the weight competition across the system. The
stochastic layer assigns exponential rates to sender actions and composes
them with the capabilities of everybody else: broadcast reaches all in-range
listeners independently and never blocks; unicast picks exactly one listener
and fires only when an eligible one exists; spontaneous actions involve the
actor alone.

A failed reception leaves the listener exactly as it was, including any
choice alternatives it holds.

`build_ctmc` closes the stochastic relation from an initial system by
breadth-first search, merging equal-rate-relevant states through constant
resolution.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .model import (
    ActionId,
    ActionType,
    BroadcastIn,
    BroadcastOut,
    Definitions,
    Location,
    ModelComponent,
    ModelError,
    SeqComponent,
    Spontaneous,
    UnicastIn,
    UnicastOut,
    choice_leaves,
    canonical,
    render_model,
    seq_in,
)
from .rates import receive_weight

__all__ = [
    "BoundExceeded",
    "CapLabel",
    "Continuation",
    "Ctmc",
    "Derivation",
    "LiftedStep",
    "Step",
    "StochLabel",
    "Transition",
    "agent_steps",
    "build_ctmc",
    "cap_step",
    "component_steps",
    "derivations",
    "export_dot",
    "export_tsv",
    "stoch_step",
]


@dataclass(frozen=True)
class CapLabel:
    """Label of a capability transition: an input offer carried to listeners."""

    kind: ActionType  # BROADCAST_IN or UNICAST_IN
    label: str
    influence: frozenset[Location]
    context: ModelComponent

    def __post_init__(self) -> None:
        if self.kind not in (ActionType.BROADCAST_IN, ActionType.UNICAST_IN):
            raise ModelError(f"capability labels are input-typed, got {self.kind}")


@dataclass(frozen=True)
class StochLabel:
    """Label of a stochastic transition; spontaneous actions carry no range."""

    kind: ActionType  # SPONTANEOUS, BROADCAST_OUT or UNICAST_OUT
    label: str
    influence: frozenset[Location]
    context: ModelComponent

    def __post_init__(self) -> None:
        if self.kind is ActionType.SPONTANEOUS and self.influence:
            raise ModelError("spontaneous labels carry an empty range")

    @property
    def text(self) -> str:
        return ActionId(self.kind, self.label).text


class Continuation:
    """Finite-support map from successor systems to probabilities or rates.

    Entries landing on the same state up to constant resolution are summed;
    the first representative seen is kept for display.
    """

    def __init__(self, defs: Definitions,
                 entries: list[tuple[ModelComponent, float]] | None = None):
        self._defs = defs
        self._entries: dict[ModelComponent, tuple[ModelComponent, float]] = {}
        for state, value in entries or []:
            self.add(state, value)

    def add(self, state: ModelComponent, value: float) -> None:
        if value <= 0.0:
            return
        key = canonical(self._defs, state)
        if key in self._entries:
            rep, old = self._entries[key]
            self._entries[key] = (rep, old + value)
        else:
            self._entries[key] = (state, value)

    def items(self) -> list[tuple[ModelComponent, float]]:
        return list(self._entries.values())

    def value_at(self, state: ModelComponent) -> float:
        key = canonical(self._defs, state)
        entry = self._entries.get(key)
        return entry[1] if entry else 0.0

    def total(self) -> float:
        return sum(value for _, value in self._entries.values())

    def support(self) -> list[ModelComponent]:
        return [rep for rep, _ in self._entries.values()]

    def __len__(self) -> int:
        return len(self._entries)


def _as_component(subject: ModelComponent | SeqComponent) -> ModelComponent:
    return (subject,) if isinstance(subject, SeqComponent) else subject


def _continue_as(cont) -> SeqComponent:
    return SeqComponent(cont, cont.location)


def _broadcast_branches(defs: Definitions, agent: SeqComponent,
                        label: CapLabel) -> list[tuple[SeqComponent, float, bool]]| None:
    """Receive/stay branches of one agent facing a broadcast offer."""
    if agent.location not in label.influence:
        return None
    matches = [leaf for leaf in choice_leaves(defs, agent)
               if isinstance(leaf.prefix, BroadcastIn) and leaf.prefix.label == label.label]
    if not matches:
        return None
    if len(matches) > 1:
        raise ModelError(f"agent has several ?{label.label} inputs in one choice")
    prefix = matches[0].prefix
    acted = prefix.act_prob * prefix.recv_prob
    branches = []
    if acted > 0.0:
        branches.append((_continue_as(matches[0].continuation), acted, True))
    if acted < 1.0:
        branches.append((agent, 1.0 - acted, False))
    return branches


def _unicast_branches(defs: Definitions, agent: SeqComponent,
                      label: CapLabel) -> list[tuple[SeqComponent, float, bool]]| None:
    """Selected-and-acted/selected-but-dropped branches of a unicast offer."""
    if agent.location not in label.influence:
        return None
    matches = [leaf for leaf in choice_leaves(defs, agent)
               if isinstance(leaf.prefix, UnicastIn) and leaf.prefix.label == label.label]
    if not matches:
        return None
    if len(matches) > 1:
        raise ModelError(f"agent has several ??{label.label} inputs in one choice")
    prefix = matches[0].prefix
    pool = receive_weight(defs, seq_in(label.context, label.influence), label.label)
    if pool <= 0.0:
        return None
    share = prefix.weight / pool
    branches = []
    if prefix.act_prob > 0.0:
        branches.append((_continue_as(matches[0].continuation),
                         share * prefix.act_prob, True))
    if prefix.act_prob < 1.0:
        branches.append((agent, share * (1.0 - prefix.act_prob), False))
    return branches


def cap_step(defs: Definitions, subject: ModelComponent | SeqComponent,
             label: CapLabel) -> Continuation | None:
    """Capability of ``subject`` under an input offer, or ``None``.

    For a single agent the support holds its acted and stayed branches. A
    composed subject reacts to broadcast with the product over its agents
    (non-listeners keep probability one of staying) and to unicast with one
    alternative per agent that could be selected.
    """
    if isinstance(subject, SeqComponent):
        branch_fn = (_broadcast_branches if label.kind is ActionType.BROADCAST_IN
                     else _unicast_branches)
        branches = branch_fn(defs, subject, label)
        if branches is None:
            return None
        return Continuation(defs, [((succ,), mass) for succ, mass, _ in branches])

    if label.kind is ActionType.BROADCAST_IN:
        per_agent = [_broadcast_branches(defs, agent, label) for agent in subject]
        if all(branches is None for branches in per_agent):
            return None
        # product measure, folded pairwise over the composition
        acc: list[tuple[tuple[SeqComponent, ...], float]] = [((), 1.0)]
        for agent, branches in zip(subject, per_agent):
            options = branches if branches is not None else [(agent, 1.0, False)]
            acc = [(done + (succ,), mass * m)
                   for done, mass in acc for succ, m, _ in options]
        return Continuation(defs, [(state, mass) for state, mass in acc])

    per_agent = [_unicast_branches(defs, agent, label) for agent in subject]
    if all(branches is None for branches in per_agent):
        return None
    continuation = Continuation(defs)
    for j, branches in enumerate(per_agent):
        if branches is None:
            continue
        for succ, mass, _ in branches:
            state = subject[:j] + (succ,) + subject[j + 1:]
            continuation.add(state, mass)
    return continuation


@dataclass(frozen=True)
class Step:
    """One joint outcome of a derivation: who ends where, at what rate."""

    successor: ModelComponent
    rate: float
    received: frozenset[int]  # positions that received and acted


@dataclass(frozen=True)
class Derivation:
    label: StochLabel
    sender: int
    sender_succ: SeqComponent
    steps: tuple[Step, ...]

    def continuation(self, defs: Definitions) -> Continuation:
        return Continuation(defs, [(s.successor, s.rate) for s in self.steps])


def derivations(defs: Definitions, system: ModelComponent) -> list[Derivation]:
    """All stochastic derivations of ``system``, one per enabled sender
    alternative, in position order."""
    out: list[Derivation] = []
    for i, agent in enumerate(system):
        for leaf in choice_leaves(defs, agent):
            prefix = leaf.prefix
            mover = _continue_as(leaf.continuation)

            if isinstance(prefix, Spontaneous):
                label = StochLabel(ActionType.SPONTANEOUS, prefix.label,
                                   frozenset(), system)
                succ = system[:i] + (mover,) + system[i + 1:]
                out.append(Derivation(label, i, mover,
                                      (Step(succ, prefix.rate, frozenset()),)))

            elif isinstance(prefix, BroadcastOut):
                label = StochLabel(ActionType.BROADCAST_OUT, prefix.label,
                                   prefix.influence, system)
                offer = CapLabel(ActionType.BROADCAST_IN, prefix.label,
                                 prefix.influence, system)
                # fold the independent listener decisions into joint outcomes
                joint: list[tuple[dict[int, SeqComponent], frozenset[int], float]]
                joint = [({}, frozenset(), 1.0)]
                for j, other in enumerate(system):
                    if j == i:
                        continue
                    branches = _broadcast_branches(defs, other, offer)
                    if branches is None:
                        continue
                    extended = []
                    for changes, received, mass in joint:
                        for succ_j, m, acted in branches:
                            new_changes = dict(changes)
                            new_received = received
                            if acted:
                                new_changes[j] = succ_j
                                new_received = received | {j}
                            extended.append((new_changes, new_received, mass * m))
                    joint = extended
                steps = []
                for changes, received, mass in joint:
                    changes[i] = mover
                    succ = tuple(changes.get(k, part) for k, part in enumerate(system))
                    rate = prefix.rate * mass
                    if rate > 0.0:
                        steps.append(Step(succ, rate, received))
                out.append(Derivation(label, i, mover, tuple(steps)))

            elif isinstance(prefix, UnicastOut):
                label = StochLabel(ActionType.UNICAST_OUT, prefix.label,
                                   prefix.influence, system)
                offer = CapLabel(ActionType.UNICAST_IN, prefix.label,
                                 prefix.influence, system)
                steps = []
                for j, other in enumerate(system):
                    if j == i:
                        continue
                    branches = _unicast_branches(defs, other, offer)
                    if branches is None:
                        continue
                    for succ_j, mass, acted in branches:
                        changes = {i: mover}
                        received: frozenset[int] = frozenset()
                        if acted:
                            changes[j] = succ_j
                            received = frozenset({j})
                        succ = tuple(changes.get(k, part) for k, part in enumerate(system))
                        rate = prefix.rate * mass
                        if rate > 0.0:
                            steps.append(Step(succ, rate, received))
                if steps:
                    # blocked senders, with nobody selectable, yield nothing
                    out.append(Derivation(label, i, mover, tuple(steps)))
    return out


def stoch_step(defs: Definitions,
               system: ModelComponent) -> list[tuple[StochLabel, Continuation]]:
    """The stochastic transitions of ``system`` as labelled continuations."""
    return [(d.label, d.continuation(defs)) for d in derivations(defs, system)]


class BoundExceeded(Exception):
    def __init__(self, discovered: int, bound: int):
        super().__init__(f"state bound {bound} exceeded after discovering "
                         f"{discovered} states")
        self.discovered = discovered
        self.bound = bound


@dataclass(frozen=True)
class Transition:
    source: int
    target: int
    rate: float
    kind: ActionType
    label: str
    influence: frozenset[Location]


@dataclass
class Ctmc:
    states: list[ModelComponent]
    transitions: list[Transition]
    initial: int = 0


def build_ctmc(defs: Definitions, initial: ModelComponent, bound: int) -> Ctmc:
    """Breadth-first closure of the stochastic relation from ``initial``.

    States are indexed in discovery order, edges with equal source, target
    and label are merged by rate addition, and discovering more than
    ``bound`` states raises BoundExceeded.
    """
    if bound < 1:
        raise ModelError("state bound must be at least 1")
    start_key = canonical(defs, initial)
    index: dict[ModelComponent, int] = {start_key: 0}
    states: list[ModelComponent] = [initial]
    queue: deque[int] = deque([0])
    edges: dict[tuple[int, int, ActionType, str, frozenset[Location]], float] = {}
    while queue:
        src = queue.popleft()
        for derivation in derivations(defs, states[src]):
            for state, rate in derivation.continuation(defs).items():
                key = canonical(defs, state)
                dst = index.get(key)
                if dst is None:
                    if len(states) + 1 > bound:
                        raise BoundExceeded(len(states) + 1, bound)
                    dst = len(states)
                    index[key] = dst
                    states.append(state)
                    queue.append(dst)
                edge = (src, dst, derivation.label.kind, derivation.label.label,
                        derivation.label.influence)
                edges[edge] = edges.get(edge, 0.0) + rate
    transitions = [
        Transition(src, dst, rate, kind, label, influence)
        for (src, dst, kind, label, influence), rate in edges.items()
    ]
    transitions.sort(key=lambda t: (t.source, t.target, t.kind.glyph, t.label,
                                    sorted(loc.name for loc in t.influence)))
    return Ctmc(states, transitions)


def agent_steps(defs: Definitions, system: ModelComponent,
                position: int) -> set[tuple[ActionId, SeqComponent]]:
    """Actions the agent at ``position`` can perform inside ``system``,
    each with the agent's successor. Senders appear under their own output
    type, successful receivers under the matching input type; failed
    receptions are not actions."""
    if not 0 <= position < len(system):
        raise ModelError(f"position {position} out of range 0..{len(system) - 1}")
    found: dict[tuple[ActionId, ModelComponent], tuple[ActionId, SeqComponent]] = {}

    def record(action: ActionId, succ: SeqComponent) -> None:
        key = (action, canonical(defs, (succ,)))
        found.setdefault(key, (action, succ))

    in_type = {ActionType.BROADCAST_OUT: ActionType.BROADCAST_IN,
               ActionType.UNICAST_OUT: ActionType.UNICAST_IN}
    for derivation in derivations(defs, system):
        if derivation.sender == position:
            record(ActionId(derivation.label.kind, derivation.label.label),
                   derivation.sender_succ)
        for step in derivation.steps:
            if position in step.received:
                record(ActionId(in_type[derivation.label.kind], derivation.label.label),
                       step.successor[position])
    return set(found.values())


@dataclass(frozen=True)
class LiftedStep:
    """A component-level step: the whole subject's action and successor,
    observed inside a surrounding context."""

    action: ActionId
    label_text: str  # the system transition's own label, e.g. "!!move"
    successor: ModelComponent


def component_steps(defs: Definitions, context: ModelComponent,
                    subject: ModelComponent | SeqComponent) -> set[LiftedStep]:
    """Steps the subject performs within ``context || subject``.

    The subject acts as sender when it holds the sending agent, and as
    receiver when one of its agents successfully receives; either role may
    hold, each contributing its own action identifier over the same
    successor. Context-only activity is not a subject step.
    """
    part = _as_component(subject)
    offset = len(context)
    combined = context + part
    in_type = {ActionType.BROADCAST_OUT: ActionType.BROADCAST_IN,
               ActionType.UNICAST_OUT: ActionType.UNICAST_IN}
    found: dict[tuple[ActionId, ModelComponent], LiftedStep] = {}

    def record(action: ActionId, text: str, succ: ModelComponent) -> None:
        key = (action, canonical(defs, succ))
        found.setdefault(key, LiftedStep(action, text, succ))

    for derivation in derivations(defs, combined):
        text = derivation.label.text
        for step in derivation.steps:
            succ_subject = step.successor[offset:]
            if derivation.sender >= offset:
                record(ActionId(derivation.label.kind, derivation.label.label),
                       text, succ_subject)
            if any(j >= offset for j in step.received):
                record(ActionId(in_type[derivation.label.kind], derivation.label.label),
                       text, succ_subject)
    return set(found.values())


# -- exports ----------------------------------------------------------------


def export_tsv(ctmc: Ctmc) -> str:
    """State table and transition table, tab-separated.

    States come first (`id<TAB>term`), then one line per transition
    (`src<TAB>dst<TAB>rate<TAB>kind<TAB>label`), rates with 17 significant
    digits, sections separated by a blank line, LF endings.
    """
    lines = ["# states"]
    for i, state in enumerate(ctmc.states):
        lines.append(f"{i}\t{render_model(state)}")
    lines.append("")
    lines.append("# transitions")
    for t in ctmc.transitions:
        lines.append(f"{t.source}\t{t.target}\t{t.rate:.17g}\t{t.kind.glyph}\t{t.label}")
    return "\n".join(lines) + "\n"


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(ctmc: Ctmc) -> str:
    """Graphviz digraph with rate-labelled edges."""
    lines = ["digraph ctmc {", "  rankdir=LR;"]
    for i, state in enumerate(ctmc.states):
        shape = "doublecircle" if i == ctmc.initial else "circle"
        lines.append(f"  s{i} [shape={shape} label={_dot_quote(render_model(state))}];")
    for t in ctmc.transitions:
        label = f"{t.kind.glyph}{t.label} {t.rate:.17g}"
        lines.append(f"  s{t.source} -> s{t.target} [label={_dot_quote(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
