"""Core term representation for PALOMA models.

A model is a parallel composition of located sequential agents. Each agent is
built from prefix-guarded behaviour (unicast/broadcast output, unicast/broadcast
input, or a spontaneous action), choice between behaviours, and named constants
that tie the recursion. Every agent carries an explicit location in the plane;
message prefixes carry an influence range, the set of locations a message can
reach.

All values here are immutable and hashable, so terms can serve directly as
dictionary keys for state-space exploration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

__all__ = [
    "ActionId",
    "ActionType",
    "BroadcastIn",
    "BroadcastOut",
    "Choice",
    "ConstantRef",
    "Definitions",
    "EMPTY",
    "Location",
    "ModelComponent",
    "ModelError",
    "Prefix",
    "PrefixGuarded",
    "SeqComponent",
    "Spontaneous",
    "UnicastIn",
    "UnicastOut",
    "action_labels",
    "canonical",
    "choice_leaves",
    "constant",
    "guarded",
    "locations_of",
    "remove_at",
    "render_model",
    "render_prefix",
    "render_seq",
    "seq_in",
    "struct_equiv",
]


class ModelError(Exception):
    """Malformed term: dangling constant, unguarded recursion, bad index."""


class ActionType(enum.Enum):
    SPONTANEOUS = "."
    BROADCAST_OUT = "!"
    BROADCAST_IN = "?"
    UNICAST_OUT = "!!"
    UNICAST_IN = "??"

    @property
    def glyph(self) -> str:
        return self.value


@dataclass(frozen=True)
class ActionId:
    """An action identifier: a type glyph plus a message label."""

    act_type: ActionType
    label: str

    @property
    def text(self) -> str:
        if self.act_type is ActionType.SPONTANEOUS:
            return self.label
        return self.act_type.glyph + self.label

    @staticmethod
    def parse(text: str) -> "ActionId":
        """Parse an action string such as ``!!move``, ``?ping`` or ``tick``."""
        for act_type in (ActionType.UNICAST_OUT, ActionType.UNICAST_IN,
                         ActionType.BROADCAST_OUT, ActionType.BROADCAST_IN):
            if text.startswith(act_type.glyph):
                label = text[len(act_type.glyph):]
                break
        else:
            act_type, label = ActionType.SPONTANEOUS, text
        if not label.isidentifier():
            raise ModelError(f"invalid action label: {label!r}")
        return ActionId(act_type, label)


@dataclass(frozen=True)
class Location:
    """A named point in the plane. Identity is by name alone."""

    name: str
    point: tuple[float, float] = field(compare=False)


# The influence range of a message prefix, expanded to concrete locations.
InfluenceRange = frozenset[Location]


@dataclass(frozen=True)
class UnicastOut:
    label: str
    rate: float
    influence: InfluenceRange

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise ModelError(f"unicast rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class UnicastIn:
    label: str
    act_prob: float
    weight: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.act_prob <= 1.0:
            raise ModelError(f"act probability out of range: {self.act_prob}")
        if not self.weight > 0:
            raise ModelError(f"receive weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class BroadcastOut:
    label: str
    rate: float
    influence: InfluenceRange

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise ModelError(f"broadcast rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class BroadcastIn:
    label: str
    act_prob: float
    recv_prob: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.act_prob <= 1.0:
            raise ModelError(f"act probability out of range: {self.act_prob}")
        if not 0.0 <= self.recv_prob <= 1.0:
            raise ModelError(f"receive probability out of range: {self.recv_prob}")


@dataclass(frozen=True)
class Spontaneous:
    label: str
    rate: float

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise ModelError(f"rate must be positive, got {self.rate}")


Prefix = Union[UnicastOut, UnicastIn, BroadcastOut, BroadcastIn, Spontaneous]

_PREFIX_TYPES = {
    UnicastOut: ActionType.UNICAST_OUT,
    UnicastIn: ActionType.UNICAST_IN,
    BroadcastOut: ActionType.BROADCAST_OUT,
    BroadcastIn: ActionType.BROADCAST_IN,
    Spontaneous: ActionType.SPONTANEOUS,
}


def prefix_action(prefix: Prefix) -> ActionId:
    return ActionId(_PREFIX_TYPES[type(prefix)], prefix.label)


@dataclass(frozen=True)
class ConstantRef:
    """Reference to a defining equation, keyed by (name, location)."""

    name: str
    location: Location


@dataclass(frozen=True)
class PrefixGuarded:
    prefix: Prefix
    continuation: ConstantRef


@dataclass(frozen=True)
class Choice:
    left: "SeqComponent"
    right: "SeqComponent"


SeqBody = Union[PrefixGuarded, Choice, ConstantRef]


@dataclass(frozen=True)
class SeqComponent:
    """A single located agent: a behaviour body tagged with its location."""

    body: SeqBody
    location: Location


# Parallel composition, in written order. The empty tuple is the empty
# context; it is never a standalone system.
ModelComponent = tuple[SeqComponent, ...]

EMPTY: ModelComponent = ()


def constant(name: str, location: Location) -> SeqComponent:
    return SeqComponent(ConstantRef(name, location), location)


def guarded(prefix: Prefix, continuation: ConstantRef, location: Location) -> SeqComponent:
    return SeqComponent(PrefixGuarded(prefix, continuation), location)


def choice(left: SeqComponent, right: SeqComponent) -> SeqComponent:
    if left.location != right.location:
        raise ModelError(
            f"choice operands must share a location: "
            f"{left.location.name} vs {right.location.name}")
    return SeqComponent(Choice(left, right), left.location)


@dataclass
class Definitions:
    """Declared locations and constant-defining equations of one model."""

    locations: dict[str, Location]
    equations: dict[tuple[str, str], SeqComponent]

    def all_locations(self) -> frozenset[Location]:
        return frozenset(self.locations.values())

    def lookup(self, ref: ConstantRef) -> SeqComponent:
        key = (ref.name, ref.location.name)
        try:
            return self.equations[key]
        except KeyError:
            raise ModelError(
                f"no defining equation for {ref.name}({ref.location.name})") from None

    def resolve(self, comp: SeqComponent) -> SeqComponent:
        """Unfold constant references down to prefixes, through choice.

        Continuations under a prefix stay symbolic, so the result is a
        canonical form suitable for comparing and hashing states.
        """
        return self._resolve(comp, ())

    def _resolve(self, comp: SeqComponent, trail: tuple) -> SeqComponent:
        body = comp.body
        if isinstance(body, ConstantRef):
            key = (body.name, body.location.name)
            if key in trail:
                raise ModelError(
                    "unguarded recursion through constant "
                    f"{body.name}({body.location.name})")
            return self._resolve(self.lookup(body), trail + (key,))
        if isinstance(body, Choice):
            left = self._resolve(body.left, trail)
            right = self._resolve(body.right, trail)
            return SeqComponent(Choice(left, right), comp.location)
        return comp


def locations_of(component: ModelComponent | SeqComponent) -> frozenset[Location]:
    """Set of locations occupied by the agents of a component."""
    if isinstance(component, SeqComponent):
        return frozenset((component.location,))
    return frozenset(part.location for part in component)


def seq_in(component: ModelComponent,
           locations: Iterable[Location] | None = None) -> list[SeqComponent]:
    """Agents of ``component`` located in ``locations``, in written order.

    ``None`` selects every agent. Duplicates are kept: weights and rates sum
    over occurrences.
    """
    if locations is None:
        return list(component)
    wanted = frozenset(locations)
    return [part for part in component if part.location in wanted]


def remove_at(component: ModelComponent, index: int) -> ModelComponent:
    """Drop the agent at ``index``, keeping the order of the rest."""
    if not 0 <= index < len(component):
        raise ModelError(f"component index {index} out of range 0..{len(component) - 1}")
    return component[:index] + component[index + 1:]


def canonical(defs: Definitions, component: ModelComponent) -> ModelComponent:
    """Canonical key for a system state: each agent constant-resolved."""
    return tuple(defs.resolve(part) for part in component)


def struct_equiv(defs: Definitions,
                 left: ModelComponent | SeqComponent,
                 right: ModelComponent | SeqComponent) -> bool:
    """Syntactic equivalence of terms, identifying constants with their bodies.

    Parallel composition compares position by position; no reordering.
    """
    if isinstance(left, SeqComponent) != isinstance(right, SeqComponent):
        return False
    if isinstance(left, SeqComponent):
        return defs.resolve(left) == defs.resolve(right)
    return canonical(defs, left) == canonical(defs, right)


def choice_leaves(defs: Definitions, comp: SeqComponent) -> Iterator[PrefixGuarded]:
    """The prefix-guarded alternatives of an agent, left to right."""
    return iter(_leaves_in_order(defs.resolve(comp)))


def _leaves_in_order(comp: SeqComponent) -> list[PrefixGuarded]:
    body = comp.body
    if isinstance(body, Choice):
        return _leaves_in_order(body.left) + _leaves_in_order(body.right)
    if isinstance(body, PrefixGuarded):
        return [body]
    raise ModelError("unresolved constant in canonical form")


def action_labels(defs: Definitions) -> list[str]:
    """Every action label mentioned by the model's equations, sorted."""
    labels: set[str] = set()
    for body in defs.equations.values():
        stack: list[SeqComponent] = [body]
        while stack:
            inner = stack.pop().body
            if isinstance(inner, PrefixGuarded):
                labels.add(inner.prefix.label)
            elif isinstance(inner, Choice):
                stack.append(inner.left)
                stack.append(inner.right)
    return sorted(labels)


def format_number(value: float) -> str:
    return repr(float(value))


def render_prefix(prefix: Prefix, all_locations: frozenset[Location] | None = None) -> str:
    def render_range(influence: InfluenceRange) -> str:
        if all_locations is not None and influence == all_locations:
            return "all"
        return ", ".join(sorted(loc.name for loc in influence))

    num = format_number
    if isinstance(prefix, UnicastOut):
        return f"!!({prefix.label}, {num(prefix.rate)})@Ir{{{render_range(prefix.influence)}}}"
    if isinstance(prefix, UnicastIn):
        return f"??({prefix.label}, {num(prefix.act_prob)})@Wt{{{num(prefix.weight)}}}"
    if isinstance(prefix, BroadcastOut):
        return f"!({prefix.label}, {num(prefix.rate)})@Ir{{{render_range(prefix.influence)}}}"
    if isinstance(prefix, BroadcastIn):
        return f"?({prefix.label}, {num(prefix.act_prob)})@Prob{{{num(prefix.recv_prob)}}}"
    return f"({prefix.label}, {num(prefix.rate)})"


def render_seq(comp: SeqComponent, all_locations: frozenset[Location] | None = None) -> str:
    body = comp.body
    if isinstance(body, ConstantRef):
        return f"{body.name}({body.location.name})"
    if isinstance(body, PrefixGuarded):
        cont = body.continuation
        return (f"{render_prefix(body.prefix, all_locations)}"
                f".{cont.name}({cont.location.name})")
    return (f"{render_seq(body.left, all_locations)} + "
            f"{render_seq(body.right, all_locations)}")


def render_model(component: ModelComponent,
                 all_locations: frozenset[Location] | None = None) -> str:
    if not component:
        return "empty"
    return " || ".join(render_seq(part, all_locations) for part in component)
