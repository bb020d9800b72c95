"""Death and duplication events: patch construction, validation, application.

A critical event touches only the subject agent's local patch: the involved
agents Lambda and the replacement edges Eps. Validation enforces the local
conditions that make any validated patch preserve global connectivity when
the prior graph was connected.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .errors import ConfigError, RuleViolationError
from .graph import Edge, Topology, is_locally_connected, norm_edge
from .protocol import SystemState
from .streams import SplitMix


class EventKind(enum.Enum):
    DEATH = "death"
    DUPLICATION = "duplication"


@dataclass(frozen=True)
class TopologyPatch:
    """One death or duplication described locally.

    Death: `inherit` maps each neighbor j of the subject to the neighbor set
    it inherits from the dying agent. Duplication: `children` are the two
    fresh ids, `lam_a`/`lam_b` their neighbor sets and (`alpha`, `beta`)
    the state split with alpha >= beta > 0 and alpha + beta = B.
    """

    kind: EventKind
    subject: int
    lam: frozenset[int]
    eps: frozenset[Edge]
    inherit: dict[int, frozenset[int]] | None = None
    children: tuple[int, int] | None = None
    lam_a: frozenset[int] | None = None
    lam_b: frozenset[int] | None = None
    alpha: int | None = None
    beta: int | None = None


@dataclass
class CriticalEventRecord:
    """Replayable description of one applied event."""

    epoch: int
    tick: int
    kind: EventKind
    subject: int
    children: tuple[int, int] | None = None
    alpha: int | None = None
    beta: int | None = None
    inherit: dict[int, list[int]] | None = None
    lam_a: list[int] | None = None
    lam_b: list[int] | None = None
    eps: list[Edge] = field(default_factory=list)

    def to_json(self) -> str:
        d = {
            "t": "event",
            "epoch": self.epoch,
            "tick": self.tick,
            "kind": self.kind.value,
            "subject": self.subject,
            "eps": [list(e) for e in self.eps],
        }
        if self.kind is EventKind.DEATH:
            d["inherit"] = {str(j): sorted(v) for j, v in sorted(self.inherit.items())}
        else:
            d.update(
                children=list(self.children),
                alpha=self.alpha,
                beta=self.beta,
                lam_a=self.lam_a,
                lam_b=self.lam_b,
            )
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CriticalEventRecord":
        kind = EventKind(d["kind"])
        return cls(
            epoch=d["epoch"],
            tick=d["tick"],
            kind=kind,
            subject=d["subject"],
            children=tuple(d["children"]) if d.get("children") else None,
            alpha=d.get("alpha"),
            beta=d.get("beta"),
            inherit={int(j): v for j, v in d["inherit"].items()} if d.get("inherit") else None,
            lam_a=d.get("lam_a"),
            lam_b=d.get("lam_b"),
            eps=[norm_edge(*e) for e in d["eps"]],
        )


# -- state split -----------------------------------------------------------


def split_state(b: int, policy: str | int = "half") -> tuple[int, int]:
    """Children state split (alpha, beta) with alpha >= beta > 0, alpha+beta=B.

    "half" gives (ceil(B/2), floor(B/2)); an integer policy fixes alpha.
    """
    if b < 2:
        raise ConfigError(f"split_state requires B >= 2, got {b}")
    if policy == "half":
        alpha = (b + 1) // 2
    else:
        alpha = int(policy)
    beta = b - alpha
    if not (alpha >= beta > 0):
        raise ConfigError(f"invalid split alpha={alpha} for B={b}: need alpha >= beta > 0")
    return alpha, beta


# -- death rules -----------------------------------------------------------


def death_star_rule(subject: int, neighbors: set[int], jstar: int) -> TopologyPatch:
    """All of the dead agent's connections go to one picked neighbor j*.

    The patch is a star centered at j*, so it is always locally connected
    and every neighbor inherits something (j* itself for the others).
    """
    if jstar not in neighbors:
        raise RuleViolationError(f"j*={jstar} is not a neighbor of {subject}")
    inherit = {j: frozenset({jstar}) if j != jstar else frozenset(neighbors - {jstar}) for j in neighbors}
    eps = frozenset(norm_edge(jstar, j) for j in neighbors if j != jstar)
    return TopologyPatch(
        kind=EventKind.DEATH,
        subject=subject,
        lam=frozenset(neighbors),
        eps=eps,
        inherit=inherit,
    )


def death_clique_rule(subject: int, neighbors: set[int]) -> TopologyPatch:
    """Every pair of the dead agent's neighbors gets an edge.

    A denser admissible alternative to the star rule; with a single
    neighbor the patch is a trivially-connected singleton with no edges.
    """
    nbs = sorted(neighbors)
    inherit = {j: frozenset(neighbors - {j}) for j in neighbors}
    eps = frozenset(norm_edge(u, v) for k, u in enumerate(nbs) for v in nbs[k + 1 :])
    return TopologyPatch(
        kind=EventKind.DEATH,
        subject=subject,
        lam=frozenset(neighbors),
        eps=eps,
        inherit=inherit,
    )


def pick_jstar(neighbors: set[int], x: dict[int, int], policy: str, rng: SplitMix | None = None) -> int:
    """Choose the inheriting neighbor: max state (ties -> smallest id) or seeded-random."""
    if policy == "max_state":
        return min(neighbors, key=lambda j: (-x[j], j))
    if policy == "random":
        return rng.choice(sorted(neighbors))
    raise ConfigError(f"unknown j* policy {policy!r}")


# -- duplication rules -----------------------------------------------------


def _dup_patch(subject: int, neighbors: set[int], children: tuple[int, int],
               lam_a: frozenset[int], lam_b: frozenset[int],
               alpha: int, beta: int) -> TopologyPatch:
    c1, c2 = children
    eps = frozenset(norm_edge(c1, i) for i in lam_a) | frozenset(norm_edge(c2, i) for i in lam_b)
    return TopologyPatch(
        kind=EventKind.DUPLICATION,
        subject=subject,
        lam=frozenset(neighbors) | {c1, c2},
        eps=eps,
        children=children,
        lam_a=lam_a,
        lam_b=lam_b,
        alpha=alpha,
        beta=beta,
    )


def dup_partition_rule(subject: int, neighbors: set[int], children: tuple[int, int],
                       alpha: int, beta: int, rng: SplitMix) -> TopologyPatch:
    """Split the parent's neighbors between the two interconnected children.

    One child takes a random half-size subset (floor(|N|/2) elements) plus
    its sibling; the other takes the rest plus its sibling. Degrees of
    bystanders never change, which is what keeps holes and chains invariant.
    """
    c1, c2 = children
    k = len(neighbors) // 2
    picked = set(rng.sample(sorted(neighbors), k))
    lam_a = frozenset(picked) | {c2}
    lam_b = frozenset(neighbors - picked) | {c1}
    return _dup_patch(subject, neighbors, children, lam_a, lam_b, alpha, beta)


def dup_full_rule(subject: int, neighbors: set[int], children: tuple[int, int],
                  alpha: int, beta: int) -> TopologyPatch:
    """Both children inherit every parent connection and link to each other.

    Keeps complete networks complete and tends to densify anything else.
    """
    c1, c2 = children
    lam_a = frozenset(neighbors) | {c2}
    lam_b = frozenset(neighbors) | {c1}
    return _dup_patch(subject, neighbors, children, lam_a, lam_b, alpha, beta)


# -- validation ------------------------------------------------------------


def validate_patch(p: TopologyPatch, g: Topology, b: int) -> str | None:
    """Check every patch invariant; return the first violated condition's name.

    Returns None when the patch is admissible. Never mutates anything.
    """
    if p.subject not in g:
        return "subject-not-in-graph"
    neighbors = g.neighbors(p.subject)

    if p.kind is EventKind.DEATH:
        if p.lam != frozenset(neighbors):
            return "death-lam-mismatch"
        if p.inherit is None or set(p.inherit) != neighbors:
            return "death-inherit-domain"
        for j, lj in p.inherit.items():
            if not lj <= neighbors - {j}:
                return "death-inherit-range"
        derived = {norm_edge(j, i) for j, lj in p.inherit.items() for i in lj}
        if derived != set(p.eps):
            return "death-eps-mismatch"
        if len(p.lam) > 1:
            union = frozenset().union(*p.inherit.values())
            if union != p.lam:
                return "death-union-cover"
        if not is_locally_connected(p.lam, p.eps):
            return "death-local-connectivity"
        return None

    # duplication
    c1, c2 = p.children
    if c1 in g or c2 in g or c1 == c2:
        return "dup-children-not-fresh"
    if p.lam != frozenset(neighbors) | {c1, c2}:
        return "dup-lam-mismatch"
    if p.lam_a is None or p.lam_b is None:
        return "dup-missing-child-sets"
    allowed_a = frozenset(neighbors) | {c2}
    allowed_b = frozenset(neighbors) | {c1}
    if not p.lam_a <= allowed_a or not p.lam_b <= allowed_b:
        return "dup-child-set-range"
    union = p.lam_a | p.lam_b
    first_alt = union == p.lam
    second_alt = union == frozenset(neighbors) and bool(p.lam_a & p.lam_b)
    if not (first_alt or second_alt):
        return "dup-union-rule"
    derived = {norm_edge(c1, i) for i in p.lam_a} | {norm_edge(c2, i) for i in p.lam_b}
    if derived != set(p.eps):
        return "dup-eps-mismatch"
    if p.alpha is None or p.beta is None or p.alpha + p.beta != b:
        return "dup-split-sum"
    if not (p.alpha >= p.beta > 0):
        return "dup-split-order"
    return None


# -- application -----------------------------------------------------------


def apply_death(s: SystemState, subject: int, p: TopologyPatch) -> tuple[SystemState, CriticalEventRecord]:
    """Remove the dead subject, wire in the inherited edges, bump the epoch.

    Survivor states are untouched, so the state total is preserved exactly.
    """
    if s.x[subject] != 0:
        raise RuleViolationError(f"agent {subject} is not at the zero threshold")
    violation = validate_patch(p, s.g, s.b)
    if violation:
        raise RuleViolationError(f"death patch rejected: {violation}")
    out = s.clone()
    out.g.remove_node(subject)
    for u, v in p.eps:
        out.g.add_edge(u, v)
    del out.x[subject]
    out.epoch += 1
    rec = CriticalEventRecord(
        epoch=out.epoch,
        tick=out.tick,
        kind=EventKind.DEATH,
        subject=subject,
        inherit={j: sorted(v) for j, v in p.inherit.items()},
        eps=sorted(p.eps),
    )
    return out, rec


def apply_duplication(s: SystemState, subject: int, p: TopologyPatch) -> tuple[SystemState, CriticalEventRecord]:
    """Retire the parent at B, insert the two children with states alpha, beta."""
    if s.x[subject] != s.b:
        raise RuleViolationError(f"agent {subject} is not at the upper threshold")
    violation = validate_patch(p, s.g, s.b)
    if violation:
        raise RuleViolationError(f"duplication patch rejected: {violation}")
    c1, c2 = p.children
    out = s.clone()
    out.g.remove_node(subject)
    out.g.add_node(c1)
    out.g.add_node(c2)
    for u, v in p.eps:
        out.g.add_edge(u, v)
    del out.x[subject]
    out.x[c1] = p.alpha
    out.x[c2] = p.beta
    out.epoch += 1
    rec = CriticalEventRecord(
        epoch=out.epoch,
        tick=out.tick,
        kind=EventKind.DUPLICATION,
        subject=subject,
        children=(c1, c2),
        alpha=p.alpha,
        beta=p.beta,
        lam_a=sorted(p.lam_a),
        lam_b=sorted(p.lam_b),
        eps=sorted(p.eps),
    )
    return out, rec
