"""Switched networks driven by independent Markovian edges.

Every potential edge of an undirected graph carries its own finite-state
continuous-time Markov chain, independent of all the others.  Binary edges
flip between absent (0) and present (1) with an appearance rate and a
disappearance rate; weighted edges move over a finite set of weights in
[0, 1] under an arbitrary conservative generator.  Because the chains are
independent, the stationary law of the whole graph factorizes over edges,
and the first two stationary moments of the adjacency matrix are cheap to
compute even when the joint configuration space is astronomically large.

Those moments -- the expected adjacency matrix ``abar``, the entrywise
variances, and the largest variance row sum -- are the inputs to every
stability test in this package.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

# Dense stationary moments beyond this size are refused; use the structured
# ensembles, which never materialize n x n matrices.
DENSE_N_CAP = 20_000


class SpecFormatError(ValueError):
    """Raised when a network description (dict or JSON file) is malformed."""


@dataclass(frozen=True)
class EdgeChain:
    """On/off Markov chain attached to one potential edge {i, j}.

    ``p_rate`` is the appearance rate (0 -> 1), ``q_rate`` the disappearance
    rate (1 -> 0).  Vertex indices are 1-based and stored with i < j; the
    constructor swaps them if needed.  ``p_rate + q_rate`` must be positive
    so the chain has a unique stationary law.
    """

    i: int
    j: int
    p_rate: float
    q_rate: float

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise ValueError(f"self-loop edge ({self.i}, {self.j}) is not allowed")
        if self.i < 1 or self.j < 1:
            raise ValueError(f"vertex indices must be >= 1, got ({self.i}, {self.j})")
        if self.i > self.j:
            i, j = self.j, self.i
            object.__setattr__(self, "i", i)
            object.__setattr__(self, "j", j)
        if self.p_rate < 0 or self.q_rate < 0:
            raise ValueError(f"edge ({self.i}, {self.j}): rates must be nonnegative")
        if self.p_rate + self.q_rate <= 0:
            raise ValueError(
                f"edge ({self.i}, {self.j}): p_rate + q_rate must be positive"
            )


@dataclass(frozen=True)
class WeightedEdgeChain:
    """Finite-state weight process attached to one potential edge {i, j}.

    ``states`` lists the possible edge weights, each in [0, 1]; ``generator``
    is the matching conservative rate matrix (rows sum to zero, off-diagonal
    entries nonnegative).  The chain must have a unique stationary law,
    which is checked at construction time.
    """

    i: int
    j: int
    states: tuple[float, ...]
    generator: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise ValueError(f"self-loop edge ({self.i}, {self.j}) is not allowed")
        if self.i < 1 or self.j < 1:
            raise ValueError(f"vertex indices must be >= 1, got ({self.i}, {self.j})")
        if self.i > self.j:
            i, j = self.j, self.i
            object.__setattr__(self, "i", i)
            object.__setattr__(self, "j", j)
        states = tuple(float(w) for w in self.states)
        object.__setattr__(self, "states", states)
        if len(states) < 1:
            raise ValueError(f"edge ({self.i}, {self.j}): needs at least one state")
        for w in states:
            if not (0.0 <= w <= 1.0) or not np.isfinite(w):
                raise ValueError(
                    f"edge ({self.i}, {self.j}): weight {w} outside [0, 1]"
                )
        gen = tuple(tuple(float(x) for x in row) for row in self.generator)
        object.__setattr__(self, "generator", gen)
        k = len(states)
        if len(gen) != k or any(len(row) != k for row in gen):
            raise ValueError(
                f"edge ({self.i}, {self.j}): generator must be {k}x{k} "
                f"to match the {k} states"
            )
        q = np.asarray(gen, dtype=float)
        offdiag = q - np.diag(np.diag(q))
        if offdiag.min(initial=0.0) < 0:
            raise ValueError(
                f"edge ({self.i}, {self.j}): off-diagonal generator entries "
                "must be nonnegative"
            )
        scale = max(1.0, float(np.abs(q).max(initial=0.0)))
        if np.abs(q.sum(axis=1)).max(initial=0.0) > 1e-9 * scale:
            raise ValueError(
                f"edge ({self.i}, {self.j}): generator rows must sum to zero"
            )
        # Fails loudly here rather than deep inside an analysis run.
        _stationary_from_generator(q, label=f"edge ({self.i}, {self.j})")


AnyEdge = Union[EdgeChain, WeightedEdgeChain]


@dataclass(frozen=True)
class SwitchedNetworkSpec:
    """A network of ``n`` vertices plus one independent chain per edge.

    Edges are stored sorted by (i, j) so that any construction that
    enumerates them (joint chains, simulators) is deterministic.  Binary and
    weighted edges cannot be mixed in one spec.
    """

    n: int
    edges: tuple[AnyEdge, ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"need at least one vertex, got n={self.n}")
        edges = tuple(sorted(self.edges, key=lambda e: (e.i, e.j)))
        object.__setattr__(self, "edges", edges)
        kinds = {type(e) for e in edges}
        if len(kinds) > 1:
            raise ValueError("cannot mix binary and weighted edges in one spec")
        seen: set[tuple[int, int]] = set()
        for e in edges:
            if e.j > self.n:
                raise ValueError(
                    f"edge ({e.i}, {e.j}) references a vertex beyond n={self.n}"
                )
            if (e.i, e.j) in seen:
                raise ValueError(f"duplicate edge ({e.i}, {e.j})")
            seen.add((e.i, e.j))

    @property
    def kind(self) -> str:
        """"binary" or "weighted" (an edgeless spec counts as binary)."""
        if self.edges and isinstance(self.edges[0], WeightedEdgeChain):
            return "weighted"
        return "binary"


@dataclass(frozen=True)
class EpidemicParams:
    """Infection rate ``beta`` and recovery rate ``delta``, both positive."""

    beta: float
    delta: float

    def __post_init__(self) -> None:
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise ValueError(f"delta must be positive and finite, got {self.delta}")

    @property
    def threshold(self) -> float:
        """Effective recovery-to-infection ratio delta / beta."""
        return self.delta / self.beta


@dataclass(frozen=True)
class EdgeProcess:
    """Uniform finite-state view of one edge chain.

    ``values[k]`` is the edge weight in state k, ``rate_matrix`` the
    generator, ``stationary`` the stationary law.  Binary chains appear here
    as two-state processes with values (0, 1).
    """

    i: int
    j: int
    values: np.ndarray
    rate_matrix: np.ndarray
    stationary: np.ndarray


def _stationary_from_generator(q: np.ndarray, label: str) -> np.ndarray:
    """Unique stationary law of a conservative generator, via the null space
    of q^T.  Raises if the zero eigenvalue is not simple (several recurrent
    classes) or the null vector is not sign-definite."""
    k = q.shape[0]
    if k == 1:
        return np.ones(1)
    _, svals, vt = np.linalg.svd(q.T)
    tol = max(float(svals[0]), 1.0) * 1e-9
    null_count = int(np.sum(svals <= tol))
    if null_count != 1:
        raise ValueError(
            f"{label}: generator does not have a unique stationary law "
            f"({null_count} null directions)"
        )
    v = vt[-1]
    total = float(v.sum())
    if abs(total) < 1e-12:
        raise ValueError(f"{label}: stationary vector is numerically degenerate")
    pi = v / total
    if pi.min() < -1e-9:
        raise ValueError(f"{label}: stationary vector has negative mass")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_edge_prob(chain: EdgeChain) -> float:
    """Stationary probability p / (p + q) that a binary edge is present."""
    total = chain.p_rate + chain.q_rate
    if total <= 0:
        raise ValueError(
            f"edge ({chain.i}, {chain.j}): p_rate + q_rate must be positive"
        )
    return chain.p_rate / total


def edge_process(edge: AnyEdge) -> EdgeProcess:
    """Normalize a binary or weighted edge chain into an EdgeProcess."""
    if isinstance(edge, EdgeChain):
        p, q = edge.p_rate, edge.q_rate
        rate = np.array([[-p, p], [q, -q]], dtype=float)
        prob = stationary_edge_prob(edge)
        return EdgeProcess(
            i=edge.i,
            j=edge.j,
            values=np.array([0.0, 1.0]),
            rate_matrix=rate,
            stationary=np.array([1.0 - prob, prob]),
        )
    if isinstance(edge, WeightedEdgeChain):
        q = np.asarray(edge.generator, dtype=float)
        pi = _stationary_from_generator(q, label=f"edge ({edge.i}, {edge.j})")
        return EdgeProcess(
            i=edge.i,
            j=edge.j,
            values=np.asarray(edge.states, dtype=float),
            rate_matrix=q,
            stationary=pi,
        )
    raise TypeError(f"not an edge chain: {edge!r}")


def edge_moments(edge: AnyEdge) -> tuple[float, float]:
    """Stationary mean and variance of one edge weight."""
    proc = edge_process(edge)
    mean = float(proc.stationary @ proc.values)
    second = float(proc.stationary @ (proc.values**2))
    var = max(second - mean * mean, 0.0)
    return mean, var


@dataclass(frozen=True)
class StationaryStats:
    """First two stationary moments of the switched adjacency matrix.

    ``abar`` is the expected adjacency matrix (symmetric, zero diagonal,
    entries in [0, 1]); ``var_matrix`` holds the entrywise variances;
    ``delta_uncertainty`` is the largest row sum of ``var_matrix``, the
    scalar that drives the concentration penalty in the stability tests.
    """

    abar: np.ndarray
    var_matrix: np.ndarray
    delta_uncertainty: float
    kind: str


def stationary_stats(spec: SwitchedNetworkSpec) -> StationaryStats:
    """Dense stationary moments of a switched network.

    Cost is O(n^2) memory; refuses n > DENSE_N_CAP.  For large structured
    ensembles use the closed forms in :mod:`epinet.ensembles` instead.
    """
    if spec.n > DENSE_N_CAP:
        raise ValueError(
            f"n={spec.n} exceeds the dense cap {DENSE_N_CAP}; "
            "use a structured ensemble"
        )
    abar = np.zeros((spec.n, spec.n))
    var = np.zeros((spec.n, spec.n))
    for edge in spec.edges:
        mean, v = edge_moments(edge)
        a, b = edge.i - 1, edge.j - 1
        abar[a, b] = abar[b, a] = mean
        var[a, b] = var[b, a] = v
    delta_u = float(var.sum(axis=1).max(initial=0.0))
    return StationaryStats(
        abar=abar, var_matrix=var, delta_uncertainty=delta_u, kind=spec.kind
    )


# ---------------------------------------------------------------------------
# JSON round-trip.  Binary edge: {"i", "j", "p", "q"}.  Weighted edge:
# {"i", "j", "states", "generator"}.  Top level: {"n", "edges"}.

def spec_from_dict(data: dict) -> SwitchedNetworkSpec:
    if not isinstance(data, dict):
        raise SpecFormatError(f"expected a JSON object, got {type(data).__name__}")
    try:
        n = int(data["n"])
    except KeyError:
        raise SpecFormatError("missing field 'n'") from None
    except (TypeError, ValueError):
        raise SpecFormatError(f"field 'n' must be an integer, got {data['n']!r}") from None
    raw_edges = data.get("edges", [])
    if not isinstance(raw_edges, list):
        raise SpecFormatError("field 'edges' must be a list")
    edges: list[AnyEdge] = []
    for idx, item in enumerate(raw_edges):
        where = f"edges[{idx}]"
        if not isinstance(item, dict):
            raise SpecFormatError(f"{where}: expected an object")
        try:
            i, j = int(item["i"]), int(item["j"])
        except KeyError as exc:
            raise SpecFormatError(f"{where}: missing field {exc}") from None
        except (TypeError, ValueError):
            raise SpecFormatError(f"{where}: 'i' and 'j' must be integers") from None
        try:
            if "states" in item or "generator" in item:
                edges.append(
                    WeightedEdgeChain(
                        i=i,
                        j=j,
                        states=tuple(item["states"]),
                        generator=tuple(tuple(row) for row in item["generator"]),
                    )
                )
            else:
                edges.append(
                    EdgeChain(
                        i=i, j=j, p_rate=float(item["p"]), q_rate=float(item["q"])
                    )
                )
        except KeyError as exc:
            raise SpecFormatError(f"{where}: missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise SpecFormatError(f"{where}: {exc}") from None
    try:
        return SwitchedNetworkSpec(n=n, edges=tuple(edges))
    except ValueError as exc:
        raise SpecFormatError(str(exc)) from None


def spec_to_dict(spec: SwitchedNetworkSpec) -> dict:
    edges: list[dict] = []
    for e in spec.edges:
        if isinstance(e, EdgeChain):
            edges.append({"i": e.i, "j": e.j, "p": e.p_rate, "q": e.q_rate})
        else:
            edges.append(
                {
                    "i": e.i,
                    "j": e.j,
                    "states": list(e.states),
                    "generator": [list(row) for row in e.generator],
                }
            )
    return {"n": spec.n, "edges": edges}


def load_spec(path: Union[str, Path]) -> SwitchedNetworkSpec:
    """Read a switched-network description from a JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"{path}: invalid JSON ({exc})") from None
    return spec_from_dict(data)


def save_spec(spec: SwitchedNetworkSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n")
