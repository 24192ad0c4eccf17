"""Weighted directed influence graphs for the discrete Bass model.

A :class:`Network` stores the external adoption rates ``p`` and the
internal influence rates ``q[i][j]`` (adopted node ``i`` pushes
nonadopter ``j``) as an edge list sorted by destination node.  Values are
immutable once constructed and may be shared freely between workers.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "NetworkError",
    "Structure",
    "Network",
    "MildHetSpec",
    "build_complete",
    "build_custom",
    "build_one_sided_circle",
    "build_two_sided_circle",
    "build_cartesian_torus",
    "homogeneous_counterpart",
    "shift_p",
    "add_node",
    "network_to_json",
    "network_from_json",
    "load_network",
    "save_network",
]


class NetworkError(ValueError):
    """Raised when a network violates a structural or rate invariant."""


class Structure(str, enum.Enum):
    """Advisory structure tag used to dispatch to specialised solvers."""

    COMPLETE = "Complete"
    ONE_SIDED_CIRCLE = "OneSidedCircle"
    TWO_SIDED_CIRCLE = "TwoSidedCircle"
    CARTESIAN_TORUS = "CartesianTorus"
    CUSTOM = "Custom"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Network:
    """Heterogeneous Bass network.

    Parameters
    ----------
    p : array_like, shape (m,)
        External adoption rates, each finite and ``>= 0``.
    src, dst : array_like of int
        Edge endpoints; edge ``e`` means ``src[e]`` influences ``dst[e]``.
    rate : array_like of float
        Edge weights ``q[src][dst]``.  Zero-weight edges are dropped.
    structure : Structure
        Advisory tag.  The edge pattern is checked against it.
    torus : tuple of (d, side), optional
        Lattice shape, required when ``structure`` is ``CARTESIAN_TORUS``.
    allow_uninfluenced : bool
        Waive the requirement that every node has positive in-influence.
        Some small textbook networks contain nodes that nobody influences.

    Notes
    -----
    Edges are stored sorted by ``(dst, src)`` so that the incoming edges of
    node ``j`` are ``slice(in_ptr[j], in_ptr[j + 1])``.
    """

    p: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    rate: np.ndarray
    structure: Structure = Structure.CUSTOM
    torus: tuple[int, int] | None = None
    allow_uninfluenced: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64).ravel()
        src = np.asarray(self.src, dtype=np.int64).ravel()
        dst = np.asarray(self.dst, dtype=np.int64).ravel()
        rate = np.asarray(self.rate, dtype=np.float64).ravel()
        m = p.size
        if m < 1:
            raise NetworkError("a network needs at least one node")
        if not (src.size == dst.size == rate.size):
            raise NetworkError("src, dst and rate must have equal length")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise NetworkError("external rates p must be finite and >= 0")
        if not np.all(np.isfinite(rate)) or np.any(rate < 0):
            raise NetworkError("influence rates must be finite and >= 0")
        if src.size and (src.min() < 0 or src.max() >= m or dst.min() < 0 or dst.max() >= m):
            raise NetworkError("edge index out of range")
        if np.any(src == dst):
            raise NetworkError("self influence q[i][i] is not allowed")
        keep = rate > 0
        src, dst, rate = src[keep], dst[keep], rate[keep]
        order = np.lexsort((src, dst))
        src, dst, rate = src[order], dst[order], rate[order]
        if src.size > 1:
            dup = (np.diff(dst) == 0) & (np.diff(src) == 0)
            if np.any(dup):
                e = int(np.flatnonzero(dup)[0])
                raise NetworkError(f"duplicate edge ({src[e]}, {dst[e]})")
        structure = Structure(self.structure)
        object.__setattr__(self, "p", _readonly(p))
        object.__setattr__(self, "src", _readonly(src))
        object.__setattr__(self, "dst", _readonly(dst))
        object.__setattr__(self, "rate", _readonly(rate))
        object.__setattr__(self, "structure", structure)
        if self.torus is not None:
            object.__setattr__(self, "torus", (int(self.torus[0]), int(self.torus[1])))
        if not self.allow_uninfluenced:
            qin = self.in_influence
            if np.any(qin <= 0):
                j = int(np.flatnonzero(qin <= 0)[0])
                raise NetworkError(f"node {j} has zero in-influence")
        self._check_pattern()

    # ------------------------------------------------------------------ views
    @property
    def m(self) -> int:
        """Number of nodes."""
        return int(self.p.size)

    @property
    def n_edges(self) -> int:
        return int(self.rate.size)

    @cached_property
    def in_ptr(self) -> np.ndarray:
        """CSR row pointer over destinations."""
        ptr = np.zeros(self.m + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.dst, minlength=self.m), out=ptr[1:])
        return _readonly(ptr)

    @cached_property
    def out_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Out-edge CSR ``(ptr, dst, rate)`` keyed by source node."""
        order = np.lexsort((self.dst, self.src))
        ptr = np.zeros(self.m + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.src, minlength=self.m), out=ptr[1:])
        return _readonly(ptr), _readonly(self.dst[order]), _readonly(self.rate[order])

    @cached_property
    def in_influence(self) -> np.ndarray:
        """In-influence ``q_j``, the sum of ``q[k][j]`` over ``k``."""
        return _readonly(np.bincount(self.dst, weights=self.rate, minlength=self.m))

    @cached_property
    def out_influences(self) -> np.ndarray:
        """Out-influence ``q^k`` of every node, the row sums of ``q``."""
        return _readonly(np.bincount(self.src, weights=self.rate, minlength=self.m))

    def out_influence(self, k: int) -> float:
        """Total rate at which node ``k`` pushes all other nodes once adopted."""
        return float(self.out_influences[k])

    def q_dense(self) -> np.ndarray:
        """Dense ``m x m`` copy of the influence matrix."""
        q = np.zeros((self.m, self.m))
        q[self.src, self.dst] = self.rate
        return q

    def edges(self) -> list[tuple[int, int, float]]:
        """Edge list ``[(i, j, q_ij), ...]`` in storage order."""
        return [(int(i), int(j), float(r)) for i, j, r in zip(self.src, self.dst, self.rate)]

    def same_as(self, other: "Network") -> bool:
        """Exact equality of rates, edges and tags."""
        return (
            self.m == other.m
            and self.structure == other.structure
            and self.torus == other.torus
            and np.array_equal(self.p, other.p)
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.rate, other.rate)
        )

    # ------------------------------------------------------------- validation
    def _check_pattern(self) -> None:
        m, s, d = self.m, self.src, self.dst
        tag = self.structure
        if tag is Structure.CARTESIAN_TORUS:
            if self.torus is None:
                raise NetworkError("CartesianTorus networks need a (d, side) shape")
            dim, side = self.torus
            if side ** dim != m:
                raise NetworkError("CartesianTorus requires m = side**d")
            cs = np.array(np.unravel_index(s, (side,) * dim))
            cd = np.array(np.unravel_index(d, (side,) * dim))
            diff = (cd - cs) % side
            step = np.minimum(diff, side - diff)
            ok = (step.sum(axis=0) == 1) if s.size else np.array([], dtype=bool)
            if not np.all(ok):
                raise NetworkError("CartesianTorus edges must join lattice neighbours")
            return
        if self.torus is not None:
            raise NetworkError("torus shape given for a non-torus structure")
        if tag is Structure.ONE_SIDED_CIRCLE:
            if np.any((d - s) % m != 1):
                raise NetworkError("OneSidedCircle edges must go from j-1 to j")
        elif tag is Structure.TWO_SIDED_CIRCLE:
            if m < 3:
                raise NetworkError("TwoSidedCircle needs m >= 3")
            delta = (d - s) % m
            if np.any((delta != 1) & (delta != m - 1)):
                raise NetworkError("TwoSidedCircle edges must join circle neighbours")
        elif tag is Structure.COMPLETE:
            if m < 2:
                raise NetworkError("Complete networks need m >= 2")
            q = self.q_dense()
            cols = np.zeros_like(q)
            off = ~np.eye(m, dtype=bool)
            cols[off] = (q.sum(axis=0, keepdims=True) / (m - 1) * np.ones((m, 1)))[off]
            if not np.allclose(q, cols, rtol=1e-12, atol=0.0):
                raise NetworkError("Complete networks must have uniform incoming weights per node")


@dataclass(frozen=True)
class MildHetSpec:
    """Parameters of a mildly heterogeneous complete network.

    Each incoming edge of node ``j`` carries ``q_node[j] / (m - 1)``.
    """

    p: np.ndarray
    q_node: np.ndarray
    allow_uninfluenced: bool = False

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64).ravel()
        qn = np.asarray(self.q_node, dtype=np.float64).ravel()
        if p.shape != qn.shape:
            raise NetworkError("p and q_node must have equal length")
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(~np.isfinite(qn)) or np.any(qn < 0):
            raise NetworkError("rates must be finite and >= 0")
        if not self.allow_uninfluenced and np.any(qn <= 0):
            raise NetworkError("every q_node entry must be positive")
        object.__setattr__(self, "p", _readonly(p))
        object.__setattr__(self, "q_node", _readonly(qn))

    @property
    def m(self) -> int:
        return int(self.p.size)

    @classmethod
    def homogeneous(cls, m: int, p: float, q: float) -> "MildHetSpec":
        return cls(np.full(m, float(p)), np.full(m, float(q)))


# ---------------------------------------------------------------- builders
def build_complete(spec: MildHetSpec) -> Network:
    """Complete directed graph with ``q[i][j] = q_node[j] / (m - 1)``.

    Examples
    --------
    >>> net = build_complete(MildHetSpec.homogeneous(3, 0.1, 0.4))
    >>> float(net.q_dense()[0, 1])
    0.2
    """
    m = spec.m
    if m < 2:
        raise NetworkError("complete networks need m >= 2")
    src, dst = np.nonzero(~np.eye(m, dtype=bool))
    rate = spec.q_node[dst] / (m - 1)
    return Network(spec.p, src, dst, rate, Structure.COMPLETE,
                   allow_uninfluenced=spec.allow_uninfluenced)


def build_custom(
    p: Sequence[float],
    q_entries: Iterable[tuple[int, int, float]],
    *,
    allow_uninfluenced: bool = False,
) -> Network:
    """Arbitrary network from an edge list ``[(i, j, q_ij), ...]``."""
    entries = list(q_entries)
    if entries:
        arr = np.asarray(entries, dtype=np.float64).reshape(-1, 3)
        src, dst, rate = arr[:, 0], arr[:, 1], arr[:, 2]
        if np.any(src != np.round(src)) or np.any(dst != np.round(dst)):
            raise NetworkError("edge indices must be integers")
        # reject exact duplicates here too, zero weights included
        pairs = set()
        for i, j in zip(src.astype(np.int64), dst.astype(np.int64)):
            if (i, j) in pairs:
                raise NetworkError(f"duplicate edge ({i}, {j})")
            pairs.add((i, j))
    else:
        src = dst = rate = np.zeros(0)
    return Network(p, src, dst, rate, Structure.CUSTOM,
                   allow_uninfluenced=allow_uninfluenced)


def build_one_sided_circle(
    p: Sequence[float],
    q_in: Sequence[float],
    *,
    allow_uninfluenced: bool = False,
) -> Network:
    """Circle where node ``j`` is influenced only by node ``j - 1 (mod m)``."""
    p = np.asarray(p, dtype=np.float64)
    q_in = np.asarray(q_in, dtype=np.float64)
    m = p.size
    if q_in.shape != p.shape:
        raise NetworkError("p and q_in must have equal length")
    if m < 2:
        raise NetworkError("one-sided circles need m >= 2")
    if np.any(q_in < 0) or (not allow_uninfluenced and np.any(q_in == 0)):
        raise NetworkError("one-sided circles need q_in > 0 at every node")
    dst = np.arange(m)
    return Network(p, (dst - 1) % m, dst, q_in, Structure.ONE_SIDED_CIRCLE,
                   allow_uninfluenced=allow_uninfluenced)


def build_two_sided_circle(
    p: Sequence[float],
    q_left: Sequence[float],
    q_right: Sequence[float],
    *,
    allow_uninfluenced: bool = False,
) -> Network:
    """Circle where node ``j`` is influenced by both neighbours.

    ``q_left[j]`` is the weight of the edge ``j-1 -> j`` and ``q_right[j]``
    that of ``j+1 -> j``.
    """
    p = np.asarray(p, dtype=np.float64)
    ql = np.asarray(q_left, dtype=np.float64)
    qr = np.asarray(q_right, dtype=np.float64)
    m = p.size
    if not (ql.shape == qr.shape == p.shape):
        raise NetworkError("p, q_left and q_right must have equal length")
    if m < 3:
        raise NetworkError("two-sided circles need m >= 3")
    j = np.arange(m)
    src = np.concatenate([(j - 1) % m, (j + 1) % m])
    dst = np.concatenate([j, j])
    return Network(p, src, dst, np.concatenate([ql, qr]), Structure.TWO_SIDED_CIRCLE,
                   allow_uninfluenced=allow_uninfluenced)


def build_cartesian_torus(d: int, side: int, p: float, q: float) -> Network:
    """Homogeneous periodic lattice with ``side**d`` nodes.

    Every node is influenced by its ``2d`` nearest neighbours with weight
    ``q / (2d)``.
    """
    if d < 1:
        raise NetworkError("dimension must be >= 1")
    if side < 3:
        raise NetworkError("side must be >= 3 so that neighbours are distinct")
    if p < 0 or q <= 0:
        raise NetworkError("need p >= 0 and q > 0")
    shape = (side,) * d
    m = side ** d
    coords = np.array(np.unravel_index(np.arange(m), shape))
    src_parts, dst_parts = [], []
    for axis in range(d):
        for step in (-1, 1):
            nb = coords.copy()
            nb[axis] = (nb[axis] + step) % side
            src_parts.append(np.ravel_multi_index(tuple(nb), shape))
            dst_parts.append(np.arange(m))
    src = np.concatenate(src_parts)
    dst = np.concatenate(dst_parts)
    rate = np.full(src.size, q / (2 * d))
    return Network(np.full(m, float(p)), src, dst, rate, Structure.CARTESIAN_TORUS,
                   torus=(d, side))


# ----------------------------------------------------------- transforms
def homogeneous_counterpart(net: Network) -> Network:
    """Complete homogeneous network with the same mean ``p`` and mean ``q_j``."""
    if net.structure is not Structure.COMPLETE:
        raise NetworkError("the homogeneous counterpart is defined for complete networks")
    m = net.m
    p_bar = math.fsum(net.p) / m
    q_bar = math.fsum(net.in_influence) / m
    return build_complete(MildHetSpec(np.full(m, p_bar), np.full(m, q_bar)))


def shift_p(net: Network, delta_p: float) -> Network:
    """Add ``delta_p`` to every external rate, keeping ``q`` unchanged."""
    p = net.p + delta_p
    if np.any(p < 0):
        raise NetworkError("shift would make an external rate negative")
    return Network(p, net.src, net.dst, net.rate, net.structure, net.torus,
                   allow_uninfluenced=net.allow_uninfluenced)


def add_node(net: Network, p_new: float, q_in_new: float, q_out_new: float) -> Network:
    """Append a node joined to every existing node.

    The new node receives ``q_in_new`` from each existing node and pushes
    each existing node with ``q_out_new``.  It gets index ``m``.
    """
    m = net.m
    old = np.arange(m)
    src = np.concatenate([net.src, old, np.full(m, m)])
    dst = np.concatenate([net.dst, np.full(m, m), old])
    rate = np.concatenate([net.rate, np.full(m, float(q_in_new)), np.full(m, float(q_out_new))])
    return Network(np.append(net.p, float(p_new)), src, dst, rate, Structure.CUSTOM,
                   allow_uninfluenced=net.allow_uninfluenced)


# -------------------------------------------------------------- JSON I/O
def network_to_json(net: Network) -> dict:
    """Serialise to the interchange dictionary."""
    if net.structure is Structure.CARTESIAN_TORUS:
        tag: str | dict = {"kind": "CartesianTorus", "d": net.torus[0], "side": net.torus[1]}
    else:
        tag = net.structure.value
    doc = {
        "m": net.m,
        "p": [float(x) for x in net.p],
        "edges": [[i, j, r] for i, j, r in net.edges()],
        "structure_tag": tag,
    }
    if net.allow_uninfluenced:
        doc["allow_uninfluenced"] = True
    return doc


def network_from_json(doc: dict) -> Network:
    """Inverse of :func:`network_to_json`."""
    try:
        m = int(doc["m"])
        p = np.asarray(doc["p"], dtype=np.float64)
        edges = doc.get("edges", [])
        tag = doc.get("structure_tag", "Custom")
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkError(f"malformed network document: {exc}") from exc
    if p.size != m:
        raise NetworkError("length of p does not match m")
    torus = None
    if isinstance(tag, dict):
        if tag.get("kind") != "CartesianTorus":
            raise NetworkError(f"unknown structure tag {tag!r}")
        torus = (int(tag["d"]), int(tag["side"]))
        structure = Structure.CARTESIAN_TORUS
    else:
        try:
            structure = Structure(tag)
        except ValueError as exc:
            raise NetworkError(f"unknown structure tag {tag!r}") from exc
    arr = np.asarray(edges, dtype=np.float64).reshape(-1, 3)
    for k, (i, j) in enumerate(arr[:, :2]):
        if i != int(i) or j != int(j):
            raise NetworkError(f"edge {k} has non-integer endpoints")
    if len({(int(i), int(j)) for i, j in arr[:, :2]}) != arr.shape[0]:
        raise NetworkError("duplicate edge in document")
    return Network(p, arr[:, 0], arr[:, 1], arr[:, 2], structure, torus,
                   allow_uninfluenced=bool(doc.get("allow_uninfluenced", False)))


def save_network(net: Network, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network_to_json(net), indent=1))


def load_network(path: str | Path) -> Network:
    return network_from_json(json.loads(Path(path).read_text()))
