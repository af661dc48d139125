"""Read-once branching programs: data model, evaluation, labelings, and oracles.

States are 0-based integers per layer and every layer is materialized as a
dense ``(w, 2**s)`` table of targets.  Layer indices are 1-based in the
public API (layer ``i`` moves from vertex layer ``i-1`` to ``i``) and 0-based
inside the ``trans`` array.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


class RobpClass(enum.Enum):
    GENERAL = "general"
    REGULAR = "regular"
    PERMUTATION = "permutation"


class RobpError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.int64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Robp:
    """Layered program of length ``n``, width ``w`` over symbols in ``[0, 2**s)``.

    ``trans[i, u, x]`` is the target of state ``u`` on symbol ``x`` in layer
    ``i+1``.  ``labels`` is an optional two-way labeling: ``labels[i, u, x]``
    is the incoming label of that edge at its target.
    """

    trans: np.ndarray
    s: int
    start: int
    accept: frozenset
    labels: np.ndarray | None = None

    def __post_init__(self):
        t = _frozen(self.trans)
        if t.ndim != 3:
            raise RobpError("trans must have shape (n, w, 2**s)")
        n, w, d = t.shape
        if n < 1 or w < 1 or self.s < 1:
            raise RobpError("need n >= 1, w >= 1, s >= 1")
        if d != 1 << self.s:
            raise RobpError(f"symbol axis {d} does not match s={self.s}")
        if t.min() < 0 or t.max() >= w:
            raise RobpError("transition target out of range")
        if not 0 <= self.start < w:
            raise RobpError("start state out of range")
        acc = frozenset(int(a) for a in self.accept)
        if any(not 0 <= a < w for a in acc):
            raise RobpError("accept state out of range")
        object.__setattr__(self, "trans", t)
        object.__setattr__(self, "accept", acc)
        if self.labels is not None:
            lab = _frozen(self.labels)
            if lab.shape != t.shape:
                raise RobpError("labels shape mismatch")
            object.__setattr__(self, "labels", lab)
            check_labeling(self)

    @property
    def n(self) -> int:
        return self.trans.shape[0]

    @property
    def w(self) -> int:
        return self.trans.shape[1]

    @property
    def d(self) -> int:
        return self.trans.shape[2]

    @property
    def accept_vector(self) -> np.ndarray:
        v = np.zeros(self.w)
        for a in self.accept:
            v[a] = 1.0
        return v

    def with_labels(self, labels) -> "Robp":
        return Robp(self.trans, self.s, self.start, self.accept, labels)

    def with_accept(self, accept: Iterable[int]) -> "Robp":
        return Robp(self.trans, self.s, self.start, frozenset(accept), self.labels)

    def __eq__(self, other):
        if not isinstance(other, Robp):
            return NotImplemented
        same_lab = (self.labels is None and other.labels is None) or (
            self.labels is not None
            and other.labels is not None
            and np.array_equal(self.labels, other.labels)
        )
        return (
            self.s == other.s
            and self.start == other.start
            and self.accept == other.accept
            and np.array_equal(self.trans, other.trans)
            and same_lab
        )

    __hash__ = None

    # program protocol shared with lazily reduced programs
    def step(self, layer: int, states: np.ndarray, symbols: np.ndarray) -> np.ndarray:
        """Vectorized transition through 0-based layer ``layer``."""
        return self.trans[layer][states, symbols]

    def layer_mean(self, layer: int) -> np.ndarray:
        return layer_matrix(self, layer + 1)


def _check_layer(robp: Robp, i: int):
    if not 1 <= i <= robp.n:
        raise RobpError(f"layer {i} outside [1, {robp.n}]")


def evaluate(robp: Robp, inp: Sequence[int]) -> int:
    if len(inp) != robp.n:
        raise RobpError(f"input length {len(inp)} != n={robp.n}")
    u = robp.start
    for i, x in enumerate(inp):
        if not 0 <= x < robp.d:
            raise RobpError(f"symbol {x} out of range")
        u = int(robp.trans[i, u, x])
    return int(u in robp.accept)


def transition_matrix(robp: Robp, i: int, j: int, inp: Sequence[int]) -> np.ndarray:
    """0/1 matrix sending states at vertex layer ``i`` to layer ``j`` under ``inp``."""
    if not 0 <= i < j <= robp.n:
        raise RobpError("need 0 <= i < j <= n")
    if len(inp) != j - i:
        raise RobpError("input length must be j - i")
    states = np.arange(robp.w)
    for k, x in enumerate(inp):
        if not 0 <= x < robp.d:
            raise RobpError(f"symbol {x} out of range")
        states = robp.trans[i + k, states, x]
    m = np.zeros((robp.w, robp.w), dtype=np.int64)
    m[np.arange(robp.w), states] = 1
    return m


def count_matrix(robp: Robp, i: int) -> np.ndarray:
    """Integer matrix: entry (u, v) counts symbols leading u to v in layer i."""
    _check_layer(robp, i)
    w = robp.w
    c = np.zeros((w, w), dtype=np.int64)
    t = robp.trans[i - 1]
    np.add.at(c, (np.repeat(np.arange(w), robp.d), t.ravel()), 1)
    return c


def layer_matrix(robp: Robp, i: int) -> np.ndarray:
    return count_matrix(robp, i) / robp.d


def exact_expectation(robp: Robp, mode: str = "matrix", cap: int = 1 << 20):
    """E_x f(x) under uniform input.

    ``matrix`` multiplies layer averages in floating point; ``rational`` does
    the same product over integer counts and returns a Fraction; ``enumerate``
    walks every input (subject to ``cap``) and returns a Fraction.
    """
    if mode == "matrix":
        v = np.zeros(robp.w)
        v[robp.start] = 1.0
        for i in range(1, robp.n + 1):
            v = v @ layer_matrix(robp, i)
        return float(v @ robp.accept_vector)
    if mode == "rational":
        v = [0] * robp.w
        v[robp.start] = 1
        for i in range(1, robp.n + 1):
            c = count_matrix(robp, i)
            v = [sum(v[u] * int(c[u, t]) for u in range(robp.w)) for t in range(robp.w)]
        hits = sum(v[a] for a in robp.accept)
        return Fraction(hits, robp.d ** robp.n)
    if mode == "enumerate":
        total = robp.d ** robp.n
        if total > cap:
            raise RobpError(f"enumeration of {total} inputs exceeds cap {cap}")
        hits = sum(evaluate(robp, x) for x in itertools.product(range(robp.d), repeat=robp.n))
        return Fraction(hits, total)
    raise RobpError(f"unknown mode {mode!r}")


def end_matrix(robp: Robp, lo: int = 0, hi: int | None = None) -> np.ndarray:
    """Exact averaged transition matrix from vertex layer lo to hi."""
    hi = robp.n if hi is None else hi
    m = np.eye(robp.w)
    for i in range(lo + 1, hi + 1):
        m = m @ layer_matrix(robp, i)
    return m


def classify(robp: Robp) -> RobpClass:
    d, w = robp.d, robp.w
    perm = True
    for i in range(robp.n):
        t = robp.trans[i]
        for x in range(d):
            if len(np.unique(t[:, x])) != w:
                perm = False
                break
        if not perm:
            break
    if perm:
        return RobpClass.PERMUTATION
    for i in range(robp.n):
        indeg = np.bincount(robp.trans[i].ravel(), minlength=w)
        if np.any(indeg != d):
            return RobpClass.GENERAL
    return RobpClass.REGULAR


def assign_two_way_labeling(robp: Robp) -> np.ndarray:
    """Incoming label = rank of the edge among its target's in-edges,
    ordered by (source state, outgoing symbol)."""
    if classify(robp) == RobpClass.GENERAL:
        raise RobpError("program is not regular")
    n, w, d = robp.trans.shape
    lab = np.zeros((n, w, d), dtype=np.int64)
    for i in range(n):
        seen = np.zeros(w, dtype=np.int64)
        for u in range(w):
            for x in range(d):
                v = robp.trans[i, u, x]
                lab[i, u, x] = seen[v]
                seen[v] += 1
    return lab


def check_labeling(robp: Robp) -> None:
    """Raise unless every layer's rotation map is a bijection on [w] x [d]."""
    lab = robp.labels
    if lab is None:
        raise RobpError("program has no labeling")
    n, w, d = robp.trans.shape
    if lab.min() < 0 or lab.max() >= d:
        raise RobpError("incoming label out of range")
    for i in range(n):
        code = robp.trans[i] * d + lab[i]
        if len(np.unique(code)) != w * d:
            raise RobpError(f"layer {i + 1} rotation is not a bijection")


def labeled(robp: Robp) -> Robp:
    return robp if robp.labels is not None else robp.with_labels(assign_two_way_labeling(robp))


def rotation_step(robp: Robp, i: int, u: int, x: int) -> tuple[int, int]:
    if robp.labels is None:
        raise RobpError("program has no labeling")
    _check_layer(robp, i)
    if not 0 <= u < robp.w or not 0 <= x < robp.d:
        raise RobpError("state or symbol out of range")
    return int(robp.trans[i - 1, u, x]), int(robp.labels[i - 1, u, x])


def _cycle_sources(t: np.ndarray, ins: list, u0: int, mutate: bool) -> list[int]:
    """Walk the cycle through u0's symbol-0 edge; return the sources in walk order.

    Arriving at target v through edge (u, a), the other in-edge (u2, b) of v
    is examined; with ``mutate`` set, u2's labels are swapped when b == a.
    The walk leaves u2 along its other edge and stops on returning to (u0, 0).
    """
    sources = [u0]
    u, a = u0, 0
    while True:
        v = t[u, a]
        p, q = ins[v]
        if p == q:
            # both in-edges come from one source: a parallel pair
            u2, b = p, 1 - a
        else:
            u2 = q if p == u else p
            b = 0 if t[u2, 0] == v else 1
        if mutate and b == a:
            t[u2, 0], t[u2, 1] = t[u2, 1], t[u2, 0]
            b = 1 - b
        u, a = u2, 1 - b
        if (u, a) == (u0, 0):
            return sources
        sources.append(u)


def _transform_layer(t: np.ndarray, rewalk: bool) -> np.ndarray:
    t = np.array(t, dtype=np.int64)
    w = t.shape[0]
    ins = [[] for _ in range(w)]
    for u in range(w):
        ins[t[u, 0]].append(u)
        ins[t[u, 1]].append(u)
    visited = np.zeros(w, dtype=bool)
    for u0 in range(w):
        if rewalk:
            # the logspace reading: u0 was handled iff some earlier source's
            # cycle passes through it
            covered = any(u0 in _cycle_sources(t, ins, p, False) for p in range(u0))
        else:
            covered = bool(visited[u0])
        if covered:
            continue
        for u in _cycle_sources(t, ins, u0, True):
            visited[u] = True
    return t


def regular_to_permutation_binary(robp: Robp, rewalk: bool = True) -> Robp:
    """Relabel a binary regular program into a permutation program.

    Only the symbol labels at each source are swapped, so the layer bigraphs
    (and the acceptance probability) are unchanged.  Every source is covered,
    including ones unreachable from the start state.  ``rewalk=False`` uses a
    visited set instead of re-walking earlier cycles; both give the same output.
    """
    if robp.s != 1:
        raise RobpError("transform needs a binary alphabet (s = 1)")
    if classify(robp) == RobpClass.GENERAL:
        raise RobpError("program is not regular")
    layers = [_transform_layer(robp.trans[i], rewalk) for i in range(robp.n)]
    return Robp(np.stack(layers), 1, robp.start, robp.accept)


def acceptance_profile(robp: Robp) -> list[np.ndarray]:
    """q[i][u] = Pr[accept | state u at vertex layer i], by backward induction."""
    q = [None] * (robp.n + 1)
    q[robp.n] = robp.accept_vector
    for i in range(robp.n - 1, -1, -1):
        q[i] = q[i + 1][robp.trans[i]].mean(axis=1)
    return q


def robp_weight(robp: Robp) -> float:
    """Sum over all edges (u -> v) of |q_v - q_u|."""
    q = acceptance_profile(robp)
    total = 0.0
    for i in range(robp.n):
        total += float(np.abs(q[i + 1][robp.trans[i]] - q[i][:, None]).sum())
    return total


# text format
#
#   robp <n> <w> <s> <class>
#   layer <i>                 (i = 1..n, then w lines of 2**s targets)
#   rot <i>                   (optional, w lines of 2**s incoming labels)
#   start <state>
#   accept <state> ...

def dumps(robp: Robp) -> str:
    out = [f"robp {robp.n} {robp.w} {robp.s} {classify(robp).value}"]
    for i in range(robp.n):
        out.append(f"layer {i + 1}")
        out.extend(" ".join(map(str, row)) for row in robp.trans[i].tolist())
    if robp.labels is not None:
        for i in range(robp.n):
            out.append(f"rot {i + 1}")
            out.extend(" ".join(map(str, row)) for row in robp.labels[i].tolist())
    out.append(f"start {robp.start}")
    out.append("accept" + "".join(f" {a}" for a in sorted(robp.accept)))
    return "\n".join(out) + "\n"


def loads(text: str) -> Robp:
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0][0] != "robp" or len(lines[0]) != 5:
        raise RobpError("missing 'robp n w s class' header")
    n, w, s = (int(x) for x in lines[0][1:4])
    declared = RobpClass(lines[0][4])
    d = 1 << s
    trans = np.full((n, w, d), -1, dtype=np.int64)
    labels = None
    start, accept = None, None
    k = 1
    while k < len(lines):
        head = lines[k]
        if head[0] in ("layer", "rot"):
            i = int(head[1]) - 1
            rows = np.array([[int(x) for x in r] for r in lines[k + 1:k + 1 + w]], dtype=np.int64)
            if rows.shape != (w, d):
                raise RobpError(f"bad {head[0]} block for layer {i + 1}")
            if head[0] == "layer":
                trans[i] = rows
            else:
                if labels is None:
                    labels = np.zeros((n, w, d), dtype=np.int64)
                labels[i] = rows
            k += 1 + w
            continue
        if head[0] == "start":
            start = int(head[1])
        elif head[0] == "accept":
            accept = frozenset(int(x) for x in head[1:])
        else:
            raise RobpError(f"unknown record {head[0]!r}")
        k += 1
    if start is None or accept is None or (trans < 0).any():
        raise RobpError("incomplete program")
    robp = Robp(trans, s, start, accept, labels)
    if classify(robp) != declared:
        raise RobpError(f"header says {declared.value}, program is {classify(robp).value}")
    return robp


def identity_robp(n: int, w: int, s: int, start: int = 0, accept: Iterable[int] = (0,)) -> Robp:
    trans = np.broadcast_to(np.arange(w)[None, :, None], (n, w, 1 << s))
    return Robp(trans, s, start, frozenset(accept))
