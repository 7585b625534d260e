"""Graph shift operators, edge constraints, and edge-list input/output.

The estimand throughout the package is a sparse adjacency matrix: symmetric,
hollow (zero diagonal), non-negative, float64.  This module provides the
structural checks and constructors every other module relies on, the known-edge
constraint set used to anchor the scale of the recovered graph, and the plain
text edge-list format shared by the command line tools.
"""

from __future__ import annotations

import dataclasses
import re

import numpy as np

STRUCT_TOL = 1e-12


def validate(matrix: np.ndarray) -> list[str]:
    """Check the structural invariants of a graph shift operator.

    Parameters
    ----------
    matrix : ndarray, shape (n, n)
        Candidate adjacency matrix.

    Returns
    -------
    list of str
        Empty iff the matrix is symmetric, hollow, and non-negative within
        absolute tolerance ``1e-12``.  Each violation names the failed
        invariant and the first offending index, e.g. ``"symmetry at (0, 2)"``.

    Raises
    ------
    ValueError
        If the input is not a square 2-d array.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"dimension error: expected square matrix, got shape {matrix.shape}")
    violations = []
    asym = np.abs(matrix - matrix.T)
    if asym.max(initial=0.0) > STRUCT_TOL:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        violations.append(f"symmetry at ({i}, {j})")
    diag = np.abs(np.diag(matrix))
    if diag.max(initial=0.0) > STRUCT_TOL:
        i = int(np.argmax(diag))
        violations.append(f"hollowness at ({i}, {i})")
    neg = -matrix
    if neg.max(initial=0.0) > STRUCT_TOL:
        i, j = np.unravel_index(np.argmax(neg), neg.shape)
        violations.append(f"non-negativity at ({i}, {j})")
    return violations


def init_sparse_random(n: int, density: float = 0.1, seed: int = 0) -> np.ndarray:
    """Sparse random symmetric hollow matrix used to start the solvers.

    Each of the ``n (n - 1) / 2`` upper-triangular positions is occupied
    independently with probability ``density``; occupied entries get weights
    uniform on ``(0, 1]`` and are mirrored below the diagonal.

    Raises
    ------
    ValueError
        If ``density`` is not in ``(0, 1]`` or ``n < 2``.
    """
    if n < 2:
        raise ValueError(f"parameter error: need n >= 2, got {n}")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"parameter error: density must be in (0, 1], got {density}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.size) < density
    # 1 - U is in (0, 1], so chosen entries are guaranteed nonzero
    weights = np.where(mask, 1.0 - rng.random(iu.size), 0.0)
    out = np.zeros((n, n))
    out[iu, ju] = weights
    out[ju, iu] = weights
    return out


def support(matrix: np.ndarray, threshold: float = 0.0) -> set[tuple[int, int]]:
    """Edge set ``{(i, j) : i < j, matrix[i, j] > threshold}``."""
    matrix = np.asarray(matrix, dtype=float)
    iu, ju = np.triu_indices(matrix.shape[0], k=1)
    keep = matrix[iu, ju] > threshold
    return {(int(i), int(j)) for i, j in zip(iu[keep], ju[keep])}


class EdgeConstraints:
    """Known entries of the sought adjacency matrix.

    A mapping from unordered node pairs to fixed non-negative weights.  A pair
    with value zero is a certified non-edge and is handled by the same clamping
    mechanism as a known edge.  Instances are immutable after construction.
    """

    def __init__(self, entries: dict[tuple[int, int], float] | None = None):
        canon: dict[tuple[int, int], float] = {}
        for (i, j), value in (entries or {}).items():
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"parameter error: constraint on diagonal entry ({i}, {i})")
            if i < 0 or j < 0:
                raise ValueError(f"parameter error: negative node index in pair ({i}, {j})")
            value = float(value)
            if value < 0.0:
                raise ValueError(f"parameter error: negative known weight at ({i}, {j})")
            key = (min(i, j), max(i, j))
            if key in canon and canon[key] != value:
                raise ValueError(f"parameter error: conflicting values for pair {key}")
            canon[key] = value
        self._entries = canon
        pairs = sorted(canon)
        # both orientations, precomputed for vectorized clamping
        self._rows = np.array([p[0] for p in pairs] + [p[1] for p in pairs], dtype=int)
        self._cols = np.array([p[1] for p in pairs] + [p[0] for p in pairs], dtype=int)
        self._values = np.array([canon[p] for p in pairs] * 2, dtype=float)

    @classmethod
    def from_file(cls, path, index_base: int = 0, default_weight: float = 1.0) -> "EdgeConstraints":
        """Read constraints from an edge-list file; pairs without a weight get ``default_weight``."""
        rows, _ = _read_edge_lines(path, index_base)
        return cls({(i, j): (w if w is not None else default_weight) for i, j, w in rows})

    @classmethod
    def random_edges(cls, truth: "GroundTruth", k: int, seed: int = 0) -> "EdgeConstraints":
        """Pick ``k`` distinct edges of ``truth`` uniformly at random, with their true weights."""
        edges = sorted(truth.edges)
        if k > len(edges):
            raise ValueError(f"parameter error: requested {k} known edges, graph has {len(edges)}")
        rng = np.random.default_rng(seed)
        chosen = rng.choice(len(edges), size=k, replace=False)
        return cls({edges[idx]: truth.adjacency[edges[idx]] for idx in chosen})

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self._entries)

    def items(self):
        return sorted(self._entries.items())

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, pair) -> bool:
        i, j = pair
        return (min(i, j), max(i, j)) in self._entries

    def __getitem__(self, pair) -> float:
        i, j = pair
        return self._entries[(min(i, j), max(i, j))]

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgeConstraints) and self._entries == other._entries

    def max_index(self) -> int:
        return int(self._rows.max()) if self._rows.size else -1

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        """Overwrite the constrained entries of ``matrix`` in place and return it."""
        if self._rows.size:
            if self.max_index() >= matrix.shape[0]:
                raise ValueError(
                    f"dimension error: constraint index {self.max_index()} "
                    f"out of range for n={matrix.shape[0]}"
                )
            matrix[self._rows, self._cols] = self._values
        return matrix

    def to_dict(self) -> dict[str, float]:
        return {f"{i},{j}": v for (i, j), v in self.items()}


@dataclasses.dataclass(frozen=True)
class GroundTruth:
    """Reference graph for synthetic experiments and evaluation.

    ``version`` increments whenever the topology is edited mid-stream, so trace
    records can tell which graph each step was scored against.
    """

    adjacency: np.ndarray
    version: int = 0

    def __post_init__(self):
        problems = validate(self.adjacency)
        if problems:
            raise ValueError("parameter error: ground truth fails validation: " + "; ".join(problems))
        object.__setattr__(self, "adjacency", np.asarray(self.adjacency, dtype=float))
        self.adjacency.setflags(write=False)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edges(self) -> set[tuple[int, int]]:
        return support(self.adjacency, 0.0)

    @classmethod
    def from_edge_list(cls, path, n: int | None = None, index_base: int = 0) -> "GroundTruth":
        return cls(load_edge_list(path, n=n, index_base=index_base))


def _read_edge_lines(path, index_base: int):
    if index_base not in (0, 1):
        raise ValueError(f"parameter error: index base must be 0 or 1, got {index_base}")
    rows = []
    size_hint = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            head, _, comment = raw.partition("#")
            if size_hint is None:
                hint = re.search(r"\bn=(\d+)\b", comment)
                if hint:
                    size_hint = int(hint.group(1))
            line = head.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ValueError(f"data error: {path} line {lineno}: expected 'i j [w]', got {raw!r}")
            try:
                i, j = int(parts[0]) - index_base, int(parts[1]) - index_base
                w = float(parts[2]) if len(parts) == 3 else None
            except ValueError as exc:
                raise ValueError(f"data error: {path} line {lineno}: {exc}") from None
            if i < 0 or j < 0:
                raise ValueError(f"data error: {path} line {lineno}: negative index after base shift")
            rows.append((i, j, w))
    return rows, size_hint


def load_edge_list(path, n: int | None = None, index_base: int = 0) -> np.ndarray:
    """Read a whitespace edge list into an adjacency matrix.

    Format: one ``i j [w]`` triple per line, ``#`` starts a comment, indices in
    the declared base (default 0).  Missing weights default to 1.  Duplicate
    and reversed pairs are merged by keeping the largest weight; self loops are
    rejected.  ``n`` defaults to an ``n=<count>`` token found in a comment
    (written by :func:`save_edge_list`, and what keeps isolated vertices
    through a round trip), else to ``max index + 1``.
    """
    rows, size_hint = _read_edge_lines(path, index_base)
    max_idx = max((max(i, j) for i, j, _ in rows), default=-1)
    if n is None:
        n = size_hint if size_hint is not None else max_idx + 1
    if max_idx >= n:
        raise ValueError(f"data error: node index {max_idx} out of range for n={n}")
    if n < 1:
        raise ValueError("data error: empty edge list and no explicit node count")
    out = np.zeros((n, n))
    for i, j, w in rows:
        if i == j:
            raise ValueError(f"data error: self loop at node {i} in {path}")
        w = 1.0 if w is None else w
        if w < 0:
            raise ValueError(f"data error: negative weight at ({i}, {j}) in {path}")
        out[i, j] = max(out[i, j], w)
        out[j, i] = out[i, j]
    return out


def save_edge_list(path, matrix: np.ndarray, threshold: float = 0.0,
                   index_base: int = 0, header: str | None = None) -> None:
    """Write the edges of ``matrix`` above ``threshold`` as ``i j w`` lines.

    The first line records the vertex count as ``# n=<count>`` so graphs with
    isolated vertices survive a round trip through :func:`load_edge_list`.
    """
    problems = validate(matrix)
    if problems:
        raise ValueError("parameter error: refusing to save invalid matrix: " + "; ".join(problems))
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={matrix.shape[0]}\n")
        if header:
            fh.write(f"# {header}\n")
        for i, j in sorted(support(matrix, threshold)):
            fh.write(f"{i + index_base} {j + index_base} {float(matrix[i, j])!r}\n")
