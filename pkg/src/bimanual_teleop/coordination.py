"""Null-space coordination toward reference bimanual configurations.

A reference library holds labeled pairs (q_left*, q_right*).  Every tick
the session picks the entry jointly closest to the current arms and, per
arm, adds a secondary joint increment confined to the Jacobian null
space, so the end-effector task is unchanged to first order:

    N  = I - J+ J          (J+ damped, see ik.damped_pseudoinverse)
    d  = N v               v = (q* - q) attraction by default
    dq_null = k  d         fixed_gain:   k = k_n
                           optimal_gain: k = clamp(d.(q*-q) / d.d, 0, k_n)

The optimal gain is the exact line-search minimizer of
``|q + k d - q*|`` along d, so attraction can never overshoot past the
reference within one tick.  ``attraction="task_increment"`` instead
projects the raw task increment (v = dq_task) with the fixed gain; this
pairing is useful for A/B comparisons but cannot steer toward q* when
the task increment happens to be null-space-orthogonal.

Leakage bound for the damped projector: ||J N v|| <= lam^2 / sigma_min
* ||v|| at a configuration with smallest singular value sigma_min > 0
(and <= lam/2 * ||v|| unconditionally); with lam = 0 the projector is
exact.

Library file format: entries are triples of non-blank lines

    <label>
    <k space-separated radians, left>
    <k space-separated radians, right>

written with 17 significant digits so values round-trip bit-exactly.
Blank lines separate entries; ``#`` starts a comment line.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyLibrary, LibraryFormatError, NonFiniteInput
from .ik import damped_pseudoinverse

LIBRARY_SIZE_RANGE = (1, 64)
NULL_DIRECTION_EPS = 1e-10


@dataclass(frozen=True)
class ReferenceEntry:
    label: str
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        left = np.array(self.left, dtype=np.float64)
        right = np.array(self.right, dtype=np.float64)
        if left.ndim != 1 or left.shape != right.shape:
            raise DimensionMismatch(
                f"reference entry needs equal-length joint vectors, got {left.shape} and {right.shape}"
            )
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise NonFiniteInput(f"reference entry {self.label!r} contains non-finite values")
        if not self.label or "\n" in self.label:
            raise LibraryFormatError("entry label must be a non-empty single line")
        left.flags.writeable = False
        right.flags.writeable = False
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)


@dataclass
class ReferencePoseLibrary:
    entries: list[ReferenceEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, entry: ReferenceEntry) -> None:
        if self.entries and entry.left.shape != self.entries[0].left.shape:
            raise DimensionMismatch("entry dimension differs from the rest of the library")
        self.entries.append(entry)
        self.check_size()

    def check_size(self) -> None:
        lo, hi = LIBRARY_SIZE_RANGE
        if not lo <= len(self.entries) <= hi:
            warnings.warn(
                f"reference library has {len(self.entries)} entries; expected {lo}..{hi}",
                stacklevel=2,
            )


def select_reference(
    library: ReferencePoseLibrary, q_left, q_right
) -> tuple[int, ReferenceEntry]:
    """Entry minimizing |qL* - qL|^2 + |qR* - qR|^2; ties pick the lowest index."""
    if not library.entries:
        raise EmptyLibrary("cannot select from an empty reference library")
    ql = np.asarray(q_left, dtype=np.float64)
    qr = np.asarray(q_right, dtype=np.float64)
    costs = np.array(
        [
            float(np.sum((e.left - ql) ** 2) + np.sum((e.right - qr) ** 2))
            for e in library.entries
        ]
    )
    index = int(np.argmin(costs))  # argmin returns the first minimum: lowest index
    return index, library.entries[index]


@dataclass(frozen=True)
class NullspaceParams:
    k_n: float = 0.2
    mode: str = "optimal_gain"  # or "fixed_gain"
    attraction: str = "reference"  # or "task_increment"
    damping: float = 1e-3  # projector pseudoinverse damping

    def __post_init__(self):
        if self.k_n < 0:
            raise ValueError("k_n must be non-negative")
        if self.mode not in ("optimal_gain", "fixed_gain"):
            raise ValueError(f"unknown null-space mode {self.mode!r}")
        if self.attraction not in ("reference", "task_increment"):
            raise ValueError(f"unknown attraction {self.attraction!r}")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")


def nullspace_increment(jac, q, q_star, dq_task, params: NullspaceParams) -> np.ndarray:
    """Secondary joint increment confined to the null space of jac."""
    j = np.asarray(jac, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    q_star = np.asarray(q_star, dtype=np.float64)
    dq_task = np.asarray(dq_task, dtype=np.float64)
    k = j.shape[1]
    if q.shape != (k,) or q_star.shape != (k,) or dq_task.shape != (k,):
        raise DimensionMismatch("q, q_star and dq_task must match the Jacobian column count")
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(q_star)) and np.all(np.isfinite(dq_task))):
        raise NonFiniteInput("null-space inputs contain non-finite values")

    projector = np.eye(k) - damped_pseudoinverse(j, params.damping) @ j
    v = (q_star - q) if params.attraction == "reference" else dq_task
    d = projector @ v
    norm_sq = float(d @ d)
    if norm_sq < NULL_DIRECTION_EPS * NULL_DIRECTION_EPS:
        return np.zeros(k)
    if params.mode == "fixed_gain":
        return params.k_n * d
    gain = float(d @ (q_star - q)) / norm_sq
    gain = min(max(gain, 0.0), params.k_n)
    return gain * d


def augment(dq_task, dq_null, max_step: float) -> tuple[np.ndarray, bool]:
    """Componentwise sum of both increments, re-clipped to the per-tick cap."""
    a = np.asarray(dq_task, dtype=np.float64)
    b = np.asarray(dq_null, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"increment shapes differ: {a.shape} vs {b.shape}")
    total = a + b
    clipped = bool(np.any(np.abs(total) > max_step))
    return np.clip(total, -max_step, max_step), clipped


# ------------------------------------------------------------- library files


def _format_row(values: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in values)


def library_to_text(library: ReferencePoseLibrary) -> str:
    blocks = [
        f"{e.label}\n{_format_row(e.left)}\n{_format_row(e.right)}\n"
        for e in library.entries
    ]
    return "\n".join(blocks)


def parse_library(text: str, source: str = "<string>") -> ReferencePoseLibrary:
    lines = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        lines.append((line_no, stripped))
    if len(lines) % 3 != 0:
        raise LibraryFormatError(
            f"{source}: expected label/left/right line triples, got {len(lines)} content lines"
        )
    library = ReferencePoseLibrary()
    dof = None
    for i in range(0, len(lines), 3):
        label_no, label = lines[i]
        rows = []
        for line_no, row in lines[i + 1 : i + 3]:
            try:
                values = np.array([float(p) for p in row.split()])
            except ValueError:
                raise LibraryFormatError("joint row is not numeric", line_no) from None
            if not np.all(np.isfinite(values)):
                raise LibraryFormatError("joint row contains non-finite values", line_no)
            rows.append(values)
        if rows[0].shape != rows[1].shape:
            raise LibraryFormatError("left/right rows differ in length", label_no)
        if dof is None:
            dof = rows[0].shape[0]
        elif rows[0].shape[0] != dof:
            raise LibraryFormatError("entry dimension differs from earlier entries", label_no)
        library.entries.append(ReferenceEntry(label=label, left=rows[0], right=rows[1]))
    library.check_size()
    return library


def load_library(path) -> ReferencePoseLibrary:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    import os

    return parse_library(text, source=os.path.basename(str(path)))


def save_library(library: ReferencePoseLibrary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(library_to_text(library))


def record_reference(
    library: ReferencePoseLibrary, label: str, q_left, q_right, path=None
) -> ReferenceEntry:
    """Append the current bimanual configuration; persist when path is given."""
    entry = ReferenceEntry(label=label, left=np.asarray(q_left), right=np.asarray(q_right))
    library.add(entry)
    if path is not None:
        save_library(library, path)
    return entry
