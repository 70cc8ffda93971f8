"""RAM model representation and expected-moment computation.

A model over variables v = manifests ++ latents holds three cell tables:

* ``A`` — one-headed coefficients, ``A[i, j]`` is the path j -> i;
* ``S`` — two-headed coefficients, kept symmetric in value/free/label;
* ``M`` — intercepts/means (paths from the reserved pseudo-variable ``one``).

Expected moments follow the standard reduction: with B = (I - A)^-1 and F the
manifest selector, sigma = F B S B' F' and mu = F B M.  Definition variables
are zero-variance latent proxies named ``def_<col>`` whose mean cell (and any
other cell labeled ``def_<col>``) is replaced by the row's data value before
evaluation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .paths import DEF_PREFIX, ONE, PathSpec, PathError, model_doc
from .table import ColumnTable
from .thresholds import INCREMENT_LOWER_BOUND, ThresholdSet, empty_thresholds

SINGULARITY_PIVOT = 1e-12

# start-value defaults for free cells created without an explicit value
START_ONE_HEADED = 0.9
START_DIAG = 1.0
START_OFFDIAG = 0.0
START_MEAN = 0.0


class ModelError(ValueError):
    pass


class SingularModelError(ModelError):
    """(I - A) not invertible at the supplied values."""


def _auto_label(spec: PathSpec) -> str:
    if spec.src == ONE:
        return f"mean_{spec.dst}"
    if spec.arrows == 1:
        return f"{spec.src}_to_{spec.dst}"
    a, b = sorted((spec.src, spec.dst))
    return f"{a}_with_{b}"


def _default_value(spec: PathSpec) -> float:
    if spec.src == ONE:
        return START_MEAN
    if spec.arrows == 1:
        return START_ONE_HEADED
    return START_DIAG if spec.src == spec.dst else START_OFFDIAG


class RamModel:
    """Immutable-by-convention RAM model; mutating helpers return copies."""

    def __init__(self, name: str, manifests: Sequence[str], latents: Sequence[str]):
        overlap = set(manifests) & set(latents)
        if overlap:
            raise ModelError(f"variables declared both manifest and latent: {sorted(overlap)}")
        if ONE in manifests or ONE in latents:
            raise ModelError(f"{ONE!r} is reserved")
        self.name = name
        self.manifests: tuple[str, ...] = tuple(manifests)
        self.latents: tuple[str, ...] = tuple(latents)
        self.defvars: tuple[str, ...] = ()
        n = self.nvar
        self.A_val = np.zeros((n, n))
        self.A_free = np.zeros((n, n), dtype=bool)
        self.A_lab = np.full((n, n), None, dtype=object)
        self.S_val = np.zeros((n, n))
        self.S_free = np.zeros((n, n), dtype=bool)
        self.S_lab = np.full((n, n), None, dtype=object)
        self.M_val = np.zeros(n)
        self.M_free = np.zeros(n, dtype=bool)
        self.M_lab = np.full(n, None, dtype=object)
        self._index = {v: i for i, v in enumerate(self.variables)}

    # -- structure ----------------------------------------------------------

    @property
    def variables(self) -> tuple[str, ...]:
        return self.manifests + self.latents

    @property
    def nvar(self) -> int:
        return len(self.manifests) + len(self.latents)

    @property
    def nmanifest(self) -> int:
        return len(self.manifests)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"unknown variable {name!r} in model {self.name!r}") from None

    def copy(self) -> "RamModel":
        m = RamModel.__new__(RamModel)
        m.name = self.name
        m.manifests = self.manifests
        m.latents = self.latents
        m.defvars = self.defvars
        for attr in ("A_val", "A_free", "A_lab", "S_val", "S_free", "S_lab",
                     "M_val", "M_free", "M_lab"):
            setattr(m, attr, getattr(self, attr).copy())
        m._index = dict(self._index)
        return m

    def _grow(self, new_latent: str) -> "RamModel":
        m = RamModel.__new__(RamModel)
        m.name = self.name
        m.manifests = self.manifests
        m.latents = self.latents + (new_latent,)
        m.defvars = self.defvars
        n = self.nvar
        m.A_val = np.zeros((n + 1, n + 1)); m.A_val[:n, :n] = self.A_val
        m.A_free = np.zeros((n + 1, n + 1), dtype=bool); m.A_free[:n, :n] = self.A_free
        m.A_lab = np.full((n + 1, n + 1), None, dtype=object); m.A_lab[:n, :n] = self.A_lab
        m.S_val = np.zeros((n + 1, n + 1)); m.S_val[:n, :n] = self.S_val
        m.S_free = np.zeros((n + 1, n + 1), dtype=bool); m.S_free[:n, :n] = self.S_free
        m.S_lab = np.full((n + 1, n + 1), None, dtype=object); m.S_lab[:n, :n] = self.S_lab
        m.M_val = np.zeros(n + 1); m.M_val[:n] = self.M_val
        m.M_free = np.zeros(n + 1, dtype=bool); m.M_free[:n] = self.M_free
        m.M_lab = np.full(n + 1, None, dtype=object); m.M_lab[:n] = self.M_lab
        m._index = {v: i for i, v in enumerate(m.variables)}
        return m

    # -- path application ---------------------------------------------------

    def add_path(self, spec: PathSpec) -> "RamModel":
        """Return a copy with the path applied (spec semantics; pure)."""
        m = self.copy()
        m._apply(spec)
        return m

    def _apply(self, spec: PathSpec) -> None:
        if spec.defn:
            self._apply_defn(spec)
            return
        if spec.dst == ONE:
            raise ModelError("paths cannot target the reserved constant 'one'")
        label = spec.label
        if label is not None and label.startswith(DEF_PREFIX):
            if spec.free:
                raise PathError(f"def_-labeled cell {label!r} cannot be free")
            col = label[len(DEF_PREFIX):]
            if col not in self.defvars:
                raise ModelError(
                    f"label {label!r} names a definition variable that was not declared")
        value = spec.value if spec.value is not None else (
            _default_value(spec) if spec.free else 0.0)
        if spec.free and label is None:
            label = _auto_label(spec)

        if spec.src == ONE:
            if spec.arrows == 2:
                raise ModelError("two-headed path into 'one' is not allowed")
            i = self.index(spec.dst)
            self.M_val[i] = value
            self.M_free[i] = spec.free
            self.M_lab[i] = label
        elif spec.arrows == 1:
            j = self.index(spec.src)
            i = self.index(spec.dst)
            self.A_val[i, j] = value
            self.A_free[i, j] = spec.free
            self.A_lab[i, j] = label
        else:
            i = self.index(spec.src)
            j = self.index(spec.dst)
            self.S_val[i, j] = self.S_val[j, i] = value
            self.S_free[i, j] = self.S_free[j, i] = spec.free
            self.S_lab[i, j] = self.S_lab[j, i] = label

    def _apply_defn(self, spec: PathSpec) -> None:
        col = spec.src
        proxy = DEF_PREFIX + col
        if col in self.defvars:
            return  # idempotent
        if proxy in self._index:
            raise ModelError(f"variable {proxy!r} already declared")
        grown = self._grow(proxy)
        self.__dict__.update(grown.__dict__)
        self.defvars = self.defvars + (col,)
        i = self.index(proxy)
        # zero variance, mean substituted from data each row
        self.S_val[i, i] = 0.0
        self.S_free[i, i] = False
        self.M_val[i] = 0.0
        self.M_free[i] = False
        self.M_lab[i] = proxy

    @staticmethod
    def from_paths(name: str,
                   manifests: Sequence[str],
                   latents: Sequence[str],
                   paths: Iterable[PathSpec]) -> "RamModel":
        model = RamModel(name, manifests, latents)
        # defn declarations first so def_ proxies exist for later arcs
        specs = list(paths)
        for spec in specs:
            if spec.defn:
                model._apply(spec)
        for spec in specs:
            if not spec.defn:
                model._apply(spec)
        return model

    # -- cells --------------------------------------------------------------

    def free_cells(self):
        """Yield (matrix, i, j, label, value); S yields lower triangle only."""
        n = self.nvar
        for i in range(n):
            for j in range(n):
                if self.A_free[i, j]:
                    yield ("A", i, j, self.A_lab[i, j], self.A_val[i, j])
        for i in range(n):
            for j in range(i + 1):
                if self.S_free[i, j]:
                    yield ("S", i, j, self.S_lab[i, j], self.S_val[i, j])
        for i in range(n):
            if self.M_free[i]:
                yield ("M", i, 0, self.M_lab[i], self.M_val[i])

    def validate_cells(self) -> None:
        for mat, i, j, lab, _ in self.free_cells():
            if lab is None:
                raise ModelError(
                    f"free cell {mat}[{self.variables[i]},{self.variables[j]}] lacks a label")
            if lab.startswith(DEF_PREFIX):
                raise ModelError(f"free cell may not carry def_ label {lab!r}")

    def def_labeled_cells(self, col: str):
        """Cells labeled def_<col>: (matrix, i, j) positions (S: both triangles)."""
        want = DEF_PREFIX + col
        out = []
        n = self.nvar
        for i in range(n):
            for j in range(n):
                if self.A_lab[i, j] == want:
                    out.append(("A", i, j))
                if self.S_lab[i, j] == want:
                    out.append(("S", i, j))
            if self.M_lab[i] == want:
                out.append(("M", i, 0))
        return out

    # -- evaluation ---------------------------------------------------------

    def materialize(self,
                    theta: "ParameterVector | Mapping[str, float] | None" = None,
                    defrow: Mapping[str, float] | None = None
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Resolve free cells and definition substitutions to plain (A, S, M)."""
        values: Mapping[str, float]
        if theta is None:
            values = {}
        elif isinstance(theta, ParameterVector):
            values = theta.as_dict()
        else:
            values = theta
        A = self.A_val.copy()
        S = self.S_val.copy()
        M = self.M_val.copy()
        if values:
            for mat, i, j, lab, _ in self.free_cells():
                if lab in values:
                    v = values[lab]
                    if mat == "A":
                        A[i, j] = v
                    elif mat == "S":
                        S[i, j] = S[j, i] = v
                    else:
                        M[i] = v
        if self.defvars:
            if defrow is None:
                raise ModelError(
                    f"model {self.name!r} declares definition variables "
                    f"{list(self.defvars)}; a data row is required")
            for col in self.defvars:
                if col not in defrow:
                    raise ModelError(f"definition variable {col!r} missing from row")
                v = float(defrow[col])
                for mat, i, j in self.def_labeled_cells(col):
                    if mat == "A":
                        A[i, j] = v
                    elif mat == "S":
                        S[i, j] = S[j, i] = v
                    else:
                        M[i] = v
        return A, S, M

    def expected_moments(self,
                         theta: "ParameterVector | Mapping[str, float] | None" = None,
                         defrow: Mapping[str, float] | None = None
                         ) -> tuple[np.ndarray, np.ndarray]:
        """Expected (mu, sigma) over the manifests."""
        A, S, M = self.materialize(theta, defrow)
        return moments_from_matrices(A, S, M, self.nmanifest)

    # -- serialization ------------------------------------------------------

    def to_paths(self) -> list[PathSpec]:
        specs: list[PathSpec] = []
        names = self.variables
        n = self.nvar
        proxies = {DEF_PREFIX + c for c in self.defvars}
        for col in self.defvars:
            specs.append(PathSpec(src=col, defn=True, free=False, value=0.0))
        for i in range(n):
            for j in range(n):
                if self.A_free[i, j] or self.A_val[i, j] != 0.0 or self.A_lab[i, j] is not None:
                    specs.append(PathSpec(src=names[j], dst=names[i], arrows=1,
                                          free=bool(self.A_free[i, j]),
                                          value=float(self.A_val[i, j]),
                                          label=self.A_lab[i, j]))
        for i in range(n):
            for j in range(i + 1):
                if names[i] in proxies and i == j:
                    continue  # implicit zero-variance proxy cell
                if self.S_free[i, j] or self.S_val[i, j] != 0.0 or self.S_lab[i, j] is not None:
                    specs.append(PathSpec(src=names[j], dst=names[i], arrows=2,
                                          free=bool(self.S_free[i, j]),
                                          value=float(self.S_val[i, j]),
                                          label=self.S_lab[i, j]))
        for i in range(n):
            if names[i] in proxies:
                continue  # proxy mean cell is implicit
            if self.M_free[i] or self.M_val[i] != 0.0 or self.M_lab[i] is not None:
                specs.append(PathSpec(src=ONE, dst=names[i], arrows=1,
                                      free=bool(self.M_free[i]),
                                      value=float(self.M_val[i]),
                                      label=self.M_lab[i]))
        return specs

    def to_doc(self) -> dict:
        latents = tuple(v for v in self.latents if v not in
                        {DEF_PREFIX + c for c in self.defvars})
        return model_doc(self.name, self.manifests, latents, self.to_paths(),
                         defvars=self.defvars)


def moments_from_matrices(A: np.ndarray, S: np.ndarray, M: np.ndarray,
                          nmanifest: int) -> tuple[np.ndarray, np.ndarray]:
    n = A.shape[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(np.eye(n) - A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < SINGULARITY_PIVOT:
        raise SingularModelError(
            "I - A is singular (cyclic one-headed structure at these values)")
    B = scipy.linalg.lu_solve((lu, piv), np.eye(n), check_finite=False)
    C = B @ S @ B.T
    # mirror the lower triangle so symmetry holds exactly, not to tolerance
    sigma_full = np.tril(C) + np.tril(C, -1).T
    mu_full = B @ M
    f = nmanifest
    return mu_full[:f].copy(), sigma_full[:f, :f].copy()


# -- grouped models ----------------------------------------------------------


@dataclass(frozen=True)
class Group:
    model: RamModel
    data: ColumnTable | None = None
    thresholds: ThresholdSet = field(default_factory=empty_thresholds)


class GroupedModel:
    """Named submodels over distinct data tables, sharing parameters by label."""

    def __init__(self, name: str, groups: Mapping[str, Group]):
        self.name = name
        self.groups: dict[str, Group] = dict(groups)
        if not self.groups:
            raise ModelError("grouped model needs at least one group")

    def bind(self, datasets: Mapping[str, ColumnTable]) -> "GroupedModel":
        groups = {}
        for gname, grp in self.groups.items():
            data = datasets.get(gname, grp.data)
            groups[gname] = Group(grp.model, data, grp.thresholds)
        missing = set(datasets) - set(self.groups)
        if missing:
            raise ModelError(f"unknown groups in bind: {sorted(missing)}")
        return GroupedModel(self.name, groups)

    def with_thresholds(self, group: str, thresholds: ThresholdSet) -> "GroupedModel":
        groups = dict(self.groups)
        grp = groups[group]
        groups[group] = Group(grp.model, grp.data, thresholds)
        return GroupedModel(self.name, groups)

    def fix_thresholds(self, fixed: Mapping[str, Sequence[float]]) -> "GroupedModel":
        """Fix thresholds at cumulative values in every group carrying the column."""
        groups = {}
        for gname, grp in self.groups.items():
            present = {c: v for c, v in fixed.items() if c in grp.thresholds}
            thr = grp.thresholds.with_fixed(present) if present else grp.thresholds
            groups[gname] = Group(grp.model, grp.data, thr)
        return GroupedModel(self.name, groups)

    @staticmethod
    def single(model: RamModel, data: ColumnTable | None = None,
               thresholds: ThresholdSet | None = None,
               group_name: str = "ALL") -> "GroupedModel":
        return GroupedModel(model.name,
                            {group_name: Group(model, data, thresholds or empty_thresholds())})


@dataclass
class ParameterVector:
    """Free parameters across a grouped model: unique labels + aligned values."""

    labels: list[str]
    values: np.ndarray
    bounds: dict[str, tuple[float | None, float | None]] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.labels) != len(self.values):
            raise ModelError("labels/values length mismatch")
        if len(set(self.labels)) != len(self.labels):
            raise ModelError("duplicate labels in parameter vector")

    def __len__(self) -> int:
        return len(self.labels)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, (float(v) for v in self.values)))

    def with_values(self, values: np.ndarray) -> "ParameterVector":
        return ParameterVector(list(self.labels), np.asarray(values, dtype=float).copy(),
                               dict(self.bounds))

    def updated(self, overrides: Mapping[str, float]) -> "ParameterVector":
        vals = self.values.copy()
        index = {lab: k for k, lab in enumerate(self.labels)}
        for lab, v in overrides.items():
            if lab not in index:
                raise ModelError(f"unknown parameter label {lab!r}")
            vals[index[lab]] = v
        return self.with_values(vals)

    def bounds_list(self) -> list[tuple[float | None, float | None]]:
        return [self.bounds.get(lab, (None, None)) for lab in self.labels]


def pack_parameters(gm: GroupedModel) -> ParameterVector:
    """One entry per distinct label across groups, matrices, and thresholds."""
    labels: list[str] = []
    values: list[float] = []
    seen: dict[str, float] = {}
    fixed_labels: set[str] = set()
    bounds: dict[str, tuple[float | None, float | None]] = {}

    def visit(label: str | None, free: bool, value: float, where: str):
        if label is None:
            return
        if label.startswith(DEF_PREFIX):
            if free:
                raise ModelError(f"def_ label {label!r} on a free cell ({where})")
            fixed_labels.add(label)
            return
        if free:
            if label in fixed_labels:
                raise ModelError(f"label {label!r} used with conflicting free flags")
            if label not in seen:
                seen[label] = value
                labels.append(label)
                values.append(value)
        else:
            if label in seen:
                raise ModelError(f"label {label!r} used with conflicting free flags")
            fixed_labels.add(label)

    for gname, grp in gm.groups.items():
        grp.model.validate_cells()
        m = grp.model
        n = m.nvar
        for i in range(n):
            for j in range(n):
                visit(m.A_lab[i, j], bool(m.A_free[i, j]), float(m.A_val[i, j]),
                      f"{gname}.A")
        for i in range(n):
            for j in range(i + 1):
                visit(m.S_lab[i, j], bool(m.S_free[i, j]), float(m.S_val[i, j]),
                      f"{gname}.S")
        for i in range(n):
            visit(m.M_lab[i], bool(m.M_free[i]), float(m.M_val[i]), f"{gname}.M")
        for col, thr in grp.thresholds.items():
            for k, entry in enumerate(thr.entries):
                visit(entry.label, entry.free, entry.value, f"{gname}.thresholds[{col}]")
                if entry.free and k > 0 and entry.label is not None:
                    bounds[entry.label] = (INCREMENT_LOWER_BOUND, None)

    return ParameterVector(labels, np.array(values, dtype=float), bounds)


def unpack_parameters(gm: GroupedModel, theta: ParameterVector) -> GroupedModel:
    """Write theta back into every cell sharing each label; returns a new model."""
    values = theta.as_dict()
    groups: dict[str, Group] = {}
    for gname, grp in gm.groups.items():
        m = grp.model.copy()
        n = m.nvar
        for i in range(n):
            for j in range(n):
                lab = m.A_lab[i, j]
                if m.A_free[i, j] and lab in values:
                    m.A_val[i, j] = values[lab]
        for i in range(n):
            for j in range(i + 1):
                lab = m.S_lab[i, j]
                if m.S_free[i, j] and lab in values:
                    m.S_val[i, j] = m.S_val[j, i] = values[lab]
        for i in range(n):
            lab = m.M_lab[i]
            if m.M_free[i] and lab in values:
                m.M_val[i] = values[lab]
        thr = grp.thresholds
        if thr.free_entry_count():
            new_cols = {}
            for col, ct in thr.items():
                entries = []
                for e in ct.entries:
                    if e.free and e.label in values:
                        entries.append(type(e)(values[e.label], e.free, e.label))
                    else:
                        entries.append(e)
                new_cols[col] = type(ct)(tuple(entries))
            thr = ThresholdSet(new_cols)
        groups[gname] = Group(m, grp.data, thr)
    return GroupedModel(gm.name, groups)


def fix_parameters(gm: GroupedModel, fixes: Mapping[str, float]) -> GroupedModel:
    """Turn every cell carrying a label in ``fixes`` into a fixed cell at that value."""
    remaining = set(fixes)
    groups: dict[str, Group] = {}
    for gname, grp in gm.groups.items():
        m = grp.model.copy()
        n = m.nvar
        for i in range(n):
            for j in range(n):
                lab = m.A_lab[i, j]
                if lab in fixes:
                    m.A_val[i, j] = fixes[lab]
                    m.A_free[i, j] = False
                    remaining.discard(lab)
        for i in range(n):
            for j in range(n):
                lab = m.S_lab[i, j]
                if lab in fixes:
                    m.S_val[i, j] = fixes[lab]
                    m.S_free[i, j] = False
                    remaining.discard(lab)
        for i in range(n):
            lab = m.M_lab[i]
            if lab in fixes:
                m.M_val[i] = fixes[lab]
                m.M_free[i] = False
                remaining.discard(lab)
        thr = grp.thresholds
        new_cols = {}
        changed = False
        for col, ct in thr.items():
            entries = []
            for e in ct.entries:
                if e.label in fixes:
                    entries.append(type(e)(fixes[e.label], False, e.label))
                    remaining.discard(e.label)
                    changed = True
                else:
                    entries.append(e)
            new_cols[col] = type(ct)(tuple(entries))
        if changed:
            thr = ThresholdSet(new_cols)
        groups[gname] = Group(m, grp.data, thr)
    if remaining:
        raise ModelError(f"labels not present in model: {sorted(remaining)}")
    return GroupedModel(gm.name, groups)


def label_kinds(gm: GroupedModel) -> dict[str, str]:
    """Matrix kind (A/S/M/threshold) of each free label, by first occurrence."""
    kinds: dict[str, str] = {}

    def note(label, free, kind):
        if free and label is not None and label not in kinds:
            kinds[label] = kind

    for grp in gm.groups.values():
        m = grp.model
        n = m.nvar
        for i in range(n):
            for j in range(n):
                note(m.A_lab[i, j], m.A_free[i, j], "A")
        for i in range(n):
            for j in range(i + 1):
                note(m.S_lab[i, j], m.S_free[i, j], "S")
        for i in range(n):
            note(m.M_lab[i], m.M_free[i], "M")
        for _, thr in grp.thresholds.items():
            for e in thr.entries:
                note(e.label, e.free, "threshold")
    return kinds


def reachable_defvar_targets(model: RamModel, col: str) -> set[str]:
    """Manifests whose expected moments depend on definition column ``col``.

    Computed symbolically: structural nonzeros of A give a reachability closure
    B != 0; sources are the def_<col> proxy (its mean cell) plus any cell
    labeled def_<col> in A, S, or M.
    """
    proxy = DEF_PREFIX + col
    sources: set[int] = set()
    if col in model.defvars:
        sources.add(model.index(proxy))
    for mat, i, j in model.def_labeled_cells(col):
        if mat == "A":
            sources.add(i)
        elif mat == "S":
            sources.update((i, j))
        else:
            sources.add(i)
    if not sources and col not in model.defvars:
        raise ModelError(f"{col!r} is neither a declared definition variable "
                         f"nor a def_ cell label")
    n = model.nvar
    struct = (model.A_val != 0.0) | model.A_free
    for i in range(n):
        for j in range(n):
            if model.A_lab[i, j] is not None:
                struct[i, j] = True
    reach = np.eye(n, dtype=bool)
    frontier = True
    while frontier:
        nxt = reach | (struct @ reach)
        frontier = (nxt != reach).any()
        reach = nxt
    out: set[str] = set()
    for p in range(model.nmanifest):
        if any(reach[p, s] for s in sources):
            out.add(model.manifests[p])
    return out
