"""Path specifications: single arcs of a path diagram plus their JSON exchange form.

The exchange document is ``{name, manifests, latents, defvars, paths: [...]}``
where each path carries exactly the fields
``from, to, arrows, free, value, label, defn``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

ONE = "one"  # reserved pseudo-variable: one-headed paths from it write means
DEF_PREFIX = "def_"


class PathError(ValueError):
    pass


@dataclass(frozen=True)
class PathSpec:
    """One arc: endpoints, arrowheads, free flag, value, label.

    ``defn=True`` declares a definition variable instead of an arc: ``src``
    names a data column, ``dst`` is ignored.
    """

    src: str
    dst: str | None = None
    arrows: int = 1
    free: bool = True
    value: float | None = None
    label: str | None = None
    defn: bool = False

    def __post_init__(self):
        if self.arrows not in (1, 2):
            raise PathError(f"arrows must be 1 or 2, got {self.arrows}")
        if self.defn:
            if not self.src:
                raise PathError("defn path must name a data column in 'from'")
        elif self.dst is None:
            raise PathError(f"path from {self.src!r} lacks a target")
        if self.label is not None and self.label.startswith(DEF_PREFIX) and self.free:
            raise PathError(f"label {self.label!r}: def_-labeled cells cannot be free")

    def suffixed(self, suffix: str, skip: Sequence[str] = ()) -> "PathSpec":
        """Append ``suffix`` to both endpoints (used when cloning per twin)."""
        if self.defn:
            return replace(self, src=self.src + suffix)
        src = self.src if self.src == ONE or self.src in skip else self.src + suffix
        dst = self.dst if self.dst == ONE or self.dst in skip else self.dst + suffix
        return replace(self, src=src, dst=dst)

    def to_json_dict(self) -> dict:
        return {
            "from": self.src,
            "to": self.dst,
            "arrows": self.arrows,
            "free": self.free,
            "value": self.value,
            "label": self.label,
            "defn": self.defn,
        }

    @staticmethod
    def from_json_dict(doc: Mapping) -> "PathSpec":
        unknown = set(doc) - {"from", "to", "arrows", "free", "value", "label", "defn"}
        if unknown:
            raise PathError(f"unknown path fields: {sorted(unknown)}")
        if "from" not in doc:
            raise PathError("path document lacks 'from'")
        arrows = doc.get("arrows", 1)
        if arrows not in (1, 2):
            raise PathError(f"arrows must be 1 or 2, got {arrows}")
        return PathSpec(
            src=str(doc["from"]),
            dst=None if doc.get("to") is None else str(doc["to"]),
            arrows=int(arrows),
            free=bool(doc.get("free", True)),
            value=None if doc.get("value") is None else float(doc["value"]),
            label=None if doc.get("label") is None else str(doc["label"]),
            defn=bool(doc.get("defn", False)),
        )


def model_doc(name: str,
              manifests: Sequence[str],
              latents: Sequence[str],
              paths: Sequence[PathSpec],
              defvars: Sequence[str] = ()) -> dict:
    """Assemble the canonical exchange document for a path set."""
    return {
        "name": name,
        "manifests": list(manifests),
        "latents": list(latents),
        "defvars": list(defvars),
        "paths": [p.to_json_dict() for p in paths],
    }


def paths_from_doc(doc: Mapping) -> list[PathSpec]:
    if "paths" not in doc:
        raise PathError("exchange document lacks 'paths'")
    return [PathSpec.from_json_dict(p) for p in doc["paths"]]
