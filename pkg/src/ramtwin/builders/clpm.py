"""Cross-lagged panel model builders: classic (Heise 1970) and random-intercept
(Hamaker 2015) variants.

Both share the lag labels (x2x_12, x2y_12, y2x_12, y2y_12, ...), so estimates
can be compared across variants by label.  The random-intercept variant moves
the lag structure onto within-person latents and adds two intercept factors
loading 1.0 on every wave of their variable.
"""

from __future__ import annotations

from ..paths import ONE, PathSpec
from ..ram import GroupedModel, Group, RamModel
from ..table import ColumnTable
from ..thresholds import ThresholdSet
from .common import BuilderError, default_thresholds, require_columns

VARIANTS = ("CLPM", "RICLPM")


def build_clpm(waves: int,
               variant: str = "CLPM",
               data: ColumnTable | None = None,
               x_base: str = "X",
               y_base: str = "Y",
               name: str | None = None,
               equate_innovations: bool = False) -> GroupedModel:
    variant = variant.upper()
    if variant not in VARIANTS:
        raise BuilderError(f"unknown CLPM variant {variant!r}; choose from {VARIANTS}")
    name = name or variant
    minimum = 3 if variant == "RICLPM" else 2
    if waves < minimum:
        raise BuilderError(f"{variant} needs at least {minimum} waves, got {waves}")

    xs = [f"{x_base}{t}" for t in range(1, waves + 1)]
    ys = [f"{y_base}{t}" for t in range(1, waves + 1)]
    manifests = xs + ys
    if data is not None:
        require_columns(data, manifests, variant)

    paths: list[PathSpec] = []
    latents: list[str] = []

    def inn_label(base: str, t: int) -> str:
        return f"var{base}_inn" if equate_innovations else f"var{base}_{t}"

    def cov_label(t: int) -> str:
        return "covxy_inn" if equate_innovations and t > 1 else f"covxy_{t}"

    if variant == "CLPM":
        lag_x, lag_y = xs, ys
    else:
        lag_x = [f"wx{t}" for t in range(1, waves + 1)]
        lag_y = [f"wy{t}" for t in range(1, waves + 1)]
        latents += ["ri_x", "ri_y"] + lag_x + lag_y
        for t in range(waves):
            paths.append(PathSpec("ri_x", xs[t], 1, False, 1.0))
            paths.append(PathSpec("ri_y", ys[t], 1, False, 1.0))
            paths.append(PathSpec(lag_x[t], xs[t], 1, False, 1.0))
            paths.append(PathSpec(lag_y[t], ys[t], 1, False, 1.0))
            # all variance lives in the latent layers
            paths.append(PathSpec(xs[t], xs[t], 2, False, 0.0))
            paths.append(PathSpec(ys[t], ys[t], 2, False, 0.0))
        paths.append(PathSpec("ri_x", "ri_x", 2, True, 0.5, "var_ri_x"))
        paths.append(PathSpec("ri_y", "ri_y", 2, True, 0.5, "var_ri_y"))
        paths.append(PathSpec("ri_x", "ri_y", 2, True, 0.0, "cov_ri_xy"))

    # first-wave (co)variances and per-wave innovations
    for t in range(1, waves + 1):
        paths.append(PathSpec(lag_x[t - 1], lag_x[t - 1], 2, True, 1.0,
                              inn_label("x", t) if t > 1 else "varx_1"))
        paths.append(PathSpec(lag_y[t - 1], lag_y[t - 1], 2, True, 1.0,
                              inn_label("y", t) if t > 1 else "vary_1"))
        paths.append(PathSpec(lag_x[t - 1], lag_y[t - 1], 2, True, 0.0,
                              cov_label(t)))

    # lag-1 autoregressive and cross-lagged paths
    for t in range(1, waves):
        tag = f"{t}{t + 1}"
        paths.append(PathSpec(lag_x[t - 1], lag_x[t], 1, True, 0.3, f"x2x_{tag}"))
        paths.append(PathSpec(lag_y[t - 1], lag_y[t], 1, True, 0.3, f"y2y_{tag}"))
        paths.append(PathSpec(lag_x[t - 1], lag_y[t], 1, True, 0.0, f"x2y_{tag}"))
        paths.append(PathSpec(lag_y[t - 1], lag_x[t], 1, True, 0.0, f"y2x_{tag}"))

    for v in manifests:
        paths.append(PathSpec(ONE, v, 1, True, 0.0, f"mean_{v}"))

    model = RamModel.from_paths(name, manifests, latents, paths)
    thresholds = default_thresholds(model, data) if data is not None else ThresholdSet({})
    return GroupedModel(name, {"ALL": Group(model, data, thresholds)})
