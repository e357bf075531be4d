"""Reconstruction analysis, equivalent filters, and operation counts.

The reconstruction analyzer asks a purely structural question: does a
network topology admit filters that pass every signal through unchanged?
It instantiates each encoder/decoder conv pair with ideal filters (sign
duplicated impulse pairs when a rectifier sits between them, plain
impulses otherwise), zeroes all biases, neutralizes shrinkage and clipping
thresholds, removes identity shortcuts, and then measures reconstruction
on random signed probes plus the two frequency extremes (a constant image
and a unit checkerboard).

Operation counts follow the convention of counting multiply-accumulates
of trainable convolutions only; fixed resampling filter banks are free.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .activations import ActivationSpec
from .errors import ConfigError, ShapeError
from .framelets import check_phase_complementary
from .network import (
    Activation,
    Conv,
    Network,
    NetworkSpec,
    Resample,
    SkipAdd,
    SkipConcat,
    validate_spec,
)
from .network import _main_input  # shared layer-graph helper
from .tensor import conv2d, identity_image, tensor_transpose

__all__ = [
    "PRReport",
    "pr_analyze",
    "equivalent_filter",
    "count_flops",
    "flops_unet",
    "flops_red",
    "flops_lwfsn",
]


@dataclass(frozen=True)
class PRReport:
    """Verdict of the perfect-reconstruction probe."""

    name: str
    is_perfect: bool
    gain_dc: float
    gain_nyquist: float
    max_recon_err: float

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "is_perfect": self.is_perfect,
            "gain_dc": self.gain_dc,
            "gain_nyquist": self.gain_nyquist,
            "max_recon_err": self.max_recon_err,
        }


# ---------------------------------------------------------------------------
# Residual stripping
# ---------------------------------------------------------------------------


def _strip_residual(spec: NetworkSpec) -> NetworkSpec:
    """Remove identity shortcuts (and a trailing rectifier glued to one).

    Residual additions re-inject a block's input at its output; they would
    let any network reconstruct trivially, so the analysis looks at the
    encoder-decoder structure between them instead.
    """
    layers = list(spec.layers)
    drop = set()
    for idx, layer in enumerate(layers):
        if isinstance(layer, SkipAdd) and layer.residual:
            drop.add(idx)
    last = len(layers) - 1
    if last >= 1 and isinstance(layers[last], Activation) and (last - 1) in drop:
        if _main_input(last, layers[last]) == last - 1:
            drop.add(last)

    redirect = {i: _main_input(i, layers[i]) for i in sorted(drop)}

    def resolve(j):
        while j in redirect:
            j = redirect[j]
        return j

    kept = [i for i in range(len(layers)) if i not in drop]
    position = {old: new for new, old in enumerate(kept)}

    def remap(ref):
        ref = resolve(ref)
        return -1 if ref == -1 else position[ref]

    rebuilt = []
    for old in kept:
        layer = layers[old]
        source = remap(_main_input(old, layer))
        if isinstance(layer, (SkipAdd, SkipConcat)):
            layer = replace(layer, from_=remap(layer.from_), source=source)
        else:
            layer = replace(layer, source=source)
        rebuilt.append(layer)
    return NetworkSpec(
        layers=tuple(rebuilt),
        residual=False,
        input_channels=spec.input_channels,
        name=spec.name,
    )


# ---------------------------------------------------------------------------
# Ideal instantiation
# ---------------------------------------------------------------------------


def _pair_convs(spec: NetworkSpec):
    """Match every contracting conv with the expanding conv it inverts.

    Walks the main input chain upstream from each decoder until it finds a
    conv with transposed channel counts, recording whether a rectifier was
    crossed (which dictates sign-duplicated filters).
    """
    layers = spec.layers
    pairs = {}
    modes = {}
    for idx, layer in enumerate(layers):
        if not isinstance(layer, Conv):
            continue
        if layer.out_ch == layer.in_ch:
            raise ConfigError(
                f"layer {idx}: cannot assign an encoder or decoder role to a "
                f"square conv ({layer.in_ch} -> {layer.out_ch})"
            )
        if layer.out_ch > layer.in_ch:
            continue
        saw_relu = False
        j = _main_input(idx, layer)
        enc = None
        while j != -1:
            node = layers[j]
            if isinstance(node, Activation) and node.spec.kind == "relu_bias":
                saw_relu = True
            if isinstance(node, Conv) and (node.out_ch, node.in_ch) == (
                layer.in_ch,
                layer.out_ch,
            ):
                enc = j
                break
            j = _main_input(j, node)
        if enc is None:
            raise ConfigError(f"layer {idx}: no matching encoder conv upstream")
        mode = "pct" if saw_relu else "frame"
        if modes.get(enc, mode) != mode:
            raise ConfigError(f"layer {enc}: decoders disagree on rectified pairing")
        pairs[idx] = enc
        modes[enc] = mode
    for idx, layer in enumerate(layers):
        if isinstance(layer, Conv) and layer.out_ch > layer.in_ch and idx not in modes:
            raise ConfigError(f"layer {idx}: expanding conv has no decoder to invert it")
    return pairs, modes


def _analysis_bank(layer: Conv, mode: str) -> np.ndarray:
    center = layer.n_f // 2
    bank = np.zeros((layer.out_ch, layer.in_ch, layer.n_f, layer.n_f))
    if mode == "pct":
        if layer.out_ch < 2 * layer.in_ch:
            raise ConfigError(
                f"conv {layer.in_ch}->{layer.out_ch} cannot host sign-duplicated "
                f"filters (needs at least {2 * layer.in_ch} outputs)"
            )
        for c in range(layer.in_ch):
            bank[2 * c, c, center, center] = 1.0
            bank[2 * c + 1, c, center, center] = -1.0
    else:
        if layer.out_ch < layer.in_ch:
            raise ConfigError(
                f"conv {layer.in_ch}->{layer.out_ch} cannot host an identity frame"
            )
        for c in range(layer.in_ch):
            bank[c, c, center, center] = 1.0
    return bank


def _neutral_activation(spec: ActivationSpec) -> ActivationSpec:
    """Activation with its suppression disabled (thresholds to the
    pass-through limit); rectifiers keep their kink."""
    if spec.kind == "relu_bias":
        return ActivationSpec("relu_bias", t=0.0)
    if spec.is_shrink:
        return ActivationSpec("soft_shrink", t=0.0)
    return ActivationSpec("soft_clip", t=np.inf)


def ideal_instantiation(spec: NetworkSpec) -> Network:
    """Bind ideal reconstruction filters and zero biases to a stripped spec."""
    pairs, modes = _pair_convs(spec)
    layers = []
    banks = {}
    weights = []
    for idx, layer in enumerate(spec.layers):
        if isinstance(layer, Conv):
            if idx in modes:
                banks[idx] = _analysis_bank(layer, modes[idx])
                weights.append((banks[idx], None))
            elif idx in pairs:
                enc_layer = spec.layers[pairs[idx]]
                if enc_layer.n_f != layer.n_f:
                    raise ConfigError(
                        f"layer {idx}: paired convs must share filter size"
                    )
                weights.append((tensor_transpose(banks[pairs[idx]]), None))
            else:  # pragma: no cover - _pair_convs guarantees coverage
                raise ConfigError(f"layer {idx}: unpaired conv")
            layers.append(layer)
        elif isinstance(layer, Activation):
            layers.append(replace(layer, spec=_neutral_activation(layer.spec)))
        else:
            layers.append(layer)
    stripped = NetworkSpec(
        layers=tuple(layers),
        residual=False,
        input_channels=spec.input_channels,
        name=spec.name,
    )
    return Network(stripped, weights)


def _checkerboard(n):
    rr, cc = np.mgrid[0:n, 0:n]
    return ((-1.0) ** (rr + cc))[None, None]


def pr_analyze(spec: NetworkSpec, grid=16, n_probes=3, tol=1e-8, seed=0) -> PRReport:
    """Probe a topology for perfect reconstruction under ideal filters.

    Reports the worst reconstruction error over random signed images plus
    the network gains at DC (constant probe) and at the Nyquist frequency
    (checkerboard probe).
    """
    net = ideal_instantiation(_strip_residual(spec))
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for _ in range(n_probes):
        y = rng.normal(size=(spec.input_channels, 1, grid, grid))
        out = net.run(y)
        max_err = max(max_err, float(np.max(np.abs(out - y))))

    flat = np.ones((spec.input_channels, 1, grid, grid))
    gain_dc = float(np.sum(net.run(flat)) / np.sum(flat))

    cb = np.broadcast_to(_checkerboard(grid), (spec.input_channels, 1, grid, grid)).copy()
    out_cb = net.run(cb)
    gain_nyquist = float(np.vdot(out_cb, cb) / np.vdot(cb, cb))

    return PRReport(
        name=spec.name,
        is_perfect=bool(max_err < tol),
        gain_dc=gain_dc,
        gain_nyquist=gain_nyquist,
        max_recon_err=max_err,
    )


# ---------------------------------------------------------------------------
# Equivalent filter
# ---------------------------------------------------------------------------


def _is_identity_activation(spec: ActivationSpec) -> bool:
    thresholds = [spec.t] if spec.kind != "let" else [m.t for _, m in spec.members]
    flat = []
    for t in thresholds:
        flat.extend([t] if np.isscalar(t) else list(t))
    if spec.kind in ("soft_shrink", "garrote", "dog_shrink", "let"):
        return all(t == 0.0 for t in flat)
    if spec.kind in ("soft_clip", "dog_clip"):
        return all(np.isinf(t) for t in flat)
    return False


def equivalent_filter(net: Network, grid=None, pct_tol=0.05) -> np.ndarray:
    """Composite impulse response of a linear(-izable) chain network.

    Only single-resolution chains qualify: resampling and skips make the
    system shift-variant or non-collapsible.  Identity-safe activations
    (zero-threshold shrinkage, infinite-threshold clipping) are dropped;
    a rectifier is accepted only when the convs around it verify the
    phase-complementary reconstruction property, in which case the triple
    collapses to a pure gain.  Anything else raises with a diagnostic.
    """
    spec = net.spec
    if spec.residual:
        raise ConfigError("equivalent filter: remove the residual wrapper first")
    items = []  # ("conv", kernel) | ("scale", factor)
    for idx, layer in enumerate(spec.layers):
        if _main_input(idx, layer) != idx - 1:
            raise ConfigError("equivalent filter: only chain topologies are supported")
        if isinstance(layer, (SkipAdd, SkipConcat, Resample)):
            raise ConfigError(
                f"equivalent filter: layer {idx} ({type(layer).__name__}) makes the "
                "network shift-variant or non-collapsible"
            )
        if isinstance(layer, Conv):
            bias = net.bias_at(idx)
            if bias is not None and np.any(bias != 0.0):
                raise ConfigError(f"equivalent filter: layer {idx} has a nonzero bias")
            items.append(("conv", net.kernel_at(idx)))
        elif isinstance(layer, Activation):
            items.append(("act", layer.spec))

    # eliminate activations
    changed = True
    while changed:
        changed = False
        for i, (kind, payload) in enumerate(items):
            if kind != "act":
                continue
            if _is_identity_activation(payload):
                del items[i]
                changed = True
                break
            if payload.kind == "relu_bias" and (
                np.isscalar(payload.t) and payload.t == 0.0
            ):
                if 0 < i < len(items) - 1 and items[i - 1][0] == "conv" and items[i + 1][0] == "conv":
                    k_enc = items[i - 1][1]
                    k_dec = items[i + 1][1]
                    try:
                        report = check_phase_complementary(
                            k_enc, tensor_transpose(k_dec), tol=pct_tol
                        )
                    except (ShapeError, ConfigError):
                        report = None
                    if report is not None and report.is_pct:
                        items[i - 1 : i + 2] = [("scale", report.c_estimate)]
                        changed = True
                        break
            raise ConfigError(
                f"equivalent filter: activation {payload.kind!r} is not provably "
                "an identity here (no phase-complementary pair around it)"
            )

    if grid is None:
        reach = 1 + sum(
            max(k.shape[2], k.shape[3]) // 2 for kind, k in items if kind == "conv"
        )
        grid = 2 * reach + 2
        grid += grid % 2
    flow = identity_image(spec.input_channels, grid)
    for kind, payload in items:
        if kind == "conv":
            flow = conv2d(payload, flow)
        else:
            flow = flow * payload
    if flow.shape[0] != spec.input_channels:
        raise ConfigError("equivalent filter: network does not map back to its input channels")
    return flow


# ---------------------------------------------------------------------------
# Operation counts
# ---------------------------------------------------------------------------


def count_flops(spec: NetworkSpec, n_r, n_c) -> int:
    """Multiply-accumulate count of the trainable convolutions.

    Each conv contributes ``out_ch * in_ch * rows * cols * n_f^2`` at the
    resolution where it runs; resampling layers change the resolution but
    cost nothing themselves.
    """
    validate_spec(spec)
    n_r, n_c = int(n_r), int(n_c)
    if n_r < 1 or n_c < 1:
        raise ConfigError(f"image size must be positive, got {n_r}x{n_c}")
    res = []  # (rows, cols) per layer output

    def res_of(ref):
        return (n_r, n_c) if ref == -1 else res[ref]

    total = 0
    for idx, layer in enumerate(spec.layers):
        rows, cols = res_of(_main_input(idx, layer))
        if isinstance(layer, Conv):
            total += layer.out_ch * layer.in_ch * rows * cols * layer.n_f**2
        elif isinstance(layer, Resample):
            if layer.direction == "down":
                if rows % layer.s or cols % layer.s:
                    raise ShapeError(
                        f"layer {idx}: resolution {rows}x{cols} not divisible by {layer.s}"
                    )
                rows, cols = rows // layer.s, cols // layer.s
            else:
                rows, cols = rows * layer.s, cols * layer.s
        elif isinstance(layer, (SkipAdd, SkipConcat)):
            other = res_of(layer.from_)
            if other != (rows, cols):
                raise ShapeError(f"layer {idx}: skip joins different resolutions")
        res.append((rows, cols))
    return int(total)


def _even(n_r, n_c):
    if n_r % 2 or n_c % 2:
        raise ConfigError(f"closed form needs even image dims, got {n_r}x{n_c}")


def flops_unet(c0, c1, n_r, n_c, n_f) -> int:
    """Closed form for the two-path design: three full-resolution convs
    plus an inner pair at quarter area."""
    _even(n_r, n_c)
    return 3 * c0 * n_r * n_c * n_f**2 + 2 * c0 * c1 * (n_r // 2) * (n_c // 2) * n_f**2


def flops_red(c0, c1, n_r, n_c, n_f) -> int:
    """Closed form for the nested residual pairs, all at full resolution."""
    return 2 * (1 + c1) * c0 * n_r * n_c * n_f**2


def flops_lwfsn(c0, n_r, n_c, n_f) -> int:
    """Closed form for the shrinkage network: one encoder/decoder conv pair."""
    return 2 * c0 * n_r * n_c * n_f**2
