"""Declarative encoder-decoder CNN descriptions and a numpy runtime.

A :class:`NetworkSpec` is an ordered list of layers forming a DAG: each
layer consumes the previous layer's output unless it names an explicit
``source`` (by index, ``-1`` for the network input).  Skip layers merge an
earlier output into the chain, either by addition or channel
concatenation.  A skip marked ``residual`` is an identity shortcut around
an encoder-decoder block; the reconstruction analyzer removes those before
probing, as does the global subtractive wrapper selected by
``NetworkSpec.residual``.

Specs carry no weights.  :class:`Network` binds concrete kernels and
biases to a spec and evaluates it on images with the tensor runtime; the
fixed filter banks behind DWT-style resampling layers are bound
automatically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .activations import ActivationSpec, apply_activation
from .errors import ConfigError, ShapeError
from .framelets import haar_dwt
from .tensor import as_tensor4, conv2d, downsample, tensor_transpose, upsample

__all__ = [
    "Conv",
    "Activation",
    "Resample",
    "SkipAdd",
    "SkipConcat",
    "NetworkSpec",
    "Network",
    "build_unet",
    "build_red",
    "build_lwfsn",
    "build_rlwfsn",
    "build_toy_spec",
    "spec_to_json",
    "spec_from_json",
    "load_spec",
    "TOY_WIDTHS",
]

RESAMPLE_KINDS = ("plain", "dwt_low", "dwt_high", "dwt_full")

# Channel widths of the three-level reference model used in the training
# experiments.
TOY_WIDTHS = (6, 12, 24)


@dataclass(frozen=True)
class Conv:
    out_ch: int
    in_ch: int
    n_f: int = 3
    bias: bool = True
    source: int | None = None


@dataclass(frozen=True)
class Activation:
    spec: ActivationSpec
    source: int | None = None


@dataclass(frozen=True)
class Resample:
    direction: str  # "down" | "up"
    kind: str = "plain"
    s: int = 2
    source: int | None = None


@dataclass(frozen=True)
class SkipAdd:
    from_: int
    residual: bool = False
    source: int | None = None


@dataclass(frozen=True)
class SkipConcat:
    from_: int
    source: int | None = None


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer graph plus the global residual flag.

    ``residual=True`` wraps the layer graph G as ``y - G(y)``.
    """

    layers: tuple
    residual: bool = False
    input_channels: int = 1
    name: str = ""

    def __post_init__(self):
        validate_spec(self)


def _main_input(index, layer):
    if layer.source is not None:
        return layer.source
    return index - 1


def _check_ref(idx, ref, what):
    if ref is not None and not (-1 <= ref < idx):
        raise ConfigError(f"layer {idx}: {what} {ref} must point at an earlier layer or -1")


def validate_spec(spec: NetworkSpec) -> list:
    """Check layer wiring and channel arithmetic; returns channels per node."""
    channels = []  # channel count of each layer output

    def channels_of(ref):
        return spec.input_channels if ref == -1 else channels[ref]

    for idx, layer in enumerate(spec.layers):
        _check_ref(idx, layer.source, "source")
        src = _main_input(idx, layer)
        if src < -1:
            raise ConfigError(f"layer {idx}: no previous layer to consume")
        c_in = channels_of(src)
        if isinstance(layer, Conv):
            if layer.in_ch != c_in:
                raise ConfigError(
                    f"layer {idx}: conv expects {layer.in_ch} input channels, gets {c_in}"
                )
            if layer.n_f % 2 == 0 or layer.n_f < 1:
                raise ConfigError(f"layer {idx}: filter size must be odd, got {layer.n_f}")
            if layer.out_ch < 1:
                raise ConfigError(f"layer {idx}: out_ch must be >= 1")
            channels.append(layer.out_ch)
        elif isinstance(layer, Activation):
            if not isinstance(layer.spec, ActivationSpec):
                raise ConfigError(f"layer {idx}: activation needs an ActivationSpec")
            channels.append(c_in)
        elif isinstance(layer, Resample):
            if layer.direction not in ("down", "up"):
                raise ConfigError(f"layer {idx}: bad resample direction {layer.direction!r}")
            if layer.kind not in RESAMPLE_KINDS:
                raise ConfigError(f"layer {idx}: bad resample kind {layer.kind!r}")
            if layer.kind != "plain" and layer.s != 2:
                raise ConfigError(f"layer {idx}: DWT resampling requires factor 2, got {layer.s}")
            factor = {"plain": 1, "dwt_low": 1, "dwt_high": 3, "dwt_full": 4}[layer.kind]
            if layer.direction == "down":
                channels.append(c_in * factor)
            else:
                if factor > 1 and c_in % factor:
                    raise ConfigError(
                        f"layer {idx}: {layer.kind} up-sampling needs a multiple of "
                        f"{factor} channels, got {c_in}"
                    )
                channels.append(c_in // factor)
        elif isinstance(layer, SkipAdd):
            _check_ref(idx, layer.from_, "skip reference")
            other = channels_of(layer.from_)
            if other != c_in:
                raise ConfigError(
                    f"layer {idx}: skip-add channel mismatch ({c_in} vs {other})"
                )
            channels.append(c_in)
        elif isinstance(layer, SkipConcat):
            _check_ref(idx, layer.from_, "skip reference")
            channels.append(c_in + channels_of(layer.from_))
        else:
            raise ConfigError(f"layer {idx}: unknown layer type {type(layer).__name__}")
    if spec.residual and spec.layers:
        if channels[-1] != spec.input_channels:
            raise ConfigError(
                "residual wrapper needs the graph output to match the input channels"
            )
    return channels


# ---------------------------------------------------------------------------
# Builders for the analyzed designs
# ---------------------------------------------------------------------------


def build_unet(c0, c1, n_f=3, residual=False) -> NetworkSpec:
    """Two-path single-level U-Net.

    One path stays at full resolution; the other pools through the DWT low
    band, runs an inner encoder-decoder pair, and is up-sampled back.  The
    two decoder heads are summed.  ``residual=True`` gives the
    residual-wrapped variant that estimates noise instead of signal.
    """
    relu_ = Activation(ActivationSpec("relu_bias", t=0.0))
    layers = (
        Conv(c0, 1, n_f, bias=True),            # 0: encoder
        relu_,                                   # 1
        Conv(1, c0, n_f, bias=False),            # 2: full-resolution decoder head
        Resample("down", "dwt_low", source=1),   # 3: low-band pooling
        Conv(c1, c0, n_f, bias=True),            # 4: inner encoder
        relu_,                                   # 5
        Conv(c0, c1, n_f, bias=True),            # 6: inner decoder
        relu_,                                   # 7
        Resample("up", "dwt_low"),               # 8
        Conv(1, c0, n_f, bias=False),            # 9: pooled-path decoder head
        SkipAdd(from_=2),                        # 10: sum the two heads
    )
    return NetworkSpec(layers=layers, residual=residual, name="unet")


def build_red(c0, c1, n_f=3) -> NetworkSpec:
    """Nested single-resolution residual encoder-decoder pairs.

    The inner pair sits inside the outer one; each block's shortcut adds
    its input back before a rectifier, and the final rectified shortcut
    from the network input makes the output nonnegative by construction.
    """
    relu_ = Activation(ActivationSpec("relu_bias", t=0.0))
    layers = (
        Conv(c0, 1, n_f, bias=False),            # 0: outer encoder
        Conv(c1, c0, n_f, bias=True),            # 1: inner encoder
        relu_,                                   # 2
        Conv(c0, c1, n_f, bias=True),            # 3: inner decoder
        SkipAdd(from_=0, residual=True),         # 4: inner shortcut
        relu_,                                   # 5
        Conv(1, c0, n_f, bias=True),             # 6: outer decoder
        SkipAdd(from_=-1, residual=True),        # 7: shortcut from the input
        relu_,                                   # 8
    )
    return NetworkSpec(layers=layers, name="red")


def _default_let(thresholds=(0.0,)):
    weight = 1.0 / len(thresholds)
    members = tuple((weight, ActivationSpec("soft_shrink", t=t)) for t in thresholds)
    return ActivationSpec("let", members=members)


def build_lwfsn(c0, n_f=3, act: ActivationSpec | None = None) -> NetworkSpec:
    """Wavelet-frame shrinkage network.

    The encoder output is split by the DWT; detail bands are shrunk and
    the low band passes untouched, so smooth content is never attenuated.
    """
    if act is None:
        act = _default_let()
    if not act.is_shrink:
        raise ConfigError(f"detail-band activation must be a shrinkage kind, got {act.kind!r}")
    layers = (
        Conv(c0, 1, n_f, bias=False),            # 0: encoder
        Resample("down", "dwt_low", source=0),   # 1: low branch
        Resample("up", "dwt_low"),               # 2
        Resample("down", "dwt_high", source=0),  # 3: detail branch
        Activation(act),                         # 4: shrink detail bands
        Resample("up", "dwt_high"),              # 5
        SkipAdd(from_=2),                        # 6: merge branches
        Conv(1, c0, n_f, bias=False),            # 7: decoder
    )
    return NetworkSpec(layers=layers, name="lwfsn")


def build_rlwfsn(c0, n_f=3, act: ActivationSpec | None = None) -> NetworkSpec:
    """Residual wavelet-frame shrinkage network.

    Clipping replaces shrinkage (the block estimates noise) and the low
    branch is dropped entirely, which hard-codes the assumption that the
    noise is high-frequency.  The wrapper subtracts the estimate from the
    input.
    """
    if act is None:
        act = ActivationSpec("soft_clip", t=np.inf)
    if act.is_shrink:
        raise ConfigError(f"noise path needs a clipping activation, got {act.kind!r}")
    layers = (
        Conv(c0, 1, n_f, bias=False),            # 0: encoder
        Resample("down", "dwt_high"),            # 1: detail branch only
        Activation(act),                         # 2: clip keeps small values
        Resample("up", "dwt_high"),              # 3
        Conv(1, c0, n_f, bias=False),            # 4: decoder
    )
    return NetworkSpec(layers=layers, residual=True, name="rlwfsn")


def build_toy_spec(widths=TOY_WIDTHS, n_f=3) -> NetworkSpec:
    """Declarative form of the three-level training model (no resampling,
    rectifiers throughout, symmetric decoder)."""
    relu_ = Activation(ActivationSpec("relu_bias", t=0.0))
    layers = []
    chain = (1,) + tuple(widths)
    for c_in, c_out in zip(chain[:-1], chain[1:]):
        layers += [Conv(c_out, c_in, n_f, bias=True), relu_]
    for c_in, c_out in zip(chain[:0:-1], chain[-2::-1]):
        layers += [Conv(c_out, c_in, n_f, bias=True), relu_]
    return NetworkSpec(layers=tuple(layers), name="toy")


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------


def _act_to_json(spec: ActivationSpec) -> dict:
    out = {"kind": spec.kind}
    if spec.kind == "let":
        out["members"] = [[w, _act_to_json(m)] for w, m in spec.members]
    else:
        out["t"] = spec.t if np.isscalar(spec.t) else list(spec.t)
        if spec.kind in ("dog_shrink", "dog_clip"):
            out["p"] = spec.p
    return out


def _act_from_json(payload: dict) -> ActivationSpec:
    kind = payload.get("kind")
    if kind == "let":
        members = tuple((float(w), _act_from_json(m)) for w, m in payload.get("members", []))
        return ActivationSpec("let", members=members)
    t = payload.get("t", 0.0)
    t = float(t) if np.isscalar(t) else tuple(float(v) for v in t)
    return ActivationSpec(kind, t=t, p=int(payload.get("p", 2)))


def spec_to_json(spec: NetworkSpec) -> dict:
    layers = []
    for layer in spec.layers:
        if isinstance(layer, Conv):
            entry = {
                "type": "conv",
                "out_ch": layer.out_ch,
                "in_ch": layer.in_ch,
                "n_f": layer.n_f,
                "bias": layer.bias,
            }
        elif isinstance(layer, Activation):
            entry = {"type": "activation", "activation": _act_to_json(layer.spec)}
        elif isinstance(layer, Resample):
            entry = {
                "type": "resample",
                "direction": layer.direction,
                "kind": layer.kind,
                "s": layer.s,
            }
        elif isinstance(layer, SkipAdd):
            entry = {"type": "skip_add", "from": layer.from_, "residual": layer.residual}
        elif isinstance(layer, SkipConcat):
            entry = {"type": "skip_concat", "from": layer.from_}
        else:  # pragma: no cover - validate_spec rejects these earlier
            raise ConfigError(f"unknown layer type {type(layer).__name__}")
        if layer.source is not None:
            entry["source"] = layer.source
        layers.append(entry)
    return {
        "name": spec.name,
        "residual": spec.residual,
        "input_channels": spec.input_channels,
        "layers": layers,
    }


def spec_from_json(payload: dict) -> NetworkSpec:
    layers = []
    for idx, entry in enumerate(payload.get("layers", [])):
        if not isinstance(entry, dict) or "type" not in entry:
            raise ConfigError(f"layer {idx}: expected an object with a 'type' field")
        kind = entry["type"]
        source = entry.get("source")
        try:
            if kind == "conv":
                layers.append(
                    Conv(
                        out_ch=int(entry["out_ch"]),
                        in_ch=int(entry["in_ch"]),
                        n_f=int(entry.get("n_f", 3)),
                        bias=bool(entry.get("bias", True)),
                        source=source,
                    )
                )
            elif kind == "activation":
                layers.append(Activation(_act_from_json(entry["activation"]), source=source))
            elif kind == "resample":
                layers.append(
                    Resample(
                        direction=entry["direction"],
                        kind=entry.get("kind", "plain"),
                        s=int(entry.get("s", 2)),
                        source=source,
                    )
                )
            elif kind == "skip_add":
                layers.append(
                    SkipAdd(
                        from_=int(entry["from"]),
                        residual=bool(entry.get("residual", False)),
                        source=source,
                    )
                )
            elif kind == "skip_concat":
                layers.append(SkipConcat(from_=int(entry["from"]), source=source))
            else:
                raise ConfigError(f"unknown layer type {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"layer {idx}: {exc}") from exc
    try:
        return NetworkSpec(
            layers=tuple(layers),
            residual=bool(payload.get("residual", False)),
            input_channels=int(payload.get("input_channels", 1)),
            name=str(payload.get("name", "")),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_spec(path) -> NetworkSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# Runtime
# ---------------------------------------------------------------------------


def _per_channel_bank(filters, channels):
    """Block-diagonal bank applying a small filter stack to every channel.

    ``filters`` has shape (bands, 1, v, h); the result maps ``channels``
    inputs to ``channels * bands`` outputs, detail bands grouped per input
    channel.
    """
    bands = filters.shape[0]
    bank = np.zeros((channels * bands, channels, filters.shape[2], filters.shape[3]))
    for c in range(channels):
        bank[c * bands : (c + 1) * bands, c] = filters[:, 0]
    return bank


def _resample_banks(kind, channels):
    bank = haar_dwt()
    table = {
        "dwt_low": (bank.w_low, bank.w_low_tilde),
        "dwt_high": (bank.w_high, bank.w_high_tilde),
        "dwt_full": (bank.w, bank.w_tilde),
    }
    forward, inverse = table[kind]
    return _per_channel_bank(forward, channels), _per_channel_bank(inverse, channels)


class Network:
    """A spec bound to concrete weights, evaluated with the tensor runtime.

    ``conv_weights`` is one ``(kernel, bias_or_None)`` pair per Conv layer
    in spec order; kernels must match the declared shapes.
    """

    def __init__(self, spec: NetworkSpec, conv_weights):
        self.spec = spec
        channels = validate_spec(spec)
        conv_layers = [l for l in spec.layers if isinstance(l, Conv)]
        if len(conv_weights) != len(conv_layers):
            raise ConfigError(
                f"expected {len(conv_layers)} weight pairs, got {len(conv_weights)}"
            )
        self._kernels = {}
        self._biases = {}
        self._banks = {}
        weight_iter = iter(conv_weights)
        for idx, layer in enumerate(spec.layers):
            if isinstance(layer, Conv):
                kernel, bias = next(weight_iter)
                kernel = as_tensor4(kernel, f"layer {idx} kernel")
                want = (layer.out_ch, layer.in_ch, layer.n_f, layer.n_f)
                if kernel.shape != want:
                    raise ShapeError(f"layer {idx}: kernel shape {kernel.shape}, expected {want}")
                if layer.bias:
                    bias = np.zeros(layer.out_ch) if bias is None else np.asarray(bias, float)
                    if bias.shape != (layer.out_ch,):
                        raise ShapeError(f"layer {idx}: bias shape {bias.shape}")
                else:
                    bias = None
                self._kernels[idx] = kernel
                self._biases[idx] = bias
            elif isinstance(layer, Resample) and layer.kind != "plain":
                src = _main_input(idx, layer)
                c_in = spec.input_channels if src == -1 else channels[src]
                # banks are built per base channel; an up-resample receives
                # bands * base channels
                bands = {"dwt_low": 1, "dwt_high": 3, "dwt_full": 4}[layer.kind]
                base = c_in if layer.direction == "down" else c_in // bands
                self._banks[idx] = _resample_banks(layer.kind, base)

    def run(self, image) -> np.ndarray:
        """Evaluate the network on an image (or multi-channel tensor)."""
        x_in = as_tensor4(image, "input")
        if x_in.shape[0] != self.spec.input_channels:
            raise ShapeError(
                f"input has {x_in.shape[0]} channels, spec wants {self.spec.input_channels}"
            )
        outputs = []

        def fetch(ref):
            return x_in if ref == -1 else outputs[ref]

        for idx, layer in enumerate(self.spec.layers):
            x = fetch(_main_input(idx, layer))
            if isinstance(layer, Conv):
                x = conv2d(self._kernels[idx], x)
                if self._biases[idx] is not None:
                    x = x + self._biases[idx][:, None, None, None]
            elif isinstance(layer, Activation):
                x = apply_activation(layer.spec, x)
            elif isinstance(layer, Resample):
                if layer.kind == "plain":
                    x = downsample(x, layer.s) if layer.direction == "down" else upsample(x, layer.s)
                else:
                    forward, inverse = self._banks[idx]
                    if layer.direction == "down":
                        x = downsample(conv2d(forward, x), 2)
                    else:
                        x = conv2d(tensor_transpose(inverse), upsample(x, 2))
            elif isinstance(layer, SkipAdd):
                x = x + fetch(layer.from_)
            elif isinstance(layer, SkipConcat):
                x = np.concatenate([x, fetch(layer.from_)], axis=0)
            outputs.append(x)
        result = outputs[-1] if outputs else x_in
        if self.spec.residual:
            result = x_in - result
        return result

    def conv_indices(self):
        return [i for i, l in enumerate(self.spec.layers) if isinstance(l, Conv)]

    def kernel_at(self, idx):
        return self._kernels[idx]

    def bias_at(self, idx):
        return self._biases[idx]
