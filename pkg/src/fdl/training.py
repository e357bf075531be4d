"""Trainable three-level encoder-decoder model and its training loop.

The model mirrors the reference design used in the experiments: kernels of
6, 12 and 24 channels with 3x3 taps, rectifiers with learned per-channel
biases throughout, a channel-symmetric decoder applied through the tensor
transpose, and no resampling.  Training pairs noisy triangle images with
their clean versions under a mean-squared-error loss, Adam, batch size 1,
and a learning rate decaying linearly to zero over the epochs.

Everything is reproducible: all randomness derives from the config seed
through fixed-purpose seed tuples, so a rerun with the same config is
bit-identical on one thread.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .datasets import NoiseModel, TriangleDatasetConfig, add_noise, gen_triangles
from .errors import ConfigError, NumericError
from .metrics import snr_db
from .network import TOY_WIDTHS
from .optim import Adam, xavier_uniform_init
from .tensor import as_image, conv2d, tensor_transpose

__all__ = [
    "TrainConfig",
    "ToyModel",
    "TrainHistory",
    "build_toy",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

INIT_MODES = ("independent", "shared_enc_dec", "pct_delta")
BIAS_MODES = ("learned", "zero_fixed")


@dataclass(frozen=True)
class TrainConfig:
    """Training protocol; the learning rate decays linearly to zero."""

    epochs: int = 25
    images_per_epoch: int = 192
    batch_size: int = 1
    lr_initial: float = 1e-3
    seed: int = 0
    init_mode: str = "independent"
    bias_mode: str = "learned"
    sigma_train: float = 0.1
    image_size: tuple = (64, 64)
    triangles_per_image: tuple = (2, 6)
    intensity_range: tuple = (0.1, 1.0)
    n_validation: int = 8

    def __post_init__(self):
        if self.epochs < 0 or self.images_per_epoch < 1 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch/epoch sizes >= 1")
        if self.lr_initial <= 0:
            raise ConfigError(f"lr_initial must be positive, got {self.lr_initial}")
        if self.init_mode not in INIT_MODES:
            raise ConfigError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        if self.bias_mode not in BIAS_MODES:
            raise ConfigError(f"bias_mode must be one of {BIAS_MODES}, got {self.bias_mode!r}")
        object.__setattr__(self, "image_size", tuple(self.image_size))
        object.__setattr__(self, "triangles_per_image", tuple(self.triangles_per_image))
        object.__setattr__(self, "intensity_range", tuple(self.intensity_range))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, payload: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown training config fields: {sorted(unknown)}")
        return cls(**payload)


class ToyModel:
    """Encoder-decoder model with symmetric channel widths.

    Decoder kernels are stored with the same shape as their encoder
    partners and applied through the tensor transpose, which keeps the
    pairing between the two sides explicit.
    """

    def __init__(self, enc_kernels, enc_biases, dec_kernels, dec_biases, bias_mode="learned"):
        self.enc_kernels = enc_kernels
        self.enc_biases = enc_biases
        self.dec_kernels = dec_kernels
        self.dec_biases = dec_biases
        self.bias_mode = bias_mode

    @property
    def widths(self):
        return tuple(k.value.shape[0] for k in self.enc_kernels)

    def parameters(self):
        return list(self.enc_kernels) + self.enc_biases + list(self.dec_kernels) + self.dec_biases

    def forward(self, y) -> ad.Node:
        """Differentiable forward pass on a (1, 1, H, W) image."""
        x = ad.constant(as_image(y))
        for kernel, bias in zip(self.enc_kernels, self.enc_biases):
            x = ad.relu(ad.add_bias(ad.conv(kernel, x), bias))
        for kernel, bias in zip(reversed(self.dec_kernels), reversed(self.dec_biases)):
            x = ad.relu(ad.add_bias(ad.conv(ad.transpose(kernel), x), bias))
        return x

    def predict(self, y, bias_scale=1.0, zero_bias=False) -> np.ndarray:
        """Plain numpy inference with optional bias surgery.

        ``bias_scale`` multiplies every learned bias (the adaptive variant
        scales by the estimated over trained noise level); ``zero_bias``
        drops them entirely.
        """
        x = as_image(y)

        def biased(z, b):
            if zero_bias:
                return z
            return z + bias_scale * b.value[:, None, None, None]

        for kernel, bias in zip(self.enc_kernels, self.enc_biases):
            x = np.maximum(biased(conv2d(kernel.value, x), bias), 0.0)
        for kernel, bias in zip(reversed(self.dec_kernels), reversed(self.dec_biases)):
            x = np.maximum(biased(conv2d(tensor_transpose(kernel.value), x), bias), 0.0)
        return x

    def deepest_pair(self):
        """Encoder/decoder kernel values of the deepest level."""
        return self.enc_kernels[-1].value, self.dec_kernels[-1].value


def _delta_pair_bank(out_ch, in_ch, n_f):
    bank = np.zeros((out_ch, in_ch, n_f, n_f))
    center = n_f // 2
    for c in range(in_ch):
        bank[2 * c, c, center, center] = 1.0
        bank[2 * c + 1, c, center, center] = -1.0
    return bank


def build_toy(seed=0, init_mode="independent", bias_mode="learned", widths=TOY_WIDTHS, n_f=3):
    """Construct the trainable model.

    ``independent`` draws encoder and decoder kernels separately from the
    fan-balanced uniform law; ``shared_enc_dec`` copies each encoder
    kernel into its decoder partner; ``pct_delta`` installs deterministic
    sign-duplicated impulse pairs (zero biases), which reconstruct any
    nonnegative input exactly.
    """
    if init_mode not in INIT_MODES:
        raise ConfigError(f"init_mode must be one of {INIT_MODES}, got {init_mode!r}")
    if bias_mode not in BIAS_MODES:
        raise ConfigError(f"bias_mode must be one of {BIAS_MODES}, got {bias_mode!r}")
    chain = (1,) + tuple(widths)
    shapes = [(chain[i + 1], chain[i], n_f, n_f) for i in range(len(widths))]
    rng = np.random.default_rng((seed, 0))
    trainable_bias = bias_mode == "learned"

    if init_mode == "pct_delta":
        enc_values = [_delta_pair_bank(*s[:2], n_f) for s in shapes]
        dec_values = [v.copy() for v in enc_values]
    else:
        enc_values = [xavier_uniform_init(s, rng) for s in shapes]
        if init_mode == "shared_enc_dec":
            dec_values = [v.copy() for v in enc_values]
        else:
            dec_values = [xavier_uniform_init(s, rng) for s in shapes]

    enc_kernels = [ad.Parameter(v) for v in enc_values]
    dec_kernels = [ad.Parameter(v) for v in dec_values]
    enc_biases = [
        ad.Parameter(np.zeros(chain[i + 1]), trainable=trainable_bias) for i in range(len(widths))
    ]
    dec_biases = [ad.Parameter(np.zeros(chain[i]), trainable=trainable_bias) for i in range(len(widths))]
    return ToyModel(enc_kernels, enc_biases, dec_kernels, dec_biases, bias_mode=bias_mode)


@dataclass
class TrainHistory:
    """Per-epoch record of the run."""

    epochs: list = field(default_factory=list)

    def append(self, **row):
        self.epochs.append(row)

    def to_json(self):
        return {"epochs": self.epochs}


def _validation_set(cfg: TrainConfig):
    clean = gen_triangles(
        TriangleDatasetConfig(
            n_images=cfg.n_validation,
            size=cfg.image_size,
            triangles_per_image=cfg.triangles_per_image,
            seed=(cfg.seed, 3),
            intensity_range=cfg.intensity_range,
        )
    )
    noisy = np.stack(
        [
            add_noise(clean[i], NoiseModel(cfg.sigma_train, seed=(cfg.seed, 4, i)))
            for i in range(cfg.n_validation)
        ]
    )
    return clean, noisy


def train(model: ToyModel, cfg: TrainConfig) -> TrainHistory:
    """Run the full protocol; returns the per-epoch history.

    A fresh batch of triangle images is generated every epoch; noise is
    drawn per image.  Gradients are averaged over the (usually singleton)
    batch before each optimizer step.
    """
    optimizer = Adam(model.parameters())
    history = TrainHistory()
    val_clean, val_noisy = (None, None)
    if cfg.n_validation > 0:
        val_clean, val_noisy = _validation_set(cfg)

    for epoch in range(cfg.epochs):
        lr = cfg.lr_initial * (1.0 - epoch / cfg.epochs)
        images = gen_triangles(
            TriangleDatasetConfig(
                n_images=cfg.images_per_epoch,
                size=cfg.image_size,
                triangles_per_image=cfg.triangles_per_image,
                seed=(cfg.seed, 1, epoch),
                intensity_range=cfg.intensity_range,
            )
        )
        losses = []
        for start in range(0, cfg.images_per_epoch, cfg.batch_size):
            optimizer.zero_grad()
            batch = range(start, min(start + cfg.batch_size, cfg.images_per_epoch))
            for i in batch:
                clean = images[i]
                noisy = add_noise(clean, NoiseModel(cfg.sigma_train, seed=(cfg.seed, 2, epoch, i)))
                loss = ad.mse(model.forward(noisy), ad.constant(clean))
                if not np.isfinite(loss.value):
                    raise NumericError(f"loss diverged at epoch {epoch}, image {i}")
                ad.backward(loss)
                losses.append(float(loss.value))
            if len(batch) > 1:
                for p in optimizer.params:
                    p.grad /= len(batch)
            optimizer.step(lr)

        row = {"epoch": epoch, "lr": lr, "train_loss": float(np.mean(losses))}
        if val_clean is not None:
            outs = [model.predict(val_noisy[i]) for i in range(cfg.n_validation)]
            row["val_mse"] = float(
                np.mean([(o - val_clean[i]) ** 2 for i, o in enumerate(outs)])
            )
            row["val_snr_db"] = float(
                np.mean([snr_db(val_clean[i], o) for i, o in enumerate(outs)])
            )
        history.append(**row)
    return history


# ---------------------------------------------------------------------------
# Checkpoints: JSON manifest plus one raw little-endian float64 file per
# parameter.
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "fdl-checkpoint-v1"


def _param_entries(model: ToyModel):
    for group, params in (
        ("enc_kernel", model.enc_kernels),
        ("enc_bias", model.enc_biases),
        ("dec_kernel", model.dec_kernels),
        ("dec_bias", model.dec_biases),
    ):
        for level, param in enumerate(params):
            yield f"{group}_{level}", param


def save_checkpoint(model: ToyModel, directory) -> str:
    """Write the model under ``directory``; returns the manifest path."""
    os.makedirs(directory, exist_ok=True)
    entries = []
    for name, param in _param_entries(model):
        filename = f"{name}.f64"
        with open(os.path.join(directory, filename), "wb") as fh:
            fh.write(param.value.astype("<f8").tobytes())
        entries.append(
            {
                "name": name,
                "file": filename,
                "shape": list(param.value.shape),
                "trainable": param.trainable,
            }
        )
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "bias_mode": model.bias_mode,
        "widths": list(model.widths),
        "parameters": entries,
    }
    path = os.path.join(directory, "checkpoint.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_checkpoint(directory) -> ToyModel:
    """Rebuild a model from :func:`save_checkpoint` output."""
    path = os.path.join(directory, "checkpoint.json")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"no checkpoint manifest at {path}") from exc
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"unsupported checkpoint format {manifest.get('format')!r}")
    values = {}
    for entry in manifest["parameters"]:
        raw = np.fromfile(os.path.join(directory, entry["file"]), dtype="<f8")
        values[entry["name"]] = (raw.reshape(entry["shape"]), entry["trainable"])

    def fetch(prefix, count):
        out = []
        for level in range(count):
            value, trainable = values[f"{prefix}_{level}"]
            out.append(ad.Parameter(value, trainable=trainable))
        return out

    levels = len(manifest["widths"])
    return ToyModel(
        enc_kernels=fetch("enc_kernel", levels),
        enc_biases=fetch("enc_bias", levels),
        dec_kernels=fetch("dec_kernel", levels),
        dec_biases=fetch("dec_bias", levels),
        bias_mode=manifest.get("bias_mode", "learned"),
    )
