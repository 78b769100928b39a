"""Encoder-decoder localization network with a hand-written gradient engine.

The encoder is a k-stream MLP: each camera's 12 pixel means (24 values,
normalized to [0, 1] by image size) pass through a local stack (entry
affine to width 48, then two residual blocks); the concatenated stream
features pass through a global stack (entry affine to width 96, three
residual blocks) and an affine head producing the predicted world center
(3 values) plus k flattened 3x4 decoder matrices.

A residual block is three affine+ReLU layers with an identity skip from
block input to block output and a ReLU after the addition.

The decoder applies each predicted 3x4 matrix to the homogeneous predicted
center and compares the result against the camera's mean pixel observation
extended with a homogeneous 1; it is a learned stand-in for the projective
map divided by its scale.

Everything runs on float64 numpy, single threaded, and is deterministic
under the configured seeds.  Norm losses use the smoothing
sqrt(||r||^2 + eps^2) - eps so gradients are exact everywhere, including
at a perfect fit.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .seeding import derive_rng

__all__ = [
    "NetworkError",
    "ShapeMismatch",
    "StaleTape",
    "EmptyDataset",
    "CheckpointMismatch",
    "LayerParameters",
    "NetworkParameters",
    "Tape",
    "OptimizerState",
    "TrainingPairTensor",
    "TrainConfig",
    "EpochStats",
    "encoder_forward",
    "decoder_forward",
    "loss_localization",
    "loss_reconstruction",
    "backward",
    "optimizer_step",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

NORM_EPS = 1e-8
_INIT_TAG = 4
_SHUFFLE_TAG = 5


class NetworkError(Exception):
    pass


class ShapeMismatch(NetworkError):
    pass


class StaleTape(NetworkError):
    """The tape was recorded before the parameters were last updated."""


class EmptyDataset(NetworkError):
    pass


class CheckpointMismatch(NetworkError):
    pass


@dataclass
class LayerParameters:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray   # (out,)


def _init_layer(rng: np.random.Generator, out_dim: int, in_dim: int) -> LayerParameters:
    bound = np.sqrt(6.0 / in_dim)
    return LayerParameters(rng.uniform(-bound, bound, size=(out_dim, in_dim)), np.zeros(out_dim))


@dataclass
class NetworkParameters:
    """All weights of the k-stream encoder, in declared layer order.

    Each stack is a flat list of affines: the entry layer followed by
    blocks of three; block boundaries are implied by position.  ``version``
    counts optimizer updates and invalidates stale tapes.
    """

    n_cameras: int
    means_per_camera: int
    local_width: int
    local_blocks: int
    global_width: int
    global_blocks: int
    local: list[list[LayerParameters]]
    glob: list[LayerParameters]
    head: LayerParameters
    version: int = 0

    @property
    def stream_input_width(self) -> int:
        return 2 * self.means_per_camera

    @property
    def input_width(self) -> int:
        return self.n_cameras * self.stream_input_width

    @property
    def output_width(self) -> int:
        return 3 + 12 * self.n_cameras

    def tensors(self):
        """(name, array) pairs in declared layer order."""
        for k, stack in enumerate(self.local):
            for i, layer in enumerate(stack):
                yield f"local{k}/affine{i}/weights", layer.weights
                yield f"local{k}/affine{i}/biases", layer.biases
        for i, layer in enumerate(self.glob):
            yield f"global/affine{i}/weights", layer.weights
            yield f"global/affine{i}/biases", layer.biases
        yield "head/weights", self.head.weights
        yield "head/biases", self.head.biases

    @property
    def parameter_count(self) -> int:
        return sum(a.size for _, a in self.tensors())

    @classmethod
    def initialize(cls, n_cameras: int, seed: int = 0, means_per_camera: int = 12,
                   local_width: int = 48, local_blocks: int = 2,
                   global_width: int = 96, global_blocks: int = 3) -> "NetworkParameters":
        """Fan-in-scaled uniform init, deterministic under ``seed``."""
        rng = derive_rng(_INIT_TAG, seed)
        in_w = 2 * means_per_camera
        local = []
        for _ in range(n_cameras):
            stack = [_init_layer(rng, local_width, in_w)]
            stack += [_init_layer(rng, local_width, local_width) for _ in range(3 * local_blocks)]
            local.append(stack)
        glob = [_init_layer(rng, global_width, n_cameras * local_width)]
        glob += [_init_layer(rng, global_width, global_width) for _ in range(3 * global_blocks)]
        head = _init_layer(rng, 3 + 12 * n_cameras, global_width)
        return cls(n_cameras, means_per_camera, local_width, local_blocks,
                   global_width, global_blocks, local, glob, head)


@dataclass
class Tape:
    """Forward-pass intermediates needed by backward."""

    params: NetworkParameters
    version: int
    inputs: np.ndarray
    local_records: list[list[tuple[np.ndarray, np.ndarray]]]  # per stream: (input, pre) per affine
    local_sums: list[list[np.ndarray]]                        # per stream: pre-ReLU skip sums per block
    glob_records: list[tuple[np.ndarray, np.ndarray]]
    glob_sums: list[np.ndarray]
    head_input: np.ndarray
    y_hat: np.ndarray
    p_bar: np.ndarray


def _stack_forward(stack: list[LayerParameters], x: np.ndarray):
    """Entry affine + residual blocks; returns output, per-affine records,
    and per-block pre-ReLU skip sums."""
    records = []
    pre = x @ stack[0].weights.T + stack[0].biases
    records.append((x, pre))
    h = np.maximum(pre, 0.0)
    sums = []
    n_blocks = (len(stack) - 1) // 3
    for b in range(n_blocks):
        r = h
        t = r
        for layer in stack[1 + 3 * b: 4 + 3 * b]:
            pre = t @ layer.weights.T + layer.biases
            records.append((t, pre))
            t = np.maximum(pre, 0.0)
        s = r + t
        sums.append(s)
        h = np.maximum(s, 0.0)
    return h, records, sums


def _stack_backward(stack, records, sums, d_out, grads, prefix):
    """Mirror of _stack_forward; accumulates parameter grads, returns input grad."""
    n_blocks = (len(stack) - 1) // 3
    rec_idx = len(records) - 1
    for b in reversed(range(n_blocks)):
        d_sum = d_out * (sums[b] > 0)
        d_t = d_sum
        for i in reversed(range(1 + 3 * b, 4 + 3 * b)):
            x_in, pre = records[rec_idx]
            rec_idx -= 1
            d_pre = d_t * (pre > 0)
            grads[f"{prefix}/affine{i}/weights"] += d_pre.T @ x_in
            grads[f"{prefix}/affine{i}/biases"] += d_pre.sum(axis=0)
            d_t = d_pre @ stack[i].weights
        d_out = d_sum + d_t  # skip path plus block path
    x_in, pre = records[rec_idx]
    d_pre = d_out * (pre > 0)
    grads[f"{prefix}/affine0/weights"] += d_pre.T @ x_in
    grads[f"{prefix}/affine0/biases"] += d_pre.sum(axis=0)
    return d_pre @ stack[0].weights


def encoder_forward(params: NetworkParameters, inputs) -> tuple[np.ndarray, np.ndarray, Tape]:
    """Run the encoder; returns (centers, decoder matrices, tape).

    ``inputs`` is (batch, 24k) of normalized pixel means, camera-major.
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.input_width:
        raise ShapeMismatch(f"expected (batch, {params.input_width}) inputs, got {x.shape}")
    w = params.stream_input_width
    local_records, local_sums, local_outs = [], [], []
    for k in range(params.n_cameras):
        h, rec, sums = _stack_forward(params.local[k], x[:, k * w:(k + 1) * w])
        local_outs.append(h)
        local_records.append(rec)
        local_sums.append(sums)
    g_in = np.concatenate(local_outs, axis=1)
    g_out, glob_records, glob_sums = _stack_forward(params.glob, g_in)
    out = g_out @ params.head.weights.T + params.head.biases
    y_hat = out[:, :3]
    p_bar = out[:, 3:].reshape(len(x), params.n_cameras, 3, 4)
    tape = Tape(params, params.version, x, local_records, local_sums,
                glob_records, glob_sums, g_out, y_hat, p_bar)
    return y_hat, p_bar, tape


def decoder_forward(p_bar, y_hat) -> np.ndarray:
    """Apply each camera's 3x4 matrix to the homogeneous predicted center.

    Returns (batch, k, 3); the third component plays the role of the
    homogeneous 1 and is trained toward 1.
    """
    p = np.asarray(p_bar, dtype=float)
    y = np.asarray(y_hat, dtype=float)
    if p.ndim != 4 or p.shape[2:] != (3, 4) or y.ndim != 2 or y.shape[1] != 3 or p.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"incompatible decoder shapes {p.shape} and {y.shape}")
    yh = np.concatenate([y, np.ones((len(y), 1))], axis=1)
    return np.einsum("bkij,bj->bki", p, yh)


def _smooth_norms(residual: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed row norms sqrt(||r||^2 + eps^2) - eps and d(norm)/dr."""
    sq = np.sum(residual**2, axis=-1)
    root = np.sqrt(sq + NORM_EPS**2)
    return root - NORM_EPS, residual / root[..., None]


def loss_localization(y_hat, targets) -> float:
    """Batch mean of the (smoothed) Euclidean distance to the world target."""
    y = np.asarray(y_hat, dtype=float)
    t = np.asarray(targets, dtype=float)
    if y.shape != t.shape:
        raise ShapeMismatch(f"{y.shape} vs {t.shape}")
    norms, _ = _smooth_norms(y - t)
    return float(norms.mean())


def loss_reconstruction(reconstructions, pixel_targets) -> float:
    """Sum over cameras of the batch-mean distance to [u, v, 1] targets."""
    r = np.asarray(reconstructions, dtype=float)
    t = np.asarray(pixel_targets, dtype=float)
    if r.ndim != 3 or r.shape[2] != 3 or t.shape != (*r.shape[:2], 2):
        raise ShapeMismatch(f"{r.shape} vs {t.shape}")
    t3 = np.concatenate([t, np.ones((*t.shape[:2], 1))], axis=2)
    norms, _ = _smooth_norms(r - t3)   # (batch, k)
    return float(norms.mean(axis=0).sum())


def backward(tape: Tape, targets_world, pixel_targets=None, lambda_rec: float = 1.0,
             rec_joint: bool = True):
    """Exact reverse-mode gradients of L_loc + lambda * L_rec.

    ``pixel_targets`` None disables the decoder term entirely.  With
    ``rec_joint`` False the reconstruction gradient flows only into the
    decoder matrices, not into the predicted center.  Returns
    (grads dict, L_loc, L_rec).
    """
    params = tape.params
    if tape.version != params.version:
        raise StaleTape("parameters changed since this tape was recorded")
    y = tape.y_hat
    t_w = np.asarray(targets_world, dtype=float)
    if t_w.shape != y.shape:
        raise ShapeMismatch(f"{y.shape} vs {t_w.shape}")
    batch = len(y)
    grads = {name: np.zeros_like(a) for name, a in params.tensors()}

    loc_norms, loc_unit = _smooth_norms(y - t_w)
    l_loc = float(loc_norms.mean())
    d_y = loc_unit / batch
    d_p = np.zeros_like(tape.p_bar)
    l_rec = 0.0
    if pixel_targets is not None:
        recon = decoder_forward(tape.p_bar, y)
        t_p = np.asarray(pixel_targets, dtype=float)
        if t_p.shape != (*recon.shape[:2], 2):
            raise ShapeMismatch(f"{recon.shape} vs {t_p.shape}")
        t3 = np.concatenate([t_p, np.ones((*t_p.shape[:2], 1))], axis=2)
        rec_norms, rec_unit = _smooth_norms(recon - t3)
        l_rec = float(rec_norms.mean(axis=0).sum())
        d_recon = lambda_rec * rec_unit / batch          # (batch, k, 3)
        yh = np.concatenate([y, np.ones((batch, 1))], axis=1)
        d_p = np.einsum("bki,bj->bkij", d_recon, yh)
        if rec_joint:
            d_y = d_y + np.einsum("bki,bkij->bj", d_recon, tape.p_bar)[:, :3]

    d_out = np.concatenate([d_y, d_p.reshape(batch, -1)], axis=1)
    grads["head/weights"] += d_out.T @ tape.head_input
    grads["head/biases"] += d_out.sum(axis=0)
    d_g = d_out @ params.head.weights
    d_gin = _stack_backward(params.glob, tape.glob_records, tape.glob_sums, d_g, grads, "global")
    w = params.local_width
    for k in range(params.n_cameras):
        _stack_backward(params.local[k], tape.local_records[k], tape.local_sums[k],
                        d_gin[:, k * w:(k + 1) * w], grads, f"local{k}")
    return grads, l_loc, l_rec


@dataclass
class OptimizerState:
    """Adam accumulators, one slot per parameter tensor."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(state: OptimizerState, params: NetworkParameters, grads) -> NetworkParameters:
    """One Adam update with bias correction; mutates params in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, tensor in params.tensors():
        g = grads[name]
        if g.shape != tensor.shape:
            raise ShapeMismatch(f"gradient {name} has shape {g.shape}, expected {tensor.shape}")
        m = state.m.setdefault(name, np.zeros_like(tensor))
        v = state.v.setdefault(name, np.zeros_like(tensor))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        tensor -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    params.version += 1
    return params


@dataclass(frozen=True)
class TrainingPairTensor:
    """Normalized training arrays: inputs (n, 24k), world targets (n, 3),
    per-camera mean pixel targets (n, k, 2)."""

    inputs: np.ndarray
    targets_world: np.ndarray
    targets_pixels: np.ndarray

    def __post_init__(self):
        n = len(self.inputs)
        if len(self.targets_world) != n or len(self.targets_pixels) != n:
            raise ShapeMismatch("training arrays must share their first dimension")
        for name in ("inputs", "targets_world", "targets_pixels"):
            getattr(self, name).setflags(write=False)

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    lambda_rec: float = 1.0
    decoder: bool = True
    rec_joint: bool = True
    seed: int = 0
    max_steps: int | None = None


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    l_loc_train: float
    l_rec_train: float
    l_loc_test: float
    l_rec_test: float


def _full_losses(params, data: TrainingPairTensor, decoder: bool) -> tuple[float, float]:
    y_hat, p_bar, _ = encoder_forward(params, data.inputs)
    l_loc = loss_localization(y_hat, data.targets_world)
    if not decoder:
        return l_loc, 0.0
    recon = decoder_forward(p_bar, y_hat)
    return l_loc, loss_reconstruction(recon, data.targets_pixels)


def train(config: TrainConfig, train_data: TrainingPairTensor,
          test_data: TrainingPairTensor | None = None,
          params: NetworkParameters | None = None):
    """Mini-batch Adam training; returns (params, per-epoch stats).

    Batches are reshuffled each epoch under the config seed.  With the
    decoder off the reconstruction loss neither trains nor reports
    (recorded as zero).  Bit-identical across runs with equal inputs.
    """
    if len(train_data) == 0:
        raise EmptyDataset("no training examples")
    n_cameras = train_data.targets_pixels.shape[1]
    if params is None:
        params = NetworkParameters.initialize(n_cameras, seed=config.seed)
    state = OptimizerState(config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    rng = derive_rng(_SHUFFLE_TAG, config.seed)
    history: list[EpochStats] = []
    steps = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_data))
        for lo in range(0, len(order), config.batch_size):
            if config.max_steps is not None and steps >= config.max_steps:
                break
            idx = order[lo:lo + config.batch_size]
            _, _, tape = encoder_forward(params, train_data.inputs[idx])
            grads, _, _ = backward(
                tape, train_data.targets_world[idx],
                train_data.targets_pixels[idx] if config.decoder else None,
                lambda_rec=config.lambda_rec, rec_joint=config.rec_joint,
            )
            optimizer_step(state, params, grads)
            steps += 1
        l_loc_tr, l_rec_tr = _full_losses(params, train_data, config.decoder)
        if test_data is not None and len(test_data):
            l_loc_te, l_rec_te = _full_losses(params, test_data, config.decoder)
        else:
            l_loc_te, l_rec_te = float("nan"), float("nan")
        history.append(EpochStats(epoch, l_loc_tr, l_rec_tr, l_loc_te, l_rec_te))
        if config.max_steps is not None and steps >= config.max_steps:
            break
    return params, history


# Checkpoint format: a textual header naming the architecture and training
# metadata, then every parameter tensor as one decimal per line with 17
# significant digits, row-major, in declared layer order.  Round trips are
# bit exact.

_CHECKPOINT_MAGIC = "momloc-checkpoint 1"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_checkpoint(path, params: NetworkParameters, *, lambda_rec: float = 1.0,
                    seed: int = 0, epoch: int = 0, decoder: bool = True) -> None:
    buf = io.StringIO()
    buf.write(_CHECKPOINT_MAGIC + "\n")
    buf.write(f"cameras {params.n_cameras}\n")
    buf.write(f"means_per_camera {params.means_per_camera}\n")
    buf.write(f"local_width {params.local_width}\n")
    buf.write(f"local_blocks {params.local_blocks}\n")
    buf.write(f"global_width {params.global_width}\n")
    buf.write(f"global_blocks {params.global_blocks}\n")
    buf.write(f"lambda_rec {_fmt(lambda_rec)}\n")
    buf.write(f"seed {seed}\n")
    buf.write(f"epoch {epoch}\n")
    buf.write(f"decoder {'on' if decoder else 'off'}\n")
    for name, tensor in params.tensors():
        dims = " ".join(str(d) for d in tensor.shape)
        buf.write(f"tensor {name} {dims}\n")
        for value in tensor.ravel():
            buf.write(_fmt(value) + "\n")
    with open(path, "w", newline="\n") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[NetworkParameters, dict]:
    with open(path, "r", newline="\n") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _CHECKPOINT_MAGIC:
        raise CheckpointMismatch("not a recognized checkpoint file")
    meta: dict = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("tensor "):
        key, value = lines[i].split(maxsplit=1)
        meta[key] = value
        i += 1
    for key in ("cameras", "means_per_camera", "local_width", "local_blocks",
                "global_width", "global_blocks", "seed", "epoch"):
        meta[key] = int(meta[key])
    meta["lambda_rec"] = float(meta["lambda_rec"])
    meta["decoder"] = meta["decoder"] == "on"
    params = NetworkParameters.initialize(
        meta["cameras"], seed=0, means_per_camera=meta["means_per_camera"],
        local_width=meta["local_width"], local_blocks=meta["local_blocks"],
        global_width=meta["global_width"], global_blocks=meta["global_blocks"],
    )
    for name, tensor in params.tensors():
        if i >= len(lines):
            raise CheckpointMismatch(f"missing tensor {name}")
        parts = lines[i].split()
        if parts[:2] != ["tensor", name]:
            raise CheckpointMismatch(f"expected tensor {name}, found {lines[i]!r}")
        shape = tuple(int(d) for d in parts[2:])
        if shape != tensor.shape:
            raise CheckpointMismatch(f"tensor {name} has shape {shape}, expected {tensor.shape}")
        i += 1
        flat = np.array([float(lines[i + j]) for j in range(tensor.size)])
        i += tensor.size
        tensor[...] = flat.reshape(tensor.shape)
    if i != len(lines):
        raise CheckpointMismatch("trailing data after final tensor")
    return params, meta
