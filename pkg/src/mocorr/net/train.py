"""Deterministic alternating training for the motion prior.

Each batch takes one generator step on L_sv + L_adv and, when adversarial
training is enabled, one discriminator step on L_D against random windows
drawn from the unpaired reference motions. All sequences are pre-cut to a
shared window length so batches stack without padding.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, NumericFailureError, SequenceTooShortError
from .losses import loss_adv_grad, loss_disc_grad, loss_sv_grad
from .model import CHANNELS_PER_JOINT, Discriminator, Generator, motion_channels


@dataclass
class TrainConfig:
    epochs: int = 500
    batch: int = 32
    lr_gen: float = 1e-3
    lr_disc: float = 1e-2
    decay: float = 0.1
    decay_epoch: int | None = None
    lambda_quat: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    window: int = 64
    stride: int = 8
    adversarial: bool = True
    conv_width: int = 128
    local_width: int = 16
    hidden: int = 256
    disc_hidden: int = 128
    kernel: int = 7
    dropout: float = 0.1

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError("epochs must be at least 1")
        if self.batch < 1 or self.window < 1 or self.stride < 1:
            raise InvalidInputError("batch, window and stride must be positive")
        for name in ("lr_gen", "lr_disc", "decay", "beta1", "beta2", "eps"):
            if getattr(self, name) <= 0.0:
                raise InvalidInputError(f"{name} must be positive")
        if self.lambda_quat < 0.0:
            raise InvalidInputError("lambda_quat must be non-negative")

    def decay_boundary(self):
        """First epoch (1-based) that runs at the decayed learning rate."""
        if self.decay_epoch is not None:
            return self.decay_epoch
        return max(1, self.epochs - 100 + 1)


class Adam:
    def __init__(self, layers, lr, beta1, beta2, eps):
        self.layers = layers
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.moment1 = [{k: np.zeros_like(v) for k, v in layer.params.items()}
                        for _, layer in layers]
        self.moment2 = [{k: np.zeros_like(v) for k, v in layer.params.items()}
                        for _, layer in layers]

    def step(self, lr_scale=1.0):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction1 = 1.0 - b1 ** self.t
        correction2 = 1.0 - b2 ** self.t
        lr = self.lr * lr_scale
        for (_, layer), m1, m2 in zip(self.layers, self.moment1, self.moment2):
            for k, p in layer.params.items():
                g = layer.grads[k]
                m1[k] *= b1
                m1[k] += (1.0 - b1) * g
                m2[k] *= b2
                m2[k] += (1.0 - b2) * g * g
                p -= lr * (m1[k] / correction1) / (np.sqrt(m2[k] / correction2) + self.eps)


def _cut(seq, length, stride):
    t = seq.shape[0]
    if t < length:
        return [seq]
    starts = list(range(0, t - length + 1, stride))
    if starts[-1] != t - length:
        starts.append(t - length)
    return [seq[s:s + length] for s in starts]


def make_windows(dataset, unpaired, cfg):
    """Cut all sequences to one shared window length.

    Returns (inputs, targets, references) where inputs are (T_w, 5N) channel
    stacks, targets and references are (T_w, 4N) quaternion rows.
    """
    if not dataset:
        raise InvalidInputError("training dataset is empty")
    lengths = [m.n_frames for m, _ in dataset]
    lengths += [m.n_frames for m in unpaired]
    w = min(cfg.window, min(lengths))
    if w < cfg.kernel:
        raise SequenceTooShortError(
            f"shortest training sequence ({w} frames) is below the "
            f"receptive width {cfg.kernel}")
    inputs, targets = [], []
    for noisy, ref in dataset:
        if noisy.n_frames != ref.n_frames or noisy.n_joints != ref.n_joints:
            raise InvalidInputError("paired motions must share shape")
        x = motion_channels(noisy)
        y = ref.quats
        for xw, yw in zip(_cut(x, w, cfg.stride), _cut(y, w, cfg.stride)):
            inputs.append(xw)
            targets.append(yw)
    references = []
    for motion in unpaired:
        references.extend(_cut(motion.quats, w, cfg.stride))
    return inputs, targets, references


def train(dataset, unpaired, skeleton, cfg):
    """Alternating optimization of generator and discriminator.

    dataset: list of (noisy MotionMap, reference MotionMap) pairs.
    unpaired: list of MotionMap whose quats feed the discriminator as reals.
    Returns (generator, discriminator, history) with per-epoch mean losses.
    """
    if cfg.adversarial and not unpaired:
        raise InvalidInputError("adversarial training needs unpaired reference motions")
    n = skeleton.n_joints
    for motion, _ in dataset:
        if motion.n_joints != n:
            raise InvalidInputError("motion joint count does not match the skeleton")
    streams = np.random.SeedSequence(cfg.seed).spawn(5)
    rng_gen = np.random.default_rng(streams[0])
    rng_disc = np.random.default_rng(streams[1])
    rng_shuffle = np.random.default_rng(streams[2])
    rng_dropout = np.random.default_rng(streams[3])
    rng_unpaired = np.random.default_rng(streams[4])

    gen = Generator(skeleton, rng_gen, conv_width=cfg.conv_width,
                    local_width=cfg.local_width, hidden=cfg.hidden,
                    kernel=cfg.kernel, dropout=cfg.dropout)
    disc = Discriminator(n, rng_disc, hidden=cfg.disc_hidden)
    adam_gen = Adam(gen.layers(), cfg.lr_gen, cfg.beta1, cfg.beta2, cfg.eps)
    adam_disc = Adam(disc.layers(), cfg.lr_disc, cfg.beta1, cfg.beta2, cfg.eps)

    inputs, targets, references = make_windows(dataset, unpaired if cfg.adversarial else [], cfg)
    boundary = cfg.decay_boundary()
    history = {"loss_sv": [], "loss_adv": [], "loss_disc": []}
    for epoch in range(1, cfg.epochs + 1):
        lr_scale = cfg.decay if epoch >= boundary else 1.0
        order = rng_shuffle.permutation(len(inputs))
        sums = np.zeros(3)
        count = 0
        for bi, lo in enumerate(range(0, len(order), cfg.batch)):
            idx = order[lo:lo + cfg.batch]
            xb = np.stack([inputs[i] for i in idx])
            yb = np.stack([targets[i] for i in idx])
            pred = gen.forward(xb, train=True, rng=rng_dropout)
            sv_value, dpred = loss_sv_grad(pred, yb, cfg.lambda_quat)
            adv_value = 0.0
            disc_value = 0.0
            if cfg.adversarial:
                d_fake = disc.forward(pred)
                adv_value, ddfake = loss_adv_grad(d_fake)
                disc.zero_grad()
                dpred = dpred + disc.backward(ddfake)
            gen.zero_grad()
            gen.backward(dpred)
            adam_gen.step(lr_scale)
            if cfg.adversarial:
                pick = rng_unpaired.integers(0, len(references), size=len(idx))
                real = np.stack([references[i] for i in pick])
                disc.zero_grad()
                # the two halves of L_D are independent, so backpropagate each
                # score batch right after its own forward pass
                d_fake = disc.forward(pred)
                disc.backward(2.0 * d_fake / d_fake.size)
                d_real = disc.forward(real)
                disc.backward(2.0 * (d_real - 1.0) / d_real.size)
                disc_value, _, _ = loss_disc_grad(d_real, d_fake)
                adam_disc.step(lr_scale)
            values = (sv_value, adv_value, disc_value)
            if not all(np.isfinite(v) for v in values):
                raise NumericFailureError(
                    f"non-finite training loss at epoch {epoch}, batch {bi}")
            sums += np.asarray(values) * len(idx)
            count += len(idx)
        history["loss_sv"].append(float(sums[0] / count))
        history["loss_adv"].append(float(sums[1] / count))
        history["loss_disc"].append(float(sums[2] / count))
    return gen, disc, history
