"""
Hostility classifier: a two-layer feed-forward network of logistic units.

The input stacks a fixed-size attribute vector per object slot; output j is
the probability that the object in slot j is hostile. Absent objects are
zero-padded in the input and masked out of the loss.
"""

import logging
from dataclasses import dataclass, replace
from typing import Sequence, Tuple, Union

import numpy as np

from .exceptions import ConfigError, DimensionError, EmptyInputError, RecordFormatError
from .rng import XorShift64

logger = logging.getLogger(__name__)

ATTRIBUTES_PER_OBJECT = 7
LOSS_CLAMP = 1e-12

_LOW = np.finfo(float).tiny
_HIGH = np.nextafter(1.0, 0.0)


def logistic(net: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """out = 1 / (1 + e^-net), evaluated without overflow and kept strictly inside (0, 1)."""
    x = np.asarray(net, dtype=float)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    out = np.clip(out, _LOW, _HIGH)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 40
    seed: int = 0
    batch_size: int = 16

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")


@dataclass(frozen=True, eq=False)
class LabeledExample:
    """Stacked input, per-slot 0/1 targets and per-slot presence mask."""
    input: np.ndarray
    target: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "input", np.asarray(self.input, dtype=float).ravel())
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float).ravel())
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool).ravel())
        if self.target.shape != self.mask.shape:
            raise DimensionError(
                f"target has {self.target.size} slots but mask has {self.mask.size}"
            )


@dataclass(frozen=True, eq=False)
class Mlp:
    """
    Parameters of the network.

    w1: (hidden_dim, input_dim), b1: (hidden_dim,),
    w2: (output_dim, hidden_dim), b2: (output_dim,).
    """
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    attributes_per_object: int = ATTRIBUTES_PER_OBJECT

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2"):
            arr = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"Mlp.{name} holds non-finite values")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        hidden, inputs = self.w1.shape
        outputs = self.w2.shape[0]
        if self.b1.shape != (hidden,) or self.w2.shape != (outputs, hidden) or self.b2.shape != (outputs,):
            raise DimensionError(
                f"Inconsistent layer shapes: w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}, b2 {self.b2.shape}"
            )
        if inputs != self.attributes_per_object * outputs:
            raise DimensionError(
                f"input_dim {inputs} must equal {self.attributes_per_object} attributes x {outputs} objects"
            )

    @classmethod
    def initialize(
        cls,
        max_objects: int,
        hidden_dim: int = 16,
        seed: int = 0,
        attributes_per_object: int = ATTRIBUTES_PER_OBJECT,
    ) -> "Mlp":
        """Uniform weights in [-0.5, 0.5], drawn in checkpoint order (W1, b1, W2, b2)."""
        rng = XorShift64(seed)
        input_dim = attributes_per_object * max_objects
        shapes = [(hidden_dim, input_dim), (hidden_dim,), (max_objects, hidden_dim), (max_objects,)]
        params = []
        for shape in shapes:
            count = int(np.prod(shape))
            params.append(np.array([rng.uniform(-0.5, 0.5) for _ in range(count)]).reshape(shape))
        return cls(*params, attributes_per_object=attributes_per_object)

    @classmethod
    def zeros(cls, max_objects: int, hidden_dim: int = 16,
              attributes_per_object: int = ATTRIBUTES_PER_OBJECT) -> "Mlp":
        input_dim = attributes_per_object * max_objects
        return cls(np.zeros((hidden_dim, input_dim)), np.zeros(hidden_dim),
                   np.zeros((max_objects, hidden_dim)), np.zeros(max_objects),
                   attributes_per_object=attributes_per_object)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[0]

    @property
    def max_objects(self) -> int:
        return self.output_dim

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_flat(self, values: np.ndarray) -> "Mlp":
        values = np.asarray(values, dtype=float)
        if values.size != self.flat().size:
            raise DimensionError(f"Expected {self.flat().size} parameters, got {values.size}")
        parts, offset = [], 0
        for arr in (self.w1, self.b1, self.w2, self.b2):
            parts.append(values[offset:offset + arr.size].reshape(arr.shape))
            offset += arr.size
        return Mlp(*parts, attributes_per_object=self.attributes_per_object)


@dataclass(frozen=True, eq=False)
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])


def _check_input(m: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.input_dim:
        raise DimensionError(f"Network expects {m.input_dim} inputs, got {x.shape[-1]}")
    return x


def _forward_hidden(m: Mlp, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    hidden = logistic(x @ m.w1.T + m.b1)
    return hidden, logistic(hidden @ m.w2.T + m.b2)


def forward(m: Mlp, x: np.ndarray) -> np.ndarray:
    """Per-slot hostility probabilities; accepts one input vector or a batch of rows."""
    x = _check_input(m, x)
    return _forward_hidden(m, x)[1]


def _stack(m: Mlp, batch: Sequence[LabeledExample]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not batch:
        raise EmptyInputError("Batch must hold at least one example")
    for ex in batch:
        if ex.input.size != m.input_dim or ex.target.size != m.output_dim:
            raise DimensionError(
                f"Example shape ({ex.input.size} in, {ex.target.size} out) does not fit "
                f"network ({m.input_dim} in, {m.output_dim} out)"
            )
    x = np.stack([ex.input for ex in batch])
    y = np.stack([ex.target for ex in batch])
    mask = np.stack([ex.mask for ex in batch]).astype(float)
    return x, y, mask


def _masked_bce(p: np.ndarray, y: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-row mean cross-entropy over active slots."""
    active = mask.sum(axis=1)
    if np.any(active == 0):
        raise EmptyInputError("Example has every output slot masked")
    p = np.clip(p, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    terms = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)) * mask
    return terms.sum(axis=1) / active


def loss(m: Mlp, ex: LabeledExample) -> float:
    """Masked binary cross-entropy, averaged over the active output slots."""
    x, y, mask = _stack(m, [ex])
    return float(_masked_bce(forward(m, x), y, mask)[0])


def batch_loss(m: Mlp, batch: Sequence[LabeledExample]) -> float:
    x, y, mask = _stack(m, batch)
    return float(_masked_bce(forward(m, x), y, mask).mean())


def _gradients_arrays(m: Mlp, x: np.ndarray, y: np.ndarray, mask: np.ndarray) -> Gradients:
    active = mask.sum(axis=1)
    if np.any(active == 0):
        raise EmptyInputError("Example has every output slot masked")
    hidden, out = _forward_hidden(m, x)
    # logistic output + cross-entropy collapses to (p - y) at the pre-activation
    d_out = (out - y) * mask / active[:, None] / x.shape[0]
    d_hidden = (d_out @ m.w2) * hidden * (1.0 - hidden)
    return Gradients(
        w1=d_hidden.T @ x,
        b1=d_hidden.sum(axis=0),
        w2=d_out.T @ hidden,
        b2=d_out.sum(axis=0),
    )


def gradients(m: Mlp, batch: Sequence[LabeledExample]) -> Gradients:
    """Mean gradient of the loss over the batch."""
    return _gradients_arrays(m, *_stack(m, batch))


def _apply(m: Mlp, grads: Gradients, lr: float) -> Mlp:
    return replace(m, w1=m.w1 - lr * grads.w1, b1=m.b1 - lr * grads.b1,
                   w2=m.w2 - lr * grads.w2, b2=m.b2 - lr * grads.b2)


def backprop_step(m: Mlp, batch: Sequence[LabeledExample], lr: float) -> Mlp:
    """One gradient-descent step on the batch-mean loss."""
    if lr == 0:
        return m
    return _apply(m, gradients(m, batch), lr)


def train(m: Mlp, data: Sequence[LabeledExample], cfg: TrainConfig) -> Mlp:
    """Mini-batch gradient descent over cfg.epochs seeded shuffles of the data."""
    if not data:
        raise EmptyInputError("Training data must hold at least one example")
    if cfg.epochs == 0:
        return m
    x, y, mask = _stack(m, data)
    rng = XorShift64(cfg.seed)
    for epoch in range(cfg.epochs):
        order = np.array(rng.permutation(len(data)), dtype=int)
        for start in range(0, len(order), cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            m = _apply(m, _gradients_arrays(m, x[rows], y[rows], mask[rows]), cfg.learning_rate)
        if logger.isEnabledFor(logging.DEBUG):
            epoch_loss = float(_masked_bce(forward(m, x), y, mask).mean())
            logger.debug(f"epoch {epoch + 1}/{cfg.epochs}: loss {epoch_loss:.6f}")
    logger.info(f"Trained network on {len(data)} examples for {cfg.epochs} epochs")
    return m


def retrain_online(
    m: Mlp,
    missed: Sequence[LabeledExample],
    cfg: TrainConfig,
    target_loss: float,
    max_steps: int,
    replay: Sequence[LabeledExample] = (),
) -> Mlp:
    """
    Retrain on examples the network failed to flag.

    Each step trains on the missed examples mixed 1:1 with examples drawn
    from the replay buffer, and stops once the mean loss on the missed set
    falls below target_loss or max_steps is reached.

    Args:
        m: Network to retrain.
        missed: Examples from the missed object's visit, labelled hostile.
        cfg: Learning rate and the seed for replay sampling.
        target_loss: Mean loss on missed that ends retraining.
        max_steps: Step cap; reaching it logs a warning.
        replay: Earlier examples mixed into every step.

    Returns:
        The retrained network.

    Raises:
        EmptyInputError: missed is empty.
    """
    if not missed:
        raise EmptyInputError("retrain_online needs at least one missed example")
    rng = XorShift64(cfg.seed)
    before = batch_loss(m, missed)
    current = before
    steps = 0
    while current >= target_loss and steps < max_steps:
        batch = list(missed)
        if replay:
            batch.extend(replay[rng.randint(0, len(replay) - 1)] for _ in range(len(missed)))
        m = backprop_step(m, batch, cfg.learning_rate)
        steps += 1
        current = batch_loss(m, missed)
    if current >= target_loss:
        logger.warning(
            f"Retraining stopped at max_steps={max_steps} with loss {current:.4f} "
            f"(target {target_loss})"
        )
    logger.info(f"Retrained on {len(missed)} missed examples: loss {before:.4f} -> {current:.4f} in {steps} steps")
    return m


# --- Checkpoint text format ---

def mlp_to_text(m: Mlp) -> str:
    lines = [f"mlp {m.input_dim} {m.hidden_dim} {m.output_dim}"]
    lines.extend(f"{v:.17g}" for v in m.flat())
    return "\n".join(lines) + "\n"


def mlp_from_text(text: str, attributes_per_object: int = ATTRIBUTES_PER_OBJECT) -> Mlp:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise RecordFormatError("Empty network checkpoint")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "mlp":
        raise RecordFormatError(f"Bad network checkpoint header: {lines[0]!r}")
    try:
        input_dim, hidden_dim, output_dim = (int(v) for v in header[1:])
        values = np.array([float(v) for v in lines[1:]])
    except ValueError as e:
        raise RecordFormatError(f"Non-numeric value in network checkpoint: {e}") from e
    expected = hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim
    if values.size != expected:
        raise RecordFormatError(f"Network checkpoint holds {values.size} values, expected {expected}")
    if input_dim != attributes_per_object * output_dim:
        raise DimensionError(
            f"Checkpoint input_dim {input_dim} is not {attributes_per_object} x {output_dim}"
        )
    skeleton = Mlp.zeros(output_dim, hidden_dim, attributes_per_object)
    return skeleton.with_flat(values)


def save_mlp(m: Mlp, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(mlp_to_text(m))


def load_mlp(path) -> Mlp:
    with open(path, "r", encoding="utf-8") as fh:
        return mlp_from_text(fh.read())
