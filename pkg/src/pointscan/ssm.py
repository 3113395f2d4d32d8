"""Linear state-space recurrence, Chamfer loss, and a small reconstruction loop.

The recurrence is h_t = A h_{t-1} + B x_t with h_0 = 0, either with static
matrices or with per-step parameters generated from the input:
A_t = diag(sigmoid(W_a x_t)) (entries in (0, 1), so the state stays bounded)
and B_t = reshape(W_b x_t). Cost is linear in sequence length.

The reconstruction task runs serialized token features through the
recurrence with masked positions zeroed on input, decodes the state at every
masked position into a k x 3 point patch with one shared affine map, and
scores predictions against the true center-relative patches with the
symmetric averaged squared-distance Chamfer loss. Training is plain gradient
descent with analytic gradients; the decoder is always trained and the static
transition matrices optionally so (backprop through the recurrence).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrainingError, ValidationError


@dataclass(frozen=True)
class SsmParams:
    """Recurrence parameters: static (a, b_in) and optional generator weights."""

    a: np.ndarray
    b_in: np.ndarray
    w_a: np.ndarray | None = None
    w_b: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b_in = np.asarray(self.b_in, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("transition matrix must be square (d, d)")
        if b_in.ndim != 2 or b_in.shape[0] != a.shape[0]:
            raise ValidationError("input matrix must have shape (d, m)")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b_in", b_in)
        d, m = b_in.shape
        for name, want in (("w_a", (d, m)), ("w_b", (d * m, m))):
            w = getattr(self, name)
            if w is None:
                continue
            w = np.asarray(w, dtype=np.float64)
            if w.shape != want:
                raise ValidationError(f"{name} must have shape {want}, got {w.shape}")
            object.__setattr__(self, name, w)
        for w in (self.a, self.b_in, self.w_a, self.w_b):
            if w is not None and not np.all(np.isfinite(w)):
                raise ValidationError("state-space parameters contain non-finite values")

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]

    @property
    def input_dim(self) -> int:
        return self.b_in.shape[1]

    @classmethod
    def seeded(
        cls,
        state_dim: int,
        input_dim: int,
        seed: int,
        spectral_radius: float = 0.9,
        dynamic: bool = False,
    ) -> "SsmParams":
        """Random parameters with the static transition scaled to the given radius."""
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(state_dim, state_dim))
        rho = float(np.abs(np.linalg.eigvals(a)).max())
        if rho > 0:
            a *= spectral_radius / rho
        b_in = rng.normal(size=(state_dim, input_dim)) / np.sqrt(input_dim)
        w_a = w_b = None
        if dynamic:
            w_a = rng.normal(size=(state_dim, input_dim)) / np.sqrt(input_dim)
            w_b = rng.normal(size=(state_dim * input_dim, input_dim)) / np.sqrt(input_dim)
        return cls(a=a, b_in=b_in, w_a=w_a, w_b=w_b)


def ssm_step(h_prev: np.ndarray, x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """One recurrence step: a @ h_prev + b @ x."""
    h_prev = np.asarray(h_prev, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != h_prev.shape[0] or b.shape[1] != x.shape[0] or a.shape[0] != b.shape[0]:
        raise ValidationError(
            f"shape mismatch: a{a.shape} @ h{h_prev.shape} + b{b.shape} @ x{x.shape}"
        )
    return a @ h_prev + b @ x


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def dynamic_step_params(params: SsmParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Input-conditioned per-step matrices: diagonal contractive A_t and dense B_t."""
    if params.w_a is None or params.w_b is None:
        raise ValidationError("dynamic mode needs generator weights (w_a, w_b)")
    a_t = np.diag(_sigmoid(params.w_a @ x))
    b_t = (params.w_b @ x).reshape(params.state_dim, params.input_dim)
    return a_t, b_t


def ssm_forward(inputs: np.ndarray, params: SsmParams, mode: str = "static") -> np.ndarray:
    """Fold the recurrence over a (T, m) sequence from h_0 = 0; returns (T, d) states."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise ValidationError("inputs must be a non-empty (T, m) array")
    if inputs.shape[1] != params.input_dim:
        raise ValidationError(
            f"input dim {inputs.shape[1]} does not match parameters ({params.input_dim})"
        )
    if mode not in ("static", "dynamic"):
        raise ValidationError(f"unknown mode {mode!r}")
    states = np.empty((inputs.shape[0], params.state_dim))
    h = np.zeros(params.state_dim)
    for t, x in enumerate(inputs):
        if mode == "dynamic":
            a_t, b_t = dynamic_step_params(params, x)
            h = a_t @ h + b_t @ x
        else:
            h = params.a @ h + params.b_in @ x
        states[t] = h
    return states


def chamfer_l2(set_a: np.ndarray, set_b: np.ndarray) -> float:
    """Symmetric averaged squared nearest-neighbor distance between point sets."""
    set_a = np.asarray(set_a, dtype=np.float64)
    set_b = np.asarray(set_b, dtype=np.float64)
    if set_a.ndim != 2 or set_b.ndim != 2 or set_a.shape[0] == 0 or set_b.shape[0] == 0:
        raise ValidationError("chamfer_l2 needs two non-empty (n, dim) point sets")
    if set_a.shape[1] != set_b.shape[1]:
        raise ValidationError("point sets must share one dimensionality")
    d2 = np.sum((set_a[:, None, :] - set_b[None, :, :]) ** 2, axis=-1)
    return float(d2.min(axis=1).mean() + d2.min(axis=0).mean())


@dataclass(frozen=True)
class DecoderWeights:
    """Affine map from a state vector to a flattened k x 3 patch."""

    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise ValidationError("decoder weights must be (out, d) with bias (out,)")
        if w.shape[0] % 3 != 0:
            raise ValidationError("decoder output dim must be a multiple of 3")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValidationError("decoder weights contain non-finite values")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)

    @property
    def patch_size(self) -> int:
        return self.w.shape[0] // 3

    @classmethod
    def seeded(cls, patch_size: int, state_dim: int, seed: int, scale: float = 0.01) -> "DecoderWeights":
        rng = np.random.default_rng(seed)
        return cls(w=rng.normal(0.0, scale, size=(patch_size * 3, state_dim)), b=np.zeros(patch_size * 3))


@dataclass
class ReconTask:
    """Masked-reconstruction instance.

    ``features`` are serialized token features (B, G, C) and ``positions``
    the matching token centers (B, G, 3); ``masked`` flags the positions to
    reconstruct; ``targets`` holds one center-relative (k, 3) patch per
    masked position, ordered row-major over (batch, position).

    The recurrence consumes [feature, position] per step with masked features
    zeroed; centers stay visible everywhere (they locate the patches to
    rebuild, the geometry itself is hidden), so the state-space input dim
    must equal C + 3.
    """

    features: np.ndarray
    positions: np.ndarray
    masked: np.ndarray
    targets: np.ndarray
    ssm: SsmParams
    mode: str = "static"
    decoder: DecoderWeights | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.masked = np.asarray(self.masked, dtype=bool)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.features.ndim != 3:
            raise ValidationError("features must have shape (B, G, C)")
        if self.positions.shape != self.features.shape[:2] + (3,):
            raise ValidationError("positions must have shape (B, G, 3)")
        if self.masked.shape != self.features.shape[:2]:
            raise ValidationError("mask shape must match (B, G)")
        n_masked = int(self.masked.sum())
        if n_masked == 0:
            raise ValidationError("reconstruction needs at least one masked position")
        if self.targets.ndim != 3 or self.targets.shape[0] != n_masked or self.targets.shape[2] != 3:
            raise ValidationError(
                f"targets must have shape ({n_masked}, k, 3), got {self.targets.shape}"
            )
        if self.features.shape[2] + 3 != self.ssm.input_dim:
            raise ValidationError(
                f"state-space input dim must be feature dim + 3 "
                f"({self.features.shape[2] + 3}), got {self.ssm.input_dim}"
            )

    @property
    def patch_size(self) -> int:
        return self.targets.shape[1]

    def step_inputs(self) -> np.ndarray:
        """(B, G, C + 3) recurrence inputs: masked features zeroed, centers kept."""
        return np.concatenate([self.features * ~self.masked[:, :, None], self.positions], axis=-1)


def masked_states(task: ReconTask) -> np.ndarray:
    """States at masked positions after running the masked-input recurrence."""
    rows = [ssm_forward(seq, task.ssm, task.mode) for seq in task.step_inputs()]
    return np.concatenate([states[mask] for states, mask in zip(rows, task.masked)])


def _decode(states: np.ndarray, decoder: DecoderWeights) -> np.ndarray:
    flat = states @ decoder.w.T + decoder.b
    return flat.reshape(states.shape[0], -1, 3)


def _chamfer_batch_grad(preds: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean Chamfer over (M, k, 3) batches and its gradient w.r.t. predictions."""
    m, k = preds.shape[0], preds.shape[1]
    kt = targets.shape[1]
    diff = preds[:, :, None, :] - targets[:, None, :, :]
    d2 = np.sum(diff**2, axis=-1)
    nearest_t = d2.argmin(axis=2)
    nearest_p = d2.argmin(axis=1)
    loss = float((d2.min(axis=2).mean(axis=1) + d2.min(axis=1).mean(axis=1)).mean())
    grad = np.zeros_like(preds)
    rows = np.arange(m)[:, None]
    # prediction-to-target term
    matched = targets[rows, nearest_t]
    grad += 2.0 / k * (preds - matched)
    # target-to-prediction term, scattered onto each target's nearest prediction
    back = 2.0 / kt * (preds[rows, nearest_p] - targets)
    np.add.at(grad, (rows, nearest_p), back)
    return loss, grad / m


def reconstruction_loss(task: ReconTask, decoder: DecoderWeights) -> float:
    """Mean Chamfer loss over the masked patches."""
    preds = _decode(masked_states(task), decoder)
    loss, _ = _chamfer_batch_grad(preds, task.targets)
    return loss


def reconstruction_grads(
    task: ReconTask,
    decoder: DecoderWeights,
    train_ssm: bool = False,
    states: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and analytic gradients for the decoder (and optionally static A/B)."""
    if train_ssm and task.mode != "static":
        raise ValidationError("transition-matrix training is only supported in static mode")
    if states is None:
        states = masked_states(task)
    preds = _decode(states, decoder)
    loss, g_pred = _chamfer_batch_grad(preds, task.targets)
    g_flat = g_pred.reshape(states.shape[0], -1)
    grads = {"w": g_flat.T @ states, "b": g_flat.sum(axis=0)}
    if train_ssm:
        grads["a"], grads["b_in"] = _ssm_grads(task, g_flat @ decoder.w)
    return loss, grads


def _ssm_grads(task: ReconTask, g_states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Backprop through the static recurrence; g_states covers masked positions."""
    d = task.ssm.state_dim
    g_a = np.zeros_like(task.ssm.a)
    g_b = np.zeros_like(task.ssm.b_in)
    offset = 0
    for seq, mask in zip(task.step_inputs(), task.masked):
        states = ssm_forward(seq, task.ssm, "static")
        g_h = np.zeros((len(seq), d))
        g_h[mask] = g_states[offset : offset + int(mask.sum())]
        offset += int(mask.sum())
        lam = np.zeros(d)
        for t in range(len(seq) - 1, -1, -1):
            lam = g_h[t] + lam
            h_prev = states[t - 1] if t > 0 else np.zeros(d)
            g_a += np.outer(lam, h_prev)
            g_b += np.outer(lam, seq[t])
            lam = task.ssm.a.T @ lam
    return g_a, g_b


@dataclass
class TrainingTrace:
    """Loss curve of one optimization run; losses[i] is the loss after i updates."""

    losses: list[float]
    steps: int
    lr: float
    seed: int
    decoder: DecoderWeights
    ssm: SsmParams

    @property
    def init_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    def summary(self) -> dict:
        return {
            "init_loss": self.init_loss,
            "final_loss": self.final_loss,
            "steps": self.steps,
            "lr": self.lr,
            "seed": self.seed,
        }

    def csv_rows(self) -> list[tuple[int, float]]:
        return list(enumerate(self.losses))


def reconstruct_train(
    task: ReconTask,
    steps: int,
    lr: float,
    seed: int,
    train_ssm: bool = False,
) -> TrainingTrace:
    """Gradient descent on the mean Chamfer loss over masked patches.

    The decoder comes from the task when present, otherwise it is seeded from
    ``seed``. The trace has steps + 1 entries (loss before each update plus
    the final loss). A non-finite loss aborts with the failing step index.
    """
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    if lr < 0:
        raise ValidationError("lr must be >= 0")
    decoder = task.decoder or DecoderWeights.seeded(task.patch_size, task.ssm.state_dim, seed)
    ssm = task.ssm
    fixed_states = None if train_ssm else masked_states(task)

    def current_task() -> ReconTask:
        if not train_ssm:
            return task
        return ReconTask(
            features=task.features,
            positions=task.positions,
            masked=task.masked,
            targets=task.targets,
            ssm=ssm,
            mode=task.mode,
        )

    losses: list[float] = []
    for step in range(steps + 1):
        loss, grads = reconstruction_grads(
            current_task(), decoder, train_ssm=train_ssm, states=fixed_states
        )
        if not np.isfinite(loss):
            raise TrainingError("loss became non-finite", step=step)
        losses.append(loss)
        if step == steps:
            break
        decoder = DecoderWeights(w=decoder.w - lr * grads["w"], b=decoder.b - lr * grads["b"])
        if train_ssm:
            ssm = SsmParams(
                a=ssm.a - lr * grads["a"],
                b_in=ssm.b_in - lr * grads["b_in"],
                w_a=ssm.w_a,
                w_b=ssm.w_b,
            )
    return TrainingTrace(losses=losses, steps=steps, lr=lr, seed=seed, decoder=decoder, ssm=ssm)
