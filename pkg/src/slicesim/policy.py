"""Deep-Q admission agent.

The state is the vector of per-node CPU and per-link bandwidth availability
ratios. An action is a triple of priority weights in {0..10}, one per slice
type, enumerated on a configurable grid. Q-values come from a small
fully-connected network (ReLU hidden layers, linear output head per action)
trained by one-step temporal-difference regression against a periodically
synced target copy, with uniform experience replay. Exploration mixes greedy
selection with either Boltzmann sampling over Q-values or a uniform draw.

Everything here is plain numpy; no autodiff framework is involved, which
keeps checkpoints portable and the gradient easy to verify numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .slicegen import SliceRequest, SliceType
from .substrate import SubstrateNetwork

DEFAULT_LEVEL_WEIGHTS: dict[SliceType, int] = {
    SliceType.URLLC: 3,
    SliceType.EMBB: 2,
    SliceType.MMTC: 1,
}

CHECKPOINT_MAGIC = b"slicesim-qnet v1\n"


def encode_state(sn: SubstrateNetwork) -> np.ndarray:
    """Availability ratios, nodes first then links, in fixed id order."""
    out = np.empty(len(sn.nodes) + len(sn.links))
    for i, node in enumerate(sn.nodes):
        out[i] = node.cpu_available / node.cpu_capacity if node.cpu_capacity else 1.0
    base = len(sn.nodes)
    for j, link in enumerate(sn.links):
        out[base + j] = link.bw_available / link.bw_capacity if link.bw_capacity else 1.0
    return out


@dataclass(frozen=True)
class Action:
    p_embb: int
    p_urllc: int
    p_mmtc: int

    def weight(self, stype: SliceType) -> int:
        return {
            SliceType.EMBB: self.p_embb,
            SliceType.URLLC: self.p_urllc,
            SliceType.MMTC: self.p_mmtc,
        }[stype]


def action_grid(step: int = 2, max_weight: int = 10) -> tuple[Action, ...]:
    """All weight triples on {0, step, ..., max_weight}^3, in enumeration order."""
    if step < 1 or max_weight % step != 0:
        raise ValueError("step must be >= 1 and divide max_weight")
    values = range(0, max_weight + 1, step)
    return tuple(Action(e, u, m) for e in values for u in values for m in values)


class Experience(NamedTuple):
    state: np.ndarray
    action_index: int
    reward: float
    next_state: np.ndarray


class ReplayMemory:
    """Fixed-capacity ring buffer, oldest experience evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._buffer: list[Experience] = []
        self._position = 0
        self.inserted = 0

    def push(self, exp: Experience) -> None:
        if len(self._buffer) < self.capacity:
            self._buffer.append(exp)
        else:
            self._buffer[self._position] = exp
        self._position = (self._position + 1) % self.capacity
        self.inserted += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Experience]:
        idx = rng.choice(len(self._buffer), size=batch_size, replace=False)
        return [self._buffer[i] for i in idx]

    def __len__(self) -> int:
        return len(self._buffer)

    def __iter__(self):
        return iter(self._buffer)


@dataclass(frozen=True)
class ExplorationState:
    epsilon: float = 1.0
    epsilon_min: float = 0.05
    epsilon_decay: float = 0.995
    temperature: float = 1.0


def decay_epsilon(expl: ExplorationState) -> ExplorationState:
    return replace(expl, epsilon=max(expl.epsilon_min, expl.epsilon * expl.epsilon_decay))


def boltzmann_probs(
    q_values: Sequence[float] | np.ndarray,
    temperature: float,
    q_weighted: bool = False,
) -> np.ndarray:
    """Softmax distribution over actions, exp(q/temperature) up to a shift.

    The exponents are max-shifted before exponentiation so large magnitudes
    cannot overflow. With ``q_weighted`` each exponential mass is additionally
    multiplied by its raw Q-value; negative masses are clamped to zero and the
    rest renormalized (falling back to uniform when everything clamps away).
    """
    q = np.asarray(q_values, dtype=float)
    if q.size == 0:
        raise ValueError("q_values must be non-empty")
    if not np.all(np.isfinite(q)):
        raise ValueError("q_values must be finite")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    expo = np.exp((q - q.max()) / temperature)
    if q_weighted:
        mass = np.maximum(expo * q, 0.0)
        total = mass.sum()
        if total <= 0.0:
            return np.full(q.size, 1.0 / q.size)
        return mass / total
    return expo / expo.sum()


def select_action(
    q_values: np.ndarray,
    expl: ExplorationState,
    rng: np.random.Generator,
    explore: str = "boltzmann",
    q_weighted: bool = False,
) -> int:
    """Greedy with probability 1 - epsilon, otherwise an exploratory draw.

    ``explore`` picks the exploratory distribution: "boltzmann" samples from
    boltzmann_probs, "uniform" draws any action with equal probability.
    """
    if rng.random() >= expl.epsilon:
        return int(np.argmax(q_values))
    if explore == "uniform":
        return int(rng.integers(len(q_values)))
    probs = boltzmann_probs(q_values, expl.temperature, q_weighted=q_weighted)
    return int(rng.choice(len(q_values), p=probs))


class Prioritized(NamedTuple):
    request: SliceRequest
    priority: float


def prioritize(
    window: Sequence[SliceRequest],
    action: Action,
    level_weights: dict[SliceType, int] | None = None,
) -> list[Prioritized]:
    """Order a window's requests by type level times the action's type weight.

    Highest priority first; ties broken by earlier arrival, then lower id.
    The result is a permutation of the input.
    """
    levels = level_weights or DEFAULT_LEVEL_WEIGHTS
    scored = [Prioritized(req, float(levels[req.stype] * action.weight(req.stype))) for req in window]
    scored.sort(key=lambda item: (-item.priority, item.request.arrival_time, item.request.id))
    return scored


class QNetwork:
    """Fully-connected ReLU network with a linear output layer.

    Hidden layers start at uniform +-sqrt(6/(fan_in+fan_out)). The output
    layer is scaled down by ``output_scale`` so all action heads start nearly
    equal; without this the random init spread acts as phantom action
    preferences that a short run never corrects.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        rng: np.random.Generator,
        output_scale: float = 1.0,
    ):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        last = len(self.layer_sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_sizes, self.layer_sizes[1:])):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            if i == last:
                bound *= output_scale
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass keeping each layer's input for backpropagation."""
        activations = [np.asarray(x, dtype=float)]
        h = activations[0]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if i == last else np.maximum(z, 0.0)
            activations.append(h)
        return h, activations

    def backward(
        self, activations: list[np.ndarray], d_out: np.ndarray
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Gradients of a scalar loss given d(loss)/d(output)."""
        grad_w = [np.zeros_like(w) for w in self.weights]
        grad_b = [np.zeros_like(b) for b in self.biases]
        delta = d_out
        for i in range(len(self.weights) - 1, -1, -1):
            grad_w[i] = activations[i].T @ delta
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (activations[i] > 0.0)
        return grad_w, grad_b

    def apply_gradients(
        self, grad_w: Sequence[np.ndarray], grad_b: Sequence[np.ndarray], lr: float
    ) -> None:
        for w, gw in zip(self.weights, grad_w):
            w -= lr * gw
        for b, gb in zip(self.biases, grad_b):
            b -= lr * gb

    def copy_from(self, other: "QNetwork") -> None:
        for mine, theirs in zip(self.weights, other.weights):
            mine[...] = theirs
        for mine, theirs in zip(self.biases, other.biases):
            mine[...] = theirs


@dataclass(frozen=True)
class AgentParams:
    hidden: tuple[int, ...] = (128, 64)
    learning_rate: float = 0.02
    discount: float = 0.9
    replay_capacity: int = 10_000
    batch_size: int = 32
    sync_every: int = 200
    epsilon: float = 1.0
    epsilon_min: float = 0.05
    epsilon_decay: float = 0.995
    temperature: float = 1.0
    action_step: int = 2
    max_weight: int = 10
    train_steps_per_window: int = 4
    output_init_scale: float = 0.01
    q_weighted_boltzmann: bool = False


class QPolicy:
    """Evaluation + target networks, replay memory and exploration state."""

    def __init__(
        self,
        state_dim: int,
        params: AgentParams = AgentParams(),
        rng: np.random.Generator | None = None,
        explore: str = "boltzmann",
    ):
        self.params = params
        self.actions = action_grid(params.action_step, params.max_weight)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        sizes = (state_dim, *params.hidden, len(self.actions))
        self.eval_net = QNetwork(sizes, self.rng, output_scale=params.output_init_scale)
        self.target_net = QNetwork(sizes, self.rng, output_scale=params.output_init_scale)
        self.target_net.copy_from(self.eval_net)
        self.replay = ReplayMemory(params.replay_capacity)
        self.expl = ExplorationState(
            epsilon=params.epsilon,
            epsilon_min=params.epsilon_min,
            epsilon_decay=params.epsilon_decay,
            temperature=params.temperature,
        )
        self.explore = explore
        self.train_steps = 0

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self.eval_net.forward(state[None, :])[0]

    def select(self, state: np.ndarray) -> int:
        return select_action(
            self.q_values(state),
            self.expl,
            self.rng,
            explore=self.explore,
            q_weighted=self.params.q_weighted_boltzmann,
        )

    def observe(self, exp: Experience) -> None:
        self.replay.push(exp)

    def learn(self) -> float | None:
        """Run the configured number of replay train steps for one window."""
        if len(self.replay) < self.params.batch_size:
            return None
        loss = None
        for _ in range(self.params.train_steps_per_window):
            batch = self.replay.sample(self.params.batch_size, self.rng)
            loss = td_train_step(self, batch, self.params.discount, self.params.learning_rate)
            self.train_steps += 1
            if self.train_steps % self.params.sync_every == 0:
                sync_target(self)
        return loss

    def end_window(self) -> None:
        self.expl = decay_epsilon(self.expl)

    def save(self, path) -> None:
        save_checkpoint(self, path)

    def load(self, path) -> None:
        load_checkpoint(self, path)


def td_train_step(
    policy: QPolicy, batch: Sequence[Experience], discount: float, lr: float
) -> float:
    """One SGD step on the evaluation network's temporal-difference error.

    Targets are reward + discount * max_a Q_target(next_state); the loss is
    the mean squared error on the taken actions. Returns the loss before the
    parameter update.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    states = np.stack([e.state for e in batch])
    actions = np.array([e.action_index for e in batch])
    rewards = np.array([e.reward for e in batch], dtype=float)
    next_states = np.stack([e.next_state for e in batch])

    targets = rewards + discount * policy.target_net.forward(next_states).max(axis=1)
    q, activations = policy.eval_net.forward_cached(states)
    taken = q[np.arange(len(batch)), actions]
    err = taken - targets
    loss = float(np.mean(err**2))

    d_out = np.zeros_like(q)
    d_out[np.arange(len(batch)), actions] = 2.0 * err / len(batch)
    grad_w, grad_b = policy.eval_net.backward(activations, d_out)
    policy.eval_net.apply_gradients(grad_w, grad_b, lr)
    return loss


def sync_target(policy: QPolicy) -> None:
    """Copy evaluation weights into the target network, bit exact."""
    policy.target_net.copy_from(policy.eval_net)


# --- checkpointing -----------------------------------------------------------


def _write_net(fh, net: QNetwork) -> None:
    for w, b in zip(net.weights, net.biases):
        fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def _read_net(fh, net: QNetwork) -> None:
    for w, b in zip(net.weights, net.biases):
        w[...] = np.frombuffer(fh.read(w.size * 8), dtype="<f8").reshape(w.shape)
        b[...] = np.frombuffer(fh.read(b.size * 8), dtype="<f8")


def save_checkpoint(policy: QPolicy, path) -> None:
    """Binary layout: magic line, layer sizes line, then row-major float64
    weight and bias arrays for the evaluation and target networks."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write((" ".join(str(s) for s in policy.eval_net.layer_sizes) + "\n").encode())
        _write_net(fh, policy.eval_net)
        _write_net(fh, policy.target_net)


def load_checkpoint(policy: QPolicy, path) -> None:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file: {magic!r}")
        sizes = tuple(int(tok) for tok in fh.readline().split())
        if sizes != policy.eval_net.layer_sizes:
            raise ValueError(f"layer sizes {sizes} do not match policy {policy.eval_net.layer_sizes}")
        _read_net(fh, policy.eval_net)
        _read_net(fh, policy.target_net)
