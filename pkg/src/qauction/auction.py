"""Learned auction mechanisms and their regret-penalized training loop.

Two variants share one architecture skeleton: an LSTM reads the bid matrix
item by item (each timestep is the length-n column of bids for one item),
a hidden stack transforms the final LSTM state, and two heads emit
(a) per-item allocation probabilities via a column softmax over the n+1
buyer-or-unsold slots and (b) a sigmoid payment fraction per buyer, so a
buyer is charged a fraction of its allocated reported value. The fraction
construction bounds payments by allocated reported value, which makes
truthful participation individually rational for every input.

"dla" uses a plain dense hidden layer; "qdla" routes a q-unit bottleneck
through the quantum entangler layer and widens back with a second dense
layer. Gradients through the quantum layer come from the parameter-shift
rule (see quantum.shift_vjp) and compose with the tape like any other op.

Training maximizes revenue subject to near-zero regret via an augmented
Lagrangian: the best misreport per buyer is located by projected gradient
ascent on that buyer's utility (others truthful), and the clamped utility
gains enter the loss weighted by per-buyer multipliers that grow each epoch.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import quantum
from .autodiff import (
    Tape,
    Tensor,
    adam_init,
    adam_step,
    gather_rows,
    matmul,
    mul,
    narrow,
    neg,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    splice_rows,
    sub,
    tmean,
    tsum,
)
from .baselines import GridSpec, regret_grid_oracle

__all__ = [
    "NetConfig",
    "SearchConfig",
    "LagrangianState",
    "RegretEstimate",
    "MetricsRow",
    "TrainResult",
    "TrainingDiverged",
    "AuctionNet",
    "buyer_utility",
    "empirical_revenue",
    "misreport_ascent",
    "empirical_regret",
    "training_loss",
    "lambda_update",
    "ramped_multipliers",
    "train",
    "evaluate_net",
]

# Philox stream tags (second key word, high 32 bits; low bits carry a sample
# index where a stream is per-sample).
STREAM_WEIGHTS = 1
STREAM_SHUFFLE = 2
STREAM_MISREPORT_TRAIN = 3
STREAM_MISREPORT_TEST = 4

IR_TOLERANCE = 1e-12


def stream_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Counter-based Philox generator keyed by (seed, stream, index)."""
    key = np.array([seed, (stream << 32) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class NetConfig:
    """Architecture hyperparameters of one mechanism variant."""

    variant: str  # "dla" or "qdla"
    lstm_size: int
    hidden_size: int
    qubits: int = 0
    layers: int = 0
    lr: float = 0.001

    def __post_init__(self):
        if self.variant not in ("dla", "qdla"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "qdla" and (self.qubits < 1 or self.layers < 1):
            raise ValueError("qdla needs qubits >= 1 and layers >= 1")

    @staticmethod
    def dla_default() -> "NetConfig":
        return NetConfig(variant="dla", lstm_size=32, hidden_size=32, lr=0.001)

    @staticmethod
    def qdla_default() -> "NetConfig":
        return NetConfig(variant="qdla", lstm_size=4, hidden_size=16,
                         qubits=4, layers=6, lr=0.01)


@dataclass(frozen=True)
class SearchConfig:
    """Projected-gradient misreport search: step count, step size, grid step
    used by audits."""

    steps: int = 20
    step_size: float = 0.1
    grid_step: float = 0.05


@dataclass
class LagrangianState:
    """Per-buyer regret multipliers and the quadratic penalty weight."""

    lam: np.ndarray
    rho: float = 1.0

    @staticmethod
    def fresh(n: int, lam_init: float = 5.0, rho: float = 1.0) -> "LagrangianState":
        return LagrangianState(lam=np.full(n, float(lam_init)), rho=float(rho))


def ramped_multipliers(accumulated: np.ndarray, lam_init: float, rho: float,
                       epoch: int, ramp_epochs: int) -> LagrangianState:
    """Multipliers for one epoch: accumulated ALM state under a scheduled
    floor that reaches lam_init at `ramp_epochs`.

    Enforcing the full regret weight from the first batch traps small
    encoders in mechanisms that ignore some buyers' bids outright (regret
    is trivially zero there, and revenue stalls); ramping the floor lets
    allocation learning happen first. ramp_epochs=1 gives the constant
    schedule. The per-epoch multipliers never decrease: both the floor and
    the accumulated state are non-decreasing in the epoch.
    """
    floor = lam_init * min(1.0, epoch / max(ramp_epochs, 1))
    return LagrangianState(lam=np.maximum(accumulated, floor), rho=rho)


@dataclass
class RegretEstimate:
    """Batch-mean clamped regret per buyer plus the misreports that won."""

    rgt: np.ndarray  # (n,)
    misreports: np.ndarray  # (B, n, m)


@dataclass
class MetricsRow:
    epoch: int
    revenue_train: float
    revenue_test: float
    regret_test: tuple
    ir_violations: int
    lambda_mean: float
    wallclock_s: float


@dataclass
class TrainResult:
    net: "AuctionNet"
    rows: list
    losses: list
    lagrangian: LagrangianState


class AuctionNet:
    """One learned mechanism: parameter store plus tape-building forward."""

    def __init__(self, n: int, m: int, cfg: NetConfig, rng: np.random.Generator):
        self.n = n
        self.m = m
        self.cfg = cfg
        self.params: dict[str, np.ndarray] = {}
        h = cfg.lstm_size

        def dense(name, fan_in, fan_out):
            bound = 1.0 / np.sqrt(fan_in)
            self.params[name + "_w"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.params[name + "_b"] = np.zeros((1, fan_out))

        bound = 1.0 / np.sqrt(n)
        self.params["lstm_wx"] = rng.uniform(-bound, bound, size=(n, 4 * h))
        bound = 1.0 / np.sqrt(h)
        self.params["lstm_wh"] = rng.uniform(-bound, bound, size=(h, 4 * h))
        bias = np.zeros((1, 4 * h))
        bias[0, h:2 * h] = 1.0  # forget gate open at init
        self.params["lstm_b"] = bias

        if cfg.variant == "dla":
            dense("hidden", h, cfg.hidden_size)
        else:
            dense("qin", h, cfg.qubits)
            self.params["qweights"] = rng.uniform(0.0, 2.0 * np.pi,
                                                  size=(cfg.layers, cfg.qubits))
            dense("qout", cfg.qubits, cfg.hidden_size)
        dense("alloc", cfg.hidden_size, (n + 1) * m)
        dense("pay", cfg.hidden_size, n)

    def bind(self, tape: Tape, trainable: bool = True) -> dict[str, Tensor]:
        return {name: tape.leaf(value, requires_grad=trainable)
                for name, value in self.params.items()}

    def _lstm(self, bids: Tensor, p: dict[str, Tensor]) -> Tensor:
        batch = bids.value.shape[0]
        h_size = self.cfg.lstm_size
        state = bids.tape.constant(np.zeros((batch, 2 * h_size)))
        for t in range(self.m):
            state = _lstm_cell(state, bids, t, p["lstm_wx"], p["lstm_wh"],
                               p["lstm_b"], h_size)
        return narrow(state, 1, 0, h_size)

    def _hidden(self, feat: Tensor, p: dict[str, Tensor]) -> Tensor:
        if self.cfg.variant == "dla":
            return relu(matmul(feat, p["hidden_w"]) + p["hidden_b"])
        acts = relu(matmul(feat, p["qin_w"]) + p["qin_b"])
        q_out = _quantum_node(acts, p["qweights"])
        return relu(matmul(q_out, p["qout_w"]) + p["qout_b"])

    def forward(self, tape: Tape, bids, params: dict[str, Tensor] | None = None,
                trainable: bool = True):
        """Batched forward: bids (B, n, m) -> allocation (B, n+1, m),
        payments (B, n), payment fractions (B, n), bound params."""
        if params is None:
            params = self.bind(tape, trainable)
        if not isinstance(bids, Tensor):
            bids = tape.constant(np.asarray(bids, dtype=np.float64))
        batch = bids.value.shape[0]

        feat = self._lstm(bids, params)
        hidden = self._hidden(feat, params)

        logits = matmul(hidden, params["alloc_w"]) + params["alloc_b"]
        alloc = softmax(reshape(logits, (batch, self.n + 1, self.m)), axis=1)
        frac = sigmoid(matmul(hidden, params["pay_w"]) + params["pay_b"])
        alloc_value = tsum(mul(narrow(alloc, 1, 0, self.n), bids), axis=2)
        pay = mul(frac, alloc_value)
        return alloc, pay, frac, params

    # Convenience single-profile / plain-numpy surfaces -------------------

    def encode_bids(self, bids: np.ndarray) -> np.ndarray:
        """Final LSTM hidden state for one n x m bid matrix."""
        tape = Tape()
        p = self.bind(tape, trainable=False)
        bids_node = tape.constant(np.asarray(bids, dtype=np.float64)[None])
        return self._lstm(bids_node, p).value[0]

    def mechanism_forward(self, bids: np.ndarray):
        """One n x m bid matrix -> ((n+1) x m allocation, n payments)."""
        z, p = self.forward_batch(np.asarray(bids, dtype=np.float64)[None])
        return z[0], p[0]

    def forward_batch(self, bids: np.ndarray):
        """Plain-numpy batched forward matching the classical mechanisms'
        (S, n, m) -> (allocation, payments) signature."""
        tape = Tape()
        alloc, pay, _, _ = self.forward(tape, bids, trainable=False)
        return alloc.value, pay.value


def _lstm_cell(state: Tensor, bids: Tensor, t: int, wx: Tensor, wh: Tensor,
               b: Tensor, h_size: int) -> Tensor:
    """One fused LSTM step over bid column t; state is [h | c] side by side.

    A single tape node per timestep keeps batched training cheap; the vjp
    is the standard cell backward, written out by hand. Gate blocks of the
    preactivation are ordered (input, forget, output, candidate).
    """
    tape = state.tape
    h_prev = state.value[:, :h_size]
    c_prev = state.value[:, h_size:]
    x_t = np.ascontiguousarray(bids.value[:, :, t])
    pre = x_t @ wx.value + h_prev @ wh.value + b.value
    sig = 1.0 / (1.0 + np.exp(-pre[:, :3 * h_size]))
    gate_in = sig[:, :h_size]
    gate_forget = sig[:, h_size:2 * h_size]
    gate_out = sig[:, 2 * h_size:]
    cand = np.tanh(pre[:, 3 * h_size:])
    c_new = gate_forget * c_prev + gate_in * cand
    tanh_c = np.tanh(c_new)
    value = np.concatenate([gate_out * tanh_c, c_new], axis=1)

    def vjp(g, needs):
        gh = g[:, :h_size]
        gc = g[:, h_size:] + gh * gate_out * (1.0 - tanh_c * tanh_c)
        dpre = np.empty_like(pre)
        dpre[:, :h_size] = (gc * cand) * gate_in * (1.0 - gate_in)
        dpre[:, h_size:2 * h_size] = (gc * c_prev) * gate_forget * (1.0 - gate_forget)
        dpre[:, 2 * h_size:3 * h_size] = (gh * tanh_c) * gate_out * (1.0 - gate_out)
        dpre[:, 3 * h_size:] = (gc * gate_in) * (1.0 - cand * cand)
        out = [None] * 5
        if needs[0]:
            out[0] = np.concatenate([dpre @ wh.value.T, gc * gate_forget], axis=1)
        if needs[1]:
            dbids = np.zeros_like(bids.value)
            dbids[:, :, t] = dpre @ wx.value.T
            out[1] = dbids
        if needs[2]:
            out[2] = x_t.T @ dpre
        if needs[3]:
            out[3] = h_prev.T @ dpre
        if needs[4]:
            out[4] = dpre.sum(axis=0, keepdims=True)
        return out

    return tape.custom("lstm_cell", value, (state, bids, wx, wh, b), vjp)


def _quantum_node(acts: Tensor, weights: Tensor) -> Tensor:
    """Record the quantum hidden layer on the tape; its vjp runs the
    parameter-shift rule, skipping weight shifts when weights are frozen."""
    angles = quantum.input_angles(acts.value)
    out = quantum.forward_batch(angles, weights.value)
    act_vals, w_vals = acts.value, weights.value

    def vjp(g, needs):
        return quantum.shift_vjp(g, act_vals, angles, w_vals, needs[0], needs[1])

    return acts.tape.custom("qlayer", out, (acts, weights), vjp)


# ---------------------------------------------------------------------------
# Utilities, revenue, regret
# ---------------------------------------------------------------------------


def buyer_utility(values: np.ndarray, alloc: np.ndarray, pay: np.ndarray, buyer: int) -> float:
    """Additive utility: allocated true value minus payment."""
    values = np.asarray(values, dtype=np.float64)
    return float((alloc[buyer, :] * values[buyer, :]).sum() - pay[buyer])


def empirical_revenue(payments: np.ndarray) -> float:
    """Mean over samples of total payments; rejects an empty batch."""
    payments = np.asarray(payments, dtype=np.float64)
    if payments.size == 0:
        raise ValueError("empty batch has no revenue")
    return float(payments.sum(axis=-1).mean())


def _utility_node(alloc: Tensor, pay: Tensor, values: np.ndarray, buyer: int) -> Tensor:
    """(B,) utility of one buyer at true values, as a tape node."""
    batch, m = values.shape[0], values.shape[2]
    z_row = reshape(narrow(alloc, 1, buyer, 1), (batch, m))
    won_value = tsum(mul(z_row, values[:, buyer, :]), axis=1)
    p_row = reshape(narrow(pay, 1, buyer, 1), (batch,))
    return sub(won_value, p_row)


def _ascent(net: AuctionNet, values: np.ndarray, buyers: np.ndarray, steps: int,
            step_size: float, init: np.ndarray):
    """Projected gradient ascent of per-sample buyer utility over bid rows.

    Rows climb independently: sample s varies buyer buyers[s]'s bids inside
    profile values[s]. The stacked layout lets one tape carry every (sample,
    buyer, initialization) trajectory of a batch at once. Returns the best
    point visited per row (the initialization itself is always scored).
    """
    sample = np.arange(values.shape[0])
    v_rows = values[sample, buyers, :]
    x = init.copy()
    best_u = np.full(values.shape[0], -np.inf)
    best_x = x.copy()

    def score(u_vals, xs):
        improved = u_vals > best_u
        best_u[improved] = u_vals[improved]
        best_x[improved] = xs[improved]

    def utility_at(x_arr, need_grad):
        tape = Tape()
        x_node = tape.leaf(x_arr, requires_grad=need_grad)
        bids = splice_rows(values, x_node, buyers)
        alloc, pay, _, _ = net.forward(tape, bids, trainable=False)
        won_value = tsum(mul(gather_rows(alloc, buyers), v_rows), axis=1)
        return tape, x_node, sub(won_value, gather_rows(pay, buyers))

    for _ in range(steps):
        tape, x_node, u = utility_at(x, True)
        score(u.value, x)
        tape.backward(tsum(u))
        x = np.clip(x + step_size * x_node.grad, 0.0, 1.0)

    _, _, u = utility_at(x, False)
    score(u.value, x)
    return best_x, best_u


def misreport_ascent(net: AuctionNet, values: np.ndarray, buyer: int,
                     steps: int, step_size: float,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Best misreport row for one buyer on one profile.

    Runs two trajectories (truthful and uniform-random initialization; the
    truthful starting point itself is always scored) and returns the argmax.
    """
    if steps < 1:
        raise ValueError("misreport search needs steps >= 1")
    values = np.asarray(values, dtype=np.float64)
    if rng is None:
        rng = np.random.default_rng(0)
    stacked = np.repeat(values[None], 2, axis=0)
    init = np.stack([values[buyer, :], rng.uniform(size=values.shape[1])])
    best_x, best_u = _ascent(net, stacked, np.array([buyer, buyer]),
                             steps, step_size, init)
    return best_x[int(best_u.argmax())]


def _batch_misreports(net: AuctionNet, values: np.ndarray, search: SearchConfig,
                      seed: int, stream: int, sample_indices: np.ndarray):
    """Best misreports for every (sample, buyer); returns (B, n, m) bids and
    the (B, n) best utilities found.

    All n buyers and both initializations ride one stacked ascent: row
    block i*B..(i+1)*B varies buyer i from truth, the second half repeats
    the blocks from the per-sample random point.
    """
    batch, n, m = values.shape
    random_init = np.empty((batch, m))
    for row, idx in enumerate(sample_indices):
        random_init[row] = stream_rng(seed, stream, int(idx)).uniform(size=m)

    tiled = np.tile(values, (2 * n, 1, 1))
    buyers = np.tile(np.repeat(np.arange(n), batch), 2)
    truth_init = values.transpose(1, 0, 2).reshape(n * batch, m)
    init = np.concatenate([truth_init, np.tile(random_init, (n, 1))], axis=0)

    best_x, best_u = _ascent(net, tiled, buyers, search.steps,
                             search.step_size, init)
    bx = best_x.reshape(2, n, batch, m)
    bu = best_u.reshape(2, n, batch)
    take_rand = bu[1] > bu[0]
    mis = np.where(take_rand[:, :, None], bx[1], bx[0]).transpose(1, 0, 2)
    best = np.where(take_rand, bu[1], bu[0]).T
    return np.ascontiguousarray(mis), best


def _truthful_utilities(net: AuctionNet, values: np.ndarray):
    """(B, n) truthful utilities plus the batch (allocation, payments)."""
    alloc, pay = net.forward_batch(values)
    n = values.shape[1]
    u = (alloc[:, :n, :] * values).sum(axis=2) - pay
    return u, alloc, pay


def empirical_regret(mechanism, values: np.ndarray, search: SearchConfig = SearchConfig(),
                     seed: int = 0, stream: int = STREAM_MISREPORT_TEST,
                     sample_indices: np.ndarray | None = None) -> RegretEstimate:
    """Batch-mean clamped regret per buyer.

    For an AuctionNet the misreports come from gradient ascent; for a
    classical batched mechanism (not ascent-differentiable) the grid oracle
    is the fallback search.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] == 0:
        raise ValueError("empty batch has no regret")
    batch, n, m = values.shape
    if sample_indices is None:
        sample_indices = np.arange(batch)

    if isinstance(mechanism, AuctionNet):
        mis, best_u = _batch_misreports(mechanism, values, search, seed, stream,
                                        sample_indices)
        u_truth, _, _ = _truthful_utilities(mechanism, values)
        gains = np.maximum(best_u - u_truth, 0.0)
        return RegretEstimate(rgt=gains.mean(axis=0), misreports=mis)

    grid = GridSpec(step=search.grid_step, dims=m)
    rgt = np.zeros(n)
    mis = values.copy()
    for b in range(batch):
        rgt += regret_grid_oracle(mechanism, values[b], grid)
    return RegretEstimate(rgt=rgt / batch, misreports=mis)


# ---------------------------------------------------------------------------
# Loss and training
# ---------------------------------------------------------------------------


def training_loss(tape: Tape, net: AuctionNet, values: np.ndarray,
                  misreports: np.ndarray, lag: LagrangianState,
                  params: dict[str, Tensor] | None = None):
    """Augmented-Lagrangian batch loss as a scalar tape node.

    loss = -revenue + sum_i lambda_i * rgt_i + (rho/2) * sum_i rgt_i^2,
    with rgt_i the batch-mean clamped utility gain at the given misreports.
    Returns (loss, params, stats dict with float revenue / per-buyer rgt).
    """
    n = net.n
    if params is None:
        params = net.bind(tape, trainable=True)
    alloc, pay, _, _ = net.forward(tape, values, params=params)
    revenue = tmean(tsum(pay, axis=1))

    loss = neg(revenue)
    rgt_values = np.empty(n)
    for i in range(n):
        bids_i = values.copy()
        bids_i[:, i, :] = misreports[:, i, :]
        alloc_i, pay_i, _, _ = net.forward(tape, bids_i, params=params)
        u_mis = _utility_node(alloc_i, pay_i, values, i)
        u_truth = _utility_node(alloc, pay, values, i)
        rgt_i = tmean(relu(sub(u_mis, u_truth)))
        rgt_values[i] = float(rgt_i.value)
        loss = loss + scale(rgt_i, float(lag.lam[i])) + scale(mul(rgt_i, rgt_i), lag.rho / 2.0)

    stats = {"revenue": float(revenue.value), "rgt": rgt_values}
    return loss, params, stats


def lambda_update(lag: LagrangianState, rgt: np.ndarray) -> LagrangianState:
    """Multiplier ascent lambda_i += rho * rgt_i; rho stays fixed."""
    return LagrangianState(lam=lag.lam + lag.rho * np.asarray(rgt, dtype=np.float64),
                           rho=lag.rho)


def evaluate_net(net: AuctionNet, values: np.ndarray, search: SearchConfig,
                 seed: int, batch_size: int = 100):
    """Test-set metrics: (revenue, per-buyer regret, IR violation count).

    Misreport initializations are keyed by (seed, sample index within
    `values`), so repeated evaluation reproduces identical numbers.
    """
    total = values.shape[0]
    n = values.shape[1]
    revenue_sum = 0.0
    rgt_sum = np.zeros(n)
    ir_violations = 0
    for start in range(0, total, batch_size):
        chunk = values[start:start + batch_size]
        u_truth, _, pay = _truthful_utilities(net, chunk)
        revenue_sum += pay.sum()
        ir_violations += int((u_truth.min(axis=1) < -IR_TOLERANCE).sum())
        est = empirical_regret(net, chunk, search, seed, STREAM_MISREPORT_TEST,
                               sample_indices=np.arange(start, start + chunk.shape[0]))
        rgt_sum += est.rgt * chunk.shape[0]
    return revenue_sum / total, rgt_sum / total, ir_violations


def train(train_values: np.ndarray, test_values: np.ndarray, cfg: NetConfig,
          epochs: int, seed: int, batch_size: int = 100,
          search: SearchConfig = SearchConfig(), lam_init: float = 5.0,
          rho: float = 1.0, lam_ramp_epochs: int = 5, log=None) -> TrainResult:
    """Full training run; deterministic given (cfg, seed).

    Mini-batches are reshuffled each epoch, Adam updates every parameter
    (quantum weights included), the regret multipliers follow the ramped
    floor plus one ALM step per epoch with the epoch's mean training
    regret, and the test set is scored after every epoch. Raises
    TrainingDiverged on a non-finite loss.
    """
    train_values = np.asarray(train_values, dtype=np.float64)
    test_values = np.asarray(test_values, dtype=np.float64)
    if train_values.shape[0] == 0:
        raise ValueError("empty training set")
    n, m = train_values.shape[1], train_values.shape[2]

    net = AuctionNet(n, m, cfg, stream_rng(seed, STREAM_WEIGHTS))
    accumulated = np.zeros(n)
    lag = LagrangianState(lam=accumulated, rho=rho)
    opt = adam_init(net.params, cfg.lr)
    shuffle_rng = stream_rng(seed, STREAM_SHUFFLE)

    rows: list[MetricsRow] = []
    losses: list[float] = []
    for epoch in range(1, epochs + 1):
        started = time.perf_counter()
        lag = ramped_multipliers(accumulated, lam_init, rho, epoch, lam_ramp_epochs)
        order = shuffle_rng.permutation(train_values.shape[0])
        revenue_acc = 0.0
        rgt_acc = np.zeros(n)
        loss_acc = 0.0
        batches = 0
        for start in range(0, order.size, batch_size):
            idx = order[start:start + batch_size]
            batch = train_values[idx]
            mis, _ = _batch_misreports(net, batch, search, seed,
                                       STREAM_MISREPORT_TRAIN, idx)
            tape = Tape()
            loss, params, stats = training_loss(tape, net, batch, mis, lag)
            if not np.isfinite(loss.value):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}")
            tape.backward(loss)
            grads = {name: node.grad for name, node in params.items()}
            adam_step(net.params, grads, opt)

            revenue_acc += stats["revenue"]
            rgt_acc += stats["rgt"]
            loss_acc += float(loss.value)
            batches += 1

        epoch_rgt = rgt_acc / batches
        accumulated = lambda_update(lag, epoch_rgt).lam
        losses.append(loss_acc / batches)

        revenue_test, rgt_test, ir_count = evaluate_net(net, test_values, search,
                                                        seed, batch_size)
        row = MetricsRow(
            epoch=epoch,
            revenue_train=revenue_acc / batches,
            revenue_test=float(revenue_test),
            regret_test=tuple(float(r) for r in rgt_test),
            ir_violations=ir_count,
            lambda_mean=float(lag.lam.mean()),
            wallclock_s=time.perf_counter() - started,
        )
        rows.append(row)
        if log is not None:
            log(row)
    return TrainResult(net=net, rows=rows, losses=losses,
                       lagrangian=LagrangianState(lam=accumulated, rho=rho))
