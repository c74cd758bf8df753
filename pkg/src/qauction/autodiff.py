"""Minimal reverse-mode automatic differentiation over dense float64 tensors.

Define-by-run: every forward op appends a node to a Tape; backward walks the
tape once in reverse creation order (creation order is topological by
construction). Arrays are plain numpy float64 throughout; no broadcasting
beyond trailing/leading-axis rules that numpy itself applies, and gradients
are un-broadcast by summing over the expanded axes.

Also houses the Adam optimizer and a finite-difference gradient checker used
by the test suite and the training loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Tape",
    "Tensor",
    "matmul",
    "add",
    "sub",
    "mul",
    "neg",
    "scale",
    "relu",
    "sigmoid",
    "tanh",
    "softmax",
    "softmax_columns",
    "tsum",
    "tmean",
    "reshape",
    "narrow",
    "splice_rows",
    "gather_rows",
    "AdamState",
    "adam_init",
    "adam_step",
    "grad_check",
]


class Tensor:
    """A node on a tape: a float64 ndarray plus backward bookkeeping.

    `grad` is populated by `Tape.backward`; it is None for nodes that do not
    require gradients and zero for requires-grad leaves with no influence on
    the seed.
    """

    __slots__ = ("tape", "id", "op", "value", "parents", "_vjp", "requires_grad", "grad")

    def __init__(self, tape, node_id, op, value, parents, vjp, requires_grad):
        self.tape = tape
        self.id = node_id
        self.op = op
        self.value = value
        self.parents = parents
        self._vjp = vjp
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None):
        return tmean(self, axis=axis)

    def __repr__(self):
        return f"Tensor(id={self.id}, op={self.op!r}, shape={self.value.shape})"


class Tape:
    """Ordered record of forward operations enabling one reverse sweep.

    `backward_visits` counts node visits of the most recent backward pass;
    the pass touches each node exactly once.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.backward_visits = 0

    def leaf(self, value, requires_grad=False) -> Tensor:
        value = np.asarray(value, dtype=np.float64)
        return self._record("leaf", value, (), None, requires_grad)

    def constant(self, value) -> Tensor:
        return self.leaf(value, requires_grad=False)

    def custom(self, op, value, parents, vjp) -> Tensor:
        """Record an externally computed op. `vjp(g, needs)` returns one
        gradient array (or None) per parent; `needs` flags which are wanted."""
        requires = any(p.requires_grad for p in parents)
        return self._record(op, np.asarray(value, dtype=np.float64), tuple(parents), vjp, requires)

    def _record(self, op, value, parents, vjp, requires_grad) -> Tensor:
        node = Tensor(self, len(self.nodes), op, value, parents, vjp, requires_grad)
        self.nodes.append(node)
        return node

    def backward(self, seed: Tensor) -> None:
        """Reverse sweep from a scalar seed; populates `.grad` on every
        requires-grad node reachable below it (zeros for untouched leaves)."""
        if seed.tape is not self:
            raise ValueError("seed tensor belongs to a different tape")
        if seed.value.size != 1:
            raise ValueError(f"backward seed must be scalar, got shape {seed.value.shape}")

        for node in self.nodes:
            node.grad = None
        seed.grad = np.ones_like(seed.value)

        self.backward_visits = 0
        for node in reversed(self.nodes):
            self.backward_visits += 1
            if node.grad is None or node._vjp is None:
                continue
            needs = tuple(p.requires_grad for p in node.parents)
            if not any(needs):
                continue
            parent_grads = node._vjp(node.grad, needs)
            for parent, g in zip(node.parents, parent_grads):
                if g is None:
                    continue
                # Accumulation never mutates in place, so views/aliases are safe.
                parent.grad = g if parent.grad is None else parent.grad + g

        # Leaves the seed never reached still get a well-defined zero gradient.
        for node in self.nodes:
            if node.requires_grad and node.grad is None:
                node.grad = np.zeros_like(node.value)


def _as_value(x):
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Tensor):
            return x.tape
    raise TypeError("at least one operand must be a Tensor")


def _sum_to_shape(g, shape):
    """Undo numpy broadcasting: reduce g back to `shape` by summing."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _binary(op_name, a, b, forward, vjp_builder):
    tape = _tape_of(a, b)
    av, bv = _as_value(a), _as_value(b)
    value = forward(av, bv)
    parents = tuple(x for x in (a, b) if isinstance(x, Tensor))
    full_vjp = vjp_builder(av, bv)

    def vjp(g, needs):
        ga, gb = full_vjp(g)
        out = []
        if isinstance(a, Tensor):
            out.append(_sum_to_shape(ga, av.shape) if needs[len(out)] else None)
        if isinstance(b, Tensor):
            out.append(_sum_to_shape(gb, bv.shape) if needs[len(out)] else None)
        return out

    return tape.custom(op_name, value, parents, vjp)


def add(a, b):
    return _binary("add", a, b, lambda x, y: x + y, lambda x, y: lambda g: (g, g))


def sub(a, b):
    return _binary("sub", a, b, lambda x, y: x - y, lambda x, y: lambda g: (g, -g))


def mul(a, b):
    return _binary("mul", a, b, lambda x, y: x * y, lambda x, y: lambda g: (g * y, g * x))


def neg(x: Tensor) -> Tensor:
    return x.tape.custom("neg", -x.value, (x,), lambda g, needs: (-g,))


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return x.tape.custom("scale", c * x.value, (x,), lambda g, needs: (c * g,))


def matmul(a: Tensor, b) -> Tensor:
    tape = _tape_of(a, b)
    av, bv = _as_value(a), _as_value(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {av.shape} @ {bv.shape}")
    if av.shape[1] != bv.shape[0]:
        raise ValueError(f"matmul inner dimensions differ: {av.shape} @ {bv.shape}")
    value = av @ bv
    parents = tuple(x for x in (a, b) if isinstance(x, Tensor))

    def vjp(g, needs):
        out = []
        if isinstance(a, Tensor):
            out.append(g @ bv.T if needs[len(out)] else None)
        if isinstance(b, Tensor):
            out.append(av.T @ g if needs[len(out)] else None)
        return out

    return tape.custom("matmul", value, parents, vjp)


def relu(x: Tensor) -> Tensor:
    mask = x.value > 0.0  # subgradient at the kink is 0
    return x.tape.custom("relu", np.where(mask, x.value, 0.0), (x,),
                         lambda g, needs: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.value))
    return x.tape.custom("sigmoid", s, (x,), lambda g, needs: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.value)
    return x.tape.custom("tanh", t, (x,), lambda g, needs: (g * (1.0 - t * t),))


def softmax(x: Tensor, axis: int) -> Tensor:
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def vjp(g, needs):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return x.tape.custom("softmax", s, (x,), vjp)


def softmax_columns(x: Tensor) -> Tensor:
    """Column-wise softmax of a rows x cols matrix: each column sums to 1."""
    if x.value.ndim != 2:
        raise ValueError(f"softmax_columns expects a 2-D tensor, got shape {x.value.shape}")
    return softmax(x, axis=0)


def tsum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    value = x.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g, needs):
        if axis is None:
            return (np.broadcast_to(g, x.value.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, x.value.shape).copy(),)

    return x.tape.custom("sum", value, (x,), vjp)


def tmean(x: Tensor, axis=None) -> Tensor:
    count = x.value.size if axis is None else x.value.shape[axis]
    return scale(tsum(x, axis=axis), 1.0 / count)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    return x.tape.custom("reshape", x.value.reshape(shape), (x,),
                         lambda g, needs: (g.reshape(x.value.shape),))


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    idx = [slice(None)] * x.value.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def vjp(g, needs):
        out = np.zeros_like(x.value)
        out[idx] = g
        return (out,)

    return x.tape.custom("narrow", x.value[idx].copy(), (x,), vjp)


def splice_rows(base, x: Tensor, rows) -> Tensor:
    """Constant (S, n, m) array with per-sample axis-1 row `rows[s]` replaced
    by x[s]. Used by misreport search: gradients flow only into the spliced
    rows."""
    base = np.asarray(base, dtype=np.float64)
    rows = np.asarray(rows)
    sample = np.arange(base.shape[0])
    value = base.copy()
    value[sample, rows, :] = x.value

    def vjp(g, needs):
        return (g[sample, rows, :],)

    return x.tape.custom("splice_rows", value, (x,), vjp)


def gather_rows(x: Tensor, rows) -> Tensor:
    """Per-sample axis-1 row selection: out[s] = x[s, rows[s]]."""
    rows = np.asarray(rows)
    sample = np.arange(x.value.shape[0])

    def vjp(g, needs):
        out = np.zeros_like(x.value)
        out[sample, rows] = g
        return (out,)

    return x.tape.custom("gather_rows", x.value[sample, rows], (x,), vjp)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment estimates keyed like the parameter dict."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: dict, lr: float) -> AdamState:
    state = AdamState(lr=lr)
    for name, p in params.items():
        state.m[name] = np.zeros_like(p)
        state.v[name] = np.zeros_like(p)
    return state


def adam_step(params: dict, grads: dict, state: AdamState):
    """One bias-corrected Adam update, in place; returns (params, state)."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r} at step {state.t + 1}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    return params, state


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def grad_check(f, params, h: float = 1e-5, exclude=None) -> float:
    """Max relative error between tape gradients and central differences.

    `f(tape, tensors)` must build a scalar Tensor from leaf tensors created
    on the given tape. `params` is a list of ndarrays. `exclude` optionally
    gives one boolean mask per parameter; True entries are skipped (e.g.
    relu kink points). Relative error uses denominator max(|a|, |b|, 1e-4):
    components whose true gradient sits at rounding scale (dead relu paths)
    would otherwise compare pure finite-difference noise against zero.
    """
    if not (1e-7 <= h <= 1e-3):
        raise ValueError(f"step size h={h} outside [1e-7, 1e-3]")
    params = [np.asarray(p, dtype=np.float64) for p in params]

    tape = Tape()
    leaves = [tape.leaf(p.copy(), requires_grad=True) for p in params]
    out = f(tape, leaves)
    if out.value.size != 1:
        raise ValueError("grad_check expects a scalar-valued program")
    tape.backward(out)
    analytic = [leaf.grad.copy() for leaf in leaves]

    def eval_at(ps) -> float:
        t = Tape()
        return float(f(t, [t.leaf(p) for p in ps]).value)

    worst = 0.0
    for k, p in enumerate(params):
        mask = None if exclude is None else exclude[k]
        flat = p.reshape(-1)
        for idx in range(flat.size):
            if mask is not None and mask.reshape(-1)[idx]:
                continue
            orig = flat[idx]
            flat[idx] = orig + h
            fp = eval_at(params)
            flat[idx] = orig - h
            fm = eval_at(params)
            flat[idx] = orig
            numeric = (fp - fm) / (2.0 * h)
            a = analytic[k].reshape(-1)[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-4)
            worst = max(worst, err)
    return worst
