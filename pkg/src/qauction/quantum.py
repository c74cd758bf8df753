"""Dense statevector simulation of the quantum hidden layer.

The layer is: RX angle embedding of q scaled activations on |0...0>, then L
entangler layers (one RX per qubit followed by a CNOT ring 0->1->...->q-1->0),
then Pauli-Z expectation per qubit. Qubit 0 is the most significant bit of
the basis index, so |10> means qubit 0 is 1.

Everything here is plain numpy over complex128 arrays. Single-state
functions carry the public contracts; `forward_batch`/`shift_vjp` process a
whole sample batch at once (states shaped (B, 2^q)) and power training.
Gradients use the parameter-shift rule, which is exact for RX angles:
dE/dphi = (E(phi + pi/2) - E(phi - pi/2)) / 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "QuantumLayerSpec",
    "apply_rx",
    "apply_cnot",
    "angle_embed",
    "entangler_layers",
    "z_expectations",
    "input_angles",
    "input_angles_grad",
    "qlayer_forward",
    "qlayer_grad",
    "forward_batch",
    "shift_vjp",
]

_HALF_PI = np.pi / 2.0


@dataclass(frozen=True)
class QuantumLayerSpec:
    """Shape of the quantum hidden layer: qubit count and entangler depth.

    Activations are mapped to embedding angles by pi*tanh, keeping angles in
    (-pi, pi) regardless of activation magnitude.
    """

    qubits: int
    layers: int

    def __post_init__(self):
        if self.qubits < 1 or self.layers < 1:
            raise ValueError(f"need qubits >= 1 and layers >= 1, got {self.qubits}, {self.layers}")


def _qubit_count(state: np.ndarray) -> int:
    q = int(np.log2(state.shape[-1]) + 0.5)
    if 2 ** q != state.shape[-1]:
        raise ValueError(f"state length {state.shape[-1]} is not a power of two")
    return q


def _rx_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]])


def apply_rx(state: np.ndarray, qubit: int, theta: float) -> np.ndarray:
    """RX(theta) on one qubit of a single statevector; norm-preserving."""
    q = _qubit_count(state)
    if not 0 <= qubit < q:
        raise ValueError(f"qubit {qubit} out of range for {q}-qubit state")
    reshaped = state.reshape((2,) * q)
    a0 = np.take(reshaped, 0, axis=qubit)
    a1 = np.take(reshaped, 1, axis=qubit)
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    out = np.empty_like(reshaped)
    idx0 = [slice(None)] * q
    idx1 = [slice(None)] * q
    idx0[qubit], idx1[qubit] = 0, 1
    out[tuple(idx0)] = c * a0 - 1j * s * a1
    out[tuple(idx1)] = -1j * s * a0 + c * a1
    return out.reshape(-1)


def _cnot_perm(q: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2 ** q)
    control_bit = (idx >> (q - 1 - control)) & 1
    return idx ^ (control_bit << (q - 1 - target))


def apply_cnot(state: np.ndarray, control: int, target: int) -> np.ndarray:
    """CNOT as a basis permutation; flips target where the control bit is 1."""
    q = _qubit_count(state)
    if control == target:
        raise ValueError("control and target qubits must differ")
    if not (0 <= control < q and 0 <= target < q):
        raise ValueError(f"qubit pair ({control}, {target}) out of range for {q} qubits")
    return state[_cnot_perm(q, control, target)]


@lru_cache(maxsize=None)
def _ring_perm(q: int) -> np.ndarray:
    """Combined basis permutation of the CNOT ring 0->1, 1->2, ..., q-1->0."""
    perm = np.arange(2 ** q)
    for c in range(q):
        perm = perm[_cnot_perm(q, c, (c + 1) % q)]
    return perm


@lru_cache(maxsize=None)
def _z_signs(q: int) -> np.ndarray:
    """(2^q, q) matrix of +-1: sign of basis state b under Z on qubit i."""
    idx = np.arange(2 ** q)
    bits = (idx[:, None] >> (q - 1 - np.arange(q))[None, :]) & 1
    return 1.0 - 2.0 * bits


def angle_embed(angles: np.ndarray) -> np.ndarray:
    """Product state Prod_i RX(angles[i] on qubit i) |0...0>."""
    angles = np.asarray(angles, dtype=np.float64)
    if angles.ndim != 1:
        raise ValueError(f"expected a flat angle vector, got shape {angles.shape}")
    return _embed_batch(angles[None, :])[0]


def _embed_batch(angles: np.ndarray) -> np.ndarray:
    """(B, q) angles -> (B, 2^q) product states, built qubit by qubit."""
    b, q = angles.shape
    half = angles / 2.0
    qubit_states = np.empty((b, q, 2), dtype=np.complex128)
    qubit_states[:, :, 0] = np.cos(half)
    qubit_states[:, :, 1] = -1j * np.sin(half)
    amps = np.ones((b, 1), dtype=np.complex128)
    for i in range(q):
        amps = (amps[:, :, None] * qubit_states[:, None, i, :]).reshape(b, -1)
    return amps


def _layer_unitary(angles_row: np.ndarray) -> np.ndarray:
    """Kron product of per-qubit RX matrices (qubit 0 leftmost)."""
    u = _rx_matrix(angles_row[0])
    for theta in angles_row[1:]:
        u = np.kron(u, _rx_matrix(theta))
    return u


def _entangle_batch(states: np.ndarray, weights: np.ndarray) -> np.ndarray:
    q = _qubit_count(states)
    if weights.ndim != 2 or weights.shape[1] != q:
        raise ValueError(f"weights shape {weights.shape} does not match {q} qubits")
    ring = _ring_perm(q) if q > 1 else None
    for row in weights:
        states = states @ _layer_unitary(row).T
        if ring is not None:
            states = states[:, ring]
    return states


def entangler_layers(state: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """L entangler layers on a single state: RX per qubit, then the CNOT ring.

    For q=1 the ring is skipped.
    """
    weights = np.asarray(weights, dtype=np.float64)
    return _entangle_batch(state[None, :].astype(np.complex128, copy=True), weights)[0]


def z_expectations(state: np.ndarray) -> np.ndarray:
    """Per-qubit <Z>: signed sum of squared amplitudes; each in [-1, 1]."""
    q = _qubit_count(state)
    probs = np.abs(np.asarray(state)) ** 2
    return probs @ _z_signs(q)


def input_angles(activations: np.ndarray) -> np.ndarray:
    """Bounded scaling of real activations to embedding angles."""
    return np.pi * np.tanh(activations)


def input_angles_grad(activations: np.ndarray) -> np.ndarray:
    t = np.tanh(activations)
    return np.pi * (1.0 - t * t)


def forward_batch(angles: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """(B, q) embedding angles + (L, q) weights -> (B, q) Z expectations."""
    states = _entangle_batch(_embed_batch(angles), weights)
    return (np.abs(states) ** 2) @ _z_signs(angles.shape[1])


def qlayer_forward(activations: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Full layer on one sample: scale, embed, entangle, measure."""
    activations = np.asarray(activations, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if activations.ndim != 1 or activations.shape[0] != weights.shape[1]:
        raise ValueError(
            f"activations shape {activations.shape} does not match weights {weights.shape}")
    return forward_batch(input_angles(activations)[None, :], weights)[0]


def shift_vjp(g: np.ndarray, activations: np.ndarray, angles: np.ndarray,
              weights: np.ndarray, need_activations: bool, need_weights: bool):
    """Parameter-shift vector-Jacobian products for a batch.

    g: (B, q) upstream gradient of the loss w.r.t. the layer outputs.
    Returns (grad_activations (B, q) | None, grad_weights (L, q) | None).
    Each angle costs two extra batched forwards; shifts on embedding angles
    are chained with the tanh scaling derivative.
    """
    grad_act = None
    grad_w = None
    q = angles.shape[1]
    if need_activations:
        grad_angle = np.empty_like(angles)
        for k in range(q):
            shifted = angles.copy()
            shifted[:, k] = angles[:, k] + _HALF_PI
            e_plus = forward_batch(shifted, weights)
            shifted[:, k] = angles[:, k] - _HALF_PI
            e_minus = forward_batch(shifted, weights)
            grad_angle[:, k] = (g * (e_plus - e_minus)).sum(axis=1) / 2.0
        grad_act = grad_angle * input_angles_grad(activations)
    if need_weights:
        grad_w = np.empty_like(weights)
        for l in range(weights.shape[0]):
            for i in range(q):
                shifted = weights.copy()
                shifted[l, i] = weights[l, i] + _HALF_PI
                e_plus = forward_batch(angles, shifted)
                shifted[l, i] = weights[l, i] - _HALF_PI
                e_minus = forward_batch(angles, shifted)
                grad_w[l, i] = (g * (e_plus - e_minus)).sum() / 2.0
    return grad_act, grad_w


def qlayer_grad(activations: np.ndarray, weights: np.ndarray):
    """Exact Jacobians of one sample's layer outputs.

    Returns (d out / d activations with shape (q, q),
             d out / d weights with shape (q, L*q)), weight columns ordered
    layer-major to match weights.reshape(-1).
    """
    activations = np.asarray(activations, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    layers, q = weights.shape
    angles = input_angles(activations)[None, :]

    jac_act = np.empty((q, q))
    for k in range(q):
        shifted = angles.copy()
        shifted[0, k] += _HALF_PI
        e_plus = forward_batch(shifted, weights)[0]
        shifted[0, k] = angles[0, k] - _HALF_PI
        e_minus = forward_batch(shifted, weights)[0]
        jac_act[:, k] = (e_plus - e_minus) / 2.0
    jac_act = jac_act * input_angles_grad(activations)[None, :]

    jac_w = np.empty((q, layers * q))
    for l in range(layers):
        for i in range(q):
            shifted = weights.copy()
            shifted[l, i] += _HALF_PI
            e_plus = forward_batch(angles, shifted)[0]
            shifted[l, i] = weights[l, i] - _HALF_PI
            e_minus = forward_batch(angles, shifted)[0]
            jac_w[:, l * q + i] = (e_plus - e_minus) / 2.0
    return jac_act, jac_w
