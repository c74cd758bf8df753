"""Classical auction baselines and brute-force audit oracles.

Mechanisms are pure maps from an n x m bid matrix to a column-stochastic
(n+1) x m allocation (row n is the unsold slot) and an n-vector of payments.
Each has a batched form over (S, n, m) arrays that the Monte-Carlo and grid
oracles rely on; the single-profile functions wrap batch size 1.

Multi-item SPA and Myerson run item-wise: every item is an independent
auction. Ties go to the lowest buyer index.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "GridSpec",
    "spa",
    "spa_batch",
    "myerson_itemwise",
    "myerson_batch",
    "first_price",
    "first_price_batch",
    "revenue_oracle_mc",
    "regret_grid_oracle",
    "dsic_audit",
]

_MC_STREAM = 0x4D43  # "MC"
_AUDIT_STREAM = 0x4155  # "AU"

MAX_GRID_POINTS = 10_000_000


@dataclass(frozen=True)
class GridSpec:
    """Misreport grid {0, step, 2*step, ..., 1}^dims."""

    step: float
    dims: int

    def __post_init__(self):
        frac = Fraction(str(self.step))
        if not (0 < self.step <= 1) or (1 / frac).denominator != 1:
            raise ValueError(f"grid step {self.step} must divide 1 exactly in decimal")
        if self.dims < 1:
            raise ValueError("grid needs at least one dimension")

    @property
    def points_per_axis(self) -> int:
        return int(1 / Fraction(str(self.step))) + 1

    def points(self) -> np.ndarray:
        """All grid points, shape (k^dims, dims)."""
        k = self.points_per_axis
        if k ** self.dims > MAX_GRID_POINTS:
            raise ValueError(f"grid of {k}^{self.dims} points exceeds {MAX_GRID_POINTS}")
        axes = np.linspace(0.0, 1.0, k)
        mesh = np.meshgrid(*([axes] * self.dims), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _winner_second(bids: np.ndarray):
    """Per item: first-max buyer index and the second-highest bid."""
    s, n, m = bids.shape
    winner = bids.argmax(axis=1)
    if n > 1:
        top2 = -np.partition(-bids, 1, axis=1)
        second = top2[:, 1, :]
    else:
        second = np.zeros((s, m))
    return winner, second


def _allocate(winner: np.ndarray, sold: np.ndarray, s: int, n: int, m: int) -> np.ndarray:
    z = np.zeros((s, n + 1, m))
    rows = np.where(sold, winner, n)
    z[np.arange(s)[:, None], rows, np.arange(m)[None, :]] = 1.0
    return z


def _collect_payments(winner, sold, price, s, n):
    p = np.zeros((s, n))
    sample_idx = np.broadcast_to(np.arange(s)[:, None], winner.shape)
    np.add.at(p, (sample_idx[sold], winner[sold]), price[sold])
    return p


def spa_batch(bids: np.ndarray):
    """Item-wise second-price auction over a batch of bid matrices."""
    bids = np.asarray(bids, dtype=np.float64)
    s, n, m = bids.shape
    winner, second = _winner_second(bids)
    sold = np.ones_like(winner, dtype=bool)
    return _allocate(winner, sold, s, n, m), _collect_payments(winner, sold, second, s, n)


def spa(bids: np.ndarray):
    """Single-profile item-wise second-price auction."""
    z, p = spa_batch(np.asarray(bids, dtype=np.float64)[None])
    return z[0], p[0]


def myerson_batch(bids: np.ndarray, reserve: float = 0.5):
    """Item-wise SPA with a reserve: sell iff top bid >= reserve, price is
    max(second-highest, reserve)."""
    if not 0.0 <= reserve <= 1.0:
        raise ValueError(f"reserve {reserve} outside [0, 1]")
    bids = np.asarray(bids, dtype=np.float64)
    s, n, m = bids.shape
    winner, second = _winner_second(bids)
    top = bids.max(axis=1)
    sold = top >= reserve
    price = np.maximum(second, reserve)
    return _allocate(winner, sold, s, n, m), _collect_payments(winner, sold, price, s, n)


def myerson_itemwise(bids: np.ndarray, reserve: float = 0.5):
    z, p = myerson_batch(np.asarray(bids, dtype=np.float64)[None], reserve)
    return z[0], p[0]


def first_price_batch(bids: np.ndarray):
    """Deliberately non-DSIC mutant: the winner pays its own bid."""
    bids = np.asarray(bids, dtype=np.float64)
    s, n, m = bids.shape
    winner, _ = _winner_second(bids)
    sold = np.ones_like(winner, dtype=bool)
    own = np.take_along_axis(bids, winner[:, None, :], axis=1)[:, 0, :]
    return _allocate(winner, sold, s, n, m), _collect_payments(winner, sold, own, s, n)


def first_price(bids: np.ndarray):
    z, p = first_price_batch(np.asarray(bids, dtype=np.float64)[None])
    return z[0], p[0]


def revenue_oracle_mc(mech_batch, n: int, m: int, samples: int, seed: int):
    """Monte-Carlo mean revenue under truthful i.i.d. U[0,1] valuations.

    Returns (mean, standard error). The estimate is deterministic for a
    given seed (Philox stream).
    """
    if samples < 1:
        raise ValueError("need at least one Monte-Carlo sample")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, _MC_STREAM], dtype=np.uint64)))
    total = 0.0
    total_sq = 0.0
    remaining = samples
    while remaining > 0:
        chunk = min(remaining, 200_000)
        vals = rng.uniform(size=(chunk, n, m))
        _, p = mech_batch(vals)
        rev = p.sum(axis=1)
        total += rev.sum()
        total_sq += (rev * rev).sum()
        remaining -= chunk
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    stderr = np.sqrt(var / samples)
    return mean, stderr


def _grid_best_gains(mech_batch, values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Unclamped best utility gain per buyer over all grid misreports."""
    values = np.asarray(values, dtype=np.float64)
    n, m = values.shape
    if grid.dims != m:
        raise ValueError(f"grid dims {grid.dims} do not match {m} items")
    z_t, p_t = mech_batch(values[None])
    u_truth = (z_t[0, :n, :] * values).sum(axis=1) - p_t[0]
    pts = grid.points()
    gains = np.empty(n)
    for i in range(n):
        profiles = np.repeat(values[None], pts.shape[0], axis=0)
        profiles[:, i, :] = pts
        z, p = mech_batch(profiles)
        u = (z[:, i, :] * values[i]).sum(axis=1) - p[:, i]
        gains[i] = u.max() - u_truth[i]
    return gains


def regret_grid_oracle(mech_batch, values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Exhaustive per-buyer regret over the misreport grid, clamped at 0.

    `mech_batch` maps (S, n, m) bids to ((S, n+1, m), (S, n)); works for
    classical mechanisms and for learned nets via their batched forward.
    """
    return np.maximum(_grid_best_gains(mech_batch, values, grid), 0.0)


def dsic_audit(mech_batch, trials: int, seed: int, n: int = 3, m: int = 3,
               step: float = 0.05):
    """Search random profiles for profitable grid misreports.

    Returns (passed, worst_violation): worst clamped utility gain over all
    trials and buyers; a DSIC mechanism must show at most 1e-12.
    """
    if trials < 1:
        raise ValueError("need at least one audit trial")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, _AUDIT_STREAM], dtype=np.uint64)))
    grid = GridSpec(step=step, dims=m)
    worst = 0.0
    for _ in range(trials):
        values = rng.uniform(size=(n, m))
        gains = _grid_best_gains(mech_batch, values, grid)
        worst = max(worst, float(np.maximum(gains, 0.0).max()))
    return worst <= 1e-12, worst
