"""Learned revenue-maximizing auctions for NFT lots, with audit tooling.

Subpackages:
  autodiff  - tape-based reverse-mode AD over numpy arrays, Adam, grad checks
  quantum   - statevector simulation of the quantum hidden layer
  auction   - mechanism networks, regret machinery, training loop
  baselines - second-price / Myerson mechanisms and brute-force oracles
  data      - valuation datasets and the NFT lot ledger
  harness   - experiment orchestration, checkpoints, reports
  cli       - the qauction command line
"""

from . import auction, autodiff, baselines, data, harness, quantum

__all__ = ["auction", "autodiff", "baselines", "data", "harness", "quantum"]
__version__ = "0.1.0"
