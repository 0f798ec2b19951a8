"""Diluted asymmetric networks with binary-magnitude couplings.

Every ordered pair ``(i, j)`` with ``i != j`` independently carries a coupling
``+g/sqrt(c)`` or ``-g/sqrt(c)`` with probability ``c/(2N)`` each, and zero
otherwise.  ``J[i, j]`` is the coupling *onto* spin ``i`` *from* spin ``j``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Ground-truth network: couplings, fields and how they were generated."""

    n_spins: int
    avg_degree: float
    coupling_scale: float
    couplings: np.ndarray
    fields: np.ndarray
    seed: int

    @property
    def magnitude(self) -> float:
        """Magnitude ``g/sqrt(c)`` shared by every nonzero coupling."""
        if self.avg_degree == 0:
            return 0.0
        return self.coupling_scale / np.sqrt(self.avg_degree)

    @property
    def n_bonds(self) -> int:
        return int(np.count_nonzero(self.couplings))


def generate_network(n_spins, avg_degree, coupling_scale, field_value=0.0, seed=0):
    """Draw a diluted asymmetric network.

    Parameters
    ----------
    n_spins : int
        Number of spins N.
    avg_degree : float
        Mean in-degree (and out-degree) c, with ``0 <= c <= N``.  ``c = 0``
        gives the empty network.
    coupling_scale : float
        Coupling strength g > 0; nonzero couplings are ``+-g/sqrt(c)``.
    field_value : float
        Common external field assigned to every spin.
    seed : int
        Seed for ``numpy.random.default_rng``.

    Returns
    -------
    ModelParams
    """
    n_spins = int(n_spins)
    if n_spins < 1:
        raise ParameterError(f"n_spins must be positive, got {n_spins}")
    if not 0 <= avg_degree <= n_spins:
        raise ParameterError(f"avg_degree must lie in [0, N], got {avg_degree}")
    if not coupling_scale > 0:
        raise ParameterError(f"coupling_scale must be positive, got {coupling_scale}")
    p_half = avg_degree / (2.0 * n_spins)
    if not 0 <= 2 * p_half <= 1:
        raise ParameterError("bond probability outside [0, 1]")

    rng = np.random.default_rng(seed)
    u = rng.random((n_spins, n_spins))
    couplings = np.zeros((n_spins, n_spins))
    if avg_degree > 0:
        mag = coupling_scale / np.sqrt(avg_degree)
        couplings[u < p_half] = mag
        couplings[(u >= p_half) & (u < 2 * p_half)] = -mag
    np.fill_diagonal(couplings, 0.0)
    fields = np.full(n_spins, float(field_value))
    return ModelParams(n_spins, float(avg_degree), float(coupling_scale), couplings, fields, int(seed))


def save_network(params: ModelParams, path) -> tuple[Path, Path]:
    """Write the coupling matrix and a JSON sidecar; returns both paths.

    Rows of the matrix file are target spins.  Values are written with 17
    significant digits so the round trip is bit-exact.
    """
    path = Path(path)
    meta_path = path.with_suffix(path.suffix + ".json")
    np.savetxt(path, params.couplings, fmt="%.17g")
    meta = {
        "n_spins": params.n_spins,
        "avg_degree": params.avg_degree,
        "coupling_scale": params.coupling_scale,
        "seed": params.seed,
        "fields": params.fields.tolist(),
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return path, meta_path


def load_network(path) -> ModelParams:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    couplings = np.loadtxt(path, ndmin=2)
    n = meta["n_spins"]
    if couplings.shape != (n, n):
        raise ParameterError(f"matrix shape {couplings.shape} does not match N={n}")
    return ModelParams(
        n_spins=n,
        avg_degree=float(meta["avg_degree"]),
        coupling_scale=float(meta["coupling_scale"]),
        couplings=couplings,
        fields=np.asarray(meta["fields"], dtype=float),
        seed=int(meta["seed"]),
    )
