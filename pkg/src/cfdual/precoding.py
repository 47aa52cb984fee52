"""Partial zero-forcing precoders and the pseudo-inverse baseline.

A user's stacked precoder ``w_k`` has one length-N segment per serving AP,
in ascending AP order. Segment l is ``sqrt(rho_kl) * u_kl`` with ``u_kl`` a
unit-norm direction, so a solution is stored as directions plus powers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .topology import ClusterPlan, check_feasible

__all__ = [
    "AggregatedChannel", "NullSpaceBasis", "PrecodingSolution",
    "aggregate_channel", "null_space", "null_spaces", "assemble_precoder",
    "solution_from_coefficients", "pinv_precoder", "equal_power_allocation",
    "pinv_epa", "RANK_TOL",
]

log = logging.getLogger(__name__)

RANK_TOL = 1e-10


@dataclass(frozen=True)
class AggregatedChannel:
    Htilde: np.ndarray  # (N|M|, |C|-1), columns = other users in C_k
    h: np.ndarray       # (N|M|,) own channel, same AP stacking


@dataclass(frozen=True)
class NullSpaceBasis:
    matrix: np.ndarray  # (N|M|, d) orthonormal columns
    antennas: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def blocks(self) -> np.ndarray:
        """Per-AP row blocks, shape ``(|M|, N, d)``."""
        return self.matrix.reshape(-1, self.antennas, self.dim)


@dataclass
class PrecodingSolution:
    serving: np.ndarray     # (K, |M|)
    directions: np.ndarray  # (K, |M|, N) unit-norm rows
    powers: np.ndarray      # (K, |M|)
    coefficients: list = field(default_factory=list)
    label: str = ""

    def effective(self, num_aps: int) -> np.ndarray:
        """``sqrt(rho_kl) * u_kl`` scattered into a dense (K, L, N) array."""
        K, M, N = self.directions.shape
        W = np.zeros((K, num_aps, N), dtype=complex)
        W[np.arange(K)[:, None], self.serving] = np.sqrt(self.powers)[..., None] * self.directions
        return W

    def stacked(self, k: int) -> np.ndarray:
        return (np.sqrt(self.powers[k])[:, None] * self.directions[k]).ravel()

    def ap_power(self, num_aps: int) -> np.ndarray:
        out = np.zeros(num_aps)
        np.add.at(out, self.serving.ravel(), self.powers.ravel())
        return out


def _stack(H, users, aps):
    # (N|M|, len(users)); rows AP-major in the given AP order
    users = np.asarray(users, dtype=int)
    blk = H[np.ix_(users, aps)]  # (U, M, N)
    return blk.reshape(len(users), len(aps) * H.shape[-1]).T


def aggregate_channel(H, csi_k, serving_k, k) -> AggregatedChannel:
    """Stack the shared CSI of cluster ``serving_k``.

    Column n holds the channel of the n-th other user in ``csi_k`` across all
    serving APs; row block m belongs to the m-th serving AP.
    """
    csi_k = np.asarray(csi_k)
    serving_k = np.asarray(serving_k)
    others = csi_k[csi_k != k]
    N = H.shape[-1]
    check_feasible(N, len(serving_k), len(others) + 1)
    Ht = _stack(H, others, serving_k)
    h = _stack(H, [k], serving_k)[:, 0]
    return AggregatedChannel(Htilde=Ht, h=h)


def null_space(Htilde, antennas: int | None = None, tol: float = RANK_TOL) -> NullSpaceBasis:
    """Orthonormal basis of ``{w : Htilde^H w = 0}`` from the SVD of ``Htilde^H``.

    Singular values below ``tol * sigma_max`` count as zero, so a rank
    deficient ``Htilde`` yields a correspondingly wider basis.
    """
    Htilde = np.asarray(Htilde, dtype=complex)
    rows = Htilde.shape[0]
    antennas = rows if antennas is None else antennas
    if Htilde.shape[1] == 0:
        return NullSpaceBasis(np.eye(rows, dtype=complex), antennas)
    _, s, Vh = np.linalg.svd(Htilde.conj().T, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    return NullSpaceBasis(np.ascontiguousarray(Vh[rank:].conj().T), antennas)


def null_spaces(H, plan: ClusterPlan):
    """Null-space basis and stacked own channel for every user."""
    N = H.shape[-1]
    bases, own = [], []
    for k in range(plan.num_users):
        agg = aggregate_channel(H, plan.csi[k], plan.serving[k], k)
        bases.append(null_space(agg.Htilde, N))
        own.append(agg.h)
    return bases, own


def assemble_precoder(N_k, c_k, antennas: int | None = None):
    """Split ``w_k = N_k c_k`` into per-AP unit directions and powers.

    ``N_k`` is a :class:`NullSpaceBasis` or a plain matrix (then ``antennas``
    is required). A zero segment gets power 0 and the first unit vector as
    its (unused) direction.

    Returns
    -------
    directions : np.ndarray
        ``(|M|, N)``.
    powers : np.ndarray
        ``(|M|,)`` squared segment norms.
    """
    if isinstance(N_k, NullSpaceBasis):
        antennas = N_k.antennas
        N_k = N_k.matrix
    w = np.asarray(N_k) @ np.asarray(c_k)
    seg = w.reshape(-1, antennas)
    powers = np.sum(np.abs(seg) ** 2, axis=1)
    norms = np.sqrt(powers)
    directions = np.zeros_like(seg)
    nz = norms > 0
    directions[nz] = seg[nz] / norms[nz, None]
    directions[~nz, 0] = 1.0
    return directions, powers


def solution_from_coefficients(bases, coeffs, plan: ClusterPlan, label="") -> PrecodingSolution:
    parts = [assemble_precoder(b, c) for b, c in zip(bases, coeffs)]
    return PrecodingSolution(
        serving=plan.serving.copy(),
        directions=np.stack([p[0] for p in parts]),
        powers=np.stack([p[1] for p in parts]),
        coefficients=list(coeffs),
        label=label,
    )


def pinv_stacked(H, csi_k, serving_k, k) -> np.ndarray:
    """Un-normalized ZF vector for user k over its serving cluster.

    Columns of ``S`` are the stacked channels of all users in ``csi_k``; the
    returned vector is column k of ``pinv(S)^H``, so ``S^H w = e_k``.
    """
    csi_k = np.asarray(csi_k)
    S = _stack(H, csi_k, np.asarray(serving_k))
    own = _stack(H, [k], np.asarray(serving_k))[:, 0]
    if np.linalg.matrix_rank(S) < S.shape[1]:
        log.warning("user %d: singular CSI stack, falling back to matched filter", k)
        return own
    P = np.linalg.pinv(S)
    j = int(np.flatnonzero(csi_k == k)[0])
    return P[j].conj()


def pinv_precoder(H, csi_k, serving_k, k) -> np.ndarray:
    """Per-AP unit directions ``(|M|, N)`` of the pseudo-inverse precoder."""
    N = H.shape[-1]
    check_feasible(N, len(serving_k), len(csi_k))
    directions, _ = assemble_precoder(np.eye(N * len(serving_k)), pinv_stacked(H, csi_k, serving_k, k), N)
    return directions


def equal_power_allocation(served_l, rho_max: float) -> np.ndarray:
    n = len(served_l)
    if n == 0:
        raise ValueError("AP serves no users")
    return np.full(n, rho_max / n)


def pinv_epa(H, plan: ClusterPlan, rho_max: float) -> PrecodingSolution:
    """Decoupled baseline: pseudo-inverse directions, then equal power per AP."""
    K = plan.num_users
    directions = np.stack([pinv_precoder(H, plan.csi[k], plan.serving[k], k) for k in range(K)])
    powers = np.zeros(plan.serving.shape)
    for l, users in enumerate(plan.served):
        if len(users) == 0:
            continue
        share = equal_power_allocation(users, rho_max)
        for k, p in zip(users, share):
            powers[k, np.flatnonzero(plan.serving[k] == l)[0]] = p
    return PrecodingSolution(serving=plan.serving.copy(), directions=directions,
                             powers=powers, label="pinv-epa")
