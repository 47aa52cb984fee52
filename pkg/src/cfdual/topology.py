"""User-centric clustering: serving APs, CSI sharing sets, served users.

Every selection is deterministic, with ties going to the lower index.
Index sets are returned sorted ascending; that order is also the AP segment
order of every stacked per-user vector in :mod:`cfdual.precoding`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "ClusterPlan", "select_serving_clusters", "build_csi_sets",
    "invert_to_served_sets", "pick_master_ap", "check_feasible", "build_plan",
]


@dataclass(frozen=True)
class ClusterPlan:
    serving: np.ndarray   # (K, |M|) AP indices, ascending per row
    csi: np.ndarray       # (K, |C|) user indices, ascending, k in csi[k]
    served: list          # length L, arrays of user indices
    master: np.ndarray    # (K,)
    num_aps: int

    @property
    def num_users(self) -> int:
        return self.serving.shape[0]

    @property
    def cluster_size(self) -> int:
        return self.serving.shape[1]

    @property
    def csi_size(self) -> int:
        return self.csi.shape[1]

    @property
    def active_aps(self) -> np.ndarray:
        return np.array([l for l, d in enumerate(self.served) if len(d) > 0], dtype=int)

    def others(self, k: int) -> np.ndarray:
        """``C_k`` without k itself, ascending."""
        c = self.csi[k]
        return c[c != k]

    def membership(self) -> np.ndarray:
        """Boolean (K, L) mask, True where AP l serves user k."""
        mask = np.zeros((self.num_users, self.num_aps), dtype=bool)
        mask[np.arange(self.num_users)[:, None], self.serving] = True
        return mask


def _top(values, count):
    # stable sort on -values: equal values keep ascending index order
    order = np.argsort(-np.asarray(values, dtype=float), kind="stable")
    return np.sort(order[:count])


def select_serving_clusters(beta, cluster_size: int) -> np.ndarray:
    """Indices of the ``cluster_size`` strongest APs for each user."""
    beta = np.atleast_2d(beta)
    if not 1 <= cluster_size <= beta.shape[1]:
        raise ConfigError(f"cluster_size={cluster_size} outside [1, {beta.shape[1]}]")
    return np.array([_top(row, cluster_size) for row in beta], dtype=int)


def check_feasible(antennas: int, cluster_size: int, csi_size: int):
    if antennas * cluster_size <= csi_size - 1:
        raise ConfigError(
            f"infeasible: N*|M| = {antennas}*{cluster_size} must exceed |C|-1 = {csi_size - 1}")


def build_csi_sets(beta, serving, csi_size: int, antennas: int | None = None) -> np.ndarray:
    """CSI sharing set of each user: itself plus the ``csi_size - 1`` other
    users with the largest mean pathloss towards its serving APs."""
    beta = np.atleast_2d(beta)
    K = beta.shape[0]
    if not 1 <= csi_size <= K:
        raise ConfigError(f"csi_size={csi_size} outside [1, {K}]")
    if antennas is not None:
        check_feasible(antennas, serving.shape[1], csi_size)
    out = np.empty((K, csi_size), dtype=int)
    for k in range(K):
        score = beta[:, serving[k]].mean(axis=1)
        score[k] = -np.inf
        others = np.argsort(-score, kind="stable")[: csi_size - 1]
        out[k] = np.sort(np.append(others, k))
    return out


def invert_to_served_sets(serving, num_aps: int) -> list:
    served = [[] for _ in range(num_aps)]
    for k, row in enumerate(serving):
        for l in row:
            served[int(l)].append(k)
    return [np.array(d, dtype=int) for d in served]


def pick_master_ap(beta_row, serving_k) -> int:
    serving_k = np.asarray(serving_k)
    if serving_k.size == 0:
        raise ValueError("empty serving set")
    vals = np.asarray(beta_row, dtype=float)[serving_k]
    return int(serving_k[np.argmax(vals)])  # argmax returns the first maximum


def build_plan(beta, cluster_size: int, csi_size: int, antennas: int) -> ClusterPlan:
    beta = np.atleast_2d(beta)
    check_feasible(antennas, cluster_size, csi_size)
    serving = select_serving_clusters(beta, cluster_size)
    csi = build_csi_sets(beta, serving, csi_size, antennas)
    served = invert_to_served_sets(serving, beta.shape[1])
    # serving rows are ascending, so argmax ties resolve to the lower AP index
    master = np.array([pick_master_ap(beta[k], serving[k]) for k in range(beta.shape[0])])
    return ClusterPlan(serving=serving, csi=csi, served=served, master=master,
                       num_aps=beta.shape[1])
