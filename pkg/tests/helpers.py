"""Random model generators shared by the test modules."""

import numpy as np

from mvpure import StochasticLinearModel


def random_spd(rng, k, floor=0.1):
    A = rng.standard_normal((k, k))
    S = A @ A.T / k + floor * np.eye(k)
    return 0.5 * (S + S.T)


def random_h(rng, n, m, max_sv_ratio=100.0):
    """Full-column-rank ``n x m`` matrix with ``cond(H^t H) <= max_sv_ratio**2``."""
    U, _ = np.linalg.qr(rng.standard_normal((n, m)))
    V, _ = np.linalg.qr(rng.standard_normal((m, m)))
    half = np.log10(max_sv_ratio) / 2
    s = 10 ** rng.uniform(-half, half, size=m)
    return U @ np.diag(s) @ V.T


def random_model(rng, m=None, n=None, eps=None, white=False):
    m = int(rng.integers(2, 9)) if m is None else m
    n = int(rng.integers(m, 17)) if n is None else n
    H = random_h(rng, n, m)
    Rx = np.eye(m) if white else random_spd(rng, m) * 10 ** rng.uniform(-0.5, 0.5)
    Rn = random_spd(rng, n)
    Rn /= np.trace(Rn)
    eps = 10 ** rng.uniform(-2, 1) if eps is None else eps
    return StochasticLinearModel(H, Rx, Rn, eps)


def toy_diag():
    """H = diag(2, 1), Rx = I, Rn = I/2, eps = 3."""
    return StochasticLinearModel(np.diag([2.0, 1.0]), np.eye(2), 0.5 * np.eye(2), 3.0)


def toy_identity(eps=1.0):
    """H = I, Rx = I, Rn = I/2."""
    return StochasticLinearModel(np.eye(2), np.eye(2), 0.5 * np.eye(2), eps)


def complex_oracle(Hc, Rnc, eps, Y_c):
    """MMSE, BLUE and even-rank MV-PURE estimates with complex arithmetic."""
    M = Hc.shape[1]
    Hh = Hc.conj().T
    Ryc = 2.0 * Hc @ Hh + eps * Rnc
    out = {"MMSE": (2.0 * Hh @ np.linalg.inv(Ryc)) @ Y_c.T}
    Rinv = np.linalg.inv(Rnc)
    G = Hh @ Rinv @ Hc
    Wb = np.linalg.solve(G, Hh @ Rinv)
    out["BLUE"] = Wb @ Y_c.T
    Kc = eps / 2.0 * np.linalg.inv(G) - np.eye(M)
    _, V = np.linalg.eigh(0.5 * (Kc + Kc.conj().T))
    for k in range(1, M + 1):
        out[2 * k] = V[:, :k] @ V[:, :k].conj().T @ Wb @ Y_c.T
    return {k: v.T for k, v in out.items()}
