"""Discrete Snell envelope and its Doob-Meyer increments."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SnellPath:
    S: list
    dK: list


def snell_envelope(psi, condexp=None):
    """S[M] = psi[M], S[k] = max(psi[k], E_k S[k+1]), dK[k] = S[k] - E_k S[k+1].

    ``psi`` is a list of per-step values (scalars or node arrays);
    ``condexp(k, values_next)`` maps depth-(k+1) values to depth k. Without
    it the process is deterministic and the expectation is the identity.
    """
    if not psi:
        raise ValueError("psi must hold at least one step")
    M = len(psi) - 1
    S = [None] * (M + 1)
    dK = [None] * M
    S[M] = np.asarray(psi[M], dtype=float)
    for k in range(M - 1, -1, -1):
        cont = S[k + 1] if condexp is None else condexp(k, S[k + 1])
        S[k] = np.maximum(np.asarray(psi[k], dtype=float), cont)
        dK[k] = S[k] - cont
    return SnellPath(S, dK)
