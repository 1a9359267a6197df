"""Random micro-scale scheme specs shared by the scheme tests."""

import math

import numpy as np

from seqsynth import codesim as cs


def kern(rng, *shape):
    return rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])


def p2p_spec(rng, N=1, K=2, R=math.log(2), eps=10.0, seed=0, nw=2):
    """Binary p2p spec; the large ``eps`` keeps codewords from collapsing at small N."""
    return cs.P2PSchemeSpec(
        N=N, K=K, R=R,
        Q_U=rng.dirichlet([1, 1]),
        Q_BgXU=kern(rng, 2, 2, 2),
        Q_YgBU=kern(rng, 2, 2, 2),
        P_W=rng.dirichlet(np.ones(nw)),
        pi_X=rng.dirichlet([1, 1]),
        pi_YgX=kern(rng, 2, 2),
        eps=eps, seed=seed,
    )


def broadcast_spec(rng, N=1, K=2, eps=10.0, seed=0):
    return cs.BroadcastSchemeSpec(
        N=N, K=K, R=math.log(2), Rhat=math.log(2),
        Q_UUh=rng.dirichlet(np.ones(4)).reshape(2, 2),
        Q_BgXUUh=kern(rng, 2, 2, 2, 2),
        Q_YgBUUh=kern(rng, 2, 2, 2, 2),
        Q_ZgBU=kern(rng, 2, 2, 2),
        P_W=rng.dirichlet([1, 1]),
        P_What=rng.dirichlet([1, 1]),
        pi_X=rng.dirichlet([1, 1]),
        pi_YZgX=rng.dirichlet(np.ones(4), size=2).reshape(2, 2, 2),
        eps=eps, seed=seed,
    )


def interactive_spec(rng, N=1, K=2, eps=10.0, seed=0, ns=2, nz=2):
    return cs.InteractiveSchemeSpec(
        N=N, K=K, R=math.log(2),
        Q_U=rng.dirichlet([1, 1]),
        Q_AgSU=kern(rng, ns, 2, 2),
        Q_BgXU=kern(rng, 2, 2, 2),
        Q_YgABU=kern(rng, 2, 2, 2, 2),
        Q_ZgABU=kern(rng, 2, 2, 2, nz),
        P_W=rng.dirichlet([1, 1]),
        pi_SX=rng.dirichlet(np.ones(2 * ns)).reshape(ns, 2),
        pi_YZgSX=rng.dirichlet(np.ones(2 * nz), size=(ns, 2)).reshape(ns, 2, 2, nz),
        eps=eps, seed=seed,
    )
