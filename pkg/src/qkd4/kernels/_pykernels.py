"""Reference (pure Python) round-sampling kernel.

Must stay bit-for-bit equivalent to ``_ckernels.pyx``.
"""

import numpy as np


def _draw(cdf, u):
    k = 0
    last = len(cdf) - 1
    while k < last and u >= cdf[k]:
        k += 1
    return k


def sample_rounds(set_a, set_b, set_e, touched, u_src, u_bob, joint_cdf, resent_cdf):
    """Sample outcome codes for a batch of rounds.

    ``joint_cdf[i, j]`` is the cumulative 16-cell table for settings (i, j);
    ``resent_cdf[e, o, j]`` is Bob's cumulative 4-cell table when Eve used
    setting ``e``, saw outcome ``o`` and Bob uses ``j``. Returns Alice's,
    Bob's and Eve's outcome codes (Eve's is -1 on untouched rounds).
    """
    n = len(set_a)
    sa = np.asarray(set_a).tolist()
    sb = np.asarray(set_b).tolist()
    se = np.asarray(set_e).tolist()
    tt = np.asarray(touched).tolist()
    us = np.asarray(u_src, dtype=np.float64).tolist()
    ub = np.asarray(u_bob, dtype=np.float64).tolist()
    jc = np.asarray(joint_cdf, dtype=np.float64).tolist()
    rc = np.asarray(resent_cdf, dtype=np.float64).tolist()
    out_a = [0] * n
    out_b = [0] * n
    out_e = [-1] * n
    for i in range(n):
        a = sa[i]
        if tt[i]:
            e = se[i]
            k = _draw(jc[a][e], us[i])
            eo = k & 3
            out_a[i] = k >> 2
            out_e[i] = eo
            out_b[i] = _draw(rc[e][eo][sb[i]], ub[i])
        else:
            k = _draw(jc[a][sb[i]], us[i])
            out_a[i] = k >> 2
            out_b[i] = k & 3
    return (
        np.array(out_a, dtype=np.int8),
        np.array(out_b, dtype=np.int8),
        np.array(out_e, dtype=np.int8),
    )
