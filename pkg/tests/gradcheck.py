"""Central finite-difference oracle for per-example gradients."""

import numpy as np

from pdlab.nnet import _forward, backward, logistic_loss

H = 1e-5
KINK_MARGIN = 1e-3
GRAD_FLOOR = 1e-5  # below this, an absolute tolerance of 1e-10; FD rounding is ~1e-11


def _near_kink(net, pre):
    kinks = net.spec.activation.kinks
    if not kinks:
        return [np.zeros(p.shape, dtype=bool) for p in pre]
    return [np.min([np.abs(p - k) for k in kinks], axis=0) < KINK_MARGIN for p in pre]


def check_gradients(net, X, y, coords=None):
    """Compare backprop with central differences per (example, coordinate).

    Returns ``(max_rel_error, n_checked, n_skipped)``.  A coordinate is skipped
    for an example when some pre-activation it moves sits within the kink margin.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    analytic = np.stack([backward(net, X[i : i + 1], y[i : i + 1]).buffer.copy() for i in range(n)])
    _, _, pre0 = _forward(net, X)
    near = _near_kink(net, pre0)
    coords = range(net.n_params) if coords is None else coords
    worst, checked, skipped = 0.0, 0, 0
    buf = net.buffer
    for c in coords:
        w = buf[c]
        buf[c] = w + H
        lp, _, pre_p = _forward(net, X)
        buf[c] = w - H
        lm, _, pre_m = _forward(net, X)
        buf[c] = w
        numeric = (logistic_loss(lp, y) - logistic_loss(lm, y)) / (2 * H)
        skip = np.zeros(n, dtype=bool)
        for p0, pp, pm, nk in zip(pre0, pre_p, pre_m, near):
            moved = (pp != p0) | (pm != p0)
            skip |= (moved & nk).any(axis=1)
        a = analytic[:, c]
        err = np.abs(a - numeric) / np.maximum(np.maximum(np.abs(a), np.abs(numeric)), GRAD_FLOOR)
        err = err[~skip]
        if err.size:
            worst = max(worst, float(err.max()))
        checked += int((~skip).sum())
        skipped += int(skip.sum())
    return worst, checked, skipped
