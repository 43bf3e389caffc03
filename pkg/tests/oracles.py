"""Independent reference implementations used as test oracles."""

import decimal
from decimal import Decimal as D
from fractions import Fraction

import numpy as np


def naive(train_preds, train_true, target, kind, polarity):
    """Pure-Python per-pair loop; exact fractions rounded once, negatives as 1 - d."""
    out = []
    for i, row in enumerate(train_preds):
        differ = [int(a != b) for a, b in zip(row, target)]
        if kind.value == "ld":
            d = float(Fraction(sum(differ), len(differ)))
        else:
            w = [int(p == train_true[i]) for p in row]
            if sum(w) == 0:
                out.append(1.0)
                continue
            d = float(Fraction(sum(wi * x for wi, x in zip(w, differ)), sum(w)))
        out.append(1.0 - d if polarity.value == "-" else d)
    return out


def fd_gradient(model, X, y, h="1e-12", digits=40):
    """Central finite differences of the batch-mean cross-entropy, evaluated in
    ``digits``-digit decimal arithmetic so cancellation noise stays far below
    float64 resolution. Written directly in terms of the parameters,
    independent of the library's backprop."""
    ctx = decimal.Context(prec=digits)
    step = ctx.create_decimal(h)
    X = [[D(float(v)) for v in row] for row in X]
    y = [int(v) for v in y]
    # every parameter as a 2-D list of Decimals; biases are single rows
    W1, b1, W2, b2 = ([[D(float(v)) for v in row] for row in np.atleast_2d(p)]
                      for p in model.params())

    def objective():
        total = D(0)
        for x, label in zip(X, y):
            hidden = [max(D(0), sum(W1[j][i] * x[i] for i in range(len(x))) + b1[0][j])
                      for j in range(len(W1))]
            logits = [sum(W2[c][j] * hidden[j] for j in range(len(hidden))) + b2[0][c]
                      for c in range(len(W2))]
            top = max(logits)
            total += top + sum((v - top).exp() for v in logits).ln() - logits[label]
        return total / len(y)

    grads = []
    with decimal.localcontext(ctx):
        for p, rows in zip(model.params(), (W1, b1, W2, b2)):
            g = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                r, c = idx if p.ndim == 2 else (0, idx[0])
                orig = rows[r][c]
                rows[r][c] = orig + step
                up = objective()
                rows[r][c] = orig - step
                down = objective()
                rows[r][c] = orig
                g[idx] = float((up - down) / (2 * step))
            grads.append(g)
    return grads


def max_rel_error(analytic, numeric, floor=1e-8):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        for av, nv in zip(a.ravel(), n.ravel()):
            if abs(av) < floor and abs(nv) < floor:
                continue
            worst = max(worst, abs(av - nv) / max(abs(av), abs(nv)))
    return worst
