"""Brute-force reference evaluations of every metric.

These loop over coordinates, windows and pixels directly and share no code
with the package, so they can serve as independent checks.
"""
import math

import numpy as np


def norms(x, y, tol=0.0):
    v = (np.asarray(y, float) - np.asarray(x, float)).ravel().tolist()
    l0 = l1 = sq = linf = 0.0
    for d in v:
        a = abs(d)
        if a > tol:
            l0 += 1
        l1 += a
        sq += a * a
        linf = max(linf, a)
    return l0, l1, math.sqrt(sq), linf


def mse(x, y):
    v = (np.asarray(y, float) - np.asarray(x, float)).ravel().tolist()
    return math.fsum(d * d for d in v) / len(v)


def uqi(x, y, window=8):
    H, W, C = x.shape
    w = min(window, H, W)
    vals = []
    for c in range(C):
        for i in range(H - w + 1):
            for j in range(W - w + 1):
                a = x[i:i + w, j:j + w, c].ravel().tolist()
                b = y[i:i + w, j:j + w, c].ravel().tolist()
                n = len(a)
                ma, mb = sum(a) / n, sum(b) / n
                va = sum((t - ma) ** 2 for t in a) / n if max(a) != min(a) else 0.0
                vb = sum((t - mb) ** 2 for t in b) / n if max(b) != min(b) else 0.0
                cab = sum((s - ma) * (t - mb) for s, t in zip(a, b)) / n
                den = (va + vb) * (ma * ma + mb * mb)
                if den != 0:
                    vals.append(4 * cab * ma * mb / den)
                elif a == b:
                    vals.append(1.0)
    return sum(vals) / len(vals)


def _band_rmse(x, y, k):
    a = x[:, :, k].ravel().tolist()
    b = y[:, :, k].ravel().tolist()
    return math.sqrt(sum((s - t) ** 2 for s, t in zip(a, b)) / len(a))


def ergas(x, y, ratio=4.0, eps=1e-12):
    C = x.shape[2]
    acc = 0.0
    for k in range(C):
        mu = max(float(np.mean(x[:, :, k])), eps)
        acc += (_band_rmse(x, y, k) / mu) ** 2
    return 100.0 / ratio * math.sqrt(acc / C)


def rase(x, y):
    C = x.shape[2]
    m = float(np.mean(x))
    if m == 0:
        return math.inf
    return 100.0 / m * math.sqrt(sum(_band_rmse(x, y, k) ** 2 for k in range(C)) / C)


def sam(x, y):
    H, W, C = x.shape
    angles = []
    for i in range(H):
        for j in range(W):
            a = x[i, j].tolist()
            b = y[i, j].tolist()
            na = math.sqrt(sum(t * t for t in a))
            nb = math.sqrt(sum(t * t for t in b))
            if na == 0 and nb == 0:
                angles.append(0.0)
            elif na == 0 or nb == 0:
                angles.append(math.pi / 2)
            else:
                cos = sum(s * t for s, t in zip(a, b)) / (na * nb)
                angles.append(math.acos(max(-1.0, min(1.0, cos))))
    return sum(angles) / len(angles)


def _laplace(ch):
    H, W = ch.shape
    out = []
    for i in range(1, H - 1):
        for j in range(1, W - 1):
            out.append(
                4 * ch[i, j] - ch[i - 1, j] - ch[i + 1, j] - ch[i, j - 1] - ch[i, j + 1]
            )
    return out


def _corr(a, b):
    n = len(a)
    ma, mb = math.fsum(a) / n, math.fsum(b) / n
    da = [s - ma for s in a]
    db = [t - mb for t in b]
    ka, kb = max(map(abs, da)), max(map(abs, db))
    da = [s / ka for s in da]
    db = [t / kb for t in db]
    sab = math.fsum(s * t for s, t in zip(da, db))
    return sab / math.sqrt(math.fsum(s * s for s in da) * math.fsum(t * t for t in db))


def scc(x, y):
    vals = []
    for k in range(x.shape[2]):
        a = _laplace(x[:, :, k])
        b = _laplace(y[:, :, k])
        if max(a) == min(a) or max(b) == min(b):
            vals.append(1.0 if a == b else 0.0)
        else:
            vals.append(_corr(a, b))
    return sum(vals) / len(vals)


def _gauss(n, sd):
    c = (n - 1) / 2.0
    g = np.array([[math.exp(-((i - c) ** 2 + (j - c) ** 2) / (2 * sd * sd)) for j in range(n)] for i in range(n)])
    return g / g.sum()


def _weighted(img, g):
    """Gaussian-weighted local average at every valid window position."""
    n = g.shape[0]
    H, W = img.shape
    out = np.empty((H - n + 1, W - n + 1))
    for i in range(H - n + 1):
        for j in range(W - n + 1):
            out[i, j] = float(np.sum(g * img[i:i + n, j:j + n]))
    return out


def vifp_channel(ref, dist, scales=4, sigma_nsq=2.0):
    eps = 1e-10
    num = den = 0.0
    for s in range(1, scales + 1):
        n = 2 ** (scales - s + 1) + 1
        sd = n / 5.0
        if s > 1:
            g = _gauss(min(n, *ref.shape), sd)
            ref = _weighted(ref, g)[::2, ::2]
            dist = _weighted(dist, g)[::2, ::2]
        g = _gauss(min(n, *ref.shape), sd)
        m = g.shape[0]
        for i in range(ref.shape[0] - m + 1):
            for j in range(ref.shape[1] - m + 1):
                a = ref[i:i + m, j:j + m]
                b = dist[i:i + m, j:j + m]
                mu1, mu2 = np.sum(g * a), np.sum(g * b)
                s1 = max(np.sum(g * a * a) - mu1 * mu1, 0.0)
                s2 = max(np.sum(g * b * b) - mu2 * mu2, 0.0)
                s12 = np.sum(g * a * b) - mu1 * mu2
                gain = s12 / (s1 + eps)
                sv = s2 - gain * s12
                if s1 < eps:
                    gain, sv, s1 = 0.0, s2, 0.0
                if s2 < eps:
                    gain, sv = 0.0, 0.0
                if gain < 0:
                    sv, gain = s2, 0.0
                sv = max(sv, eps)
                num += math.log10(1 + gain * gain * s1 / (sv + sigma_nsq))
                den += math.log10(1 + s1 / sigma_nsq)
    return num, den


def vifp(x, y, scales=4, sigma_nsq=2.0):
    ratios = []
    for k in range(x.shape[2]):
        if np.array_equal(x[:, :, k], y[:, :, k]):
            ratios.append(1.0)
            continue
        num, den = vifp_channel(x[:, :, k], y[:, :, k], scales, sigma_nsq)
        ratios.append(num / den if den > 0 else 0.0)
    return sum(ratios) / len(ratios)


def bef(ch, block=8):
    H, W = ch.shape
    b_sum = b_n = c_sum = c_n = 0.0
    for i in range(H):
        for j in range(W - 1):
            d = (ch[i, j] - ch[i, j + 1]) ** 2
            if (j + 1) % block == 0:
                b_sum, b_n = b_sum + d, b_n + 1
            else:
                c_sum, c_n = c_sum + d, c_n + 1
    for i in range(H - 1):
        for j in range(W):
            d = (ch[i, j] - ch[i + 1, j]) ** 2
            if (i + 1) % block == 0:
                b_sum, b_n = b_sum + d, b_n + 1
            else:
                c_sum, c_n = c_sum + d, c_n + 1
    d_b = b_sum / b_n if b_n else 0.0
    d_bc = c_sum / c_n if c_n else 0.0
    if d_b <= d_bc or block < 2:
        return 0.0
    return math.log2(block) / math.log2(min(H, W)) * (d_b - d_bc)


def psnrb(x, y, block=8, peak=255.0):
    m = mse(x, y)
    if m == 0:
        return math.inf
    b = sum(bef(y[:, :, k], block) for k in range(y.shape[2])) / y.shape[2]
    return 10 * math.log10(peak * peak / (m + b))


def all_metrics(x, y):
    l0, l1, l2, linf = norms(x, y)
    return {
        "l0": l0, "l1": l1, "l2": l2, "linf": linf,
        "mse": mse(x, y), "uqi": uqi(x, y), "ergas": ergas(x, y), "sam": sam(x, y),
        "scc": scc(x, y), "rase": rase(x, y), "vifp": vifp(x, y), "psnrb": psnrb(x, y),
    }
