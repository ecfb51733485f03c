"""Loop-based reference metrics, independent of the vectorized implementations.

Everything here is written with explicit Python loops and the math module so
the production code and these references cannot share a bug. Used by the
metric oracle tests and the acceptance suite.
"""

import math


def to_nested(x):
    """torch tensor [C,H,W] -> nested python float lists."""
    return [[[float(v) for v in row] for row in ch] for ch in x]


def naive_rmse(x, y):
    total = 0.0
    n = 0
    for c in range(len(x)):
        for i in range(len(x[0])):
            for j in range(len(x[0][0])):
                d = x[c][i][j] - y[c][i][j]
                total += d * d
                n += 1
    return math.sqrt(total / n)


def naive_psnr(x, y, peak=None, cap=100.0):
    mse = 0.0
    n = 0
    flat = []
    for c in range(len(x)):
        for i in range(len(x[0])):
            for j in range(len(x[0][0])):
                d = x[c][i][j] - y[c][i][j]
                mse += d * d
                n += 1
                flat.append(x[c][i][j])
    mse /= n
    if peak is None:
        peak = max(flat) - min(flat)
    if mse == 0.0:
        return cap
    return min(10.0 * math.log10(peak * peak / mse), cap)


def naive_gaussian_window(size, sigma=1.5):
    center = (size - 1) / 2.0
    raw = [[math.exp(-((i - center) ** 2 + (j - center) ** 2) / (2 * sigma * sigma))
            for j in range(size)] for i in range(size)]
    total = sum(sum(row) for row in raw)
    return [[v / total for v in row] for row in raw]


def _window_stats(xc, yc, w, top, left, win):
    mu_x = mu_y = 0.0
    for a in range(win):
        for b in range(win):
            mu_x += w[a][b] * xc[top + a][left + b]
            mu_y += w[a][b] * yc[top + a][left + b]
    var_x = var_y = cov = 0.0
    for a in range(win):
        for b in range(win):
            var_x += w[a][b] * xc[top + a][left + b] ** 2
            var_y += w[a][b] * yc[top + a][left + b] ** 2
            cov += w[a][b] * xc[top + a][left + b] * yc[top + a][left + b]
    var_x -= mu_x * mu_x
    var_y -= mu_y * mu_y
    cov -= mu_x * mu_y
    return mu_x, mu_y, var_x, var_y, cov


def _effective_window(h, w, requested=11):
    win = min(requested, h, w)
    if win % 2 == 0:
        win -= 1
    return win


def _data_range(x, y):
    flat_x = [v for ch in x for row in ch for v in row]
    flat_y = [v for ch in y for row in ch for v in row]
    lo = min(min(flat_x), min(flat_y))
    hi = max(max(flat_x), max(flat_y))
    return max(hi - lo, 1e-12)


def naive_ssim(x, y, data_range=None, window=11, k1=0.01, k2=0.03):
    h, wdt = len(x[0]), len(x[0][0])
    win = _effective_window(h, wdt, window)
    rng = _data_range(x, y) if data_range is None else max(data_range, 1e-12)
    c1 = (k1 * rng) ** 2
    c2 = (k2 * rng) ** 2
    w = naive_gaussian_window(win)

    total = 0.0
    count = 0
    for c in range(len(x)):
        for top in range(h - win + 1):
            for left in range(wdt - win + 1):
                mu_x, mu_y, var_x, var_y, cov = _window_stats(x[c], y[c], w, top, left, win)
                num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
                den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
                total += num / den
                count += 1
    return total / count


def _ssim_scale_terms(x, y, rng, window=11, k1=0.01, k2=0.03):
    """Mean luminance and mean contrast-structure over the window map."""
    h, wdt = len(x[0]), len(x[0][0])
    win = window
    c1 = (k1 * rng) ** 2
    c2 = (k2 * rng) ** 2
    w = naive_gaussian_window(win)
    lum_total = cs_total = 0.0
    count = 0
    for c in range(len(x)):
        for top in range(h - win + 1):
            for left in range(wdt - win + 1):
                mu_x, mu_y, var_x, var_y, cov = _window_stats(x[c], y[c], w, top, left, win)
                lum_total += (2 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
                cs_total += (2 * cov + c2) / (var_x + var_y + c2)
                count += 1
    return lum_total / count, cs_total / count


def _downsample2(x):
    """2x2 average pooling with floor truncation, per channel."""
    out = []
    for ch in x:
        h2, w2 = len(ch) // 2, len(ch[0]) // 2
        out.append([
            [(ch[2 * i][2 * j] + ch[2 * i][2 * j + 1]
              + ch[2 * i + 1][2 * j] + ch[2 * i + 1][2 * j + 1]) / 4.0
             for j in range(w2)]
            for i in range(h2)
        ])
    return out


MS_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def naive_ms_ssim(x, y, data_range=None, scales=5, window=11):
    h, wdt = len(x[0]), len(x[0][0])
    usable = 0
    for s in range(1, scales + 1):
        if min(h, wdt) // (2 ** (s - 1)) >= window:
            usable = s
    if usable == 0:
        return naive_ssim(x, y, data_range=data_range, window=window)

    rng = _data_range(x, y) if data_range is None else max(data_range, 1e-12)
    weights = MS_WEIGHTS[:usable]
    norm = sum(weights)
    weights = [w / norm for w in weights]

    cur_x, cur_y = x, y
    out = 1.0
    for s in range(usable):
        lum, cs = _ssim_scale_terms(cur_x, cur_y, rng, window=window)
        term = lum * cs if s == usable - 1 else cs
        out *= max(term, 1e-12) ** weights[s]
        if s < usable - 1:
            cur_x = _downsample2(cur_x)
            cur_y = _downsample2(cur_y)
    return out


def naive_sam(x, y, eps=1e-12):
    channels = len(x)
    h, w = len(x[0]), len(x[0][0])
    total = 0.0
    valid = 0
    for i in range(h):
        for j in range(w):
            dot = nx = ny = 0.0
            for c in range(channels):
                dot += x[c][i][j] * y[c][i][j]
                nx += x[c][i][j] ** 2
                ny += y[c][i][j] ** 2
            nx, ny = math.sqrt(nx), math.sqrt(ny)
            if nx == 0.0 or ny == 0.0:
                continue
            cosine = min(1.0, max(-1.0, dot / (nx * ny + eps)))
            total += math.acos(cosine)
            valid += 1
    return total / valid


def naive_ndvi(channel_red, channel_nir, eps=1e-8):
    h, w = len(channel_red), len(channel_red[0])
    return [[(channel_nir[i][j] - channel_red[i][j])
             / (channel_nir[i][j] + channel_red[i][j] + eps)
             for j in range(w)] for i in range(h)]


def naive_ndvi_mae(x, y, red_idx, nir_idx):
    nx = naive_ndvi(x[red_idx], x[nir_idx])
    ny = naive_ndvi(y[red_idx], y[nir_idx])
    h, w = len(nx), len(nx[0])
    return sum(abs(nx[i][j] - ny[i][j]) for i in range(h) for j in range(w)) / (h * w)
