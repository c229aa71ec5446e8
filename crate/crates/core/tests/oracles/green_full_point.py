"""Full-guide dyadic Green function at one point pair, summed term by term
in 40-digit arithmetic.

Guide 10 x 10, k = 3, x = (5, 5, -6), y = (5, 5, -4). Evanescent modes are
kept while exp(-|Im axial| * 2) >= 1e-12, which is the truncation used by the
library for a minimum axial gap of 2.

Other points can be given as six arguments `x1 x2 x3 y1 y2 y3`.
Prints the nine entries of G(x; y), row-major, as `re im` pairs.
"""

import sys

from mpmath import mp, mpf, mpc, sqrt, cos, sin, exp, pi, log

mp.dps = 40

A = B = mpf(10)
K = mpf(3)
GAP = mpf(2)
X = (mpf(5), mpf(5), mpf(-6))
Y = (mpf(5), mpf(5), mpf(-4))
if len(sys.argv) == 7:
    v = [mpf(a) for a in sys.argv[1:]]
    X, Y = tuple(v[:3]), tuple(v[3:])
RADIUS = sqrt(K**2 + (log(mpf(10) ** 12) / GAP) ** 2)


def axial(cut):
    d = K**2 - cut**2
    return sqrt(d) if d > 0 else mpc(0, sqrt(-d))


def kappa(p1, p2):
    g1 = 1 if p1 == 0 else mpf(1) / 2
    g2 = 1 if p2 == 0 else mpf(1) / 2
    return A * B * g1 * g2


def modes(first):
    out = []
    for p1 in range(first, int(RADIUS * A / pi) + 1):
        for p2 in range(first, int(RADIUS * B / pi) + 1):
            if p1 == 0 and p2 == 0:
                continue
            kx, ky = p1 * pi / A, p2 * pi / B
            cut = sqrt(kx**2 + ky**2)
            if cut < K or cut <= RADIUS:
                out.append((p1, p2, kx, ky, cut))
    return out


def upper(x, y):
    """Branch x3 > y3 of the full-guide series."""
    g = [[mpc(0)] * 3 for _ in range(3)]
    for p1, p2, kx, ky, cut in modes(0):
        h = axial(cut)
        n = 1 / sqrt(kappa(p1, p2))
        c = mpc(0, 1) / (2 * h * cut**2)
        mx = (-n * ky * cos(kx * x[0]) * sin(ky * x[1]), n * kx * sin(kx * x[0]) * cos(ky * x[1]), 0)
        my = (-n * ky * cos(kx * y[0]) * sin(ky * y[1]), n * kx * sin(kx * y[0]) * cos(ky * y[1]), 0)
        e = exp(mpc(0, 1) * h * (x[2] - y[2]))
        for i in range(3):
            for j in range(3):
                g[i][j] += c * e * mx[i] * my[j]
    for p1, p2, kx, ky, cut in modes(1):
        gz = axial(cut)
        n = 1 / sqrt(mpf(A * B) / 4)
        d = -mpc(0, 1) / (2 * gz * cut**2)

        def parts(p):
            grad = (n * kx * cos(kx * p[0]) * sin(ky * p[1]), n * ky * sin(kx * p[0]) * cos(ky * p[1]))
            return grad, n * sin(kx * p[0]) * sin(ky * p[1])

        gx, vx = parts(x)
        gy, vy = parts(y)
        ig = mpc(0, 1) * gz / K
        left = (ig * gx[0], ig * gx[1], cut**2 / K * vx)
        right = (ig * gy[0], ig * gy[1], -(cut**2) / K * vy)
        e = exp(mpc(0, 1) * gz * (x[2] - y[2]))
        for i in range(3):
            for j in range(3):
                g[i][j] += d * e * left[i] * right[j]
    return g


if X[2] > Y[2]:
    G = upper(X, Y)
else:
    U = upper(Y, X)
    G = [[U[j][i] for j in range(3)] for i in range(3)]

for row in G:
    for v in row:
        print(mp.nstr(v.real, 20), mp.nstr(v.imag, 20))
