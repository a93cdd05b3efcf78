"""Eigenvalues of small dense real matrices.

Balancing, reduction to upper Hessenberg form by stabilized elementary
similarity transforms, then the Francis double-shift QR iteration.  Pure
Python on nested lists: for the 4x4 and 6x6 matrices used here this is
faster than paying numpy's per-call overhead, and it keeps the spectrum
check of the pole-placement routines independent of LAPACK.
"""

from __future__ import annotations

import math

import numpy as np

_EPS = np.finfo(float).eps
_RADIX = 2.0


class EigenSolverError(RuntimeError):
    """QR iteration failed to converge."""


def _balance(a: list[list[float]]) -> None:
    n = len(a)
    sqrdx = _RADIX * _RADIX
    done = False
    while not done:
        done = True
        for i in range(n):
            r = c = 0.0
            for j in range(n):
                if j != i:
                    c += abs(a[j][i])
                    r += abs(a[i][j])
            if c == 0.0 or r == 0.0:
                continue
            g = r / _RADIX
            f = 1.0
            s = c + r
            while c < g:
                f *= _RADIX
                c *= sqrdx
            g = r * _RADIX
            while c > g:
                f /= _RADIX
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                g = 1.0 / f
                for j in range(n):
                    a[i][j] *= g
                for j in range(n):
                    a[j][i] *= f


def _hessenberg(a: list[list[float]]) -> None:
    n = len(a)
    for m in range(1, n - 1):
        x = 0.0
        i = m
        for j in range(m, n):
            if abs(a[j][m - 1]) > abs(x):
                x = a[j][m - 1]
                i = j
        if i != m:
            for j in range(m - 1, n):
                a[i][j], a[m][j] = a[m][j], a[i][j]
            for j in range(n):
                a[j][i], a[j][m] = a[j][m], a[j][i]
        if x != 0.0:
            for i in range(m + 1, n):
                y = a[i][m - 1]
                if y != 0.0:
                    y /= x
                    a[i][m - 1] = y
                    for j in range(m, n):
                        a[i][j] -= y * a[m][j]
                    for j in range(n):
                        a[j][m] += y * a[j][i]
    for i in range(2, n):
        for j in range(i - 1):
            a[i][j] = 0.0


def _hqr(a: list[list[float]]) -> list[complex]:
    n = len(a)
    wr = [0j] * n
    anorm = 0.0
    for i in range(n):
        for j in range(max(i - 1, 0), n):
            anorm += abs(a[i][j])
    nn = n - 1
    t = 0.0
    p = q = r = x = y = z = w = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = 0
            for ll in range(nn, 0, -1):
                s = abs(a[ll - 1][ll - 1]) + abs(a[ll][ll])
                if s == 0.0:
                    s = anorm
                if abs(a[ll][ll - 1]) <= _EPS * s:
                    a[ll][ll - 1] = 0.0
                    l = ll
                    break
            x = a[nn][nn]
            if l == nn:
                wr[nn] = complex(x + t, 0.0)
                nn -= 1
            else:
                y = a[nn - 1][nn - 1]
                w = a[nn][nn - 1] * a[nn - 1][nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = math.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + math.copysign(z, p)
                        wr[nn - 1] = wr[nn] = complex(x + z, 0.0)
                        if z != 0.0:
                            wr[nn] = complex(x - w / z, 0.0)
                    else:
                        wr[nn] = complex(x + p, -z)
                        wr[nn - 1] = complex(x + p, z)
                    nn -= 2
                else:
                    if its == 60:
                        raise EigenSolverError("QR iteration did not converge")
                    if its in (10, 20, 40):
                        # exceptional shift
                        t += x
                        for i in range(nn + 1):
                            a[i][i] -= x
                        s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                        y = x = 0.75 * s
                        w = -0.4375 * s * s
                    its += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m][m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                        q = a[m + 1][m + 1] - z - r - s
                        r = a[m + 2][m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                        if u <= _EPS * v:
                            break
                        m -= 1
                    for i in range(m, nn - 1):
                        a[i + 2][i] = 0.0
                        if i != m:
                            a[i + 2][i - 1] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k][k - 1]
                            q = a[k + 1][k - 1]
                            r = a[k + 2][k - 1] if k + 1 != nn else 0.0
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                        if s == 0.0:
                            continue
                        if k == m:
                            if l != m:
                                a[k][k - 1] = -a[k][k - 1]
                        else:
                            a[k][k - 1] = -s * x
                        p += s
                        x = p / s
                        y = q / s
                        z = r / s
                        q /= p
                        r /= p
                        for j in range(k, nn + 1):
                            p = a[k][j] + q * a[k + 1][j]
                            if k + 1 != nn:
                                p += r * a[k + 2][j]
                                a[k + 2][j] -= p * z
                            a[k + 1][j] -= p * y
                            a[k][j] -= p * x
                        mmin = nn if nn < k + 3 else k + 3
                        for i in range(l, mmin + 1):
                            p = x * a[i][k] + y * a[i][k + 1]
                            if k + 1 != nn:
                                p += z * a[i][k + 2]
                                a[i][k + 2] -= p * r
                            a[i][k + 1] -= p * q
                            a[i][k] -= p
            if l + 1 >= nn:
                break
    return wr


def eigvals(a) -> np.ndarray:
    """Eigenvalues of a real square matrix, sorted by (real, imag).

    Complex eigenvalues come out as exact conjugate pairs.
    """
    m = [[float(v) for v in row] for row in np.asarray(a, dtype=float)]
    n = len(m)
    if n == 0:
        return np.zeros(0, dtype=complex)
    if any(len(row) != n for row in m):
        raise ValueError("matrix must be square")
    if not all(math.isfinite(v) for row in m for v in row):
        raise ValueError("matrix contains non-finite entries")
    if n == 1:
        return np.array([complex(m[0][0], 0.0)])
    _balance(m)
    _hessenberg(m)
    ev = _hqr(m)
    return np.array(sorted(ev, key=lambda c: (c.real, c.imag)), dtype=complex)


def match_spectra(actual, desired) -> float:
    """Largest relative mismatch between two eigenvalue multisets.

    Pairs entries greedily by nearest distance; relative to ``|desired|``
    (or absolute when the desired entry is zero).
    """
    act = list(np.asarray(actual, dtype=complex))
    want = list(np.asarray(desired, dtype=complex))
    if len(act) != len(want):
        raise ValueError("spectra differ in size")
    worst = 0.0
    for d in sorted(want, key=abs, reverse=True):
        j = min(range(len(act)), key=lambda i: abs(act[i] - d))
        err = abs(act.pop(j) - d)
        worst = max(worst, err / abs(d) if d != 0 else err)
    return worst
