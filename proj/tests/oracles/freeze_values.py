"""Independent reference values frozen into the C++ tests.

Run with numpy, scipy and statsmodels installed; paste the printed numbers
into the tests that cite this script. Fixtures are defined by closed-form
formulas so both sides rebuild identical data without shared files.
"""
import itertools
import math

import numpy as np
from scipy import stats
import statsmodels.api as sm


def logit_fixture(n=80):
    i = np.arange(n, dtype=float)
    x1 = np.sin(0.7 * i)
    x2 = np.cos(1.3 * i) * 2.0 + 1.0
    y = ((np.sin(2.1 * i + 0.5) + 1.5 * x1 - 0.4 * x2 + 0.3) > 0).astype(int)
    return np.column_stack([x1, x2]), y


def mcar_fixture():
    # 40 rows x 3 columns, missing cells chosen by formula.
    n = 40
    i = np.arange(n, dtype=float)
    a = np.sin(0.9 * i) * 3 + 10
    b = 0.5 * a + np.cos(1.7 * i)
    c = np.sin(0.31 * i + 1) * 2 - 0.2 * a
    x = np.column_stack([a, b, c])
    for r in range(n):
        if r % 5 == 1:
            x[r, 1] = np.nan
        if r % 7 == 3:
            x[r, 2] = np.nan
        if r % 11 == 4 and r % 5 != 1:
            x[r, 0] = np.nan
    return x


def em(x, iters=5000, tol=1e-12):
    n, p = x.shape
    obs = ~np.isnan(x)
    mu = np.nanmean(x, axis=0)
    sigma = np.diag(np.nanvar(x, axis=0))
    for _ in range(iters):
        t1 = np.zeros(p)
        t2 = np.zeros((p, p))
        for r in range(n):
            o = obs[r]
            m = ~o
            xr = x[r].copy()
            c = np.zeros((p, p))
            if m.any():
                b = sigma[np.ix_(m, o)] @ np.linalg.inv(sigma[np.ix_(o, o)])
                xr[m] = mu[m] + b @ (x[r, o] - mu[o])
                c[np.ix_(m, m)] = sigma[np.ix_(m, m)] - b @ sigma[np.ix_(o, m)]
            t1 += xr
            t2 += np.outer(xr, xr) + c
        mu_new = t1 / n
        sigma_new = t2 / n - np.outer(mu_new, mu_new)
        done = max(abs(mu_new - mu).max(), abs(sigma_new - sigma).max()) < tol
        mu, sigma = mu_new, sigma_new
        if done:
            break
    return mu, sigma


def little(x):
    mu, sigma = em(x)
    obs = ~np.isnan(x)
    patterns = {}
    for r in range(x.shape[0]):
        patterns.setdefault(tuple(obs[r]), []).append(r)
    d2 = 0.0
    df = 0
    for key, rows in patterns.items():
        o = np.array(key)
        ybar = x[np.ix_(rows, o)].mean(axis=0)
        diff = ybar - mu[o]
        d2 += len(rows) * diff @ np.linalg.solve(sigma[np.ix_(o, o)], diff)
        df += o.sum()
    df -= x.shape[1]
    return d2, df, stats.chi2.sf(d2, df), len(patterns)


def shapley_brute(f, row, background):
    d = len(row)
    def v(s):
        z = background.copy()
        for j in s:
            z[:, j] = row[j]
        return f(z).mean()
    phi = np.zeros(d)
    for j in range(d):
        others = [k for k in range(d) if k != j]
        for size in range(d):
            for s in itertools.combinations(others, size):
                w = math.factorial(size) * math.factorial(d - size - 1) / math.factorial(d)
                phi[j] += w * (v(s + (j,)) - v(s))
    return phi


def main():
    np.set_printoptions(precision=17)
    print("chi2 sf")
    for s, k in [(3.84, 1), (10.0, 4), (955.824126322018, 765), (30.0, 40)]:
        print(f"  ({s}, {k}) -> {stats.chi2.sf(s, k)!r}")

    x, y = logit_fixture()
    res = sm.Logit(y, sm.add_constant(x)).fit(disp=0, tol=1e-14, maxiter=200)
    print("logit params", repr(res.params), "z", repr(res.tvalues), "p", repr(res.pvalues))
    xs = (x - x.mean(0)) / x.std(0)
    res_s = sm.Logit(y, sm.add_constant(xs)).fit(disp=0, tol=1e-14, maxiter=200)
    print("logit z (standardized)", repr(res_s.tvalues))

    xm = mcar_fixture()
    print("little", little(xm))

    f = lambda z: z[:, 0] * z[:, 1] + 2.0 * z[:, 2] - z[:, 0] ** 2
    bg = np.array([[0.0, 1.0, 2.0], [1.0, -1.0, 0.5], [2.0, 0.0, -1.0], [-1.0, 3.0, 1.0]])
    row = np.array([1.5, 2.0, -0.5])
    print("shapley interaction", repr(shapley_brute(f, row, bg)))

    xr = np.sin(np.arange(30) * 0.37)
    yr = np.cos(np.arange(30) * 0.11) + 0.5 * xr
    print("pearson", repr(np.corrcoef(xr, yr)[0, 1]))


if __name__ == "__main__":
    main()
