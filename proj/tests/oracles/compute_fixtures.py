"""Independent reference computations for the frozen fixtures in the C++ tests.

Everything here is a from-scratch transcription using plain Python floats, numpy
and scipy; nothing calls into the C++ library. Run with `python3 compute_fixtures.py`.
"""
import math

import numpy as np
from scipy import stats


def tabulate(records):
    """records: list of (time, status). Failures precede censorings at ties."""
    times = sorted({t for t, s in records if s > 0})
    rows = []
    for t in times:
        a = sum(1 for u, _ in records if u >= t)
        d = sum(1 for u, s in records if u == t and s > 0)
        dk = {}
        for u, s in records:
            if u == t and s > 0:
                dk[s] = dk.get(s, 0) + 1
        rows.append((t, a, d, dk))
    return rows


def cif_curve(records, cause):
    s_prev, cum, out = 1.0, 0.0, []
    for t, a, d, dk in tabulate(records):
        inc = s_prev * dk.get(cause, 0) / a
        cum += inc
        out.append((t, a, d, dk.get(cause, 0), s_prev, inc, cum))
        s_prev *= 1.0 - d / a
    return out


def cif_at(records, cause, t):
    val = 0.0
    for row in cif_curve(records, cause):
        if row[0] <= t:
            val = row[6]
    return val


def aalen(records, cause, t):
    rows = [r for r in cif_curve(records, cause) if r[0] <= t]
    if not rows:
        return 0.0
    it = rows[-1][6]
    v = 0.0
    for (_, a, d, dk, s, _, ij) in rows:
        v += (it - ij) ** 2 * d / ((a - 1) * (a - d)) if (it - ij) != 0 else 0.0
        v += s ** 2 * dk * (a - dk) / (a ** 2 * (a - 1)) if dk * (a - dk) != 0 else 0.0
        v -= 2 * (it - ij) * s * dk * (a - dk) / (a * (a - 1) * (a - d)) if (it - ij) * dk * (a - dk) != 0 else 0.0
    return v


def gaynor(records, cause, t):
    rows = [r for r in cif_curve(records, cause) if r[0] <= t]
    n = len(rows)
    cum = []
    acc = 0.0
    for (_, a, d, *_rest) in rows:
        cum.append(acc)
        acc += d / (a * (a - d)) if a != d else 0.0
    v = 0.0
    for i in range(n):
        _, a, d, dk, s, inc, _ = rows[i]
        if dk > 0:
            v += inc ** 2 * ((a - dk) / (dk * a) + cum[i])
        for j in range(i + 1, n):
            v += 2 * inc * rows[j][5] * (-1.0 / a + cum[i])
    return v


def main():
    five = [(1, 1), (2, 0), (3, 1), (4, 2), (5, 0)]
    print("five-subject fixture, cause 1, t=3")
    print("  cif      %.17g" % cif_at(five, 1, 3))
    print("  aalen    %.17g" % aalen(five, 1, 3))
    print("  gaynor   %.17g" % gaynor(five, 1, 3))
    print("  aalen c2 t=4 %.17g  gaynor c2 t=4 %.17g" % (aalen(five, 2, 4), gaynor(five, 2, 4)))
    print("  aalen c1 t=10 %.17g  gaynor c1 t=10 %.17g" % (aalen(five, 1, 10), gaynor(five, 1, 10)))

    # A larger tied/censored fixture used in the variance tests.
    tied = [(0.5, 1), (1.0, 1), (1.0, 2), (1.0, 0), (1.5, 2), (2.0, 1), (2.0, 1),
            (2.5, 0), (3.0, 2), (3.5, 1), (4.0, 0), (4.5, 1)]
    for t in (1.0, 2.0, 3.5):
        print("tied fixture cause 1 t=%g: cif %.17g aalen %.17g gaynor %.17g"
              % (t, cif_at(tied, 1, t), aalen(tied, 1, t), gaynor(tied, 1, t)))

    # Pseudo-values on the five-subject fixture at tau=3, leave-one-out by hand.
    n = len(five)
    full = cif_at(five, 1, 3)
    pv = [n * full - (n - 1) * cif_at(five[:i] + five[i + 1:], 1, 3) for i in range(n)]
    print("pseudo five tau=3:", ["%.17g" % x for x in pv])

    # Two-sample linear test.
    x2 = 0.15 ** 2 / 0.007
    print("linear X2 %.17g p %.17g" % (x2, stats.chi2.sf(x2, 1)))
    print("p at 3.841 %.17g" % stats.chi2.sf(3.841, 1))

    # k-sample, R=3, explicit 2x2 inverse.
    i1, i2, i3 = 0.4, 0.3, 0.2
    v1, v2, v3 = 0.004, 0.003, 0.005
    a = np.array([i1 - i2, i1 - i3])
    s11, s22, s12 = v1 + v2, v1 + v3, v1
    det = s11 * s22 - s12 * s12
    inv = np.array([[s22, -s12], [-s12, s11]]) / det
    k3 = float(a @ inv @ a)
    print("k-sample R=3 X2 %.17g p %.17g" % (k3, stats.chi2.sf(k3, 2)))

    # LogLog CI, I=0.3, V=0.002, 95%.
    z = stats.norm.ppf(0.975)
    p, v = 0.3, 0.002
    phi = math.log(-math.log(p))
    sd = math.sqrt(v / (p ** 2 * math.log(p) ** 2))
    lo, hi = math.exp(-math.exp(phi + z * sd)), math.exp(-math.exp(phi - z * sd))
    print("loglog CI %.17g %.17g (z=%.17g)" % (lo, hi, z))

    # GEE closed form for a no-censoring two-group dataset (logit link):
    # group 1: 10 subjects, 6 events by tau; group 2: 10 subjects, 3 events by tau.
    p1, p2, n1, n2 = 0.6, 0.3, 10, 10
    b2 = math.log(p1 / (1 - p1)) - math.log(p2 / (1 - p2))
    var = 1 / (n1 * p1 * (1 - p1)) + 1 / (n2 * p2 * (1 - p2))
    print("gee closed form beta2 %.17g var %.17g z %.17g" % (b2, var, b2 / math.sqrt(var)))
    # cloglog link g(x) = log(-log(1-x))
    g = lambda x: math.log(-math.log(1 - x))
    dmu = lambda x: -(1 - x) * math.log(1 - x)  # mu'(eta) at mu = x
    b2c = g(p1) - g(p2)
    varc = p1 * (1 - p1) / (n1 * dmu(p1) ** 2) + p2 * (1 - p2) / (n2 * dmu(p2) ** 2)
    print("gee cloglog beta2 %.17g var %.17g z %.17g" % (b2c, varc, b2c / math.sqrt(varc)))

    # Simulation generator analytic values.
    pp = 0.66
    print("I1(0.5), eta=2: %.17g" % (1 - (1 - pp * (1 - math.exp(-0.5))) ** 2))
    print("I1(0.5), eta=1: %.17g" % (pp * (1 - math.exp(-0.5))))


if __name__ == "__main__":
    main()
