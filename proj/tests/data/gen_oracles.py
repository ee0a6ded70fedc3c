"""Arbitrary-precision reference values for the unit tests.

Run from this directory: python3 gen_oracles.py
Writes erfcx.csv, k3.csv and tpsf_point.csv.
"""
import mpmath as mp

mp.mp.dps = 40

C, MU_A, MU_S, G, BETA = mp.mpf("0.219"), mp.mpf("0.1"), mp.mpf(10), mp.mpf("0.9"), mp.mpf("0.01")
MU_D = 1 / (3 * MU_S * (1 - G))
KAPPA = C * MU_D


def erfcx(z):
    return mp.exp(z * z) * mp.erfc(z)


def k3(x3, y3, t):
    zeta = (x3 + y3 + 2 * BETA * KAPPA * t) / mp.sqrt(4 * KAPPA * t)
    return 1 - BETA * mp.sqrt(mp.pi * KAPPA * t) * erfcx(zeta)


def tpsf_point(src, det, xc, P, t):
    src, det = [*src, 0], [*det, 0]
    a = sum((d - x) ** 2 for d, x in zip(det, xc)) / (4 * KAPPA)
    b = sum((s - x) ** 2 for s, x in zip(src, xc)) / (4 * KAPPA)
    x3 = xc[2]

    def f(s):
        r = t - s
        return (r * s) ** mp.mpf(-1.5) * mp.exp(-a / r - b / s) * k3(0, x3, r) * k3(x3, 0, s)

    pref = mp.exp(-C * MU_A * t) / (16 * mp.pi ** 3 * C * MU_D ** 2)
    return pref * P * mp.quad(f, mp.linspace(0, t, 9))


with open("erfcx.csv", "w") as out:
    out.write("z,erfcx\n")
    n = 1000
    lo, hi = mp.log(mp.mpf("1e-6")), mp.log(mp.mpf(30))
    for i in range(n):
        z = mp.exp(lo + (hi - lo) * i / (n - 1))
        zd = float(z)
        out.write(f"{zd!r},{float(erfcx(mp.mpf(zd)))!r}\n")

with open("k3.csv", "w") as out:
    out.write("x3_mm,y3_mm,t_ps,k3\n")
    for x3, y3, t in [(0, 5, 100), (0, 0.05, 1), (0, 5, 1e-3), (0, 10, 500), (0, 1, 2000), (2, 3, 50), (0, 11, 130)]:
        out.write(f"{x3!r},{y3!r},{t!r},{float(k3(mp.mpf(x3), mp.mpf(y3), mp.mpf(t)))!r}\n")

with open("tpsf_point.csv", "w") as out:
    out.write("s1,s2,d1,d2,c1,c2,c3,P,t_ps,u\n")
    cases = [
        ((-3, 0), (3, 0), (0, 0, 5), 1e6, 115.16419100219933),
        ((-3, 0), (3, 0), (0, 0, 5), 1e6, 60.0),
        ((-3, 0), (3, 0), (0, 0, 1), 1e6, 40.0),
        ((-3, 0), (3, 0), (0, 0, 0.05), 1e6, 20.0),
        ((-13, -13), (2, -18), (0.5, -0.5, 10), 0.5, 300.0),
        ((1, 2), (-4, 0.5), (-1, 1, 3), 2.0, 150.0),
    ]
    for (s, d, xc, P, t) in cases:
        u = tpsf_point([mp.mpf(v) for v in s], [mp.mpf(v) for v in d], [mp.mpf(v) for v in xc], mp.mpf(P), mp.mpf(t))
        out.write(",".join(repr(float(v)) for v in (*s, *d, *xc, P, t)) + f",{float(u)!r}\n")
