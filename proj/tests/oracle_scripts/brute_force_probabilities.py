"""Brute-force reference values for the coincidence probabilities.

Independent of the C++ code paths: the total pair number is the convolution of
per-mode geometric laws, and every photon is routed explicitly while a DP
tracks the exact bitmask of occupied idler ports and the signal-arm flags.
Used once to freeze expected values into tests/test_model.cpp.
"""
from fractions import Fraction
import itertools
import sys


def total_pair_distribution(lambdas, mu, n_max):
    dist = [1.0] + [0.0] * n_max
    for lam in lambdas:
        m = lam * mu
        mode = [m**n / (1 + m) ** (n + 1) for n in range(n_max + 1)]
        new = [0.0] * (n_max + 1)
        for a, pa in enumerate(dist):
            for b, pb in enumerate(mode):
                if a + b <= n_max:
                    new[a + b] += pa * pb
        dist = new
    return dist


def outcome_given_n(n, eta_i, eta_s1, eta_s2, ports):
    # idler: DP over occupied-port bitmask
    idler = {0: 1.0}
    for _ in range(n):
        nxt = {}
        for mask, p in idler.items():
            nxt[mask] = nxt.get(mask, 0.0) + p * (1 - eta_i)
            for port in range(ports):
                m2 = mask | (1 << port)
                nxt[m2] = nxt.get(m2, 0.0) + p * eta_i / ports
        idler = nxt
    # signal: 50:50 split then per-arm efficiency
    sig = {(0, 0): 1.0}
    for _ in range(n):
        nxt = {}
        for (b1, b2), p in sig.items():
            for arm, eff in ((1, eta_s1), (2, eta_s2)):
                key_hit = (1, b2) if arm == 1 else (b1, 1)
                nxt[key_hit] = nxt.get(key_hit, 0.0) + p * 0.5 * eff
                nxt[(b1, b2)] = nxt.get((b1, b2), 0.0) + p * 0.5 * (1 - eff)
        sig = nxt
    return idler, sig


def probabilities(lambdas, mu, eta_i, eta_s1, eta_s2, k, n_max=40):
    ports = 2**k
    dist = total_pair_distribution(lambdas, mu, n_max)
    out = {"pnr": [0.0] * 4, "thr": [0.0] * 4}
    for n, pn in enumerate(dist):
        idler, sig = outcome_given_n(n, eta_i, eta_s1, eta_s2, ports)
        one = sum(p for m, p in idler.items() if bin(m).count("1") == 1)
        anyc = sum(p for m, p in idler.items() if m != 0)
        s1 = sig.get((1, 0), 0) + sig.get((1, 1), 0)
        s2 = sig.get((0, 1), 0) + sig.get((1, 1), 0)
        s12 = sig.get((1, 1), 0)
        for key, pi in (("pnr", one), ("thr", anyc)):
            out[key][0] += pn * pi
            out[key][1] += pn * pi * s1
            out[key][2] += pn * pi * s2
            out[key][3] += pn * pi * s12
    return out


CASES = [
    ((0.7, 0.3), 0.2, 0.5, 0.3, 0.4, 2),
    ((0.7, 0.3), 0.1, 0.5, 0.3, 0.4, 2),
    ((0.6, 0.4), 0.15, 0.4, 0.3, 0.3, 1),
    ((0.7, 0.3), 0.2, 0.5, 0.3, 0.4, 0),
    ((0.7, 0.3), 0.2, 0.5, 0.3, 0.4, 1),
    ((0.7, 0.3), 0.2, 0.5, 0.3, 0.4, 3),
    ((0.5, 0.3, 0.2), 0.5, 0.8, 0.6, 0.7, 3),
    ((1.0,), 0.1, 1.0, 1.0, 1.0, 0),
]

if __name__ == "__main__":
    for lam, mu, ei, e1, e2, k in CASES:
        r = probabilities(lam, mu, ei, e1, e2, k)
        print(f"lambdas={lam} mu={mu} eta=({ei},{e1},{e2}) k={k}")
        for key in ("pnr", "thr"):
            print("  " + key + " " + ", ".join(f"{v:.17g}" for v in r[key]))
