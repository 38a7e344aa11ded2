"""Independent reference values for the test suite.

Nothing here imports ``smallcell``: every quantity is recomputed from its
defining sum, integral or root with mpmath at 30 digits. The printed numbers
are frozen into the tests; rerun this script to audit them.
"""

import itertools

import mpmath as mp

mp.mp.dps = 30
KMPH = mp.mpf(1) / mp.mpf("3.6")


def regions(N):
    return list(range(-N, 0)) + list(range(1, N + 1))


def phi(n, N):
    return mp.mpf(abs(n)) / N


def e_inv_uniform(a, b):
    return mp.quad(lambda v: 1 / v, [a, b]) / (b - a)


def constants(N, d0, beta, mu, pi=None):
    labs = regions(N)
    pi = pi or [mp.mpf(1) / (2 * N)] * (2 * N)
    r0 = mp.mpf(d0) ** beta
    c_e = 0
    for i, n in enumerate(labs):
        c_e += pi[i] * sum(phi(m, N) ** -beta for m in labs if m >= n)
    c_e *= mu / N * r0
    c_h = mu / N * r0 * sum(phi(m, N) ** -beta for m in labs)
    c_be = sum(pi[i] * (1 - (phi(n, N) if n > 0 else -phi(n, N))) for i, n in enumerate(labs))
    return c_e, c_h, c_be


def section(title):
    print(f"\n# {title}")


def main():
    section("capacity_rate(35 m, P=0.7, d0=10, beta=2.5)")
    print(mp.mpf("0.7") * (mp.mpf(35) / 10) ** mp.mpf("-2.5"))

    section("psi_{-5}: L=70, N=5, beta=2.5, P=0.7, mu=0.2, V~U[20,40] kmph")
    L, N, beta, P, mu, d0 = mp.mpf(70), 5, mp.mpf("2.5"), mp.mpf("0.7"), mp.mpf("0.2"), 10
    a, b = 20 * KMPH, 40 * KMPH
    rates = [d0**beta * P * L**-beta * phi(m, N) ** -beta for m in regions(N)]
    bytes_ = L / N * sum(rates)
    exact = 1 - mp.quad(lambda v: mp.e ** (-mu * bytes_ / v), [a, b]) / (b - a)
    linear = mu * bytes_ * e_inv_uniform(a, b)
    print("exact", exact, "linearised", linear)

    section("HoConstants uniform pi, N=5, beta=2.5, d0=10, mu=0.2")
    c_e, c_h, c_be = constants(5, 10, mp.mpf("2.5"), mp.mpf("0.2"))
    print("c_e", c_e, "c_h", c_h, "c_be", c_be)

    section("table-7 base: L=70, beta=2.5, P=0.7, U[20,100] kmph, mu=0.2, s_h=0.4, N=5, "
            "lambda=0.01/m, K=60")
    a, b = 20 * KMPH, 100 * KMPH
    einv = e_inv_uniform(a, b)
    s_h, lam, K = mp.mpf("0.4"), mp.mpf("0.01"), 60
    delta = P * L ** (1 - beta) * einv
    p_e = 1 - delta * c_e
    p_h = 1 - (c_h * delta - mu * s_h)
    print("E[1/V]", einv, "P_e_ho", p_e, "P_h_ho", p_h)
    print("b_h", 2 * L * einv, "b_e", c_be * L * einv)
    # fixed point lam_h = lam L P_e + lam_h P_h, solved directly
    lam_h = lam * L * p_e / (1 - p_h)
    print("ho_rate", lam_h)
    b_e, b_h = c_be * L * einv, 2 * L * einv
    rho = (lam * L * b_e + lam_h * b_h) / K
    print("rho", rho)
    mean_v = (a + b) / 2
    c1 = c_be - 2 * c_e / c_h
    c2 = 2 * (1 - mu * s_h * c_e / c_h)
    rho_star = lam * L**2 / K * (c1 * einv + c2 / (P * L ** (1 - beta) * c_h - mean_v * mu * s_h))
    print("rho_star", rho_star)

    section("two classes U[20,30] u U[30,40] kmph, equal P=0.7, L=70 beta=2.5, lambda=0.01, K=60")
    total = 0
    for lo, hi in ((20, 30), (30, 40)):
        lo, hi = lo * KMPH, hi * KMPH
        p = (hi - lo) / (20 * KMPH)
        ups = e_inv_uniform(lo, hi)
        d = P * ups * L ** (1 - beta)
        total += p * ups * (c_be + 2 * (1 - d * c_e) / (d * c_h - mu * s_h))
    print("rho_classes", lam * L**2 / K * total)

    section("pv_matrix p=[0.2,0.3,0.5] eigenvalues")
    m = mp.matrix([[0.2 + 0.2 * 0.2 / 0.5, 0.2 * 0.3 / 0.5], [0.2 * 0.3 / 0.5, 0.3 + 0.3 * 0.3 / 0.5]])
    print(mp.eig(m)[0])

    section("discrete optimum I=2 by grid search on the budget line (resolution 1e-4)")
    a, b = 20 * KMPH, 40 * KMPH
    cls = [(mp.mpf(1) / 2, e_inv_uniform(a, 30 * KMPH)), (mp.mpf(1) / 2, e_inv_uniform(30 * KMPH, b))]
    lam, K = mp.mpf("0.01"), 60

    def rho_of(p1):
        p2 = (P - cls[0][0] * p1) / cls[1][0]
        tot = 0
        for (p, ups), pw in zip(cls, (p1, p2)):
            d = pw * ups * L ** (1 - beta)
            den = d * c_h - mu * s_h
            if den <= 0:
                return mp.inf
            tot += p * ups * (c_be + 2 * (1 - d * c_e) / den)
        return lam * L**2 / K * tot

    best = min((rho_of(mp.mpf(k) / 10000), k) for k in range(1, 14000))
    print("grid P1", mp.mpf(best[1]) / 10000, "rho", best[0])

    section("velocity limit: root of g(Nd0) = s_h, N=5, d0=10, beta=2.5, P=0.7, s_h=0.4, mu=0.2")
    Lmin = mp.mpf(50)

    def g(v):
        # bytes transferred across a cell of half length N d0 at speed v
        return Lmin / (N * v) * sum(10**beta * P * Lmin**-beta * phi(m, N) ** -beta
                                    for m in regions(N))

    print("v_lim", mp.findroot(lambda v: g(v) - s_h, 30))

    section("joint cost: beta=2, gamma=1, p_tilde=2e-6, omega=1, L=100, skewed pi")
    pi = [mp.mpf(x) for x in ("0.02", "0.02", "0.02", "0.02", "0.02", "0.02", "0.08", "0.16",
                              "0.26", "0.38")]
    c_e2, c_h2, c_be2 = constants(5, 10, 2, mu, pi)
    Lc, pt, gam, om = mp.mpf(100), mp.mpf("2e-6"), 1, 1
    pbar = pt * Lc ** (2 + gam)
    einv = e_inv_uniform(20 * KMPH, 40 * KMPH)
    mv = 30 * KMPH
    c1 = c_be2 - 2 * c_e2 / c_h2
    c2 = 2 * (1 - mu * s_h * c_e2 / c_h2)
    rho_s = lam * Lc**2 / K * (c1 * einv + c2 / (pbar * Lc ** (-1) * c_h2 - mv * mu * s_h))
    print("cost", rho_s + om * pt * Lc ** (2 + gam - 1))

    section("sinr: tagged at x=30 served by tower 0 (at 70), one interferer in cell 1 (tower 210), "
            "P=0.7 each, beta=3, d0=10, sigma2=0.5, ring 2*70*4")
    sig = mp.mpf("0.7") * (mp.mpf(40) / 10) ** -3
    interf = mp.mpf("0.7") * (mp.mpf(180) / 10) ** -3
    print(sig / (1 + interf / mp.mpf("0.5")))

    section("erlang B direct summation (rho=1,K=2) and (rho=5,K=10)")
    for rho_, k in ((1, 2), (5, 10)):
        print(rho_, k, (mp.mpf(rho_) ** k / mp.factorial(k))
              / sum(mp.mpf(rho_) ** j / mp.factorial(j) for j in range(k + 1)))


if __name__ == "__main__":
    main()
