"""High-precision reference values frozen into the Rust test suites."""
import mpmath as mp

mp.mp.dps = 30


def phi(x):
    return mp.npdf(x)


def Phi(x):
    return mp.ncdf(x)


def psi(u):
    u = mp.mpf(u)
    return u + phi(u) / Phi(u)


def mills(u):
    u = mp.mpf(u)
    return phi(u) / Phi(u)


def show(name, v):
    print(f"{name} = {mp.nstr(v, 25)}")


for u in ["0", "1", "-1", "7", "-7.9999", "-8", "-8.0001", "-12", "-30", "-40", "-100", "-1000", "3.5", "-3.5"]:
    show(f"psi({u})", psi(u))
show("mills(10)", mills(10))
show("7*psi(7)", 7 * psi(7))
show("trunc(1,1)", psi(1))

# E[psi(Z)] with Z ~ N(0.5, 1)
show("E psi N(0.5,1)", mp.quad(lambda z: psi(mp.mpf("0.5") + z) * phi(z), [-mp.inf, -10, 0, 10, mp.inf]))


def mixture(mx, sx, my, sy, k):
    mx, sx, my, sy, k = map(mp.mpf, (mx, sx, my, sy, k))

    def inner(z, which):
        e = mp.e ** (mx + sx * z)
        m = e * my + k
        s = e * sy
        u = m / s
        if which == 0:
            return (m * Phi(u) + s * phi(u)) * phi(z)
        return Phi(u) * phi(z)

    pts = [-12, -8, -4, -2, 0, 2, 4, 8, 12]
    num = mp.quad(lambda z: inner(z, 0), pts)
    den = mp.quad(lambda z: inner(z, 1), pts)
    return num / den, den


for args in [(0, "0.2", 1, "0.5", "-0.8"), ("0.1", "0.3", 2, 1, -1)]:
    v, p = mixture(*args)
    show(f"mixture{args}", v)
    show(f"  P(>0)", p)


def lognormal_call(ptilde, p, w, theta, mu, sigma):
    # E[max(ptilde e^B (1+theta w) - p, 0)] and P(>0)
    a = mp.mpf(ptilde) * (1 + mp.mpf(theta) * w)
    mu, sigma = mp.mpf(mu), mp.mpf(sigma)
    d2 = (mu + mp.log(a / p)) / sigma
    d1 = d2 + sigma
    ev = a * mp.e ** (mu + sigma ** 2 / 2) * Phi(d1) - p * Phi(d2)
    return ev, Phi(d2)


for s in ["0.1", "0.3"]:
    ev, pr = lognormal_call(100, 100, 10, "0.001", 0, s)
    show(f"gbm E[max]*W sigma={s}", ev * 10)
    show(f"  P(>0)", pr)
    show(f"  E[.|>0]*W", ev * 10 / pr)

# AR1 closed form, T=2, theta=1, gamma=.5, rho=.9, sig=1, x0=1, W=1
th, g, r, se, sh, x0, W = map(mp.mpf, (1, "0.5", "0.9", 1, 1, 1, 1))
a = g * r * x0
b = mp.sqrt(g ** 2 * sh ** 2 + se ** 2)
v = th * W ** 2 / 2 + a * W + b * W * mills((th * W + 2 * a) / (2 * b))
show("ar1 V T=2 x0=1", v)
