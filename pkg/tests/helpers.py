import numpy as np

from slagrigid.regions import xi_margin, xi_prime_margin


def random_symmetric(rng, n, scale=1.0):
    a = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (a + a.T)


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def sample_in_xi_prime(rng, n, K):
    while True:
        lam = rng.uniform(-K, K, size=n)
        if xi_prime_margin(lam) >= 0:
            return lam


def sample_in_xi(rng, n, K):
    while True:
        lam = rng.uniform(-K, K, size=n)
        if xi_margin(lam) >= 0:
            return lam
