"""Arbitrary-precision reference values (mpmath) shared by the tests."""
import mpmath as mp


def ml_mp(alpha, beta, z, digits=30):
    """E_{alpha,beta}(z) by its power series at a working precision large
    enough to absorb the cancellation for negative z."""
    z = mp.mpf(z)
    growth = float(abs(z)) ** (1.0 / float(alpha)) / 2.302585 if z else 0.0
    with mp.workdps(digits + int(growth) + 10):
        a, b = mp.mpf(alpha), mp.mpf(beta)
        s = mp.mpf(0)
        k = 0
        tiny = mp.mpf(10) ** (-(digits + 5))
        while True:
            term = z ** k / mp.gamma(a * k + b)
            s += term
            if k > 10 and abs(term) < tiny * max(1, abs(s)) and abs(z) ** (1 / float(alpha)) < k:
                break
            k += 1
        return +s


def existence_theta_mp(p, alpha, t, M, C_p, k_p, a_hat, inv_norm, c_mu, mu):
    """Term-by-term substitution into the existence display."""
    with mp.workdps(40):
        p, alpha, t, M = (mp.mpf(v) for v in (p, alpha, t, M))
        a1, a2, a3, a4, a5 = (mp.mpf(v) for v in a_hat)
        pam = p * alpha * mp.mpf(mu)
        body = (mp.mpf(inv_norm) ** p * a1 ** p
                + alpha ** p * mp.mpf(c_mu) ** p * a1 ** p * (t ** pam / pam) ** p
                + k_p * M ** p * ((t ** 3 / 3) ** (p / 2) * a4 ** p
                                  + mp.sqrt(t ** (2 * p + 1) / (2 * p + 1)) * a5 ** p)
                + M ** p * t ** (p - 1) * a2 ** p
                + C_p * M ** p * t ** (p / 2 - 1) * a3 ** p)
        return 5 ** (p - 1) * body


def stability_theta_mp(p, alpha, t, D2, a2, C_p, k_p, a_hat, inv_norm, c_mu, mu,
                       p2_factor=1):
    """Term-by-term substitution into the stability display; for p = 2 the
    factor (2 a2 (p-1)/(p-2))^(1-p/2) is replaced by ``p2_factor``."""
    with mp.workdps(40):
        p, alpha, t = (mp.mpf(v) for v in (p, alpha, t))
        D2, a2 = mp.mpf(D2), mp.mpf(a2)
        h1, h2, h3, h4, h5 = (mp.mpf(v) for v in a_hat)
        F = mp.mpf(p2_factor) if p == 2 else (2 * a2 * (p - 1) / (p - 2)) ** (1 - p / 2)
        pam = p * alpha * mp.mpf(mu)
        body = (mp.mpf(inv_norm) ** p * h1 ** p
                + alpha ** p * mp.mpf(c_mu) ** p * h1 ** p * (t ** pam / pam) ** p
                + D2 ** p * a2 ** (p - 1) * h2 ** p
                + C_p * D2 ** p * F * h3 ** p
                + k_p * D2 ** p * (h4 ** (p / 2) + h5 ** p) * F)
        return 5 ** (p - 1) * body
