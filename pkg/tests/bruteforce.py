"""Independent high-precision reference: naive loops over source samples and
detector pixels with full Euclidean path lengths in mpmath arithmetic."""

import mpmath as mp


def _dist(p, q):
    return mp.sqrt(sum((mp.mpf(a) - mp.mpf(b)) ** 2 for a, b in zip(p, q)))


def pattern(mode, L1, L2, d, wavelength, points, weights, x_a, x_b, dps=40):
    """|psi(x_A, x_B)|^2 with psi the weighted mean of the pair amplitude."""
    with mp.workdps(dps):
        D = mp.mpf(L1) + mp.mpf(L2)
        h = mp.mpf(d) / 2
        slits_a = [(h, mp.mpf(L1), 0), (-h, mp.mpf(L1), 0)]
        slits_b = [(h, -mp.mpf(L1), 0), (-h, -mp.mpf(L1), 0)]
        wsum = mp.fsum(mp.mpf(w) for w in weights)
        out = []
        for xa in x_a:
            det_a = (xa, D, 0)
            row = []
            for xb in x_b:
                det_b = (xb, -D, 0)
                psi = mp.mpc(0)
                for r, w in zip(points, weights):
                    la = [_dist(r, s) + _dist(s, det_a) for s in slits_a]
                    if mode == "ghost":
                        lb = [_dist(r, det_b)]
                    else:
                        lb = [_dist(r, s) + _dist(s, det_b) for s in slits_b]
                    amp = mp.fsum(mp.expjpi(2 * (a + b) / mp.mpf(wavelength)) for a in la for b in lb)
                    psi += mp.mpf(w) * amp
                psi /= wsum
                row.append(float(abs(psi) ** 2))
            out.append(row)
        return out
