#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
#
# dlm: dual-input dynamic load modulation transmitter toolkit
# Copyright (C) 2026 The dlm authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ------------------------------------------------------------------------
"""Fit the parametric reference-surface constants in include/dlm/fixtures.hpp.

Offline tool (numpy + scipy). Prints the seven fitted parameters
(eta_top, L, D, gamma, q, pq_frac, x_max_rel) and the achieved metrics.

  class E: calibrate_fixtures.py --peak 7  --gain-db 13 --bw-target 2.8
  class J: calibrate_fixtures.py --peak 10 --gain-db 15 --maxpae .62 --dlm .40 --fixed .28 --no-gap --bw-target 2.6

Phase terms and the output mismatch are set by hand afterwards; the mismatch
phase was tuned with the C++ pipeline until the scaled (class E) and full-rate
(class J) ACPR hit their targets.
"""
import argparse

import numpy as np
from scipy.optimize import minimize
from scipy.signal import welch

Z = 50.0
VC = np.linspace(6, 27, 22)
SG = (VC - 6) / 21


def rrc(beta, sps, span):
    t = np.arange(-span * sps, span * sps + 1) / sps
    h = np.zeros_like(t)
    for i, tt in enumerate(t):
        if abs(tt) < 1e-12:
            h[i] = 1 - beta + 4 * beta / np.pi
        elif abs(abs(4 * beta * tt) - 1) < 1e-9:
            h[i] = beta / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
                                        + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta)))
        else:
            h[i] = (np.sin(np.pi * tt * (1 - beta)) + 4 * beta * tt * np.cos(np.pi * tt * (1 + beta))) / (
                np.pi * tt * (1 - (4 * beta * tt) ** 2))
    return h / np.sqrt(np.sum(h ** 2))


def par(x):
    p = np.abs(x) ** 2
    return 10 * np.log10(p.max() / p.mean())


# Equal-gain 16-code stand-in; the C++ generator tunes gains, here a seed with
# the right PAR is enough to shape the envelope pdf.
def gen(n_codes, n_chips, seed, sf=16, osr=16):
    rng = np.random.default_rng(seed)
    h = np.array([[1]])
    while h.shape[0] < sf:
        h = np.block([[h, h], [h, -h]])
    chips = np.zeros(n_chips, complex)
    nsym = n_chips // sf
    for k in range(n_codes):
        d = (rng.integers(0, 2, nsym) * 2 - 1 + 1j * (rng.integers(0, 2, nsym) * 2 - 1)) / np.sqrt(2)
        chips += np.repeat(d, sf) * np.tile(h[k], nsym)
    chips *= np.exp(1j * np.pi / 2 * rng.integers(0, 4, n_chips))
    up = np.zeros(n_chips * osr, complex)
    up[::osr] = chips
    return np.convolve(up, rrc(0.22, osr, 8), "same")


def surface(p, peak, gain_db, nx=31):
    eta_top, slope, d, gam, q, pq_frac, c = p
    ysat = np.sqrt(2 * Z * peak) * 10 ** (-d * (1 - SG) ** gam / 20)
    g = 10 ** (gain_db / 20)
    xsat = ysat / g
    xg = np.concatenate([[0], c * xsat[-1] * 10 ** (-np.arange(nx - 1, -1, -1) / 20)])
    x = xg[:, None]
    y = g * x / (1 + (x / xsat) ** 4) ** 0.25
    pout = y ** 2 / (2 * Z)
    pq = pq_frac * peak
    yk = g * xsat / 2 ** 0.25
    k = (yk ** 2 / (2 * Z) / (eta_top * (1 - slope * (1 - SG))) - pq) / xsat ** q
    pdc = pq + k * x ** q
    pin = np.broadcast_to(x ** 2 / (2 * Z), pout.shape).copy()
    return pout, pin, pdc


# Max-PAE point per 0.1-decade output bin, column-major tie-break.
def ridge(pout, pae):
    pos = pout > 0
    lo, hi = np.log10(pout[pos].min()), np.log10(pout.max())
    nb = max(4, int(np.floor(10 * (hi - lo) + 1e-9)))
    b = np.clip(((np.log10(np.where(pos, pout, 1e-300)) - lo) / (hi - lo) * nb).astype(int), 0, nb - 1)
    pts = []
    for i in range(nb):
        m = pos & (b == i)
        if m.any():
            k = int(np.argmax(np.where(m, pae, -np.inf).T.ravel()))
            pts.append((k % pae.shape[0], k // pae.shape[0]))
    return pts


class Problem:
    def __init__(self, a):
        self.a = a
        for s in range(200):
            x = gen(16, 16384, s)
            if abs(par(x) - 11.3) < 0.1:
                break
        env2 = np.abs(x) ** 2
        self.env2 = env2 / env2.max()
        xs = x[:65536]
        self.ts = np.abs(xs) / np.abs(xs).max()

    def metrics(self, p, verbose=False):
        pout, pin, pdc = surface(p, self.a.peak, self.a.gain_db)
        pae = (pout - pin) / pdc
        pts = ridge(pout, pae)
        rp = np.array([pout[i, j] for i, j in pts])
        rpin = np.array([pin[i, j] for i, j in pts])
        rdc = np.array([pdc[i, j] for i, j in pts])
        rv = np.array([VC[j] for i, j in pts])
        t = np.sqrt(rp / rp.max())
        v = np.vander(t, 6)
        co, *_ = np.linalg.lstsq(v, rv, rcond=None)
        vres = np.abs(v @ co - rv).max()
        rx = np.array([np.sqrt(2 * Z * pin[i, j]) for i, j in pts])
        va = np.vander(t, 8)[:, :-1]
        ca, *_ = np.linalg.lstsq(va / rx[:, None], np.ones_like(rx), rcond=None)
        xres = np.abs(va @ ca / rx - 1).max()
        rp, rpin, rdc = np.r_[0, rp], np.r_[0, rpin], np.r_[pdc[0, pts[0][1]], rdc]
        pmax = rp.max()
        ps = self.env2 * pmax

        def avg(cp, cin, cdc):
            o, i, d = np.interp(ps, cp, cp), np.interp(ps, cp, cin), np.interp(ps, cp, cdc)
            return (o.mean() - i.mean()) / d.mean()

        jf = len(VC) - 1
        dl = avg(rp, rpin, rdc)
        fx = avg(pout[:, jf], pin[:, jf], pdc[:, jf])
        r10 = np.interp(pmax / 10, rp, (rp - rpin) / rdc)
        f10 = np.interp(pmax / 10, pout[:, jf], pae[:, jf])
        if verbose:
            print(f"peak PAE {pae.max():.4f}  DLM {dl:.4f}  fixed {fx:.4f}  gap@10dB {r10 - f10:.4f}  "
                  f"P_max {pmax:.3f} W  V_c fit residual {vres:.3f} V  |x| fit residual {xres:.4f}")
        return pae.max(), dl, fx, r10 - f10, vres, xres

    def bw_ratio(self, p):
        pout, pin, pdc = surface(p, self.a.peak, self.a.gain_db)
        pts = ridge(pout, (pout - pin) / pdc)
        rp = np.array([pout[i, j] for i, j in pts])
        rv = np.array([VC[j] for i, j in pts])
        co = np.polyfit(np.sqrt(rp / rp.max()), rv, 5)
        v = np.clip(np.polyval(co, self.ts), 6, 27)
        v = v - v.mean()
        f, s = welch(v + 0j, fs=16.0, window="hann", nperseg=2048, return_onesided=False)
        o = np.argsort(np.abs(f))
        c = np.cumsum(s[o])
        k = np.searchsorted(c, 0.95 * c[-1])
        return 2 * abs(f[o][k]) + f[1] - f[0]

    def cost(self, p):
        if p[1] < 0 or p[5] < 0 or p[3] <= 0.2:
            return 1e9
        a = self.a
        m, d, f, g, vr, xr = self.metrics(p)
        c = ((m - a.maxpae) / .005) ** 2 + ((d - a.dlm) / .005) ** 2 + ((f - a.fixed) / .005) ** 2 + (vr / .25) ** 2
        if a.max_xres:
            c += (max(0.0, xr - a.max_xres) / .002) ** 2
        if not a.no_gap:
            c += ((g - a.gap) / .005) ** 2
        if a.bw_target:
            c += ((self.bw_ratio(p) - a.bw_target) / .05) ** 2
        return c


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--peak", type=float, default=7.0, help="nominal peak output power, W")
    ap.add_argument("--gain-db", type=float, default=13.0)
    ap.add_argument("--maxpae", type=float, default=0.60)
    ap.add_argument("--dlm", type=float, default=0.30, help="pdf-averaged PAE on the ridge")
    ap.add_argument("--fixed", type=float, default=0.21, help="pdf-averaged PAE at V_c = 27 V")
    ap.add_argument("--gap", type=float, default=0.11, help="ridge minus fixed PAE at 10 dB back-off")
    ap.add_argument("--no-gap", action="store_true")
    ap.add_argument("--bw-target", type=float, default=0.0, help="V_c 95%% bandwidth / input bandwidth")
    ap.add_argument("--max-xres", type=float, default=0.0,
                    help="cap on the relative |x| misfit of an order-7 fit through the ridge")
    a = ap.parse_args()

    prob = Problem(a)
    best = None
    for d0 in (6, 9):
        for g0 in (0.8, 1.2):
            r = minimize(prob.cost, [0.65, 0.27, d0, g0, 0.94, 0.0075, 1.55], method="Nelder-Mead",
                         options=dict(maxiter=3000, xatol=1e-6, fatol=1e-7))
            if best is None or r.fun < best.fun:
                best = r
    print("params (eta_top, L, D, gamma, q, pq_frac, x_max_rel):")
    print(", ".join(repr(float(v)) for v in best.x), f"  cost {best.fun:.3g}")
    prob.metrics(best.x, True)
    print(f"V_c bandwidth ratio {prob.bw_ratio(best.x):.3f}")


if __name__ == "__main__":
    main()
