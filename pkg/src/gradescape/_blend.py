"""Piecewise-blended construction of the staircase chain landscape.

The chain is assembled from axis-aligned "elements", each carrying an exact
local formula (a saddle/minimum quadratic, or a channel profile interpolating
two quadratics) and a compactly supported C^3 weight. Elements are combined
with a normalized Shepard blend against a coercive background bowl:

    F = [ (1 - w_tot) * B + sum_e w_e * F_e ] / [ (1 - w_tot) + sum_e w_e ]

with w_tot = 1 - prod_e (1 - w_e). Wherever a single weight is 1 the blend
reproduces that element's formula exactly; overlapping elements are arranged
so their formulas agree on the overlap, so registered critical data is exact.
All evaluators are vectorized over a batch of points with shape (B, 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def smoothstep3(t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """C^3 polynomial step on [0, 1]: value and first two derivatives.

    Clamped to 0 below and 1 above; derivatives vanish at both ends up to
    third order, so compositions stay C^3.
    """
    tc = np.clip(t, 0.0, 1.0)
    v = tc**4 * (35.0 + tc * (-84.0 + tc * (70.0 - 20.0 * tc)))
    omt = 1.0 - tc
    d1 = 140.0 * tc**3 * omt**3
    d2 = 420.0 * tc**2 * omt**2 * (1.0 - 2.0 * tc)
    return v, d1, d2


def _ramp_window(x, lo, hi, ramp):
    """Plateau weight in a scalar coordinate: 1 on [lo, hi], 0 outside
    [lo - ramp, hi + ramp], C^3 ramps in between. Returns (w, dw, d2w)."""
    t1 = (x - (lo - ramp)) / ramp
    t2 = ((hi + ramp) - x) / ramp
    a, da, d2a = smoothstep3(t1)
    b, db, d2b = smoothstep3(t2)
    da, d2a = da / ramp, d2a / ramp**2
    db, d2b = -db / ramp, d2b / ramp**2
    w = a * b
    dw = da * b + a * db
    d2w = d2a * b + 2.0 * da * db + a * d2b
    return w, dw, d2w


def _transverse_bump(eta, inner, outer):
    """Even C^3 bump in the transverse coordinate: 1 for |eta| <= inner,
    0 for |eta| >= outer. Built on u = eta^2 so it is smooth at eta = 0."""
    u = eta * eta
    span = outer * outer - inner * inner
    t = (outer * outer - u) / span
    s, ds, d2s = smoothstep3(t)
    # d/deta = ds/dt * dt/du * du/deta with dt/du = -1/span, du/deta = 2 eta
    dw = ds * (-1.0 / span) * 2.0 * eta
    d2w = d2s * (2.0 * eta / span) ** 2 - ds * (2.0 / span)
    return s, dw, d2w


@dataclass
class EndModel:
    """Quadratic end of a channel: value, along-axis and transverse curvature."""

    value: float
    along: float  # coefficient of (xi - xi_end)^2 / 2 in the axis profile
    transverse: float  # coefficient of eta^2 / 2


class Element:
    """One blended element: local formula + compact weight.

    Geometry: ``p0`` is the anchor (a saddle or channel start), ``axis`` the
    unit along-direction, ``normal`` the unit transverse direction. The weight
    is a plateau window in xi times a transverse bump in eta.
    """

    def __init__(self, p0, axis, normal, xi_lo, xi_hi, ramp, rho):
        self.p0 = np.asarray(p0, dtype=float)
        self.axis = np.asarray(axis, dtype=float)
        self.normal = np.asarray(normal, dtype=float)
        self.xi_lo = float(xi_lo)
        self.xi_hi = float(xi_hi)
        self.ramp = float(ramp)
        self.rho = float(rho)

    def coords(self, z):
        d = z - self.p0
        return d @ self.axis, d @ self.normal

    def weight(self, xi, eta):
        a, dadxi, d2adxi = _ramp_window(xi, self.xi_lo, self.xi_hi, self.ramp)
        b, dbdeta, d2bdeta = _transverse_bump(eta, self.rho, 2.0 * self.rho)
        w = a * b
        dw_xi = dadxi * b
        dw_eta = a * dbdeta
        h_xixi = d2adxi * b
        h_xieta = dadxi * dbdeta
        h_etaeta = a * d2bdeta
        return w, (dw_xi, dw_eta), (h_xixi, h_xieta, h_etaeta)

    def formula(self, xi, eta, want_hess):
        raise NotImplementedError

    def to_xy(self, d_xi, d_eta):
        """Lift (d/dxi, d/deta) components to an (B, 2) xy gradient."""
        return np.outer(d_xi, self.axis) + np.outer(d_eta, self.normal)

    def hess_xy(self, h_xixi, h_xieta, h_etaeta):
        e, n = self.axis, self.normal
        ee = np.einsum("i,j->ij", e, e)
        en = np.einsum("i,j->ij", e, n) + np.einsum("i,j->ij", n, e)
        nn = np.einsum("i,j->ij", n, n)
        return (
            h_xixi[:, None, None] * ee
            + h_xieta[:, None, None] * en
            + h_etaeta[:, None, None] * nn
        )


class ChannelElement(Element):
    """Straight channel from one quadratic end model to another.

    Axis profile g(xi) interpolates the two end parabolas through a C^3 step
    on [win_lo, win_hi]; transverse curvature h(xi) interpolates likewise.
    Outside the window the formula equals the corresponding end quadratic.
    """

    def __init__(self, p0, axis, normal, length, start: EndModel, end: EndModel,
                 win_lo, win_hi, xi_lo, xi_hi, ramp, rho):
        super().__init__(p0, axis, normal, xi_lo, xi_hi, ramp, rho)
        self.length = float(length)
        self.start = start
        self.end = end
        self.win_lo = float(win_lo)
        self.win_hi = float(win_hi)

    def profile(self, xi):
        """g, g', g'' and h, h', h'' of the axis/transverse profiles."""
        L = self.length
        span = self.win_hi - self.win_lo
        s, ds, d2s = smoothstep3((xi - self.win_lo) / span)
        ds, d2s = ds / span, d2s / span**2
        a0, a1 = self.start.along, self.end.along
        v0, v1 = self.start.value, self.end.value
        c0, c1 = self.start.transverse, self.end.transverse
        m0 = v0 + 0.5 * a0 * xi * xi
        m1 = v1 + 0.5 * a1 * (xi - L) ** 2
        dm0 = a0 * xi
        dm1 = a1 * (xi - L)
        g = (1.0 - s) * m0 + s * m1
        dg = (1.0 - s) * dm0 + s * dm1 + ds * (m1 - m0)
        d2g = (1.0 - s) * a0 + s * a1 + 2.0 * ds * (dm1 - dm0) + d2s * (m1 - m0)
        h = (1.0 - s) * c0 + s * c1
        dh = ds * (c1 - c0)
        d2h = d2s * (c1 - c0)
        return g, dg, d2g, h, dh, d2h

    def formula(self, xi, eta, want_hess):
        g, dg, d2g, h, dh, d2h = self.profile(xi)
        f = g + 0.5 * h * eta * eta
        df_xi = dg + 0.5 * dh * eta * eta
        df_eta = h * eta
        if not want_hess:
            return f, (df_xi, df_eta), None
        h_xixi = d2g + 0.5 * d2h * eta * eta
        h_xieta = dh * eta
        h_etaeta = h
        return f, (df_xi, df_eta), (h_xixi, h_xieta, h_etaeta)


class QuadPatchElement(Element):
    """Pure quadratic formula (used for the entry ridge above the first saddle)."""

    def __init__(self, p0, axis, normal, value, along, transverse,
                 xi_lo, xi_hi, ramp, rho):
        super().__init__(p0, axis, normal, xi_lo, xi_hi, ramp, rho)
        self.value = float(value)
        self.along = float(along)
        self.transverse = float(transverse)

    def formula(self, xi, eta, want_hess):
        f = self.value + 0.5 * self.along * xi * xi + 0.5 * self.transverse * eta * eta
        df_xi = self.along * xi
        df_eta = self.transverse * eta
        if not want_hess:
            return f, (df_xi, df_eta), None
        one = np.ones_like(xi)
        return f, (df_xi, df_eta), (self.along * one, np.zeros_like(xi), self.transverse * one)


class BlendedField:
    """Normalized Shepard blend of elements over a quadratic background bowl."""

    def __init__(self, elements: list[Element], bowl_center, bowl_curvature: float):
        self.elements = elements
        self.bowl_center = np.asarray(bowl_center, dtype=float)
        self.bowl_curvature = float(bowl_curvature)

    def _background(self, z, want_hess):
        d = z - self.bowl_center
        c = self.bowl_curvature
        f = 0.5 * c * np.einsum("bi,bi->b", d, d)
        g = c * d
        if not want_hess:
            return f, g, None
        hess = np.broadcast_to(c * np.eye(2), (z.shape[0], 2, 2)).copy()
        return f, g, hess

    def evaluate(self, z, want_hess=False):
        """Evaluate (f, grad[, hess]) at a batch of points z with shape (B, 2)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        nb = z.shape[0]
        ne = len(self.elements)

        w = np.empty((ne, nb))
        dw = np.empty((ne, nb, 2))
        d2w = np.empty((ne, nb, 2, 2)) if want_hess else None
        fe = np.empty((ne, nb))
        dfe = np.empty((ne, nb, 2))
        d2fe = np.empty((ne, nb, 2, 2)) if want_hess else None

        for i, el in enumerate(self.elements):
            xi, eta = el.coords(z)
            wi, (dwx, dwe), (hxx, hxe, hee) = el.weight(xi, eta)
            w[i] = wi
            dw[i] = el.to_xy(dwx, dwe)
            fi, (dfx, dfeta), hessparts = el.formula(xi, eta, want_hess)
            fe[i] = fi
            dfe[i] = el.to_xy(dfx, dfeta)
            if want_hess:
                d2w[i] = el.hess_xy(hxx, hxe, hee)
                fh_xx, fh_xe, fh_ee = hessparts
                d2fe[i] = el.hess_xy(fh_xx, fh_xe, fh_ee)

        fb, gb, hb = self._background(z, want_hess)

        # w_tot = 1 - prod(1 - w_e) via leave-one-out products (no division).
        q = 1.0 - w
        prefix = np.ones((ne + 1, nb))
        for i in range(ne):
            prefix[i + 1] = prefix[i] * q[i]
        suffix = np.ones((ne + 1, nb))
        for i in range(ne - 1, -1, -1):
            suffix[i] = suffix[i + 1] * q[i]
        pe = prefix[:ne] * suffix[1:]  # prod over e' != e of q_e'
        prod_q = prefix[ne]
        w_tot = 1.0 - prod_q
        dw_tot = np.einsum("eb,ebi->bi", pe, dw)

        sw = w.sum(axis=0)
        denom = (1.0 - w_tot) + sw
        num = (1.0 - w_tot) * fb + np.einsum("eb,eb->b", w, fe)
        f = num / denom

        dnum = (
            -dw_tot * fb[:, None]
            + (1.0 - w_tot)[:, None] * gb
            + np.einsum("ebi,eb->bi", dw, fe)
            + np.einsum("eb,ebi->bi", w, dfe)
        )
        ddenom = -dw_tot + dw.sum(axis=0)
        grad = (dnum - f[:, None] * ddenom) / denom[:, None]

        if not want_hess:
            return f, grad, None

        # Hessian of w_tot: sum_e P_e d2w_e - sum_{e != e'} P_{ee'} dw_e (x) dw_e'
        d2w_tot = np.einsum("eb,ebij->bij", pe, d2w)
        for i in range(ne):
            for j in range(ne):
                if i == j:
                    continue
                mask = [k for k in range(ne) if k != i and k != j]
                pij = np.ones(nb)
                for k in mask:
                    pij = pij * q[k]
                d2w_tot -= pij[:, None, None] * np.einsum(
                    "bi,bj->bij", dw[i], dw[j]
                )

        def sym(a, b):
            return np.einsum("bi,bj->bij", a, b) + np.einsum("bi,bj->bij", b, a)

        cross = np.einsum("ebi,ebj->bij", dw, dfe)
        d2num = (
            -d2w_tot * fb[:, None, None]
            - sym(dw_tot, gb)
            + (1.0 - w_tot)[:, None, None] * hb
            + np.einsum("eb,ebij->bij", w, d2fe)
            + np.einsum("ebij,eb->bij", d2w, fe)
            + cross
            + cross.transpose(0, 2, 1)
        )
        d2denom = -d2w_tot + d2w.sum(axis=0)
        hess = (
            d2num
            - sym(grad, ddenom)
            - f[:, None, None] * d2denom
        ) / denom[:, None, None]
        return f, grad, hess


def rot90(v):
    """Counterclockwise quarter turn of a 2-vector."""
    return np.array([-v[1], v[0]])


@dataclass
class ChainGeometry:
    """Exact geometric/critical data of a constructed chain."""

    saddles: list[np.ndarray]
    saddle_values: list[float]
    unstable_dirs: list[np.ndarray]
    stable_dirs: list[np.ndarray]
    terminal_min: np.ndarray
    spill_mins: list[np.ndarray]
    entry_top: np.ndarray
    segment_length: float
    min_curvature: float


def build_chain_field(k: int, lambda_u: float, lambda_s: float, drop: float):
    """Build the blended field and geometry for a k-saddle staircase chain.

    Saddle i sits at the i-th corner of a right-down staircase; its unstable
    axis points to the next corner and its stable axis to the previous one.
    Each saddle's opposite unstable branch runs down a spill channel into an
    auxiliary minimum at value 0. The background is a quadratic bowl centered
    at the terminal minimum.
    """
    if k < 1:
        raise ValueError("chain needs at least one saddle cell")
    lam_m = max(lambda_u, lambda_s)
    # Segment length keeping every channel profile strictly monotone through
    # its blend window: the window correction must stay below half the drop.
    worst = lambda_u + max(lambda_s, lam_m)
    length = 0.95 * np.sqrt(drop / (0.423 * worst))
    m = 0.15 * length
    rho = 0.2 * length
    win_lo, win_hi = 0.35 * length, 0.65 * length

    xhat = np.array([1.0, 0.0])
    yhat = np.array([0.0, 1.0])

    saddles = [np.zeros(2)]
    udirs = []
    for i in range(k):
        udirs.append(xhat if i % 2 == 0 else -yhat)
        if i + 1 < k:
            saddles.append(saddles[i] + length * udirs[i])
    terminal = saddles[-1] + length * udirs[-1]
    sdirs = [yhat] + [udirs[i] for i in range(k - 1)]
    values = [(k - i) * drop for i in range(k)]

    elements: list[Element] = []
    # Entry ridge: the first saddle's quadratic extended up its stable axis.
    entry_len = length
    elements.append(
        QuadPatchElement(
            p0=saddles[0], axis=sdirs[0], normal=udirs[0],
            value=values[0], along=lambda_s, transverse=-lambda_u,
            xi_lo=-m, xi_hi=entry_len, ramp=m, rho=rho,
        )
    )
    entry_top = saddles[0] + entry_len * sdirs[0]

    spill_mins = []
    for i in range(k):
        nxt_saddle = i + 1 < k
        end = (
            EndModel(values[i + 1], lambda_s, -lambda_u)
            if nxt_saddle
            else EndModel(0.0, lam_m, lam_m)
        )
        elements.append(
            ChannelElement(
                p0=saddles[i], axis=udirs[i], normal=rot90(udirs[i]),
                length=length,
                start=EndModel(values[i], -lambda_u, lambda_s),
                end=end,
                win_lo=win_lo, win_hi=win_hi,
                xi_lo=-m, xi_hi=length + m, ramp=m, rho=rho,
            )
        )
        # Spill channel down the opposite unstable branch.
        spill_end = saddles[i] - length * udirs[i]
        spill_mins.append(spill_end)
        elements.append(
            ChannelElement(
                p0=saddles[i], axis=-udirs[i], normal=rot90(udirs[i]),
                length=length,
                start=EndModel(values[i], -lambda_u, lambda_s),
                end=EndModel(0.0, lam_m, lam_m),
                win_lo=win_lo, win_hi=win_hi,
                xi_lo=-m, xi_hi=length + m, ramp=m, rho=rho,
            )
        )

    field = BlendedField(elements, bowl_center=terminal, bowl_curvature=lam_m)
    geom = ChainGeometry(
        saddles=saddles,
        saddle_values=values,
        unstable_dirs=udirs,
        stable_dirs=sdirs,
        terminal_min=terminal,
        spill_mins=spill_mins,
        entry_top=entry_top,
        segment_length=length,
        min_curvature=lam_m,
    )
    # Monotonicity assertion for every channel profile outside the end plateaus.
    for el in elements:
        if isinstance(el, ChannelElement):
            xi = np.linspace(0.02 * length, 0.98 * length, 1501)
            _, dg, _, _, _, _ = el.profile(xi)
            if dg.max() >= -1e-9:
                raise RuntimeError(
                    "chain channel profile not strictly decreasing; "
                    "parameters out of safe range"
                )
    return field, geom
