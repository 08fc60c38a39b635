"""Hot numeric kernels with a numba path and a pure-numpy path.

The backend is chosen once at import from ``CRYSTALGATE_BACKEND``
(``numba`` or ``numpy``). When unset, numba is used if it imports.
``CRYSTALGATE_NUM_THREADS`` caps numba's thread pool.

All crystal kernels work in the dimensionless trap units of
:mod:`crystalgate.crystal`: lengths in ``l0``, energies in
``m * omega_xy**2 * l0**2``, so the potential reads
``sum(x**2 + y**2 + beta2 * z**2) / 2 + sum_{i<j} 1 / r_ij``.
"""

import logging
import os

import numpy as np

logger = logging.getLogger(__name__)

try:
    import numba

    HAVE_NUMBA = True
    if not os.environ.get("NUMBA_THREADING_LAYER"):
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    HAVE_NUMBA = False


def _requested_backend():
    name = os.environ.get("CRYSTALGATE_BACKEND", "").strip().lower()
    if name in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if name not in ("numba", "numpy"):
        raise ValueError(f"CRYSTALGATE_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        logger.warning("numba requested but not importable; using numpy kernels")
        return "numpy"
    return name


# --------------------------------------------------------------------------
# numpy implementations


def _pair_geometry(pos):
    diff = pos[:, None, :] - pos[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    return diff, r2


def energy_numpy(pos, beta2):
    pos = np.asarray(pos, dtype=float)
    trap = 0.5 * np.sum(pos[:, 0] ** 2 + pos[:, 1] ** 2 + beta2 * pos[:, 2] ** 2)
    n = len(pos)
    if n < 2:
        return trap
    iu = np.triu_indices(n, 1)
    _, r2 = _pair_geometry(pos)
    return trap + np.sum(1.0 / np.sqrt(r2[iu]))


def gradient_numpy(pos, beta2):
    pos = np.asarray(pos, dtype=float)
    grad = pos * np.array([1.0, 1.0, beta2])
    if len(pos) < 2:
        return grad
    diff, r2 = _pair_geometry(pos)
    np.fill_diagonal(r2, np.inf)
    inv_r3 = r2 ** -1.5
    grad -= np.einsum("ij,ijk->ik", inv_r3, diff)
    return grad


def hessian_numpy(pos, beta2):
    pos = np.asarray(pos, dtype=float)
    n = len(pos)
    hess = np.zeros((n, 3, n, 3))
    if n >= 2:
        diff, r2 = _pair_geometry(pos)
        np.fill_diagonal(r2, np.inf)
        inv_r3 = r2 ** -1.5
        inv_r5 = r2 ** -2.5
        # d^2(1/r)/dr_i dr_j for i != j
        block = (
            -3.0 * inv_r5[:, :, None, None] * diff[:, :, :, None] * diff[:, :, None, :]
            + inv_r3[:, :, None, None] * np.eye(3)
        )
        hess[:] = block.transpose(0, 2, 1, 3)
        for i in range(n):
            hess[i, :, i, :] = -block[i].sum(axis=0)
    idx = np.arange(n)
    hess[idx, :, idx, :] += np.diag([1.0, 1.0, beta2])
    return hess.reshape(3 * n, 3 * n)


def min_distance_numpy(pos):
    pos = np.asarray(pos, dtype=float)
    if len(pos) < 2:
        return np.inf
    _, r2 = _pair_geometry(pos)
    np.fill_diagonal(r2, np.inf)
    return float(np.sqrt(r2.min()))


def rk4_modes_numpy(omegas, couplings, fsamples, dt):
    """Fixed-step RK4 for ``beta' = -i w beta + i k f``, ``phi' = k f Re(beta)``.

    ``fsamples`` holds the drive at half-step resolution (``2 * nsteps + 1``
    points). Returns ``(beta, phi, max|beta|)`` per mode.
    """
    w = np.asarray(omegas, dtype=float)
    k = np.asarray(couplings, dtype=float)
    f = np.asarray(fsamples, dtype=float)
    nsteps = (len(f) - 1) // 2
    beta = np.zeros(len(w), dtype=complex)
    phi = np.zeros(len(w))
    bmax = np.zeros(len(w))
    mi_w = -1j * w
    h = dt
    for n in range(nsteps):
        f0 = f[2 * n]
        f1 = f[2 * n + 1]
        f2 = f[2 * n + 2]
        kb1 = mi_w * beta + 1j * k * f0
        kp1 = k * f0 * beta.real
        b = beta + 0.5 * h * kb1
        kb2 = mi_w * b + 1j * k * f1
        kp2 = k * f1 * b.real
        b = beta + 0.5 * h * kb2
        kb3 = mi_w * b + 1j * k * f1
        kp3 = k * f1 * b.real
        b = beta + h * kb3
        kb4 = mi_w * b + 1j * k * f2
        kp4 = k * f2 * b.real
        beta = beta + (h / 6.0) * (kb1 + 2 * kb2 + 2 * kb3 + kb4)
        phi = phi + (h / 6.0) * (kp1 + 2 * kp2 + 2 * kp3 + kp4)
        np.maximum(bmax, np.abs(beta), out=bmax)
    return beta, phi, bmax


# --------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:
    _nthreads = os.environ.get("CRYSTALGATE_NUM_THREADS")
    if _nthreads:
        numba.set_num_threads(max(1, min(int(_nthreads), numba.config.NUMBA_NUM_THREADS)))

    @numba.njit(cache=True)
    def energy_numba(pos, beta2):
        n = pos.shape[0]
        e = 0.0
        for i in range(n):
            e += 0.5 * (pos[i, 0] ** 2 + pos[i, 1] ** 2 + beta2 * pos[i, 2] ** 2)
        for i in range(n):
            for j in range(i + 1, n):
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                dz = pos[i, 2] - pos[j, 2]
                e += 1.0 / np.sqrt(dx * dx + dy * dy + dz * dz)
        return e

    @numba.njit(cache=True)
    def gradient_numba(pos, beta2):
        n = pos.shape[0]
        g = np.empty((n, 3))
        for i in range(n):
            g[i, 0] = pos[i, 0]
            g[i, 1] = pos[i, 1]
            g[i, 2] = beta2 * pos[i, 2]
        for i in range(n):
            for j in range(i + 1, n):
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                dz = pos[i, 2] - pos[j, 2]
                r2 = dx * dx + dy * dy + dz * dz
                s = r2 ** -1.5
                g[i, 0] -= s * dx
                g[i, 1] -= s * dy
                g[i, 2] -= s * dz
                g[j, 0] += s * dx
                g[j, 1] += s * dy
                g[j, 2] += s * dz
        return g

    @numba.njit(cache=True)
    def hessian_numba(pos, beta2):
        n = pos.shape[0]
        h = np.zeros((3 * n, 3 * n))
        d = np.empty(3)
        for i in range(n):
            h[3 * i, 3 * i] += 1.0
            h[3 * i + 1, 3 * i + 1] += 1.0
            h[3 * i + 2, 3 * i + 2] += beta2
            for j in range(i + 1, n):
                for a in range(3):
                    d[a] = pos[i, a] - pos[j, a]
                r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
                inv3 = r2 ** -1.5
                inv5 = r2 ** -2.5
                for a in range(3):
                    for b in range(3):
                        v = -3.0 * inv5 * d[a] * d[b]
                        if a == b:
                            v += inv3
                        h[3 * i + a, 3 * j + b] = v
                        h[3 * j + a, 3 * i + b] = v
                        h[3 * i + a, 3 * i + b] -= v
                        h[3 * j + a, 3 * j + b] -= v
        return h

    @numba.njit(cache=True)
    def min_distance_numba(pos):
        n = pos.shape[0]
        best = np.inf
        for i in range(n):
            for j in range(i + 1, n):
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                dz = pos[i, 2] - pos[j, 2]
                r2 = dx * dx + dy * dy + dz * dz
                if r2 < best:
                    best = r2
        return np.sqrt(best)

    @numba.njit(cache=True, parallel=True)
    def rk4_modes_numba(omegas, couplings, fsamples, dt):
        nm = omegas.shape[0]
        nsteps = (fsamples.shape[0] - 1) // 2
        beta = np.zeros(nm, dtype=np.complex128)
        phi = np.zeros(nm)
        bmax = np.zeros(nm)
        h = dt
        for m in numba.prange(nm):
            w = omegas[m]
            k = couplings[m]
            br = 0.0
            bi = 0.0
            p = 0.0
            top = 0.0
            for n in range(nsteps):
                f0 = k * fsamples[2 * n]
                f1 = k * fsamples[2 * n + 1]
                f2 = k * fsamples[2 * n + 2]
                # d(br + i bi)/dt = w bi + i(-w br + kf)
                k1r = w * bi
                k1i = -w * br + f0
                k1p = f0 * br
                tr = br + 0.5 * h * k1r
                ti = bi + 0.5 * h * k1i
                k2r = w * ti
                k2i = -w * tr + f1
                k2p = f1 * tr
                tr = br + 0.5 * h * k2r
                ti = bi + 0.5 * h * k2i
                k3r = w * ti
                k3i = -w * tr + f1
                k3p = f1 * tr
                tr = br + h * k3r
                ti = bi + h * k3i
                k4r = w * ti
                k4i = -w * tr + f2
                k4p = f2 * tr
                br += (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
                bi += (h / 6.0) * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
                p += (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
                a = np.sqrt(br * br + bi * bi)
                if a > top:
                    top = a
            beta[m] = br + 1j * bi
            phi[m] = p
            bmax[m] = top
        return beta, phi, bmax

else:  # pragma: no cover
    energy_numba = energy_numpy
    gradient_numba = gradient_numpy
    hessian_numba = hessian_numpy
    min_distance_numba = min_distance_numpy
    rk4_modes_numba = rk4_modes_numpy


BACKEND = _requested_backend()

_TABLE = {
    "numba": (energy_numba, gradient_numba, hessian_numba, min_distance_numba, rk4_modes_numba),
    "numpy": (energy_numpy, gradient_numpy, hessian_numpy, min_distance_numpy, rk4_modes_numpy),
}


def kernels(backend=None):
    """Return ``(energy, gradient, hessian, min_distance, rk4_modes)`` for a backend."""
    return _TABLE[backend or BACKEND]


def energy(pos, beta2):
    return _TABLE[BACKEND][0](np.ascontiguousarray(pos, dtype=float), float(beta2))


def gradient(pos, beta2):
    return _TABLE[BACKEND][1](np.ascontiguousarray(pos, dtype=float), float(beta2))


def hessian(pos, beta2):
    return _TABLE[BACKEND][2](np.ascontiguousarray(pos, dtype=float), float(beta2))


def min_distance(pos):
    return _TABLE[BACKEND][3](np.ascontiguousarray(pos, dtype=float))


def rk4_modes(omegas, couplings, fsamples, dt):
    return _TABLE[BACKEND][4](
        np.ascontiguousarray(omegas, dtype=float),
        np.ascontiguousarray(couplings, dtype=float),
        np.ascontiguousarray(fsamples, dtype=float),
        float(dt),
    )
