"""Counter-based random numbers for reproducible parallel ensembles.

Every Gaussian draw used by the simulators is a pure function of
``(master_seed, path_index, step, block)``: the draw is computed by the
Philox4x32-10 block cipher applied to a counter built from the path index
and step, keyed by the master seed.  No generator state is carried between
paths, so splitting an ensemble across any number of workers reproduces the
same numbers bit for bit.

Counter layout (four 32-bit words)::

    c0 = step, c1 = block, c2 = path_index low word, c3 = path_index high word

Blocks ``0 .. ceil(d/2) - 1`` hold the Gaussian pairs of a time step.  The
blocks from :data:`AUX_BLOCK` upward are reserved for auxiliary uniforms
(Brownian-bridge crossing tests, killing clocks).
"""

import numba as nb
import numpy as np

__all__ = [
    "AUX_BLOCK",
    "BRIDGE_BLOCK",
    "KILL_BLOCK",
    "philox4x32",
    "uniform_pair",
    "normal_pair",
    "gaussians",
    "step_gaussians",
]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

AUX_BLOCK = 0x40000000
KILL_BLOCK = AUX_BLOCK
BRIDGE_BLOCK = AUX_BLOCK + 16

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds; all arguments are uint64 holding 32-bit words."""
    for _ in range(10):
        p0 = c0 * _M0
        p1 = c2 * _M1
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@nb.njit(cache=True, nogil=True)
def uniform_pair(seed, path, step, block):
    """Two independent uniforms on [0, 1) with 53 random bits each."""
    s = np.uint64(seed)
    p = np.uint64(path)
    w0, w1, w2, w3 = philox4x32(
        np.uint64(step) & _MASK,
        np.uint64(block) & _MASK,
        p & _MASK,
        p >> _S32,
        s & _MASK,
        s >> _S32,
    )
    u1 = ((w0 >> np.uint64(5)) * np.uint64(67108864) + (w1 >> np.uint64(6))) * _INV_2_53
    u2 = ((w2 >> np.uint64(5)) * np.uint64(67108864) + (w3 >> np.uint64(6))) * _INV_2_53
    return u1, u2


@nb.njit(cache=True, nogil=True)
def normal_pair(seed, path, step, block):
    """Two independent standard normals by the Box-Muller transform."""
    u1, u2 = uniform_pair(seed, path, step, block)
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    a = _TWO_PI * u2
    return r * np.cos(a), r * np.sin(a)


@nb.njit(cache=True, nogil=True)
def step_gaussians(seed, path, step, out):
    """Fill ``out`` (length d) with the Gaussian vector of one time step."""
    d = out.shape[0]
    for b in range(d // 2):
        z0, z1 = normal_pair(seed, path, step, b)
        out[2 * b] = z0
        out[2 * b + 1] = z1
    if d % 2:
        # odd dimension: the sine half of the last pair is never used
        u1, u2 = uniform_pair(seed, path, step, d // 2)
        out[d - 1] = np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(_TWO_PI * u2)


@nb.njit(cache=True, nogil=True)
def _gaussians(seed, paths, step0, n_steps, d, out):
    buf = np.empty(d)
    for i in range(paths.shape[0]):
        for k in range(n_steps):
            step_gaussians(seed, paths[i], step0 + k, buf)
            for j in range(d):
                out[i, k, j] = buf[j]


def gaussians(seed, paths, n_steps, d, step0=0):
    """Gaussian increments for a batch of paths.

    Parameters
    ----------
    seed : int
        64-bit master seed.
    paths : array_like of int
        Path indices.
    n_steps : int
        Number of consecutive steps, starting at ``step0``.
    d : int
        Dimension of each draw.

    Returns
    -------
    ndarray of shape (len(paths), n_steps, d)
    """
    paths = np.ascontiguousarray(np.atleast_1d(paths), dtype=np.int64)
    out = np.empty((paths.shape[0], int(n_steps), int(d)))
    _gaussians(np.uint64(seed), paths, int(step0), int(n_steps), int(d), out)
    return out
