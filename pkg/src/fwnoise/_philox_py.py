"""Pure-numpy Philox4x32-10, the fallback when the compiled kernel is absent."""
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def _rounds(c0, c1, c2, c3, k0, k1):
    # words are held in uint64 so the 32x32 products cannot overflow
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = ((p1 >> _S32) ^ c1 ^ np.uint64(k0), p1 & _MASK,
                          (p0 >> _S32) ^ c3 ^ np.uint64(k1), p0 & _MASK)
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def philox_block(ctr, key):
    c = [np.uint64(int(v) & 0xFFFFFFFF) for v in ctr]
    out = _rounds(*c, int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF)
    return tuple(int(v) for v in out)


def uniforms(seed, stream, path_start, n_paths, n_blocks):
    seed = int(seed)
    k0, k1 = seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF
    path = np.arange(n_paths, dtype=np.uint64) + np.uint64(path_start)
    c0 = np.broadcast_to(np.arange(n_blocks, dtype=np.uint64), (n_paths, n_blocks))
    c1 = np.full((n_paths, n_blocks), int(stream), dtype=np.uint64)
    c2 = np.broadcast_to((path & _MASK)[:, None], (n_paths, n_blocks))
    c3 = np.broadcast_to((path >> _S32)[:, None], (n_paths, n_blocks))
    r0, r1, r2, r3 = _rounds(c0, c1, c2, c3, k0, k1)
    out = np.empty((n_paths, 2 * n_blocks), dtype=np.float64)
    scale = 1.0 / 9007199254740992.0
    out[:, 0::2] = ((r0 >> np.uint64(5)).astype(np.float64) * 67108864.0
                    + (r1 >> np.uint64(6)).astype(np.float64)) * scale
    out[:, 1::2] = ((r2 >> np.uint64(5)).astype(np.float64) * 67108864.0
                    + (r3 >> np.uint64(6)).astype(np.float64)) * scale
    return out
