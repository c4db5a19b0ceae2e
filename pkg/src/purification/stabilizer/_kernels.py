"""Bit-packed tableau kernels.

Storage is column-major: ``xs[q]`` and ``zs[q]`` are bitsets over the 2n
generator rows (row ``i`` lives in word ``i >> 6``, bit ``i & 63``), ``rs`` is
the sign bitset.  Rows ``0..n-1`` are destabilizers, ``n..2n-1`` stabilizers.
Gates touch two or four columns; row products are word-parallel across every
target row at once.

All shifts and masks are kept in ``uint64``; mixing with signed ints makes
numba promote to float.
"""

import numpy as np
from numba import njit

ONE = np.uint64(1)
ZERO = np.uint64(0)
ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True)
def bit(row):
    return ONE << np.uint64(row & 63)


@njit(cache=True)
def get_bit(col, row):
    return (col[row >> 6] >> np.uint64(row & 63)) & ONE


@njit(cache=True)
def row_mask(n, start, stop):
    """Bitset with rows ``start..stop-1`` set."""
    words = (2 * n + 63) // 64
    out = np.zeros(words, dtype=np.uint64)
    for r in range(start, stop):
        out[r >> 6] |= bit(r)
    return out


# ---------------------------------------------------------------- gates


@njit(cache=True)
def h(xs, zs, rs, q):
    for w in range(xs.shape[1]):
        x = xs[q, w]
        z = zs[q, w]
        rs[w] ^= x & z
        xs[q, w] = z
        zs[q, w] = x


@njit(cache=True)
def s(xs, zs, rs, q):
    for w in range(xs.shape[1]):
        x = xs[q, w]
        rs[w] ^= x & zs[q, w]
        zs[q, w] ^= x


@njit(cache=True)
def sdg(xs, zs, rs, q):
    for w in range(xs.shape[1]):
        x = xs[q, w]
        rs[w] ^= x & ~zs[q, w]
        zs[q, w] ^= x


@njit(cache=True)
def pauli_x(xs, zs, rs, q):
    for w in range(xs.shape[1]):
        rs[w] ^= zs[q, w]


@njit(cache=True)
def pauli_z(xs, zs, rs, q):
    for w in range(xs.shape[1]):
        rs[w] ^= xs[q, w]


@njit(cache=True)
def cnot(xs, zs, rs, c, t):
    for w in range(xs.shape[1]):
        xc = xs[c, w]
        zc = zs[c, w]
        xt = xs[t, w]
        zt = zs[t, w]
        rs[w] ^= xc & zt & ~(xt ^ zc)
        xs[t, w] = xt ^ xc
        zs[c, w] = zc ^ zt


@njit(cache=True)
def xx_pi4(xs, zs, rs, a, b):
    # (H_a H_b) CNOT(a,b) S_b CNOT(a,b) (H_a H_b)
    h(xs, zs, rs, a)
    h(xs, zs, rs, b)
    cnot(xs, zs, rs, a, b)
    s(xs, zs, rs, b)
    cnot(xs, zs, rs, a, b)
    h(xs, zs, rs, a)
    h(xs, zs, rs, b)


@njit(cache=True)
def clifford_1q(xs, zs, rs, q, codes):
    for k in range(codes.shape[0]):
        c = codes[k]
        if c == 0:
            break
        if c == 1:
            h(xs, zs, rs, q)
        else:
            s(xs, zs, rs, q)


@njit(cache=True)
def to_z_basis(xs, zs, rs, q, basis):
    """Rotate so that ``basis`` (0=X, 1=Y, 2=Z) on ``q`` becomes Z."""
    if basis == 0:
        h(xs, zs, rs, q)
    elif basis == 1:
        sdg(xs, zs, rs, q)
        h(xs, zs, rs, q)


@njit(cache=True)
def from_z_basis(xs, zs, rs, q, basis):
    if basis == 0:
        h(xs, zs, rs, q)
    elif basis == 1:
        h(xs, zs, rs, q)
        s(xs, zs, rs, q)


# ---------------------------------------------------------------- measurement


@njit(cache=True)
def is_deterministic(xs, zs, smask, q, basis):
    """True iff the basis Pauli (0=X, 1=Y, 2=Z) on ``q`` commutes with every stabilizer."""
    for w in range(xs.shape[1]):
        if basis == 0:
            col = zs[q, w]
        elif basis == 1:
            col = xs[q, w] ^ zs[q, w]
        else:
            col = xs[q, w]
        if col & smask[w]:
            return False
    return True


@njit(cache=True)
def _g_accumulate(xp, zp, x, z, u, lo, hi, w):
    # Add the Pauli-product phase exponent g(row p, target row) mod 4 into
    # the (lo, hi) bit planes, restricted to rows in ``u``.
    if xp and zp:
        plus = z & ~x
        minus = x & ~z
    elif xp:
        plus = z & x
        minus = z & ~x
    else:
        plus = x & ~z
        minus = x & z
    plus &= u
    minus &= u
    carry = lo[w] & plus
    lo[w] ^= plus
    hi[w] ^= carry
    borrow = ~lo[w] & minus
    lo[w] ^= minus
    hi[w] ^= borrow


@njit(cache=True)
def multiply_rows_into(xs, zs, rs, n, p, upd):
    """Left-multiply row ``p`` into every row in bitset ``upd`` (``p`` excluded).

    Every updated row must commute with row ``p`` for its sign to be
    meaningful.
    """
    words = xs.shape[1]
    lo = np.zeros(words, dtype=np.uint64)
    hi = np.zeros(words, dtype=np.uint64)
    pw = p >> 6
    pb = np.uint64(p & 63)
    for j in range(n):
        xp = (xs[j, pw] >> pb) & ONE
        zp = (zs[j, pw] >> pb) & ONE
        if xp == ZERO and zp == ZERO:
            continue
        for w in range(words):
            x = xs[j, w]
            z = zs[j, w]
            u = upd[w]
            _g_accumulate(xp, zp, x, z, u, lo, hi, w)
            if xp:
                xs[j, w] = x ^ u
            if zp:
                zs[j, w] = z ^ u
    rp = (rs[pw] >> pb) & ONE
    for w in range(words):
        flip = hi[w]
        if rp:
            flip = ~flip
        rs[w] ^= flip & upd[w]


@njit(cache=True)
def collapse_z(xs, zs, rs, n, q, p, outcome):
    """Project onto Z_q = (-1)^outcome given pivot stabilizer row ``p``."""
    words = xs.shape[1]
    upd = xs[q].copy()
    upd[p >> 6] &= ~bit(p)
    multiply_rows_into(xs, zs, rs, n, p, upd)
    d = p - n
    dw = d >> 6
    db = bit(d)
    pw = p >> 6
    pb = bit(p)
    for j in range(n):
        # destabilizer d := old stabilizer p; stabilizer p := +-Z_q
        if xs[j, pw] & pb:
            xs[j, dw] |= db
        else:
            xs[j, dw] &= ~db
        if zs[j, pw] & pb:
            zs[j, dw] |= db
        else:
            zs[j, dw] &= ~db
        xs[j, pw] &= ~pb
        zs[j, pw] &= ~pb
    zs[q, pw] |= pb
    if rs[pw] & pb:
        rs[dw] |= db
    else:
        rs[dw] &= ~db
    if outcome:
        rs[pw] |= pb
    else:
        rs[pw] &= ~pb


@njit(cache=True)
def find_pivot_z(xs, n, q):
    """First stabilizer row anticommuting with Z_q, or -1."""
    for r in range(n, 2 * n):
        if (xs[q, r >> 6] >> np.uint64(r & 63)) & ONE:
            return r
    return -1


@njit(cache=True)
def stabilizer_product(xs, zs, rs, n, sel):
    """Product of stabilizer rows ``n + i`` for destabilizer rows ``i`` in ``sel``.

    Returns (x bits, z bits, sign bit) of the product.
    """
    px = np.zeros(n, dtype=np.uint8)
    pz = np.zeros(n, dtype=np.uint8)
    e = 0
    for i in range(n):
        if not ((sel[i >> 6] >> np.uint64(i & 63)) & ONE):
            continue
        r = n + i
        rw = r >> 6
        rb = np.uint64(r & 63)
        if (rs[rw] >> rb) & ONE:
            e += 2
        for j in range(n):
            x1 = (xs[j, rw] >> rb) & ONE
            z1 = (zs[j, rw] >> rb) & ONE
            x2 = px[j]
            z2 = pz[j]
            if x1 and z1:
                e += int(z2) - int(x2)
            elif x1:
                if z2:
                    e += 1 if x2 else -1
            elif z1:
                if x2:
                    e += -1 if z2 else 1
            px[j] = x2 ^ np.uint8(x1)
            pz[j] = z2 ^ np.uint8(z1)
    e %= 4
    return px, pz, e >> 1


@njit(cache=True)
def deterministic_z_outcome(xs, zs, rs, n, q):
    sel = xs[q].copy()
    px, pz, sign = stabilizer_product(xs, zs, rs, n, sel)
    return sign


@njit(cache=True)
def measure_z(xs, zs, rs, n, q, outcome):
    """Z measurement.  ``outcome`` is used only if the result is random.

    Returns (outcome, deterministic).
    """
    p = find_pivot_z(xs, n, q)
    if p < 0:
        return deterministic_z_outcome(xs, zs, rs, n, q), True
    collapse_z(xs, zs, rs, n, q, p, outcome)
    return outcome, False


@njit(cache=True)
def measure(xs, zs, rs, n, q, basis, outcome):
    to_z_basis(xs, zs, rs, q, basis)
    res, det = measure_z(xs, zs, rs, n, q, outcome)
    from_z_basis(xs, zs, rs, q, basis)
    return res, det


@njit(cache=True)
def anticommute_mask(xs, zs, n, pxb, pzb):
    """Rows whose generator anticommutes with the Pauli (pxb, pzb)."""
    words = xs.shape[1]
    acc = np.zeros(words, dtype=np.uint64)
    for j in range(n):
        if pzb[j]:
            for w in range(words):
                acc[w] ^= xs[j, w]
        if pxb[j]:
            for w in range(words):
                acc[w] ^= zs[j, w]
    return acc


@njit(cache=True)
def expectation(xs, zs, rs, n, pxb, pzb):
    """Return (value, sign bit) where value is 1 if +-P is a stabilizer else 0."""
    acc = anticommute_mask(xs, zs, n, pxb, pzb)
    for r in range(n, 2 * n):
        if (acc[r >> 6] >> np.uint64(r & 63)) & ONE:
            return 0, 0
    qx, qz, sign = stabilizer_product(xs, zs, rs, n, acc)
    return 1, sign


@njit(cache=True)
def single_qubit_entropy(xs, zs, smask, q):
    """Entropy (0 or 1) of qubit ``q``.

    The restriction of the stabilizer rows to ``q`` has GF(2) rank 2 exactly
    when at least two distinct non-identity Paulis appear there.
    """
    has_x = False
    has_z = False
    has_y = False
    for w in range(xs.shape[1]):
        x = xs[q, w] & smask[w]
        z = zs[q, w] & smask[w]
        if x & ~z:
            has_x = True
        if z & ~x:
            has_z = True
        if x & z:
            has_y = True
    return 1 if int(has_x) + int(has_z) + int(has_y) >= 2 else 0


@njit(cache=True)
def gf2_rank(mat):
    """Rank over GF(2) of a 0/1 uint8 matrix (destroys its argument)."""
    rows, cols = mat.shape
    rank = 0
    for c in range(cols):
        piv = -1
        for r in range(rank, rows):
            if mat[r, c]:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for k in range(cols):
                tmp = mat[piv, k]
                mat[piv, k] = mat[rank, k]
                mat[rank, k] = tmp
        for r in range(rows):
            if r != rank and mat[r, c]:
                for k in range(c, cols):
                    mat[r, k] ^= mat[rank, k]
        rank += 1
        if rank == rows:
            break
    return rank


# ---------------------------------------------------------------- evolution


@njit(cache=True)
def evolve(
    xs, zs, rs, smask, n, L, ref, draws, outcomes, p, px, eligible, n_eligible,
    reinit_at, entropy, stop_when_pure, pairs, meas_step, meas_qubit,
    meas_basis, meas_outcome,
):
    """Monitored XX(pi/4) evolution with the eligible-list measurement policy.

    ``draws[t]`` holds five uniforms for step ``t``: two for the qubit pair,
    one for "measure?", one for which qubit, one for the basis.
    ``outcomes`` is consumed in order, one entry per random measurement.
    ``entropy`` (length T+1) receives the reference entropy after each step
    when non-empty.  Returns (#steps simulated, #measurements, n_eligible).
    """
    T = draws.shape[0]
    track = entropy.shape[0] > 0
    m = 0
    k = 0
    if track:
        entropy[0] = single_qubit_entropy(xs, zs, smask, ref)
        if stop_when_pure and entropy[0] == 0:
            for t in range(1, T + 1):
                entropy[t] = 0
            return 0, 0, n_eligible
    for t in range(T):
        a = int(draws[t, 0] * L)
        b = int(draws[t, 1] * (L - 1))
        if b >= a:
            b += 1
        pairs[t, 0] = a
        pairs[t, 1] = b
        xx_pi4(xs, zs, rs, a, b)
        if draws[t, 2] < p:
            ina = eligible[a]
            inb = eligible[b]
            q = -1
            if ina and inb:
                q = a if draws[t, 3] < 0.5 else b
            elif ina:
                q = a
            elif inb:
                q = b
            if q >= 0:
                basis = 0 if draws[t, 4] < px else 2
                if not is_deterministic(xs, zs, smask, q, basis):
                    bit_out = 1 if outcomes[k] >= 0.5 else 0
                    k += 1
                    measure(xs, zs, rs, n, q, basis, bit_out)
                    meas_step[m] = t
                    meas_qubit[m] = q
                    meas_basis[m] = basis
                    meas_outcome[m] = bit_out
                    m += 1
                    eligible[q] = False
                    n_eligible -= 1
                    if n_eligible <= reinit_at:
                        for i in range(L):
                            eligible[i] = True
                        n_eligible = L
        if track:
            e = single_qubit_entropy(xs, zs, smask, ref)
            entropy[t + 1] = e
            if stop_when_pure and e == 0:
                for r in range(t + 2, T + 1):
                    entropy[r] = 0
                return t + 1, m, n_eligible
    return T, m, n_eligible
