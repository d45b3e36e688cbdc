"""Single-error cleanup code for residual bit flips after syndrome decoding.

Blocks of 4091 payload bits get 12 parity bits from a degree-12 primitive
polynomial.  The parities travel over the noiseless public channel, so only
payload positions can be in error; 4091 consecutive powers of x modulo the
polynomial are distinct, which pins any single flip exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

BLOCK_BITS = 4091
PARITY_BITS = 12
OVERHEAD_PER_BIT = PARITY_BITS / BLOCK_BITS

# x^12 + x^6 + x^4 + x + 1, primitive over GF(2)
_PRIM_POLY = 0x1053
_MASK = (1 << PARITY_BITS) - 1


def _power_table() -> np.ndarray:
    """x^(12+i) mod the polynomial for i = 0..BLOCK_BITS-1, as 12-bit ints."""
    out = np.empty(BLOCK_BITS, np.int64)
    reg = 1
    for _ in range(PARITY_BITS):
        reg <<= 1
        if reg >> PARITY_BITS:
            reg ^= _PRIM_POLY
    for i in range(BLOCK_BITS):
        out[i] = reg
        reg <<= 1
        if reg >> PARITY_BITS:
            reg ^= _PRIM_POLY
    return out


_POWERS = _power_table()
_POWERS.setflags(write=False)
_POSITION = {int(s): i for i, s in enumerate(_POWERS)}


def _check_block(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.shape != (BLOCK_BITS,):
        raise InvalidInputError(
            f"expected a block of exactly {BLOCK_BITS} bits, got {bits.shape}"
        )
    return bits.astype(np.uint8)


def _syndrome_int(bits: np.ndarray) -> int:
    on = _POWERS[bits != 0]
    if on.size == 0:
        return 0
    return int(np.bitwise_xor.reduce(on))


def _int_to_bits(value: int) -> np.ndarray:
    return ((value >> np.arange(PARITY_BITS)) & 1).astype(np.uint8)


def _bits_to_int(bits: np.ndarray) -> int:
    bits = np.asarray(bits)
    if bits.shape != (PARITY_BITS,):
        raise InvalidInputError(f"expected {PARITY_BITS} parity bits")
    return int(np.sum(bits.astype(np.int64) << np.arange(PARITY_BITS)))


def bch_cleanup_encode(bits: np.ndarray) -> np.ndarray:
    """12 parity bits for one 4091-bit block."""
    return _int_to_bits(_syndrome_int(_check_block(bits)))


def bch_cleanup_decode(bits: np.ndarray, parities: np.ndarray) -> np.ndarray:
    """Corrected copy of the block; fixes at most one flipped payload bit.

    Two or more flips fall outside the t=1 guarantee and come back either
    unchanged or miscorrected.
    """
    block = _check_block(bits).copy()
    delta = _syndrome_int(block) ^ _bits_to_int(parities)
    if delta == 0:
        return block
    pos = _POSITION.get(delta)
    if pos is not None:
        block[pos] ^= 1
    return block
