#!/usr/bin/env python3
"""Independent oracle for the frozen expected values in the unit tests.

Uses only hashlib/struct/mpmath; shares no code with the C++ library.
"""
import hashlib
import struct

import mpmath


def h(b: bytes) -> bytes:
    return hashlib.sha256(b).digest()


def h_iter(seed: bytes, n: int) -> bytes:
    for _ in range(n):
        seed = h(seed)
    return seed


print("sha256('')    ", h(b"").hex())
print("sha256('abc') ", h(b"abc").hex())
print("hash_iter(0^32, 5)", h_iter(bytes(32), 5).hex())

master = bytes([0x11] * 32)
base = h(master + b"base")
print("base(0x11^32)  ", base.hex())
print("commit m=64    ", h_iter(base, 64).hex())
print("element d=2    ", h_iter(base, 62).hex())
print("commit m=1     ", h(base).hex())

prev = h(b"prev")
elem = h(b"element")
print("score(prev,element)", h(prev + elem).hex())

print("header all-zero", h(bytes(4 + 32 + 8 + 32 + 4 + 8 + 32 + 32 + 4)).hex())

# traffic record canonical bytes: kind u8 | vehicle_id 32 | lat f64 | lon f64 |
# speed f64 | heading f64 | timestamp u64 | link flag u8 [| len u32 | utf8]
rec = (bytes([0]) + bytes([0xab] * 32) + struct.pack(">dddd", 37.5665, 126.978, 13.5, 90.0)
       + struct.pack(">Q", 1700000000000) + bytes([0]))
print("tx_id BSM      ", h(rec).hex())
rec2 = (bytes([1]) + bytes([0xab] * 32) + struct.pack(">dddd", 37.5665, 126.978, 13.5, 90.0)
        + struct.pack(">Q", 1700000000000) + bytes([1]) + struct.pack(">I", 6) + b"link-7")
print("tx_id LinkUpd  ", h(rec2).hex())

mpmath.mp.dps = 50
lin = lambda x: mpmath.power(10, mpmath.mpf(x) / 10)
cs = mpmath.log(1 + lin(15), 2) - mpmath.log(1 + lin(5), 2)
print("Cs(15,5)       ", mpmath.nstr(cs, 20))

# A4 link budget: env n=2.7, PL0=47 dB @ 1 m, floor -104 dBm; radio 10 dBm, 0, 0, nf 6.
pl = lambda d: 47 + 10 * mpmath.mpf("2.7") * mpmath.log10(d)
snr_main = 10 + 0 + 0 - pl(50) - (-104 + 6)
snr_eve = 10 + 0 + 0 - pl(500) - (-104 + 6)
print("A4 snr_main    ", mpmath.nstr(snr_main, 20))
print("A4 snr_eve     ", mpmath.nstr(snr_eve, 20))
print("A4 Cs          ", mpmath.nstr(mpmath.log(1 + lin(snr_main), 2) - mpmath.log(1 + lin(snr_eve), 2), 20))

from scipy.stats import chi2
print("chi2 crit 0.001 df15", chi2.ppf(0.999, 15))

print("salted(prev, 1)", h(prev + b"retry" + struct.pack(">I", 1)).hex())
la, lb, lc = h(b"a"), h(b"b"), h(b"c")
print("merkle(a,b,c)  ", h(h(la + lb) + h(lc + lc)).hex())
print("merkle(a)      ", h(la + la).hex())

# Distances giving 15 dB / 5 dB with the default radio and environment.
print("d(15 dB)       ", mpmath.nstr(mpmath.power(10, mpmath.mpf(46) / 27), 20))
print("d(5 dB)        ", mpmath.nstr(mpmath.power(10, mpmath.mpf(56) / 27), 20))

# Gate scenario: receiver 50 m, eavesdropper 5 m (rx 0 dB, nf 6 dB). Best
# achievable capacity over the whole default knob grid.
best = mpmath.mpf(-1)
for tx in range(0, 24):
    for tg in range(0, 7):
        for rg in range(0, 7):
            for nf in range(3, 10):
                m = tx + tg + rg - pl(50) - (-104 + nf)
                e = tx + tg + 0 - pl(5) - (-104 + 6)
                c = max(mpmath.mpf(0), mpmath.log(1 + lin(m), 2) - mpmath.log(1 + lin(e), 2))
                best = max(best, c)
print("gate grid best Cs (5 m)", mpmath.nstr(best, 20))
