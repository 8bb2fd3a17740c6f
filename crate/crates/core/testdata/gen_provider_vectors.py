#!/usr/bin/env python3
"""Regenerates provider_vectors.txt from an independent Python implementation
of the provider primitives. Run from this directory:

    python3 gen_provider_vectors.py > provider_vectors.txt
"""
import json
import random


def read_be(buf, k):
    take = min(k, len(buf))
    padded = bytes(buf[:take]) + b"\x00" * (k - take)
    return int.from_bytes(padded, "big") if k else 0, buf[take:]


def int_in_range(buf, lo, hi):
    assert lo <= hi
    rng = hi - lo + 1
    k = 0
    while 256 ** k < rng:
        k += 1
    u, rest = read_be(buf, k)
    return lo + u % rng, rest


def boolean(buf):
    if not buf:
        return False, buf
    return bool(buf[0] & 1), buf[1:]


def probability(buf):
    u, rest = read_be(buf, 4)
    return u / 2 ** 32, rest


def ascii_string(buf, max_len):
    if not buf:
        return "", buf
    n = buf[0] % (max_len + 1)
    body = buf[1:1 + n]
    return "".join(chr(0x20 + b % 95) for b in body), buf[1 + len(body):]


def int_list(buf, count, lo, hi):
    out = []
    for _ in range(count):
        v, buf = int_in_range(buf, lo, hi)
        out.append(v)
    return out, buf


def hx(b):
    return b.hex() if b else "-"


def render(buf, prim, args):
    if prim == "int_in_range":
        v, rest = int_in_range(buf, *args)
        val = str(v)
    elif prim == "bool":
        v, rest = boolean(buf)
        val = "true" if v else "false"
    elif prim == "probability":
        v, rest = probability(buf)
        val = repr(v)
    elif prim == "ascii_string":
        v, rest = ascii_string(buf, *args)
        val = json.dumps(v)
    else:
        v, rest = int_list(buf, *args)
        val = "[" + ",".join(map(str, v)) + "]"
    a = ",".join(map(str, args)) if args else "-"
    return f"{hx(buf)} {prim} {a} -> {val} {hx(rest)}"


def main():
    cases = [
        (b"\x00", "int_in_range", (1, 6)),
        (b"\x07", "int_in_range", (1, 6)),
        (b"", "int_in_range", (5, 9)),
        (b"\x09\x09", "int_in_range", (4, 4)),
        (b"\xff\x01", "int_in_range", (0, 255)),
        (b"\x01\x02\x07", "int_in_range", (0, 256)),
        (b"\x01", "int_in_range", (0, 65535)),
        (b"\xff" * 9, "int_in_range", (-(2 ** 63), 2 ** 63 - 1)),
        (b"\x12\x34\x56\x78", "int_in_range", (1, 10 ** 6)),
        (b"\x80", "int_in_range", (-100, 100)),
        (b"", "bool", ()),
        (b"\x03\x04", "bool", ()),
        (b"\x02", "bool", ()),
        (b"", "probability", ()),
        (b"\x80\x00\x00\x00\x01", "probability", ()),
        (b"\x00\x00\x00\x01", "probability", ()),
        (b"\xff\xff", "probability", ()),
        (b"", "ascii_string", (10,)),
        (b"\x03\x00\x5f\x41\x09", "ascii_string", (10,)),
        (b"\x07\x21\x22", "ascii_string", (3,)),
        (b"\x05\x22\x5c\x41\x42\x43", "ascii_string", (20,)),
        (b"\x02\x01\x02", "ascii_string", (0,)),
        (b"\x02\x02\x3c", "ascii_string", (5,)),
        (b"", "int_list", (3, 0, 9)),
        (b"\x01\x02", "int_list", (3, 0, 9)),
        (b"\x05", "int_list", (0, 1, 2)),
    ]
    rnd = random.Random(20240601)
    prims = ["int_in_range", "bool", "probability", "ascii_string", "int_list"]
    for i in range(60):
        prim = prims[i % len(prims)]
        buf = bytes(rnd.randrange(256) for _ in range(rnd.randrange(0, 12)))
        if prim == "int_in_range":
            lo = rnd.randrange(-10 ** rnd.randrange(1, 12), 10 ** rnd.randrange(1, 6))
            args = (lo, lo + rnd.randrange(0, 10 ** rnd.randrange(1, 12)))
        elif prim == "ascii_string":
            args = (rnd.randrange(0, 40),)
        elif prim == "int_list":
            lo = rnd.randrange(-50, 50)
            args = (rnd.randrange(0, 6), lo, lo + rnd.randrange(0, 70000))
        else:
            args = ()
        cases.append((buf, prim, args))
    print("# provider conformance vectors: <hex buffer> <primitive> <args> -> <value> <hex rest>")
    for buf, prim, args in cases:
        print(render(buf, prim, args))


if __name__ == "__main__":
    main()
