#!/usr/bin/env python3
# Copyright 2026 The Splitvault Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent keystream oracle for the test64 cipher.

Seeding: s = 0; for each key byte b: s = (s * 0x100000001B3) ^ b  (mod 2^64).
Keystream: per byte s = s * 6364136223846793005 + 1442695040888963407 (mod 2^64),
emit s >> 56.

  testcipher_oracle.py --write FILE   regenerate the vector file
  testcipher_oracle.py --check FILE   verify the committed vectors
"""
import argparse
import sys

MASK = (1 << 64) - 1

# (key hex, keystream length)
CASES = [
    ("", 16),
    ("00", 8),
    ("ff", 8),
    ("0001020304050607", 32),
    ("0123456789abcdef", 64),
    ("deadbeefcafebabe", 17),
    ("ffffffffffffffff", 1),
    ("8000000000000001", 40),
    ("6b6579", 24),
    ("a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5", 100),
]


def keystream(key: bytes, n: int) -> bytes:
    s = 0
    for b in key:
        s = ((s * 0x100000001B3) & MASK) ^ b
    out = bytearray()
    for _ in range(n):
        s = (s * 6364136223846793005 + 1442695040888963407) & MASK
        out.append(s >> 56)
    return bytes(out)


def render() -> str:
    lines = ["# key_hex length keystream_hex (empty key written as '-')"]
    for key_hex, n in CASES:
        ks = keystream(bytes.fromhex(key_hex), n).hex()
        lines.append(f"{key_hex or '-'} {n} {ks}")
    return "\n".join(lines) + "\n"


def main() -> int:
    p = argparse.ArgumentParser()
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--write")
    g.add_argument("--check")
    args = p.parse_args()
    if args.write:
        with open(args.write, "w") as f:
            f.write(render())
        return 0
    with open(args.check) as f:
        committed = f.read()
    if committed != render():
        print("test64 vectors differ from the oracle", file=sys.stderr)
        return 1
    print(f"{len(CASES)} test64 vectors match")
    return 0


if __name__ == "__main__":
    sys.exit(main())
