#!/usr/bin/env python3
# Copyright 2026 The lyapguard Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds the MNIST IDX fixture used by the tests.

Source: the `mnist` npm package (cazala/mnist), which ships 10000 MNIST
digits as per-class JSON arrays of pixel/255 rounded to three decimals.
round(v * 255) recovers the original bytes exactly.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_fixture.py package/src/digits tests/data 1000

Image k of the output is digit k % 10, sample k // 10 of that class.
"""
import json
import struct
import sys
from pathlib import Path


def main() -> int:
    src, dst, count = Path(sys.argv[1]), Path(sys.argv[2]), int(sys.argv[3])
    per_class = [json.loads((src / f"{d}.json").read_text())["data"] for d in range(10)]
    images = bytearray()
    labels = bytearray()
    for k in range(count):
        digit, sample = k % 10, k // 10
        px = per_class[digit][sample * 784:(sample + 1) * 784]
        if len(px) != 784:
            raise SystemExit(f"class {digit} has fewer than {sample + 1} samples")
        images.extend(int(round(v * 255)) for v in px)
        labels.append(digit)
    dst.mkdir(parents=True, exist_ok=True)
    (dst / "mnist-subset-images.idx3-ubyte").write_bytes(
        struct.pack(">IIII", 0x803, count, 28, 28) + bytes(images))
    (dst / "mnist-subset-labels.idx1-ubyte").write_bytes(
        struct.pack(">II", 0x801, count) + bytes(labels))
    return 0


if __name__ == "__main__":
    sys.exit(main())
