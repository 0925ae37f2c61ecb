#!/usr/bin/env python3
"""Runs each firelite subcommand with --format json and validates the output
against schemas/<command>.schema.json.

Usage: check_schemas.py FIRELITE_BINARY REPO_ROOT
"""

import json
import shutil
import struct
import subprocess
import sys
import tempfile
import zlib
from pathlib import Path

import jsonschema


def run(binary, *args, expect=0):
    proc = subprocess.run([binary, "--format", "json", *args], capture_output=True, text=True)
    if proc.returncode != expect:
        sys.exit(f"{' '.join(args)}: exit {proc.returncode}, expected {expect}\n{proc.stderr}")
    return json.loads(proc.stdout)


def main():
    binary, root = sys.argv[1], Path(sys.argv[2])
    parity = root / "tests" / "fixtures" / "parity"
    weights = str(parity / "firelite_parity.flw")
    image = str(parity / "images" / "img_00.png")
    schemas = {p.name.split(".")[0]: json.loads(p.read_text()) for p in (root / "schemas").glob("*.schema.json")}

    with tempfile.TemporaryDirectory() as tmp:
        data = Path(tmp) / "data"
        for i, cls in enumerate(["fire", "nonfire", "fire", "nonfire"]):
            (data / cls).mkdir(parents=True, exist_ok=True)
            shutil.copy(parity / "images" / f"img_{i:02d}.png", data / cls)
        (data / "fire" / "broken.jpg").write_bytes(b"\xff\xd8\xff")

        empty = Path(tmp) / "empty.flw"
        inspected = run(binary, "--weights", weights, "inspect")
        assert inspected["parameters"]["trainable"] == 34978

        outputs = {
            "classify": [run(binary, "--weights", weights, "classify", image)],
            "evaluate": [run(binary, "--weights", weights, "--threads", "2", "evaluate", str(data))],
            "bench": [run(binary, "--weights", weights, "--iterations", "2", "--warmup", "0", "bench", image)],
            "inspect": [inspected],
        }
        # A file with metadata but no tensors: every tensor reported missing.
        meta = {"bn_epsilon": "0.001", "class_names": "fire,nonfire", "preprocessing": "mobilenet_scale_127.5"}
        body = bytearray(b"FLW1" + struct.pack("<II", 1, len(meta)))
        for k in sorted(meta):
            body += struct.pack("<H", len(k)) + k.encode() + struct.pack("<H", len(meta[k])) + meta[k].encode()
        body += struct.pack("<I", 0)
        body += struct.pack("<I", zlib.crc32(bytes(body)))
        empty.write_bytes(bytes(body))
        outputs["inspect"].append(run(binary, "--weights", str(empty), "inspect", expect=3))

    assert set(outputs) == set(schemas), (sorted(outputs), sorted(schemas))
    for name, docs in outputs.items():
        for doc in docs:
            jsonschema.validate(doc, schemas[name])
        print(f"{name}: {len(docs)} document(s) valid")


if __name__ == "__main__":
    main()
