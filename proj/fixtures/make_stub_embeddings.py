#!/usr/bin/env python3
"""Regenerate the checked-in TRGE fixtures from fixtures/descriptions/.

Offline stand-in for a pretrained sentence encoder: every token maps to a fixed Gaussian
vector seeded by its hash, and a description is the mean over its tokens (plus [CLS]/[SEP]).
Descriptions that share words end up close together, which is all the graph tests rely on.
"""
import hashlib
import json
import re
import struct
import sys
from pathlib import Path

import numpy as np

DIM = 768
HERE = Path(__file__).resolve().parent


def token_vector(tok: str) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(tok.encode()).digest()[:8], "little")
    return np.random.default_rng(seed).standard_normal(DIM)


def encode(text: str) -> np.ndarray:
    toks = ["[CLS]"] + re.findall(r"[a-z0-9']+", text.lower()) + ["[SEP]"]
    return np.mean([token_vector(t) for t in toks], axis=0)


def write_trge(path: Path, labels, rows):
    mat = np.asarray(rows, dtype="<f4")
    with open(path, "wb") as f:
        f.write(b"TRGE")
        f.write(struct.pack("<HII", 1, mat.shape[0], mat.shape[1]))
        f.write(mat.tobytes(order="C"))
    side = path.with_name(path.name[: -len(".trge")] + ".labels.json")
    side.write_text(json.dumps({"labels": labels, "source": "stub-hash-768", "pooling": "mean"}, indent=2) + "\n")


def main(argv):
    out_dir = HERE / "embeddings"
    out_dir.mkdir(exist_ok=True)
    for desc in sorted((HERE / "descriptions").glob("*.json")):
        items = json.loads(desc.read_text())
        write_trge(out_dir / (desc.stem + ".trge"), [i["label"] for i in items],
                   [encode(i["description"]) for i in items])
        print(f"{desc.stem}: {len(items)} rows")


if __name__ == "__main__":
    main(sys.argv[1:])
