"""On-disk cache of spectral decompositions.

File layout (all little-endian)::

    8 bytes   magic b"DIMERSPD"
    uint32    format version
    uint32    header length L
    L bytes   UTF-8 JSON header: key, grid, params, energy_cutoff, blocks[]
    then per block, in header order:
        float64[count]          energies
        float64[dim * count]    eigenvectors, row-major (dim, count)
"""

from __future__ import annotations

import dataclasses
import json
import os
import struct
from pathlib import Path

import numpy as np

from .hamiltonian import ParityBasis, Retention, SpectralBlock, SpectralDecomposition, TwoBodyHamiltonian

MAGIC = b"DIMERSPD"
VERSION = 1


class DecompositionCache:
    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)

    def key(self, h: TwoBodyHamiltonian, retain: Retention) -> str:
        import hashlib

        m = hashlib.sha256(h.fingerprint().encode())
        m.update(repr(dataclasses.astuple(retain)).encode())
        m.update(struct.pack("<I", VERSION))
        return m.hexdigest()[:32]

    def path(self, h: TwoBodyHamiltonian, retain: Retention) -> Path:
        return self.directory / f"{self.key(h, retain)}.spd"

    def store(self, h: TwoBodyHamiltonian, retain: Retention, dec: SpectralDecomposition) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        header = {
            "key": self.key(h, retain),
            "grid": dataclasses.asdict(h.grid.spec),
            "params": dataclasses.asdict(h.params),
            "energy_cutoff": dec.energy_cutoff,
            "diagnostics": {k: float(v) for k, v in dec.diagnostics.items()},
            "blocks": [
                {
                    "label": b.label,
                    "sign": 0 if b.basis is None else b.basis.sign,
                    "dim": int(b.vectors.shape[0]),
                    "count": int(b.count),
                }
                for b in dec.blocks
            ],
        }
        raw = json.dumps(header, sort_keys=True).encode()
        target = self.path(h, retain)
        tmp = target.with_suffix(".tmp")
        with open(tmp, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", VERSION, len(raw)))
            fh.write(raw)
            for b in dec.blocks:
                fh.write(np.ascontiguousarray(b.energies, dtype="<f8").tobytes())
                fh.write(np.ascontiguousarray(b.vectors, dtype="<f8").tobytes())
        os.replace(tmp, target)
        return target

    def load(self, h: TwoBodyHamiltonian, retain: Retention) -> SpectralDecomposition | None:
        target = self.path(h, retain)
        if not target.exists():
            return None
        return read_decomposition(target, h)


def read_decomposition(path: str | os.PathLike, h: TwoBodyHamiltonian) -> SpectralDecomposition:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not a decomposition cache file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        header = json.loads(fh.read(hlen).decode())
        blocks = []
        for spec in header["blocks"]:
            dim, count = spec["dim"], spec["count"]
            w = np.fromfile(fh, dtype="<f8", count=count)
            v = np.fromfile(fh, dtype="<f8", count=dim * count).reshape(dim, count)
            basis = None if spec["sign"] == 0 else ParityBasis(h.index_map, spec["sign"])
            blocks.append(SpectralBlock(w, v, basis, spec["label"]))
    return SpectralDecomposition(tuple(blocks), h.grid, h.params, header["energy_cutoff"],
                                 dict(header.get("diagnostics", {})))
