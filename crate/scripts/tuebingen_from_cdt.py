#!/usr/bin/env python3
"""Convert the cause-effect pairs bundled with the `cdt` wheel into the
pairNNNN.txt + pairmeta.txt layout read by `ncc_core::tuebingen`.

The bundled set stores every pair cause-first, so each meta line is
`id 1 1 2 2 1.0` (uniform weight).

    pip download --no-deps cdt && unzip cdt-*.whl -d cdt
    python3 scripts/tuebingen_from_cdt.py cdt/cdt/data/resources data/tuebingen
"""
import csv
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    dst.mkdir(parents=True, exist_ok=True)
    targets = {}
    with open(src / "Tuebingen_targets.csv", newline="") as f:
        for row in csv.DictReader(f):
            targets[row["SampleID"]] = float(row["Target"])
    meta = []
    with open(src / "Tuebingen_pairs.csv", newline="") as f:
        for row in csv.DictReader(f):
            sid = row["SampleID"]
            if targets.get(sid) != 1.0:
                raise SystemExit(f"{sid}: unsupported target {targets.get(sid)}")
            num = int(sid.removeprefix("pair"))
            a = row["A"].split()
            b = row["B"].split()
            if len(a) != len(b):
                raise SystemExit(f"{sid}: column lengths differ")
            with open(dst / f"pair{num:04d}.txt", "w") as out:
                for x, y in zip(a, b):
                    out.write(f"{x} {y}\n")
            meta.append(num)
    with open(dst / "pairmeta.txt", "w") as out:
        for num in sorted(meta):
            out.write(f"{num:04d} 1 1 2 2 1.0\n")
    print(f"wrote {len(meta)} pairs to {dst}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        raise SystemExit("usage: tuebingen_from_cdt.py <resources-dir> <out-dir>")
    main(Path(sys.argv[1]), Path(sys.argv[2]))
