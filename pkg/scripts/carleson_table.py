"""Carleson constant against the diagonalising similarity for merging root pairs.

    python3 scripts/carleson_table.py --base 0.5 --gaps 0.3 0.1 0.01 0.001 0.0001
"""
import argparse
import csv
from dataclasses import dataclass, field

from cbiso.model_space import BlaschkeProduct, carleson_delta, vasyunin_similarity


@dataclass
class CarlesonTable:
    base: complex = 0.5
    gaps: list = field(default_factory=lambda: [0.3, 0.1, 0.03, 0.01, 0.001, 0.0001])
    extra_roots: list = field(default_factory=lambda: [0.0])
    out: str = "artifacts/carleson_table.csv"


def run(cfg: CarlesonTable) -> list[dict]:
    rows = []
    for gap in cfg.gaps:
        th = BlaschkeProduct.from_roots([*cfg.extra_roots, cfg.base, cfg.base + gap])
        delta = carleson_delta(th)
        vas = vasyunin_similarity(th)
        rows.append({"gap": gap, "carleson_delta": delta, "kappa_V": vas.kappa, "kappa_times_delta": vas.kappa * delta})
        print(f"gap {gap:<8g} delta {delta:.6e}  kappa(V) {vas.kappa:.6e}  product {vas.kappa * delta:.4f}")
    return rows


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--base", type=float, default=0.5)
    p.add_argument("--gaps", type=float, nargs="+", default=CarlesonTable().gaps)
    p.add_argument("--extra-roots", dest="extra_roots", type=float, nargs="*", default=[0.0])
    p.add_argument("--out", default=CarlesonTable.out)
    cfg = CarlesonTable(**vars(p.parse_args()))
    rows = run(cfg)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
