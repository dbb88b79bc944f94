"""Best isometry defect of the row/diagonal pair as the condition cap grows.

The defect search is a numerical companion to the impossibility argument:
a positive floor at every cap is evidence, not proof.

    python3 scripts/defect_study.py --caps 1 2 5 10 100 --budget 50
"""
import argparse
import json
from dataclasses import asdict, dataclass, field

from cbiso.counterexample import build_scene, defect_minimize


@dataclass
class DefectStudy:
    caps: list = field(default_factory=lambda: [1.0, 2.0, 5.0, 10.0, 100.0])
    budget: int = 50
    grid: int = 32
    seed: int = 0
    out: str = "artifacts/defect_study.json"


def run(cfg: DefectStudy) -> dict:
    scene = build_scene()
    rows = []
    for cap in cfg.caps:
        res = defect_minimize(scene, cap, cfg.budget, cfg.seed, cfg.grid)
        rows.append({"kappa_cap": cap, "best_defect": res.best_defect, "restart_values": res.restart_values})
        print(f"cap {cap:8.2f}  best defect {res.best_defect:.6f}")
    return {"config": asdict(cfg), "rows": rows}


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--caps", type=float, nargs="+", default=DefectStudy().caps)
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--grid", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=DefectStudy.out)
    cfg = DefectStudy(**vars(p.parse_args()))
    with open(cfg.out, "w") as fh:
        json.dump(run(cfg), fh, indent=2)
