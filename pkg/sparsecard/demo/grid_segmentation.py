import logging

from tabulate import tabulate

import sparsecard as sc
from sparsecard.dsfm import SWEEP_HEADERS, sweep
from sparsecard.synthetic import grid_segmentation_instance

logging.basicConfig(level=logging.INFO)

inst = grid_segmentation_instance(side=50, regions=40, seed=0)
print(f"grid instance: n={inst.n}, components={len(inst.components)}, mu={inst.mu}\n")

rows = sweep(inst, options=sc.SolveOptions(scale=10 ** 6))
print(tabulate([r.as_row() for r in rows], headers=SWEEP_HEADERS, floatfmt=".6g"))

sol = sc.sparse_card(inst, 1.0)
print(f"\neps=1.0: objective {sol.objective:.6f}, certified ratio {sol.a_posteriori_ratio:.6f}, "
      f"{sol.stats.edges} edges on {sol.stats.nodes} nodes")
