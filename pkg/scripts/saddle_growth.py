"""Saddle-connection counts N(L) and the ratio N(L)/L^2, which should level off (quadratic growth)."""
import argparse
from dataclasses import asdict, dataclass

import numpy as np

from flatflow import load_surface
from flatflow.saddles import enumerate_saddle_connections


@dataclass
class GrowthConfig:
    surface: str = "octagon.surf"
    l_max: float = 20.0
    step: float = 1.0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    for name, value in asdict(GrowthConfig()).items():
        ap.add_argument(f"--{name.replace('_', '-')}", type=type(value), default=value)
    cfg = GrowthConfig(**vars(ap.parse_args()))
    s = load_surface(cfg.surface)
    lengths = np.sort([sc.length for sc in enumerate_saddle_connections(s, cfg.l_max)])
    print("L,count,count_over_L2")
    for L in np.arange(cfg.step, cfg.l_max + 1e-9, cfg.step):
        n = int(np.searchsorted(lengths, L + 1e-9, side="right"))
        print(f"{L:g},{n},{n / L ** 2:.4f}")


if __name__ == "__main__":
    main()
