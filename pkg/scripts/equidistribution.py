"""Weighted orbit averages mu_{Q,delta}(f) along a period grid and their successive differences."""
import argparse
from dataclasses import asdict, dataclass

from flatflow import load_surface
from flatflow.thermodynamics import Potential, equidistribution_series


@dataclass
class EquidistConfig:
    surface: str = "octagon.surf"
    phi: str = "phi_tilt.json"
    f: str = "f_center.json"
    q_min: float = 6.0
    q_max: float = 14.0
    q_step: float = 2.0
    delta: float = 0.5
    method: str = "transfer"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    for name, value in asdict(EquidistConfig()).items():
        ap.add_argument(f"--{name.replace('_', '-')}", type=type(value), default=value)
    cfg = EquidistConfig(**vars(ap.parse_args()))
    n = int(round((cfg.q_max - cfg.q_min) / cfg.q_step))
    grid = [cfg.q_min + k * cfg.q_step for k in range(n + 1)]
    ser = equidistribution_series(load_surface(cfg.surface), Potential.load(cfg.phi), grid, cfg.delta,
                                  Potential.load(cfg.f), method=cfg.method)
    print(f"# method={ser.method}")
    print("Q,mu,diff")
    for i, (q, v) in enumerate(ser.to_rows()):
        diff = ser.differences[i - 1] if i else ""
        print(f"{q:g},{v:.10g},{diff if diff == '' else f'{diff:.6g}'}")


if __name__ == "__main__":
    main()
