"""Regular and singular growth rates of weighted closed-geodesic sums on a period grid."""
import argparse
import json
from dataclasses import asdict, dataclass

from flatflow import load_surface
from flatflow.thermodynamics import Potential, pressure_gap_report


@dataclass
class PressureConfig:
    surface: str = "octagon.surf"
    phi: str = "phi_zero.json"
    q_min: float = 6.0
    q_max: float = 14.0
    q_step: float = 2.0
    delta: float = 0.5
    method: str = "transfer"

    @property
    def grid(self):
        n = int(round((self.q_max - self.q_min) / self.q_step))
        return [self.q_min + k * self.q_step for k in range(n + 1)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    for name, value in asdict(PressureConfig()).items():
        ap.add_argument(f"--{name.replace('_', '-')}", type=type(value), default=value)
    cfg = PressureConfig(**vars(ap.parse_args()))
    s = load_surface(cfg.surface)
    rep = pressure_gap_report(s, Potential.load(cfg.phi), cfg.grid, cfg.delta, method=cfg.method)
    print(json.dumps({"config": asdict(cfg), "report": rep.to_dict()}, indent=1, sort_keys=True))


if __name__ == "__main__":
    main()
