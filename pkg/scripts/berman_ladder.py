"""Estimate fBm Berman constants over a grid of Hurst indices and thresholds.

Each estimate is stored under its constant label in a JSON store that the
``asymptotic`` command reads with ``--store``.
"""
from dataclasses import dataclass

from _config import parse_config

from sojourn_lab import FBm, special_constant
from sojourn_lab.berman import BermanStore, berman_limit, limit_spec_dict


@dataclass
class LadderConfig:
    hursts: tuple = (0.3, 0.5, 0.7)
    xs: tuple = (0.0, 0.5, 1.0)
    ladder: tuple = (8.0, 16.0, 32.0)
    step_exponent: int = 8
    replicates: int = 5_000
    seed: int = 1
    workers: int = 1
    store: str = "berman_store.json"


def main(argv=None):
    cfg = parse_config(LadderConfig, argv, __doc__)
    step = 2.0**-cfg.step_exponent
    store = BermanStore(cfg.store)
    for H in cfg.hursts:
        for x in cfg.xs:
            est = berman_limit(FBm(H), x, cfg.ladder, step, cfg.replicates, cfg.seed, workers=cfg.workers)
            store.put(limit_spec_dict(FBm(H), x, cfg.ladder, step, cfg.replicates, cfg.seed), est)
            rungs = " ".join(f"{r.point:.4f}" for r in est.ladder)
            extra = f" closed form {special_constant('berman_B1', x=x):.4f}" if H == 0.5 else ""
            flags = f" [{'; '.join(est.flags)}]" if est.flags else ""
            print(f"{est.label}: {est.point:.4f} +- {est.stderr:.4f} (rungs {rungs}){extra}{flags}")
    store.save()
    print(f"saved {len(store.records)} records to {cfg.store}")


if __name__ == "__main__":
    main()
