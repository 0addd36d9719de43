"""Calibration runs behind the frozen AIS acceptance thresholds.

Runs PMC resampling on the bimodal mixture and AMIS on the standard
gaussian over 100 seeds each, and prints the statistics the acceptance
tests assert on. Usage: ``python scripts/calibrate_ais.py [--seeds 100]``.
"""

import argparse
import math

import numpy as np

from ismc.ais import AISConfig, run_ais
from ismc.proposals import ProposalParams
from ismc.targets import builtin_target

BIMODAL = {"means": [[-3.0], [3.0]], "weights": [0.5, 0.5], "vars": [1.0, 1.0]}


def pmc_run(seed, init_cov=1.0):
    rng = np.random.default_rng(seed)
    t = builtin_target("gaussian-mixture", 1, BIMODAL)
    locs = rng.uniform(-10.0, 10.0, size=(10, 1))
    cfg = AISConfig(10, 1, 20, "pmc_resample", "standard",
                    [ProposalParams(x, init_cov) for x in locs])
    out = run_ais(t, cfg, rng)
    return out.per_iteration[0].ess.fraction, out.per_iteration[-1].ess.fraction


def amis_run(seed):
    rng = np.random.default_rng(seed)
    t = builtin_target("std-gaussian", 1, {})
    cfg = AISConfig(1, 50, 10, "amis_temporal", "temporal_mixture",
                    [ProposalParams([5.0], 9.0)])
    out = run_ais(t, cfg, rng)
    loc = float(out.final_params[0].location[0])
    return loc, out.per_iteration[-1].log_z_hat - 0.5 * math.log(2 * math.pi)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=100)
    args = ap.parse_args()
    seeds = range(args.seeds)

    first, last = np.array([pmc_run(s) for s in seeds]).T
    print(f"pmc  median ess fraction: iteration 1 {np.median(first):.4f}, "
          f"final {np.median(last):.4f}")

    loc, dz = np.array([amis_run(s) for s in seeds]).T
    ok = (np.abs(loc) < 0.2) & (np.abs(dz) < 0.05)
    print(f"amis |loc| quantiles 50/90/99: {np.quantile(np.abs(loc), [.5, .9, .99]).round(4)}")
    print(f"amis |dlogZ| quantiles 50/90/99: {np.quantile(np.abs(dz), [.5, .9, .99]).round(4)}")
    print(f"amis runs meeting |loc| < 0.2 and |dlogZ| < 0.05: {ok.sum()} / {len(ok)}")


if __name__ == "__main__":
    main()
