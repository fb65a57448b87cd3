"""Table of M(T) and C(T, K) over beta and T, next to the shell-picture value
T^(2-beta) 2^(1-beta) / (2 - beta) and the lattice value at the default grid.

    python3 scripts/mconst_table.py
"""

import argparse
import math

from cwt2.config import ExperimentConfig
from cwt2.girsanov_coupling import transport_constant
from cwt2.spectral_noise import SpatialCovariance
from cwt2.wave_solver import kernel_h_norm_sq, m_of_t


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--betas", default="0.5,1,1.5")
    ap.add_argument("--times", default="0.25,0.5,1")
    ap.add_argument("--K", type=float, default=1.0)
    args = ap.parse_args()

    grid = ExperimentConfig().grid
    print(f"{'beta':>5} {'T':>6} {'M(T)':>10} {'shell':>10} {'lattice':>10} {'C(T,K)':>10}")
    for beta in (float(b) for b in args.betas.split(",")):
        cov = SpatialCovariance(beta)
        for T in (float(t) for t in args.times.split(",")):
            M = m_of_t(T, cov)
            shell = T ** (2 - beta) * 2 ** (1 - beta) / (2 - beta)
            lattice = max(kernel_h_norm_sq(k * T / 32, cov, grid) for k in range(1, 33))
            print(f"{beta:5.2f} {T:6.3f} {M:10.6f} {shell:10.6f} {lattice:10.6f} "
                  f"{transport_constant(T, args.K, M):10.6f}")
    print(f"(1/pi = {1 / math.pi:.6f})")


if __name__ == "__main__":
    main()
