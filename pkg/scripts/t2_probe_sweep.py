"""Projected transport inequality for a growing set of probes.

For m = 1, 2, 4, 8 probes, estimates W2 between the unshifted and shifted laws
and compares it with sqrt(2 C H(Q|P)).

    python3 scripts/t2_probe_sweep.py --replicas 1000
"""

import argparse

from cwt2.artifacts import write_csv
from cwt2.config import ExperimentConfig
from cwt2.transport_metrics import Projection, t2_check

PROBES = ["end:8,8,8", "end:6,8,8", "end:8,10,8", "end:8,8,5", "24:8,8,8", "24:4,4,4", "16:8,8,8", "end:12,12,12"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None)
    ap.add_argument("--replicas", type=int, default=1000)
    ap.add_argument("--bootstrap", type=int, default=200)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", default="out/t2_sweep.csv")
    args = ap.parse_args()

    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    shift = cfg.make_shift()
    rows = []
    for m in (1, 2, 4, 8):
        probes = cfg.probe_points(PROBES[:m])
        rep = t2_check(Projection(probes), shift, args.replicas, cfg, n_boot=args.bootstrap, threads=args.threads)
        rows.append((m, rep.D, rep.error, rep.B, rep.entropy, rep.verdict))
        print(f"m={m}  D={rep.D:.5f} +/- {rep.error:.5f}  B={rep.B:.5f}  {rep.verdict}")
    header = {"command": "t2_probe_sweep", "config": cfg.to_dict(), "config_hash": cfg.digest()}
    write_csv(args.out, header, ["m", "D", "error", "B", "H", "verdict"], rows)


if __name__ == "__main__":
    main()
