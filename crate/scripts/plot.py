#!/usr/bin/env python3
"""Quick plots of idma-wb CSV outputs.

usage: plot.py ber out/ber.csv
       plot.py traj out/traj_1dB.csv [out/de_1dB.csv]
       plot.py hist out/hist_1dB.csv
       plot.py transfer out/ese_user1.csv out/dec_target_user1.csv
"""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def ber(path):
    by_user = defaultdict(list)
    for r in rows(path):
        by_user[r["user"]].append((float(r["snr_db"]), float(r["ber"])))
    for user, pts in sorted(by_user.items()):
        pts.sort()
        plt.semilogy([p[0] for p in pts], [max(p[1], 1e-9) for p in pts], "o-", label=f"user {user}")
    plt.xlabel("SNR_sum (dB)")
    plt.ylabel("BER")


def traj(sim, de=None):
    r = rows(sim)
    users = [c for c in r[0] if c.startswith("v_")]
    for u in users:
        plt.plot([int(x["iter"]) for x in r], [float(x[u]) for x in r], label=f"sim {u}")
    if de:
        d = rows(de)
        for u in [c for c in d[0] if c.startswith("v_")]:
            plt.plot([int(x["iter"]) for x in d], [float(x[u]) for x in d], "--", label=f"DE {u}")
    plt.xlabel("outer iteration")
    plt.ylabel("average v")


def hist(path):
    by_iter = defaultdict(list)
    for r in rows(path):
        by_iter[int(r["iter"])].append((float(r["bin_center"]), float(r["density"])))
    for it, pts in sorted(by_iter.items()):
        plt.plot([p[0] for p in pts], [p[1] for p in pts], label=f"iteration {it}")
    plt.xlabel("LLR")
    plt.ylabel("density")


def transfer(ese, dec):
    # both drawn as rho against v
    for path, style in ((ese, "-"), (dec, "--")):
        r = rows(path)
        plt.plot([float(x["v"]) for x in r], [float(x["rho"]) for x in r], style, label=path)
    plt.xlabel("v")
    plt.ylabel("rho")


if __name__ == "__main__":
    if len(sys.argv) < 3:
        sys.exit(__doc__)
    {"ber": ber, "traj": traj, "hist": hist, "transfer": transfer}[sys.argv[1]](*sys.argv[2:])
    plt.legend()
    plt.grid(True, which="both", alpha=0.3)
    plt.show()
