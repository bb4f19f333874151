"""Per-frame latency of Rec-Net alone and of OD-Net + Rec-Net.

    python scripts/throughput.py [--weights CKPT] [--runs 3] [--iters 20]

Without --weights, freshly initialized networks of the default sizes are
timed; latency does not depend on the weight values.
"""

import argparse
import json

import numpy as np
import torch

from platerec.checkpoint import load_checkpoint
from platerec.evaluator import measure_throughput
from platerec.reconstructor import RecNet
from platerec.segmenter import ODNet


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--weights")
    ap.add_argument("--runs", type=int, default=3)
    ap.add_argument("--iters", type=int, default=20)
    ap.add_argument("--threads", type=int, default=0, help="torch intra-op threads (0 = default)")
    args = ap.parse_args()
    if args.threads:
        torch.set_num_threads(args.threads)

    if args.weights:
        ck = load_checkpoint(args.weights)
        rec, od = ck["recnet"], ck.get("odnet")
    else:
        torch.manual_seed(0)
        rec, od = RecNet(), ODNet()
    frames = np.random.default_rng(0).integers(0, 256, (10, 224, 224, 3), dtype=np.uint8)
    p50 = {"reconstruct": [], "full": []}
    for i in range(args.runs):
        t = measure_throughput(rec, frames, od, iters=args.iters)
        for k in p50:
            p50[k].append(t[k]["p50"])
        print(f"run {i}: " + ", ".join(f"{k} p50 {1e3 * t[k]['p50']:.1f} ms ({t[k]['fps']:.1f} fps)"
                                       for k in p50))
    spread = {k: max(v) / min(v) - 1 for k, v in p50.items()}
    print(json.dumps({"p50_spread": spread, "threads": torch.get_num_threads()}, indent=1))


if __name__ == "__main__":
    main()
