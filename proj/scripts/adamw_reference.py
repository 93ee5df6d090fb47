"""Independent re-derivation of the plain AdamW distillation trajectory.

Rebuilds the task from the seed (same generator, same draw order), evaluates the
losses with torch autograd instead of the hand-written backward pass and steps
the latent with textbook AdamW. Compares against a golden CSV when one is given.

    python scripts/adamw_reference.py --iters 300 --check tests/fixtures/adamw_golden.csv
"""

import argparse
import csv
import math
import sys

import torch

MASK64 = (1 << 64) - 1


class Xoshiro256ss:
    def __init__(self, seed):
        x = seed & MASK64
        self.s = []
        for _ in range(4):
            x = (x + 0x9E3779B97F4A7C15) & MASK64
            z = x
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
            self.s.append(z ^ (z >> 31))
        self.spare = None

    @staticmethod
    def _rotl(x, k):
        return ((x << k) | (x >> (64 - k))) & MASK64

    def next_u64(self):
        s = self.s
        out = (self._rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = self._rotl(s[3], 45)
        return out

    def uniform(self):
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self):
        if self.spare is not None:
            v, self.spare = self.spare, None
            return v
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self.spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def tensor(self, rows, cols):
        data = [self.normal() for _ in range(rows * cols)]
        return torch.tensor(data, dtype=torch.float64).reshape(rows, cols)


def build(seed, L, n, d, qk_gain, value_gain, init_noise, content_offset):
    rng = Xoshiro256ss(seed)
    s = 1.0 / math.sqrt(d)
    layers = []
    for _ in range(L):
        wq = rng.tensor(d, d) * (qk_gain * s)
        wk = rng.tensor(d, d) * (qk_gain * s)
        wv = rng.tensor(d, d) * (value_gain * s)
        layers.append((wq, wk, wv))
    proj = rng.tensor(d, d) * s
    z_style = Xoshiro256ss(seed + 1).tensor(n, d)
    z_content = z_style + content_offset * Xoshiro256ss(seed + 2).tensor(n, d)
    z0 = z_style + init_noise * Xoshiro256ss(seed + 3).tensor(n, d)
    return layers, proj, z_style, z_content, z0


def forward(layers, z):
    d = z.shape[1]
    h = z
    maps = []
    for wq, wk, wv in layers:
        a = torch.softmax((h @ wq) @ (h @ wk).T / math.sqrt(d), dim=1)
        maps.append(a)
        h = h + a @ (h @ wv)
    return maps, h


def losses(layers, proj, z, teacher_maps, content_feat):
    maps, feat = forward(layers, z)
    n = z.shape[0]
    kl = sum((t * (torch.log(t) - torch.log(a))).sum() for t, a in zip(teacher_maps, maps))
    distill = kl / (len(layers) * n)
    content = (((feat - content_feat) @ proj) ** 2).mean()
    return distill, content


def trajectory(args):
    layers, proj, z_style, z_content, z = build(
        args.seed, args.layers, args.tokens, args.dim, args.qk_gain, args.value_gain, args.init_noise,
        args.content_offset)
    teacher_maps, _ = forward(layers, z_style)
    _, content_feat = forward(layers, z_content)
    lam_content = 1.0 / 0.8
    b1, b2, eps, wd = 0.9, 0.999, 1e-8, 0.01
    m = torch.zeros_like(z)
    v = torch.zeros_like(z)
    rows = []
    for t in range(args.iters):
        lr = 1e-3 * 0.1 ** (t / args.total_iters)
        zz = z.clone().requires_grad_(True)
        distill, content = losses(layers, proj, zz, teacher_maps, content_feat)
        total = distill + lam_content * content
        (g,) = torch.autograd.grad(total, zz)
        rows.append((t, distill.item(), content.item(), total.item()))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** (t + 1))
        v_hat = v / (1 - b2 ** (t + 1))
        z = z - lr * wd * z - lr * m_hat / (torch.sqrt(v_hat) + eps)
    return rows


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--layers", type=int, default=6)
    p.add_argument("--tokens", type=int, default=8)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--qk-gain", type=float, default=2.0)
    p.add_argument("--value-gain", type=float, default=0.05)
    p.add_argument("--init-noise", type=float, default=0.6)
    p.add_argument("--content-offset", type=float, default=0.2)
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--total-iters", type=int, default=3000)
    p.add_argument("--check", help="golden CSV to compare against")
    p.add_argument("--rtol", type=float, default=1e-9)
    args = p.parse_args()

    rows = trajectory(args)
    if not args.check:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["iteration", "L_distill", "L_content", "L_total"])
        for r in rows:
            w.writerow([r[0]] + [repr(x) for x in r[1:]])
        return 0

    with open(args.check, newline="") as f:
        golden = list(csv.DictReader(line for line in f if not line.startswith("#")))
    if len(golden) != len(rows):
        print(f"row count differs: golden {len(golden)}, reference {len(rows)}")
        return 1
    worst = 0.0
    for g, r in zip(golden, rows):
        for key, val in zip(("L_distill", "L_content", "L_total"), r[1:]):
            ref = float(g[key])
            worst = max(worst, abs(ref - val) / max(abs(ref), 1e-12))
    print(f"max relative deviation {worst:.3e} over {len(rows)} iterations")
    return 0 if worst <= args.rtol else 1


if __name__ == "__main__":
    sys.exit(main())
