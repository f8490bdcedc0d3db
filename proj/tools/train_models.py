"""Fit the demo classifiers shipped in models/.

    python tools/train_models.py [--data data/mnist5k] [--out models]

Writes mnist_mlp_smooth.json (trained on rotated, vignetted, blurred and
noise-augmented digits), mnist_mlp_plain.json (clean digits only) and
mnist_centroid.json. Rotations use the same bilinear convention as the C++
library: torch's affine_grid with align_corners=False lands on the odd pixel
grid scaled by the image side.
"""
import argparse
import gzip
import json
import math
import os

import numpy as np
import torch
import torch.nn.functional as F


def read_idx(path):
    with gzip.open(path, "rb") as f:
        data = f.read()
    magic = int.from_bytes(data[:4], "big")
    if magic == 0x803:
        n, h, w = (int.from_bytes(data[4 + 4 * k:8 + 4 * k], "big") for k in range(3))
        return np.frombuffer(data, np.uint8, offset=16).reshape(n, h, w).astype(np.float32) / 255.0
    n = int.from_bytes(data[4:8], "big")
    return np.frombuffer(data, np.uint8, offset=8, count=n).astype(np.int64)


def gaussian_kernel(sigma, size):
    d = torch.arange(size, dtype=torch.float32) - size // 2
    k = torch.exp(-d * d / (2 * sigma * sigma))
    k = k / k.sum()
    return torch.outer(k, k)


def circular_mask(side):
    g = torch.arange(side, dtype=torch.float32) * 2 - (side - 1)
    return ((g[None, :] ** 2 + g[:, None] ** 2) <= (side - 1) ** 2).float()


def rotate(x, deg):
    t = deg * math.pi / 180.0
    c, s = torch.cos(t), torch.sin(t)
    theta = torch.zeros(x.shape[0], 2, 3)
    theta[:, 0, 0], theta[:, 0, 1] = c, -s
    theta[:, 1, 0], theta[:, 1, 1] = s, c
    grid = F.affine_grid(theta, x.shape, align_corners=False)
    return F.grid_sample(x, grid, mode="bilinear", padding_mode="zeros", align_corners=False)


def preprocess(x, mask, kernel):
    x = x * mask
    return F.conv2d(x, kernel[None, None], padding=kernel.shape[0] // 2)


def make_mlp(hidden):
    layers = [torch.nn.Flatten()]
    width = 784
    for h in hidden:
        layers += [torch.nn.Linear(width, h), torch.nn.ReLU()]
        width = h
    layers.append(torch.nn.Linear(width, 10))
    return torch.nn.Sequential(*layers)


def export(model, path):
    layers = []
    linears = [m for m in model if isinstance(m, torch.nn.Linear)]
    for k, lin in enumerate(linears):
        w = lin.weight.detach().numpy()
        b = lin.bias.detach().numpy()
        layers.append({
            "weights": [[float("%.8g" % v) for v in row] for row in w],
            "bias": [float("%.8g" % v) for v in b],
            "activation": "none" if k == len(linears) - 1 else "relu",
        })
    with open(path, "w") as f:
        json.dump({"layers": layers, "num_classes": 10}, f, separators=(",", ":"))


def train(x, y, augment, epochs, hidden, seed):
    torch.manual_seed(seed)
    model = make_mlp(hidden)
    opt = torch.optim.Adam(model.parameters(), lr=1e-3)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, epochs)
    n = x.shape[0]
    for epoch in range(epochs):
        perm = torch.randperm(n)
        total = 0.0
        for i in range(0, n, 128):
            idx = perm[i:i + 128]
            xb = augment(x[idx])
            loss = F.cross_entropy(model(xb), y[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        sched.step()
        print(f"epoch {epoch + 1}/{epochs} loss {total / n:.4f}")
    return model


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", default="data/mnist5k")
    ap.add_argument("--out", default="models")
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--hidden", type=int, nargs="+", default=[256])
    ap.add_argument("--noise", type=float, default=0.5)
    args = ap.parse_args()
    torch.set_num_threads(max(1, os.cpu_count() or 1))

    x = torch.from_numpy(read_idx(os.path.join(args.data, "train-images-idx3-ubyte.gz")))[:, None]
    y = torch.from_numpy(read_idx(os.path.join(args.data, "train-labels-idx1-ubyte.gz")))
    xt = torch.from_numpy(read_idx(os.path.join(args.data, "test-images-idx3-ubyte.gz")))[:, None]
    yt = torch.from_numpy(read_idx(os.path.join(args.data, "test-labels-idx1-ubyte.gz")))
    mask = circular_mask(28)
    kernel = gaussian_kernel(2.0, 5)

    def smooth_aug(xb):
        deg = torch.randn(xb.shape[0]) * 30.0 + (torch.rand(xb.shape[0]) * 60.0 - 30.0)
        z = preprocess(rotate(xb, deg), mask, kernel)
        return z + torch.randn_like(z) * args.noise

    smooth = train(x, y, smooth_aug, args.epochs, args.hidden, 1)
    plain = train(x, y, lambda xb: xb, 20, [128], 2)

    with torch.no_grad():
        zt = preprocess(xt, mask, kernel)
        acc_s = (smooth(zt + torch.randn_like(zt) * args.noise).argmax(1) == yt).float().mean().item()
        acc_c = (smooth(zt).argmax(1) == yt).float().mean().item()
        acc_p = (plain(xt).argmax(1) == yt).float().mean().item()
    print(f"smooth model: clean {acc_c:.3f} noisy {acc_s:.3f}; plain model: clean {acc_p:.3f}")

    os.makedirs(args.out, exist_ok=True)
    export(smooth, os.path.join(args.out, "mnist_mlp_smooth.json"))
    export(plain, os.path.join(args.out, "mnist_mlp_plain.json"))
    protos = [x[y == c].mean(0).flatten().tolist() for c in range(10)]
    with open(os.path.join(args.out, "mnist_centroid.json"), "w") as f:
        json.dump({"shape": [28, 28, 1], "prototypes": [[float("%.8g" % v) for v in p] for p in protos]}, f,
                  separators=(",", ":"))


if __name__ == "__main__":
    main()
