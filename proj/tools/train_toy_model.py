#!/usr/bin/env python3
"""Train the small shape classifier shipped in models/toy_shapes.

The images come from `vsel export-fixture`, so the C++ tool must be built
first. Writes manifest.json, weights.selw and training_report.json.

    python3 tools/train_toy_model.py --vsel build/tools/vsel --out models/toy_shapes
"""

import argparse
import json
import struct
import subprocess
import tempfile
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch import nn

LABELS = ["square", "disk", "triangle"]
MEAN = [0.5, 0.5, 0.5]
STD = [0.25, 0.25, 0.25]


class ToyNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 8, 3, padding=1)
        self.bn1 = nn.BatchNorm2d(8)
        self.conv2 = nn.Conv2d(8, 16, 3, padding=1)
        self.conv3 = nn.Conv2d(16, 32, 3, padding=1)
        self.fc = nn.Linear(32, 3)

    def forward(self, x):
        x = nn.functional.max_pool2d(torch.relu(self.bn1(self.conv1(x))), 2)
        x = nn.functional.max_pool2d(torch.relu(self.conv2(x)), 2)
        x = torch.relu(self.conv3(x))
        return self.fc(x.mean(dim=(2, 3)))


def manifest(size):
    layers = [
        {"kind": "conv2d", "name": "conv1", "kernel": 3, "padding": 1, "bias": "conv1.bias"},
        {"kind": "batchnorm", "name": "bn1", "eps": 1e-5},
        {"kind": "relu", "name": "relu1"},
        {"kind": "maxpool2d", "name": "pool1", "kernel": 2},
        {"kind": "conv2d", "name": "conv2", "kernel": 3, "padding": 1, "bias": "conv2.bias"},
        {"kind": "relu", "name": "relu2"},
        {"kind": "maxpool2d", "name": "pool2", "kernel": 2},
        {"kind": "conv2d", "name": "conv3", "kernel": 3, "padding": 1, "bias": "conv3.bias"},
        {"kind": "relu", "name": "relu3"},
        {"kind": "global_avg_pool", "name": "gap"},
        {"kind": "linear", "name": "fc", "bias": "fc.bias"},
    ]
    return {
        "name": "toy_shapes",
        "input_shape": [3, size, size],
        "num_classes": len(LABELS),
        "class_labels": LABELS,
        "target_layer": "conv3",
        "preprocess": {"mean": MEAN, "std": STD, "grayscale": False},
        "layers": layers,
    }


def write_selw(path, tensors):
    out = bytearray(b"SELW")
    out += struct.pack("<II", 1, len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        encoded = name.encode()
        out += struct.pack("<H", len(encoded)) + encoded
        out += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.tobytes()
    Path(path).write_bytes(bytes(out))


def load_split(vsel, root, count, seed, size):
    subprocess.run([vsel, "export-fixture", "--out", str(root), "--count", str(count),
                    "--seed", str(seed), "--size", str(size), "--no-study"],
                   check=True, stdout=subprocess.DEVNULL)
    xs, ys = [], []
    for line in (root / "labels.csv").read_text().splitlines()[1:]:
        image_id, label, _ = line.split(",")
        img = np.asarray(Image.open(root / "images" / f"{image_id}.png").convert("RGB"),
                         dtype=np.float32) / 255.0
        xs.append(((img - MEAN) / STD).transpose(2, 0, 1))
        ys.append(int(label))
    return torch.tensor(np.stack(xs), dtype=torch.float32), torch.tensor(ys)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--vsel", required=True, help="path to the built vsel binary")
    ap.add_argument("--out", required=True)
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--train", type=int, default=1500)
    ap.add_argument("--test", type=int, default=300)
    ap.add_argument("--epochs", type=int, default=30)
    args = ap.parse_args()

    torch.manual_seed(0)
    torch.set_num_threads(1)
    with tempfile.TemporaryDirectory() as tmp:
        x_train, y_train = load_split(args.vsel, Path(tmp) / "train", args.train, 101, args.size)
        x_test, y_test = load_split(args.vsel, Path(tmp) / "test", args.test, 202, args.size)

    net = ToyNet()
    opt = torch.optim.Adam(net.parameters(), lr=3e-3)
    loss_fn = nn.CrossEntropyLoss()
    for epoch in range(args.epochs):
        net.train()
        perm = torch.randperm(len(x_train))
        for i in range(0, len(perm), 50):
            idx = perm[i:i + 50]
            opt.zero_grad()
            loss = loss_fn(net(x_train[idx]), y_train[idx])
            loss.backward()
            opt.step()
        net.eval()
        with torch.no_grad():
            acc = (net(x_test).argmax(1) == y_test).float().mean().item()
        print(f"epoch {epoch + 1}: loss {loss.item():.4f} test accuracy {acc:.4f}")

    net.eval()
    with torch.no_grad():
        acc = (net(x_test).argmax(1) == y_test).float().mean().item()
        sample_logits = net(x_test[:4]).numpy()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tensors = {k: v.detach().numpy() for k, v in net.state_dict().items()
               if not k.endswith("num_batches_tracked")}
    write_selw(out / "weights.selw", tensors)
    (out / "manifest.json").write_text(json.dumps(manifest(args.size), indent=2) + "\n")
    report = {
        "train_images": args.train, "train_seed": 101,
        "test_images": args.test, "test_seed": 202,
        "epochs": args.epochs, "test_accuracy": acc,
        "parameters": int(sum(v.size for v in tensors.values())),
        "sample_logits": sample_logits.tolist(),
    }
    (out / "training_report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"test accuracy {acc:.4f}; wrote {out}")


if __name__ == "__main__":
    main()
