#!/usr/bin/env python3
"""Regenerates tests/fixtures/models/: small CNNs trained on procedural object
cutouts, then penultimate features (ACTF + labels sidecar) for the decoder
training stimuli and the 48-source replica stimuli.

    python3 tests/fixtures/make_fixtures.py --bin build/tools --work /tmp/cbench_fixtures

No pretrained weights are used; every model is trained here from scratch on
colour cutouts composited over black. Takes roughly half an hour on one core.
"""

import argparse
import hashlib
import json
import shutil
import struct
import subprocess
import time
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from PIL import Image

CATEGORIES = ["truck", "cup", "bowl", "binoculars", "glasses", "hat", "pan",
              "sewing machine", "shovel", "banana", "boot", "lamp"]
SLUG = {c.replace(" ", "_"): i for i, c in enumerate(CATEGORIES)}

INPUT = 96
MEAN, STD = 0.2, 0.3

# Source library seeds; the acceptance test regenerates the first two.
TEST_SOURCES = dict(seed=1, per_category=4)
TRAIN_SOURCES = dict(seed=2, per_category=10)
PRETRAIN_SEED = 3

MODELS = [
    # name, family, width, objects per category, steps
    ("plain-w8-d25", "plain", 8, 25, 900),
    ("plain-w16-d100", "plain", 16, 100, 900),
    ("plain-w32-d400", "plain", 32, 400, 900),
    ("plain-w32-d25", "plain", 32, 25, 900),
    ("res-w16-d100", "residual", 16, 100, 900),
    ("res-w32-d400", "residual", 32, 400, 900),
]


def run(cmd):
    print("+", " ".join(str(c) for c in cmd), flush=True)
    subprocess.run([str(c) for c in cmd], check=True)


# ---- models -----------------------------------------------------------------

def conv_bn(cin, cout, stride):
    return nn.Sequential(nn.Conv2d(cin, cout, 3, stride, 1, bias=False), nn.BatchNorm2d(cout), nn.ReLU(inplace=True))


class Plain(nn.Module):
    def __init__(self, w):
        super().__init__()
        self.features = nn.Sequential(conv_bn(3, w, 2), conv_bn(w, w, 1), conv_bn(w, 2 * w, 2),
                                      conv_bn(2 * w, 2 * w, 1), conv_bn(2 * w, 4 * w, 2), conv_bn(4 * w, 4 * w, 2))
        self.head = nn.Linear(4 * w, 12)
        self.width = 4 * w

    def embed(self, x):
        return F.adaptive_avg_pool2d(self.features(x), 1).flatten(1)

    def forward(self, x):
        return self.head(self.embed(x))


class Block(nn.Module):
    def __init__(self, cin, cout, stride):
        super().__init__()
        self.a = conv_bn(cin, cout, stride)
        self.b = nn.Sequential(nn.Conv2d(cout, cout, 3, 1, 1, bias=False), nn.BatchNorm2d(cout))
        self.skip = (nn.Identity() if stride == 1 and cin == cout else
                     nn.Sequential(nn.Conv2d(cin, cout, 1, stride, bias=False), nn.BatchNorm2d(cout)))

    def forward(self, x):
        return F.relu(self.b(self.a(x)) + self.skip(x))


class Residual(nn.Module):
    def __init__(self, w):
        super().__init__()
        self.features = nn.Sequential(conv_bn(3, w, 2), Block(w, w, 1), Block(w, 2 * w, 2),
                                      Block(2 * w, 4 * w, 2), Block(4 * w, 4 * w, 2))
        self.head = nn.Linear(4 * w, 12)
        self.width = 4 * w

    def embed(self, x):
        return F.adaptive_avg_pool2d(self.features(x), 1).flatten(1)

    def forward(self, x):
        return self.head(self.embed(x))


def count_flops(model):
    """Multiply-adds x 2 for one forward pass at the input size."""
    total = 0

    def hook(m, inp, out):
        nonlocal total
        if isinstance(m, nn.Conv2d):
            k = m.kernel_size[0] * m.kernel_size[1] * m.in_channels // m.groups
            total += 2 * k * out.numel()
        elif isinstance(m, nn.Linear):
            total += 2 * m.in_features * m.out_features

    hooks = [m.register_forward_hook(hook) for m in model.modules() if isinstance(m, (nn.Conv2d, nn.Linear))]
    model.eval()
    with torch.no_grad():
        model(torch.zeros(1, 3, INPUT, INPUT))
    for h in hooks:
        h.remove()
    return total


# ---- data -------------------------------------------------------------------

def load_cutouts(root):
    """Each cutout cropped to its alpha box, padded square, 128 px, RGBA in [0, 1]."""
    images, labels = [], []
    for path in sorted(root.glob("*/*.png")):
        rgba = np.asarray(Image.open(path).convert("RGBA"), dtype=np.float32) / 255.0
        ys, xs = np.nonzero(rgba[..., 3] > 0.5)
        crop = rgba[ys.min():ys.max() + 1, xs.min():xs.max() + 1]
        h, w = crop.shape[:2]
        side = max(h, w)
        sq = np.zeros((side, side, 4), np.float32)
        sq[(side - h) // 2:(side - h) // 2 + h, (side - w) // 2:(side - w) // 2 + w] = crop
        t = torch.from_numpy(sq).permute(2, 0, 1)[None]
        images.append(F.interpolate(t, size=(128, 128), mode="bilinear", antialias=True, align_corners=False)[0])
        labels.append(SLUG[path.parent.name])
    return torch.stack(images), torch.tensor(labels)


def augment(batch, gen):
    """Random scale, rotation, shift and flip; composite over black; some greyscale."""
    n = batch.shape[0]
    scale = torch.empty(n).uniform_(0.65, 0.95, generator=gen)
    angle = torch.empty(n).uniform_(-0.3, 0.3, generator=gen)
    shift = torch.empty(n, 2).uniform_(-0.12, 0.12, generator=gen)
    flip = torch.where(torch.rand(n, generator=gen) < 0.5, -1.0, 1.0)
    cos, sin = torch.cos(angle) / scale, torch.sin(angle) / scale
    theta = torch.zeros(n, 2, 3)
    theta[:, 0, 0], theta[:, 0, 1] = cos * flip, -sin
    theta[:, 1, 0], theta[:, 1, 1] = sin * flip, cos
    theta[:, :, 2] = shift
    grid = F.affine_grid(theta, (n, 4, INPUT, INPUT), align_corners=False)
    out = F.grid_sample(batch, grid, mode="bilinear", padding_mode="zeros", align_corners=False)
    rgb = out[:, :3] * out[:, 3:4]
    rgb = rgb * torch.empty(n, 1, 1, 1).uniform_(0.7, 1.3, generator=gen)
    grey = torch.rand(n, generator=gen) < 0.2
    lum = (0.2126 * rgb[:, 0] + 0.7152 * rgb[:, 1] + 0.0722 * rgb[:, 2])[:, None].expand(-1, 3, -1, -1)
    rgb = torch.where(grey[:, None, None, None], lum, rgb)
    return (rgb.clamp(0, 1) - MEAN) / STD


def load_stimulus(path):
    img = Image.open(path)
    arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    t = torch.from_numpy(arr).permute(2, 0, 1)[None]
    t = F.interpolate(t, size=(INPUT, INPUT), mode="bilinear", antialias=True, align_corners=False)
    return (t[0] - MEAN) / STD


# ---- ACTF -------------------------------------------------------------------

def write_actf(path, matrix, ids, labels):
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    with open(path, "wb") as f:
        f.write(b"ACTF")
        f.write(struct.pack("<III", 1, matrix.shape[0], matrix.shape[1]))
        f.write(matrix.tobytes())
    sidecar = path.with_name(path.name[:-len(".actf")] + ".labels.json")
    sidecar.write_text(json.dumps({"ids": ids, "labels": labels}) + "\n")


def manifest_digest(manifest):
    lines = "".join(f"{r['id']} {r['sha256']}\n" for r in sorted(manifest["records"], key=lambda r: r["id"]))
    return hashlib.sha256(lines.encode()).hexdigest()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--bin", type=Path, required=True, help="directory holding contour_bench and make_sources")
    ap.add_argument("--work", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent / "models")
    args = ap.parse_args()
    torch.set_num_threads(1)
    work = args.work
    work.mkdir(parents=True, exist_ok=True)

    biggest = max(m[3] for m in MODELS)
    for name, spec, extra in [("src_test", TEST_SOURCES, []), ("src_train", TRAIN_SOURCES, []),
                              ("src_pretrain", dict(seed=PRETRAIN_SEED, per_category=biggest), ["--size", 160])]:
        if not (work / name).exists():
            run([args.bin / "make_sources", "--out", work / name, "--per-category", spec["per_category"],
                 "--seed", spec["seed"], *extra])
    for src, ds, extra in [("src_test", "ds_test", ["--replica"]), ("src_train", "ds_train", [])]:
        if not (work / ds / "manifest.json").exists():
            run([args.bin / "contour_bench", "generate", "--src", work / src, "--out", work / ds, "--no-sidecars", *extra])

    manifests = {k: json.loads((work / k / "manifest.json").read_text()) for k in ("ds_train", "ds_test")}
    stimuli = {}
    for k, m in manifests.items():
        recs = sorted(m["records"], key=lambda r: r["id"])
        ids = [r["id"] for r in recs]
        labels = [r["category"] for r in recs]
        x = torch.stack([load_stimulus(work / k / r["path"]) for r in recs])
        stimuli[k] = (ids, labels, x)
        print(f"{k}: {len(ids)} stimuli", flush=True)

    cut_x, cut_y = load_cutouts(work / "src_pretrain")
    per_cat_index = {}
    for i, y in enumerate(cut_y.tolist()):
        per_cat_index.setdefault(y, []).append(i)

    if args.out.exists():
        shutil.rmtree(args.out)
    args.out.mkdir(parents=True)
    summary = []
    for name, family, width, per_cat, steps in MODELS:
        torch.manual_seed(7 * sum(map(ord, name)))
        gen = torch.Generator().manual_seed(sum(map(ord, name)))
        idx = torch.tensor(sorted(i for y in range(12) for i in per_cat_index[y][:per_cat]))
        x, y = cut_x[idx], cut_y[idx]
        model = Plain(width) if family == "plain" else Residual(width)
        flops = count_flops(model)
        opt = torch.optim.AdamW(model.parameters(), lr=3e-3, weight_decay=5e-4)
        sched = torch.optim.lr_scheduler.OneCycleLR(opt, max_lr=3e-3, total_steps=steps)
        model.train()
        t0 = time.time()
        for step in range(steps):
            b = torch.randint(0, len(idx), (48,), generator=gen)
            loss = F.cross_entropy(model(augment(x[b], gen)), y[b], label_smoothing=0.1)
            opt.zero_grad()
            loss.backward()
            opt.step()
            sched.step()
            if step % 200 == 0:
                print(f"{name} step {step} loss {loss.item():.3f} ({time.time() - t0:.0f}s)", flush=True)
        model.eval()
        out_dir = args.out / name
        out_dir.mkdir()
        info = dict(model=name, arch_family=family, width=width, dataset_size=12 * per_cat, flops=flops,
                    feature_width=model.width, train_steps=steps)
        with torch.no_grad():
            for k, stem in (("ds_train", "train"), ("ds_test", "test")):
                ids, labels, xs = stimuli[k]
                feats = torch.cat([model.embed(xs[i:i + 128]) for i in range(0, len(xs), 128)]).numpy()
                write_actf(out_dir / f"{stem}.actf", feats, ids, labels)
                if k == "ds_test":
                    pred = torch.cat([model(xs[i:i + 128]).argmax(1) for i in range(0, len(xs), 128)]).tolist()
                    rgb = [CATEGORIES[p] == l for p, l, i in zip(pred, labels, ids) if i.startswith("rgb/")]
                    info["rgb_head_accuracy"] = sum(rgb) / len(rgb)
        print(json.dumps(info), flush=True)
        summary.append(info)

    meta = dict(input_size=INPUT, normalize=dict(mean=MEAN, std=STD), test_sources=TEST_SOURCES,
                train_sources=TRAIN_SOURCES, pretrain_seed=PRETRAIN_SEED,
                global_seed=manifests["ds_test"]["global_seed"],
                test_manifest_digest=manifest_digest(manifests["ds_test"]),
                train_manifest_digest=manifest_digest(manifests["ds_train"]), models=summary)
    (args.out / "fixtures.json").write_text(json.dumps(meta, indent=1) + "\n")
    with open(args.out / "models.csv", "w") as f:
        f.write("model,arch_family,dataset_size,flops,acc_seg,acc_phos\n")
        for m in summary:
            f.write(f"{m['model']},{m['arch_family']},{m['dataset_size']},{m['flops']},,\n")


if __name__ == "__main__":
    main()
