"""Regenerates the evaluation fixture and its expected counts.

Objects sit in a 5x5 grid of 100 px cells so envelopes of different cells never
overlap; every prediction therefore has exactly one candidate truth and the
expected TP/FP/FN follow from the perturbation applied, without any matching.
"""
import json
import math
import random

CLASSES = ["access_aisle", "curbside", "dp_no_aisle", "dp_one_aisle", "dp_two_aisle", "one_aisle", "two_aisle"]
rng = random.Random(20240611)


def rect(cx, cy, length, width, theta):
    u = (math.cos(theta) * length / 2, math.sin(theta) * length / 2)
    n = (-math.sin(theta) * width / 2, math.cos(theta) * width / 2)
    pts = [(cx - u[0] - n[0], cy - u[1] - n[1]), (cx + u[0] - n[0], cy + u[1] - n[1]),
           (cx + u[0] + n[0], cy + u[1] + n[1]), (cx - u[0] + n[0], cy - u[1] + n[1])]
    return [round(v, 3) for p in pts for v in p]


def envelope(flat):
    xs, ys = flat[0::2], flat[1::2]
    return [min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)]


images, annotations, preds, refs = [], [], [], []
counts = {c: {"tp": 0, "fp": 0, "fn": 0} for c in CLASSES}
ann_id = 1
for img in range(1, 21):
    images.append({"id": img, "file_name": f"{img:03d}.png", "width": 512, "height": 512})
    cells = rng.sample(range(25), 4)
    for k, cell in enumerate(cells):
        cx, cy = 56 + 100 * (cell % 5), 56 + 100 * (cell // 5)
        if k == 3:
            # Empty cell: a pure false positive.
            cls = rng.choice(CLASSES)
            preds.append({"image_id": img, "class": cls, "bbox": [cx - 10, cy - 10, 20, 20], "confidence": 0.4})
            counts[cls]["fp"] += 1
            continue
        cls = CLASSES[(img * 3 + k) % 7]
        length, width = rng.uniform(24, 40), rng.uniform(12, 22)
        flat = rect(cx, cy, length, width, rng.uniform(0, math.pi))
        annotations.append({"id": ann_id, "image_id": img, "category_id": CLASSES.index(cls) + 1,
                            "segmentation": [flat], "iscrowd": 0})
        ann_id += 1
        env = envelope(flat)
        ref_w = round(width, 3)
        refs.append({"image_id": img, "class": cls, "bbox": env, "width_px": ref_w})
        fate = rng.random()
        if fate < 0.1:
            counts[cls]["fn"] += 1  # dropped
            continue
        if fate < 0.2:
            shifted = [env[0] + 0.6 * env[2], env[1], env[2], env[3]]  # IoU 0.25
            preds.append({"image_id": img, "class": cls, "bbox": shifted, "confidence": 0.6})
            counts[cls]["fp"] += 1
            counts[cls]["fn"] += 1
            continue
        pred_cls = cls
        if fate < 0.35:
            pred_cls = CLASSES[(CLASSES.index(cls) + 1) % 7]
            counts[pred_cls]["fp"] += 1
            counts[cls]["fn"] += 1
        else:
            counts[cls]["tp"] += 1
        dx = rng.uniform(-1.5, 1.5)
        preds.append({"image_id": img, "class": pred_cls, "bbox": [env[0] + dx, env[1], env[2], env[3]],
                      "confidence": round(rng.uniform(0.5, 1.0), 3),
                      "width_px": round(ref_w * (1 + rng.uniform(-0.1, 0.1)), 3)})

coco = {"images": images, "annotations": annotations,
        "categories": [{"id": i + 1, "name": c} for i, c in enumerate(CLASSES)]}
hist = {c: 0 for c in CLASSES}
for a in annotations:
    hist[CLASSES[a["category_id"] - 1]] += 1

# Width oracle over pairs that survive matching at IoU 0.5 (label-agnostic).
ref_by_key = {(r["image_id"], tuple(r["bbox"])): r for r in refs}
diffs = {}
for p in preds:
    if "width_px" not in p:
        continue
    for r in refs:
        if r["image_id"] == p["image_id"] and abs(r["bbox"][1] - p["bbox"][1]) < 1e-9 and abs(r["bbox"][0] - p["bbox"][0]) < 2:
            d = p["width_px"] - r["width_px"]
            diffs.setdefault(r["class"], []).append((d, 100 * d / r["width_px"]))
allv = [v for vs in diffs.values() for v in vs]


def stats(vs):
    n = len(vs)
    m = sum(v[0] for v in vs) / n
    mp = sum(v[1] for v in vs) / n
    sd = math.sqrt(sum((v[0] - m) ** 2 for v in vs) / (n - 1)) if n > 1 else 0.0
    sdp = math.sqrt(sum((v[1] - mp) ** 2 for v in vs) / (n - 1)) if n > 1 else 0.0
    return {"count": n, "mean_px": m, "sd_px": sd, "mean_pct": mp, "sd_pct": sdp}


expected = {"histogram": hist, "objects": len(annotations), "images": len(images), "counts": counts,
            "width_total": stats(allv)}
with open("coco_fixture.json", "w") as f:
    json.dump(coco, f, indent=1)
with open("preds.ndjson", "w") as f:
    f.writelines(json.dumps(p) + "\n" for p in preds)
with open("refs.ndjson", "w") as f:
    f.writelines(json.dumps(r) + "\n" for r in refs)
with open("eval_expected.json", "w") as f:
    json.dump(expected, f, indent=1)
