#!/usr/bin/env python3
"""Convert COCO caption and instance annotations into caption manifests.

Writes classes.txt, train.jsonl and val.jsonl (one record per image with its
captions and the category names present as gold_labels) into --out. Copy or
link a word-vector file (e.g. GloVe, "word v1 ... vd" per line) to
<out>/embeddings.txt before running the acceptance binary with WSOD_COCO_DIR=<out>.
"""

import argparse
import json
from collections import defaultdict
from pathlib import Path


def load_split(captions_path, instances_path):
    with open(captions_path) as f:
        captions = json.load(f)
    with open(instances_path) as f:
        instances = json.load(f)
    categories = {c["id"]: c["name"] for c in instances["categories"]}
    caps = defaultdict(list)
    for a in captions["annotations"]:
        caps[a["image_id"]].append(a["caption"].strip())
    labels = defaultdict(set)
    for a in instances["annotations"]:
        labels[a["image_id"]].add(categories[a["category_id"]])
    return categories, caps, labels


def write_manifest(path, image_ids, caps, labels):
    with open(path, "w") as f:
        for image_id in image_ids:
            record = {
                "image_id": str(image_id),
                "captions": caps[image_id],
                "gold_labels": sorted(labels.get(image_id, ())),
            }
            f.write(json.dumps(record) + "\n")


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--train-captions", required=True, type=Path)
    p.add_argument("--train-instances", required=True, type=Path)
    p.add_argument("--val-captions", required=True, type=Path)
    p.add_argument("--val-instances", required=True, type=Path)
    p.add_argument("--val-images", type=int, default=5000, help="first N val images by id")
    p.add_argument("--out", required=True, type=Path)
    args = p.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    categories, train_caps, train_labels = load_split(args.train_captions, args.train_instances)
    _, val_caps, val_labels = load_split(args.val_captions, args.val_instances)

    names = [categories[k] for k in sorted(categories)]
    (args.out / "classes.txt").write_text("\n".join(names) + "\n")
    write_manifest(args.out / "train.jsonl", sorted(i for i in train_caps if train_caps[i]), train_caps, train_labels)
    val_ids = sorted(i for i in val_caps if val_caps[i])[: args.val_images]
    write_manifest(args.out / "val.jsonl", val_ids, val_caps, val_labels)
    print(f"{len(names)} classes, {len(train_caps)} train images, {len(val_ids)} val images -> {args.out}")


if __name__ == "__main__":
    main()
