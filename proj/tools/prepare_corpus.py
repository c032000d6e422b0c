#!/usr/bin/env python3
"""Collect the RGB photographs bundled with scikit-image, scikit-learn and
matplotlib into one directory of 8-bit PNGs.

Feed the result to `s2sr ingest --png-dir DIR --out HR --tile 256`.
"""
import argparse
import os
import sys

from PIL import Image

# (file, package); all public-domain or CC0/CC-BY sample images.
PHOTOS = [
    ("astronaut.png", "skimage"),
    ("coffee.png", "skimage"),
    ("chelsea.png", "skimage"),
    ("motorcycle_left.png", "skimage"),
    ("rocket.jpg", "skimage"),
    ("ihc.png", "skimage"),
    ("china.jpg", "sklearn"),
    ("flower.jpg", "sklearn"),
    ("grace_hopper.jpg", "matplotlib"),
]


def data_dir(package):
    if package == "skimage":
        import skimage
        return os.path.join(os.path.dirname(skimage.__file__), "data")
    if package == "sklearn":
        import sklearn
        return os.path.join(os.path.dirname(sklearn.__file__), "datasets", "images")
    if package == "matplotlib":
        import matplotlib
        return os.path.join(matplotlib.get_data_path(), "sample_data")
    raise ValueError(package)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help="output directory for PNGs")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    written = 0
    for name, package in PHOTOS:
        try:
            src = os.path.join(data_dir(package), name)
            img = Image.open(src).convert("RGB")
        except (ImportError, OSError) as e:
            print(f"skipping {name}: {e}", file=sys.stderr)
            continue
        img.info.pop("icc_profile", None)
        img.save(os.path.join(args.out, os.path.splitext(name)[0] + ".png"))
        written += 1
    print(f"wrote {written} photographs to {args.out}")
    return 0 if written else 2


if __name__ == "__main__":
    sys.exit(main())
