"""Build the 12-image evaluation corpus from scikit-image's bundled samples.

Each image is converted to grayscale, downscaled with anti-aliasing so the
short side is SIDE pixels, center-cropped to SIDE x SIDE and written as P5.

    python scripts/make_corpus.py [--out corpus] [--side 128]
"""

import argparse
from pathlib import Path

import numpy as np
import skimage.data
from skimage.color import rgb2gray
from skimage.transform import resize

from multirecon.pgm import write_pgm

IMAGES = [
    "camera", "astronaut", "coffee", "chelsea", "coins", "moon",
    "brick", "grass", "gravel", "rocket", "immunohistochemistry", "clock",
]


def load_gray(name: str) -> np.ndarray:
    img = getattr(skimage.data, name)()
    if img.ndim == 3:
        img = rgb2gray(img[..., :3]) * 255.0
    return img.astype(np.float64)


def prepare(img: np.ndarray, side: int) -> np.ndarray:
    h, w = img.shape
    scale = side / min(h, w)
    out = resize(img, (max(side, round(h * scale)), max(side, round(w * scale))),
                 anti_aliasing=True, preserve_range=True)
    top = (out.shape[0] - side) // 2
    left = (out.shape[1] - side) // 2
    return out[top:top + side, left:left + side]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="corpus")
    parser.add_argument("--side", type=int, default=128)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, name in enumerate(IMAGES):
        write_pgm(out / f"{i:02d}_{name}.pgm", prepare(load_gray(name), args.side))
        print(out / f"{i:02d}_{name}.pgm")


if __name__ == "__main__":
    main()
