#!/usr/bin/env python3
"""Convert a UCSD Anomaly Detection clip into the layout `aad run` expects.

    python3 scripts/ucsd_to_pgm.py UCSDped1/Test/Test003 out/test003 \
        --gt UCSDped1/Test/UCSDped1.m --clip 3

Writes out/test003/frames/frame_NNN.pgm (8-bit grayscale, in name order)
and, with --gt, out/test003/truth.txt with one 0/1 label per frame.

The dataset's .m file lists anomalous frame ranges per test clip, e.g.

    TestDataset.gt_frame{3} = [1:146];

Only Pillow is needed.
"""

import argparse
import re
import sys
from pathlib import Path

from PIL import Image

FRAME_EXTS = {".tif", ".tiff", ".png", ".bmp", ".jpg", ".jpeg", ".pgm"}


def natural_key(path):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", path.name)]


def gt_ranges(m_text, clip):
    """Frame ranges (1-based, inclusive) for one clip from UCSDped*.m."""
    pattern = re.compile(r"gt_frame\{\s*%d\s*\}\s*=\s*\[([^\]]*)\]" % clip)
    match = pattern.search(m_text)
    if match is None:
        raise SystemExit(f"clip {clip} not found in ground-truth file")
    ranges = []
    for part in re.split(r"[,\s]+", match.group(1).strip()):
        if not part:
            continue
        if ":" in part:
            lo, hi = part.split(":")
            ranges.append((int(lo), int(hi)))
        else:
            ranges.append((int(part), int(part)))
    return ranges


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("clip_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--gt", type=Path, help="UCSDped1.m or UCSDped2.m")
    ap.add_argument("--clip", type=int, help="clip number inside the ground-truth file")
    args = ap.parse_args()

    frames = sorted(
        (p for p in args.clip_dir.iterdir() if p.suffix.lower() in FRAME_EXTS),
        key=natural_key,
    )
    if len(frames) < 3:
        sys.exit(f"{args.clip_dir}: need at least 3 frames, found {len(frames)}")

    frame_dir = args.out_dir / "frames"
    frame_dir.mkdir(parents=True, exist_ok=True)
    for i, src in enumerate(frames):
        Image.open(src).convert("L").save(frame_dir / f"frame_{i:03d}.pgm")

    if args.gt is not None:
        if args.clip is None:
            sys.exit("--gt needs --clip")
        labels = [0] * len(frames)
        for lo, hi in gt_ranges(args.gt.read_text(), args.clip):
            for t in range(max(lo, 1), min(hi, len(frames)) + 1):
                labels[t - 1] = 1
        (args.out_dir / "truth.txt").write_text("".join(f"{v}\n" for v in labels))

    print(f"{len(frames)} frames -> {frame_dir}")


if __name__ == "__main__":
    main()
