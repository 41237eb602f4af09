#!/usr/bin/env python3
"""Render the bundled glyph corpus: 36 classes x 10 font variants, 32x32 P1 PBM.

Usage: python3 scripts/render_corpus.py [OUT_DIR]

Each glyph is rasterized at high resolution, cropped to its ink, scaled so the
taller side spans 28 pixels (aspect kept) and centered on a 32x32 white canvas.
Thin faces get a small outline stroke so hairlines survive share encoding.
"""
import os
import sys

import matplotlib
from PIL import Image, ImageDraw, ImageFont

MPL = os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data", "fonts", "ttf")
KATEX = "/usr/local/lib/python3.10/dist-packages/marimo/_static/assets"

# font id -> (path, stroke width at render size)
FONTS = [
    ("sans", os.path.join(MPL, "DejaVuSans.ttf"), 0),
    ("sansbold", os.path.join(MPL, "DejaVuSans-Bold.ttf"), 0),
    ("mono", os.path.join(MPL, "DejaVuSansMono.ttf"), 0),
    ("monobold", os.path.join(MPL, "DejaVuSansMono-Bold.ttf"), 0),
    ("serif", os.path.join(MPL, "DejaVuSerif.ttf"), 4),
    ("serifbold", os.path.join(MPL, "DejaVuSerif-Bold.ttf"), 0),
    ("stix", os.path.join(MPL, "STIXGeneral.ttf"), 8),
    ("stixbold", os.path.join(MPL, "STIXGeneralBol.ttf"), 4),
    ("katexsans", os.path.join(KATEX, "KaTeX_SansSerif-Bold-CFMepnvq.ttf"), 0),
    ("typewriter", os.path.join(KATEX, "KaTeX_Typewriter-Regular-D3Ib7_Hf.ttf"), 8),
]

ALPHABET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"
RENDER = 240
TARGET = 28
SIDE = 32


def render(ch, path, stroke):
    font = ImageFont.truetype(path, RENDER)
    canvas = Image.new("L", (RENDER * 2, RENDER * 2), 0)
    draw = ImageDraw.Draw(canvas)
    draw.text((RENDER // 2, RENDER // 2), ch, font=font, fill=255,
              stroke_width=stroke, stroke_fill=255)
    bbox = canvas.getbbox()
    ink = canvas.crop(bbox)
    w, h = ink.size
    scale = TARGET / max(w, h)
    nw, nh = max(2, round(w * scale)), max(2, round(h * scale))
    small = ink.resize((nw, nh), Image.BOX)
    out = Image.new("L", (SIDE, SIDE), 0)
    out.paste(small, ((SIDE - nw) // 2, (SIDE - nh) // 2))
    return [[1 if out.getpixel((x, y)) >= 128 else 0 for x in range(SIDE)]
            for y in range(SIDE)]


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "corpus"
    os.makedirs(out_dir, exist_ok=True)
    for font_id, path, stroke in FONTS:
        for ch in ALPHABET:
            rows = render(ch, path, stroke)
            with open(os.path.join(out_dir, f"{ch}_{font_id}.pbm"), "w") as f:
                f.write(f"P1\n{SIDE} {SIDE}\n")
                for row in rows:
                    f.write(" ".join(str(b) for b in row) + "\n")


if __name__ == "__main__":
    main()
