"""Regenerates the three-dialogue AVSD fixture (public release layout plus HEARFEAT features)."""

import json
import math
import pathlib
import struct

ROOT = pathlib.Path(__file__).parent / "avsd3"

DIALOGS = [
    {
        "image_id": "QX1Z7",
        "summary": "A man walks into the kitchen and turns on the radio.",
        "dialog": [
            {"question": "Is there any sound in the video?", "answer": "Yes, music from a radio."},
            {"question": "What room is he in?", "answer": "He is in the kitchen."},
            {"question": "Does he talk at all?", "answer": "No, he does not say anything."},
            {"question": "What color is his shirt?", "answer": "It is blue."},
            {"question": "Can you hear any voices?", "answer": "No voices, only music."},
        ],
    },
    {
        "image_id": "B3KP0",
        "caption": "A woman vacuums the living room floor.",
        "dialog": [
            {"question": "Is the vacuum cleaner working?", "answer": "Yes, it is running."},
            {"question": "How loud is it?", "answer": "It is quite loud."},
        ],
    },
    {
        "image_id": "ZZ9A1",
        "caption": "Two people sit on a couch and chat.",
        "dialog": [
            {"question": "What are they doing?", "answer": "They sit and talk."},
        ],
    },
]

# video rows, audio rows: the first clip's audio runs at twice the video rate.
SHAPES = {"QX1Z7": (12, 24), "B3KP0": (10, 10), "ZZ9A1": (8, 4)}
VIDEO_DIM, AUDIO_DIM = 6, 3


def write_hearfeat(path, rows):
    with open(path, "wb") as f:
        f.write(b"HEARFEAT")
        f.write(struct.pack("<III", 1, len(rows), len(rows[0])))
        for row in rows:
            f.write(struct.pack("<%df" % len(row), *row))


def main():
    (ROOT / "features").mkdir(parents=True, exist_ok=True)
    (ROOT / "dialogues.json").write_text(json.dumps({"dialogs": DIALOGS}, indent=1) + "\n")
    for k, (clip, (lv, la)) in enumerate(SHAPES.items()):
        video = [[math.sin(0.3 * t + 0.7 * c + k) for c in range(VIDEO_DIM)] for t in range(lv)]
        audio = [[0.25 * t + c - k for c in range(AUDIO_DIM)] for t in range(la)]
        write_hearfeat(ROOT / "features" / f"{clip}.video.hearfeat", video)
        write_hearfeat(ROOT / "features" / f"{clip}.audio.hearfeat", audio)


if __name__ == "__main__":
    main()
