"""Writes the 78-frame synthetic clip: frames, frame manifest, scenario and labels.

Layout rules (source frame 640x480):
  * four person slots with centroids (60,100), (420,100), (60,380), (420,380);
    any two slots are at least 260 px apart
  * slot state for frame f, slot s is (f + 2s) % 3: 0 empty, 1 one person,
    2 two people whose centroids are 100 px apart
  * even frames repeat the first occupied slot's first person shifted by
    4 px at conf 0.6 (suppressed, IoU > 0.3); frames divisible by 3 add a
    conf 0.3 detection at (300, 240) (below the confidence threshold)
  * f % 4 faces, face j masked iff (f + j) % 2 == 0 (prob 0.9, else 0.2);
    frames divisible by 3 add a face fully outside the frame (dropped)

So per frame: people = singles + 2 * pairs, violators = 2 * pairs.
"""

import json
from pathlib import Path

from PIL import Image

HERE = Path(__file__).resolve().parent
W, H = 640, 480
N = 78
STRIDE = 5
SLOTS = [(60, 100), (420, 100), (60, 380), (420, 380)]
BOX_W, BOX_H = 40, 120


def person(cx, cy, conf):
    return {"box": [cx - BOX_W / 2, cy - BOX_H / 2, BOX_W, BOX_H], "conf": conf}


def frame(f):
    persons, singles, pairs = [], 0, 0
    for s, (cx, cy) in enumerate(SLOTS):
        state = (f + 2 * s) % 3
        if state >= 1:
            persons.append(person(cx, cy, 0.9))
        if state == 1:
            singles += 1
        if state == 2:
            persons.append(person(cx + 100, cy, 0.8))
            pairs += 1
    if f % 2 == 0 and persons:
        x, y, w, h = persons[0]["box"]
        persons.append({"box": [x + 4, y, w, h], "conf": 0.6})
    if f % 3 == 0:
        persons.append(person(300, 240, 0.3))

    faces, masked = [], 0
    for j in range(f % 4):
        on = (f + j) % 2 == 0
        masked += on
        faces.append({"box": [40 + 120 * j, 200, 30, 30], "conf": 0.95, "mask_prob": 0.9 if on else 0.2})
    n_faces = len(faces)
    if f % 3 == 0:
        faces.append({"box": [700, 500, 20, 20], "conf": 0.9, "mask_prob": 0.9})

    labels = {"people": singles + 2 * pairs, "violators": 2 * pairs, "faces": n_faces, "masked": masked}
    return {"persons": persons, "faces": faces}, labels


def main():
    scenario, labels = {}, {}
    for f in range(N):
        scripted, truth = frame(f)
        scenario[str(f)] = scripted
        if f % STRIDE == 0:
            labels[str(f)] = truth
        shade = 40 + (f * 3) % 160
        img = Image.new("L", (W, H), shade).convert("RGB")
        img.save(HERE / "clip78" / f"frame_{f:03}.png", optimize=True)

    manifest = {"fps": 25.0, "frames": [f"frame_{f:03}.png" for f in range(N)]}
    (HERE / "clip78" / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (HERE / "scenario_78.json").write_text(json.dumps({"frames": scenario}, indent=1) + "\n")
    (HERE / "labels_78.json").write_text(json.dumps({"frames": labels}, indent=2) + "\n")


if __name__ == "__main__":
    main()
