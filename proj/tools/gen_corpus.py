#!/usr/bin/env python3
"""Writes the synthetic 20-video fixture corpus used by forge jobs and tests.

Deterministic: the same seed always produces the same files.
"""
import json
import random
import sys
from pathlib import Path

SCENES = [
    ("cooking", "a person preparing food in a bright kitchen", ["a person chopping vegetables", "a pot boiling on the stove", "hands stirring a pan"], ["cutting board", "knife", "pot", "bowl of salad"]),
    ("playing guitar", "a young man playing an acoustic guitar in a bedroom", ["a man strumming a guitar", "a close view of fingers on the strings"], ["guitar", "man wearing a hat", "lamp", "poster on the wall"]),
    ("skateboarding", "a skateboarder riding down a city street", ["a skateboarder rolling down the road", "a skateboarder jumping over a curb"], ["skateboard", "boy in a red shirt", "parked car", "traffic light"]),
    ("walking the dog", "a woman walking a dog through a park", ["a woman walking with a brown dog", "the dog sniffing the grass"], ["brown dog", "woman in a blue coat", "park bench", "tree"]),
    ("surfing", "a surfer riding a wave in the ocean", ["a surfer paddling out", "a surfer standing on a board on a wave"], ["surfboard", "wave", "surfer in a wetsuit"]),
    ("reading", "a girl reading a book by a window", ["a girl turning pages of a book", "a girl looking out of the window"], ["book", "girl with long hair", "window", "cup of tea"]),
    ("playing soccer", "children playing soccer on a grass field", ["kids running after a ball", "a boy kicking the ball toward a goal"], ["soccer ball", "goal net", "boy in a green jersey"]),
    ("painting", "an artist painting on a canvas in a studio", ["a hand moving a brush across a canvas", "an artist stepping back to look at the painting"], ["canvas", "paint brush", "palette", "easel"]),
    ("cycling", "a cyclist riding along a mountain road", ["a cyclist climbing a hill", "a cyclist riding past trees"], ["bicycle", "helmet", "mountain", "road sign"]),
    ("dancing", "two people dancing in a living room", ["a couple dancing together", "a woman spinning around"], ["woman in a red dress", "man in a white shirt", "sofa", "speaker"]),
]

SPEECH = [
    "Okay, let's get started.", "Can you pass me that?", "Look at this!", "That was close.",
    "I think we need a little more.", "Wait for it.", "Nice, that's perfect.", "Come on, let's go.",
    "Did you see that?", "One more time.", "Careful now.", "Alright, we're done here.",
]

ACTIONS = ["moving", "standing", "walking", "turning around", "reaching forward", "sitting down"]


def box(rng):
    x1 = rng.randrange(0, 500)
    y1 = rng.randrange(0, 300)
    return [x1, y1, x1 + rng.randrange(20, 220), y1 + rng.randrange(20, 170)]


def make_video(idx, rng):
    vclass, vcap, captions, objects = SCENES[idx % len(SCENES)]
    duration = rng.randrange(8, 25)
    records = []
    t = 0
    while t < duration:
        length = min(rng.randrange(1, 4), duration - t)
        records.append({"kind": "ClipCaption", "start_s": t, "end_s": t + length,
                        "text": rng.choice(captions), "source_model": "tag2text"})
        t += length
    for start in range(0, duration, 5):
        end = min(start + 5, duration)
        regions = [{"label": o, "bbox": box(rng)} for o in rng.sample(objects, rng.randrange(1, 3))]
        records.append({"kind": "DenseCaption", "start_s": start, "end_s": end, "text": "dense regions",
                        "regions": regions, "source_model": "grit"})
    for start in range(0, duration, 4):
        end = min(start + 4, duration)
        records.append({"kind": "ActionLabel", "start_s": start, "end_s": end,
                        "text": rng.choice(ACTIONS), "source_model": "intern_action",
                        "confidence": round(rng.uniform(0.5, 0.99), 2)})
    t = rng.randrange(0, 3)
    while t < duration - 1:
        length = min(rng.randrange(1, 4), duration - t)
        records.append({"kind": "Subtitle", "start_s": t, "end_s": t + length,
                        "text": rng.choice(SPEECH), "source_model": "whisper"})
        t += length + rng.randrange(1, 4)
    return {
        "video_id": f"corpus_{idx:02d}",
        "duration_s": duration,
        "fps": 1,
        "video_class": vclass,
        "video_caption": vcap + (f" (take {idx // len(SCENES) + 1})" if idx >= len(SCENES) else "") + ".",
        "records": records,
    }


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data/fixtures/corpus"
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20230510)
    for idx in range(20):
        video = make_video(idx, rng)
        (out / f"{video['video_id']}.json").write_text(json.dumps(video, indent=2) + "\n")


if __name__ == "__main__":
    main()
