#!/usr/bin/env python3
"""Regenerates the bundled fixture corpus in this directory.

Twenty political books (ten per side), forty everyday products split into a
conservative-leaning and a liberal-leaning half, and 120 reviewers. Partisan
reviewers read their side's books and mostly buy from their side's half, so the
everyday products pick up a political lean through the network alone.
"""

import csv
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent
rng = random.Random(20180501)

CONS_TITLES = [
    "Liberty and Tyranny: A Conservative Manifesto",
    "The Conscience of a Conservative",
    "Slander: Liberal Lies About the American Right",
    "Culture of Corruption",
    "Arguing with Idiots",
    "The Road to Serfdom",
    "Godless: The Church of Liberalism",
    "Rediscovering God in America",
    "Men in Black: How the Supreme Court Is Destroying America",
    "Bias: A CBS Insider Exposes How the Media Distort the News",
]
LIB_TITLES = [
    "The Audacity of Hope",
    "Lies and the Lying Liars Who Tell Them",
    "What's the Matter with Kansas",
    "The Shock Doctrine",
    "Nickel and Dimed",
    "Dude, Where's My Country",
    "Don't Think of an Elephant",
    "The Conscience of a Liberal",
    "Stupid White Men",
    "Bushworld: Enter at Your Own Risk",
]
CATS = [
    ("Sports & Outdoors", "Outdoor Recreation", "TrailCo"),
    ("Home & Kitchen", "Kitchen & Dining", "HearthWare"),
    ("Grocery & Gourmet Food", "Beverages", "GreenLeaf"),
    ("Electronics", "Accessories", "VoltLine"),
    ("Toys & Games", "Puzzles", "PlayWorks"),
]
NOUNS = ["Camp Stove", "Hunting Knife", "Cast Iron Skillet", "Grill Brush", "Ground Coffee",
         "Beef Jerky", "Flashlight", "Radio", "Chess Set", "Puzzle",
         "Yoga Mat", "Hiking Poles", "French Press", "Rice Cooker", "Green Tea",
         "Kale Chips", "Earbuds", "Tablet Case", "Board Game", "Craft Kit"]
WORDS = ("good great quality value price shipping fast recommend book read story "
         "author family gift kids daily use sturdy cheap durable simple clear honest "
         "thoughtful argument country history people work home kitchen outdoor").split()


def asin(i):
    return f"B{i:09d}"


books = []
for i, t in enumerate(CONS_TITLES):
    books.append({"asin": asin(i), "title": t, "side": 0})
for i, t in enumerate(LIB_TITLES):
    books.append({"asin": asin(10 + i), "title": t, "side": 1})

goods = []
for i in range(40):
    side = 0 if i < 20 else 1
    main, sub, brand = CATS[i % len(CATS)]
    noun = NOUNS[i % len(NOUNS)]
    goods.append({"asin": asin(100 + i), "title": f"{brand} {noun} {i:02d}", "side": side,
                  "main": main, "sub": sub, "brand": brand})

meta = []
for b in books:
    same = [x["asin"] for x in books if x["side"] == b["side"] and x["asin"] != b["asin"]]
    meta.append({
        "asin": b["asin"], "title": b["title"], "price": round(rng.uniform(8, 30), 2),
        "salesRank": {"Books": rng.randrange(1000, 900000)},
        "categories": [["Books", "Politics & Social Sciences"]],
        "related": {"also_bought": sorted(rng.sample(same, 4))},
    })
for g in goods:
    same = [x["asin"] for x in goods if x["side"] == g["side"] and x["asin"] != g["asin"]]
    other = [x["asin"] for x in goods if x["side"] != g["side"]]
    # Each half is a dense co-viewing block, which keeps a non-empty 20-core.
    ring = [x["asin"] for x in goods if x["side"] == g["side"]]
    k = ring.index(g["asin"])
    related = {"also_viewed": sorted(same),
               "bought_together": sorted({ring[k - 1], ring[(k + 1) % len(ring)]})}
    if rng.random() < 0.3:
        related["also_bought"] = [rng.choice(other)]
    meta.append({
        "asin": g["asin"], "title": g["title"], "price": round(rng.uniform(5, 120), 2),
        "salesRank": {g["main"]: rng.randrange(100, 500000)}, "brand": g["brand"],
        "categories": [[g["main"], g["sub"]]], "related": related,
    })

reviews = []
t0 = 1262304000
for r in range(120):
    rid = f"A{r:04d}FIX"
    lean = 0 if r < 40 else 1 if r < 80 else None
    pool_books = [b for b in books if lean is None or b["side"] == lean]
    chosen = rng.sample(pool_books, 2)
    for _ in range(rng.randrange(5, 8)):
        if lean is not None and rng.random() < 0.85:
            cand = [g for g in goods if g["side"] == lean]
        else:
            cand = goods
        g = rng.choice(cand)
        if g not in chosen:
            chosen.append(g)
    for item in chosen:
        up = rng.randrange(0, 6)
        reviews.append({
            "reviewerID": rid, "asin": item["asin"], "reviewerName": f"Reader {r}",
            "helpful": [up, up + rng.randrange(0, 4)],
            "reviewText": " ".join(rng.choice(WORDS) for _ in range(40)),
            "overall": float(rng.randrange(1, 6)),
            "summary": " ".join(rng.choice(WORDS) for _ in range(4)),
            "unixReviewTime": t0 + rng.randrange(0, 10**8),
        })

with open(OUT / "reviews.json", "w") as f:
    for r in reviews:
        f.write(json.dumps(r) + "\n")
with open(OUT / "meta.json", "w") as f:
    for m in meta:
        f.write(json.dumps(m) + "\n")

with open(OUT / "seeds.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["title", "class"])
    for b in books:
        title = b["title"].split(":")[0] if rng.random() < 0.3 else b["title"]
        w.writerow([title, "conservative" if b["side"] == 0 else "liberal"])
    w.writerow(["A Book That Is Not In The Corpus", "liberal"])

labels = ["care", "harm", "fairness", "cheating", "loyalty", "betrayal", "authority",
          "subversion", "purity", "degradation", "non_moral"]
with open(OUT / "moral.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["reviewerID", "asin"] + labels)
    for r in reviews:
        w.writerow([r["reviewerID"], r["asin"]] + [f"{rng.random():.4f}" for _ in labels])

with open(OUT / "plan.json", "w") as f:
    json.dump({"waves": 2, "step2": "reviewed_products"}, f, indent=2)
    f.write("\n")
