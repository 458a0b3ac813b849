#!/usr/bin/env python3
# Copyright 2026 The spr-annotate Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes a synthetic experiment with the five-series layout.

Each series holds 4 pun, 4 irony, 4 metaphor and 12 plain texts. Texts are
placeholder word sequences of 8 to 20 tokens.
"""

import argparse
import json
import random

WORDS = (
    "the a old new small tall quiet loud river bank clock light paper window "
    "teacher student doctor baker cat dog train letter table garden morning "
    "evening said asked walked found lost kept turned opened closed again "
    "never always almost slowly quickly because although while after before"
).split()

LAYOUT = (("pun", 4), ("irony", 4), ("metaphor", 4), (None, 12))


def make_text(rng):
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(8, 20)))


def build(seed, series_count):
    rng = random.Random(seed)
    series = []
    for s in range(1, series_count + 1):
        texts = []
        for category, count in LAYOUT:
            for _ in range(count):
                texts.append({"text_id": f"s{s}-t{len(texts) + 1:02d}",
                              "truth_category": category,
                              "text": make_text(rng)})
        rng.shuffle(texts)
        series.append({"series_id": f"series-{s}", "texts": texts})
    practice = [{"text_id": f"practice-{i}", "truth_category": c, "text": make_text(rng)}
                for i, c in enumerate(("pun", None), start=1)]
    return {
        "experiment_id": "five-series",
        "categories": ["metaphor", "irony", "pun"],
        "humorous_categories": ["pun"],
        "config": {"min_word_delay_ms": 1000, "funniness_min": 1, "funniness_max": 6},
        "practice_texts": practice,
        "series": series,
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out")
    parser.add_argument("--seed", type=int, default=2020)
    parser.add_argument("--series", type=int, default=5)
    args = parser.parse_args()
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(build(args.seed, args.series), f, indent=2, ensure_ascii=False)
        f.write("\n")


if __name__ == "__main__":
    main()
