# Copyright 2026 The XStacking Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes data/demo.csv: 300 rows, four features, a binary label."""

import csv
import pathlib

import numpy as np


def main():
    rng = np.random.default_rng(2026)
    n = 300
    x = rng.uniform(-1.0, 1.0, size=(n, 4))
    score = 1.5 * x[:, 0] - x[:, 1] + np.where(x[:, 2] > 0.2, 1.0, -0.5)
    score += 0.3 * rng.normal(size=n)
    label = np.where(score > 0.0, "yes", "no")
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "demo.csv"
    with out.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["age", "income", "tenure", "usage", "churn"])
        for row, y in zip(x, label):
            w.writerow([f"{v:.6f}" for v in row] + [y])


if __name__ == "__main__":
    main()
