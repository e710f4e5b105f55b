"""
From PGM files to a projected dictionary
========================================

Images on disk follow a ``class_<id>/<name>.pgm`` layout. We write a
synthetic set, read it back, project it to a lower dimension and classify
an occluded test image.
"""

import tempfile
from pathlib import Path

from wingsc import (
    AdmmConfig,
    WeightParams,
    apply_projection,
    build_dictionary,
    classify,
    image_to_vector,
    make_projection,
    occlude_block,
    solve,
    synth_dataset,
)
from wingsc.dataops import load_image_dir, project_dictionary, write_dataset

root = Path(tempfile.mkdtemp()) / "faces"
write_dataset(synth_dataset(4, 8, 10, 10, noise=0.03, seed=1), root)
samples = load_image_dir(root)
print(f"read {len(samples)} images from {root}")

train = [s for i, s in enumerate(samples) if i % 8 < 6]
test = [s for i, s in enumerate(samples) if i % 8 >= 6]

###############################################################################
# Project 100 pixels down to 40 and code each occluded test image.
proj = make_projection(40, 100, seed=3)
dictionary = project_dictionary(proj, build_dictionary(train))
cfg = AdmmConfig(weight=WeightParams(), max_iter=200)
correct = 0
for i, (img, label) in enumerate(test):
    y = apply_projection(proj, image_to_vector(occlude_block(img, 0.2, seed=i)))
    pred = classify(y, solve(dictionary.matrix, y, cfg, mode="wwcsc").x_hat, dictionary).predicted_class
    correct += pred == label
print(f"{correct}/{len(test)} occluded test images recognized")
