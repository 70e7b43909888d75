"""
Predicting when a calibration can be trusted
============================================

Fit the KNN error predictor on one set of synthetic scenes and use it to keep
only the estimates it considers most reliable on another.
"""

import numpy as np

from frcalib import SynthConfig, calibrate, fit_model, generate
from frcalib.evaluation import ErrorRecord, format_table, gated_table, per_image_errors
from frcalib.reliability import extract_cues
from frcalib.search import SearchConfig
from frcalib.synth import random_params


def run(seeds):
    """Calibrate scenes of varying difficulty; return cue and error matrices."""
    cues, errs = [], []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        truth = random_params(rng)
        # fewer segments and more noise make some scenes much harder
        counts = (*(int(c) for c in rng.integers(4, 31, 3)), int(rng.integers(0, 16)))
        scene = generate(SynthConfig(truth, counts=counts, noise=float(rng.choice([0, 1, 2, 4])), seed=seed))
        result, grid = calibrate(scene.segments, 640, 480, search=SearchConfig.fast(), return_grid=True)
        e = per_image_errors(result.params, truth)
        cues.append(extract_cues(result, grid).as_array())
        errs.append([e.roll, e.tilt, e.focal])
    return np.array(cues), np.array(errs)


train_cues, train_errs = run(range(0, 80))
test_cues, test_errs = run(range(1000, 1080))

model = fit_model(train_cues, train_errs, seed=0)
print("neighbours per target (roll, tilt, focal):", model.ks)

pred = model.predict(test_cues)
records = [ErrorRecord(r, t, None, f, f, None) for r, t, f in test_errs]
table = gated_table(records, {"roll": pred[:, 0], "tilt": pred[:, 1], "focal": pred[:, 2]})
# The top rows keep only the estimates with the lowest predicted error.
print(format_table(table, ["fraction", "n", "roll", "tilt", "focal"]))
