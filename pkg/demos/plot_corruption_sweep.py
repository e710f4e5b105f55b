"""
Recognition under growing corruption
====================================

The benchmark harness runs a small synthetic face-like dataset through
every method at several corruption levels and prints the recognition
table. The same experiment is available from the command line as
``wingsc-bench run <config.json>``.
"""

from wingsc.bench import emit_table, run_experiment, validate_config

spec = validate_config(
    {
        "data_source": {"type": "synthetic", "classes": 5, "per_class": 15, "width": 8, "height": 8},
        "split": {"train": 10, "test": 5},
        "methods": ["src_lasso", "wcsc", "wwcsc"],
        "solver": {"max_iter": 200},
        "sweep": {"kind": "uniform_pixels", "fractions": [0.0, 0.3, 0.6]},
        "seed": 0,
    }
)
table = run_experiment(spec, jobs=4)
print(emit_table(table, "markdown"))

###############################################################################
# Block occlusion instead of scattered pixels.
occl = validate_config({**spec.model_dump(), "sweep": {"kind": "block_white", "fractions": [0.1, 0.3]}})
print(emit_table(run_experiment(occl, jobs=4), "markdown"))
