"""Corruption/occlusion sweeps that produce recognition-rate tables.

An experiment is described by a JSON document (see :class:`ExperimentSpec`)::

    {
      "data_source": {"type": "synthetic", "classes": 5, "per_class": 15,
                      "width": 8, "height": 8, "noise": 0.05},
      "split": {"train": 10, "test": 5},
      "methods": ["src_lasso", "wwcsc"],
      "sweep": {"kind": "uniform_pixels", "fractions": [0.1, 0.5]},
      "seed": 0
    }

Every random draw (synthetic data, split shuffle, projection, per-sample
corruption) comes from a stream derived from ``seed``, so a config file
fully determines the output table.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .admm import MODES, AdmmConfig, NumericalFailureError, solve
from .classify import classify, recognition_rate
from .dataops import (
    CORRUPTION_KINDS,
    CorruptionSpec,
    apply_projection,
    build_dictionary,
    image_to_vector,
    load_image_dir,
    make_projection,
    project_dictionary,
    synth_dataset,
)
from .wing import WeightParams, WingParams

_DEFAULT_SOLVER = AdmmConfig()
_DEFAULT_WING = WingParams()
_DEFAULT_WEIGHT = WeightParams()

# stream ids for derived seeds
_DATA, _SPLIT, _PROJECTION, _CORRUPTION = range(4)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` holds ``(field_path, message)`` pairs."""

    def __init__(self, message, errors=()):
        super().__init__(message)
        self.errors = list(errors)


class DataError(RuntimeError):
    """The data source cannot produce the requested split."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SyntheticSource(_Strict):
    type: Literal["synthetic"] = "synthetic"
    classes: int = Field(5, ge=1)
    per_class: int = Field(15, ge=1)
    width: int = Field(8, ge=1)
    height: int = Field(8, ge=1)
    noise: float = Field(0.05, ge=0)
    rank: int = Field(3, ge=1)
    disjoint: bool = False


class ImageDirSource(_Strict):
    type: Literal["image_dir"] = "image_dir"
    path: str


class Split(_Strict):
    train: int = Field(10, ge=1)
    test: int = Field(5, ge=1)


class SolverOverrides(_Strict):
    lam: float = Field(_DEFAULT_SOLVER.lam, gt=0)
    rho1: float = Field(_DEFAULT_SOLVER.rho1, gt=0)
    rho2: float = Field(_DEFAULT_SOLVER.rho2, gt=0)
    max_iter: int = Field(_DEFAULT_SOLVER.max_iter, ge=1)
    tol: float = Field(_DEFAULT_SOLVER.tol, gt=0)
    omega: float = Field(_DEFAULT_WING.omega, gt=0)
    epsilon: float = Field(_DEFAULT_WING.epsilon, gt=0)
    q: float = Field(_DEFAULT_WEIGHT.q, gt=0)
    tau: float = Field(_DEFAULT_WEIGHT.tau, gt=0, le=1)

    def admm_config(self) -> AdmmConfig:
        return AdmmConfig(
            lam=self.lam,
            rho1=self.rho1,
            rho2=self.rho2,
            max_iter=self.max_iter,
            tol=self.tol,
            wing=WingParams(self.omega, self.epsilon),
            weight=WeightParams(self.q, self.tau),
        )


class Sweep(_Strict):
    kind: Literal[CORRUPTION_KINDS] = "uniform_pixels"
    fractions: list[Annotated[float, Field(ge=0, le=1)]] = Field(min_length=1)

    @field_validator("fractions")
    @classmethod
    def _ascending(cls, v):
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("fractions must be strictly ascending")
        return v


class ExperimentSpec(_Strict):
    data_source: Annotated[Union[SyntheticSource, ImageDirSource], Field(discriminator="type")]
    methods: list[Literal[MODES]] = Field(min_length=1)
    split: Split = Split()
    projection_dim: Optional[int] = Field(None, ge=1)
    solver: SolverOverrides = SolverOverrides()
    sweep: Sweep = Sweep(fractions=[0.0])
    seed: int = 0
    output_path: Optional[str] = None

    @field_validator("methods")
    @classmethod
    def _unique(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("methods must not repeat")
        return v

    @model_validator(mode="after")
    def _split_fits(self):
        src = self.data_source
        if isinstance(src, SyntheticSource) and self.split.train + self.split.test > src.per_class:
            raise ValueError(
                f"split.train + split.test = {self.split.train + self.split.test} "
                f"exceeds data_source.per_class = {src.per_class}"
            )
        return self

    def config_hash(self) -> str:
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _format_loc(loc) -> str:
    # drop pydantic's discriminator tags such as 'synthetic' in data_source.synthetic.noise
    parts = [str(p) for p in loc if p not in ("synthetic", "image_dir")]
    return ".".join(parts) or "<root>"


def validate_config(doc: dict, base_dir: Optional[str] = None) -> ExperimentSpec:
    """Validate a parsed JSON document; relative image paths resolve against ``base_dir``."""
    try:
        spec = ExperimentSpec.model_validate(doc)
    except ValidationError as exc:
        errors = [(_format_loc(e["loc"]), e["msg"]) for e in exc.errors()]
        detail = "; ".join(f"{loc}: {msg}" for loc, msg in errors)
        raise ConfigError(f"invalid experiment config: {detail}", errors) from None
    src = spec.data_source
    if base_dir and isinstance(src, ImageDirSource) and not os.path.isabs(src.path):
        src = src.model_copy(update={"path": os.path.normpath(os.path.join(base_dir, src.path))})
        spec = spec.model_copy(update={"data_source": src})
    return spec


def parse_config(path) -> ExperimentSpec:
    """Read and strictly validate an experiment JSON file."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}", [("<root>", str(exc))]) from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object", [("<root>", "expected object")])
    return validate_config(doc, base_dir=os.path.dirname(os.path.abspath(path)))


# -- results -------------------------------------------------------------------


@dataclass
class ResultTable:
    """Recognition rates, one row per method and one column per sweep level.

    ``cells[i][j]`` is a percentage rounded to 2 decimals, or ``None`` when
    every solve in that cell failed numerically.
    """

    methods: list
    levels: list
    cells: list
    metadata: dict = field(default_factory=dict)

    def rate(self, method, level):
        return self.cells[self.methods.index(method)][self.levels.index(level)]


def _fmt_level(level) -> str:
    return f"{level:.2f}"


def _fmt_cell(v) -> str:
    return "failed" if v is None else f"{v:.2f}"


def _parse_cell(s):
    s = s.strip()
    return None if s == "failed" else float(s)


def emit_table(table: ResultTable, format: str = "csv") -> str:
    header = ["method"] + [_fmt_level(lv) for lv in table.levels]
    rows = [[m] + [_fmt_cell(v) for v in row] for m, row in zip(table.methods, table.cells)]
    if format == "csv":
        return "".join(",".join(r) + "\n" for r in [header] + rows)
    if format == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] + ["---:"] * len(table.levels)) + "|"]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {format!r}")


def parse_table(text: str, format: str = "csv") -> ResultTable:
    """Inverse of :func:`emit_table` (metadata is not part of the text form)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if format == "csv":
        rows = [ln.split(",") for ln in lines]
    elif format == "markdown":
        rows = [[c.strip() for c in ln.strip().strip("|").split("|")] for ln in lines]
        rows = [rows[0]] + rows[2:]
    else:
        raise ValueError(f"unknown table format {format!r}")
    header, body = rows[0], rows[1:]
    levels = [float(h) for h in header[1:]]
    methods = [r[0].strip() for r in body]
    cells = [[_parse_cell(c) for c in r[1:]] for r in body]
    return ResultTable(methods=methods, levels=levels, cells=cells)


# -- pipeline ------------------------------------------------------------------


def derive_seed(seed: int, *stream) -> int:
    return int(np.random.SeedSequence([seed, *stream]).generate_state(1)[0])


def load_samples(spec: ExperimentSpec):
    src = spec.data_source
    if isinstance(src, SyntheticSource):
        return synth_dataset(
            src.classes, src.per_class, src.width, src.height,
            noise=src.noise, seed=derive_seed(spec.seed, _DATA),
            rank=src.rank, disjoint=src.disjoint,
        )
    try:
        return load_image_dir(src.path)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from None


def split_samples(samples, train_n: int, test_n: int, seed: int):
    """Seeded per-class shuffle; first ``train_n`` to training, next ``test_n`` to test."""
    by_class = {}
    for img, c in samples:
        by_class.setdefault(c, []).append(img)
    train, test = [], []
    for c in sorted(by_class):
        imgs = by_class[c]
        if len(imgs) < train_n + test_n:
            raise DataError(f"class {c} has {len(imgs)} images, split needs {train_n + test_n}")
        order = np.random.default_rng(derive_seed(seed, _SPLIT, c)).permutation(len(imgs))
        train += [(imgs[i], c) for i in order[:train_n]]
        test += [(imgs[i], c) for i in order[train_n : train_n + test_n]]
    return train, test


def run_experiment(spec: ExperimentSpec, jobs: int = 1, monitor=None) -> ResultTable:
    """Run every method at every sweep level and score recognition rates.

    Parameters
    ----------
    spec : ExperimentSpec
    jobs : int
        Worker threads used for the test samples within a cell. Results are
        reduced in sample order, so the table does not depend on ``jobs``.
    monitor : callable, optional
        Forwarded to the solver as
        ``monitor(method, fraction, sample_index, k, state)``.
    """
    samples = load_samples(spec)
    shapes = {img.pixels.shape for img, _ in samples}
    if len(shapes) != 1:
        raise DataError(f"inconsistent image sizes: {sorted(shapes)}")
    train, test = split_samples(samples, spec.split.train, spec.split.test, spec.seed)
    dictionary = build_dictionary(train)
    proj = None
    if spec.projection_dim is not None:
        m = dictionary.shape[0]
        if spec.projection_dim > m:
            raise ConfigError(
                f"projection_dim {spec.projection_dim} exceeds image dimension {m}",
                [("projection_dim", f"must be <= {m}")],
            )
        proj = make_projection(spec.projection_dim, m, derive_seed(spec.seed, _PROJECTION))
        dictionary = project_dictionary(proj, dictionary)

    cfg = spec.solver.admm_config()
    truth = [c for _, c in test]
    cells = [[None] * len(spec.sweep.fractions) for _ in spec.methods]
    mean_iters, failures = {}, {}

    for j, frac in enumerate(spec.sweep.fractions):
        vectors = []
        for i, (img, _) in enumerate(test):
            corruption = CorruptionSpec(spec.sweep.kind, frac, derive_seed(spec.seed, _CORRUPTION, j, i))
            v = image_to_vector(corruption.apply(img))
            vectors.append(apply_projection(proj, v) if proj is not None else v)

        for r, method in enumerate(spec.methods):

            def work(i, method=method, frac=frac):
                cb = None
                if monitor is not None:
                    cb = lambda k, st: monitor(method, frac, i, k, st)  # noqa: E731
                try:
                    res = solve(dictionary.matrix, vectors[i], cfg, mode=method, callback=cb)
                except NumericalFailureError as exc:
                    return None, 0, str(exc)
                return classify(vectors[i], res.x_hat, dictionary).predicted_class, res.iterations, None

            if jobs > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    outcomes = list(pool.map(work, range(len(test))))
            else:
                outcomes = [work(i) for i in range(len(test))]

            key = f"{method}@{_fmt_level(frac)}"
            errs = [o[2] for o in outcomes if o[2] is not None]
            if errs:
                failures[key] = errs
            ok = [(p, t, it) for (p, it, _), t in zip(outcomes, truth) if p is not None]
            if ok:
                # failed solves count as misclassified
                preds = [o[0] for o in outcomes]
                cells[r][j] = round(recognition_rate(preds, truth), 2)
                mean_iters[key] = round(float(np.mean([it for _, _, it in ok])), 2)

    table = ResultTable(
        methods=list(spec.methods),
        levels=list(spec.sweep.fractions),
        cells=cells,
        metadata={
            "seed": spec.seed,
            "config_hash": spec.config_hash(),
            "config": spec.model_dump(mode="json"),
            "mean_iterations": mean_iters,
            "failures": failures,
        },
    )
    if spec.output_path:
        write_table(table, spec.output_path)
    return table


def write_table(table: ResultTable, path, format: Optional[str] = None) -> None:
    """Write the table and a ``<path>.meta.json`` sidecar with its metadata."""
    if format is None:
        format = "markdown" if str(path).endswith(".md") else "csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(emit_table(table, format))
    with open(f"{path}.meta.json", "w", encoding="utf-8", newline="") as fh:
        json.dump(table.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
