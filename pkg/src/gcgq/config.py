"""Experiment configuration: INI files with ``[data]``, ``[model]``, ``[train]`` and
``[experiment]`` sections, plus shipped per-dataset presets."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .model import ArchitectureSpec
from .training import TrainConfig

INTERNAL_REPRESENTATIONS = ("spectral", "gamma")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str | None = None
    arch: ArchitectureSpec = field(default_factory=ArchitectureSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    runs: int = 1
    seed: int = 0
    k_list: tuple[int, ...] = ()
    out: str = "runs"
    internal_on: str = "spectral"

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if any(k < 1 for k in self.k_list):
            raise ValueError("k_list values must be at least 1")
        if self.internal_on not in INTERNAL_REPRESENTATIONS:
            raise ValueError(f"internal_on must be one of {INTERNAL_REPRESENTATIONS}")

    def run_seed(self, run: int) -> int:
        """Per-run seed: first word of ``SeedSequence([seed, run])``."""
        return int(np.random.SeedSequence([self.seed, run]).generate_state(1)[0])

    def train_for_run(self, run: int) -> TrainConfig:
        return dataclasses.replace(self.train, seed=self.run_seed(run))


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _optional(cast):
    def parse(text):
        text = text.strip()
        return None if text.lower() in ("", "none", "auto") else cast(text)
    return parse


_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}
_TRAIN_CASTS = {
    "init_sigma": _optional(float),
    "n_clusters": _optional(int),
    "degree_mode": str,
    "laplacian_mode": str,
}


def _cast_train(key, text):
    if key in _TRAIN_CASTS:
        return _TRAIN_CASTS[key](text)
    default = _TRAIN_FIELDS[key].default
    return int(text) if isinstance(default, int) else float(text)


def _apply(cfg: ExperimentConfig, section: str, key: str, text: str) -> ExperimentConfig:
    if section == "data":
        if key == "path":
            return dataclasses.replace(cfg, dataset=text)
        if key in ("degree_mode", "laplacian_mode"):
            return dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, **{key: text}))
    elif section == "model":
        if key == "qge_dims":
            return dataclasses.replace(cfg, arch=dataclasses.replace(cfg.arch, qge_dims=_int_list(text)))
        if key == "fvp_dim":
            return dataclasses.replace(cfg, arch=dataclasses.replace(cfg.arch, fvp_dim=int(text)))
        if key in ("variant", "activation", "decoder"):
            return dataclasses.replace(cfg, arch=dataclasses.replace(cfg.arch, **{key: text}))
    elif section == "train":
        if key in _TRAIN_FIELDS and key != "seed":
            return dataclasses.replace(
                cfg, train=dataclasses.replace(cfg.train, **{key: _cast_train(key, text)})
            )
    elif section == "experiment":
        if key in ("runs", "seed"):
            return dataclasses.replace(cfg, **{key: int(text)})
        if key == "k_list":
            return dataclasses.replace(cfg, k_list=_int_list(text))
        if key in ("out", "internal_on"):
            return dataclasses.replace(cfg, **{key: text})
    raise ValueError(f"unknown config key [{section}] {key}")


def parse_config(text: str, base: ExperimentConfig | None = None,
                 source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ValueError(f"{source}: {exc}") from None
    cfg = base or ExperimentConfig()
    for section in parser.sections():
        for key, value in parser.items(section):
            try:
                cfg = _apply(cfg, section, key, value)
            except ValueError as exc:
                raise ValueError(f"{source}: [{section}] {key}: {exc}") from None
    return cfg


def preset_names() -> list[str]:
    root = resources.files("gcgq") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_config(name_or_path: str) -> ExperimentConfig:
    """Load an INI file, or a shipped preset by name (``cornell``, ``cora``, ...)."""
    path = Path(name_or_path)
    if path.is_file():
        return parse_config(path.read_text(encoding="utf-8"), source=str(path))
    preset = resources.files("gcgq") / "presets" / f"{name_or_path.lower()}.ini"
    if preset.is_file():
        return parse_config(preset.read_text(encoding="utf-8"), source=f"preset:{name_or_path}")
    raise FileNotFoundError(
        f"no config file or preset named {name_or_path!r}; presets: {', '.join(preset_names())}"
    )


def to_ini(cfg: ExperimentConfig) -> str:
    """Serialize back to the INI layout understood by :func:`parse_config`."""
    t = cfg.train
    lines = ["[data]"]
    if cfg.dataset is not None:
        lines.append(f"path = {cfg.dataset}")
    lines += [f"degree_mode = {t.degree_mode}", f"laplacian_mode = {t.laplacian_mode}", "",
              "[model]", f"fvp_dim = {cfg.arch.fvp_dim}",
              f"qge_dims = {', '.join(map(str, cfg.arch.qge_dims))}",
              f"variant = {cfg.arch.variant}", "", "[train]"]
    for f in dataclasses.fields(TrainConfig):
        if f.name in ("seed", "degree_mode", "laplacian_mode"):
            continue
        v = getattr(t, f.name)
        lines.append(f"{f.name} = {'none' if v is None else repr(v)}")
    lines += ["", "[experiment]", f"runs = {cfg.runs}", f"seed = {cfg.seed}",
              f"k_list = {', '.join(map(str, cfg.k_list))}", f"out = {cfg.out}",
              f"internal_on = {cfg.internal_on}", ""]
    return "\n".join(lines)
