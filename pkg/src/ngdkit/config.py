"""Experiment configuration: JSON schema, named presets, and digests.

A config is a single JSON document validated against a versioned schema
before any compute happens. Presets carry the tuned hyperparameters for each
benchmark (per-arm learning rates, Adam decay parameters, and solver
iteration counts); users normally start from a preset and override fields.
"""

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import jsonschema

from .data import PEAKS_THRESHOLDS
from .errors import ConfigError
from .layers import Conv2D, Dense, Flatten, LayerSpec, MaxPool

CONFIG_VERSION = 1

DATASETS = ("peaks", "mnist", "fashion_mnist", "cifar10")

_ARM_SCHEMA = {
    "type": "object",
    "properties": {
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "beta1": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "beta2": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "newton_steps": {"type": "integer", "minimum": 1},
        "cg_iterations": {"type": "integer", "minimum": 1},
        "solver": {"enum": ["cg", "dense"]},
        "dense_eps": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["learning_rate"],
    "additionalProperties": False,
}

_LAYER_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["dense", "conv2d", "maxpool", "flatten"]},
        "width": {"type": "integer", "minimum": 1},
        "activation": {"enum": ["tanh", "relu", "identity"]},
        "batchnorm": {"type": "boolean"},
        "channels": {"type": "integer", "minimum": 1},
        "kernel": {"type": "integer", "minimum": 1},
        "window": {"type": "integer", "minimum": 1},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "name": {"type": "string"},
        "dataset": {
            "type": "object",
            "properties": {
                "name": {"enum": list(DATASETS)},
                "data_dir": {"type": ["string", "null"]},
                "n_train": {"type": "integer", "minimum": 1},
                "n_val": {"type": "integer", "minimum": 0},
                "peaks_thresholds": {
                    "type": "array", "items": {"type": "number"}, "minItems": 1,
                },
                "peaks_train_seed": {"type": "integer", "minimum": 0},
                "peaks_val_seed": {"type": "integer", "minimum": 0},
                "split_sizes": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 0},
                    "minItems": 3, "maxItems": 3,
                },
                "split_seed": {"type": "integer", "minimum": 0},
                "flatten": {"type": "boolean"},
            },
            "required": ["name"],
            "additionalProperties": False,
        },
        "architecture": {"type": "array", "items": _LAYER_SCHEMA, "minItems": 1},
        "n_classes": {"type": "integer", "minimum": 2},
        "input_shape": {
            "type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1,
        },
        "softmax_sign": {"enum": ["paper", "standard"]},
        "augment_constant_basis": {"type": "boolean"},
        "optimizer": {"enum": ["ngd", "gd"]},
        "arms": {
            "type": "object",
            "properties": {"ngd": _ARM_SCHEMA, "gd": _ARM_SCHEMA},
            "additionalProperties": False,
        },
        "batch_size": {"type": "integer", "minimum": 1},
        "epochs": {"type": "integer", "minimum": 0},
        "seeds": {
            "type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1,
        },
        "target_val_acc": {"type": ["number", "null"]},
        "out_dir": {"type": "string"},
    },
    "required": [
        "version", "name", "dataset", "architecture", "n_classes", "input_shape",
        "optimizer", "arms", "batch_size", "epochs", "seeds", "out_dir",
    ],
    "additionalProperties": False,
}


def layer_to_dict(spec: LayerSpec) -> dict:
    if isinstance(spec, Dense):
        return {"kind": "dense", "width": spec.width, "activation": spec.activation,
                "batchnorm": spec.batchnorm}
    if isinstance(spec, Conv2D):
        return {"kind": "conv2d", "channels": spec.channels, "kernel": spec.kernel,
                "activation": spec.activation}
    if isinstance(spec, MaxPool):
        return {"kind": "maxpool", "window": spec.window}
    return {"kind": "flatten"}


def layer_from_dict(d: dict) -> LayerSpec:
    kind = d["kind"]
    if kind == "dense":
        if "width" not in d:
            raise ConfigError("dense layer needs a width")
        return Dense(d["width"], d.get("activation", "tanh"), d.get("batchnorm", False))
    if kind == "conv2d":
        if "channels" not in d:
            raise ConfigError("conv2d layer needs channels")
        return Conv2D(d["channels"], d.get("kernel", 3), d.get("activation", "relu"))
    if kind == "maxpool":
        return MaxPool(d.get("window", 2))
    return Flatten()


@dataclass(frozen=True)
class ArmConfig:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    newton_steps: int = 5
    cg_iterations: int = 3
    solver: str = "cg"
    dense_eps: float = 1e-8


@dataclass(frozen=True)
class DataConfig:
    name: str
    data_dir: str | None = None
    n_train: int = 5000
    n_val: int = 2000
    peaks_thresholds: tuple = PEAKS_THRESHOLDS
    peaks_train_seed: int = 1234
    peaks_val_seed: int = 9001
    split_sizes: tuple | None = None
    split_seed: int = 0
    flatten: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: DataConfig
    architecture: tuple
    n_classes: int
    input_shape: tuple
    optimizer: str
    arms: dict
    batch_size: int
    epochs: int
    seeds: tuple
    out_dir: str
    softmax_sign: str = "paper"
    augment_constant_basis: bool = False
    target_val_acc: float | None = 0.95
    version: int = CONFIG_VERSION

    def arm(self, name: str) -> ArmConfig:
        if name not in self.arms:
            raise ConfigError(f"config has no {name!r} arm")
        return self.arms[name]

    def to_dict(self) -> dict:
        d = {
            "version": self.version,
            "name": self.name,
            "dataset": {k: (list(v) if isinstance(v, tuple) else v)
                        for k, v in asdict(self.dataset).items() if v is not None},
            "architecture": [layer_to_dict(sp) for sp in self.architecture],
            "n_classes": self.n_classes,
            "input_shape": list(self.input_shape),
            "softmax_sign": self.softmax_sign,
            "augment_constant_basis": self.augment_constant_basis,
            "optimizer": self.optimizer,
            "arms": {k: asdict(v) for k, v in self.arms.items()},
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seeds": list(self.seeds),
            "target_val_acc": self.target_val_acc,
            "out_dir": self.out_dir,
        }
        return d

    def digest(self) -> str:
        """Stable hash of the full configuration."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a raw JSON document and build the configuration."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"config schema violation: {e.message}") from e
    ds = dict(raw["dataset"])
    if "peaks_thresholds" in ds:
        ds["peaks_thresholds"] = tuple(ds["peaks_thresholds"])
    if "split_sizes" in ds and ds["split_sizes"] is not None:
        ds["split_sizes"] = tuple(ds["split_sizes"])
    arms = {k: ArmConfig(**v) for k, v in raw["arms"].items()}
    if raw["optimizer"] not in arms:
        raise ConfigError(
            f"optimizer {raw['optimizer']!r} has no matching arm in 'arms'"
        )
    cfg = ExperimentConfig(
        name=raw["name"],
        dataset=DataConfig(**ds),
        architecture=tuple(layer_from_dict(d) for d in raw["architecture"]),
        n_classes=raw["n_classes"],
        input_shape=tuple(raw["input_shape"]),
        softmax_sign=raw.get("softmax_sign", "paper"),
        augment_constant_basis=raw.get("augment_constant_basis", False),
        optimizer=raw["optimizer"],
        arms=arms,
        batch_size=raw["batch_size"],
        epochs=raw["epochs"],
        seeds=tuple(raw["seeds"]),
        target_val_acc=raw.get("target_val_acc", 0.95),
        out_dir=raw["out_dir"],
    )
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    return config_from_dict(raw)


def _preset_peaks() -> dict:
    arch = [
        {"kind": "dense", "width": 12, "activation": "tanh", "batchnorm": True},
        {"kind": "dense", "width": 12, "activation": "tanh", "batchnorm": True},
        {"kind": "dense", "width": 12, "activation": "tanh", "batchnorm": True},
        {"kind": "dense", "width": 6, "activation": "tanh", "batchnorm": True},
    ]
    return {
        "version": CONFIG_VERSION,
        "name": "peaks",
        "dataset": {"name": "peaks", "n_train": 5000, "n_val": 2000},
        "architecture": arch,
        "n_classes": 5,
        "input_shape": [2],
        "optimizer": "ngd",
        "arms": {
            "ngd": {"learning_rate": 1e-4, "beta1": 0.9, "beta2": 0.999,
                    "newton_steps": 5, "cg_iterations": 3},
            "gd": {"learning_rate": 1e-4, "beta1": 0.9, "beta2": 0.999},
        },
        # full batch: one iteration per epoch; 3000 is the desk-scale length
        "batch_size": 5000,
        "epochs": 3000,
        "seeds": list(range(16)),
        "target_val_acc": 0.95,
        "out_dir": "out/peaks",
    }


def _dense_image_preset(name: str, dataset: str, ngd: dict, gd: dict,
                        input_dim: int, split_sizes: list,
                        target: float) -> dict:
    arch = [
        {"kind": "dense", "width": 128, "activation": "relu"},
        {"kind": "dense", "width": 10, "activation": "relu"},
    ]
    return {
        "version": CONFIG_VERSION,
        "name": name,
        "dataset": {"name": dataset, "data_dir": None, "split_sizes": split_sizes,
                    "split_seed": 0, "flatten": True},
        "architecture": arch,
        "n_classes": 10,
        "input_shape": [input_dim],
        "optimizer": "ngd",
        "arms": {"ngd": ngd, "gd": gd},
        "batch_size": 1000,
        "epochs": 100,
        "seeds": list(range(10)),
        "target_val_acc": target,
        "out_dir": f"out/{name}",
    }


def _preset_cifar_convnet() -> dict:
    arch = [
        {"kind": "conv2d", "channels": 8, "kernel": 3, "activation": "relu"},
        {"kind": "maxpool", "window": 2},
        {"kind": "conv2d", "channels": 16, "kernel": 3, "activation": "relu"},
        {"kind": "maxpool", "window": 2},
        {"kind": "conv2d", "channels": 16, "kernel": 3, "activation": "relu"},
        {"kind": "flatten"},
        {"kind": "dense", "width": 64, "activation": "relu"},
        {"kind": "dense", "width": 10, "activation": "relu"},
    ]
    return {
        "version": CONFIG_VERSION,
        "name": "cifar_convnet",
        "dataset": {"name": "cifar10", "data_dir": None,
                    "split_sizes": [40000, 10000, 10000], "split_seed": 0,
                    "flatten": False},
        "architecture": arch,
        "n_classes": 10,
        "input_shape": [32, 32, 3],
        "optimizer": "ngd",
        "arms": {
            "ngd": {"learning_rate": 10**-2.66, "beta1": 0.755, "beta2": 0.858,
                    "newton_steps": 7, "cg_iterations": 2},
            "gd": {"learning_rate": 10**-2.30, "beta1": 0.657, "beta2": 0.976},
        },
        "batch_size": 1000,
        "epochs": 100,
        "seeds": list(range(10)),
        "target_val_acc": 0.5,
        "out_dir": "out/cifar_convnet",
    }


def preset(name: str) -> dict:
    """Raw config dict for a named benchmark preset."""
    builders = {
        "peaks": _preset_peaks,
        "mnist_dense": lambda: _dense_image_preset(
            "mnist_dense", "mnist",
            {"learning_rate": 10**-2.81, "beta1": 0.537, "beta2": 0.830,
             "newton_steps": 6, "cg_iterations": 3},
            {"learning_rate": 10**-2.26, "beta1": 0.630, "beta2": 0.616},
            784, [50000, 10000, 10000], 0.95,
        ),
        "fashion_dense": lambda: _dense_image_preset(
            "fashion_dense", "fashion_mnist",
            {"learning_rate": 10**-3.33, "beta1": 0.756, "beta2": 0.808,
             "newton_steps": 5, "cg_iterations": 1},
            {"learning_rate": 10**-2.30, "beta1": 0.657, "beta2": 0.976},
            784, [50000, 10000, 10000], 0.85,
        ),
        "cifar_dense": lambda: _dense_image_preset(
            "cifar_dense", "cifar10",
            {"learning_rate": 10**-3.57, "beta1": 0.629, "beta2": 0.782,
             "newton_steps": 4, "cg_iterations": 2},
            {"learning_rate": 10**-2.50, "beta1": 0.891, "beta2": 0.808},
            3072, [40000, 10000, 10000], 0.5,
        ),
        "cifar_convnet": _preset_cifar_convnet,
    }
    if name not in builders:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(builders)}")
    return builders[name]()


PRESET_NAMES = ("peaks", "mnist_dense", "fashion_dense", "cifar_dense", "cifar_convnet")
