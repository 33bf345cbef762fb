from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import yaml

from fdgnn.harness.search import SearchSpace, default_hidden_size
from fdgnn.state.models import ContractError, ModelConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EnvSettings:
    data_root: str | None
    threads: int | None
    log_level: int


@dataclass(frozen=True)
class ProtocolConfig:
    outer_folds: int = 10
    inner_folds: int = 10
    seed: int = 0
    threads: int | None = None
    regularize_bias: bool = True


@dataclass(frozen=True)
class AppConfig:
    model: ModelConfig = ModelConfig()
    search: SearchSpace = SearchSpace()
    protocol: ProtocolConfig = ProtocolConfig()
    log_level: int | None = None
    hidden_size_explicit: bool = False

    def model_config(self, dataset_name: str) -> ModelConfig:
        if self.hidden_size_explicit:
            return self.model
        hidden_size = default_hidden_size(dataset_name)
        try:
            return replace(self.model, hidden_size=hidden_size)
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc


MODEL_KEYS = (
    "num_layers",
    "hidden_size",
    "connections",
    "rho",
    "omega1",
    "omega",
    "epsilon",
    "max_iters",
    "projection_dim",
    "ridge_lambda",
)
SEARCH_KEYS = (
    "num_configs",
    "guesses",
    "rho_range",
    "omega1_range",
    "omega_range",
    "layer_choices",
    "lambda_grid",
    "fixed_layers",
)
PROTOCOL_KEYS = ("outer_folds", "inner_folds", "seed", "threads", "regularize_bias")
KNOWN_KEYS = frozenset(MODEL_KEYS + SEARCH_KEYS + PROTOCOL_KEYS + ("log_level",))
_INT_MODEL_KEYS = {"num_layers", "hidden_size", "connections", "max_iters", "projection_dim"}


def load_env_settings() -> EnvSettings:
    threads_raw = _get_env_value("fdgnn_threads")
    threads: int | None = None
    if threads_raw is not None:
        threads = _parse_int_value(threads_raw, "fdgnn_threads")
        if threads < 0:
            raise ConfigError(f"fdgnn_threads must be >= 0, got {threads}")
    log_level_raw = _get_env_value("log_level")
    log_level = logging.INFO if log_level_raw is None else parse_log_level(log_level_raw)
    return EnvSettings(
        data_root=_get_env_value("fdgnn_data_root"),
        threads=threads,
        log_level=log_level,
    )


def load_app_config(path: Path | None) -> AppConfig:
    if path is None:
        return AppConfig()
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        content = yaml.safe_load(path.read_text()) or {}
    except OSError as exc:
        raise ConfigError(f"Unable to read config file: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Invalid YAML in config file: {path}") from exc
    if not isinstance(content, dict):
        raise ConfigError("Config root must be a mapping")
    _log_unknown_config_keys(content)
    return _parse_app_config(content)


def _parse_app_config(raw: dict[str, Any]) -> AppConfig:
    model_values: dict[str, Any] = {}
    for key in MODEL_KEYS:
        value = raw.get(key)
        if value is None:
            continue
        if key in _INT_MODEL_KEYS:
            model_values[key] = _parse_int_value(value, key)
        else:
            model_values[key] = _parse_float_value(value, key)

    search_values: dict[str, Any] = {}
    for key in ("num_configs", "guesses", "fixed_layers"):
        if raw.get(key) is not None:
            search_values[key] = _parse_int_value(raw[key], key)
    for key in ("rho_range", "omega1_range", "omega_range"):
        if raw.get(key) is not None:
            search_values[key] = _parse_range_value(raw[key], key)
    if raw.get("layer_choices") is not None:
        search_values["layer_choices"] = tuple(
            _parse_int_value(item, "layer_choices") for item in _as_list(raw["layer_choices"], "layer_choices")
        )
    if raw.get("lambda_grid") is not None:
        search_values["lambda_grid"] = tuple(
            _parse_float_value(item, "lambda_grid") for item in _as_list(raw["lambda_grid"], "lambda_grid")
        )

    base_protocol = ProtocolConfig()
    protocol = ProtocolConfig(
        outer_folds=_parse_int_value(
            _value_or_default(raw, "outer_folds", base_protocol.outer_folds), "outer_folds"
        ),
        inner_folds=_parse_int_value(
            _value_or_default(raw, "inner_folds", base_protocol.inner_folds), "inner_folds"
        ),
        seed=_parse_int_value(_value_or_default(raw, "seed", base_protocol.seed), "seed"),
        threads=None if raw.get("threads") is None else _parse_int_value(raw["threads"], "threads"),
        regularize_bias=_parse_bool_value_yaml(
            _value_or_default(raw, "regularize_bias", base_protocol.regularize_bias),
            "regularize_bias",
        ),
    )
    _validate_protocol(protocol)

    try:
        model = ModelConfig(**model_values)
        search = SearchSpace(**search_values)
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc
    log_level = raw.get("log_level")
    return AppConfig(
        model=model,
        search=search,
        protocol=protocol,
        log_level=None if log_level is None else _parse_log_level_value(log_level, "log_level"),
        hidden_size_explicit="hidden_size" in model_values,
    )


def check_model_fits(model: ModelConfig, label_dim: int) -> None:
    if model.connections > label_dim:
        raise ConfigError(
            f"connections={model.connections} exceeds the dataset label dimension {label_dim}"
        )


def _validate_protocol(protocol: ProtocolConfig) -> None:
    if protocol.outer_folds < 2:
        raise ConfigError(f"outer_folds must be >= 2, got {protocol.outer_folds}")
    if protocol.inner_folds < 2:
        raise ConfigError(f"inner_folds must be >= 2, got {protocol.inner_folds}")
    if protocol.seed < 0:
        raise ConfigError(f"seed must be non-negative, got {protocol.seed}")
    if protocol.threads is not None and protocol.threads < 0:
        raise ConfigError(f"threads must be >= 0, got {protocol.threads}")


def apply_overrides(
    config: AppConfig,
    *,
    configs: int | None = None,
    guesses: int | None = None,
    layers: int | None = None,
    folds: int | None = None,
    inner_folds: int | None = None,
    seed: int | None = None,
) -> AppConfig:
    search = config.search
    protocol = config.protocol
    try:
        search = replace(
            search,
            num_configs=resolve_int(configs, search.num_configs),
            guesses=resolve_int(guesses, search.guesses),
            fixed_layers=search.fixed_layers if layers is None else layers,
        )
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc
    protocol = replace(
        protocol,
        outer_folds=resolve_int(folds, protocol.outer_folds),
        inner_folds=resolve_int(inner_folds, protocol.inner_folds),
        seed=resolve_int(seed, protocol.seed),
    )
    _validate_protocol(protocol)
    return replace(config, search=search, protocol=protocol)


def resolve_int(cli_value: int | None, config_value: int) -> int:
    return config_value if cli_value is None else cli_value


def resolve_threads(cli_value: int | None, config_value: int | None, env_value: int | None) -> int:
    for value in (cli_value, config_value, env_value):
        if value is not None:
            if value < 0:
                raise ConfigError(f"threads must be >= 0, got {value}")
            return value
    return 1


def resolve_data_root(cli_value: str | None, settings: EnvSettings) -> Path:
    raw = cli_value or settings.data_root
    if not raw:
        raise ConfigError("data root is not set; pass --data-root or set fdgnn_data_root")
    return Path(raw).expanduser()


def parse_log_level(value: str, name: str = "log_level") -> int:
    cleaned = value.strip()
    if not cleaned:
        raise ConfigError(f"{name} must be a valid log level, got {value!r}")
    upper = cleaned.upper()
    if upper.isdigit():
        level = int(upper)
    else:
        level = logging._nameToLevel.get(upper, -1)
    if level < 0:
        raise ConfigError(f"{name} must be a valid log level, got {value!r}")
    return level


def resolve_log_level(
    cli_value: str | None, config_level: int | None, env_level: int
) -> int:
    if cli_value is not None:
        return parse_log_level(cli_value, name="log_level")
    if config_level is not None:
        return config_level
    return env_level


def _get_env_value(name: str) -> str | None:
    return _clean_env_value(os.getenv(name) or os.getenv(name.upper()))


def _clean_env_value(value: str | None) -> str | None:
    if value is None:
        return None
    cleaned = value.strip()
    return cleaned or None


def _value_or_default(raw: dict[str, Any], key: str, default: Any) -> Any:
    value = raw.get(key, default)
    return default if value is None else value


def _log_unknown_config_keys(raw: dict[str, Any]) -> None:
    keys = sorted(str(key) for key in raw.keys() if key not in KNOWN_KEYS)
    if keys:
        logging.getLogger("fdgnn").warning("unknown_config_keys", extra={"keys": keys})


def _as_list(value: Any, name: str) -> list[Any]:
    if isinstance(value, (list, tuple)):
        if not value:
            raise ConfigError(f"{name} must not be empty")
        return list(value)
    raise ConfigError(f"{name} must be a list")


def _parse_range_value(value: Any, name: str) -> tuple[float, float]:
    items = _as_list(value, name)
    if len(items) != 2:
        raise ConfigError(f"{name} must be a [low, high] pair")
    return _parse_float_value(items[0], name), _parse_float_value(items[1], name)


def _parse_log_level_value(value: Any, name: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a valid log level")
    if isinstance(value, int):
        if value < 0:
            raise ConfigError(f"{name} must be a valid log level")
        return value
    if isinstance(value, str):
        return parse_log_level(value, name=name)
    raise ConfigError(f"{name} must be a string or integer")


def _parse_int_value(value: Any, name: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str) and value.strip():
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"{name} must be an integer") from exc
    raise ConfigError(f"{name} must be an integer")


def _parse_float_value(value: Any, name: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a float")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str) and value.strip():
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"{name} must be a float") from exc
    raise ConfigError(f"{name} must be a float")


def _parse_bool_value_yaml(value: Any, name: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        cleaned = value.strip().lower()
        if cleaned in {"1", "true", "yes", "y", "on"}:
            return True
        if cleaned in {"0", "false", "no", "n", "off"}:
            return False
    raise ConfigError(f"{name} must be a boolean")
