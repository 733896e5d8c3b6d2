"""
INI 运行配置的读取与校验
"""
import configparser
import hashlib
import logging
from pathlib import Path
from typing import Iterable, Optional, Union

from pydantic import ValidationError

from app.core.exceptions import ConfigError
from app.models.run_config import RunConfig, SweepSpec

logger = logging.getLogger(__name__)


def format_validation_error(error: ValidationError) -> str:
    """把 pydantic 错误整理成 "init.total_mass must be positive" 的形式"""
    messages = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"])
        msg = item["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        messages.append(f"{loc} {msg}" if loc else msg)
    return "; ".join(messages)


def _parse_error(path: Path, error: configparser.Error) -> ConfigError:
    lineno = getattr(error, "lineno", None)
    if lineno is None and isinstance(error, configparser.ParsingError) and error.errors:
        lineno = error.errors[0][0]
    where = f"{path}:{lineno}" if lineno is not None else str(path)
    return ConfigError(f"{where}: {error.message if hasattr(error, 'message') else error}")


def parse_config_text(text: str, source: Union[str, Path] = "<string>") -> RunConfig:
    """解析 INI 文本; 节名对应 RunConfig 的分节"""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(source))
    except configparser.Error as e:
        raise _parse_error(Path(str(source)), e) from e

    data = {section: dict(parser.items(section)) for section in parser.sections()}
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e)) from e


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    读取并校验运行配置

    Raises:
        ConfigError: 文件不存在, 语法错误 (带行号) 或校验失败 (带字段名)
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    config = parse_config_text(path.read_text(encoding="utf-8"), source=path)
    logger.info(f"Loaded config {path} (hash {config_hash(config)[:12]})")
    return config


def load_sweep_spec(path: Union[str, Path], multipliers: Iterable[float],
                    output_root: Optional[str] = None) -> SweepSpec:
    base = load_config(path)
    payload = {"base": base, "mass_multipliers": list(multipliers)}
    if output_root is not None:
        payload["output_root"] = output_root
    try:
        return SweepSpec.model_validate(payload)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e)) from e


def config_hash(config: RunConfig) -> str:
    """配置的 SHA-256 (规范化 JSON, 不含输出位置)"""
    return hashlib.sha256(config.model_dump_json(exclude={"output"}).encode("utf-8")).hexdigest()
