import json
from pathlib import Path
from typing import Any, Dict, Union

from pydantic import ValidationError

from src.core.models import DeviceConfig, RunConfig


def error_messages(e: ValidationError):
    return [
        f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
    ]


def _read_json(source: Union[str, Path, Dict[str, Any]]) -> Dict[str, Any]:
    if isinstance(source, dict):
        return source
    with open(source, "r", encoding="utf-8") as f:
        return json.load(f)


def resolve_relative(base_file: Union[str, Path, None], target: Union[str, Path]) -> Path:
    """Resolve ``target`` against the directory of ``base_file``, then the working directory"""
    target = Path(target)
    if target.is_absolute() or base_file is None:
        return target
    candidate = Path(base_file).parent / target
    return candidate if candidate.exists() else target


def validate_device_config(source: Union[str, Path, Dict[str, Any]]) -> Dict[str, Any]:
    """Validate a device document against the DeviceConfig model"""
    try:
        device = DeviceConfig(**_read_json(source))
        return {"valid": True, "kind": "device", "config": device.model_dump(), "errors": []}
    except ValidationError as e:
        return {"valid": False, "kind": "device", "config": None, "errors": error_messages(e)}
    except (OSError, json.JSONDecodeError, TypeError) as e:
        return {"valid": False, "kind": "device", "config": None, "errors": [str(e)]}


def validate_run_config(source: Union[str, Path, Dict[str, Any]]) -> Dict[str, Any]:
    """Validate a run document, and the device file it points to"""
    try:
        raw = _read_json(source)
        run = RunConfig(**raw)
    except ValidationError as e:
        return {"valid": False, "kind": "run", "config": None, "errors": error_messages(e)}
    except (OSError, json.JSONDecodeError, TypeError) as e:
        return {"valid": False, "kind": "run", "config": None, "errors": [str(e)]}

    base = None if isinstance(source, dict) else source
    device = validate_device_config(resolve_relative(base, run.device))
    return {
        "valid": device["valid"],
        "kind": "run",
        "config": run.model_dump(mode="json"),
        "errors": [f"device: {msg}" for msg in device["errors"]],
    }


def validate_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Dispatch on content: run configs carry a 'models' list"""
    try:
        raw = _read_json(path)
    except (OSError, json.JSONDecodeError) as e:
        return {"valid": False, "kind": "unknown", "config": None, "errors": [str(e)]}
    if isinstance(raw, dict) and "models" in raw:
        return validate_run_config(path)
    return validate_device_config(path)
