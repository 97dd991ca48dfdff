import csv
import io
import json
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from .params import AntennaConfig, ConfigError, IcConfig

CSV_DIGITS = 12


def rational(value: Fraction) -> Dict[str, Any]:
    value = Fraction(value)
    return {"num": value.numerator, "den": value.denominator, "float": float(value)}


def to_jsonable(obj: Any) -> Any:
    # Fractions become {num, den, float}; numpy scalars and arrays become lists
    if isinstance(obj, Fraction):
        return rational(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2) + "\n"


def _field(document: Dict, name: str, where: str):
    if name not in document:
        raise ConfigError(f"{where}: missing field '{name}'")
    return document[name]


def _users(document: Any) -> List[Dict]:
    if not isinstance(document, dict):
        raise ConfigError("config must be a JSON object")
    users = _field(document, "users", "config")
    if not isinstance(users, list) or not all(isinstance(u, dict) for u in users):
        raise ConfigError("users: expected a list of objects")
    return users


def config_from_dict(document: Any) -> AntennaConfig:
    users = _users(document)
    pairs = [(_field(u, "N", f"users[{k}]"), _field(u, "L", f"users[{k}]")) for k, u in enumerate(users)]
    return AntennaConfig.from_pairs(_field(document, "M", "config"), pairs)


def ic_config_from_dict(document: Any) -> IcConfig:
    users = _users(document)
    return IcConfig.from_triples(
        (_field(u, "M", f"users[{k}]"), _field(u, "N", f"users[{k}]"), _field(u, "L", f"users[{k}]"))
        for k, u in enumerate(users)
    )


def load_config_text(text: str) -> AntennaConfig:
    """Parse a broadcast config; json.JSONDecodeError propagates for malformed text"""
    return config_from_dict(json.loads(text))


def load_ic_config_text(text: str) -> IcConfig:
    return ic_config_from_dict(json.loads(text))


def config_to_dict(config: AntennaConfig) -> Dict:
    return {"M": config.M, "users": [{"N": u.N, "L": u.L} for u in config.users]}


def format_cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.{CSV_DIGITS}g}"
    return str(value)


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()
