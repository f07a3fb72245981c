"""JSON scenario configuration.

Unknown keys are rejected. Complex matrix entries may be JSON numbers or
strings accepted by :func:`complex` (``"0.3+0.1j"``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .core import CUSTOM_SAMPLED, HARMONIC, DriveSpec, SystemSpec, TimeGrid, validate_system
from .dyson import MODES
from .errors import ConfigParse, IoFailure, ValidationError

BOTH = "both"
MIN_STEPS = 100
FORMATS = ("csv", "json")

TOP_KEYS = {
    "hbar", "h0", "rho0", "rho0_basis", "rho0_basis_vectors", "energy_ramp", "drive",
    "grid", "orders", "mode", "temperature", "oracle", "outputs", "formats", "precision",
    "omegas",
}
DRIVE_KEYS = {"kind", "coupling", "omega", "samples"}
GRID_KEYS = {"t_max", "steps"}

ORDER_OF = {
    "W0": 0, "Q0": 0, "C0": 0, "U0": 0,
    "W1": 1, "Q1": 1, "C1": 1, "q1": 1, "w1": 1, "U1": 1, "W_eff1": 1, "Q_eff1": 1,
    "W2": 2, "Q2": 2, "C2": 2, "q2": 2, "w2": 2, "U2": 2, "W_eff2": 2, "Q_eff2": 2,
}
LEDGER_COLUMNS = ("t", "W0", "W1", "W2", "Q2", "C1", "C2", "q1", "w1", "q2", "w2",
                  "U0", "U1", "U2", "U_sum", "W_eff1", "Q_eff1", "W_eff2", "Q_eff2")
ORACLE_COLUMNS = ("U_exact", "W_alicki", "Q_alicki", "W_bertulio", "Q_bertulio",
                  "C_bertulio", "W_entropy", "Q_entropy", "S")
FLUX_COLUMNS = ("phi_pop", "phi_coh")
EXTRA_COLUMNS = ("Q0", "Q1", "C0")


@dataclass(frozen=True)
class ScenarioConfig:
    system: SystemSpec
    orders: Tuple[int, ...] = (0, 1, 2)
    mode: str = MODES[0]
    temperature: Optional[float] = None
    oracle: bool = False
    outputs: Tuple[str, ...] = ()
    formats: Tuple[str, ...] = ("csv",)
    precision: int = 17
    omegas: Tuple[float, ...] = ()

    @property
    def modes(self):
        return MODES if self.mode == BOTH else (self.mode,)

    def with_mode(self, mode):
        cfg = dict(self.__dict__)
        cfg["mode"] = _mode(mode, "--mode")
        return ScenarioConfig(**cfg)


def _complex(x, key):
    if isinstance(x, bool):
        raise ConfigParse("booleans are not numbers", key=key)
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, str):
        try:
            return complex(x.replace(" ", ""))
        except ValueError:
            raise ConfigParse(f"cannot parse {x!r} as a complex number", key=key) from None
    raise ConfigParse(f"expected a number, got {type(x).__name__}", key=key)


def _real(x, key):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigParse(f"expected a real number, got {x!r}", key=key)
    return float(x)


def _array(x, key, ndim=None):
    if not isinstance(x, list):
        raise ConfigParse("expected a list", key=key)
    rows = []
    for i, row in enumerate(x):
        if isinstance(row, list):
            rows.append([_complex(v, f"{key}/{i}/{j}") for j, v in enumerate(row)])
        else:
            rows.append(_complex(row, f"{key}/{i}"))
    try:
        arr = np.array(rows, dtype=complex)
    except ValueError:
        raise ConfigParse("ragged array", key=key) from None
    if ndim is not None and arr.ndim != ndim:
        raise ConfigParse(f"expected a {ndim}-d array", key=key)
    if arr.ndim == 2 and arr.shape[0] != arr.shape[1]:
        raise ConfigParse(f"matrix must be square, got {arr.shape}", key=key)
    if not np.any(arr.imag):
        arr = arr.real
    return arr


def _check_keys(obj, allowed, prefix):
    if not isinstance(obj, dict):
        raise ConfigParse("expected an object", key=prefix or "/")
    for k in obj:
        if k not in allowed:
            path = f"{prefix}/{k}" if prefix else k
            raise ConfigParse("unknown key", key=path)


def _require(obj, key, prefix=""):
    if key not in obj:
        raise ConfigParse("missing required key", key=f"{prefix}/{key}" if prefix else key)
    return obj[key]


def _mode(m, key="mode"):
    if m not in MODES + (BOTH,):
        raise ConfigParse(f"mode must be one of {MODES + (BOTH,)}, got {m!r}", key=key)
    return m


def _drive(d):
    _check_keys(d, DRIVE_KEYS, "drive")
    kind = _require(d, "kind", "drive")
    if kind == HARMONIC:
        for k in ("samples",):
            if k in d:
                raise ConfigParse("not allowed for a harmonic drive", key=f"drive/{k}")
        coupling = _array(_require(d, "coupling", "drive"), "drive/coupling", ndim=2)
        omega = _real(_require(d, "omega", "drive"), "drive/omega")
        return DriveSpec.harmonic(coupling, omega)
    if kind == CUSTOM_SAMPLED:
        for k in ("coupling", "omega"):
            if k in d:
                raise ConfigParse("not allowed for a custom_sampled drive", key=f"drive/{k}")
        samples = _require(d, "samples", "drive")
        if not isinstance(samples, list) or len(samples) < 2:
            raise ConfigParse("need at least two samples", key="drive/samples")
        times, mats = [], []
        for i, s in enumerate(samples):
            _check_keys(s, {"t", "matrix"}, f"drive/samples/{i}")
            times.append(_real(_require(s, "t", f"drive/samples/{i}"), f"drive/samples/{i}/t"))
            mats.append(_array(_require(s, "matrix", f"drive/samples/{i}"),
                               f"drive/samples/{i}/matrix", ndim=2))
        if len({m.shape for m in mats}) != 1:
            raise ConfigParse("sample matrices differ in shape", key="drive/samples")
        return DriveSpec.custom(np.array(times), np.array(mats))
    raise ConfigParse(f"unknown drive kind {kind!r}", key="drive/kind")


def _grid(g):
    _check_keys(g, GRID_KEYS, "grid")
    t_max = _real(_require(g, "t_max", "grid"), "grid/t_max")
    steps = _require(g, "steps", "grid")
    if isinstance(steps, bool) or not isinstance(steps, int):
        raise ConfigParse("steps must be an integer", key="grid/steps")
    if steps < MIN_STEPS:
        raise ValidationError(f"steps must be >= {MIN_STEPS}", key="grid/steps")
    if not t_max > 0:
        raise ValidationError("t_max must be positive", key="grid/t_max")
    return TimeGrid(t_max, steps)


def _outputs(raw, orders, oracle, temperature):
    if raw is None:
        cols = [c for c in LEDGER_COLUMNS if c == "t" or c == "U_sum" or ORDER_OF[c] in orders]
        if oracle:
            cols += ORACLE_COLUMNS
            if temperature is not None:
                cols += FLUX_COLUMNS
        return tuple(cols)
    if not isinstance(raw, list) or not all(isinstance(c, str) for c in raw):
        raise ConfigParse("outputs must be a list of column names", key="outputs")
    known = set(LEDGER_COLUMNS) | set(ORACLE_COLUMNS) | set(FLUX_COLUMNS) | set(EXTRA_COLUMNS)
    seen = set()
    for c in raw:
        key = f"outputs/{c}"
        if c not in known:
            raise ValidationError("unknown column", key=key)
        if c in seen:
            raise ValidationError("duplicate column", key=key)
        seen.add(c)
        if c in ORDER_OF and ORDER_OF[c] not in orders:
            raise ValidationError(f"needs order {ORDER_OF[c]}, requested {list(orders)}", key=key)
        if c in ORACLE_COLUMNS + FLUX_COLUMNS and not oracle:
            raise ValidationError("needs \"oracle\": true", key=key)
        if c in FLUX_COLUMNS and temperature is None:
            raise ValidationError("needs a temperature", key=key)
    cols = list(raw)
    if "t" not in cols:
        cols.insert(0, "t")
    return tuple(cols)


def parse_config(doc):
    """Build a :class:`ScenarioConfig` from a decoded JSON object."""
    _check_keys(doc, TOP_KEYS, "")
    hbar = _real(doc.get("hbar", 1.0), "hbar")
    h0 = _array(_require(doc, "h0"), "h0")
    rho0 = _array(_require(doc, "rho0"), "rho0")
    basis = doc.get("rho0_basis", "energy")
    vectors = doc.get("rho0_basis_vectors")
    if vectors is not None:
        vectors = _array(vectors, "rho0_basis_vectors", ndim=2)
    ramp = doc.get("energy_ramp")
    if ramp is not None:
        ramp = _array(ramp, "energy_ramp", ndim=1)
        if np.iscomplexobj(ramp):
            raise ConfigParse("ramp must be real", key="energy_ramp")
    system = SystemSpec(h0=h0, rho0=rho0, drive=_drive(_require(doc, "drive")),
                        grid=_grid(_require(doc, "grid")), hbar=hbar, rho0_basis=basis,
                        rho0_basis_vectors=vectors, energy_ramp=ramp)
    validate_system(system)  # reject physics errors at load time

    orders = doc.get("orders", [0, 1, 2])
    if (not isinstance(orders, list) or not orders
            or any(isinstance(o, bool) or o not in (0, 1, 2) for o in orders)):
        raise ConfigParse("orders must be a non-empty subset of [0, 1, 2]", key="orders")
    orders = tuple(sorted(set(orders)))
    mode = _mode(doc.get("mode", MODES[0]))
    temperature = doc.get("temperature")
    if temperature is not None:
        temperature = _real(temperature, "temperature")
        if not temperature > 0:
            raise ValidationError("temperature must be positive", key="temperature")
    oracle = doc.get("oracle", False)
    if not isinstance(oracle, bool):
        raise ConfigParse("oracle must be true or false", key="oracle")
    formats = doc.get("formats", ["csv"])
    if not isinstance(formats, list) or not formats or any(f not in FORMATS for f in formats):
        raise ConfigParse(f"formats must be a non-empty subset of {list(FORMATS)}", key="formats")
    precision = doc.get("precision", 17)
    if isinstance(precision, bool) or not isinstance(precision, int) or not 1 <= precision <= 17:
        raise ConfigParse("precision must be an integer in [1, 17]", key="precision")
    omegas = doc.get("omegas", [])
    if not isinstance(omegas, list):
        raise ConfigParse("omegas must be a list", key="omegas")
    omegas = tuple(_real(w, f"omegas/{i}") for i, w in enumerate(omegas))
    return ScenarioConfig(
        system=system, orders=orders, mode=mode, temperature=temperature, oracle=oracle,
        outputs=_outputs(doc.get("outputs"), orders, oracle, temperature),
        formats=tuple(dict.fromkeys(formats)), precision=precision, omegas=omegas,
    )


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read config: {exc.strerror}", key=str(path)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                          key=str(path)) from None
    return parse_config(doc)
