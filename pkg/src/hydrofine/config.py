"""Flat ``key = value`` run configuration with dotted namespaces.

The file format is what :mod:`configparser` reads from a single implicit
section: one ``key = value`` per line, ``#``/``;`` comments. ``--set`` flags use
the same ``key=value`` syntax and override file values. Every key is typed and
validated here; unknown keys are rejected by name.
"""
import configparser
from dataclasses import dataclass

import numpy as np

from .model import DEFAULT_M_NUCLEUS


class ConfigError(ValueError):
    def __init__(self, key, msg):
        super().__init__(f"{key}: {msg}")
        self.key = key


def _float(key, raw):
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {raw!r}") from None
    if not np.isfinite(v):
        raise ConfigError(key, f"expected a finite number, got {raw!r}")
    return v


def _int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {raw!r}") from None


def _bool(key, raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {raw!r}")


def _floats(key, raw):
    parts = [x for x in raw.replace(";", ",").split(",") if x.strip()]
    if not parts:
        raise ConfigError(key, "expected a comma-separated list of numbers")
    return tuple(_float(key, x) for x in parts)


def _vec3(key, raw):
    v = _floats(key, raw)
    if len(v) != 3:
        raise ConfigError(key, f"expected three comma-separated components, got {raw!r}")
    return v


def _opt_float(key, raw):
    return None if raw.strip().lower() in ("", "auto", "none") else _float(key, raw)


def _str(key, raw):
    return raw.strip()


def _names(key, raw):
    return tuple(x.strip() for x in raw.split(",") if x.strip())


def _positive(key, v):
    if not v > 0:
        raise ConfigError(key, f"must be positive, got {v}")


def _nonneg(key, v):
    if not v >= 0:
        raise ConfigError(key, f"must be non-negative, got {v}")


def _nonneg_all(key, v):
    for x in v:
        _nonneg(key, x)


def _pos_int(key, v):
    if v < 1:
        raise ConfigError(key, f"must be a positive integer, got {v}")


def _one_of(*choices):
    def check(key, v):
        if v not in choices:
            raise ConfigError(key, f"must be one of {', '.join(map(str, choices))}; got {v!r}")
    return check


def _opt_positive(key, v):
    if v is not None:
        _positive(key, v)


def _tau(key, v):
    if not 0 < v < 0.25:
        raise ConfigError(key, f"must lie in (0, 1/4), got {v}")


SWEEP_VARIABLES = ("g", "rho", "p", "grid")
SWEEP_COMMANDS = ("spectrum", "gamma", "c0", "feshbach")


@dataclass(frozen=True)
class Key:
    parse: object
    default: str
    check: object = None
    doc: str = ""


KEYS = {
    "physics.m_el": Key(_float, "1.0", _positive, "electron mass"),
    "physics.m_n": Key(_float, str(DEFAULT_M_NUCLEUS), _positive, "nucleus mass"),
    "physics.g": Key(_float, "0.02", _nonneg, "coupling constant"),
    "physics.lambda_uv": Key(_float, "1.0", _positive, "ultraviolet cutoff Λ"),
    "physics.p_total": Key(_vec3, "0,0,0", None, "total momentum P (three components)"),
    "physics.p_ceiling": Key(_opt_float, "auto", _opt_positive, "ceiling on |P|; auto = 0.1 (m_el + m_n)"),
    "grid.n_radial": Key(_int, "6", _pos_int, "Gauss-Legendre nodes in |k|"),
    "grid.n_costheta": Key(_int, "8", _pos_int, "Gauss-Legendre nodes in cos θ"),
    "grid.n_phi": Key(_int, "8", _pos_int, "uniform nodes in φ"),
    "fock.n_max": Key(_int, "1", _one_of(1, 2), "photon-number cap"),
    "fock.include_quadratic": Key(_bool, "false", None, "add the normal-ordered A² terms"),
    "fock.n_eigs": Key(_int, "4", _pos_int, "number of low-lying eigenpairs"),
    "fock.form_factors": Key(_bool, "true", None, "keep hydrogen form factors in the vertex"),
    "fock.spin": Key(_bool, "true", None, "keep the spin (σ·B) couplings"),
    "fock.dense_threshold": Key(_int, "3000", _pos_int, "largest dimension solved densely"),
    "gamma.form_factors": Key(_bool, "true", None, "form factors in the continuum Γ"),
    "gamma.rtol": Key(_float, "1e-10", _positive, "relative tolerance of the Γ quadrature"),
    "feshbach.tau": Key(_float, "0.1", _tau, "exponent in ρ = g^(2-2τ)"),
    "feshbach.rho": Key(_opt_float, "auto", _opt_positive, "infrared scale override; auto = g^(2-2τ)"),
    "feshbach.epsilon": Key(_floats, "0.01,0.001", _nonneg_all, "spectral shifts ε"),
    "feshbach.series_cap": Key(_int, "40", _pos_int, "maximum Neumann terms"),
    "feshbach.regime_factor": Key(_float, "10", _positive, "enforce ρ >= factor·g²"),
    "sweep.variable": Key(_str, "g", _one_of(*SWEEP_VARIABLES), "swept quantity"),
    "sweep.values": Key(_str, "0.02,0.04,0.08", None,
                        "sweep list; for grid use n_radial:n_costheta:n_phi entries"),
    "sweep.command": Key(_str, "spectrum", _one_of(*SWEEP_COMMANDS), "command run per sweep point"),
    "check.items": Key(_names, "", None, "subset of checks to run; empty = all"),
    "run.workers": Key(_int, "1", _pos_int, "concurrent sweep points"),
}


def _parse_text(text, origin):
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string("[run-config]\n" + text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(origin, f"cannot parse: {exc}") from None
    return dict(cp["run-config"])


def parse_overrides(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(item, "override must have the form key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def resolve(raw):
    """Typed, validated values for every known key (defaults filled in)."""
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    values = {}
    for key, spec in KEYS.items():
        text = raw.get(key, spec.default)
        v = spec.parse(key, text)
        if spec.check is not None:
            spec.check(key, v)
        values[key] = v
    _parse_sweep_values(values)
    return values


def _parse_sweep_values(values):
    key = "sweep.values"
    text = values[key]
    if values["sweep.variable"] == "grid":
        out = []
        for entry in _names(key, text):
            parts = entry.split(":")
            if len(parts) != 3:
                raise ConfigError(key, f"grid entries look like 6:8:8, got {entry!r}")
            triple = tuple(_int(key, x) for x in parts)
            for x in triple:
                _pos_int(key, x)
            out.append(triple)
        if not out:
            raise ConfigError(key, "empty sweep")
        values[key] = tuple(out)
    else:
        values[key] = _floats(key, text)
        _nonneg_all(key, values[key])


def load_config(path=None, overrides=None):
    """Read ``path`` (optional), apply ``--set`` overrides, validate."""
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(str(path), f"cannot read config file: {exc.strerror}") from None
        raw.update(_parse_text(text, str(path)))
    raw.update(parse_overrides(overrides))
    return resolve(raw)


def snapshot(values):
    """JSON-friendly copy of the resolved configuration."""
    out = {}
    for k, v in values.items():
        if isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        out[k] = v
    return out


def physical_params(values, **changes):
    from .model import PhysicalParams

    kw = dict(m_el=values["physics.m_el"], m_n=values["physics.m_n"], g=values["physics.g"],
              lambda_uv=values["physics.lambda_uv"], p_total=values["physics.p_total"],
              p_ceiling=values["physics.p_ceiling"])
    kw.update(changes)
    try:
        return PhysicalParams(**kw)
    except ValueError as exc:
        raise ConfigError("physics", str(exc)) from None


def grid_spec(values):
    from .grid import GridSpec

    return GridSpec(values["grid.n_radial"], values["grid.n_costheta"], values["grid.n_phi"])
