"""Flat key-value configuration files for the command line driver.

Format: one `section.key = value` per line, `#` starts a comment.
Unknown keys are rejected.  Example:

    mesh.n = 32
    fem.degree = 2
    train.grid_n1 = 20
    train.grid_n2 = 20
    train.spacing = log
    test.count = 225
    test.seed = 42
    ser.r = 1            # integer, or "standard"
    ser.rebuild_wn = false
    ser.n_max = 20
    eim.m_max = 25
    eim.saturation_tol = 1e-13
    newton.abs_tol = 1e-10
    newton.rel_tol = 1e-10
    newton.max_iter = 50
    output.dir = out
"""

from dataclasses import asdict, dataclass

from .benchmark import SampleSet
from .nonlinear import NewtonConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunSettings:
    mesh_n: int = 32
    degree: int = 2
    train_grid_n1: int = 20
    train_grid_n2: int = 20
    train_spacing: str = "log"
    test_count: int = 225
    test_seed: int = 42
    r: object = 1
    rebuild_wn: bool = False
    n_max: int = 20
    m_max: int = 25
    saturation_tol: float = 1e-13
    newton_abs_tol: float = 1e-10
    newton_rel_tol: float = 1e-10
    newton_max_iter: int = 50
    output_dir: str = "out"

    def newton(self):
        return NewtonConfig(abs_tol=self.newton_abs_tol,
                            rel_tol=self.newton_rel_tol,
                            max_iter=self.newton_max_iter)

    def train_set(self):
        return SampleSet.log_grid(self.train_grid_n1, self.train_grid_n2)

    def test_set(self):
        return SampleSet.log_random(self.test_count, self.test_seed)

    def fingerprint_dict(self):
        d = asdict(self)
        d.pop("output_dir")
        return d


def _parse_bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_r(text):
    if text == "standard":
        return "standard"
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"ser.r must be a positive integer or 'standard', got {text!r}")
    if value < 1:
        raise ConfigError(f"ser.r must be >= 1, got {value}")
    return value


_KEYS = {
    "mesh.n": ("mesh_n", int),
    "fem.degree": ("degree", int),
    "train.grid_n1": ("train_grid_n1", int),
    "train.grid_n2": ("train_grid_n2", int),
    "train.spacing": ("train_spacing", str),
    "test.count": ("test_count", int),
    "test.seed": ("test_seed", int),
    "ser.r": ("r", _parse_r),
    "ser.rebuild_wn": ("rebuild_wn", _parse_bool),
    "ser.n_max": ("n_max", int),
    "eim.m_max": ("m_max", int),
    "eim.saturation_tol": ("saturation_tol", float),
    "newton.abs_tol": ("newton_abs_tol", float),
    "newton.rel_tol": ("newton_rel_tol", float),
    "newton.max_iter": ("newton_max_iter", int),
    "output.dir": ("output_dir", str),
}


def parse_config(text):
    settings = RunSettings()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, parse = _KEYS[key]
        try:
            setattr(settings, attr, parse(value))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}")
    _validate(settings)
    return settings


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _validate(s):
    if s.mesh_n < 1:
        raise ConfigError("mesh.n must be >= 1")
    if s.degree not in (1, 2, 3):
        raise ConfigError("fem.degree must be 1, 2 or 3")
    if s.train_spacing != "log":
        raise ConfigError("train.spacing only supports 'log'")
    if s.train_grid_n1 < 1 or s.train_grid_n2 < 1:
        raise ConfigError("training grid sizes must be >= 1")
    if s.test_count < 1:
        raise ConfigError("test.count must be >= 1")
    if s.n_max < 1 or s.m_max < 1:
        raise ConfigError("ser.n_max and eim.m_max must be >= 1")
    if s.newton_max_iter < 1:
        raise ConfigError("newton.max_iter must be >= 1")
    if s.newton_abs_tol <= 0 or s.newton_rel_tol <= 0:
        raise ConfigError("newton tolerances must be positive")
