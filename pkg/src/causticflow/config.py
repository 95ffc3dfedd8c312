"""Declarative run configuration: flat key=value lines under [section] headers.

Comments start with '#'.  Unknown sections or keys are rejected with the
offending name so config typos never silently fall back to defaults; the
fully resolved configuration (defaults included) is written into every run
manifest for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import (GeneratingFunction, NORMAL_FORM_KINDS, Poly2,
                    QuadraticPerturbation, normal_form, parse_poly, perturb)
from .geometry import Window

__all__ = ["ConfigError", "RunConfig", "parse_config", "DEFAULTS"]

MAX_USER_DEGREE = 8


class ConfigError(ValueError):
    pass


def _parse_float(s):
    return float(s)


def _parse_int(s):
    return int(s)


def _parse_pair(s):
    vals = [float(v) for v in s.split()]
    if len(vals) == 1:
        return (vals[0], vals[0])
    if len(vals) != 2:
        raise ConfigError(f"expected one or two numbers, got {s!r}")
    return tuple(vals)


def _parse_floats(s):
    return tuple(float(v) for v in s.split())


def _parse_str(s):
    return s


# (section, key) -> (parser, default); None default means "unset"
DEFAULTS = {
    ("function", "form"): (_parse_str, "elliptic-umbilic"),
    ("function", "poly"): (_parse_str, None),
    ("function", "t"): (_parse_float, None),
    ("function", "quadratic"): (_parse_floats, None),  # eps a b c
    ("function", "extra"): (_parse_str, None),
    ("fiber_window", "center"): (_parse_pair, (0.0, 0.0)),
    ("fiber_window", "half_width"): (_parse_pair, None),  # auto when unset
    ("fiber_window", "resolution"): (_parse_int, 256),
    ("base_window", "center"): (_parse_pair, (-0.75, 0.0)),
    ("base_window", "half_width"): (_parse_pair, (1.5, 1.5)),
    ("base_window", "resolution"): (_parse_int, 64),
    ("portrait", "x"): (_parse_pair, None),
    ("diagram", "grid"): (_parse_int, 64),
    ("diagram", "jitter"): (_parse_float, 0.2),
    ("slices", "t_values"): (_parse_floats, (1.0, 0.5, 0.25, -0.25, -0.5, -1.0, 0.0)),
    ("slices", "resolution"): (_parse_int, 256),
    ("tolerances", "tol_locus"): (_parse_float, 1e-9),
    ("tolerances", "tol_root"): (_parse_float, 1e-10),
    ("tolerances", "tol_degenerate"): (_parse_float, 1e-7),
    ("tolerances", "tol_capture"): (_parse_float, 1e-4),
    ("tolerances", "tol_align_deg"): (_parse_float, 5.0),
    ("tolerances", "tol_psi"): (_parse_float, 1e-8),
    ("tolerances", "caustic_standoff"): (_parse_float, 1e-3),
}


@dataclass
class RunConfig:
    values: dict

    def get(self, section, key):
        return self.values[(section, key)]

    def resolved(self):
        """Nested dict of every setting, defaults included, for the manifest."""
        out = {}
        for (section, key), v in sorted(self.values.items()):
            out.setdefault(section, {})[key] = v
        return out

    def function(self) -> GeneratingFunction:
        """Build the generating function the config describes."""
        poly_text = self.get("function", "poly")
        if poly_text is not None:
            p = parse_poly(poly_text)
            if p.total_degree > MAX_USER_DEGREE:
                raise ConfigError(
                    f"polynomial degree {p.total_degree} exceeds the supported maximum "
                    f"{MAX_USER_DEGREE}")
            f = GeneratingFunction(p, "custom")
        else:
            form = self.get("function", "form")
            if form not in NORMAL_FORM_KINDS:
                raise ConfigError(f"unknown normal form {form!r}")
            f = normal_form(form)
        t = self.get("function", "t")
        if t is not None and t != 0.0:
            f = perturb(f, Poly2(((2, 0, float(t)),))).with_label(f"{f.label}[t={t:g}]")
        quad = self.get("function", "quadratic")
        if quad is not None:
            if len(quad) != 4:
                raise ConfigError("quadratic expects four numbers: eps a b c")
            f = perturb(f, QuadraticPerturbation(*quad))
        extra = self.get("function", "extra")
        if extra is not None:
            p = parse_poly(extra)
            if p.total_degree > MAX_USER_DEGREE:
                raise ConfigError(
                    f"extra polynomial degree {p.total_degree} exceeds {MAX_USER_DEGREE}")
            f = perturb(f, p)
        return f

    def fiber_window(self, auto_from=None) -> Window:
        hw = self.get("fiber_window", "half_width")
        if hw is None:
            if auto_from is not None:
                from .bifurcation import default_fiber_window
                return default_fiber_window(auto_from,
                                            self.get("fiber_window", "resolution"))
            hw = (3.0, 3.0)
        res = self.get("fiber_window", "resolution")
        return Window(self.get("fiber_window", "center"), hw, (res, res))

    def base_window(self) -> Window:
        res = self.get("base_window", "resolution")
        return Window(self.get("base_window", "center"),
                      self.get("base_window", "half_width"), (res, res))


def parse_config(text: str) -> RunConfig:
    values = {k: default for k, (_, default) in DEFAULTS.items()}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not any(s == section for s, _ in DEFAULTS):
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside of any [section]")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if (section, key) not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in section [{section}]")
        parser, _ = DEFAULTS[(section, key)]
        try:
            values[(section, key)] = parser(val)
        except ConfigError:
            raise
        except Exception as e:
            raise ConfigError(f"line {lineno}: cannot parse {key} = {val!r}: {e}") from e
    return RunConfig(values)
