"""Bivariate polynomial generating functions and their formal calculus.

A generating function f(y1, y2) induces the planar Lagrangian map
y -> (df/dy1, df/dy2); everything downstream (caustics, gradient flows,
bifurcation diagrams) is driven by exact formal derivatives of f.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

__all__ = [
    "Poly2",
    "GeneratingFunction",
    "QuadraticPerturbation",
    "FamilySpec",
    "NORMAL_FORM_KINDS",
    "normal_form",
    "perturb",
    "elliptic_umbilic_versal",
    "parse_poly",
    "format_poly",
]

_COEFF_EPS = 0.0  # coefficients are kept exactly; only true zeros are dropped


def _normalize_terms(terms):
    """Merge duplicate degree pairs, drop zero coefficients, sort by degree."""
    acc: dict[tuple[int, int], float] = {}
    for i, j, c in terms:
        i, j, c = int(i), int(j), float(c)
        if i < 0 or j < 0:
            raise ValueError(f"negative exponent in term y1^{i}*y2^{j}")
        acc[(i, j)] = acc.get((i, j), 0.0) + c
    out = tuple(
        (i, j, c)
        for (i, j), c in sorted(acc.items(), key=lambda kv: (kv[0][0] + kv[0][1], kv[0][0], kv[0][1]))
        if c != _COEFF_EPS
    )
    return out


@dataclass(frozen=True)
class Poly2:
    """Polynomial in (y1, y2) stored as a sorted tuple of (i, j, coeff) terms."""

    terms: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", _normalize_terms(self.terms))

    @cached_property
    def _arrays(self):
        if not self.terms:
            return (np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0))
        ii, jj, cc = zip(*self.terms)
        return (np.asarray(ii, dtype=int), np.asarray(jj, dtype=int), np.asarray(cc))

    def eval(self, y1, y2):
        """Evaluate at scalars or broadcastable numpy arrays."""
        ii, jj, cc = self._arrays
        if ii.size == 0:
            return np.zeros(np.broadcast(y1, y2).shape) if np.ndim(y1) or np.ndim(y2) else 0.0
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        out = np.tensordot(cc, y1[None, ...] ** ii.reshape((-1,) + (1,) * y1.ndim)
                           * y2[None, ...] ** jj.reshape((-1,) + (1,) * y2.ndim), axes=(0, 0))
        return float(out) if out.ndim == 0 else out

    def __call__(self, y1, y2):
        return self.eval(y1, y2)

    def partial(self, var: int) -> "Poly2":
        """Formal partial derivative; var is 1 (y1) or 2 (y2)."""
        if var not in (1, 2):
            raise ValueError("var must be 1 or 2")
        new = []
        for i, j, c in self.terms:
            if var == 1 and i > 0:
                new.append((i - 1, j, c * i))
            elif var == 2 and j > 0:
                new.append((i, j - 1, c * j))
        return Poly2(tuple(new))

    def __add__(self, other):
        if isinstance(other, Poly2):
            return Poly2(self.terms + other.terms)
        if isinstance(other, (int, float)):
            return Poly2(self.terms + ((0, 0, float(other)),))
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Poly2(tuple((i, j, -c) for i, j, c in self.terms))

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly2) else -float(other))

    def scale(self, s: float) -> "Poly2":
        return Poly2(tuple((i, j, c * float(s)) for i, j, c in self.terms))

    def __mul__(self, s):
        if isinstance(s, (int, float)):
            return self.scale(s)
        return NotImplemented

    __rmul__ = __mul__

    @property
    def total_degree(self) -> int:
        return max((i + j for i, j, _ in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def __str__(self):
        return format_poly(self)


_TERM_RE = re.compile(
    r"^(?P<sign>[+-]?)\s*(?P<coeff>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)?"
    r"\s*(?P<v1>\*?\s*y1(\^(?P<e1>\d+))?)?\s*(?P<v2>\*?\s*y2(\^(?P<e2>\d+))?)?\s*$"
)


def _split_terms(s: str):
    """Split at top-level +/- signs, keeping exponent signs (1e-3) intact."""
    pieces, cur, prev = [], [], ""
    for ch in s:
        if ch in "+-" and prev not in ("", "e", "E", "*", "^", "+", "-"):
            pieces.append("".join(cur))
            cur = [ch]
        else:
            cur.append(ch)
        if not ch.isspace():
            prev = ch
    pieces.append("".join(cur))
    return [p.strip() for p in pieces if p.strip()]


def parse_poly(text: str) -> Poly2:
    """Parse a '+'-separated sum of monomials like ``0.5*y1^2*y2``.

    Lenient about whitespace, unary minus, omitted coefficients and
    omitted unit exponents; scientific-notation coefficients are allowed.
    """
    s = text.strip()
    if not s:
        raise ValueError("empty polynomial text")
    pieces = [p for p in _split_terms(s) if p not in ("", "+")]
    terms = []
    for piece in pieces:
        body = piece.lstrip("+").strip()
        m = _TERM_RE.match(body)
        if not m or (m.group("coeff") is None and m.group("v1") is None and m.group("v2") is None):
            raise ValueError(f"cannot parse monomial {piece!r} in {text!r}")
        sign = -1.0 if m.group("sign") == "-" else 1.0
        coeff = float(m.group("coeff")) if m.group("coeff") else 1.0
        e1 = int(m.group("e1")) if m.group("e1") else (1 if m.group("v1") else 0)
        e2 = int(m.group("e2")) if m.group("e2") else (1 if m.group("v2") else 0)
        terms.append((e1, e2, sign * coeff))
    return Poly2(tuple(terms))


def format_poly(p: Poly2) -> str:
    """Canonical text form: monomials ``c*y1^i*y2^j`` joined by ' + '."""
    if not p.terms:
        return "0"
    parts = []
    for i, j, c in p.terms:
        factors = [repr(c)]
        if i:
            factors.append("y1" if i == 1 else f"y1^{i}")
        if j:
            factors.append("y2" if j == 1 else f"y2^{j}")
        parts.append("*".join(factors))
    return " + ".join(parts)


@dataclass(frozen=True)
class GeneratingFunction:
    """A polynomial generating function together with a provenance label.

    The induced Lagrangian map is ``y -> (df/dy1, df/dy2)`` and its Jacobian
    is the Hessian of f, so the caustic is the image of {det Hf = 0}.
    """

    poly: Poly2
    label: str = "custom"

    @cached_property
    def _grad(self):
        return (self.poly.partial(1), self.poly.partial(2))

    @cached_property
    def _hess(self):
        p1, p2 = self._grad
        return (p1.partial(1), p1.partial(2), p2.partial(2))

    @cached_property
    def _hess_grad(self):
        # third-order partials: gradients of h11, h12, h22
        h11, h12, h22 = self._hess
        return (
            (h11.partial(1), h11.partial(2)),
            (h12.partial(1), h12.partial(2)),
            (h22.partial(1), h22.partial(2)),
        )

    def eval(self, y) -> float:
        y1, y2 = y
        return self.poly.eval(y1, y2)

    def eval_many(self, ys):
        ys = np.asarray(ys, dtype=float)
        return self.poly.eval(ys[..., 0], ys[..., 1])

    def gradient(self, y):
        """Lagrangian map value (df/dy1, df/dy2) at a fiber point."""
        y1, y2 = y
        p1, p2 = self._grad
        return np.array([p1.eval(y1, y2), p2.eval(y1, y2)])

    def gradient_many(self, ys):
        ys = np.asarray(ys, dtype=float)
        p1, p2 = self._grad
        return np.stack([p1.eval(ys[..., 0], ys[..., 1]), p2.eval(ys[..., 0], ys[..., 1])], axis=-1)

    def hessian(self, y):
        y1, y2 = y
        h11, h12, h22 = self._hess
        a = h11.eval(y1, y2)
        b = h12.eval(y1, y2)
        c = h22.eval(y1, y2)
        return np.array([[a, b], [b, c]])

    def hessian_many(self, ys):
        """Hessian entries (h11, h12, h22) evaluated on an array of points."""
        ys = np.asarray(ys, dtype=float)
        h11, h12, h22 = self._hess
        return (h11.eval(ys[..., 0], ys[..., 1]),
                h12.eval(ys[..., 0], ys[..., 1]),
                h22.eval(ys[..., 0], ys[..., 1]))

    def det_hessian(self, y) -> float:
        y1, y2 = y
        h11, h12, h22 = self._hess
        a, b, c = h11.eval(y1, y2), h12.eval(y1, y2), h22.eval(y1, y2)
        return a * c - b * b

    def det_hessian_many(self, ys):
        a, b, c = self.hessian_many(ys)
        return a * c - b * b

    def det_hessian_grad(self, y):
        """Gradient of det Hf via the product rule on third-order partials."""
        y1, y2 = y
        h11, h12, h22 = self._hess
        a, b, c = h11.eval(y1, y2), h12.eval(y1, y2), h22.eval(y1, y2)
        (da1, da2), (db1, db2), (dc1, dc2) = (
            (g[0].eval(y1, y2), g[1].eval(y1, y2)) for g in self._hess_grad
        )
        return np.array([da1 * c + a * dc1 - 2 * b * db1,
                         da2 * c + a * dc2 - 2 * b * db2])

    def det_hessian_grad_many(self, ys):
        ys = np.asarray(ys, dtype=float)
        y1, y2 = ys[..., 0], ys[..., 1]
        h11, h12, h22 = self._hess
        a, b, c = h11.eval(y1, y2), h12.eval(y1, y2), h22.eval(y1, y2)
        (g11, g12), (g21, g22), (g31, g32) = self._hess_grad
        da1, da2 = g11.eval(y1, y2), g12.eval(y1, y2)
        db1, db2 = g21.eval(y1, y2), g22.eval(y1, y2)
        dc1, dc2 = g31.eval(y1, y2), g32.eval(y1, y2)
        return np.stack([da1 * c + a * dc1 - 2 * b * db1,
                         da2 * c + a * dc2 - 2 * b * db2], axis=-1)

    @cached_property
    def _det_poly(self) -> Poly2:
        h11, h12, h22 = self._hess
        return _poly_mul(h11, h22) - _poly_mul(h12, h12)

    def det_hessian_hess(self, y):
        """Hessian matrix of det Hf (uses formal partials up to order four)."""
        d = self._det_poly
        d11 = d.partial(1).partial(1)
        d12 = d.partial(1).partial(2)
        d22 = d.partial(2).partial(2)
        y1, y2 = y
        a, b, c = d11.eval(y1, y2), d12.eval(y1, y2), d22.eval(y1, y2)
        return np.array([[a, b], [b, c]])

    def with_label(self, label: str) -> "GeneratingFunction":
        return replace(self, label=label)


def _poly_mul(p: Poly2, q: Poly2) -> Poly2:
    terms = []
    for i1, j1, c1 in p.terms:
        for i2, j2, c2 in q.terms:
            terms.append((i1 + i2, j1 + j2, c1 * c2))
    return Poly2(tuple(terms))


@dataclass(frozen=True)
class QuadraticPerturbation:
    """Quadratic perturbation (eps/2)(a*y1^2 + b*y1*y2 + c*y2^2), eps > 0."""

    eps: float
    a: float
    b: float
    c: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def poly(self) -> Poly2:
        h = 0.5 * self.eps
        return Poly2(((2, 0, h * self.a), (1, 1, h * self.b), (0, 2, h * self.c)))


@dataclass(frozen=True)
class FamilySpec:
    """Deformation family: base function plus named polynomial directions."""

    base: GeneratingFunction
    deformation_terms: tuple[tuple[Poly2, str], ...] = field(default_factory=tuple)

    def parameter_names(self):
        return tuple(name for _, name in self.deformation_terms)

    def at(self, params: dict) -> GeneratingFunction:
        """Evaluate the family at a parameter assignment."""
        unknown = set(params) - set(self.parameter_names())
        if unknown:
            raise KeyError(f"unknown family parameters: {sorted(unknown)}")
        total = self.base.poly
        used = []
        for term, name in self.deformation_terms:
            v = float(params.get(name, 0.0))
            if v != 0.0:
                total = total + term.scale(v)
                used.append(f"{name}={v:g}")
        label = self.base.label if not used else f"{self.base.label}[{','.join(used)}]"
        return GeneratingFunction(total, label)


NORMAL_FORM_KINDS = (
    "fold",
    "cusp-plus",
    "cusp-minus",
    "elliptic-umbilic",
    "hyperbolic-umbilic",
)

# One-variable germs are stabilized with a dummy non-degenerate quadratic
# y2^2/2 so every built-in lives on the same two-dimensional fiber.
_NORMAL_FORMS = {
    "fold": Poly2(((3, 0, 1.0), (0, 2, 0.5))),
    "cusp-plus": Poly2(((4, 0, 1.0), (0, 2, 0.5))),
    "cusp-minus": Poly2(((4, 0, -1.0), (0, 2, 0.5))),
    "elliptic-umbilic": Poly2(((3, 0, 1.0 / 3.0), (1, 2, -1.0))),
    "hyperbolic-umbilic": Poly2(((3, 0, 1.0 / 3.0), (0, 3, 1.0 / 3.0))),
}


def normal_form(kind: str) -> GeneratingFunction:
    """Return a built-in singularity normal form by name."""
    try:
        p = _NORMAL_FORMS[kind]
    except KeyError:
        raise ValueError(f"unknown normal form {kind!r}; expected one of {NORMAL_FORM_KINDS}") from None
    return GeneratingFunction(p, kind)


def perturb(f: GeneratingFunction, p) -> GeneratingFunction:
    """Add a perturbation (QuadraticPerturbation or Poly2) to f term-wise."""
    if isinstance(p, QuadraticPerturbation):
        extra = p.poly()
        tag = f"quad(eps={p.eps:g},a={p.a:g},b={p.b:g},c={p.c:g})"
    elif isinstance(p, Poly2):
        extra = p
        tag = "poly" if not p.is_zero() else ""
    else:
        raise TypeError("perturbation must be a QuadraticPerturbation or Poly2")
    if extra.is_zero():
        return f
    label = f.label if not tag else f"{f.label}+{tag}"
    return GeneratingFunction(f.poly + extra, label)


def elliptic_umbilic_versal() -> FamilySpec:
    """Four-parameter deformation family through the elliptic umbilic."""
    return FamilySpec(
        base=normal_form("elliptic-umbilic"),
        deformation_terms=(
            (Poly2(((0, 0, 1.0),)), "a0"),
            (Poly2(((1, 0, 1.0),)), "a1"),
            (Poly2(((0, 1, 1.0),)), "a2"),
            (Poly2(((2, 0, 1.0),)), "a3"),
        ),
    )


def pyramid_slice(t: float) -> GeneratingFunction:
    """Member f + t*y1^2 of the elliptic-umbilic slice family."""
    f = normal_form("elliptic-umbilic")
    if t == 0.0:
        return f
    return perturb(f, Poly2(((2, 0, float(t)),))).with_label(f"elliptic-umbilic[t={t:g}]")
