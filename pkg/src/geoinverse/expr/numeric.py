"""Charts, compiled numeric evaluation, and probabilistic zero-testing."""

import math
import zlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import DomainError, IndeterminateError
from .core import Add, Fn, Mul, Num, Pow, Sym, coord
from .simplify import ExpansionTooLarge, expand, node_count

DEFAULT_BOX = (Fraction(1, 2), Fraction(3, 2))
CONSTANT_RANGE = (0.5, 1.5)
DEFAULT_TRIALS = 12
DEFAULT_SEED = 42
ZERO_TOL = 1e-9


@dataclass(frozen=True)
class Chart:
    """Coordinate names plus the closed sampling box used for numeric probing."""

    names: tuple
    boxes: tuple

    def __post_init__(self):
        names = tuple(self.names)
        if len(names) < 2:
            raise ValueError("a chart needs at least two coordinates")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names in {names}")
        boxes = tuple((Fraction(lo), Fraction(hi)) for lo, hi in self.boxes)
        if len(boxes) != len(names):
            raise ValueError("one sampling interval per coordinate is required")
        for name, (lo, hi) in zip(names, boxes):
            if not lo < hi:
                raise ValueError(f"degenerate sampling interval for {name}: [{lo}, {hi}]")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "boxes", boxes)

    @classmethod
    def with_default_boxes(cls, names, **boxes):
        return cls(tuple(names), tuple(boxes.get(n, DEFAULT_BOX) for n in names))

    @property
    def n(self):
        return len(self.names)

    @property
    def coords(self):
        return tuple(coord(n) for n in self.names)

    def center(self):
        return np.array([float(lo + hi) / 2 for lo, hi in self.boxes])

    def lower(self):
        return np.array([float(lo) for lo, _ in self.boxes])

    def upper(self):
        return np.array([float(hi) for _, hi in self.boxes])

    def sample(self, rng):
        return rng.uniform(self.lower(), self.upper())

    def contains(self, point):
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lower() - 1e-12) and np.all(p <= self.upper() + 1e-12))


def _rpow(b, e):
    if b < 0:
        raise DomainError("fractional power of a negative number")
    return b ** e


def _rpow_vec(b, e):
    if np.any(np.asarray(b) < 0):
        raise DomainError("fractional power of a negative number")
    return np.power(b, e)


def _literal(v):
    f = float(v)
    return f"({f!r})" if f < 0 else repr(f)


class CompiledExprs:
    """A batch of expressions compiled into one Python function.

    Shared subtrees are evaluated once. ``symbols`` fixes the argument order;
    by default it is every symbol of the batch sorted canonically.
    """

    def __init__(self, exprs, symbols=None, vectorized=False):
        self.vectorized = vectorized
        exprs = list(exprs)
        if symbols is None:
            syms = set()
            for e in exprs:
                syms |= e.symbols
            symbols = sorted(syms, key=lambda s: s._key)
        self.symbols = tuple(symbols)
        self.exprs = exprs
        self._fn = self._compile()

    def _compile(self):
        argnames = {s: f"a{i}" for i, s in enumerate(self.symbols)}
        lines = []
        memo = {}

        def emit(e):
            hit = memo.get(e)
            if hit is not None:
                return hit
            if isinstance(e, Num):
                return _literal(e.value)
            if isinstance(e, Sym):
                if e not in argnames:
                    raise KeyError(f"no value bound for symbol {e.name!r}")
                return argnames[e]
            if isinstance(e, Fn):
                prefix = "_np." if self.vectorized else "_m."
                code = f"{prefix}{e.name}({emit(e.arg)})"
            elif isinstance(e, Pow):
                code = _pow_code(emit(e.base), e.exp)
            elif isinstance(e, Mul):
                parts = [_pow_code(emit(b), x) for b, x in e.factors]
                if e.coeff != 1:
                    parts.insert(0, _literal(e.coeff))
                code = "*".join(parts)
            elif isinstance(e, Add):
                parts = []
                for t, c in e.terms:
                    s = emit(t)
                    parts.append(s if c == 1 else f"{_literal(c)}*{s}")
                if e.const != 0:
                    parts.insert(0, _literal(e.const))
                code = " + ".join(parts)
            else:
                raise TypeError(e)
            name = f"t{len(lines)}"
            lines.append(f"    {name} = {code}")
            memo[e] = name
            return name

        outs = [emit(e) for e in self.exprs]
        src = "def _f({}):\n{}\n    return ({},)\n".format(
            ", ".join(argnames[s] for s in self.symbols),
            "\n".join(lines) if lines else "    pass",
            ", ".join(outs),
        )
        ns = {"_m": math, "_np": np, "_rpow": _rpow_vec if self.vectorized else _rpow}
        exec(compile(src, "<geoinverse-expr>", "exec"), ns)
        return ns["_f"]

    def call(self, *args):
        """Evaluate at positional symbol values; raises DomainError off-domain.

        In vectorized mode arguments may be arrays and every output is
        broadcast to their common shape.
        """
        if self.vectorized:
            return self._call_vectorized(args)
        try:
            out = self._fn(*args)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(str(exc)) from None
        for v in out:
            if not math.isfinite(v):
                raise DomainError("non-finite value")
        return out

    def _call_vectorized(self, args):
        args = [np.asarray(a, dtype=float) for a in args]
        shape = np.broadcast_shapes(*(a.shape for a in args)) if args else ()
        with np.errstate(all="ignore"):
            try:
                out = self._fn(*args)
            except (ValueError, ZeroDivisionError, OverflowError) as exc:
                raise DomainError(str(exc)) from None
        res = np.empty((len(out),) + shape)
        for i, v in enumerate(out):
            res[i] = v
        if not np.all(np.isfinite(res)):
            raise DomainError("non-finite value")
        return res

    def __call__(self, point):
        return self.call(*[_lookup(point, s) for s in self.symbols])


def _pow_code(base, x):
    if x == 1:
        return base
    if x.denominator == 1:
        k = int(x)
        return f"{base}**{k}" if k > 0 else f"{base}**({k})"
    if x == Fraction(1, 2):
        return f"_rpow({base}, 0.5)"
    return f"_rpow({base}, {float(x)!r})"


def _lookup(point, s):
    if s.kind == "real" and s.name == "pi":
        return point.get(s, point.get("pi", math.pi))
    if s in point:
        return float(point[s])
    if s.name in point:
        return float(point[s.name])
    raise KeyError(f"no value given for {s.name!r}")


def eval_numeric(e, point):
    """IEEE double value of ``e`` at ``point`` (a mapping keyed by Sym or name)."""
    return CompiledExprs([e])(point)[0]


# ----------------------------------------------------------- zero-testing

def _draw(symbols, chart, rng):
    vals = []
    index = {name: i for i, name in enumerate(chart.names)} if chart is not None else {}
    sample = chart.sample(rng) if chart is not None else None
    for s in symbols:
        if s.kind == "real":
            vals.append(math.pi if s.name == "pi" else rng.uniform(*CONSTANT_RANGE))
        elif s.kind == "coord" and s.name in index:
            vals.append(float(sample[index[s.name]]))
        elif s.kind == "coord":
            vals.append(rng.uniform(float(DEFAULT_BOX[0]), float(DEFAULT_BOX[1])))
        else:
            vals.append(rng.uniform(*CONSTANT_RANGE))
    return vals


PREPARE_NODES = 120
PREPARE_WORK = 1000


def _prepared(e):
    # large trees are evaluated as they stand; expanding them costs more than it saves
    if node_count(e) > PREPARE_NODES:
        return e
    try:
        s = expand(e, trig=True, limit=1000, work=PREPARE_WORK)
    except ExpansionTooLarge:
        return e
    return s


def _parts(e):
    return e.parts() if isinstance(e, Add) else [e]


def zero_mask(exprs, chart=None, trials=DEFAULT_TRIALS, seed=DEFAULT_SEED, tol=ZERO_TOL):
    """Probabilistic zero test for a batch; one shared set of sample points.

    Structural zeros short-circuit. Otherwise each expression is evaluated at
    ``trials`` seeded points from the chart box and judged zero iff every
    ``|value| < tol * (1 + running magnitude)``, where the magnitude is the sum
    of absolute values of the top-level summands. Points that leave the domain
    are redrawn; after ``10 * trials`` redraws IndeterminateError is raised.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    exprs = list(exprs)
    result = [None] * len(exprs)
    todo = []
    for i, e in enumerate(exprs):
        if isinstance(e, Num):
            result[i] = e.value == 0
            continue
        s = _prepared(e)
        if isinstance(s, Num):
            result[i] = s.value == 0
            continue
        todo.append((i, _parts(s)))
    if not todo:
        return result
    flat = [p for _, ps in todo for p in ps]
    comp = CompiledExprs(flat)
    rng = np.random.default_rng(seed)
    alive = {i: True for i, _ in todo}
    running = {i: 0.0 for i, _ in todo}
    good = 0
    failures = 0
    while good < trials:
        vals = _draw(comp.symbols, chart, rng)
        try:
            out = comp.call(*vals)
        except DomainError:
            failures += 1
            if failures > 10 * trials:
                raise IndeterminateError(
                    f"zero test exhausted {failures} redraws (seed {seed})") from None
            continue
        good += 1
        pos = 0
        for i, ps in todo:
            chunk = out[pos:pos + len(ps)]
            pos += len(ps)
            if not alive[i]:
                continue
            value = math.fsum(chunk)
            running[i] = max(running[i], sum(abs(v) for v in chunk))
            if abs(value) >= tol * (1.0 + running[i]):
                alive[i] = False
    for i, _ in todo:
        result[i] = alive[i]
    return result


def is_zero(e, chart=None, trials=DEFAULT_TRIALS, seed=DEFAULT_SEED, tol=ZERO_TOL):
    """Structural-then-probabilistic zero test; deterministic for a fixed seed."""
    return zero_mask([e], chart, trials, seed, tol)[0]


def sample_points(chart, count, seed=DEFAULT_SEED):
    """``count`` seeded points inside the chart box, as an array (count, n)."""
    rng = np.random.default_rng(seed)
    return np.array([chart.sample(rng) for _ in range(count)])


def constant_values(symbols, seed=DEFAULT_SEED):
    """Deterministic stand-in values in [0.5, 1.5] for free constants.

    Each name gets its own stream so the value does not depend on which other
    constants happen to be present.
    """
    out = {}
    for s in symbols:
        if s.kind == "real" and s.name == "pi":
            out[s] = math.pi
        elif s.kind in ("const", "real", "func"):
            rng = np.random.default_rng([seed, zlib.crc32(s.name.encode())])
            out[s] = float(rng.uniform(*CONSTANT_RANGE))
    return out


class PointEvaluator:
    """Compiled batch evaluated at coordinate points, constants pinned by seed."""

    def __init__(self, exprs, chart, seed=DEFAULT_SEED):
        self.chart = chart
        syms = set()
        exprs = list(exprs)
        for e in exprs:
            syms |= e.symbols
        coords = chart.coords
        extra = sorted((s for s in syms if s not in coords), key=lambda s: s._key)
        unknown = [s.name for s in extra if s.kind in ("coord", "vel")]
        if unknown:
            raise KeyError(f"symbols outside the chart: {', '.join(unknown)}")
        self.constants = constant_values(extra, seed)
        self._extra = [self.constants[s] for s in extra]
        self._comp = CompiledExprs(exprs, symbols=tuple(coords) + tuple(extra))

    def __call__(self, point):
        """Values as a float array; raises DomainError off-domain."""
        return np.array(self._comp.call(*[float(x) for x in point], *self._extra))

    def sample(self, count, seed=DEFAULT_SEED):
        """``(points, values)`` at ``count`` seeded in-domain points of the box."""
        rng = np.random.default_rng(seed)
        pts, vals = [], []
        failures = 0
        while len(pts) < count:
            p = self.chart.sample(rng)
            try:
                v = self(p)
            except DomainError:
                failures += 1
                if failures > 10 * count:
                    raise IndeterminateError(
                        f"no valid sample points after {failures} draws (seed {seed})") from None
                continue
            pts.append(p)
            vals.append(v)
        return np.array(pts), np.array(vals)
