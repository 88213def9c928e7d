"""Command-line front end: ``solve``, ``sweep``, ``histogram`` and ``validate``.

Settings come from a flat ``key = value`` file (``--config``) overridden by
command-line flags. Results are written as CSV with 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import re
import secrets
import sys
from dataclasses import dataclass

import numpy as np

from .estimator import BoundaryData, CompatibilityError, default_workers, payoffs, simulate_walks, summarize
from .exprlang import ExprError, parse
from .geometry import Ball, Domain, HalfBall, Hypercube, parse_domain

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
DEFAULT_SEED = 20240417

PRESETS = {
    "hyp1": ("exp(t)*prod(i, x[i]*(1-x[i]))", "exp(t)*prod(i, x[i]*(1-x[i]))"),
    "hyp2": ("(1+cos(2*pi*t))*norm(x)", "(1+cos(2*pi*t))*norm(x)"),
    "eigen": ("0", "prod(i, sin(pi*x[i]))"),
}

SWEEP_DEFAULTS = {
    "eps": "0.5^4..0.5^16",
    "time": "0.05..2:40",
    "position": "0.05..0.95:19",
    "dimension": "2..10:9",
}
SWEEP_COLUMN = {"eps": "eps", "time": "t", "position": "u", "dimension": "dim"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    domain: str = "hypercube"
    dim: int | None = None
    preset: str | None = None
    f: str | None = None
    f0: str | None = None
    t: str = "1"
    x: str = "center"
    eps: float = 1e-3
    walks: int = 10_000
    seed: int = DEFAULT_SEED
    workers: int = 1
    out: str = "-"
    axis: str | None = None
    grid: str | None = None
    bins: int = 50

    # -- derived objects ------------------------------------------------------

    def build_domain(self, dim: int | None = None) -> Domain:
        """The configured domain, or the same shape in dimension ``dim``."""
        text = self.domain.strip()
        try:
            if "(" in text:
                dom = parse_domain(text)
            else:
                dom = parse_domain(text, self.dim or 3)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.dim is not None and dom.dim != self.dim:
            raise ConfigError(f"domain {text!r} has dimension {dom.dim} but dim = {self.dim}")
        return dom if dim is None else _with_dim(dom, dim)

    def expressions(self, dim: int) -> tuple[str, str]:
        """Source text of ``(f, f0)``; ``f0`` defaults to ``f`` (read at ``t = 0``)."""
        name = self.preset or "hyp1"
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        f, f0 = PRESETS[name]
        if self.f is not None:
            f = self.f
            f0 = self.f if self.f0 is None else self.f0
        elif self.f0 is not None:
            f0 = self.f0
        return f, f0

    def boundary_data(self, domain: Domain) -> BoundaryData:
        f_src, f0_src = self.expressions(domain.dim)
        try:
            data = BoundaryData.from_exprs(parse(f_src, domain.dim), parse(f0_src, domain.dim))
        except ExprError as exc:
            raise ConfigError(f"bad boundary expression: {exc}") from None
        try:
            return data.check_compatibility(domain)
        except CompatibilityError as exc:
            raise ConfigError(f"f(0, .) must equal f0 on the boundary: {exc}") from None

    def times(self) -> list[float]:
        return _parse_floats(self.t, "t")

    def points(self, domain: Domain) -> list[np.ndarray]:
        out = []
        for item in self.x.split(";"):
            item = item.strip()
            if item == "center":
                out.append(domain.center())
                continue
            vals = _parse_floats(item, "x")
            if len(vals) != domain.dim:
                raise ConfigError(f"point {item!r} has {len(vals)} coordinates but the domain has dimension {domain.dim}")
            p = np.asarray(vals)
            if not bool(domain.contains(p)):
                raise ConfigError(f"point {item!r} is not inside {domain}")
            out.append(p)
        return out

    def validate(self):
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.walks < 2:
            raise ConfigError("walks must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.bins < 1:
            raise ConfigError("bins must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")
        return self


def _with_dim(domain: Domain, dim: int) -> Domain:
    if isinstance(domain, Hypercube):
        return Hypercube(dim, (domain.lower[0],) * dim, (domain.upper[0],) * dim)
    if isinstance(domain, Ball):
        return Ball(dim, domain.radius)
    if isinstance(domain, HalfBall):
        return HalfBall(dim, domain.radius)
    raise ConfigError(f"cannot change the dimension of {domain!r}")


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {what} = {text!r} as comma-separated numbers") from None


def parse_grid(text: str) -> list[float]:
    """``a,b,c`` | ``lo..hi:n`` (n evenly spaced values) | ``b^i..b^j`` (integer powers of b)."""
    text = text.strip()
    m = re.fullmatch(r"([0-9.eE+-]+)\^(\d+)\.\.\1\^(\d+)", text)
    if m:
        base, i, j = float(m.group(1)), int(m.group(2)), int(m.group(3))
        step = 1 if j >= i else -1
        return [base**k for k in range(i, j + step, step)]
    m = re.fullmatch(r"([0-9.eE+-]+)\.\.([0-9.eE+-]+):(\d+)", text)
    if m:
        lo, hi, n = float(m.group(1)), float(m.group(2)), int(m.group(3))
        if n < 1:
            raise ConfigError("grid needs at least one point")
        return [float(v) for v in np.linspace(lo, hi, n)]
    vals = _parse_floats(text, "grid")
    if not vals:
        raise ConfigError("empty grid")
    return vals


# -- config loading ------------------------------------------------------------------

_FIELDS = {
    "domain": str, "dim": int, "preset": str, "f": str, "f0": str, "t": str, "x": str, "eps": float,
    "walks": int, "seed": str, "workers": int, "out": str, "axis": str, "grid": str, "bins": int,
}


def read_config_file(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _FIELDS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                value = value[1:-1]
            values[key] = value
    return values


def build_config(file_values: dict, flag_values: dict) -> RunConfig:
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    kwargs = {"workers": default_workers()}
    for key, value in merged.items():
        if key == "seed":
            kwargs["seed"] = _parse_seed(value)
            continue
        try:
            kwargs[key] = _FIELDS[key](value)
        except ValueError:
            raise ConfigError(f"cannot parse {key} = {value!r}") from None
    return RunConfig(**kwargs).validate()


def _parse_seed(value) -> int:
    if isinstance(value, int):
        return value
    if str(value).strip() == "random":
        return secrets.randbits(64)
    try:
        return int(str(value), 0)
    except ValueError:
        raise ConfigError(f"seed must be an integer or 'random', got {value!r}") from None


# -- output ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(out: str, header: list[str], rows: list[list]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _result_columns(dim: int) -> list[str]:
    return ["t", *[f"x{i}" for i in range(dim)], "mean", "std_error", "ci_lo", "ci_hi", "mean_steps",
            "boundary_stop_fraction", "n_walks", "eps", "seed"]


def _solve_row(cfg: RunConfig, domain: Domain, data: BoundaryData, t: float, x, eps: float, pad_to: int = 0):
    if not t > 0:
        raise ConfigError(f"t must be positive, got {t}")
    batch = simulate_walks(domain, t, x, eps, cfg.walks, cfg.seed, workers=cfg.workers)
    est = summarize(payoffs(batch, data), batch)
    coords = list(x) + [""] * max(0, pad_to - len(x))
    return [t, *coords, est.mean, est.std_error, est.ci95[0], est.ci95[1], est.mean_steps,
            est.boundary_stop_fraction, cfg.walks, eps, cfg.seed]


# -- commands ---------------------------------------------------------------------------


def cmd_solve(cfg: RunConfig) -> int:
    domain = cfg.build_domain()
    data = cfg.boundary_data(domain)
    rows = [_solve_row(cfg, domain, data, t, x, cfg.eps) for t in cfg.times() for x in cfg.points(domain)]
    write_csv(cfg.out, _result_columns(domain.dim), rows)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    axis = cfg.axis or "eps"
    if axis not in SWEEP_DEFAULTS:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_DEFAULTS)}")
    grid = parse_grid(cfg.grid or SWEEP_DEFAULTS[axis])
    rows = []
    if axis == "dimension":
        dims = [int(round(v)) for v in grid]
        if any(d < 1 for d in dims):
            raise ConfigError("dimensions must be positive")
        width = max(dims)
        for d in dims:
            domain = cfg.build_domain(d)
            data = cfg.boundary_data(domain)
            for x in cfg.points(domain):
                rows.append([d, *_solve_row(cfg, domain, data, cfg.times()[0], x, cfg.eps, pad_to=width)])
        header = ["dim", *_result_columns(width)]
    else:
        domain = cfg.build_domain()
        data = cfg.boundary_data(domain)
        t0, x0 = cfg.times()[0], cfg.points(domain)[0]
        for v in grid:
            t, x, eps = t0, x0, cfg.eps
            if axis == "eps":
                if not v > 0:
                    raise ConfigError("eps grid values must be positive")
                eps = v
            elif axis == "time":
                t = v
            else:
                x = _position(domain, v)
            rows.append([v, *_solve_row(cfg, domain, data, t, x, eps)])
        header = [SWEEP_COLUMN[axis], *_result_columns(domain.dim)]
    write_csv(cfg.out, header, rows)
    return EXIT_OK


def _position(domain: Domain, u: float) -> np.ndarray:
    # (u, ..., u) in a box, (u, 0, ..., 0) in balls
    if isinstance(domain, Hypercube):
        x = np.full(domain.dim, u)
    else:
        x = np.zeros(domain.dim)
        x[getattr(domain, "axis", 0)] = u
    if not bool(domain.contains(x)):
        raise ConfigError(f"position u = {u} lies outside {domain}")
    return x


def cmd_histogram(cfg: RunConfig) -> int:
    domain = cfg.build_domain()
    data = cfg.boundary_data(domain)
    rows = []
    for t in cfg.times():
        if not t > 0:
            raise ConfigError(f"t must be positive, got {t}")
        for x in cfg.points(domain):
            batch = simulate_walks(domain, t, x, cfg.eps, cfg.walks, cfg.seed, workers=cfg.workers)
            for kind, values in (("payoff", payoffs(batch, data)), ("steps", batch.n_steps)):
                counts, edges = np.histogram(values, bins=cfg.bins)
                for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                    rows.append([t, *x, kind, lo, hi, int(c)])
    header = ["t", *[f"x{i}" for i in range(domain.dim)], "kind", "bin_lo", "bin_hi", "count"]
    write_csv(cfg.out, header, rows)
    return EXIT_OK


def cmd_validate(cfg: RunConfig, psi_factor: float | None = None, walks: int | None = None) -> int:
    from .validation import run_validation

    results = run_validation(walks=walks or 100_000, seed=cfg.seed, psi_factor=psi_factor)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAILED if failed else EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' file; flags override it")
    common.add_argument("--domain", help="hypercube(d) | ball(d, r) | halfball(d, r)")
    common.add_argument("--dim", type=int, help="spatial dimension d")
    common.add_argument("--preset", choices=sorted(PRESETS), help="named boundary data")
    common.add_argument("--f", help="boundary data f(t, x) as an expression")
    common.add_argument("--f0", help="initial data f0(x) as an expression")
    common.add_argument("--t", help="time(s), comma separated")
    common.add_argument("--x", help="'center' or coordinates; several points separated by ';'")
    common.add_argument("--eps", type=float)
    common.add_argument("--walks", type=int, help="number of walks N")
    common.add_argument("--seed", help="integer master seed, or 'random'")
    common.add_argument("--workers", type=int, help="worker processes (default from $HEATWALK_WORKERS)")
    common.add_argument("--out", help="output CSV path, '-' for stdout")

    p = argparse.ArgumentParser(prog="heatwalk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="estimate u(t, x)")
    sw = sub.add_parser("sweep", parents=[common], help="estimate along a parameter grid")
    sw.add_argument("--axis", choices=sorted(SWEEP_DEFAULTS))
    sw.add_argument("--grid", help="'a,b,c', 'lo..hi:n' or 'b^i..b^j'")
    hist = sub.add_parser("histogram", parents=[common], help="payoff and step-count histograms")
    hist.add_argument("--bins", type=int)
    val = sub.add_parser("validate", parents=[common], help="run the verification suite")
    val.add_argument("--corrupt-psi", type=float, default=None, help=argparse.SUPPRESS)
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    flags = {k: getattr(args, k, None) for k in _FIELDS}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(file_values, flags)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "histogram":
            return cmd_histogram(cfg)
        return cmd_validate(cfg, psi_factor=args.corrupt_psi, walks=flags.get("walks"))
    except (ValueError, OSError) as exc:
        print(f"heatwalk: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
