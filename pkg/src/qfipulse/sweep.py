"""Grid sweeps over (family, alpha^2, Gamma*T_sigma) with JSON-lines persistence.

The store is append-only: line 1 is a header carrying the plan hash, every
following line is one finished row. Re-running a plan against an existing
store skips rows already present, so an interrupted sweep resumes where it
stopped. CSV is derived from rows on demand.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .analytic import gamma_T_from_sigma, qfi_long_table, qfi_short_table
from .engine import PhysicsParams, solve_real
from .errors import BracketNotFound, InvalidInput, QfiError, SweepMismatch
from .pulses import STANDARD_FAMILIES, canonical_family, standard_pulse

CSV_HEADER = "family,alpha_sq,gamma_Tsigma,qfi_total,f_p,f_z,f_x,analytic_long,analytic_short,wall_time_s"
STORE_VERSION = 1
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def log_grid(lo: float, hi: float, n: int) -> list[float]:
    return [float(v) for v in np.geomspace(lo, hi, n)]


@dataclass(frozen=True)
class SweepPlan:
    families: tuple
    alpha_sq_grid: tuple
    width_grid: tuple  # Gamma * T_sigma
    params: PhysicsParams = PhysicsParams()
    outputs: tuple = ("qfi_total", "f_p", "f_z", "f_x", "analytic_long", "analytic_short")

    def __post_init__(self):
        fams = tuple(canonical_family(f) for f in self.families)
        for f in fams:
            if f not in STANDARD_FAMILIES:
                raise InvalidInput(f"{f!r} is not a standard family", family=f)
        object.__setattr__(self, "families", fams)
        for name in ("alpha_sq_grid", "width_grid"):
            g = tuple(float(v) for v in getattr(self, name))
            if not g:
                raise InvalidInput(f"{name} is empty")
            if any(b <= a for a, b in zip(g, g[1:])):
                raise InvalidInput(f"{name} must be strictly increasing", grid=list(g))
            if g[0] <= 0:
                raise InvalidInput(f"{name} must be positive")
            object.__setattr__(self, name, g)
        if not fams:
            raise InvalidInput("no families given")
        object.__setattr__(self, "outputs", tuple(self.outputs))

    def to_dict(self) -> dict:
        return {"families": list(self.families), "alpha_sq_grid": list(self.alpha_sq_grid),
                "width_grid": list(self.width_grid), "params": asdict(self.params),
                "outputs": list(self.outputs)}

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def points(self) -> list[tuple[str, float, float]]:
        return [(f, a, w) for f in self.families for a in self.alpha_sq_grid for w in self.width_grid]


@dataclass
class ResultRow:
    family: str
    alpha_sq: float
    gamma_Tsigma: float
    qfi_total: Optional[float] = None
    f_p: Optional[float] = None
    f_z: Optional[float] = None
    f_x: Optional[float] = None
    analytic_long: Optional[float] = None
    analytic_short: Optional[float] = None
    wall_time: float = 0.0
    error: Optional[dict] = None

    @property
    def key(self) -> tuple:
        return (self.family, self.alpha_sq, self.gamma_Tsigma)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def csv_line(self) -> str:
        def fmt(v):
            return "" if v is None else repr(float(v))
        vals = [self.alpha_sq, self.gamma_Tsigma, self.qfi_total, self.f_p, self.f_z, self.f_x,
                self.analytic_long, self.analytic_short, self.wall_time]
        return ",".join([self.family] + [fmt(v) for v in vals])


def compute_row(family: str, alpha_sq: float, gamma_Tsigma: float,
                params: PhysicsParams = PhysicsParams()) -> ResultRow:
    """Engine breakdown plus both table limits for one grid point; errors land in the row."""
    row = ResultRow(canonical_family(family), float(alpha_sq), float(gamma_Tsigma))
    start = time.perf_counter()
    try:
        gT = gamma_T_from_sigma(row.family, row.gamma_Tsigma)
        row.analytic_long = alpha_sq * qfi_long_table(row.family, gT)
        row.analytic_short = alpha_sq * qfi_short_table(row.family, gT, alpha_sq)
        res = solve_real(standard_pulse(row.family, row.gamma_Tsigma, alpha_sq, params.gamma), params)
        row.qfi_total, row.f_p, row.f_z, row.f_x = res.total, res.f_p, res.f_z, res.f_x
    except QfiError as exc:
        row.error = exc.to_dict()
    row.wall_time = time.perf_counter() - start
    return row


def _row_task(args):
    return compute_row(*args)


def _read_store(path: Path, plan: SweepPlan) -> dict:
    done = {}
    with path.open() as fh:
        first = fh.readline()
        if not first.strip():
            return done
        header = json.loads(first)
        if header.get("plan_hash") != plan.hash:
            raise SweepMismatch("store belongs to a different plan", path=str(path),
                                stored=header.get("plan_hash"), expected=plan.hash)
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError:
                break  # torn final line from an interrupted run
            row = ResultRow(**d)
            done[row.key] = row
    return done


def run_sweep(plan: SweepPlan, store: str | os.PathLike | None = None, jobs: int = 1,
              progress=None) -> list[ResultRow]:
    """Compute every grid point not yet in ``store``; rows sorted by (family, alpha^2, width)."""
    done: dict = {}
    fh = None
    if store is not None:
        path = Path(store)
        if path.exists() and path.stat().st_size > 0:
            done = _read_store(path, plan)
            # drop a torn tail so appends start on a fresh line
            text = path.read_text()
            if not text.endswith("\n"):
                path.write_text(text[: text.rfind("\n") + 1])
            fh = path.open("a")
        else:
            fh = path.open("w")
            fh.write(json.dumps({"version": STORE_VERSION, "plan_hash": plan.hash,
                                 "plan": plan.to_dict()}, sort_keys=True) + "\n")
            fh.flush()
    todo = [p for p in plan.points() if p not in done]

    def accept(row: ResultRow):
        done[row.key] = row
        if fh is not None:
            fh.write(row.to_json() + "\n")
            fh.flush()
        if progress is not None:
            progress(row)

    try:
        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futs = [pool.submit(_row_task, (f, a, w, plan.params)) for f, a, w in todo]
                for fut in as_completed(futs):
                    accept(fut.result())
        else:
            for f, a, w in todo:
                accept(compute_row(f, a, w, plan.params))
    finally:
        if fh is not None:
            fh.close()
    return [done[p] for p in plan.points()]


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    return "\n".join([CSV_HEADER] + [r.csv_line() for r in rows]) + "\n"


def load_rows(store: str | os.PathLike) -> list[ResultRow]:
    lines = Path(store).read_text().splitlines()
    return [ResultRow(**json.loads(s)) for s in lines[1:] if s.strip()]


# ---------------------------------------------------------------- width optimum

def _engine_qfi(family, alpha_sq, params, log_w, cache):
    if log_w not in cache:
        w = math.exp(log_w)
        cache[log_w] = solve_real(standard_pulse(family, w, alpha_sq, params.gamma), params).total
    return cache[log_w]


def best_width(family: str, alpha_sq: float, params: PhysicsParams = PhysicsParams(),
               bracket: tuple[float, float] = (0.05, 20.0), rel_tol: float = 1e-3,
               limits: tuple[float, float] = (1e-4, 1e6), n_scan: int = 9) -> tuple[float, float]:
    """Width maximizing the engine QFI, by golden-section search in log width.

    A coarse log scan over ``bracket`` locates the peak; if it sits on an edge
    the bracket grows tenfold in that direction until ``limits`` are hit.
    Returns (T_sigma, Gamma^2 F) with T_sigma in physical time.
    """
    fam = canonical_family(family)
    if fam not in STANDARD_FAMILIES:
        raise InvalidInput(f"{family!r} is not a standard family")
    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    lim_lo, lim_hi = math.log(limits[0]), math.log(limits[1])
    cache: dict = {}
    while True:
        xs = list(np.linspace(lo, hi, n_scan))
        vals = [_engine_qfi(fam, alpha_sq, params, x, cache) for x in xs]
        k = int(np.argmax(vals))
        if 0 < k < n_scan - 1:
            break
        if k == 0 and lo > lim_lo:
            lo, hi = max(lo - math.log(10.0), lim_lo), xs[1]
        elif k == n_scan - 1 and hi < lim_hi:
            lo, hi = xs[-2], min(hi + math.log(10.0), lim_hi)
        else:
            raise BracketNotFound("QFI maximum lies on the search limit", family=fam,
                                  alpha_sq=alpha_sq, width=math.exp(xs[k]))
    a, b = xs[k - 1], xs[k + 1]
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = _engine_qfi(fam, alpha_sq, params, c, cache)
    fd = _engine_qfi(fam, alpha_sq, params, d, cache)
    # bracket in log width; relative width tolerance ~ (b - a)
    while b - a > rel_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = _engine_qfi(fam, alpha_sq, params, c, cache)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = _engine_qfi(fam, alpha_sq, params, d, cache)
    x_best = c if fc >= fd else d
    return math.exp(x_best) / params.gamma, max(fc, fd)
