"""Command-line driver: INI configs in, CSV tables out.

Usage::

    hsie SUBCOMMAND --config run.ini --out results/ [--threads N] [--seed N]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.

Config layout
-------------
``[material.NAME]``  E, nu, rho.
``[block.NAME]``     x0, x1, y0, y1, nx, ny, material.
``[boundary.NAME]``  kind (dirichlet | neumann), x0, y0, x1, y1.
``[port.NAME]``      x0, y0, x1, y1, s0, s1, n_long.
``[interface.NAME]`` block, alpha.
``[analysis]``       command-specific keys (see ``DEFAULTS``).
``[output]``         table (file name), field_dump (optional file name).

Complex numbers use Python syntax (``-1+0.2j``); lists are comma separated.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .curve import Branch, PoleParams, WaveClass, g_value, params_case2, separates, default_theta
from .errors import ConfigError, HsieError
from .fem import (
    Block,
    BlockMesh,
    Material,
    ScalarBasis,
    Segment,
    assemble_interior,
    h1_relative_error,
    interface_mass,
    lobatto_dump,
    stress_norm,
    transverse_matrices,
)
from .hardy1d import convected_roots, solve_convected_1d
from .waveguide import WaveguidePort, assemble_global, incident_rhs, scattering_solve

COMMANDS = ("dispersion", "converge", "resonances", "essential", "scatter", "convected1d", "dirichlet-eig", "choose-params")

# documented defaults of the [analysis] keys
DEFAULTS: Dict[str, str] = {
    "p": "4",
    "omega": "1.66",
    "omega_min": "0.05",
    "omega_max": "2.2",
    "n_omega": "0",
    "n_long": "10",
    "shifts": "",
    "krylov_dim": "200",
    "n_wanted": "40",
    "arnoldi_tol": "1e-8",
    "twin_s0": "",
    "twin_s1": "",
    "classify_tol": "0.02",
    "r_min": "0.0",
    "r_max": "-5.0",
    "n_samples": "300",
    "omega_window": "2.5",
    "trans_elements": "4",
    "half_width": "1.0",
    "s0": "",
    "s1": "",
    "neumann_datum": "1.0",
    "reference": "lamb",
    "incident_port": "",
    "incident": "propagating",
    "amplitude": "1.0",
    "stress_region": "",
    "dump_omega": "",
    "rect": "-0.5,0.5,-0.5,0.5",
    "n_elem": "4",
    "theta": "",
    "seed_s0": "-0.3742-0.4886j",
    "seed_s1": "-0.7752+1.0396j",
    "search_box": "-6,6,-6,6",
    "E": "1.0",
    "nu": "0.25",
    "rho": "1.0",
}


# --- configuration ----------------------------------------------------------------------------


def _line_numbers(text: str) -> Dict[Tuple[str, str], int]:
    lines: Dict[Tuple[str, str], int] = {}
    section = ""
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            lines[(section, "")] = i
            continue
        key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
        lines[(section, key)] = i
    return lines


class RunConfig:
    """Parsed configuration; keeps the raw strings so serialization round-trips."""

    def __init__(self, sections: Dict[str, Dict[str, str]], lines: Optional[Dict] = None):
        self.sections = sections
        self._lines = lines or {}

    # parsing / serialization
    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, strict=True)
        cp.optionxform = str.lower
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(f"malformed config: {exc}", line=line) from exc
        sections = {s: dict(cp.items(s)) for s in cp.sections()}
        cfg = cls(sections, _line_numbers(text))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.parse(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def serialize(self) -> str:
        buf = io.StringIO()
        for name, items in self.sections.items():
            buf.write(f"[{name}]\n")
            for k, v in items.items():
                buf.write(f"{k} = {v}\n")
            buf.write("\n")
        return buf.getvalue()

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.sections == other.sections

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:16]

    # typed access
    def line(self, section: str, key: str = "") -> Optional[int]:
        return self._lines.get((section, key))

    def _fail(self, section, key, msg):
        raise ConfigError(f"[{section}] {key}: {msg}", line=self.line(section, key))

    def get(self, section: str, key: str, default: Optional[str] = None) -> str:
        sec = self.sections.get(section, {})
        if key in sec:
            return sec[key]
        if default is not None:
            return default
        if section == "analysis" and key in DEFAULTS:
            return DEFAULTS[key]
        self._fail(section, key, "missing")

    def real(self, section, key, default=None) -> float:
        raw = self.get(section, key, default)
        try:
            v = float(raw)
        except ValueError:
            self._fail(section, key, f"not a number: {raw!r}")
        if not math.isfinite(v):
            self._fail(section, key, "must be finite")
        return v

    def integer(self, section, key, default=None) -> int:
        raw = self.get(section, key, default)
        try:
            return int(raw)
        except ValueError:
            self._fail(section, key, f"not an integer: {raw!r}")

    def cplx(self, section, key, default=None) -> complex:
        raw = self.get(section, key, default)
        try:
            v = complex(raw.replace(" ", "").replace("i", "j"))
        except ValueError:
            self._fail(section, key, f"not a complex number: {raw!r}")
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            self._fail(section, key, "must be finite")
        return v

    def list_of(self, section, key, conv, default=None) -> list:
        raw = self.get(section, key, default)
        items = [t.strip() for t in raw.split(",") if t.strip()]
        out = []
        for t in items:
            try:
                v = conv(t.replace("i", "j")) if conv is complex else conv(t)
            except ValueError:
                self._fail(section, key, f"bad list entry {t!r}")
            out.append(v)
        return out

    def named(self, prefix: str) -> List[str]:
        return [s.split(".", 1)[1] for s in self.sections if s.startswith(prefix + ".")]

    def validate(self):
        known = {"analysis", "output", "problem"}
        for s in self.sections:
            head = s.split(".", 1)[0]
            if s not in known and head not in ("material", "block", "boundary", "port", "interface"):
                self._fail(s, "", "unknown section")
        for name in self.named("material"):
            sec = f"material.{name}"
            for key in ("E", "nu", "rho"):
                self.real(sec, key.lower())
        mats = set(self.named("material"))
        for name in self.named("block"):
            sec = f"block.{name}"
            for key in ("x0", "x1", "y0", "y1"):
                self.real(sec, key)
            self.integer(sec, "nx")
            self.integer(sec, "ny")
            m = self.get(sec, "material", "default")
            if m != "default" and m not in mats:
                self._fail(sec, "material", f"undefined material {m!r}")
        for name in self.named("boundary"):
            sec = f"boundary.{name}"
            kind = self.get(sec, "kind")
            if kind not in ("dirichlet", "neumann"):
                self._fail(sec, "kind", f"unknown kind {kind!r}")
            for key in ("x0", "y0", "x1", "y1"):
                self.real(sec, key)
        for name in self.named("port"):
            sec = f"port.{name}"
            for key in ("x0", "y0", "x1", "y1"):
                self.real(sec, key)
            self.cplx(sec, "s0")
            self.cplx(sec, "s1")
            self.integer(sec, "n_long")
        blocks = set(self.named("block"))
        for name in self.named("interface"):
            sec = f"interface.{name}"
            b = self.get(sec, "block")
            if b not in blocks:
                self._fail(sec, "block", f"undefined block {b!r}")
            self.cplx(sec, "alpha")
        ports = set(self.named("port"))
        ip = self.sections.get("analysis", {}).get("incident_port", "")
        if ip and ip not in ports:
            self._fail("analysis", "incident_port", f"undefined port {ip!r}")


def _material(cfg: RunConfig, name: str = "default") -> Material:
    if name != "default" or "material.default" in cfg.sections:
        sec = f"material.{name}"
        return Material(cfg.real(sec, "e"), cfg.real(sec, "nu"), cfg.real(sec, "rho"))
    return Material(cfg.real("analysis", "E".lower(), DEFAULTS["E"]), cfg.real("analysis", "nu"), cfg.real("analysis", "rho"))


@dataclass
class Problem:
    mesh: BlockMesh
    basis: ScalarBasis
    interior: tuple
    ports: List[WaveguidePort]
    interfaces: list

    @property
    def dofs(self):
        return self.interior[2]

    def system(self, ports: Optional[List[WaveguidePort]] = None):
        ports = self.ports if ports is None else ports
        terms = [interface_mass(self.dofs, blk, alpha) for blk, alpha in self.interfaces]
        return assemble_global(self.interior, ports, terms)


def build_problem(cfg: RunConfig, p: Optional[int] = None, n_long: Optional[int] = None) -> Problem:
    """Mesh, interior pencil and ports described by the config."""
    p = cfg.integer("analysis", "p") if p is None else p
    blocks = []
    for name in cfg.named("block"):
        sec = f"block.{name}"
        mat = _material(cfg, cfg.get(sec, "material", "default"))
        blocks.append(Block(name, cfg.real(sec, "x0"), cfg.real(sec, "x1"), cfg.real(sec, "y0"), cfg.real(sec, "y1"),
                            cfg.integer(sec, "nx"), cfg.integer(sec, "ny"), mat))
    if not blocks:
        raise ConfigError("no [block.*] sections")
    segs = []
    for name in cfg.named("boundary"):
        sec = f"boundary.{name}"
        segs.append(Segment(cfg.get(sec, "kind"), cfg.real(sec, "x0"), cfg.real(sec, "y0"), cfg.real(sec, "x1"), cfg.real(sec, "y1"), name))
    ports = []
    for name in cfg.named("port"):
        sec = f"port.{name}"
        segs.append(Segment("port", cfg.real(sec, "x0"), cfg.real(sec, "y0"), cfg.real(sec, "x1"), cfg.real(sec, "y1"), name))
        nl = cfg.integer(sec, "n_long") if n_long is None else n_long
        ports.append(WaveguidePort(name, PoleParams(cfg.cplx(sec, "s0"), cfg.cplx(sec, "s1")), nl))
    mesh = BlockMesh(blocks, segs)
    basis = ScalarBasis(p)
    interior = assemble_interior(mesh, basis)
    interfaces = [(cfg.get(f"interface.{n}", "block"), cfg.cplx(f"interface.{n}", "alpha")) for n in cfg.named("interface")]
    return Problem(mesh, basis, interior, ports, interfaces)


# --- result tables ------------------------------------------------------------------------------


@dataclass
class ResultTable:
    """Rectangular table; complex columns are stored as ``name_re``/``name_im`` pairs."""

    columns: List[str]
    rows: List[list] = field(default_factory=list)
    metadata: Dict[str, str] = field(default_factory=dict)
    complex_columns: Tuple[str, ...] = ()

    def header(self) -> List[str]:
        out = []
        for c in self.columns:
            if c in self.complex_columns:
                out += [f"{c}_re", f"{c}_im"]
            else:
                out.append(c)
        return out

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(list(values))

    @staticmethod
    def _fmt(v):
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        return str(v)

    def flat_rows(self):
        for r in self.rows:
            out = []
            for c, v in zip(self.columns, r):
                if c in self.complex_columns:
                    z = complex(v)
                    out += [self._fmt(z.real), self._fmt(z.imag)]
                else:
                    out.append(self._fmt(v))
            yield out

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in sorted(self.metadata):
            buf.write(f"# {k}: {self.metadata[k]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for r in self.flat_rows():
            w.writerow(r)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        meta = {}
        body = []
        for line in text.splitlines():
            if line.startswith("# "):
                k, _, v = line[2:].partition(": ")
                meta[k] = v
            else:
                body.append(line)
        rows = list(csv.reader(body))
        t = cls(rows[0], [r for r in rows[1:]], meta)
        return t

    def column(self, name: str) -> np.ndarray:
        if name in self.complex_columns:
            i = self.columns.index(name)
            return np.array([complex(r[i]) for r in self.rows])
        if name in self.columns:
            i = self.columns.index(name)
            return np.array([r[i] for r in self.rows])
        h = self.header()
        i = h.index(name)
        return np.array([float(r[i]) for r in self.rows])


# --- commands -----------------------------------------------------------------------------------


def _ctx(cfg: RunConfig):
    from .spectral.dispersion import DispersionContext

    return DispersionContext(_material(cfg), cfg.real("analysis", "half_width"))


def _omega_grid(cfg: RunConfig) -> np.ndarray:
    n = cfg.integer("analysis", "n_omega")
    if n < 0:
        raise ConfigError("n_omega must be >= 0", line=cfg.line("analysis", "n_omega"))
    if n == 0:
        return np.zeros(0)
    w0, w1 = cfg.real("analysis", "omega_min"), cfg.real("analysis", "omega_max")
    return np.linspace(w0, w1, n)


def _pmap(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def cmd_dispersion(cfg: RunConfig, threads: int = 1) -> ResultTable:
    from .spectral.dispersion import real_lamb_roots

    ctx = _ctx(cfg)
    t = ResultTable(["omega", "branch", "kappa", "group_velocity", "gv_sign"])
    rows = _pmap(lambda w: (w, real_lamb_roots(ctx, float(w))), _omega_grid(cfg), threads)
    for w, roots in rows:
        for r in sorted(roots, key=lambda r: (r.branch.value, r.kappa.real)):
            gv = r.group_velocity
            sign = 0 if not np.isfinite(gv) else int(np.sign(gv))
            t.add(float(w), r.branch.value, r.kappa.real, gv, sign)
    return t


def converge_study(cfg: RunConfig, p_list, n_long_list, threads: int = 1) -> ResultTable:
    """Relative H1 error of the Dirichlet/port problem against the Lamb reference field."""
    from .spectral.dispersion import reference_field

    omega = cfg.real("analysis", "omega")
    ctx = _ctx(cfg)
    dir_names = [n for n in cfg.named("boundary") if cfg.get(f"boundary.{n}", "kind") == "dirichlet"]
    if not dir_names:
        raise ConfigError("converge needs a dirichlet boundary carrying the reference data")
    sec = f"boundary.{dir_names[0]}"
    x_ref = cfg.real(sec, "x0")
    ref = reference_field(ctx, omega, origin=(x_ref, 0.0), normal=(1.0, 0.0))
    t = ResultTable(["p", "n_long", "rel_h1_error", "n_dofs", "residual"])
    for p in p_list:
        prob = build_problem(cfg, p=p)

        def run(nl):
            ports = [WaveguidePort(q.name, q.params, nl, q.material) for q in prob.ports]
            s = prob.system(ports)
            sol = scattering_solve(s, omega, None, ref.value)
            err = h1_relative_error(prob.dofs, sol.coeffs[: prob.dofs.n_vector], ref)
            return nl, err, s.n, sol.residual

        for nl, err, n, res in _pmap(run, list(n_long_list), threads):
            t.add(p, nl, err, n, res)
    return t


def cmd_converge(cfg: RunConfig, threads: int = 1) -> ResultTable:
    return converge_study(cfg, cfg.list_of("analysis", "p", int), cfg.list_of("analysis", "n_long", int), threads)


def _twin_ports(cfg: RunConfig, ports: List[WaveguidePort]) -> Optional[List[WaveguidePort]]:
    s0 = cfg.get("analysis", "twin_s0")
    s1 = cfg.get("analysis", "twin_s1")
    if not s0 and not s1:
        return None
    params = PoleParams(cfg.cplx("analysis", "twin_s0"), cfg.cplx("analysis", "twin_s1"))
    return [WaveguidePort(q.name, params, q.n_long, q.material) for q in ports]


def _port_essential(prob: Problem, system, port_name: str, params: PoleParams, cfg: RunConfig):
    from .spectral.modal import essential_spectrum
    from .waveguide import _port_material

    pd = system.ports[port_name]
    return essential_spectrum(params, pd.trans, _port_material(prob.dofs, pd.port),
                              (cfg.real("analysis", "r_min"), cfg.real("analysis", "r_max")),
                              cfg.integer("analysis", "n_samples"), cfg.real("analysis", "omega_window"))


def resonance_study(cfg: RunConfig, prob: Optional[Problem] = None, seed: int = 0):
    from .spectral.resonance import classify_spectrum, resonances

    shifts = cfg.list_of("analysis", "shifts", complex)
    if not shifts:
        raise ConfigError("resonances needs at least one shift", line=cfg.line("analysis", "shifts"))
    prob = build_problem(cfg) if prob is None else prob
    kd = cfg.integer("analysis", "krylov_dim")
    nw = cfg.integer("analysis", "n_wanted")
    tol = cfg.real("analysis", "arnoldi_tol")
    sys_a = prob.system()
    res_a = resonances(sys_a, shifts, kd, nw, tol=tol, seed=seed)
    twin = _twin_ports(cfg, prob.ports)
    if twin is None or not prob.ports:
        return res_a
    sys_b = prob.system(twin)
    res_b = resonances(sys_b, shifts, kd, nw, tol=tol, seed=seed)
    name = prob.ports[0].name
    ess_a = _port_essential(prob, sys_a, name, prob.ports[0].params, cfg)
    ess_b = _port_essential(prob, sys_b, name, twin[0].params, cfg)
    return classify_spectrum(res_a, res_b, ess_a, ess_b, cfg.real("analysis", "classify_tol"))


def cmd_resonances(cfg: RunConfig, threads: int = 1, seed: int = 0) -> ResultTable:
    res = resonance_study(cfg, seed=seed)
    t = ResultTable(["omega", "residual", "converged", "label"], complex_columns=("omega",))
    labels = res.labels or ["Unclassified"] * len(res)
    for w, r, c, l in zip(res.eigenvalues, res.residuals, res.converged, labels):
        t.add(complex(w), float(r), int(bool(c)), getattr(l, "value", l))
    return t


def cmd_essential(cfg: RunConfig, threads: int = 1) -> ResultTable:
    from .spectral.modal import essential_spectrum

    mat = _material(cfg)
    if cfg.get("analysis", "s0"):
        params = PoleParams(cfg.cplx("analysis", "s0"), cfg.cplx("analysis", "s1"))
    else:
        ports = cfg.named("port")
        if not ports:
            raise ConfigError("essential needs analysis.s0/s1 or a port")
        params = PoleParams(cfg.cplx(f"port.{ports[0]}", "s0"), cfg.cplx(f"port.{ports[0]}", "s1"))
    R = cfg.real("analysis", "half_width")
    trans = transverse_matrices(ScalarBasis(cfg.integer("analysis", "p")), (-R, R), cfg.integer("analysis", "trans_elements"))
    ess = essential_spectrum(params, trans, mat, (cfg.real("analysis", "r_min"), cfg.real("analysis", "r_max")),
                             cfg.integer("analysis", "n_samples"), cfg.real("analysis", "omega_window"))
    t = ResultTable(["curve", "r", "kappa", "omega"], complex_columns=("kappa", "omega"))
    for ci, c in enumerate(ess.curves):
        for r, k, w in zip(c.r, c.kappa, c.omega):
            t.add(ci, float(r), complex(k), complex(w))
    return t


def incoming_modes(ctx, omega, amplitude=1.0, search_box=(-6, 6, -6, 6)):
    """All incoming propagating modes at ``omega``, each scaled to unit ``L2`` profile."""
    from .spectral.dispersion import lamb_roots, mode_norm

    roots = lamb_roots(ctx, omega, search_box)
    inc = [w for w in roots if w.wave_class is WaveClass.INCOMING_PROPAGATING]
    return [(w, amplitude / mode_norm(ctx, w.branch, w.kappa, omega)) for w in inc]


def scatter_sweep(cfg: RunConfig, prob: Optional[Problem] = None, threads: int = 1) -> ResultTable:
    from .spectral.dispersion import DispersionContext

    prob = build_problem(cfg) if prob is None else prob
    system = prob.system()
    port = cfg.get("analysis", "incident_port")
    amp = cfg.real("analysis", "amplitude")
    region = cfg.get("analysis", "stress_region") or None
    box = tuple(cfg.list_of("analysis", "search_box", float))
    t = ResultTable(["omega", "stress_norm", "n_incident", "status"])

    def run(w):
        w = float(w)
        try:
            rhs = np.zeros(system.n, dtype=complex)
            n_inc = 0
            if port and cfg.get("analysis", "incident") != "none":
                pd = system.ports[port]
                from .waveguide import _port_material

                ctx = DispersionContext(_port_material(prob.dofs, pd.port), pd.frame.half_width)
                modes = incoming_modes(ctx, w, amp, box)
                n_inc = len(modes)
                rhs = incident_rhs(system, port, modes, w)
            sol = scattering_solve(system, w, rhs)
            return w, stress_norm(prob.dofs, sol.coeffs, region), n_inc, "ok"
        except HsieError as exc:
            return w, float("nan"), 0, type(exc).__name__

    for row in _pmap(run, _omega_grid(cfg), threads):
        t.add(*row)
    return t


def cmd_scatter(cfg: RunConfig, threads: int = 1, out_dir: Optional[str] = None) -> ResultTable:
    prob = build_problem(cfg)
    t = scatter_sweep(cfg, prob, threads)
    dump = cfg.sections.get("output", {}).get("field_dump")
    if dump and out_dir is not None:
        from .spectral.dispersion import DispersionContext
        from .waveguide import _port_material

        w = cfg.real("analysis", "dump_omega")
        system = prob.system()
        port = cfg.get("analysis", "incident_port")
        rhs = None
        if port:
            pd = system.ports[port]
            ctx = DispersionContext(_port_material(prob.dofs, pd.port), pd.frame.half_width)
            rhs = incident_rhs(system, port, incoming_modes(ctx, w, cfg.real("analysis", "amplitude")), w)
        sol = scattering_solve(system, w, rhs)
        pts = lobatto_dump(prob.dofs, sol.coeffs)
        ft = ResultTable(["x", "y", "u1", "u2"], complex_columns=("u1", "u2"))
        for row in pts:
            ft.add(float(row[0].real), float(row[1].real), complex(row[2]), complex(row[3]))
        with open(os.path.join(out_dir, dump), "w", encoding="utf-8") as fh:
            fh.write(ft.to_csv())
    return t


def cmd_convected1d(cfg: RunConfig, threads: int = 1) -> ResultTable:
    omega = cfg.real("analysis", "omega")
    params = PoleParams(cfg.cplx("analysis", "s0"), cfg.cplx("analysis", "s1", cfg.get("analysis", "s0")))
    datum = cfg.cplx("analysis", "neumann_datum")
    roots = convected_roots(omega)
    lam = min(roots, key=lambda z: float(g_value(params, z)))
    exact = datum / lam
    t = ResultTable(["n", "trace", "error", "g"], complex_columns=("trace",))
    for n in cfg.list_of("analysis", "n_long", int):
        _, tr = solve_convected_1d(params, omega, datum, n)
        t.add(n, tr, abs(tr - exact), float(g_value(params, lam)))
    return t


def cmd_dirichlet_eig(cfg: RunConfig, threads: int = 1) -> ResultTable:
    from .spectral.modal import dirichlet_eigenvalues

    rect = cfg.list_of("analysis", "rect", float)
    if len(rect) != 4:
        raise ConfigError("rect needs four numbers x0,x1,y0,y1", line=cfg.line("analysis", "rect"))
    w = dirichlet_eigenvalues(tuple(rect), _material(cfg), cfg.integer("analysis", "p"), cfg.integer("analysis", "n_wanted"),
                              cfg.integer("analysis", "n_elem"))
    t = ResultTable(["index", "omega"])
    for i, v in enumerate(w):
        t.add(i, float(v))
    return t


def cmd_choose_params(cfg: RunConfig, threads: int = 1) -> ResultTable:
    from .spectral.dispersion import lamb_roots

    ctx = _ctx(cfg)
    omega = cfg.real("analysis", "omega")
    roots = lamb_roots(ctx, omega, tuple(cfg.list_of("analysis", "search_box", float)))
    seed = PoleParams(cfg.cplx("analysis", "seed_s0"), cfg.cplx("analysis", "seed_s1"))
    theta = cfg.real("analysis", "theta") if cfg.get("analysis", "theta") else default_theta(roots)
    params = params_case2(theta, seed, roots)
    ok, margin = separates(params, roots)
    t = ResultTable(["kappa", "branch", "wave_class", "g"], complex_columns=("kappa",))
    t.metadata.update({"s0": repr(params.s0), "s1": repr(params.s1), "theta": repr(theta), "margin": repr(margin)})
    for w in roots:
        t.add(w.kappa, w.branch.value, w.wave_class.value, float(g_value(params, w.laplace_point)))
    return t


HANDLERS = {
    "dispersion": cmd_dispersion,
    "converge": cmd_converge,
    "essential": cmd_essential,
    "convected1d": cmd_convected1d,
    "dirichlet-eig": cmd_dirichlet_eig,
    "choose-params": cmd_choose_params,
}


def run_command(command: str, cfg: RunConfig, threads: int = 1, seed: int = 0, out_dir: Optional[str] = None) -> ResultTable:
    if command == "resonances":
        table = cmd_resonances(cfg, threads, seed)
    elif command == "scatter":
        table = cmd_scatter(cfg, threads, out_dir)
    elif command in HANDLERS:
        table = HANDLERS[command](cfg, threads)
    else:
        raise ConfigError(f"unknown command {command!r}")
    table.metadata.update({"command": command, "config_sha256": cfg.digest(), "version": __version__})
    return table


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="hsie", description="Hardy space infinite elements for elastic waveguides")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="INI configuration file")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized start vectors")
    args = ap.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        os.makedirs(args.out, exist_ok=True)
        t0 = time.perf_counter()
        table = run_command(args.command, cfg, max(1, args.threads), args.seed, args.out)
        table.metadata["elapsed_s"] = f"{time.perf_counter() - t0:.3f}"
        name = cfg.sections.get("output", {}).get("table", f"{args.command}.csv")
        with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
            fh.write(table.to_csv())
    except ConfigError as exc:
        line = f" (line {exc.line})" if getattr(exc, "line", None) else ""
        print(f"config error{line}: {exc}", file=sys.stderr)
        return 2
    except (HsieError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
