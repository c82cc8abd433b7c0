"""Monte-Carlo experiment harness: scenario sampling, sweeps, CSV output.

Scenarios are drawn with a counter-based generator seeded by the cell seed
only, so any cell can be reproduced in isolation and sweep output is
byte-identical across runs and process layouts.
"""

from __future__ import annotations

import configparser
import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import driver
from .geometry import PolarPoint, Scenario, SystemGeometry, build_channels, build_sensing_model
from .schemes import SchemeId, run_scheme

CSV_HEADER = ("axis", "scheme", "seed", "secrecy_bps_hz", "crb_theta_rad2",
              "crb_range_m2", "status", "iters", "seconds")

SWEEP_AXES = ("power", "users", "tx_antennas", "crb_angle", "crb_range")


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    n_tx: int = 16
    n_rx: int = 8
    n_rf: int = 4
    carrier_hz: float = 30e9
    n_users: int = 2
    slots: int = 64
    power_dbm: float = 20.0
    noise_dbm: float = -84.0
    range_min_m: float = 10.0
    range_max_m: float = 20.0
    angle_min_rad: float = 0.0
    angle_max_rad: float = float(np.pi / 2)
    crb_margin: float = 10.0  # thresholds = margin * CRBs of the initial beams
    axis: str = "power"
    values: tuple = (10.0, 15.0, 20.0)
    schemes: tuple = tuple(s.value for s in SchemeId)
    seeds: tuple = tuple(range(20))
    schedule: driver.PenaltySchedule = field(default_factory=driver.PenaltySchedule)

    @property
    def geometry(self) -> SystemGeometry:
        return SystemGeometry.half_wavelength(self.n_tx, self.n_rx, self.n_rf,
                                              self.carrier_hz)


def desk_config() -> ExperimentConfig:
    return ExperimentConfig()


def paper_scale_config() -> ExperimentConfig:
    return ExperimentConfig(n_tx=128, n_rx=64, n_rf=8, n_users=4, slots=1000)


def _parse_seq(text: str, cast):
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(cast(part))
    return tuple(out)


def load_config(path: str) -> ExperimentConfig:
    """Read an INI experiment description; missing keys keep defaults."""
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    base = ExperimentConfig()
    kw = {}
    sysect = cp["system"] if cp.has_section("system") else {}
    for key, cast in (("n_tx", int), ("n_rx", int), ("n_rf", int),
                      ("carrier_hz", float)):
        if key in sysect:
            kw[key] = cast(sysect[key])
    scen = cp["scenario"] if cp.has_section("scenario") else {}
    for key, cast in (("n_users", int), ("slots", int), ("power_dbm", float),
                      ("noise_dbm", float), ("range_min_m", float),
                      ("range_max_m", float), ("angle_min_rad", float),
                      ("angle_max_rad", float), ("crb_margin", float)):
        if key in scen:
            kw[key] = cast(scen[key])
    if cp.has_section("sweep"):
        sw = cp["sweep"]
        if "axis" in sw:
            kw["axis"] = sw["axis"].strip()
        if "values" in sw:
            kw["values"] = _parse_seq(sw["values"], float)
        if "schemes" in sw:
            kw["schemes"] = tuple(s.strip() for s in sw["schemes"].split(","))
        if "seeds" in sw:
            kw["seeds"] = _parse_seq(sw["seeds"], int)
    if cp.has_section("solver"):
        so = cp["solver"]
        sched = {}
        for key, cast in (("rho_init", float), ("shrink", float),
                          ("eps_inner", float), ("eps_residual_scale", float),
                          ("max_outer", int), ("max_inner", int)):
            if key in so:
                sched[key] = cast(so[key])
        kw["schedule"] = replace(driver.PenaltySchedule(), **sched)
    cfg = replace(base, **kw)
    if cfg.axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {cfg.axis!r}")
    return cfg


def sample_scenario(cfg: ExperimentConfig, seed: int) -> Scenario:
    """Draw target and user positions; CRB thresholds start unconstrained."""
    rng = np.random.default_rng([seed, 0x6e66])
    points = []
    for _ in range(cfg.n_users + 1):
        r = rng.uniform(cfg.range_min_m, cfg.range_max_m)
        th = rng.uniform(cfg.angle_min_rad, cfg.angle_max_rad)
        points.append(PolarPoint(float(r), float(th)))
    noise = dbm_to_watts(cfg.noise_dbm)
    return Scenario(users=tuple(points[1:]), target=points[0],
                    noise_user=noise, noise_eve=noise,
                    power_budget=dbm_to_watts(cfg.power_dbm),
                    crb_angle_max=np.inf, crb_range_max=np.inf,
                    slots=cfg.slots)


def auto_thresholds(geom: SystemGeometry, scenario: Scenario,
                    margin: float) -> Scenario:
    """Set CRB limits to a fixed multiple of what the initial beams achieve."""
    from .crb import crb_joint, fim

    channels = build_channels(geom, scenario)
    sensing = build_sensing_model(geom, scenario)
    p0, _, _ = driver.initialize(geom, scenario, channels)
    cj = crb_joint(fim(p0, sensing, scenario.noise_eve, scenario.slots))
    return replace(scenario, crb_angle_max=margin * float(cj[0, 0]),
                   crb_range_max=margin * float(cj[1, 1]))


def build_cell_scenario(cfg: ExperimentConfig, value: float, seed: int):
    """Apply one sweep-axis value and finalize thresholds for a cell."""
    cell_cfg = cfg
    if cfg.axis == "power":
        cell_cfg = replace(cfg, power_dbm=value)
    elif cfg.axis == "users":
        cell_cfg = replace(cfg, n_users=int(value))
    elif cfg.axis == "tx_antennas":
        cell_cfg = replace(cfg, n_tx=int(value))
    geom = cell_cfg.geometry
    scenario = sample_scenario(cell_cfg, seed)
    margin = cfg.crb_margin
    if cfg.axis == "crb_angle" or cfg.axis == "crb_range":
        scenario = auto_thresholds(geom, scenario, margin)
        if cfg.axis == "crb_angle":
            scenario = replace(scenario, crb_angle_max=scenario.crb_angle_max * value / margin)
        else:
            scenario = replace(scenario, crb_range_max=scenario.crb_range_max * value / margin)
    else:
        scenario = auto_thresholds(geom, scenario, margin)
    return geom, scenario


@dataclass(frozen=True)
class SweepRow:
    axis: str
    scheme: str
    seed: int
    secrecy: float
    crb_theta: float
    crb_range: float
    status: str
    iters: int
    seconds: float

    def as_record(self):
        return (self.axis, self.scheme, str(self.seed),
                _fmt(self.secrecy), _fmt(self.crb_theta), _fmt(self.crb_range),
                self.status, str(self.iters), _fmt(self.seconds))


def _fmt(x: float) -> str:
    return "%.9g" % x


def run_cell(cfg: ExperimentConfig, value: float, scheme_name: str,
             seed: int) -> SweepRow:
    axis_label = f"{cfg.axis}={_fmt(value)}"
    try:
        geom, scenario = build_cell_scenario(cfg, value, seed)
        rep = run_scheme(SchemeId(scheme_name), geom, scenario,
                         schedule=cfg.schedule)
        return SweepRow(axis=axis_label, scheme=scheme_name, seed=seed,
                        secrecy=rep.secrecy, crb_theta=rep.crb_angle,
                        crb_range=rep.crb_range, status=rep.status,
                        iters=rep.inner_solves, seconds=rep.seconds)
    except Exception as exc:  # record the failure, keep the sweep going
        return SweepRow(axis=axis_label, scheme=scheme_name, seed=seed,
                        secrecy=float("nan"), crb_theta=float("nan"),
                        crb_range=float("nan"),
                        status=f"error:{type(exc).__name__}", iters=0,
                        seconds=0.0)


def run_sweep(cfg: ExperimentConfig) -> list:
    rows = []
    for value in cfg.values:
        for scheme_name in cfg.schemes:
            for seed in cfg.seeds:
                rows.append(run_cell(cfg, value, scheme_name, seed))
    rows.sort(key=lambda r: (r.axis, r.scheme, r.seed))
    return rows


def emit_csv(rows: list, out=None) -> str:
    """RFC-4180 output with LF line endings and %.9g floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow(r.as_record())
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text
