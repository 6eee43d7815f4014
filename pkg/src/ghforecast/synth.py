"""Deterministic synthetic greenhouse campaigns at 15-minute cadence.

Two regimes with deliberately different coupling structure:

* ``chain``: six GH2-style variables where external drivers (diurnal
  sinusoids plus AR noise) push the internal temperature/humidity pair
  through low-pass responses; the only internal-internal interaction is
  that pair. Nearly one-way influence, smooth dynamics.
* ``feedback``: eight GH4-style variables adding PAR and CO2. Light
  drives photosynthesis which depletes internal CO2 and modulates
  transpiration cooling of the internal temperature, and a thresholded
  ventilation loop abruptly mixes internal temperature/CO2 toward the
  external values. Direction-dependent, regime-switching dynamics.

The generator is a set of difference equations, not a physics solver;
its job is producing datasets whose coupling structure separates a
purely temporal forecaster from a graph-structured one. Every stochastic
series draws from its own seeded stream, so zeroing one coupling leaves
all series that do not depend on it bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import json

import numpy as np

from .datapipe import STEP, STEPS_PER_DAY, TimeSeriesFrame
from .errors import ConfigError

REGIMES = ("chain", "feedback")

CHAIN_COLUMNS = ["OUT_temp", "OUT_RH", "OUT_rad", "OUT_wind_speed", "G2_temp", "G2_RH"]
FEEDBACK_COLUMNS = ["OUT_Temp", "OUT_Rad", "OUT_PAR", "OUT_CO2", "OUT_RH",
                    "G4_PAR", "G4_CO2", "G4_Temp"]

CHAIN_COUPLINGS = {
    "env": 0.075,          # envelope heat exchange per step
    "wind_mix": 0.02,      # extra exchange per (wind / 4)
    "rad_gain": 0.16,      # radiative heating at full sun
    "rh_on_temp": 0.004,   # humidity nudging temperature (pair coupling)
    "rh_env": 0.09,        # vapor exchange
    "temp_on_rh": 1.6,     # %RH per degC of internal warming
    "rad_dry": 0.35,       # radiation drying the air
}

FEEDBACK_COUPLINGS = {
    "env": 0.07,
    "rad_gain": 0.40,
    "par_trans": 0.62,     # PAR transmittance of the cover
    "pv_shade": 0.25,      # PV panel shading at full sun
    "co2_inf": 0.06,       # infiltration pulling CO2 toward ambient
    "co2_uptake": 9.0,     # photosynthetic CO2 drawdown per step
    "co2_resp": 0.9,       # nighttime respiration release
    "transp_cool": 0.30,   # transpiration cooling at full photosynthesis
    "co2_stomata": 0.8,    # CO2 surplus closing stomata (less cooling)
    "vent_mix": 0.30,      # temperature mixing fraction while venting
    "vent_mix_co2": 0.45,  # CO2 mixing fraction while venting
    "vent_open": 27.0,     # degC opening threshold
    "vent_close": 24.5,    # degC closing threshold
}

DEFAULT_DAYS = {"chain": 90, "feedback": 50}

_EPOCH = np.datetime64("2021-01-01T00:00:00", "s")

# stream tags: one independent seeded generator per stochastic series
_STREAMS = {
    "temp": 1, "rh": 2, "cloud": 3, "rad": 4, "wind": 5, "co2_out": 6, "par_out": 7,
    "in_temp": 11, "in_rh": 12, "in_par": 13, "in_co2": 14,
    "obs_temp": 21, "obs_rh": 22, "obs_co2": 23,
    "gaps": 99,
}


@dataclass
class SynthConfig:
    regime: str = "chain"
    days: int | None = None
    seed: int = 0
    couplings: dict = field(default_factory=dict)
    noise_std: float = 1.0
    gap_rate: float = 0.01
    season_phase: float = 0.0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.days is None:
            self.days = DEFAULT_DAYS[self.regime]
        if self.days < 2:
            raise ConfigError("need at least 2 days (imputation looks +-48h)")
        if not 0.0 <= self.gap_rate < 0.2:
            raise ConfigError(f"gap_rate must be in [0, 0.2), got {self.gap_rate}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        defaults = CHAIN_COUPLINGS if self.regime == "chain" else FEEDBACK_COUPLINGS
        unknown = set(self.couplings) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown couplings for {self.regime}: {sorted(unknown)}")
        merged = dict(defaults)
        merged.update(self.couplings)
        self.couplings = merged

    @property
    def rows(self) -> int:
        return self.days * STEPS_PER_DAY

    @property
    def columns(self):
        return list(CHAIN_COLUMNS if self.regime == "chain" else FEEDBACK_COLUMNS)

    def as_dict(self):
        return {
            "regime": self.regime,
            "days": self.days,
            "seed": self.seed,
            "couplings": dict(sorted(self.couplings.items())),
            "noise_std": self.noise_std,
            "gap_rate": self.gap_rate,
            "season_phase": self.season_phase,
        }


def _stream(cfg: SynthConfig, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, _STREAMS[name]])))


def _ar1(rng, n, rho, sigma_stat):
    """Stationary AR(1) samples with the given long-run standard deviation."""
    eps = rng.standard_normal(n) * sigma_stat * np.sqrt(1.0 - rho * rho)
    out = np.empty(n)
    x = rng.standard_normal() * sigma_stat
    for i in range(n):
        x = rho * x + eps[i]
        out[i] = x
    return out


def _externals(cfg: SynthConfig):
    n = cfg.rows
    s = cfg.noise_std
    t = np.arange(n)
    hours = (t % STEPS_PER_DAY) / 4.0
    day = t / STEPS_PER_DAY
    sun = np.clip(np.sin(np.pi * (hours - 6.0) / 12.0), 0.0, None)
    annual = np.sin(2.0 * np.pi * day / 365.0 - np.pi / 2.0 + cfg.season_phase)
    season = 1.0 + 0.25 * np.sin(2.0 * np.pi * day / 365.0 + cfg.season_phase)

    cloud = np.clip(0.75 + _ar1(_stream(cfg, "cloud"), n, 0.995, 0.25 * s), 0.25, 1.0)
    rad = np.clip(
        820.0 * season * sun * cloud * (1.0 + 0.05 * s * _stream(cfg, "rad").standard_normal(n)),
        0.0, None,
    )
    temp = (15.0 + 7.0 * annual + 4.2 * np.sin(2.0 * np.pi * (hours - 8.5) / 24.0)
            + _ar1(_stream(cfg, "temp"), n, 0.97, 1.3 * s))
    wind = np.clip(
        3.0 + 1.1 * np.sin(2.0 * np.pi * (hours - 15.0) / 24.0)
        + _ar1(_stream(cfg, "wind"), n, 0.9, 1.1 * s),
        0.0, None,
    )
    rh = np.clip(
        72.0 - 1.6 * (temp - 15.0) - 9.0 * rad / 820.0 - 1.2 * (wind - 3.0)
        + _ar1(_stream(cfg, "rh"), n, 0.95, 3.0 * s),
        12.0, 100.0,
    )
    return {"sun": sun, "rad": rad, "temp": temp, "wind": wind, "rh": rh}


def _generate_chain(cfg: SynthConfig) -> np.ndarray:
    n = cfg.rows
    c = cfg.couplings
    s = cfg.noise_std
    ext = _externals(cfg)
    temp_out, rh_out, rad, wind = ext["temp"], ext["rh"], ext["rad"], ext["wind"]
    rad_n = rad / 820.0

    eps_t = _stream(cfg, "in_temp").standard_normal(n) * 0.04 * s
    eps_r = _stream(cfg, "in_rh").standard_normal(n) * 0.30 * s
    t_in = np.empty(n)
    rh_in = np.empty(n)
    t_in[0] = temp_out[0] + 1.0
    rh_in[0] = 70.0
    for t in range(n - 1):
        exchange = c["env"] + c["wind_mix"] * wind[t] / 4.0
        t_in[t + 1] = (t_in[t]
                       + exchange * (temp_out[t] - t_in[t])
                       + c["rad_gain"] * rad_n[t]
                       + c["rh_on_temp"] * (rh_in[t] - 65.0)
                       + eps_t[t])
        d_temp = t_in[t + 1] - t_in[t]
        rh_in[t + 1] = np.clip(rh_in[t]
                               + c["rh_env"] * (rh_out[t] - rh_in[t])
                               - c["temp_on_rh"] * d_temp
                               - c["rad_dry"] * rad_n[t]
                               + eps_r[t], 5.0, 100.0)

    obs_t = t_in + _stream(cfg, "obs_temp").standard_normal(n) * 0.03 * s
    obs_r = rh_in + _stream(cfg, "obs_rh").standard_normal(n) * 0.40 * s
    return np.column_stack([temp_out, rh_out, rad, wind, obs_t, obs_r])


def _generate_feedback(cfg: SynthConfig, with_trace: bool = False):
    n = cfg.rows
    c = cfg.couplings
    s = cfg.noise_std
    ext = _externals(cfg)
    sun, temp_out, rh_out, rad = ext["sun"], ext["temp"], ext["rh"], ext["rad"]
    rad_n = rad / 820.0
    co2_out = 420.0 + _ar1(_stream(cfg, "co2_out"), n, 0.97, 4.0 * s)
    par_out = np.clip(
        2.1 * rad * (1.0 + 0.03 * s * _stream(cfg, "par_out").standard_normal(n)), 0.0, None
    )

    par_in = np.clip(
        c["par_trans"] * par_out * (1.0 - c["pv_shade"] * sun)
        + _stream(cfg, "in_par").standard_normal(n) * 6.0 * s,
        0.0, None,
    )
    photo = par_in / (par_in + 350.0)

    eps_t = _stream(cfg, "in_temp").standard_normal(n) * 0.04 * s
    eps_c = _stream(cfg, "in_co2").standard_normal(n) * 1.2 * s
    t_in = np.empty(n)
    co2_in = np.empty(n)
    t_in[0] = temp_out[0] + 1.0
    co2_in[0] = co2_out[0]
    vent_mask = np.zeros(n, dtype=bool)
    premix_temp = np.full(n, np.nan)
    venting = False
    for t in range(n - 1):
        stomata = np.clip(1.0 - c["co2_stomata"] * (co2_in[t] - 420.0) / 200.0, 0.3, 1.6)
        dt_temp = (c["env"] * (temp_out[t] - t_in[t])
                   + c["rad_gain"] * rad_n[t]
                   - c["transp_cool"] * photo[t] * stomata)
        dt_co2 = (c["co2_inf"] * (co2_out[t] - co2_in[t])
                  - c["co2_uptake"] * photo[t]
                  + c["co2_resp"] * (1.0 - sun[t]))
        t_next = t_in[t] + dt_temp + eps_t[t]
        c_next = co2_in[t] + dt_co2 + eps_c[t]
        # hysteresis on the (pre-mix) temperature; the vent mixes both
        # temperature and CO2 toward the external values within the step
        if venting and t_next < c["vent_close"]:
            venting = False
        elif not venting and t_next > c["vent_open"]:
            venting = True
        if venting:
            vent_mask[t + 1] = True
            premix_temp[t + 1] = t_next
            t_next = t_next + c["vent_mix"] * (temp_out[t] - t_next)
            c_next = c_next + c["vent_mix_co2"] * (co2_out[t] - c_next)
        t_in[t + 1] = t_next
        co2_in[t + 1] = c_next

    obs_t = t_in + _stream(cfg, "obs_temp").standard_normal(n) * 0.25 * s
    obs_c = co2_in + _stream(cfg, "obs_co2").standard_normal(n) * 2.0 * s
    values = np.column_stack([temp_out, rad, par_out, co2_out, rh_out, par_in, obs_c, obs_t])
    if with_trace:
        trace = {"vent": vent_mask, "premix_temp": premix_temp,
                 "internal_temp": t_in, "external_temp": temp_out}
        return values, trace
    return values


def generate(cfg: SynthConfig) -> TimeSeriesFrame:
    """Produce one campaign; gaps are punched at cfg.gap_rate."""
    values = _generate_chain(cfg) if cfg.regime == "chain" else _generate_feedback(cfg)
    stamps = _EPOCH + np.arange(cfg.rows) * STEP
    frame = TimeSeriesFrame(stamps, cfg.columns, values)
    if cfg.gap_rate > 0.0:
        frame, _ = punch_gaps(frame, cfg)
    return frame


def punch_gaps(frame: TimeSeriesFrame, cfg: SynthConfig):
    """Knock out cells at cfg.gap_rate and return (gapped frame, truth).

    Gaps are only punched where all four same-time-of-day neighbors
    (+-24h, +-48h) are inside the frame, so every gap is recoverable in
    principle. The truth table maps (row, column) to the removed value.
    """
    rng = _stream(cfg, "gaps")
    out = frame.copy()
    truth = {}
    lo, hi = 2 * STEPS_PER_DAY, frame.n_rows - 2 * STEPS_PER_DAY
    if hi <= lo or cfg.gap_rate == 0.0:
        return out, truth
    hits = rng.random((hi - lo, len(frame.columns))) < cfg.gap_rate
    for r, ci in zip(*np.nonzero(hits)):
        row = int(r) + lo
        name = frame.columns[int(ci)]
        truth[(row, name)] = float(out.values[row, ci])
        out.values[row, ci] = np.nan
    return out, truth


def truth_table_text(frame: TimeSeriesFrame, truth: dict) -> str:
    """Truth table as structured text (one JSON object per line)."""
    lines = [
        json.dumps({"row": row, "column": col, "timestamp": str(frame.timestamps[row]),
                    "value": value}, sort_keys=True)
        for (row, col), value in sorted(truth.items())
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def decoupled(cfg: SynthConfig) -> SynthConfig:
    """Copy of cfg with every coupling zeroed (thresholds keep their
    values; with zero mixing the vent does nothing)."""
    zeroed = {k: (v if k in ("vent_open", "vent_close") else 0.0)
              for k, v in cfg.couplings.items()}
    return replace(cfg, couplings=zeroed)
