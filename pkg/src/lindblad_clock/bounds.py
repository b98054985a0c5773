"""Order-of-magnitude bound arithmetic for Lindblad decay rates.

Everything else in the package works in rad/s with hbar = 1; this is the only
module that touches electron-volts, and every conversion goes through
:data:`HBAR_EV_S`.
"""
from __future__ import annotations

import math

from .errors import InputError

# CODATA 2018 values (exact SI definitions for e and h).
HBAR_EV_S = 6.582119569e-16
ELEMENTARY_CHARGE_J_PER_EV = 1.602176634e-19
HBAR_J_S = HBAR_EV_S * ELEMENTARY_CHARGE_J_PER_EV
PLANCK_EV_S = 2 * math.pi * HBAR_EV_S

# Clock transition frequencies in Hz.
REFERENCE_TRANSITIONS_HZ = {
    "yb171_hyperfine": 12.642812118466e9,
    "al27_clock": 1.121015393207857e15,
}

INERTIA_FACTORS = {"rod_center": 1.0 / 12.0, "rod_end": 1.0 / 3.0}


def _positive(**kw) -> None:
    for name, v in kw.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise InputError(f"{name} must be positive and finite, got {v!r}")


def rad_s_to_ev(rate: float) -> float:
    return rate * HBAR_EV_S


def ev_to_rad_s(energy: float) -> float:
    return energy / HBAR_EV_S


def hz_to_ev(freq: float) -> float:
    return freq * PLANCK_EV_S


def gamma_bound_ev(T: float) -> float:
    """hbar / T in eV: the decay rate an unaltered fringe of dark time ``T`` rules out."""
    _positive(T=T)
    return HBAR_EV_S / T


def fractional_imprecision(T: float, transition_energy_ev: float) -> float:
    """(hbar / T) / (E_e - E_g)."""
    _positive(T=T, transition_energy_ev=transition_energy_ev)
    return gamma_bound_ev(T) / transition_energy_ev


def pointer_level_spacing(mass: float, length: float, n: int = 0, inertia: str = "rod_center") -> float:
    """Spacing E_{n+1} - E_n = hbar^2 (2n + 1) / (2 I) of a free planar rotor, in eV.

    The pointer is a uniform rod of ``mass`` (kg) and ``length`` (m) spinning
    about its center (``I = m L^2 / 12``) or about one end (``I = m L^2 / 3``).
    """
    _positive(mass=mass, length=length)
    if n < 0 or int(n) != n:
        raise InputError(f"level index must be a non-negative integer, got {n!r}")
    try:
        moment = INERTIA_FACTORS[inertia] * mass * length**2
    except KeyError:
        raise InputError(f"unknown inertia convention {inertia!r}") from None
    joules = HBAR_J_S**2 * (2 * n + 1) / (2 * moment)
    return joules / ELEMENTARY_CHARGE_J_PER_EV


def bound_report(ramsey_time_s: float, transition_energy_ev: float | None = None,
                 quoted_fractional: float | None = None, pointer: dict | None = None) -> dict:
    """Both readings of an unaltered fringe: a per-transition bound on gamma and,
    when the transition energy is known, a bound on gamma / (E_e - E_g).

    ``quoted_fractional`` restates a published fractional imprecision as a
    bound on gamma / (E_e - E_g) (and on gamma itself if the energy is given).
    """
    report = {
        "ramsey_time_s": ramsey_time_s,
        "gamma_bound_ev": gamma_bound_ev(ramsey_time_s),
        "gamma_bound_rad_s": 1.0 / ramsey_time_s,
    }
    if transition_energy_ev is not None:
        report["transition_energy_ev"] = transition_energy_ev
        report["fractional_imprecision"] = fractional_imprecision(ramsey_time_s, transition_energy_ev)
    if quoted_fractional is not None:
        _positive(quoted_fractional=quoted_fractional)
        report["quoted_fractional_bound"] = quoted_fractional
        if transition_energy_ev is not None:
            report["quoted_gamma_bound_ev"] = quoted_fractional * transition_energy_ev
    if pointer is not None:
        report["pointer_level_spacing_ev"] = pointer_level_spacing(
            pointer["mass_kg"], pointer["length_m"], pointer.get("level_index", 0),
            pointer.get("inertia", "rod_center"))
    return report
