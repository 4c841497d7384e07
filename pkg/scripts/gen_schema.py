"""Regenerate configs/schema.yaml from the field table in chaoscontrol.experiments."""

import copy
from pathlib import Path

import yaml

from chaoscontrol.experiments import _DEFAULT_OPT, _MISSING, SCHEMA

DOCS = {
    "K": "kick strength (>= 0)",
    "N": "Hilbert space dimension, hbar = 1/(2 pi N)",
    "N_list": "ascending list of dimensions for the sweep",
    "t_star": "control time in kick periods (>= 1)",
    "t_star_list": "ascending control times for the fidelity table",
    "echo_t_stars": "control times whose first pair also gets an echo series (may be empty)",
    "mu": "penalty weight on the summed squared amplitudes",
    "restarts": "independent Powell runs from random starting vectors",
    "seed": "master seed; restart r uses SeedSequence([seed, r])",
    "grid_offset": "position grid q_j = (j + offset)/N; 0.25 lifts the q -> -q symmetry of the unshifted grid",
    "slots": "active disorder kicks, subset of [main, mid1, mid2]",
    "optimizer": "Powell settings: max_iterations, f_tol, x_tol, init_scale, max_evaluations",
    "initial": "state: {kind: gaussian, q0, p0, sigma?} | {kind: cat, q1, q2, p0, sigma?} "
               "| {kind: random, seed} | {kind: file, path}",
    "target": "state descriptor, same forms as initial",
    "pair": "seed of the random initial/target pair",
    "pairs": "number of random pairs",
    "first_pair": "seed of the first pair; pairs use consecutive seeds",
    "init_scales": "starting amplitude scales tried for every pair; the smallest successful disorder is kept",
    "success_fidelity": "fidelity a run must reach to count in the sweep",
    "disorder_record": "optional record.json of an earlier control run whose main-slot disorder is used; "
                       "otherwise a control run is made",
    "n_seeds": "trajectories in each surface of section",
    "n_iter": "map iterations per trajectory",
    "grid": "cells per side for the chaos fraction",
    "lyapunov_iterations": "iterations of the tangent map per seed",
    "count": "matrices in the ensemble",
    "beta": "1 for GOE, 2 for GUE",
    "bin_width": "histogram bin width for the density check",
    "hbar": "hbar used for the autocorrelation time axis",
    "t_max": "autocorrelation computed on [0, t_max * hbar]",
    "t_points": "points in the autocorrelation time grid",
    "lyapunov": "exponent used in the logtime over Heisenberg time ratio",
}


class _NoAlias(yaml.SafeDumper):
    def ignore_aliases(self, data):
        return True


def document() -> dict:
    out = {
        "version": 1,
        "top_level": {"scenario": "one of " + ", ".join(SCHEMA), "parameters": "mapping, fields below",
                      "output_dir": "optional, relative to the config file; --out overrides"},
        "optimizer_defaults": dict(_DEFAULT_OPT),
        "scenarios": {},
    }
    for scen, fields in SCHEMA.items():
        d = {}
        for k, f in fields.items():
            e = {"doc": DOCS[k]}
            if f.default is not _MISSING:
                e["default"] = copy.deepcopy(f.default)
            if f.figure is not _MISSING and f.figure != f.default:
                e["figure_scale_default"] = copy.deepcopy(f.figure)
            d[k] = e
        out["scenarios"][scen] = d
    return out


if __name__ == "__main__":
    path = Path(__file__).resolve().parents[1] / "configs" / "schema.yaml"
    header = ("# Canonical config fields for `chaoscontrol run`.\n"
              "# Regenerate with `python3 scripts/gen_schema.py`; a test checks it matches the code.\n")
    path.write_text(header + yaml.dump(document(), Dumper=_NoAlias, sort_keys=False, width=110))
