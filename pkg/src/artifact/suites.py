"""Bundled reference configurations.

Each suite is a plain config mapping in the same shape as a TOML file. None
of them stores a tuned coupling; tuning runs on the experiment grid.
"""

import copy

_GRID = {"N": 800, "R_max": 40.0}

_SUITES = {
    "generic-well": {
        "expect": "generic",
        "potential": {"family": "square_well", "params": [1.0], "coupling": -1.0},
        "waves": {"ell_max": 2},
        "evolve": {"data": {"width": 0.15, "waves": {"0": 1.0}}},
    },
    "kind1-well": {
        "expect": "kind1",
        "potential": {"family": "square_well", "params": [1.0]},
        "tune": {"wave": 0, "index": 0},
        "waves": {"ell_max": 2},
        "evolve": {"data": {"width": 0.15, "waves": {"0": 1.0}}},
    },
    "kind2-pwave": {
        "expect": "kind2",
        "potential": {"family": "square_well", "params": [1.0]},
        "tune": {"wave": 1, "index": 0},
        "waves": {"ell_max": 2},
        "evolve": {"data": {"width": 0.15, "waves": {"0": 1.0, "1": 1.0}}},
    },
    "kind3-combined": {
        "expect": "kind3",
        "potential": {"family": "sum_of_wells", "params": [1.0, 1.0, 0.3, 5.0]},
        "tune": {"waves": [0, 1], "indices": [1, 0], "shape_param": 3, "shape_bracket": [4.0, 8.0]},
        "waves": {"ell_max": 2},
        "evolve": {"data": {"width": 0.15, "waves": {"0": 1.0, "1": 1.0}}},
    },
    "kind2-E1": {
        "expect": "kind2",
        "potential": {"family": "square_well", "params": [1.0]},
        "tune": {"wave": 3, "index": 0},
        "waves": {"ell_max": 3},
        "evolve": {"subtract": [], "e1_shortcut": True,
                   "data": {"width": 0.15, "waves": {"3": 1.0}}},
    },
}


def bundled_suites():
    """Sorted suite names."""
    return sorted(_SUITES)


def suite_config(name, action="full"):
    if name not in _SUITES:
        raise KeyError(f"unknown suite {name!r}; available: {', '.join(bundled_suites())}")
    cfg = copy.deepcopy(_SUITES[name])
    cfg.setdefault("grid", dict(_GRID))
    cfg["action"] = action
    cfg["suite"] = name
    return cfg
