"""
Hand-transcribed LPU graph data.

Vertex names are monomial labels with the L/R tag, e.g. "x3y2R", "xyL", "1L".
Cycles are vertex sequences without the closing repeat. Edges between
vertices of one half come from shared Z checks of the code and are derived,
not listed; only the extra expander edges are given here.

The checksum is (vertices, edges, cycles, total cycle length) of the full
graph and is compared against the built structure on load.
"""

DATA_VERSION = 3

LPU_TABLES = {
    "gross": {
        "identify": ("x4R", "x9yL"),
        "expanders_l": [],
        "expanders_r": [],
        "cycles_l": [
            ["x4L", "x3y2R", "x3yR", "x5L"],
            ["x3y5R", "x3R", "x6y5L", "x4y2L"],
            ["x3y5R", "x3R", "x6y5L", "x4R", "x5y4L"],
            ["x4L", "x3y2R", "x6yL", "x5y4L", "x4R"],
            ["x3yR", "x3y2R", "x6yL", "x4y2R", "x5L"],
        ],
        "cycles_r": [
            ["x9yL", "x8y4R", "x8y5R", "x11y4L"],
            ["xyL", "xR", "x4y4R", "x3y4L"],
            ["1L", "y5R", "x9R", "x9yL", "x8y4R"],
        ],
        "bridge_top": [
            "x6y5L", "x4y2L", "x3y5R", "x5y4L", "x6yL", "x4y2R",
            "x5L", "x4L", "x3y2R", "x3yR", "x3R",
        ],
        "bridge_bottom": [
            "x11y4L", "x8y5R", "x8y4R", "1L", "xR", "x4y4R",
            "x8L", "x9R", "y5R", "x3y4L", "xyL",
        ],
        "triangle": ["x4R", "x6y5L", "x11y4L"],
        "checksum": (23, 47, 19, 79),
    },
    "two-gross": {
        "identify": ("x3y2R", "x10y11L"),
        "expanders_l": [("x3y3L", "x7y11L"), ("xy9R", "x8y5R")],
        "expanders_r": [("x5y5L", "x11y10R"), ("x11y9R", "x2y6R")],
        "cycles_l": [
            ["x2L", "x3y3L", "x4y3L"],
            ["x7y11L", "x8y2L", "x9y2L"],
            ["xy10R", "xy9R", "x4y8R"],
            ["x8y5R", "x8y4R", "x11y3R"],
            ["x6y7L", "x5y3R", "x8y2L", "x7y11L", "x6y7R"],
            ["x3y3L", "x4y3L", "x5y3R", "x8y2L", "x7y11L"],
            ["x7y11L", "x6y7R", "x8y6L", "x7y3R", "x9y2L"],
            ["x2y2L", "xy10R", "xy9R", "x8y5R", "x11y3R"],
            ["x7y4L", "x7y3R", "x8y6L", "x8y5R", "x8y4R"],
            ["x2y2L", "x11y3R", "x8y4R", "x7y4L", "x3y2R"],
            ["x3y3L", "x3y2R", "x7y4L", "x7y3R", "x9y2L", "x7y11L"],
        ],
        "cycles_r": [
            ["x11y2L", "xy5L", "y5L"],
            ["x4y2L", "x5y5L", "x6y5L"],
            ["x11y8R", "x2y6R", "x11y9R"],
            ["x11y8R", "x2y6R", "x11y7R"],
            ["x2y10R", "x2y9R", "x5y8R"],
            ["x5y5L", "x2y6R", "x11y9R", "x11y10R"],
            ["x5y5L", "x6y5L", "x8y8L", "x10y11L", "x11y10R"],
            ["x11y2L", "xy5L", "x11y6R", "x8y7R", "x8y8L", "x10y11L"],
            ["y5L", "xy8L", "x11y9R", "x11y10R", "x10y11L", "x11y2L"],
        ],
        "bridge_top": [
            "x7y4L", "x7y3R", "x8y6L", "x6y7R", "x7y11L", "x3y3L", "x2L", "x4y3L", "x5y3R",
            "x6y7L", "x4y8R", "xy9R", "xy10R", "x2y2L", "x11y3R", "x8y5R", "x8y4R",
        ],
        "bridge_bottom": [
            "x8y8L", "x6y5L", "x4y2L", "x5y5L", "x2y6R", "x11y9R", "x11y10R", "x2y9R", "x5y8R",
            "x2y10R", "x2y11L", "xy8L", "y5L", "x11y2L", "xy5L", "x11y6R", "x8y7R",
        ],
        "triangle": ["x3y2R", "x7y4L", "x8y8L"],
        "checksum": (39, 81, 37, 151),
    },
}

# Degree census of the full LPU: {part: {degree: count}}.
CENSUS = {
    "gross": {
        "V_l": {6: 11},
        "E_l": {4: 1, 5: 2, 6: 13, 7: 2},
        "U_l": {4: 2, 5: 3},
        "B": {3: 1, 4: 10},
        "U_B": {3: 1, 4: 10},
        "U_r": {4: 2, 5: 1},
        "E_r": {4: 2, 5: 8, 6: 8},
        "V_r": {6: 11},
    },
    "two-gross": {
        "V_l": {5: 2, 6: 13, 7: 4},
        "E_l": {3: 1, 4: 1, 5: 8, 6: 12, 7: 10},
        "U_l": {3: 4, 5: 6, 6: 1},
        "B": {3: 1, 4: 16},
        "U_B": {3: 1, 4: 16},
        "U_r": {3: 5, 4: 1, 5: 1, 6: 2},
        "E_r": {4: 4, 5: 11, 6: 13, 7: 4},
        "V_r": {5: 2, 6: 13, 7: 4},
    },
}

LPU_SIZE = {"gross": 90, "two-gross": 158}
