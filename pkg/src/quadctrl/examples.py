"""Built-in example systems and the JSON system-file format.

A system file is a JSON object

    {"name": ..., "n": ..., "kind": "affine" | "nonlinear",
     "equilibrium": {"x": [...], "u": "0"},
     "f0": [...], "f1": [...]            (affine)
     "f": [...]                          (nonlinear)}

where each field is a list of components and each component a list of
monomial records {"c": coefficient string, "px": exponent list, "pu": int}.
Coefficients are exact strings ("1/3" or "0.25"), never binary floats, so a
file round-trips to the identical classification.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .lie_analysis import ControlSystem
from .polyfield import (
    Polynomial,
    PolyVectorField,
    format_rational,
    parse_rational,
    translate_to_origin,
)


class SystemFileError(ValueError):
    pass


def _component_from_records(n: int, records: Sequence[Dict], allow_u: bool) -> Polynomial:
    terms = {}
    for idx, rec in enumerate(records):
        try:
            c = parse_rational(str(rec["c"]))
            px = tuple(int(e) for e in rec["px"])
            pu = int(rec.get("pu", 0))
        except (KeyError, ValueError, TypeError) as exc:
            raise SystemFileError(f"bad monomial record #{idx}: {rec!r} ({exc})") from exc
        if len(px) != n:
            raise SystemFileError(f"monomial record #{idx}: px has length {len(px)}, expected {n}")
        if pu and not allow_u:
            raise SystemFileError(f"monomial record #{idx}: pu > 0 is only valid for nonlinear 'f'")
        if any(e < 0 for e in px) or pu < 0:
            raise SystemFileError(f"monomial record #{idx}: negative exponent")
        key = (px, pu)
        terms[key] = terms.get(key, Fraction(0)) + c
    return Polynomial(n, terms)


def _field_from_records(n: int, comps: Sequence[Sequence[Dict]], allow_u: bool) -> PolyVectorField:
    if len(comps) != n:
        raise SystemFileError(f"field has {len(comps)} components, expected {n}")
    return PolyVectorField([_component_from_records(n, c, allow_u) for c in comps])


def records_from_component(p: Polynomial) -> List[Dict]:
    out = []
    for (px, pu), c in p.sorted_terms():
        rec = {"c": format_rational(c), "px": list(px)}
        if pu:
            rec["pu"] = pu
        out.append(rec)
    return out


def system_to_file(sys: ControlSystem, equilibrium_x: Optional[Sequence] = None,
                   equilibrium_u=Fraction(0)) -> Dict:
    x_e = [Fraction(0)] * sys.n if equilibrium_x is None else [Fraction(v) for v in equilibrium_x]
    doc: Dict = {
        "name": sys.name,
        "n": sys.n,
        "kind": sys.kind,
        "equilibrium": {
            "x": [format_rational(v) for v in x_e],
            "u": format_rational(Fraction(equilibrium_u)),
        },
    }
    if sys.kind == "affine":
        doc["f0"] = [records_from_component(p) for p in sys.f0.components]
        doc["f1"] = [records_from_component(p) for p in sys.f1.components]
    else:
        doc["f"] = [records_from_component(p) for p in sys.rhs_field().components]
    return doc


def load_system(doc: Dict) -> ControlSystem:
    """Parse a system file and translate its equilibrium to the origin."""
    try:
        name = str(doc["name"])
        n = int(doc["n"])
        kind = str(doc["kind"])
    except (KeyError, ValueError, TypeError) as exc:
        raise SystemFileError(f"missing or malformed header field: {exc}") from exc
    if n < 1:
        raise SystemFileError("dimension must be positive")
    eq = doc.get("equilibrium", {"x": ["0"] * n, "u": "0"})
    try:
        x_e = [parse_rational(str(v)) for v in eq["x"]]
        u_e = parse_rational(str(eq.get("u", "0")))
    except (KeyError, ValueError) as exc:
        raise SystemFileError(f"malformed equilibrium: {exc}") from exc
    if len(x_e) != n:
        raise SystemFileError("equilibrium has wrong dimension")
    if kind == "affine":
        if "f0" not in doc or "f1" not in doc:
            raise SystemFileError("affine systems need fields 'f0' and 'f1'")
        f0 = _field_from_records(n, doc["f0"], allow_u=False)
        f1 = _field_from_records(n, doc["f1"], allow_u=False)
        if any(v != 0 for v in x_e) or u_e != 0:
            # shift the affine pair: g0 = (f0 + u_e f1) o (x + x_e), g1 = f1 o (x + x_e)
            drift = PolyVectorField(
                [p0 + p1.scale(u_e) for p0, p1 in zip(f0.components, f1.components)]
            )
            f0 = translate_to_origin(drift, x_e, 0)
            f1 = PolyVectorField([p.shift(x_e, 0) for p in f1.components])
        return ControlSystem.affine(name, f0, f1)
    if kind == "nonlinear":
        if "f" not in doc:
            raise SystemFileError("nonlinear systems need field 'f'")
        f = _field_from_records(n, doc["f"], allow_u=True)
        if any(v != 0 for v in x_e) or u_e != 0:
            f = translate_to_origin(f, x_e, u_e)
        return ControlSystem.nonlinear(name, f)
    raise SystemFileError(f"unknown kind {kind!r} (expected 'affine' or 'nonlinear')")


# ---------------------------------------------------------------------------
# built-in fixtures (the worked examples of the underlying theory)


def _mono(c, px, pu: int = 0) -> Dict:
    rec = {"c": str(c), "px": list(px)}
    if pu:
        rec["pu"] = pu
    return rec


def _fixture_docs() -> Dict[str, Dict]:
    docs: Dict[str, Dict] = {}

    docs["integrator1d"] = {
        "name": "integrator1d", "n": 1, "kind": "affine",
        "equilibrium": {"x": ["0"], "u": "0"},
        "f0": [[]],
        "f1": [[_mono(1, [0])]],
    }
    docs["absorbed"] = {
        "name": "absorbed", "n": 1, "kind": "affine",
        "equilibrium": {"x": ["0"], "u": "0"},
        "f0": [[_mono(1, [2])]],
        "f1": [[_mono(1, [0])]],
    }
    docs["double_integrator"] = {
        "name": "double_integrator", "n": 2, "kind": "affine",
        "equilibrium": {"x": ["0", "0"], "u": "0"},
        "f0": [[], [_mono(1, [1, 0])]],
        "f1": [[_mono(1, [0, 0])], []],
    }
    docs["easy_drift"] = {
        "name": "easy_drift", "n": 2, "kind": "affine",
        "equilibrium": {"x": ["0", "0"], "u": "0"},
        "f0": [[], [_mono(1, [2, 0])]],
        "f1": [[_mono(1, [0, 0])], []],
    }
    docs["cubic"] = {
        "name": "cubic", "n": 2, "kind": "affine",
        "equilibrium": {"x": ["0", "0"], "u": "0"},
        "f0": [[], [_mono(1, [3, 0])]],
        "f1": [[_mono(1, [0, 0])], []],
    }
    docs["toy_manifold"] = {
        "name": "toy_manifold", "n": 2, "kind": "affine",
        "equilibrium": {"x": ["0", "0"], "u": "0"},
        "f0": [[], []],
        "f1": [[_mono(1, [0, 0])], [_mono(2, [1, 0])]],
    }
    docs["drift_bent"] = {
        "name": "drift_bent", "n": 2, "kind": "affine",
        "equilibrium": {"x": ["0", "0"], "u": "0"},
        "f0": [[], [_mono(1, [2, 0])]],
        "f1": [[_mono(1, [0, 0])], [_mono(2, [1, 0])]],
    }
    docs["bent"] = {
        "name": "bent", "n": 2, "kind": "affine",
        "equilibrium": {"x": ["0", "0"], "u": "0"},
        "f0": [[], []],
        "f1": [[_mono(1, [0, 0])], [_mono(2, [1, 0]), _mono(1, [0, 1])]],
    }
    docs["u2_drift"] = {
        "name": "u2_drift", "n": 2, "kind": "nonlinear",
        "equilibrium": {"x": ["0", "0"], "u": "0"},
        "f": [
            [_mono(1, [0, 0], pu=1)],
            [_mono(1, [2, 0]), _mono(1, [0, 0], pu=2), _mono(1, [0, 0], pu=3)],
        ],
    }
    docs["sussmann"] = {
        "name": "sussmann", "n": 3, "kind": "affine",
        "equilibrium": {"x": ["0", "0", "0"], "u": "0"},
        "f0": [[], [_mono(1, [1, 0, 0])], [_mono(1, [3, 0, 0]), _mono(1, [0, 2, 0])]],
        "f1": [[_mono(1, [0, 0, 0])], [], []],
    }
    docs["competition"] = {
        "name": "competition", "n": 3, "kind": "affine",
        "equilibrium": {"x": ["0", "0", "0"], "u": "0"},
        "f0": [[], [_mono(1, [1, 0, 0])], [_mono(1, [2, 0, 0]), _mono(-1, [0, 2, 0])]],
        "f1": [[_mono(1, [0, 0, 0])], [], []],
    }

    k = 2  # quadratic obstruction of order 2 (integrator chain of length 2)
    n = k + 1
    f0 = [[] for _ in range(n)]
    for j in range(1, k):
        px = [0] * n
        px[j - 1] = 1
        f0[j] = [_mono(1, px)]
    px_sq = [0] * n
    px_sq[k - 1] = 2
    px_cub = [0] * n
    px_cub[0] = 3
    f0[k] = [_mono(1, px_sq), _mono(1, px_cub)]
    docs["opt_affine_k"] = {
        "name": "opt_affine_k", "n": n, "kind": "affine",
        "equilibrium": {"x": ["0"] * n, "u": "0"},
        "f0": f0,
        "f1": [[_mono(1, [0] * n)]] + [[] for _ in range(n - 1)],
    }
    f_nl = [[_mono(1, [0] * n, pu=1)]]
    for j in range(1, k):
        px = [0] * n
        px[j - 1] = 1
        f_nl.append([_mono(1, px)])
    f_nl.append([_mono(1, px_sq), _mono(1, [0] * n, pu=3)])
    docs["opt_nonlinear_k"] = {
        "name": "opt_nonlinear_k", "n": n, "kind": "nonlinear",
        "equilibrium": {"x": ["0"] * n, "u": "0"},
        "f": f_nl,
    }

    docs["bilinear"] = {
        "name": "bilinear", "n": 5, "kind": "affine",
        "equilibrium": {"x": ["1", "0", "0", "0", "0"], "u": "0"},
        "f0": [
            [], [], [], [],
            [_mono(1, [0, 0, 0, 0, 1]), _mono(1, [0, 0, 0, 1, 0])],
        ],
        "f1": [
            [],
            [_mono(1, [1, 0, 0, 0, 0])],
            [_mono(2, [0, 1, 0, 0, 0])],
            [_mono(3, [0, 0, 1, 0, 0])],
            [_mono(1, [0, 1, 0, 0, 0])],
        ],
    }
    return docs


_FIXTURES = _fixture_docs()


def example_names() -> List[str]:
    return sorted(_FIXTURES)


def example_doc(name: str) -> Dict:
    if name not in _FIXTURES:
        raise KeyError(f"unknown example {name!r}; known: {', '.join(example_names())}")
    import copy

    return copy.deepcopy(_FIXTURES[name])


def example_system(name: str) -> ControlSystem:
    return load_system(example_doc(name))
