#!/usr/bin/env python3
"""Writes models/example_heavytail.json.

The flow length is ceil(X) for a continuous variate X drawn from a mixture of a
point mass at 1, two lognormals and a Pareto tail. The flow size is
S = C0 * X**BETA, so every weighting on both axes is again a mixture of the
same families with shifted parameters:

  weighting by X**t   lognormal(mu, s)  -> lognormal(mu + t s^2, s), weight * exp(t mu + t^2 s^2 / 2)
                      pareto(xm, a)     -> pareto(xm, a - t),         weight * xm^t a / (a - t)

Octets weightings (t = BETA) are exact. Packets weightings use X in place of
ceil(X), which is close for long flows and only feeds the dominance check
and the proportional-duration occupancy model.
"""

import json
import math
import pathlib

C0 = 300.0
BETA = 1.1
POINT = 0.40
LOGNORMALS = [(0.45, 1.2, 1.0), (0.13, 4.0, 1.6)]
PARETO = (0.02, 2000.0, 2.6)


def uniform(w, x):
    return {"kind": "uniform", "weight": w, "params": {"low": x, "high": x}}


def lognormal(w, mu, sigma):
    return {"kind": "lognormal", "weight": w, "params": {"mu": mu, "sigma": sigma}}


def pareto(w, xm, alpha):
    return {"kind": "genpareto", "weight": w,
            "params": {"shape": 1.0 / alpha, "location": xm, "scale": xm / alpha}}


def normalized(components):
    total = sum(c["weight"] for c in components)
    for c in components:
        c["weight"] = c["weight"] / total
    return components


def weighted(t, scale, power, point_at, domain_min):
    """Mixture of the variate C = scale * X**power weighted by X**t."""
    comps = [uniform(POINT, point_at)]
    for w, mu, s in LOGNORMALS:
        comps.append(lognormal(w * math.exp(t * mu + 0.5 * t * t * s * s),
                               math.log(scale) + power * (mu + t * s * s), power * s))
    w, xm, a = PARETO
    comps.append(pareto(w * xm ** t * a / (a - t), scale * xm ** power, (a - t) / power))
    return {"domain_min": domain_min, "components": normalized(comps)}


def build():
    length = {
        "flows": weighted(0.0, 1.0, 1.0, 1, 1),
        "packets": weighted(1.0, 1.0, 1.0, 1, 1),
        "octets": weighted(BETA, 1.0, 1.0, 1, 1),
    }
    size = {
        "flows": weighted(0.0, C0, BETA, C0, 64),
        "packets": weighted(1.0, C0, BETA, C0, 64),
        "octets": weighted(BETA, C0, BETA, C0, 64),
    }
    return {"name": "example_heavytail", "max_packet_size": 1518, "axes": {"length": length, "size": size}}


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "models" / "example_heavytail.json"
    out.write_text(json.dumps(build(), indent=2) + "\n")
    print(out)


if __name__ == "__main__":
    main()
