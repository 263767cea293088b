"""Regenerate fixtures/parity.json from the installed core.

Every expected value is produced by the core's Python API at thread count 1
and serialized with shortest-round-trip floats, so the binding tests can
compare bit for bit. Run from anywhere:

    python3 bindings/scripts/make_fixtures.py
"""
import json
import os
import tempfile

import numpy as np

import tempdet as td

OUT = os.path.join(os.path.dirname(__file__), "..", "fixtures", "parity.json")


def estimate_cases():
    cases = [
        {"m": 2048, "cn": 8, "csg": 3.85, "variant": "csgcn"},
        {"m": 512, "variant": "plain"},
        {"m": 300, "cn": 101, "variant": "cn"},
        {"m": 768, "csg": 5.5, "variant": "csg"},
        {"m": 512, "variant": "unit"},
        {"m": 64, "variant": "sqrt_m"},
        {"m": 4, "variant": "plain"},
    ]
    for case in cases:
        task = td.TaskDescriptor(m=case["m"], cn=case.get("cn"),
                                 csg=case.get("csg"))
        case["temperature"] = td.estimate_temperature(task, case["variant"])
    return cases


def cluster_points(means, sigma, per_class, seed):
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for idx, mean in enumerate(means):
        pts = rng.normal(0.0, sigma, size=(per_class, len(mean))) + mean
        feats.append(pts)
        labels.extend([idx] * per_class)
    return td.LabeledFeatureSet(np.vstack(feats), np.array(labels))


def csg_cases():
    datasets = [
        ("separable-pair",
         cluster_points([[-50.0, 0.0, 0.0], [50.0, 0.0, 0.0]], 0.5, 30, 0),
         td.CsgConfig(seed=0)),
        ("three-cluster-overlap",
         cluster_points([[0.0, 0.0], [10.0, 0.0], [5.0, 8.66]], 3.0, 40, 5),
         td.CsgConfig(k=3, samples_per_class=100, seed=11)),
    ]
    cases = []
    for name, data, cfg in datasets:
        result = td.compute_csg(data, cfg, threads=1)
        cases.append({
            "name": name,
            "features": [[float(v) for v in row] for row in data.features],
            "labels": [int(v) for v in data.labels],
            "config": cfg.to_document(),
            "csg": result.csg,
            "similarity": [[float(v) for v in row]
                           for row in result.similarity],
            "eigenvalues": [float(v) for v in result.eigenvalues],
        })
    return cases


def planted_grid_text():
    alpha, beta = 0.7, 3.0
    grids = []
    for m in (64, 256, 1024, 4096):
        peak = min(max(alpha * m ** 0.5 + beta, 1.0), 512.0)
        temps = [2.0 ** (j / 8.0) for j in range(73)]
        rows = [(t, 100.0 * np.exp(-(np.log(t) - np.log(peak)) ** 2))
                for t in temps]
        grids.append(td.ConditionGrid(
            condition_id=f"cond-m{m}", m=m, cn=10, csg=None,
            samples=tuple((t, float(a), 0) for t, a in rows)))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "grid.txt")
        td.write_grid_file(path, grids)
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return grids, text


def fit_cases():
    grids, text = planted_grid_text()
    spec = td.FitSpec(variant="plain",
                      de=td.DifferentialEvolutionSettings(seed=0))
    result = td.fit(grids, spec)
    coeffs = result.coefficients
    return [{
        "name": "planted-plain-seed0",
        "grid_text": text,
        "variant": "plain",
        "seed": 0,
        "alpha": coeffs.alpha,
        "beta": coeffs.beta,
        "gamma": coeffs.gamma,
        "delta": coeffs.delta,
        "objective": result.objective_value,
    }]


def main():
    doc = {
        "core_version": td.__version__,
        "estimate": estimate_cases(),
        "csg": csg_cases(),
        "fit": fit_cases(),
    }
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    print(f"wrote {os.path.normpath(OUT)}")


if __name__ == "__main__":
    main()
