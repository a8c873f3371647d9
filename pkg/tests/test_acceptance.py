"""Exit criteria. Each test prints one PASS/FAIL line (see the terminal summary)."""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from isorecover.certifier import RecoveryConfig, certify, recover_oracle, recover_robust
from isorecover.cli import main
from isorecover.errors import NoConsensus
from isorecover.extension import LabeledSimplex, check_distance_preserving, extend_finite_isometry, verify_gram_equality
from isorecover.geometry import polarization_rows
from isorecover.isometry import EuclideanIsometry, random_isometry
from isorecover.measures import CorrespondenceSet, CorruptedMap, MeasureModel, make_correspondences, substream
from isorecover.trilateration import anchor_distances, equidistance_collapse, locate

from conftest import ACCEPTANCE_LINES, random_simplex
from oracles import brute_force_best_consensus


@contextmanager
def criterion(name, budget_s):
    """Run a criterion body, time it, and record one summary line."""
    checks = {}
    start = time.perf_counter()
    try:
        yield checks
    except Exception as exc:
        ACCEPTANCE_LINES.append(f"FAIL  {name}: {type(exc).__name__}: {exc}")
        raise
    elapsed = time.perf_counter() - start
    checks["runtime"] = elapsed <= budget_s
    ok = all(checks.values())
    detail = ", ".join(f"{k}={'ok' if v else 'FAILED'}" for k, v in checks.items())
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name} ({elapsed:.2f}s / {budget_s}s): {detail}")
    assert ok, detail


def test_extension_round_trip():
    rng = np.random.default_rng(1)
    with criterion("finite-isometry extension round trip, d=1..8 x 1000", 10.0) as checks:
        worst_q, worst_b = 0.0, 0.0
        for d in range(1, 9):
            for _ in range(1000):
                H = random_isometry(d, rng)
                S = rng.standard_normal((d + 1, d))
                G = extend_finite_isometry(LabeledSimplex(S, H.apply(S)))
                worst_q = max(worst_q, np.linalg.norm(G.Q - H.Q))
                worst_b = max(worst_b, np.linalg.norm(G.b - H.b) / (1 + np.linalg.norm(H.b)))
        checks["Q within 1e-9"] = worst_q <= 1e-9
        checks["b within 1e-9(1+|b|)"] = worst_b <= 1e-9


def test_gram_polarization_suite():
    rng = np.random.default_rng(2)
    with criterion("polarization / Gram suite, 1e5 pairs", 5.0) as checks:
        worst = 0.0
        for d in range(1, 9):
            m = 12_500
            X, Y = rng.standard_normal((m, d)), rng.standard_normal((m, d))
            direct = np.sum(X * Y, axis=1)
            rel = np.abs(polarization_rows(X, Y) - direct) / np.maximum(
                1.0, np.linalg.norm(X, axis=1) * np.linalg.norm(Y, axis=1)
            )
            worst = max(worst, rel.max())
        checks["polarization within 1e-12"] = worst <= 1e-12

        iso_ok, scaled_rejected = True, True
        for d in range(1, 9):
            for _ in range(100):
                H = random_isometry(d, rng)
                S = random_simplex(rng, d)
                iso_ok &= verify_gram_equality(LabeledSimplex(S, H.apply(S)), 1e-9)
                scaled_rejected &= not verify_gram_equality(LabeledSimplex(S, 2.0 * H.apply(S)), 1e-9)
        checks["Gram equal for isometric labelings"] = iso_ok
        checks["Gram unequal for 2x scaling"] = scaled_rejected


def test_trilateration_round_trip():
    rng = np.random.default_rng(3)
    with criterion("trilateration round trip, d=1..8 x 1000, plus mirror counterexample", 5.0) as checks:
        worst = 0.0
        for d in range(1, 9):
            for _ in range(1000):
                A = rng.standard_normal((d + 1, d))
                z = rng.standard_normal(d)
                got = locate(A, anchor_distances(A, z))
                worst = max(worst, np.linalg.norm(got - z) / (1 + np.linalg.norm(z)))
        checks["locate within 1e-9(1+|z|)"] = worst <= 1e-9

        mirror_ok = True
        for d in range(2, 9):
            A = random_simplex(rng, d)
            U, _, _ = np.linalg.svd((A[1:d] - A[0]).T)
            normal = U[:, -1]
            z = rng.standard_normal(d)
            mirror = z - 2 * np.dot(z - A[0], normal) * normal
            # d anchors cannot separate z from its mirror image, d + 1 can
            mirror_ok &= equidistance_collapse(z, mirror, A[:d], 1e-9)
            mirror_ok &= not equidistance_collapse(z, mirror, A, 1e-9)
        checks["mirror pair needs d+1 anchors"] = mirror_ok


def test_null_set_regime():
    with criterion("null-set corruption (slab thickness 0), n=1e4, d in {2,3}", 10.0) as checks:
        for d in (2, 3):
            base = random_isometry(d, substream(100 + d, 0))
            cmap = CorruptedMap(base, "slab", normal=np.ones(d), offset=0.3, thickness=0.0, seed=d)
            cs, mask = make_correspondences(MeasureModel.gaussian(d, seed=d), cmap, 10_000, return_mask=True)
            checks[f"d={d} no sample hit the slab"] = not mask.any()
            checks[f"d={d} oracle recovers base within 1e-9"] = recover_oracle(cs).isclose(base, 1e-9)
            checks[f"d={d} certified violation rate 0"] = certify(cs).violation_rate_hat == 0.0


def test_robust_regime():
    eps, n, d = 0.05, 1000, 3
    with criterion("robust recovery, eps=0.05, n=1000, d=3, 100 seeds", 60.0) as checks:
        recovered, covered, pair_covered = 0, 0, 0
        for seed in range(100):
            base = random_isometry(d, substream(seed, 77))
            cmap = CorruptedMap(base, "point-fraction", epsilon=eps, seed=seed)
            cs, mask = make_correspondences(MeasureModel.gaussian(d, seed=seed), cmap, n, return_mask=True)
            cfg = RecoveryConfig(seed=seed)
            H, _ = recover_robust(cs, cfg)
            recovered += H.isclose(base, 1e-6)
            rep = certify(cs, cfg)
            true_rate = mask.mean()
            lo, hi = rep.confidence_interval
            covered += lo <= true_rate <= hi
            plo, phi = rep.pair_confidence_interval
            pair_covered += plo <= 1 - (1 - true_rate) ** 2 <= phi
        checks[f"recovered {recovered}/100 >= 99"] = recovered >= 99
        checks[f"point-rate covered {covered}/100 >= 90"] = covered >= 90
        checks[f"pair-rate covered {pair_covered}/100 >= 90"] = pair_covered >= 90


def test_brute_force_equivalence():
    with criterion("RANSAC consensus equals exhaustive enumeration, 500 instances", 30.0) as checks:
        mismatches = 0
        for seed in range(500):
            r = np.random.default_rng(10_000 + seed)
            d = int(r.integers(1, 4))
            n = int(r.integers(d + 1, 9))
            k = int(r.integers(0, n - d))
            X = r.standard_normal((n, d))
            Y = random_isometry(d, r).apply(X)
            bad = r.choice(n, size=k, replace=False)
            Y[bad] += r.standard_normal((k, d))
            cfg = RecoveryConfig(consensus_quorum=0.51, seed=seed)
            try:
                got = recover_robust(CorrespondenceSet(X, Y), cfg, full_output=True)[2]["consensus"]
            except NoConsensus as exc:
                got = exc.best_consensus
            mismatches += got != brute_force_best_consensus(X, Y, cfg.tau)
        checks[f"mismatches={mismatches}"] = mismatches == 0


def test_negative_controls(tmp_path, capsys):
    with criterion("negative controls through the CLI", 10.0) as checks:
        hyper = tmp_path / "hyper.jsonl"
        main(["generate", "-o", str(hyper), "--n", "500", "--measure", "hyperplane-supported", "--seed", "1"])
        report = tmp_path / "hyper.report.json"
        code = main(["certify", str(hyper), "-o", str(report)])
        rep = json.loads(report.read_text())
        checks["hyperplane: support_dimension < d"] = code == 0 and rep["support_dimension"] < rep["d"]
        checks["hyperplane: no isometry"] = rep["recovered"] is None

        quad = tmp_path / "quad.jsonl"
        main(["generate", "-o", str(quad), "--n", "500", "--distortion", "quadratic", "--seed", "2"])
        capsys.readouterr()
        code = main(["recover", str(quad)])
        err = capsys.readouterr().err
        checks["quadratic: NoConsensus exit 3"] = code == 3 and "NoConsensus" in err

        S = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        images = 2.0 * EuclideanIsometry(np.eye(3)[[1, 0, 2]], [1.0, 2.0, 3.0]).apply(S)
        checks["scaled: check_distance_preserving false"] = not check_distance_preserving(LabeledSimplex(S, images))[0]
        simplex_file = tmp_path / "scaled.json"
        simplex_file.write_text(json.dumps({"source": S.tolist(), "images": images.tolist()}))
        code = main(["extend", str(simplex_file)])
        err = capsys.readouterr().err
        checks["scaled: extend exit 3"] = code == 3 and "NotDistancePreserving" in err

        scaled = tmp_path / "scaled.jsonl"
        main(["generate", "-o", str(scaled), "--n", "300", "--distortion", "scale", "--seed", "3"])
        code = main(["recover", str(scaled), "--method", "oracle"])
        checks["scaled: oracle recovery exit 3"] = code == 3
