"""Release gate: one test per shipped guarantee, each with its own budget.

Every test here pins a user-visible property of the package end to end
(exactness bounds, statistical behaviour, trends, determinism) together
with a wall-clock budget where the guarantee includes one.  Failures in
this file mean the package must not ship.
"""

import json
import math
import time

import numpy as np

from depthstitch import (
    CorruptionConfig,
    DEFAULT_BOUNDARY_THRESHOLDS,
    DepthMap,
    DepthSequence,
    EmbeddingConfig,
    SceneConfig,
    abs_rel,
    apply_affine,
    boundary_prf,
    corrupt_windows,
    delta1,
    embedding_similarity_matrix,
    evaluate_sequence,
    finite_difference_check,
    fit_affine,
    generate_scene,
    global_alignment_oracle,
    plan_windows,
    read_depth_map,
    run_overlap_ablation,
    sinusoidal_embedding,
    spatial_rectification_loss,
    stitch_sequence,
    stitch_sequence_detailed,
    temporal_rectification_loss,
    video_objective,
    write_depth_map,
    write_raw_tensor,
)
from depthstitch.cli import main

from oracles import brute_abs_rel, brute_boundary_prf, brute_delta1, rss


def test_criterion_01_affine_fit_recovers_exact_relations():
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    for _ in range(1000):
        n = int(rng.integers(8, 300))
        b = rng.uniform(-3.0, 3.0, n)
        while float(b.var()) < 1e-6:
            b = rng.uniform(-3.0, 3.0, n)
        s = float(rng.uniform(0.5, 2.0))
        t = float(rng.uniform(-1.0, 1.0))
        a = s * b + t
        fit = fit_affine(a, b)
        assert abs(fit.scale - s) / max(1.0, abs(s)) < 1e-9
        assert abs(fit.shift - t) / max(1.0, abs(t)) < 1e-9
        resid = a - (fit.scale * b + fit.shift)
        assert float(resid @ resid) < 1e-18 * n
    assert time.perf_counter() - t0 < 1.0


def test_criterion_02_fit_minimises_residual_sum_of_squares():
    rng = np.random.default_rng(12)
    t0 = time.perf_counter()
    for _ in range(100):
        n = int(rng.integers(50, 200))
        b = rng.uniform(1.0, 5.0, n)
        a = (
            float(rng.uniform(0.5, 2.0)) * b
            + float(rng.uniform(-1.0, 1.0))
            + rng.normal(0.0, 0.01, n)
        )
        fit = fit_affine(a, b)
        base = rss(a, b, fit.scale, fit.shift)
        for ds, dt in ((1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)):
            assert rss(a, b, fit.scale + ds, fit.shift + dt) > base
    assert time.perf_counter() - t0 < 1.0


def test_criterion_03_noise_free_stitching_is_exact_after_alignment():
    t0 = time.perf_counter()
    scene = SceneConfig(seed=3, frames=1000, height=64, width=64, near=1.0, far=10.0)
    gt = generate_scene(scene)
    plan = plan_windows(scene.frames, 45, 36)  # overlap 9
    cfg = CorruptionConfig(s_lo=0.5, s_hi=2.0, t_lo=-1.0, t_hi=1.0, sigma=0.0, seed=30)
    windows = corrupt_windows(gt, plan, cfg)
    stitched = stitch_sequence(windows, plan)
    params = global_alignment_oracle(stitched, gt, verify=True)
    aligned = apply_affine(stitched, params)
    assert abs_rel(aligned, gt) < 1e-6
    assert float(np.max(np.abs(aligned.values - gt.values))) < 1e-9 * (scene.far - scene.near)
    assert time.perf_counter() - t0 < 30.0


def test_criterion_04_overlap_residuals_are_zero_mean_and_bounded():
    t0 = time.perf_counter()
    sigma = 0.01
    scene = SceneConfig(seed=4, frames=450, height=48, width=48)
    gt = generate_scene(scene)
    plan = plan_windows(scene.frames, 45, 36)
    cfg = CorruptionConfig(sigma=sigma, seed=43)  # default mild drift ranges
    windows = corrupt_windows(gt, plan, cfg)
    result = stitch_sequence_detailed(windows, plan, collect_residuals=True)
    assert result.overlap_residuals is not None
    assert not any(fit.fallback for fit in result.fits)
    pooled = np.concatenate(result.overlap_residuals)
    n = pooled.size
    assert n > 100_000
    assert abs(float(pooled.mean())) < 4.0 * sigma / math.sqrt(n)
    within = float(np.mean(np.abs(pooled) <= 4.0 * sigma))
    assert within >= 0.99
    assert time.perf_counter() - t0 < 60.0


def test_criterion_05_wider_overlap_improves_accuracy_and_costs_time():
    t0 = time.perf_counter()
    scene = SceneConfig(seed=7, frames=450, height=48, width=48)
    corruption = CorruptionConfig(sigma=0.01, seed=100)
    result = run_overlap_ablation(scene, corruption, [3, 6, 9, 14, 19], seeds=20)
    means = [s.mean_abs_rel for s in result.summaries]
    sems = [s.sem_abs_rel for s in result.summaries]
    inversions = [i for i in range(len(means) - 1) if means[i + 1] > means[i]]
    assert len(inversions) <= 1
    for i in inversions:
        assert means[i + 1] - means[i] <= max(sems[i], sems[i + 1])
    rel = [s.rel_runtime for s in result.summaries]
    assert all(rel[i + 1] > rel[i] for i in range(len(rel) - 1))
    assert time.perf_counter() - t0 < 600.0


def test_criterion_06_analytic_gradients_match_finite_differences():
    rng = np.random.default_rng(66)
    t0 = time.perf_counter()
    for kind in ("sp", "temp", "video"):
        worst = 0.0
        for _ in range(50):
            pred = rng.normal(0.0, 1.0, (2, 2, 4, 4))
            target = rng.normal(0.0, 1.0, (2, 2, 4, 4))
            worst = max(worst, finite_difference_check(kind, pred, target, 1e-5))
        assert worst < 1e-4, f"{kind}: max relative gradient error {worst}"
    assert time.perf_counter() - t0 < 10.0


def test_criterion_07_loss_invariants_hold():
    rng = np.random.default_rng(77)
    for _ in range(100):
        shape = (int(rng.integers(1, 4)), int(rng.integers(1, 3)), 4, 5)
        # Dyadic-lattice draws keep every sum below exactly representable.
        p = rng.integers(-4096, 4096, shape) / 2.0**20
        t = rng.integers(-4096, 4096, shape) / 2.0**20
        c = float(rng.integers(-8, 9)) / 16.0

        sp0, _ = spatial_rectification_loss(p, t)
        tp0, _ = temporal_rectification_loss(p, t)
        assert sp0 >= 0.0 and tp0 >= 0.0
        # constant offsets change the losses by exactly zero
        assert spatial_rectification_loss(p + c, t + c)[0] == sp0
        assert temporal_rectification_loss(p + c, t + c)[0] == tp0
        # swapping prediction and target is bit-neutral
        assert spatial_rectification_loss(t, p)[0] == sp0
        assert temporal_rectification_loss(t, p)[0] == tp0

        alpha = float(rng.choice([0.5, 2.0, 3.0]))
        rep = video_objective(p, t)
        rep_a = video_objective(alpha * p, alpha * t)
        for got, want in (
            (rep_a.l_sp, alpha * rep.l_sp),
            (rep_a.l_temp, alpha * rep.l_temp),
            (rep_a.l2, alpha * alpha * rep.l2),
        ):
            assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


def test_criterion_08_metrics_match_brute_force_and_are_affine_invariant():
    rng = np.random.default_rng(88)
    for _ in range(100):
        gv = rng.uniform(0.5, 5.0, (8, 8))
        pv = rng.uniform(0.5, 5.0, (8, 8))
        gm = rng.random((8, 8)) < 0.85
        pm = rng.random((8, 8)) < 0.85
        gm[0, :2] = True
        pm[0, :2] = True
        gt = DepthMap(gv, gm)
        pred = DepthMap(pv, pm)
        joint = gm & pm
        assert abs(abs_rel(pred, gt) - brute_abs_rel(pv, gv, joint)) <= 1e-12
        assert abs(delta1(pred, gt) - brute_delta1(pv, gv, joint)) <= 1e-12
        got = boundary_prf(pred, gt)
        want = brute_boundary_prf(pv, pm, gv, gm, DEFAULT_BOUNDARY_THRESHOLDS)
        for g, w in zip(got, want):
            if w is None:
                assert g is None
            else:
                assert abs(g - w) <= 1e-12

    gt_seq = generate_scene(SceneConfig(seed=89, frames=3, height=16, width=16))
    noise = np.random.default_rng(890).normal(0.0, 0.01, gt_seq.values.shape)
    pred_vals = 1.3 * gt_seq.values - 0.4 + noise
    base = evaluate_sequence(DepthSequence(pred_vals, gt_seq.valid), gt_seq)
    assert base.b_recall is not None
    for alpha in (0.1, 1.0, 10.0):
        for beta in (-5.0, 0.0, 5.0):
            rep = evaluate_sequence(
                DepthSequence(alpha * pred_vals + beta, gt_seq.valid), gt_seq
            )
            assert abs(rep.abs_rel - base.abs_rel) <= 1e-10
            assert abs(rep.delta1 - base.delta1) <= 1e-10
            assert abs(rep.b_recall - base.b_recall) <= 1e-10
            assert abs(rep.b_f1 - base.b_f1) <= 1e-10


def test_criterion_09_embedding_unit_circles_norm_and_similarity_grid():
    cfg = EmbeddingConfig()
    grid = [i / 10.0 for i in range(11)]
    half = cfg.dim // 2
    for t in grid:
        v = sinusoidal_embedding(t, cfg).vector
        circles = v[:half] ** 2 + v[half:] ** 2
        assert float(np.max(np.abs(circles - 1.0))) <= 1e-12
        assert abs(float(np.linalg.norm(v)) - math.sqrt(cfg.dim / 2.0)) <= 1e-12
    sim = embedding_similarity_matrix(grid, cfg)
    assert np.array_equal(sim, sim.T)
    assert np.all(np.diagonal(sim) == 1.0)
    assert np.all(np.abs(sim) <= 1.0 + 1e-12)


def test_criterion_10_depth_codecs_round_trip(tmp_path):
    rng = np.random.default_rng(1010)
    for i in range(100):
        h = int(rng.integers(2, 12))
        w = int(rng.integers(2, 12))
        # Values built in float32 arithmetic stay exact through f32 codecs.
        vals32 = rng.random((h, w), dtype=np.float32) * np.float32(4.0) + np.float32(0.25)
        vals = vals32.astype(np.float64)
        valid = rng.random((h, w)) < 0.85
        valid[0, 0] = True
        depth = DepthMap(vals, valid)

        for fmt in ("pfm", "raw"):
            path = tmp_path / f"m{i}.{fmt}"
            write_depth_map(depth, path, fmt)
            back = read_depth_map(path, fmt)
            assert np.array_equal(back.valid, valid)
            assert np.array_equal(back.values[valid], vals[valid])

        scale = float(vals[valid].max()) / 60000.0
        path = tmp_path / f"m{i}.png"
        write_depth_map(depth, path, "png16", png16_scale=scale)
        back = read_depth_map(path, "png16", png16_scale=scale)
        assert np.array_equal(back.valid, valid)
        assert float(np.max(np.abs(back.values[valid] - vals[valid]))) <= scale / 2.0


def _stitch_job(tmp_path, name):
    gt = generate_scene(SceneConfig(seed=21, frames=12, height=8, width=8))
    plan = plan_windows(12, 6, 3)
    cfg = CorruptionConfig(s_lo=0.8, s_hi=1.2, t_lo=-0.5, t_hi=0.5, sigma=0.0, seed=5)
    entries = []
    for k, win in enumerate(corrupt_windows(gt, plan, cfg)):
        wdir = tmp_path / name / f"w{k}"
        wdir.mkdir(parents=True)
        files = []
        for f in range(win.depth.frame_count):
            fname = f"{name}/w{k}/f_{f:03d}.pfm"
            write_depth_map(win.depth.frame(f), tmp_path / fname, "pfm")
            files.append(fname)
        entries.append({"start": win.start, "files": files, "format": "pfm"})
    manifest = tmp_path / f"{name}.json"
    manifest.write_text(json.dumps({
        "frame_count": 12, "window_size": 6, "stride": 3, "windows": entries,
    }))
    return manifest


def _dir_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


def test_criterion_11_cli_runs_are_byte_deterministic(tmp_path, capsys):
    # stitch: frames and run log identical across reruns
    manifest = _stitch_job(tmp_path, "job")
    outs = [tmp_path / "s1", tmp_path / "s2"]
    for out in outs:
        assert main(["stitch", "--manifest", str(manifest), "--out", str(out)]) == 0
    assert _dir_bytes(outs[0]) == _dir_bytes(outs[1])

    # eval: report, per-frame CSV, and run log identical
    gt = generate_scene(SceneConfig(seed=22, frames=4, height=8, width=8))
    pred_vals = 1.1 * gt.values - 0.3
    for sub, seq in (("gt", gt), ("pred", DepthSequence(pred_vals, gt.valid))):
        d = tmp_path / sub
        d.mkdir()
        for f in range(seq.frame_count):
            write_depth_map(seq.frame(f), d / f"f_{f:03d}.raw", "raw")
    evals = [tmp_path / "e1", tmp_path / "e2"]
    for out in evals:
        assert main([
            "eval", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
            "--format", "raw", "--out", str(out),
        ]) == 0
    assert _dir_bytes(evals[0]) == _dir_bytes(evals[1])

    # bench-synthetic: everything except the documented wall_ms column
    benches = [tmp_path / "b1.csv", tmp_path / "b2.csv"]
    for out in benches:
        assert main([
            "bench-synthetic", "--out", str(out), "--frames", "30", "--height", "12",
            "--width", "12", "--window-size", "10", "--overlaps", "2,5", "--seeds", "2",
        ]) == 0
    strip = lambda text: [line.rsplit(",", 1)[0] for line in text.splitlines()]
    assert strip(benches[0].read_text()) == strip(benches[1].read_text())
    assert (
        benches[0].with_name("b1.run_log.json").read_bytes()
        == benches[1].with_name("b2.run_log.json").read_bytes()
    )

    # embed-analyze: stdout CSV identical
    capsys.readouterr()
    assert main(["embed-analyze", "--timesteps", "0,0.5,1", "--dim", "16"]) == 0
    first = capsys.readouterr().out
    assert main(["embed-analyze", "--timesteps", "0,0.5,1", "--dim", "16"]) == 0
    assert capsys.readouterr().out == first

    # lmr-loss: report JSON and emitted gradient identical
    rng = np.random.default_rng(23)
    write_raw_tensor(tmp_path / "p.raw", rng.normal(size=(2, 2, 4, 4)))
    write_raw_tensor(tmp_path / "t.raw", rng.normal(size=(2, 2, 4, 4)))
    grads = [tmp_path / "g1.raw", tmp_path / "g2.raw"]
    reports = []
    for grad in grads:
        assert main([
            "lmr-loss", "--pred", str(tmp_path / "p.raw"),
            "--target", str(tmp_path / "t.raw"), "--emit-grad", str(grad),
        ]) == 0
        reports.append(capsys.readouterr().out)
    assert reports[0] == reports[1]
    assert grads[0].read_bytes() == grads[1].read_bytes()
