import sys

import numpy as np
import pytest
from scipy import ndimage

from oracles import phi_reference
from refractsync.geometry import PanoCamera, PerspectiveCamera
from refractsync.imageops import ImageError, ImagePlane, blend_phi, save_image
from refractsync.pipeline.fixtures import sphere_in_room
from refractsync.sync import (Branch, DenoiserError, NoiseSchedule, OracleDenoiser, PluginDenoiser,
                              PluginError, SamplerError, SyncConfig, SyncScene, ZeroDenoiser,
                              cfg_velocity, euler_estimate, guided_step, ode_step, renoise, renoise_scale,
                              run_generation, sde_step, synchronize_views)
from refractsync.warpfield import FresnelWeightMap, WarpBundle, WarpField


# --- sampler algebra -----------------------------------------------------------

def test_schedule_validation():
    s = NoiseSchedule.linear(4)
    assert np.allclose(s.sigmas, [1, 0.75, 0.5, 0.25, 0])
    assert s.steps == 4
    with pytest.raises(SamplerError):
        NoiseSchedule(np.array([1.0, 0.5, 0.6, 0.0]))
    with pytest.raises(SamplerError):
        NoiseSchedule(np.array([0.9, 0.0]))
    shifted = NoiseSchedule.linear(8, 3.0).sigmas
    assert shifted[0] == 1 and shifted[-1] == 0 and np.all(shifted[1:-1] > np.linspace(1, 0, 9)[1:-1])


def test_euler_estimate(rng):
    z = rng.normal(size=(4, 5, 3))
    assert np.array_equal(euler_estimate(z, np.zeros_like(z), 0.7), z)
    z0 = rng.normal(size=(4, 5, 3))
    z1 = rng.normal(size=(4, 5, 3))
    assert np.allclose(euler_estimate(z1, z1 - z0, 1.0), z0, atol=1e-15)
    v = rng.normal(size=(4, 5, 3))
    assert np.array_equal(euler_estimate(z, v, 0.3), z - 0.3 * v)
    with pytest.raises(SamplerError):
        euler_estimate(z, v[:2], 0.3)


def test_cfg_velocity(rng):
    a = rng.normal(size=(3, 3))
    assert np.array_equal(cfg_velocity(a, rng.normal(size=(3, 3)), 0.0), a)
    assert np.allclose(cfg_velocity(a, a, 7.0), a)
    assert cfg_velocity(np.ones(1), np.zeros(1), 3.5)[0] == 4.5
    with pytest.raises(SamplerError):
        cfg_velocity(a, a[:1], 1.0)


def test_ode_and_sde_steps(rng):
    z = rng.normal(size=(6,))
    v = rng.normal(size=(6,))
    assert np.array_equal(ode_step(z, v, 0.5, 0.5), z)
    assert np.array_equal(ode_step(z, np.zeros(6), 0.5, 0.3), z)
    assert np.allclose(ode_step(z, v, 0.5, 0.3), z - 0.2 * v)
    with pytest.raises(SamplerError):
        ode_step(z, v, 0.3, 0.5)
    n = 100_000
    added = sde_step(np.zeros(n), np.zeros(n), 0.6, 0.45, np.random.default_rng(5))
    assert np.var(added) == pytest.approx(0.15 ** 2, rel=0.03)


def test_guided_step(rng):
    z = rng.normal(size=(5, 4))
    v = rng.normal(size=(5, 4))
    zh = euler_estimate(z, v, 0.8)
    assert np.allclose(guided_step(z, zh, 0.8, 0.55), ode_step(z, v, 0.8, 0.55), atol=1e-14)
    assert np.array_equal(guided_step(z, zh, 0.8, 0.0), zh)
    other = rng.normal(size=(5, 4))
    assert np.allclose(guided_step(z, other, 0.8, 0.3), z + (0.3 - 0.8) / 0.8 * (z - other))
    with pytest.raises(SamplerError, match="already clean"):
        guided_step(z, zh, 0.0, 0.0)


def test_renoise(rng):
    z = rng.normal(size=(7,))
    a, s = renoise_scale(0.4, 0.4)
    assert (a, s) == (1.0, 0.0)
    assert np.array_equal(renoise(z, 0.4, 0.4, rng), z)
    a, s = renoise_scale(0.0, 0.35)
    assert a == pytest.approx(0.65) and s == pytest.approx(0.35)
    with pytest.raises(SamplerError):
        renoise_scale(0.5, 0.4)
    a, s = renoise_scale(0.3, 0.6)
    out = renoise(np.zeros(100_000), 0.3, 0.6, np.random.default_rng(9))
    assert np.var(out) == pytest.approx(s ** 2, rel=0.03)
    # marginal preservation: a z_t + s eps has the law of z at the noisier level
    n = 200_000
    r = np.random.default_rng(11)
    z0 = r.normal(0.3, 0.5, n)
    zt = 0.7 * z0 + 0.3 * r.standard_normal(n)
    up = renoise(zt, 0.3, 0.6, r)
    ref = 0.4 * z0 + 0.6 * r.standard_normal(n)
    assert np.mean(up) == pytest.approx(np.mean(ref), abs=5e-3)
    assert np.var(up) == pytest.approx(np.var(ref), rel=0.02)


def test_config_validation():
    with pytest.raises(SamplerError):
        SyncConfig(steps=0)
    with pytest.raises(SamplerError):
        SyncConfig(tt_window=(0.2, 1.5))
    with pytest.raises(SamplerError):
        SyncConfig(repeats_main=0)
    with pytest.raises(SamplerError):
        SyncConfig(mode="euler")
    c = SyncConfig(steps=10)
    assert [k for k in range(10) if c.in_window(k)] == [2, 3, 4, 5, 6, 7]


# --- synthetic scenes --------------------------------------------------------

@pytest.fixture(scope="module")
def room():
    return sphere_in_room(32, 32, 32, radius=0.5)


def scene_of(r):
    return SyncScene(r.warps, r.clean, r.persp_cam, r.pano_cam)


def _warp_reference(img, wf):
    """Plain bilinear warp with scipy; validity = all four neighbours inside the source."""
    x = wf.coords[..., 0]
    y = wf.coords[..., 1]
    h, w = img.shape[:2]
    pano = wf.source_space == "panorama"
    out = np.stack([ndimage.map_coordinates(img[..., c], [y, x], order=1,
                                            mode="grid-wrap" if pano else "nearest")
                    for c in range(3)], -1)
    ok = wf.mask & (y >= 0) & (y <= h - 1)
    if not pano:
        ok &= (x >= 0) & (x <= w - 1)
    return out, ok


def _phi_ref(images, warps, lam):
    vals, masks = zip(*[_warp_reference(i, w) for i, w in zip(images, warps)])
    out = phi_reference(list(vals), list(masks), lam)
    bad = ~np.isfinite(out)
    out[bad] = images[0][bad]
    return out


def test_synchronize_views_matches_scripted_reference(room):
    sc = scene_of(room)
    rng = np.random.default_rng(3)
    persp = ImagePlane(room.perspective.data + 0.05 * rng.standard_normal(room.perspective.data.shape))
    pano = ImagePlane(room.panorama.data + 0.05 * rng.standard_normal(room.panorama.data.shape))
    out_p, out_q = synchronize_views(persp, pano, sc, lam=0.5, levels=1)
    w = sc.warps
    ident_p = WarpField.identity(32, 32)
    ident_q = WarpField.identity(64, 32, "panorama")
    refr = _phi_ref([persp.data, pano.data, sc.clean.data],
                    [ident_p, w.pano_to_persp_refraction, w.self_warp], 0.5)
    refl, _ = _warp_reference(pano.data, w.pano_to_persp_reflection)
    fw = w.fresnel.weights[..., None]
    ref_p = np.where(fw > 0, fw * refl + (1 - fw) * refr, refr)
    ref_q = _phi_ref([pano.data, persp.data, sc.clean.data], [ident_q, w.persp_to_pano, w.persp_to_pano], 0.5)
    assert np.abs(out_p.data - ref_p).max() < 1e-9
    assert np.abs(out_q.data - ref_q).max() < 1e-9


def test_synchronize_views_rejects_bad_inputs(room):
    sc = scene_of(room)
    with pytest.raises(ImageError):
        synchronize_views(ImagePlane(np.zeros((8, 8, 3))), room.panorama, sc)
    with pytest.raises(ImageError):
        synchronize_views(ImagePlane(room.perspective.data, "sRGB"), room.panorama, sc)


def _no_object_scene(h=32, w=48, ph=32, color=(0.2, 0.5, 0.7)):
    """Bundle whose object covers nothing: identity self-warp, zero Fresnel, views fully overlapping."""
    cam = PerspectiveCamera.from_fov(w, h, 60.0)
    pano = PanoCamera.with_height(np.zeros(3), ph)
    rng = np.random.default_rng(0)
    p2p = WarpField(rng.uniform([0, 0], [2 * ph - 1, ph - 1], (h, w, 2)), np.ones((h, w), bool),
                    2 * ph, ph, "panorama")
    q2p = WarpField(rng.uniform([0, 0], [w - 1, h - 1], (ph, 2 * ph, 2)), rng.random((ph, 2 * ph)) > 0.5, w, h)
    bundle = WarpBundle(WarpField.identity(w, h), p2p, WarpField.empty(w, h, 2 * ph, ph, "panorama"), q2p,
                        FresnelWeightMap(np.zeros((h, w))), np.zeros((h, w), bool))
    clean = ImagePlane(np.broadcast_to(np.array(color), (h, w, 3)).copy())
    return SyncScene(bundle, clean, cam, pano)


def test_consistent_views_are_a_fixed_point():
    sc = _no_object_scene()
    color = np.array([0.2, 0.5, 0.7])
    persp = ImagePlane(np.broadcast_to(color, (32, 48, 3)).copy())
    pano = ImagePlane(np.broadcast_to(color, (32, 64, 3)).copy())
    out_p, out_q = synchronize_views(persp, pano, sc, levels=5)
    assert np.abs(out_p.data - persp.data).max() < 1e-5
    assert np.abs(out_q.data - pano.data).max() < 1e-5


def test_zero_fresnel_returns_refraction_blend():
    sc = _no_object_scene()
    rng = np.random.default_rng(2)
    persp = ImagePlane(rng.random((32, 48, 3)))
    pano = ImagePlane(rng.random((32, 64, 3)))
    out_p, _ = synchronize_views(persp, pano, sc, levels=5)
    w = sc.warps
    refr = blend_phi([persp, pano, sc.clean], [sc.persp_identity, w.pano_to_persp_refraction, w.self_warp],
                     0.5, 5)
    assert np.array_equal(out_p.data, refr.data)


# --- the loop ------------------------------------------------------------------

class Linear:
    """Deterministic toy velocity field."""

    def __call__(self, z, sigma, condition=None):
        return 0.5 * z + 0.1 * (1.0 if condition is None else len(condition))


def test_single_step_returns_synchronized_estimate(room):
    sc = scene_of(room)
    cfg = SyncConfig(steps=1, seed=4, pyramid_levels=3)
    res = run_generation(cfg, sc, Branch(Linear(), b"a", None), Branch(Linear(), b"bb", None))
    init = np.random.default_rng(np.random.SeedSequence(4).spawn(3)[0])
    zp = init.standard_normal((32, 32, 3))
    zq = init.standard_normal((32, 64, 3))
    est = []
    for z, cond in ((zp, b"a"), (zq, b"bb")):
        v = cfg_velocity(Linear()(z, 1.0, cond), Linear()(z, 1.0, None), cfg.guidance)
        est.append(ImagePlane(euler_estimate(z, v, 1.0)))
    sp, sq = synchronize_views(est[0], est[1], sc, cfg.lam, cfg.pyramid_levels)
    assert np.array_equal(res.perspective.data, sp.data)
    assert np.array_equal(res.panorama.data, sq.data)
    assert len(res.trace) == 1 and res.trace[0].startswith("step=0 sigma=1.000000")


def test_disabled_travel_configurations_agree(room):
    sc = scene_of(room)
    a = run_generation(SyncConfig(steps=6, repeats_main=1, repeats_pano=1, pyramid_levels=3, seed=1),
                       sc, Branch(Linear()), Branch(Linear()))
    b = run_generation(SyncConfig(steps=6, tt_window=(0, 0), pyramid_levels=3, seed=1),
                       sc, Branch(Linear()), Branch(Linear()))
    assert np.array_equal(a.perspective.data, b.perspective.data)
    assert np.array_equal(a.panorama.data, b.panorama.data)
    assert a.trace == b.trace


def test_time_travel_trace_and_determinism(room):
    sc = scene_of(room)
    cfg = SyncConfig(steps=10, pyramid_levels=3, seed=7)
    a = run_generation(cfg, sc, Branch(Linear()), Branch(Linear()))
    b = run_generation(cfg, sc, Branch(Linear()), Branch(Linear()))
    assert np.array_equal(a.perspective.data, b.perspective.data)
    assert a.trace == b.trace
    # 10 steps plus two redo passes for each of the 6 window steps
    assert len(a.trace) == 22
    assert sum(line.endswith("tt=2") for line in a.trace) == 6
    cfg_sde = SyncConfig(steps=4, pyramid_levels=3, mode="sde", seed=7)
    s1 = run_generation(cfg_sde, sc, Branch(Linear()), Branch(Linear()))
    s2 = run_generation(cfg_sde, sc, Branch(Linear()), Branch(Linear()))
    s3 = run_generation(cfg_sde, sc, Branch(Linear()), Branch(Linear()), seed=8)
    assert np.array_equal(s1.perspective.data, s2.perspective.data)
    assert not np.array_equal(s1.perspective.data, s3.perspective.data)


def test_shape_mismatch_reports_step(room):
    sc = scene_of(room)

    class Bad:
        calls = 0

        def __call__(self, z, sigma, condition=None):
            self.calls += 1
            return z[:-1] if self.calls > 2 else np.zeros_like(z)

    with pytest.raises(DenoiserError, match="step 1"):
        run_generation(SyncConfig(steps=3, guidance=0.0, pyramid_levels=3), sc, Branch(Bad()), Branch(ZeroDenoiser()))


def test_non_finite_and_plugin_errors_name_the_step(room):
    sc = scene_of(room)
    cfg = SyncConfig(steps=3, guidance=0.0, pyramid_levels=3)

    def nan(z, sigma, condition=None):
        return np.full_like(z, np.nan)

    with pytest.raises(DenoiserError, match="step 0: denoiser returned non-finite"):
        run_generation(cfg, sc, Branch(nan), Branch(ZeroDenoiser()))

    def broken(z, sigma, condition=None):
        raise PluginError("plug-in pipe failed")

    with pytest.raises(PluginError, match="step 0: plug-in pipe failed"):
        run_generation(cfg, sc, Branch(ZeroDenoiser()), Branch(broken))


def test_empty_synchronization_reduces_to_plain_sampler():
    h, w, ph = 32, 48, 32
    cam = PerspectiveCamera.from_fov(w, h, 60.0)
    pano = PanoCamera.with_height(np.zeros(3), ph)
    bundle = WarpBundle(WarpField.empty(w, h, w, h), WarpField.empty(w, h, 2 * ph, ph, "panorama"),
                        WarpField.empty(w, h, 2 * ph, ph, "panorama"), WarpField.empty(2 * ph, ph, w, h),
                        FresnelWeightMap(np.zeros((h, w))), np.zeros((h, w), bool))
    sc = SyncScene(bundle, ImagePlane(np.full((h, w, 3), 0.5)), cam, pano)
    cfg = SyncConfig(steps=5, tt_window=(0, 0), guidance=0.0, seed=3)
    res = run_generation(cfg, sc, Branch(Linear()), Branch(Linear()))
    init = np.random.default_rng(np.random.SeedSequence(3).spawn(3)[0])
    sig = cfg.schedule().sigmas
    for z, out in ((init.standard_normal((h, w, 3)), res.perspective),
                   (init.standard_normal((ph, 2 * ph, 3)), res.panorama)):
        for k in range(5):
            z = ode_step(z, Linear()(z, sig[k]), sig[k], sig[k + 1])
        assert np.abs(out.data - z).max() < 1e-10


def test_oracle_denoiser_converges_without_object():
    sc = _no_object_scene()
    color = np.array([0.2, 0.5, 0.7])
    tp = np.broadcast_to(color, (32, 48, 3)).copy()
    tq = np.broadcast_to(color, (32, 64, 3)).copy()
    res = run_generation(SyncConfig(steps=6, seed=0), sc, Branch(OracleDenoiser(tp)), Branch(OracleDenoiser(tq)))
    assert np.abs(res.perspective.data - tp).max() < 1e-5
    assert np.abs(res.panorama.data - tq).max() < 1e-5


# --- plug-in protocol ----------------------------------------------------------

def test_plugin_round_trip(tmp_path, room):
    save_image(tmp_path / "p.pfm", room.perspective)
    save_image(tmp_path / "q.pfm", room.panorama)
    cmd = [sys.executable, "-m", "refractsync.sync.oracle_plugin", str(tmp_path / "p.pfm"), str(tmp_path / "q.pfm")]
    z = np.random.default_rng(0).standard_normal((32, 32, 3))
    with PluginDenoiser(cmd) as plug:
        v = plug(z, 0.5, b"prompt")
        v2 = plug(z, 0.5, None)
    ref = OracleDenoiser(room.perspective.data.astype(np.float32))(z.astype(np.float32), 0.5)
    assert np.abs(v - ref).max() < 1e-5
    assert np.array_equal(v, v2)


def test_plugin_failure_is_reported():
    plug = PluginDenoiser([sys.executable, "-c", "import sys; sys.stdin.buffer.read(4)"])
    with pytest.raises(PluginError):
        plug(np.zeros((2, 2, 3)), 0.5, None)
    plug.close()
    with pytest.raises(PluginError, match="cannot start"):
        PluginDenoiser(["/nonexistent/denoiser"])
