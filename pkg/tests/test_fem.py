"""Simulator checks: kinematics, elasticity, momentum, contact, episodes."""

import numpy as np
import pytest

from softgrip.fem.materials import MaterialMap, map_stiffness
from softgrip.fem.scene import Scene, SimParams, SimState, step
from softgrip.fem.sim import EpisodeTrace, MotionScript, evaluate_success
from softgrip.geometry.finger import FingerParams, GripperMesh, TetMesh
from softgrip.tendon import route_normals_from_mesh, tendon_nodal_loads


def _bare_gripper(mesh: TetMesh, base_mask=None) -> GripperMesh:
    n = len(mesh.vertices)
    if base_mask is None:
        base_mask = np.zeros(n, dtype=bool)
    return GripperMesh(
        mesh=mesh, params=FingerParams(), palm_span=0.0,
        vertex_finger=np.zeros(n, dtype=np.int8), base_mask=base_mask,
        waypoint_vidx=np.zeros((2, 0), dtype=np.int64),
        waypoint_tris=np.zeros((2, 0, 3), dtype=np.int64),
        waypoint_arcs=np.zeros(0), waypoint_heights=np.zeros(0),
        waypoint_normals=np.zeros((2, 0, 3)),
        inward_axis=np.array([[1.0, 0, 0], [-1.0, 0, 0]]),
    )


def _single_tet(size=0.01, y0=1.0):
    verts = np.array([[0, y0, 0], [size, y0, 0], [0, y0 + size, 0],
                      [0, y0, size]], dtype=float)
    tets = np.array([[0, 1, 2, 3]], dtype=np.int32)
    return TetMesh(verts, tets, np.zeros(1, dtype=np.int32))


def _materials(n_t, youngs, poisson=0.45, density=1100.0):
    e = np.full(n_t, youngs, dtype=float)
    if youngs == 0:
        return MaterialMap(youngs=e, mu=np.zeros(n_t),
                           lam_stable=np.zeros(n_t), alpha=np.ones(n_t),
                           poisson=poisson, density=density)
    mu = e / (2 * (1 + poisson))
    lam = e * poisson / ((1 + poisson) * (1 - 2 * poisson)) + mu
    return MaterialMap(youngs=e, mu=mu, lam_stable=lam,
                       alpha=1 + mu / lam, poisson=poisson, density=density)


class TestStep:
    def test_equilibrium_at_rest(self):
        mesh = _single_tet()
        scene = Scene(_bare_gripper(mesh), gravity_on=False,
                      ground_on=False, fix_base=False)
        scene.params.damping = 0.0
        scene.set_materials(_materials(1, 1e6))
        st = scene.make_state()
        x0 = st.x.copy()
        for _ in range(50):
            step(scene, st, 1e-5)
        assert np.abs(st.x - x0).max() < 1e-12

    def test_free_fall_matches_kinematics(self):
        mesh = _single_tet()
        scene = Scene(_bare_gripper(mesh), gravity_on=True,
                      ground_on=False, fix_base=False)
        scene.params.damping = 0.0
        scene.set_materials(_materials(1, 0.0))
        st = scene.make_state()
        dt, n = 2.5e-4, 400
        y0 = st.x[0, 1]
        for _ in range(n):
            step(scene, st, dt)
        drop = y0 - st.x[0, 1]
        expected = 0.5 * 9.81 * (n * dt) ** 2
        assert drop == pytest.approx(expected, rel=0.01)

    def test_single_tet_uniaxial_stress(self):
        # impose F = diag(1+eps, 1-nu*eps, 1-nu*eps); the reaction on the
        # +x vertex measures P_xx, compared to the linear-elastic E*eps
        a = 0.01
        eps = 0.005
        nu = 0.45
        e_mod = 2e6
        mesh = _single_tet(size=a, y0=0.0)
        scene = Scene(_bare_gripper(mesh), gravity_on=False,
                      ground_on=False, fix_base=False)
        scene.params.damping = 0.0
        scene.set_materials(_materials(1, e_mod, poisson=nu))
        st = scene.make_state()
        f_def = np.diag([1 + eps, 1 - nu * eps, 1 - nu * eps])
        st.x[:] = st.x @ f_def.T
        dt = 1e-9
        scene.advance(st, dt, 1)
        forces = scene._mass[:, None] * st.v / dt
        p_xx = -forces[1, 0] * 6.0 / (a * a)
        assert p_xx == pytest.approx(e_mod * eps, rel=0.05)

    def test_rejects_nonpositive_dt(self):
        mesh = _single_tet()
        scene = Scene(_bare_gripper(mesh))
        scene.set_materials(_materials(1, 1e6))
        st = scene.make_state()
        with pytest.raises(ValueError):
            step(scene, st, 0.0)


class TestMomentum:
    def test_tendon_impulse_matches_momentum_change(self, gripper):
        scene = Scene(gripper, gravity_on=False, ground_on=False,
                      fix_base=False)
        scene.params.damping = 0.0
        scene.set_materials(map_stiffness(np.full(22, 2e6), gripper.mesh))
        st = scene.make_state()
        dt = 2e-6
        tension = 3.0
        # a couple of warm frames so velocities are nonzero
        for _ in range(5):
            scene.advance(st, dt, 1, tension=tension)
        p_before = (scene._mass[:, None] * st.v).sum(axis=0)
        loads = np.zeros(3)
        for f in range(2):
            vidx = gripper.waypoint_vidx[f]
            normals = route_normals_from_mesh(st.x, gripper.waypoint_tris[f])
            loads += tendon_nodal_loads(st.x[vidx], normals,
                                        tension).sum(axis=0)
        scene.advance(st, dt, 1, tension=tension)
        p_after = (scene._mass[:, None] * st.v).sum(axis=0)
        impulse = loads * dt
        assert np.linalg.norm((p_after - p_before) - impulse) \
            <= 1e-8 * max(np.linalg.norm(impulse), 1e-30)


class TestMaterials:
    def test_constant_map(self, gripper):
        m = map_stiffness(np.full(22, 1e6), gripper.mesh)
        assert np.allclose(m.youngs, 1e6)

    def test_indexed_map(self, gripper):
        k = np.full(22, 0.7e6)
        k[0] = 24e6
        m = map_stiffness(k, gripper.mesh)
        sel = gripper.mesh.block_ids == 0
        assert np.allclose(m.youngs[sel], 24e6)
        assert np.allclose(m.youngs[~sel], 0.7e6)

    def test_histogram_matches_block_counts(self, gripper, rng):
        k = np.exp(rng.uniform(np.log(0.7e6), np.log(24e6), 22))
        m = map_stiffness(k, gripper.mesh)
        for b in range(22):
            n_b = int((gripper.mesh.block_ids == b).sum())
            assert int((m.youngs == k[b]).sum()) == n_b

    def test_out_of_range_rejected(self, gripper):
        k = np.full(22, 0.7e6)
        k[3] = 25e6
        with pytest.raises(ValueError, match="entry 3"):
            map_stiffness(k, gripper.mesh)

    def test_wrong_length_rejected(self, gripper):
        with pytest.raises(ValueError, match="22"):
            map_stiffness(np.full(21, 1e6), gripper.mesh)


class TestContact:
    def test_resting_object_never_pulled(self, gripper):
        from softgrip.geometry.sdf import sphere

        obj = sphere(0.02, position=(0.2, 0.0199, 0), density=8.0)
        scene = Scene(gripper, obj=obj, params=SimParams())
        scene.set_materials(map_stiffness(np.full(22, 1e6), gripper.mesh))
        st = scene.make_state(np.array([0, 0.3, 0, 0, 0, 0, 0, 0]))
        n_sub = scene.n_substeps()
        for _ in range(800):
            scene.advance(st, scene.params.frame_dt / n_sub, n_sub)
        # settles on the plane: tiny penetration, no launch, no sink
        assert abs(st.obj_pos[1] - 0.0199) < 5e-4
        assert np.linalg.norm(st.obj_v) < 5e-3


class TestEpisodes:
    def test_motion_script_validation(self):
        with pytest.raises(ValueError):
            MotionScript(ramp_s=0.0)
        with pytest.raises(ValueError):
            MotionScript(lift_dist=-0.1)

    def test_trace_csv(self, tmp_path):
        trace = EpisodeTrace(
            wrench=np.zeros((3, 6)), dq=np.zeros((3, 3)),
            grip_contact=np.array([1, 1, 0], dtype=np.uint8),
            ground_contact=np.zeros(3, dtype=np.uint8),
            tension=np.zeros(3), base_y=np.zeros(3),
            lift_start=1, lift_end=2,
        )
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 4
        assert lines[0].startswith("frame,")


class TestEvaluateSuccess:
    def _trace(self, ground, grip, wrench_mag):
        n = len(ground)
        w = np.zeros((n, 6))
        w[:, 1] = wrench_mag
        return EpisodeTrace(
            wrench=w, dq=np.zeros((n, 3)),
            grip_contact=np.array(grip, dtype=np.uint8),
            ground_contact=np.array(ground, dtype=np.uint8),
            tension=np.zeros(n), base_y=np.zeros(n),
            lift_start=2, lift_end=4,
        )

    def test_ground_contact_fails(self):
        t = self._trace([0, 0, 0, 0, 0, 1], [1] * 6, 1.0)
        assert evaluate_success(t) is False

    def test_zero_wrench_fails(self):
        t = self._trace([0] * 6, [1] * 6, 0.0)
        assert evaluate_success(t) is False

    def test_lost_contact_fails(self):
        t = self._trace([0] * 6, [1, 1, 1, 1, 0, 1], 1.0)
        assert evaluate_success(t) is False

    def test_good_grasp_succeeds(self):
        t = self._trace([1, 1, 0, 0, 0, 0], [0, 1, 1, 1, 1, 1], 1.0)
        assert evaluate_success(t) is True

    def test_empty_trace_rejected(self):
        t = self._trace([], [], 0.0)
        with pytest.raises(ValueError):
            evaluate_success(t)


class TestDeterminism:
    def test_identical_inputs_identical_traces(self, gripper):
        from softgrip.fem.sim import run_episode
        from softgrip.geometry.sdf import sphere

        obj = sphere(0.022, position=(0, 0.022, 0), density=8.0)
        script = MotionScript(tension=2.0, ramp_s=0.01, hold_s=0.005,
                              lift_s=0.01, disturb_s=0.005,
                              lift_dist=0.01, disturb_force=0.1)
        pose = np.array([0, 0.112, 0, 0, 0, 0, 0.035, 0.035])
        k = np.full(22, 4e6)
        traces = []
        for _ in range(2):
            scene = Scene(gripper, obj=obj, params=SimParams())
            _, trace = run_episode(scene, k, pose, script)
            traces.append(trace)
        assert np.array_equal(traces[0].wrench, traces[1].wrench)
        assert np.array_equal(traces[0].dq, traces[1].dq)
        assert np.array_equal(traces[0].ground_contact,
                              traces[1].ground_contact)
