import math

import pytest

from steklov_dumbbell import asymptotics, fem, geometry, meshgen
from steklov_dumbbell.geometry import DumbbellSpec, TubeProfile

UNIT_AREA_R = 1 / math.sqrt(math.pi)

# criterion label -> (passed, detail); filled by test_acceptance and printed at the end of the run
ACCEPTANCE = {}


def dumbbell_spec(L=4.0, eps=0.1, profile=None, r=UNIT_AREA_R, n_arc=64, **kw):
    profile = profile or TubeProfile.constant(1.0, L)
    return DumbbellSpec(r, r, L, profile, eps, n_arc=n_arc, **kw)


@pytest.fixture(scope="session")
def disk_mesh():
    return meshgen.mesh_disk(1.0, 0.05)


@pytest.fixture(scope="session")
def disk_result(disk_mesh):
    return fem.solve_steklov(disk_mesh, 6)


@pytest.fixture(scope="session")
def square_mesh():
    return meshgen.mesh_polygon_grid(0.0, 1.0, 0.0, 1.0, 20, 20)


@pytest.fixture(scope="session")
def dumbbell_geom():
    return geometry.make_dumbbell(dumbbell_spec(n_arc=36))


@pytest.fixture(scope="session")
def dumbbell_mesh(dumbbell_geom):
    return meshgen.mesh_dumbbell(dumbbell_geom, 0.1, 4)


@pytest.fixture(scope="session")
def bump_geom():
    L = 3.0
    return geometry.make_dumbbell(DumbbellSpec(0.6, 0.5, L, TubeProfile.cosine_bump(1.0, 0.5, L), 0.12, n_arc=32))


@pytest.fixture(scope="session")
def bump_mesh(bump_geom):
    return meshgen.mesh_dumbbell(bump_geom, 0.1, 4)


@pytest.fixture(scope="session")
def all_meshes(disk_mesh, square_mesh, dumbbell_mesh, bump_mesh):
    return {"disk": disk_mesh, "square": square_mesh, "dumbbell": dumbbell_mesh, "bump": bump_mesh}


@pytest.fixture(scope="session")
def default_sweep():
    return asymptotics.sweep(dumbbell_spec(L=4.0, eps=0.4), [0.4, 0.2, 0.1, 0.05], k_max=3)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: (int(s.split()[0]), s)):
        ok, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
