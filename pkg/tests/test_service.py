import pytest
from fastapi.testclient import TestClient

from feqtee.decompose import decompose_feature, emit_tee
from feqtee.obj_io import obj_text
from feqtee.records import RecordStore
from feqtee.service import create_app

from conftest import bump_feature, tower_feature


@pytest.fixture
def bump_store():
    mesh, root = bump_feature()
    decomp = decompose_feature(mesh, root)
    return RecordStore(decomp.records), decomp


@pytest.fixture
def client(bump_store):
    store, decomp = bump_store
    app = create_app(store)
    return TestClient(app), decomp


def cube_obj():
    from feqtee.primitives import cube
    m = cube()
    return obj_text(m.positions, m.faces)


def create_cube_session(client):
    r = client.post("/sessions", json={"obj": cube_obj()})
    assert r.status_code == 200
    return r.json()["session_id"]


def test_create_and_get_mesh(client):
    client, _ = client
    sid = create_cube_session(client)
    r = client.get(f"/sessions/{sid}/mesh")
    payload = r.json()
    assert payload["format"] == "feqtee-wire-v1"
    assert len(payload["vertices"]) == 8
    assert len(payload["faces"]) == 6


def test_unknown_session_404(client):
    client, _ = client
    assert client.get("/sessions/nope/mesh").status_code == 404


def test_pick_validity(client):
    client, _ = client
    sid = create_cube_session(client)
    r = client.post(f"/sessions/{sid}/pick", json={"faces": [1]})
    body = r.json()
    assert body["valid_disk"] is True
    assert len(body["boundary"]) == 4
    # two opposite faces are not a disk
    r = client.post(f"/sessions/{sid}/pick", json={"faces": [0, 1]})
    assert r.json()["valid_disk"] is False
    assert r.json()["reason"]


def test_apply_record_and_undo(client):
    client, _ = client
    sid = create_cube_session(client)
    client.post(f"/sessions/{sid}/pick", json={"faces": [1]})
    r = client.post(f"/sessions/{sid}/apply", json={"record_id": 0})
    assert r.status_code == 200, r.text
    assert len(r.json()["mesh"]["faces"]) == 10
    assert r.json()["trace"][0]["op"] == "apply"
    r = client.post(f"/sessions/{sid}/undo")
    assert len(r.json()["mesh"]["faces"]) == 6
    r = client.post(f"/sessions/{sid}/undo")
    assert r.status_code == 409


def test_apply_needs_pick(client):
    client, _ = client
    sid = create_cube_session(client)
    r = client.post(f"/sessions/{sid}/apply", json={"record_id": 0})
    assert r.status_code == 409


def test_apply_unknown_record(client):
    client, _ = client
    sid = create_cube_session(client)
    client.post(f"/sessions/{sid}/pick", json={"faces": [1]})
    r = client.post(f"/sessions/{sid}/apply", json={"record_id": 777})
    assert r.status_code == 422
    assert "unknown extrusion" in r.json()["detail"]


def test_records_listing(client):
    client, _ = client
    r = client.get("/records")
    recs = r.json()["records"]
    assert len(recs) == 1 and recs[0]["id"] == 0


def test_export_matches_mesh(client, tmp_path):
    client, _ = client
    sid = create_cube_session(client)
    obj = client.get(f"/sessions/{sid}/export").text
    served = client.get(f"/sessions/{sid}/mesh").json()
    # the exported OBJ parses back to exactly the served payload
    path = tmp_path / "export.obj"
    path.write_text(obj)
    from feqtee.obj_io import read_obj
    positions, faces = read_obj(path)
    assert positions.tolist() == served["vertices"]
    assert [list(f) for f in faces] == served["faces"]


def test_program_stepping():
    mesh, root = tower_feature(3)
    decomp = decompose_feature(mesh, root)
    store = RecordStore(decomp.records)
    client = TestClient(create_app(store))
    base_obj = obj_text(decomp.base_mesh.positions, decomp.base_mesh.faces)
    sid = client.post("/sessions", json={"obj": base_obj}).json()["session_id"]
    faces = sorted(decomp.base_patch.faces)
    ref = decomp.base_patch.reference_vertex
    r = client.post(f"/sessions/{sid}/pick",
                    json={"faces": faces, "reference_vertex": ref})
    assert r.json()["valid_disk"], r.text
    tee = emit_tee(decomp.graph)
    r = client.post(f"/sessions/{sid}/program", json={"tee": tee})
    assert r.json()["steps"] == 3
    counts = []
    for _ in range(3):
        r = client.post(f"/sessions/{sid}/step", json={"direction": "forward"})
        assert r.status_code == 200, r.text
        counts.append(len(r.json()["mesh"]["faces"]))
    assert counts == [10, 14, 18]
    r = client.post(f"/sessions/{sid}/step", json={"direction": "forward"})
    assert r.status_code == 409  # past program end
    r = client.post(f"/sessions/{sid}/step", json={"direction": "back"})
    assert len(r.json()["mesh"]["faces"]) == 14
