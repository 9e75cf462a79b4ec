import json

import numpy as np
import pytest

from telemanip.model import (
    LEG_ORDER,
    ModelError,
    default_model,
    load_model_dict,
    neutral_state,
)


def minimal_doc():
    """Two-link model: floating base plus one revolute arm joint."""
    return {
        "name": "mini",
        "links": [
            {"name": "base", "mass": 5.0, "com": [0, 0, 0],
             "inertia": [[0.1, 0, 0], [0, 0.1, 0], [0, 0, 0.1]]},
            {"name": "arm", "mass": 1.0, "com": [0.1, 0, 0],
             "inertia": [[0.01, 0, 0], [0, 0.01, 0], [0, 0, 0.01]]},
        ],
        "joints": [
            {"name": "root", "kind": "floating", "parent": "world", "child": "base"},
            {"name": "shoulder", "kind": "revolute", "parent": "base", "child": "arm",
             "axis": [0, 1, 0], "origin_pos": [0.2, 0, 0],
             "position_limits": [-1.5, 1.5], "torque_limits": [-10, 10]},
        ],
        "frames": [{"name": "tip", "link": "arm", "offset": [0.3, 0, 0]}],
        "contacts": [],
        "legs": {},
        "home": {"shoulder": 0.2},
    }


def test_default_model_shape(model):
    assert model.actuated_count == 18
    assert model.nv == 24
    assert len(model.contact_names) == 4
    assert tuple(model.legs.keys()) == LEG_ORDER
    assert np.isclose(model.total_mass, 21.7, atol=1e-9)
    assert "ee" in model.frame_map
    lo, hi = model.torque_limit_arrays()
    assert np.all(lo < hi)


def test_default_model_cached():
    assert default_model() is default_model()


def test_minimal_model_loads():
    m = load_model_dict(minimal_doc())
    assert m.actuated_count == 1
    assert m.nv == 7
    st = neutral_state(m)
    st.validate(m)
    assert np.isclose(st.q_a[0], 0.2)


def test_rejects_nonpositive_mass():
    doc = minimal_doc()
    doc["links"][1]["mass"] = 0.0
    with pytest.raises(ModelError, match="arm"):
        load_model_dict(doc)


def test_rejects_bad_inertia():
    doc = minimal_doc()
    # violates the triangle inequality on principal moments
    doc["links"][1]["inertia"] = [[1.0, 0, 0], [0, 0.01, 0], [0, 0, 0.01]]
    with pytest.raises(ModelError, match="arm"):
        load_model_dict(doc)


def test_rejects_unknown_parent():
    doc = minimal_doc()
    doc["joints"][1]["parent"] = "ghost"
    with pytest.raises(ModelError, match="shoulder"):
        load_model_dict(doc)


def test_rejects_cycle():
    doc = minimal_doc()
    doc["links"].append({"name": "b2", "mass": 1.0, "com": [0, 0, 0],
                         "inertia": [[0.01, 0, 0], [0, 0.01, 0], [0, 0, 0.01]]})
    doc["joints"].append({"name": "j2", "kind": "revolute", "parent": "arm", "child": "b2",
                          "axis": [0, 0, 1], "origin_pos": [0, 0, 0],
                          "position_limits": [-1, 1], "torque_limits": [-1, 1]})
    doc["joints"][1]["parent"] = "b2"
    with pytest.raises(ModelError):
        load_model_dict(doc)


def test_rejects_reversed_torque_limits():
    doc = minimal_doc()
    doc["joints"][1]["torque_limits"] = [10, -10]
    with pytest.raises(ModelError, match="shoulder"):
        load_model_dict(doc)


def test_rejects_non_unit_axis():
    doc = minimal_doc()
    doc["joints"][1]["axis"] = [0, 2, 0]
    with pytest.raises(ModelError, match="shoulder"):
        load_model_dict(doc)


def test_rejects_two_floating_joints():
    doc = minimal_doc()
    doc["joints"][1] = {"name": "root2", "kind": "floating", "parent": "world", "child": "arm"}
    with pytest.raises(ModelError):
        load_model_dict(doc)


def test_state_validate_catches_bad_quat(model):
    st = neutral_state(model)
    st.base_quat = np.array([1.0, 0.5, 0.0, 0.0])
    with pytest.raises(ValueError):
        st.validate(model)


def test_state_validate_catches_wrong_dims(model):
    st = neutral_state(model)
    st.q_a = st.q_a[:-1]
    with pytest.raises(ValueError):
        st.validate(model)


def test_model_json_round_trip(model, tmp_path):
    from telemanip.model import load_model
    import importlib.resources as resources

    src = resources.files("telemanip").joinpath("data/models/default.json")
    doc = json.loads(src.read_text())
    p = tmp_path / "copy.json"
    p.write_text(json.dumps(doc))
    m2 = load_model(str(p))
    assert m2.actuated_count == model.actuated_count
    assert m2.name == model.name
