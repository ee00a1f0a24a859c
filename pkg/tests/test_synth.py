import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motion_retarget.errors import InsufficientData
from motion_retarget.grouping import classify_joints
from motion_retarget.rotations import is_rotation, rotation6d_to_matrix
from motion_retarget.skeleton import check_motion, compute_tpose, forward_kinematics
from motion_retarget.synth import (
    MANIFEST_SCHEMA,
    MOTION_KINDS,
    SPLIT_TAGS,
    STYLES,
    HumanoidParams,
    SynthConfig,
    build_dataset,
    default_split_transform,
    fk_match_error,
    generate_humanoid,
    generate_motion,
    load_dataset,
    make_splits,
    paired_variant,
)


@pytest.mark.parametrize("style", STYLES)
def test_humanoid_is_seeded_and_in_range(style):
    p = HumanoidParams()
    a, b = generate_humanoid(style=style, seed=11), generate_humanoid(style=style, seed=11)
    assert a == b and np.array_equal(a.offsets, b.offsets)
    assert 18 <= a.n_joints <= 26
    tpose = compute_tpose(a)
    legs = [p.thigh, p.shin, p.foot]
    assert sum(r[0] for r in legs) <= tpose.root_height <= sum(r[1] for r in legs)
    lo = sum(r[0] for r in legs) + p.spine_count[0] * p.spine[0] + p.neck[0] + p.head[0]
    hi = sum(r[1] for r in legs) + p.spine_count[1] * p.spine[1] + p.neck[1] + p.head[1]
    assert lo <= tpose.character_height <= hi


def test_naming_styles():
    names = {s: generate_humanoid(style=s, seed=0).names for s in STYLES}
    assert "LeftArm" in names["mixamo"] and "left_arm" in names["snake"] and "L_Arm" in names["abbrev"]


def test_bad_params():
    with pytest.raises(ValueError):
        HumanoidParams(thigh=(10.0, 5.0))
    with pytest.raises(ValueError):
        generate_humanoid(style="klingon")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**16), st.sampled_from(STYLES), st.sampled_from(MOTION_KINDS))
def test_generated_pairs_are_valid(seed, style, kind):
    sk = generate_humanoid(style=style, seed=seed)
    groups = classify_joints(sk).groups
    assert set(j for g in groups for j in g) == set(range(sk.n_joints))
    m = generate_motion(sk, kind, 24, seed)
    check_motion(sk, m)
    assert np.all(is_rotation(rotation6d_to_matrix(m.rotations)))
    # bounded angular speed: consecutive local rotations differ by less than 0.5 rad
    r = rotation6d_to_matrix(m.rotations)
    rel = np.einsum("tnji,tnjk->tnik", r[:-1], r[1:])
    angles = np.arccos(np.clip((np.trace(rel, axis1=-2, axis2=-1) - 1) / 2, -1, 1))
    assert angles.max() < 0.5


def test_walk_advances_and_seeds_differ():
    sk = generate_humanoid(seed=2)
    m = generate_motion(sk, "walk", 60, seed=1)
    assert np.all(np.diff(m.root_positions[:, 0]) > 0)
    other = generate_motion(sk, "walk", 60, seed=2)
    assert not np.allclose(m.rotations, other.rotations)
    with pytest.raises(ValueError):
        generate_motion(sk, "walk", 1)


@pytest.mark.parametrize("style", STYLES)
def test_paired_variant_is_an_exact_oracle(style):
    sk = generate_humanoid(style=style, seed=3)
    m = generate_motion(sk, "composite", 30, seed=3)
    transform = default_split_transform(sk)
    assert len(transform) == 4
    vsk, vm = paired_variant(sk, m, transform, name="v")
    assert vsk.n_joints == sk.n_joints + 4 and vsk.name == "v"
    assert fk_match_error(sk, m, vsk, vm) <= 1e-9
    inserted = [vsk.index(n) for n in vsk.names if n.endswith("_split")]
    np.testing.assert_allclose(vm.rotations[:, inserted], np.tile([1.0, 0, 0, 0, 1, 0], (30, 4, 1)))


def test_merge_variant():
    sk = generate_humanoid(seed=4)
    m = generate_motion(sk, "wave", 20, seed=4)
    spine = [n for n in sk.names if n.startswith("Spine")]
    vsk, vm = paired_variant(sk, m, [{"op": "merge", "chain": spine[:2]}])
    assert vsk.n_joints == sk.n_joints - 1
    pa, pb = forward_kinematics(sk, m), forward_kinematics(vsk, vm)
    for name in vsk.names:
        assert np.abs(pa[:, sk.index(name)] - pb[:, vsk.index(name)]).max() <= 1e-6
    with pytest.raises(ValueError):
        paired_variant(sk, m, [{"op": "twist"}])


def test_splits_partition():
    chars = [f"c{i}" for i in range(6)]
    motions = [(k, 0) for k in MOTION_KINDS]
    train, splits = make_splits(chars, motions, seed=5)
    again = make_splits(chars, motions, seed=5)
    assert train.to_dict() == again[0].to_dict()
    train_kinds = {k for k, _ in train.motions}
    assert set(splits["sc+sm"].characters) == set(train.characters)
    assert {k for k, _ in splits["sc+sm"].motions} <= train_kinds
    assert not set(splits["uc+um"].characters) & set(train.characters)
    assert not {k for k, _ in splits["uc+um"].motions} & train_kinds
    assert all(s.characters and s.motions for s in splits.values())
    with pytest.raises(InsufficientData):
        make_splits(["a"], motions)
    with pytest.raises(InsufficientData):
        make_splits(chars, [("walk", 0)])


def test_dataset_round_trip(tmp_path):
    from motion_retarget.synth import write_dataset

    config = SynthConfig(n_characters=3, frames=12, kinds=("walk", "squat"))
    ds = build_dataset(config)
    jsonschema.validate(ds.manifest, MANIFEST_SCHEMA)
    assert set(ds.manifest["splits"]) == {"train", *SPLIT_TAGS}
    write_dataset(ds, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest == ds.manifest
    back = load_dataset(tmp_path)
    assert set(back.skeletons) == set(ds.skeletons)
    for mid, m in ds.motions.items():
        character = mid.split("__")[0]
        positions_a = forward_kinematics(ds.skeletons[character], m)
        positions_b = forward_kinematics(back.skeletons[character], back.motions[mid])
        assert np.abs(positions_a - positions_b).max() < 1e-3
    for c in ds.manifest["characters"]:
        if c["topology"] == "variant":
            assert c["base"] in ds.skeletons and c["transform"]


def test_training_pool_uses_train_split():
    ds = build_dataset(SynthConfig(n_characters=3, frames=12))
    train = ds.manifest["splits"]["train"]
    pool = ds.training_pool()
    names = {sk.name for sk, _ in pool}
    assert names == set(train["characters"]) | {f"{c}_split" for c in train["characters"]}
    assert len(pool) == 2 * len(train["characters"]) * len(train["motions"])
    assert len(ds.training_pool(include_variants=False)) == len(pool) // 2
