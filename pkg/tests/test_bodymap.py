import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from woundfuse.bodymap import (
    FULL_REGISTRY_SIZE,
    BodyMapError,
    BodyMapRegion,
    BodyMapRegistry,
    decode_location,
    default_registry,
    encode_location,
    load_registry,
)

LOWER_LEG_REGIONS = {
    135: "Right Fifth Toe Tip",
    150: "Right Lateral Heel",
    158: "Right Medial Malleolus",
    159: "Right Proximal Lateral Dorsal Foot",
    178: "Left Medial Malleolus",
    180: "Left Anterior Ankle",
    202: "Left Fifth Toe Tip",
    215: "Left Proximal Medial Plantar Foot",
}


class TestDefaultRegistry:
    def test_full_size(self):
        registry = default_registry()
        assert len(registry) == FULL_REGISTRY_SIZE == 484

    def test_codes_are_one_through_484(self):
        registry = default_registry()
        assert registry.codes == tuple(range(1, 485))

    @pytest.mark.parametrize("code,name", sorted(LOWER_LEG_REGIONS.items()))
    def test_lower_leg_regions(self, code, name):
        assert default_registry().region(code).name == name

    def test_sides_match_names(self):
        registry = default_registry()
        for code, name in LOWER_LEG_REGIONS.items():
            region = registry.region(code)
            assert region.side == name.split()[0].lower()

    def test_lookup_by_name(self):
        registry = default_registry()
        assert registry.lookup_code("Right Fifth Toe Tip") == 135
        assert registry.lookup_code("Left Medial Malleolus") == 178

    def test_encoding_order_is_ascending_code_rank(self):
        registry = default_registry()
        assert registry.encoding_order(1) == 0
        assert registry.encoding_order(484) == 483
        assert registry.encoding_order(135) == 134


class TestRegistryConstruction:
    def test_regions_sorted_by_code(self):
        registry = BodyMapRegistry(
            [BodyMapRegion(code=30, name="b"), BodyMapRegion(code=10, name="a")]
        )
        assert registry.codes == (10, 30)

    def test_duplicate_code_rejected(self):
        with pytest.raises(BodyMapError, match="duplicate"):
            BodyMapRegistry([BodyMapRegion(code=5, name="a"), BodyMapRegion(code=5, name="b")])

    def test_empty_rejected(self):
        with pytest.raises(BodyMapError):
            BodyMapRegistry([])

    def test_contains_and_region(self):
        registry = BodyMapRegistry([BodyMapRegion(code=7, name="x")])
        assert 7 in registry
        assert 8 not in registry
        with pytest.raises(BodyMapError):
            registry.region(8)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"code": 0, "name": "x"},
            {"code": -3, "name": "x"},
            {"code": 1, "name": ""},
            {"code": 1, "name": "x", "side": "up"},
            {"code": 1, "name": "x", "view": "sideways"},
        ],
    )
    def test_invalid_region_fields(self, kwargs):
        with pytest.raises(BodyMapError):
            BodyMapRegion(**kwargs)


class TestLoadRegistry:
    def test_round_trip_with_comments_and_header(self, tmp_path):
        path = tmp_path / "regions.csv"
        path.write_text(
            "# comment line\n"
            "code,name,side,view\n"
            "2,Some Region,left,front\n"
            "1,Other Region,n/a,n/a\n"
        )
        registry = load_registry(path)
        assert registry.codes == (1, 2)
        assert registry.region(2).side == "left"

    def test_missing_file_names_path(self, tmp_path):
        missing = tmp_path / "nope.csv"
        with pytest.raises(BodyMapError, match="nope.csv"):
            load_registry(missing)

    def test_duplicate_row_error_carries_both_rows(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("1,A,n/a,n/a\n2,B,n/a,n/a\n1,C,n/a,n/a\n")
        with pytest.raises(BodyMapError, match="row 3"):
            load_registry(path)

    def test_malformed_row_number_reported(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,A,n/a,n/a\nnot-a-code,B,n/a,n/a\n")
        with pytest.raises(BodyMapError, match="row 2"):
            load_registry(path)


class TestOneHot:
    def test_shape_dtype_and_position(self):
        registry = default_registry()
        vec = encode_location(135, registry)
        assert vec.shape == (484,)
        assert vec.dtype == np.float32
        assert vec.sum() == 1.0
        assert vec[registry.encoding_order(135)] == 1.0

    def test_round_trip_all_registered_codes(self):
        registry = default_registry()
        for code in registry.codes:
            assert decode_location(encode_location(code, registry), registry) == code

    def test_unknown_code_rejected(self):
        with pytest.raises(BodyMapError):
            encode_location(99999, default_registry())

    @pytest.mark.parametrize(
        "vec",
        [
            np.zeros(484, dtype=np.float32),
            np.ones(484, dtype=np.float32),
            np.full(484, 0.5, dtype=np.float32),
            np.zeros(10, dtype=np.float32),
        ],
    )
    def test_bad_encodings_rejected(self, vec):
        if vec.size == 484 and vec.sum() == 0:
            pass  # zero vector
        with pytest.raises(BodyMapError):
            decode_location(vec, default_registry())

    def test_multi_hot_rejected(self):
        vec = np.zeros(484, dtype=np.float32)
        vec[3] = vec[7] = 1.0
        with pytest.raises(BodyMapError):
            decode_location(vec, default_registry())


@settings(max_examples=50, deadline=None)
@given(
    codes=st.sets(st.integers(min_value=1, max_value=2000), min_size=1, max_size=40),
    pick=st.integers(min_value=0, max_value=10**9),
)
def test_round_trip_arbitrary_registries(codes, pick):
    registry = BodyMapRegistry([BodyMapRegion(code=c, name=f"Region {c}") for c in codes])
    assert registry.codes == tuple(sorted(codes))
    code = registry.codes[pick % len(registry)]
    vec = encode_location(code, registry)
    assert vec.shape == (len(registry),)
    assert decode_location(vec, registry) == code
