import numpy as np
import pytest

from tiltedlines.model import (BoundarySpec, EnsembleState, GridInterval,
                               TiltParams)
from tiltedlines.serialize import (CheckpointError, dump_state, load_state,
                                   state_to_csv, write_state_csv)


@pytest.fixture
def state(tilt12):
    g = GridInterval(-1.0, 1.0, 8)
    h = np.vstack([np.linspace(0, 0, 9) + 2.0, np.ones(9)])
    h[:, 0] = [2.0, 1.0]
    return EnsembleState(g, h, BoundarySpec.fixed([2.0, 1.0], [2.0, 1.0]), tilt12)


class TestCheckpoint:
    def test_roundtrip(self, state, tmp_path):
        p = tmp_path / "s.ck"
        dump_state(state, p, {"sweep": 42})
        loaded, extra = load_state(p)
        assert extra["sweep"] == 42
        assert np.array_equal(loaded.heights, state.heights)
        assert np.array_equal(loaded.floor, state.floor)
        assert loaded.grid == state.grid
        assert loaded.tilt == state.tilt
        assert loaded.boundary.kind == state.boundary.kind
        assert np.array_equal(loaded.frozen_cols, state.frozen_cols)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "junk.ck"
        p.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(CheckpointError):
            load_state(p)


class TestCSV:
    def test_schema_and_values(self, state, tmp_path):
        text = state_to_csv(state)
        lines = text.strip().split("\n")
        assert lines[0] == "line_index,t,height"
        assert len(lines) == 1 + 2 * 9
        first = lines[1].split(",")
        assert first[0] == "1" and float(first[1]) == -1.0
        p = tmp_path / "s.csv"
        write_state_csv(state, p)
        assert p.read_text() == text
