import numpy as np
import pytest

from crbm.render import RED, WHITE, render_denoising_grid, write_ppm


def read_ppm(path):
    """Minimal independent P6 reader used as the round-trip oracle."""
    with open(path, "rb") as fh:
        blob = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while blob[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while not blob[pos:pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    assert fields[0] == b"P6"
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    assert maxval == 255
    return np.frombuffer(blob, dtype=np.uint8, offset=pos).reshape(height, width, 3)


def count_color(grid, color):
    return int(np.all(grid == np.array(color, dtype=np.uint8), axis=-1).sum())


class TestRenderGrid:
    def test_prediction_equal_noisy_has_no_red(self):
        rng = np.random.default_rng(0)
        noisy = rng.integers(0, 2, (3, 16)).astype(float)
        pred = noisy.astype(np.uint8)
        clean = rng.integers(0, 2, (3, 16)).astype(np.uint8)
        grid = render_denoising_grid(noisy, pred, clean, 4, 4)
        assert count_color(grid, RED) == 0

    def test_all_added_pixels_are_red(self):
        noisy = np.zeros((2, 16))
        pred = np.ones((2, 16), dtype=np.uint8)
        clean = np.ones((2, 16), dtype=np.uint8)
        grid = render_denoising_grid(noisy, pred, clean, 4, 4)
        assert count_color(grid, RED) == 2 * 16

    def test_panel_geometry(self):
        grid = render_denoising_grid(np.zeros((2, 12)), np.zeros((2, 12), dtype=np.uint8),
                                     np.zeros((2, 12), dtype=np.uint8), 4, 3, pad=1)
        assert grid.shape == (2 * 3 + 3, 3 * 4 + 4, 3)

    def test_round_trip_through_reader(self, tmp_path):
        rng = np.random.default_rng(1)
        noisy = rng.integers(0, 2, (2, 25)).astype(float)
        pred = rng.integers(0, 2, (2, 25)).astype(np.uint8)
        clean = rng.integers(0, 2, (2, 25)).astype(np.uint8)
        grid = render_denoising_grid(noisy, pred, clean, 5, 5)
        path = tmp_path / "fig.ppm"
        write_ppm(path, grid)
        np.testing.assert_array_equal(read_ppm(path), grid)

    def test_misaligned_lists_rejected(self):
        with pytest.raises(ValueError):
            render_denoising_grid(np.zeros((2, 4)), np.zeros((3, 4), dtype=np.uint8),
                                  np.zeros((2, 4), dtype=np.uint8), 2, 2)

    def test_write_ppm_validates_shape(self, tmp_path):
        with pytest.raises(ValueError):
            write_ppm(tmp_path / "x.ppm", np.zeros((4, 4)))
