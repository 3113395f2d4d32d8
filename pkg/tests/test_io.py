import numpy as np
import pytest

from pointscan import EmptyInputError, ParseError, load_pointcloud

PLY_THREE_VERTICES = """ply
format ascii 1.0
comment made by hand
element vertex 3
property float x
property float y
property float z
end_header
0 0 0
1 0 0
0.5 0.25 -1
"""


class TestXyz:
    def test_two_points(self, tmp_path):
        path = tmp_path / "two.xyz"
        path.write_text("0 0 0\n1 0 0\n")
        cloud = load_pointcloud(path, "xyz_text")
        np.testing.assert_array_equal(cloud.points, [[0, 0, 0], [1, 0, 0]])

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "c.xyz"
        path.write_text("# header\n\n1 2 3\n   \n# tail\n4 5 6\n")
        cloud = load_pointcloud(path, "xyz_text")
        np.testing.assert_array_equal(cloud.points, [[1, 2, 3], [4, 5, 6]])

    def test_preserves_file_order(self, tmp_path):
        path = tmp_path / "o.xyz"
        path.write_text("3 3 3\n1 1 1\n3 3 3\n2 2 2\n")
        cloud = load_pointcloud(path, "xyz_text")
        assert cloud.points[:, 0].tolist() == [3, 1, 3, 2]

    def test_wrong_column_count_reports_line(self, tmp_path):
        path = tmp_path / "bad.xyz"
        path.write_text("0 0 0\n1 2\n")
        with pytest.raises(ParseError) as err:
            load_pointcloud(path, "xyz_text")
        assert err.value.line == 2

    def test_bad_number_reports_line(self, tmp_path):
        path = tmp_path / "bad.xyz"
        path.write_text("0 0 zero\n")
        with pytest.raises(ParseError) as err:
            load_pointcloud(path, "xyz_text")
        assert err.value.line == 1

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.xyz"
        path.write_text("")
        with pytest.raises(EmptyInputError):
            load_pointcloud(path, "xyz_text")

    def test_only_comments_is_empty(self, tmp_path):
        path = tmp_path / "comments.xyz"
        path.write_text("# nothing\n# here\n")
        with pytest.raises(EmptyInputError):
            load_pointcloud(path, "xyz_text")


class TestPly:
    def test_three_vertices_in_header_order(self, tmp_path):
        path = tmp_path / "tri.ply"
        path.write_text(PLY_THREE_VERTICES)
        cloud = load_pointcloud(path, "ply_ascii")
        np.testing.assert_array_equal(cloud.points, [[0, 0, 0], [1, 0, 0], [0.5, 0.25, -1]])

    def test_extra_properties_and_elements_ignored(self, tmp_path):
        path = tmp_path / "rich.ply"
        path.write_text(
            "ply\nformat ascii 1.0\n"
            "element vertex 2\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property uchar red\n"
            "element face 1\nproperty list uchar int vertex_indices\n"
            "end_header\n"
            "1 2 3 255\n4 5 6 0\n3 0 1 2\n"
        )
        cloud = load_pointcloud(path, "ply_ascii")
        np.testing.assert_array_equal(cloud.points, [[1, 2, 3], [4, 5, 6]])

    def test_property_order_respected(self, tmp_path):
        path = tmp_path / "zyx.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 1\n"
            "property float z\nproperty float y\nproperty float x\nend_header\n"
            "3 2 1\n"
        )
        cloud = load_pointcloud(path, "ply_ascii")
        np.testing.assert_array_equal(cloud.points, [[1, 2, 3]])

    def test_binary_format_rejected(self, tmp_path):
        path = tmp_path / "bin.ply"
        path.write_text("ply\nformat binary_little_endian 1.0\nend_header\n")
        with pytest.raises(ParseError):
            load_pointcloud(path, "ply_ascii")

    def test_missing_end_header(self, tmp_path):
        path = tmp_path / "trunc.ply"
        path.write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n")
        with pytest.raises(ParseError):
            load_pointcloud(path, "ply_ascii")

    def test_too_few_vertex_lines(self, tmp_path):
        path = tmp_path / "short.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 2\n"
            "property float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n"
        )
        with pytest.raises(ParseError):
            load_pointcloud(path, "ply_ascii")

    def test_zero_vertices_is_empty(self, tmp_path):
        path = tmp_path / "zero.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 0\n"
            "property float x\nproperty float y\nproperty float z\nend_header\n"
        )
        with pytest.raises(EmptyInputError):
            load_pointcloud(path, "ply_ascii")

    def test_missing_xyz_properties(self, tmp_path):
        path = tmp_path / "noz.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 1\n"
            "property float x\nproperty float y\nend_header\n0 0\n"
        )
        with pytest.raises(ParseError):
            load_pointcloud(path, "ply_ascii")


class TestBinary:
    def test_roundtrip(self, tmp_path):
        pts = np.array([[0.5, -1.25, 3.0], [7.0, 8.0, 9.0]], dtype="<f4")
        path = tmp_path / "pts.bin"
        path.write_bytes(pts.tobytes())
        cloud = load_pointcloud(path, "f32le_bin")
        np.testing.assert_array_equal(cloud.points, pts.astype(np.float64))

    def test_length_not_multiple_of_record(self, tmp_path):
        path = tmp_path / "ragged.bin"
        path.write_bytes(b"\x00" * 20)
        with pytest.raises(ParseError):
            load_pointcloud(path, "f32le_bin")

    def test_empty(self, tmp_path):
        path = tmp_path / "empty.bin"
        path.write_bytes(b"")
        with pytest.raises(EmptyInputError):
            load_pointcloud(path, "f32le_bin")


def test_unknown_format(tmp_path):
    path = tmp_path / "x.xyz"
    path.write_text("0 0 0\n")
    with pytest.raises(ParseError):
        load_pointcloud(path, "obj")
