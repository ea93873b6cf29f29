#pragma once

#include "morphshell/mesh.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace morphshell {

/// Raw node/triangle lists as read from disk, before topology extraction.
struct MeshData {
  std::vector<Vec3> nodes;
  std::vector<Triangle> triangles;
  std::vector<int> bilayer_triangles;
};

/// Native plain-text format:
///
///     # comment
///     nodes <N>
///     <index> <x> <y> <z>          (N lines)
///     triangles <M>
///     <index> <n1> <n2> <n3> <flag> (M lines, flag 1 = bilayer, 0 = single)
///
/// Indices are zero-based and must cover 0..N-1 / 0..M-1 exactly once.
MeshData read_mesh_file(const std::filesystem::path& path);
void write_mesh_file(const std::filesystem::path& path, const Mesh& mesh, const DofVector& x);

/// Wavefront OBJ, `v` and `f` records only; polygons are fan-triangulated.
MeshData read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const Mesh& mesh, const DofVector& x);

/// Whitespace-separated list of bilayer triangle indices; `#` comments.
std::vector<int> read_region_file(const std::filesystem::path& path);

/// Loads by extension: `.obj` reads OBJ plus the optional region sidecar,
/// anything else is parsed as the native format (a sidecar, if given,
/// replaces the inline flags).
MeshData load_mesh_data(const std::filesystem::path& path,
                        const std::optional<std::filesystem::path>& regions = std::nullopt);

Mesh load_mesh(const std::filesystem::path& path,
               const std::optional<std::filesystem::path>& regions = std::nullopt);

}  // namespace morphshell
