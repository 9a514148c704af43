// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "msplat/gaussian_map.hpp"

namespace msplat {

// Binary little-endian PLY, 14 float32 per Gaussian:
// x y z rot_w rot_x rot_y rot_z scale_0 scale_1 scale_2 opacity_logit r g b.
// A `comment splat_version 1` line in the header carries the format version.
// Writes a JSON sidecar at path + ".json" with counts and byte sizes.
void export_ply(const GaussianMap& map, const std::string& path);

// Inverse of export_ply; accumulators come back zeroed. Throws MalformedPly
// on structural problems and VersionMismatch on an unknown splat_version.
GaussianMap import_ply(const std::string& path);

// Exact on-disk payload size for n Gaussians, excluding the header.
size_t ply_payload_bytes(size_t n);

}  // namespace msplat
