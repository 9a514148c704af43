// SPDX-License-Identifier: Apache-2.0
#include "msplat/ply_io.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <vector>

namespace msplat {

namespace {

constexpr int kVersion = 1;
constexpr int kFloatsPerGaussian = 14;

const char* kPropertyNames[kFloatsPerGaussian] = {
    "x",       "y",       "z",       "rot_w",   "rot_x",  "rot_y", "rot_z",
    "scale_0", "scale_1", "scale_2", "opacity", "red",    "green", "blue"};

}  // namespace

size_t ply_payload_bytes(size_t n) { return n * kFloatsPerGaussian * sizeof(float); }

void export_ply(const GaussianMap& map, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\ncomment splat_version " << kVersion
         << "\nelement vertex " << map.size() << "\n";
  for (const char* name : kPropertyNames) header << "property float " << name << "\n";
  header << "end_header\n";
  const std::string h = header.str();
  f.write(h.data(), static_cast<std::streamsize>(h.size()));

  std::vector<float> row(kFloatsPerGaussian);
  for (const Gaussian3D& g : map.gaussians) {
    row[0] = static_cast<float>(g.location.x());
    row[1] = static_cast<float>(g.location.y());
    row[2] = static_cast<float>(g.location.z());
    row[3] = static_cast<float>(g.rotation.w());
    row[4] = static_cast<float>(g.rotation.x());
    row[5] = static_cast<float>(g.rotation.y());
    row[6] = static_cast<float>(g.rotation.z());
    row[7] = static_cast<float>(g.log_scale.x());
    row[8] = static_cast<float>(g.log_scale.y());
    row[9] = static_cast<float>(g.log_scale.z());
    row[10] = static_cast<float>(g.opacity_logit);
    row[11] = static_cast<float>(g.color.x());
    row[12] = static_cast<float>(g.color.y());
    row[13] = static_cast<float>(g.color.z());
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!f) throw IoError("short write to " + path);
  f.close();

  nlohmann::json sidecar;
  sidecar["gaussian_count"] = map.size();
  sidecar["payload_bytes"] = ply_payload_bytes(map.size());
  sidecar["floats_per_gaussian"] = kFloatsPerGaussian;
  sidecar["splat_version"] = kVersion;
  std::ofstream sf(path + ".json");
  sf << sidecar.dump(2) << "\n";
}

GaussianMap import_ply(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);

  auto next_line = [&]() {
    std::string line;
    if (!std::getline(f, line)) throw MalformedPly("unexpected end of header in " + path);
    return line;
  };

  if (next_line() != "ply") throw MalformedPly(path + " does not start with 'ply'");
  if (next_line() != "format binary_little_endian 1.0")
    throw MalformedPly(path + " is not binary little-endian 1.0");

  size_t count = 0;
  int version = -1;
  std::vector<std::string> props;
  for (std::string line = next_line(); line != "end_header"; line = next_line()) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "comment") {
      std::string key;
      ss >> key;
      if (key == "splat_version") ss >> version;
    } else if (tok == "element") {
      std::string kind;
      ss >> kind >> count;
      if (kind != "vertex") throw MalformedPly("unexpected element '" + kind + "' in " + path);
    } else if (tok == "property") {
      std::string type, name;
      ss >> type >> name;
      if (type != "float") throw MalformedPly("non-float property '" + name + "' in " + path);
      props.push_back(name);
    } else {
      throw MalformedPly("unexpected header line '" + line + "' in " + path);
    }
  }
  if (version == -1) throw VersionMismatch(path + " has no splat_version comment");
  if (version != kVersion)
    throw VersionMismatch(path + " has splat_version " + std::to_string(version) + ", expected " +
                          std::to_string(kVersion));
  if (props.size() != kFloatsPerGaussian) throw MalformedPly("wrong property count in " + path);
  for (int i = 0; i < kFloatsPerGaussian; ++i)
    if (props[i] != kPropertyNames[i])
      throw MalformedPly("property " + std::to_string(i) + " is '" + props[i] + "', expected '" +
                         kPropertyNames[i] + "' in " + path);

  GaussianMap map;
  std::vector<float> row(kFloatsPerGaussian);
  for (size_t i = 0; i < count; ++i) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!f) throw MalformedPly(path + " payload truncated at vertex " + std::to_string(i));
    Gaussian3D g;
    g.location = {row[0], row[1], row[2]};
    g.rotation = Eigen::Quaterniond(row[3], row[4], row[5], row[6]);
    g.log_scale = {row[7], row[8], row[9]};
    g.opacity_logit = row[10];
    g.color = {row[11], row[12], row[13]};
    map.push(g);
  }
  return map;
}

}  // namespace msplat
