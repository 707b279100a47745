#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "srpl/dense_net.hpp"

namespace srpl {

// Binary layout, all integers and floats little-endian:
//   "SRPL1"
//   u32 network count
//   per network: u32 size count, u32 sizes[count], u32 head, f32 params[...]
//   u64 metadata length, metadata bytes
struct Checkpoint {
    std::vector<DenseNet<float>> networks;
    std::string metadata;
};

inline constexpr std::string_view kCheckpointMagic = "SRPL1";

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws MissingArtifact when the file cannot be opened.
Checkpoint load_checkpoint(const std::string& path);

// 64-bit FNV-1a, used for artifact fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace srpl
