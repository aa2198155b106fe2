#ifndef SAMP_IO_HPP
#define SAMP_IO_HPP

#include "samp/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace samp {

// Feature file: magic "SAMPFEAT", little-endian u32 (C,H,W), then C*H*W
// little-endian f32 channel-major. The magic is checked before anything
// data-sized is allocated.
void write_feature_file(const std::string& path, const FeatureMap& f);
FeatureMap read_feature_file(const std::string& path);

// Checkpoint: magic "SAMPCKPT", u32 header length, UTF-8 header, then the
// concatenated little-endian f32 payloads. Header lines:
//   samp-checkpoint v1
//   config <canonical model config>
//   tensor <name> f32 <d0>x<d1>x... <payload byte offset>
struct CheckpointTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

struct Checkpoint {
    std::string config; // canonical ModelConfig string
    std::vector<CheckpointTensor> tensors;

    const CheckpointTensor* find(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// Writes to path + ".tmp" and renames on success, so failed runs never leave
// a partial file behind.
void atomic_write_text(const std::string& path, const std::string& contents);

} // namespace samp

#endif
