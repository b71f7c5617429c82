#pragma once

#include <string>
#include <vector>

#include "svvad/optim.hpp"
#include "svvad/tensor.hpp"

namespace svvad {

// Flat binary checkpoint: magic string, version, count, then per tensor
// (name length, name bytes, shape rank, dims, raw float64 values), all
// little-endian. A JSON sidecar at <path>.meta.json carries run metadata.
inline constexpr char kCheckpointMagic[8] = {'S', 'V', 'V', 'A',
                                             'D', 'C', 'K', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path,
                      const std::vector<TensorBlob>& blobs);
// Throws on bad magic or version mismatch.
std::vector<TensorBlob> read_checkpoint(const std::string& path);

std::vector<TensorBlob> store_blobs(const ParameterStore& params);
// Restores parameter values by name; throws on missing names or shape
// mismatches.
void load_store_blobs(ParameterStore& params,
                      const std::vector<TensorBlob>& blobs);

void write_metadata(const std::string& checkpoint_path,
                    const std::string& json_text);
std::string read_metadata(const std::string& checkpoint_path);

}  // namespace svvad
