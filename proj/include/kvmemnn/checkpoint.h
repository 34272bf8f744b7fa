#ifndef KVMEMNN_CHECKPOINT_H_
#define KVMEMNN_CHECKPOINT_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "kvmemnn/memory_store.h"
#include "kvmemnn/params.h"

namespace kvmemnn {

// Layout (little-endian):
//   "KVMN"  u32 version  u64 header_len  header (JSON, UTF-8)
//   A as d*D doubles, B likewise when untied, then H blocks of d*d doubles
//   u8 has_store, then the memory store when present
// The header carries shapes, experiment config, vocabulary and hashes.
inline constexpr char kCheckpointMagic[4] = {'K', 'V', 'M', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  nlohmann::json experiment;  // ExperimentConfig as JSON
  std::vector<std::string> vocab_tokens;
  bool center_encoded = false;
  std::uint64_t vocab_hash = 0;
  std::string manifest_hash;
  std::size_t epochs_done = 0;
  std::size_t best_epoch = 0;
  bool has_store = false;
  MemoryStore store;
};

// Throws DataError on I/O failure.
void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path);

// Throws DataError on a bad magic, an unsupported version or a truncated file.
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace kvmemnn

#endif  // KVMEMNN_CHECKPOINT_H_
