#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "kvmemnn/checkpoint.h"
#include "test_util.h"

namespace kvmemnn {
namespace {

namespace fs = std::filesystem;

Checkpoint Sample(bool tied) {
  std::mt19937_64 rng(97);
  auto p = testing::MakeProblem(rng, 4, 12, 2, 5, 3, tied);
  Checkpoint c;
  c.params = p.params;
  c.experiment = {{"note", "sample"}};
  c.vocab_tokens = {"a", "b", "c"};
  c.center_encoded = true;
  c.vocab_hash = 0xDEADBEEFCAFEULL;
  c.manifest_hash = "0123abcd";
  c.epochs_done = 7;
  c.best_epoch = 4;
  c.has_store = true;
  for (auto& s : p.slots) s.value_candidates = {1, 2};
  p.slots[1].provenance = {Provenance::Source::kDocument, 3, 2, 1, 6, false, true};
  c.store = MemoryStore::Build(p.slots, 6, 3, 4);
  return c;
}

std::string Path(const std::string& name) {
  return (fs::temp_directory_path() / ("kvmemnn_ckpt_" + name)).string();
}

TEST(Checkpoint, RoundTripIsExact) {
  for (bool tied : {true, false}) {
    const Checkpoint c = Sample(tied);
    const auto path = Path(tied ? "tied" : "untied");
    SaveCheckpoint(c, path);
    const Checkpoint back = LoadCheckpoint(path);
    EXPECT_EQ(back.params, c.params);
    EXPECT_EQ(back.experiment, c.experiment);
    EXPECT_EQ(back.vocab_tokens, c.vocab_tokens);
    EXPECT_EQ(back.center_encoded, c.center_encoded);
    EXPECT_EQ(back.vocab_hash, c.vocab_hash);
    EXPECT_EQ(back.manifest_hash, c.manifest_hash);
    EXPECT_EQ(back.epochs_done, 7u);
    EXPECT_EQ(back.best_epoch, 4u);
    ASSERT_TRUE(back.has_store);
    EXPECT_EQ(back.store.slots(), c.store.slots());
    EXPECT_EQ(back.store.postings(), c.store.postings());
    EXPECT_EQ(back.store.key_frequency(), c.store.key_frequency());
    EXPECT_EQ(back.store.freq_threshold(), 3u);
    EXPECT_EQ(back.store.max_hashed(), 4u);
  }
}

TEST(Checkpoint, RejectsForeignOrDamagedFiles) {
  const auto path = Path("damaged");
  SaveCheckpoint(Sample(true), path);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << b;
  };

  std::string bad_version = bytes;
  bad_version[4] = 9;
  write(bad_version);
  EXPECT_THROW(LoadCheckpoint(path), DataError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  write(bad_magic);
  EXPECT_THROW(LoadCheckpoint(path), DataError);

  write(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(LoadCheckpoint(path), DataError);

  EXPECT_THROW(LoadCheckpoint(Path("does_not_exist")), DataError);
}

}  // namespace
}  // namespace kvmemnn
