#include "kvmemnn/checkpoint.h"

#include <cstring>
#include <fstream>
#include <sstream>

namespace kvmemnn {

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void Put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void Bytes(const std::string& s) {
    Put<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void Matrix(const DenseMat& m) {
    auto d = m.data();
    out_.write(reinterpret_cast<const char*>(d.data()),
               static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  void Sparse(const SparseVec& v) {
    Put<std::uint64_t>(v.nnz());
    for (const auto& [i, w] : v.entries()) {
      Put<std::uint32_t>(i);
      Put<double>(w);
    }
  }
  void Ids(const std::vector<std::uint32_t>& ids) {
    Put<std::uint64_t>(ids.size());
    for (std::uint32_t i : ids) Put<std::uint32_t>(i);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename T>
  T Get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw DataError("checkpoint " + path_ + " is truncated");
    return v;
  }
  std::uint64_t Count(std::uint64_t limit = 1ULL << 32) {
    const auto n = Get<std::uint64_t>();
    if (n > limit) throw DataError("checkpoint " + path_ + " has an implausible length field");
    return n;
  }
  std::string Bytes() {
    std::string s(Count(1ULL << 34), '\0');
    in_.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!in_) throw DataError("checkpoint " + path_ + " is truncated");
    return s;
  }
  DenseMat Matrix(std::size_t rows, std::size_t cols) {
    DenseMat m(rows, cols);
    auto d = m.data();
    in_.read(reinterpret_cast<char*>(d.data()),
             static_cast<std::streamsize>(d.size() * sizeof(double)));
    if (!in_) throw DataError("checkpoint " + path_ + " is truncated");
    return m;
  }
  SparseVec Sparse(std::size_t dim) {
    const auto n = Count();
    std::vector<SparseVec::Entry> entries;
    entries.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) {
      const auto i = Get<std::uint32_t>();
      entries.emplace_back(i, Get<double>());
    }
    try {
      return SparseVec::FromUnsorted(dim, std::move(entries));
    } catch (const ConfigError& e) {
      throw DataError("checkpoint " + path_ + ": " + e.what());
    }
  }
  std::vector<std::uint32_t> Ids() {
    std::vector<std::uint32_t> ids(Count());
    for (auto& i : ids) i = Get<std::uint32_t>();
    return ids;
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path) {
  const ModelParams& p = ckpt.params;
  nlohmann::json header = {
      {"dim", p.dim()},
      {"features", p.features()},
      {"hops", p.hops()},
      {"tied", p.tied},
      {"experiment", ckpt.experiment},
      {"vocab", ckpt.vocab_tokens},
      {"center_encoded", ckpt.center_encoded},
      {"vocab_hash", ckpt.vocab_hash},
      {"manifest_hash", ckpt.manifest_hash},
      {"epochs_done", ckpt.epochs_done},
      {"best_epoch", ckpt.best_epoch},
  };
  if (ckpt.has_store) {
    header["store"] = {{"base_dim", ckpt.store.base_dim()},
                       {"freq_threshold", ckpt.store.freq_threshold()},
                       {"max_hashed", ckpt.store.max_hashed()}};
  }

  std::ostringstream buf;
  Writer w(buf);
  buf.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.Put<std::uint32_t>(kCheckpointVersion);
  w.Bytes(header.dump());
  w.Matrix(p.A);
  if (!p.tied) w.Matrix(p.B);
  for (const auto& r : p.R) w.Matrix(r);
  w.Put<std::uint8_t>(ckpt.has_store ? 1 : 0);
  if (ckpt.has_store) {
    const MemoryStore& s = ckpt.store;
    w.Put<std::uint64_t>(s.size());
    for (const auto& slot : s.slots()) {
      w.Sparse(slot.key);
      w.Sparse(slot.value);
      w.Ids(slot.value_candidates);
      const Provenance& pv = slot.provenance;
      w.Put<std::uint8_t>(pv.source == Provenance::Source::kTriple ? 0 : 1);
      w.Put<std::uint32_t>(pv.source_id);
      w.Put<std::uint32_t>(pv.sentence);
      w.Put<std::uint32_t>(pv.begin);
      w.Put<std::uint32_t>(pv.end);
      w.Put<std::uint8_t>(pv.reversed ? 1 : 0);
      w.Put<std::uint8_t>(pv.title_slot ? 1 : 0);
    }
    w.Put<std::uint64_t>(s.key_frequency().size());
    for (std::uint64_t f : s.key_frequency()) w.Put<std::uint64_t>(f);
    w.Put<std::uint64_t>(s.postings().size());
    for (const auto& list : s.postings()) w.Ids(list);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << buf.str();
  if (!out) throw DataError("write failed: " + path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw DataError(path + " is not a kvmemnn checkpoint (bad magic)");
  }
  Reader r(in, path);
  const auto version = r.Get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint " + path + " has format version " + std::to_string(version) +
                    "; this build reads version " + std::to_string(kCheckpointVersion));
  }

  Checkpoint ckpt;
  nlohmann::json header;
  std::size_t dim = 0, features = 0, hops = 0;
  try {
    header = nlohmann::json::parse(r.Bytes());
    dim = header.at("dim").get<std::size_t>();
    features = header.at("features").get<std::size_t>();
    hops = header.at("hops").get<std::size_t>();
    ckpt.params.tied = header.at("tied").get<bool>();
    ckpt.experiment = header.at("experiment");
    ckpt.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
    ckpt.center_encoded = header.at("center_encoded").get<bool>();
    ckpt.vocab_hash = header.at("vocab_hash").get<std::uint64_t>();
    ckpt.manifest_hash = header.at("manifest_hash").get<std::string>();
    ckpt.epochs_done = header.at("epochs_done").get<std::size_t>();
    ckpt.best_epoch = header.at("best_epoch").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + " has a malformed header: " + e.what());
  }
  if (dim == 0 || features == 0 || dim * features > (1ULL << 31)) {
    throw DataError("checkpoint " + path + " has implausible shapes");
  }
  ckpt.params.A = r.Matrix(dim, features);
  if (!ckpt.params.tied) ckpt.params.B = r.Matrix(dim, features);
  for (std::size_t h = 0; h < hops; ++h) ckpt.params.R.push_back(r.Matrix(dim, dim));

  ckpt.has_store = r.Get<std::uint8_t>() != 0;
  if (ckpt.has_store) {
    std::size_t base_dim = 0, freq = 0, max_hashed = 0;
    try {
      const auto& s = header.at("store");
      base_dim = s.at("base_dim").get<std::size_t>();
      freq = s.at("freq_threshold").get<std::size_t>();
      max_hashed = s.at("max_hashed").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("checkpoint " + path + " has a malformed store header: " + e.what());
    }
    std::vector<MemorySlot> slots(r.Count());
    for (auto& slot : slots) {
      slot.key = r.Sparse(features);
      slot.value = r.Sparse(features);
      slot.value_candidates = r.Ids();
      Provenance& pv = slot.provenance;
      pv.source = r.Get<std::uint8_t>() == 0 ? Provenance::Source::kTriple
                                             : Provenance::Source::kDocument;
      pv.source_id = r.Get<std::uint32_t>();
      pv.sentence = r.Get<std::uint32_t>();
      pv.begin = r.Get<std::uint32_t>();
      pv.end = r.Get<std::uint32_t>();
      pv.reversed = r.Get<std::uint8_t>() != 0;
      pv.title_slot = r.Get<std::uint8_t>() != 0;
    }
    std::vector<std::uint64_t> freqs(r.Count());
    for (auto& f : freqs) f = r.Get<std::uint64_t>();
    std::vector<std::vector<std::uint32_t>> postings(r.Count());
    for (auto& list : postings) list = r.Ids();
    ckpt.store = MemoryStore::FromParts(std::move(slots), base_dim, freq, max_hashed,
                                        std::move(freqs), std::move(postings));
  }
  return ckpt;
}

}  // namespace kvmemnn
