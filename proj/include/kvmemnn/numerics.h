#ifndef KVMEMNN_NUMERICS_H_
#define KVMEMNN_NUMERICS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kvmemnn {

// Error categories shared by the whole library. The CLI maps them onto exit
// codes (usage=1, data=2, numerical=3).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using DenseVec = std::vector<double>;

// Row-major dense matrix.
class DenseMat {
 public:
  DenseMat() = default;
  DenseMat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMat Identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void Fill(double v);

  bool operator==(const DenseMat& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Sparse feature vector: strictly increasing indices, nonzero weights.
class SparseVec {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  SparseVec() = default;
  explicit SparseVec(std::size_t dim) : dim_(dim) {}

  // Sorts, merges duplicate indices by summing, and drops zero weights.
  // Throws ConfigError on an index >= dim.
  static SparseVec FromUnsorted(std::size_t dim, std::vector<Entry> entries);

  std::size_t dim() const { return dim_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }

  double Get(std::uint32_t index) const;
  DenseVec ToDense() const;

  // Linear combination alpha*a + beta*b over the same dim.
  static SparseVec Combine(double alpha, const SparseVec& a, double beta, const SparseVec& b);

  bool operator==(const SparseVec& other) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<Entry> entries_;
};

// M * phi. Cost is nnz(phi) * rows(M).
DenseVec Embed(const DenseMat& m, const SparseVec& phi);
// Writes M * phi into out (resized to rows(M)).
void EmbedInto(const DenseMat& m, const SparseVec& phi, DenseVec& out);

double Dot(std::span<const double> a, std::span<const double> b);
DenseVec MatVec(const DenseMat& m, std::span<const double> x);
DenseVec MatTransposeVec(const DenseMat& m, std::span<const double> x);

// Numerically stable softmax (max subtraction).
DenseVec Softmax(std::span<const double> z);

// -log of the probability mass on the gold indices.
double CrossEntropyLoss(std::span<const double> dist, std::span<const std::uint32_t> gold);

}  // namespace kvmemnn

#endif  // KVMEMNN_NUMERICS_H_
