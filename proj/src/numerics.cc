#include "kvmemnn/numerics.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kvmemnn {

DenseMat DenseMat::Identity(std::size_t n) {
  DenseMat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void DenseMat::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

SparseVec SparseVec::FromUnsorted(std::size_t dim, std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.first < b.first; });
  SparseVec out(dim);
  out.entries_.reserve(entries.size());
  for (const auto& [index, weight] : entries) {
    if (index >= dim) {
      throw ConfigError("sparse index " + std::to_string(index) + " out of range for dim " +
                        std::to_string(dim));
    }
    if (!out.entries_.empty() && out.entries_.back().first == index) {
      out.entries_.back().second += weight;
    } else {
      out.entries_.emplace_back(index, weight);
    }
  }
  std::erase_if(out.entries_, [](const Entry& e) { return e.second == 0.0; });
  return out;
}

double SparseVec::Get(std::uint32_t index) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                             [](const Entry& e, std::uint32_t i) { return e.first < i; });
  return (it != entries_.end() && it->first == index) ? it->second : 0.0;
}

DenseVec SparseVec::ToDense() const {
  DenseVec out(dim_, 0.0);
  for (const auto& [index, weight] : entries_) out[index] = weight;
  return out;
}

SparseVec SparseVec::Combine(double alpha, const SparseVec& a, double beta, const SparseVec& b) {
  if (a.dim() != b.dim()) throw ConfigError("SparseVec::Combine: dimension mismatch");
  std::vector<Entry> merged;
  merged.reserve(a.nnz() + b.nnz());
  for (const auto& [i, w] : a.entries()) merged.emplace_back(i, alpha * w);
  for (const auto& [i, w] : b.entries()) merged.emplace_back(i, beta * w);
  return FromUnsorted(a.dim(), std::move(merged));
}

void EmbedInto(const DenseMat& m, const SparseVec& phi, DenseVec& out) {
  if (phi.dim() != m.cols()) {
    throw ConfigError("embed: feature dim " + std::to_string(phi.dim()) +
                      " does not match matrix cols " + std::to_string(m.cols()));
  }
  out.assign(m.rows(), 0.0);
  for (const auto& [j, w] : phi.entries()) {
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] += m(i, j) * w;
  }
}

DenseVec Embed(const DenseMat& m, const SparseVec& phi) {
  DenseVec out;
  EmbedInto(m, phi, out);
  return out;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

DenseVec MatVec(const DenseMat& m, std::span<const double> x) {
  DenseVec out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * x[j];
    out[i] = s;
  }
  return out;
}

DenseVec MatTransposeVec(const DenseMat& m, std::span<const double> x) {
  DenseVec out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += m(i, j) * x[i];
  }
  return out;
}

DenseVec Softmax(std::span<const double> z) {
  DenseVec out(z.size());
  if (z.empty()) return out;
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double CrossEntropyLoss(std::span<const double> dist, std::span<const std::uint32_t> gold) {
  if (gold.empty()) throw DataError("cross entropy: empty gold set");
  std::vector<std::uint32_t> unique(gold.begin(), gold.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  double mass = 0.0;
  for (std::uint32_t g : unique) {
    if (g >= dist.size()) {
      throw DataError("cross entropy: gold index " + std::to_string(g) + " out of range");
    }
    mass += dist[g];
  }
  if (mass >= 1.0) return 0.0;
  if (mass <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(mass);
}

}  // namespace kvmemnn
