#ifndef KVMEMNN_PARAMS_H_
#define KVMEMNN_PARAMS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "kvmemnn/numerics.h"

namespace kvmemnn {

struct HyperParams {
  std::size_t dim = 32;    // embedding dimension d
  std::size_t hops = 2;    // H
  std::size_t window = 7;  // W, odd
  std::size_t freq_threshold = 1000;  // F
  std::size_t max_hashed = 1000;      // cap on hashed memory size
  double lr = 0.01;
  std::size_t epochs = 20;
  double dropout_question = 0.0;
  double dropout_memory = 0.0;
  double dropout_answer = 0.0;
  double clip_norm = 40.0;  // <= 0 disables clipping
  double init_scale = 1.0;  // init bound is init_scale / sqrt(dim)
  bool hop_identity_init = false;  // R_j starts at I plus the same noise
  bool tied = true;         // B shares storage with A
  std::uint64_t seed = 1;

  // Throws ConfigError describing the first violated constraint.
  void Validate() const;
};

// A (d x D), B (d x D, unless tied), R_1..R_H (d x d).
struct ModelParams {
  DenseMat A;
  DenseMat B;
  std::vector<DenseMat> R;
  bool tied = true;

  std::size_t dim() const { return A.rows(); }
  std::size_t features() const { return A.cols(); }
  std::size_t hops() const { return R.size(); }

  const DenseMat& output_embedding() const { return tied ? A : B; }

  bool operator==(const ModelParams& other) const = default;
};

// Uniform in [-s/sqrt(d), s/sqrt(d)] (s = init_scale, 1 by default) from
// the given seed. R matrices use the same distribution, optionally added to
// the identity so that early hops pass the query through.
ModelParams InitParams(const HyperParams& hyper, std::size_t features);

struct GradientSet {
  DenseMat dA;
  DenseMat dB;
  std::vector<DenseMat> dR;

  static GradientSet ZerosLike(const ModelParams& params);
  double SquaredNorm() const;
  void Scale(double factor);
};

// Untied: each matrix steps on its own gradient. Tied: dA + dB is applied to
// the shared matrix.
void SgdStep(ModelParams& params, const GradientSet& grads, double lr);

// Rescales grads so that the global norm does not exceed max_norm. Returns the
// pre-clipping norm.
double ClipGradients(GradientSet& grads, double max_norm);

// Central differences over every parameter coordinate. For tied params the
// derivative with respect to the shared matrix is reported in dA and dB stays
// zero.
GradientSet FiniteDifferenceGrad(const std::function<double(const ModelParams&)>& f,
                                 const ModelParams& params, double epsilon = 1e-5);

}  // namespace kvmemnn

#endif  // KVMEMNN_PARAMS_H_
