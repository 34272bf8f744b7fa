#include "kvmemnn/params.h"

#include <cmath>
#include <random>
#include <string>

namespace kvmemnn {

void HyperParams::Validate() const {
  if (dim < 1) throw ConfigError("hyper.dim must be >= 1");
  if (hops < 1) throw ConfigError("hyper.hops must be >= 1");
  if (window < 1 || window % 2 == 0) throw ConfigError("hyper.window must be odd and >= 1");
  if (freq_threshold < 1) throw ConfigError("hyper.freq_threshold must be >= 1");
  if (max_hashed < 1) throw ConfigError("hyper.max_hashed must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("hyper.lr must be finite and >= 0");
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) {
    throw ConfigError("hyper.init_scale must be finite and > 0");
  }
  for (double rate : {dropout_question, dropout_memory, dropout_answer}) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rates must lie in [0, 1)");
  }
}

ModelParams InitParams(const HyperParams& hyper, std::size_t features) {
  hyper.Validate();
  std::mt19937_64 rng(hyper.seed);
  const double bound = hyper.init_scale / std::sqrt(static_cast<double>(hyper.dim));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  auto fill = [&](DenseMat& m) {
    for (double& v : m.data()) v = uniform(rng);
  };

  ModelParams p;
  p.tied = hyper.tied;
  p.A = DenseMat(hyper.dim, features);
  fill(p.A);
  if (!p.tied) {
    p.B = DenseMat(hyper.dim, features);
    fill(p.B);
  }
  p.R.assign(hyper.hops, DenseMat(hyper.dim, hyper.dim));
  for (auto& r : p.R) {
    fill(r);
    if (hyper.hop_identity_init) {
      for (std::size_t i = 0; i < hyper.dim; ++i) r(i, i) += 1.0;
    }
  }
  return p;
}

GradientSet GradientSet::ZerosLike(const ModelParams& params) {
  GradientSet g;
  g.dA = DenseMat(params.A.rows(), params.A.cols());
  g.dB = DenseMat(params.A.rows(), params.A.cols());
  for (const auto& r : params.R) g.dR.emplace_back(r.rows(), r.cols());
  return g;
}

double GradientSet::SquaredNorm() const {
  double s = 0.0;
  auto add = [&s](const DenseMat& m) {
    for (double v : m.data()) s += v * v;
  };
  add(dA);
  add(dB);
  for (const auto& r : dR) add(r);
  return s;
}

void GradientSet::Scale(double factor) {
  auto scale = [factor](DenseMat& m) {
    for (double& v : m.data()) v *= factor;
  };
  scale(dA);
  scale(dB);
  for (auto& r : dR) scale(r);
}

void SgdStep(ModelParams& params, const GradientSet& grads, double lr) {
  if (grads.dR.size() != params.R.size() || grads.dA.rows() != params.A.rows() ||
      grads.dA.cols() != params.A.cols()) {
    throw ConfigError("sgd_step: gradient shapes do not match params");
  }
  auto step = [lr](DenseMat& m, const DenseMat& g) {
    auto md = m.data();
    auto gd = g.data();
    for (std::size_t i = 0; i < md.size(); ++i) md[i] -= lr * gd[i];
  };
  if (params.tied) {
    auto a = params.A.data();
    auto ga = grads.dA.data();
    auto gb = grads.dB.data();
    const bool has_b = !grads.dB.empty();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= lr * (ga[i] + (has_b ? gb[i] : 0.0));
  } else {
    step(params.A, grads.dA);
    step(params.B, grads.dB);
  }
  for (std::size_t h = 0; h < params.R.size(); ++h) step(params.R[h], grads.dR[h]);
}

double ClipGradients(GradientSet& grads, double max_norm) {
  const double norm = std::sqrt(grads.SquaredNorm());
  if (max_norm > 0.0 && norm > max_norm) grads.Scale(max_norm / norm);
  return norm;
}

GradientSet FiniteDifferenceGrad(const std::function<double(const ModelParams&)>& f,
                                 const ModelParams& params, double epsilon) {
  GradientSet g = GradientSet::ZerosLike(params);
  ModelParams probe = params;
  auto differentiate = [&](DenseMat& target, DenseMat& out) {
    auto values = target.data();
    auto grad = out.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double plus = f(probe);
      values[i] = saved - epsilon;
      const double minus = f(probe);
      values[i] = saved;
      grad[i] = (plus - minus) / (2.0 * epsilon);
    }
  };
  differentiate(probe.A, g.dA);
  if (!probe.tied) differentiate(probe.B, g.dB);
  for (std::size_t h = 0; h < probe.R.size(); ++h) differentiate(probe.R[h], g.dR[h]);
  return g;
}

}  // namespace kvmemnn
