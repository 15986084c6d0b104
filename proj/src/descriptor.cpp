#include "sphereloc/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "sphereloc/binary_io.hpp"
#include "sphereloc/errors.hpp"
#include "sphereloc/sht.hpp"
#include "sphereloc/spectra.hpp"

namespace sphereloc {

namespace {

constexpr std::uint16_t kModelFormatVersion = 1;

void check_triplets(std::span<const FeatureVec> samples, std::span<const Triplet> triplets) {
  for (const auto& t : triplets) {
    const std::size_t n = samples.size();
    if (t.anchor >= n || t.positive >= n || t.negative >= n) {
      throw InvalidParameter("triplet references a sample outside the store");
    }
    if (t.anchor == t.positive || t.anchor == t.negative || t.positive == t.negative) {
      throw InvalidParameter("triplet ids must be distinct");
    }
  }
}

/// Column i of the returned matrices holds x_a - x_p (first) and x_a - x_n (second).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> difference_columns(std::span<const FeatureVec> samples,
                                                               std::span<const Triplet> triplets) {
  const Eigen::Index dim = samples.empty() ? 0 : samples[0].size();
  Eigen::MatrixXd pos(dim, static_cast<Eigen::Index>(triplets.size()));
  Eigen::MatrixXd neg(dim, static_cast<Eigen::Index>(triplets.size()));
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    pos.col(static_cast<Eigen::Index>(i)) = samples[t.anchor] - samples[t.positive];
    neg.col(static_cast<Eigen::Index>(i)) = samples[t.anchor] - samples[t.negative];
  }
  return {std::move(pos), std::move(neg)};
}

}  // namespace

FeatureVec spectral_features(const FeatureSphere& sphere, int degrees) {
  if (degrees < 1 || degrees > sphere.bandwidth()) {
    throw InvalidParameter("feature degrees " + std::to_string(degrees) +
                           " outside [1, bandwidth " + std::to_string(sphere.bandwidth()) + "]");
  }
  const SphericalGrid grid(sphere.bandwidth());
  FeatureVec x(kModalityCount * degrees);
  for (int m = 0; m < kModalityCount; ++m) {
    const Spectrum s = forward_sht(standardize(sphere.channels()[m]), grid, degrees);
    const DegreeSeries power = power_spectrum(s, degrees);
    for (int l = 0; l < degrees; ++l) x[m * degrees + l] = std::log1p(power[l]);
  }
  return x;
}

EmbeddingModel EmbeddingModel::zeros(int input_dim) {
  EmbeddingModel m;
  m.weights = Eigen::MatrixXd::Zero(kDescriptorDim, input_dim);
  m.bias = Eigen::VectorXd::Zero(kDescriptorDim);
  return m;
}

EmbeddingModel EmbeddingModel::random(int input_dim, std::uint64_t seed) {
  EmbeddingModel m = zeros(input_dim);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (Eigen::Index r = 0; r < m.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.weights.cols(); ++c) m.weights(r, c) = uniform(rng);
  }
  return m;
}

Descriptor embed(const FeatureVec& x, const EmbeddingModel& model) {
  if (x.size() != model.weights.cols()) {
    throw ShapeError("feature vector of length " + std::to_string(x.size()) +
                     " does not match model input " + std::to_string(model.weights.cols()));
  }
  return model.weights * x + model.bias;
}

double triplet_loss(double d_ap, double d_an, double tau1, double tau2) {
  if (d_ap < 0.0 || d_an < 0.0) throw InvalidParameter("distances must be non-negative");
  return std::max(0.0, d_ap - d_an + tau1) + std::max(0.0, d_ap - tau2);
}

double batch_triplet_loss(const EmbeddingModel& model, std::span<const FeatureVec> samples,
                          std::span<const Triplet> triplets, double tau1, double tau2) {
  if (triplets.empty()) return 0.0;
  check_triplets(samples, triplets);
  const auto [pos, neg] = difference_columns(samples, triplets);
  const Eigen::VectorXd d_ap = (model.weights * pos).colwise().norm();
  const Eigen::VectorXd d_an = (model.weights * neg).colwise().norm();
  double total = 0.0;
  for (Eigen::Index i = 0; i < d_ap.size(); ++i) total += triplet_loss(d_ap[i], d_an[i], tau1, tau2);
  return total / static_cast<double>(triplets.size());
}

EmbeddingGradient batch_triplet_gradient(const EmbeddingModel& model,
                                         std::span<const FeatureVec> samples,
                                         std::span<const Triplet> triplets, double tau1,
                                         double tau2) {
  EmbeddingGradient grad{Eigen::MatrixXd::Zero(model.weights.rows(), model.weights.cols()),
                         Eigen::VectorXd::Zero(model.bias.size())};
  if (triplets.empty()) return grad;
  check_triplets(samples, triplets);
  const auto [pos, neg] = difference_columns(samples, triplets);
  Eigen::MatrixXd e_pos = model.weights * pos;
  Eigen::MatrixXd e_neg = model.weights * neg;
  const double n = static_cast<double>(triplets.size());
  for (Eigen::Index i = 0; i < e_pos.cols(); ++i) {
    const double d_ap = e_pos.col(i).norm();
    const double d_an = e_neg.col(i).norm();
    const bool margin_active = d_ap - d_an + tau1 > 0.0;
    const bool positive_active = d_ap - tau2 > 0.0;
    // d|W u| / dW = (W u) u^T / |W u|; zero subgradient where the norm vanishes.
    const double c_ap = (d_ap > 0.0) ? ((margin_active ? 1.0 : 0.0) + (positive_active ? 1.0 : 0.0)) / (n * d_ap) : 0.0;
    const double c_an = (d_an > 0.0 && margin_active) ? -1.0 / (n * d_an) : 0.0;
    e_pos.col(i) *= c_ap;
    e_neg.col(i) *= c_an;
  }
  grad.weights.noalias() = e_pos * pos.transpose();
  grad.weights.noalias() += e_neg * neg.transpose();
  return grad;
}

EmbeddingModel train_embedding(std::span<const FeatureVec> samples, std::span<const Triplet> triplets,
                               const TrainingConfig& config, EmbeddingModel model) {
  if (triplets.empty()) throw InvalidParameter("training needs at least one triplet");
  if (samples.empty() || samples[0].size() != model.weights.cols()) {
    throw ShapeError("sample dimension does not match the model input");
  }
  check_triplets(samples, triplets);

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch =
      config.batch_size <= 0 ? triplets.size()
                             : std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), triplets.size());

  model.loss_trace.push_back(batch_triplet_loss(model, samples, triplets, config.tau1, config.tau2));
  std::vector<Triplet> minibatch;
  minibatch.reserve(batch);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      minibatch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
        minibatch.push_back(triplets[order[i]]);
      }
      const EmbeddingGradient g =
          batch_triplet_gradient(model, samples, minibatch, config.tau1, config.tau2);
      model.weights -= config.learning_rate * g.weights;
      model.bias -= config.learning_rate * g.bias;
    }
    model.loss_trace.push_back(batch_triplet_loss(model, samples, triplets, config.tau1, config.tau2));
  }
  model.epochs += config.epochs;
  model.final_loss = model.loss_trace.back();
  return model;
}

EmbeddingModel train_embedding(std::span<const FeatureVec> samples, std::span<const Triplet> triplets,
                               const TrainingConfig& config) {
  if (samples.empty()) throw InvalidParameter("training needs samples");
  return train_embedding(samples, triplets, config,
                         EmbeddingModel::random(static_cast<int>(samples[0].size()), config.seed));
}

std::vector<std::uint32_t> spacing_subsample(std::span<const Vec3> positions, double min_spacing) {
  std::vector<std::uint32_t> kept;
  const double min_sq = min_spacing * min_spacing;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::uint32_t k) {
      return (positions[k] - positions[i]).squaredNorm() >= min_sq;
    });
    if (clear) kept.push_back(static_cast<std::uint32_t>(i));
  }
  return kept;
}

std::vector<Triplet> mine_triplets(std::span<const Vec3> positions, const MiningConfig& config) {
  if (positions.size() < 3) throw InvalidParameter("triplet mining needs at least three poses");
  const std::vector<std::uint32_t> kept = spacing_subsample(positions, config.min_spacing);
  std::mt19937_64 rng(config.seed);
  std::vector<Triplet> triplets;
  std::vector<std::uint32_t> positives, negatives;
  for (const std::uint32_t a : kept) {
    positives.clear();
    negatives.clear();
    for (const std::uint32_t o : kept) {
      if (o == a) continue;
      const double d = (positions[o] - positions[a]).norm();
      if (d < config.positive_radius) {
        positives.push_back(o);
      } else if (d >= config.negative_min && d <= config.negative_max) {
        negatives.push_back(o);
      }
    }
    if (positives.empty() || negatives.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, negatives.size() - 1);
    for (const std::uint32_t p : positives) triplets.push_back({a, p, negatives[pick(rng)]});
  }
  return triplets;
}

void save_model(const std::filesystem::path& path, const EmbeddingModel& model) {
  ByteWriter w;
  w.magic("EMBD");
  w.u16(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.weights.rows()));
  w.u32(static_cast<std::uint32_t>(model.weights.cols()));
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) w.f64(model.weights(r, c));
  }
  for (Eigen::Index r = 0; r < model.bias.size(); ++r) w.f64(model.bias[r]);
  write_file_bytes(path, w.bytes());
}

EmbeddingModel load_model(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  r.expect_magic("EMBD");
  const std::size_t version_at = r.offset();
  const auto version = r.u16();
  if (version != kModelFormatVersion) throw UnsupportedVersion(version, version_at);
  const std::size_t rows_at = r.offset();
  const auto rows = r.u32();
  const auto cols = r.u32();
  if (rows != kDescriptorDim) throw FormatError("model must have 256 output rows", rows_at);
  r.require((static_cast<std::size_t>(rows) * cols + rows) * 8, "truncated model weights");
  EmbeddingModel m = EmbeddingModel::zeros(static_cast<int>(cols));
  for (Eigen::Index i = 0; i < m.weights.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.weights.cols(); ++c) m.weights(i, c) = r.f64();
  }
  for (Eigen::Index i = 0; i < m.bias.size(); ++i) m.bias[i] = r.f64();
  return m;
}

void save_descriptors(const std::filesystem::path& path, std::span<const std::vector<float>> descriptors) {
  ByteWriter w;
  w.magic("DESC");
  w.u32(static_cast<std::uint32_t>(descriptors.size()));
  w.u32(kDescriptorDim);
  for (const auto& d : descriptors) {
    if (d.size() != kDescriptorDim) throw ShapeError("descriptor must have 256 entries");
    for (float v : d) w.f32(v);
  }
  write_file_bytes(path, w.bytes());
}

std::vector<std::vector<float>> load_descriptors(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  r.expect_magic("DESC");
  const auto count = r.u32();
  const std::size_t dim_at = r.offset();
  const auto dim = r.u32();
  if (dim != kDescriptorDim) throw FormatError("descriptor dimension must be 256", dim_at);
  r.require(static_cast<std::size_t>(count) * dim * 4, "truncated descriptor block");
  std::vector<std::vector<float>> out(count, std::vector<float>(dim));
  for (auto& d : out) {
    for (auto& v : d) v = r.f32();
  }
  return out;
}

}  // namespace sphereloc
