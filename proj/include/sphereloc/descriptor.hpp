#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sphereloc/geometry.hpp"
#include "sphereloc/sphere_grid.hpp"

namespace sphereloc {

inline constexpr int kDescriptorDim = 256;
inline constexpr int kDefaultFeatureDegrees = 64;

/// Rotation-invariant input features: log1p of per-degree power of each
/// standardized modality, concatenated (photometry, range, intensity).
using FeatureVec = Eigen::VectorXd;
using Descriptor = Eigen::VectorXd;

/// Throws InvalidParameter if degrees exceeds the sphere bandwidth or is < 1.
FeatureVec spectral_features(const FeatureSphere& sphere, int degrees = kDefaultFeatureDegrees);

/// Affine embedding psi(x) = W x + b into the 256-d descriptor space.
struct EmbeddingModel {
  Eigen::MatrixXd weights;  ///< kDescriptorDim x input_dim
  Eigen::VectorXd bias;     ///< kDescriptorDim
  int epochs = 0;
  double final_loss = 0.0;
  std::vector<double> loss_trace;  ///< full-set mean loss before training and after each epoch

  int input_dim() const { return static_cast<int>(weights.cols()); }

  static EmbeddingModel zeros(int input_dim);
  /// Weights uniform in [-1/sqrt(d), 1/sqrt(d)], zero bias.
  static EmbeddingModel random(int input_dim, std::uint64_t seed);
};

/// Throws ShapeError on dimension mismatch.
Descriptor embed(const FeatureVec& x, const EmbeddingModel& model);

inline constexpr double kTripletMargin = 2.0;
inline constexpr double kPositiveMargin = 0.2;

/// [d_ap - d_an + tau1]_+ + [d_ap - tau2]_+. Throws InvalidParameter for
/// negative distances.
double triplet_loss(double d_ap, double d_an, double tau1 = kTripletMargin,
                    double tau2 = kPositiveMargin);

struct Triplet {
  std::uint32_t anchor = 0;
  std::uint32_t positive = 0;
  std::uint32_t negative = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct TrainingConfig {
  double learning_rate = 0.0046;
  int batch_size = 13;  ///< <= 0 means full batch
  int epochs = 50;
  std::uint64_t seed = 0;
  double tau1 = kTripletMargin;
  double tau2 = kPositiveMargin;
};

/// Mean triplet loss over the given triplets.
double batch_triplet_loss(const EmbeddingModel& model, std::span<const FeatureVec> samples,
                          std::span<const Triplet> triplets, double tau1 = kTripletMargin,
                          double tau2 = kPositiveMargin);

/// Exact subgradient of batch_triplet_loss with respect to the weights and
/// bias. Inactive hinges and hinge kinks contribute zero.
struct EmbeddingGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};
EmbeddingGradient batch_triplet_gradient(const EmbeddingModel& model,
                                         std::span<const FeatureVec> samples,
                                         std::span<const Triplet> triplets,
                                         double tau1 = kTripletMargin,
                                         double tau2 = kPositiveMargin);

/// Minibatch SGD starting from `initial`. Deterministic for a fixed seed.
/// Throws InvalidParameter for an empty triplet list.
EmbeddingModel train_embedding(std::span<const FeatureVec> samples, std::span<const Triplet> triplets,
                               const TrainingConfig& config, EmbeddingModel initial);
/// Same, starting from EmbeddingModel::random(dim, config.seed).
EmbeddingModel train_embedding(std::span<const FeatureVec> samples, std::span<const Triplet> triplets,
                               const TrainingConfig& config);

struct MiningConfig {
  double min_spacing = 0.10;
  double positive_radius = 5.0;
  double negative_min = 6.0;
  double negative_max = 20.0;
  std::uint64_t seed = 0;
};

/// Keeps poses in input order while every kept pair is at least min_spacing
/// apart. Returns indices into `positions`.
std::vector<std::uint32_t> spacing_subsample(std::span<const Vec3> positions, double min_spacing);

/// One triplet per (anchor, positive) pair among the spaced poses, with a
/// uniformly drawn negative. Ids index the input positions. Anchors lacking
/// positives or negatives are skipped. Throws InvalidParameter for fewer than
/// three poses.
std::vector<Triplet> mine_triplets(std::span<const Vec3> positions, const MiningConfig& config = {});

/// EMBD model file: magic, u16 version, u32 rows, u32 cols, weights (f64,
/// row-major), bias (f64).
void save_model(const std::filesystem::path& path, const EmbeddingModel& model);
EmbeddingModel load_model(const std::filesystem::path& path);

/// DESC descriptor file: magic, u32 count, u32 dim (256), count*dim f32.
void save_descriptors(const std::filesystem::path& path, std::span<const std::vector<float>> descriptors);
std::vector<std::vector<float>> load_descriptors(const std::filesystem::path& path);

}  // namespace sphereloc
