#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sphereloc/taper.hpp"

namespace sphereloc {

inline constexpr int kDefaultEvalDegrees = 15;

/// How the confidence recursion carries the previous degree.
enum class ConfidenceCarry {
  PreviousConfidence,  ///< G_l = G_{l-1} + increment (accumulating)
  PreviousCorrelation  ///< G_l = Q(l-1) + increment (default)
};

enum class ZScoreMode {
  Described,  ///< s = Phi^-1(g): zero at g = 0.5 (default)
  Literal     ///< s = Phi^-1((1 - (1 - g)) / 2) = Phi^-1(g / 2)
};

/// Per-degree confidences from correlations. Index 0 is unused and set to 0;
/// G_1 = Q(1) and G_l = carry + Q(l) (1 - Q(l)^2)^(l-1) prod_{i<l} (2i-1)/(2i),
/// where the carry is Q(l-1) or G_{l-1}.
/// Q is clamped to [-1, 1] before use and each G_l is saturated to [-1, 1].
DegreeSeries correlation_confidence(const DegreeSeries& q, int degrees = kDefaultEvalDegrees,
                                    ConfidenceCarry carry = ConfidenceCarry::PreviousCorrelation);

/// Same recursion without saturation.
DegreeSeries correlation_confidence_unbounded(const DegreeSeries& q, int degrees,
                                              ConfidenceCarry carry);

/// Standard-normal quantile.
double standard_normal_quantile(double p);

inline constexpr double kQuantileClamp = 1e-9;

/// z-score of a confidence g in [0, 1]; the quantile argument is clamped to
/// [1e-9, 1 - 1e-9]. Throws InvalidParameter for g outside [0, 1].
double z_score(double g, ZScoreMode mode = ZScoreMode::Described);

struct VoteOptions {
  int degrees = kDefaultEvalDegrees;
  ZScoreMode zscore = ZScoreMode::Described;
  ConfidenceCarry carry = ConfidenceCarry::PreviousCorrelation;
  FusionOptions fusion;
};

struct VoteResult {
  std::vector<double> scores;                 ///< accumulated z-score per candidate
  std::vector<DegreeSeries> confidences;      ///< G_l per candidate
  std::size_t selected = 0;
  double margin = 0.0;                        ///< best minus runner-up; +inf for one candidate
};

/// Index of the largest score, lowest index on ties.
std::size_t select_best(std::span<const double> scores);

/// Scores candidates from their averaged correlations with the query.
VoteResult vote_from_correlations(std::span<const DegreeSeries> correlations,
                                  const VoteOptions& options = {});

VoteResult vote(const TaperedSpectra& query, std::span<const TaperedSpectra> candidates,
                const VoteOptions& options = {});

/// Full selection: multitaper correlation, confidence, z-scores, argmax.
/// Throws InvalidParameter for an empty candidate list.
VoteResult vote(const FeatureSphere& query, std::span<const FeatureSphere> candidates,
                const TaperBank& bank, const VoteOptions& options = {});

/// One JSON line: {query_id, candidate_ids, scores, selected, margin}.
std::string vote_report_json(const std::string& query_id, std::span<const std::uint32_t> candidate_ids,
                             const VoteResult& result);

}  // namespace sphereloc
