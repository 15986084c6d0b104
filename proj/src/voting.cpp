#include "sphereloc/voting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "sphereloc/errors.hpp"

namespace sphereloc {

namespace {

DegreeSeries confidence_recursion(const DegreeSeries& q, int degrees, ConfidenceCarry carry,
                                  bool saturate) {
  if (degrees < 2) throw InvalidParameter("confidence needs at least degrees 0 and 1");
  if (q.size() < static_cast<std::size_t>(degrees)) {
    throw ShapeError("correlation series shorter than the evaluated degrees");
  }
  auto clamped = [&](int l) { return std::clamp(q[l], -1.0, 1.0); };
  DegreeSeries g(static_cast<std::size_t>(degrees), 0.0);
  g[1] = clamped(1);
  double product = 1.0;  // prod_{i=1}^{l-1} (2i-1)/(2i)
  for (int l = 2; l < degrees; ++l) {
    product *= (2.0 * (l - 1) - 1.0) / (2.0 * (l - 1));
    const double ql = clamped(l);
    const double increment = ql * std::pow(1.0 - ql * ql, l - 1) * product;
    const double base = carry == ConfidenceCarry::PreviousConfidence ? g[l - 1] : clamped(l - 1);
    g[l] = base + increment;
    // Increments are not bounded in sum for arbitrary Q, hence the saturation.
    if (saturate) g[l] = std::clamp(g[l], -1.0, 1.0);
  }
  return g;
}

}  // namespace

DegreeSeries correlation_confidence_unbounded(const DegreeSeries& q, int degrees,
                                              ConfidenceCarry carry) {
  return confidence_recursion(q, degrees, carry, false);
}

DegreeSeries correlation_confidence(const DegreeSeries& q, int degrees, ConfidenceCarry carry) {
  return confidence_recursion(q, degrees, carry, true);
}

double standard_normal_quantile(double p) {
  if (p == 0.5) return 0.0;
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double z_score(double g, ZScoreMode mode) {
  if (!(g >= 0.0 && g <= 1.0)) {
    throw InvalidParameter("confidence " + std::to_string(g) + " outside [0, 1]");
  }
  const double p = mode == ZScoreMode::Described ? g : (1.0 - (1.0 - g)) / 2.0;
  return standard_normal_quantile(std::clamp(p, kQuantileClamp, 1.0 - kQuantileClamp));
}

std::size_t select_best(std::span<const double> scores) {
  if (scores.empty()) throw InvalidParameter("no scores to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

VoteResult vote_from_correlations(std::span<const DegreeSeries> correlations,
                                  const VoteOptions& options) {
  if (correlations.empty()) throw InvalidParameter("vote needs at least one candidate");
  VoteResult result;
  result.scores.reserve(correlations.size());
  for (const auto& q : correlations) {
    DegreeSeries g = correlation_confidence(q, options.degrees, options.carry);
    double score = 0.0;
    for (int l = 1; l < options.degrees; ++l) score += z_score((g[l] + 1.0) / 2.0, options.zscore);
    result.scores.push_back(score);
    result.confidences.push_back(std::move(g));
  }
  result.selected = select_best(result.scores);
  if (result.scores.size() == 1) {
    result.margin = std::numeric_limits<double>::infinity();
  } else {
    double runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < result.scores.size(); ++i) {
      if (i != result.selected) runner_up = std::max(runner_up, result.scores[i]);
    }
    result.margin = result.scores[result.selected] - runner_up;
  }
  return result;
}

VoteResult vote(const TaperedSpectra& query, std::span<const TaperedSpectra> candidates,
                const VoteOptions& options) {
  if (candidates.empty()) throw InvalidParameter("vote needs at least one candidate");
  std::vector<DegreeSeries> correlations;
  correlations.reserve(candidates.size());
  for (const auto& c : candidates) correlations.push_back(multitaper_correlation(query, c));
  return vote_from_correlations(correlations, options);
}

VoteResult vote(const FeatureSphere& query, std::span<const FeatureSphere> candidates,
                const TaperBank& bank, const VoteOptions& options) {
  if (candidates.empty()) throw InvalidParameter("vote needs at least one candidate");
  const SphericalGrid grid(query.bandwidth());
  const TaperedSpectra q = taper_spectra(query, bank, grid, options.degrees, options.fusion);
  std::vector<TaperedSpectra> c;
  c.reserve(candidates.size());
  for (const auto& s : candidates) c.push_back(taper_spectra(s, bank, grid, options.degrees, options.fusion));
  return vote(q, c, options);
}

std::string vote_report_json(const std::string& query_id, std::span<const std::uint32_t> candidate_ids,
                             const VoteResult& result) {
  nlohmann::json j;
  j["query_id"] = query_id;
  j["candidate_ids"] = std::vector<std::uint32_t>(candidate_ids.begin(), candidate_ids.end());
  j["scores"] = result.scores;
  j["selected"] = candidate_ids.empty() ? nlohmann::json(result.selected)
                                        : nlohmann::json(candidate_ids[result.selected]);
  j["margin"] = std::isfinite(result.margin) ? nlohmann::json(result.margin) : nlohmann::json(nullptr);
  return j.dump();
}

}  // namespace sphereloc
