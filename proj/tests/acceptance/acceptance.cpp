// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Criterion numbers given as arguments restrict the run to those criteria.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sphereloc/config.hpp"
#include "sphereloc/eval.hpp"
#include "sphereloc/map_store.hpp"
#include "sphereloc/spectra.hpp"
#include "sphereloc/taper.hpp"
#include "sphereloc/voting.hpp"

using namespace sphereloc;
using std::numbers::pi;

namespace {

// Collects sub-check outcomes for one criterion.
class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& text) { notes_.push_back(text); }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::ostringstream out;
    const auto& items = ok() ? notes_ : failures_;
    for (std::size_t i = 0; i < items.size(); ++i) out << (i ? "; " : "") << items[i];
    return out.str();
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string num(double v, int precision = 3) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PipelineConfig load(const char* name) {
  return load_config(std::string(SPHERELOC_CONFIG_DIR) + "/" + name).config;
}

double max_abs_diff(const Spectrum& a, const Spectrum& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.coefficients()[i] - b.coefficients()[i]));
  return worst;
}

double spectral_energy(const Spectrum& s) {
  double e = 0.0;
  for (int l = 0; l < s.degrees(); ++l) {
    e += std::norm(s(l, 0));
    for (int m = 1; m <= l; ++m) e += 2.0 * std::norm(s(l, m));
  }
  return e;
}

// ---------------------------------------------------------------------------

Check sht_correctness() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  double worst_rt = 0.0, worst_parseval = 0.0;
  for (int b : {8, 16, 32}) {
    const SphericalGrid grid(b);
    for (int i = 0; i < 50; ++i) {
      const Spectrum s = oracle::random_spectrum(b, rng);
      const Channel f = inverse_sht(s, grid);
      const Spectrum back = forward_sht(f, grid);
      worst_rt = std::max(worst_rt, max_abs_diff(s, back));
      const double spatial = grid.integrate(f.cwiseProduct(f));
      worst_parseval = std::max(worst_parseval, std::abs(spatial - spectral_energy(s)) / spectral_energy(s));
    }
  }
  const double elapsed = seconds_since(t0);
  c.require(worst_rt < 1e-8, "round-trip error " + num(worst_rt) + " >= 1e-8");
  c.require(worst_parseval < 1e-8, "Parseval error " + num(worst_parseval) + " >= 1e-8");
  c.require(elapsed < 10.0, "runtime " + num(elapsed) + " s >= 10 s");
  c.note("round-trip " + num(worst_rt) + ", Parseval " + num(worst_parseval) + ", " + num(elapsed) + " s");
  return c;
}

Check rotation_invariance() {
  Check c;
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> angle(-pi, pi);
  double worst_power = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Spectrum s = oracle::random_spectrum(32, rng);
    const auto p0 = power_spectrum(s, 32);
    const auto p1 = power_spectrum(yaw_rotate(s, angle(rng)), 32);
    for (int l = 0; l < 32; ++l) worst_power = std::max(worst_power, std::abs(p0[l] - p1[l]));
  }
  c.require(worst_power <= 1e-12, "rotated power spectrum differs by " + num(worst_power));

  // Rendered frame: rotating scan and cameras about the vertical axis by grid
  // multiples leaves the feature vector unchanged.
  PipelineConfig cfg;
  cfg.bandwidth = 32;
  const Pipeline p(cfg);
  const World world = generate_world(5, 200, 100);
  SensorRig rig = SensorRig::high_fidelity(0.125);
  rig.lidar.points_per_ring = 512;
  const Frame frame = render_frame(world, Pose::from_yaw(0.4, Vec3(0, 0, 1)), rig);
  PointCloud scan_base = frame.scan;
  for (auto& pt : scan_base.points) pt = rig.lidar_extrinsic.apply(pt);
  const FeatureVec base = p.features(p.project(scan_base, RigidTransform::identity(), frame.views));
  double worst_feature = 0.0;
  for (int shift = 1; shift < 64; shift += 5) {
    const RigidTransform yaw = RigidTransform::from_yaw(shift * pi / 32);
    PointCloud scan = scan_base;
    for (auto& pt : scan.points) pt = yaw.apply(pt);
    std::vector<CameraView> views = frame.views;
    for (auto& v : views) v.extrinsic = yaw * v.extrinsic;
    const FeatureVec x = p.features(p.project(scan, RigidTransform::identity(), views));
    worst_feature = std::max(worst_feature, (x - base).cwiseAbs().maxCoeff());
  }
  c.require(worst_feature < 1e-6, "rotated frame features differ by " + num(worst_feature));

  // Rotated-map lookup on a 500-place LiDAR-only benchmark.
  PipelineConfig bcfg = load("benchmark.toml");
  bcfg.projection.lidar_only = true;
  bcfg.benchmark.map_places = 500;
  bcfg.benchmark.queries = 1000;
  const auto report = rotation_benchmark(Pipeline(bcfg), bcfg.benchmark.angles_deg, 10);
  const double r0 = report.angle_recall.front().second[9];
  double worst_drop = 0.0;
  std::string curve;
  for (const auto& [deg, r] : report.angle_recall) {
    worst_drop = std::max(worst_drop, r0 - r[9]);
    curve += (curve.empty() ? "" : " ") + num(deg) + ":" + num(r[9]);
  }
  c.require(worst_drop <= 0.02, "recall@10 drop " + num(worst_drop) + " > 0.02 (" + curve + ")");
  c.note("power " + num(worst_power) + ", features " + num(worst_feature) + ", recall@10 " + curve +
         ", max drop " + num(worst_drop));
  return c;
}

Check spectral_formulas() {
  Check c;
  std::mt19937_64 rng(1003);
  double worst = 0.0;
  double max_q = 0.0;
  double worst_self = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int degrees = 1 + static_cast<int>(rng() % 40);
    Spectrum f = oracle::random_spectrum(degrees, rng);
    const Spectrum g = oracle::random_spectrum(degrees, rng);
    if (i % 10 == 0) {
      for (auto& v : f.row(degrees / 2)) v = 0.0;  // exercise the zero-power degree
    }
    const auto p = power_spectrum(f, degrees);
    const auto x = cross_power_spectrum(f, g, degrees);
    const auto q = degree_correlation(p, power_spectrum(g, degrees), x);
    const auto np = oracle::naive_power(f, degrees);
    const auto nx = oracle::naive_cross(f, g, degrees);
    const auto nq = oracle::naive_correlation(f, g, degrees);
    const auto self = degree_correlation(p, p, cross_power_spectrum(f, f, degrees));
    for (int l = 0; l < degrees; ++l) {
      worst = std::max({worst, std::abs(p[l] - np[l]), std::abs(x[l] - nx[l]), std::abs(q[l] - nq[l])});
      max_q = std::max(max_q, std::abs(q[l]));
      if (p[l] > 0.0) worst_self = std::max(worst_self, std::abs(self[l] - 1.0));
    }
  }
  c.require(worst <= 1e-12, "oracle mismatch " + num(worst));
  c.require(max_q <= 1.0, "|Q| reached " + num(max_q, 17));
  c.require(worst_self <= 1e-12, "Q(f,f) deviates from 1 by " + num(worst_self));
  c.note("oracle " + num(worst) + ", max |Q| " + num(max_q) + ", self " + num(worst_self));
  return c;
}

Check multitaper() {
  Check c;
  const SphericalGrid grid(32);
  double worst_gram = 0.0;
  bool sorted = true;
  bool in_range = true;
  for (const Vec3& center : {Vec3(Vec3::UnitZ()), Vec3(0.3, -0.5, 0.2)}) {
    const TaperBank bank = build_taper_bank(pi / 6, 20, shannon_taper_count(pi / 6, 20), grid, center);
    for (int i = 0; i < bank.size(); ++i) {
      for (int j = 0; j < bank.size(); ++j) {
        const double g = grid.inner_product(bank.sampled[i], bank.sampled[j]);
        worst_gram = std::max(worst_gram, std::abs(g - (i == j ? 1.0 : 0.0)));
      }
      in_range = in_range && bank.concentrations[i] > 0.0 && bank.concentrations[i] <= 1.0;
      if (i > 0) sorted = sorted && bank.concentrations[i] <= bank.concentrations[i - 1];
    }
  }
  c.require(worst_gram <= 1e-6, "Gram deviation " + num(worst_gram));
  c.require(sorted, "concentrations not sorted");
  c.require(in_range, "concentration outside (0, 1]");

  std::mt19937_64 rng(1004);
  const TaperBank full = build_taper_bank(pi, 20, 1, grid);
  double worst_full = 0.0;
  for (int i = 0; i < 10; ++i) {
    const Channel f = inverse_sht(oracle::random_spectrum(32, rng), grid);
    const Channel g = inverse_sht(oracle::random_spectrum(32, rng), grid);
    const auto windowed = multitaper_correlation(f, g, full, grid, 15);
    const Spectrum F = forward_sht(f, grid, 15);
    const Spectrum G = forward_sht(g, grid, 15);
    const auto plain =
        degree_correlation(power_spectrum(F, 15), power_spectrum(G, 15), cross_power_spectrum(F, G, 15));
    for (int l = 0; l < 15; ++l) worst_full = std::max(worst_full, std::abs(windowed[l] - plain[l]));
  }
  c.require(worst_full <= 1e-10, "full-sphere taper differs from plain correlation by " + num(worst_full));
  c.note("Gram " + num(worst_gram) + ", full-sphere " + num(worst_full));
  return c;
}

Check confidence_and_voting() {
  Check c;
  std::mt19937_64 rng(1005);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  bool first_exact = true;
  for (int i = 0; i < 1000; ++i) {
    DegreeSeries q(15);
    for (double& v : q) v = u(rng);
    for (auto carry : {ConfidenceCarry::PreviousCorrelation, ConfidenceCarry::PreviousConfidence}) {
      first_exact = first_exact && correlation_confidence(q, 15, carry)[1] == q[1];
    }
  }
  c.require(first_exact, "G_1 != Q(1)");
  bool closed = true;
  for (auto carry : {ConfidenceCarry::PreviousCorrelation, ConfidenceCarry::PreviousConfidence}) {
    const auto zero = correlation_confidence(DegreeSeries(15, 0.0), 15, carry);
    const auto one = correlation_confidence(DegreeSeries(15, 1.0), 15, carry);
    for (int l = 1; l < 15; ++l) closed = closed && zero[l] == 0.0 && one[l] == 1.0;
  }
  c.require(closed, "constant-Q closed forms not exact");

  bool monotone = z_score(0.5) == 0.0;
  double prev = z_score(0.0);
  for (int i = 1; i <= 100000; ++i) {
    const double z = z_score(i / 100000.0);
    monotone = monotone && z > prev;
    prev = z;
  }
  c.require(monotone, "z_score not strictly monotone or s(0.5) != 0");

  bool invariant = true;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng() % 15);
    for (double& v : s) v = 10.0 * u(rng);
    const std::size_t best = select_best(s);
    std::vector<double> t1, t2;
    for (double v : s) {
      t1.push_back(std::exp(v));
      t2.push_back(3.0 * v + 7.0);
    }
    invariant = invariant && select_best(t1) == best && select_best(t2) == best;
  }
  c.require(invariant, "argmax changed under a monotone transform");

  // Self-candidate among rendered distractors.
  PipelineConfig cfg;
  cfg.bandwidth = 32;
  const Pipeline p(cfg);
  const World world = generate_world(31, 400, 160);
  const SensorRig rig = SensorRig::high_fidelity(0.125);
  const auto poses = generate_trajectory(world, 200, 1.0, 32);
  std::vector<TaperedSpectra> spectra;
  for (int i = 0; i < 200; i += 10) spectra.push_back(p.tapered(p.project(render_frame(world, poses[i], rig), rig)));
  double min_margin = std::numeric_limits<double>::infinity();
  bool self_wins = true;
  for (std::size_t q = 0; q < spectra.size(); ++q) {
    const VoteResult r = p.vote(spectra[q], spectra);
    self_wins = self_wins && r.selected == q;
    min_margin = std::min(min_margin, r.margin);
  }
  c.require(self_wins && min_margin > 0.0, "self-candidate lost or margin " + num(min_margin));
  c.note("G_1 exact, closed forms exact, z monotone, argmax invariant, self margin >= " + num(min_margin));
  return c;
}

Check triplet_machinery() {
  Check c;
  c.require(triplet_loss(0.0, 3.0) == 0.0, "loss(0, 3) != 0");
  c.require(std::abs(triplet_loss(1.0, 1.0) - 2.8) <= 1e-15, "loss(1, 1) != 2.8");
  c.require(std::abs(triplet_loss(0.2, 2.2)) <= 1e-15, "loss(0.2, 2.2) != 0");

  std::mt19937_64 rng(1006);
  std::normal_distribution<double> n(0.0, 1.0);
  const int dim = 12;
  std::vector<FeatureVec> samples;
  for (int i = 0; i < 20; ++i) {
    FeatureVec x(dim);
    for (auto& v : x) v = n(rng);
    samples.push_back(x);
  }
  const EmbeddingModel m = EmbeddingModel::random(dim, 1007);
  std::vector<Triplet> triplets;
  while (triplets.size() < 10) {
    const Triplet t{static_cast<std::uint32_t>(rng() % 20), static_cast<std::uint32_t>(rng() % 20),
                    static_cast<std::uint32_t>(rng() % 20)};
    if (t.anchor == t.positive || t.anchor == t.negative || t.positive == t.negative) continue;
    const double ap = (m.weights * (samples[t.anchor] - samples[t.positive])).norm();
    const double an = (m.weights * (samples[t.anchor] - samples[t.negative])).norm();
    if (std::abs(ap - an + kTripletMargin) > 1e-2 && std::abs(ap - kPositiveMargin) > 1e-2) triplets.push_back(t);
  }
  const EmbeddingGradient g = batch_triplet_gradient(m, samples, triplets);
  const double h = 1e-5;
  double worst = 0.0;
  EmbeddingModel probe = m;
  for (Eigen::Index r = 0; r < m.weights.rows(); ++r) {
    for (Eigen::Index col = 0; col < m.weights.cols(); ++col) {
      probe.weights(r, col) = m.weights(r, col) + h;
      const double up = batch_triplet_loss(probe, samples, triplets);
      probe.weights(r, col) = m.weights(r, col) - h;
      const double down = batch_triplet_loss(probe, samples, triplets);
      probe.weights(r, col) = m.weights(r, col);
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max(std::abs(numeric), std::abs(g.weights(r, col)));
      if (scale > 1e-6) worst = std::max(worst, std::abs(numeric - g.weights(r, col)) / scale);
    }
  }
  c.require(worst < 1e-5, "gradient relative error " + num(worst));

  // Exhaustive mining audit on a 1000-pose random walk.
  std::normal_distribution<double> step(0.0, 0.6);
  std::vector<Vec3> walk{Vec3::Zero()};
  while (walk.size() < 1000) walk.push_back(walk.back() + Vec3(step(rng), step(rng), 0.0));
  MiningConfig mc;
  mc.seed = 1008;
  const auto mined = mine_triplets(walk, mc);
  const auto kept = spacing_subsample(walk, mc.min_spacing);
  const std::set<std::uint32_t> kept_set(kept.begin(), kept.end());
  bool spacing_ok = true;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) spacing_ok = spacing_ok && (walk[kept[i]] - walk[kept[j]]).norm() >= 0.10;
  }
  bool rules_ok = !mined.empty();
  std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (const auto& t : mined) {
    const double ap = (walk[t.anchor] - walk[t.positive]).norm();
    const double an = (walk[t.anchor] - walk[t.negative]).norm();
    rules_ok = rules_ok && kept_set.count(t.anchor) && kept_set.count(t.positive) && kept_set.count(t.negative) &&
               ap < 5.0 && an >= 6.0 && an <= 20.0 && pairs.insert({t.anchor, t.positive}).second;
  }
  std::size_t expected = 0;
  for (auto a : kept) {
    std::size_t pos = 0, neg = 0;
    for (auto o : kept) {
      if (o == a) continue;
      const double d = (walk[a] - walk[o]).norm();
      pos += d < 5.0;
      neg += d >= 6.0 && d <= 20.0;
    }
    if (neg > 0) expected += pos;
  }
  c.require(spacing_ok, "kept poses closer than 10 cm");
  c.require(rules_ok, "mined triplet violates the distance rules");
  c.require(pairs.size() == expected, "mined " + std::to_string(pairs.size()) + " pairs, expected " +
                                          std::to_string(expected));
  c.note("tabulated exact, gradient " + num(worst) + ", " + std::to_string(mined.size()) + " audited triplets");
  return c;
}

Check retrieval_exactness() {
  Check c;
  std::mt19937_64 rng(1009);
  std::normal_distribution<float> n(0.0f, 1.0f);
  const std::size_t dim = 256;
  std::vector<PlaceEntry> entries(10000);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].pose = Pose::from_yaw(0.0, Vec3(static_cast<double>(i), 0.0, 0.0));
    entries[i].descriptor.resize(dim);
    for (float& v : entries[i].descriptor) v = n(rng);
  }
  const PlaceMap map = build_map(entries);
  const std::size_t k = 15;
  bool exact = true;
  for (int q = 0; q < 1000 && exact; ++q) {
    std::vector<float> query(dim);
    for (float& v : query) v = n(rng);
    std::vector<std::pair<double, std::uint32_t>> brute;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double diff = static_cast<double>(query[j]) - entries[i].descriptor[j];
        d += diff * diff;
      }
      brute.emplace_back(d, static_cast<std::uint32_t>(i));
    }
    std::partial_sort(brute.begin(), brute.begin() + k, brute.end());
    const auto got = map.knn_query(query, k);
    for (std::size_t r = 0; r < k; ++r) exact = exact && got[r].id == brute[r].second;
  }
  c.require(exact, "k-NN differs from brute force");

  const auto bytes = encode_map(map);
  const PlaceMap back = decode_map(bytes);
  bool same = back.size() == map.size() && encode_map(back) == bytes;
  for (std::uint32_t i = 0; same && i < map.size(); ++i) {
    same = back.entry(i).descriptor == map.entry(i).descriptor &&
           back.entry(i).pose.translation == map.entry(i).pose.translation;
  }
  c.require(same, "map round trip not bit-exact");
  c.note("1000 x 10000 exact, round trip " + std::to_string(bytes.size()) + " bytes bit-exact");
  return c;
}

Check end_to_end() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig cfg = load("benchmark.toml");
  const Pipeline p(cfg);
  const Benchmark bench = prepare_benchmark(p);
  const auto recall = recall_experiment(bench, cfg.benchmark.recall_n_max, cfg.success_radius).recall;
  const std::vector<int> ks = {1, 15};
  const auto sel = selection_experiment(p, bench, ks, cfg.success_radius).selection;
  const double elapsed = seconds_since(t0);
  bool monotone = true;
  for (std::size_t i = 1; i < recall.size(); ++i) monotone = monotone && recall[i] >= recall[i - 1];
  c.require(monotone && recall.back() >= recall.front(), "recall curve not monotone");
  c.require(recall.back() >= 0.85, "recall@15 " + num(recall.back()) + " < 0.85");
  c.require(sel[0].wrong_rate == 0.0, "k=1 wrong rate " + num(sel[0].wrong_rate));
  c.require(sel[1].wrong_rate <= 0.10, "k=15 wrong rate " + num(sel[1].wrong_rate) + " > 0.10");
  c.require(elapsed <= 600.0, "runtime " + num(elapsed) + " s > 600 s");
  c.note("recall@1 " + num(recall.front()) + ", recall@15 " + num(recall.back()) + ", k=15 wrong rate " +
         num(sel[1].wrong_rate) + " over " + std::to_string(sel[1].evaluated) + " queries, max distance " +
         num(sel[1].max_selected_distance) + " m, " + num(elapsed, 4) + " s");
  return c;
}

Check performance_budget() {
  Check c;
  const PipelineConfig cfg = load("timing.toml");
  const Pipeline p(cfg);
  const auto report = timing_benchmark(p);
  double parts = 0.0;
  std::string rows;
  for (const auto& row : report.timing) {
    if (row.component != "total") parts += row.mean_ms;
    rows += (rows.empty() ? "" : " ") + row.component + "=" + num(row.mean_ms, 4);
  }
  const double total = report.stage_ms.at("total");
  c.require(total <= 3000.0, "mean query " + num(total, 5) + " ms > 3000 ms");
  c.require(std::abs(parts - total) <= 0.05 * total,
            "components " + num(parts, 5) + " ms vs total " + num(total, 5) + " ms");
  c.note(report.parameters.at("samples") + " samples, map " + report.parameters.at("map_size") + ", ms: " + rows);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::strtoul(argv[i], nullptr, 10));
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"SHT correctness", sht_correctness},
      {"rotation invariance", rotation_invariance},
      {"spectral formulas", spectral_formulas},
      {"multitaper", multitaper},
      {"confidence and voting", confidence_and_voting},
      {"triplet machinery", triplet_machinery},
      {"retrieval exactness", retrieval_exactness},
      {"end-to-end synthetic benchmark", end_to_end},
      {"performance budget", performance_budget},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Check result;
    try {
      result = criteria[i].second();
    } catch (const std::exception& e) {
      result.require(false, std::string("exception: ") + e.what());
    }
    failed += !result.ok();
    std::printf("criterion %zu (%s): %s - %s\n", i + 1, criteria[i].first.c_str(), result.ok() ? "PASS" : "FAIL",
                result.summary().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
