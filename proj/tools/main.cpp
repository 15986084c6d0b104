#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dataset.hpp"
#include "sphereloc/binary_io.hpp"
#include "sphereloc/config.hpp"
#include "sphereloc/errors.hpp"
#include "sphereloc/eval.hpp"
#include "sphereloc/parallel.hpp"

namespace fs = std::filesystem;
using namespace sphereloc;
using sphereloc::cli::Dataset;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string format = "json";
};

PipelineConfig resolve_config(const Globals& g) {
  LoadedConfig loaded = g.config_path.empty() ? default_config() : load_config(g.config_path);
  PipelineConfig& c = loaded.config;
  if (g.seed) {
    c.training.seed = *g.seed;
    c.mining.seed = *g.seed;
    c.benchmark.world_seed = *g.seed;
  }
  for (const auto& key : loaded.defaulted) std::cerr << "config: " << key << " not set, using default\n";
  std::cerr << "config: resolved\n" << to_toml(c) << "\n";
  return c;
}

std::string input_hash(const PipelineConfig& c) { return content_hash(to_toml(c)); }

/// Fails unless `path` exists and starts with `magic`.
void validate(const fs::path& path, std::string_view magic) {
  if (!file_has_magic(path, magic)) {
    throw FormatError("output " + path.string() + " does not start with magic " + std::string(magic), 0);
  }
}

void validate_csv(const fs::path& path, std::string_view header) {
  std::ifstream in(path);
  std::string first;
  if (!in || !std::getline(in, first) || first != header) {
    throw FormatError("output " + path.string() + " lacks CSV header '" + std::string(header) + "'", 0);
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw InvalidParameter("malformed list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidParameter("empty list");
  return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int places = 100;
  std::string rig = "hf";
};

int run_synth(const Globals& g, const SynthArgs& a) {
  const PipelineConfig c = resolve_config(g);
  const BenchmarkConfig& b = c.benchmark;
  const World world = generate_world(b.world_seed, b.boxes, b.extent);
  SensorRig rig = a.rig == "lf" ? SensorRig::low_fidelity(b.image_scale) : SensorRig::high_fidelity(b.image_scale);
  rig.lidar.points_per_ring = b.points_per_ring;
  const auto poses = generate_trajectory(world, a.places, b.place_spacing, b.world_seed);
  write_dataset(a.out, world, poses, rig);
  const Dataset check = Dataset::open(a.out);
  for (std::size_t i = 0; i < check.size(); ++i) validate(check.scan_path(i), "XYZI");
  std::cerr << "synth: wrote " << poses.size() << " frames to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ProjectArgs {
  std::string dataset;
  std::size_t index = 0;
  std::string out;
};

int run_project(const Globals& g, const ProjectArgs& a) {
  const PipelineConfig c = resolve_config(g);
  const Pipeline p(c);
  const Dataset d = Dataset::open(a.dataset);
  const FeatureSphere sphere = p.project(d.frame(a.index), d.rig);
  fs::create_directories(a.out);
  nlohmann::ordered_json report;
  report["frame"] = a.index;
  report["bandwidth"] = c.bandwidth;
  report["channels"] = nlohmann::ordered_json::array();
  for (int m = 0; m < kModalityCount; ++m) {
    const Channel& ch = sphere.channels()[static_cast<std::size_t>(m)];
    const double lo = ch.minCoeff();
    const double hi = ch.maxCoeff();
    GrayImage img(static_cast<int>(ch.cols()), static_cast<int>(ch.rows()));
    for (Eigen::Index j = 0; j < ch.rows(); ++j) {
      for (Eigen::Index k = 0; k < ch.cols(); ++k) {
        img.at(static_cast<int>(k), static_cast<int>(j)) = hi > lo ? (ch(j, k) - lo) / (hi - lo) : 0.0;
      }
    }
    const fs::path path = fs::path(a.out) / (std::string(modality_name(static_cast<Modality>(m))) + ".pgm");
    write_pgm(path, img, 65535);
    validate(path, "P5");
    report["channels"].push_back({{"name", modality_name(static_cast<Modality>(m))},
                                  {"min", lo},
                                  {"max", hi},
                                  {"file", path.string()}});
  }
  const FeatureVec features = p.features(sphere);
  if (g.format == "csv") {
    std::cout << "index,value\n";
    for (Eigen::Index i = 0; i < features.size(); ++i) std::cout << i << ',' << features[i] << '\n';
  } else {
    report["features"] = std::vector<double>(features.begin(), features.end());
    std::cout << report.dump() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct MineArgs {
  std::string dataset;
  std::string out;
};

int run_mine(const Globals& g, const MineArgs& a) {
  const PipelineConfig c = resolve_config(g);
  const Dataset d = Dataset::open(a.dataset);
  std::vector<Vec3> positions;
  for (const auto& p : d.poses) positions.push_back(p.pose.translation);
  const auto triplets = mine_triplets(positions, c.mining);
  {
    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot write " + a.out);
    if (g.format == "csv") {
      out << "anchor,positive,negative\n";
      for (const auto& t : triplets) out << t.anchor << ',' << t.positive << ',' << t.negative << '\n';
    } else {
      for (const auto& t : triplets) {
        out << nlohmann::json{{"anchor", t.anchor}, {"positive", t.positive}, {"negative", t.negative}}.dump()
            << '\n';
      }
    }
  }
  if (g.format == "csv") validate_csv(a.out, "anchor,positive,negative");
  std::cerr << "mine: " << triplets.size() << " triplets from " << positions.size() << " poses\n";
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<FeatureVec> dataset_features(const Pipeline& p, const Dataset& d, std::vector<FeatureSphere>* keep) {
  std::vector<FeatureVec> out(d.size());
  if (keep) keep->resize(d.size());
  parallel_for(d.size(), [&](std::size_t i) {
    FeatureSphere sphere = p.project(d.frame(i), d.rig);
    out[i] = p.features(sphere);
    if (keep) (*keep)[i] = std::move(sphere);
  });
  return out;
}

struct TrainArgs {
  std::string dataset;
  std::string out;
};

int run_train(const Globals& g, const TrainArgs& a) {
  const PipelineConfig c = resolve_config(g);
  const Pipeline p(c);
  const Dataset d = Dataset::open(a.dataset);
  std::vector<Vec3> positions;
  for (const auto& pose : d.poses) positions.push_back(pose.pose.translation);
  const auto triplets = mine_triplets(positions, c.mining);
  const auto features = dataset_features(p, d, nullptr);
  const EmbeddingModel model = train_embedding(features, triplets, c.training);
  save_model(a.out, model);
  validate(a.out, "EMBD");
  std::cerr << "train: " << triplets.size() << " triplets, loss " << model.loss_trace.front() << " -> "
            << model.final_loss << " after " << model.epochs << " epochs\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct BuildMapArgs {
  std::string dataset;
  std::string model;
  std::string out;
  bool no_features = false;
};

int run_build_map(const Globals& g, const BuildMapArgs& a) {
  const PipelineConfig c = resolve_config(g);
  const Pipeline p(c);
  const Dataset d = Dataset::open(a.dataset);
  const EmbeddingModel model = load_model(a.model);
  std::vector<FeatureSphere> spheres;
  const auto features = dataset_features(p, d, a.no_features ? nullptr : &spheres);
  std::vector<PlaceEntry> entries(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    entries[i].pose = d.poses[i].pose;
    entries[i].descriptor = to_float_descriptor(embed(features[i], model));
    if (!a.no_features) entries[i].features = std::move(spheres[i]);
  }
  save_map(build_map(std::move(entries)), a.out);
  validate(a.out, "SMAP");
  std::cerr << "build-map: " << d.size() << " places written to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

fs::path default_model_path(const std::string& map_path) {
  fs::path p(map_path);
  return p.replace_extension(".embd");
}

std::vector<TaperedSpectra> candidate_spectra(const Pipeline& p, const PlaceMap& map,
                                              std::span<const std::uint32_t> ids) {
  std::vector<TaperedSpectra> out;
  for (auto id : ids) {
    const auto& features = map.entry(id).features;
    if (!features) throw InvalidParameter("map stores no feature spheres; rebuild it without --no-features");
    if (features->bandwidth() != p.grid().bandwidth()) {
      throw ShapeError("map spheres have bandwidth " + std::to_string(features->bandwidth()) +
                       ", config has " + std::to_string(p.grid().bandwidth()));
    }
    out.push_back(p.tapered(*features));
  }
  return out;
}

void print_vote(const Globals& g, const std::string& query, std::span<const std::uint32_t> ids,
                std::span<const PlaceMatch> matches, const VoteResult& result) {
  if (g.format == "csv") {
    std::cout << "rank,id,distance,score,selected\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::cout << i << ',' << ids[i] << ',' << (matches.empty() ? 0.0 : matches[i].distance) << ','
                << result.scores[i] << ',' << (i == result.selected ? 1 : 0) << '\n';
    }
  } else {
    std::cout << vote_report_json(query, ids, result) << '\n';
  }
}

struct QueryArgs {
  std::string map;
  std::string frame;
  std::string model;
  std::size_t k = 15;
};

int run_query(const Globals& g, const QueryArgs& a) {
  const PipelineConfig c = resolve_config(g);
  const Pipeline p(c);
  const PlaceMap map = load_map(a.map);
  const EmbeddingModel model = load_model(a.model.empty() ? default_model_path(a.map) : fs::path(a.model));
  const SensorRig rig = cli::rig_for_scan(a.frame);
  const FeatureSphere sphere = p.project(cli::load_frame(a.frame, rig), rig);
  const auto matches = map.knn_query(to_float_descriptor(p.describe(sphere, model)), a.k);
  std::vector<std::uint32_t> ids;
  for (const auto& m : matches) ids.push_back(m.id);
  const auto candidates = candidate_spectra(p, map, ids);
  const VoteResult result = p.vote(p.tapered(sphere), candidates);
  print_vote(g, a.frame, ids, matches, result);
  return 0;
}

struct VoteArgs {
  std::string map;
  std::string frame;
  std::vector<std::uint32_t> candidates;
};

int run_vote(const Globals& g, const VoteArgs& a) {
  const PipelineConfig c = resolve_config(g);
  const Pipeline p(c);
  const PlaceMap map = load_map(a.map);
  for (auto id : a.candidates) {
    if (id >= map.size()) throw InvalidParameter("candidate id " + std::to_string(id) + " not in map");
  }
  const SensorRig rig = cli::rig_for_scan(a.frame);
  const FeatureSphere sphere = p.project(cli::load_frame(a.frame, rig), rig);
  const auto candidates = candidate_spectra(p, map, a.candidates);
  const VoteResult result = p.vote(p.tapered(sphere), candidates);
  print_vote(g, a.frame, a.candidates, {}, result);
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string experiment;
  std::string out = "results";
  std::string angles;
  std::string ks;
  bool cross = false;
};

int run_eval(const Globals& g, const EvalArgs& a) {
  PipelineConfig c = resolve_config(g);
  if (a.experiment == "rotation") c.projection.lidar_only = true;
  const Pipeline p(c);
  const fs::path out(a.out);
  fs::create_directories(out);
  StageTimer timer;
  ExperimentReport report;
  fs::path csv;
  std::string header;

  if (a.experiment == "recall") {
    BenchmarkOptions opts;
    opts.cross_setup = a.cross;
    opts.keep_spectra = false;
    report = recall_experiment(prepare_benchmark(p, opts, &timer), c.benchmark.recall_n_max, c.success_radius);
    csv = out / "recall.csv";
    write_recall_csv(csv, report);
    header = "n,recall";
  } else if (a.experiment == "rotation") {
    const std::vector<double> angles = a.angles.empty() ? c.benchmark.angles_deg : parse_list(a.angles);
    report = rotation_benchmark(p, angles, c.benchmark.recall_n_max, &timer);
    csv = out / "recall.csv";
    write_recall_csv(csv, report);
    header = "angle,n,recall";
  } else if (a.experiment == "selection") {
    std::vector<int> ks = c.benchmark.selection_k;
    if (!a.ks.empty()) {
      ks.clear();
      for (double v : parse_list(a.ks)) ks.push_back(static_cast<int>(v));
    }
    BenchmarkOptions opts;
    opts.cross_setup = a.cross;
    report = selection_experiment(p, prepare_benchmark(p, opts, &timer), ks, c.success_radius);
    csv = out / "selection.csv";
    write_selection_csv(csv, report);
    header = "k,wrong_rate";
  } else {
    report = timing_benchmark(p);
    csv = out / "timing.csv";
    write_timing_csv(csv, report);
    header = "component,mean_ms,std_ms";
  }
  for (const auto& [stage, ms] : timer.totals()) report.stage_ms["stage_" + stage] = ms;
  report.parameters["cross_setup"] = a.cross ? "true" : "false";
  validate_csv(csv, header);

  const std::string summary = summary_json(report, to_toml(c), input_hash(c));
  {
    std::ofstream s(out / "summary.json");
    s << summary << '\n';
  }
  validate(out / "summary.json", "{");
  if (g.format == "csv") {
    std::ifstream in(csv);
    std::cout << in.rdbuf();
  } else {
    std::cout << summary << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct TaperArgs {
  std::string out;
};

int run_taper_gen(const Globals& g, const TaperArgs& a) {
  const PipelineConfig c = resolve_config(g);
  const Pipeline p(c);
  save_taper_bank(a.out, p.bank());
  validate(a.out, "TAPR");
  if (g.format == "csv") {
    std::cout << "index,concentration\n";
    for (int i = 0; i < p.bank().size(); ++i) std::cout << i << ',' << p.bank().concentrations[i] << '\n';
  } else {
    nlohmann::ordered_json j;
    j["file"] = a.out;
    j["cap_half_angle"] = p.bank().cap_half_angle;
    j["taper_degrees"] = p.bank().taper_degrees;
    j["concentrations"] = p.bank().concentrations;
    std::cout << j.dump() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal spherical place recognition"};
  app.name("sphereloc");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand and exit");
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "TOML configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "seed for world, mining and training randomness");
  app.add_option("--format", g.format, "report format")->check(CLI::IsMember({"json", "csv"}));
  app.fallthrough();

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "render a synthetic dataset directory");
  s->add_option("out", synth.out, "output directory")->required();
  s->add_option("--places", synth.places, "trajectory length")->check(CLI::PositiveNumber);
  s->add_option("--rig", synth.rig, "sensor rig")->check(CLI::IsMember({"hf", "lf"}));

  ProjectArgs project;
  auto* pr = app.add_subcommand("project", "project one dataset frame onto the sphere");
  pr->add_option("dataset", project.dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  pr->add_option("--index", project.index, "frame index");
  pr->add_option("--out", project.out, "directory for the channel images")->required();

  MineArgs mine;
  auto* mi = app.add_subcommand("mine", "mine training triplets from dataset poses");
  mi->add_option("dataset", mine.dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  mi->add_option("out", mine.out, "triplet file")->required();

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "train the descriptor embedding");
  tr->add_option("dataset", train.dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("out", train.out, "model file (EMBD)")->required();

  BuildMapArgs build;
  auto* bm = app.add_subcommand("build-map", "embed a dataset into a place map");
  bm->add_option("dataset", build.dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  bm->add_option("model", build.model, "model file (EMBD)")->required()->check(CLI::ExistingFile);
  bm->add_option("out", build.out, "map file (SMAP)")->required();
  bm->add_flag("--no-features", build.no_features, "omit feature spheres (disables voting)");

  QueryArgs query;
  auto* q = app.add_subcommand("query", "retrieve and vote for one frame");
  q->add_option("--map", query.map, "map file (SMAP)")->required()->check(CLI::ExistingFile);
  q->add_option("--frame", query.frame, "query scan (XYZI)")->required()->check(CLI::ExistingFile);
  q->add_option("--model", query.model, "model file; defaults to the map path with .embd")->check(CLI::ExistingFile);
  q->add_option("--k", query.k, "candidates to retrieve")->check(CLI::PositiveNumber);

  VoteArgs vote;
  auto* v = app.add_subcommand("vote", "vote among given map places for one frame");
  v->add_option("--map", vote.map, "map file (SMAP)")->required()->check(CLI::ExistingFile);
  v->add_option("--frame", vote.frame, "query scan (XYZI)")->required()->check(CLI::ExistingFile);
  v->add_option("--candidates", vote.candidates, "candidate place ids")->required()->delimiter(',');

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "run a synthetic benchmark experiment");
  e->add_option("experiment", eval.experiment, "experiment")
      ->required()
      ->check(CLI::IsMember({"recall", "rotation", "selection", "timing"}));
  e->add_option("--out", eval.out, "output directory");
  e->add_option("--angles", eval.angles, "comma-separated yaw angles in degrees (rotation)");
  e->add_option("--k", eval.ks, "comma-separated candidate counts (selection)");
  e->add_flag("--cross", eval.cross, "query with the low-fidelity rig");

  TaperArgs taper;
  auto* t = app.add_subcommand("taper-gen", "write the taper bank (TAPR)");
  t->add_option("out", taper.out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "sphereloc: " << ex.what() << "\n";
    return 2;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*s) return run_synth(g, synth);
    if (*pr) return run_project(g, project);
    if (*mi) return run_mine(g, mine);
    if (*tr) return run_train(g, train);
    if (*bm) return run_build_map(g, build);
    if (*q) return run_query(g, query);
    if (*v) return run_vote(g, vote);
    if (*e) return run_eval(g, eval);
    if (*t) return run_taper_gen(g, taper);
  } catch (const ConfigError& ex) {
    std::cerr << "sphereloc: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "sphereloc: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
