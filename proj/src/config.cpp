#include "sphereloc/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <type_traits>

#include <toml.hpp>

namespace sphereloc {

namespace {

struct KeySpec {
  std::string name;
  std::function<void(const toml::node&, PipelineConfig&)> read;
  std::function<void(const PipelineConfig&, toml::table&, const std::string&)> write;
};

[[noreturn]] void bad(const std::string& key, const std::string& what) { throw ConfigError(key, what); }

double as_double(const toml::node& n, const std::string& key) {
  if (auto v = n.value<double>()) return *v;
  bad(key, "expected a number");
}

std::int64_t as_int(const toml::node& n, const std::string& key) {
  if (n.is_integer()) return *n.value<std::int64_t>();
  bad(key, "expected an integer");
}

bool as_bool(const toml::node& n, const std::string& key) {
  if (n.is_boolean()) return *n.value<bool>();
  bad(key, "expected a boolean");
}

std::string as_string(const toml::node& n, const std::string& key) {
  if (auto v = n.value<std::string>()) return *v;
  bad(key, "expected a string");
}

template <typename T, typename Member>
KeySpec number_key(std::string name, Member member, double lo, double hi) {
  KeySpec k;
  k.name = name;
  k.read = [=](const toml::node& n, PipelineConfig& c) {
    double v;
    if constexpr (std::is_floating_point_v<T>) {
      v = as_double(n, name);
    } else {
      v = static_cast<double>(as_int(n, name));
    }
    if (!(v >= lo && v <= hi)) {
      std::ostringstream msg;
      msg << "value " << v << " outside [" << lo << ", " << hi << "]";
      bad(name, msg.str());
    }
    member(c) = static_cast<T>(v);
  };
  k.write = [=](const PipelineConfig& c, toml::table& t, const std::string& leaf) {
    if constexpr (std::is_floating_point_v<T>) {
      t.insert_or_assign(leaf, static_cast<double>(member(const_cast<PipelineConfig&>(c))));
    } else {
      t.insert_or_assign(leaf, static_cast<std::int64_t>(member(const_cast<PipelineConfig&>(c))));
    }
  };
  return k;
}

template <typename Member>
KeySpec bool_key(std::string name, Member member) {
  KeySpec k;
  k.name = name;
  k.read = [=](const toml::node& n, PipelineConfig& c) { member(c) = as_bool(n, name); };
  k.write = [=](const PipelineConfig& c, toml::table& t, const std::string& leaf) {
    t.insert_or_assign(leaf, member(const_cast<PipelineConfig&>(c)));
  };
  return k;
}

// Seeds are unsigned 64-bit but TOML integers are signed; values are stored bit-for-bit.
template <typename Member>
KeySpec seed_key(std::string name, Member member) {
  KeySpec k;
  k.name = name;
  k.read = [=](const toml::node& n, PipelineConfig& c) {
    member(c) = static_cast<std::uint64_t>(as_int(n, name));
  };
  k.write = [=](const PipelineConfig& c, toml::table& t, const std::string& leaf) {
    t.insert_or_assign(leaf, static_cast<std::int64_t>(member(const_cast<PipelineConfig&>(c))));
  };
  return k;
}

template <typename E>
KeySpec enum_key(std::string name, std::function<E&(PipelineConfig&)> member,
                 std::vector<std::pair<std::string, E>> names) {
  KeySpec k;
  k.name = name;
  k.read = [=](const toml::node& n, PipelineConfig& c) {
    const std::string s = as_string(n, name);
    for (const auto& [label, value] : names) {
      if (label == s) {
        member(c) = value;
        return;
      }
    }
    std::string allowed;
    for (const auto& [label, value] : names) allowed += (allowed.empty() ? "" : "|") + label;
    bad(name, "expected one of " + allowed + ", got '" + s + "'");
  };
  k.write = [=](const PipelineConfig& c, toml::table& t, const std::string& leaf) {
    const E v = member(const_cast<PipelineConfig&>(c));
    for (const auto& [label, value] : names) {
      if (value == v) t.insert_or_assign(leaf, label);
    }
  };
  return k;
}

template <typename T, typename Member>
KeySpec list_key(std::string name, Member member) {
  KeySpec k;
  k.name = name;
  k.read = [=](const toml::node& n, PipelineConfig& c) {
    const auto* arr = n.as_array();
    if (!arr || arr->empty()) bad(name, "expected a non-empty array");
    std::vector<T> out;
    for (const auto& e : *arr) {
      if constexpr (std::is_floating_point_v<T>) {
        out.push_back(as_double(e, name));
      } else {
        out.push_back(static_cast<T>(as_int(e, name)));
      }
    }
    member(c) = out;
  };
  k.write = [=](const PipelineConfig& c, toml::table& t, const std::string& leaf) {
    toml::array arr;
    for (T v : member(const_cast<PipelineConfig&>(c))) {
      if constexpr (std::is_floating_point_v<T>) {
        arr.push_back(static_cast<double>(v));
      } else {
        arr.push_back(static_cast<std::int64_t>(v));
      }
    }
    t.insert_or_assign(leaf, std::move(arr));
  };
  return k;
}

KeySpec center_key() {
  KeySpec k;
  k.name = "taper.center";
  k.read = [](const toml::node& n, PipelineConfig& c) {
    const auto* arr = n.as_array();
    if (!arr || arr->size() != 3) bad("taper.center", "expected [x, y, z]");
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = as_double((*arr)[static_cast<std::size_t>(i)], "taper.center");
    if (!(v.norm() > 0.0)) bad("taper.center", "axis must be non-zero");
    c.taper.center = v.normalized();
  };
  k.write = [](const PipelineConfig& c, toml::table& t, const std::string& leaf) {
    t.insert_or_assign(leaf, toml::array{c.taper.center.x(), c.taper.center.y(), c.taper.center.z()});
  };
  return k;
}

#define MEMBER(expr) [](PipelineConfig& c) -> auto& { return c.expr; }

const std::vector<KeySpec>& registry() {
  static const std::vector<KeySpec> keys = [] {
    constexpr double kBig = 1e12;
    std::vector<KeySpec> k;
    k.push_back(number_key<int>("bandwidth", MEMBER(bandwidth), 1, kMaxBandwidth));
    k.push_back(number_key<int>("eval_degrees", MEMBER(eval_degrees), 2, kMaxBandwidth));
    k.push_back(number_key<int>("feature_degrees", MEMBER(feature_degrees), 1, kMaxBandwidth));
    k.push_back(number_key<double>("success_radius", MEMBER(success_radius), 0.0, kBig));
    k.push_back(number_key<double>("taper.cap_half_angle", MEMBER(taper.cap_half_angle), 1e-6,
                                   std::numbers::pi));
    k.push_back(number_key<int>("taper.degrees", MEMBER(taper.degrees), 1, kMaxBandwidth));
    k.push_back(number_key<int>("taper.count", MEMBER(taper.count), 0, kMaxBandwidth));
    k.push_back(center_key());
    k.push_back(bool_key("fusion.standardize", MEMBER(fusion.standardize)));
    k.push_back(enum_key<ZScoreMode>("zscore.mode", MEMBER(zscore),
                                     {{"described", ZScoreMode::Described}, {"literal", ZScoreMode::Literal}}));
    k.push_back(enum_key<ConfidenceCarry>(
        "voting.carry", MEMBER(carry),
        {{"confidence", ConfidenceCarry::PreviousConfidence},
         {"correlation", ConfidenceCarry::PreviousCorrelation}}));
    k.push_back(number_key<double>("training.learning_rate", MEMBER(training.learning_rate), 0.0, kBig));
    k.push_back(number_key<int>("training.batch_size", MEMBER(training.batch_size), 0, 1e9));
    k.push_back(number_key<int>("training.epochs", MEMBER(training.epochs), 0, 1e9));
    k.push_back(seed_key("training.seed", MEMBER(training.seed)));
    k.push_back(number_key<double>("training.tau1", MEMBER(training.tau1), 0.0, kBig));
    k.push_back(number_key<double>("training.tau2", MEMBER(training.tau2), 0.0, kBig));
    k.push_back(number_key<double>("mining.min_spacing", MEMBER(mining.min_spacing), 0.0, kBig));
    k.push_back(number_key<double>("mining.positive_radius", MEMBER(mining.positive_radius), 0.0, kBig));
    k.push_back(number_key<double>("mining.negative_min", MEMBER(mining.negative_min), 0.0, kBig));
    k.push_back(number_key<double>("mining.negative_max", MEMBER(mining.negative_max), 0.0, kBig));
    k.push_back(seed_key("mining.seed", MEMBER(mining.seed)));
    k.push_back(number_key<double>("projection.max_angle", MEMBER(projection.max_angle), 0.0,
                                   std::numbers::pi));
    k.push_back(number_key<int>("projection.neighbors", MEMBER(projection.neighbors), 1, 1e6));
    k.push_back(bool_key("projection.lidar_only", MEMBER(projection.lidar_only)));
    k.push_back(seed_key("benchmark.world_seed", MEMBER(benchmark.world_seed)));
    k.push_back(number_key<int>("benchmark.boxes", MEMBER(benchmark.boxes), 0, 1e7));
    k.push_back(number_key<double>("benchmark.extent", MEMBER(benchmark.extent), 1e-3, kBig));
    k.push_back(number_key<int>("benchmark.map_places", MEMBER(benchmark.map_places), 1, 1e7));
    k.push_back(number_key<int>("benchmark.train_places", MEMBER(benchmark.train_places), 0, 1e7));
    k.push_back(number_key<int>("benchmark.queries", MEMBER(benchmark.queries), 1, 1e7));
    k.push_back(number_key<double>("benchmark.place_spacing", MEMBER(benchmark.place_spacing), 1e-3, kBig));
    k.push_back(number_key<double>("benchmark.query_offset", MEMBER(benchmark.query_offset), 0.0, kBig));
    k.push_back(number_key<double>("benchmark.query_yaw_jitter", MEMBER(benchmark.query_yaw_jitter), 0.0,
                                   std::numbers::pi));
    k.push_back(number_key<double>("benchmark.image_scale", MEMBER(benchmark.image_scale), 1e-3, 4.0));
    k.push_back(number_key<int>("benchmark.points_per_ring", MEMBER(benchmark.points_per_ring), 1, 1e6));
    k.push_back(number_key<int>("benchmark.recall_n_max", MEMBER(benchmark.recall_n_max), 1, 1e6));
    k.push_back(list_key<double>("benchmark.angles_deg", MEMBER(benchmark.angles_deg)));
    k.push_back(list_key<int>("benchmark.selection_k", MEMBER(benchmark.selection_k)));
    k.push_back(number_key<int>("benchmark.timing_samples", MEMBER(benchmark.timing_samples), 1, 1e7));
    k.push_back(number_key<int>("benchmark.timing_map_size", MEMBER(benchmark.timing_map_size), 1, 1e7));
    return k;
  }();
  return keys;
}

#undef MEMBER

void cross_check(const PipelineConfig& c) {
  if (c.eval_degrees > c.bandwidth) bad("eval_degrees", "must not exceed bandwidth");
  if (c.taper.degrees > c.bandwidth) bad("taper.degrees", "must not exceed bandwidth");
  if (c.taper.count > c.taper.degrees) bad("taper.count", "must not exceed taper.degrees");
  if (c.mining.negative_min > c.mining.negative_max) bad("mining.negative_min", "exceeds mining.negative_max");
  for (int k : c.benchmark.selection_k) {
    if (k < 1) bad("benchmark.selection_k", "entries must be positive");
  }
}

std::pair<std::string, std::string> split_key(const std::string& key) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) return {"", key};
  return {key.substr(0, dot), key.substr(dot + 1)};
}

}  // namespace

VoteOptions PipelineConfig::vote_options() const {
  VoteOptions o;
  o.degrees = eval_degrees;
  o.zscore = zscore;
  o.carry = carry;
  o.fusion = fusion;
  return o;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

LoadedConfig parse_config(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    const auto& src = e.source();
    throw ConfigError("<syntax>", std::string(e.description()) + " at line " +
                                      std::to_string(src.begin.line));
  }
  std::map<std::string, const KeySpec*> by_name;
  for (const auto& k : registry()) by_name[k.name] = &k;

  LoadedConfig out;
  std::map<std::string, bool> seen;
  auto visit = [&](const std::string& key, const toml::node& node) {
    const auto it = by_name.find(key);
    if (it == by_name.end()) bad(key, "unknown key");
    it->second->read(node, out.config);
    seen[key] = true;
  };
  for (const auto& [k, node] : root) {
    const std::string key(k.str());
    if (const auto* section = node.as_table()) {
      for (const auto& [sk, sub] : *section) {
        const std::string full = key + "." + std::string(sk.str());
        if (sub.is_table()) bad(full, "unknown key");
        visit(full, sub);
      }
    } else {
      visit(key, node);
    }
  }
  for (const auto& k : registry()) {
    if (!seen.count(k.name)) out.defaulted.push_back(k.name);
  }
  cross_check(out.config);
  return out;
}

LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

LoadedConfig default_config() { return parse_config(""); }

std::string to_toml(const PipelineConfig& config) {
  toml::table root;
  for (const auto& k : registry()) {
    const auto [section, leaf] = split_key(k.name);
    if (section.empty()) {
      k.write(config, root, leaf);
    } else {
      if (!root.contains(section)) root.insert(section, toml::table{});
      k.write(config, *root[section].as_table(), leaf);
    }
  }
  std::ostringstream out;
  out << root;
  return out.str();
}

}  // namespace sphereloc
