#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hmoh/data.hpp"
#include "hmoh/errors.hpp"
#include "hmoh/trainer.hpp"

namespace hmoh {

/// Resolved run configuration. Parsed from a plain `key = value` file with
/// '#' comments; command-line flags override individual keys. Every run
/// writes the resolved form next to its outputs.
struct RunConfig {
  // dataset
  std::string format = "idx";  // idx | dense-f32 | csv
  std::vector<std::string> images;  // idx image files or feature files, concatenated
  std::vector<std::string> labels;  // idx label files or label text files
  std::string normalization = "scale-255";

  // split
  int query_per_class = 0;
  std::size_t query_count = 0;
  std::size_t train_count = 0;

  // model
  int bits = 32;
  int max_labels = 2;
  bool kernel = false;
  int kernel_m = 0;
  double bandwidth = 1.0;
  double learning_rate = 0.1;
  int batch_size = 1;
  std::string mask_mode = "mistake";

  // seeds
  std::uint64_t seed_split = 11;
  std::uint64_t seed_stream = 12;
  std::uint64_t seed_codebook = 13;
  std::uint64_t seed_projector = 14;

  std::string out_dir = "out";
  std::optional<int> map_cutoff;
  std::vector<int> precision_ks = {1, 10, 100, 1000};

  Normalization normalization_mode() const {
    if (normalization == "none") return Normalization::none;
    if (normalization == "scale-255") return Normalization::scale255;
    if (normalization == "unit-l2") return Normalization::unit_l2;
    fail(Errc::bad_config, "unknown normalization: " + normalization);
  }

  MaskMode mask() const {
    if (mask_mode == "mistake") return MaskMode::mistake;
    if (mask_mode == "correct") return MaskMode::correct;
    fail(Errc::bad_config, "mask_mode must be 'mistake' or 'correct', got " + mask_mode);
  }

  TrainOptions train_options() const {
    if (bits < 1) fail(Errc::bad_config, "bits must be >= 1");
    if (learning_rate <= 0) fail(Errc::bad_config, "learning_rate must be positive");
    if (batch_size < 1) fail(Errc::bad_config, "batch_size must be >= 1");
    TrainOptions o;
    o.bits = bits;
    o.max_labels = max_labels;
    o.kernel = kernel;
    o.anchor_count = kernel_m;
    o.bandwidth = bandwidth;
    o.learning_rate = learning_rate;
    o.batch_size = batch_size;
    o.mask_mode = mask();
    o.codebook_seed = seed_codebook;
    o.projector_seed = seed_projector;
    return o;
  }
};

namespace detail {
inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}
}  // namespace detail

inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "dataset.format") cfg.format = value;
    else if (key == "dataset.images") cfg.images = detail::split_list(value);
    else if (key == "dataset.labels") cfg.labels = detail::split_list(value);
    else if (key == "dataset.normalization") cfg.normalization = value;
    else if (key == "split.query_per_class") cfg.query_per_class = std::stoi(value);
    else if (key == "split.query_count") cfg.query_count = std::stoull(value);
    else if (key == "split.train_count") cfg.train_count = std::stoull(value);
    else if (key == "bits") cfg.bits = std::stoi(value);
    else if (key == "max_labels") cfg.max_labels = std::stoi(value);
    else if (key == "kernel") cfg.kernel = (value == "on" || value == "true" || value == "1");
    else if (key == "kernel.m") cfg.kernel_m = std::stoi(value);
    else if (key == "kernel.bandwidth") cfg.bandwidth = std::stod(value);
    else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
    else if (key == "batch_size") cfg.batch_size = std::stoi(value);
    else if (key == "mask_mode") cfg.mask_mode = value;
    else if (key == "seed.split") cfg.seed_split = std::stoull(value);
    else if (key == "seed.stream") cfg.seed_stream = std::stoull(value);
    else if (key == "seed.codebook") cfg.seed_codebook = std::stoull(value);
    else if (key == "seed.projector") cfg.seed_projector = std::stoull(value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "eval.map_cutoff") cfg.map_cutoff = std::stoi(value);
    else if (key == "eval.precision_ks") {
      cfg.precision_ks.clear();
      for (const auto& s : detail::split_list(value)) cfg.precision_ks.push_back(std::stoi(s));
    } else {
      fail(Errc::bad_config, "unknown config key: " + key);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(Errc::bad_config, "bad value for config key " + key + ": '" + value + "'");
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(Errc::io_error, "cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (eq == std::string::npos)
      fail(Errc::bad_config, path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    apply_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline std::string render_config(const RunConfig& cfg) {
  std::ostringstream os;
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
  };
  os << "dataset.format = " << cfg.format << "\n";
  os << "dataset.images = " << join(cfg.images) << "\n";
  os << "dataset.labels = " << join(cfg.labels) << "\n";
  os << "dataset.normalization = " << cfg.normalization << "\n";
  os << "split.query_per_class = " << cfg.query_per_class << "\n";
  os << "split.query_count = " << cfg.query_count << "\n";
  os << "split.train_count = " << cfg.train_count << "\n";
  os << "bits = " << cfg.bits << "\n";
  os << "max_labels = " << cfg.max_labels << "\n";
  os << "kernel = " << (cfg.kernel ? "on" : "off") << "\n";
  os << "kernel.m = " << cfg.kernel_m << "\n";
  os << "kernel.bandwidth = " << cfg.bandwidth << "\n";
  os << "learning_rate = " << cfg.learning_rate << "\n";
  os << "batch_size = " << cfg.batch_size << "\n";
  os << "mask_mode = " << cfg.mask_mode << "\n";
  os << "seed.split = " << cfg.seed_split << "\n";
  os << "seed.stream = " << cfg.seed_stream << "\n";
  os << "seed.codebook = " << cfg.seed_codebook << "\n";
  os << "seed.projector = " << cfg.seed_projector << "\n";
  os << "out = " << cfg.out_dir << "\n";
  if (cfg.map_cutoff) os << "eval.map_cutoff = " << *cfg.map_cutoff << "\n";
  std::string ks;
  for (std::size_t i = 0; i < cfg.precision_ks.size(); ++i)
    ks += (i ? "," : "") + std::to_string(cfg.precision_ks[i]);
  os << "eval.precision_ks = " << ks << "\n";
  return os.str();
}

/// Load the configured dataset: concatenates the listed sources and applies
/// the configured normalization.
inline Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.images.empty()) fail(Errc::bad_config, "no dataset.images configured");
  Dataset ds;
  for (std::size_t s = 0; s < cfg.images.size(); ++s) {
    Dataset part;
    if (cfg.format == "idx") {
      if (cfg.labels.size() != cfg.images.size())
        fail(Errc::bad_config, "idx format needs one label file per image file");
      part = load_idx(cfg.images[s], cfg.labels[s]);
    } else if (cfg.format == "dense-f32" || cfg.format == "csv") {
      if (cfg.labels.size() != cfg.images.size())
        fail(Errc::bad_config, "feature files need one label file per source");
      if (cfg.format == "dense-f32") {
        auto is = io::open_in(cfg.images[s]);
        part.features = load_dnsf(is);
      } else {
        auto is = io::open_in(cfg.images[s]);
        part.features = load_csv(is);
      }
      std::ifstream ls(cfg.labels[s]);
      if (!ls) fail(Errc::io_error, "cannot open label file: " + cfg.labels[s]);
      part.labels = load_labels_text(ls);
      if (part.labels.size() != static_cast<std::size_t>(part.features.cols()))
        fail(Errc::count_mismatch, "feature/label count mismatch in " + cfg.images[s]);
    } else {
      fail(Errc::bad_config, "unknown dataset format: " + cfg.format);
    }
    if (ds.size() == 0) {
      ds = std::move(part);
    } else {
      if (part.dim() != ds.dim()) fail(Errc::dimension_mismatch, "source dimensions differ");
      const auto old = ds.features.cols();
      ds.features.conservativeResize(Eigen::NoChange, old + part.features.cols());
      ds.features.rightCols(part.features.cols()) = part.features;
      ds.labels.insert(ds.labels.end(), part.labels.begin(), part.labels.end());
    }
  }
  normalize(ds, cfg.normalization_mode());
  return ds;
}

}  // namespace hmoh
