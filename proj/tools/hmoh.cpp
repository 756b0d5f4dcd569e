// hmoh: streaming learning-to-hash front end.
// Subcommands: train, encode, eval, bench, baseline-lsh, selfcheck.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "hmoh/codec.hpp"
#include "hmoh/config.hpp"
#include "hmoh/data.hpp"
#include "hmoh/eval.hpp"
#include "hmoh/pipeline.hpp"
#include "hmoh/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<int> bits;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mask_mode;
  std::optional<std::string> kernel;
};

hmoh::RunConfig resolve_config(const std::string& path, const Overrides& ov) {
  hmoh::RunConfig cfg = hmoh::load_config(path);
  if (ov.bits) cfg.bits = *ov.bits;
  if (ov.seed) {
    cfg.seed_split = *ov.seed;
    cfg.seed_stream = *ov.seed + 1;
    cfg.seed_codebook = *ov.seed + 2;
    cfg.seed_projector = *ov.seed + 3;
  }
  if (ov.out) cfg.out_dir = *ov.out;
  if (ov.mask_mode) cfg.mask_mode = *ov.mask_mode;
  if (ov.kernel) cfg.kernel = (*ov.kernel == "on");
  return cfg;
}

void write_config_echo(const hmoh::RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream os(fs::path(cfg.out_dir) / "config.resolved");
  os << hmoh::render_config(cfg);
}

void write_report(const hmoh::EvalReport& report, const fs::path& dir,
                  const std::vector<std::string>& metrics) {
  fs::create_directories(dir);
  auto want = [&](const std::string& m) {
    return metrics.empty() || std::find(metrics.begin(), metrics.end(), m) != metrics.end();
  };

  std::ofstream txt(dir / "report.txt");
  json j;
  if (want("map")) {
    txt << "map = " << report.map << "\n";
    j["map"] = report.map;
    if (report.map_at_k) {
      txt << "map_at_" << report.map_at_k->first << " = " << report.map_at_k->second << "\n";
      j["map_at_k"] = {{"k", report.map_at_k->first}, {"value", report.map_at_k->second}};
    }
  }
  if (want("ph2")) {
    txt << "precision_at_h2 = " << report.prec_at_h2 << "\n";
    j["precision_at_h2"] = report.prec_at_h2;
  }
  if (want("pk")) {
    for (const auto& [k, p] : report.prec_at_k_curve) {
      txt << "precision_at_" << k << " = " << p << "\n";
      j["precision_at_k"][std::to_string(k)] = p;
    }
    std::ofstream csv(dir / "precision_at_k.csv");
    for (const auto& [k, p] : report.prec_at_k_curve) csv << k << "," << p << "\n";
  }
  if (want("pr")) {
    txt << "pr_auc = " << report.pr_auc << "\n";
    j["pr_auc"] = report.pr_auc;
    std::ofstream csv(dir / "pr_curve.csv");
    for (const auto& [r, p] : report.pr_curve) csv << r << "," << p << "\n";
  }
  txt << "seconds = " << report.seconds << "\n";
  j["seconds"] = report.seconds;
  std::ofstream(dir / "report.json") << j.dump(2) << "\n";
}

int cmd_train(const std::string& config_path, const Overrides& ov) {
  hmoh::RunConfig cfg = resolve_config(config_path, ov);
  write_config_echo(cfg);

  const hmoh::Dataset ds = hmoh::load_dataset(cfg);
  const hmoh::Split sp = hmoh::split(
      ds, hmoh::SplitSpec{cfg.query_per_class, cfg.query_count, cfg.train_count, cfg.seed_split});
  const hmoh::Dataset train_set = ds.select(sp.train);
  const auto order = hmoh::stream_permutation(train_set.size(), cfg.seed_stream);
  Eigen::MatrixXd stream = hmoh::stream_features(train_set, order);
  std::vector<hmoh::LabelSet> labels(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) labels[i] = train_set.labels[order[i]];

  const hmoh::TrainResult result = hmoh::train_stream(cfg.train_options(), stream, labels);

  const fs::path dir(cfg.out_dir);
  {
    auto os = hmoh::io::open_out((dir / "model.bin").string());
    result.model.save(os);
  }
  std::ofstream log(dir / "train.log");
  log << "rounds = " << result.rounds << "\n";
  log << "mistaken_bits = " << result.mistakes << "\n";
  log << "seconds = " << result.seconds << "\n";
  for (const auto& [round, rate] : result.mistake_trace)
    log << "mistake_rate_at_" << round << " = " << rate << "\n";
  std::cout << "trained " << result.rounds << " rounds in " << result.seconds << " s, model at "
            << (dir / "model.bin").string() << "\n";
  return 0;
}

Eigen::MatrixXd load_features_file(const std::string& path, const std::string& format) {
  auto is = hmoh::io::open_in(path);
  if (format == "dense-f32") return hmoh::load_dnsf(is);
  if (format == "csv") return hmoh::load_csv(is);
  hmoh::fail(hmoh::Errc::bad_config, "encode supports formats dense-f32 and csv, got " + format);
}

int cmd_encode(const std::string& model_path, const std::string& features_path,
               const std::string& format, const std::string& normalization,
               const std::string& out_path) {
  auto ms = hmoh::io::open_in(model_path);
  const hmoh::TrainedModel model = hmoh::TrainedModel::load(ms);
  hmoh::Dataset ds;
  ds.features = load_features_file(features_path, format);
  hmoh::RunConfig norm_cfg;
  norm_cfg.normalization = normalization;
  hmoh::normalize(ds, norm_cfg.normalization_mode());
  const hmoh::BinaryCodeMatrix codes = model.encode(ds.features);
  auto os = hmoh::io::open_out(out_path);
  codes.save(os);
  std::cout << "encoded " << codes.size() << " items x " << codes.bits() << " bits to " << out_path
            << "\n";
  return 0;
}

std::vector<hmoh::LabelSet> load_labels_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) hmoh::fail(hmoh::Errc::io_error, "cannot open label file: " + path);
  return hmoh::load_labels_text(is);
}

int cmd_eval_codes(const std::string& query_codes_path, const std::string& db_codes_path,
                   const std::string& query_labels_path, const std::string& db_labels_path,
                   const std::string& out_dir, const std::vector<std::string>& metrics,
                   std::optional<int> map_cutoff) {
  auto qis = hmoh::io::open_in(query_codes_path);
  auto dis = hmoh::io::open_in(db_codes_path);
  const auto query_codes = hmoh::BinaryCodeMatrix::load(qis);
  const auto db_codes = hmoh::BinaryCodeMatrix::load(dis);
  const auto t0 = std::chrono::steady_clock::now();
  hmoh::EvalReport report =
      hmoh::evaluate(query_codes, db_codes, load_labels_file(query_labels_path),
                     load_labels_file(db_labels_path), map_cutoff, {1, 10, 100, 1000});
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_report(report, out_dir, metrics);
  std::cout << "map = " << report.map << ", precision_at_h2 = " << report.prec_at_h2 << "\n";
  return 0;
}

int cmd_eval_config(const std::string& config_path, const std::string& model_path,
                    const Overrides& ov, const std::vector<std::string>& metrics) {
  hmoh::RunConfig cfg = resolve_config(config_path, ov);
  write_config_echo(cfg);
  auto ms = hmoh::io::open_in(model_path);
  const hmoh::TrainedModel model = hmoh::TrainedModel::load(ms);
  const hmoh::Dataset ds = hmoh::load_dataset(cfg);
  const hmoh::Split sp = hmoh::split(
      ds, hmoh::SplitSpec{cfg.query_per_class, cfg.query_count, cfg.train_count, cfg.seed_split});
  const hmoh::Dataset query_set = ds.select(sp.query);
  const hmoh::Dataset db_set = ds.select(sp.retrieval);
  const auto t0 = std::chrono::steady_clock::now();
  hmoh::EvalReport report = hmoh::evaluate(model.encode(query_set.features),
                                           model.encode(db_set.features), query_set.labels,
                                           db_set.labels, cfg.map_cutoff, cfg.precision_ks);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_report(report, cfg.out_dir, metrics);
  std::cout << "map = " << report.map << ", precision_at_h2 = " << report.prec_at_h2 << "\n";
  return 0;
}

int cmd_bench(const std::vector<int>& dims, int reps, int bits, const std::string& out_path) {
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    os = &file;
  }
  *os << "dim,per_step_seconds\n";
  hmoh::Rng rng(99);
  for (int d : dims) {
    Eigen::MatrixXd z(d, 1);
    Eigen::MatrixXi targets(bits, 1);
    hmoh::ModelHyper h;
    h.bits = bits;
    h.raw_dim = d;
    h.model_dim = d;
    h.order = hmoh::target_order(bits, 2);
    hmoh::HashModel model(h, hmoh::build_sylvester(h.order, 1),
                          hmoh::make_projector(h.order, bits, 2), std::nullopt);
    for (int i = 0; i < d; ++i) z(i, 0) = rng.gaussian();
    for (int k = 0; k < bits; ++k) targets(k, 0) = (rng.next_u64() & 1) ? 1 : -1;
    // warmup
    for (int i = 0; i < 100; ++i) model.sgd_step(z, targets, 0.1);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) model.sgd_step(z, targets, 0.1);
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
    *os << d << "," << dt << "\n";
  }
  return 0;
}

int cmd_baseline_lsh(const std::string& config_path, const Overrides& ov) {
  hmoh::RunConfig cfg = resolve_config(config_path, ov);
  write_config_echo(cfg);
  const hmoh::Dataset ds = hmoh::load_dataset(cfg);
  const hmoh::TrainedModel model = hmoh::make_lsh_baseline(cfg, ds.dim(), cfg.seed_projector);
  fs::create_directories(cfg.out_dir);
  auto os = hmoh::io::open_out((fs::path(cfg.out_dir) / "model.bin").string());
  model.save(os);
  std::cout << "baseline model at " << (fs::path(cfg.out_dir) / "model.bin").string() << "\n";
  return 0;
}

bool check(std::ostream& os, const std::string& name, bool ok) {
  os << (ok ? "PASS " : "FAIL ") << name << "\n";
  return ok;
}

int cmd_selfcheck() {
  bool all = true;
  auto& os = std::cout;

  // Hadamard orthogonality and column separation
  for (int k = 1; k <= 8; ++k) {
    const int n = 1 << k;
    const Eigen::MatrixXi h = hmoh::HadamardCodebook::build_sylvester_matrix(n);
    const Eigen::MatrixXi g = h * h.transpose();
    bool ok = (g - n * Eigen::MatrixXi::Identity(n, n)).cwiseAbs().maxCoeff() == 0;
    for (int a = 0; a < n && ok; ++a)
      for (int b = a + 1; b < n && ok; ++b)
        ok = (h.col(a) - h.col(b)).cwiseAbs().sum() / 2 == n / 2;
    all &= check(os, "hadamard order " + std::to_string(n), ok);
  }

  // Codec round-trip + popcount vs per-bit loop
  {
    hmoh::Rng rng(5);
    bool ok = true;
    for (int bits : {8, 16, 32, 48, 64, 128}) {
      Eigen::MatrixXi signs(bits, 64);
      for (int i = 0; i < signs.size(); ++i) signs(i) = (rng.next_u64() & 1) ? 1 : -1;
      const auto codes = hmoh::BinaryCodeMatrix::pack_signs(signs);
      for (int j = 0; j < 64 && ok; ++j)
        for (int b = 0; b < bits && ok; ++b) ok = codes.get(j, b) == signs(b, j);
      for (int t = 0; t < 200 && ok; ++t) {
        const auto i = rng.uniform_index(64), j = rng.uniform_index(64);
        int naive = 0;
        for (int b = 0; b < bits; ++b) naive += signs(b, (int)i) != signs(b, (int)j);
        ok = codes.hamming(i, j) == naive;
      }
    }
    all &= check(os, "codec pack/unpack + hamming", ok);
  }

  // LSH balance, Theorem-1 style Monte-Carlo
  {
    hmoh::HadamardCodebook cb = hmoh::build_sylvester(256, 7);
    hmoh::Rng rng(8);
    double plus = 0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
      const auto p = hmoh::make_projector(256, 64, rng.next_u64());
      plus += (p.project(cb.matrix().col(static_cast<int>(rng.uniform_index(256)))).array() > 0)
                  .count();
    }
    const double mean = plus / trials;
    all &= check(os, "lsh projection balance (mean +1 = " + std::to_string(mean) + ")",
                 mean > 30.7 && mean < 33.3);
  }

  // Multi-label fusion balance
  {
    hmoh::HadamardCodebook cb = hmoh::build_sylvester(256, 9);
    hmoh::Rng rng(10);
    double frac = 0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
      std::vector<std::uint32_t> labels;
      const int count = 2 + static_cast<int>(t % 2);
      while (labels.size() < static_cast<std::size_t>(count)) {
        const auto l = static_cast<std::uint32_t>(rng.uniform_index(256));
        if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
      }
      frac += static_cast<double>((cb.fuse_multilabel(labels).array() > 0).count()) / 256.0;
    }
    frac /= trials;
    all &= check(os, "multi-label fusion balance (mean +1 frac = " + std::to_string(frac) + ")",
                 frac > 0.48 && frac < 0.52);
  }

  // SGD update vs dense oracle
  {
    hmoh::Rng rng(11);
    bool ok = true;
    for (int t = 0; t < 20 && ok; ++t) {
      const int d = 5 + static_cast<int>(rng.uniform_index(10));
      const int r = 4 + static_cast<int>(rng.uniform_index(8));
      const int n = 1 + static_cast<int>(rng.uniform_index(4));
      hmoh::ModelHyper h;
      h.bits = r;
      h.raw_dim = d;
      h.model_dim = d;
      h.order = hmoh::target_order(r, 2);
      hmoh::HashModel model(h, hmoh::build_sylvester(h.order, 1),
                            hmoh::make_projector(h.order, r, 2), std::nullopt);
      Eigen::MatrixXd z(d, n);
      Eigen::MatrixXi targets(r, n);
      for (int i = 0; i < z.size(); ++i) z(i) = rng.gaussian();
      for (int i = 0; i < targets.size(); ++i) targets(i) = (rng.next_u64() & 1) ? 1 : -1;
      const Eigen::MatrixXd w_before = model.weights();
      model.sgd_step(z, targets, 0.1);
      Eigen::MatrixXd expected = w_before;
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < r; ++k) {
          double score = 0;
          for (int a = 0; a < d; ++a) score += w_before(a, k) * z(a, i);
          const int predicted = score >= 0 ? 1 : -1;
          if (predicted != targets(k, i))
            for (int a = 0; a < d; ++a) expected(a, k) += 0.1 * z(a, i) * targets(k, i);
        }
      ok = (model.weights() - expected).cwiseAbs().maxCoeff() < 1e-12;
    }
    all &= check(os, "sgd update vs dense oracle", ok);
  }

  os << (all ? "selfcheck OK\n" : "selfcheck FAILED\n");
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hadamard-guided streaming learning-to-hash toolkit"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path, model_path, features_path, out_path;
  std::string format = "dense-f32", normalization = "none";
  std::string query_codes, db_codes, query_labels, db_labels;
  std::vector<std::string> metrics;
  std::vector<int> bench_dims = {256, 512, 1024};
  int bench_reps = 2000, bench_bits = 32;
  std::optional<int> map_cutoff;

  auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--bits", ov.bits, "hash length override");
    cmd->add_option("--seed", ov.seed, "master seed override (derives all four seeds)");
    cmd->add_option("--out", ov.out, "output directory override");
    cmd->add_option("--mask-mode", ov.mask_mode, "mistake|correct")
        ->check(CLI::IsMember({"mistake", "correct"}));
    cmd->add_option("--kernel", ov.kernel, "on|off")->check(CLI::IsMember({"on", "off"}));
  };

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_path, "run config file")->required();
  add_overrides(train);

  auto* encode = app.add_subcommand("encode", "encode a feature file with a trained model");
  encode->add_option("--model", model_path)->required();
  encode->add_option("--features", features_path)->required();
  encode->add_option("--format", format, "dense-f32|csv");
  encode->add_option("--normalization", normalization, "none|scale-255|unit-l2");
  encode->add_option("--out", out_path, "output BCMX path")->required();

  auto* eval = app.add_subcommand("eval", "evaluate codes or a model on a configured dataset");
  eval->add_option("--config", config_path, "dataset config (model mode)");
  eval->add_option("--model", model_path, "model file (model mode)");
  eval->add_option("--query-codes", query_codes, "BCMX query codes (code mode)");
  eval->add_option("--db-codes", db_codes, "BCMX database codes (code mode)");
  eval->add_option("--query-labels", query_labels);
  eval->add_option("--db-labels", db_labels);
  eval->add_option("--metrics", metrics, "subset of map,ph2,pk,pr")->delimiter(',');
  eval->add_option("--map-cutoff", map_cutoff, "truncate mAP at this rank");
  eval->add_option("--out-dir", out_path, "report directory (code mode)");
  add_overrides(eval);

  auto* bench = app.add_subcommand("bench", "per-step training time across feature dims");
  bench->add_option("--dims", bench_dims, "feature dimensions")->delimiter(',');
  bench->add_option("--reps", bench_reps);
  bench->add_option("--bits", bench_bits);
  bench->add_option("--out", out_path, "CSV output path (default stdout)");

  auto* baseline = app.add_subcommand("baseline-lsh", "untrained Gaussian projection baseline");
  baseline->add_option("--config", config_path)->required();
  add_overrides(baseline);

  app.add_subcommand("selfcheck", "run the module property suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, ov);
    if (encode->parsed())
      return cmd_encode(model_path, features_path, format, normalization, out_path);
    if (eval->parsed()) {
      if (!query_codes.empty())
        return cmd_eval_codes(query_codes, db_codes, query_labels, db_labels,
                              out_path.empty() ? "out" : out_path, metrics, map_cutoff);
      if (config_path.empty() || model_path.empty())
        hmoh::fail(hmoh::Errc::bad_config,
                   "eval needs either --query-codes/--db-codes or --config/--model");
      return cmd_eval_config(config_path, model_path, ov, metrics);
    }
    if (bench->parsed()) return cmd_bench(bench_dims, bench_reps, bench_bits, out_path);
    if (baseline->parsed()) return cmd_baseline_lsh(config_path, ov);
    return cmd_selfcheck();
  } catch (const hmoh::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
