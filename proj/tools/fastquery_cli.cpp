// Command-line front door: synthetic data generation, quantization,
// fine-tuning, end-to-end protocol runs, and communication cost reports.
// Every command writes machine-readable JSON artifacts plus a
// resolved_config.json that reproduces the run.

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fastquery/costmodel.hpp"
#include "fastquery/finetune.hpp"
#include "fastquery/matrix_io.hpp"
#include "fastquery/protocol.hpp"
#include "fastquery/quantizer.hpp"
#include "fastquery/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fastquery;

namespace {

int log_level() {
  const char* env = std::getenv("FASTQUERY_LOG");
  if (!env) return 0;
  std::string v = env;
  if (v == "debug") return 2;
  if (v == "info") return 1;
  return 0;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[fastquery] %s\n", msg.c_str());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string timestamp_utc() {
  char buf[32];
  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::vector<uint32_t> parse_combo(const std::string& combo) {
  std::vector<uint32_t> out;
  size_t pos = 0;
  while (pos < combo.size()) {
    size_t comma = combo.find(',', pos);
    if (comma == std::string::npos) comma = combo.size();
    out.push_back(static_cast<uint32_t>(std::stoul(combo.substr(pos, comma - pos))));
    pos = comma + 1;
  }
  if (out.size() != 3) throw ConfigError("bit combination must have three entries, e.g. 4,3,3");
  return out;
}

// Resolved configuration written by every run; the timestamp field is the
// only part that varies between identical runs.
void write_resolved_config(const fs::path& out_dir, const std::string& command, uint64_t seed,
                           const json& options) {
  json j{{"command", command}, {"seed", seed}, {"options", options},
         {"timestamp", timestamp_utc()}};
  write_json(out_dir / "resolved_config.json", j);
}

template <typename T>
void from_config(const json& cfg, const char* key, T& value) {
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

// --- gen ---------------------------------------------------------------------

struct GenOpts {
  size_t m = 1024;
  size_t n = 96;
  size_t qkv_cols = 0;  // 0: n/2
  double log_sigma = 1.5;
  double zipf_exponent = 1.0;
  double zipf_c0 = 1e6;

  json to_json() const {
    return json{{"m", m},
                {"n", n},
                {"qkv_cols", qkv_cols},
                {"log_sigma", log_sigma},
                {"zipf_exponent", zipf_exponent},
                {"zipf_c0", zipf_c0}};
  }
  void load(const json& cfg) {
    from_config(cfg, "m", m);
    from_config(cfg, "n", n);
    from_config(cfg, "qkv_cols", qkv_cols);
    from_config(cfg, "log_sigma", log_sigma);
    from_config(cfg, "zipf_exponent", zipf_exponent);
    from_config(cfg, "zipf_c0", zipf_c0);
  }
};

int run_gen(const GenOpts& opts, uint64_t seed, const fs::path& out_dir) {
  if (opts.m == 0 || opts.n == 0) throw ConfigError("gen: dimensions must be positive");
  size_t qkv_cols = opts.qkv_cols ? opts.qkv_cols : std::max<size_t>(1, opts.n / 2);
  Rng rng(seed);
  Rng table_rng = rng.fork(1);
  Rng qkv_rng = rng.fork(2);
  Matrix<double> table = synth::gaussian_lognormal_channels(opts.n, opts.m, table_rng,
                                                            opts.log_sigma);
  Matrix<double> qkv = synth::gaussian_matrix(opts.n, qkv_cols, qkv_rng,
                                              1.0 / std::sqrt(static_cast<double>(opts.n)));
  auto freqs = synth::zipf_counts(opts.m, opts.zipf_exponent, opts.zipf_c0);
  io::save_matrix(table, (out_dir / "table.fqm").string());
  io::save_matrix(qkv, (out_dir / "qkv.fqm").string());
  io::save_freqs(freqs, (out_dir / "freqs.txt").string());
  write_resolved_config(out_dir, "gen", seed, opts.to_json());
  log_info("gen: wrote table " + std::to_string(opts.n) + "x" + std::to_string(opts.m));
  return 0;
}

// --- quantize ------------------------------------------------------------------

struct QuantizeOpts {
  std::string table_path;
  std::string freqs_path;
  std::string grad_path;
  std::string hessian_path;
  std::string criterion = "absolute_value";
  std::string combo = "4,3,3";
  uint32_t per_tensor_bits = 0;  // nonzero selects the RTN per-tensor baseline
  bool no_pow2 = false;
  bool compare = false;

  json to_json() const {
    return json{{"table", table_path},      {"freqs", freqs_path},
                {"grad_stats", grad_path},  {"hessian_stats", hessian_path},
                {"criterion", criterion},   {"combo", combo},
                {"per_tensor_bits", per_tensor_bits}, {"no_pow2", no_pow2},
                {"compare", compare}};
  }
  void load(const json& cfg) {
    from_config(cfg, "table", table_path);
    from_config(cfg, "freqs", freqs_path);
    from_config(cfg, "grad_stats", grad_path);
    from_config(cfg, "hessian_stats", hessian_path);
    from_config(cfg, "criterion", criterion);
    from_config(cfg, "combo", combo);
    from_config(cfg, "per_tensor_bits", per_tensor_bits);
    from_config(cfg, "no_pow2", no_pow2);
    from_config(cfg, "compare", compare);
  }
};

std::vector<double> load_stat_file(const std::string& path, size_t n) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open statistics file: " + path);
  std::vector<double> v;
  double x;
  while (is >> x) v.push_back(x);
  if (v.size() != n)
    throw ConfigError("statistics file " + path + " has " + std::to_string(v.size()) +
                      " entries, expected " + std::to_string(n));
  return v;
}

quant::ChannelStats gather_stats(const QuantizeOpts& opts, size_t n, uint64_t seed,
                                 bool synthesize_missing) {
  quant::ChannelStats aux;
  if (!opts.grad_path.empty()) aux.gradient = load_stat_file(opts.grad_path, n);
  if (!opts.hessian_path.empty()) aux.hessian = load_stat_file(opts.hessian_path, n);
  if (synthesize_missing) {
    // Stand-in statistics so the comparison grid always has all criteria.
    Rng rng = Rng(seed).fork(0x5354415453ULL);  // "STATS"
    if (!aux.gradient) {
      std::vector<double> g(n);
      for (auto& v : g) v = std::exp(rng.normal());
      aux.gradient = std::move(g);
    }
    if (!aux.hessian) {
      std::vector<double> h(n);
      for (auto& v : h) v = std::exp(rng.normal());
      aux.hessian = std::move(h);
    }
  }
  return aux;
}

json quantized_sidecar(const quant::QuantizedTable& q) {
  return json{{"channel_bits", q.channel_bits},
              {"scales", q.scales},
              {"permutation", q.permutation},
              {"bit_combo", q.bit_combo}};
}

int run_quantize(const QuantizeOpts& opts, uint64_t seed, const fs::path& out_dir) {
  if (opts.table_path.empty()) throw ConfigError("quantize: --table is required");
  Matrix<double> w = io::load_matrix<double>(opts.table_path);
  std::vector<double> freqs;
  const std::vector<double>* weights = nullptr;
  if (!opts.freqs_path.empty()) {
    freqs = io::load_freqs(opts.freqs_path, w.cols);
    weights = &freqs;
  }

  if (opts.compare) {
    std::vector<std::string> criteria{"absolute_value", "random", "gradient", "hessian",
                                      "gradient_times_absvalue"};
    std::vector<std::string> combos{"4,3,3", "5,3,2", "6,2,2"};
    quant::ChannelStats aux = gather_stats(opts, w.rows, seed, true);
    json grid = json::array();
    std::string csv = "criterion";
    for (const auto& c : combos) csv += ",\"" + c + "\"";
    csv += "\n";
    for (const auto& crit : criteria) {
      json row{{"criterion", crit}};
      csv += crit;
      for (const auto& combo : combos) {
        quant::QuantConfig qc;
        qc.criterion = quant::criterion_from_name(crit);
        qc.bit_combo = parse_combo(combo);
        qc.pow2_scales = !opts.no_pow2;
        qc.seed = seed;
        auto q = quant::quantize_table(w, qc, aux);
        double err = quant::reconstruction_error(w, q, weights);
        row[combo] = err;
        char buf[32];
        std::snprintf(buf, sizeof(buf), ",%.9g", err);
        csv += buf;
      }
      csv += "\n";
      grid.push_back(row);
    }
    write_json(out_dir / "comparison.json",
               json{{"rows", grid}, {"weighted", weights != nullptr},
                    {"timestamp", timestamp_utc()}});
    write_text(out_dir / "comparison.csv", csv);
    write_resolved_config(out_dir, "quantize", seed, opts.to_json());
    return 0;
  }

  quant::QuantizedTable q;
  if (opts.per_tensor_bits > 0) {
    q = quant::quantize_per_tensor(w, opts.per_tensor_bits, !opts.no_pow2);
  } else {
    quant::QuantConfig qc;
    qc.criterion = quant::criterion_from_name(opts.criterion);
    qc.bit_combo = parse_combo(opts.combo);
    qc.pow2_scales = !opts.no_pow2;
    qc.seed = seed;
    auto aux = gather_stats(opts, w.rows, seed, false);
    q = quant::quantize_table(w, qc, aux);
  }
  io::save_matrix(q.values, (out_dir / "quantized.fqm").string());
  write_json(out_dir / "quantized.json", quantized_sidecar(q));
  size_t wide = 0;
  for (uint32_t b : q.channel_bits) wide += (b == *std::max_element(q.channel_bits.begin(),
                                                                    q.channel_bits.end()));
  json metrics{{"reconstruction_error", quant::reconstruction_error(w, q)},
               {"widest_channels", wide},
               {"channels", q.channel_bits.size()},
               {"timestamp", timestamp_utc()}};
  if (weights) metrics["weighted_reconstruction_error"] = quant::reconstruction_error(w, q, weights);
  write_json(out_dir / "metrics.json", metrics);
  write_resolved_config(out_dir, "quantize", seed, opts.to_json());
  return 0;
}

// --- finetune ----------------------------------------------------------------

struct FinetuneOpts {
  std::string table_path;
  std::string qkv_path;
  std::string freqs_path;
  std::string criterion = "absolute_value";
  std::string combo = "4,3,3";
  double learning_rate = 1e-3;
  size_t iterations = 500;
  double tau = 0.0;

  json to_json() const {
    return json{{"table", table_path},   {"qkv", qkv_path},
                {"freqs", freqs_path},   {"criterion", criterion},
                {"combo", combo},        {"learning_rate", learning_rate},
                {"iterations", iterations}, {"tau", tau}};
  }
  void load(const json& cfg) {
    from_config(cfg, "table", table_path);
    from_config(cfg, "qkv", qkv_path);
    from_config(cfg, "freqs", freqs_path);
    from_config(cfg, "criterion", criterion);
    from_config(cfg, "combo", combo);
    from_config(cfg, "learning_rate", learning_rate);
    from_config(cfg, "iterations", iterations);
    from_config(cfg, "tau", tau);
  }
};

int run_finetune(const FinetuneOpts& opts, uint64_t seed, const fs::path& out_dir) {
  if (opts.table_path.empty() || opts.qkv_path.empty() || opts.freqs_path.empty())
    throw ConfigError("finetune: --table, --qkv and --freqs are required");
  Matrix<double> table = io::load_matrix<double>(opts.table_path);  // channel-major n x m
  Matrix<double> qkv = io::load_matrix<double>(opts.qkv_path);
  auto freqs = io::load_freqs(opts.freqs_path, table.cols);
  // Normalize counts to mean 1 so the descent scale is data-independent.
  double mean = 0;
  for (double f : freqs) mean += f;
  mean /= std::max<double>(1.0, static_cast<double>(freqs.size()));
  if (mean > 0)
    for (double& f : freqs) f /= mean;

  finetune::FinetuneConfig cfg;
  cfg.learning_rate = opts.learning_rate;
  cfg.iterations = opts.iterations;
  cfg.freq_threshold = opts.tau;
  cfg.seed = seed;
  cfg.quant.criterion = quant::criterion_from_name(opts.criterion);
  cfg.quant.bit_combo = parse_combo(opts.combo);
  cfg.quant.seed = seed;

  Matrix<double> token_major = table.transposed();
  auto result = finetune::finetune(token_major, qkv, freqs, cfg);

  io::save_matrix(result.table.values, (out_dir / "finetuned.fqm").string());
  write_json(out_dir / "finetuned.json", quantized_sidecar(result.table));
  // Running best-so-far curve: monotone non-increasing by construction.
  std::vector<double> best_curve;
  double best = result.loss_history.empty() ? 0.0 : result.loss_history[0];
  for (double l : result.loss_history) {
    best = std::min(best, l);
    best_curve.push_back(best);
  }
  double recon = quant::reconstruction_error(table, result.table);
  write_json(out_dir / "metrics.json", json{{"loss_history", result.loss_history},
                                            {"best_loss_curve", best_curve},
                                            {"best_loss", result.best_loss},
                                            {"best_iteration", result.best_iteration},
                                            {"initial_loss", result.loss_history.front()},
                                            {"reconstruction_error", recon},
                                            {"timestamp", timestamp_utc()}});
  write_resolved_config(out_dir, "finetune", seed, opts.to_json());
  return 0;
}

// --- query -------------------------------------------------------------------

struct QueryOpts {
  std::string mode = "online";  // online | baseline
  size_t m = 8192;
  size_t n = 384;
  size_t tokens = 8;
  int64_t token = -1;  // >= 0 pins a single token id
  uint32_t degree_n = 4096;
  uint32_t q_bits = 48;
  uint32_t p_bits = 13;
  uint32_t error_bound = 8;
  std::string combo = "4,3,3";
  uint32_t ell = 16;
  uint32_t b_w = 4;  // baseline weight width
  double log_sigma = 1.5;

  json to_json() const {
    return json{{"mode", mode},       {"m", m},
                {"n", n},             {"tokens", tokens},
                {"token", token},     {"degree_n", degree_n},
                {"q_bits", q_bits},   {"p_bits", p_bits},
                {"error_bound", error_bound}, {"combo", combo},
                {"ell", ell},         {"b_w", b_w},
                {"log_sigma", log_sigma}};
  }
  void load(const json& cfg) {
    from_config(cfg, "mode", mode);
    from_config(cfg, "m", m);
    from_config(cfg, "n", n);
    from_config(cfg, "tokens", tokens);
    from_config(cfg, "token", token);
    from_config(cfg, "degree_n", degree_n);
    from_config(cfg, "q_bits", q_bits);
    from_config(cfg, "p_bits", p_bits);
    from_config(cfg, "error_bound", error_bound);
    from_config(cfg, "combo", combo);
    from_config(cfg, "ell", ell);
    from_config(cfg, "b_w", b_w);
    from_config(cfg, "log_sigma", log_sigma);
  }
};

int run_query(const QueryOpts& opts, uint64_t seed, const fs::path& out_dir) {
  Rng rng(seed);
  Rng table_rng = rng.fork(1);
  Rng token_rng = rng.fork(2);

  std::vector<size_t> tokens;
  if (opts.token >= 0) {
    tokens.push_back(static_cast<size_t>(opts.token));
  } else {
    for (size_t i = 0; i < opts.tokens; ++i) tokens.push_back(token_rng.below(opts.m));
  }

  size_t matched = 0, total_channels = 0;
  json per_token = json::array();
  proto::Transcript first_transcript;
  cost::ValidationResult validation;

  if (opts.mode == "baseline") {
    proto::BaselineConfig cfg;
    cfg.m = opts.m;
    cfg.n = opts.n;
    cfg.b_w = opts.b_w;
    cfg.degree_n = opts.degree_n;
    cfg.q_bits = opts.q_bits;
    cfg.error_bound = opts.error_bound;
    Matrix<int64_t> w(opts.n, opts.m);
    int64_t lim = int64_t{1} << (opts.b_w - 1);
    for (auto& v : w.data)
      v = static_cast<int64_t>(table_rng.below(2 * static_cast<uint64_t>(lim))) - lim;
    for (size_t i = 0; i < tokens.size(); ++i) {
      cfg.seed = seed + i;
      auto run = proto::run_baseline_offline(w, cfg, tokens[i]);
      size_t ok = 0;
      for (size_t ch = 0; ch < opts.n; ++ch)
        ok += (proto::reconstruct_channel(run.result, ch) == w(ch, tokens[i]));
      matched += ok;
      total_channels += opts.n;
      per_token.push_back(json{{"token", tokens[i]}, {"channels_ok", ok}});
      if (i == 0) {
        first_transcript = run.transcript;
        auto model = cost::model_implemented_run(opts.m, opts.n, opts.degree_n, opts.q_bits);
        validation = cost::validate_transcript(model, run.transcript);
      }
    }
  } else if (opts.mode == "online") {
    Matrix<double> w = synth::gaussian_lognormal_channels(opts.n, opts.m, table_rng,
                                                          opts.log_sigma);
    quant::QuantConfig qc;
    qc.bit_combo = parse_combo(opts.combo);
    qc.seed = seed;
    auto q = quant::quantize_table(w, qc);
    auto grouped = quant::permute_rows(q.values, q.permutation);
    proto::ProtocolConfig cfg;
    cfg.m = opts.m;
    cfg.n = opts.n;
    cfg.params = ring::RingParams{opts.degree_n, opts.q_bits, opts.p_bits, opts.error_bound};
    cfg.bit_combo = qc.bit_combo;
    cfg.align_ell = opts.ell;
    auto table = proto::prepare_table(q, opts.p_bits);
    for (size_t i = 0; i < tokens.size(); ++i) {
      cfg.seed = seed + i;
      auto run = proto::run_online_query(table, cfg, tokens[i]);
      size_t ok = 0;
      for (size_t ch = 0; ch < opts.n; ++ch)
        ok += (proto::reconstruct_channel(run.result, ch) == grouped(ch, tokens[i]));
      matched += ok;
      total_channels += opts.n;
      per_token.push_back(json{{"token", tokens[i]}, {"channels_ok", ok}});
      if (i == 0) {
        first_transcript = run.transcript;
        auto model = cost::model_implemented_run(opts.m, table.packed.rows, opts.degree_n,
                                                 opts.q_bits);
        validation = cost::validate_transcript(model, run.transcript);
      }
    }
  } else {
    throw ConfigError("query: mode must be online or baseline");
  }

  bool exact = (matched == total_channels);
  write_json(out_dir / "query_summary.json",
             json{{"mode", opts.mode},
                  {"tokens", tokens},
                  {"channels_matched", matched},
                  {"channels_total", total_channels},
                  {"exact", exact},
                  {"per_token", per_token},
                  {"timestamp", timestamp_utc()}});
  write_json(out_dir / "transcript.json", first_transcript.to_json());
  write_json(out_dir / "validation.json", validation.to_json());
  write_resolved_config(out_dir, "query", seed, opts.to_json());
  log_info("query: " + std::to_string(matched) + "/" + std::to_string(total_channels) +
           " channels exact");
  if (!exact || !validation.passed) return 2;
  return 0;
}

// --- cost --------------------------------------------------------------------

struct CostOpts {
  size_t m = 32000;
  size_t n = 4096;
  uint32_t degree_n = 4096;
  std::string presets_path;

  json to_json() const {
    return json{{"m", m}, {"n", n}, {"degree_n", degree_n}, {"presets", presets_path}};
  }
  void load(const json& cfg) {
    from_config(cfg, "m", m);
    from_config(cfg, "n", n);
    from_config(cfg, "degree_n", degree_n);
    from_config(cfg, "presets", presets_path);
  }
};

int run_cost(const CostOpts& opts, uint64_t seed, const fs::path& out_dir) {
  cost::CostReport report;
  if (!opts.presets_path.empty()) {
    std::ifstream is(opts.presets_path);
    if (!is) throw ConfigError("cannot open presets file: " + opts.presets_path);
    json j = json::parse(is, nullptr, /*allow_exceptions=*/true);
    report.m = opts.m;
    report.n = opts.n;
    report.degree_n = j.value("degree_n", opts.degree_n);
    for (const auto& p : j.at("presets")) {
      cost::MethodConfig cfg;
      cfg.name = p.at("name");
      cfg.m = opts.m;
      cfg.n = opts.n;
      cfg.degree_n = report.degree_n;
      cfg.q_bits = p.at("q_bits");
      cfg.p_bits = p.contains("p_bits")
                       ? p.at("p_bits").get<uint32_t>()
                       : proto::required_plaintext_bits(false, p.at("weight_bits"), 1, opts.m);
      cfg.one_hot = p.value("one_hot", false);
      cfg.slots_per_coeff = p.value("slots_per_coeff", 1u);
      cfg.packlwes = p.value("packlwes", false);
      report.rows.push_back(cost::evaluate_method(cfg));
    }
    double baseline = static_cast<double>(report.rows.front().total_bytes);
    for (auto& row : report.rows)
      row.reduction_vs_baseline = baseline / static_cast<double>(row.total_bytes);
    report.footnotes = cost::method_report(opts.m, opts.n).footnotes;
  } else {
    cost::ReportOptions ropt;
    ropt.degree_n = opts.degree_n;
    report = cost::method_report(opts.m, opts.n, ropt);
  }
  json j = cost::report_to_json(report);
  j["timestamp"] = timestamp_utc();
  write_json(out_dir / "cost_report.json", j);
  write_text(out_dir / "cost_report.csv", cost::report_to_csv(report));
  write_resolved_config(out_dir, "cost", seed, opts.to_json());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fastquery: private embedding-table query toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_dir = "fastquery_out";
  uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON config file; flags win over it");
  app.add_option("--seed", seed, "global RNG seed");
  app.add_option("--out", out_dir, "output directory");

  GenOpts gen_opts;
  QuantizeOpts quant_opts;
  FinetuneOpts ft_opts;
  QueryOpts query_opts;
  CostOpts cost_opts;

  // Flags win over --config: load config values as defaults before parsing.
  json config;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream is(argv[i + 1]);
      if (!is) {
        std::fprintf(stderr, "cannot open config file %s\n", argv[i + 1]);
        return 3;
      }
      try {
        config = json::parse(is);
      } catch (const json::exception& e) {
        std::fprintf(stderr, "config parse error: %s\n", e.what());
        return 3;
      }
    }
  }
  if (config.contains("seed")) seed = config.at("seed").get<uint64_t>();
  if (config.contains("options")) {
    const json& o = config.at("options");
    gen_opts.load(o);
    quant_opts.load(o);
    ft_opts.load(o);
    query_opts.load(o);
    cost_opts.load(o);
  }

  CLI::App* c_gen = app.add_subcommand("gen", "generate a synthetic table, QKV block, and "
                                              "token frequencies");
  c_gen->add_option("--m", gen_opts.m, "vocabulary size");
  c_gen->add_option("--n", gen_opts.n, "embedding channels");
  c_gen->add_option("--qkv-cols", gen_opts.qkv_cols, "QKV projection columns (0: n/2)");
  c_gen->add_option("--log-sigma", gen_opts.log_sigma, "log-normal channel scale spread");
  c_gen->add_option("--zipf-exponent", gen_opts.zipf_exponent, "token frequency decay");
  c_gen->add_option("--zipf-c0", gen_opts.zipf_c0, "count of the most frequent token");

  CLI::App* c_quant = app.add_subcommand("quantize", "per-channel mixed-precision quantization");
  c_quant->add_option("--table", quant_opts.table_path, "table container (channels x vocab)");
  c_quant->add_option("--freqs", quant_opts.freqs_path, "token frequency file");
  c_quant->add_option("--grad-stats", quant_opts.grad_path, "per-channel gradient statistics");
  c_quant->add_option("--hessian-stats", quant_opts.hessian_path,
                      "per-channel Hessian statistics");
  c_quant->add_option("--criterion", quant_opts.criterion,
                      "absolute_value|random|gradient|hessian|gradient_times_absvalue");
  c_quant->add_option("--combo", quant_opts.combo, "bit combination, e.g. 4,3,3");
  c_quant->add_option("--per-tensor-bits", quant_opts.per_tensor_bits,
                      "use the RTN per-tensor baseline at this width");
  c_quant->add_flag("--no-pow2", quant_opts.no_pow2, "keep raw scales");
  c_quant->add_flag("--compare", quant_opts.compare,
                    "emit the criterion x combo comparison grid");

  CLI::App* c_ft = app.add_subcommand("finetune", "data-free embedding table fine-tuning");
  c_ft->add_option("--table", ft_opts.table_path, "table container (channels x vocab)");
  c_ft->add_option("--qkv", ft_opts.qkv_path, "QKV projection container");
  c_ft->add_option("--freqs", ft_opts.freqs_path, "token frequency file");
  c_ft->add_option("--criterion", ft_opts.criterion, "saliency criterion");
  c_ft->add_option("--combo", ft_opts.combo, "bit combination");
  c_ft->add_option("--lr", ft_opts.learning_rate, "learning rate");
  c_ft->add_option("--iters", ft_opts.iterations, "gradient descent iterations");
  c_ft->add_option("--tau", ft_opts.tau, "frequency clipping threshold (0: 10 x median)");

  CLI::App* c_query = app.add_subcommand("query", "end-to-end private table query");
  c_query->add_option("--mode", query_opts.mode, "online | baseline");
  c_query->add_option("--m", query_opts.m, "vocabulary size");
  c_query->add_option("--n", query_opts.n, "embedding channels");
  c_query->add_option("--tokens", query_opts.tokens, "number of random tokens to query");
  c_query->add_option("--token", query_opts.token, "query one specific token id");
  c_query->add_option("--N", query_opts.degree_n, "ring degree");
  c_query->add_option("--q-bits", query_opts.q_bits, "ciphertext modulus bits");
  c_query->add_option("--p-bits", query_opts.p_bits, "plaintext modulus bits");
  c_query->add_option("--error-bound", query_opts.error_bound, "fresh error bound");
  c_query->add_option("--combo", query_opts.combo, "bit combination");
  c_query->add_option("--ell", query_opts.ell, "aligned share width");
  c_query->add_option("--b-w", query_opts.b_w, "baseline weight width");
  c_query->add_option("--log-sigma", query_opts.log_sigma, "table generator spread");

  CLI::App* c_cost = app.add_subcommand("cost", "analytic communication cost ladder");
  c_cost->add_option("--m", cost_opts.m, "vocabulary size");
  c_cost->add_option("--n", cost_opts.n, "embedding channels");
  c_cost->add_option("--N", cost_opts.degree_n, "ring degree");
  c_cost->add_option("--presets", cost_opts.presets_path, "preset definitions JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out_dir);
    if (c_gen->parsed()) return run_gen(gen_opts, seed, out_dir);
    if (c_quant->parsed()) return run_quantize(quant_opts, seed, out_dir);
    if (c_ft->parsed()) return run_finetune(ft_opts, seed, out_dir);
    if (c_query->parsed()) return run_query(query_opts, seed, out_dir);
    if (c_cost->parsed()) return run_cost(cost_opts, seed, out_dir);
  } catch (const UnsupportedScaleError& e) {
    std::fprintf(stderr, "unsupported scale: %s\n", e.what());
    return 4;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
