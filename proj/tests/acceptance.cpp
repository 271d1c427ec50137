// Acceptance suite: runs every shipped correctness criterion end to end and
// prints one PASS/FAIL line each. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fastquery/costmodel.hpp"
#include "fastquery/finetune.hpp"
#include "fastquery/protocol.hpp"
#include "fastquery/quantizer.hpp"
#include "fastquery/slot_packing.hpp"
#include "fastquery/synthetic.hpp"

using namespace fastquery;

namespace {

struct Check {
  std::string name;
  std::function<bool(std::string&)> run;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// --- C1: HE exactness at default parameters ---------------------------------

bool he_exactness(std::string& detail) {
  ring::RingParams params;  // N=4096, q=2^48, p=2^13, B=8
  params.validate();
  Rng krng(1001), rng(1002);
  rlwe::SecretKey sk = rlwe::keygen(params, krng);
  auto start = std::chrono::steady_clock::now();
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    rlwe::PlaintextPoly m(params.degree_n), w(params.degree_n), u(params.degree_n);
    for (size_t i = 0; i < params.degree_n; ++i) {
      m[i] = rng.bits(13);
      w[i] = rng.bits(13);
      u[i] = rng.bits(13);
    }
    rlwe::Ciphertext ct = rlwe::ct_add_pt(rlwe::ct_mul_pt(rlwe::encrypt(m, sk, rng), w), u);
    rlwe::PlaintextPoly dec = rlwe::decrypt(ct, sk);
    auto expected = ring::negacyclic_mul_mod(m.coeffs, w.coeffs, params.p_bits);
    for (size_t i = 0; i < expected.size(); ++i)
      expected[i] = (expected[i] + u[i]) & params.p_mask();
    if (dec.coeffs != expected) {
      detail = "pipeline decoded wrong value at trial " + std::to_string(t);
      return false;
    }
  }
  double elapsed = seconds_since(start);
  detail = std::to_string(trials) + " pipelines exact in " + std::to_string(elapsed) + " s";
  return elapsed < 300.0;
}

// --- C2: end-to-end protocol exactness ---------------------------------------

bool protocol_exactness(std::string& detail) {
  ring::RingParams params;
  proto::ProtocolConfig cfg;
  cfg.m = 8192;
  cfg.n = 384;
  cfg.params = params;
  cfg.seed = 2001;

  Rng table_rng(2002);
  Matrix<double> w = synth::gaussian_lognormal_channels(cfg.n, cfg.m, table_rng);
  quant::QuantConfig qc;
  qc.seed = 2003;
  auto q = quant::quantize_table(w, qc);
  auto grouped = quant::permute_rows(q.values, q.permutation);
  auto table = proto::prepare_table(q, params.p_bits);

  Rng token_rng(2004);
  auto start = std::chrono::steady_clock::now();
  const int tokens = 200;
  for (int t = 0; t < tokens; ++t) {
    size_t token = token_rng.below(cfg.m);
    cfg.seed = 3000 + t;
    auto run = proto::run_online_query(table, cfg, token);
    for (size_t ch = 0; ch < cfg.n; ++ch) {
      if (proto::reconstruct_channel(run.result, ch) != grouped(ch, token)) {
        detail = "mismatch at token " + std::to_string(token) + " channel " + std::to_string(ch);
        return false;
      }
      uint64_t mask = (uint64_t{1} << run.result.ell) - 1;
      uint64_t aligned =
          (run.result.aligned_client[ch] + run.result.aligned_server[ch]) & mask;
      if (aligned != (static_cast<uint64_t>(grouped(ch, token)) & mask)) {
        detail = "aligned share mismatch at token " + std::to_string(token);
        return false;
      }
    }
  }
  double mid = seconds_since(start);

  // Full-scale smoke: m=32000, n=4096, packed table synthesized directly.
  size_t m_full = 32000, n_full = 4096;
  auto layout = slots::make_layout({4, 3, 3}, params.p_bits);
  auto value_at = [&](size_t ch, size_t token) -> int64_t {
    uint32_t bits = layout.value_bits[ch % 3];
    uint64_t h = splitmix64(ch * 0x9E3779B97F4A7C15ULL ^ (token * 0xD1B54A32D192ED03ULL));
    return static_cast<int64_t>(h & ((uint64_t{1} << bits) - 1)) -
           (int64_t{1} << (bits - 1));
  };
  proto::PreparedTable full;
  full.layout = layout;
  full.n = n_full;
  full.grouped_bits.resize(n_full);
  for (size_t ch = 0; ch < n_full; ++ch) full.grouped_bits[ch] = layout.value_bits[ch % 3];
  size_t n_eff = (n_full + 2) / 3;
  full.packed = Matrix<uint64_t>(n_eff, m_full);
  for (size_t g = 0; g < n_eff; ++g) {
    for (size_t j = 0; j < m_full; ++j) {
      std::vector<int64_t> group(3, 0);
      for (size_t k = 0; k < 3 && g * 3 + k < n_full; ++k) group[k] = value_at(g * 3 + k, j);
      full.packed(g, j) = slots::pack_signed(group, layout);
    }
  }
  proto::ProtocolConfig full_cfg;
  full_cfg.m = m_full;
  full_cfg.n = n_full;
  full_cfg.params = params;
  for (size_t token : {size_t{0}, size_t{17553}, size_t{31999}}) {
    full_cfg.seed = 4000 + token;
    auto run = proto::run_online_query(full, full_cfg, token);
    for (size_t ch = 0; ch < n_full; ++ch) {
      if (proto::reconstruct_channel(run.result, ch) != value_at(ch, token)) {
        detail = "full-scale mismatch at token " + std::to_string(token);
        return false;
      }
    }
    auto model = cost::model_implemented_run(m_full, n_eff, params.degree_n, params.q_bits);
    auto validation = cost::validate_transcript(model, run.transcript);
    if (!validation.passed) {
      detail = "full-scale transcript validation failed: " + validation.to_json().dump();
      return false;
    }
  }
  detail = "200 tokens at (8192, 384) in " + std::to_string(mid) +
           " s; full-scale smoke (32000, 4096) x3 tokens exact and validated, total " +
           std::to_string(seconds_since(start)) + " s";
  return true;
}

// --- C3: slot packing oracle equivalence -------------------------------------

bool slot_packing_exhaustive(std::string& detail) {
  size_t checks = 0;
  for (auto combo : {std::vector<uint32_t>{4, 3, 3}, {5, 3, 2}, {6, 2, 2}}) {
    slots::SlotLayout layout = slots::make_layout(combo, 13);
    size_t cube = 1;
    for (uint32_t b : layout.value_bits) cube <<= b;
    for (size_t idx = 0; idx < cube; ++idx) {
      std::vector<int64_t> v(3);
      size_t rest = idx;
      for (size_t i = 0; i < 3; ++i) {
        uint64_t range = uint64_t{1} << layout.value_bits[i];
        v[i] = static_cast<int64_t>(rest % range) + layout.min_value(i);
        rest /= range;
      }
      if (slots::unpack_signed(slots::pack_signed(v, layout), layout) != v) {
        detail = "bijection failure";
        return false;
      }
      ++checks;
    }
  }
  // No-carry masking, exhaustive for (4,3,3): 2^10 values x 2^10 masks.
  slots::SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  uint64_t p_mask = (uint64_t{1} << 13) - 1;
  for (uint64_t vu = 0; vu < 1024; ++vu) {
    uint64_t u0 = vu & 15, u1 = (vu >> 4) & 7, u2 = (vu >> 7) & 7;
    uint64_t packed = u0 | (u1 << 5) | (u2 << 9);
    for (uint64_t rm = 0; rm < 1024; ++rm) {
      uint64_t r0 = rm & 15, r1 = (rm >> 4) & 7, r2 = (rm >> 7) & 7;
      uint64_t mask = r0 | (r1 << 5) | (r2 << 9);
      uint64_t sum = (packed + mask) & p_mask;
      if (((sum >> 0) & 31) != u0 + r0 || ((sum >> 5) & 15) != u1 + r1 ||
          ((sum >> 9) & 15) != u2 + r2) {
        detail = "carry leaked across slots";
        return false;
      }
      ++checks;
    }
  }
  detail = std::to_string(checks) + " exhaustive checks";
  return true;
}

// --- C4: accumulation analyzer ------------------------------------------------

bool accumulation_analyzer(std::string& detail) {
  uint32_t one_hot = proto::required_plaintext_bits(true, 12, 1, 32000);
  uint32_t naive = proto::required_plaintext_bits(false, 12, 1, 32000);
  detail = "one-hot p = " + std::to_string(one_hot) + ", naive p = " + std::to_string(naive);
  return one_hot == 13 && naive == 29;
}

// --- C5: coefficient packing equivalence --------------------------------------

bool coeff_packing_equivalence(std::string& detail) {
  const uint32_t p_bits = 13;
  const uint64_t p = uint64_t{1} << p_bits;
  auto run_instance = [&](size_t m, size_t n_eff, size_t N, Rng& rng, bool one_hot) {
    packing::MatVecPlan plan = packing::plan_matvec(m, n_eff, N);
    Matrix<uint64_t> w(n_eff, m);
    for (auto& v : w.data) v = one_hot ? rng.below(p) : rng.below(16);
    std::vector<uint64_t> x(m, 0);
    if (one_hot) {
      x[rng.below(m)] = 1;
    } else {
      for (auto& v : x) v = rng.below(16);
    }
    auto chunks = packing::encode_input_vector(x, plan, p);
    std::vector<rlwe::PlaintextPoly> folded(plan.num_output_polys,
                                            rlwe::PlaintextPoly(plan.degree_n));
    for (size_t g = 0; g < plan.num_output_polys; ++g) {
      for (size_t c = 0; c < plan.num_input_polys; ++c) {
        auto block = packing::weight_block(w, plan, g, c);
        auto wpoly = packing::encode_weight_block(block, plan, p);
        auto prod = ring::negacyclic_mul_mod(chunks[c].coeffs, wpoly.coeffs, p_bits);
        for (size_t i = 0; i < prod.size(); ++i) folded[g][i] = (folded[g][i] + prod[i]) & (p - 1);
      }
    }
    return packing::extract_output(folded, plan) == packing::matvec_oracle(w, x, p);
  };

  Rng rng(5001);
  for (int t = 0; t < 500; ++t) {
    size_t m = 1 + rng.below(16);
    size_t n_eff = 1 + rng.below(8);
    size_t N = rng.coin() ? 16 : 32;
    if (!run_instance(m, n_eff, N, rng, false)) {
      detail = "random instance " + std::to_string(t) + " diverged from oracle";
      return false;
    }
  }
  // One-hot specialization at desk scale.
  Rng rng2(5002);
  for (int t = 0; t < 20; ++t) {
    if (!run_instance(512, 96, 1024, rng2, true)) {
      detail = "one-hot desk-scale instance diverged";
      return false;
    }
  }
  detail = "500 random + 20 one-hot desk-scale instances match the oracle";
  return true;
}

// --- C6: cost ladder -----------------------------------------------------------

bool cost_ladder(std::string& detail) {
  cost::CostReport report = cost::method_report(32000, 4096);
  if (report.rows.size() != 5) {
    detail = "expected five ladder rows";
    return false;
  }
  if (report.rows[0].total_bytes != report.rows[1].total_bytes) {
    detail = "baseline and +quant rows must cost the same";
    return false;
  }
  for (size_t i = 1; i < report.rows.size(); ++i) {
    if (report.rows[i].total_bytes > report.rows[i - 1].total_bytes) {
      detail = "ladder not monotone at row " + std::to_string(i);
      return false;
    }
  }
  double ratio = report.rows.back().reduction_vs_baseline;
  double baseline_mb = report.rows[0].total_mb;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "baseline %.3f MB, final %.3f MB, reduction %.1fx",
                baseline_mb, report.rows.back().total_mb, ratio);
  detail = buf;
  return ratio >= 20.0 && baseline_mb >= 15.933 / 4.0 && baseline_mb <= 15.933 * 4.0;
}

// --- C7: model vs measurement ---------------------------------------------------

bool model_vs_measurement(std::string& detail) {
  ring::RingParams params;
  proto::ProtocolConfig cfg;
  cfg.m = 8192;
  cfg.n = 384;
  cfg.params = params;
  cfg.seed = 7001;
  Rng table_rng(7002);
  Matrix<double> w = synth::gaussian_lognormal_channels(cfg.n, cfg.m, table_rng);
  quant::QuantConfig qc;
  qc.seed = 7003;
  auto q = quant::quantize_table(w, qc);
  auto table = proto::prepare_table(q, params.p_bits);
  auto run = proto::run_online_query(table, cfg, 4242);
  auto model = cost::model_implemented_run(cfg.m, table.packed.rows, params.degree_n,
                                           params.q_bits);
  auto validation = cost::validate_transcript(model, run.transcript);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "modeled %llu bits, measured %llu bits, rel err %.4f",
                static_cast<unsigned long long>(validation.modeled_bits),
                static_cast<unsigned long long>(validation.measured_bits),
                validation.rel_error);
  detail = buf;
  return validation.passed && validation.rel_error <= 0.15;
}

// --- C8: quantization orderings -------------------------------------------------

bool quantization_orderings(std::string& detail) {
  size_t wins = 0;
  double e433 = 0, e532 = 0, e622 = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 131);
    Matrix<double> w = synth::gaussian_lognormal_channels(96, 128, rng);
    auto freqs = synth::zipf_counts(128);
    auto err = [&](quant::Criterion crit, std::vector<uint32_t> combo,
                   const std::vector<double>* weights) {
      quant::QuantConfig qc;
      qc.criterion = crit;
      qc.bit_combo = std::move(combo);
      qc.seed = seed;
      auto q = quant::quantize_table(w, qc);
      return quant::reconstruction_error(w, q, weights);
    };
    double abs_err = err(quant::Criterion::AbsoluteValue, {4, 3, 3}, &freqs);
    double rnd_err = err(quant::Criterion::Random, {4, 3, 3}, &freqs);
    wins += (abs_err <= rnd_err);
    e433 += err(quant::Criterion::Random, {4, 3, 3}, nullptr);
    e532 += err(quant::Criterion::Random, {5, 3, 2}, nullptr);
    e622 += err(quant::Criterion::Random, {6, 2, 2}, nullptr);
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "absolute_value wins %zu/20; mean errors (4,3,3)=%.4g < (5,3,2)=%.4g < "
                "(6,2,2)=%.4g",
                wins, e433 / 20, e532 / 20, e622 / 20);
  detail = buf;
  return wins >= 18 && e433 < e532 && e532 < e622;
}

// --- C9: fine-tuning -------------------------------------------------------------

bool finetuning(std::string& detail) {
  // Gradient of the smooth surrogate vs central finite differences.
  {
    Rng rng(9001);
    Matrix<double> w = synth::gaussian_matrix(16, 8, rng);
    Matrix<double> qkv = synth::gaussian_matrix(8, 4, rng);
    auto freqs = synth::zipf_counts(16, 1.0, 100.0);
    finetune::TokenFrequency tf = finetune::build_freq_matrix(freqs, 40.0);
    std::vector<uint32_t> bits(8);
    for (size_t i = 0; i < 8; ++i) bits[i] = (i % 3 == 0) ? 4 : 3;
    finetune::Objective smooth(w, qkv, tf, bits, true, false);
    Matrix<double> w_cont = synth::gaussian_matrix(16, 8, rng);
    Matrix<double> g = smooth.gradient(w_cont);
    const double h = 1e-5;
    for (size_t t = 0; t < 16; ++t) {
      for (size_t c = 0; c < 8; ++c) {
        Matrix<double> up = w_cont, down = w_cont;
        up(t, c) += h;
        down(t, c) -= h;
        double fd = (smooth.loss(up) - smooth.loss(down)) / (2 * h);
        double denom = std::max({std::fabs(fd), std::fabs(g(t, c)), 1e-9});
        if (std::fabs(fd - g(t, c)) / denom > 1e-5) {
          detail = "finite-difference check failed at (" + std::to_string(t) + "," +
                   std::to_string(c) + ")";
          return false;
        }
      }
    }
  }

  // Default descent on the synthetic 256 x 64 x 32 instance.
  double improvement = 0;
  {
    Rng rng(9002);
    Matrix<double> w = synth::gaussian_lognormal_channels(64, 256, rng).transposed();
    Matrix<double> qkv = synth::gaussian_matrix(64, 32, rng, 1.0 / 8.0);
    auto freqs = synth::zipf_counts(256);
    double mean = 0;
    for (double f : freqs) mean += f;
    mean /= 256.0;
    for (double& f : freqs) f /= mean;
    finetune::FinetuneConfig cfg;  // defaults: lr 1e-3, 500 iterations
    auto result = finetune::finetune(w, qkv, freqs, cfg);
    improvement = result.best_loss / result.loss_history[0];
    if (!(result.best_loss <= 0.95 * result.loss_history[0])) {
      detail = "best loss only reached " + std::to_string(improvement) + " of initial";
      return false;
    }
  }

  // Loss invariance under the paired permutation, exact on integer data.
  {
    Rng rng(9003);
    size_t m = 8, n = 9, d3 = 4;
    Matrix<double> w(m, n), qkv(n, d3), w_cont(m, n);
    for (auto& v : w.data) v = static_cast<double>(static_cast<int64_t>(rng.below(15)) - 7);
    for (auto& v : qkv.data) v = static_cast<double>(static_cast<int64_t>(rng.below(7)) - 3);
    for (auto& v : w_cont.data) v = static_cast<double>(static_cast<int64_t>(rng.below(15)) - 7);
    std::vector<double> freqs{3, 1, 2, 1, 1, 2, 1, 1};
    finetune::TokenFrequency tf = finetune::build_freq_matrix(freqs, 2.0);
    std::vector<uint32_t> bits(n);
    for (size_t i = 0; i < n; ++i) bits[i] = (i % 3 == 0) ? 4 : 3;
    auto pi = quant::build_permutation(bits, {4, 3, 3});
    Matrix<double> w_p = quant::permute_rows(w.transposed(), pi).transposed();
    Matrix<double> wc_p = quant::permute_rows(w_cont.transposed(), pi).transposed();
    Matrix<double> qkv_p = quant::permute_rows(qkv, pi);
    std::vector<uint32_t> bits_p(n);
    for (size_t k = 0; k < n; ++k) bits_p[k] = bits[pi[k]];
    finetune::Objective obj(w, qkv, tf, bits, true, true);
    finetune::Objective obj_p(w_p, qkv_p, tf, bits_p, true, true);
    if (obj.loss(w_cont) != obj_p.loss(wc_p)) {
      detail = "loss changed under the paired permutation";
      return false;
    }
  }
  detail = "gradient matches finite differences; best/initial = " + std::to_string(improvement) +
           "; permutation invariance exact";
  return true;
}

// --- C10: baseline offline flow ---------------------------------------------------

bool baseline_flow(std::string& detail) {
  proto::BaselineConfig cfg;
  cfg.m = 64;
  cfg.n = 8;
  cfg.b_w = 4;
  Rng rng(10001);
  Matrix<int64_t> w(cfg.n, cfg.m);
  for (auto& v : w.data) v = static_cast<int64_t>(rng.below(16)) - 8;
  uint64_t offline = 0, online = 0;
  for (int t = 0; t < 100; ++t) {
    size_t token = rng.below(cfg.m);
    cfg.seed = 600 + t;
    auto run = proto::run_baseline_offline(w, cfg, token);
    for (size_t ch = 0; ch < cfg.n; ++ch) {
      if (proto::reconstruct_channel(run.result, ch) != w(ch, token)) {
        detail = "baseline reconstruction mismatch at run " + std::to_string(t);
        return false;
      }
    }
    auto phases = run.transcript.phase_bytes();
    if (!phases.count("offline") || !phases.count("online")) {
      detail = "transcript phases not tagged offline/online";
      return false;
    }
    offline = phases.at("offline");
    online = phases.at("online");
    if (offline <= online) {
      detail = "offline bytes not larger than online bytes";
      return false;
    }
  }
  detail = "100 runs exact; offline " + std::to_string(offline) + " B > online " +
           std::to_string(online) + " B";
  return true;
}

}  // namespace

int main() {
  std::vector<Check> checks = {
      {"C1 HE exactness (N=4096, q=2^48, p=2^13, 1000 pipelines)", he_exactness},
      {"C2 protocol exactness (8192x384 x200 tokens + full-scale smoke)", protocol_exactness},
      {"C3 slot packing bijection + no-carry masking (exhaustive)", slot_packing_exhaustive},
      {"C4 accumulation analyzer (p = 13 one-hot, 29 naive)", accumulation_analyzer},
      {"C5 coefficient packing equals brute-force oracle", coeff_packing_equivalence},
      {"C6 cost ladder monotone, baseline=+quant, reduction >= 20x", cost_ladder},
      {"C7 transcript within 15% of analytic model", model_vs_measurement},
      {"C8 quantization orderings (saliency + bit combos)", quantization_orderings},
      {"C9 fine-tuning gradient, descent, permutation invariance", finetuning},
      {"C10 baseline offline flow at reduced scale", baseline_flow},
  };

  int failures = 0;
  for (auto& check : checks) {
    std::string detail;
    bool ok = false;
    try {
      ok = check.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", check.name.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    failures += !ok;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  else std::printf("all %zu criteria passed\n", checks.size());
  return failures ? 1 : 0;
}
