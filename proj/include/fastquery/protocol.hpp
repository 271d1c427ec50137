#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fastquery/channel.hpp"
#include "fastquery/coeff_packing.hpp"
#include "fastquery/errors.hpp"
#include "fastquery/matrix.hpp"
#include "fastquery/quantizer.hpp"
#include "fastquery/rlwe.hpp"
#include "fastquery/rng.hpp"
#include "fastquery/slot_packing.hpp"
#include "fastquery/transcript.hpp"

namespace fastquery::proto {

inline uint32_t ceil_log2(uint64_t m) {
  uint32_t bits = 0;
  while ((uint64_t{1} << bits) < m) ++bits;
  return bits;
}

/// Accumulation bit-width of the query output: b_w + 1 when the query is
/// one-hot (a single nonzero equal to 1), otherwise the naive
/// b_x + b_w + ceil(log2 m) + 1 with the +1 reserving room for the additive
/// mask.
inline uint32_t required_plaintext_bits(bool one_hot, uint32_t b_w, uint32_t b_x, uint64_t m) {
  if (one_hot) return b_w + 1;
  return b_x + b_w + ceil_log2(m) + 1;
}

struct ProtocolConfig {
  size_t m = 32000;  ///< vocabulary size
  size_t n = 4096;   ///< embedding channels
  ring::RingParams params;
  std::vector<uint32_t> bit_combo = {4, 3, 3};
  uint32_t align_ell = 16;           ///< aligned share width
  uint32_t align_lambda_bits = 128;  ///< dealer charge: 2*ell + lambda bits per extension
  uint64_t seed = 0;

  nlohmann::json to_json() const {
    return nlohmann::json{{"m", m},
                          {"n", n},
                          {"degree_n", params.degree_n},
                          {"q_bits", params.q_bits},
                          {"p_bits", params.p_bits},
                          {"error_bound", params.error_bound},
                          {"bit_combo", bit_combo},
                          {"align_ell", align_ell},
                          {"align_lambda_bits", align_lambda_bits}};
  }
};

/// Server-side view of the table: packed coefficients in grouped channel
/// order, plus the per-channel metadata needed to undo the grouping.
struct PreparedTable {
  Matrix<uint64_t> packed;             ///< n_eff x m packed coefficients
  slots::SlotLayout layout;
  std::vector<uint32_t> grouped_bits;  ///< value bits per channel, grouped order
  size_t n = 0;                        ///< real channel count (rest is padding)
};

inline PreparedTable prepare_table(const quant::QuantizedTable& q, uint32_t p_bits) {
  PreparedTable t;
  t.layout = slots::make_layout(q.bit_combo, p_bits);
  Matrix<int64_t> values = quant::permute_rows(q.values, q.permutation);
  t.grouped_bits.resize(q.channel_bits.size());
  for (size_t k = 0; k < q.permutation.size(); ++k)
    t.grouped_bits[k] = q.channel_bits[q.permutation[k]];
  t.packed = slots::pack_table(values, t.grouped_bits, t.layout);
  t.n = values.rows;
  return t;
}

// --- party state machines ---------------------------------------------------

/// Client half of the online query: owns the secret key, encrypts the
/// one-hot query, decrypts responses, extracts slot shares.
class ClientSession {
 public:
  ClientSession(const ProtocolConfig& cfg, const slots::SlotLayout& layout,
                const packing::MatVecPlan& plan, rlwe::SecretKey sk)
      : cfg_(cfg), layout_(layout), plan_(plan), sk_(std::move(sk)) {}

  std::vector<Message> build_query(size_t token_id, Rng& rng) {
    if (token_id >= cfg_.m)
      throw DomainError("build_query: token " + std::to_string(token_id) + " out of range");
    std::vector<uint64_t> one_hot(cfg_.m, 0);
    one_hot[token_id] = 1;
    auto chunks = packing::encode_input_vector(one_hot, plan_, cfg_.params.p());
    std::vector<Message> msgs;
    msgs.reserve(chunks.size());
    for (size_t c = 0; c < chunks.size(); ++c) {
      rlwe::Ciphertext ct = rlwe::encrypt(chunks[c], sk_, rng);
      msgs.push_back(Message{MessageKind::QueryCiphertexts, static_cast<uint32_t>(c),
                             rlwe::serialize_ct(ct)});
    }
    return msgs;
  }

  /// Decrypt responses and slot-extract the client share of every channel.
  std::vector<uint64_t> finish(const std::vector<Message>& responses) {
    if (responses.size() != plan_.num_output_polys)
      throw ProtocolError("finish: expected " + std::to_string(plan_.num_output_polys) +
                          " response ciphertexts, got " + std::to_string(responses.size()));
    size_t s = layout_.num_slots();
    std::vector<uint64_t> shares(n_channels(), 0);
    for (const Message& msg : responses) {
      if (msg.kind != MessageKind::ResponseCiphertexts)
        throw ProtocolError("finish: unexpected message kind");
      rlwe::Ciphertext ct = rlwe::deserialize_ct(msg.payload, cfg_.params);
      rlwe::PlaintextPoly pt = rlwe::decrypt(ct, sk_);
      size_t g = msg.seq;
      if (g >= plan_.num_output_polys)
        throw ProtocolError("finish: response sequence " + std::to_string(g) + " out of range");
      for (size_t i = 0; i < plan_.rows_per_poly; ++i) {
        size_t col = g * plan_.rows_per_poly + i;
        if (col >= plan_.n_eff) break;
        uint64_t coeff = pt[plan_.extraction_index(i)];
        auto slot_shares = slots::extract_client_shares(coeff, layout_);
        for (size_t k = 0; k < s; ++k) {
          size_t ch = col * s + k;
          if (ch < n_channels()) shares[ch] = slot_shares[k];
        }
      }
    }
    return shares;
  }

  size_t n_channels() const { return cfg_.n; }

 private:
  ProtocolConfig cfg_;
  slots::SlotLayout layout_;
  packing::MatVecPlan plan_;
  rlwe::SecretKey sk_;
};

/// Server half: folds ciphertext-plaintext products over the input chunks,
/// masks every extraction coefficient with a fresh slot mask, fills the
/// remaining coefficients with uniform randomness, and keeps the mask values
/// as its own shares. Holds no key material.
class ServerSession {
 public:
  ServerSession(const PreparedTable& table, const ProtocolConfig& cfg,
                const packing::MatVecPlan& plan, Rng rng)
      : table_(table), cfg_(cfg), plan_(plan), rng_(std::move(rng)) {}

  std::vector<Message> eval(const std::vector<Message>& query) {
    if (query.size() != plan_.num_input_polys)
      throw ProtocolError("eval: expected " + std::to_string(plan_.num_input_polys) +
                          " query ciphertexts, got " + std::to_string(query.size()));
    std::vector<rlwe::Ciphertext> chunks;
    chunks.reserve(query.size());
    for (const Message& msg : query) {
      if (msg.kind != MessageKind::QueryCiphertexts)
        throw ProtocolError("eval: unexpected message kind");
      chunks.push_back(rlwe::deserialize_ct(msg.payload, cfg_.params));
    }
    uint64_t p = cfg_.params.p();
    size_t s = table_.layout.num_slots();
    shares_.assign(cfg_.n, 0);
    std::vector<Message> out;
    out.reserve(plan_.num_output_polys);
    for (size_t g = 0; g < plan_.num_output_polys; ++g) {
      rlwe::Ciphertext acc;
      for (size_t c = 0; c < plan_.num_input_polys; ++c) {
        Matrix<uint64_t> block = packing::weight_block(table_.packed, plan_, g, c);
        rlwe::PlaintextPoly wpoly = packing::encode_weight_block(block, plan_, p);
        rlwe::Ciphertext term = rlwe::ct_mul_pt(chunks[c], wpoly);
        acc = (c == 0) ? std::move(term) : rlwe::ct_add_ct(acc, term);
      }
      rlwe::PlaintextPoly mask_poly(cfg_.params.degree_n);
      for (size_t idx = 0; idx < mask_poly.size(); ++idx)
        mask_poly[idx] = rng_.bits(cfg_.params.p_bits);
      for (size_t i = 0; i < plan_.rows_per_poly; ++i) {
        size_t col = g * plan_.rows_per_poly + i;
        if (col >= plan_.n_eff) break;
        slots::SlotMask mask = slots::sample_slot_mask(table_.layout, rng_);
        mask_poly[plan_.extraction_index(i)] = mask.packed;
        for (size_t k = 0; k < s; ++k) {
          size_t ch = col * s + k;
          if (ch < cfg_.n) shares_[ch] = mask.per_slot[k];
        }
      }
      acc = rlwe::ct_add_pt(acc, mask_poly);
      out.push_back(Message{MessageKind::ResponseCiphertexts, static_cast<uint32_t>(g),
                            rlwe::serialize_ct(acc)});
    }
    return out;
  }

  const std::vector<uint64_t>& shares() const { return shares_; }

 private:
  const PreparedTable& table_;
  ProtocolConfig cfg_;
  packing::MatVecPlan plan_;
  Rng rng_;
  std::vector<uint64_t> shares_;
};

// --- bit-width alignment (trusted-dealer ideal functionality) ---------------

struct AlignedShares {
  std::vector<uint64_t> client;
  std::vector<uint64_t> server;
};

/// Re-share each channel value over Z_{2^ell}: the dealer reads both input
/// shares, recovers v, and hands back fresh additive shares
/// c' + r' = v (mod 2^ell) with c' uniform. Stands in for an OT-based
/// bit-width extension; its traffic is charged to the transcript separately.
inline AlignedShares align_bitwidth(const std::vector<uint64_t>& client_shares,
                                    const std::vector<uint64_t>& server_shares,
                                    const std::vector<uint32_t>& value_bits, uint32_t ell,
                                    Rng& rng) {
  if (client_shares.size() != server_shares.size() || client_shares.size() != value_bits.size())
    throw DimensionError("align_bitwidth: share vectors disagree");
  for (uint32_t b : value_bits)
    if (ell < b + 1)
      throw RangeError("align_bitwidth: target width " + std::to_string(ell) +
                       " smaller than slot width " + std::to_string(b + 1));
  if (ell > 63) throw RangeError("align_bitwidth: target width exceeds 63 bits");
  uint64_t mod_mask = (uint64_t{1} << ell) - 1;
  AlignedShares out;
  out.client.resize(client_shares.size());
  out.server.resize(client_shares.size());
  for (size_t i = 0; i < client_shares.size(); ++i) {
    int64_t v = slots::reconstruct(client_shares[i], server_shares[i], value_bits[i]);
    uint64_t v_mod = static_cast<uint64_t>(v) & mod_mask;  // two's-complement embedding
    uint64_t c = rng.bits(ell);
    out.client[i] = c;
    out.server[i] = (v_mod - c) & mod_mask;
  }
  return out;
}

namespace detail {

/// Log the dealer exchange for n_ext extensions. Requests carry the parties'
/// current shares; each response is sized so the alignment phase totals the
/// configured per-extension charge (default 2*ell + lambda bits), split
/// evenly between the two responses.
inline void log_alignment(Transcript& transcript, size_t n_ext, uint32_t max_slot_bits,
                          uint32_t ell, uint32_t lambda_bits, uint32_t& seq) {
  size_t old_share_bytes = n_ext * ((max_slot_bits + 7) / 8);
  uint64_t charge_bits = static_cast<uint64_t>(n_ext) * (2 * ell + lambda_bits);
  size_t response_bytes = static_cast<size_t>((charge_bits / 2 + 7) / 8);
  size_t new_share_bytes = n_ext * ((ell + 7) / 8);
  response_bytes = std::max(response_bytes, new_share_bytes);
  Message req{MessageKind::AlignRequest, 0, std::vector<uint8_t>(old_share_bytes)};
  req.seq = seq++;
  transcript.log(Direction::ClientToDealer, req, "alignment");
  req.seq = seq++;
  transcript.log(Direction::ServerToDealer, req, "alignment");
  Message resp{MessageKind::AlignResponse, 0, std::vector<uint8_t>(response_bytes)};
  resp.seq = seq++;
  transcript.log(Direction::DealerToClient, resp, "alignment");
  resp.seq = seq++;
  transcript.log(Direction::DealerToServer, resp, "alignment");
}

}  // namespace detail

// --- orchestration -----------------------------------------------------------

enum class ShareFlavor {
  MaskedOffset,  ///< online protocol: v = (c - r) - 2^(b-1), per slot
  AdditiveModP,  ///< baseline: v = center((c + r) mod p)
};

struct QueryResult {
  size_t token_id = 0;
  ShareFlavor flavor = ShareFlavor::MaskedOffset;
  std::vector<uint64_t> client_shares;
  std::vector<uint64_t> server_shares;
  std::vector<uint32_t> share_bits;  ///< value bits per channel (p_bits for baseline)
  std::vector<uint64_t> aligned_client;
  std::vector<uint64_t> aligned_server;
  uint32_t ell = 0;
};

/// Reconstruct channel `ch` from both sides of a result. Test harnesses only;
/// in deployment no single party holds both shares.
inline int64_t reconstruct_channel(const QueryResult& r, size_t ch) {
  if (r.flavor == ShareFlavor::MaskedOffset)
    return slots::reconstruct(r.client_shares[ch], r.server_shares[ch], r.share_bits[ch]);
  uint64_t p = uint64_t{1} << r.share_bits[ch];
  uint64_t v = (r.client_shares[ch] + r.server_shares[ch]) & (p - 1);
  return (v >= p / 2) ? static_cast<int64_t>(v) - static_cast<int64_t>(p)
                      : static_cast<int64_t>(v);
}

struct OnlineRun {
  QueryResult result;
  Transcript transcript;
};

inline slots::SlotLayout layout_for(const ProtocolConfig& cfg) {
  return slots::make_layout(cfg.bit_combo, cfg.params.p_bits);
}

inline packing::MatVecPlan plan_for(const ProtocolConfig& cfg, const PreparedTable& table) {
  return packing::plan_matvec(cfg.m, table.packed.rows, cfg.params.degree_n);
}

/// Drive one online query end to end over an in-process duplex channel.
inline OnlineRun run_online_query(const PreparedTable& table, const ProtocolConfig& cfg,
                                  size_t token_id) {
  cfg.params.validate();
  if (table.packed.cols != cfg.m)
    throw DimensionError("run_online_query: table columns != m");
  if (table.n != cfg.n) throw DimensionError("run_online_query: table channels != n");
  if (!(table.layout == layout_for(cfg)))
    throw ConfigError("run_online_query: table layout does not match config");
  packing::MatVecPlan plan = plan_for(cfg, table);

  Rng base(cfg.seed);
  Rng client_rng = base.fork(0x434c49454e54ULL);
  Rng server_rng = base.fork(0x534552564552ULL);
  Rng dealer_rng = base.fork(0x4445414c4552ULL);
  Rng key_rng = base.fork(0x4b4559ULL);

  rlwe::SecretKey sk = rlwe::keygen(cfg.params, key_rng);
  ClientSession client(cfg, table.layout, plan, sk);
  ServerSession server(table, cfg, plan, std::move(server_rng));

  DuplexPipe pipe;
  Channel& to_server = pipe.end_a();
  Channel& at_server = pipe.end_b();
  Transcript transcript;
  uint32_t align_seq = 0;

  // Session config travels first so the server can sanity-check dimensions.
  std::string cfg_json = cfg.to_json().dump();
  Message config_msg{MessageKind::Config, 0,
                     std::vector<uint8_t>(cfg_json.begin(), cfg_json.end())};
  to_server.send(config_msg);
  transcript.log(Direction::ClientToServer, config_msg, "config");
  {
    Message got = at_server.recv();
    auto parsed = nlohmann::json::parse(std::string(got.payload.begin(), got.payload.end()));
    if (parsed != cfg.to_json()) throw ProtocolError("config mismatch between parties");
  }

  std::vector<Message> query = client.build_query(token_id, client_rng);
  for (const Message& msg : query) {
    to_server.send(msg);
    transcript.log(Direction::ClientToServer, msg, "query");
  }
  std::vector<Message> received_query;
  received_query.reserve(plan.num_input_polys);
  for (size_t i = 0; i < plan.num_input_polys; ++i) received_query.push_back(at_server.recv());

  std::vector<Message> responses = server.eval(received_query);
  for (const Message& msg : responses) {
    at_server.send(msg);
    transcript.log(Direction::ServerToClient, msg, "response");
  }
  std::vector<Message> received_responses;
  received_responses.reserve(plan.num_output_polys);
  for (size_t g = 0; g < plan.num_output_polys; ++g)
    received_responses.push_back(to_server.recv());

  QueryResult result;
  result.token_id = token_id;
  result.flavor = ShareFlavor::MaskedOffset;
  result.client_shares = client.finish(received_responses);
  result.server_shares = server.shares();
  result.share_bits.assign(table.grouped_bits.begin(), table.grouped_bits.begin() + cfg.n);
  result.ell = cfg.align_ell;

  AlignedShares aligned = align_bitwidth(result.client_shares, result.server_shares,
                                         result.share_bits, cfg.align_ell, dealer_rng);
  uint32_t max_slot = 0;
  for (uint32_t b : result.share_bits) max_slot = std::max(max_slot, b + 1);
  detail::log_alignment(transcript, cfg.n, max_slot, cfg.align_ell, cfg.align_lambda_bits,
                        align_seq);
  result.aligned_client = std::move(aligned.client);
  result.aligned_server = std::move(aligned.server);

  return OnlineRun{std::move(result), std::move(transcript)};
}

#ifdef FASTQUERY_HAVE_SOCKETS
/// Same protocol over a loopback TCP socket; the frames, and therefore the
/// transcript, are identical to the in-process run. The alignment dealer
/// stays an in-process ideal functionality in both transports.
inline OnlineRun run_online_query_socket(const PreparedTable& table, const ProtocolConfig& cfg,
                                         size_t token_id) {
  cfg.params.validate();
  // Validate up front: a client-side throw before connect() would leave the
  // server thread parked in accept().
  if (token_id >= cfg.m) throw DomainError("run_online_query_socket: token out of range");
  if (table.packed.cols != cfg.m || table.n != cfg.n)
    throw DimensionError("run_online_query_socket: table does not match config");
  packing::MatVecPlan plan = plan_for(cfg, table);

  Rng base(cfg.seed);
  Rng client_rng = base.fork(0x434c49454e54ULL);
  Rng server_rng = base.fork(0x534552564552ULL);
  Rng dealer_rng = base.fork(0x4445414c4552ULL);
  Rng key_rng = base.fork(0x4b4559ULL);

  rlwe::SecretKey sk = rlwe::keygen(cfg.params, key_rng);
  ClientSession client(cfg, table.layout, plan, sk);
  ServerSession server(table, cfg, plan, std::move(server_rng));

  LoopbackListener listener;
  std::exception_ptr server_error;
  std::thread server_thread([&] {
    try {
      auto chan = listener.accept();
      Message got = chan->recv();
      auto parsed = nlohmann::json::parse(std::string(got.payload.begin(), got.payload.end()));
      if (parsed != cfg.to_json()) throw ProtocolError("config mismatch between parties");
      std::vector<Message> query;
      query.reserve(plan.num_input_polys);
      for (size_t i = 0; i < plan.num_input_polys; ++i) query.push_back(chan->recv());
      for (const Message& msg : server.eval(query)) chan->send(msg);
    } catch (...) {
      server_error = std::current_exception();
    }
  });

  Transcript transcript;
  QueryResult result;
  try {
    auto chan = LoopbackListener::connect(listener.port());
    std::string cfg_json = cfg.to_json().dump();
    Message config_msg{MessageKind::Config, 0,
                       std::vector<uint8_t>(cfg_json.begin(), cfg_json.end())};
    chan->send(config_msg);
    transcript.log(Direction::ClientToServer, config_msg, "config");
    for (const Message& msg : client.build_query(token_id, client_rng)) {
      chan->send(msg);
      transcript.log(Direction::ClientToServer, msg, "query");
    }
    std::vector<Message> responses;
    responses.reserve(plan.num_output_polys);
    for (size_t g = 0; g < plan.num_output_polys; ++g) {
      responses.push_back(chan->recv());
      transcript.log(Direction::ServerToClient, responses.back(), "response");
    }
    result.client_shares = client.finish(responses);
  } catch (...) {
    server_thread.join();
    throw;
  }
  server_thread.join();
  if (server_error) std::rethrow_exception(server_error);

  result.token_id = token_id;
  result.flavor = ShareFlavor::MaskedOffset;
  result.server_shares = server.shares();
  result.share_bits.assign(table.grouped_bits.begin(), table.grouped_bits.begin() + cfg.n);
  result.ell = cfg.align_ell;
  AlignedShares aligned = align_bitwidth(result.client_shares, result.server_shares,
                                         result.share_bits, cfg.align_ell, dealer_rng);
  uint32_t max_slot = 0;
  for (uint32_t b : result.share_bits) max_slot = std::max(max_slot, b + 1);
  uint32_t align_seq = 0;
  detail::log_alignment(transcript, cfg.n, max_slot, cfg.align_ell, cfg.align_lambda_bits,
                        align_seq);
  result.aligned_client = std::move(aligned.client);
  result.aligned_server = std::move(aligned.server);
  return OnlineRun{std::move(result), std::move(transcript)};
}
#endif  // FASTQUERY_HAVE_SOCKETS

// --- baseline offline protocol (reduced scale) -------------------------------

struct BaselineConfig {
  size_t m = 64;
  size_t n = 8;
  uint32_t b_w = 4;
  uint32_t degree_n = 4096;
  uint32_t q_bits = 48;
  uint32_t error_bound = 8;
  uint64_t seed = 0;
};

inline constexpr size_t kBaselineMaxVocab = 256;
inline constexpr uint32_t kBaselineMaxWeightBits = 4;

/// Two-stage flow: offline Enc(R) -> Enc(WR) - S -> client decrypts WR - S;
/// online the client reveals X - R and the server finishes W(X-R) + S in the
/// clear. Only supported at a scale where the naive accumulation width fits
/// the parameter envelope.
inline OnlineRun run_baseline_offline(const Matrix<int64_t>& w_q, const BaselineConfig& cfg,
                                      size_t token_id) {
  if (cfg.m > kBaselineMaxVocab || cfg.b_w > kBaselineMaxWeightBits)
    throw UnsupportedScaleError(
        "baseline flow supports m <= " + std::to_string(kBaselineMaxVocab) + " and b_w <= " +
        std::to_string(kBaselineMaxWeightBits) + "; use the cost model for full-scale numbers");
  uint32_t p_bits = std::max<uint32_t>(13, required_plaintext_bits(false, cfg.b_w, 1, cfg.m));
  if (p_bits > 20) throw UnsupportedScaleError("baseline flow: naive plaintext width too large");
  ring::RingParams params{cfg.degree_n, cfg.q_bits, p_bits, cfg.error_bound};
  params.validate();
  if (w_q.rows != cfg.n || w_q.cols != cfg.m)
    throw DimensionError("run_baseline_offline: table must be n x m");
  if (token_id >= cfg.m) throw DomainError("run_baseline_offline: token out of range");
  int64_t lim = int64_t{1} << (cfg.b_w - 1);
  for (int64_t v : w_q.data)
    if (v < -lim || v >= lim) throw RangeError("run_baseline_offline: entry exceeds b_w bits");

  uint64_t p = params.p();
  Matrix<uint64_t> table_modp(w_q.rows, w_q.cols);
  for (size_t i = 0; i < w_q.data.size(); ++i)
    table_modp.data[i] = static_cast<uint64_t>(w_q.data[i]) & (p - 1);

  packing::MatVecPlan plan = packing::plan_matvec(cfg.m, cfg.n, params.degree_n);
  Rng base(cfg.seed);
  Rng client_rng = base.fork(0x434c49454e54ULL);
  Rng server_rng = base.fork(0x534552564552ULL);
  Rng key_rng = base.fork(0x4b4559ULL);
  rlwe::SecretKey sk = rlwe::keygen(params, key_rng);

  DuplexPipe pipe;
  Channel& at_client = pipe.end_a();
  Channel& at_server = pipe.end_b();
  Transcript transcript;

  // Offline: Enc(R) over, Enc(WR) - S back.
  std::vector<uint64_t> r_vec(cfg.m);
  for (auto& r : r_vec) r = client_rng.bits(params.p_bits);
  auto r_chunks = packing::encode_input_vector(r_vec, plan, p);
  for (size_t c = 0; c < r_chunks.size(); ++c) {
    Message msg{MessageKind::QueryCiphertexts, static_cast<uint32_t>(c),
                rlwe::serialize_ct(rlwe::encrypt(r_chunks[c], sk, client_rng))};
    at_client.send(msg);
    transcript.log(Direction::ClientToServer, msg, "offline");
  }

  std::vector<uint64_t> server_mask(cfg.n, 0);
  {
    std::vector<rlwe::Ciphertext> chunks;
    for (size_t c = 0; c < plan.num_input_polys; ++c)
      chunks.push_back(rlwe::deserialize_ct(at_server.recv().payload, params));
    for (size_t g = 0; g < plan.num_output_polys; ++g) {
      rlwe::Ciphertext acc;
      for (size_t c = 0; c < plan.num_input_polys; ++c) {
        auto block = packing::weight_block(table_modp, plan, g, c);
        auto wpoly = packing::encode_weight_block(block, plan, p);
        rlwe::Ciphertext term = rlwe::ct_mul_pt(chunks[c], wpoly);
        acc = (c == 0) ? std::move(term) : rlwe::ct_add_ct(acc, term);
      }
      rlwe::PlaintextPoly s_poly(params.degree_n);
      for (size_t idx = 0; idx < s_poly.size(); ++idx) s_poly[idx] = server_rng.bits(params.p_bits);
      for (size_t i = 0; i < plan.rows_per_poly; ++i) {
        size_t col = g * plan.rows_per_poly + i;
        if (col >= plan.n_eff) break;
        server_mask[col] = s_poly[plan.extraction_index(i)];
      }
      acc = rlwe::ct_sub_pt(acc, s_poly);
      Message msg{MessageKind::ResponseCiphertexts, static_cast<uint32_t>(g),
                  rlwe::serialize_ct(acc)};
      at_server.send(msg);
      transcript.log(Direction::ServerToClient, msg, "offline");
    }
  }

  std::vector<uint64_t> client_share(cfg.n, 0);
  {
    std::vector<rlwe::PlaintextPoly> polys;
    for (size_t g = 0; g < plan.num_output_polys; ++g)
      polys.push_back(rlwe::decrypt(rlwe::deserialize_ct(at_client.recv().payload, params), sk));
    auto extracted = packing::extract_output(polys, plan);
    for (size_t col = 0; col < cfg.n; ++col) client_share[col] = extracted[col];
  }

  // Online: X - R in the clear, exactly m plaintext residues.
  {
    std::vector<uint8_t> payload;
    rlwe::detail::BitWriter bw(payload);
    for (size_t j = 0; j < cfg.m; ++j) {
      uint64_t xj = (j == token_id) ? 1 : 0;
      bw.put((xj - r_vec[j]) & (p - 1), params.p_bits);
    }
    payload.resize((cfg.m * params.p_bits + 7) / 8, 0);
    Message msg{MessageKind::ShareSync, 0, std::move(payload)};
    at_client.send(msg);
    transcript.log(Direction::ClientToServer, msg, "online");
  }

  std::vector<uint64_t> server_share(cfg.n, 0);
  {
    Message msg = at_server.recv();
    rlwe::detail::BitReader br(msg.payload.data(), msg.payload.size());
    std::vector<uint64_t> d(cfg.m);
    for (size_t j = 0; j < cfg.m; ++j) d[j] = br.get(params.p_bits);
    for (size_t i = 0; i < cfg.n; ++i) {
      uint64_t acc = 0;
      for (size_t j = 0; j < cfg.m; ++j) acc = (acc + table_modp(i, j) * d[j]) % p;
      server_share[i] = (acc + server_mask[i]) & (p - 1);
    }
  }

  QueryResult result;
  result.token_id = token_id;
  result.flavor = ShareFlavor::AdditiveModP;
  result.client_shares = std::move(client_share);
  result.server_shares = std::move(server_share);
  result.share_bits.assign(cfg.n, params.p_bits);
  return OnlineRun{std::move(result), std::move(transcript)};
}

}  // namespace fastquery::proto
