#include "vareg/model/encoder.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vareg/common.hpp"
#include "vareg/kernels.hpp"

namespace vareg::model {

namespace ker = vareg::kernels;

Family family_from_string(const std::string& s) {
  if (s == "distilled-base") return Family::distilled_base;
  if (s == "base") return Family::base;
  if (s == "large") return Family::large;
  fail(Errc::config_error, "unknown model family '" + s + "'");
}

const char* family_to_string(Family f) {
  switch (f) {
    case Family::distilled_base: return "distilled-base";
    case Family::base: return "base";
    case Family::large: return "large";
  }
  return "?";
}

// ------------------------------------------------------------------
// ParamSet

Tensor& ParamSet::add(const std::string& name, int rows, int cols, bool decay) {
  index_[name] = tensors_.size();
  tensors_.push_back({name, Mat(rows, cols), decay});
  return tensors_.back();
}

Tensor& ParamSet::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) fail(Errc::config_error, "unknown tensor " + name);
  return tensors_[it->second];
}

const Tensor& ParamSet::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) fail(Errc::config_error, "unknown tensor " + name);
  return tensors_[it->second];
}

std::size_t ParamSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.value.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& t : tensors_)
    out.add(t.name, t.value.rows(), t.value.cols(), t.weight_decay);
  return out;
}

// ------------------------------------------------------------------
// Registry

const std::map<std::string, CheckpointInfo>& checkpoint_registry() {
  static const std::map<std::string, CheckpointInfo> registry = {
      // Desk-scale checkpoints: small architectures with deterministic
      // seeded initialization, fine-tuned from scratch in CI runs. The
      // hidden sizes stay wide enough for the pooled state to preserve
      // bag-of-words information at initialization.
      {"desk-distilled-base",
       {{256, 2, 4, 1024, 4096, 64}, Family::distilled_base, true}},
      {"desk-base", {{320, 3, 8, 1280, 8192, 64}, Family::base, true}},
      {"desk-large", {{384, 4, 8, 1536, 8192, 64}, Family::large, true}},
      // Full-scale published architectures; weights must be supplied by
      // the user as converted artifacts under $VAREG_CHECKPOINT_ROOT.
      {"distilbert-base-multilingual",
       {{768, 6, 12, 3072, 1 << 20, 128}, Family::distilled_base, false}},
      {"xlm-roberta-base", {{768, 12, 12, 3072, 1 << 20, 128}, Family::base, false}},
      {"xlm-roberta-large",
       {{1024, 24, 16, 4096, 1 << 20, 128}, Family::large, false}},
  };
  return registry;
}

std::string checkpoint_for_family(Family f, bool desk_scale) {
  if (desk_scale) {
    switch (f) {
      case Family::distilled_base: return "desk-distilled-base";
      case Family::base: return "desk-base";
      case Family::large: return "desk-large";
    }
  }
  switch (f) {
    case Family::distilled_base: return "distilbert-base-multilingual";
    case Family::base: return "xlm-roberta-base";
    case Family::large: return "xlm-roberta-large";
  }
  return "desk-distilled-base";
}

// ------------------------------------------------------------------
// Encoder lifecycle

Encoder::Encoder(const Encoder& other)
    : arch_(other.arch_),
      checkpoint_id_(other.checkpoint_id_),
      family_(other.family_),
      params_(other.params_),
      truncations_(other.truncations_.load()) {}

Encoder& Encoder::operator=(const Encoder& other) {
  if (this != &other) {
    arch_ = other.arch_;
    checkpoint_id_ = other.checkpoint_id_;
    family_ = other.family_;
    params_ = other.params_;
    truncations_.store(other.truncations_.load());
  }
  return *this;
}

Encoder::Encoder(Encoder&& other) noexcept
    : arch_(other.arch_),
      checkpoint_id_(std::move(other.checkpoint_id_)),
      family_(other.family_),
      params_(std::move(other.params_)),
      truncations_(other.truncations_.load()) {}

Encoder& Encoder::operator=(Encoder&& other) noexcept {
  arch_ = other.arch_;
  checkpoint_id_ = std::move(other.checkpoint_id_);
  family_ = other.family_;
  params_ = std::move(other.params_);
  truncations_.store(other.truncations_.load());
  return *this;
}

void Encoder::build_params() {
  const auto& a = arch_;
  params_ = ParamSet();
  params_.add("tok_embed", a.vocab_buckets, a.hidden, true);
  params_.add("pos_embed", a.max_sequence_length, a.hidden, true);
  for (int l = 0; l < a.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    params_.add(p + "ln1.gain", 1, a.hidden, false);
    params_.add(p + "ln1.bias", 1, a.hidden, false);
    params_.add(p + "attn.wq", a.hidden, a.hidden, true);
    params_.add(p + "attn.bq", 1, a.hidden, false);
    params_.add(p + "attn.wk", a.hidden, a.hidden, true);
    params_.add(p + "attn.bk", 1, a.hidden, false);
    params_.add(p + "attn.wv", a.hidden, a.hidden, true);
    params_.add(p + "attn.bv", 1, a.hidden, false);
    params_.add(p + "attn.wo", a.hidden, a.hidden, true);
    params_.add(p + "attn.bo", 1, a.hidden, false);
    params_.add(p + "ln2.gain", 1, a.hidden, false);
    params_.add(p + "ln2.bias", 1, a.hidden, false);
    params_.add(p + "ffn.w1", a.hidden, a.ffn_hidden, true);
    params_.add(p + "ffn.b1", 1, a.ffn_hidden, false);
    params_.add(p + "ffn.w2", a.ffn_hidden, a.hidden, true);
    params_.add(p + "ffn.b2", 1, a.hidden, false);
  }
  params_.add("final_ln.gain", 1, a.hidden, false);
  params_.add("final_ln.bias", 1, a.hidden, false);
}

void Encoder::init_weights(std::uint64_t seed) {
  // Fan-in scaled initialization. An untrained desk checkpoint has to
  // act as a usable random feature map: with unit-variance activations
  // through the value/output path, the pooled token carries first-order
  // word information instead of being swamped by its own constant
  // embedding.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  for (auto& t : params_.tensors()) {
    if (t.name.ends_with("gain")) {
      t.value.fill(1.0);
    } else if (t.name.ends_with("bias") || t.name.find(".b") != std::string::npos) {
      t.value.fill(0.0);
    } else if (t.name == "tok_embed") {
      for (auto& x : t.value.raw()) x = unit_normal(rng);
      // zero embedding for the pooling token: its residual stream then
      // carries only attention-gathered content at initialization
      for (int j = 0; j < t.value.cols(); ++j) t.value(0, j) = 0.0;
    } else if (t.name == "pos_embed") {
      for (auto& x : t.value.raw()) x = 0.05 * unit_normal(rng);
      for (int j = 0; j < t.value.cols(); ++j) t.value(0, j) = 0.0;
    } else {
      const double scale = 1.0 / std::sqrt(static_cast<double>(t.value.rows()));
      for (auto& x : t.value.raw()) x = scale * unit_normal(rng);
    }
  }
}

Encoder Encoder::from_checkpoint(const std::string& checkpoint_id) {
  const auto& registry = checkpoint_registry();
  const auto it = registry.find(checkpoint_id);
  if (it != registry.end()) {
    if (it->second.bundled_init) {
      Encoder enc;
      enc.arch_ = it->second.arch;
      enc.checkpoint_id_ = checkpoint_id;
      enc.family_ = it->second.family;
      enc.build_params();
      enc.init_weights(fnv1a64(checkpoint_id));
      return enc;
    }
    const char* root = std::getenv("VAREG_CHECKPOINT_ROOT");
    if (root == nullptr)
      fail(Errc::checkpoint_unavailable,
           checkpoint_id +
               " has no bundled weights; set VAREG_CHECKPOINT_ROOT to a "
               "directory holding <id>/encoder.bin");
    const auto file = std::filesystem::path(root) / checkpoint_id / "encoder.bin";
    if (!std::filesystem::exists(file))
      fail(Errc::checkpoint_unavailable, "no weights at " + file.string());
    Encoder enc = load(file);
    enc.checkpoint_id_ = checkpoint_id;
    enc.family_ = it->second.family;
    return enc;
  }
  const std::filesystem::path path(checkpoint_id);
  if (std::filesystem::exists(path)) return load(path);
  fail(Errc::checkpoint_unavailable,
       "'" + checkpoint_id + "' is neither a registered checkpoint nor a file");
}

EncoderSpec Encoder::spec() const {
  return {checkpoint_id_, arch_.hidden, arch_.max_sequence_length, family_};
}

Tokenization Encoder::tokenize_text(std::string_view text) const {
  auto tok = tokenize(text, arch_.vocab_buckets, arch_.max_sequence_length);
  if (tok.truncated) truncations_.fetch_add(1, std::memory_order_relaxed);
  return tok;
}

// ------------------------------------------------------------------
// Forward

namespace {

void slice_head(const Mat& src, Mat& dst, int head, int head_dim) {
  const int offset = head * head_dim;
  for (int t = 0; t < src.rows(); ++t)
    std::memcpy(dst.row(t), src.row(t) + offset, sizeof(double) * head_dim);
}

void unslice_head(const Mat& src, Mat& dst, int head, int head_dim) {
  const int offset = head * head_dim;
  for (int t = 0; t < src.rows(); ++t)
    std::memcpy(dst.row(t) + offset, src.row(t), sizeof(double) * head_dim);
}

}  // namespace

Encoder::Trace Encoder::forward(std::span<const int> ids) const {
  const auto& a = arch_;
  const int T = static_cast<int>(ids.size());
  if (T < 1) fail(Errc::tokenization_failure, "empty token sequence");
  const int H = a.hidden;
  const int D = H / a.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));

  Trace tr;
  tr.ids.assign(ids.begin(), ids.end());

  const Mat& tok = params_.get("tok_embed").value;
  const Mat& pos = params_.get("pos_embed").value;
  Mat x(T, H);
  for (int t = 0; t < T; ++t) {
    const double* te = tok.row(ids[t]);
    const double* pe = pos.row(t);
    double* xt = x.row(t);
    for (int j = 0; j < H; ++j) xt[j] = te[j] + pe[j];
  }

  tr.layers.resize(a.layers);
  for (int l = 0; l < a.layers; ++l) {
    auto& lt = tr.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    lt.x_in = x;

    // attention block, pre-norm
    lt.ln1_mean.resize(T);
    lt.ln1_rstd.resize(T);
    lt.xn1 = Mat(T, H);
    ker::layernorm_forward(lt.x_in.data(), params_.get(p + "ln1.gain").value.data(),
                           params_.get(p + "ln1.bias").value.data(), lt.xn1.data(),
                           lt.ln1_mean.data(), lt.ln1_rstd.data(), T, H);

    lt.q = Mat(T, H);
    lt.k = Mat(T, H);
    lt.v = Mat(T, H);
    ker::matmul_nn(lt.xn1.data(), params_.get(p + "attn.wq").value.data(),
                   lt.q.data(), T, H, H);
    ker::add_bias_rows(lt.q.data(), params_.get(p + "attn.bq").value.data(), T, H);
    ker::matmul_nn(lt.xn1.data(), params_.get(p + "attn.wk").value.data(),
                   lt.k.data(), T, H, H);
    ker::add_bias_rows(lt.k.data(), params_.get(p + "attn.bk").value.data(), T, H);
    ker::matmul_nn(lt.xn1.data(), params_.get(p + "attn.wv").value.data(),
                   lt.v.data(), T, H, H);
    ker::add_bias_rows(lt.v.data(), params_.get(p + "attn.bv").value.data(), T, H);

    lt.attn_probs.assign(a.heads, Mat(T, T));
    lt.heads_out = Mat(T, H);
    Mat qh(T, D), kh(T, D), vh(T, D), oh(T, D);
    for (int h = 0; h < a.heads; ++h) {
      slice_head(lt.q, qh, h, D);
      slice_head(lt.k, kh, h, D);
      slice_head(lt.v, vh, h, D);
      Mat& probs = lt.attn_probs[h];
      ker::matmul_nt(qh.data(), kh.data(), probs.data(), T, D, T);
      for (auto& s : probs.raw()) s *= scale;
      ker::softmax_rows(probs.data(), T, T);
      ker::matmul_nn(probs.data(), vh.data(), oh.data(), T, T, D);
      unslice_head(oh, lt.heads_out, h, D);
    }

    Mat attn_proj(T, H);
    ker::matmul_nn(lt.heads_out.data(), params_.get(p + "attn.wo").value.data(),
                   attn_proj.data(), T, H, H);
    ker::add_bias_rows(attn_proj.data(), params_.get(p + "attn.bo").value.data(),
                       T, H);

    lt.x_mid = Mat(T, H);
    for (std::size_t i = 0; i < lt.x_mid.size(); ++i)
      lt.x_mid.raw()[i] = lt.x_in.raw()[i] + attn_proj.raw()[i];

    // feed-forward block, pre-norm
    lt.ln2_mean.resize(T);
    lt.ln2_rstd.resize(T);
    lt.xn2 = Mat(T, H);
    ker::layernorm_forward(lt.x_mid.data(), params_.get(p + "ln2.gain").value.data(),
                           params_.get(p + "ln2.bias").value.data(), lt.xn2.data(),
                           lt.ln2_mean.data(), lt.ln2_rstd.data(), T, H);

    lt.ffn_pre = Mat(T, a.ffn_hidden);
    ker::matmul_nn(lt.xn2.data(), params_.get(p + "ffn.w1").value.data(),
                   lt.ffn_pre.data(), T, H, a.ffn_hidden);
    ker::add_bias_rows(lt.ffn_pre.data(), params_.get(p + "ffn.b1").value.data(), T,
                       a.ffn_hidden);
    lt.ffn_act = Mat(T, a.ffn_hidden);
    ker::gelu_forward(lt.ffn_pre.data(), lt.ffn_act.data(), lt.ffn_pre.size());

    Mat ffn_out(T, H);
    ker::matmul_nn(lt.ffn_act.data(), params_.get(p + "ffn.w2").value.data(),
                   ffn_out.data(), T, a.ffn_hidden, H);
    ker::add_bias_rows(ffn_out.data(), params_.get(p + "ffn.b2").value.data(), T, H);

    for (std::size_t i = 0; i < x.size(); ++i)
      x.raw()[i] = lt.x_mid.raw()[i] + ffn_out.raw()[i];
  }

  tr.x_final = x;
  tr.lnf_mean.resize(T);
  tr.lnf_rstd.resize(T);
  tr.encoded = Mat(T, H);
  ker::layernorm_forward(tr.x_final.data(), params_.get("final_ln.gain").value.data(),
                         params_.get("final_ln.bias").value.data(), tr.encoded.data(),
                         tr.lnf_mean.data(), tr.lnf_rstd.data(), T, H);
  return tr;
}

// ------------------------------------------------------------------
// Backward

void Encoder::backward(const Trace& tr, std::span<const double> dpooled,
                       ParamSet& grads) const {
  const auto& a = arch_;
  const int T = static_cast<int>(tr.ids.size());
  const int H = a.hidden;
  const int F = a.ffn_hidden;
  const int D = H / a.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));

  // Gradient enters through the pooled row of the final layer norm.
  Mat dencoded(T, H);
  for (int j = 0; j < H; ++j) dencoded(0, j) = dpooled[j];

  Mat dx(T, H);
  ker::layernorm_backward(tr.x_final.data(), params_.get("final_ln.gain").value.data(),
                          tr.lnf_mean.data(), tr.lnf_rstd.data(), dencoded.data(),
                          dx.data(), grads.get("final_ln.gain").value.data(),
                          grads.get("final_ln.bias").value.data(), T, H);

  Mat dffn_act(T, F), dffn_pre(T, F), dxn2(T, H), dxmid(T, H);
  Mat dheads(T, H), dq(T, H), dk(T, H), dv(T, H), dxn1(T, H), scratch(T, H);
  Mat qh(T, D), kh(T, D), vh(T, D), doh(T, D);
  Mat dph(T, T), dsh(T, T), dqh(T, D), dkh(T, D), dvh(T, D);

  for (int l = a.layers - 1; l >= 0; --l) {
    const auto& lt = tr.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";

    // ffn block: x_out = x_mid + gelu(xn2 W1 + b1) W2 + b2, dx = d x_out
    ker::matmul_tn_acc(lt.ffn_act.data(), dx.data(),
                       grads.get(p + "ffn.w2").value.data(), T, F, H);
    ker::col_sums_acc(dx.data(), grads.get(p + "ffn.b2").value.data(), T, H);
    ker::matmul_nt(dx.data(), params_.get(p + "ffn.w2").value.data(),
                   dffn_act.data(), T, H, F);
    ker::gelu_backward(lt.ffn_pre.data(), dffn_act.data(), dffn_pre.data(),
                       lt.ffn_pre.size());
    ker::matmul_tn_acc(lt.xn2.data(), dffn_pre.data(),
                       grads.get(p + "ffn.w1").value.data(), T, H, F);
    ker::col_sums_acc(dffn_pre.data(), grads.get(p + "ffn.b1").value.data(), T, F);
    ker::matmul_nt(dffn_pre.data(), params_.get(p + "ffn.w1").value.data(),
                   dxn2.data(), T, F, H);

    ker::layernorm_backward(lt.x_mid.data(), params_.get(p + "ln2.gain").value.data(),
                            lt.ln2_mean.data(), lt.ln2_rstd.data(), dxn2.data(),
                            dxmid.data(), grads.get(p + "ln2.gain").value.data(),
                            grads.get(p + "ln2.bias").value.data(), T, H);
    // residual around the ffn block
    ker::add_inplace(dxmid.data(), dx.data(), dxmid.size());

    // attention block: x_mid = x_in + (heads(xn1) Wo + bo), d attn_proj = dxmid
    ker::matmul_tn_acc(lt.heads_out.data(), dxmid.data(),
                       grads.get(p + "attn.wo").value.data(), T, H, H);
    ker::col_sums_acc(dxmid.data(), grads.get(p + "attn.bo").value.data(), T, H);
    ker::matmul_nt(dxmid.data(), params_.get(p + "attn.wo").value.data(),
                   dheads.data(), T, H, H);

    for (int h = 0; h < a.heads; ++h) {
      slice_head(lt.q, qh, h, D);
      slice_head(lt.k, kh, h, D);
      slice_head(lt.v, vh, h, D);
      slice_head(dheads, doh, h, D);
      const Mat& probs = lt.attn_probs[h];
      ker::matmul_nt(doh.data(), vh.data(), dph.data(), T, D, T);
      ker::matmul_tn(probs.data(), doh.data(), dvh.data(), T, T, D);
      ker::softmax_rows_backward(probs.data(), dph.data(), dsh.data(), T, T);
      for (auto& s : dsh.raw()) s *= scale;
      ker::matmul_nn(dsh.data(), kh.data(), dqh.data(), T, T, D);
      ker::matmul_tn(dsh.data(), qh.data(), dkh.data(), T, T, D);
      unslice_head(dqh, dq, h, D);
      unslice_head(dkh, dk, h, D);
      unslice_head(dvh, dv, h, D);
    }

    ker::matmul_tn_acc(lt.xn1.data(), dq.data(),
                       grads.get(p + "attn.wq").value.data(), T, H, H);
    ker::col_sums_acc(dq.data(), grads.get(p + "attn.bq").value.data(), T, H);
    ker::matmul_tn_acc(lt.xn1.data(), dk.data(),
                       grads.get(p + "attn.wk").value.data(), T, H, H);
    ker::col_sums_acc(dk.data(), grads.get(p + "attn.bk").value.data(), T, H);
    ker::matmul_tn_acc(lt.xn1.data(), dv.data(),
                       grads.get(p + "attn.wv").value.data(), T, H, H);
    ker::col_sums_acc(dv.data(), grads.get(p + "attn.bv").value.data(), T, H);

    ker::matmul_nt(dq.data(), params_.get(p + "attn.wq").value.data(), dxn1.data(),
                   T, H, H);
    ker::matmul_nt(dk.data(), params_.get(p + "attn.wk").value.data(),
                   scratch.data(), T, H, H);
    ker::add_inplace(dxn1.data(), scratch.data(), dxn1.size());
    ker::matmul_nt(dv.data(), params_.get(p + "attn.wv").value.data(),
                   scratch.data(), T, H, H);
    ker::add_inplace(dxn1.data(), scratch.data(), dxn1.size());

    ker::layernorm_backward(lt.x_in.data(), params_.get(p + "ln1.gain").value.data(),
                            lt.ln1_mean.data(), lt.ln1_rstd.data(), dxn1.data(),
                            dx.data(), grads.get(p + "ln1.gain").value.data(),
                            grads.get(p + "ln1.bias").value.data(), T, H);
    // residual around the attention block
    ker::add_inplace(dx.data(), dxmid.data(), dx.size());
  }

  // embeddings: x0[t] = tok_embed[id_t] + pos_embed[t]
  Mat& dtok = grads.get("tok_embed").value;
  Mat& dpos = grads.get("pos_embed").value;
  for (int t = 0; t < T; ++t) {
    const double* g = dx.row(t);
    double* tokrow = dtok.row(tr.ids[t]);
    double* posrow = dpos.row(t);
    for (int j = 0; j < H; ++j) {
      tokrow[j] += g[j];
      posrow[j] += g[j];
    }
  }
}

// ------------------------------------------------------------------
// Inference

Mat Encoder::encode_pool(std::span<const std::string> texts) const {
  if (texts.empty()) fail(Errc::empty_batch, "no texts to encode");
  Mat out(static_cast<int>(texts.size()), arch_.hidden);
  const bool parallel = ker::backend() == ker::Backend::openmp;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
  for (long long i = 0; i < static_cast<long long>(texts.size()); ++i) {
    const auto tok = tokenize_text(texts[i]);
    const Trace tr = forward(tok.ids);
    std::memcpy(out.row(static_cast<int>(i)), tr.encoded.row(0),
                sizeof(double) * arch_.hidden);
  }
  (void)parallel;
  return out;
}

// ------------------------------------------------------------------
// Serialization: magic, version, arch, id, tensors.

namespace {

constexpr char kMagic[8] = {'V', 'A', 'R', 'E', 'G', 'E', 'N', 'C'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
}

void write_string(std::ofstream& out, const std::string& s) {
  const std::uint32_t n = static_cast<std::uint32_t>(s.size());
  write_pod(out, n);
  out.write(s.data(), n);
}

std::string read_string(std::ifstream& in) {
  std::uint32_t n = 0;
  read_pod(in, n);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace

void Encoder::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(Errc::io_error, "cannot write " + file.string());
  out.write(kMagic, sizeof kMagic);
  write_pod(out, std::uint32_t{1});
  write_pod(out, arch_.hidden);
  write_pod(out, arch_.layers);
  write_pod(out, arch_.heads);
  write_pod(out, arch_.ffn_hidden);
  write_pod(out, arch_.vocab_buckets);
  write_pod(out, arch_.max_sequence_length);
  write_string(out, checkpoint_id_);
  write_string(out, family_to_string(family_));
  write_pod(out, static_cast<std::uint32_t>(params_.tensors().size()));
  for (const auto& t : params_.tensors()) {
    write_string(out, t.name);
    write_pod(out, t.value.rows());
    write_pod(out, t.value.cols());
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
  if (!out) fail(Errc::io_error, "short write to " + file.string());
}

Encoder Encoder::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(Errc::checkpoint_unavailable, "cannot open " + file.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    fail(Errc::checkpoint_unavailable, file.string() + " is not an encoder file");
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != 1)
    fail(Errc::checkpoint_unavailable, "unsupported encoder version");
  Encoder enc;
  read_pod(in, enc.arch_.hidden);
  read_pod(in, enc.arch_.layers);
  read_pod(in, enc.arch_.heads);
  read_pod(in, enc.arch_.ffn_hidden);
  read_pod(in, enc.arch_.vocab_buckets);
  read_pod(in, enc.arch_.max_sequence_length);
  enc.checkpoint_id_ = read_string(in);
  enc.family_ = family_from_string(read_string(in));
  enc.build_params();
  std::uint32_t count = 0;
  read_pod(in, count);
  if (count != enc.params_.tensors().size())
    fail(Errc::checkpoint_unavailable, "tensor count mismatch in " + file.string());
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(in);
    int rows = 0, cols = 0;
    read_pod(in, rows);
    read_pod(in, cols);
    Tensor& t = enc.params_.get(name);
    if (t.value.rows() != rows || t.value.cols() != cols)
      fail(Errc::checkpoint_unavailable, "tensor shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
  if (!in) fail(Errc::checkpoint_unavailable, "short read from " + file.string());
  return enc;
}

}  // namespace vareg::model
