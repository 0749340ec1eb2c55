#include "icdiff/hollow.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace icdiff {

void HollowDims::validate() const {
  if (layers < 1 || mix_every < 1 || embed < 1 || heads < 1 || max_len < 1)
    throw Error(ErrorKind::config, "hollow dims must be positive");
  if (vocab < 2) throw Error(ErrorKind::config, "vocabulary size must be >= 2");
  if (embed % heads != 0) throw Error(ErrorKind::config, "embedding width must be divisible by head count");
}

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr char kHeader[] = "icdiff-hollow-params v1";

void visit_block(const std::string& prefix, BlockParams& b, const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".ln1.gain", b.ln1_gain);
  fn(prefix + ".ln1.bias", b.ln1_bias);
  fn(prefix + ".attn.wq", b.wq);
  fn(prefix + ".attn.wk", b.wk);
  fn(prefix + ".attn.wv", b.wv);
  fn(prefix + ".attn.wo", b.wo);
  fn(prefix + ".ln2.gain", b.ln2_gain);
  fn(prefix + ".ln2.bias", b.ln2_bias);
  fn(prefix + ".ff1.weight", b.ff1);
  fn(prefix + ".ff1.bias", b.ff1_bias);
  fn(prefix + ".ff2.weight", b.ff2);
  fn(prefix + ".ff2.bias", b.ff2_bias);
}

BlockParams make_block(std::size_t width, std::size_t kv_width, Rng& rng) {
  auto dense = [&](std::size_t in, std::size_t out) {
    Tensor t(in, out);
    std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    for (double& v : t.data) v = n(rng);
    return t;
  };
  BlockParams b;
  b.ln1_gain = Tensor(1, width, 1.0);
  b.ln1_bias = Tensor(1, width, 0.0);
  b.wq = dense(width, width);
  b.wk = dense(kv_width, width);
  b.wv = dense(kv_width, width);
  b.wo = dense(width, width);
  b.ln2_gain = Tensor(1, width, 1.0);
  b.ln2_bias = Tensor(1, width, 0.0);
  b.ff1 = dense(width, 4 * width);
  b.ff1_bias = Tensor(1, 4 * width, 0.0);
  b.ff2 = dense(4 * width, width);
  b.ff2_bias = Tensor(1, width, 0.0);
  return b;
}

// ---- kernels (explicit loops, fixed summation order) ----

void layer_norm_row(const double* in, double* out, std::size_t w, const Tensor& gain, const Tensor& bias) {
  double mean = 0.0;
  for (std::size_t i = 0; i < w; ++i) mean += in[i];
  mean /= static_cast<double>(w);
  double var = 0.0;
  for (std::size_t i = 0; i < w; ++i) var += (in[i] - mean) * (in[i] - mean);
  var /= static_cast<double>(w);
  const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < w; ++i) out[i] = (in[i] - mean) * inv * gain.data[i] + bias.data[i];
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  Tensor y(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) layer_norm_row(&x.data[r * x.cols], &y.data[r * x.cols], x.cols, gain, bias);
  return y;
}

// y = x * w (+ bias); x: n x in, w: in x out
Tensor matmul(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr) {
  Tensor y(x.rows, w.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    double* yr = &y.data[r * w.cols];
    if (bias) std::copy(bias->data.begin(), bias->data.end(), yr);
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xv = x.data[r * x.cols + k];
      const double* wr = &w.data[k * w.cols];
      for (std::size_t c = 0; c < w.cols; ++c) yr[c] += xv * wr[c];
    }
  }
  return y;
}

double gelu(double v) {
  const double c = std::sqrt(2.0 / std::numbers::pi);
  return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
}

Tensor feed_forward(const Tensor& x, const BlockParams& b) {
  Tensor h = matmul(x, b.ff1, &b.ff1_bias);
  for (double& v : h.data) v = gelu(v);
  return matmul(h, b.ff2, &b.ff2_bias);
}

void add_inplace(Tensor& a, const Tensor& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

// Multi-head attention. Query row d attends to the key/value rows listed by
// allowed(d) in the order given.
template <typename AllowedFn>
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, AllowedFn allowed) {
  const std::size_t width = q.cols;
  const std::size_t hd = width / static_cast<std::size_t>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Tensor out(q.rows, width);
  std::vector<std::size_t> keys;
  std::vector<double> w;
  for (std::size_t d = 0; d < q.rows; ++d) {
    allowed(d, keys);
    w.resize(keys.size());
    for (std::size_t h = 0; h < static_cast<std::size_t>(heads); ++h) {
      const std::size_t off = h * hd;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < keys.size(); ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += q(d, off + c) * k(keys[j], off + c);
        w[j] = s * scale;
        mx = std::max(mx, w[j]);
      }
      double z = 0.0;
      for (double& x : w) {
        x = std::exp(x - mx);
        z += x;
      }
      for (std::size_t j = 0; j < keys.size(); ++j) {
        const double a = w[j] / z;
        for (std::size_t c = 0; c < hd; ++c) out(d, off + c) += a * v(keys[j], off + c);
      }
    }
  }
  return out;
}

// One content layer, causal in the given direction.
Tensor content_layer(const Tensor& x, const BlockParams& b, int heads, bool forward) {
  const std::size_t n = x.rows;
  Tensor h = layer_norm(x, b.ln1_gain, b.ln1_bias);
  const Tensor q = matmul(h, b.wq), k = matmul(h, b.wk), v = matmul(h, b.wv);
  const Tensor a = attention(q, k, v, heads, [&](std::size_t d, std::vector<std::size_t>& keys) {
    keys.clear();
    if (forward) {
      for (std::size_t j = 0; j <= d; ++j) keys.push_back(j);
    } else {
      for (std::size_t j = d; j < n; ++j) keys.push_back(j);
    }
  });
  Tensor y = x;
  add_inplace(y, matmul(a, b.wo));
  add_inplace(y, feed_forward(layer_norm(y, b.ln2_gain, b.ln2_bias), b));
  return y;
}

// Mixing layer: queries h^d = M^d + [F^d, B^d]; key/value set for row d is
// F^{<=d} (embedded as [F, 0]) followed by B^{>=d} (embedded as [0, B]).
Tensor mixing_layer(const Tensor& m, const Tensor& f, const Tensor& bw, const MixingParams& mp, int heads) {
  const std::size_t n = m.rows, e = f.cols, w = m.cols;
  const BlockParams& b = mp.block;

  Tensor h = m;
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t c = 0; c < e; ++c) {
      h(d, c) += f(d, c);
      h(d, e + c) += bw(d, c);
    }
  }
  const Tensor q = matmul(layer_norm(h, b.ln1_gain, b.ln1_bias), b.wq);

  // Rows [0, n) are forward tokens, rows [n, 2n) backward tokens.
  Tensor kv(2 * n, w);
  const Tensor fn = layer_norm(f, mp.kv_ln_gain, mp.kv_ln_bias);
  const Tensor bn = layer_norm(bw, mp.kv_ln_gain, mp.kv_ln_bias);
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t c = 0; c < e; ++c) {
      kv(d, c) = fn(d, c);
      kv(n + d, e + c) = bn(d, c);
    }
  }
  const Tensor k = matmul(kv, b.wk), v = matmul(kv, b.wv);
  const Tensor a = attention(q, k, v, heads, [&](std::size_t d, std::vector<std::size_t>& keys) {
    keys.clear();
    for (std::size_t j = 0; j <= d; ++j) keys.push_back(j);
    for (std::size_t j = d; j < n; ++j) keys.push_back(n + j);
  });
  Tensor y = h;
  add_inplace(y, matmul(a, b.wo));
  add_inplace(y, feed_forward(layer_norm(y, b.ln2_gain, b.ln2_bias), b));
  return y;
}

void check_input(const HollowNetParams& p, const SequenceState& x) {
  if (x.spec().vocab != p.dims.vocab) throw Error(ErrorKind::shape, "input vocabulary does not match parameters");
  if (x.size() > static_cast<std::size_t>(p.dims.max_len))
    throw Error(ErrorKind::shape, "sequence longer than the configured maximum context");
}

// Initial shifted embeddings; returns {F_1, B_1}.
std::pair<Tensor, Tensor> initial_streams(const HollowNetParams& p, const SequenceState& x) {
  const std::size_t n = x.size(), e = static_cast<std::size_t>(p.dims.embed);
  const auto pad = static_cast<std::size_t>(p.dims.vocab + 1);
  Tensor f(n, e), b(n, e);
  for (std::size_t d = 0; d < n; ++d) {
    const std::size_t left = d == 0 ? pad : static_cast<std::size_t>(x[d - 1]);
    const std::size_t right = d + 1 == n ? pad : static_cast<std::size_t>(x[d + 1]);
    for (std::size_t c = 0; c < e; ++c) {
      f(d, c) = p.token_embed(left, c) + p.pos_embed(d, c);
      b(d, c) = p.token_embed(right, c) + p.pos_embed(d, c);
    }
  }
  return {std::move(f), std::move(b)};
}

}  // namespace

void HollowNetParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("token_embed", token_embed);
  fn("pos_embed", pos_embed);
  for (std::size_t l = 0; l < content.size(); ++l) visit_block("content." + std::to_string(l), content[l], fn);
  for (std::size_t k = 0; k < mixing.size(); ++k) {
    const std::string prefix = "mixing." + std::to_string(k);
    visit_block(prefix, mixing[k].block, fn);
    fn(prefix + ".kv_ln.gain", mixing[k].kv_ln_gain);
    fn(prefix + ".kv_ln.bias", mixing[k].kv_ln_bias);
  }
  fn("out_ln.gain", out_ln_gain);
  fn("out_ln.bias", out_ln_bias);
  fn("out.weight", out_proj);
  fn("out.bias", out_bias);
}

void HollowNetParams::for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<HollowNetParams*>(this)->for_each(
      [&](const std::string& name, Tensor& t) { fn(name, static_cast<const Tensor&>(t)); });
}

bool operator==(const HollowNetParams& a, const HollowNetParams& b) {
  const auto& da = a.dims;
  const auto& db = b.dims;
  return da.layers == db.layers && da.mix_every == db.mix_every && da.embed == db.embed &&
         da.heads == db.heads && da.vocab == db.vocab && da.max_len == db.max_len &&
         a.token_embed == b.token_embed && a.pos_embed == b.pos_embed && a.content == b.content &&
         a.mixing == b.mixing && a.out_ln_gain == b.out_ln_gain && a.out_ln_bias == b.out_ln_bias &&
         a.out_proj == b.out_proj && a.out_bias == b.out_bias;
}

HollowNetParams init_hollow(std::uint64_t seed, const HollowDims& dims) {
  dims.validate();
  Rng rng(seed);
  const auto e = static_cast<std::size_t>(dims.embed);
  const auto s = static_cast<std::size_t>(dims.vocab);
  HollowNetParams p;
  p.dims = dims;

  std::normal_distribution<double> emb(0.0, 1.0);
  p.token_embed = Tensor(s + 2, e);
  for (double& v : p.token_embed.data) v = emb(rng);
  p.pos_embed = Tensor(static_cast<std::size_t>(dims.max_len), e);
  std::normal_distribution<double> pos(0.0, 0.1);
  for (double& v : p.pos_embed.data) v = pos(rng);

  for (int l = 0; l < dims.layers; ++l) p.content.push_back(make_block(e, e, rng));
  for (int k = 0; k < dims.mixing_layers(); ++k) {
    MixingParams mp;
    mp.block = make_block(2 * e, 2 * e, rng);
    mp.kv_ln_gain = Tensor(1, e, 1.0);
    mp.kv_ln_bias = Tensor(1, e, 0.0);
    p.mixing.push_back(std::move(mp));
  }
  p.out_ln_gain = Tensor(1, 2 * e, 1.0);
  p.out_ln_bias = Tensor(1, 2 * e, 0.0);
  p.out_proj = Tensor(2 * e, s);
  std::normal_distribution<double> out(0.0, 1.0 / std::sqrt(static_cast<double>(2 * e)));
  for (double& v : p.out_proj.data) v = out(rng);
  p.out_bias = Tensor(1, s, 0.0);
  return p;
}

ContentStreams hollow_content_streams(const HollowNetParams& params, const SequenceState& x) {
  check_input(params, x);
  auto [f, b] = initial_streams(params, x);
  for (const BlockParams& layer : params.content) {
    f = content_layer(f, layer, params.dims.heads, true);
    b = content_layer(b, layer, params.dims.heads, false);
  }
  return {std::move(f), std::move(b)};
}

DenoiserOutput hollow_forward(const HollowNetParams& params, const SequenceState& x) {
  check_input(params, x);
  const auto& dims = params.dims;
  const std::size_t n = x.size(), e = static_cast<std::size_t>(dims.embed);
  auto [f, b] = initial_streams(params, x);
  Tensor m(n, 2 * e, 0.0);
  std::size_t next_mix = 0;
  for (int l = 0; l < dims.layers; ++l) {
    f = content_layer(f, params.content[static_cast<std::size_t>(l)], dims.heads, true);
    b = content_layer(b, params.content[static_cast<std::size_t>(l)], dims.heads, false);
    if ((l + 1) % dims.mix_every == 0 || l + 1 == dims.layers) {
      m = mixing_layer(m, f, b, params.mixing[next_mix++], dims.heads);
    }
  }
  const Tensor logits = matmul(layer_norm(m, params.out_ln_gain, params.out_ln_bias), params.out_proj, &params.out_bias);
  DenoiserOutput out(n, dims.vocab);
  for (std::size_t d = 0; d < n; ++d) {
    auto row = out.row(d);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < logits.cols; ++c) mx = std::max(mx, logits(d, c));
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      row[c] = std::exp(logits(d, c) - mx);
      z += row[c];
    }
    for (double& v : row) v /= z;
  }
  return out;
}

void save_hollow(const HollowNetParams& params, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  const auto& d = params.dims;
  os << kHeader << '\n';
  os << "dims " << d.layers << ' ' << d.mix_every << ' ' << d.embed << ' ' << d.heads << ' ' << d.vocab << ' '
     << d.max_len << '\n';
  os << std::setprecision(17);
  params.for_each([&](const std::string& name, const Tensor& t) {
    os << name << ' ' << t.rows << ' ' << t.cols << '\n';
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (std::size_t c = 0; c < t.cols; ++c) os << (c ? " " : "") << t(r, c);
      os << '\n';
    }
  });
  if (!os) throw Error(ErrorKind::io, "failed writing " + path.string());
}

HollowNetParams load_hollow(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != kHeader) throw Error(ErrorKind::io, "unrecognised parameter file header");
  std::string tag;
  HollowDims dims;
  is >> tag >> dims.layers >> dims.mix_every >> dims.embed >> dims.heads >> dims.vocab >> dims.max_len;
  if (!is || tag != "dims") throw Error(ErrorKind::io, "missing dims record");
  HollowNetParams p = init_hollow(0, dims);
  p.for_each([&](const std::string& name, Tensor& t) {
    std::string got;
    std::size_t rows = 0, cols = 0;
    is >> got >> rows >> cols;
    if (!is || got != name || rows != t.rows || cols != t.cols)
      throw Error(ErrorKind::shape, "parameter record mismatch at '" + name + "'");
    for (double& v : t.data) is >> v;
    if (!is) throw Error(ErrorKind::io, "truncated values for '" + name + "'");
  });
  return p;
}

}  // namespace icdiff
