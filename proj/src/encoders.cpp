#include "miltext/encoders.hpp"

#include <cmath>

#include "miltext/vocab.hpp"

namespace miltext {

namespace {

Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values) v = rng.uniform(-limit, limit);
  return t;
}

}  // namespace

void add_linear_params(ModelParams& params, const std::string& prefix, int out_dim, int in_dim, Rng& rng) {
  params.add(prefix + ".W", glorot({out_dim, in_dim}, in_dim, out_dim, rng));
  params.add(prefix + ".b", Tensor::zeros({out_dim}));
}

void add_cnn_params(ModelParams& params, const std::string& prefix, const std::vector<int>& widths, int feature_maps,
                    int emb_dim, Rng& rng) {
  for (int w : widths) {
    params.add(prefix + ".w" + std::to_string(w),
               glorot({feature_maps, w, emb_dim}, w * emb_dim, feature_maps, rng));
    params.add(prefix + ".b" + std::to_string(w), Tensor::zeros({feature_maps}));
  }
}

void add_gru_params(ModelParams& params, const std::string& prefix, int input_dim, int hidden_dim, Rng& rng) {
  for (const char* gate : {"z", "r", "h"}) {
    params.add(prefix + ".w" + gate, glorot({hidden_dim, input_dim}, input_dim, hidden_dim, rng));
    params.add(prefix + ".u" + gate, glorot({hidden_dim, hidden_dim}, hidden_dim, hidden_dim, rng));
    params.add(prefix + ".b" + gate, Tensor::zeros({hidden_dim}));
  }
}

void add_attention_params(ModelParams& params, const std::string& prefix, int att_dim, int input_dim, Rng& rng) {
  params.add(prefix + ".W", glorot({att_dim, input_dim}, input_dim, att_dim, rng));
  params.add(prefix + ".b", Tensor::zeros({att_dim}));
  params.add(prefix + ".u", glorot({att_dim}, att_dim, 1, rng));
}

CnnRefs cnn_refs(const RefMap& refs, const std::string& prefix, const std::vector<int>& widths) {
  CnnRefs c;
  c.widths = widths;
  for (int w : widths) {
    c.kernels.push_back(refs.at(prefix + ".w" + std::to_string(w)));
    c.biases.push_back(refs.at(prefix + ".b" + std::to_string(w)));
  }
  return c;
}

GruRefs gru_refs(const RefMap& refs, const std::string& prefix) {
  GruRefs g;
  g.wz = refs.at(prefix + ".wz");
  g.uz = refs.at(prefix + ".uz");
  g.bz = refs.at(prefix + ".bz");
  g.wr = refs.at(prefix + ".wr");
  g.ur = refs.at(prefix + ".ur");
  g.br = refs.at(prefix + ".br");
  g.wh = refs.at(prefix + ".wh");
  g.uh = refs.at(prefix + ".uh");
  g.bh = refs.at(prefix + ".bh");
  return g;
}

AttRefs attention_refs(const RefMap& refs, const std::string& prefix) {
  return AttRefs{refs.at(prefix + ".W"), refs.at(prefix + ".b"), refs.at(prefix + ".u")};
}

Ref encode_avg(Tape& t, Ref emb_table, const std::vector<int>& ids) {
  if (ids.empty()) throw Error("encode_avg: empty segment");
  return t.mean_rows(t.embedding_rows(emb_table, ids));
}

Ref encode_cnn(Tape& t, Ref emb_table, const CnnRefs& cnn, const std::vector<int>& ids,
               const std::string& activation, double dropout_rate, Mode mode, Rng& rng) {
  if (ids.empty()) throw Error("encode_cnn: empty segment");
  bool use_relu = activation == "relu";
  if (!use_relu && activation != "tanh") throw Error("encode_cnn: unknown activation '" + activation + "'");

  int emb_dim = emb_table.val().dim(1);
  Ref x = t.embedding_rows(emb_table, ids);
  if (mode == Mode::kTrain && dropout_rate > 0.0) x = t.dropout(x, dropout_rate, rng);

  int widest = 0;
  for (int w : cnn.widths) widest = std::max(widest, w);
  int n = static_cast<int>(ids.size());
  if (n < widest) {
    // zero-pad so the widest kernel has at least one window
    int missing = widest - n;
    int left = missing / 2, right = missing - left;
    std::vector<Ref> parts;
    if (left > 0) parts.push_back(t.leaf(Tensor::zeros({left, emb_dim})));
    parts.push_back(x);
    if (right > 0) parts.push_back(t.leaf(Tensor::zeros({right, emb_dim})));
    x = t.vstack(parts);
  }

  std::vector<Ref> pooled;
  for (size_t i = 0; i < cnn.widths.size(); ++i) {
    Ref conv = t.conv1d(x, cnn.kernels[i], cnn.biases[i]);
    Ref act = use_relu ? t.relu(conv) : t.tanh(conv);
    pooled.push_back(t.max_over_time(act));
  }
  return t.concat(pooled);
}

Ref gru_step(Tape& t, const GruRefs& g, Ref x, Ref h_prev, Ref ones_hidden) {
  Ref z = t.sigmoid(t.add(t.add(t.matmul(g.wz, x), t.matmul(g.uz, h_prev)), g.bz));
  Ref r = t.sigmoid(t.add(t.add(t.matmul(g.wr, x), t.matmul(g.ur, h_prev)), g.br));
  Ref cand = t.tanh(t.add(t.add(t.matmul(g.wh, x), t.matmul(g.uh, t.mul(r, h_prev))), g.bh));
  Ref keep = t.add(ones_hidden, t.scale(z, -1.0));  // 1 - z
  return t.add(t.mul(keep, h_prev), t.mul(z, cand));
}

std::vector<Ref> bigru_context(Tape& t, const GruRefs& fw, const GruRefs& bw, const std::vector<Ref>& inputs,
                               int hidden_dim, double dropout_rate, Mode mode, Rng& rng) {
  if (inputs.empty()) throw Error("bigru_context: empty sequence");
  int m = static_cast<int>(inputs.size());
  Ref zero = t.leaf(Tensor::zeros({hidden_dim}));
  Ref ones = t.leaf(Tensor::filled({hidden_dim}, 1.0));

  std::vector<Ref> forward(static_cast<size_t>(m));
  Ref h = zero;
  for (int i = 0; i < m; ++i) {
    h = gru_step(t, fw, inputs[static_cast<size_t>(i)], h, ones);
    forward[static_cast<size_t>(i)] = h;
  }
  std::vector<Ref> backward(static_cast<size_t>(m));
  h = zero;
  for (int i = m - 1; i >= 0; --i) {
    h = gru_step(t, bw, inputs[static_cast<size_t>(i)], h, ones);
    backward[static_cast<size_t>(i)] = h;
  }

  std::vector<Ref> out;
  out.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    Ref ctx = t.concat(std::vector<Ref>{forward[static_cast<size_t>(i)], backward[static_cast<size_t>(i)]});
    if (mode == Mode::kTrain && dropout_rate > 0.0) ctx = t.dropout(ctx, dropout_rate, rng);
    out.push_back(ctx);
  }
  return out;
}

}  // namespace miltext
