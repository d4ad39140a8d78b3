#pragma once

#include <string>
#include <vector>

#include "miltext/tape.hpp"

namespace miltext {

enum class Mode { kTrain, kEval };

using RefMap = std::unordered_map<std::string, Ref>;

// One GRU direction: update gate z, reset gate r, candidate h.
struct GruRefs {
  Ref wz, uz, bz;
  Ref wr, ur, br;
  Ref wh, uh, bh;
};

struct CnnRefs {
  std::vector<int> widths;
  std::vector<Ref> kernels;  // per width: {F, w, k}
  std::vector<Ref> biases;   // per width: {F}
};

struct AttRefs {
  Ref w;  // {m, n}
  Ref b;  // {m}
  Ref u;  // {m}
};

// --- parameter construction (Glorot-uniform weights, zero biases) ---------
void add_linear_params(ModelParams& params, const std::string& prefix, int out_dim, int in_dim, Rng& rng);
void add_cnn_params(ModelParams& params, const std::string& prefix, const std::vector<int>& widths, int feature_maps,
                    int emb_dim, Rng& rng);
void add_gru_params(ModelParams& params, const std::string& prefix, int input_dim, int hidden_dim, Rng& rng);
void add_attention_params(ModelParams& params, const std::string& prefix, int att_dim, int input_dim, Rng& rng);

CnnRefs cnn_refs(const RefMap& refs, const std::string& prefix, const std::vector<int>& widths);
GruRefs gru_refs(const RefMap& refs, const std::string& prefix);
AttRefs attention_refs(const RefMap& refs, const std::string& prefix);

// Mean of the tokens' embedding rows.
Ref encode_avg(Tape& t, Ref emb_table, const std::vector<int>& ids);

// CNN segment encoder: embedding lookup, embedding dropout in train mode,
// zero-padding up to the widest kernel, one convolution per width, the
// configured activation, max-over-time pooling, concatenation.
Ref encode_cnn(Tape& t, Ref emb_table, const CnnRefs& cnn, const std::vector<int>& ids,
               const std::string& activation, double dropout_rate, Mode mode, Rng& rng);

Ref gru_step(Tape& t, const GruRefs& g, Ref x, Ref h_prev, Ref ones_hidden);

// Bidirectional contextualizer: concatenated forward/backward hidden states
// per position, with dropout on the emitted states in train mode.
std::vector<Ref> bigru_context(Tape& t, const GruRefs& fw, const GruRefs& bw, const std::vector<Ref>& inputs,
                               int hidden_dim, double dropout_rate, Mode mode, Rng& rng);

}  // namespace miltext
