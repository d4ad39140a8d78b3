#include "miltext/tape.hpp"

#include <algorithm>
#include <cmath>

namespace miltext {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace

const Tensor& Ref::val() const { return tape->value(id); }

void Tape::check_id(Ref r, const char* op) const {
  if (r.tape != this || r.id < 0 || r.id >= static_cast<int>(nodes_.size()))
    throw Error(std::string(op) + ": ref does not belong to this tape");
}

int Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Ref Tape::leaf(Tensor value, bool requires_grad) {
  return Ref{this, push(std::move(value), requires_grad, nullptr)};
}

Ref Tape::param(const Parameter& p) {
  if (param_ids_.count(p.name)) throw Error("Tape::param: '" + p.name + "' already registered on this tape");
  int id = push(p.tensor, p.trainable, nullptr);
  nodes_[static_cast<size_t>(id)].param_name = p.name;
  param_ids_[p.name] = id;
  return Ref{this, id};
}

std::unordered_map<std::string, Ref> Tape::params(const ModelParams& p) {
  std::unordered_map<std::string, Ref> refs;
  for (const Parameter& item : p) refs[item.name] = param(item);
  return refs;
}

// --- matmul ---------------------------------------------------------------

Ref Tape::matmul(Ref a, Ref b) {
  check_id(a, "matmul");
  check_id(b, "matmul");
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  bool a_vec = A.ndim() == 1, b_vec = B.ndim() == 1;
  if ((A.ndim() != 1 && A.ndim() != 2) || (B.ndim() != 1 && B.ndim() != 2)) shape_error("matmul", A, B);
  int r = a_vec ? 1 : A.dim(0);
  int c = a_vec ? A.dim(0) : A.dim(1);
  int c2 = b_vec ? B.dim(0) : B.dim(0);
  int k = b_vec ? 1 : B.dim(1);
  if (c != c2) shape_error("matmul", A, B);

  Tensor out;
  if (a_vec && b_vec) out = Tensor::scalar(0.0);
  else if (b_vec) out = Tensor::zeros({r});
  else if (a_vec) out = Tensor::zeros({k});
  else out = Tensor::zeros({r, k});

  const double* pa = A.values.data();
  const double* pb = B.values.data();
  double* po = out.values.data();
  for (int i = 0; i < r; ++i)
    for (int p = 0; p < c; ++p) {
      double av = pa[static_cast<size_t>(i) * c + p];
      if (av == 0.0) continue;
      const double* brow = pb + static_cast<size_t>(p) * k;
      double* orow = po + static_cast<size_t>(i) * k;
      for (int j = 0; j < k; ++j) orow[j] += av * brow[j];
    }

  bool rg = needs(a.id) || needs(b.id);
  int aid = a.id, bid = b.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [aid, bid, r, c, k, id](Tape& t) {
    const double* pg = t.grad(id).values.data();
    const double* pa = t.value(aid).values.data();
    const double* pb = t.value(bid).values.data();
    if (t.needs(aid)) {
      double* da = t.grad(aid).values.data();
      // dA[i,p] += sum_j G[i,j] * B[p,j]
      for (int i = 0; i < r; ++i)
        for (int p = 0; p < c; ++p) {
          const double* grow = pg + static_cast<size_t>(i) * k;
          const double* brow = pb + static_cast<size_t>(p) * k;
          double acc = 0.0;
          for (int j = 0; j < k; ++j) acc += grow[j] * brow[j];
          da[static_cast<size_t>(i) * c + p] += acc;
        }
    }
    if (t.needs(bid)) {
      double* db = t.grad(bid).values.data();
      // dB[p,j] += sum_i A[i,p] * G[i,j]
      for (int i = 0; i < r; ++i)
        for (int p = 0; p < c; ++p) {
          double av = pa[static_cast<size_t>(i) * c + p];
          if (av == 0.0) continue;
          const double* grow = pg + static_cast<size_t>(i) * k;
          double* brow = db + static_cast<size_t>(p) * k;
          for (int j = 0; j < k; ++j) brow[j] += av * grow[j];
        }
    }
  };
  return Ref{this, id};
}

// --- elementwise ------------------------------------------------------------

Ref Tape::add(Ref a, Ref b) {
  check_id(a, "add");
  check_id(b, "add");
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  if (!A.same_shape(B)) shape_error("add", A, B);
  Tensor out = A;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += B.values[i];
  bool rg = needs(a.id) || needs(b.id);
  int aid = a.id, bid = b.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [aid, bid, id](Tape& t) {
    const auto& g = t.grad(id).values;
    if (t.needs(aid)) {
      auto& da = t.grad(aid).values;
      for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
    }
    if (t.needs(bid)) {
      auto& db = t.grad(bid).values;
      for (size_t i = 0; i < g.size(); ++i) db[i] += g[i];
    }
  };
  return Ref{this, id};
}

Ref Tape::mul(Ref a, Ref b) {
  check_id(a, "mul");
  check_id(b, "mul");
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  if (!A.same_shape(B)) shape_error("mul", A, B);
  Tensor out = A;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] *= B.values[i];
  bool rg = needs(a.id) || needs(b.id);
  int aid = a.id, bid = b.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [aid, bid, id](Tape& t) {
    const auto& g = t.grad(id).values;
    const auto& av = t.value(aid).values;
    const auto& bv = t.value(bid).values;
    if (t.needs(aid)) {
      auto& da = t.grad(aid).values;
      for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
    }
    if (t.needs(bid)) {
      auto& db = t.grad(bid).values;
      for (size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
    }
  };
  return Ref{this, id};
}

Ref Tape::add_rowvec(Ref m, Ref v) {
  check_id(m, "add_rowvec");
  check_id(v, "add_rowvec");
  const Tensor& M = m.val();
  const Tensor& V = v.val();
  if (M.ndim() != 2 || V.ndim() != 1 || M.dim(1) != V.dim(0)) shape_error("add_rowvec", M, V);
  int rows = M.dim(0), cols = M.dim(1);
  Tensor out = M;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.at2(i, j) += V.values[static_cast<size_t>(j)];
  bool rg = needs(m.id) || needs(v.id);
  int mid = m.id, vid = v.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [mid, vid, id, rows, cols](Tape& t) {
    const auto& g = t.grad(id).values;
    if (t.needs(mid)) {
      auto& dm = t.grad(mid).values;
      for (size_t i = 0; i < g.size(); ++i) dm[i] += g[i];
    }
    if (t.needs(vid)) {
      auto& dv = t.grad(vid).values;
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) dv[static_cast<size_t>(j)] += g[static_cast<size_t>(i) * cols + j];
    }
  };
  return Ref{this, id};
}

// --- unary maps -------------------------------------------------------------

Ref Tape::unary_map(Ref a, const char* op, double (*fwd)(double), double (*dfn)(double, double)) {
  check_id(a, op);
  Tensor out = a.val();
  for (double& v : out.values) v = fwd(v);
  bool rg = needs(a.id);
  int aid = a.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [aid, id, dfn](Tape& t) {
    if (!t.needs(aid)) return;
    const auto& g = t.grad(id).values;
    const auto& in = t.value(aid).values;
    const auto& out = t.value(id).values;
    auto& da = t.grad(aid).values;
    for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * dfn(out[i], in[i]);
  };
  return Ref{this, id};
}

Ref Tape::tanh(Ref a) {
  return unary_map(a, "tanh", [](double x) { return std::tanh(x); },
                   [](double y, double) { return 1.0 - y * y; });
}

Ref Tape::sigmoid(Ref a) {
  return unary_map(a, "sigmoid",
                   [](double x) {
                     if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                     double e = std::exp(x);
                     return e / (1.0 + e);
                   },
                   [](double y, double) { return y * (1.0 - y); });
}

Ref Tape::relu(Ref a) {
  return unary_map(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                   [](double, double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Ref Tape::exp(Ref a) {
  return unary_map(a, "exp", [](double x) { return std::exp(x); }, [](double y, double) { return y; });
}

Ref Tape::log(Ref a) {
  return unary_map(a, "log", [](double x) { return std::log(std::max(x, 1e-300)); },
                   [](double, double x) { return 1.0 / std::max(x, 1e-300); });
}

// --- softmax ----------------------------------------------------------------

Ref Tape::softmax_last(Ref a) {
  check_id(a, "softmax_last");
  const Tensor& A = a.val();
  if (A.ndim() != 1 && A.ndim() != 2) throw Error("softmax_last: expects a vector or matrix, got " + A.shape_str());
  int rows = A.ndim() == 2 ? A.dim(0) : 1;
  int cols = A.ndim() == 2 ? A.dim(1) : A.dim(0);
  Tensor out = A;
  for (int i = 0; i < rows; ++i) {
    double* row = out.values.data() + static_cast<size_t>(i) * cols;
    double mx = row[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double total = 0.0;
    for (int j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (int j = 0; j < cols; ++j) row[j] /= total;
  }
  bool rg = needs(a.id);
  int aid = a.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [aid, id, rows, cols](Tape& t) {
    if (!t.needs(aid)) return;
    const auto& g = t.grad(id).values;
    const auto& p = t.value(id).values;
    auto& da = t.grad(aid).values;
    for (int i = 0; i < rows; ++i) {
      size_t off = static_cast<size_t>(i) * cols;
      double dot = 0.0;
      for (int j = 0; j < cols; ++j) dot += g[off + j] * p[off + j];
      for (int j = 0; j < cols; ++j) da[off + j] += p[off + j] * (g[off + j] - dot);
    }
  };
  return Ref{this, id};
}

// --- conv1d -------------------------------------------------------------------

Ref Tape::conv1d(Ref x, Ref kernels, Ref bias) {
  check_id(x, "conv1d");
  check_id(kernels, "conv1d");
  check_id(bias, "conv1d");
  const Tensor& X = x.val();
  const Tensor& K = kernels.val();
  const Tensor& B = bias.val();
  if (X.ndim() != 2 || K.ndim() != 3) shape_error("conv1d", X, K);
  int n = X.dim(0), ch = X.dim(1);
  int f = K.dim(0), w = K.dim(1), kc = K.dim(2);
  if (kc != ch) shape_error("conv1d", X, K);
  if (B.ndim() != 1 || B.dim(0) != f) shape_error("conv1d", K, B);
  if (n < w)
    throw Error("conv1d: input length " + std::to_string(n) + " shorter than kernel width " + std::to_string(w));
  int tlen = n - w + 1;
  Tensor out = Tensor::zeros({tlen, f});
  for (int t = 0; t < tlen; ++t)
    for (int fi = 0; fi < f; ++fi) {
      double acc = B.values[static_cast<size_t>(fi)];
      const double* krow = K.values.data() + static_cast<size_t>(fi) * w * ch;
      const double* xrow = X.values.data() + static_cast<size_t>(t) * ch;
      int span = w * ch;
      for (int i = 0; i < span; ++i) acc += krow[i] * xrow[i];
      out.at2(t, fi) = acc;
    }
  bool rg = needs(x.id) || needs(kernels.id) || needs(bias.id);
  int xid = x.id, kid = kernels.id, bid = bias.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [xid, kid, bid, id, tlen, f, w, ch](Tape& t) {
    const auto& g = t.grad(id).values;
    const auto& xv = t.value(xid).values;
    const auto& kv = t.value(kid).values;
    int span = w * ch;
    if (t.needs(xid)) {
      auto& dx = t.grad(xid).values;
      for (int ti = 0; ti < tlen; ++ti)
        for (int fi = 0; fi < f; ++fi) {
          double gv = g[static_cast<size_t>(ti) * f + fi];
          if (gv == 0.0) continue;
          const double* krow = kv.data() + static_cast<size_t>(fi) * span;
          double* xrow = dx.data() + static_cast<size_t>(ti) * ch;
          for (int i = 0; i < span; ++i) xrow[i] += gv * krow[i];
        }
    }
    if (t.needs(kid)) {
      auto& dk = t.grad(kid).values;
      for (int ti = 0; ti < tlen; ++ti)
        for (int fi = 0; fi < f; ++fi) {
          double gv = g[static_cast<size_t>(ti) * f + fi];
          if (gv == 0.0) continue;
          double* krow = dk.data() + static_cast<size_t>(fi) * span;
          const double* xrow = xv.data() + static_cast<size_t>(ti) * ch;
          for (int i = 0; i < span; ++i) krow[i] += gv * xrow[i];
        }
    }
    if (t.needs(bid)) {
      auto& db = t.grad(bid).values;
      for (int ti = 0; ti < tlen; ++ti)
        for (int fi = 0; fi < f; ++fi) db[static_cast<size_t>(fi)] += g[static_cast<size_t>(ti) * f + fi];
    }
  };
  return Ref{this, id};
}

Ref Tape::max_over_time(Ref x) {
  check_id(x, "max_over_time");
  const Tensor& X = x.val();
  if (X.ndim() != 2) throw Error("max_over_time: expects a matrix, got " + X.shape_str());
  int n = X.dim(0), f = X.dim(1);
  Tensor out = Tensor::zeros({f});
  std::vector<int> argmax(static_cast<size_t>(f), 0);
  for (int j = 0; j < f; ++j) {
    double best = X.at2(0, j);
    int bi = 0;
    for (int i = 1; i < n; ++i)
      if (X.at2(i, j) > best) {
        best = X.at2(i, j);
        bi = i;
      }
    out.values[static_cast<size_t>(j)] = best;
    argmax[static_cast<size_t>(j)] = bi;
  }
  bool rg = needs(x.id);
  int xid = x.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [xid, id, f, argmax](Tape& t) {
    if (!t.needs(xid)) return;
    const auto& g = t.grad(id).values;
    auto& dx = t.grad(xid);
    for (int j = 0; j < f; ++j) dx.at2(argmax[static_cast<size_t>(j)], j) += g[static_cast<size_t>(j)];
  };
  return Ref{this, id};
}

Ref Tape::embedding_rows(Ref table, std::vector<int> ids, int pad_id) {
  check_id(table, "embedding_rows");
  const Tensor& T = table.val();
  if (T.ndim() != 2) throw Error("embedding_rows: table must be a matrix, got " + T.shape_str());
  int v = T.dim(0), k = T.dim(1);
  for (int i : ids)
    if (i < 0 || i >= v)
      throw Error("embedding_rows: id " + std::to_string(i) + " outside table with " + std::to_string(v) + " rows");
  int len = static_cast<int>(ids.size());
  if (len == 0) throw Error("embedding_rows: empty id list");
  Tensor out = Tensor::zeros({len, k});
  for (int i = 0; i < len; ++i) {
    const double* src = T.values.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * k;
    std::copy(src, src + k, out.values.data() + static_cast<size_t>(i) * k);
  }
  bool rg = needs(table.id);
  int tid = table.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [tid, id, ids = std::move(ids), k, pad_id](Tape& t) {
    if (!t.needs(tid)) return;
    const auto& g = t.grad(id).values;
    auto& dt = t.grad(tid).values;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == pad_id) continue;  // padding row stays all-zero
      const double* grow = g.data() + i * k;
      double* drow = dt.data() + static_cast<size_t>(ids[i]) * k;
      for (int j = 0; j < k; ++j) drow[j] += grow[j];
    }
  };
  return Ref{this, id};
}

Ref Tape::concat(std::span<const Ref> parts) {
  if (parts.empty()) throw Error("concat: no inputs");
  std::vector<int> pids;
  std::vector<int> lens;
  int total = 0;
  bool rg = false;
  for (Ref r : parts) {
    check_id(r, "concat");
    const Tensor& v = r.val();
    if (v.ndim() > 1) throw Error("concat: expects scalars or vectors, got " + v.shape_str());
    pids.push_back(r.id);
    lens.push_back(static_cast<int>(v.numel()));
    total += lens.back();
    rg = rg || needs(r.id);
  }
  Tensor out = Tensor::zeros({total});
  int off = 0;
  for (size_t i = 0; i < pids.size(); ++i) {
    const auto& v = value(pids[i]).values;
    std::copy(v.begin(), v.end(), out.values.begin() + off);
    off += lens[i];
  }
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [pids, lens, id](Tape& t) {
    const auto& g = t.grad(id).values;
    int off = 0;
    for (size_t i = 0; i < pids.size(); ++i) {
      if (t.needs(pids[i])) {
        auto& dp = t.grad(pids[i]).values;
        for (int j = 0; j < lens[i]; ++j) dp[static_cast<size_t>(j)] += g[static_cast<size_t>(off + j)];
      }
      off += lens[i];
    }
  };
  return Ref{this, id};
}

Ref Tape::vstack(std::span<const Ref> rows) {
  if (rows.empty()) throw Error("vstack: no inputs");
  std::vector<int> pids;
  std::vector<int> nrows;
  int cols = -1;
  int total = 0;
  bool rg = false;
  for (Ref r : rows) {
    check_id(r, "vstack");
    const Tensor& v = r.val();
    int rc = v.ndim() == 1 ? 1 : v.dim(0);
    int cc = v.ndim() == 1 ? v.dim(0) : v.dim(1);
    if (v.ndim() < 1 || v.ndim() > 2) throw Error("vstack: expects vectors or matrices, got " + v.shape_str());
    if (cols == -1) cols = cc;
    if (cc != cols) throw Error("vstack: column mismatch " + std::to_string(cc) + " vs " + std::to_string(cols));
    pids.push_back(r.id);
    nrows.push_back(rc);
    total += rc;
    rg = rg || needs(r.id);
  }
  Tensor out = Tensor::zeros({total, cols});
  int off = 0;
  for (size_t i = 0; i < pids.size(); ++i) {
    const auto& v = value(pids[i]).values;
    std::copy(v.begin(), v.end(), out.values.begin() + static_cast<size_t>(off) * cols);
    off += nrows[i];
  }
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [pids, nrows, cols, id](Tape& t) {
    const auto& g = t.grad(id).values;
    int off = 0;
    for (size_t i = 0; i < pids.size(); ++i) {
      if (t.needs(pids[i])) {
        auto& dp = t.grad(pids[i]).values;
        size_t count = static_cast<size_t>(nrows[i]) * cols;
        const double* src = g.data() + static_cast<size_t>(off) * cols;
        for (size_t j = 0; j < count; ++j) dp[j] += src[j];
      }
      off += nrows[i];
    }
  };
  return Ref{this, id};
}

Ref Tape::row(Ref x, int i) {
  check_id(x, "row");
  const Tensor& X = x.val();
  if (X.ndim() != 2) throw Error("row: expects a matrix, got " + X.shape_str());
  if (i < 0 || i >= X.dim(0)) throw Error("row: index " + std::to_string(i) + " outside matrix " + X.shape_str());
  int cols = X.dim(1);
  Tensor out = Tensor::zeros({cols});
  std::copy(X.values.begin() + static_cast<size_t>(i) * cols, X.values.begin() + (static_cast<size_t>(i) + 1) * cols,
            out.values.begin());
  bool rg = needs(x.id);
  int xid = x.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [xid, id, i, cols](Tape& t) {
    if (!t.needs(xid)) return;
    const auto& g = t.grad(id).values;
    auto& dx = t.grad(xid).values;
    for (int j = 0; j < cols; ++j) dx[static_cast<size_t>(i) * cols + j] += g[static_cast<size_t>(j)];
  };
  return Ref{this, id};
}

Ref Tape::masked_sum(Ref x, Tensor mask) {
  check_id(x, "masked_sum");
  const Tensor& X = x.val();
  if (!X.same_shape(mask)) shape_error("masked_sum", X, mask);
  double acc = 0.0;
  for (size_t i = 0; i < X.values.size(); ++i) acc += X.values[i] * mask.values[i];
  bool rg = needs(x.id);
  int xid = x.id;
  int id = push(Tensor::scalar(acc), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [xid, id, mask = std::move(mask)](Tape& t) {
    if (!t.needs(xid)) return;
    double g = t.grad(id).values[0];
    auto& dx = t.grad(xid).values;
    for (size_t i = 0; i < dx.size(); ++i) dx[i] += g * mask.values[i];
  };
  return Ref{this, id};
}

Ref Tape::sum(Ref x) {
  Tensor ones = x.val();
  for (double& v : ones.values) v = 1.0;
  return masked_sum(x, std::move(ones));
}

Ref Tape::mean_rows(Ref x, std::vector<double> row_mask) {
  check_id(x, "mean_rows");
  const Tensor& X = x.val();
  if (X.ndim() != 2) throw Error("mean_rows: expects a matrix, got " + X.shape_str());
  int rows = X.dim(0), cols = X.dim(1);
  if (row_mask.empty()) row_mask.assign(static_cast<size_t>(rows), 1.0);
  if (static_cast<int>(row_mask.size()) != rows)
    throw Error("mean_rows: mask length " + std::to_string(row_mask.size()) + " vs " + std::to_string(rows) + " rows");
  double total = 0.0;
  for (double m : row_mask) total += m;
  if (total <= 0.0) throw Error("mean_rows: mask selects no rows");
  Tensor out = Tensor::zeros({cols});
  for (int i = 0; i < rows; ++i) {
    if (row_mask[static_cast<size_t>(i)] == 0.0) continue;
    for (int j = 0; j < cols; ++j) out.values[static_cast<size_t>(j)] += row_mask[static_cast<size_t>(i)] * X.at2(i, j);
  }
  for (double& v : out.values) v /= total;
  bool rg = needs(x.id);
  int xid = x.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [xid, id, rows, cols, row_mask = std::move(row_mask), total](Tape& t) {
    if (!t.needs(xid)) return;
    const auto& g = t.grad(id).values;
    auto& dx = t.grad(xid);
    for (int i = 0; i < rows; ++i) {
      double m = row_mask[static_cast<size_t>(i)] / total;
      if (m == 0.0) continue;
      for (int j = 0; j < cols; ++j) dx.at2(i, j) += m * g[static_cast<size_t>(j)];
    }
  };
  return Ref{this, id};
}

Ref Tape::dropout(Ref x, double rate, Rng& rng) {
  check_id(x, "dropout");
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (rate == 0.0) return x;
  const Tensor& X = x.val();
  std::vector<std::uint8_t> keep(X.values.size());
  double inv = 1.0 / (1.0 - rate);
  Tensor out = X;
  for (size_t i = 0; i < out.values.size(); ++i) {
    keep[i] = rng.bernoulli(1.0 - rate) ? 1 : 0;
    out.values[i] = keep[i] ? out.values[i] * inv : 0.0;
  }
  bool rg = needs(x.id);
  int xid = x.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [xid, id, keep = std::move(keep), inv](Tape& t) {
    if (!t.needs(xid)) return;
    const auto& g = t.grad(id).values;
    auto& dx = t.grad(xid).values;
    for (size_t i = 0; i < g.size(); ++i)
      if (keep[i]) dx[i] += g[i] * inv;
  };
  return Ref{this, id};
}

Ref Tape::scale(Ref x, double c) {
  check_id(x, "scale");
  Tensor out = x.val();
  for (double& v : out.values) v *= c;
  bool rg = needs(x.id);
  int xid = x.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [xid, id, c](Tape& t) {
    if (!t.needs(xid)) return;
    const auto& g = t.grad(id).values;
    auto& dx = t.grad(xid).values;
    for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * c;
  };
  return Ref{this, id};
}

Ref Tape::scale_by(Ref x, Ref s) {
  check_id(x, "scale_by");
  check_id(s, "scale_by");
  const Tensor& S = s.val();
  if (!S.is_scalar()) throw Error("scale_by: scale must be a scalar node, got " + S.shape_str());
  double sv = S.values[0];
  Tensor out = x.val();
  for (double& v : out.values) v *= sv;
  bool rg = needs(x.id) || needs(s.id);
  int xid = x.id, sid = s.id;
  int id = push(std::move(out), rg, nullptr);
  nodes_[static_cast<size_t>(id)].backprop = [xid, sid, id, sv](Tape& t) {
    const auto& g = t.grad(id).values;
    const auto& xv = t.value(xid).values;
    if (t.needs(xid)) {
      auto& dx = t.grad(xid).values;
      for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * sv;
    }
    if (t.needs(sid)) {
      double acc = 0.0;
      for (size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      t.grad(sid).values[0] += acc;
    }
  };
  return Ref{this, id};
}

// --- backward ----------------------------------------------------------------

GradMap Tape::backward(Ref loss, const ModelParams& params) {
  check_id(loss, "backward");
  if (consumed_) throw Error("backward: tape already consumed");
  const Tensor& L = loss.val();
  if (!L.is_scalar()) throw Error("backward: loss must be a scalar, got shape " + L.shape_str());
  consumed_ = true;

  for (Node& n : nodes_)
    if (n.requires_grad) {
      n.grad = n.value;
      std::fill(n.grad.values.begin(), n.grad.values.end(), 0.0);
    }
  if (nodes_[static_cast<size_t>(loss.id)].requires_grad) nodes_[static_cast<size_t>(loss.id)].grad.values[0] = 1.0;

  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || !n.backprop) continue;
    n.backprop(*this);
  }

  GradMap out;
  for (const Parameter& p : params) {
    if (!p.trainable) continue;
    auto it = param_ids_.find(p.name);
    if (it != param_ids_.end() && nodes_[static_cast<size_t>(it->second)].requires_grad)
      out[p.name] = nodes_[static_cast<size_t>(it->second)].grad;
    else
      out[p.name] = Tensor::zeros(p.tensor.shape);
  }
  return out;
}

}  // namespace miltext
