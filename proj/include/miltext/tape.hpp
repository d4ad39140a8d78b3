#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "miltext/params.hpp"
#include "miltext/rng.hpp"
#include "miltext/tensor.hpp"

namespace miltext {

class Tape;

// Handle to a node recorded on a tape. Cheap to copy.
struct Ref {
  Tape* tape = nullptr;
  int id = -1;
  const Tensor& val() const;
};

using GradMap = std::map<std::string, Tensor>;

// Reverse-mode tape: primitives append nodes in execution order, so walking
// the record backwards visits every node after all of its consumers.
// A tape is single-use: backward() consumes it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Ref leaf(Tensor value, bool requires_grad = false);
  // Named leaf for a model parameter; each name may appear once per tape.
  Ref param(const Parameter& p);
  // Registers every parameter in the collection and returns refs by name.
  std::unordered_map<std::string, Ref> params(const ModelParams& p);

  // --- primitives -------------------------------------------------------
  Ref matmul(Ref a, Ref b);               // {r,c}x{c,k}, {r,c}x{c}, {r}x{r,k}, {r}x{r}
  Ref add(Ref a, Ref b);                  // elementwise, same shape
  Ref mul(Ref a, Ref b);                  // elementwise, same shape
  Ref add_rowvec(Ref m, Ref v);           // {M,d} + {d} broadcast over rows
  Ref tanh(Ref a);
  Ref sigmoid(Ref a);
  Ref relu(Ref a);
  Ref exp(Ref a);
  Ref log(Ref a);                         // input clamped below at 1e-300
  Ref softmax_last(Ref a);                // over the last axis; rows for 2-d
  Ref conv1d(Ref x, Ref kernels, Ref bias);  // x {N,k}, kernels {F,w,k}, bias {F} -> {N-w+1,F}
  Ref max_over_time(Ref x);               // {N,F} -> {F}, first max on ties
  Ref embedding_rows(Ref table, std::vector<int> ids, int pad_id = 0);  // -> {len,k}
  Ref concat(std::span<const Ref> parts);  // scalars/vectors -> one vector
  Ref vstack(std::span<const Ref> rows);   // {d} and {r,d} parts -> {R,d}
  Ref row(Ref x, int i);                   // {M,d} -> {d}
  Ref masked_sum(Ref x, Tensor mask);      // sum(x .* mask) -> scalar
  Ref sum(Ref x);
  Ref mean_rows(Ref x, std::vector<double> row_mask = {});  // {M,d} -> {d}
  Ref dropout(Ref x, double rate, Rng& rng);  // inverted scaling; train mode only
  Ref scale(Ref x, double c);
  Ref scale_by(Ref x, Ref s);              // broadcast multiply by a scalar node

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  size_t size() const { return nodes_.size(); }

  // Gradients of a scalar loss for every trainable parameter in `params`.
  // Parameters the loss never touched get zero gradients of matching shape.
  GradMap backward(Ref loss, const ModelParams& params);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::string param_name;
    std::function<void(Tape&)> backprop;  // accumulates into parent grads
  };

  int push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop);
  Tensor& grad(int id) { return nodes_[static_cast<size_t>(id)].grad; }
  bool needs(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
  Ref unary_map(Ref a, const char* op, double (*fwd)(double), double (*dfn)(double out, double in));
  void check_id(Ref r, const char* op) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_ids_;
  bool consumed_ = false;
};

}  // namespace miltext
