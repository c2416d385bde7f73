#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "edgesynth/tensor.hpp"

namespace edgesynth::ag {

// Reverse-mode autodiff over dense 2D tensors. Nodes form a DAG built per
// forward pass; backward() seeds the root with 1 and walks the reverse
// topological order. Everything is double so finite-difference checks of the
// whole model can hit 1e-4 relative error.
struct Node {
  Tensor val;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // adds into parents' grads
};

using VPtr = std::shared_ptr<Node>;

VPtr leaf(const Tensor& t, bool requires_grad);
VPtr constant(const Tensor& t);
VPtr constant_scalar(double v);

// linear algebra
VPtr matmul(const VPtr& a, const VPtr& b);     // [m,k] @ [k,n]
VPtr matmul_nt(const VPtr& a, const VPtr& b);  // [m,k] @ [n,k]^T -> [m,n]

// elementwise
VPtr add(const VPtr& a, const VPtr& b);  // same shape
VPtr sub(const VPtr& a, const VPtr& b);
VPtr mul(const VPtr& a, const VPtr& b);
VPtr add_bias(const VPtr& x, const VPtr& bias);    // [m,n] + [1,n]
VPtr mul_rowvec(const VPtr& x, const VPtr& v);     // [m,n] * [1,n]
VPtr mul_colvec(const VPtr& x, const VPtr& v);     // [m,n] * [m,1]
VPtr scale(const VPtr& x, double s);
VPtr add_scalar(const VPtr& x, double s);
VPtr gelu(const VPtr& x);     // exact erf form
VPtr sigmoid(const VPtr& x);
VPtr abs(const VPtr& x);

// row-structured ops
VPtr layer_norm(const VPtr& x, const VPtr& gamma, const VPtr& beta,
                double eps = 1e-6);
VPtr softmax_rows(const VPtr& x);
VPtr gather_rows(const VPtr& x, std::vector<int> idx);
VPtr concat_rows(const VPtr& a, const VPtr& b);
VPtr concat_cols(const VPtr& a, const VPtr& b);
VPtr slice_cols(const VPtr& x, int c0, int c1);
VPtr reshape(const VPtr& x, std::vector<int> shape);  // same element order
VPtr global_avg_rows(const VPtr& x);                  // [n,c] -> [1,c]

// 2x bilinear upsample with half-pixel centers; rows are an h*w token grid.
VPtr upsample_bilinear_2x(const VPtr& x, int h, int w);

// reductions to a [1,1] scalar
VPtr sum_all(const VPtr& x);
VPtr mean_all(const VPtr& x);
VPtr weighted_sum(const VPtr& x, const Tensor& w);  // sum(x * w), w constant

void backward(const VPtr& root);

}  // namespace edgesynth::ag
