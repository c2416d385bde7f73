#include "edgesynth/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>
#include <unordered_set>

#include "edgesynth/common.hpp"

namespace edgesynth::ag {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

VPtr make_node(Tensor val, std::vector<VPtr> parents,
               std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->grad = Tensor(n->val.shape);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return n;
}

void require_2d(const VPtr& x, const char* who) {
  ES_CHECK(x->val.rank() == 2, std::string(who) + " wants rank-2 tensors");
}

}  // namespace

VPtr leaf(const Tensor& t, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->val = t;
  n->grad = Tensor(t.shape);
  n->requires_grad = requires_grad;
  return n;
}

VPtr constant(const Tensor& t) { return leaf(t, false); }

VPtr constant_scalar(double v) { return constant(Tensor({1, 1}, {v})); }

VPtr matmul(const VPtr& a, const VPtr& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  int m = a->val.rows(), k = a->val.cols(), n = b->val.cols();
  ES_CHECK(b->val.rows() == k, "matmul inner dim mismatch: " +
                                   a->val.shape_str() + " @ " +
                                   b->val.shape_str());
  Tensor out({m, n});
  const double* A = a->val.data.data();
  const double* B = b->val.data.data();
  double* C = out.data.data();
  for (int i = 0; i < m; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      double av = A[static_cast<size_t>(i) * k + kk];
      if (av == 0.0) continue;
      const double* Brow = B + static_cast<size_t>(kk) * n;
      double* Crow = C + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) Crow[j] += av * Brow[j];
    }
  }
  return make_node(std::move(out), {a, b}, [m, k, n](Node& nd) {
    const auto& a = nd.parents[0];
    const auto& b = nd.parents[1];
    const double* G = nd.grad.data.data();
    if (a->requires_grad) {
      // dA = G @ B^T
      double* dA = a->grad.data.data();
      const double* B = b->val.data.data();
      for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
          const double* Grow = G + static_cast<size_t>(i) * n;
          const double* Brow = B + static_cast<size_t>(kk) * n;
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += Grow[j] * Brow[j];
          dA[static_cast<size_t>(i) * k + kk] += s;
        }
    }
    if (b->requires_grad) {
      // dB = A^T @ G
      double* dB = b->grad.data.data();
      const double* A = a->val.data.data();
      for (int kk = 0; kk < k; ++kk)
        for (int i = 0; i < m; ++i) {
          double av = A[static_cast<size_t>(i) * k + kk];
          if (av == 0.0) continue;
          const double* Grow = G + static_cast<size_t>(i) * n;
          double* Brow = dB + static_cast<size_t>(kk) * n;
          for (int j = 0; j < n; ++j) Brow[j] += av * Grow[j];
        }
    }
  });
}

VPtr matmul_nt(const VPtr& a, const VPtr& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  int m = a->val.rows(), k = a->val.cols(), n = b->val.rows();
  ES_CHECK(b->val.cols() == k, "matmul_nt inner dim mismatch: " +
                                   a->val.shape_str() + " @ " +
                                   b->val.shape_str() + "^T");
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    const double* Arow = a->val.data.data() + static_cast<size_t>(i) * k;
    double* Crow = out.data.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* Brow = b->val.data.data() + static_cast<size_t>(j) * k;
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk) s += Arow[kk] * Brow[kk];
      Crow[j] = s;
    }
  }
  return make_node(std::move(out), {a, b}, [m, k, n](Node& nd) {
    const auto& a = nd.parents[0];
    const auto& b = nd.parents[1];
    const double* G = nd.grad.data.data();
    if (a->requires_grad) {
      // dA = G @ B
      double* dA = a->grad.data.data();
      const double* B = b->val.data.data();
      for (int i = 0; i < m; ++i) {
        const double* Grow = G + static_cast<size_t>(i) * n;
        double* dArow = dA + static_cast<size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
          double gv = Grow[j];
          if (gv == 0.0) continue;
          const double* Brow = B + static_cast<size_t>(j) * k;
          for (int kk = 0; kk < k; ++kk) dArow[kk] += gv * Brow[kk];
        }
      }
    }
    if (b->requires_grad) {
      // dB = G^T @ A
      double* dB = b->grad.data.data();
      const double* A = a->val.data.data();
      for (int i = 0; i < m; ++i) {
        const double* Grow = G + static_cast<size_t>(i) * n;
        const double* Arow = A + static_cast<size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
          double gv = Grow[j];
          if (gv == 0.0) continue;
          double* dBrow = dB + static_cast<size_t>(j) * k;
          for (int kk = 0; kk < k; ++kk) dBrow[kk] += gv * Arow[kk];
        }
      }
    }
  });
}

VPtr add(const VPtr& a, const VPtr& b) {
  ES_CHECK(a->val.same_shape(b->val), "add shape mismatch: " +
                                          a->val.shape_str() + " vs " +
                                          b->val.shape_str());
  Tensor out = a->val;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->val.data[i];
  return make_node(std::move(out), {a, b}, [](Node& nd) {
    for (const auto& p : nd.parents) {
      if (!p->requires_grad) continue;
      for (size_t i = 0; i < nd.grad.data.size(); ++i)
        p->grad.data[i] += nd.grad.data[i];
    }
  });
}

VPtr sub(const VPtr& a, const VPtr& b) {
  ES_CHECK(a->val.same_shape(b->val), "sub shape mismatch");
  Tensor out = a->val;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->val.data[i];
  return make_node(std::move(out), {a, b}, [](Node& nd) {
    const auto& a = nd.parents[0];
    const auto& b = nd.parents[1];
    if (a->requires_grad)
      for (size_t i = 0; i < nd.grad.data.size(); ++i)
        a->grad.data[i] += nd.grad.data[i];
    if (b->requires_grad)
      for (size_t i = 0; i < nd.grad.data.size(); ++i)
        b->grad.data[i] -= nd.grad.data[i];
  });
}

VPtr mul(const VPtr& a, const VPtr& b) {
  ES_CHECK(a->val.same_shape(b->val), "mul shape mismatch");
  Tensor out = a->val;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->val.data[i];
  return make_node(std::move(out), {a, b}, [](Node& nd) {
    const auto& a = nd.parents[0];
    const auto& b = nd.parents[1];
    if (a->requires_grad)
      for (size_t i = 0; i < nd.grad.data.size(); ++i)
        a->grad.data[i] += nd.grad.data[i] * b->val.data[i];
    if (b->requires_grad)
      for (size_t i = 0; i < nd.grad.data.size(); ++i)
        b->grad.data[i] += nd.grad.data[i] * a->val.data[i];
  });
}

VPtr add_bias(const VPtr& x, const VPtr& bias) {
  require_2d(x, "add_bias");
  int m = x->val.rows(), n = x->val.cols();
  ES_CHECK(bias->val.rows() == 1 && bias->val.cols() == n,
           "bias shape mismatch");
  Tensor out = x->val;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) += bias->val.data[j];
  return make_node(std::move(out), {x, bias}, [m, n](Node& nd) {
    const auto& x = nd.parents[0];
    const auto& b = nd.parents[1];
    if (x->requires_grad)
      for (size_t i = 0; i < nd.grad.data.size(); ++i)
        x->grad.data[i] += nd.grad.data[i];
    if (b->requires_grad)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          b->grad.data[j] += nd.grad.at(i, j);
  });
}

VPtr mul_rowvec(const VPtr& x, const VPtr& v) {
  require_2d(x, "mul_rowvec");
  int m = x->val.rows(), n = x->val.cols();
  ES_CHECK(v->val.rows() == 1 && v->val.cols() == n, "rowvec shape mismatch");
  Tensor out = x->val;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) *= v->val.data[j];
  return make_node(std::move(out), {x, v}, [m, n](Node& nd) {
    const auto& x = nd.parents[0];
    const auto& v = nd.parents[1];
    if (x->requires_grad)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          x->grad.at(i, j) += nd.grad.at(i, j) * v->val.data[j];
    if (v->requires_grad)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          v->grad.data[j] += nd.grad.at(i, j) * x->val.at(i, j);
  });
}

VPtr mul_colvec(const VPtr& x, const VPtr& v) {
  require_2d(x, "mul_colvec");
  int m = x->val.rows(), n = x->val.cols();
  ES_CHECK(v->val.rows() == m && v->val.cols() == 1, "colvec shape mismatch");
  Tensor out = x->val;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) *= v->val.data[static_cast<size_t>(i)];
  return make_node(std::move(out), {x, v}, [m, n](Node& nd) {
    const auto& x = nd.parents[0];
    const auto& v = nd.parents[1];
    if (x->requires_grad)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          x->grad.at(i, j) += nd.grad.at(i, j) * v->val.data[static_cast<size_t>(i)];
    if (v->requires_grad)
      for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += nd.grad.at(i, j) * x->val.at(i, j);
        v->grad.data[static_cast<size_t>(i)] += s;
      }
  });
}

VPtr scale(const VPtr& x, double s) {
  Tensor out = x->val;
  for (auto& v : out.data) v *= s;
  return make_node(std::move(out), {x}, [s](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < nd.grad.data.size(); ++i)
      p->grad.data[i] += s * nd.grad.data[i];
  });
}

VPtr add_scalar(const VPtr& x, double s) {
  Tensor out = x->val;
  for (auto& v : out.data) v += s;
  return make_node(std::move(out), {x}, [](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < nd.grad.data.size(); ++i)
      p->grad.data[i] += nd.grad.data[i];
  });
}

VPtr gelu(const VPtr& x) {
  Tensor out = x->val;
  for (auto& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  return make_node(std::move(out), {x}, [](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < nd.grad.data.size(); ++i) {
      double v = p->val.data[i];
      double d = 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
                 v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      p->grad.data[i] += d * nd.grad.data[i];
    }
  });
}

VPtr sigmoid(const VPtr& x) {
  Tensor out = x->val;
  for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return make_node(std::move(out), {x}, [](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < nd.grad.data.size(); ++i) {
      double s = nd.val.data[i];
      p->grad.data[i] += s * (1.0 - s) * nd.grad.data[i];
    }
  });
}

VPtr abs(const VPtr& x) {
  Tensor out = x->val;
  for (auto& v : out.data) v = std::fabs(v);
  return make_node(std::move(out), {x}, [](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < nd.grad.data.size(); ++i) {
      double v = p->val.data[i];
      double sgn = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      p->grad.data[i] += sgn * nd.grad.data[i];
    }
  });
}

VPtr layer_norm(const VPtr& x, const VPtr& gamma, const VPtr& beta,
                double eps) {
  require_2d(x, "layer_norm");
  int m = x->val.rows(), n = x->val.cols();
  ES_CHECK(gamma->val.cols() == n && beta->val.cols() == n,
           "layer_norm affine shape mismatch");
  Tensor out({m, n});
  Tensor xhat({m, n});
  std::vector<double> inv_sigma(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += x->val.at(i, j);
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      double d = x->val.at(i, j) - mu;
      var += d * d;
    }
    var /= n;
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[static_cast<size_t>(i)] = is;
    for (int j = 0; j < n; ++j) {
      double xh = (x->val.at(i, j) - mu) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = xh * gamma->val.data[j] + beta->val.data[j];
    }
  }
  return make_node(
      std::move(out), {x, gamma, beta},
      [m, n, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Node& nd) {
        const auto& x = nd.parents[0];
        const auto& gamma = nd.parents[1];
        const auto& beta = nd.parents[2];
        for (int i = 0; i < m; ++i) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (int j = 0; j < n; ++j) {
            double gh = nd.grad.at(i, j) * gamma->val.data[j];
            sum_g += gh;
            sum_gx += gh * xhat.at(i, j);
          }
          if (x->requires_grad) {
            double is = inv_sigma[static_cast<size_t>(i)];
            for (int j = 0; j < n; ++j) {
              double gh = nd.grad.at(i, j) * gamma->val.data[j];
              x->grad.at(i, j) +=
                  is * (gh - sum_g / n - xhat.at(i, j) * sum_gx / n);
            }
          }
          if (gamma->requires_grad)
            for (int j = 0; j < n; ++j)
              gamma->grad.data[j] += nd.grad.at(i, j) * xhat.at(i, j);
          if (beta->requires_grad)
            for (int j = 0; j < n; ++j) beta->grad.data[j] += nd.grad.at(i, j);
        }
      });
}

VPtr softmax_rows(const VPtr& x) {
  require_2d(x, "softmax_rows");
  int m = x->val.rows(), n = x->val.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = x->val.at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, x->val.at(i, j));
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      double e = std::exp(x->val.at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < n; ++j) out.at(i, j) /= z;
  }
  return make_node(std::move(out), {x}, [m, n](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (int i = 0; i < m; ++i) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += nd.grad.at(i, j) * nd.val.at(i, j);
      for (int j = 0; j < n; ++j)
        p->grad.at(i, j) += nd.val.at(i, j) * (nd.grad.at(i, j) - dot);
    }
  });
}

VPtr gather_rows(const VPtr& x, std::vector<int> idx) {
  require_2d(x, "gather_rows");
  int n = x->val.cols();
  int src_rows = x->val.rows();
  Tensor out({static_cast<int>(idx.size()), n});
  for (size_t i = 0; i < idx.size(); ++i) {
    ES_CHECK(idx[i] >= 0 && idx[i] < src_rows, "gather_rows index out of range");
    std::copy_n(x->val.data.data() + static_cast<size_t>(idx[i]) * n, n,
                out.data.data() + i * n);
  }
  return make_node(std::move(out), {x}, [n, idx = std::move(idx)](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < idx.size(); ++i) {
      const double* g = nd.grad.data.data() + i * n;
      double* dst = p->grad.data.data() + static_cast<size_t>(idx[i]) * n;
      for (int j = 0; j < n; ++j) dst[j] += g[j];
    }
  });
}

VPtr concat_rows(const VPtr& a, const VPtr& b) {
  require_2d(a, "concat_rows");
  require_2d(b, "concat_rows");
  ES_CHECK(a->val.cols() == b->val.cols(), "concat_rows col mismatch");
  int ra = a->val.rows(), rb = b->val.rows(), n = a->val.cols();
  Tensor out({ra + rb, n});
  std::copy(a->val.data.begin(), a->val.data.end(), out.data.begin());
  std::copy(b->val.data.begin(), b->val.data.end(),
            out.data.begin() + static_cast<size_t>(ra) * n);
  return make_node(std::move(out), {a, b}, [ra, rb, n](Node& nd) {
    const auto& a = nd.parents[0];
    const auto& b = nd.parents[1];
    if (a->requires_grad)
      for (size_t i = 0; i < static_cast<size_t>(ra) * n; ++i)
        a->grad.data[i] += nd.grad.data[i];
    if (b->requires_grad)
      for (size_t i = 0; i < static_cast<size_t>(rb) * n; ++i)
        b->grad.data[i] += nd.grad.data[static_cast<size_t>(ra) * n + i];
  });
}

VPtr concat_cols(const VPtr& a, const VPtr& b) {
  require_2d(a, "concat_cols");
  require_2d(b, "concat_cols");
  ES_CHECK(a->val.rows() == b->val.rows(), "concat_cols row mismatch");
  int m = a->val.rows(), na = a->val.cols(), nb = b->val.cols();
  Tensor out({m, na + nb});
  for (int i = 0; i < m; ++i) {
    std::copy_n(a->val.data.data() + static_cast<size_t>(i) * na, na,
                out.data.data() + static_cast<size_t>(i) * (na + nb));
    std::copy_n(b->val.data.data() + static_cast<size_t>(i) * nb, nb,
                out.data.data() + static_cast<size_t>(i) * (na + nb) + na);
  }
  return make_node(std::move(out), {a, b}, [m, na, nb](Node& nd) {
    const auto& a = nd.parents[0];
    const auto& b = nd.parents[1];
    for (int i = 0; i < m; ++i) {
      const double* g = nd.grad.data.data() + static_cast<size_t>(i) * (na + nb);
      if (a->requires_grad) {
        double* da = a->grad.data.data() + static_cast<size_t>(i) * na;
        for (int j = 0; j < na; ++j) da[j] += g[j];
      }
      if (b->requires_grad) {
        double* db = b->grad.data.data() + static_cast<size_t>(i) * nb;
        for (int j = 0; j < nb; ++j) db[j] += g[na + j];
      }
    }
  });
}

VPtr slice_cols(const VPtr& x, int c0, int c1) {
  require_2d(x, "slice_cols");
  int m = x->val.rows(), n = x->val.cols();
  ES_CHECK(0 <= c0 && c0 < c1 && c1 <= n, "slice_cols range");
  int w = c1 - c0;
  Tensor out({m, w});
  for (int i = 0; i < m; ++i)
    std::copy_n(x->val.data.data() + static_cast<size_t>(i) * n + c0, w,
                out.data.data() + static_cast<size_t>(i) * w);
  return make_node(std::move(out), {x}, [m, n, c0, w](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (int i = 0; i < m; ++i) {
      const double* g = nd.grad.data.data() + static_cast<size_t>(i) * w;
      double* dst = p->grad.data.data() + static_cast<size_t>(i) * n + c0;
      for (int j = 0; j < w; ++j) dst[j] += g[j];
    }
  });
}

VPtr reshape(const VPtr& x, std::vector<int> shape) {
  ES_CHECK(Tensor::numel_of(shape) == x->val.numel(), "reshape numel mismatch");
  Tensor out(shape, x->val.data);
  return make_node(std::move(out), {x}, [](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (size_t i = 0; i < nd.grad.data.size(); ++i)
      p->grad.data[i] += nd.grad.data[i];
  });
}

VPtr global_avg_rows(const VPtr& x) {
  require_2d(x, "global_avg_rows");
  int m = x->val.rows(), n = x->val.cols();
  Tensor out({1, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.data[j] += x->val.at(i, j);
  for (int j = 0; j < n; ++j) out.data[j] /= m;
  return make_node(std::move(out), {x}, [m, n](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        p->grad.at(i, j) += nd.grad.data[j] / m;
  });
}

VPtr upsample_bilinear_2x(const VPtr& x, int h, int w) {
  require_2d(x, "upsample_bilinear_2x");
  ES_CHECK(x->val.rows() == h * w, "token grid row mismatch");
  int c = x->val.cols();
  int oh = 2 * h, ow = 2 * w;
  // source coordinate = (dst + 0.5) / 2 - 0.5, clamped into the grid
  auto axis = [](int o, int size) {
    double s = (o + 0.5) / 2.0 - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(size - 1));
    int lo = static_cast<int>(std::floor(s));
    int hi = std::min(lo + 1, size - 1);
    return std::tuple<int, int, double>(lo, hi, s - lo);
  };
  struct Tap {
    int src;
    double w;
  };
  std::vector<std::array<Tap, 4>> taps(static_cast<size_t>(oh) * ow);
  for (int oi = 0; oi < oh; ++oi) {
    auto [i0, i1, fi] = axis(oi, h);
    for (int oj = 0; oj < ow; ++oj) {
      auto [j0, j1, fj] = axis(oj, w);
      taps[static_cast<size_t>(oi) * ow + oj] = {
          Tap{i0 * w + j0, (1 - fi) * (1 - fj)}, Tap{i0 * w + j1, (1 - fi) * fj},
          Tap{i1 * w + j0, fi * (1 - fj)}, Tap{i1 * w + j1, fi * fj}};
    }
  }
  Tensor out({oh * ow, c});
  for (size_t o = 0; o < taps.size(); ++o) {
    double* dst = out.data.data() + o * c;
    for (const Tap& t : taps[o]) {
      if (t.w == 0.0) continue;
      const double* src = x->val.data.data() + static_cast<size_t>(t.src) * c;
      for (int j = 0; j < c; ++j) dst[j] += t.w * src[j];
    }
  }
  return make_node(std::move(out), {x}, [c, taps = std::move(taps)](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    for (size_t o = 0; o < taps.size(); ++o) {
      const double* g = nd.grad.data.data() + o * c;
      for (const Tap& t : taps[o]) {
        if (t.w == 0.0) continue;
        double* dst = p->grad.data.data() + static_cast<size_t>(t.src) * c;
        for (int j = 0; j < c; ++j) dst[j] += t.w * g[j];
      }
    }
  });
}

VPtr sum_all(const VPtr& x) {
  double s = 0.0;
  for (double v : x->val.data) s += v;
  return make_node(Tensor({1, 1}, {s}), {x}, [](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    double g = nd.grad.data[0];
    for (auto& d : p->grad.data) d += g;
  });
}

VPtr mean_all(const VPtr& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x->val.numel()));
}

VPtr weighted_sum(const VPtr& x, const Tensor& w) {
  ES_CHECK(x->val.same_shape(w), "weighted_sum shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < w.data.size(); ++i) s += x->val.data[i] * w.data[i];
  return make_node(Tensor({1, 1}, {s}), {x}, [w](Node& nd) {
    auto& p = nd.parents[0];
    if (!p->requires_grad) return;
    double g = nd.grad.data[0];
    for (size_t i = 0; i < w.data.size(); ++i)
      p->grad.data[i] += g * w.data[i];
  });
}

void backward(const VPtr& root) {
  ES_CHECK(root->val.numel() == 1, "backward wants a scalar root");
  // iterative post-order topo sort
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next].get();
      ++next;
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->grad.data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

}  // namespace edgesynth::ag
