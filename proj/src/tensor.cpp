/*
 * Copyright 2026 The addlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "addlab/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "addlab/error.hpp"

namespace addlab {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace {

template <typename Real>
using NodePtr = std::shared_ptr<detail::Node<Real>>;

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
          float alpha, const float* a, std::size_t lda, const float* b,
          std::size_t ldb, float beta, float* c, std::size_t ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), alpha, a,
              static_cast<int>(lda), b, static_cast<int>(ldb), beta, c,
              static_cast<int>(ldc));
}

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double beta, double* c, std::size_t ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), alpha, a,
              static_cast<int>(lda), b, static_cast<int>(ldb), beta, c,
              static_cast<int>(ldc));
}

template <typename Real>
Tensor<Real> make_result(Shape shape, std::vector<Real> values,
                         std::vector<NodePtr<Real>> parents,
                         std::function<void(detail::Node<Real>&)> backward) {
  auto node = std::make_shared<detail::Node<Real>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const auto& p) { return p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
bool wants(const NodePtr<Real>& p) {
  return p->requires_grad;
}

// Output shape and, when shapes differ, per-element source indices.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> ia, ib;
  bool same = false;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b) {
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  const std::size_t r = std::max(a.size(), b.size());
  Shape pa(r, 1), pb(r, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (r - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (r - b.size()));
  bc.out.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1)
      shape_error("cannot broadcast " + to_string(a) + " with " + to_string(b));
    bc.out[i] = std::max(pa[i], pb[i]);
  }
  // Strides that are zero along broadcast dims.
  std::vector<std::size_t> sa(r), sb(r);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t i = r; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : acc_a;
    sb[i] = pb[i] == 1 ? 0 : acc_b;
    acc_a *= pa[i];
    acc_b *= pb[i];
  }
  const std::size_t n = numel(bc.out);
  bc.ia.resize(n);
  bc.ib.resize(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bc.ia[i] = oa;
    bc.ib[i] = ob;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < bc.out[d]) break;
      oa -= sa[d] * idx[d];
      ob -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return bc;
}

enum class BinOp { add, sub, mul };

template <typename Real>
Tensor<Real> binary(const Tensor<Real>& a, const Tensor<Real>& b, BinOp op) {
  auto bc = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape()));
  const std::size_t n = numel(bc->out);
  std::vector<Real> out(n);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const Real x = bc->same ? av[i] : av[bc->ia[i]];
    const Real y = bc->same ? bv[i] : bv[bc->ib[i]];
    out[i] = op == BinOp::add ? x + y : op == BinOp::sub ? x - y : x * y;
  }
  return make_result<Real>(
      bc->out, std::move(out), {a.node(), b.node()},
      [bc, op, n](detail::Node<Real>& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        const Real* g = self.grad.data();
        if (pa->requires_grad) {
          Real* ga = pa->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ib = bc->same ? i : bc->ib[i];
            const Real d = op == BinOp::mul ? g[i] * pb->value[ib] : g[i];
            ga[bc->same ? i : bc->ia[i]] += d;
          }
        }
        if (pb->requires_grad) {
          Real* gb = pb->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ia = bc->same ? i : bc->ia[i];
            const Real d = op == BinOp::mul   ? g[i] * pa->value[ia]
                           : op == BinOp::sub ? -g[i]
                                              : g[i];
            gb[bc->same ? i : bc->ib[i]] += d;
          }
        }
      });
}

// Unary op whose derivative is expressed through input x and output y.
template <typename Real, typename F, typename D>
Tensor<Real> unary(const Tensor<Real>& x, F f, D dfdx) {
  const auto xv = x.data();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result<Real>(x.shape(), std::move(out), {x.node()},
                           [dfdx](detail::Node<Real>& self) {
                             auto& p = self.parents[0];
                             Real* gp = p->grad_buffer();
                             for (std::size_t i = 0; i < self.value.size(); ++i)
                               gp[i] += self.grad[i] * dfdx(p->value[i], self.value[i]);
                           });
}

// out[i] = in[map[i]]; backward scatters.
template <typename Real>
Tensor<Real> gather(const Tensor<Real>& x, Shape shape,
                    std::shared_ptr<std::vector<std::size_t>> map) {
  const auto xv = x.data();
  std::vector<Real> out(map->size());
  for (std::size_t i = 0; i < map->size(); ++i) out[i] = xv[(*map)[i]];
  return make_result<Real>(std::move(shape), std::move(out), {x.node()},
                           [map](detail::Node<Real>& self) {
                             Real* gp = self.parents[0]->grad_buffer();
                             for (std::size_t i = 0; i < map->size(); ++i)
                               gp[(*map)[i]] += self.grad[i];
                           });
}

}  // namespace

template <typename Real>
Tensor<Real>::Tensor() : node_(std::make_shared<detail::Node<Real>>()) {}

template <typename Real>
Tensor<Real> Tensor<Real>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), Real(0), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::full(Shape shape, Real value, bool requires_grad) {
  const std::size_t n = addlab::numel(shape);
  return from(std::move(shape), std::vector<Real>(n, value), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::from(Shape shape, std::vector<Real> values,
                                bool requires_grad) {
  if (addlab::numel(shape) != values.size())
    shape_error("shape " + to_string(shape) + " does not hold " +
                std::to_string(values.size()) + " values");
  auto node = std::make_shared<detail::Node<Real>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename Real>
Tensor<Real> Tensor<Real>::scalar(Real value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

template <typename Real>
Real Tensor<Real>::item() const {
  if (numel() != 1)
    fail(Status::usage, Reason::shape,
         "item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

template <typename Real>
Tensor<Real> Tensor<Real>::detach() const {
  return from(shape(), node_->value, false);
}

template <typename Real>
BackwardStats backward(const Tensor<Real>& loss) {
  if (loss.numel() != 1)
    fail(Status::usage, Reason::shape,
         "backward() needs a scalar, got " + to_string(loss.shape()));
  BackwardStats stats;
  if (!loss.requires_grad()) return stats;

  // Iterative post-order DFS over requires_grad nodes.
  using Node = detail::Node<Real>;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->grad_buffer()[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    ++stats.nodes_visited;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  return stats;
}

namespace ops {

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  return binary(a, b, BinOp::add);
}

template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
  return binary(a, b, BinOp::sub);
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  return binary(a, b, BinOp::mul);
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& x, Real factor) {
  return unary(x, [factor](Real v) { return v * factor; },
               [factor](Real, Real) { return factor; });
}

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x) {
  // NaN passes through so a poisoned batch still surfaces as a non-finite loss.
  return unary(x, [](Real v) { return v <= Real(0) ? Real(0) : v; },
               [](Real v, Real) { return v > Real(0) ? Real(1) : Real(0); });
}

template <typename Real>
Tensor<Real> sigmoid(const Tensor<Real>& x) {
  return unary(
      x,
      [](Real v) {
        if (v >= Real(0)) return Real(1) / (Real(1) + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real(1) + e);
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

template <typename Real>
Tensor<Real> exp(const Tensor<Real>& x) {
  return unary(x, [](Real v) { return std::exp(v); },
               [](Real, Real y) { return y; });
}

template <typename Real>
Tensor<Real> log(const Tensor<Real>& x) {
  return unary(x, [](Real v) { return std::log(v); },
               [](Real v, Real) { return Real(1) / v; });
}

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.rank() < 2 || b.rank() < 2)
    shape_error("matmul needs rank >= 2 operands");
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t k = a.shape()[a.rank() - 1];
  const std::size_t kb = b.shape()[b.rank() - 2];
  const std::size_t n = b.shape()[b.rank() - 1];
  if (k != kb)
    shape_error("matmul inner dims differ: " + to_string(a.shape()) + " x " +
                to_string(b.shape()));
  const std::size_t batch = a.numel() / (m * k);
  const bool shared_b = b.rank() == 2;
  if (!shared_b) {
    if (b.rank() != a.rank() ||
        !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()))
      shape_error("matmul batch dims differ: " + to_string(a.shape()) + " x " +
                  to_string(b.shape()));
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<Real> out(batch * m * n);
  const Real* av = a.data().data();
  const Real* bv = b.data().data();
  for (std::size_t i = 0; i < batch; ++i)
    gemm(false, false, m, n, k, Real(1), av + i * m * k, k,
         bv + (shared_b ? 0 : i * k * n), n, Real(0), out.data() + i * m * n, n);
  return make_result<Real>(
      std::move(out_shape), std::move(out), {a.node(), b.node()},
      [=](detail::Node<Real>& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        const Real* g = self.grad.data();
        for (std::size_t i = 0; i < batch; ++i) {
          const Real* gi = g + i * m * n;
          const Real* bi = pb->value.data() + (shared_b ? 0 : i * k * n);
          const Real* ai = pa->value.data() + i * m * k;
          if (pa->requires_grad)
            gemm(false, true, m, k, n, Real(1), gi, n, bi, n, Real(1),
                 pa->grad_buffer() + i * m * k, k);
          if (pb->requires_grad)
            gemm(true, false, k, n, m, Real(1), ai, k, gi, n, Real(1),
                 pb->grad_buffer() + (shared_b ? 0 : i * k * n), n);
        }
      });
}

template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight,
                    const Tensor<Real>& bias) {
  if (weight.rank() != 2 || x.rank() < 1)
    shape_error("linear needs x (..., in) and weight (in, out)");
  const std::size_t in = weight.dim(0);
  const std::size_t out_dim = weight.dim(1);
  if (x.shape().back() != in)
    shape_error("linear input " + to_string(x.shape()) + " vs weight " +
                to_string(weight.shape()));
  const bool has_bias = bias.numel() > 0;
  if (has_bias && bias.numel() != out_dim)
    shape_error("linear bias " + to_string(bias.shape()) + " vs out " +
                std::to_string(out_dim));
  const std::size_t rows = x.numel() / in;
  Shape shape = x.shape();
  shape.back() = out_dim;
  std::vector<Real> out(rows * out_dim);
  if (has_bias)
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(bias.data().begin(), bias.data().end(),
                out.begin() + r * out_dim);
  gemm(false, false, rows, out_dim, in, Real(1), x.data().data(), in,
       weight.data().data(), out_dim, has_bias ? Real(1) : Real(0), out.data(),
       out_dim);
  std::vector<NodePtr<Real>> parents{x.node(), weight.node()};
  if (has_bias) parents.push_back(bias.node());
  return make_result<Real>(
      std::move(shape), std::move(out), std::move(parents),
      [=](detail::Node<Real>& self) {
        auto& px = self.parents[0];
        auto& pw = self.parents[1];
        const Real* g = self.grad.data();
        if (px->requires_grad)
          gemm(false, true, rows, in, out_dim, Real(1), g, out_dim,
               pw->value.data(), out_dim, Real(1), px->grad_buffer(), in);
        if (pw->requires_grad)
          gemm(true, false, in, out_dim, rows, Real(1), px->value.data(), in, g,
               out_dim, Real(1), pw->grad_buffer(), out_dim);
        if (has_bias && self.parents[2]->requires_grad) {
          Real* gb = self.parents[2]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[r * out_dim + j];
        }
      });
}

template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& x_in, const Tensor<Real>& kernels,
                    const Tensor<Real>& bias, std::size_t stride,
                    std::size_t pad) {
  if (x_in.rank() == 3) {
    Shape s4{1, x_in.dim(0), x_in.dim(1), x_in.dim(2)};
    auto y = conv2d(reshape(x_in, s4), kernels, bias, stride, pad);
    return reshape(y, Shape{y.dim(1), y.dim(2), y.dim(3)});
  }
  if (x_in.rank() != 4 || kernels.rank() != 4)
    shape_error("conv2d needs x (B,C,H,W) and kernels (O,C,kh,kw)");
  if (stride == 0) shape_error("conv2d stride must be positive");
  const std::size_t B = x_in.dim(0), C = x_in.dim(1), H = x_in.dim(2),
                    W = x_in.dim(3);
  const std::size_t O = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != C)
    shape_error("conv2d channels: input " + to_string(x_in.shape()) +
                ", kernels " + to_string(kernels.shape()));
  if (kh > H + 2 * pad || kw > W + 2 * pad || kh == 0 || kw == 0)
    shape_error("conv2d kernel " + to_string(kernels.shape()) +
                " larger than padded input " + to_string(x_in.shape()));
  const bool has_bias = bias.numel() > 0;
  if (has_bias && bias.numel() != O) shape_error("conv2d bias size");
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - kw) / stride + 1;
  const std::size_t K = C * kh * kw, P = Ho * Wo;

  auto cols = std::make_shared<std::vector<Real>>(B * K * P, Real(0));
  const Real* xv = x_in.data().data();
  for (std::size_t b = 0; b < B; ++b) {
    Real* col = cols->data() + b * K * P;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j) {
          Real* row = col + ((c * kh + i) * kw + j) * P;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + i) -
                                      static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            const Real* src = xv + ((b * C + c) * H + iy) * W;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + j) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(W))
                row[oy * Wo + ox] = src[ix];
            }
          }
        }
  }
  std::vector<Real> out(B * O * P);
  for (std::size_t b = 0; b < B; ++b) {
    Real* ob = out.data() + b * O * P;
    if (has_bias)
      for (std::size_t o = 0; o < O; ++o)
        std::fill(ob + o * P, ob + (o + 1) * P, bias.data()[o]);
    gemm(false, false, O, P, K, Real(1), kernels.data().data(), K,
         cols->data() + b * K * P, P, has_bias ? Real(1) : Real(0), ob, P);
  }
  std::vector<NodePtr<Real>> parents{x_in.node(), kernels.node()};
  if (has_bias) parents.push_back(bias.node());
  return make_result<Real>(
      Shape{B, O, Ho, Wo}, std::move(out), std::move(parents),
      [=](detail::Node<Real>& self) {
        auto& px = self.parents[0];
        auto& pk = self.parents[1];
        const Real* g = self.grad.data();
        std::vector<Real> dcol;
        if (px->requires_grad) dcol.resize(K * P);
        for (std::size_t b = 0; b < B; ++b) {
          const Real* gb = g + b * O * P;
          if (pk->requires_grad)
            gemm(false, true, O, K, P, Real(1), gb, P, cols->data() + b * K * P,
                 P, Real(1), pk->grad_buffer(), K);
          if (has_bias && self.parents[2]->requires_grad) {
            Real* gbias = self.parents[2]->grad_buffer();
            for (std::size_t o = 0; o < O; ++o)
              for (std::size_t p = 0; p < P; ++p) gbias[o] += gb[o * P + p];
          }
          if (px->requires_grad) {
            gemm(true, false, K, P, O, Real(1), pk->value.data(), K, gb, P,
                 Real(0), dcol.data(), P);
            Real* gx = px->grad_buffer();
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t i = 0; i < kh; ++i)
                for (std::size_t j = 0; j < kw; ++j) {
                  const Real* row = dcol.data() + ((c * kh + i) * kw + j) * P;
                  for (std::size_t oy = 0; oy < Ho; ++oy) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * stride + i) -
                        static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                    Real* dst = gx + ((b * C + c) * H + iy) * W;
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                      const std::ptrdiff_t ix =
                          static_cast<std::ptrdiff_t>(ox * stride + j) -
                          static_cast<std::ptrdiff_t>(pad);
                      if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(W))
                        dst[ix] += row[oy * Wo + ox];
                    }
                  }
                }
          }
        }
      });
}

template <typename Real>
Tensor<Real> pool2d(const Tensor<Real>& x, PoolKind kind, std::size_t k,
                    std::size_t stride) {
  if (x.rank() == 3) {
    auto y = pool2d(reshape(x, Shape{1, x.dim(0), x.dim(1), x.dim(2)}), kind, k,
                    stride);
    Shape s(y.shape().begin() + 1, y.shape().end());
    return reshape(y, s);
  }
  if (x.rank() != 4) shape_error("pool2d needs (B,C,H,W) or (C,H,W)");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t planes = B * C;
  if (kind == PoolKind::global_avg) {
    if (H * W == 0) shape_error("global pool over empty map");
    const std::size_t hw = H * W;
    std::vector<Real> out(planes);
    for (std::size_t p = 0; p < planes; ++p) {
      Real s = 0;
      for (std::size_t i = 0; i < hw; ++i) s += x.data()[p * hw + i];
      out[p] = s / static_cast<Real>(hw);
    }
    return make_result<Real>(Shape{B, C}, std::move(out), {x.node()},
                             [planes, hw](detail::Node<Real>& self) {
                               Real* gx = self.parents[0]->grad_buffer();
                               for (std::size_t p = 0; p < planes; ++p) {
                                 const Real g = self.grad[p] / static_cast<Real>(hw);
                                 for (std::size_t i = 0; i < hw; ++i)
                                   gx[p * hw + i] += g;
                               }
                             });
  }
  if (k == 0 || stride == 0 || k > H || k > W)
    shape_error("pool window " + std::to_string(k) + " does not fit " +
                to_string(x.shape()));
  const std::size_t Ho = (H - k) / stride + 1, Wo = (W - k) / stride + 1;
  std::vector<Real> out(planes * Ho * Wo);
  auto argmax = std::make_shared<std::vector<std::size_t>>();
  if (kind == PoolKind::max) argmax->resize(out.size());
  const Real* xv = x.data().data();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        const std::size_t o = (p * Ho + oy) * Wo + ox;
        Real acc = kind == PoolKind::max ? -std::numeric_limits<Real>::infinity()
                                         : Real(0);
        std::size_t best = 0;
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t src = (p * H + oy * stride + i) * W + ox * stride + j;
            if (kind == PoolKind::max) {
              if (xv[src] > acc) {
                acc = xv[src];
                best = src;
              }
            } else {
              acc += xv[src];
            }
          }
        if (kind == PoolKind::max) {
          out[o] = acc;
          (*argmax)[o] = best;
        } else {
          out[o] = acc / static_cast<Real>(k * k);
        }
      }
  return make_result<Real>(
      Shape{B, C, Ho, Wo}, std::move(out), {x.node()},
      [=](detail::Node<Real>& self) {
        Real* gx = self.parents[0]->grad_buffer();
        if (kind == PoolKind::max) {
          for (std::size_t o = 0; o < argmax->size(); ++o)
            gx[(*argmax)[o]] += self.grad[o];
          return;
        }
        const Real inv = Real(1) / static_cast<Real>(k * k);
        for (std::size_t p = 0; p < planes; ++p)
          for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const Real g = self.grad[(p * Ho + oy) * Wo + ox] * inv;
              for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j)
                  gx[(p * H + oy * stride + i) * W + ox * stride + j] += g;
            }
      });
}

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& x, std::size_t axis) {
  if (axis >= x.rank()) shape_error("softmax axis out of range");
  std::size_t outer = 1, inner = 1;
  const std::size_t n = x.dim(axis);
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  std::vector<Real> out(x.numel());
  const Real* xv = x.data().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t a = 0; a < n; ++a) mx = std::max(mx, xv[base + a * inner]);
      Real s = 0;
      for (std::size_t a = 0; a < n; ++a) {
        const Real e = std::exp(xv[base + a * inner] - mx);
        out[base + a * inner] = e;
        s += e;
      }
      for (std::size_t a = 0; a < n; ++a) out[base + a * inner] /= s;
    }
  return make_result<Real>(
      x.shape(), std::move(out), {x.node()},
      [=](detail::Node<Real>& self) {
        Real* gx = self.parents[0]->grad_buffer();
        const Real* y = self.value.data();
        const Real* g = self.grad.data();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            Real dot = 0;
            for (std::size_t a = 0; a < n; ++a)
              dot += g[base + a * inner] * y[base + a * inner];
            for (std::size_t a = 0; a < n; ++a) {
              const std::size_t i = base + a * inner;
              gx[i] += y[i] * (g[i] - dot);
            }
          }
      });
}

template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gain,
                        const Tensor<Real>& bias) {
  if (x.rank() < 1) shape_error("layer_norm on scalar");
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d)
    shape_error("layer_norm affine params must have size " + std::to_string(d));
  const std::size_t rows = x.numel() / d;
  constexpr Real kEps = Real(1e-5);
  auto xhat = std::make_shared<std::vector<Real>>(x.numel());
  auto inv_std = std::make_shared<std::vector<Real>>(rows);
  std::vector<Real> out(x.numel());
  const Real* xv = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = xv + r * d;
    Real mu = 0;
    for (std::size_t i = 0; i < d; ++i) mu += row[i];
    mu /= static_cast<Real>(d);
    Real var = 0;
    for (std::size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<Real>(d);
    const Real is = Real(1) / std::sqrt(var + kEps);
    (*inv_std)[r] = is;
    for (std::size_t i = 0; i < d; ++i) {
      const Real h = (row[i] - mu) * is;
      (*xhat)[r * d + i] = h;
      out[r * d + i] = h * gain.data()[i] + bias.data()[i];
    }
  }
  return make_result<Real>(
      x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
      [=](detail::Node<Real>& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        const Real* g = self.grad.data();
        const Real* gv = pg->value.data();
        for (std::size_t r = 0; r < rows; ++r) {
          const Real* gr = g + r * d;
          const Real* hr = xhat->data() + r * d;
          if (pg->requires_grad) {
            Real* gg = pg->grad_buffer();
            for (std::size_t i = 0; i < d; ++i) gg[i] += gr[i] * hr[i];
          }
          if (pb->requires_grad) {
            Real* gb = pb->grad_buffer();
            for (std::size_t i = 0; i < d; ++i) gb[i] += gr[i];
          }
          if (px->requires_grad) {
            Real m1 = 0, m2 = 0;
            for (std::size_t i = 0; i < d; ++i) {
              const Real dh = gr[i] * gv[i];
              m1 += dh;
              m2 += dh * hr[i];
            }
            m1 /= static_cast<Real>(d);
            m2 /= static_cast<Real>(d);
            Real* gx = px->grad_buffer() + r * d;
            for (std::size_t i = 0; i < d; ++i)
              gx[i] += (*inv_std)[r] * (gr[i] * gv[i] - m1 - hr[i] * m2);
          }
        }
      });
}

template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits,
                           std::span<const int> labels) {
  if (logits.rank() != 2) shape_error("cross_entropy needs logits (B, K)");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (labels.size() != B)
    shape_error("cross_entropy: " + std::to_string(labels.size()) +
                " labels for batch of " + std::to_string(B));
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= K)
      fail(Status::data, Reason::label,
           "label " + std::to_string(l) + " outside [0, " + std::to_string(K) + ")");
  auto probs = std::make_shared<std::vector<Real>>(B * K);
  auto lab = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  Real total = 0;
  const Real* z = logits.data().data();
  for (std::size_t b = 0; b < B; ++b) {
    const Real* row = z + b * K;
    const Real mx = *std::max_element(row, row + K);
    Real s = 0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(row[k] - mx);
    const Real lse = mx + std::log(s);
    for (std::size_t k = 0; k < K; ++k) (*probs)[b * K + k] = std::exp(row[k] - lse);
    total += lse - row[(*lab)[b]];
  }
  return make_result<Real>(
      Shape{}, {total / static_cast<Real>(B)}, {logits.node()},
      [=](detail::Node<Real>& self) {
        Real* gx = self.parents[0]->grad_buffer();
        const Real g = self.grad[0] / static_cast<Real>(B);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t k = 0; k < K; ++k) {
            const Real onehot = static_cast<int>(k) == (*lab)[b] ? Real(1) : Real(0);
            gx[b * K + k] += g * ((*probs)[b * K + k] - onehot);
          }
      });
}

template <typename Real>
Tensor<Real> gumbel_softmax_st(const Tensor<Real>& logits, Real tau,
                               CounterRng& rng, std::vector<Real>* soft_out) {
  if (!(tau > Real(0))) parameter_error("gumbel temperature must be positive");
  if (logits.rank() < 1 || logits.shape().back() == 0)
    shape_error("gumbel_softmax_st needs a non-empty last axis");
  const std::size_t K = logits.shape().back();
  const std::size_t rows = logits.numel() / K;
  auto soft = std::make_shared<std::vector<Real>>(logits.numel());
  std::vector<Real> hard(logits.numel(), Real(0));
  const Real* z = logits.data().data();
  std::vector<Real> y(K);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < K; ++k) {
      y[k] = (z[r * K + k] + static_cast<Real>(rng.gumbel())) / tau;
      if (y[k] > y[best]) best = k;
    }
    const Real mx = y[best];
    Real s = 0;
    for (std::size_t k = 0; k < K; ++k) {
      (*soft)[r * K + k] = std::exp(y[k] - mx);
      s += (*soft)[r * K + k];
    }
    for (std::size_t k = 0; k < K; ++k) (*soft)[r * K + k] /= s;
    hard[r * K + best] = Real(1);
  }
  if (soft_out) *soft_out = *soft;
  return make_result<Real>(
      logits.shape(), std::move(hard), {logits.node()},
      [=](detail::Node<Real>& self) {
        Real* gx = self.parents[0]->grad_buffer();
        const Real* g = self.grad.data();
        for (std::size_t r = 0; r < rows; ++r) {
          Real dot = 0;
          for (std::size_t k = 0; k < K; ++k) dot += g[r * K + k] * (*soft)[r * K + k];
          for (std::size_t k = 0; k < K; ++k)
            gx[r * K + k] += (*soft)[r * K + k] * (g[r * K + k] - dot) / tau;
        }
      });
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape) {
  if (numel(shape) != x.numel())
    shape_error("cannot reshape " + to_string(x.shape()) + " to " +
                to_string(shape));
  std::vector<Real> out(x.data().begin(), x.data().end());
  return make_result<Real>(std::move(shape), std::move(out), {x.node()},
                           [](detail::Node<Real>& self) {
                             Real* gx = self.parents[0]->grad_buffer();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               gx[i] += self.grad[i];
                           });
}

template <typename Real>
Tensor<Real> permute(const Tensor<Real>& x, const std::vector<std::size_t>& perm) {
  const std::size_t r = x.rank();
  if (perm.size() != r) shape_error("permute rank mismatch");
  std::vector<bool> used(r, false);
  for (auto p : perm) {
    if (p >= r || used[p]) shape_error("invalid permutation");
    used[p] = true;
  }
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.dim(i);
  Shape out_shape(r);
  std::vector<std::size_t> step(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = x.dim(perm[i]);
    step[i] = in_stride[perm[i]];
  }
  auto map = std::make_shared<std::vector<std::size_t>>(x.numel());
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < map->size(); ++i) {
    (*map)[i] = src;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      src += step[d];
      if (idx[d] < out_shape[d]) break;
      src -= step[d] * idx[d];
      idx[d] = 0;
    }
  }
  return gather(x, std::move(out_shape), std::move(map));
}

template <typename Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& xs, std::size_t axis) {
  if (xs.empty()) shape_error("concat of nothing");
  const Shape& ref = xs[0].shape();
  if (axis >= ref.size()) shape_error("concat axis out of range");
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& t : xs) {
    if (t.rank() != ref.size()) shape_error("concat rank mismatch");
    for (std::size_t i = 0; i < ref.size(); ++i)
      if (i != axis && t.dim(i) != ref[i])
        shape_error("concat shape mismatch: " + to_string(ref) + " vs " +
                    to_string(t.shape()));
    out_shape[axis] += t.dim(axis);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  const std::size_t total = out_shape[axis];
  std::vector<Real> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& t : xs) {
    offsets.push_back(off);
    const std::size_t len = t.dim(axis) * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(t.data().data() + o * len, len,
                  out.data() + (o * total + off) * inner);
    off += t.dim(axis);
  }
  std::vector<NodePtr<Real>> parents;
  std::vector<std::size_t> sizes;
  for (const auto& t : xs) {
    parents.push_back(t.node());
    sizes.push_back(t.dim(axis));
  }
  return make_result<Real>(
      std::move(out_shape), std::move(out), std::move(parents),
      [=](detail::Node<Real>& self) {
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
          auto& node = self.parents[p];
          if (!node->requires_grad) continue;
          Real* gx = node->grad_buffer();
          const std::size_t len = sizes[p] * inner;
          for (std::size_t o = 0; o < outer; ++o) {
            const Real* g = self.grad.data() + (o * total + offsets[p]) * inner;
            for (std::size_t i = 0; i < len; ++i) gx[o * len + i] += g[i];
          }
        }
      });
}

template <typename Real>
Tensor<Real> stack(const std::vector<Tensor<Real>>& xs, std::size_t axis) {
  if (xs.empty()) shape_error("stack of nothing");
  if (axis > xs[0].rank()) shape_error("stack axis out of range");
  std::vector<Tensor<Real>> expanded;
  expanded.reserve(xs.size());
  for (const auto& t : xs) {
    if (t.shape() != xs[0].shape()) shape_error("stack needs equal shapes");
    Shape s = t.shape();
    s.insert(s.begin() + axis, 1);
    expanded.push_back(reshape(t, s));
  }
  return concat(expanded, axis);
}

template <typename Real>
Tensor<Real> slice(const Tensor<Real>& x, std::size_t axis, std::size_t begin,
                   std::size_t end) {
  if (axis >= x.rank() || begin > end || end > x.dim(axis))
    shape_error("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                ") on axis " + std::to_string(axis) + " of " + to_string(x.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t n = x.dim(axis), len = end - begin;
  auto map = std::make_shared<std::vector<std::size_t>>();
  map->reserve(outer * len * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = begin; a < end; ++a)
      for (std::size_t i = 0; i < inner; ++i)
        map->push_back((o * n + a) * inner + i);
  Shape s = x.shape();
  s[axis] = len;
  return gather(x, std::move(s), std::move(map));
}

template <typename Real>
Tensor<Real> select(const Tensor<Real>& x, std::size_t axis, std::size_t index) {
  auto t = slice(x, axis, index, index + 1);
  Shape s = x.shape();
  s.erase(s.begin() + axis);
  return reshape(t, s);
}

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x) {
  Real s = 0;
  for (Real v : x.data()) s += v;
  return make_result<Real>(Shape{}, {s}, {x.node()},
                           [](detail::Node<Real>& self) {
                             Real* gx = self.parents[0]->grad_buffer();
                             const std::size_t n = self.parents[0]->value.size();
                             for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[0];
                           });
}

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& x) {
  if (x.numel() == 0) shape_error("mean of empty tensor");
  return scale(sum(x), Real(1) / static_cast<Real>(x.numel()));
}

template <typename Real>
Tensor<Real> mean_axis(const Tensor<Real>& x, std::size_t axis) {
  if (axis >= x.rank() || x.dim(axis) == 0) shape_error("mean_axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t n = x.dim(axis);
  std::vector<Real> out(outer * inner, Real(0));
  const Real* xv = x.data().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t i = 0; i < inner; ++i)
        out[o * inner + i] += xv[(o * n + a) * inner + i];
  for (Real& v : out) v /= static_cast<Real>(n);
  Shape s = x.shape();
  s.erase(s.begin() + axis);
  return make_result<Real>(
      std::move(s), std::move(out), {x.node()},
      [=](detail::Node<Real>& self) {
        Real* gx = self.parents[0]->grad_buffer();
        const Real inv = Real(1) / static_cast<Real>(n);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t a = 0; a < n; ++a)
            for (std::size_t i = 0; i < inner; ++i)
              gx[(o * n + a) * inner + i] += self.grad[o * inner + i] * inv;
      });
}

}  // namespace ops

#define ADDLAB_INSTANTIATE(R)                                                  \
  template class Tensor<R>;                                                    \
  template BackwardStats backward<R>(const Tensor<R>&);                        \
  namespace ops {                                                              \
  template Tensor<R> add(const Tensor<R>&, const Tensor<R>&);                  \
  template Tensor<R> sub(const Tensor<R>&, const Tensor<R>&);                  \
  template Tensor<R> mul(const Tensor<R>&, const Tensor<R>&);                  \
  template Tensor<R> scale(const Tensor<R>&, R);                               \
  template Tensor<R> relu(const Tensor<R>&);                                   \
  template Tensor<R> sigmoid(const Tensor<R>&);                                \
  template Tensor<R> exp(const Tensor<R>&);                                    \
  template Tensor<R> log(const Tensor<R>&);                                    \
  template Tensor<R> matmul(const Tensor<R>&, const Tensor<R>&);               \
  template Tensor<R> linear(const Tensor<R>&, const Tensor<R>&,                \
                            const Tensor<R>&);                                 \
  template Tensor<R> conv2d(const Tensor<R>&, const Tensor<R>&,                \
                            const Tensor<R>&, std::size_t, std::size_t);       \
  template Tensor<R> pool2d(const Tensor<R>&, PoolKind, std::size_t,           \
                            std::size_t);                                      \
  template Tensor<R> softmax(const Tensor<R>&, std::size_t);                   \
  template Tensor<R> layer_norm(const Tensor<R>&, const Tensor<R>&,            \
                                const Tensor<R>&);                             \
  template Tensor<R> cross_entropy(const Tensor<R>&, std::span<const int>);    \
  template Tensor<R> gumbel_softmax_st(const Tensor<R>&, R, CounterRng&,       \
                                       std::vector<R>*);                       \
  template Tensor<R> reshape(const Tensor<R>&, Shape);                         \
  template Tensor<R> permute(const Tensor<R>&, const std::vector<std::size_t>&); \
  template Tensor<R> concat(const std::vector<Tensor<R>>&, std::size_t);       \
  template Tensor<R> stack(const std::vector<Tensor<R>>&, std::size_t);        \
  template Tensor<R> slice(const Tensor<R>&, std::size_t, std::size_t,         \
                           std::size_t);                                       \
  template Tensor<R> select(const Tensor<R>&, std::size_t, std::size_t);       \
  template Tensor<R> sum(const Tensor<R>&);                                    \
  template Tensor<R> mean(const Tensor<R>&);                                   \
  template Tensor<R> mean_axis(const Tensor<R>&, std::size_t);                 \
  }

ADDLAB_INSTANTIATE(float)
ADDLAB_INSTANTIATE(double)

#undef ADDLAB_INSTANTIATE

}  // namespace addlab
