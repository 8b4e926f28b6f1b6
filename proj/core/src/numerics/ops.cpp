#include "exattn/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace exattn::num {
namespace {

// Plain kernels on tensors; the differentiable ops are built from these.
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
          bool trans_a, bool trans_b) {
  // c[m,n] += op(a)[m,k] * op(b)[k,n]
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      if (!trans_b) {
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      }
    }
  }
}

struct MatDims {
  std::size_t m, k, n;
  Tensor::Shape out;
};

MatDims matmul_dims(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || b.rank() == 0 || (a.rank() == 1 && b.rank() == 1)) {
    throw std::invalid_argument("matmul: unsupported operand ranks " + shape_string(a.shape()) + " x " +
                                shape_string(b.shape()));
  }
  const std::size_t m = a.rank() == 2 ? a.shape()[0] : 1;
  const std::size_t k = a.rank() == 2 ? a.shape()[1] : a.shape()[0];
  const std::size_t kb = b.shape()[0];
  const std::size_t n = b.rank() == 2 ? b.shape()[1] : 1;
  if (k != kb) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_string(a.shape()) + " x " +
                                shape_string(b.shape()));
  }
  Tensor::Shape out;
  if (a.rank() == 2) out.push_back(m);
  if (b.rank() == 2) out.push_back(n);
  return {m, k, n, out};
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

bool needs(const Node& n, std::size_t i) { return n.inputs[i]->requires_grad; }

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const MatDims d = matmul_dims(a.value(), b.value());
  Tensor out(d.out, 0.0);
  gemm(a.value().values().data(), b.value().values().data(), out.values().data(), d.m, d.k, d.n, false, false);
  return record(std::move(out), {a, b}, [d](Node& n) {
    const Tensor& g = n.grad;
    if (needs(n, 0)) {
      const Tensor& bv = n.inputs[1]->value;
      Tensor ga(n.inputs[0]->value.shape(), 0.0);
      // ga[m,k] = g[m,n] * b^T
      gemm(g.values().data(), bv.values().data(), ga.values().data(), d.m, d.n, d.k, false, true);
      n.inputs[0]->accumulate(ga);
    }
    if (needs(n, 1)) {
      const Tensor& av = n.inputs[0]->value;
      Tensor gb(n.inputs[1]->value.shape(), 0.0);
      // gb[k,n] = a^T * g
      gemm(av.values().data(), g.values().data(), gb.values().data(), d.k, d.m, d.n, true, false);
      n.inputs[1]->accumulate(gb);
    }
  });
}

Var transpose(const Var& a) {
  const Tensor& v = a.value();
  if (v.rank() != 2) throw std::invalid_argument("transpose: expects a matrix");
  const std::size_t r = v.rows(), c = v.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = v(i, j);
  return record(std::move(out), {a}, [r, c](Node& n) {
    Tensor g({r, c});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g(i, j) = n.grad(j, i);
    n.inputs[0]->accumulate(g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return record(std::move(out), {a, b}, [](Node& n) {
    if (needs(n, 0)) n.inputs[0]->accumulate(n.grad);
    if (needs(n, 1)) n.inputs[1]->accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return record(std::move(out), {a, b}, [](Node& n) {
    if (needs(n, 0)) n.inputs[0]->accumulate(n.grad);
    if (needs(n, 1)) {
      Tensor g = n.grad;
      for (double& x : g.values()) x = -x;
      n.inputs[1]->accumulate(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return record(std::move(out), {a, b}, [](Node& n) {
    const auto g = n.grad.values();
    for (int side = 0; side < 2; ++side) {
      if (!needs(n, side)) continue;
      const auto other = n.inputs[1 - side]->value.values();
      Tensor d(n.grad.shape());
      auto dv = d.values();
      for (std::size_t i = 0; i < dv.size(); ++i) dv[i] = g[i] * other[i];
      n.inputs[side]->accumulate(d);
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& x : out.values()) x *= factor;
  return record(std::move(out), {a}, [factor](Node& n) {
    Tensor g = n.grad;
    for (double& x : g.values()) x *= factor;
    n.inputs[0]->accumulate(g);
  });
}

Var scale_rows(const Var& m, const Var& w) {
  const Tensor& mv = m.value();
  const Tensor& wv = w.value();
  if (mv.rank() != 2 || wv.rank() != 1 || wv.size() != mv.rows()) {
    throw std::invalid_argument("scale_rows: expected [N,d] and [N], got " + shape_string(mv.shape()) + " and " +
                                shape_string(wv.shape()));
  }
  const std::size_t rows = mv.rows(), cols = mv.cols();
  Tensor out = mv;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) *= wv[i];
  return record(std::move(out), {m, w}, [rows, cols](Node& n) {
    const Tensor& mval = n.inputs[0]->value;
    const Tensor& wval = n.inputs[1]->value;
    if (needs(n, 0)) {
      Tensor g = n.grad;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) g(i, j) *= wval[i];
      n.inputs[0]->accumulate(g);
    }
    if (needs(n, 1)) {
      Tensor g({rows}, 0.0);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) g[i] += n.grad(i, j) * mval(i, j);
      n.inputs[1]->accumulate(g);
    }
  });
}

Var tanh(const Var& a) {
  Tensor out = a.value();
  for (double& x : out.values()) x = std::tanh(x);
  return record(out, {a}, [out](Node& n) {
    Tensor g = n.grad;
    auto gv = g.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= 1.0 - ov[i] * ov[i];
    n.inputs[0]->accumulate(g);
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (double& x : out.values()) x = std::max(x, 0.0);
  return record(std::move(out), {a}, [](Node& n) {
    Tensor g = n.grad;
    auto gv = g.values();
    auto in = n.inputs[0]->value.values();
    for (std::size_t i = 0; i < gv.size(); ++i)
      if (in[i] <= 0.0) gv[i] = 0.0;
    n.inputs[0]->accumulate(g);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  return record(Tensor::scalar(s), {a}, [](Node& n) {
    Tensor g(n.inputs[0]->value.shape(), n.grad.item());
    n.inputs[0]->accumulate(g);
  });
}

Var mean(const Var& a) {
  const std::size_t count = a.value().size();
  if (count == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(count));
}

Var sum_all(std::span<const Var> scalars) {
  if (scalars.empty()) return constant(Tensor::scalar(0.0));
  double s = 0.0;
  std::vector<Var> inputs;
  inputs.reserve(scalars.size());
  for (const auto& v : scalars) {
    s += v.value().item();
    inputs.push_back(v);
  }
  return record(Tensor::scalar(s), std::move(inputs), [](Node& n) {
    const Tensor g = Tensor::scalar(n.grad.item());
    for (auto& in : n.inputs)
      if (in->requires_grad) in->accumulate(g);
  });
}

std::vector<double> softmax_values(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("softmax: empty input");
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

Var softmax(const Var& x) {
  const Tensor& v = x.value();
  if (v.size() == 0 || v.rank() == 0) throw std::invalid_argument("softmax: expects a non-empty vector or matrix");
  const std::size_t rows = v.rows(), cols = v.cols();
  Tensor out(v.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto p = softmax_values(v.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return record(out, {x}, [out, rows, cols](Node& n) {
    Tensor g(out.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      const auto y = out.row(r);
      const auto gy = n.grad.row(r);
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += gy[j] * y[j];
      auto gr = g.row(r);
      for (std::size_t j = 0; j < cols; ++j) gr[j] = y[j] * (gy[j] - dot);
    }
    n.inputs[0]->accumulate(g);
  });
}

Var cosine_rows(const Var& u, const Var& m) {
  const Tensor& uv = u.value();
  const Tensor& mv = m.value();
  if (uv.rank() != 1 || mv.rank() != 2 || mv.cols() != uv.size()) {
    throw std::invalid_argument("cosine_rows: expected [d] and [N,d], got " + shape_string(uv.shape()) + " and " +
                                shape_string(mv.shape()));
  }
  const std::size_t rows = mv.rows(), d = mv.cols();
  double un = 0.0;
  for (double x : uv.values()) un += x * x;
  un = std::sqrt(un);
  std::vector<double> norms(rows), dots(rows);
  Tensor out({rows}, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = mv.row(i);
    double nn = 0.0, dd = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      nn += r[j] * r[j];
      dd += r[j] * uv[j];
    }
    norms[i] = std::sqrt(nn);
    dots[i] = dd;
    if (un > 0.0 && norms[i] > 0.0) out[i] = dd / (un * norms[i]);
  }
  return record(out, {u, m}, [out, un, norms, dots, rows, d](Node& n) {
    const Tensor& uval = n.inputs[0]->value;
    const Tensor& mval = n.inputs[1]->value;
    Tensor gu({d}, 0.0);
    Tensor gm({rows, d}, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      if (un == 0.0 || norms[i] == 0.0) continue;
      const double gi = n.grad[i];
      if (gi == 0.0) continue;
      const double inv = 1.0 / (un * norms[i]);
      for (std::size_t j = 0; j < d; ++j) {
        // d cos / du = m/(|u||m|) - cos * u/|u|^2
        gu[j] += gi * (mval(i, j) * inv - out[i] * uval[j] / (un * un));
        gm(i, j) += gi * (uval[j] * inv - out[i] * mval(i, j) / (norms[i] * norms[i]));
      }
    }
    if (needs(n, 0)) n.inputs[0]->accumulate(gu);
    if (needs(n, 1)) n.inputs[1]->accumulate(gm);
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no rows");
  const std::size_t d = rows.front().value().size();
  Tensor out({rows.size(), d});
  std::vector<Var> inputs;
  inputs.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& v = rows[i].value();
    if (v.rank() != 1 || v.size() != d) throw std::invalid_argument("stack_rows: rows must be equal-length vectors");
    std::copy(v.values().begin(), v.values().end(), out.row(i).begin());
    inputs.push_back(rows[i]);
  }
  return record(std::move(out), std::move(inputs), [d](Node& n) {
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (!n.inputs[i]->requires_grad) continue;
      const auto r = n.grad.row(i);
      n.inputs[i]->accumulate(Tensor({d}, std::vector<double>(r.begin(), r.end())));
    }
  });
}

Var self_attention(const Var& features, const Var& wq, const Var& wk, const Var& wv) {
  const Tensor& f = features.value();
  if (f.rank() != 2) throw std::invalid_argument("self_attention: features must be [N,d]");
  const std::size_t d = f.cols();
  for (const Var* w : {&wq, &wk, &wv}) {
    if (w->value().rank() != 2 || w->value().rows() != d || w->value().cols() != d) {
      throw std::invalid_argument("self_attention: projection must be " + shape_string({d, d}) + ", got " +
                                  shape_string(w->value().shape()));
    }
  }
  const Var q = matmul(features, wq);
  const Var k = matmul(features, wk);
  const Var v = matmul(features, wv);
  const Var logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
  return matmul(softmax(logits), v);
}

}  // namespace exattn::num
