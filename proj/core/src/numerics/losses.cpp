#include "exattn/numerics/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "exattn/numerics/ops.hpp"

namespace exattn::num {
namespace {

double sq_dist(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

}  // namespace

Var cross_entropy(const Var& logits, std::size_t label) {
  const Tensor& z = logits.value();
  if (z.rank() != 1 || z.size() == 0) throw std::invalid_argument("cross_entropy: logits must be a non-empty vector");
  if (label >= z.size()) {
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) + " out of range for " +
                                std::to_string(z.size()) + " classes");
  }
  const auto p = softmax_values(z.values());
  const double mx = *std::max_element(z.values().begin(), z.values().end());
  double lse = 0.0;
  for (double v : z.values()) lse += std::exp(v - mx);
  lse = mx + std::log(lse);
  const double loss = lse - z[label];
  return record(Tensor::scalar(loss), {logits}, [p, label](Node& n) {
    const double g = n.grad.item();
    Tensor d(Tensor::Shape{p.size()});
    for (std::size_t i = 0; i < p.size(); ++i) d[i] = g * (p[i] - (i == label ? 1.0 : 0.0));
    n.inputs[0]->accumulate(d);
  });
}

Var kl_divergence(const Var& p, const Var& q) {
  const Tensor& pv = p.value();
  const Tensor& qv = q.value();
  if (pv.rank() != 1 || !pv.same_shape(qv)) {
    throw std::invalid_argument("kl_divergence: length mismatch " + shape_string(pv.shape()) + " vs " +
                                shape_string(qv.shape()));
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i] <= 0.0) continue;
    kl += pv[i] * (std::log(pv[i]) - std::log(std::max(qv[i], kProbabilityFloor)));
  }
  return record(Tensor::scalar(kl), {p, q}, [](Node& n) {
    const double g = n.grad.item();
    const Tensor& pval = n.inputs[0]->value;
    const Tensor& qval = n.inputs[1]->value;
    const std::size_t len = pval.size();
    if (n.inputs[0]->requires_grad) {
      Tensor d(Tensor::Shape{len}, 0.0);
      for (std::size_t i = 0; i < len; ++i) {
        const double pc = std::max(pval[i], kProbabilityFloor);
        d[i] = g * (std::log(pc) - std::log(std::max(qval[i], kProbabilityFloor)) + (pval[i] > 0.0 ? 1.0 : 0.0));
      }
      n.inputs[0]->accumulate(d);
    }
    if (n.inputs[1]->requires_grad) {
      Tensor d(Tensor::Shape{len}, 0.0);
      for (std::size_t i = 0; i < len; ++i) {
        if (qval[i] > kProbabilityFloor && pval[i] > 0.0) d[i] = -g * pval[i] / qval[i];
      }
      n.inputs[1]->accumulate(d);
    }
  });
}

Var info_nce(const Var& scores) {
  const Tensor& s = scores.value();
  if (s.rank() != 2 || s.rows() != s.cols() || s.rows() == 0) {
    throw std::invalid_argument("info_nce: score matrix must be square, got " + shape_string(s.shape()));
  }
  const std::size_t bs = s.rows();
  Tensor probs({bs, bs});
  double loss = 0.0;
  for (std::size_t i = 0; i < bs; ++i) {
    const auto row = s.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    loss += lse - row[i];
    for (std::size_t j = 0; j < bs; ++j) probs(i, j) = std::exp(row[j] - lse);
  }
  return record(Tensor::scalar(loss), {scores}, [probs, bs](Node& n) {
    const double g = n.grad.item();
    Tensor d({bs, bs});
    for (std::size_t i = 0; i < bs; ++i)
      for (std::size_t j = 0; j < bs; ++j) d(i, j) = g * (probs(i, j) - (i == j ? 1.0 : 0.0));
    n.inputs[0]->accumulate(d);
  });
}

Var mmd_squared(const Var& a, const Var& b, double gamma) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.cols()) {
    throw std::invalid_argument("mmd_squared: expected [m,d] and [n,d], got " + shape_string(av.shape()) + " and " +
                                shape_string(bv.shape()));
  }
  const std::size_t m = av.rows(), nb = bv.rows(), d = av.cols();
  if (m < 2 || nb < 2) throw std::invalid_argument("mmd_squared: both samples need at least 2 rows");
  if (!(gamma > 0.0)) throw std::invalid_argument("mmd_squared: gamma must be positive");

  const double caa = 1.0 / (static_cast<double>(m) * static_cast<double>(m - 1));
  const double cbb = 1.0 / (static_cast<double>(nb) * static_cast<double>(nb - 1));
  const double cab = 2.0 / (static_cast<double>(m) * static_cast<double>(nb));

  Tensor kaa({m, m}, 0.0), kbb({nb, nb}, 0.0), kab({m, nb}, 0.0);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double k = std::exp(-sq_dist(av.row(i), av.row(j)) / gamma);
      kaa(i, j) = kaa(j, i) = k;
      saa += 2.0 * k;
    }
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = i + 1; j < nb; ++j) {
      const double k = std::exp(-sq_dist(bv.row(i), bv.row(j)) / gamma);
      kbb(i, j) = kbb(j, i) = k;
      sbb += 2.0 * k;
    }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      const double k = std::exp(-sq_dist(av.row(i), bv.row(j)) / gamma);
      kab(i, j) = k;
      sab += k;
    }
  const double value = caa * saa + cbb * sbb - cab * sab;

  return record(Tensor::scalar(value), {a, b}, [=](Node& n) {
    const double g = n.grad.item();
    const Tensor& x = n.inputs[0]->value;
    const Tensor& y = n.inputs[1]->value;
    // d k(u,v) / du = -2 (u - v) / gamma * k(u,v)
    const double f = -2.0 / gamma;
    if (n.inputs[0]->requires_grad) {
      Tensor ga({m, d}, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          if (i == j) continue;
          const double w = g * caa * 2.0 * f * kaa(i, j);
          for (std::size_t c = 0; c < d; ++c) ga(i, c) += w * (x(i, c) - x(j, c));
        }
        for (std::size_t j = 0; j < nb; ++j) {
          const double w = -g * cab * f * kab(i, j);
          for (std::size_t c = 0; c < d; ++c) ga(i, c) += w * (x(i, c) - y(j, c));
        }
      }
      n.inputs[0]->accumulate(ga);
    }
    if (n.inputs[1]->requires_grad) {
      Tensor gb({nb, d}, 0.0);
      for (std::size_t j = 0; j < nb; ++j) {
        for (std::size_t l = 0; l < nb; ++l) {
          if (j == l) continue;
          const double w = g * cbb * 2.0 * f * kbb(j, l);
          for (std::size_t c = 0; c < d; ++c) gb(j, c) += w * (y(j, c) - y(l, c));
        }
        for (std::size_t i = 0; i < m; ++i) {
          const double w = -g * cab * f * kab(i, j);
          for (std::size_t c = 0; c < d; ++c) gb(j, c) += w * (y(j, c) - x(i, c));
        }
      }
      n.inputs[1]->accumulate(gb);
    }
  });
}

double median_sq_distance(const Tensor& rows) {
  const std::size_t n = rows.rows();
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dists.push_back(sq_dist(rows.row(i), rows.row(j)));
  if (dists.empty()) return 1.0;
  std::sort(dists.begin(), dists.end());
  const std::size_t mid = dists.size() / 2;
  const double med = dists.size() % 2 ? dists[mid] : 0.5 * (dists[mid - 1] + dists[mid]);
  return med > 0.0 && std::isfinite(med) ? med : 1.0;
}

}  // namespace exattn::num
