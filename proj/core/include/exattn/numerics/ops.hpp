#pragma once

#include <span>
#include <vector>

#include "exattn/numerics/autograd.hpp"

namespace exattn::num {

// Shapes: matrix [m,k]·[k,n] -> [m,n]; vector [k]·[k,n] -> [n]; [m,k]·[k] -> [m].
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double f) { return scale(a, f); }
inline Var operator*(double f, const Var& a) { return scale(a, f); }

// Row i of `m` ([N,d]) multiplied by w[i] ([N]).
Var scale_rows(const Var& m, const Var& w);

Var tanh(const Var& a);
Var relu(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
// Sum of scalar vars; empty input -> constant 0.
Var sum_all(std::span<const Var> scalars);

// Softmax over the whole vector (rank 1) or over each row (rank 2), max-shifted.
Var softmax(const Var& x);

// cos(u, m_i) for each row of m. Zero-norm operands give similarity 0.
Var cosine_rows(const Var& u, const Var& m);

// Stacks equal-length vectors into a [n,d] matrix.
Var stack_rows(std::span<const Var> rows);

// softmax(QK^T/sqrt(d))V with Q=F·Wq, K=F·Wk, V=F·Wv; single head.
Var self_attention(const Var& features, const Var& wq, const Var& wk, const Var& wv);

// Plain-value softmax, used by inference code and tests.
std::vector<double> softmax_values(std::span<const double> x);

}  // namespace exattn::num
