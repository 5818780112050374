#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "vega/rng.hpp"
#include "vega/tape.hpp"
#include "vega/tensor.hpp"

// Differentiable tensor operations. Every op takes the tape it records onto
// as its first argument; when no input requires a gradient (or the tape is
// not recording) nothing is recorded.
//
// Broadcasting is limited to the second operand of add/mul being a scalar
// or matching a trailing suffix of the first operand's shape.

namespace vega {

inline constexpr double kEps = 1e-8;

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> neg(Tape<T>& tape, const Tensor<T>& x);

/// y = x W + b, with x [N x in], W [in x out], b [out].
template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T>
Tensor<T> slice(Tape<T>& tape, const Tensor<T>& x, std::size_t axis, std::size_t start,
                std::size_t length);
template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);
template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x);
template <typename T>
Tensor<T> silu(Tape<T>& tape, const Tensor<T>& x);
template <typename T>
Tensor<T> log(Tape<T>& tape, const Tensor<T>& x);
template <typename T>
Tensor<T> exp(Tape<T>& tape, const Tensor<T>& x);

/// Rows of `table` picked by `indices`: [indices.size() x D].
template <typename T>
Tensor<T> embedding_lookup(Tape<T>& tape, const Tensor<T>& table,
                           const std::vector<std::size_t>& indices);

/// Inverted dropout. Identity when !train or p == 0 (no rng draws then).
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, Rng& rng, bool train);

/// Normalizes to zero mean, unit variance along `axis` (no affine part).
template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, std::size_t axis, double eps = 1e-5);

/// Max-shifted softmax along `axis`.
template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, std::size_t axis);

/// KL(p || q) along the last axis: result drops that axis (a vector pair
/// gives a scalar). 0 log(0/q) = 0; q is clamped below at kEps.
template <typename T>
Tensor<T> kl_div(Tape<T>& tape, const Tensor<T>& p, const Tensor<T>& q);

/// Cosine similarity of two vectors, denominator clamped below at kEps.
template <typename T>
Tensor<T> cosine_sim(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Pairwise cosine similarity: X [R x D], Y [C x D] -> [R x C].
template <typename T>
Tensor<T> cosine_sim_matrix(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y);

/// -log(max(p[r, label_r], kEps)) per row: [R x C] -> [R].
template <typename T>
Tensor<T> nll(Tape<T>& tape, const Tensor<T>& probs, const std::vector<std::size_t>& labels);

/// Copy that carries no gradient (stop-gradient).
template <typename T>
Tensor<T> detach(const Tensor<T>& x);

/// Temporal im2col: x [N x D] -> [N x (2k+1)D], zero padding outside [0, N).
template <typename T>
Tensor<T> unfold_time(Tape<T>& tape, const Tensor<T>& x, std::size_t half_window);

/// Multiplies row t of x [N x D] by s[t]; s has N elements.
template <typename T>
Tensor<T> scale_rows(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& s);

}  // namespace vega
