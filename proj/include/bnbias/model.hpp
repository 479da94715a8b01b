#pragma once

#include <span>
#include <vector>

#include "bnbias/dataset.hpp"
#include "bnbias/linalg.hpp"

namespace bnbias {

/// Relative threshold for ||w||_Sigma <= tol * ||w||_2 * sqrt(lambda_top).
inline constexpr double kDefaultDegeneracyTol = 1e-12;

struct ModelOptions {
  double degeneracy_tol = kDefaultDegeneracyTol;
};

struct ModelState {
  Vec w;
  double gamma = 1.0;
};

/// Per-row normalized margins y_i <w, x_r> / ||w||_Sigma (n entries for
/// linear data, n*P for patched data).
struct MarginProfile {
  std::vector<double> margins;
};

/// Logistic loss log(1 + exp(-z)), evaluated without overflow.
double logistic_loss(double z);
/// Derivative -1 / (1 + exp(z)), evaluated without overflow.
double logistic_derivative(double z);

/// sqrt(w^T Sigma w) from the row inner products.
double bn_norm(std::span<const double> w, const Dataset& data, const ModelOptions& opts = {});

/// f = gamma <w, x> / ||w||_Sigma with the training Sigma. `x` must already
/// be shifted by the training mean when the training set was centered.
double predict_linear(const ModelState& state, const Dataset& data, std::span<const double> x,
                      const ModelOptions& opts = {});
/// g = sum_p gamma <w, x^(p)> / ||w||_Sigma; `patches` holds P*d entries.
double predict_cnn(const ModelState& state, const Dataset& data, std::span<const double> patches,
                   const ModelOptions& opts = {});

struct LossAndGrads {
  double loss = 0.0;
  Vec grad_w;
  double grad_gamma = 0.0;
};

/// Cross-entropy of the batch-normalized model and its gradient (not the
/// negative gradient). Covers both the linear and the single-filter CNN
/// case; the CNN sums the normalized patch responses per sample.
LossAndGrads loss_and_grads(const ModelState& state, const Dataset& data, const ModelOptions& opts = {});

/// Same loss for the un-normalized model f = sum_p <w, x^(p)> (no gamma).
struct PlainLossAndGrad {
  double loss = 0.0;
  Vec grad_w;
};
PlainLossAndGrad plain_loss_and_grad(std::span<const double> w, const Dataset& data);

MarginProfile margin_profile(std::span<const double> w, const Dataset& data, const ModelOptions& opts = {});

/// D(w) = N^-2 sum_{r,s} (m_s - m_r)^2 over the N = nP normalized margins,
/// computed as twice the (two-pass) population variance of the profile.
double discrepancy(std::span<const double> w, const Dataset& data, const ModelOptions& opts = {});
double discrepancy(const MarginProfile& profile);

}  // namespace bnbias
