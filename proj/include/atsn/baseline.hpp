#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "atsn/common.hpp"
#include "atsn/matrix.hpp"
#include "atsn/tokenizer.hpp"

namespace atsn {

// Sparse token-id -> count map; word order is discarded. std::map keeps the
// iteration (and therefore dot-product) order deterministic.
using BowVector = std::map<int, int>;

BowVector bow_featurize(const std::string& text, const Vocabulary& vocab);

template <class S>
struct LogRegParams {
  std::vector<S> w;  // one weight per vocabulary id
  S b = S(0);
};

struct LogRegHyper {
  double lr = 0.5;
  int epochs = 200;
  double l2 = 1e-4;
};

template <class S>
S predict_logit_logreg(const LogRegParams<S>& params, const BowVector& x) {
  S z = params.b;
  for (const auto& [id, count] : x) {
    if (id < 0 || id >= static_cast<int>(params.w.size())) {
      throw DataError("bag-of-words key " + std::to_string(id) + " out of range");
    }
    z += params.w[id] * static_cast<S>(count);
  }
  return z;
}

template <class S>
S predict_logreg(const LogRegParams<S>& params, const BowVector& x) {
  return sigmoid(predict_logit_logreg(params, x));
}

// Mean BCE with an L2 penalty on the weights (bias excluded); gradients are
// exact, which the finite-difference check relies on.
template <class S>
S logreg_loss_and_grads(const LogRegParams<S>& params, const std::vector<BowVector>& X,
                        const std::vector<int>& y, double l2, LogRegParams<S>* grads) {
  const std::size_t n = X.size();
  if (grads) {
    grads->w.assign(params.w.size(), S(0));
    grads->b = S(0);
  }
  S loss = S(0);
  for (std::size_t i = 0; i < n; ++i) {
    const S z = predict_logit_logreg(params, X[i]);
    loss += bce_from_logit(z, y[i]);
    if (grads) {
      const S g = sigmoid(z) - static_cast<S>(y[i]);
      for (const auto& [id, count] : X[i]) grads->w[id] += g * static_cast<S>(count);
      grads->b += g;
    }
  }
  const S inv_n = S(1) / static_cast<S>(n);
  loss *= inv_n;
  S penalty = S(0);
  for (const auto& wj : params.w) penalty += wj * wj;
  loss += static_cast<S>(l2) * S(0.5) * penalty;
  if (grads) {
    for (std::size_t j = 0; j < params.w.size(); ++j) {
      grads->w[j] = grads->w[j] * inv_n + static_cast<S>(l2) * params.w[j];
    }
    grads->b *= inv_n;
  }
  return loss;
}

// Full-batch gradient descent from zero init; deterministic by construction.
// Sets single_class_warning when all labels agree.
template <class S>
LogRegParams<S> train_logreg(const std::vector<BowVector>& X, const std::vector<int>& y,
                             int vocab_size, const LogRegHyper& hyper,
                             bool* single_class_warning = nullptr) {
  if (X.empty() || X.size() != y.size()) throw DataError("bad logistic-regression training data");
  for (int label : y) {
    if (label != 0 && label != 1) throw DataError("labels must be binary");
  }
  bool saw[2] = {false, false};
  for (int label : y) saw[label] = true;
  if (single_class_warning) *single_class_warning = !(saw[0] && saw[1]);

  LogRegParams<S> params;
  params.w.assign(vocab_size, S(0));
  LogRegParams<S> grads;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const S loss = logreg_loss_and_grads(params, X, y, hyper.l2, &grads);
    if (!std::isfinite(static_cast<double>(loss))) {
      throw NumericError("logistic-regression loss diverged");
    }
    for (std::size_t j = 0; j < params.w.size(); ++j) {
      params.w[j] -= static_cast<S>(hyper.lr) * grads.w[j];
    }
    params.b -= static_cast<S>(hyper.lr) * grads.b;
  }
  return params;
}

}  // namespace atsn
