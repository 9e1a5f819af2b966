#include "atsn/ensemble.hpp"

#include <algorithm>

#include "atsn/common.hpp"

namespace atsn {

EnsembleTrainResult train_ensemble(const Mat<float>& X, const std::vector<int>& y,
                                   const FoldAssignment& folds, double dropout_p, int width,
                                   const TrainHyper& hyper) {
  if (folds.k < 2) throw DataError("ensemble needs at least 2 folds");
  if (folds.fold_of.size() != static_cast<std::size_t>(X.rows)) {
    throw DataError("fold assignment does not cover the embedding set");
  }

  EnsembleTrainResult result;
  result.ensemble.folds = folds;
  for (int fold = 0; fold < folds.k; ++fold) {
    // Training set: everything except this fold.
    std::vector<int> rows;
    rows.reserve(X.rows);
    for (int i = 0; i < X.rows; ++i) {
      if (folds.fold_of[i] != fold) rows.push_back(i);
    }
    Mat<float> xs(static_cast<int>(rows.size()), X.cols);
    std::vector<int> ys(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(X.row(rows[i]), X.row(rows[i]) + X.cols, xs.row(static_cast<int>(i)));
      ys[i] = y[rows[i]];
    }
    const std::uint64_t model_seed = hyper.seed + static_cast<std::uint64_t>(fold);
    MlpParams<float> model = init_mlp<float>(X.cols, width, dropout_p, model_seed);
    TrainHyper model_hyper = hyper;
    model_hyper.seed = model_seed;
    result.logs.push_back(train_mlp(model, xs, ys, model_hyper));
    result.ensemble.models.push_back(std::move(model));
  }
  return result;
}

int majority_vote(const std::vector<double>& probs, double threshold) {
  if (probs.empty()) throw DataError("majority vote needs at least one prediction");
  int ones = 0;
  double sum = 0.0;
  for (double p : probs) {
    ones += p > threshold ? 1 : 0;
    sum += p;
  }
  const int k = static_cast<int>(probs.size());
  if (2 * ones > k) return 1;
  if (2 * ones < k) return 0;
  return sum / k > threshold ? 1 : 0;  // even-k tie
}

double ensemble_mean_prob(const Ensemble& ens, const float* x) {
  double sum = 0.0;
  for (const auto& model : ens.models) sum += static_cast<double>(mlp_forward_eval(model, x));
  return sum / static_cast<double>(ens.models.size());
}

int ensemble_predict(const Ensemble& ens, const float* x, double threshold) {
  std::vector<double> probs;
  probs.reserve(ens.models.size());
  for (const auto& model : ens.models) {
    probs.push_back(static_cast<double>(mlp_forward_eval(model, x)));
  }
  return majority_vote(probs, threshold);
}

EvalResult evaluate(const std::function<double(const float*)>& prob_fn, const Mat<float>& X,
                    const std::vector<int>& y, double threshold) {
  if (X.rows == 0) throw DataError("cannot evaluate on an empty set");
  if (static_cast<std::size_t>(X.rows) != y.size()) throw DataError("evaluation labels mismatch");
  EvalResult r;
  for (int i = 0; i < X.rows; ++i) {
    const int pred = prob_fn(X.row(i)) > threshold ? 1 : 0;
    if (pred == 1 && y[i] == 1) ++r.tp;
    if (pred == 1 && y[i] == 0) ++r.fp;
    if (pred == 0 && y[i] == 0) ++r.tn;
    if (pred == 0 && y[i] == 1) ++r.fn;
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / X.rows;
  return r;
}

EvalResult evaluate(const MlpParams<float>& model, const Mat<float>& X, const std::vector<int>& y) {
  return evaluate([&](const float* x) { return static_cast<double>(mlp_forward_eval(model, x)); }, X,
                  y);
}

EvalResult evaluate(const Ensemble& ens, const Mat<float>& X, const std::vector<int>& y) {
  if (X.rows == 0) throw DataError("cannot evaluate on an empty set");
  if (static_cast<std::size_t>(X.rows) != y.size()) throw DataError("evaluation labels mismatch");
  EvalResult r;
  for (int i = 0; i < X.rows; ++i) {
    const int pred = ensemble_predict(ens, X.row(i));
    if (pred == 1 && y[i] == 1) ++r.tp;
    if (pred == 1 && y[i] == 0) ++r.fp;
    if (pred == 0 && y[i] == 0) ++r.tn;
    if (pred == 0 && y[i] == 1) ++r.fn;
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / X.rows;
  return r;
}

}  // namespace atsn
