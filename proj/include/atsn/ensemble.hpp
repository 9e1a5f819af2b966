#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "atsn/classifier.hpp"
#include "atsn/corpus.hpp"
#include "atsn/matrix.hpp"

namespace atsn {

// k classifiers, model i trained with fold i held out, combined by majority
// vote of their thresholded predictions.
struct Ensemble {
  std::vector<MlpParams<float>> models;
  FoldAssignment folds;
  std::uint64_t feature_fingerprint = 0;
};

struct EnsembleTrainResult {
  Ensemble ensemble;
  std::vector<TrainLog> logs;
};

// Model i trains on the complement of fold i with seed hyper.seed + i.
EnsembleTrainResult train_ensemble(const Mat<float>& X, const std::vector<int>& y,
                                   const FoldAssignment& folds, double dropout_p, int width,
                                   const TrainHyper& hyper);

// Thresholded majority vote; predict 1 iff probability > threshold
// (strict). An even-k tie falls back to the mean probability.
int majority_vote(const std::vector<double>& probs, double threshold = 0.5);

double ensemble_mean_prob(const Ensemble& ens, const float* x);
int ensemble_predict(const Ensemble& ens, const float* x, double threshold = 0.5);

struct EvalResult {
  double accuracy = 0.0;
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

// Fraction of correct thresholded predictions plus confusion counts.
EvalResult evaluate(const std::function<double(const float*)>& prob_fn, const Mat<float>& X,
                    const std::vector<int>& y, double threshold = 0.5);

EvalResult evaluate(const MlpParams<float>& model, const Mat<float>& X, const std::vector<int>& y);
EvalResult evaluate(const Ensemble& ens, const Mat<float>& X, const std::vector<int>& y);

}  // namespace atsn
