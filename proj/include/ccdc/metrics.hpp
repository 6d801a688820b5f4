#pragma once

#include <cstdint>
#include <vector>

#include "ccdc/tensor.hpp"

namespace ccdc {

// Final liveness score of one predicted depth map: the mean cell value.
double score_mean_depth(const Tensor& depth, std::size_t item);
std::vector<double> batch_scores(const Tensor& depth);

struct RatePair {
  double apcer = 0;  // fraction of spoof items scored above the threshold
  double bpcer = 0;  // fraction of live items scored below the threshold
};

RatePair rates_at(const std::vector<double>& scores, const std::vector<std::uint8_t>& is_live, double threshold);

struct EerPoint {
  double eer = 0;
  double threshold = 0;
  double apcer = 0;
  double bpcer = 0;
};

// Sweeps midpoints between adjacent distinct scores (plus a point below and
// above all scores); among thresholds minimizing |APCER - BPCER| takes the
// lowest and reports the mean of the two rates.
EerPoint compute_eer(const std::vector<double>& scores, const std::vector<std::uint8_t>& is_live);

enum class ThresholdKind { Fixed, SelfEer, DevSet };

struct ThresholdSpec {
  ThresholdKind kind = ThresholdKind::SelfEer;
  double value = 0.5;  // Fixed only
  const std::vector<double>* dev_scores = nullptr;      // DevSet only
  const std::vector<std::uint8_t>* dev_is_live = nullptr;
};

struct EvalResult {
  std::vector<double> scores;
  double threshold = 0;
  double apcer = 0;
  double bpcer = 0;
  double acer = 0;
  double eer = 0;   // equal error rate of these scores themselves
  double hter = 0;  // (APCER+BPCER)/2 at the operating threshold (dev-set fixed when kind=DevSet)
};

EvalResult compute_metrics(const std::vector<double>& scores, const std::vector<std::uint8_t>& is_live,
                           const ThresholdSpec& spec);

}  // namespace ccdc
