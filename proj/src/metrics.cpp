#include "ccdc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ccdc {

double score_mean_depth(const Tensor& depth, std::size_t item) {
  if (depth.ndim() != 4 || item >= depth.n()) {
    throw std::invalid_argument("score: bad depth tensor " + shape_to_string(depth.shape) + " or item index " +
                                std::to_string(item));
  }
  const std::size_t per = depth.c() * depth.h() * depth.w();
  const float* p = depth.data.data() + item * per;
  double sum = 0;
  for (std::size_t k = 0; k < per; ++k) sum += p[k];
  return sum / static_cast<double>(per);
}

std::vector<double> batch_scores(const Tensor& depth) {
  std::vector<double> out(depth.n());
  for (std::size_t i = 0; i < depth.n(); ++i) out[i] = score_mean_depth(depth, i);
  return out;
}

namespace {

void check_two_class(const std::vector<double>& scores, const std::vector<std::uint8_t>& is_live) {
  if (scores.size() != is_live.size()) {
    throw std::invalid_argument("metrics: " + std::to_string(scores.size()) + " scores vs " +
                                std::to_string(is_live.size()) + " labels");
  }
  std::size_t live = 0;
  for (std::uint8_t f : is_live) live += f ? 1 : 0;
  if (live == 0 || live == scores.size()) {
    throw std::invalid_argument("metrics: need at least one live and one spoof item");
  }
}

}  // namespace

RatePair rates_at(const std::vector<double>& scores, const std::vector<std::uint8_t>& is_live, double threshold) {
  check_two_class(scores, is_live);
  std::size_t live = 0, spoof = 0, live_rej = 0, spoof_acc = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (is_live[i]) {
      ++live;
      if (scores[i] < threshold) ++live_rej;
    } else {
      ++spoof;
      if (scores[i] > threshold) ++spoof_acc;
    }
  }
  RatePair r;
  r.apcer = static_cast<double>(spoof_acc) / static_cast<double>(spoof);
  r.bpcer = static_cast<double>(live_rej) / static_cast<double>(live);
  return r;
}

EerPoint compute_eer(const std::vector<double>& scores, const std::vector<std::uint8_t>& is_live) {
  check_two_class(scores, is_live);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double n_live = 0, n_spoof = 0;
  for (std::uint8_t f : is_live) (f ? n_live : n_spoof) += 1.0;

  // Walk thresholds upward through the score groups. Below every score:
  // all spoof accepted, no live rejected.
  double spoof_acc = n_spoof, live_rej = 0;
  EerPoint best;
  double best_gap = 2.0;

  auto consider = [&](double thr, double apcer, double bpcer) {
    const double gap = std::abs(apcer - bpcer);
    if (gap < best_gap) {
      best_gap = gap;
      best.threshold = thr;
      best.apcer = apcer;
      best.bpcer = bpcer;
      best.eer = 0.5 * (apcer + bpcer);
    }
  };
  consider(scores[order[0]] - 1.0, 1.0, 0.0);

  std::size_t i = 0;
  while (i < n) {
    const double v = scores[order[i]];
    std::size_t j = i;
    while (j < n && scores[order[j]] == v) {
      if (is_live[order[j]]) {
        live_rej += 1.0;  // score == v falls below any threshold > v
      } else {
        spoof_acc -= 1.0;  // no longer strictly above
      }
      ++j;
    }
    const double thr = j < n ? 0.5 * (v + scores[order[j]]) : v + 1.0;
    consider(thr, spoof_acc / n_spoof, live_rej / n_live);
    i = j;
  }
  return best;
}

EvalResult compute_metrics(const std::vector<double>& scores, const std::vector<std::uint8_t>& is_live,
                           const ThresholdSpec& spec) {
  check_two_class(scores, is_live);
  EvalResult out;
  out.scores = scores;
  switch (spec.kind) {
    case ThresholdKind::Fixed:
      out.threshold = spec.value;
      break;
    case ThresholdKind::SelfEer:
      out.threshold = compute_eer(scores, is_live).threshold;
      break;
    case ThresholdKind::DevSet: {
      if (spec.dev_scores == nullptr || spec.dev_is_live == nullptr) {
        throw std::invalid_argument("metrics: dev-set threshold requested without a dev split");
      }
      out.threshold = compute_eer(*spec.dev_scores, *spec.dev_is_live).threshold;
      break;
    }
  }
  const RatePair r = rates_at(scores, is_live, out.threshold);
  out.apcer = r.apcer;
  out.bpcer = r.bpcer;
  out.acer = 0.5 * (r.apcer + r.bpcer);
  out.eer = compute_eer(scores, is_live).eer;
  out.hter = out.acer;
  return out;
}

}  // namespace ccdc
