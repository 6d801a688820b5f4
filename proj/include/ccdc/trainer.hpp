#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ccdc/augment.hpp"
#include "ccdc/config.hpp"
#include "ccdc/metrics.hpp"
#include "ccdc/network.hpp"

namespace ccdc {

struct DatasetTriple {
  LabeledBatch train, dev, test;
};

// All randomness flows from data.seed via fixed stream splits (train/dev/
// test data, init, per-epoch shuffle, baseline-aug and patch-exchange
// streams), so toggling one knob never perturbs the others.
DatasetTriple make_datasets(const RunConfig& cfg);

LabeledBatch gather_items(const LabeledBatch& ds, const std::vector<std::size_t>& idx);

std::vector<double> eval_scores(Network& net, const LabeledBatch& ds, int batch);

struct EpochRow {
  int epoch = 0;
  double lr = 0;
  double mse = 0;
  double cdl = 0;
  double total = 0;
  double acer = 0;
  double eer = 0;
  std::array<double, 6> cfim = {0, 0, 0, 0, 0, 0};  // values at epoch start
};

struct TrainResult {
  std::vector<EpochRow> rows;
  EvalResult test_metrics;  // final test metrics at the dev-set EER threshold
  std::string run_dir;
  std::string checkpoint_path;
  std::string csv_path;
  std::string manifest_path;
};

std::string epoch_csv_header();
std::string epoch_csv_row(const EpochRow& row);

// Trains per the config, writes train_log.csv / checkpoint.bin /
// manifest.json into run_dir, returns the curves and final metrics.
TrainResult train_run(const RunConfig& cfg, const std::string& run_dir, bool verbose);

// Test metrics of a trained network under this config's data and dev-set
// threshold convention.
EvalResult evaluate_network(Network& net, const RunConfig& cfg);

// Runs one training per sweep point under out_root/<point>, returns the
// aggregated CSV (one row per point). Valid axes: theta, operator, fusion,
// pe, cfim_init.
std::string sweep_run(const RunConfig& base, const std::string& axis, const std::string& out_root, bool verbose);

std::vector<std::string> sweep_axes();

}  // namespace ccdc
