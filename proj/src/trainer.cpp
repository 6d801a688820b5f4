#include "ccdc/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ccdc/checkpoint.hpp"
#include "ccdc/loss.hpp"
#include "ccdc/optim.hpp"

namespace ccdc {

namespace {

// Stream ids hanging off the root seed.
constexpr std::uint64_t kStreamTrainData = 1;
constexpr std::uint64_t kStreamDevData = 2;
constexpr std::uint64_t kStreamTestData = 3;
constexpr std::uint64_t kStreamInit = 4;
constexpr std::uint64_t kStreamShuffle = 5;
constexpr std::uint64_t kStreamBaseAug = 6;
constexpr std::uint64_t kStreamPatchExchange = 7;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

DatasetTriple make_datasets(const RunConfig& cfg) {
  const SyntheticSceneConfig scene = cfg.scene_config();
  const Rng root(cfg.data.seed);
  DatasetTriple out;
  Rng r_train = root.split(kStreamTrainData);
  Rng r_dev = root.split(kStreamDevData);
  Rng r_test = root.split(kStreamTestData);
  out.train = generate_batch(scene, static_cast<std::size_t>(cfg.data.n_train), cfg.data.live_fraction, r_train);
  out.dev = generate_batch(scene, static_cast<std::size_t>(cfg.data.n_dev), cfg.data.live_fraction, r_dev);
  out.test = generate_batch(scene, static_cast<std::size_t>(cfg.data.n_test), cfg.data.live_fraction, r_test);
  return out;
}

LabeledBatch gather_items(const LabeledBatch& ds, const std::vector<std::size_t>& idx) {
  check_batch(ds);
  if (idx.empty()) throw std::invalid_argument("gather_items: empty index list");
  const std::size_t S = ds.images.h(), L = ds.labels.h();
  LabeledBatch out;
  out.images = Tensor({idx.size(), 3, S, S});
  out.labels = Tensor({idx.size(), 1, L, L});
  out.is_live.resize(idx.size());
  out.domain_id.resize(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t i = idx[k];
    if (i >= ds.size()) throw std::invalid_argument("gather_items: index out of range");
    for (std::size_t c = 0; c < 3; ++c) {
      const float* src = ds.images.plane(i, c);
      float* dst = out.images.plane(k, c);
      for (std::size_t p = 0; p < S * S; ++p) dst[p] = src[p];
    }
    const float* lsrc = ds.labels.plane(i, 0);
    float* ldst = out.labels.plane(k, 0);
    for (std::size_t p = 0; p < L * L; ++p) ldst[p] = lsrc[p];
    out.is_live[k] = ds.is_live[i];
    out.domain_id[k] = ds.domain_id[i];
  }
  return out;
}

std::vector<double> eval_scores(Network& net, const LabeledBatch& ds, int batch) {
  std::vector<double> scores;
  scores.reserve(ds.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += static_cast<std::size_t>(batch)) {
    idx.clear();
    for (std::size_t i = start; i < std::min(ds.size(), start + static_cast<std::size_t>(batch)); ++i)
      idx.push_back(i);
    LabeledBatch chunk = gather_items(ds, idx);
    ForwardOutT<float> out = net.forward(chunk.images, Mode::Eval);
    std::vector<double> s = batch_scores(out.depth);
    scores.insert(scores.end(), s.begin(), s.end());
  }
  return scores;
}

std::string epoch_csv_header() {
  return "epoch,lr,mse,cdl,total,acer,eer,alpha_low,alpha_mid,alpha_high,beta_low,beta_mid,beta_high";
}

std::string epoch_csv_row(const EpochRow& r) {
  std::ostringstream os;
  os << r.epoch << "," << fmt(r.lr) << "," << fmt(r.mse) << "," << fmt(r.cdl) << "," << fmt(r.total) << ","
     << fmt(r.acer) << "," << fmt(r.eer);
  for (double v : r.cfim) os << "," << fmt(v);
  return os.str();
}

EvalResult evaluate_network(Network& net, const RunConfig& cfg) {
  DatasetTriple data = make_datasets(cfg);
  const std::vector<double> dev_scores = eval_scores(net, data.dev, cfg.trainer.batch);
  const std::vector<double> test_scores = eval_scores(net, data.test, cfg.trainer.batch);
  ThresholdSpec spec;
  spec.kind = ThresholdKind::DevSet;
  spec.dev_scores = &dev_scores;
  spec.dev_is_live = &data.dev.is_live;
  return compute_metrics(test_scores, data.test.is_live, spec);
}

TrainResult train_run(const RunConfig& cfg, const std::string& run_dir, bool verbose) {
  validate_config(cfg);
  std::filesystem::create_directories(run_dir);

  const NetworkSpec spec = cfg.to_network_spec();
  const Rng root(cfg.data.seed);
  DatasetTriple data = make_datasets(cfg);

  Network net(spec);
  Rng init_rng = root.split(kStreamInit);
  net.init_weights(init_rng);

  AdamT<float> adam;
  adam.lr = cfg.trainer.lr;
  adam.weight_decay = cfg.trainer.weight_decay;
  std::vector<ParamRef<float>> params = net.parameters();

  const std::size_t n_train = data.train.size();
  const std::size_t batch = static_cast<std::size_t>(cfg.trainer.batch);
  const Rng shuffle_base = root.split(kStreamShuffle);
  const Rng aug_base = root.split(kStreamBaseAug);
  const Rng pe_base = root.split(kStreamPatchExchange);
  const PatchExchangeConfig pe_cfg = cfg.pe_config();
  const BaselineAugConfig base_cfg = cfg.baseline_config();

  TrainResult result;
  result.run_dir = run_dir;

  for (int epoch = 0; epoch < cfg.trainer.epochs; ++epoch) {
    EpochRow row;
    row.epoch = epoch;
    row.lr = lr_schedule(epoch, cfg.trainer.lr, cfg.trainer.epochs, cfg.trainer.halve_at);
    adam.lr = row.lr;
    if (spec.dual_stream && spec.cfim_enabled) {
      for (std::size_t k = 0; k < 3; ++k) {
        row.cfim[k] = net.cfims[k].alpha.data[0];
        row.cfim[3 + k] = net.cfims[k].beta.data[0];
      }
    }

    std::vector<std::size_t> perm(n_train);
    for (std::size_t i = 0; i < n_train; ++i) perm[i] = i;
    Rng shuffle_rng = shuffle_base.split(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n_train - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.below(i + 1);
      std::swap(perm[i], perm[j]);
    }
    Rng aug_rng = aug_base.split(static_cast<std::uint64_t>(epoch));
    Rng pe_rng = pe_base.split(static_cast<std::uint64_t>(epoch));

    double sum_mse = 0, sum_cdl = 0, sum_total = 0;
    for (std::size_t start = 0; start < n_train; start += batch) {
      const std::size_t end = std::min(n_train, start + batch);
      std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                   perm.begin() + static_cast<std::ptrdiff_t>(end));
      LabeledBatch b = gather_items(data.train, idx);
      baseline_augment(b, base_cfg, aug_rng);
      if (cfg.aug.pe) b = patch_exchange(b, pe_cfg, pe_rng);

      ForwardOutT<float> out = net.forward(b.images, Mode::Train);
      const LossValue loss = depth_loss(out.depth, b.labels, cfg.trainer.cdl_weight);
      const double nb = static_cast<double>(idx.size());
      sum_mse += loss.mse * nb;
      sum_cdl += loss.cdl * nb;
      sum_total += loss.total * nb;

      net.zero_grad();
      Tensor d_depth = depth_loss_backward(out.depth, b.labels, cfg.trainer.cdl_weight);
      net.backward(d_depth);
      adam_step(adam, params);
    }
    row.mse = sum_mse / static_cast<double>(n_train);
    row.cdl = sum_cdl / static_cast<double>(n_train);
    row.total = sum_total / static_cast<double>(n_train);

    const std::vector<double> dev_scores = eval_scores(net, data.dev, cfg.trainer.batch);
    const std::vector<double> test_scores = eval_scores(net, data.test, cfg.trainer.batch);
    ThresholdSpec tspec;
    tspec.kind = ThresholdKind::DevSet;
    tspec.dev_scores = &dev_scores;
    tspec.dev_is_live = &data.dev.is_live;
    const EvalResult m = compute_metrics(test_scores, data.test.is_live, tspec);
    row.acer = m.acer;
    row.eer = m.eer;
    result.rows.push_back(row);
    if (verbose) {
      std::cout << "epoch " << epoch << " total " << fmt(row.total) << " acer " << fmt(row.acer) << " eer "
                << fmt(row.eer) << "\n";
    }
  }

  result.test_metrics = evaluate_network(net, cfg);

  result.csv_path = run_dir + "/train_log.csv";
  std::ofstream csv(result.csv_path, std::ios::binary);
  if (!csv) throw std::runtime_error("trainer: cannot write '" + result.csv_path + "'");
  csv << epoch_csv_header() << "\n";
  for (const EpochRow& r : result.rows) csv << epoch_csv_row(r) << "\n";
  csv.close();

  result.checkpoint_path = run_dir + "/checkpoint.bin";
  save_checkpoint(result.checkpoint_path, net);

  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["command"] = "train";
  manifest["seed"] = cfg.data.seed;
  manifest["config"] = config_to_text(cfg);
  manifest["parameters"] = count_parameters(spec);
  manifest["macs_per_forward"] = count_macs(spec);
  manifest["final"] = {{"acer", result.test_metrics.acer}, {"eer", result.test_metrics.eer},
                       {"apcer", result.test_metrics.apcer}, {"bpcer", result.test_metrics.bpcer},
                       {"threshold", result.test_metrics.threshold}};
  result.manifest_path = run_dir + "/manifest.json";
  std::ofstream mf(result.manifest_path, std::ios::binary);
  if (!mf) throw std::runtime_error("trainer: cannot write '" + result.manifest_path + "'");
  mf << manifest.dump(2) << "\n";

  return result;
}

std::vector<std::string> sweep_axes() { return {"theta", "operator", "fusion", "pe", "cfim_init"}; }

namespace {

struct SweepPoint {
  std::string name;
  RunConfig cfg;
};

std::vector<SweepPoint> sweep_points(const RunConfig& base, const std::string& axis) {
  std::vector<SweepPoint> points;
  if (axis == "theta") {
    for (int k = 0; k <= 10; ++k) {
      std::ostringstream name;
      name << "theta_" << std::fixed << std::setprecision(1) << (0.1 * k);
      SweepPoint p{name.str(), base};
      p.cfg.network.theta = 0.1 * k;
      points.push_back(std::move(p));
    }
  } else if (axis == "operator") {
    for (const std::string& op : operator_names()) {
      SweepPoint p{"op_" + op, base};
      p.cfg.network.preset = "cdcn";  // single-stream carrier for the operator comparison
      p.cfg.network.op = op;
      points.push_back(std::move(p));
    }
  } else if (axis == "fusion") {
    for (const std::string& f : {std::string("average"), std::string("concat")}) {
      SweepPoint p{"fusion_" + f, base};
      p.cfg.network.preset = "dc-cdn";
      p.cfg.network.fusion = f;
      points.push_back(std::move(p));
    }
  } else if (axis == "pe") {
    for (const std::string& preset : {std::string("depthnet"), std::string("cdcn"), std::string("dc-cdn")}) {
      for (bool pe : {false, true}) {
        SweepPoint p{preset + (pe ? "_pe_on" : "_pe_off"), base};
        p.cfg.network.preset = preset;
        p.cfg.aug.pe = pe;
        points.push_back(std::move(p));
      }
    }
  } else if (axis == "cfim_init") {
    for (const std::string& mode : {std::string("learnable"), std::string("fixed")}) {
      for (double init : {-1.0, 0.0, 1.0}) {
        std::ostringstream name;
        name << "cfim_" << mode << "_" << std::showpos << init;
        SweepPoint p{name.str(), base};
        p.cfg.network.preset = "dc-cdn";
        p.cfg.network.cfim = mode;
        p.cfg.network.cfim_init = {init, init, init, init, init, init};
        points.push_back(std::move(p));
      }
    }
  } else {
    std::string axes;
    for (const std::string& a : sweep_axes()) axes += (axes.empty() ? "" : ", ") + a;
    throw std::invalid_argument("sweep: unknown axis '" + axis + "' (valid: " + axes + ")");
  }
  return points;
}

}  // namespace

std::string sweep_run(const RunConfig& base, const std::string& axis, const std::string& out_root, bool verbose) {
  const std::vector<SweepPoint> points = sweep_points(base, axis);
  std::ostringstream csv;
  csv << "axis,point,acer,eer,apcer,bpcer,threshold,final_total\n";
  for (const SweepPoint& p : points) {
    if (verbose) std::cout << "sweep point " << p.name << "\n";
    TrainResult r = train_run(p.cfg, out_root + "/" + p.name, false);
    const double final_total = r.rows.empty() ? 0.0 : r.rows.back().total;
    csv << axis << "," << p.name << "," << fmt(r.test_metrics.acer) << "," << fmt(r.test_metrics.eer) << ","
        << fmt(r.test_metrics.apcer) << "," << fmt(r.test_metrics.bpcer) << "," << fmt(r.test_metrics.threshold)
        << "," << fmt(final_total) << "\n";
  }
  return csv.str();
}

}  // namespace ccdc
