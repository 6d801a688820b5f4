#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccdc/augment.hpp"
#include "ccdc/checkpoint.hpp"
#include "ccdc/config.hpp"
#include "ccdc/gradcheck.hpp"
#include "ccdc/metrics.hpp"
#include "ccdc/netspec.hpp"
#include "ccdc/ppm.hpp"
#include "ccdc/trainer.hpp"

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

ccdc::RunConfig build_config(const std::string& config_path, const std::vector<std::string>& sets) {
  ccdc::RunConfig cfg;
  if (!config_path.empty()) cfg = ccdc::load_config_file(config_path);
  for (const std::string& s : sets) ccdc::apply_override(cfg, s);
  ccdc::validate_config(cfg);
  return cfg;
}

std::string out_root() {
  const char* env = std::getenv("CCDC_OUT_ROOT");
  return env && *env ? std::string(env) : std::string(".");
}

std::string resolve_out_dir(const std::string& flag_dir, const ccdc::RunConfig& cfg) {
  const std::string dir = flag_dir.empty() ? cfg.output.dir : flag_dir;
  if (!dir.empty() && dir.front() == '/') return dir;
  return out_root() + "/" + dir;
}

void print_metrics(const ccdc::EvalResult& m, bool csv) {
  if (csv) {
    std::cout << "threshold,apcer,bpcer,acer,eer,hter\n";
    std::cout << fmt(m.threshold) << "," << fmt(m.apcer) << "," << fmt(m.bpcer) << "," << fmt(m.acer) << ","
              << fmt(m.eer) << "," << fmt(m.hter) << "\n";
    return;
  }
  std::cout << "threshold " << fmt(m.threshold) << "\n";
  std::cout << "APCER     " << fmt(m.apcer) << "\n";
  std::cout << "BPCER     " << fmt(m.bpcer) << "\n";
  std::cout << "ACER      " << fmt(m.acer) << "\n";
  std::cout << "EER       " << fmt(m.eer) << "\n";
  std::cout << "HTER      " << fmt(m.hter) << "\n";
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets, const std::string& out_dir,
              bool csv, bool quiet) {
  const ccdc::RunConfig cfg = build_config(config_path, sets);
  const std::string dir = resolve_out_dir(out_dir, cfg);
  const ccdc::TrainResult r = ccdc::train_run(cfg, dir, !quiet && !csv);
  if (csv) {
    std::cout << ccdc::epoch_csv_header() << "\n";
    for (const ccdc::EpochRow& row : r.rows) std::cout << ccdc::epoch_csv_row(row) << "\n";
  } else {
    std::cout << "run dir    " << r.run_dir << "\n";
    std::cout << "checkpoint " << r.checkpoint_path << "\n";
    print_metrics(r.test_metrics, false);
  }
  return 0;
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& sets, const std::string& checkpoint,
             bool csv) {
  const ccdc::RunConfig cfg = build_config(config_path, sets);
  ccdc::Network net = ccdc::load_checkpoint(checkpoint);
  const ccdc::EvalResult m = ccdc::evaluate_network(net, cfg);
  print_metrics(m, csv);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& sets, const std::string& axis,
              const std::string& out_dir, bool quiet) {
  const ccdc::RunConfig cfg = build_config(config_path, sets);
  const std::string dir = resolve_out_dir(out_dir.empty() ? std::string("sweep_") + axis : out_dir, cfg);
  const std::string csv = ccdc::sweep_run(cfg, axis, dir, !quiet);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/sweep.csv", std::ios::binary);
  out << csv;
  std::cout << csv;
  return 0;
}

int cmd_augment(const std::string& config_path, const std::vector<std::string>& sets, const std::string& out_dir,
                int n, const std::string& images_path, const std::string& labels_path) {
  const ccdc::RunConfig cfg = build_config(config_path, sets);
  const std::string dir = resolve_out_dir(out_dir.empty() ? "augment" : out_dir, cfg);
  std::filesystem::create_directories(dir);

  ccdc::LabeledBatch batch;
  if (!images_path.empty() || !labels_path.empty()) {
    if (images_path.empty() || labels_path.empty()) {
      throw std::invalid_argument("augment: --images and --labels must be given together");
    }
    batch.images = ccdc::load_tensor_file(images_path);
    batch.labels = ccdc::load_tensor_file(labels_path);
    batch.is_live.assign(batch.images.ndim() == 4 ? batch.images.n() : 0, 0);
    batch.domain_id.assign(batch.is_live.size(), 0);
    ccdc::check_batch(batch);
  } else {
    ccdc::Rng root(cfg.data.seed);
    ccdc::Rng data_rng = root.split(1);
    batch = ccdc::generate_batch(cfg.scene_config(), static_cast<std::size_t>(n), cfg.data.live_fraction, data_rng);
  }

  const ccdc::LabeledBatch before = batch;
  ccdc::Rng root(cfg.data.seed);
  ccdc::Rng aug_rng = root.split(6).split(0);
  ccdc::Rng pe_rng = root.split(7).split(0);
  ccdc::baseline_augment(batch, cfg.baseline_config(), aug_rng);
  if (cfg.aug.pe) batch = ccdc::patch_exchange(batch, cfg.pe_config(), pe_rng);

  ccdc::save_tensor_file(dir + "/images_aug.bin", batch.images);
  ccdc::save_tensor_file(dir + "/labels_aug.bin", batch.labels);
  ccdc::write_preview_ppm(dir + "/preview.ppm", before, batch);
  std::cout << "wrote " << dir << "/images_aug.bin\n";
  std::cout << "wrote " << dir << "/labels_aug.bin\n";
  std::cout << "wrote " << dir << "/preview.ppm\n";
  return 0;
}

int cmd_report(const std::string& config_path, const std::vector<std::string>& sets, bool csv) {
  const ccdc::RunConfig cfg = build_config(config_path, sets);
  struct Row {
    std::string name;
    long long params;
    long long macs;
  };
  std::vector<Row> rows;
  for (const std::string& name : ccdc::preset_names()) {
    ccdc::NetworkSpec spec = ccdc::preset_spec(name);
    spec.input_size = cfg.network.input_size;
    spec.stem_width = cfg.network.stem_width;
    spec.block_widths = cfg.network.block_widths;
    spec.head_widths = cfg.network.head_widths;
    rows.push_back({name, ccdc::count_parameters(spec), ccdc::count_macs(spec)});
  }
  if (csv) {
    std::cout << "architecture,params,macs\n";
    for (const Row& r : rows) std::cout << r.name << "," << r.params << "," << r.macs << "\n";
  } else {
    std::cout << std::left << std::setw(12) << "arch" << std::right << std::setw(14) << "params" << std::setw(18)
              << "macs" << "\n";
    for (const Row& r : rows) {
      std::cout << std::left << std::setw(12) << r.name << std::right << std::setw(14) << r.params << std::setw(18)
                << r.macs << "\n";
    }
  }
  const Row* cdcn = nullptr;
  const Row* ccdn = nullptr;
  for (const Row& r : rows) {
    if (r.name == "cdcn") cdcn = &r;
    if (r.name == "ccdn-hv") ccdn = &r;
  }
  if (cdcn && ccdn) {
    std::ostringstream p, m;
    p << std::fixed << std::setprecision(4) << static_cast<double>(ccdn->params) / static_cast<double>(cdcn->params);
    m << std::fixed << std::setprecision(4) << static_cast<double>(ccdn->macs) / static_cast<double>(cdcn->macs);
    if (csv) {
      std::cout << "ratio,ccdn-hv/cdcn params," << p.str() << "\n";
      std::cout << "ratio,ccdn-hv/cdcn macs," << m.str() << "\n";
    } else {
      std::cout << "C-CDN/CDCN params ratio: " << p.str() << "\n";
      std::cout << "C-CDN/CDCN macs ratio:   " << m.str() << "\n";
    }
  }
  std::cout << "convention: params = conv kernel weights; MACs = taps x positions x Cin x Cout; "
               "FLOPs = 2 x MACs (+1 multiply per tap-position when theta > 0)\n";
  return 0;
}

int cmd_gradcheck(bool inject_fault) {
  const ccdc::GradCheckReport report = ccdc::run_gradient_checks(inject_fault);
  std::cout << ccdc::format_gradcheck(report);
  return report.all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross central difference convolution networks: training, evaluation and analysis"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, axis, images_path, labels_path;
  std::vector<std::string> sets;
  bool csv = false, quiet = false, inject_fault = false;
  int n_items = 8;

  auto add_common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", config_path, "config file (sectioned key=value)");
    sub->add_option("--set", sets, "override, section.key=value")->take_all();
    sub->add_flag("--csv", csv, "machine-readable CSV on stdout");
    if (with_out) sub->add_option("--out", out_dir, "output directory (under CCDC_OUT_ROOT)");
  };

  CLI::App* train = app.add_subcommand("train", "train a network per the config");
  add_common(train, true);
  train->add_flag("--quiet", quiet, "suppress per-epoch progress");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the config's test split");
  add_common(eval, false);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file to evaluate")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "train once per sweep point, aggregate final metrics");
  add_common(sweep, true);
  sweep->add_option("--axis", axis, "theta | operator | fusion | pe | cfim_init")->required();
  sweep->add_flag("--quiet", quiet, "suppress progress");

  CLI::App* augment = app.add_subcommand("augment", "augment a batch, write tensors and a preview grid");
  add_common(augment, true);
  augment->add_option("--n", n_items, "synthetic batch size when no input tensors are given");
  augment->add_option("--images", images_path, "input image tensor file");
  augment->add_option("--labels", labels_path, "input label tensor file");

  CLI::App* report = app.add_subcommand("report", "parameter / MAC accounting per architecture");
  add_common(report, false);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_flag("--inject-fault", inject_fault, "flip one analytic gradient to prove detection");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, sets, out_dir, csv, quiet);
    if (eval->parsed()) return cmd_eval(config_path, sets, checkpoint, csv);
    if (sweep->parsed()) return cmd_sweep(config_path, sets, axis, out_dir, quiet);
    if (augment->parsed()) return cmd_augment(config_path, sets, out_dir, n_items, images_path, labels_path);
    if (report->parsed()) return cmd_report(config_path, sets, csv);
    if (gradcheck->parsed()) return cmd_gradcheck(inject_fault);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
