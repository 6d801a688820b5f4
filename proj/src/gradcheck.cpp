#include "ccdc/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "ccdc/conv.hpp"
#include "ccdc/loss.hpp"
#include "ccdc/network.hpp"

namespace ccdc {

namespace {

constexpr double kEps = 1e-5;
constexpr double kTolIsolated = 1e-6;
constexpr double kTolEndToEnd = 1e-4;

double rel_err(double analytic, double fd, double group_max) {
  const double diff = std::abs(analytic - fd);
  if (diff == 0.0) return 0.0;
  const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-3 * group_max, 1e-12});
  return diff / denom;
}

double group_extreme(const TensorD& g) {
  double m = 0;
  for (double v : g.data) m = std::max(m, std::abs(v));
  return m;
}

// Max relative error between the analytic gradient of one tensor and
// central finite differences of the loss closure over every element.
double check_tensor(const TensorD& analytic, TensorD& value, const std::function<double()>& loss) {
  const double gmax = group_extreme(analytic);
  double worst = 0;
  for (std::size_t k = 0; k < value.size(); ++k) {
    const double orig = value.data[k];
    double rel = 0;
    // If the probe interval straddles a relu kink or flips a maxpool argmax
    // the central difference measures the wrong slope; shrinking the step
    // moves the probe off the seam, while a genuinely wrong gradient stays
    // wrong at every step size.
    for (const double eps : {kEps, kEps / 4.0, kEps / 16.0}) {
      value.data[k] = orig + eps;
      const double lp = loss();
      value.data[k] = orig - eps;
      const double lm = loss();
      value.data[k] = orig;
      const double fd = (lp - lm) / (2.0 * eps);
      rel = rel_err(analytic.data[k], fd, gmax);
      if (rel < kTolIsolated) break;
    }
    worst = std::max(worst, rel);
  }
  return worst;
}

void add_line(GradCheckReport& report, const std::string& name, double max_rel, double tol) {
  GradCheckLine line{name, max_rel, tol, max_rel < tol};
  if (!line.pass) report.all_pass = false;
  report.lines.push_back(std::move(line));
}

void check_conv_isolated(GradCheckReport& report, const std::string& pattern_name, bool inject_fault, Rng& rng) {
  ConvLayerT<double> layer = make_conv_layer<double>(pattern(pattern_name), 4, 3, 0.8);
  kaiming_init(layer, rng);
  TensorD x = rand_uniform<double>(rng, {2, 3, 8, 8}, -1.0, 1.0);
  const TensorD y0 = conv_forward_direct(layer, x);
  const TensorD proj = rand_uniform<double>(rng, y0.shape, -1.0, 1.0);

  ConvGradients<double> g = conv_backward(layer, x, proj);
  if (inject_fault) {
    std::size_t at = 0;
    for (std::size_t k = 1; k < g.d_weights.size(); ++k)
      if (std::abs(g.d_weights.data[k]) > std::abs(g.d_weights.data[at])) at = k;
    g.d_weights.data[at] = -g.d_weights.data[at];
  }

  auto loss = [&]() {
    const TensorD y = conv_forward_direct(layer, x);
    double acc = 0;
    for (std::size_t k = 0; k < y.size(); ++k) acc += y.data[k] * proj.data[k];
    return acc;
  };
  add_line(report, "conv[" + pattern_name + "]/weights", check_tensor(g.d_weights, layer.weights, loss), kTolIsolated);
  add_line(report, "conv[" + pattern_name + "]/input", check_tensor(g.d_input, x, loss), kTolIsolated);
}

void check_batchnorm(GradCheckReport& report, Rng& rng) {
  BatchNormT<double> bn(5);
  bn.gamma = rand_uniform<double>(rng, {5}, 0.5, 1.5);
  bn.beta = rand_uniform<double>(rng, {5}, -0.5, 0.5);
  TensorD x = rand_uniform<double>(rng, {2, 5, 6, 6}, -1.0, 1.0);
  const TensorD y0 = bn.forward(x, Mode::Train);
  const TensorD proj = rand_uniform<double>(rng, y0.shape, -1.0, 1.0);
  const TensorD dx = bn.backward(proj);
  const TensorD d_gamma = bn.d_gamma, d_beta = bn.d_beta;

  auto loss = [&]() {
    const TensorD y = bn.forward(x, Mode::Train);
    double acc = 0;
    for (std::size_t k = 0; k < y.size(); ++k) acc += y.data[k] * proj.data[k];
    return acc;
  };
  add_line(report, "batchnorm/gamma", check_tensor(d_gamma, bn.gamma, loss), kTolIsolated);
  add_line(report, "batchnorm/beta", check_tensor(d_beta, bn.beta, loss), kTolIsolated);
  add_line(report, "batchnorm/input", check_tensor(dx, x, loss), kTolIsolated);
}

void check_cfim(GradCheckReport& report, Rng& rng) {
  CfimT<double> cfim;
  cfim.alpha.data[0] = 0.3;
  cfim.beta.data[0] = -0.4;
  TensorD fa = rand_uniform<double>(rng, {2, 3, 4, 4}, -1.0, 1.0);
  TensorD fb = rand_uniform<double>(rng, {2, 3, 4, 4}, -1.0, 1.0);
  const TensorD pa = rand_uniform<double>(rng, fa.shape, -1.0, 1.0);
  const TensorD pb = rand_uniform<double>(rng, fb.shape, -1.0, 1.0);

  auto fwd = cfim.forward(fa, fb, Mode::Train);
  (void)fwd;
  auto grads = cfim.backward(pa, pb);
  const TensorD d_alpha = cfim.d_alpha, d_beta = cfim.d_beta;

  auto loss = [&]() {
    auto out = cfim.forward(fa, fb, Mode::Eval);
    double acc = 0;
    for (std::size_t k = 0; k < out.first.size(); ++k) acc += out.first.data[k] * pa.data[k];
    for (std::size_t k = 0; k < out.second.size(); ++k) acc += out.second.data[k] * pb.data[k];
    return acc;
  };
  add_line(report, "cfim/alpha", check_tensor(d_alpha, cfim.alpha, loss), kTolIsolated);
  add_line(report, "cfim/beta", check_tensor(d_beta, cfim.beta, loss), kTolIsolated);
  add_line(report, "cfim/input_hv", check_tensor(grads.first, fa, loss), kTolIsolated);
  add_line(report, "cfim/input_dg", check_tensor(grads.second, fb, loss), kTolIsolated);
}

void check_maxpool(GradCheckReport& report, Rng& rng) {
  MaxPoolT<double> pool;
  TensorD x = rand_uniform<double>(rng, {1, 2, 8, 8}, -1.0, 1.0);
  const TensorD y0 = pool.forward(x, Mode::Train);
  const TensorD proj = rand_uniform<double>(rng, y0.shape, -1.0, 1.0);
  const TensorD dx = pool.backward(proj);

  auto loss = [&]() {
    MaxPoolT<double> p;
    const TensorD y = p.forward(x, Mode::Eval);
    double acc = 0;
    for (std::size_t k = 0; k < y.size(); ++k) acc += y.data[k] * proj.data[k];
    return acc;
  };
  add_line(report, "maxpool/input", check_tensor(dx, x, loss), kTolIsolated);
}

void check_loss_grad(GradCheckReport& report, Rng& rng) {
  TensorD pred = rand_uniform<double>(rng, {2, 1, 8, 8}, 0.0, 1.0);
  const TensorD label = rand_uniform<double>(rng, {2, 1, 8, 8}, 0.0, 1.0);
  const TensorD d_pred = depth_loss_backward(pred, label, 1.0);
  auto loss = [&]() { return depth_loss(pred, label, 1.0).total; };
  add_line(report, "loss/pred", check_tensor(d_pred, pred, loss), kTolIsolated);
}

void check_network(GradCheckReport& report, const std::string& tag, const NetworkSpec& spec, Rng& rng) {
  NetworkT<double> net(spec);
  Rng init = rng.split(11);
  net.init_weights(init);
  const std::size_t n = 1;
  const std::size_t s = static_cast<std::size_t>(spec.input_size);
  const std::size_t lab = static_cast<std::size_t>(spec.label_size());
  TensorD x = rand_uniform<double>(rng, {n, 3, s, s}, 0.0, 1.0);
  const TensorD label = rand_uniform<double>(rng, {n, 1, lab, lab}, 0.0, 1.0);

  net.zero_grad();
  auto out = net.forward(x, Mode::Train);
  TensorD d_depth = depth_loss_backward(out.depth, label, 1.0);
  net.backward(d_depth);

  auto loss = [&]() {
    auto o = net.forward(x, Mode::Train);
    return depth_loss(o.depth, label, 1.0).total;
  };

  double worst_w = 0, worst_gamma = 0, worst_beta = 0, worst_cfim = 0;
  for (ParamRef<double>& p : net.parameters()) {
    const TensorD analytic = *p.grad;  // keep a copy; forward reuses caches
    const double worst = check_tensor(analytic, *p.value, loss);
    if (p.name.find(".bn.gamma") != std::string::npos) {
      worst_gamma = std::max(worst_gamma, worst);
    } else if (p.name.find(".bn.beta") != std::string::npos) {
      worst_beta = std::max(worst_beta, worst);
    } else if (p.name.rfind("cfim.", 0) == 0) {
      worst_cfim = std::max(worst_cfim, worst);
    } else {
      worst_w = std::max(worst_w, worst);
    }
  }
  add_line(report, tag + "/conv.weights", worst_w, kTolEndToEnd);
  add_line(report, tag + "/bn.gamma", worst_gamma, kTolEndToEnd);
  add_line(report, tag + "/bn.beta", worst_beta, kTolEndToEnd);
  if (spec.dual_stream && spec.cfim_enabled && spec.cfim_learnable) {
    add_line(report, tag + "/cfim", worst_cfim, kTolEndToEnd);
  }
}

}  // namespace

GradCheckReport run_gradient_checks(bool inject_fault) {
  GradCheckReport report;
  Rng rng(0x9d5f0c1b2a3e47ULL);

  for (const std::string& name : builtin_pattern_names()) {
    check_conv_isolated(report, name, inject_fault && name == "full", rng);
  }
  check_batchnorm(report, rng);
  check_cfim(report, rng);
  check_maxpool(report, rng);
  check_loss_grad(report, rng);

  NetworkSpec tiny;
  tiny.input_size = 64;
  tiny.stem_width = 8;
  tiny.block_widths = {8, 12, 8};
  tiny.head_widths = {8, 4};
  tiny.op_a = stream_operator("ccdc-hv", 0.8);
  check_network(report, "e2e-single[ccdc-hv]", tiny, rng);

  NetworkSpec dual;
  dual.input_size = 32;
  dual.stem_width = 4;
  dual.block_widths = {4, 6, 4};
  dual.head_widths = {4, 2};
  dual.dual_stream = true;
  dual.op_a = stream_operator("ccdc-hv", 0.8);
  dual.op_b = stream_operator("ccdc-dg", 0.8);
  dual.fusion = Fusion::Average;
  dual.cfim_enabled = true;
  dual.cfim_learnable = true;
  dual.cfim_init = {0.2, -0.1, 0.3, -0.2, 0.1, -0.3};
  check_network(report, "e2e-dual-cfim", dual, rng);

  return report;
}

std::string format_gradcheck(const GradCheckReport& report) {
  std::ostringstream os;
  for (const GradCheckLine& line : report.lines) {
    os << (line.pass ? "PASS" : "FAIL") << "  " << line.name << "  max_rel " << line.max_rel << "  tol " << line.tol
       << "\n";
  }
  os << (report.all_pass ? "gradient checks: all passed" : "gradient checks: FAILURES PRESENT") << "\n";
  return os.str();
}

}  // namespace ccdc
