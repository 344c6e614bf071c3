#include "sfnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sfnn/error.hpp"

namespace sfnn {

std::size_t SFNNConfig::default_hidden_width(std::size_t lookback) {
  return std::min<std::size_t>(2048, std::max<std::size_t>(512, 2 * lookback));
}

void SFNNConfig::validate() const {
  if (lookback < 1 || horizon < 1 || hidden_width < 1 || n_series < 1) {
    throw InvalidConfig("lookback, horizon, hidden_width and n_series must be >= 1");
  }
  if (use_series_mixing && num_mixing_blocks < 1) {
    throw InvalidConfig("series mixing needs at least one mixing block");
  }
  if (use_layer_norm && hidden_width < 2) throw InvalidConfig("layer norm needs hidden_width >= 2");
  if (layer_norm_affine && !use_layer_norm) throw InvalidConfig("layer_norm_affine requires use_layer_norm");
}

std::string SFNNConfig::modules_string() const {
  std::vector<std::string> parts;
  if (use_mean_centering) parts.emplace_back("center");
  if (use_series_mixing) parts.emplace_back("mix");
  if (use_layer_norm) parts.emplace_back(layer_norm_affine ? "ln-affine" : "ln");
  if (parts.empty()) return "none";
  std::string out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out += "," + parts[i];
  return out;
}

void SFNNConfig::set_modules(const std::string& list) {
  use_mean_centering = use_series_mixing = use_layer_norm = layer_norm_affine = false;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty() || tok == "none") continue;
    if (tok == "center") {
      use_mean_centering = true;
    } else if (tok == "mix") {
      use_series_mixing = true;
    } else if (tok == "ln") {
      use_layer_norm = true;
    } else if (tok == "ln-affine") {
      use_layer_norm = layer_norm_affine = true;
    } else {
      throw InvalidConfig("unknown module '" + tok + "' (expected center, mix, ln, ln-affine)");
    }
  }
}

// ---------------------------------------------------------------------------
// parameters

namespace {

Linear zero_linear(std::size_t out, std::size_t in) { return Linear{Matrix(out, in), std::vector<double>(out)}; }

std::span<const double> as_const(std::span<double> s) { return {s.data(), s.size()}; }

}  // namespace

std::vector<std::span<double>> SFNNParams::tensors() {
  std::vector<std::span<double>> out;
  auto add = [&](Linear& l) {
    out.emplace_back(l.weight.data());
    out.emplace_back(l.bias);
  };
  add(input_map);
  for (auto& b : block_maps) add(b);
  add(output_map);
  for (auto& m : mixing_maps) add(m);
  for (auto& g : ln_gains) out.emplace_back(g);
  for (auto& b : ln_biases) out.emplace_back(b);
  return out;
}

std::vector<std::span<const double>> SFNNParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (auto s : const_cast<SFNNParams*>(this)->tensors()) out.push_back(as_const(s));
  return out;
}

std::vector<std::string> SFNNParams::tensor_names() const {
  std::vector<std::string> names{"input_map.weight", "input_map.bias"};
  for (std::size_t i = 0; i < block_maps.size(); ++i) {
    names.push_back("block" + std::to_string(i) + ".weight");
    names.push_back("block" + std::to_string(i) + ".bias");
  }
  names.emplace_back("output_map.weight");
  names.emplace_back("output_map.bias");
  for (std::size_t i = 0; i < mixing_maps.size(); ++i) {
    names.push_back("mixing" + std::to_string(i) + ".weight");
    names.push_back("mixing" + std::to_string(i) + ".bias");
  }
  for (std::size_t i = 0; i < ln_gains.size(); ++i) names.push_back("ln" + std::to_string(i) + ".gain");
  for (std::size_t i = 0; i < ln_biases.size(); ++i) names.push_back("ln" + std::to_string(i) + ".bias");
  return names;
}

std::size_t SFNNParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

bool SFNNParams::all_finite() const {
  for (auto t : tensors())
    for (double v : t)
      if (!std::isfinite(v)) return false;
  return true;
}

bool operator==(const SFNNParams& a, const SFNNParams& b) {
  const auto ta = a.tensors(), tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (!std::equal(ta[i].begin(), ta[i].end(), tb[i].begin(), tb[i].end())) return false;
  return true;
}

SFNNParams zero_params(const SFNNConfig& config) {
  config.validate();
  const std::size_t w = config.hidden_width;
  SFNNParams p;
  p.input_map = zero_linear(w, config.lookback);
  for (std::size_t i = 0; i < config.num_blocks; ++i) p.block_maps.push_back(zero_linear(w, w));
  p.output_map = zero_linear(config.horizon, w);
  if (config.use_series_mixing) {
    for (std::size_t i = 0; i < config.num_mixing_blocks; ++i) {
      p.mixing_maps.push_back(zero_linear(config.n_series, config.n_series));
    }
  }
  if (config.use_layer_norm && config.layer_norm_affine) {
    p.ln_gains.assign(config.num_blocks, std::vector<double>(w, 0.0));
    p.ln_biases.assign(config.num_blocks, std::vector<double>(w, 0.0));
  }
  return p;
}

SFNNParams init_params(const SFNNConfig& config, SeededRng& rng) {
  SFNNParams p = zero_params(config);
  auto fill = [&](Linear& l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
    for (double& v : l.weight.data()) v = rng.uniform(-bound, bound);
  };
  fill(p.input_map);
  for (auto& b : p.block_maps) fill(b);
  fill(p.output_map);
  for (auto& m : p.mixing_maps) fill(m);
  for (auto& g : p.ln_gains) std::fill(g.begin(), g.end(), 1.0);
  return p;
}

// ---------------------------------------------------------------------------
// activations

double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

double selu(double x) noexcept {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

double selu_derivative(double x) noexcept {
  return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

std::vector<double> layer_norm(std::span<const double> v, std::span<const double> gain,
                               std::span<const double> bias) {
  const auto n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = (v[i] - mean) * inv;
    if (!gain.empty()) out[i] = out[i] * gain[i] + bias[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// forward

namespace {

void add_bias_rows(Matrix& m, const std::vector<double>& bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double b = bias[r];
    for (double& v : m.row(r)) v += b;
  }
}

// Affine map on every column: weight * x + bias.
Matrix apply_linear(const Linear& l, const Matrix& x) {
  Matrix out(l.weight.rows(), x.cols());
  matmul_accumulate(l.weight, x, out);
  add_bias_rows(out, l.bias);
  return out;
}

// Mixing pre-activation: for every time step and window, M x + b over the N series.
Matrix mix_affine(const Linear& l, const Matrix& x, std::size_t n) {
  Matrix out(x.rows(), x.cols());
  const std::size_t windows = x.cols() / n;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    auto orow = out.row(r);
    for (std::size_t w = 0; w < windows; ++w) {
      const std::size_t base = w * n;
      for (std::size_t s = 0; s < n; ++s) {
        double acc = l.bias[s];
        for (std::size_t j = 0; j < n; ++j) acc += l.weight(s, j) * xr[base + j];
        orow[base + s] = acc;
      }
    }
  }
  return out;
}

// Column-wise layer norm over the hidden dimension. Writes normalized values
// (before gain/bias) into `normalized` and 1/sqrt(var+eps) into `inv_std`.
void layer_norm_columns(const Matrix& h, Matrix& normalized, std::vector<double>& inv_std) {
  const std::size_t rows = h.rows(), cols = h.cols();
  normalized = Matrix(rows, cols);
  inv_std.assign(cols, 0.0);
  std::vector<double> mean(cols, 0.0), var(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto hr = h.row(r);
    for (std::size_t c = 0; c < cols; ++c) mean[c] += hr[c];
  }
  for (double& m : mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto hr = h.row(r);
    for (std::size_t c = 0; c < cols; ++c) var[c] += (hr[c] - mean[c]) * (hr[c] - mean[c]);
  }
  for (std::size_t c = 0; c < cols; ++c) {
    inv_std[c] = 1.0 / std::sqrt(var[c] / static_cast<double>(rows) + kLayerNormEps);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const auto hr = h.row(r);
    auto nr = normalized.row(r);
    for (std::size_t c = 0; c < cols; ++c) nr[c] = (hr[c] - mean[c]) * inv_std[c];
  }
}

void check_input(const SFNNConfig& config, const Matrix& input) {
  if (input.rows() != config.lookback || input.cols() == 0 || input.cols() % config.n_series != 0) {
    throw ShapeMismatch("forward: expected " + std::to_string(config.lookback) + " x (" +
                        std::to_string(config.n_series) + " * k) input, got " +
                        std::to_string(input.rows()) + "x" + std::to_string(input.cols()));
  }
}

}  // namespace

ForwardResult forward(const SFNNParams& params, const SFNNConfig& config, const Matrix& input) {
  config.validate();
  check_input(config, input);
  const std::size_t cols = input.cols(), n = config.n_series, lookback = config.lookback;

  ForwardResult result;
  ForwardTrace& tr = result.trace;
  tr.config = config;
  tr.columns = cols;

  Matrix x = input;
  if (config.use_mean_centering) {
    tr.means.assign(cols, 0.0);
    for (std::size_t r = 0; r < lookback; ++r) {
      const auto xr = x.row(r);
      for (std::size_t c = 0; c < cols; ++c) tr.means[c] += xr[c];
    }
    for (double& m : tr.means) m /= static_cast<double>(lookback);
    for (std::size_t r = 0; r < lookback; ++r) {
      auto xr = x.row(r);
      for (std::size_t c = 0; c < cols; ++c) xr[c] -= tr.means[c];
    }
  }

  if (config.use_series_mixing) {
    for (const Linear& mix : params.mixing_maps) {
      tr.mixing_inputs.push_back(x);
      Matrix pre = mix_affine(mix, x, n);
      for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += selu(pre.data()[i]);
      tr.mixing_pre.push_back(std::move(pre));
    }
  }

  tr.temporal_input = std::move(x);
  Matrix h = apply_linear(params.input_map, tr.temporal_input);
  const bool affine = config.use_layer_norm && config.layer_norm_affine;
  for (std::size_t k = 0; k < config.num_blocks; ++k) {
    Matrix u;
    if (config.use_layer_norm) {
      std::vector<double> inv;
      layer_norm_columns(h, u, inv);
      tr.ln_inv_std.push_back(std::move(inv));
      tr.ln_normalized.push_back(u);
      if (affine) {
        for (std::size_t r = 0; r < u.rows(); ++r) {
          const double g = params.ln_gains[k][r], b = params.ln_biases[k][r];
          for (double& v : u.row(r)) v = v * g + b;
        }
      }
    } else {
      u = h;
    }
    Matrix z = apply_linear(params.block_maps[k], u);
    tr.hidden.push_back(h);
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] += relu(z.data()[i]);
    tr.block_inputs.push_back(std::move(u));
    tr.block_pre.push_back(std::move(z));
  }
  tr.hidden.push_back(h);

  result.output = apply_linear(params.output_map, h);
  if (config.use_mean_centering) {
    for (std::size_t r = 0; r < result.output.rows(); ++r) {
      auto orow = result.output.row(r);
      for (std::size_t c = 0; c < cols; ++c) orow[c] += tr.means[c];
    }
  }
  return result;
}

Matrix predict(const SFNNParams& params, const SFNNConfig& config, const Matrix& input) {
  return forward(params, config, input).output;
}

// ---------------------------------------------------------------------------
// backward

namespace {

void accumulate_linear_grads(const Matrix& dout, const Matrix& in, Linear& grad) {
  matmul_nt_accumulate(dout, in, grad.weight);
  for (std::size_t r = 0; r < dout.rows(); ++r) {
    double s = 0.0;
    for (double v : dout.row(r)) s += v;
    grad.bias[r] += s;
  }
}

}  // namespace

Gradients backward(const SFNNParams& params, const SFNNConfig& config, const ForwardTrace& trace,
                   const Matrix& output_grad) {
  if (!(trace.config == config) || trace.hidden.size() != config.num_blocks + 1 ||
      output_grad.rows() != config.horizon || output_grad.cols() != trace.columns) {
    throw TraceMismatch("backward: trace or output gradient does not match the forward call");
  }
  const std::size_t cols = trace.columns, n = config.n_series, lookback = config.lookback;
  Gradients g{zero_params(config), Matrix()};

  accumulate_linear_grads(output_grad, trace.hidden.back(), g.params.output_map);
  Matrix dh = matmul_tn(params.output_map.weight, output_grad);

  const bool affine = config.use_layer_norm && config.layer_norm_affine;
  for (std::size_t k = config.num_blocks; k-- > 0;) {
    Matrix dz = dh;
    const auto& z = trace.block_pre[k].data();
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (!(z[i] > 0.0)) dz.data()[i] = 0.0;
    }
    accumulate_linear_grads(dz, trace.block_inputs[k], g.params.block_maps[k]);
    Matrix du = matmul_tn(params.block_maps[k].weight, dz);
    if (!config.use_layer_norm) {
      dh += du;
      continue;
    }
    const std::size_t rows = du.rows();
    const Matrix& xhat = trace.ln_normalized[k];
    if (affine) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double gain = params.ln_gains[k][r];
        auto dur = du.row(r);
        const auto xr = xhat.row(r);
        double dgain = 0.0, dbias = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          dgain += dur[c] * xr[c];
          dbias += dur[c];
          dur[c] *= gain;
        }
        g.params.ln_gains[k][r] += dgain;
        g.params.ln_biases[k][r] += dbias;
      }
    }
    // d h = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)), per column.
    std::vector<double> mean_d(cols, 0.0), mean_dx(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto dur = du.row(r);
      const auto xr = xhat.row(r);
      for (std::size_t c = 0; c < cols; ++c) {
        mean_d[c] += dur[c];
        mean_dx[c] += dur[c] * xr[c];
      }
    }
    const double inv_rows = 1.0 / static_cast<double>(rows);
    const auto& inv_std = trace.ln_inv_std[k];
    for (std::size_t r = 0; r < rows; ++r) {
      const auto dur = du.row(r);
      const auto xr = xhat.row(r);
      auto dhr = dh.row(r);
      for (std::size_t c = 0; c < cols; ++c) {
        dhr[c] += inv_std[c] * (dur[c] - mean_d[c] * inv_rows - xr[c] * mean_dx[c] * inv_rows);
      }
    }
  }

  accumulate_linear_grads(dh, trace.temporal_input, g.params.input_map);
  Matrix dx = matmul_tn(params.input_map.weight, dh);

  if (config.use_series_mixing) {
    const std::size_t windows = cols / n;
    for (std::size_t m = params.mixing_maps.size(); m-- > 0;) {
      const Linear& mix = params.mixing_maps[m];
      Linear& gmix = g.params.mixing_maps[m];
      const Matrix& xin = trace.mixing_inputs[m];
      const Matrix& pre = trace.mixing_pre[m];
      Matrix da = dx;
      for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] *= selu_derivative(pre.data()[i]);
      for (std::size_t r = 0; r < lookback; ++r) {
        const auto dar = da.row(r);
        const auto xr = xin.row(r);
        auto dxr = dx.row(r);
        for (std::size_t w = 0; w < windows; ++w) {
          const std::size_t base = w * n;
          for (std::size_t s = 0; s < n; ++s) {
            const double d = dar[base + s];
            gmix.bias[s] += d;
            for (std::size_t j = 0; j < n; ++j) {
              gmix.weight(s, j) += d * xr[base + j];
              dxr[base + j] += mix.weight(s, j) * d;
            }
          }
        }
      }
    }
  }

  if (config.use_mean_centering) {
    const double inv_l = 1.0 / static_cast<double>(lookback);
    std::vector<double> shift(cols, 0.0);
    for (std::size_t r = 0; r < lookback; ++r) {
      const auto dxr = dx.row(r);
      for (std::size_t c = 0; c < cols; ++c) shift[c] -= dxr[c];
    }
    for (std::size_t r = 0; r < output_grad.rows(); ++r) {
      const auto orow = output_grad.row(r);
      for (std::size_t c = 0; c < cols; ++c) shift[c] += orow[c];
    }
    for (std::size_t r = 0; r < lookback; ++r) {
      auto dxr = dx.row(r);
      for (std::size_t c = 0; c < cols; ++c) dxr[c] += shift[c] * inv_l;
    }
  }
  g.input = std::move(dx);
  return g;
}

// ---------------------------------------------------------------------------
// gradient check

bool GradientCheckReport::passed() const {
  return std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.passed; });
}

namespace {

double mse_of(const Matrix& pred, const Matrix& target, Matrix* grad) {
  const double count = static_cast<double>(pred.size());
  double loss = 0.0;
  if (grad) *grad = Matrix(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    loss += d * d;
    if (grad) grad->data()[i] = 2.0 * d / count;
  }
  return loss / count;
}

}  // namespace

GradientCheckReport gradient_check(const SFNNConfig& config, std::uint64_t seed, double tolerance,
                                   double step, bool corrupt) {
  config.validate();
  SeededRng rng(seed);
  SFNNParams params = init_params(config, rng);
  // Non-trivial biases and gains so every path carries gradient.
  for (auto& b : params.input_map.bias) b = 0.1 * rng.standard_normal();
  for (auto& l : params.block_maps)
    for (auto& b : l.bias) b = 0.1 * rng.standard_normal();
  for (auto& b : params.output_map.bias) b = 0.1 * rng.standard_normal();
  for (auto& l : params.mixing_maps)
    for (auto& b : l.bias) b = 0.1 * rng.standard_normal();
  for (auto& g : params.ln_gains)
    for (auto& v : g) v = 1.0 + 0.2 * rng.standard_normal();
  for (auto& g : params.ln_biases)
    for (auto& v : g) v = 0.1 * rng.standard_normal();

  const std::size_t windows = 2, cols = windows * config.n_series;
  Matrix input(config.lookback, cols), target(config.horizon, cols);
  for (double& v : input.data()) v = rng.standard_normal();
  for (double& v : target.data()) v = rng.standard_normal();

  auto loss_at = [&](const SFNNParams& p, const Matrix& x) {
    return mse_of(predict(p, config, x), target, nullptr);
  };

  ForwardResult fr = forward(params, config, input);
  Matrix dout;
  mse_of(fr.output, target, &dout);
  Gradients grads = backward(params, config, fr.trace, dout);
  if (corrupt) grads.params.input_map.weight.data()[0] += 1.0;

  // Relative error uses max(|analytic|, |numeric|, floor) so entries that are
  // zero up to roundoff do not dominate.
  constexpr double kFloor = 1e-4;
  auto rel = [&](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kFloor});
  };

  GradientCheckReport report;
  report.tolerance = tolerance;
  const auto names = params.tensor_names();
  auto ptens = params.tensors();
  const auto gtens = grads.params.tensors();
  for (std::size_t t = 0; t < ptens.size(); ++t) {
    GradientCheckGroup group{names[t], 0.0, true};
    for (std::size_t i = 0; i < ptens[t].size(); ++i) {
      const double orig = ptens[t][i];
      ptens[t][i] = orig + step;
      const double up = loss_at(params, input);
      ptens[t][i] = orig - step;
      const double down = loss_at(params, input);
      ptens[t][i] = orig;
      group.max_relative_error = std::max(group.max_relative_error, rel(gtens[t][i], (up - down) / (2 * step)));
    }
    group.passed = group.max_relative_error <= tolerance;
    report.groups.push_back(group);
  }

  GradientCheckGroup in_group{"input", 0.0, true};
  Matrix x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + step;
    const double up = loss_at(params, x);
    x.data()[i] = orig - step;
    const double down = loss_at(params, x);
    x.data()[i] = orig;
    in_group.max_relative_error =
        std::max(in_group.max_relative_error, rel(grads.input.data()[i], (up - down) / (2 * step)));
  }
  in_group.passed = in_group.max_relative_error <= tolerance;
  report.groups.push_back(in_group);
  return report;
}

}  // namespace sfnn
