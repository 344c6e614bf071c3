#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sfnn/matrix.hpp"
#include "sfnn/rng.hpp"

namespace sfnn {

/// Architecture of a simple feedforward forecaster.
///
/// Forward order is fixed: (1) subtract the per-series input mean, (2) residual
/// SELU mixing across series at every time step, (3) the shared temporal stack
/// input_map -> B residual ReLU blocks (optionally pre-normalized) -> output_map,
/// applied to each series on its own, (4) add the mean back.
struct SFNNConfig {
  std::size_t lookback = 96;
  std::size_t horizon = 96;
  std::size_t hidden_width = 512;
  std::size_t num_blocks = 2;
  std::size_t n_series = 1;
  bool use_mean_centering = false;
  bool use_series_mixing = false;
  std::size_t num_mixing_blocks = 1;
  bool use_layer_norm = false;
  bool layer_norm_affine = false;

  /// max(512, 2 L) capped at 2048.
  static std::size_t default_hidden_width(std::size_t lookback);

  /// Throws InvalidConfig.
  void validate() const;
  /// Comma-separated enabled optional modules: "center", "mix", "ln" (or "none").
  std::string modules_string() const;
  /// Enables modules from a list like "center,mix,ln". "none" or "" clears all.
  void set_modules(const std::string& list);

  friend bool operator==(const SFNNConfig&, const SFNNConfig&) = default;
};

/// Weight matrix (out x in) plus bias (out).
struct Linear {
  Matrix weight;
  std::vector<double> bias;
};

/// All learnable tensors. The temporal maps are shared by every series.
struct SFNNParams {
  Linear input_map;                         // W x L
  std::vector<Linear> block_maps;           // B of W x W
  Linear output_map;                        // H x W
  std::vector<Linear> mixing_maps;          // N x N each, empty unless mixing is on
  std::vector<std::vector<double>> ln_gains;   // one per block when affine layer norm is on
  std::vector<std::vector<double>> ln_biases;

  /// Flat views of every tensor in declaration order (weight then bias for each map).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::vector<std::string> tensor_names() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  friend bool operator==(const SFNNParams&, const SFNNParams&);
};

/// Zero-valued parameters of the right shapes (gains are zero too).
SFNNParams zero_params(const SFNNConfig& config);

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero; gains one.
SFNNParams init_params(const SFNNConfig& config, SeededRng& rng);

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kLayerNormEps = 1e-5;

double relu(double x) noexcept;
/// Scaled exponential linear unit (Klambauer et al., 2017).
double selu(double x) noexcept;
double selu_derivative(double x) noexcept;
/// (v - mean) / sqrt(var + eps) * gain + bias, with population variance.
/// Empty gain/bias means the non-affine form.
std::vector<double> layer_norm(std::span<const double> v, std::span<const double> gain = {},
                               std::span<const double> bias = {});

/// Everything backward() needs from one forward call. Inputs are packed
/// window-major: lookback x (N * windows), column w * N + s is series s of window w.
struct ForwardTrace {
  SFNNConfig config;
  std::size_t columns = 0;
  std::vector<double> means;            // per column; empty without centering
  std::vector<Matrix> mixing_inputs;    // per mixing block, lookback x columns
  std::vector<Matrix> mixing_pre;       // SELU arguments
  Matrix temporal_input;                // lookback x columns
  std::vector<Matrix> hidden;           // num_blocks + 1 states, W x columns
  std::vector<Matrix> block_inputs;     // inputs of each block's linear map
  std::vector<Matrix> ln_normalized;    // per block, before gain/bias
  std::vector<std::vector<double>> ln_inv_std;  // per block, per column
  std::vector<Matrix> block_pre;        // ReLU arguments
};

struct ForwardResult {
  Matrix output;  // horizon x columns
  ForwardTrace trace;
};

/// Throws ShapeMismatch when input is not lookback x (N * k) for some k >= 1.
ForwardResult forward(const SFNNParams& params, const SFNNConfig& config, const Matrix& input);
/// Forward without keeping the trace.
Matrix predict(const SFNNParams& params, const SFNNConfig& config, const Matrix& input);

struct Gradients {
  SFNNParams params;
  Matrix input;
};

/// Reverse-mode gradients of a scalar loss given d loss / d output.
/// Throws TraceMismatch when the trace does not belong to this config or shape.
Gradients backward(const SFNNParams& params, const SFNNConfig& config, const ForwardTrace& trace,
                   const Matrix& output_grad);

/// Result of comparing backward() against central differences of the MSE loss.
struct GradientCheckGroup {
  std::string name;
  double max_relative_error = 0.0;
  bool passed = true;
};

struct GradientCheckReport {
  std::vector<GradientCheckGroup> groups;
  double tolerance = 0.0;
  bool passed() const;
};

/// Builds random parameters (and random biases/gains so every path is exercised),
/// a random batch and random targets, then checks every analytic gradient entry.
/// `corrupt` adds a unit perturbation to one analytic entry, for testing the checker.
GradientCheckReport gradient_check(const SFNNConfig& config, std::uint64_t seed, double tolerance,
                                   double step = 1e-5, bool corrupt = false);

}  // namespace sfnn
