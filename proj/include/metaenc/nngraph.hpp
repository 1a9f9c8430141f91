#pragma once

// Small dense feed-forward networks with per-neuron activations, sparse
// connectivity and frozen parameters, plus reverse-mode gradients.
//
// Canonical parameter order (used by every file format in this project):
// layer transitions in order; within a transition, the trainable weights in
// row-major order over (destination neuron, source neuron), followed by the
// trainable biases of the destination neurons. Absent edges and frozen
// weights/biases take no slot.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace metaenc {

enum class Activation { Identity, Tanh, ReLU, Sin, Cos };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

double activate(Activation a, double z);
/// Derivative at z. ReLU'(0) is 0.
double activate_derivative(Activation a, double z);

/// One transition between adjacent layers: `out` neurons fed by `in` neurons.
struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<Activation> activations;               // size out
  std::vector<bool> edge_present;                    // out*in, row-major (dst, src)
  std::vector<std::optional<double>> weight_frozen;  // out*in
  std::vector<std::optional<double>> bias_frozen;    // out

  bool operator==(const LayerSpec&) const = default;
};

class NetSpec {
 public:
  NetSpec() = default;

  /// Fully connected, nothing frozen. `activations[l]` lists the activation of
  /// each neuron in layer l+1.
  static NetSpec dense(std::vector<std::size_t> layer_sizes,
                       std::vector<std::vector<Activation>> activations);

  /// Fully connected with one activation per non-input layer.
  static NetSpec dense_uniform(std::vector<std::size_t> layer_sizes,
                               std::vector<Activation> per_layer);

  NetSpec& remove_edge(std::size_t transition, std::size_t dst, std::size_t src);
  NetSpec& freeze_weight(std::size_t transition, std::size_t dst, std::size_t src, double value);
  NetSpec& freeze_bias(std::size_t transition, std::size_t dst, double value);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t num_transitions() const { return layers_.size(); }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t param_count() const { return param_count_; }

  /// Trainable slot of a weight/bias, or nullopt when absent or frozen.
  std::optional<std::size_t> weight_slot(std::size_t transition, std::size_t dst,
                                         std::size_t src) const;
  std::optional<std::size_t> bias_slot(std::size_t transition, std::size_t dst) const;

  /// Effective value of a weight (trainable ones read from `params`).
  double weight_value(std::span<const double> params, std::size_t transition, std::size_t dst,
                      std::size_t src) const;
  double bias_value(std::span<const double> params, std::size_t transition,
                    std::size_t dst) const;

  bool operator==(const NetSpec& other) const {
    return sizes_ == other.sizes_ && layers_ == other.layers_;
  }

 private:
  friend class NetModel;
  friend class GradTape;
  void check_transition(std::size_t t) const;
  void reindex();

  std::vector<std::size_t> sizes_;
  std::vector<LayerSpec> layers_;
  // Per transition: slot index or -1, and the constant value for non-slots.
  std::vector<std::vector<std::int64_t>> weight_index_;
  std::vector<std::vector<double>> weight_const_;
  std::vector<std::vector<std::int64_t>> bias_index_;
  std::vector<std::vector<double>> bias_const_;
  std::size_t param_count_ = 0;
};

class GradTape;

/// A NetSpec together with its trainable parameter vector.
class NetModel {
 public:
  NetModel() = default;
  explicit NetModel(std::shared_ptr<const NetSpec> spec);
  NetModel(std::shared_ptr<const NetSpec> spec, std::vector<double> params);

  const NetSpec& spec() const { return *spec_; }
  const std::shared_ptr<const NetSpec>& spec_ptr() const { return spec_; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  std::size_t param_count() const { return params_.size(); }

  /// Uniform in [-scale, scale] per trainable parameter.
  void init_uniform(std::uint64_t seed, double scale = 0.5);

  std::vector<double> forward(std::span<const double> input) const;

  /// Evaluates transitions [first, last) starting from the activations of
  /// layer `first`. forward(x) == forward_range(forward_range(x, 0, k), k, n).
  std::vector<double> forward_range(std::span<const double> input, std::size_t first,
                                    std::size_t last) const;

  GradTape forward_with_tape(std::span<const double> input) const;
  /// Same, reusing the buffers of an existing tape.
  void forward_with_tape(std::span<const double> input, GradTape& tape) const;

  bool operator==(const NetModel& other) const;

 private:
  std::shared_ptr<const NetSpec> spec_;
  std::vector<double> params_;
};

/// Record of one forward evaluation.
class GradTape {
 public:
  std::span<const double> output() const { return activations_.back(); }

  /// d(upstream . output)/d(params), length param_count.
  std::vector<double> grad_loss(std::span<const double> upstream) const;

  /// Adds d(upstream . output)/d(params) into `grad`; optionally writes
  /// d(upstream . output)/d(input) into `input_grad`.
  void accumulate(std::span<const double> upstream, std::span<double> grad,
                  std::span<double> input_grad = {}) const;

  const NetSpec& spec() const { return *spec_; }

 private:
  friend class NetModel;
  std::shared_ptr<const NetSpec> spec_;
  std::vector<double> params_;
  std::vector<std::vector<double>> activations_;   // per layer, including input
  std::vector<std::vector<double>> preactivation_; // per transition
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One Adam update of the trainable parameters. Frozen parameters have no
/// slot and are therefore never touched.
void adam_step(NetModel& model, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper);

}  // namespace metaenc
