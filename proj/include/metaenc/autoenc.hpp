#pragma once

// Class-level autoencoders: the two fixed architectures, the reconstruction
// trainer, and hidden-neuron sorting for the arc architecture.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "metaenc/classes.hpp"
#include "metaenc/nngraph.hpp"

namespace metaenc {

enum class AeArchId { Line212, Arc28122 };

std::string_view to_string(AeArchId arch);
AeArchId arch_from_string(std::string_view s);

/// 2-1-2, identity activations, fully trainable (4 weights, 3 biases).
/// Parameter order: w1, w2, b1, w3, w4, b2, b3.
std::shared_ptr<const NetSpec> make_line_spec();

/// 2-8-1-2-2. Layers 2 and 3 tanh, layer 4 {cos, sin}, layer 5 identity.
/// Code-to-layer-4 weights frozen at 1, layer 4 to layer 5 diagonal only,
/// layer 4 and 5 biases frozen at 0. 35 trainable parameters.
std::shared_ptr<const NetSpec> make_arc_spec();

std::shared_ptr<const NetSpec> spec_for(AeArchId arch);

/// Slot layout of the arc AE for the 8 hidden neurons of layer 2.
struct ArcHiddenSlots {
  std::array<std::size_t, 8> in_x;   // weight from input x
  std::array<std::size_t, 8> in_y;   // weight from input y
  std::array<std::size_t, 8> bias;
  std::array<std::size_t, 8> out;    // weight to the code neuron
};
const ArcHiddenSlots& arc_hidden_slots();

/// Slots of the two trainable decoder edges (layer 4 cos -> x', sin -> y').
std::array<std::size_t, 2> arc_decoder_slots();

/// The closed-form line AE: w1 = 1, w2 = 0, w3 = 1, w4 = a, all biases 0.
NetModel analytic_line_model(double slope);

NetModel forward_model(AeArchId arch, std::span<const double> params);

Point2 run_ae(const NetModel& model, Point2 p);

/// Mean over points of |p - AE(p)|^2.
double reconstruction_mse(const NetModel& model, std::span<const Point2> points);
double reconstruction_rmse(const NetModel& model, std::span<const Point2> points);

struct TrainStats {
  double final_train_rmse = 0.0;
  double final_test_rmse = 0.0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::uint32_t attempts = 1;

  bool operator==(const TrainStats&) const = default;
};

struct AeRecord {
  AeArchId arch = AeArchId::Line212;
  NetModel model;
  ClassSpec class_spec;
  TrainStats train_stats;
  bool converged = true;

  bool operator==(const AeRecord&) const = default;
};

struct AeTrainConfig {
  std::size_t epochs = 0;
  std::size_t batch_size = 0;  // 0 = full batch
  AdamHyper adam;
  double lr_final = 0.0;       // learning rate reached by the last epoch (geometric decay); 0 = constant
  double init_scale = 0.5;
  /// When set, every AE starts from the weights drawn from this seed instead
  /// of a per-AE seed; retries still draw fresh weights.
  std::optional<std::uint64_t> shared_init_seed;
  /// When non-empty, training starts from these parameters (takes precedence
  /// over shared_init_seed); retries still draw fresh weights.
  std::vector<double> init_params;
  std::size_t test_points = 0;  // 0 = same as the training sample size
  double line_threshold = 0.05;        // test RMSE bound for lines
  double arc_threshold_factor = 0.05;  // test RMSE bound for circles/arcs, times r
  std::uint32_t max_retries = 3;
};

/// Tuned defaults per architecture.
AeTrainConfig default_ae_config(AeArchId arch);

/// 1000 for lines, 200 for circles and arcs.
std::size_t default_points(AeArchId arch);

AeArchId arch_for(const ClassSpec& spec);

double convergence_threshold(const ClassSpec& spec, const AeTrainConfig& cfg);

/// Trains one AE by minimizing the mean squared reconstruction error on
/// `n_points` samples of the class. Test RMSE is measured on a fresh sample.
/// Throws TrainingError on divergence.
AeRecord train_ae(AeArchId arch, const ClassSpec& spec, std::size_t n_points,
                  const AeTrainConfig& cfg, std::uint64_t seed);

/// train_ae followed by up to cfg.max_retries retrains with fresh seeds while
/// the test RMSE exceeds the convergence threshold. Non-converging records
/// come back with converged == false.
AeRecord train_ae_until_converged(AeArchId arch, const ClassSpec& spec, std::size_t n_points,
                                  const AeTrainConfig& cfg, std::uint64_t seed);

/// Reorders the 8 hidden neurons of an arc AE (with their incoming weights,
/// bias and outgoing weight) so that w_x * w_y is ascending. Ties break on
/// w_x, then bias, then outgoing weight.
AeRecord normalize_ae(const AeRecord& rec);
NetModel normalize_arc_model(const NetModel& model);

/// Moves hidden neuron perm[k] to position k.
NetModel permute_arc_hidden(const NetModel& model, const std::array<std::size_t, 8>& perm);

}  // namespace metaenc
