#pragma once

// Meta-autoencoders: autoencoders whose inputs are the parameter vectors of
// class-level AEs, trained with an execution-driven loss that runs the
// reconstructed AE on class points and compares it with the input AE.

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "metaenc/autoenc.hpp"
#include "metaenc/nngraph.hpp"

namespace metaenc {

enum class MaeKind { Line818, Arc9Layer };
enum class FeatureTransform { LineRatio, ArcIdentity };

std::string_view to_string(MaeKind kind);
MaeKind mae_kind_from_string(std::string_view s);

struct MaeSpec {
  MaeKind kind = MaeKind::Line818;
  FeatureTransform transform = FeatureTransform::LineRatio;
  AeArchId ae_arch = AeArchId::Line212;
  std::shared_ptr<const NetSpec> net;
  std::size_t bottleneck_layer = 1;  // index into net->layer_sizes()
  bool relu_hidden = false;          // line818 only

  /// 8-1-8. Identity activations unless `relu_hidden`, which puts ReLU on
  /// the bottleneck.
  static MaeSpec line818(bool relu_hidden = false);
  /// 35-20-10-4-1-4-10-20-35 with ReLU hidden layers, a linear bottleneck and
  /// a linear output layer.
  static MaeSpec arc9();
  static MaeSpec for_kind(MaeKind kind);
};

/// Line: [w1, w2, w3, w4, b1, b2, b3, w4/w3]. Arc: the 35 trainable
/// parameters of a normalized arc AE in canonical order.
using FeatureVector = std::vector<double>;

std::size_t feature_width(FeatureTransform transform);

/// Throws ContractError for a wrong architecture and for |w3| <= 1e-6.
FeatureVector featurize(const AeRecord& rec, FeatureTransform transform);

/// Inverse of featurize on the AE parameters; the line ratio slot is ignored
/// and frozen arc parameters keep their fixed values.
NetModel defeaturize(std::span<const double> features, FeatureTransform transform);

/// Maps a gradient over AE trainable parameters back onto feature slots
/// (the transpose of defeaturize; the line ratio slot receives 0).
std::vector<double> feature_gradient(std::span<const double> param_grad,
                                     FeatureTransform transform);

inline constexpr double kLineDegenerateW3 = 1e-6;

/// The four on-line probes x in {-10, -3.33, 3.33, 10}.
struct FixedLineProbes {};

/// `count` probes on the arc (or circle) of the input AE's class: evenly
/// spaced over the angle range when `evenly_spaced`, otherwise uniform random
/// from `seed`.
struct SampledArcProbes {
  std::size_t count = 8;
  std::uint64_t seed = 0;
  bool evenly_spaced = true;
};

struct ExecLossConfig {
  std::variant<FixedLineProbes, SampledArcProbes> probes;

  static ExecLossConfig for_kind(MaeKind kind);
};

/// Probe points C0 for the class of `rec`.
std::vector<Point2> probe_points(const AeRecord& rec, const ExecLossConfig& cfg);

struct ExecLoss {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d output_model params
};

/// Mean over probes z of |output_model(z) - input_model(z)|^2. The input AE
/// is treated as data; gradients flow only through the output model.
ExecLoss exec_loss(const AeRecord& input_rec, const NetModel& output_model,
                   const ExecLossConfig& cfg);

struct MaeTrainConfig {
  std::size_t epochs = 0;
  std::size_t batch_size = 0;  // 0 = full batch
  AdamHyper adam;
  double lr_final = 0.0;  // geometric decay target; 0 = constant
  double init_scale = 0.5;
  std::size_t log_every = 50;
  /// Optional parameter-space term weight * |features_out - features_in|^2
  /// over the AE parameter slots. Off by default.
  double param_loss_weight = 0.0;
  /// Shift and scale each input feature by its training-set mean and
  /// standard deviation before it enters the MAE. Off for arcs, where it
  /// inflates near-constant parameters to the same weight as the radius.
  bool standardize_inputs = true;
  /// Map network outputs back to AE parameters with the training-set mean
  /// and standard deviation of each parameter slot.
  bool standardize_outputs = true;
  /// Independent initializations; the one with the lowest final training
  /// loss is kept. Line818 runs either reach ~0 loss or stall, so it
  /// defaults to 32; Arc9Layer uses 4 against collapsed ReLU runs.
  std::size_t restarts = 1;
  /// L2 penalty weight_decay * |theta|^2 on the MAE network parameters.
  double weight_decay = 0.0;
  /// Divide each record's training loss by the mean squared norm of its
  /// probe outputs, so small and large classes pull equally. Reported
  /// losses stay unweighted. On for arcs, whose loss otherwise grows with
  /// r^2 and leaves small radii underfit.
  bool scale_normalized_loss = false;

  static MaeTrainConfig for_kind(MaeKind kind);
};

struct MaeCurvePoint {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;

  bool operator==(const MaeCurvePoint&) const = default;
};

struct MaeTrainStats {
  std::vector<MaeCurvePoint> curve;
  double initial_train_loss = 0.0;
  double initial_test_loss = 0.0;
  double final_train_loss = 0.0;
  double final_test_loss = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const MaeTrainStats&) const = default;
};

struct MaeModel {
  MaeSpec spec;
  NetModel net;
  /// Per-feature affine input map: net input = (feature - shift) / scale.
  std::vector<double> input_shift;
  std::vector<double> input_scale;
  /// Per-slot affine output map: feature = shift + scale * net output.
  std::vector<double> output_shift;
  std::vector<double> output_scale;
  MaeTrainStats train_stats;

  /// Feature vector -> network input.
  std::vector<double> net_input(std::span<const double> features) const;
  /// Network output -> feature vector (AE parameters).
  std::vector<double> net_output_to_features(std::span<const double> out) const;
};

/// Mean execution-driven loss of the MAE's reconstructions over `records`.
double mean_exec_loss(const MaeModel& mae, std::span<const AeRecord> records,
                      const ExecLossConfig& cfg);

/// Gradient of mean_exec_loss with respect to the MAE network parameters.
std::vector<double> mae_loss_gradient(const MaeModel& mae, std::span<const AeRecord> records,
                                      const ExecLossConfig& cfg, double* loss_out = nullptr);

/// An untrained MAE with identity input map and uniform initial weights.
MaeModel make_mae(const MaeSpec& spec, std::uint64_t seed, double init_scale = 0.5);

/// Trains an MAE on `train` (test records are only evaluated). Records must
/// share the MAE's AE architecture; arc records must already be normalized.
MaeModel train_mae(std::span<const AeRecord> train, std::span<const AeRecord> test,
                   const MaeSpec& spec, const ExecLossConfig& cfg, const MaeTrainConfig& hyper,
                   std::uint64_t seed);

/// Bottleneck activation for an input AE.
double encode_ae(const MaeModel& mae, const AeRecord& rec);

/// Runs the decoder half from a bottleneck value and builds the AE.
NetModel decode_code(const MaeModel& mae, double code);

/// Full MAE pass: decode_code(mae, encode_ae(mae, rec)).
NetModel reconstruct(const MaeModel& mae, const AeRecord& rec);

}  // namespace metaenc
