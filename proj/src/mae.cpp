#include "metaenc/mae.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "metaenc/errors.hpp"
#include "metaenc/rng.hpp"

namespace metaenc {

namespace {

// Line feature slot k holds canonical line parameter kLineFeatureToParam[k].
constexpr std::array<std::size_t, 7> kLineFeatureToParam{0, 1, 3, 4, 2, 5, 6};

constexpr std::array<double, 4> kLineProbeX{-10.0, -3.33, 3.33, 10.0};

}  // namespace

std::string_view to_string(MaeKind kind) {
  switch (kind) {
    case MaeKind::Line818: return "line818";
    case MaeKind::Arc9Layer: return "arc9";
  }
  return "?";
}

MaeKind mae_kind_from_string(std::string_view s) {
  if (s == "line818") return MaeKind::Line818;
  if (s == "arc9") return MaeKind::Arc9Layer;
  throw ContractError("unknown MAE architecture '" + std::string(s) + "'");
}

MaeSpec MaeSpec::line818(bool relu_hidden) {
  MaeSpec spec;
  spec.kind = MaeKind::Line818;
  spec.transform = FeatureTransform::LineRatio;
  spec.ae_arch = AeArchId::Line212;
  spec.net = std::make_shared<const NetSpec>(NetSpec::dense_uniform(
      {8, 1, 8}, {relu_hidden ? Activation::ReLU : Activation::Identity, Activation::Identity}));
  spec.bottleneck_layer = 1;
  spec.relu_hidden = relu_hidden;
  return spec;
}

MaeSpec MaeSpec::arc9() {
  MaeSpec spec;
  spec.kind = MaeKind::Arc9Layer;
  spec.transform = FeatureTransform::ArcIdentity;
  spec.ae_arch = AeArchId::Arc28122;
  const auto R = Activation::ReLU;
  const auto L = Activation::Identity;
  spec.net = std::make_shared<const NetSpec>(
      NetSpec::dense_uniform({35, 20, 10, 4, 1, 4, 10, 20, 35}, {R, R, R, L, R, R, R, L}));
  spec.bottleneck_layer = 4;
  return spec;
}

MaeSpec MaeSpec::for_kind(MaeKind kind) {
  return kind == MaeKind::Line818 ? line818() : arc9();
}

std::size_t feature_width(FeatureTransform transform) {
  return transform == FeatureTransform::LineRatio ? 8 : make_arc_spec()->param_count();
}

FeatureVector featurize(const AeRecord& rec, FeatureTransform transform) {
  const auto p = rec.model.params();
  if (transform == FeatureTransform::LineRatio) {
    if (rec.arch != AeArchId::Line212 || !(rec.model.spec() == *make_line_spec())) {
      throw ContractError("line features need a line212 record");
    }
    const double w3 = p[3];
    const double w4 = p[4];
    if (std::abs(w3) <= kLineDegenerateW3) {
      throw ContractError("degenerate decoder: |w3| <= 1e-6 for " + label(rec.class_spec));
    }
    FeatureVector fv(8);
    for (std::size_t k = 0; k < 7; ++k) fv[k] = p[kLineFeatureToParam[k]];
    fv[7] = w4 / w3;
    return fv;
  }
  if (rec.arch != AeArchId::Arc28122 || !(rec.model.spec() == *make_arc_spec())) {
    throw ContractError("arc features need an arc28122 record");
  }
  if (!(normalize_arc_model(rec.model) == rec.model)) {
    throw ContractError("arc features need a normalized record");
  }
  return FeatureVector(p.begin(), p.end());
}

NetModel defeaturize(std::span<const double> features, FeatureTransform transform) {
  if (features.size() != feature_width(transform)) {
    throw ContractError("feature vector has width " + std::to_string(features.size()) +
                        ", expected " + std::to_string(feature_width(transform)));
  }
  if (transform == FeatureTransform::LineRatio) {
    std::vector<double> params(7);
    for (std::size_t k = 0; k < 7; ++k) params[kLineFeatureToParam[k]] = features[k];
    return NetModel(make_line_spec(), std::move(params));
  }
  return NetModel(make_arc_spec(), std::vector<double>(features.begin(), features.end()));
}

std::vector<double> feature_gradient(std::span<const double> param_grad,
                                     FeatureTransform transform) {
  if (transform == FeatureTransform::LineRatio) {
    if (param_grad.size() != 7) throw ContractError("line gradient must have 7 entries");
    std::vector<double> g(8, 0.0);
    for (std::size_t k = 0; k < 7; ++k) g[k] = param_grad[kLineFeatureToParam[k]];
    return g;
  }
  if (param_grad.size() != feature_width(transform)) {
    throw ContractError("arc gradient has wrong width");
  }
  return {param_grad.begin(), param_grad.end()};
}

ExecLossConfig ExecLossConfig::for_kind(MaeKind kind) {
  ExecLossConfig cfg;
  if (kind == MaeKind::Line818) {
    cfg.probes = FixedLineProbes{};
  } else {
    cfg.probes = SampledArcProbes{};
  }
  return cfg;
}

std::vector<Point2> probe_points(const AeRecord& rec, const ExecLossConfig& cfg) {
  std::vector<Point2> probes;
  if (std::holds_alternative<FixedLineProbes>(cfg.probes)) {
    const auto* line = std::get_if<LineClass>(&rec.class_spec);
    if (!line) throw ContractError("fixed line probes need a line class");
    const double a = line->slope();
    for (double x : kLineProbeX) probes.push_back({x, a * x});
    return probes;
  }
  const auto& arc_probes = std::get<SampledArcProbes>(cfg.probes);
  if (arc_probes.count == 0) throw ContractError("probe count must be positive");
  double r = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool closed = true;
  if (const auto* arc = std::get_if<ArcClass>(&rec.class_spec)) {
    r = arc->r;
    lo = arc->angle_lo;
    hi = arc->angle_hi;
  } else if (const auto* circle = std::get_if<CircleClass>(&rec.class_spec)) {
    r = circle->r;
    lo = -std::numbers::pi;
    hi = std::numbers::pi;
    closed = false;
  } else {
    throw ContractError("arc probes need a circle or arc class");
  }
  Rng rng(arc_probes.seed);
  const std::size_t n = arc_probes.count;
  for (std::size_t k = 0; k < n; ++k) {
    double t;
    if (arc_probes.evenly_spaced) {
      const double denom = closed ? static_cast<double>(std::max<std::size_t>(n - 1, 1))
                                  : static_cast<double>(n);
      t = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(k) / denom;
    } else {
      t = rng.uniform(lo, hi);
    }
    probes.push_back({r * std::cos(t), r * std::sin(t)});
  }
  return probes;
}

ExecLoss exec_loss(const AeRecord& input_rec, const NetModel& output_model,
                   const ExecLossConfig& cfg) {
  if (!(input_rec.model.spec() == output_model.spec())) {
    throw ContractError("exec loss needs input and output AEs of the same architecture");
  }
  const std::vector<Point2> probes = probe_points(input_rec, cfg);
  ExecLoss result;
  result.grad.assign(output_model.param_count(), 0.0);
  const double scale = 1.0 / static_cast<double>(probes.size());
  GradTape tape;
  for (const Point2& z : probes) {
    const std::array<double, 2> in{z.x, z.y};
    const auto target = input_rec.model.forward(in);
    output_model.forward_with_tape(in, tape);
    const auto out = tape.output();
    const double dx = out[0] - target[0];
    const double dy = out[1] - target[1];
    result.loss += scale * (dx * dx + dy * dy);
    const std::array<double, 2> upstream{2.0 * scale * dx, 2.0 * scale * dy};
    tape.accumulate(upstream, result.grad);
  }
  if (!std::isfinite(result.loss)) throw NumericError("exec loss is not finite");
  return result;
}

std::vector<double> MaeModel::net_input(std::span<const double> features) const {
  const std::size_t width = spec.net->input_size();
  if (features.size() != width) {
    throw ContractError("feature vector has width " + std::to_string(features.size()) +
                        ", MAE expects " + std::to_string(width));
  }
  std::vector<double> in(features.begin(), features.end());
  if (input_shift.empty()) return in;
  for (std::size_t k = 0; k < width; ++k) in[k] = (in[k] - input_shift[k]) / input_scale[k];
  return in;
}

std::vector<double> MaeModel::net_output_to_features(std::span<const double> out) const {
  std::vector<double> fv(out.begin(), out.end());
  if (output_shift.empty()) return fv;
  if (fv.size() != output_shift.size()) throw ContractError("MAE output width mismatch");
  for (std::size_t k = 0; k < fv.size(); ++k) fv[k] = output_shift[k] + output_scale[k] * fv[k];
  return fv;
}

MaeModel make_mae(const MaeSpec& spec, std::uint64_t seed, double init_scale) {
  MaeModel mae;
  mae.spec = spec;
  mae.net = NetModel(spec.net);
  mae.net.init_uniform(seed, init_scale);
  mae.train_stats.seed = seed;
  return mae;
}

namespace {

void check_records(std::span<const AeRecord> records, const MaeSpec& spec) {
  for (const AeRecord& rec : records) {
    if (rec.arch != spec.ae_arch) {
      throw ContractError("record " + label(rec.class_spec) + " does not match the MAE's AE arch");
    }
  }
}

// Per-record data that stays fixed during MAE training.
struct PreparedRecord {
  FeatureVector features;
  std::vector<double> input;  // standardized features
  std::vector<std::array<double, 2>> probes;
  std::vector<std::array<double, 2>> targets;
  double mean_target_sq = 0.0;  // mean |input AE(z)|^2 over the probes
};

std::vector<PreparedRecord> prepare(std::span<const AeRecord> records, const MaeModel& mae,
                                    const ExecLossConfig& cfg) {
  check_records(records, mae.spec);
  std::vector<PreparedRecord> out;
  out.reserve(records.size());
  for (const AeRecord& rec : records) {
    PreparedRecord p;
    p.features = featurize(rec, mae.spec.transform);
    p.input = mae.net_input(p.features);
    for (const Point2& z : probe_points(rec, cfg)) {
      const std::array<double, 2> in{z.x, z.y};
      const auto t = rec.model.forward(in);
      p.probes.push_back(in);
      p.targets.push_back({t[0], t[1]});
      p.mean_target_sq += t[0] * t[0] + t[1] * t[1];
    }
    p.mean_target_sq /= static_cast<double>(p.probes.size());
    out.push_back(std::move(p));
  }
  return out;
}

struct Tapes {
  GradTape mae;
  GradTape ae;
};

// Loss of one record; when `mae_grad` is non-empty adds weight * d loss / d
// MAE params into it.
double record_loss(const MaeModel& mae, const PreparedRecord& rec, double param_loss_weight,
                   double weight, std::span<double> mae_grad, Tapes& tapes) {
  const FeatureTransform transform = mae.spec.transform;
  mae.net.forward_with_tape(rec.input, tapes.mae);
  const std::vector<double> out = mae.net_output_to_features(tapes.mae.output());
  const NetModel ae = defeaturize(out, transform);
  const bool want_grad = !mae_grad.empty();
  std::vector<double> ae_grad(want_grad ? ae.param_count() : 0, 0.0);
  const double scale = 1.0 / static_cast<double>(rec.probes.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < rec.probes.size(); ++k) {
    ae.forward_with_tape(rec.probes[k], tapes.ae);
    const auto y = tapes.ae.output();
    const double dx = y[0] - rec.targets[k][0];
    const double dy = y[1] - rec.targets[k][1];
    loss += scale * (dx * dx + dy * dy);
    if (want_grad) {
      const std::array<double, 2> upstream{2.0 * scale * dx, 2.0 * scale * dy};
      tapes.ae.accumulate(upstream, ae_grad);
    }
  }
  std::vector<double> upstream;
  if (want_grad) upstream = feature_gradient(ae_grad, transform);
  if (param_loss_weight > 0.0) {
    const std::size_t n = transform == FeatureTransform::LineRatio ? 7 : out.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double d = out[k] - rec.features[k];
      loss += param_loss_weight * d * d;
      if (want_grad) upstream[k] += 2.0 * param_loss_weight * d;
    }
  }
  if (want_grad) {
    for (std::size_t k = 0; k < upstream.size(); ++k) {
      upstream[k] *= weight * (mae.output_scale.empty() ? 1.0 : mae.output_scale[k]);
    }
    tapes.mae.accumulate(upstream, mae_grad);
  }
  return loss;
}

double mean_loss(const MaeModel& mae, const std::vector<PreparedRecord>& recs) {
  if (recs.empty()) return 0.0;
  Tapes tapes;
  double sum = 0.0;
  for (const PreparedRecord& r : recs) sum += record_loss(mae, r, 0.0, 0.0, {}, tapes);
  return sum / static_cast<double>(recs.size());
}

struct Moments {
  std::vector<double> mean;
  std::vector<double> sd;
};

Moments feature_moments(const MaeSpec& spec, std::span<const AeRecord> train) {
  const std::size_t width = spec.net->input_size();
  std::vector<double> mean(width, 0.0);
  std::vector<double> sq(width, 0.0);
  for (const AeRecord& rec : train) {
    const FeatureVector fv = featurize(rec, spec.transform);
    for (std::size_t k = 0; k < width; ++k) mean[k] += fv[k];
  }
  const double n = static_cast<double>(train.size());
  for (double& m : mean) m /= n;
  for (const AeRecord& rec : train) {
    const FeatureVector fv = featurize(rec, spec.transform);
    for (std::size_t k = 0; k < width; ++k) sq[k] += (fv[k] - mean[k]) * (fv[k] - mean[k]);
  }
  Moments m{mean, std::vector<double>(width)};
  for (std::size_t k = 0; k < width; ++k) {
    const double sd = std::sqrt(sq[k] / n);
    m.sd[k] = sd > 1e-12 ? sd : 1.0;
  }
  return m;
}

MaeModel train_once(std::span<const AeRecord> train, std::span<const AeRecord> test,
                    const MaeSpec& spec, const ExecLossConfig& cfg, const MaeTrainConfig& hyper,
                    std::uint64_t seed, std::uint64_t init_seed) {
  MaeModel mae = make_mae(spec, init_seed, hyper.init_scale);
  mae.train_stats.seed = seed;
  if (hyper.standardize_inputs || hyper.standardize_outputs) {
    const Moments m = feature_moments(spec, train);
    if (hyper.standardize_inputs) {
      mae.input_shift = m.mean;
      mae.input_scale = m.sd;
    }
    if (hyper.standardize_outputs) {
      mae.output_shift = m.mean;
      mae.output_scale = m.sd;
    }
  }
  const auto train_recs = prepare(train, mae, cfg);
  const auto test_recs = prepare(test, mae, cfg);

  auto evaluate = [&](std::size_t epoch) {
    try {
      return MaeCurvePoint{epoch, mean_loss(mae, train_recs), mean_loss(mae, test_recs)};
    } catch (const NumericError& e) {
      throw TrainingError(std::string("MAE diverged: ") + e.what(), epoch);
    }
  };
  const MaeCurvePoint start = evaluate(0);
  mae.train_stats.initial_train_loss = start.train_loss;
  mae.train_stats.initial_test_loss = start.test_loss;
  mae.train_stats.curve.push_back(start);

  Rng shuffle_rng(derive_seed(init_seed, 11));
  std::vector<std::size_t> order(train_recs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch =
      hyper.batch_size ? std::min(hyper.batch_size, order.size()) : order.size();

  AdamState state;
  AdamHyper adam = hyper.adam;
  std::vector<double> grad(mae.net.param_count());
  Tapes tapes;
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    if (hyper.lr_final > 0.0 && hyper.epochs > 1) {
      const double frac = static_cast<double>(epoch - 1) / static_cast<double>(hyper.epochs - 1);
      adam.lr = hyper.adam.lr * std::pow(hyper.lr_final / hyper.adam.lr, frac);
    }
    for (std::size_t k = order.size(); k > 1; --k) {
      std::swap(order[k - 1], order[shuffle_rng.below(k)]);
    }
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      const double weight = 1.0 / static_cast<double>(end - begin);
      std::fill(grad.begin(), grad.end(), 0.0);
      try {
        for (std::size_t s = begin; s < end; ++s) {
          const PreparedRecord& rec = train_recs[order[s]];
          const double w = hyper.scale_normalized_loss
                               ? weight / std::max(rec.mean_target_sq, 1e-12)
                               : weight;
          record_loss(mae, rec, hyper.param_loss_weight, w, grad, tapes);
        }
        if (hyper.weight_decay > 0.0) {
          const auto params = mae.net.params();
          for (std::size_t k = 0; k < grad.size(); ++k) {
            grad[k] += 2.0 * hyper.weight_decay * params[k];
          }
        }
        adam_step(mae.net, grad, state, adam);
      } catch (const NumericError& e) {
        throw TrainingError(std::string("MAE diverged: ") + e.what(), epoch);
      }
    }
    if (epoch == hyper.epochs || (hyper.log_every && epoch % hyper.log_every == 0)) {
      mae.train_stats.curve.push_back(evaluate(epoch));
    }
  }
  const MaeCurvePoint& last = mae.train_stats.curve.back();
  mae.train_stats.final_train_loss = last.train_loss;
  mae.train_stats.final_test_loss = last.test_loss;
  return mae;
}

}  // namespace

double mean_exec_loss(const MaeModel& mae, std::span<const AeRecord> records,
                      const ExecLossConfig& cfg) {
  return mean_loss(mae, prepare(records, mae, cfg));
}

std::vector<double> mae_loss_gradient(const MaeModel& mae, std::span<const AeRecord> records,
                                      const ExecLossConfig& cfg, double* loss_out) {
  const auto recs = prepare(records, mae, cfg);
  if (recs.empty()) throw ContractError("empty record set");
  std::vector<double> grad(mae.net.param_count(), 0.0);
  Tapes tapes;
  const double weight = 1.0 / static_cast<double>(recs.size());
  double loss = 0.0;
  for (const PreparedRecord& r : recs) {
    loss += weight * record_loss(mae, r, 0.0, weight, grad, tapes);
  }
  if (loss_out) *loss_out = loss;
  return grad;
}

MaeTrainConfig MaeTrainConfig::for_kind(MaeKind kind) {
  MaeTrainConfig cfg;
  if (kind == MaeKind::Line818) {
    cfg.epochs = 3000;
    cfg.adam.lr = 0.1;
    cfg.lr_final = 1e-4;
    cfg.restarts = 32;
  } else {
    cfg.epochs = 12000;
    cfg.adam.lr = 0.01;
    cfg.lr_final = 1e-5;
    cfg.standardize_inputs = false;
    cfg.weight_decay = 1e-3;
    cfg.scale_normalized_loss = true;
    cfg.restarts = 4;
  }
  return cfg;
}

MaeModel train_mae(std::span<const AeRecord> train, std::span<const AeRecord> test,
                   const MaeSpec& spec, const ExecLossConfig& cfg, const MaeTrainConfig& hyper,
                   std::uint64_t seed) {
  if (train.empty()) throw ContractError("MAE training needs a non-empty corpus");
  std::optional<MaeModel> best;
  for (std::size_t r = 0; r < std::max<std::size_t>(hyper.restarts, 1); ++r) {
    MaeModel mae = train_once(train, test, spec, cfg, hyper, seed, derive_seed(seed, 10, r));
    if (!best || mae.train_stats.final_train_loss < best->train_stats.final_train_loss) {
      best = std::move(mae);
    }
  }
  return std::move(*best);
}

double encode_ae(const MaeModel& mae, const AeRecord& rec) {
  const auto in = mae.net_input(featurize(rec, mae.spec.transform));
  const auto code = mae.net.forward_range(in, 0, mae.spec.bottleneck_layer);
  if (code.size() != 1) throw ContractError("MAE bottleneck must have width 1");
  return code[0];
}

NetModel decode_code(const MaeModel& mae, double code) {
  const std::array<double, 1> in{code};
  const auto out =
      mae.net.forward_range(in, mae.spec.bottleneck_layer, mae.spec.net->num_transitions());
  return defeaturize(mae.net_output_to_features(out), mae.spec.transform);
}

NetModel reconstruct(const MaeModel& mae, const AeRecord& rec) {
  const auto in = mae.net_input(featurize(rec, mae.spec.transform));
  return defeaturize(mae.net_output_to_features(mae.net.forward(in)), mae.spec.transform);
}

}  // namespace metaenc
