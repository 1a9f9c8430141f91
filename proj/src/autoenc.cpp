#include "metaenc/autoenc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>

#include "metaenc/errors.hpp"
#include "metaenc/rng.hpp"

namespace metaenc {

std::string_view to_string(AeArchId arch) {
  switch (arch) {
    case AeArchId::Line212: return "line212";
    case AeArchId::Arc28122: return "arc28122";
  }
  return "?";
}

AeArchId arch_from_string(std::string_view s) {
  if (s == "line212") return AeArchId::Line212;
  if (s == "arc28122") return AeArchId::Arc28122;
  throw ContractError("unknown AE architecture '" + std::string(s) + "'");
}

std::shared_ptr<const NetSpec> make_line_spec() {
  static const auto spec = std::make_shared<const NetSpec>(
      NetSpec::dense_uniform({2, 1, 2}, {Activation::Identity, Activation::Identity}));
  return spec;
}

std::shared_ptr<const NetSpec> make_arc_spec() {
  static const auto spec = [] {
    NetSpec s = NetSpec::dense({2, 8, 1, 2, 2},
                               {std::vector<Activation>(8, Activation::Tanh),
                                {Activation::Tanh},
                                {Activation::Cos, Activation::Sin},
                                {Activation::Identity, Activation::Identity}});
    s.freeze_weight(2, 0, 0, 1.0).freeze_weight(2, 1, 0, 1.0);
    s.freeze_bias(2, 0, 0.0).freeze_bias(2, 1, 0.0);
    s.remove_edge(3, 0, 1).remove_edge(3, 1, 0);
    s.freeze_bias(3, 0, 0.0).freeze_bias(3, 1, 0.0);
    return std::make_shared<const NetSpec>(std::move(s));
  }();
  return spec;
}

std::shared_ptr<const NetSpec> spec_for(AeArchId arch) {
  return arch == AeArchId::Line212 ? make_line_spec() : make_arc_spec();
}

const ArcHiddenSlots& arc_hidden_slots() {
  static const ArcHiddenSlots slots = [] {
    const NetSpec& spec = *make_arc_spec();
    ArcHiddenSlots s{};
    for (std::size_t j = 0; j < 8; ++j) {
      s.in_x[j] = *spec.weight_slot(0, j, 0);
      s.in_y[j] = *spec.weight_slot(0, j, 1);
      s.bias[j] = *spec.bias_slot(0, j);
      s.out[j] = *spec.weight_slot(1, 0, j);
    }
    return s;
  }();
  return slots;
}

std::array<std::size_t, 2> arc_decoder_slots() {
  const NetSpec& spec = *make_arc_spec();
  return {*spec.weight_slot(3, 0, 0), *spec.weight_slot(3, 1, 1)};
}

NetModel analytic_line_model(double slope) {
  return NetModel(make_line_spec(), {1.0, 0.0, 0.0, 1.0, slope, 0.0, 0.0});
}

NetModel forward_model(AeArchId arch, std::span<const double> params) {
  return NetModel(spec_for(arch), std::vector<double>(params.begin(), params.end()));
}

Point2 run_ae(const NetModel& model, Point2 p) {
  const std::array<double, 2> in{p.x, p.y};
  const auto out = model.forward(in);
  if (out.size() != 2) throw ContractError("not a planar autoencoder");
  return {out[0], out[1]};
}

double reconstruction_mse(const NetModel& model, std::span<const Point2> points) {
  if (points.empty()) throw ContractError("empty point set");
  double sum = 0.0;
  for (const Point2& p : points) {
    const Point2 q = run_ae(model, p);
    const double dx = q.x - p.x;
    const double dy = q.y - p.y;
    sum += dx * dx + dy * dy;
  }
  return sum / static_cast<double>(points.size());
}

double reconstruction_rmse(const NetModel& model, std::span<const Point2> points) {
  return std::sqrt(reconstruction_mse(model, points));
}

AeTrainConfig default_ae_config(AeArchId arch) {
  AeTrainConfig cfg;
  if (arch == AeArchId::Line212) {
    cfg.epochs = 400;
    cfg.batch_size = 100;
    cfg.adam.lr = 0.02;
    cfg.lr_final = 1e-4;
  } else {
    cfg.epochs = 1500;
    cfg.batch_size = 50;
    cfg.adam.lr = 0.02;
    cfg.lr_final = 1e-4;
  }
  return cfg;
}

std::size_t default_points(AeArchId arch) { return arch == AeArchId::Line212 ? 1000 : 200; }

AeArchId arch_for(const ClassSpec& spec) {
  return std::holds_alternative<LineClass>(spec) ? AeArchId::Line212 : AeArchId::Arc28122;
}

double convergence_threshold(const ClassSpec& spec, const AeTrainConfig& cfg) {
  if (std::holds_alternative<LineClass>(spec)) return cfg.line_threshold;
  return cfg.arc_threshold_factor * family_parameter(spec);
}

AeRecord train_ae(AeArchId arch, const ClassSpec& spec, std::size_t n_points,
                  const AeTrainConfig& cfg, std::uint64_t seed) {
  validate(spec);
  if (arch_for(spec) != arch) {
    throw ContractError(std::string(to_string(arch)) + " cannot encode " + label(spec));
  }
  const std::vector<Point2> train = sample_points(spec, n_points, derive_seed(seed, 0));
  const std::vector<Point2> test =
      sample_points(spec, cfg.test_points ? cfg.test_points : n_points, derive_seed(seed, 1));

  NetModel model(spec_for(arch));
  if (!cfg.init_params.empty()) {
    model = NetModel(spec_for(arch), cfg.init_params);
  } else {
    model.init_uniform(cfg.shared_init_seed ? *cfg.shared_init_seed : derive_seed(seed, 2),
                       cfg.init_scale);
  }

  Rng shuffle_rng(derive_seed(seed, 3));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = cfg.batch_size ? std::min(cfg.batch_size, train.size()) : train.size();

  AdamState state;
  AdamHyper hyper = cfg.adam;
  std::vector<double> grad(model.param_count());
  GradTape tape;
  std::array<double, 2> upstream{};
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.lr_final > 0.0 && cfg.epochs > 1) {
      const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
      hyper.lr = cfg.adam.lr * std::pow(cfg.lr_final / cfg.adam.lr, frac);
    }
    for (std::size_t k = order.size(); k > 1; --k) {
      std::swap(order[k - 1], order[shuffle_rng.below(k)]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double scale = 2.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t s = start; s < stop; ++s) {
        const Point2& p = train[order[s]];
        const std::array<double, 2> in{p.x, p.y};
        try {
          model.forward_with_tape(in, tape);
        } catch (const NumericError& e) {
          throw TrainingError(std::string("autoencoder diverged: ") + e.what(), epoch);
        }
        const auto out = tape.output();
        upstream = {scale * (out[0] - p.x), scale * (out[1] - p.y)};
        loss += (out[0] - p.x) * (out[0] - p.x) + (out[1] - p.y) * (out[1] - p.y);
        tape.accumulate(upstream, grad);
      }
      if (!std::isfinite(loss)) throw TrainingError("autoencoder loss is not finite", epoch);
      try {
        adam_step(model, grad, state, hyper);
      } catch (const NumericError& e) {
        throw TrainingError(std::string("autoencoder diverged: ") + e.what(), epoch);
      }
    }
  }

  AeRecord rec;
  rec.arch = arch;
  rec.class_spec = spec;
  rec.train_stats.epochs = cfg.epochs;
  rec.train_stats.seed = seed;
  try {
    rec.train_stats.final_train_rmse = reconstruction_rmse(model, train);
    rec.train_stats.final_test_rmse = reconstruction_rmse(model, test);
  } catch (const NumericError& e) {
    throw TrainingError(std::string("autoencoder diverged: ") + e.what(), cfg.epochs);
  }
  rec.converged = rec.train_stats.final_test_rmse <= convergence_threshold(spec, cfg);
  rec.model = std::move(model);
  return rec;
}

AeRecord train_ae_until_converged(AeArchId arch, const ClassSpec& spec, std::size_t n_points,
                                  const AeTrainConfig& cfg, std::uint64_t seed) {
  std::optional<AeRecord> best;
  for (std::uint32_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    const std::uint64_t s = attempt == 0 ? seed : derive_seed(seed, 0x5eedULL, attempt);
    AeTrainConfig attempt_cfg = cfg;
    if (attempt > 0) {
      attempt_cfg.shared_init_seed.reset();
      attempt_cfg.init_params.clear();
    }
    AeRecord rec;
    try {
      rec = train_ae(arch, spec, n_points, attempt_cfg, s);
    } catch (const TrainingError&) {
      continue;
    }
    rec.train_stats.attempts = attempt + 1;
    if (rec.converged) return rec;
    if (!best || rec.train_stats.final_test_rmse < best->train_stats.final_test_rmse) {
      best = std::move(rec);
    }
  }
  if (!best) {
    throw TrainingError("every training attempt diverged for " + label(spec), cfg.epochs);
  }
  best->train_stats.attempts = cfg.max_retries + 1;
  best->converged = false;
  return *best;
}

NetModel permute_arc_hidden(const NetModel& model, const std::array<std::size_t, 8>& perm) {
  if (!(model.spec() == *make_arc_spec())) {
    throw ContractError("hidden-neuron permutation requires an arc28122 model");
  }
  std::array<bool, 8> seen{};
  for (std::size_t p : perm) {
    if (p >= 8 || seen[p]) throw ContractError("not a permutation of 8 neurons");
    seen[p] = true;
  }
  const ArcHiddenSlots& s = arc_hidden_slots();
  const auto src = model.params();
  std::vector<double> params(src.begin(), src.end());
  for (std::size_t k = 0; k < 8; ++k) {
    params[s.in_x[k]] = src[s.in_x[perm[k]]];
    params[s.in_y[k]] = src[s.in_y[perm[k]]];
    params[s.bias[k]] = src[s.bias[perm[k]]];
    params[s.out[k]] = src[s.out[perm[k]]];
  }
  return NetModel(model.spec_ptr(), std::move(params));
}

NetModel normalize_arc_model(const NetModel& model) {
  if (!(model.spec() == *make_arc_spec())) {
    throw ContractError("normalization requires an arc28122 model");
  }
  const ArcHiddenSlots& s = arc_hidden_slots();
  const auto p = model.params();
  auto key = [&](std::size_t j) {
    return std::make_tuple(p[s.in_x[j]] * p[s.in_y[j]], p[s.in_x[j]], p[s.bias[j]], p[s.out[j]]);
  };
  std::array<std::size_t, 8> perm{};
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return permute_arc_hidden(model, perm);
}

AeRecord normalize_ae(const AeRecord& rec) {
  if (rec.arch != AeArchId::Arc28122) {
    throw ContractError("normalization is defined for arc28122 records only");
  }
  AeRecord out = rec;
  out.model = normalize_arc_model(rec.model);
  return out;
}

}  // namespace metaenc
