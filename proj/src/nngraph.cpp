#include "metaenc/nngraph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "metaenc/errors.hpp"
#include "metaenc/rng.hpp"

namespace metaenc {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::ReLU: return "relu";
    case Activation::Sin: return "sin";
    case Activation::Cos: return "cos";
  }
  return "?";
}

Activation activation_from_string(std::string_view s) {
  for (Activation a : {Activation::Identity, Activation::Tanh, Activation::ReLU, Activation::Sin,
                       Activation::Cos}) {
    if (to_string(a) == s) return a;
  }
  throw ContractError("unknown activation '" + std::string(s) + "'");
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Tanh: return std::tanh(z);
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Sin: return std::sin(z);
    case Activation::Cos: return std::cos(z);
  }
  return z;
}

double activate_derivative(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Sin: return std::cos(z);
    case Activation::Cos: return -std::sin(z);
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// NetSpec

NetSpec NetSpec::dense(std::vector<std::size_t> layer_sizes,
                       std::vector<std::vector<Activation>> activations) {
  if (layer_sizes.size() < 2) throw ContractError("a network needs at least two layers");
  if (activations.size() != layer_sizes.size() - 1) {
    throw ContractError("expected one activation list per non-input layer");
  }
  NetSpec spec;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = layer_sizes[l];
    const std::size_t out = layer_sizes[l + 1];
    if (in == 0 || out == 0) throw ContractError("layer sizes must be positive");
    if (activations[l].size() != out) {
      throw ContractError("activation count does not match size of layer " +
                          std::to_string(l + 1));
    }
    LayerSpec layer;
    layer.in = in;
    layer.out = out;
    layer.activations = std::move(activations[l]);
    layer.edge_present.assign(in * out, true);
    layer.weight_frozen.assign(in * out, std::nullopt);
    layer.bias_frozen.assign(out, std::nullopt);
    spec.layers_.push_back(std::move(layer));
  }
  spec.sizes_ = std::move(layer_sizes);
  spec.reindex();
  return spec;
}

NetSpec NetSpec::dense_uniform(std::vector<std::size_t> layer_sizes,
                               std::vector<Activation> per_layer) {
  if (layer_sizes.size() < 2 || per_layer.size() != layer_sizes.size() - 1) {
    throw ContractError("expected one activation per non-input layer");
  }
  std::vector<std::vector<Activation>> acts;
  for (std::size_t l = 0; l < per_layer.size(); ++l) {
    acts.emplace_back(layer_sizes[l + 1], per_layer[l]);
  }
  return dense(std::move(layer_sizes), std::move(acts));
}

void NetSpec::check_transition(std::size_t t) const {
  if (t >= layers_.size()) {
    throw ContractError("transition " + std::to_string(t) + " out of range");
  }
}

NetSpec& NetSpec::remove_edge(std::size_t transition, std::size_t dst, std::size_t src) {
  check_transition(transition);
  LayerSpec& layer = layers_[transition];
  if (dst >= layer.out || src >= layer.in) throw ContractError("edge index out of range");
  layer.edge_present[dst * layer.in + src] = false;
  layer.weight_frozen[dst * layer.in + src].reset();
  reindex();
  return *this;
}

NetSpec& NetSpec::freeze_weight(std::size_t transition, std::size_t dst, std::size_t src,
                                double value) {
  check_transition(transition);
  LayerSpec& layer = layers_[transition];
  if (dst >= layer.out || src >= layer.in) throw ContractError("edge index out of range");
  if (!layer.edge_present[dst * layer.in + src]) {
    throw ContractError("cannot freeze an absent edge");
  }
  layer.weight_frozen[dst * layer.in + src] = value;
  reindex();
  return *this;
}

NetSpec& NetSpec::freeze_bias(std::size_t transition, std::size_t dst, double value) {
  check_transition(transition);
  LayerSpec& layer = layers_[transition];
  if (dst >= layer.out) throw ContractError("bias index out of range");
  layer.bias_frozen[dst] = value;
  reindex();
  return *this;
}

void NetSpec::reindex() {
  const std::size_t n = layers_.size();
  weight_index_.assign(n, {});
  weight_const_.assign(n, {});
  bias_index_.assign(n, {});
  bias_const_.assign(n, {});
  std::int64_t next = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const LayerSpec& layer = layers_[t];
    auto& widx = weight_index_[t];
    auto& wconst = weight_const_[t];
    widx.assign(layer.in * layer.out, -1);
    wconst.assign(layer.in * layer.out, 0.0);
    for (std::size_t k = 0; k < layer.in * layer.out; ++k) {
      if (!layer.edge_present[k]) continue;
      if (layer.weight_frozen[k]) {
        wconst[k] = *layer.weight_frozen[k];
      } else {
        widx[k] = next++;
      }
    }
    auto& bidx = bias_index_[t];
    auto& bconst = bias_const_[t];
    bidx.assign(layer.out, -1);
    bconst.assign(layer.out, 0.0);
    for (std::size_t j = 0; j < layer.out; ++j) {
      if (layer.bias_frozen[j]) {
        bconst[j] = *layer.bias_frozen[j];
      } else {
        bidx[j] = next++;
      }
    }
  }
  param_count_ = static_cast<std::size_t>(next);
}

std::optional<std::size_t> NetSpec::weight_slot(std::size_t transition, std::size_t dst,
                                                std::size_t src) const {
  check_transition(transition);
  const LayerSpec& layer = layers_[transition];
  if (dst >= layer.out || src >= layer.in) throw ContractError("edge index out of range");
  const std::int64_t idx = weight_index_[transition][dst * layer.in + src];
  if (idx < 0) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

std::optional<std::size_t> NetSpec::bias_slot(std::size_t transition, std::size_t dst) const {
  check_transition(transition);
  if (dst >= layers_[transition].out) throw ContractError("bias index out of range");
  const std::int64_t idx = bias_index_[transition][dst];
  if (idx < 0) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

double NetSpec::weight_value(std::span<const double> params, std::size_t transition,
                             std::size_t dst, std::size_t src) const {
  if (auto slot = weight_slot(transition, dst, src)) return params[*slot];
  return weight_const_[transition][dst * layers_[transition].in + src];
}

double NetSpec::bias_value(std::span<const double> params, std::size_t transition,
                           std::size_t dst) const {
  if (auto slot = bias_slot(transition, dst)) return params[*slot];
  return bias_const_[transition][dst];
}

// ---------------------------------------------------------------------------
// NetModel

NetModel::NetModel(std::shared_ptr<const NetSpec> spec) : spec_(std::move(spec)) {
  if (!spec_) throw ContractError("null network spec");
  params_.assign(spec_->param_count(), 0.0);
}

NetModel::NetModel(std::shared_ptr<const NetSpec> spec, std::vector<double> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  if (!spec_) throw ContractError("null network spec");
  if (params_.size() != spec_->param_count()) {
    throw ContractError("parameter vector has length " + std::to_string(params_.size()) +
                        ", spec expects " + std::to_string(spec_->param_count()));
  }
  for (double p : params_) {
    if (!std::isfinite(p)) throw NumericError("non-finite parameter");
  }
}

void NetModel::init_uniform(std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (double& p : params_) p = rng.uniform(-scale, scale);
}

namespace {

// Evaluates one transition. `z` receives the pre-activations, `a` the outputs.
void eval_transition(const LayerSpec& layer, const std::vector<std::int64_t>& widx,
                     const std::vector<double>& wconst, const std::vector<std::int64_t>& bidx,
                     const std::vector<double>& bconst, std::span<const double> params,
                     std::span<const double> in, std::span<double> z, std::span<double> a,
                     std::size_t transition) {
  for (std::size_t j = 0; j < layer.out; ++j) {
    double sum = 0.0;
    const std::size_t row = j * layer.in;
    for (std::size_t i = 0; i < layer.in; ++i) {
      const std::int64_t k = widx[row + i];
      const double w = k >= 0 ? params[static_cast<std::size_t>(k)] : wconst[row + i];
      sum += w * in[i];
    }
    sum += bidx[j] >= 0 ? params[static_cast<std::size_t>(bidx[j])] : bconst[j];
    z[j] = sum;
    a[j] = activate(layer.activations[j], sum);
    if (!std::isfinite(a[j])) {
      throw NumericError("non-finite value in layer " + std::to_string(transition + 1) +
                         " neuron " + std::to_string(j));
    }
  }
}

}  // namespace

std::vector<double> NetModel::forward(std::span<const double> input) const {
  return forward_range(input, 0, spec_->num_transitions());
}

std::vector<double> NetModel::forward_range(std::span<const double> input, std::size_t first,
                                            std::size_t last) const {
  const NetSpec& spec = *spec_;
  if (first > last || last > spec.num_transitions()) {
    throw ContractError("invalid layer range");
  }
  if (input.size() != spec.layer_sizes()[first]) {
    throw ContractError("input has length " + std::to_string(input.size()) + ", layer " +
                        std::to_string(first) + " has " +
                        std::to_string(spec.layer_sizes()[first]) + " neurons");
  }
  std::vector<double> current(input.begin(), input.end());
  std::vector<double> next;
  std::vector<double> z;
  for (std::size_t t = first; t < last; ++t) {
    const LayerSpec& layer = spec.layers_[t];
    next.assign(layer.out, 0.0);
    z.assign(layer.out, 0.0);
    eval_transition(layer, spec.weight_index_[t], spec.weight_const_[t], spec.bias_index_[t],
                    spec.bias_const_[t], params_, current, z, next, t);
    std::swap(current, next);
  }
  return current;
}

GradTape NetModel::forward_with_tape(std::span<const double> input) const {
  GradTape tape;
  forward_with_tape(input, tape);
  return tape;
}

void NetModel::forward_with_tape(std::span<const double> input, GradTape& tape) const {
  const NetSpec& spec = *spec_;
  if (input.size() != spec.input_size()) {
    throw ContractError("input has length " + std::to_string(input.size()) + ", network expects " +
                        std::to_string(spec.input_size()));
  }
  const std::size_t n = spec.num_transitions();
  tape.spec_ = spec_;
  tape.params_.assign(params_.begin(), params_.end());
  tape.activations_.resize(n + 1);
  tape.preactivation_.resize(n);
  tape.activations_[0].assign(input.begin(), input.end());
  for (std::size_t t = 0; t < n; ++t) {
    const LayerSpec& layer = spec.layers_[t];
    tape.activations_[t + 1].resize(layer.out);
    tape.preactivation_[t].resize(layer.out);
    eval_transition(layer, spec.weight_index_[t], spec.weight_const_[t], spec.bias_index_[t],
                    spec.bias_const_[t], params_, tape.activations_[t],
                    tape.preactivation_[t], tape.activations_[t + 1], t);
  }
}

bool NetModel::operator==(const NetModel& other) const {
  if (params_ != other.params_) return false;
  if (spec_ == other.spec_) return true;
  return spec_ && other.spec_ && *spec_ == *other.spec_;
}

// ---------------------------------------------------------------------------
// GradTape

std::vector<double> GradTape::grad_loss(std::span<const double> upstream) const {
  std::vector<double> grad(params_.size(), 0.0);
  accumulate(upstream, grad);
  return grad;
}

void GradTape::accumulate(std::span<const double> upstream, std::span<double> grad,
                          std::span<double> input_grad) const {
  if (!spec_) throw ContractError("empty gradient tape");
  const NetSpec& spec = *spec_;
  if (upstream.size() != spec.output_size()) {
    throw ContractError("upstream gradient has length " + std::to_string(upstream.size()) +
                        ", network output has " + std::to_string(spec.output_size()));
  }
  if (grad.size() != params_.size()) throw ContractError("gradient buffer / tape mismatch");
  if (!input_grad.empty() && input_grad.size() != spec.input_size()) {
    throw ContractError("input gradient buffer has wrong length");
  }

  const std::size_t n = spec.num_transitions();
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> prev;
  for (std::size_t t = n; t-- > 0;) {
    const LayerSpec& layer = spec.layers_[t];
    const auto& widx = spec.weight_index_[t];
    const auto& wconst = spec.weight_const_[t];
    const auto& bidx = spec.bias_index_[t];
    const auto& z = preactivation_[t];
    const auto& in = activations_[t];
    for (std::size_t j = 0; j < layer.out; ++j) {
      delta[j] *= activate_derivative(layer.activations[j], z[j]);
    }
    prev.assign(layer.in, 0.0);
    for (std::size_t j = 0; j < layer.out; ++j) {
      const double d = delta[j];
      const std::size_t row = j * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) {
        const std::int64_t k = widx[row + i];
        if (k >= 0) {
          grad[static_cast<std::size_t>(k)] += d * in[i];
          prev[i] += params_[static_cast<std::size_t>(k)] * d;
        } else {
          prev[i] += wconst[row + i] * d;
        }
      }
      if (bidx[j] >= 0) grad[static_cast<std::size_t>(bidx[j])] += d;
    }
    std::swap(delta, prev);
  }
  if (!input_grad.empty()) std::copy(delta.begin(), delta.end(), input_grad.begin());
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(NetModel& model, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper) {
  const std::size_t n = model.param_count();
  if (grads.size() != n) {
    throw ContractError("gradient has length " + std::to_string(grads.size()) + ", model has " +
                        std::to_string(n) + " trainable parameters");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw NumericError("non-finite gradient");
  }
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  auto params = model.params();
  for (std::size_t k = 0; k < n; ++k) {
    state.m[k] = hyper.beta1 * state.m[k] + (1.0 - hyper.beta1) * grads[k];
    state.v[k] = hyper.beta2 * state.v[k] + (1.0 - hyper.beta2) * grads[k] * grads[k];
    const double mhat = state.m[k] / c1;
    const double vhat = state.v[k] / c2;
    params[k] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
}

}  // namespace metaenc
