#include "metaenc/selfcheck.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "metaenc/autoenc.hpp"
#include "metaenc/corpus.hpp"
#include "metaenc/errors.hpp"
#include "metaenc/mae.hpp"
#include "metaenc/nngraph.hpp"
#include "metaenc/rng.hpp"

namespace metaenc {

namespace {

constexpr std::array<Activation, 5> kAllActivations{Activation::Identity, Activation::Tanh,
                                                    Activation::ReLU, Activation::Sin,
                                                    Activation::Cos};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* format, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

// A random architecture with 2-4 transitions, every activation kind mixed in,
// and a sprinkling of removed edges and frozen entries.
NetSpec random_spec(Rng& rng, std::size_t index) {
  const std::size_t depth = 2 + rng.below(3);
  std::vector<std::size_t> sizes{1 + rng.below(4)};
  std::vector<std::vector<Activation>> acts;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t width = 1 + rng.below(4);
    sizes.push_back(width);
    std::vector<Activation> layer;
    for (std::size_t j = 0; j < width; ++j) {
      // Cycle through the kinds so every net of five or more neurons has all.
      layer.push_back(kAllActivations[(index + l * 7 + j) % kAllActivations.size()]);
    }
    acts.push_back(std::move(layer));
  }
  NetSpec spec = NetSpec::dense(sizes, acts);
  for (std::size_t t = 0; t < depth; ++t) {
    for (std::size_t d = 0; d < sizes[t + 1]; ++d) {
      for (std::size_t s = 0; s < sizes[t]; ++s) {
        const double u = rng.uniform01();
        if (u < 0.1 && sizes[t] > 1) {
          spec.remove_edge(t, d, s);
        } else if (u < 0.2) {
          spec.freeze_weight(t, d, s, rng.uniform(-1.0, 1.0));
        }
      }
      if (rng.uniform01() < 0.2) spec.freeze_bias(t, d, rng.uniform(-0.5, 0.5));
    }
  }
  return spec;
}

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-3});
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

NetModel random_arc_model(Rng& rng) {
  NetModel m(make_arc_spec());
  for (double& p : m.params()) p = rng.uniform(-2.0, 2.0);
  return m;
}

}  // namespace

CheckResult check_gradients(std::size_t nets, std::uint64_t seed) {
  Timer timer;
  CheckResult res{"gradient suite", true, "", 0.0};
  Rng rng(seed);
  constexpr double h = 1e-6;
  double worst = 0.0;
  std::size_t checked = 0;
  std::array<bool, 5> seen{};
  for (std::size_t n = 0; n < nets; ++n) {
    auto spec = std::make_shared<const NetSpec>(random_spec(rng, n));
    for (const LayerSpec& layer : spec->layers()) {
      for (Activation a : layer.activations) seen[static_cast<std::size_t>(a)] = true;
    }
    NetModel model(spec, random_vector(rng, spec->param_count(), 1.0));
    const auto input = random_vector(rng, spec->input_size(), 1.0);
    const auto upstream = random_vector(rng, spec->output_size(), 1.0);

    const GradTape tape = model.forward_with_tape(input);
    std::vector<double> grad(spec->param_count(), 0.0);
    std::vector<double> input_grad(spec->input_size(), 0.0);
    tape.accumulate(upstream, grad, input_grad);

    auto objective = [&](const NetModel& m, std::span<const double> x) {
      return dot(upstream, m.forward(x));
    };
    for (std::size_t k = 0; k < spec->param_count(); ++k) {
      NetModel plus = model, minus = model;
      plus.params()[k] += h;
      minus.params()[k] -= h;
      const double numeric = (objective(plus, input) - objective(minus, input)) / (2 * h);
      worst = std::max(worst, rel_err(grad[k], numeric));
      ++checked;
    }
    for (std::size_t i = 0; i < input.size(); ++i) {
      auto xp = input, xm = input;
      xp[i] += h;
      xm[i] -= h;
      const double numeric = (objective(model, xp) - objective(model, xm)) / (2 * h);
      worst = std::max(worst, rel_err(input_grad[i], numeric));
      ++checked;
    }
  }
  const bool all_kinds = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  res.seconds = timer.seconds();
  res.pass = worst < 1e-4 && all_kinds && nets >= 1;
  res.detail = std::to_string(nets) + " nets, " + std::to_string(checked) +
               " derivatives, max rel err " + fmt("%.3g", worst) + " (bound 1e-4)" +
               (all_kinds ? "" : ", not every activation kind covered");
  return res;
}

CheckResult check_line_optimum(std::size_t points, std::uint64_t seed) {
  Timer timer;
  CheckResult res{"closed-form line AE", true, "", 0.0};
  double worst = 0.0;
  for (const ClassSpec& c : line_grid(16)) {
    const auto& line = std::get<LineClass>(c);
    const NetModel m = analytic_line_model(line.slope());
    const auto pts = sample_points(c, points, derive_seed(seed, static_cast<std::uint64_t>(line.theta_deg + 100)));
    worst = std::max(worst, reconstruction_mse(m, pts));
  }
  res.seconds = timer.seconds();
  res.pass = worst < 1e-12;
  res.detail = fmt("16 lines x %.0f points, max reconstruction MSE %.3g (bound 1e-12)",
                   static_cast<double>(points), worst);
  return res;
}

CheckResult check_encodability(std::size_t points, std::uint64_t seed) {
  Timer timer;
  CheckResult res{"encodability closure", true, "", 0.0};
  const std::array<ClassSpec, 3> classes{LineClass{37}, CircleClass{4.5}, ArcClass{2.5}};
  double worst = 0.0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (const Point2& z : sample_points(classes[i], points, derive_seed(seed, i))) {
      const Point2 back = analytic_decode(classes[i], analytic_encode(classes[i], z));
      worst = std::max(worst, distance(z, back));
    }
  }
  res.seconds = timer.seconds();
  res.pass = worst <= 1e-9;
  res.detail = fmt("line, circle, arc x %.0f points, max |z - d(e(z))| %.3g (bound 1e-9)",
                   static_cast<double>(points), worst);
  return res;
}

CheckResult check_normalization(std::size_t aes, std::uint64_t seed) {
  Timer timer;
  CheckResult res{"normalization properties", true, "", 0.0};
  Rng rng(seed);
  std::size_t idempotent = 0, preserving = 0, canonical = 0;
  double worst = 0.0;
  for (std::size_t n = 0; n < aes; ++n) {
    const NetModel m = random_arc_model(rng);
    const NetModel once = normalize_arc_model(m);
    if (normalize_arc_model(once) == once) ++idempotent;

    double err = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Point2 p{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
      const Point2 a = run_ae(m, p);
      const Point2 b = run_ae(once, p);
      err = std::max({err, std::abs(a.x - b.x), std::abs(a.y - b.y)});
    }
    worst = std::max(worst, err);
    if (err <= 1e-12) ++preserving;

    std::array<std::size_t, 8> perm{};
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
    const NetModel twin = permute_arc_hidden(m, perm);
    const NetModel twin_norm = normalize_arc_model(twin);
    const auto a = twin_norm.params();
    const auto b = once.params();
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0) ++canonical;
  }
  res.seconds = timer.seconds();
  res.pass = idempotent == aes && preserving == aes && canonical == aes;
  res.detail = std::to_string(aes) + " random AEs: idempotent " + std::to_string(idempotent) +
               ", behaviour preserved " + std::to_string(preserving) + " (max dev " +
               fmt("%.2g", worst) + "), permuted twins identical " + std::to_string(canonical);
  return res;
}

CheckResult check_exec_oracle() {
  Timer timer;
  CheckResult res{"exec-loss oracle", true, "", 0.0};
  // Probes lie on y = x; the slope-2 AE maps (x, x) to (x, 2x), so each
  // probe contributes x^2.
  constexpr std::array<double, 4> xs{-10.0, -3.33, 3.33, 10.0};
  double expected = 0.0;
  for (double x : xs) expected += x * x;
  expected /= static_cast<double>(xs.size());

  AeRecord input;
  input.arch = AeArchId::Line212;
  input.class_spec = LineClass{45};
  input.model = analytic_line_model(1.0);
  const double got =
      exec_loss(input, analytic_line_model(2.0), ExecLossConfig::for_kind(MaeKind::Line818)).loss;
  res.seconds = timer.seconds();
  // tan(45 deg) is not exactly 1 in floating point; the resulting offset is
  // far below the tolerance.
  res.pass = std::abs(got - expected) <= 1e-9 && std::abs(expected - 55.54445) <= 1e-9;
  res.detail = fmt("implementation %.10f vs oracle %.10f (tolerance 1e-9)", got, expected);
  return res;
}

CheckResult check_persistence(std::uint64_t seed) {
  Timer timer;
  CheckResult res{"persistence", true, "", 0.0};
  CorpusConfig cfg = CorpusConfig::desk(Family::Arc);
  cfg.classes = arc_grid(2);
  cfg.ae.epochs = 20;
  cfg.ae.max_retries = 0;
  cfg.ae.arc_threshold_factor = 1e9;  // short runs; convergence is not under test
  cfg.seed = seed;
  const Corpus corpus = build_corpus(cfg);
  const std::string text = corpus_to_string(corpus);
  const Corpus back = corpus_from_string(text);
  bool exact = back == corpus;
  for (std::size_t i = 0; exact && i < corpus.records.size(); ++i) {
    const auto a = corpus.records[i].model.params();
    const auto b = back.records[i].model.params();
    exact = std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  }
  const bool stable = corpus_to_string(back) == text;

  std::string corrupt = text;
  const std::size_t at = corrupt.find_first_of("0123456789", corrupt.find("\"params\"") + 9);
  corrupt[at] = corrupt[at] == '1' ? '2' : '1';
  bool detected = false;
  try {
    corpus_from_string(corrupt);
  } catch (const FormatError& e) {
    detected = std::string(e.what()).find("checksum") != std::string::npos;
  }
  res.seconds = timer.seconds();
  res.pass = exact && stable && detected;
  res.detail = std::string("round trip ") + (exact ? "bit-exact" : "NOT exact") +
               ", re-save " + (stable ? "identical" : "differs") + ", corrupt byte " +
               (detected ? "rejected by checksum" : "NOT detected");
  return res;
}

}  // namespace metaenc
