#include <doctest.h>

#include <cmath>

#include "metaenc/corpus.hpp"
#include "metaenc/errors.hpp"
#include "metaenc/evalrep.hpp"
#include "metaenc/mae.hpp"
#include "metaenc/selfcheck.hpp"

using namespace metaenc;

namespace {

AeRecord line_record(int theta, double w3 = 1.0) {
  AeRecord rec;
  rec.arch = AeArchId::Line212;
  rec.class_spec = LineClass{theta};
  const double a = std::get<LineClass>(rec.class_spec).slope();
  rec.model = forward_model(AeArchId::Line212, std::vector<double>{1.0, 0.0, 0.0, w3, a * w3, 0.0, 0.0});
  return rec;
}

AeRecord random_arc_record(double r, std::uint64_t seed) {
  AeRecord rec;
  rec.arch = AeArchId::Arc28122;
  rec.class_spec = ArcClass{r};
  NetModel m(make_arc_spec());
  m.init_uniform(seed, 1.0);
  rec.model = normalize_arc_model(m);
  return rec;
}

}  // namespace

TEST_CASE("MAE shapes") {
  const MaeSpec line = MaeSpec::line818();
  CHECK(line.net->layer_sizes() == std::vector<std::size_t>{8, 1, 8});
  const MaeSpec arc = MaeSpec::arc9();
  CHECK(arc.net->layer_sizes() == std::vector<std::size_t>{35, 20, 10, 4, 1, 4, 10, 20, 35});
  CHECK(arc.net->layer_sizes()[arc.bottleneck_layer] == 1);
  CHECK(arc.net->layers()[3].activations[0] == Activation::Identity);  // bottleneck
  CHECK(arc.net->layers()[0].activations[0] == Activation::ReLU);
  CHECK(arc.net->layers()[7].activations[0] == Activation::Identity);  // output
}

TEST_CASE("line features carry the decoder slope") {
  AeRecord rec;
  rec.arch = AeArchId::Line212;
  rec.class_spec = LineClass{60};
  rec.model = forward_model(AeArchId::Line212, std::vector<double>{1, 0, 0, 1, 2, 0, 0});
  const FeatureVector f = featurize(rec, FeatureTransform::LineRatio);
  CHECK(f == FeatureVector{1, 0, 1, 2, 0, 0, 0, 2.0});

  rec.model = forward_model(AeArchId::Line212, std::vector<double>{1, 0, 0, 1, 0, 0, 0});
  CHECK(featurize(rec, FeatureTransform::LineRatio)[7] == 0.0);

  rec.model = forward_model(AeArchId::Line212, std::vector<double>{1, 0, 0, 1e-7, 0, 0, 0});
  CHECK_THROWS_AS(featurize(rec, FeatureTransform::LineRatio), ContractError);
}

TEST_CASE("line defeaturize ignores the ratio slot") {
  const std::vector<double> f{0.5, -1, 2, 3, 4, 5, 6, 123.0};
  const NetModel m = defeaturize(f, FeatureTransform::LineRatio);
  CHECK(std::vector<double>(m.params().begin(), m.params().end()) ==
        std::vector<double>{0.5, -1, 4, 2, 3, 5, 6});
  const NetModel z = defeaturize(std::vector<double>(8, 0.0), FeatureTransform::LineRatio);
  for (double p : z.params()) CHECK(p == 0.0);
  CHECK_THROWS_AS(defeaturize(std::vector<double>(7, 0.0), FeatureTransform::LineRatio),
                  ContractError);
}

TEST_CASE("arc features round trip and keep the frozen skeleton") {
  const AeRecord rec = random_arc_record(4.0, 3);
  const FeatureVector f = featurize(rec, FeatureTransform::ArcIdentity);
  CHECK(f.size() == 35);
  CHECK(defeaturize(f, FeatureTransform::ArcIdentity) == rec.model);
  const NetModel wild = defeaturize(std::vector<double>(35, -7.5), FeatureTransform::ArcIdentity);
  CHECK(wild.spec().weight_value(wild.params(), 2, 0, 0) == 1.0);
  CHECK(wild.spec().weight_value(wild.params(), 2, 1, 0) == 1.0);
  CHECK(wild.spec().bias_value(wild.params(), 3, 1) == 0.0);
}

TEST_CASE("arc features require a normalized record") {
  AeRecord rec = random_arc_record(2.0, 8);
  std::array<std::size_t, 8> perm{1, 0, 2, 3, 4, 5, 6, 7};
  rec.model = permute_arc_hidden(rec.model, perm);
  CHECK_THROWS_AS(featurize(rec, FeatureTransform::ArcIdentity), ContractError);
}

TEST_CASE("permuted twins give identical features") {
  const AeRecord rec = random_arc_record(6.0, 12);
  AeRecord twin = rec;
  twin.model = normalize_arc_model(permute_arc_hidden(rec.model, {7, 6, 5, 4, 3, 2, 1, 0}));
  CHECK(featurize(rec, FeatureTransform::ArcIdentity) == featurize(twin, FeatureTransform::ArcIdentity));
}

TEST_CASE("line probes lie on the input class") {
  const AeRecord rec = line_record(30);
  const auto probes = probe_points(rec, ExecLossConfig::for_kind(MaeKind::Line818));
  REQUIRE(probes.size() == 4);
  const double xs[] = {-10.0, -3.33, 3.33, 10.0};
  const double a = std::get<LineClass>(rec.class_spec).slope();
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(probes[i].x == xs[i]);
    CHECK(probes[i].y == doctest::Approx(a * xs[i]));
  }
}

TEST_CASE("arc probes are evenly spaced on the arc") {
  const AeRecord rec = random_arc_record(5.0, 1);
  const auto probes = probe_points(rec, ExecLossConfig::for_kind(MaeKind::Arc9Layer));
  REQUIRE(probes.size() == 8);
  CHECK(std::atan2(probes.front().y, probes.front().x) == doctest::Approx(std::numbers::pi / 6));
  CHECK(std::atan2(probes.back().y, probes.back().x) == doctest::Approx(std::numbers::pi / 3));
  for (const Point2& p : probes) CHECK(std::hypot(p.x, p.y) == doctest::Approx(5.0));
}

TEST_CASE("exec loss of a model against itself is zero") {
  for (const AeRecord& rec : {line_record(-40), random_arc_record(3.0, 2)}) {
    const MaeKind kind = rec.arch == AeArchId::Line212 ? MaeKind::Line818 : MaeKind::Arc9Layer;
    const ExecLoss l = exec_loss(rec, rec.model, ExecLossConfig::for_kind(kind));
    CHECK(l.loss == 0.0);
    for (double g : l.grad) CHECK(g == 0.0);
  }
}

TEST_CASE("exec loss between slope-1 and slope-2 line AEs") {
  const CheckResult r = check_exec_oracle();
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("exec loss gradient matches finite differences") {
  const AeRecord rec = random_arc_record(3.0, 4);
  NetModel out(make_arc_spec());
  out.init_uniform(6, 1.0);
  const ExecLossConfig cfg = ExecLossConfig::for_kind(MaeKind::Arc9Layer);
  const ExecLoss l = exec_loss(rec, out, cfg);
  const double h = 1e-6;
  for (std::size_t k = 0; k < out.param_count(); ++k) {
    NetModel p = out, m = out;
    p.params()[k] += h;
    m.params()[k] -= h;
    const double fd = (exec_loss(rec, p, cfg).loss - exec_loss(rec, m, cfg).loss) / (2 * h);
    CHECK(std::abs(l.grad[k] - fd) / std::max({std::abs(l.grad[k]), std::abs(fd), 1e-3}) < 1e-4);
  }
}

TEST_CASE("MAE gradient matches finite differences on a two-AE corpus") {
  const std::vector<AeRecord> recs{random_arc_record(2.0, 1), random_arc_record(7.0, 2)};
  MaeModel mae = make_mae(MaeSpec::arc9(), 3, 0.3);
  const ExecLossConfig cfg = ExecLossConfig::for_kind(MaeKind::Arc9Layer);
  const std::vector<double> g = mae_loss_gradient(mae, recs, cfg);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t k = 0; k < mae.net.param_count(); k += 37) {
    MaeModel p = mae, m = mae;
    p.net.params()[k] += h;
    m.net.params()[k] -= h;
    const double fd = (mean_exec_loss(p, recs, cfg) - mean_exec_loss(m, recs, cfg)) / (2 * h);
    worst = std::max(worst, std::abs(g[k] - fd) / std::max({std::abs(g[k]), std::abs(fd), 1e-3}));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("encode then decode equals the full reconstruction") {
  const MaeModel mae = make_mae(MaeSpec::arc9(), 5);
  const AeRecord rec = random_arc_record(4.0, 9);
  const NetModel split = decode_code(mae, encode_ae(mae, rec));
  const NetModel full = reconstruct(mae, rec);
  CHECK(split == full);
}

TEST_CASE("line MAE on 16 lines x 3 trained AEs generalizes to held-out lines") {
  CorpusConfig cc = CorpusConfig::desk(Family::Line);
  cc.aes_per_class = 3;
  cc.seed = 1;
  const Corpus corpus = build_corpus(cc, 4);
  const CorpusSplit parts = split(corpus, 0.25, SplitMode::ByClass, 1);
  const ExecLossConfig cfg = ExecLossConfig::for_kind(MaeKind::Line818);
  const MaeModel mae = train_mae(parts.train, parts.test, MaeSpec::line818(), cfg,
                                 MaeTrainConfig::for_kind(MaeKind::Line818), 1);
  const MaeVerdict v = judge_mae(mae, parts.test, cfg);
  INFO(v.summary);
  CHECK(v.max_exec_rmse <= 0.2);
}

TEST_CASE("MAE training is deterministic") {
  const std::vector<AeRecord> recs{line_record(-30), line_record(10), line_record(50)};
  MaeTrainConfig hyper = MaeTrainConfig::for_kind(MaeKind::Line818);
  hyper.epochs = 40;
  hyper.restarts = 2;
  const ExecLossConfig cfg = ExecLossConfig::for_kind(MaeKind::Line818);
  const MaeModel a = train_mae(recs, {}, MaeSpec::line818(), cfg, hyper, 4);
  const MaeModel b = train_mae(recs, {}, MaeSpec::line818(), cfg, hyper, 4);
  CHECK(a.net == b.net);
  CHECK(a.train_stats == b.train_stats);
}

TEST_CASE("small learning rate gives a non-increasing loss") {
  const std::vector<AeRecord> recs{line_record(-20), line_record(35)};
  MaeTrainConfig hyper = MaeTrainConfig::for_kind(MaeKind::Line818);
  hyper.epochs = 10;
  hyper.restarts = 1;
  hyper.adam.lr = 1e-4;
  hyper.lr_final = 0.0;
  hyper.log_every = 1;
  const MaeModel mae =
      train_mae(recs, {}, MaeSpec::line818(), ExecLossConfig::for_kind(MaeKind::Line818), hyper, 2);
  const auto& curve = mae.train_stats.curve;
  REQUIRE(curve.size() >= 10);
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].train_loss <= curve[i - 1].train_loss);
}

TEST_CASE("MAE rejects records of the wrong architecture") {
  const std::vector<AeRecord> recs{random_arc_record(2.0, 1)};
  CHECK_THROWS_AS(train_mae(recs, {}, MaeSpec::line818(), ExecLossConfig::for_kind(MaeKind::Line818),
                            MaeTrainConfig::for_kind(MaeKind::Line818), 0),
                  ContractError);
  CHECK_THROWS_AS(train_mae({}, {}, MaeSpec::line818(), ExecLossConfig::for_kind(MaeKind::Line818),
                            MaeTrainConfig::for_kind(MaeKind::Line818), 0),
                  ContractError);
}
