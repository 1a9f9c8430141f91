#include "metaenc/serialize.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "metaenc/errors.hpp"

namespace metaenc {

namespace {

constexpr std::string_view kChecksumKey = "\"checksum\": \"";
constexpr std::string_view kZeroChecksum = "0000000000000000";

Json doubles_to_json(std::span<const double> values) {
  Json arr = Json::array();
  for (double v : values) arr.push_back(format_double(v));
  return arr;
}

std::vector<double> doubles_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const Json& v : j) out.push_back(parse_double(v.get<std::string>()));
  return out;
}

template <class T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("bad type for field '") + key + "'");
  }
}

double double_field(const Json& j, const char* key) {
  return parse_double(field<std::string>(j, key));
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s.empty()) throw FormatError("empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  // Subnormals set ERANGE but parse exactly; only overflow and total
  // underflow are errors.
  const bool out_of_range = errno == ERANGE && (std::isinf(v) || v == 0.0);
  if (end != s.c_str() + s.size() || out_of_range) {
    throw FormatError("not a number: '" + s + "'");
  }
  return v;
}

Json class_to_json(const ClassSpec& spec) {
  return std::visit(
      [](const auto& c) -> Json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LineClass>) {
          return Json{{"family", "line"}, {"theta_deg", c.theta_deg}};
        } else if constexpr (std::is_same_v<T, CircleClass>) {
          return Json{{"family", "circle"}, {"r", format_double(c.r)}};
        } else {
          return Json{{"family", "arc"},
                      {"r", format_double(c.r)},
                      {"angle_lo", format_double(c.angle_lo)},
                      {"angle_hi", format_double(c.angle_hi)}};
        }
      },
      spec);
}

ClassSpec class_from_json(const Json& j) {
  const auto family = field<std::string>(j, "family");
  ClassSpec spec;
  if (family == "line") {
    spec = LineClass{field<int>(j, "theta_deg")};
  } else if (family == "circle") {
    spec = CircleClass{double_field(j, "r")};
  } else if (family == "arc") {
    spec = ArcClass{double_field(j, "r"), double_field(j, "angle_lo"), double_field(j, "angle_hi")};
  } else {
    throw FormatError("unknown class family '" + family + "'");
  }
  try {
    validate(spec);
  } catch (const ContractError& e) {
    throw FormatError(std::string("invalid class: ") + e.what());
  }
  return spec;
}

Json record_to_json(const AeRecord& rec) {
  const TrainStats& s = rec.train_stats;
  return Json{{"arch", std::string(to_string(rec.arch))},
              {"class", class_to_json(rec.class_spec)},
              {"seed", s.seed},
              {"converged", rec.converged},
              {"epochs", s.epochs},
              {"attempts", s.attempts},
              {"train_rmse", format_double(s.final_train_rmse)},
              {"test_rmse", format_double(s.final_test_rmse)},
              {"params", doubles_to_json(rec.model.params())}};
}

AeRecord record_from_json(const Json& j) {
  AeRecord rec;
  try {
    rec.arch = arch_from_string(field<std::string>(j, "arch"));
  } catch (const ContractError& e) {
    throw FormatError(e.what());
  }
  rec.class_spec = class_from_json(field<Json>(j, "class"));
  if (arch_for(rec.class_spec) != rec.arch) throw FormatError("record class does not match arch");
  rec.train_stats.seed = field<std::uint64_t>(j, "seed");
  rec.converged = field<bool>(j, "converged");
  rec.train_stats.epochs = field<std::size_t>(j, "epochs");
  rec.train_stats.attempts = field<std::uint32_t>(j, "attempts");
  rec.train_stats.final_train_rmse = double_field(j, "train_rmse");
  rec.train_stats.final_test_rmse = double_field(j, "test_rmse");
  auto params = doubles_from_json(field<Json>(j, "params"));
  const auto spec = spec_for(rec.arch);
  if (params.size() != spec->param_count()) throw FormatError("wrong parameter count");
  try {
    rec.model = NetModel(spec, std::move(params));
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad parameters: ") + e.what());
  }
  return rec;
}

Json mae_to_json(const MaeModel& mae) {
  const MaeTrainStats& s = mae.train_stats;
  Json curve = Json::array();
  for (const MaeCurvePoint& p : s.curve) {
    curve.push_back(Json{{"epoch", p.epoch},
                         {"train_loss", format_double(p.train_loss)},
                         {"test_loss", format_double(p.test_loss)}});
  }
  return Json{{"kind", std::string(to_string(mae.spec.kind))},
              {"relu_hidden", mae.spec.relu_hidden},
              {"params", doubles_to_json(mae.net.params())},
              {"input_shift", doubles_to_json(mae.input_shift)},
              {"input_scale", doubles_to_json(mae.input_scale)},
              {"output_shift", doubles_to_json(mae.output_shift)},
              {"output_scale", doubles_to_json(mae.output_scale)},
              {"stats",
               Json{{"seed", s.seed},
                    {"initial_train_loss", format_double(s.initial_train_loss)},
                    {"initial_test_loss", format_double(s.initial_test_loss)},
                    {"final_train_loss", format_double(s.final_train_loss)},
                    {"final_test_loss", format_double(s.final_test_loss)},
                    {"curve", curve}}}};
}

MaeModel mae_from_json(const Json& j) {
  MaeKind kind;
  try {
    kind = mae_kind_from_string(field<std::string>(j, "kind"));
  } catch (const ContractError& e) {
    throw FormatError(e.what());
  }
  const bool relu = field<bool>(j, "relu_hidden");
  MaeModel mae;
  mae.spec = kind == MaeKind::Line818 ? MaeSpec::line818(relu) : MaeSpec::arc9();
  auto params = doubles_from_json(field<Json>(j, "params"));
  if (params.size() != mae.spec.net->param_count()) throw FormatError("wrong MAE parameter count");
  try {
    mae.net = NetModel(mae.spec.net, std::move(params));
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad MAE parameters: ") + e.what());
  }
  const std::size_t width = feature_width(mae.spec.transform);
  auto affine = [&](const char* key) {
    auto v = doubles_from_json(field<Json>(j, key));
    if (!v.empty() && v.size() != width) throw FormatError(std::string("bad length for ") + key);
    return v;
  };
  mae.input_shift = affine("input_shift");
  mae.input_scale = affine("input_scale");
  mae.output_shift = affine("output_shift");
  mae.output_scale = affine("output_scale");
  if (mae.input_shift.size() != mae.input_scale.size() ||
      mae.output_shift.size() != mae.output_scale.size()) {
    throw FormatError("shift and scale lengths differ");
  }
  const Json& s = field<Json>(j, "stats");
  mae.train_stats.seed = field<std::uint64_t>(s, "seed");
  mae.train_stats.initial_train_loss = double_field(s, "initial_train_loss");
  mae.train_stats.initial_test_loss = double_field(s, "initial_test_loss");
  mae.train_stats.final_train_loss = double_field(s, "final_train_loss");
  mae.train_stats.final_test_loss = double_field(s, "final_test_loss");
  for (const Json& p : field<Json>(s, "curve")) {
    mae.train_stats.curve.push_back(MaeCurvePoint{field<std::size_t>(p, "epoch"),
                                                  double_field(p, "train_loss"),
                                                  double_field(p, "test_loss")});
  }
  return mae;
}

std::string seal_document(Json doc, std::string_view kind) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["kind"] = std::string(kind);
  out["checksum"] = std::string(kZeroChecksum);
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() == "schema_version" || it.key() == "kind" || it.key() == "checksum") continue;
    out[it.key()] = std::move(it.value());
  }
  std::string text = out.dump(1);
  text.push_back('\n');
  const std::size_t pos = text.find(kChecksumKey) + kChecksumKey.size();
  text.replace(pos, kZeroChecksum.size(), hex64(fnv1a64(text)));
  return text;
}

Json open_document(const std::string& text, std::string_view kind) {
  const std::size_t key = text.find(kChecksumKey);
  if (key == std::string::npos || key + kChecksumKey.size() + kZeroChecksum.size() > text.size()) {
    throw FormatError("malformed document: no checksum field");
  }
  const std::size_t pos = key + kChecksumKey.size();
  const std::string stored = text.substr(pos, kZeroChecksum.size());
  std::string zeroed = text;
  zeroed.replace(pos, kZeroChecksum.size(), kZeroChecksum);
  if (stored != hex64(fnv1a64(zeroed))) throw FormatError("checksum mismatch");

  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed document: ") + e.what());
  }
  const int version = field<int>(doc, "schema_version");
  if (version != kSchemaVersion) {
    throw FormatError("unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  const auto found = field<std::string>(doc, "kind");
  if (found != kind) {
    throw FormatError("expected a " + std::string(kind) + " document, found " + found);
  }
  return doc;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void save_record(const AeRecord& rec, const std::filesystem::path& path) {
  write_text_file(path, seal_document(Json{{"record", record_to_json(rec)}}, "ae_record"));
}

AeRecord load_record(const std::filesystem::path& path) {
  const Json doc = open_document(read_text_file(path), "ae_record");
  return record_from_json(field<Json>(doc, "record"));
}

void save_mae(const MaeModel& mae, const std::filesystem::path& path) {
  write_text_file(path, seal_document(Json{{"mae", mae_to_json(mae)}}, "mae_model"));
}

MaeModel load_mae(const std::filesystem::path& path) {
  const Json doc = open_document(read_text_file(path), "mae_model");
  return mae_from_json(field<Json>(doc, "mae"));
}

}  // namespace metaenc
