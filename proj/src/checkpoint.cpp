// SPDX-License-Identifier: Apache-2.0

#include "gatefuse/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gatefuse {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json matrix_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.raw()}}; }

json vector_json(const Vector& v) { return {{"dim", v.dim()}, {"data", v.raw()}}; }

Matrix matrix_from(const json& j, const char* what) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols) {
    std::ostringstream msg;
    msg << what << ": declared " << rows << "x" << cols << " but holds " << data.size() << " values";
    throw ValidationError(msg.str());
  }
  return Matrix(rows, cols, std::move(data));
}

Vector vector_from(const json& j, const char* what) {
  const auto dim = j.at("dim").get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != dim) {
    std::ostringstream msg;
    msg << what << ": declared dim " << dim << " but holds " << data.size() << " values";
    throw ValidationError(msg.str());
  }
  return Vector(std::move(data));
}

json scale_json(const ScaleMode& s) {
  return {{"kind", to_string(s.kind)}, {"divisor", s.divisor}, {"epsilon", s.epsilon}};
}

ScaleMode scale_from(const json& j) {
  ScaleMode s;
  s.kind = parse_scale_kind(j.at("kind").get<std::string>());
  s.divisor = j.at("divisor").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  ckpt.model.validate();
  const Model& m = ckpt.model;
  json j;
  j["format_version"] = kFormatVersion;
  j["target"] = to_string(ckpt.target);
  j["fusion_kind"] = to_string(m.fusion);
  j["dim_v"] = m.dim_v;
  j["dim_o"] = m.dim_o;
  j["classes"] = m.num_classes();
  if (m.gfa) {
    j["gfa"] = {{"variant", m.gfa->variant == GfaVariant::A ? "A" : "B"},
                {"scale", scale_json(m.gfa->scale)},
                {"W", matrix_json(m.gfa->w)},
                {"b", vector_json(m.gfa->b)}};
  }
  j["head"] = {{"W", matrix_json(m.head.w)}, {"b", vector_json(m.head.b)}};
  j["spec"] = {{"scale", scale_json(ckpt.spec.scale)},
               {"aggregation", {{"k", ckpt.spec.aggregation.k}, {"window", ckpt.spec.aggregation.window}}}};
  j["train_config"] = {{"learning_rate", ckpt.train.learning_rate}, {"momentum", ckpt.train.momentum},
                       {"epochs", ckpt.train.epochs},               {"batch_size", ckpt.train.batch_size},
                       {"seed", ckpt.train.seed},                   {"train_gfa", ckpt.train.train_gfa}};
  out << j.dump(1) << '\n';
}

Checkpoint read_checkpoint(std::istream& in) {
  try {
    const json j = json::parse(in);
    if (j.at("format_version").get<int>() != kFormatVersion)
      throw ValidationError("checkpoint: unsupported format_version");
    Checkpoint c;
    c.target = parse_target(j.at("target").get<std::string>());
    Model& m = c.model;
    m.fusion = parse_fusion_kind(j.at("fusion_kind").get<std::string>());
    m.dim_v = j.at("dim_v").get<std::size_t>();
    m.dim_o = j.at("dim_o").get<std::size_t>();
    if (j.contains("gfa")) {
      const auto& g = j.at("gfa");
      GfaParams p;
      const auto variant = g.at("variant").get<std::string>();
      if (variant != "A" && variant != "B") throw ValidationError("checkpoint: gfa variant must be A or B");
      p.variant = variant == "A" ? GfaVariant::A : GfaVariant::B;
      p.dim_v = m.dim_v;
      p.dim_o = m.dim_o;
      p.scale = scale_from(g.at("scale"));
      p.w = matrix_from(g.at("W"), "gfa.W");
      p.b = vector_from(g.at("b"), "gfa.b");
      m.gfa = std::move(p);
    }
    m.head.w = matrix_from(j.at("head").at("W"), "head.W");
    m.head.b = vector_from(j.at("head").at("b"), "head.b");
    if (j.at("classes").get<std::size_t>() != m.head.w.rows())
      throw ValidationError("checkpoint: declared classes disagree with head.W rows");

    const auto& spec = j.at("spec");
    c.spec.fusion = m.fusion;
    c.spec.scale = scale_from(spec.at("scale"));
    c.spec.aggregation.k = spec.at("aggregation").at("k").get<int>();
    c.spec.aggregation.window = spec.at("aggregation").at("window").get<int>();
    c.spec.aggregation.validate();

    const auto& t = j.at("train_config");
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.momentum = t.at("momentum").get<double>();
    c.train.epochs = t.at("epochs").get<int>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.train.train_gfa = t.at("train_gfa").get<bool>();

    m.validate();
    return c;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace gatefuse
