#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <span>
#include <sstream>

#include "secad/config.hpp"
#include "secad/trainer.hpp"

namespace secad {

namespace {

using nlohmann::json;

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_exact(const json& v) {
  if (v.is_number()) return v.get<double>();
  const auto s = v.get<std::string>();
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ValidationError("bad decimal value '" + s + "' in checkpoint");
  return d;
}

json segments_to_json(const ParameterStore& layout, std::span<const double> values) {
  json out = json::object();
  for (const auto& seg : layout.segments()) {
    json arr = json::array();
    for (std::size_t i = 0; i < seg.size; ++i) arr.push_back(exact(values[seg.offset + i]));
    out[seg.name] = json{{"shape", seg.shape}, {"values", std::move(arr)}};
  }
  return out;
}

template <typename Buffer>
void segments_from_json(const json& j, const ParameterStore& layout, Buffer& values) {
  values.assign(layout.size(), 0.0);
  for (const auto& seg : layout.segments()) {
    if (!j.contains(seg.name)) throw ValidationError("checkpoint is missing segment '" + seg.name + "'");
    const auto& entry = j.at(seg.name);
    if (entry.at("shape").get<std::vector<int>>() != seg.shape)
      throw ValidationError("checkpoint segment '" + seg.name + "' has the wrong shape");
    const auto& arr = entry.at("values");
    if (arr.size() != seg.size) throw ValidationError("checkpoint segment '" + seg.name + "' has the wrong length");
    for (std::size_t i = 0; i < seg.size; ++i) values[seg.offset + i] = parse_exact(arr[i]);
  }
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ck) {
  const auto& layout = ck.model.params();
  json hist = json::array();
  for (const auto& r : ck.history) hist.push_back(json::array({r.epoch, r.shape, exact(r.recon), exact(r.sketch), exact(r.total)}));
  json doc{{"format_version", kCheckpointVersion},
           {"mode", ck.shared ? "shared" : "single"},
           {"model",
            {{"num_cylinders", ck.model.config().num_cylinders},
             {"hidden", ck.model.config().hidden},
             {"latent_dim", ck.model.config().latent_dim},
             {"num_codes", ck.model.config().num_codes},
             {"layers", kSketchLayers}}},
           {"fit_config", to_json(ck.config)},
           {"rng_seed", ck.config.seed},
           {"epoch", ck.epoch},
           {"params", segments_to_json(layout, layout.values())},
           {"adam",
            {{"t", ck.adam.t},
             {"lr", exact(ck.adam.lr)},
             {"beta1", exact(ck.adam.beta1)},
             {"beta2", exact(ck.adam.beta2)},
             {"epsilon", exact(ck.adam.epsilon)},
             {"m", segments_to_json(layout, ck.adam.m)},
             {"v", segments_to_json(layout, ck.adam.v)}}},
           {"loss_history", std::move(hist)}};
  return doc.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("checkpoint parse error: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version")) throw ModeError("not a checkpoint document");
  const int version = doc["format_version"].get<int>();
  if (version != kCheckpointVersion)
    throw ModeError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  try {
    Checkpoint ck;
    ck.shared = doc.at("mode").get<std::string>() == "shared";
    ck.config = fit_config_from_json(doc.at("fit_config"));
    const auto& mj = doc.at("model");
    ModelConfig mc;
    mc.num_cylinders = mj.at("num_cylinders").get<int>();
    mc.hidden = mj.at("hidden").get<int>();
    mc.latent_dim = mj.at("latent_dim").get<int>();
    mc.num_codes = mj.at("num_codes").get<int>();
    if (mj.value("layers", kSketchLayers) != kSketchLayers) throw ValidationError("unsupported sketch head depth");
    ck.config.model = mc;
    ck.model = SecadModel(mc);
    segments_from_json(doc.at("params"), ck.model.params(), ck.model.params().values());
    const auto& aj = doc.at("adam");
    ck.adam.t = aj.at("t").get<std::uint64_t>();
    ck.adam.lr = parse_exact(aj.at("lr"));
    ck.adam.beta1 = parse_exact(aj.at("beta1"));
    ck.adam.beta2 = parse_exact(aj.at("beta2"));
    ck.adam.epsilon = parse_exact(aj.at("epsilon"));
    segments_from_json(aj.at("m"), ck.model.params(), ck.adam.m);
    segments_from_json(aj.at("v"), ck.model.params(), ck.adam.v);
    ck.epoch = doc.at("epoch").get<int>();
    for (const auto& r : doc.at("loss_history"))
      ck.history.push_back(LossRecord{r.at(0).get<int>(), r.at(1).get<int>(), parse_exact(r.at(2)), parse_exact(r.at(3)),
                                      parse_exact(r.at(4))});
    return ck;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt);
  if (!out) throw IoError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace secad
