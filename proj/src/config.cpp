#include "secad/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "secad/error.hpp"
#include "secad/parallel.hpp"

namespace secad {

namespace {

using nlohmann::json;

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(std::string("config section '") + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ValidationError(std::string("unknown config key '") + section + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const FitConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_points", c.batch_points},
              {"near_ratio", c.near_ratio},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_epsilon", c.adam_epsilon},
              {"seed", c.seed},
              {"loss",
               {{"lambda", c.loss.lambda},
                {"eta", c.loss.field.eta},
                {"phi", c.loss.field.phi},
                {"box_margin", c.loss.box_margin}}},
              {"model",
               {{"num_cylinders", c.model.num_cylinders},
                {"hidden", c.model.hidden},
                {"latent_dim", c.model.latent_dim},
                {"num_codes", c.model.num_codes},
                {"layers", kSketchLayers}}}};
}

FitConfig fit_config_from_json(const json& j) {
  FitConfig c;
  check_keys(j, "fit", {"epochs", "batch_points", "near_ratio", "lr", "beta1", "beta2", "adam_epsilon", "seed", "loss", "model"});
  read(j, "epochs", c.epochs);
  read(j, "batch_points", c.batch_points);
  read(j, "near_ratio", c.near_ratio);
  read(j, "lr", c.lr);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "adam_epsilon", c.adam_epsilon);
  read(j, "seed", c.seed);
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    check_keys(l, "loss", {"lambda", "eta", "phi", "box_margin"});
    read(l, "lambda", c.loss.lambda);
    read(l, "eta", c.loss.field.eta);
    read(l, "phi", c.loss.field.phi);
    read(l, "box_margin", c.loss.box_margin);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, "model", {"num_cylinders", "hidden", "latent_dim", "num_codes", "layers"});
    read(m, "num_cylinders", c.model.num_cylinders);
    read(m, "hidden", c.model.hidden);
    read(m, "latent_dim", c.model.latent_dim);
    read(m, "num_codes", c.model.num_codes);
    if (m.contains("layers") && m["layers"].get<int>() != kSketchLayers)
      throw ValidationError("only 4-layer sketch heads are supported");
  }
  return c;
}

json to_json(const ExtractConfig& c) {
  return json{{"raster_res", c.raster_res},         {"window_margin", c.window_margin},
              {"smoothing_factor", c.smoothing_factor}, {"mc_samples", c.mc_samples},
              {"min_height", c.min_height},         {"overlap_threshold", c.overlap_threshold},
              {"curve_samples", c.curve_samples},   {"seed", c.seed}};
}

json to_json(const MetricsConfig& c) {
  return json{{"d", c.edge_distance}, {"tau", c.edge_tau}, {"n_cd", c.n_cd}, {"n_ecd", c.n_ecd}, {"seed", c.seed}};
}

json to_json(const RunConfig& c) {
  json fit = to_json(c.fit);
  json out{{"fit", {{"epochs", fit["epochs"]},
                    {"batch_points", fit["batch_points"]},
                    {"near_ratio", fit["near_ratio"]},
                    {"lr", fit["lr"]},
                    {"beta1", fit["beta1"]},
                    {"beta2", fit["beta2"]},
                    {"adam_epsilon", fit["adam_epsilon"]}}},
           {"model", fit["model"]},
           {"loss", fit["loss"]},
           {"extract", to_json(c.extract)},
           {"metrics", to_json(c.metrics)},
           {"reconstruct", {{"mc_res", c.mc_res}}},
           {"seed", c.fit.seed},
           {"threads", c.threads}};
  out["model"].erase("num_codes");
  return out;
}

void RunConfig::validate() const {
  fit.validate();
  if (extract.raster_res < 16) throw ValidationError("extract.raster_res must be >= 16");
  if (!(extract.window_margin > 0)) throw ValidationError("extract.window_margin must be positive");
  if (!(extract.smoothing_factor >= 0)) throw ValidationError("extract.smoothing_factor must be >= 0");
  if (extract.mc_samples < 1) throw ValidationError("extract.mc_samples must be >= 1");
  if (!(extract.overlap_threshold > 0 && extract.overlap_threshold <= 1))
    throw ValidationError("extract.overlap_threshold must lie in (0, 1]");
  if (extract.curve_samples < 3) throw ValidationError("extract.curve_samples must be >= 3");
  if (!(metrics.edge_distance > 0)) throw ValidationError("metrics.d must be positive");
  if (metrics.n_cd < 1 || metrics.n_ecd < 1) throw ValidationError("metric sample counts must be positive");
  if (mc_res < 8) throw ValidationError("reconstruct.mc_res must be >= 8");
  if (threads < 0) throw ValidationError("threads must be >= 0");
}

RunConfig run_config_from_json(const json& j, RunConfig base) {
  RunConfig c = std::move(base);
  check_keys(j, "config", {"fit", "model", "loss", "extract", "metrics", "reconstruct", "seed", "threads"});
  try {
    if (j.contains("fit") || j.contains("model") || j.contains("loss")) {
      json fit = to_json(c.fit);
      if (j.contains("fit")) {
        check_keys(j["fit"], "fit", {"epochs", "batch_points", "near_ratio", "lr", "beta1", "beta2", "adam_epsilon"});
        for (const auto& [k, v] : j["fit"].items()) fit[k] = v;
      }
      if (j.contains("model")) {
        check_keys(j["model"], "model", {"num_cylinders", "hidden", "latent_dim", "layers"});
        for (const auto& [k, v] : j["model"].items()) fit["model"][k] = v;
      }
      if (j.contains("loss")) {
        check_keys(j["loss"], "loss", {"lambda", "eta", "phi", "box_margin"});
        for (const auto& [k, v] : j["loss"].items()) fit["loss"][k] = v;
      }
      c.fit = fit_config_from_json(fit);
    }
    if (j.contains("extract")) {
      const auto& e = j["extract"];
      check_keys(e, "extract", {"raster_res", "window_margin", "smoothing_factor", "mc_samples", "min_height",
                                "overlap_threshold", "curve_samples", "seed"});
      read(e, "raster_res", c.extract.raster_res);
      read(e, "window_margin", c.extract.window_margin);
      read(e, "smoothing_factor", c.extract.smoothing_factor);
      read(e, "mc_samples", c.extract.mc_samples);
      read(e, "min_height", c.extract.min_height);
      read(e, "overlap_threshold", c.extract.overlap_threshold);
      read(e, "curve_samples", c.extract.curve_samples);
      read(e, "seed", c.extract.seed);
    }
    if (j.contains("metrics")) {
      const auto& m = j["metrics"];
      check_keys(m, "metrics", {"d", "tau", "n_cd", "n_ecd", "seed"});
      read(m, "d", c.metrics.edge_distance);
      read(m, "tau", c.metrics.edge_tau);
      read(m, "n_cd", c.metrics.n_cd);
      read(m, "n_ecd", c.metrics.n_ecd);
      read(m, "seed", c.metrics.seed);
    }
    if (j.contains("reconstruct")) {
      check_keys(j["reconstruct"], "reconstruct", {"mc_res"});
      read(j["reconstruct"], "mc_res", c.mc_res);
    }
    read(j, "seed", c.fit.seed);
    read(j, "threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace secad
