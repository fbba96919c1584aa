#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "secad/extract.hpp"
#include "secad/meshmetrics.hpp"
#include "secad/trainer.hpp"

namespace secad {

// Everything a CLI run can be configured with. Loaded from one JSON document
// with sections fit / model / loss / extract / metrics / reconstruct; unknown
// keys are rejected.
struct RunConfig {
  FitConfig fit;
  ExtractConfig extract;
  MetricsConfig metrics;
  int mc_res = 256;
  int threads = 0;  // 0: SECAD_THREADS or hardware concurrency

  void validate() const;
};

nlohmann::json to_json(const FitConfig& c);
FitConfig fit_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExtractConfig& c);
nlohmann::json to_json(const MetricsConfig& c);
nlohmann::json to_json(const RunConfig& c);

// Overlays the keys present in `j` onto `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace secad
