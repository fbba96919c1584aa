#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "secad/config.hpp"
#include "secad/extract.hpp"
#include "secad/meshmetrics.hpp"
#include "secad/trainer.hpp"

namespace secad {

namespace fs = std::filesystem;

// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitIo = 1, kExitConfig = 2, kExitState = 3, kExitNumerical = 4 };

// Maps a library exception onto an exit code.
int exit_code_for(const std::exception& e);

// Sketch-extrude reconstruction of one latent code.
struct SeResult {
  std::vector<ExtractedSketch> sketches;
  CSGTree tree;  // after post-processing
  std::vector<PrimitiveMesh> meshes;
  std::vector<std::string> warnings;
  std::vector<std::string> removed;
};

SeResult reconstruct_se(const ModelView& m, const RunConfig& cfg);
TriangleMesh reconstruct_mc(const ModelView& m, const FieldParams& field, int res);

// Writes sketch_<head>.svg, sketches.json, csg.json and primitives.obj.
void write_se_outputs(const SeResult& r, const fs::path& dir);

void cmd_synth(const fs::path& spec_path, int dim, const fs::path& out);
Checkpoint cmd_fit(const std::vector<fs::path>& voxels, const RunConfig& cfg, const fs::path& out);
void cmd_reconstruct(const fs::path& checkpoint, const std::string& mode, int res, int shape, const RunConfig& cfg,
                     const fs::path& out_dir);
MetricsReport cmd_eval(const fs::path& pred, const fs::path& gt, const RunConfig& cfg, std::size_t p_count,
                       const std::optional<fs::path>& out);
void cmd_interp(const fs::path& checkpoint, int a, int b, int steps, bool meshes, const RunConfig& cfg,
                const fs::path& out_dir);

// Full command line; returns the process exit code.
int run_cli(int argc, char** argv);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace secad
