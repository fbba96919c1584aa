#include "secad/commands.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "secad/parallel.hpp"

namespace secad {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kExitIo;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ContractError*>(&e)) return kExitConfig;
  if (dynamic_cast<const ModeError*>(&e)) return kExitState;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  return kExitConfig;
}

SeResult reconstruct_se(const ModelView& m, const RunConfig& cfg) {
  SeResult r;
  r.sketches = extract_sketches(m, cfg.extract);
  for (const auto& s : r.sketches) r.warnings.insert(r.warnings.end(), s.warnings.begin(), s.warnings.end());
  PostprocessReport report;
  r.tree = postprocess(assemble(r.sketches, cfg.extract.curve_samples), cfg.extract.mc_samples, cfg.extract.seed,
                       cfg.extract.min_height, cfg.extract.overlap_threshold, &report);
  r.removed = std::move(report.removed);
  r.meshes = mesh_primitives(r.tree, cfg.extract.curve_samples, &r.warnings);
  return r;
}

TriangleMesh reconstruct_mc(const ModelView& m, const FieldParams& field, int res) {
  MarchingCubesOptions opts;
  opts.res = res;
  opts.iso = 0.5;
  opts.inside_above = true;
  return marching_cubes(
      [&](std::span<const Vec3> pts, std::span<double> out) {
        const auto fr = model_forward(m, field, std::vector<Vec3>(pts.begin(), pts.end()));
        std::copy(fr.occupancy.data(), fr.occupancy.data() + fr.occupancy.size(), out.begin());
      },
      opts);
}

void write_se_outputs(const SeResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& s : r.sketches) write_text(dir / ("sketch_" + std::to_string(s.head) + ".svg"), sketch_svg(s));
  write_text(dir / "sketches.json", sketches_json(r.sketches));
  write_text(dir / "csg.json", csg_json(r.tree));
  std::vector<TriangleMesh> meshes;
  for (const auto& pm : r.meshes) meshes.push_back(pm.mesh);
  save_obj(merge_meshes(meshes), dir / "primitives.obj");
}

namespace {

nlohmann::json se_report(const SeResult& r) {
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& pm : r.meshes)
    prims.push_back({{"id", pm.primitive}, {"head", pm.head}, {"additive", pm.additive}});
  return {{"p_count", primitive_count(r.tree)}, {"primitives", prims}, {"warnings", r.warnings}, {"removed", r.removed}};
}

}  // namespace

void cmd_synth(const fs::path& spec_path, int dim, const fs::path& out) {
  const ShapeSpec spec = shape_from_json(read_text(spec_path));
  save_voxels(synthesize_shape(spec, dim), out);
}

Checkpoint cmd_fit(const std::vector<fs::path>& voxels, const RunConfig& cfg, const fs::path& out) {
  if (voxels.empty()) throw ValidationError("fit needs at least one voxel file");
  std::vector<VoxelGrid> grids;
  for (const auto& p : voxels) grids.push_back(load_voxels(p));
  fs::path csv = out;
  csv.replace_extension(".loss.csv");
  try {
    Checkpoint ck = grids.size() == 1 ? fit_single(grids.front(), cfg.fit) : fit_shared(grids, cfg.fit);
    save_checkpoint(ck, out);
    write_text(csv, loss_history_csv(ck.history));
    return ck;
  } catch (const FitAborted& e) {
    fs::path last = out;
    last.replace_extension(".last_good.json");
    save_checkpoint(e.last_good(), last);
    write_text(csv, loss_history_csv(e.last_good().history));
    throw;
  }
}

void cmd_reconstruct(const fs::path& checkpoint, const std::string& mode, int res, int shape, const RunConfig& cfg,
                     const fs::path& out_dir) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (shape < 0 || shape >= ck.shape_count())
    throw ValidationError("shape index " + std::to_string(shape) + " out of range");
  const ModelView view{ck.model.config(), ck.model.params(), shape};
  fs::create_directories(out_dir);
  nlohmann::json report{{"mode", mode}, {"shape", shape}, {"config", to_json(cfg)}};
  if (mode == "mc") {
    const int r = res > 0 ? res : cfg.mc_res;
    const TriangleMesh mesh = reconstruct_mc(view, ck.config.loss.field, r);
    save_obj(mesh, out_dir / "mesh.obj");
    report["res"] = r;
    report["triangles"] = mesh.triangles.size();
  } else if (mode == "se") {
    const SeResult r = reconstruct_se(view, cfg);
    write_se_outputs(r, out_dir);
    report.update(se_report(r));
  } else {
    throw ValidationError("unknown reconstruction mode '" + mode + "' (expected mc or se)");
  }
  write_text(out_dir / "report.json", report.dump(2) + "\n");
}

MetricsReport cmd_eval(const fs::path& pred, const fs::path& gt, const RunConfig& cfg, std::size_t p_count,
                       const std::optional<fs::path>& out) {
  const TriangleMesh p = load_obj(pred), g = load_obj(gt);
  if (p.empty()) throw IoError(pred.string() + " contains no triangles");
  if (g.empty()) throw IoError(gt.string() + " contains no triangles");
  const MetricsReport r = evaluate_meshes(p, g, cfg.metrics, p_count);
  const std::string text = metrics_json(r, cfg.metrics);
  if (out)
    write_text(*out, text);
  else
    std::cout << text;
  return r;
}

void cmd_interp(const fs::path& checkpoint, int a, int b, int steps, bool meshes, const RunConfig& cfg,
                const fs::path& out_dir) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const std::vector<Vec> codes = interpolate_codes(ck, a, b, steps);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const ModelView view{ck.model.config(), ck.model.params(), 0, &codes[i]};
    const fs::path dir = out_dir / ("step_" + std::to_string(i));
    const SeResult r = reconstruct_se(view, cfg);
    write_se_outputs(r, dir);
    if (meshes) save_obj(reconstruct_mc(view, ck.config.loss.field, cfg.mc_res), dir / "mesh.obj");
    const double t = steps > 1 ? static_cast<double>(i) / (steps - 1) : 0.0;
    nlohmann::json report{{"a", a}, {"b", b}, {"t", t}, {"config", to_json(cfg)}};
    report.update(se_report(r));
    write_text(dir / "report.json", report.dump(2) + "\n");
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Sketch-extrude CAD reconstruction from voxel grids"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Override the fitting seed");
  app.add_option("--threads", threads, "Worker threads (default: SECAD_THREADS or all cores)");

  auto* synth = app.add_subcommand("synth", "Voxelize an analytic fixture shape");
  std::string spec_path, synth_out;
  int dim = 64;
  synth->add_option("--spec", spec_path, "Shape JSON")->required();
  synth->add_option("--dim", dim, "Grid resolution");
  synth->add_option("--out", synth_out, "Output SECV file")->required();

  auto* fit = app.add_subcommand("fit", "Fit the decoder to one or more voxel grids");
  std::vector<std::string> fit_inputs;
  std::string fit_out;
  fit->add_option("voxels", fit_inputs, "SECV inputs (two or more: shared decoder)")->required();
  fit->add_option("--out", fit_out, "Checkpoint path")->required();

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct meshes and sketches from a checkpoint");
  std::string rec_ckpt, rec_mode = "se", rec_out;
  int rec_res = 0, rec_shape = 0;
  rec->add_option("checkpoint", rec_ckpt, "Checkpoint")->required();
  rec->add_option("--mode", rec_mode, "mc or se")->check(CLI::IsMember({"mc", "se"}));
  rec->add_option("--res", rec_res, "Marching cubes resolution (mc mode)");
  rec->add_option("--shape", rec_shape, "Latent code index");
  rec->add_option("--out", rec_out, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Compare two OBJ meshes");
  std::string ev_pred, ev_gt, ev_out;
  std::size_t ev_pcount = 0;
  ev->add_option("pred", ev_pred, "Predicted OBJ")->required();
  ev->add_option("gt", ev_gt, "Ground-truth OBJ")->required();
  ev->add_option("--p-count", ev_pcount, "Primitive count to report");
  ev->add_option("--out", ev_out, "Report path (default: stdout)");

  auto* in = app.add_subcommand("interp", "Interpolate latent codes of a shared checkpoint");
  std::string in_ckpt, in_out;
  int in_a = 0, in_b = 1, in_steps = 5;
  bool in_meshes = false;
  in->add_option("checkpoint", in_ckpt, "Shared checkpoint")->required();
  in->add_option("--a", in_a, "First code");
  in->add_option("--b", in_b, "Second code");
  in->add_option("--steps", in_steps, "Number of steps including endpoints");
  in->add_flag("--meshes", in_meshes, "Also write marching cubes meshes");
  in->add_option("--out", in_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) cfg.fit.seed = *seed;
    if (threads) cfg.threads = *threads;
    cfg.validate();
    if (cfg.threads > 0) set_thread_count(cfg.threads);

    if (*synth) {
      cmd_synth(spec_path, dim, synth_out);
    } else if (*fit) {
      std::vector<fs::path> paths(fit_inputs.begin(), fit_inputs.end());
      cmd_fit(paths, cfg, fit_out);
    } else if (*rec) {
      cmd_reconstruct(rec_ckpt, rec_mode, rec_res, rec_shape, cfg, rec_out);
    } else if (*ev) {
      cmd_eval(ev_pred, ev_gt, cfg, ev_pcount, ev_out.empty() ? std::nullopt : std::optional<fs::path>(ev_out));
    } else if (*in) {
      cmd_interp(in_ckpt, in_a, in_b, in_steps, in_meshes, cfg, in_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace secad
