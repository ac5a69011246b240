// Command-line front end: gen | fit | eval | mesh | render.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "artikin/errors.hpp"
#include "artikin/image_io.hpp"
#include "artikin/log.hpp"
#include "artikin/mesh.hpp"
#include "artikin/metrics.hpp"
#include "artikin/optimizer.hpp"
#include "artikin/parallel.hpp"
#include "artikin/renderer.hpp"
#include "artikin/scene_io.hpp"
#include "artikin/synth.hpp"

namespace fs = std::filesystem;
using namespace artikin;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--seed", c.seed, "random seed (default 0)");
  cmd->add_option("--threads", c.threads, "worker thread cap (0 = all cores)");
  cmd->add_option("--out", c.out, "output directory");
}

nlohmann::json config_json(const Common& c) {
  return c.config.empty() ? nlohmann::json::object() : read_json(c.config);
}

fs::path prepare_out(const Common& c) {
  fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory " + out.string());
  return out;
}

// gen ------------------------------------------------------------------------

struct GenArgs {
  std::optional<std::string> kind;
  std::optional<int> k;
  std::optional<double> theta_total, translation, noise;
  std::optional<int> n_gaussians;
  int views = 0;
  int view_size = 64;
};

/// Manifest entry for one rendered observation.
nlohmann::json view_entry(double t, const Camera& cam, const std::string& image) {
  return {{"t", t}, {"camera", camera_to_json(cam)}, {"image", image}};
}

int cmd_gen(const Common& c, const GenArgs& a) {
  nlohmann::json j = config_json(c);
  if (a.kind) j["kind"] = *a.kind;
  if (a.k) j["k"] = *a.k;
  if (a.theta_total) j["theta_total"] = *a.theta_total;
  if (a.translation) j["translation"] = *a.translation;
  if (a.noise) j["noise"] = *a.noise;
  if (a.n_gaussians) j["n_gaussians"] = *a.n_gaussians;
  if (c.seed) j["seed"] = *c.seed;
  if (!j.contains("k") && j.value("kind", std::string("hinge")) == "cabinet") j["k"] = 4;
  const SceneSpec spec = SceneSpec::from_json(j);
  const fs::path out = prepare_out(c);
  const SynthScene scene = make_scene(spec);
  save_gaussians(out / "state_t0.ply", scene.input.gaussians_t0);
  save_gaussians(out / "state_t1.ply", scene.input.gaussians_t1);
  nlohmann::json gt = scene.truth.to_json();
  gt["spec"] = spec.to_json();
  write_json(out / "gt.json", gt);

  if (a.views > 0) {
    // Renders of the observed splats, usable as render-mode supervision.
    Vector3d lo = Vector3d::Constant(1e300), hi = -lo;
    for (const auto& g : scene.input.gaussians_t0) {
      lo = lo.cwiseMin(g.center);
      hi = hi.cwiseMax(g.center);
    }
    const auto rig = camera_rig(0.5 * (lo + hi), 0.5 * (hi - lo).norm(), a.view_size, a.view_size);
    nlohmann::json manifest = nlohmann::json::array();
    fs::create_directories(out / "views");
    for (int s = 0; s < 2; ++s) {
      const auto& gs = s == 0 ? scene.input.gaussians_t0 : scene.input.gaussians_t1;
      for (int v = 0; v < std::min<int>(a.views, static_cast<int>(rig.size())); ++v) {
        const std::string name = fmt::format("views/t{}_{:02d}.pfm", s, v);
        write_pfm(out / name, render_gaussians(gs, nullptr, rig[v]).color);
        manifest.push_back(view_entry(s, rig[v], name));
      }
    }
    write_json(out / "views.json", manifest);
  }
  std::cout << fmt::format("wrote {} ({} kind, k={})\n", out.string(), spec.kind, spec.k);
  return 0;
}

// fit ------------------------------------------------------------------------

struct FitArgs {
  std::string input = ".";
  std::string views;
  std::string profile = "geometry";
  std::optional<int> k, iterations, vote_refresh, knn_k, checkpoint_every, joint_warmup;
  std::optional<std::string> mode;
  std::optional<double> fd_step, beta, temperature, tau, lr_floor;
  std::optional<double> w_render, w_scale, w_center, w_geo, w_vote, w_dssim;
  std::optional<double> lr_joints, lr_part_model, lr_seg_logits, lr_gaussians;
};

std::vector<StateObservation> load_views(const fs::path& manifest) {
  const nlohmann::json j = read_json(manifest);
  if (!j.is_array()) throw ParseError(manifest.string() + ": expected a list of views");
  std::vector<StateObservation> obs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = fmt::format("{}[{}]", manifest.string(), i);
    if (!j[i].contains("t") || !j[i].contains("camera") || !j[i].contains("image"))
      throw ParseError(path + ": needs t, camera and image");
    const double t = j[i]["t"].get<double>();
    View v;
    v.camera = camera_from_json(j[i]["camera"], path + ".camera");
    v.image = read_pfm_rgb(manifest.parent_path() / j[i]["image"].get<std::string>());
    auto it = std::find_if(obs.begin(), obs.end(), [&](const auto& o) { return o.t == t; });
    if (it == obs.end()) {
      obs.push_back({});
      obs.back().t = t;
      it = obs.end() - 1;
    }
    it->views.push_back(std::move(v));
  }
  return obs;
}

FitConfig fit_config(const Common& c, const FitArgs& a) {
  FitConfig base;
  if (a.profile == "geometry") {
    base = FitConfig::geometry_profile();
  } else if (a.profile != "default") {
    throw ParseError("unknown profile '" + a.profile + "' (expected geometry or default)");
  }
  FitConfig cfg = FitConfig::from_json(config_json(c), base);
  nlohmann::json o = nlohmann::json::object();
  auto put = [&](const char* key, const auto& v) {
    if (v) o[key] = *v;
  };
  put("k", a.k);
  put("iterations", a.iterations);
  put("vote_refresh", a.vote_refresh);
  put("knn_k", a.knn_k);
  put("checkpoint_every", a.checkpoint_every);
  put("joint_warmup", a.joint_warmup);
  put("mode", a.mode);
  put("fd_step", a.fd_step);
  put("beta", a.beta);
  put("temperature", a.temperature);
  put("tau", a.tau);
  put("lr_floor", a.lr_floor);
  put("seed", c.seed);
  nlohmann::json w = nlohmann::json::object(), l = nlohmann::json::object();
  auto putw = [&](nlohmann::json& dst, const char* key, const std::optional<double>& v) {
    if (v) dst[key] = *v;
  };
  putw(w, "render", a.w_render);
  putw(w, "scale", a.w_scale);
  putw(w, "center", a.w_center);
  putw(w, "geo", a.w_geo);
  putw(w, "vote", a.w_vote);
  putw(w, "dssim", a.w_dssim);
  putw(l, "joints", a.lr_joints);
  putw(l, "part_model", a.lr_part_model);
  putw(l, "seg_logits", a.lr_seg_logits);
  putw(l, "gaussians", a.lr_gaussians);
  if (!w.empty()) o["weights"] = w;
  if (!l.empty()) o["lrs"] = l;
  return FitConfig::from_json(o, cfg);
}

int cmd_fit(const Common& c, const FitArgs& a) {
  FitConfig cfg = fit_config(c, a);
  const fs::path in(a.input);
  for (const char* name : {"state_t0.ply", "state_t1.ply"})
    if (!fs::exists(in / name)) throw IoError("missing input file " + (in / name).string());
  TwoStateInput input;
  input.gaussians_t0 = load_gaussians(in / "state_t0.ply");
  input.gaussians_t1 = load_gaussians(in / "state_t1.ply");
  std::vector<StateObservation> views;
  if (!a.views.empty()) views = load_views(a.views);

  const fs::path out = prepare_out(c);
  if (cfg.loss_log.empty()) cfg.loss_log = out / "loss_log.jsonl";
  if (cfg.checkpoint_every > 0 && cfg.checkpoint_dir.empty()) cfg.checkpoint_dir = out / "checkpoints";
  write_json(out / "config.json", cfg.to_json());

  const auto start = std::chrono::steady_clock::now();
  FitResult res = fit(input, cfg, views);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_scene(res.initial, out / "initial_scene.json");
  save_scene(res.scene, out / "scene.json");
  write_json(out / "init_report.json", res.init_report);
  nlohmann::json summary = {{"iterations", cfg.iterations},
                            {"seconds", secs},
                            {"final_loss", res.history.empty() ? nlohmann::json(nullptr)
                                                               : res.history.back().to_json()}};
  write_json(out / "fit_summary.json", summary);
  std::cout << fmt::format("fit: {} iterations in {:.1f} s, wrote {}\n", cfg.iterations, secs,
                           (out / "scene.json").string());
  return 0;
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  std::string scene = "scene.json";
  std::string gt = "gt.json";
  std::string points;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  const ArticulatedScene scene = load_scene(a.scene);
  const GroundTruth gt = GroundTruth::from_json(read_json(a.gt));
  fs::path pts = a.points.empty() ? fs::path(a.gt).parent_path() / "state_t0.ply" : fs::path(a.points);
  std::optional<std::vector<Vector3d>> truth_points;
  if (fs::exists(pts)) {
    truth_points = centers_of(load_gaussians(pts));
  } else if (!a.points.empty()) {
    throw IoError("missing point file " + pts.string());
  }
  const MetricReport rep = evaluate(scene, gt, truth_points ? &*truth_points : nullptr);
  const fs::path out = prepare_out(c);
  write_json(out / "metrics.json", rep.to_json());
  std::cout << rep.to_json().dump(2) << "\n";
  return 0;
}

// mesh -----------------------------------------------------------------------

struct MeshArgs {
  std::string scene = "scene.json";
  std::vector<double> states{0.0, 0.5, 1.0};
  double voxel = 0.04;
  int size = 160;
  std::string cameras;
};

int cmd_mesh(const Common& c, const MeshArgs& a) {
  const ArticulatedScene scene = load_scene(a.scene);
  std::vector<Camera> cams;
  if (!a.cameras.empty()) cams = load_cameras(a.cameras);
  MeshOptions opts;
  opts.voxel = a.voxel;
  opts.width = opts.height = a.size;
  const fs::path out = prepare_out(c);
  for (double t : a.states) {
    const ExtractedMeshes m = extract_part_meshes(scene, t, cams, opts);
    const double tc = clamp_state(t);
    for (const auto& p : m.parts) {
      if (p.mesh.empty()) {
        spdlog::warn("mesh: part {} produced no surface at t={}", p.part, tc);
        continue;
      }
      write_obj(out / part_mesh_name(p.part, tc), p.mesh);
    }
    write_obj(out / whole_mesh_name(tc), m.whole);
    std::cout << fmt::format("t={}: {} part meshes, whole {} triangles\n", format_state(tc),
                             m.parts.size(), m.whole.triangles.size());
  }
  return 0;
}

// render ---------------------------------------------------------------------

struct RenderArgs {
  std::string scene = "scene.json";
  std::string cameras;
  double t = 0.5;
};

int cmd_render(const Common& c, const RenderArgs& a) {
  const ArticulatedScene scene = load_scene(a.scene);
  const std::vector<Camera> cams = load_cameras(a.cameras);
  bool clamped = false;
  const double t = clamp_state(a.t, &clamped);
  if (clamped) spdlog::warn("render: state clamped to {}", t);
  const fs::path out = prepare_out(c);
  for (std::size_t v = 0; v < cams.size(); ++v)
    write_render_maps(out, fmt::format("view_{:02d}", v), render(scene, cams[v], t));
  std::cout << fmt::format("rendered {} views at t={}\n", cams.size(), format_state(t));
  return 0;
}

int report(const char* kind, const std::exception& e, int code) {
  nlohmann::json err = {{"error", kind}, {"message", e.what()}};
  std::cerr << err.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Articulated object reconstruction from two observed states"};
  app.require_subcommand(1);

  Common common;
  GenArgs gen;
  FitArgs fita;
  EvalArgs eval;
  MeshArgs mesh;
  RenderArgs rend;

  auto* g = app.add_subcommand("gen", "generate a synthetic two-state scene");
  add_common(g, common);
  g->add_option("--kind", gen.kind, "hinge | drawer | screw | cabinet");
  g->add_option("--k", gen.k, "number of parts");
  g->add_option("--theta-total", gen.theta_total, "total rotation in degrees");
  g->add_option("--translation", gen.translation, "total translation");
  g->add_option("--noise", gen.noise, "position noise per state");
  g->add_option("--n-gaussians", gen.n_gaussians, "splats per state");
  g->add_option("--views", gen.views, "rendered views per state (for render mode)");
  g->add_option("--view-size", gen.view_size, "view resolution in pixels");

  auto* f = app.add_subcommand("fit", "initialize and optimize an articulated scene");
  add_common(f, common);
  f->add_option("--input", fita.input, "directory with state_t0.ply and state_t1.ply");
  f->add_option("--views", fita.views, "view manifest JSON for the image terms");
  f->add_option("--profile", fita.profile, "base settings: geometry | default");
  f->add_option("--k", fita.k);
  f->add_option("--mode", fita.mode, "geometry | render");
  f->add_option("--iterations", fita.iterations);
  f->add_option("--fd-step", fita.fd_step);
  f->add_option("--vote-refresh", fita.vote_refresh);
  f->add_option("--knn-k", fita.knn_k);
  f->add_option("--beta", fita.beta);
  f->add_option("--temperature", fita.temperature);
  f->add_option("--tau", fita.tau);
  f->add_option("--lr-floor", fita.lr_floor);
  f->add_option("--joint-warmup", fita.joint_warmup);
  f->add_option("--checkpoint-every", fita.checkpoint_every);
  f->add_option("--weight-render", fita.w_render);
  f->add_option("--weight-scale", fita.w_scale);
  f->add_option("--weight-center", fita.w_center);
  f->add_option("--weight-geo", fita.w_geo);
  f->add_option("--weight-vote", fita.w_vote);
  f->add_option("--weight-dssim", fita.w_dssim);
  f->add_option("--lr-joints", fita.lr_joints);
  f->add_option("--lr-part-model", fita.lr_part_model);
  f->add_option("--lr-seg-logits", fita.lr_seg_logits);
  f->add_option("--lr-gaussians", fita.lr_gaussians);

  auto* e = app.add_subcommand("eval", "joint and Chamfer metrics against ground truth");
  add_common(e, common);
  e->add_option("--scene", eval.scene, "scene JSON");
  e->add_option("--gt", eval.gt, "ground-truth JSON");
  e->add_option("--points", eval.points, "state-0 splats aligned with the labels");

  auto* m = app.add_subcommand("mesh", "part meshes by depth fusion");
  add_common(m, common);
  m->add_option("--scene", mesh.scene, "scene JSON");
  m->add_option("--t", mesh.states, "states to extract")->delimiter(',');
  m->add_option("--voxel", mesh.voxel, "TSDF voxel size");
  m->add_option("--size", mesh.size, "depth map resolution");
  m->add_option("--cameras", mesh.cameras, "camera JSON (default: 26-view rig)");

  auto* r = app.add_subcommand("render", "render maps of a scene");
  add_common(r, common);
  r->add_option("--scene", rend.scene, "scene JSON");
  r->add_option("--cameras", rend.cameras, "camera JSON")->required();
  r->add_option("--t", rend.t, "state in [0, 1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    set_max_threads(common.threads);
    if (g->parsed()) return cmd_gen(common, gen);
    if (f->parsed()) return cmd_fit(common, fita);
    if (e->parsed()) return cmd_eval(common, eval);
    if (m->parsed()) return cmd_mesh(common, mesh);
    if (r->parsed()) return cmd_render(common, rend);
  } catch (const ParseError& err) {
    return report("parse", err, 2);
  } catch (const IoError& err) {
    return report("io", err, 3);
  } catch (const InvariantError& err) {
    return report("invariant", err, 4);
  } catch (const ContractError& err) {
    return report("contract", err, 5);
  } catch (const NumericError& err) {
    return report("numeric", err, 6);
  } catch (const std::exception& err) {
    return report("internal", err, 1);
  }
  return 1;
}
