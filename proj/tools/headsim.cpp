// Command-line front end: simulate, evaluate, responsiveness, ablate,
// ingest-ucy, validate-scene.
//
// Failures print one JSON object on stderr ({"error", "field", "message"})
// and exit nonzero: 2 for bad input, 1 for anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "headsim/headsim.hpp"

namespace fs = std::filesystem;
using namespace headsim;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed{1};
  std::string out;
  std::string backend{"oracle"};
  std::string templates;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Engine config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Seed for all randomness");
  app->add_option("--out", c.out, "Output path");
  app->add_option("--backend", c.backend, "oracle or remote")->check(CLI::IsMember({"oracle", "remote"}));
  app->add_option("--templates", c.templates, "Directory of prompt templates (<role>.txt)");
}

EngineConfig engine_config(const Common& c, const CLI::App* app) {
  EngineConfig cfg = c.config.empty() ? EngineConfig{} : load_config(c.config);
  if (app->count("--seed") > 0) cfg.seed = c.seed;
  return cfg;
}

/// Owns the remote backend, if any, for the lifetime of a command.
struct BackendHolder {
  std::unique_ptr<RemoteBackend> remote;
  std::unique_ptr<RemoteRelevanceScorer> scorer;
  Backends handles;

  explicit BackendHolder(const Common& c) {
    if (c.backend != "remote") return;
    auto opts = RemoteOptions::from_environment();
    if (!opts) throw SchemaError("HEADSIM_BACKEND_URL", "remote backend selected but the variable is not set");
    if (!c.templates.empty()) opts->templates.load_directory(c.templates);
    remote = std::make_unique<RemoteBackend>(*opts);
    scorer = std::make_unique<RemoteRelevanceScorer>(*opts);
    handles = {remote.get(), remote.get(), remote.get(), scorer.get()};
  }
};

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t runs) {
  std::vector<std::uint64_t> s;
  for (std::size_t i = 0; i < runs; ++i) s.push_back(first + i);
  return s;
}

const TrajectoryRecord& pick_trajectory(const SceneFile& f, const std::string& agent) {
  if (f.trajectories.empty()) throw SchemaError("trajectories", "scene has no trajectory");
  if (agent.empty()) return f.trajectories.front();
  if (const auto* t = f.trajectory(agent)) return *t;
  throw SchemaError("agent", "no trajectory for agent '" + agent + "'");
}

std::ostream& output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw SchemaError("out", "cannot write '" + path + "'");
  return file;
}

void write_tables(const std::string& out, const std::string& plot, const std::vector<TableRow>& rows,
                  const std::string& title) {
  std::ofstream file;
  write_table_csv(output(out, file), rows);
  if (!plot.empty()) {
    std::ofstream svg(plot, std::ios::binary);
    if (!svg) throw SchemaError("plot", "cannot write '" + plot + "'");
    write_table_svg(svg, rows, title);
  }
}

void print_error(const std::string& kind, const std::string& field, const std::string& message) {
  json j{{"error", kind}, {"field", field}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate and evaluate pedestrian head motion"};
  app.require_subcommand(1);

  // simulate
  Common sim;
  std::string sim_scene, sim_live, sim_agent, sim_toggle, sim_memory;
  bool sim_all = false;
  auto* simulate = app.add_subcommand("simulate", "Plan and execute head motion along a trajectory");
  add_common(simulate, sim);
  simulate->add_option("--scene", sim_scene, "Scene the planner sees")->required()->check(CLI::ExistingFile);
  simulate->add_option("--live", sim_live, "Scene at execution time (defaults to --scene)")->check(CLI::ExistingFile);
  simulate->add_option("--agent", sim_agent, "Trajectory to follow (defaults to the first)");
  simulate->add_option("--toggle", sim_toggle, "Ablation toggle to apply");
  simulate->add_option("--memory-log", sim_memory, "Write the final memory as JSON lines");
  simulate->add_flag("--all-agents", sim_all, "Run every trajectory; --out names a directory");

  // evaluate
  Common ev;
  std::vector<std::string> ev_refs, ev_cands;
  std::string ev_pairing = "auto", ev_plot;
  auto* evaluate = app.add_subcommand("evaluate", "Score candidate traces against references with DTW");
  add_common(evaluate, ev);
  evaluate->add_option("--reference", ev_refs, "Reference trace files")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--candidate", ev_cands, "Candidate trace files")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--pairing", ev_pairing, "auto, matched or scenario")
      ->check(CLI::IsMember({"auto", "matched", "scenario"}));
  evaluate->add_option("--plot", ev_plot, "Also write an SVG chart");

  // responsiveness
  Common rs;
  std::string rs_mdc, rs_apc, rs_plot;
  std::vector<std::string> rs_refs;
  std::size_t rs_runs = 5;
  auto* responsiveness = app.add_subcommand("responsiveness", "MDC-MDC / MDC-APC / APC-APC comparison");
  add_common(responsiveness, rs);
  responsiveness->add_option("--mdc", rs_mdc, "MDC scene")->required()->check(CLI::ExistingFile);
  responsiveness->add_option("--apc", rs_apc, "APC scene")->required()->check(CLI::ExistingFile);
  responsiveness->add_option("--reference", rs_refs, "Reference traces (defaults to the APC-APC runs)")
      ->check(CLI::ExistingFile);
  responsiveness->add_option("--runs", rs_runs, "Seeded runs per condition, starting at --seed");
  responsiveness->add_option("--plot", rs_plot, "Also write an SVG chart");

  // ablate
  Common ab;
  std::vector<std::string> ab_scenes, ab_toggles, ab_refs;
  std::string ab_plot;
  std::size_t ab_runs = 5;
  auto* ablate = app.add_subcommand("ablate", "Run ablation toggles against full-model or given references");
  add_common(ablate, ab);
  ablate->add_option("--scene", ab_scenes, "Scene files")->required()->check(CLI::ExistingFile);
  ablate->add_option("--toggle", ab_toggles, "Toggles to run (defaults to all)");
  ablate->add_option("--reference", ab_refs, "Reference traces, matched to scenes by scenario name")
      ->check(CLI::ExistingFile);
  ablate->add_option("--runs", ab_runs, "Seeded runs per toggle, starting at --seed");
  ablate->add_option("--plot", ab_plot, "Also write an SVG chart");

  // ingest-ucy
  Common ig;
  std::string ig_annotation, ig_template, ig_traces;
  auto* ingest = app.add_subcommand("ingest-ucy", "Convert a UCY spline annotation into a scene file");
  add_common(ingest, ig);
  ingest->add_option("--annotation", ig_annotation, "Annotation file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--template", ig_template, "Scene template (JSON)")->check(CLI::ExistingFile);
  ingest->add_option("--traces", ig_traces, "Directory for ground-truth head traces");

  // validate-scene
  Common vs;
  std::string vs_scene;
  auto* validate = app.add_subcommand("validate-scene", "Check a scene file against the schema");
  add_common(validate, vs);
  validate->add_option("--scene", vs_scene, "Scene file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("usage", "", e.what());
    return 2;
  }

  try {
    if (simulate->parsed()) {
      EngineConfig cfg = engine_config(sim, simulate);
      if (!sim_toggle.empty()) cfg = find_toggle(sim_toggle).apply(cfg);
      BackendHolder backends(sim);
      const SceneFile plan_file = load_scene(sim_scene);
      const SceneFile live_file = sim_live.empty() ? plan_file : load_scene(sim_live);
      const std::string condition(condition_name(live_file.scene.condition));
      if (sim_all) {
        if (sim.out.empty()) throw SchemaError("out", "--all-agents needs an output directory");
        fs::create_directories(sim.out);
        std::map<std::string, BodyTrajectory> agents;
        for (const auto& t : live_file.trajectories) agents.emplace(t.agent, t.trajectory);
        const auto results = run_multi(live_file.scene, agents, cfg, backends.handles);
        std::size_t i = 0;
        for (const auto& [id, r] : results) {
          save_trace((fs::path(sim.out) / (id + ".csv")).string(),
                     make_trace_file(r.trace.ticks, id, live_file.scene.name, condition, cfg.seed + i++, cfg.tick));
        }
      } else {
        const TrajectoryRecord& traj = pick_trajectory(live_file, sim_agent);
        const PipelineResult r = run_pipeline(plan_file.scene, live_file.scene, traj.trajectory, cfg, backends.handles);
        std::ofstream file;
        write_trace(output(sim.out, file),
                    make_trace_file(r.trace.ticks, traj.agent, live_file.scene.name, condition, cfg.seed, cfg.tick));
        if (!sim_memory.empty()) {
          std::ofstream mem(sim_memory, std::ios::binary);
          if (!mem) throw SchemaError("memory-log", "cannot write '" + sim_memory + "'");
          write_memory_log(mem, r.trace.memory.empty() ? r.plan.memory : r.trace.memory);
        }
        for (const auto& d : r.plan.diagnostics) std::cerr << json{{"warning", d}}.dump() << '\n';
        if (r.plan.aborted) {
          print_error("backend", "", "planning aborted; partial trace written");
          return 1;
        }
      }
    } else if (evaluate->parsed()) {
      std::vector<TraceFile> refs, cands;
      for (const auto& p : ev_refs) refs.push_back(load_trace(p));
      for (const auto& p : ev_cands) cands.push_back(load_trace(p));
      // One score per candidate: its mean DTW over the matched references
      // (same scenario and agent) or, failing that, every reference in the scenario.
      std::map<std::pair<std::string, std::string>, std::vector<double>> scores;
      std::map<std::pair<std::string, std::string>, std::vector<std::uint64_t>> seeds;
      for (const auto& c : cands) {
        std::vector<HeadTrace> matched, scenario;
        for (const auto& r : refs) {
          if (r.scenario != c.scenario) continue;
          scenario.push_back(r.head_trace());
          if (r.agent == c.agent) matched.push_back(r.head_trace());
        }
        const std::vector<HeadTrace>* use = nullptr;
        if (ev_pairing == "matched") use = &matched;
        else if (ev_pairing == "scenario") use = &scenario;
        else use = matched.empty() ? &scenario : &matched;
        if (use->empty()) throw SchemaError("reference", "no reference trace for scenario '" + c.scenario + "'");
        const auto key = std::make_pair(c.scenario, c.condition);
        scores[key].push_back(mean_dtw(c.orientations(), *use));
        seeds[key].push_back(c.seed);
      }
      std::vector<TableRow> rows;
      for (const auto& [key, s] : scores) rows.push_back(summarize(key.first, "candidate", key.second, s, seeds[key]));
      write_tables(ev.out, ev_plot, rows, "normalized DTW");
    } else if (responsiveness->parsed()) {
      const EngineConfig cfg = engine_config(rs, responsiveness);
      BackendHolder backends(rs);
      const SceneFile mdc = load_scene(rs_mdc), apc = load_scene(rs_apc);
      ScenarioCase sc{apc.scene.name, mdc.scene, apc.scene, pick_trajectory(apc, "").trajectory};
      std::vector<HeadTrace> refs;
      for (const auto& p : rs_refs) refs.push_back(load_trace(p).head_trace());
      const auto res = responsiveness_matrix(sc, refs, cfg, seed_range(cfg.seed, rs_runs), backends.handles);
      write_tables(rs.out, rs_plot, res.rows, "responsiveness: normalized DTW");
    } else if (ablate->parsed()) {
      const EngineConfig cfg = engine_config(ab, ablate);
      BackendHolder backends(ab);
      std::vector<Toggle> toggles;
      if (ab_toggles.empty()) toggles = ablation_toggles();
      for (const auto& k : ab_toggles) toggles.push_back(find_toggle(k));
      std::vector<AblationCase> cases;
      for (const auto& p : ab_scenes) {
        const SceneFile f = load_scene(p);
        cases.push_back({f.scene.name, f.scene, f.scene, pick_trajectory(f, "").trajectory});
      }
      std::map<std::string, std::vector<HeadTrace>> refs;
      for (const auto& p : ab_refs) {
        const TraceFile t = load_trace(p);
        refs[t.scenario].push_back(t.head_trace());
      }
      const auto res = ablation_suite(cases, toggles, cfg, seed_range(cfg.seed, ab_runs), refs, backends.handles);
      write_tables(ab.out, ab_plot, res.rows, "ablation: normalized DTW");
    } else if (ingest->parsed()) {
      UcyTemplate tpl;
      if (!ig_template.empty()) tpl = parse_ucy_template(parse_json_text(read_text(ig_template), ig_template));
      std::ifstream in(ig_annotation, std::ios::binary);
      const UcyIngest r = ingest_ucy(in, tpl);
      for (const auto& w : r.warnings) std::cerr << json{{"warning", w}}.dump() << '\n';
      if (ig.out.empty()) {
        std::cout << scene_to_json(r.scene).dump(2) << '\n';
      } else {
        save_scene(ig.out, r.scene);
      }
      if (!ig_traces.empty()) {
        fs::create_directories(ig_traces);
        for (const auto& [id, h] : r.head_traces) {
          const auto& times = r.head_times.at(id);
          std::vector<TickRecord> ticks;
          for (std::size_t k = 0; k < h.samples.size(); ++k) {
            TickRecord tr;
            tr.t = times[k];
            tr.head = h.samples[k];
            ticks.push_back(tr);
          }
          TraceFile tf = make_trace_file(ticks, id, h.scenario, "external", 0, h.tick);
          for (auto& row : tf.rows) row.phase.clear();
          save_trace((fs::path(ig_traces) / (id + ".csv")).string(), tf);
        }
      }
    } else if (validate->parsed()) {
      const SceneFile f = load_scene(vs_scene);
      std::size_t n = 0;
      f.scene.for_each_entity([&](const Entity&) { ++n; });
      std::cout << json{{"ok", true}, {"entities", n}, {"trajectories", f.trajectories.size()}}.dump() << '\n';
    }
  } catch (const SchemaError& e) {
    print_error("schema", e.field(), e.what());
    return 2;
  } catch (const OutOfBounds& e) {
    print_error("out_of_bounds", "", e.what());
    return 1;
  } catch (const ContractViolation& e) {
    print_error("contract", "", e.what());
    return 1;
  } catch (const BackendError& e) {
    print_error("backend", "", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", "", e.what());
    return 1;
  }
  return 0;
}
