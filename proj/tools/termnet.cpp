// termnet command-line front end.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "termnet/pipeline.hpp"
#include "termnet/synthgen.hpp"

namespace fs = std::filesystem;
using namespace termnet;

namespace {

struct Options {
  std::string config;
  std::string task;
  std::string horizon;
  std::string profile = "paper";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "out";
  std::string ticks;
  // synth
  int days = 30;
  double beta = 0.0;
  double noise_sd = 0.0;
  // backtest / ablate
  std::string baselines = "NAIVE";
  std::string tasks = "RETURN,VOLATILITY,VOLUME";
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : split_csv(s))
    if (!part.empty()) out.emplace_back(part);
  return out;
}

RunConfig resolve_config(const Options& o) {
  RunConfig c = profile_by_name(o.profile);
  if (!o.config.empty()) c = run_config_from_json(read_file(o.config), c);
  if (!o.task.empty()) c.task = parse_quantity(o.task);
  if (!o.horizon.empty()) c.horizon = parse_horizon(o.horizon);
  if (o.seed_set) c.seed = o.seed;
  return c;
}

std::string ticks_path(const Options& o) { return o.ticks.empty() ? (fs::path(o.out) / "ticks.csv").string() : o.ticks; }

std::vector<TickEvent> load(const Options& o) {
  const auto res = load_ticks(ticks_path(o));
  std::cerr << "loaded " << res.events.size() << " events (" << res.malformed_rows << " malformed, "
            << res.zero_liquidity_rows << " zero-liquidity)\n";
  return res.events;
}

int cmd_synth(const Options& o) {
  SynthConfig s;
  s.n_days = o.days;
  s.seed = o.seed_set ? o.seed : 1;
  if (!o.config.empty()) {
    const auto j = nlohmann::json::parse(read_file(o.config));
    if (j.contains("synth")) {
      const auto& js = j["synth"];
      s.n_days = js.value("n_days", s.n_days);
      s.factor_correlation = js.value("factor_correlation", s.factor_correlation);
      s.vol_persistence = js.value("vol_persistence", s.vol_persistence);
      s.vol_state_sd = js.value("vol_state_sd", s.vol_state_sd);
      s.common_vol_share = js.value("common_vol_share", s.common_vol_share);
      s.volume_elasticity = js.value("volume_elasticity", s.volume_elasticity);
      s.wide_probability = js.value("wide_probability", s.wide_probability);
      for (const auto& c : js.value("couplings", nlohmann::json::array()))
        s = plant_predictability(s, InstrumentId::parse(c.at("source").get<std::string>()),
                                 InstrumentId::parse(c.at("target").get<std::string>()), c.value("beta", 0.0),
                                 parse_quantity(c.value("quantity", std::string("VOLATILITY"))),
                                 c.value("noise_sd", 0.0));
    }
  }
  if (o.beta != 0.0)
    s = plant_predictability(s, {InstrumentClass::ES, 1}, {InstrumentClass::VX, 1}, o.beta, Quantity::VOLATILITY,
                             o.noise_sd);
  const auto r = generate(s);
  write_synthetic(s, r, o.out);
  std::cout << "wrote " << r.events.size() << " events to " << (fs::path(o.out) / "ticks.csv").string() << '\n';
  return 0;
}

int cmd_features(const Options& o) {
  const RunConfig run = resolve_config(o);
  const Dataset ds = build_dataset(load(o), run);
  export_panel(ds.panel, fs::path(o.out) / "panel");
  export_features(ds.data.features, fs::path(o.out) / "features");
  std::cout << ds.data.features.n_rows() << " rows, " << ds.panel.n_minutes() << " minutes -> "
            << (fs::path(o.out) / "features").string() << '\n';
  return 0;
}

int cmd_graphs(const Options& o) {
  const RunConfig run = resolve_config(o);
  const Dataset ds = build_dataset(load(o), run);
  auto usable = usable_rows(ds, run);
  if (usable.size() > run.lookback) usable.resize(run.lookback);
  const auto graphs = build_run_graphs(ds, run, usable);
  const fs::path dir = fs::path(o.out) / "graphs";
  fs::create_directories(dir);
  std::vector<GraphStats> stats;
  for (const auto& g : graphs) {
    export_graph(g, GraphFormat::DOT, dir / (g.config.name() + ".dot"));
    export_graph(g, GraphFormat::JSON, dir / (g.config.name() + ".json"));
    stats.push_back(graph_stats(g));
  }
  write_graph_stats_csv(stats, dir / "graph_stats.csv");
  for (const auto& s : stats)
    std::cout << s.name << ": +" << s.positive_edges << " -" << s.negative_edges << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const RunConfig run = resolve_config(o);
  const Dataset ds = build_dataset(load(o), run);
  TrainedModel t = train_initial_model(run, ds);
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / "model.json";
  save_model(t.model, path);
  std::cout << "epochs " << t.epoch_loss.size() << ", final loss "
            << (t.epoch_loss.empty() ? std::string("n/a") : format_double(t.epoch_loss.back())) << " -> "
            << path.string() << '\n';
  return 0;
}

int cmd_backtest(const Options& o) {
  const RunConfig run = resolve_config(o);
  const auto baselines = split_list(o.baselines);
  const BacktestReport rep = run_backtest(run, load(o), baselines);
  const auto files = emit_report(rep, o.out);
  std::cout << "fingerprint " << rep.fingerprint << (rep.low_power ? " (low power: < 100 evaluation rows)" : "")
            << '\n';
  for (const auto& m : rep.methods)
    for (const auto& r : m.rows)
      if (r.product == "ES_1" || r.product == "VX_1")
        std::cout << m.method << ' ' << r.product << ' ' << r.metric << ' ' << format_double(r.value) << '\n';
  std::cout << files.size() << " files written to " << o.out << '\n';
  return 0;
}

int cmd_ablate(const Options& o) {
  const RunConfig run = resolve_config(o);
  std::vector<Quantity> tasks;
  for (const auto& t : split_list(o.tasks)) tasks.push_back(parse_quantity(t));
  const auto events = load(o);
  const AblationTable table = run_ablation(run, events, tasks);
  Fnv1a h;
  h.update(run_config_to_json(run));
  h.update(o.tasks);
  h.update(build_dataset(events, run).data_hash);
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / ("ablation_" + h.hex() + ".csv");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << ablation_csv(table);
  std::cout << ablation_csv(table) << "-> " << path.string() << '\n';
  return 0;
}

int cmd_report(const Options& o) {
  if (!fs::is_directory(o.out)) throw IoError(o.out + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.out)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("metrics_") && name.ends_with(".csv")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::ostringstream summary;
  summary << "file,product,metric_1,metric_2\n";
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string header, line;
    std::getline(in, header);
    std::cout << "== " << f.filename().string() << "  [" << header << "]\n";
    while (std::getline(in, line)) {
      const auto cells = split_csv(line);
      if (cells.size() < 3) continue;
      std::cout << "  " << line << '\n';
      summary << f.filename().string() << ',' << cells[0] << ',' << cells[1] << ',' << cells[2] << '\n';
    }
  }
  std::ofstream out(fs::path(o.out) / "summary.csv");
  if (!out) throw IoError("cannot write summary.csv");
  out << summary.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"termnet: multi-graph GCN-LSTM forecasting for futures term structures"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file");
    sub->add_option("--task", o.task, "RETURN, VOLATILITY or VOLUME");
    sub->add_option("--horizon", o.horizon, "1h, 3h, 4h, 6h or 1d");
    sub->add_option("--profile", o.profile, "paper or desk")->check(CLI::IsMember({"paper", "desk"}));
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { o.seed = s, o.seed_set = true; }, "random seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--ticks", o.ticks, "tick CSV (default <out>/ticks.csv)");
  };
  auto* synth = app.add_subcommand("synth", "generate a synthetic tick stream with ground truth");
  common(synth);
  synth->add_option("--days", o.days, "number of days");
  synth->add_option("--beta", o.beta, "planted ES_1 -> VX_1 next-hour log-variance coupling");
  synth->add_option("--noise-sd", o.noise_sd, "extra log-variance noise on the coupled node");
  auto* features = app.add_subcommand("features", "build the minute panel and feature matrices");
  common(features);
  auto* graphs = app.add_subcommand("graphs", "build the channel graphs on the first training window");
  common(graphs);
  auto* train = app.add_subcommand("train", "fit the model on the first training window and save it");
  common(train);
  auto* backtest = app.add_subcommand("backtest", "rolling-window training and evaluation");
  common(backtest);
  backtest->add_option("--baselines", o.baselines, "comma list of NAIVE, LSTM, ANN, OLS, LASSO, PCR");
  auto* ablate = app.add_subcommand("ablate", "run the nine-configuration ablation grid");
  common(ablate);
  ablate->add_option("--tasks", o.tasks, "comma list of tasks");
  auto* report = app.add_subcommand("report", "summarise metrics files in --out");
  common(report);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(o);
    if (*features) return cmd_features(o);
    if (*graphs) return cmd_graphs(o);
    if (*train) return cmd_train(o);
    if (*backtest) return cmd_backtest(o);
    if (*ablate) return cmd_ablate(o);
    if (*report) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
