#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "uqkit/uqkit.h"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

// ---- errors and exit codes ------------------------------------------------

struct CliError {
  int exit_code;
  std::string kind;
  std::string message;
};

int exit_for(uq_status s) {
  switch (s) {
    case UQ_OK: return 0;
    case UQ_ERR_CONFIG: return 2;
    case UQ_ERR_DATA: return 3;
    case UQ_ERR_NUMERIC: return 4;
    case UQ_ERR_TASK_MISMATCH: return 5;
    case UQ_ERR_UNREACHABLE: return 6;
    default: return 1;
  }
}

[[noreturn]] void config_error(const std::string& msg) { throw CliError{2, "ConfigError", msg}; }
[[noreturn]] void io_error(const std::string& msg) { throw CliError{3, "IoError", msg}; }

void check(uq_status s) {
  if (s != UQ_OK) throw CliError{exit_for(s), uq_last_error_kind(), uq_last_error_message()};
}

// ---- logging ---------------------------------------------------------------

int g_log_level = 1;  // 0 error, 1 warn, 2 info, 3 debug

void init_logging() {
  const char* env = std::getenv("UQKIT_LOG");
  if (env == nullptr || *env == '\0') return;
  const std::string v = env;
  if (v == "error") g_log_level = 0;
  else if (v == "warn") g_log_level = 1;
  else if (v == "info") g_log_level = 2;
  else if (v == "debug") g_log_level = 3;
  else std::cerr << "uqkit warn: ignoring unknown UQKIT_LOG level '" << v << "'\n";
}

void log(int level, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= g_log_level) std::cerr << "uqkit " << names[level] << ": " << msg << "\n";
}

// ---- RAII over C handles and strings -----------------------------------------

struct StrDel {
  void operator()(char* s) const { uq_string_free(s); }
};
struct DataDel {
  void operator()(uq_dataset* d) const { uq_dataset_free(d); }
};
struct ModelDel {
  void operator()(uq_model* m) const { uq_model_free(m); }
};
struct PredDel {
  void operator()(uq_prediction* p) const { uq_prediction_free(p); }
};
using DataPtr = std::unique_ptr<uq_dataset, DataDel>;
using ModelPtr = std::unique_ptr<uq_model, ModelDel>;
using PredPtr = std::unique_ptr<uq_prediction, PredDel>;

std::string take(char* s) {
  std::unique_ptr<char, StrDel> guard(s);
  return s ? std::string(s) : std::string();
}

// ---- files -----------------------------------------------------------------

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) io_error("cannot open '" + p.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) io_error("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }
  const fs::path& path() const { return dir_; }

  void write(const std::string& name, const std::string& text) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) io_error("cannot write '" + (dir_ / name).string() + "'");
    out << text;
    if (!out) io_error("write to '" + (dir_ / name).string() + "' failed");
    record(name);
  }
  void write_json(const std::string& name, const Json& j) { write(name, j.dump(1) + "\n"); }
  void record(const std::string& name) {
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
  }
  // Written last; lists every file the command produced (itself excluded).
  void finish(const std::string& command) {
    const Json manifest{{"command", command}, {"files", files_}};
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    if (!out) io_error("cannot write manifest");
    out << manifest.dump(1) << "\n";
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

// ---- run config -------------------------------------------------------------

const std::set<std::string> kConfigKeys = {"task",  "n_classes", "target_column", "train",       "test",
                                           "calibration", "algorithm_id", "params", "grid", "seed",
                                           "standardize", "metrics", "curves", "scorer", "folds", "report"};

struct RunConfig {
  Json raw = Json::object();
  fs::path base_dir = ".";

  bool has(const char* key) const { return raw.contains(key); }

  std::optional<fs::path> path(const char* key) const {
    if (!has(key)) return std::nullopt;
    if (!raw.at(key).is_string()) config_error(std::string("'") + key + "' must be a path string");
    fs::path p = raw.at(key).get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  }
  template <typename T>
  std::optional<T> get(const char* key) const {
    if (!has(key)) return std::nullopt;
    try {
      return raw.at(key).get<T>();
    } catch (const Json::exception&) {
      config_error(std::string("config key '") + key + "' has the wrong type");
    }
  }
};

RunConfig load_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  std::string text;
  try {
    text = read_file(path);
  } catch (const CliError& e) {
    config_error("config file: " + e.message);
  }
  try {
    rc.raw = Json::parse(text);
  } catch (const Json::exception& e) {
    config_error("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!rc.raw.is_object()) config_error("config file must hold a JSON object");
  for (const auto& [key, _] : rc.raw.items())
    if (!kConfigKeys.count(key)) config_error("config: unknown key '" + key + "'");
  rc.base_dir = fs::path(path).parent_path();
  if (rc.base_dir.empty()) rc.base_dir = ".";
  return rc;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string list_option(const RunConfig& rc, const char* key, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (!rc.has(key)) return {};
  const Json& v = rc.raw.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (!v.is_array()) config_error(std::string("'") + key + "' must be a list of names");
  std::vector<std::string> names;
  for (const auto& n : v) {
    if (!n.is_string()) config_error(std::string("'") + key + "' must be a list of names");
    names.push_back(n.get<std::string>());
  }
  return join(names);
}

struct Common {
  std::string config;
  std::string out;
  std::string data;
  std::string target_column;
  std::optional<uint64_t> seed;
};

std::string target_of(const Common& c, const RunConfig& rc) {
  if (!c.target_column.empty()) return c.target_column;
  return rc.get<std::string>("target_column").value_or("y");
}

fs::path data_path(const Common& c, const RunConfig& rc, const char* key) {
  if (!c.data.empty()) return c.data;
  if (auto p = rc.path(key)) return *p;
  config_error(std::string("no data file: pass --data or set '") + key + "' in the config");
}

uint64_t seed_of(const Common& c, const RunConfig& rc) {
  if (c.seed) return *c.seed;
  return rc.get<uint64_t>("seed").value_or(0);
}

std::string task_of(const RunConfig& rc) {
  const auto t = rc.get<std::string>("task");
  if (!t) config_error("config needs 'task' (regression or classification)");
  return *t;
}

Json estimator_json(const RunConfig& rc) {
  const auto id = rc.get<std::string>("algorithm_id");
  if (!id) config_error("config needs 'algorithm_id'");
  Json j{{"algorithm_id", *id}, {"params", rc.has("params") ? rc.raw.at("params") : Json::object()}};
  if (rc.has("standardize")) j["standardize"] = rc.raw.at("standardize");
  return j;
}

DataPtr read_training_data(const Common& c, const RunConfig& rc, const char* key) {
  const std::string task = task_of(rc);
  uq_dataset* d = nullptr;
  const fs::path p = data_path(c, rc, key);
  check(uq_dataset_read_csv(p.string().c_str(), target_of(c, rc).c_str(), task.c_str(),
                            rc.get<size_t>("n_classes").value_or(0), &d));
  return DataPtr(d);
}

ModelPtr load_model(const std::string& path) {
  if (path.empty()) config_error("--model is required");
  uq_model* m = nullptr;
  check(uq_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

DataPtr read_model_data(const uq_model* model, const fs::path& path, const std::string& target) {
  uq_dataset* d = nullptr;
  check(uq_model_read_dataset(model, path.string().c_str(), target.c_str(), &d));
  return DataPtr(d);
}

PredPtr predict(const uq_model* model, const uq_dataset* data) {
  uq_prediction* p = nullptr;
  check(uq_model_predict(model, data, &p));
  return PredPtr(p);
}

Json evaluate(const uq_prediction* pred, const uq_dataset* truth, const std::string& metrics) {
  char* out = nullptr;
  check(uq_evaluate(pred, truth, metrics.empty() ? nullptr : metrics.c_str(), &out));
  return Json::parse(take(out));
}

std::vector<std::string> split(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_table(const Json& metrics) {
  std::printf("%-16s %s\n", "metric", "value");
  for (const auto& [name, value] : metrics.items()) std::printf("%-16s %.10g\n", name.c_str(), value.get<double>());
}

// ---- subcommands -----------------------------------------------------------

void cmd_fit(const Common& c) {
  if (c.config.empty()) config_error("fit needs --config");
  const RunConfig rc = load_config(c.config);
  const Json est = estimator_json(rc);
  const uint64_t seed = seed_of(c, rc);
  DataPtr train = read_training_data(c, rc, "train");
  log(2, "fitting " + est.at("algorithm_id").get<std::string>() + " with seed " + std::to_string(seed));

  const auto start = std::chrono::steady_clock::now();
  uq_model* raw = nullptr;
  check(uq_model_fit_json(est.dump().c_str(), train.get(), seed, &raw));
  ModelPtr model(raw);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const Json info = Json::parse(take([&] {
    char* s = nullptr;
    check(uq_model_info_json(model.get(), &s));
    return s;
  }()));
  OutputDir out(c.out);
  check(uq_model_save(model.get(), (out.path() / "model.uqm").string().c_str()));
  out.record("model.uqm");
  size_t rows = 0;
  check(uq_dataset_shape(train.get(), &rows, nullptr));
  out.write_json("fit_log.json", Json{{"algorithm_id", info.at("algorithm_id")},
                                      {"seed", seed},
                                      {"final_objective", info.at("final_objective")},
                                      {"wall_time_seconds", wall},
                                      {"n_train", rows},
                                      {"standardize", info.at("standardized")}});
  out.finish("fit");
  log(2, "model written to " + (out.path() / "model.uqm").string());
}

void cmd_predict(const Common& c, const std::string& model_path) {
  const RunConfig rc = load_config(c.config);
  ModelPtr model = load_model(model_path);
  const fs::path data = data_path(c, rc, "test");
  uq_prediction* raw = nullptr;
  check(uq_model_predict_csv(model.get(), data.string().c_str(), &raw));
  PredPtr pred(raw);
  char* json = nullptr;
  check(uq_prediction_to_json(pred.get(), &json));
  char* csv = nullptr;
  check(uq_prediction_to_csv(pred.get(), &csv));
  OutputDir out(c.out);
  out.write("predictions.json", take(json));
  out.write("predictions.csv", take(csv));
  out.finish("predict");
}

void cmd_evaluate(const Common& c, const std::string& model_path, const std::string& metrics_flag,
                  const std::string& curves_flag) {
  const RunConfig rc = load_config(c.config);
  ModelPtr model = load_model(model_path);
  DataPtr test = read_model_data(model.get(), data_path(c, rc, "test"), target_of(c, rc));
  PredPtr pred = predict(model.get(), test.get());
  const Json metrics = evaluate(pred.get(), test.get(), list_option(rc, "metrics", metrics_flag));
  std::vector<std::pair<std::string, std::string>> curves;
  for (const auto& kind : split(list_option(rc, "curves", curves_flag))) {
    char* s = nullptr;
    check(uq_curve_json(pred.get(), test.get(), kind.c_str(), &s));
    curves.emplace_back(kind + ".json", take(s));
  }
  OutputDir out(c.out);
  out.write_json("metrics.json", metrics);
  for (const auto& [name, text] : curves) out.write(name, text);
  out.finish("evaluate");
  print_table(metrics);
}

std::string comparison_metrics(const uq_prediction* pred) {
  char* s = nullptr;
  check(uq_prediction_to_json(pred, &s));
  return Json::parse(take(s)).at("task") == "regression" ? "picp,mpiw" : "accuracy,ece,brier";
}

void cmd_recalibrate(const Common& c, const std::string& model_path, const std::string& predictions_path,
                     const std::string& method, const std::string& target, const std::string& score,
                     std::optional<size_t> positive_class) {
  const RunConfig rc = load_config(c.config);
  if (model_path.empty() == predictions_path.empty()) config_error("pass exactly one of --model or --predictions");
  const fs::path data = data_path(c, rc, "calibration");
  const std::string target_col = target_of(c, rc);

  PredPtr before;
  DataPtr calib;
  if (!model_path.empty()) {
    ModelPtr model = load_model(model_path);
    calib = read_model_data(model.get(), data, target_col);
    before = predict(model.get(), calib.get());
  } else {
    uq_prediction* p = nullptr;
    check(uq_prediction_from_json(read_file(predictions_path).c_str(), &p));
    before.reset(p);
    char* s = nullptr;
    check(uq_prediction_to_json(before.get(), &s));
    const Json pj = Json::parse(take(s));
    const std::string task = pj.at("task").get<std::string>();
    const size_t k = task == "classification" ? pj.at("probs").at(0).size() : 0;
    uq_dataset* d = nullptr;
    check(uq_dataset_read_csv(data.string().c_str(), target_col.c_str(), task.c_str(), k, &d));
    calib.reset(d);
  }

  Json options = Json::object();
  if (method == "interval-scale") {
    const auto eq = target.find('=');
    if (target.empty() || eq == std::string::npos)
      config_error("interval-scale needs --target miss_rate=<m> or --target bandwidth=<w>");
    const std::string key = target.substr(0, eq);
    if (key != "miss_rate" && key != "bandwidth") config_error("unknown target '" + key + "'");
    try {
      std::size_t used = 0;
      const double v = std::stod(target.substr(eq + 1), &used);
      if (used != target.size() - eq - 1) throw std::invalid_argument("trailing");
      options[key] = v;
    } catch (const std::exception&) {
      config_error("target value '" + target.substr(eq + 1) + "' is not a number");
    }
  } else {
    if (!target.empty()) config_error("--target applies to interval-scale only");
    if (!score.empty()) options["score"] = score;
    if (positive_class) options["positive_class"] = *positive_class;
  }

  char* map = nullptr;
  uq_prediction* after_raw = nullptr;
  check(uq_recalibrate(before.get(), calib.get(), method.c_str(), options.dump().c_str(), &map, &after_raw));
  PredPtr after(after_raw);
  const std::string map_text = take(map);

  const std::string names = comparison_metrics(before.get());
  const Json cmp{{"before", evaluate(before.get(), calib.get(), names)},
                 {"after", evaluate(after.get(), calib.get(), names)}};
  char* pj = nullptr;
  check(uq_prediction_to_json(after.get(), &pj));

  OutputDir out(c.out);
  out.write("map.json", map_text);
  out.write("predictions.json", take(pj));
  out.write_json("comparison.json", cmp);
  out.finish("recalibrate");
  std::printf("%-16s %-16s %s\n", "metric", "before", "after");
  for (const auto& [name, v] : cmp.at("before").items())
    std::printf("%-16s %-16.10g %.10g\n", name.c_str(), v.get<double>(), cmp.at("after").at(name).get<double>());
}

void cmd_gridsearch(const Common& c, const std::string& scorer_flag, std::optional<size_t> folds_flag) {
  if (c.config.empty()) config_error("gridsearch needs --config");
  const RunConfig rc = load_config(c.config);
  Json spec = estimator_json(rc);
  if (rc.has("grid")) spec["grid"] = rc.raw.at("grid");
  const std::string scorer = !scorer_flag.empty() ? scorer_flag : rc.get<std::string>("scorer").value_or("");
  if (scorer.empty()) config_error("gridsearch needs --scorer or 'scorer' in the config");
  const size_t folds = folds_flag ? *folds_flag : rc.get<size_t>("folds").value_or(5);
  DataPtr data = read_training_data(c, rc, "train");

  char* s = nullptr;
  check(uq_grid_search_json(spec.dump().c_str(), data.get(), scorer.c_str(), folds, seed_of(c, rc), &s));
  const Json result = Json::parse(take(s));
  const Json& best = result.at("best_config");
  OutputDir out(c.out);
  out.write_json("grid_table.json", result);
  out.write_json("best_config.json", Json{{"algorithm_id", best.at("algorithm")},
                                          {"params", best.at("params")},
                                          {"standardize", best.at("standardize")},
                                          {"mean_score", result.at("table").at(result.at("best_index").get<size_t>())
                                                             .at("mean_score")}});
  out.finish("gridsearch");
  std::printf("%-6s %-24s %s\n", "index", ("mean_" + scorer).c_str(), "params");
  for (const auto& row : result.at("table")) {
    const std::string score_text = row.at("mean_score").is_null() ? "failed" : row.at("mean_score").dump();
    std::printf("%-6zu %-24s %s\n", row.at("index").get<size_t>(), score_text.c_str(), row.at("params").dump().c_str());
  }
}

void cmd_report(const Common& c, const std::string& model_path, std::optional<size_t> row) {
  const RunConfig rc = load_config(c.config);
  ModelPtr model = load_model(model_path);
  DataPtr test = read_model_data(model.get(), data_path(c, rc, "test"), target_of(c, rc));
  Json options = rc.has("report") ? rc.raw.at("report") : Json::object();
  if (!options.is_object()) config_error("'report' must be an object");
  if (row) options["row"] = *row;
  OutputDir out(c.out);
  char* index = nullptr;
  check(uq_report(model.get(), test.get(), out.path().string().c_str(), options.dump().c_str(), &index));
  const Json idx = Json::parse(take(index));
  for (const auto& f : idx.at("files")) out.record(f.get<std::string>());
  out.record("index.json");
  out.finish("report");
  std::printf("%s\n", idx.at("summary").get<std::string>().c_str());
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"uqkit: quantify, evaluate, recalibrate and communicate predictive uncertainty"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(uq_version()));

  Common common;
  std::string model_path, predictions_path, metrics, curves, method, target, score, scorer;
  std::optional<size_t> row, folds, positive_class;

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", common.config, "Run config (JSON)");
    auto* out = sub->add_option("--out", common.out, "Output directory");
    if (needs_out) out->required();
    sub->add_option("--data", common.data, "CSV data file (overrides the config)");
    sub->add_option("--target-column", common.target_column, "Target column name (default y)");
    sub->add_option("--seed", common.seed, "Random seed");
  };

  auto* fit = app.add_subcommand("fit", "Train an estimator and write model.uqm");
  add_common(fit, true);

  auto* pred = app.add_subcommand("predict", "Predict with uncertainty");
  add_common(pred, true);
  pred->add_option("--model", model_path, "Model file")->required();

  auto* eval = app.add_subcommand("evaluate", "Compute metrics and curves on labelled data");
  add_common(eval, true);
  eval->add_option("--model", model_path, "Model file")->required();
  eval->add_option("--metrics", metrics, "Comma-separated metric names");
  eval->add_option("--curves", curves, "Comma-separated curves: ucc, risk_rejection, reliability");

  auto* recal = app.add_subcommand("recalibrate", "Fit a recalibration map on calibration data");
  add_common(recal, true);
  recal->add_option("--model", model_path, "Model file");
  recal->add_option("--predictions", predictions_path, "Predictions JSON");
  recal->add_option("--method", method, "isotonic, platt or interval-scale")
      ->required()
      ->check(CLI::IsMember({"isotonic", "platt", "interval-scale"}));
  recal->add_option("--target", target, "miss_rate=<m> or bandwidth=<w>");
  recal->add_option("--score", score, "Score fed to the map: logit or probability");
  recal->add_option("--positive-class", positive_class, "Positive class index (default 1)");

  auto* grid = app.add_subcommand("gridsearch", "Cross-validated grid search");
  add_common(grid, true);
  grid->add_option("--scorer", scorer, "Metric used to select the config");
  grid->add_option("--folds", folds, "Number of folds (default 5)");

  auto* report = app.add_subcommand("report", "Write the metric, curve and plot bundle");
  add_common(report, true);
  report->add_option("--model", model_path, "Model file")->required();
  report->add_option("--row", row, "Test row for the density and dot plots");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::Success& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      throw CliError{2, "UsageError", e.what()};
    }
    if (*fit) cmd_fit(common);
    else if (*pred) cmd_predict(common, model_path);
    else if (*eval) cmd_evaluate(common, model_path, metrics, curves);
    else if (*recal) cmd_recalibrate(common, model_path, predictions_path, method, target, score, positive_class);
    else if (*grid) cmd_gridsearch(common, scorer, folds);
    else if (*report) cmd_report(common, model_path, row);
    return 0;
  } catch (const CliError& e) {
    std::cerr << "uqkit-error kind=" << e.kind << " exit=" << e.exit_code << " message=" << one_line(e.message) << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "uqkit-error kind=Internal exit=1 message=" << one_line(e.what()) << "\n";
    return 1;
  }
}
