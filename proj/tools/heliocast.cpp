// heliocast: command-line entry point for the irradiance pipeline.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "heliocast/analysis.hpp"
#include "heliocast/dataset.hpp"
#include "heliocast/fileio.hpp"
#include "heliocast/harness.hpp"
#include "heliocast/model.hpp"
#include "heliocast/service.hpp"

namespace fs = std::filesystem;
using namespace heliocast;

namespace {

std::vector<Record> load_records(const std::string& path, bool clamp_negative = false) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
  return clean(parse_records(in), clamp_negative);
}

Timestamp parse_day(const std::string& text) {
  Timestamp day;
  if (!Timestamp::parse_date(text, day)) fail(ErrorCode::invalid_argument, "bad date '" + text + "'");
  return day;
}

struct TrainFlags {
  std::string model = "gbr";
  std::string data;
  std::string out;
  std::string features = "temperature,hour";
  double split_fraction = 0.8;
  std::uint64_t seed = 42;
  std::optional<std::string> trained_at;
  std::optional<int> degree;
  std::size_t k = 10;
  bool knn_standardize = false;
  int tree_depth = 3;
  std::size_t trees = 100;
  std::size_t stages = 100;
  double learning_rate = 0.2;
  int gbr_depth = 5;
  double svr_c = 1.0;
  double svr_epsilon = 0.1;
  std::size_t svr_subsample = 2000;
  bool svr_rbf = false;
  bool clamp_negative = false;
};

ModelSpec spec_for(const TrainFlags& f) {
  const auto kind = model_kind_from_string(f.model);
  if (!kind) fail(ErrorCode::invalid_argument, "unknown model kind '" + f.model + "'");
  auto suite = default_model_suite(f.svr_rbf);
  ModelSpec spec = suite[static_cast<std::size_t>(*kind)];
  switch (*kind) {
    case ModelKind::linear:
    case ModelKind::polynomial:
      if (f.degree) spec.params = LinearParams{*f.degree};
      break;
    case ModelKind::knn:
      spec.params = KnnParams{f.k, f.knn_standardize};
      break;
    case ModelKind::tree:
      spec.params = TreeConfig{f.tree_depth, 2, f.seed};
      break;
    case ModelKind::svr_linear:
    case ModelKind::svr_poly: {
      auto& p = std::get<SvrParams>(spec.params);
      p.svr.C = f.svr_c;
      p.svr.epsilon = f.svr_epsilon;
      p.svr.seed = f.seed;
      p.subsample = f.svr_subsample;
      break;
    }
    case ModelKind::forest: {
      auto& p = std::get<ForestConfig>(spec.params);
      p.tree_count = f.trees;
      p.seed = f.seed;
      break;
    }
    case ModelKind::gbr: {
      auto& p = std::get<GbrConfig>(spec.params);
      p.stage_count = f.stages;
      p.learning_rate = f.learning_rate;
      p.max_depth = f.gbr_depth;
      p.seed = f.seed;
      break;
    }
  }
  return spec;
}

std::string trained_at_stamp(const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    if (auto secs = parse_int(epoch))
      return Timestamp::from_seconds(std::chrono::sys_seconds{std::chrono::seconds{*secs}})
                 .to_string() + "Z";
  }
  return "unspecified";
}

std::atomic<HttpFrontend*> g_frontend{nullptr};

extern "C" void handle_signal(int) {
  if (auto* f = g_frontend.load()) f->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heliocast: solar irradiance regression and forecasting"};
  app.require_subcommand(1);

  // summarize
  auto* summarize_cmd = app.add_subcommand("summarize", "Descriptive statistics (count/mean/std/quantiles) per column");
  std::string summarize_data, summarize_out, heatmap_out;
  bool summarize_clamp = false;
  summarize_cmd->add_option("--data", summarize_data, "Record CSV")->required();
  summarize_cmd->add_option("--out", summarize_out, "Write the table here instead of stdout");
  summarize_cmd->add_option("--heatmap-out", heatmap_out, "Write mean temperature per month/hour CSV");
  summarize_cmd->add_flag("--clamp-negative", summarize_clamp, "Clamp negative irradiance to 0 first");

  // correlate
  auto* correlate_cmd = app.add_subcommand("correlate", "Pearson correlation matrix of features and irradiance");
  std::string correlate_data, correlate_out, correlate_features = "temperature,hour,month";
  double threshold = 0.1;
  correlate_cmd->add_option("--data", correlate_data, "Record CSV")->required();
  correlate_cmd->add_option("--out", correlate_out, "Matrix CSV output")->required();
  correlate_cmd->add_option("--features", correlate_features, "Feature list")->capture_default_str();
  correlate_cmd->add_option("--threshold", threshold, "Selection threshold on |r| (keeps hour at r = 0.13)")
      ->capture_default_str();

  // train
  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Fit one model on the train split and write a .hcm file");
  train_cmd->add_option("--model", tf.model, "linear|polynomial|knn|tree|svr_linear|svr_poly|forest|gbr")
      ->capture_default_str();
  train_cmd->add_option("--data", tf.data, "Record CSV")->required();
  train_cmd->add_option("--out", tf.out, "Output model file (.hcm)")->required();
  train_cmd->add_option("--features", tf.features, "Feature list")->capture_default_str();
  train_cmd->add_option("--split", tf.split_fraction, "Train fraction")->capture_default_str();
  train_cmd->add_option("--seed", tf.seed, "Seed (reference random_state=42)")->capture_default_str();
  train_cmd->add_option("--trained-at", tf.trained_at, "Training stamp stored in the model");
  train_cmd->add_option("--degree", tf.degree, "Polynomial degree (linear: 1, polynomial: 2)");
  train_cmd->add_option("--k", tf.k, "KNN neighbours (reference n_neighbors=10)")->capture_default_str();
  train_cmd->add_flag("--knn-standardize", tf.knn_standardize, "Standardize KNN features");
  train_cmd->add_option("--tree-depth", tf.tree_depth, "Decision tree depth (reference max_depth=3)")
      ->capture_default_str();
  train_cmd->add_option("--trees", tf.trees, "Forest size (reference n_estimators=100)")->capture_default_str();
  train_cmd->add_option("--stages", tf.stages, "Boosting stages (reference n_estimators=100)")
      ->capture_default_str();
  train_cmd->add_option("--learning-rate", tf.learning_rate, "Boosting learning rate (reference 0.2)")
      ->capture_default_str();
  train_cmd->add_option("--gbr-depth", tf.gbr_depth, "Boosting tree depth (reference max_depth=5)")
      ->capture_default_str();
  train_cmd->add_option("--svr-c", tf.svr_c, "SVR C")->capture_default_str();
  train_cmd->add_option("--svr-epsilon", tf.svr_epsilon, "SVR epsilon")->capture_default_str();
  train_cmd->add_option("--svr-subsample", tf.svr_subsample, "SVR training subsample size")
      ->capture_default_str();
  train_cmd->add_flag("--svr-rbf", tf.svr_rbf, "svr_poly uses a true RBF kernel");
  train_cmd->add_flag("--clamp-negative", tf.clamp_negative, "Clamp negative irradiance to 0");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Train and score all eight reference models");
  std::string eval_data, eval_out_dir = ".", eval_features = "temperature,hour";
  double eval_split = 0.8;
  std::uint64_t eval_seed = 42;
  bool eval_rbf = false, eval_clamp = false;
  evaluate_cmd->add_option("--data", eval_data, "Record CSV")->required();
  evaluate_cmd->add_option("--out-dir", eval_out_dir, "Directory for report.csv, report.txt, evaluation.json")
      ->capture_default_str();
  evaluate_cmd->add_option("--features", eval_features, "Feature list")->capture_default_str();
  evaluate_cmd->add_option("--split", eval_split, "Train fraction")->capture_default_str();
  evaluate_cmd->add_option("--seed", eval_seed, "Split seed")->capture_default_str();
  evaluate_cmd->add_flag("--svr-rbf", eval_rbf, "'SVR Kernel RBF' row uses a true RBF kernel");
  evaluate_cmd->add_flag("--clamp-negative", eval_clamp, "Clamp negative irradiance to 0");

  // export-plots
  auto* export_cmd = app.add_subcommand("export-plots", "Actual vs predicted irradiance for one day");
  std::string export_model, export_data = "data/sample.csv", export_day = "2020-05-02", export_out;
  export_cmd->add_option("--model", export_model, "Model file (.hcm)")->required();
  export_cmd->add_option("--data", export_data, "Record CSV")->capture_default_str();
  export_cmd->add_option("--day", export_day, "Day YYYY-MM-DD")->capture_default_str();
  export_cmd->add_option("--out", export_out, "Plot CSV (default: <model stem>_<day>.csv)");

  // generate
  auto* generate_cmd = app.add_subcommand("generate", "Write synthetic 5-minute pyranometer records");
  int gen_days = 60;
  std::uint64_t gen_seed = 42;
  std::string gen_start = "2020-05-01", gen_out;
  generate_cmd->add_option("--days", gen_days, "Number of days")->capture_default_str();
  generate_cmd->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  generate_cmd->add_option("--start", gen_start, "First day YYYY-MM-DD")->capture_default_str();
  generate_cmd->add_option("--out", gen_out, "Output CSV (default stdout)");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP forecasting service");
  std::optional<std::string> serve_dir, serve_bind, serve_provider, serve_clock;
  serve_cmd->add_option("--model-dir", serve_dir, "Model directory (env MODEL_DIR)");
  serve_cmd->add_option("--bind", serve_bind, "host:port (env BIND_ADDR)");
  serve_cmd->add_option("--provider", serve_provider, "real|mock (env WEATHER_PROVIDER)");
  serve_cmd->add_option("--frozen-clock", serve_clock, "Fixed local time YYYY-MM-DDTHH:MM:SS");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*summarize_cmd) {
      const auto records = load_records(summarize_data, summarize_clamp);
      const auto text = format_summary(summarize(records));
      if (summarize_out.empty()) std::cout << text;
      else write_file_atomic(summarize_out, text);
      if (!heatmap_out.empty()) write_file_atomic(heatmap_out, hourly_temperature_csv(records));
    } else if (*correlate_cmd) {
      const auto spec = FeatureSpec::from_string(correlate_features);
      const auto ds = extract_features(load_records(correlate_data), spec);
      const auto cm = correlation_matrix(ds);
      std::ostringstream csv;
      write_correlation_csv(csv, cm);
      write_file_atomic(correlate_out, csv.str());
      std::cout << "selected (|r| >= " << format_double(threshold) << "):";
      for (const auto& name : select_variables(cm, "irradiance", threshold)) {
        std::cout << ' ' << name << " (" << format_fixed(cm.at(name, "irradiance"), 2) << ")";
      }
      std::cout << '\n';
    } else if (*train_cmd) {
      const auto spec = spec_for(tf);
      const auto features = FeatureSpec::from_string(tf.features);
      const auto ds = extract_features(load_records(tf.data, tf.clamp_negative), features);
      const auto [train, test] = split(ds, tf.split_fraction, tf.seed);
      auto model = train_model(spec, train, features);
      model.metrics = score(test.target, model.predict(test.features));
      model.trained_at = trained_at_stamp(tf.trained_at);
      save_model(model, tf.out);
      std::cout << model.display_name << ": test RMSE " << format_fixed(model.metrics->rmse, 2)
                << ", R^2 " << (model.metrics->r2 ? format_fixed(*model.metrics->r2, 3) : "n/a")
                << " -> " << tf.out << '\n';
    } else if (*evaluate_cmd) {
      const auto features = FeatureSpec::from_string(eval_features);
      const auto ds = extract_features(load_records(eval_data, eval_clamp), features);
      const auto report =
          run_comparison(ds, default_model_suite(eval_rbf), ComparisonOptions{eval_split, eval_seed, true});
      fs::create_directories(eval_out_dir);
      const fs::path dir(eval_out_dir);
      write_file_atomic(dir / "report.csv", report_csv(report));
      write_file_atomic(dir / "report.txt", report_text(report));
      write_file_atomic(dir / "evaluation.json", report_json(report).dump(2) + "\n");
      std::cout << report_text(report, false);
    } else if (*export_cmd) {
      const auto model = load_model(export_model);
      const auto day = parse_day(export_day);
      const auto series = export_plot_data(model, load_records(export_data), day);
      const std::string out = export_out.empty()
                                  ? fs::path(export_model).stem().string() + "_" + export_day + ".csv"
                                  : export_out;
      write_file_atomic(out, plot_csv(series));
      std::cout << series.points.size() << " points -> " << out << '\n';
    } else if (*generate_cmd) {
      const auto records = generate_synthetic(gen_days, gen_seed, parse_day(gen_start));
      const auto csv = serialize_records(records);
      if (gen_out.empty()) std::cout << csv;
      else write_file_atomic(gen_out, csv);
    } else if (*serve_cmd) {
      auto config = ServiceConfig::from_env();
      if (serve_dir) config.model_dir = *serve_dir;
      if (serve_bind) config.bind_addr = *serve_bind;
      if (serve_provider) config.provider = *serve_provider;
      Clock clock = system_clock_source();
      if (serve_clock) {
        Timestamp at;
        if (!Timestamp::parse(*serve_clock, at))
          fail(ErrorCode::invalid_argument, "bad --frozen-clock '" + *serve_clock + "'");
        clock = frozen_clock(at);
      }
      const auto provider = make_provider(config);
      ModelStore store(config.model_dir);
      ForecastService service(store, *provider, clock);
      HttpFrontend frontend(service);
      const auto [host, port] = config.host_port();
      const int bound = frontend.bind(host, port);
      g_frontend = &frontend;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cerr << "serving " << store.snapshot()->models.size() << " model(s) from "
                << config.model_dir << " on " << host << ':' << bound << " (provider "
                << provider->name() << ")\n";
      frontend.serve();
      g_frontend = nullptr;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
