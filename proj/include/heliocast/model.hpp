#pragma once

// Model specifications, the trained-model sum type, and the `.hcm` model
// file format.
//
// File layout (text, one record per line, whitespace-separated tokens):
//
//   hcm-version 1
//   kind <linear|polynomial|knn|tree|svr_linear|svr_poly|forest|gbr>
//   display_name <rest of line>
//   features <comma list>
//   trained_at <token>
//   metrics <mse> <rmse> <mae> <r2|none> <n>      (or "metrics none")
//   ...kind-specific body...
//   end
//
// Floats use the shortest decimal form that round-trips, so a saved model
// predicts bit-identically after loading.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "heliocast/dataset.hpp"
#include "heliocast/error.hpp"
#include "heliocast/fileio.hpp"
#include "heliocast/linear_models.hpp"
#include "heliocast/metrics.hpp"
#include "heliocast/neighbors.hpp"
#include "heliocast/svr.hpp"
#include "heliocast/text.hpp"
#include "heliocast/trees.hpp"

namespace heliocast {

inline constexpr int kModelFormatVersion = 1;

enum class ModelKind { linear, polynomial, knn, tree, svr_linear, svr_poly, forest, gbr };

inline constexpr ModelKind kAllModelKinds[] = {
    ModelKind::linear,     ModelKind::polynomial, ModelKind::knn,    ModelKind::tree,
    ModelKind::svr_linear, ModelKind::svr_poly,   ModelKind::forest, ModelKind::gbr};

inline const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear: return "linear";
    case ModelKind::polynomial: return "polynomial";
    case ModelKind::knn: return "knn";
    case ModelKind::tree: return "tree";
    case ModelKind::svr_linear: return "svr_linear";
    case ModelKind::svr_poly: return "svr_poly";
    case ModelKind::forest: return "forest";
    case ModelKind::gbr: return "gbr";
  }
  return "unknown";
}

inline std::optional<ModelKind> model_kind_from_string(std::string_view s) {
  for (auto k : kAllModelKinds)
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct LinearParams {
  int degree = 1;
};

struct KnnParams {
  std::size_t k = 10;
  bool standardize = false;
};

struct SvrParams {
  SvrConfig svr{};
  // Training rows above this count are reduced to a stratified subsample.
  std::size_t subsample = 2000;
};

using Hyperparameters =
    std::variant<LinearParams, KnnParams, TreeConfig, SvrParams, ForestConfig, GbrConfig>;

struct ModelSpec {
  ModelKind kind = ModelKind::linear;
  Hyperparameters params = LinearParams{};
  std::string display_name;

  void validate() const {
    auto ok = [&]() -> bool {
      switch (kind) {
        case ModelKind::linear:
        case ModelKind::polynomial: {
          const auto* p = std::get_if<LinearParams>(&params);
          return p && (p->degree == 1 || p->degree == 2);
        }
        case ModelKind::knn: {
          const auto* p = std::get_if<KnnParams>(&params);
          return p && p->k >= 1;
        }
        case ModelKind::tree: {
          const auto* p = std::get_if<TreeConfig>(&params);
          if (p) p->validate();
          return p != nullptr;
        }
        case ModelKind::svr_linear:
        case ModelKind::svr_poly: {
          const auto* p = std::get_if<SvrParams>(&params);
          return p && p->svr.C > 0.0 && p->svr.epsilon >= 0.0 && p->subsample >= 2;
        }
        case ModelKind::forest: {
          const auto* p = std::get_if<ForestConfig>(&params);
          return p && p->tree_count >= 1;
        }
        case ModelKind::gbr: {
          const auto* p = std::get_if<GbrConfig>(&params);
          return p && p->learning_rate >= 0.0 && p->max_depth >= 1;
        }
      }
      return false;
    }();
    if (!ok)
      fail(ErrorCode::invalid_argument,
           std::string("invalid hyperparameters for model kind ") + to_string(kind));
  }
};

using FittedModel =
    std::variant<LinearModel, KnnModel, RegressionTree, SvrModel, ForestModel, GbrModel>;

struct TrainedModel {
  ModelKind kind = ModelKind::linear;
  std::string display_name;
  FeatureSpec features{};
  std::string trained_at = "unspecified";
  std::optional<MetricsReport> metrics;  // held-out evaluation, when known
  FittedModel fitted;

  double predict(std::span<const double> row) const {
    if (row.size() != features.feature_count())
      fail(ErrorCode::invalid_argument,
           "model '" + display_name + "' expects " + std::to_string(features.feature_count()) +
               " features (" + features.to_string() + "), got " + std::to_string(row.size()));
    return std::visit(
        [&](const auto& m) -> double {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, LinearModel>) return predict_linear(m, row);
          else if constexpr (std::is_same_v<T, KnnModel>) return predict_knn(m, row);
          else if constexpr (std::is_same_v<T, RegressionTree>) return predict_tree(m, row);
          else if constexpr (std::is_same_v<T, SvrModel>) return predict_svr(m, row);
          else if constexpr (std::is_same_v<T, ForestModel>) return predict_forest(m, row);
          else return predict_gbr(m, row);
        },
        fitted);
  }

  std::vector<double> predict(const Matrix& rows) const {
    std::vector<double> out;
    out.reserve(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) out.push_back(predict(rows.row(i)));
    return out;
  }
};

/// Stratified subsample by target: sort rows by target, cut into `size`
/// equal strata and draw one row uniformly from each.
inline std::vector<std::size_t> stratified_subsample(std::span<const double> target,
                                                     std::size_t size, std::uint64_t seed) {
  const std::size_t n = target.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (size >= n) return order;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return target[a] < target[b]; });
  Rng rng(seed);
  std::vector<std::size_t> picked;
  picked.reserve(size);
  for (std::size_t s = 0; s < size; ++s) {
    const std::size_t lo = s * n / size;
    const std::size_t hi = (s + 1) * n / size;
    picked.push_back(order[lo + static_cast<std::size_t>(rng.below(hi - lo))]);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

/// Fits `spec` on `ds`, whose columns must follow `features`.
inline TrainedModel train_model(const ModelSpec& spec, const Dataset& ds,
                                const FeatureSpec& features) {
  spec.validate();
  features.validate();
  ds.validate();
  if (ds.dims() != features.feature_count())
    fail(ErrorCode::invalid_argument, "dataset has " + std::to_string(ds.dims()) +
                                          " columns but feature spec selects " +
                                          features.to_string());
  TrainedModel out;
  out.kind = spec.kind;
  out.display_name = spec.display_name.empty() ? to_string(spec.kind) : spec.display_name;
  out.features = features;
  switch (spec.kind) {
    case ModelKind::linear:
    case ModelKind::polynomial: {
      const int degree = std::get<LinearParams>(spec.params).degree;
      out.features.polynomial_degree = degree;
      out.fitted = fit_ols(ds, degree);
      break;
    }
    case ModelKind::knn: {
      const auto& p = std::get<KnnParams>(spec.params);
      out.fitted = fit_knn(ds, p.k, p.standardize);
      break;
    }
    case ModelKind::tree:
      out.fitted = fit_tree(ds, std::get<TreeConfig>(spec.params));
      break;
    case ModelKind::svr_linear:
    case ModelKind::svr_poly: {
      const auto& p = std::get<SvrParams>(spec.params);
      if (ds.size() > p.subsample)
        out.fitted = fit_svr(ds.subset(stratified_subsample(ds.target, p.subsample, p.svr.seed)),
                             p.svr);
      else
        out.fitted = fit_svr(ds, p.svr);
      break;
    }
    case ModelKind::forest:
      out.fitted = fit_forest(ds, std::get<ForestConfig>(spec.params));
      break;
    case ModelKind::gbr:
      out.fitted = fit_gbr(ds, std::get<GbrConfig>(spec.params));
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

class ModelWriter {
 public:
  void line(std::string_view key) { out_ << key << '\n'; }

  template <typename... Values>
  void line(std::string_view key, const Values&... values) {
    out_ << key;
    ((out_ << ' ' << token(values)), ...);
    out_ << '\n';
  }

  void values(std::string_view key, std::span<const double> v) {
    out_ << key << ' ' << v.size();
    for (double x : v) out_ << ' ' << format_double(x);
    out_ << '\n';
  }

  void tree(const RegressionTree& t) {
    line("tree", t.nodes.size(), t.input_dims);
    for (const auto& n : t.nodes)
      line("node", n.feature, n.threshold, n.left, n.right, n.value);
  }

  std::string str() const { return out_.str(); }

 private:
  static std::string token(double v) { return format_double(v); }
  static std::string token(const std::string& s) { return s; }
  static std::string token(const char* s) { return s; }
  static std::string token(bool b) { return b ? "1" : "0"; }
  template <typename Int>
    requires std::is_integral_v<Int>
  static std::string token(Int v) { return std::to_string(v); }

  std::ostringstream out_;
};

class ModelReader {
 public:
  explicit ModelReader(std::string_view text) : text_(text) {}

  // Next non-empty line split into tokens; EOF means the file was cut short.
  std::vector<std::string_view> next() {
    while (pos_ < text_.size()) {
      auto end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      const auto raw = trim(text_.substr(pos_, end - pos_));
      pos_ = end + 1;
      ++line_;
      if (raw.empty()) continue;
      last_ = raw;
      std::vector<std::string_view> tokens;
      for (auto t : split_view(raw, ' '))
        if (!t.empty()) tokens.push_back(t);
      return tokens;
    }
    fail(ErrorCode::truncated, "model file ends unexpectedly after line " + std::to_string(line_));
  }

  std::vector<std::string_view> expect(std::string_view key, std::size_t arity) {
    auto tokens = next();
    if (tokens.front() != key || tokens.size() != arity + 1) corrupt("expected '" + std::string(key) + "'");
    return tokens;
  }

  // Rest of the line after `key`, spaces included.
  std::string text_field(std::string_view key) {
    auto tokens = next();
    if (tokens.front() != key) corrupt("expected '" + std::string(key) + "'");
    auto raw = last_;
    raw.remove_prefix(key.size());
    return std::string(trim(raw));
  }

  double real(std::string_view tok) {
    auto v = parse_double(tok);
    if (!v) corrupt("bad number '" + std::string(tok) + "'");
    return *v;
  }

  long long integer(std::string_view tok) {
    auto v = parse_int(tok);
    if (!v) corrupt("bad integer '" + std::string(tok) + "'");
    return *v;
  }

  std::size_t count(std::string_view tok, std::size_t limit = 100'000'000) {
    const auto v = integer(tok);
    if (v < 0 || static_cast<unsigned long long>(v) > limit) corrupt("count out of range");
    return static_cast<std::size_t>(v);
  }

  double real_field(std::string_view key) { return real(expect(key, 1)[1]); }
  long long int_field(std::string_view key) { return integer(expect(key, 1)[1]); }

  std::vector<double> values(std::string_view key) {
    auto tokens = next();
    if (tokens.front() != key || tokens.size() < 2) corrupt("expected '" + std::string(key) + "'");
    const auto n = count(tokens[1]);
    if (tokens.size() != n + 2) corrupt("'" + std::string(key) + "' has wrong value count");
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(real(tokens[i + 2]));
    return out;
  }

  RegressionTree tree() {
    const auto header = expect("tree", 2);
    RegressionTree t;
    const auto n = count(header[1]);
    t.input_dims = count(header[2]);
    if (n == 0) corrupt("empty tree");
    t.nodes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto tok = expect("node", 5);
      TreeNode node;
      node.feature = static_cast<int>(integer(tok[1]));
      node.threshold = real(tok[2]);
      node.left = static_cast<std::int32_t>(integer(tok[3]));
      node.right = static_cast<std::int32_t>(integer(tok[4]));
      node.value = real(tok[5]);
      if (!node.is_leaf()) {
        const auto valid = [&](std::int32_t c) {
          return c > static_cast<std::int32_t>(i) && static_cast<std::size_t>(c) < n;
        };
        if (!valid(node.left) || !valid(node.right)) corrupt("tree child index out of range");
        if (t.input_dims && static_cast<std::size_t>(node.feature) >= t.input_dims)
          corrupt("tree feature index out of range");
      }
      t.nodes.push_back(node);
    }
    return t;
  }

  bool at_end() const {
    return pos_ >= text_.size() || trim(text_.substr(pos_)).empty();
  }

  [[noreturn]] void corrupt(const std::string& what) const {
    fail(ErrorCode::corrupt, "model file line " + std::to_string(line_) + ": " + what);
  }

 private:
  std::string_view text_;
  std::string_view last_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

}  // namespace detail

inline std::string serialize_model(const TrainedModel& m) {
  detail::ModelWriter w;
  w.line("hcm-version", kModelFormatVersion);
  w.line("kind", to_string(m.kind));
  w.line("display_name", m.display_name);
  w.line("features", m.features.to_string());
  w.line("polynomial_degree", m.features.polynomial_degree);
  std::string stamp = m.trained_at.empty() ? "unspecified" : m.trained_at;
  std::replace(stamp.begin(), stamp.end(), ' ', '_');
  w.line("trained_at", stamp);
  if (m.metrics) {
    const auto& r = *m.metrics;
    w.line("metrics", r.mse, r.rmse, r.mae, r.r2 ? format_double(*r.r2) : std::string("none"), r.n);
  } else {
    w.line("metrics", "none");
  }

  std::visit(
      [&](const auto& fm) {
        using T = std::decay_t<decltype(fm)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          w.line("degree", fm.degree);
          w.line("input_dims", fm.input_dims);
          w.values("coefficients", fm.coefficients);
          std::string names;
          for (const auto& n : fm.feature_names) names += (names.empty() ? "" : ",") + n;
          w.line("names", names);
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          w.line("k", fm.k);
          w.values("center", fm.center);
          w.values("scale", fm.scale);
          w.line("train", fm.train_targets.size(), fm.train_features.cols());
          for (std::size_t i = 0; i < fm.train_targets.size(); ++i) {
            std::vector<double> row(fm.train_features.row(i).begin(), fm.train_features.row(i).end());
            row.push_back(fm.train_targets[i]);
            w.values("row", row);
          }
        } else if constexpr (std::is_same_v<T, RegressionTree>) {
          w.tree(fm);
        } else if constexpr (std::is_same_v<T, SvrModel>) {
          w.line("kernel", to_string(fm.kernel.kind), fm.kernel.gamma, fm.kernel.coef0,
                 fm.kernel.degree);
          w.line("C", fm.C);
          w.line("epsilon", fm.epsilon);
          w.line("converged", fm.converged);
          w.line("objective", fm.objective);
          w.line("bias", fm.bias);
          w.line("support", fm.dual_coefficients.size(), fm.support_vectors.cols());
          for (std::size_t i = 0; i < fm.dual_coefficients.size(); ++i) {
            std::vector<double> row{fm.dual_coefficients[i]};
            row.insert(row.end(), fm.support_vectors.row(i).begin(), fm.support_vectors.row(i).end());
            w.values("sv", row);
          }
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          w.line("bootstrap", fm.bootstrap);
          w.line("seed", fm.seed);
          w.line("tree_count", fm.trees.size());
          for (const auto& t : fm.trees) w.tree(t);
        } else {
          w.line("initial_value", fm.initial_value);
          w.line("learning_rate", fm.learning_rate);
          w.line("max_depth", fm.max_depth);
          w.line("seed", fm.seed);
          w.values("train_mse", fm.train_mse);
          w.line("stage_count", fm.stages.size());
          for (const auto& t : fm.stages) w.tree(t);
        }
      },
      m.fitted);
  w.line("end");
  return w.str();
}

inline TrainedModel parse_model(std::string_view text) {
  detail::ModelReader r(text);
  {
    auto tokens = r.next();
    if (tokens.front() != "hcm-version" || tokens.size() != 2)
      fail(ErrorCode::corrupt, "not a model file (missing hcm-version header)");
    auto v = parse_int(tokens[1]);
    if (!v) fail(ErrorCode::corrupt, "unreadable model format version");
    if (*v != kModelFormatVersion)
      fail(ErrorCode::version_mismatch, "model format version " + std::to_string(*v) +
                                            " is not supported (expected " +
                                            std::to_string(kModelFormatVersion) + ")");
  }
  TrainedModel m;
  {
    const auto tokens = r.expect("kind", 1);
    const auto kind = model_kind_from_string(tokens[1]);
    if (!kind) fail(ErrorCode::unknown_kind, "unknown model kind '" + std::string(tokens[1]) + "'");
    m.kind = *kind;
  }
  m.display_name = r.text_field("display_name");
  {
    const auto list = r.expect("features", 1)[1];
    const auto degree = r.int_field("polynomial_degree");
    try {
      m.features = FeatureSpec::from_string(list, static_cast<int>(degree));
    } catch (const Error& e) {
      r.corrupt(e.what());
    }
  }
  m.trained_at = std::string(r.expect("trained_at", 1)[1]);
  {
    const auto tokens = r.next();
    if (tokens.front() != "metrics") r.corrupt("expected 'metrics'");
    if (tokens.size() == 6) {
      MetricsReport rep;
      rep.mse = r.real(tokens[1]);
      rep.rmse = r.real(tokens[2]);
      rep.mae = r.real(tokens[3]);
      if (tokens[4] != "none") rep.r2 = r.real(tokens[4]);
      rep.n = r.count(tokens[5]);
      m.metrics = rep;
    } else if (!(tokens.size() == 2 && tokens[1] == "none")) {
      r.corrupt("malformed metrics line");
    }
  }
  const std::size_t dims = m.features.feature_count();

  switch (m.kind) {
    case ModelKind::linear:
    case ModelKind::polynomial: {
      LinearModel lm;
      lm.degree = static_cast<int>(r.int_field("degree"));
      lm.input_dims = r.count(r.expect("input_dims", 1)[1]);
      lm.coefficients = r.values("coefficients");
      for (auto n : split_view(r.expect("names", 1)[1], ',')) lm.feature_names.emplace_back(n);
      if ((lm.degree != 1 && lm.degree != 2) || lm.input_dims != dims ||
          lm.coefficients.size() != expanded_size(dims, lm.degree) ||
          lm.feature_names.size() != lm.coefficients.size())
        r.corrupt("inconsistent linear model");
      m.fitted = std::move(lm);
      break;
    }
    case ModelKind::knn: {
      KnnModel km;
      km.k = r.count(r.expect("k", 1)[1]);
      km.center = r.values("center");
      km.scale = r.values("scale");
      const auto header = r.expect("train", 2);
      const auto n = r.count(header[1]);
      const auto d = r.count(header[2]);
      if (d != dims || km.k < 1 || n < 1 || km.center.size() != km.scale.size() ||
          (!km.center.empty() && km.center.size() != d))
        r.corrupt("inconsistent knn model");
      km.train_features = Matrix(n, d);
      km.train_targets.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = r.values("row");
        if (row.size() != d + 1) r.corrupt("knn row width");
        std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(d),
                  km.train_features.row(i).begin());
        km.train_targets[i] = row.back();
      }
      m.fitted = std::move(km);
      break;
    }
    case ModelKind::tree:
      m.fitted = r.tree();
      break;
    case ModelKind::svr_linear:
    case ModelKind::svr_poly: {
      SvrModel sm;
      const auto k = r.expect("kernel", 4);
      try {
        sm.kernel.kind = kernel_kind_from_string(k[1]);
      } catch (const Error&) {
        r.corrupt("unknown kernel");
      }
      sm.kernel.gamma = r.real(k[2]);
      sm.kernel.coef0 = r.real(k[3]);
      sm.kernel.degree = static_cast<int>(r.integer(k[4]));
      sm.C = r.real_field("C");
      sm.epsilon = r.real_field("epsilon");
      sm.converged = r.int_field("converged") != 0;
      sm.objective = r.real_field("objective");
      sm.bias = r.real_field("bias");
      const auto header = r.expect("support", 2);
      const auto n = r.count(header[1]);
      const auto d = r.count(header[2]);
      if (d != dims) r.corrupt("svr dimension mismatch");
      sm.support_vectors = Matrix(n, d);
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = r.values("sv");
        if (row.size() != d + 1) r.corrupt("svr row width");
        sm.dual_coefficients.push_back(row[0]);
        std::copy(row.begin() + 1, row.end(), sm.support_vectors.row(i).begin());
      }
      m.fitted = std::move(sm);
      break;
    }
    case ModelKind::forest: {
      ForestModel fm;
      fm.bootstrap = r.int_field("bootstrap") != 0;
      fm.seed = static_cast<std::uint64_t>(r.int_field("seed"));
      fm.tree_count = r.count(r.expect("tree_count", 1)[1]);
      if (fm.tree_count == 0) r.corrupt("forest without trees");
      for (std::size_t t = 0; t < fm.tree_count; ++t) fm.trees.push_back(r.tree());
      m.fitted = std::move(fm);
      break;
    }
    case ModelKind::gbr: {
      GbrModel gm;
      gm.initial_value = r.real_field("initial_value");
      gm.learning_rate = r.real_field("learning_rate");
      gm.max_depth = static_cast<int>(r.int_field("max_depth"));
      gm.seed = static_cast<std::uint64_t>(r.int_field("seed"));
      gm.train_mse = r.values("train_mse");
      gm.stage_count = r.count(r.expect("stage_count", 1)[1]);
      for (std::size_t t = 0; t < gm.stage_count; ++t) gm.stages.push_back(r.tree());
      m.fitted = std::move(gm);
      break;
    }
  }
  const auto tail = r.next();
  if (tail.size() != 1 || tail.front() != "end") r.corrupt("expected 'end'");
  if (!r.at_end()) r.corrupt("content after 'end'");
  return m;
}

inline void save_model(const TrainedModel& m, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(m));
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  return parse_model(read_file(path));
}

}  // namespace heliocast
