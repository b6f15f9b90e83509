#pragma once

// Irradiance forecasting service: hourly temperature providers, the model
// store, and the HTTP front end.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "heliocast/dataset.hpp"
#include "heliocast/error.hpp"
#include "heliocast/fileio.hpp"
#include "heliocast/harness.hpp"
#include "heliocast/model.hpp"

namespace heliocast {

inline constexpr double kKelvinOffset = 273.15;
inline constexpr int kMaxForecastHours = 168;
// The instrument site keeps UTC-5 all year.
inline constexpr std::chrono::hours kSiteUtcOffset{-5};

struct GeoLocation {
  double latitude = -1.0286;  // Quevedo, Ecuador
  double longitude = -79.4635;
};

struct TempPoint {
  int hour_offset = 0;
  Timestamp timestamp;
  double temperature = 0.0;  // Kelvin
};

struct ForecastPoint {
  Timestamp timestamp;
  double temperature = 0.0;
  double predicted_irradiance = 0.0;
  std::string model_id;
};

/// Current local site time. Injected everywhere so tests can freeze it.
using Clock = std::function<Timestamp()>;

inline Timestamp site_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return Timestamp::from_seconds(now + kSiteUtcOffset);
}

inline Clock system_clock_source() { return site_now; }

inline Clock frozen_clock(Timestamp at) {
  return [at] { return at; };
}

/// First whole hour strictly after `now`.
inline Timestamp next_full_hour(const Timestamp& now) {
  Timestamp floor_hour = now;
  floor_hour.minute = 0;
  floor_hour.second = 0;
  return Timestamp::from_seconds(floor_hour.as_seconds() + std::chrono::hours{1});
}

class WeatherProvider {
 public:
  virtual ~WeatherProvider() = default;
  virtual const char* name() const = 0;
  /// `hours` contiguous hourly points beginning at next_full_hour(now).
  virtual std::vector<TempPoint> hourly_temperature(const GeoLocation& where, int hours,
                                                    const Timestamp& now) const = 0;
};

/// Deterministic provider: T(h) = 296 + 6 * max(0, sin(pi (h - 6) / 12)) K
/// with h the local hour of each point.
class MockWeatherProvider final : public WeatherProvider {
 public:
  const char* name() const override { return "mock"; }

  static double temperature_at(int local_hour) { return 296.0 + 6.0 * solar_shape(local_hour); }

  std::vector<TempPoint> hourly_temperature(const GeoLocation&, int hours,
                                            const Timestamp& now) const override {
    std::vector<TempPoint> out;
    const auto first = next_full_hour(now).as_seconds();
    for (int h = 0; h < hours; ++h) {
      const auto ts = Timestamp::from_seconds(first + std::chrono::hours{h});
      out.push_back({h, ts, temperature_at(ts.hour)});
    }
    return out;
  }
};

/// Client for a Meteosource-style point forecast endpoint:
///
///   GET {base}/point?lat=..&lon=..&sections=hourly&units=metric
///       &timezone=America/Guayaquil&language=en&key=..
///
/// The response is expected to contain `hourly.data[]`, each entry with a
/// local `date` (YYYY-MM-DDTHH:MM:SS) and a `temperature` in degrees Celsius.
class MeteosourceClient final : public WeatherProvider {
 public:
  MeteosourceClient(std::string base_url, std::string api_key)
      : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {
    if (api_key_.empty()) fail(ErrorCode::config, "WEATHER_API_KEY is required for the real provider");
    if (base_url_.empty()) fail(ErrorCode::config, "WEATHER_BASE_URL is empty");
  }

  const char* name() const override { return "real"; }

  std::vector<TempPoint> hourly_temperature(const GeoLocation& where, int hours,
                                            const Timestamp& now) const override {
    const auto [origin, prefix] = split_url(base_url_);
    httplib::Client client(origin);
    client.set_connection_timeout(5);
    client.set_read_timeout(10);
    const httplib::Params params{{"lat", format_double(where.latitude)},
                                 {"lon", format_double(where.longitude)},
                                 {"sections", "hourly"},
                                 {"units", "metric"},
                                 {"timezone", "America/Guayaquil"},
                                 {"language", "en"},
                                 {"key", api_key_}};
    auto res = client.Get(prefix + "/point", params, httplib::Headers{});
    if (!res) throw NetworkError(0, "weather provider unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw NetworkError(res->status, "weather provider returned HTTP " + std::to_string(res->status));
    return parse_payload(res->body, hours, now);
  }

  /// Converts a provider payload into `hours` contiguous Kelvin points.
  static std::vector<TempPoint> parse_payload(const std::string& body, int hours,
                                              const Timestamp& now) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse, std::string("weather payload is not JSON: ") + e.what());
    }
    const auto* data = [&]() -> const nlohmann::json* {
      if (!doc.is_object() || !doc.contains("hourly")) return nullptr;
      const auto& hourly = doc["hourly"];
      if (!hourly.is_object() || !hourly.contains("data") || !hourly["data"].is_array())
        return nullptr;
      return &hourly["data"];
    }();
    if (!data) fail(ErrorCode::parse, "weather payload lacks hourly.data");

    const auto start = next_full_hour(now);
    std::vector<TempPoint> out;
    for (const auto& entry : *data) {
      if (!entry.is_object() || !entry.contains("date") || !entry["date"].is_string() ||
          !entry.contains("temperature") || !entry["temperature"].is_number())
        fail(ErrorCode::parse, "weather payload entry lacks date/temperature");
      Timestamp ts;
      if (!Timestamp::parse(entry["date"].get<std::string>(), ts))
        fail(ErrorCode::parse, "unparseable forecast date '" + entry["date"].get<std::string>() + "'");
      if (ts < start) continue;
      const double kelvin = entry["temperature"].get<double>() + kKelvinOffset;
      if (!(kelvin > 0.0)) fail(ErrorCode::parse, "non-physical forecast temperature");
      if (!out.empty() &&
          ts.as_seconds() != out.back().timestamp.as_seconds() + std::chrono::hours{1})
        fail(ErrorCode::parse, "forecast hours are not contiguous at " + ts.to_string());
      if (out.empty() && ts != start)
        fail(ErrorCode::parse, "forecast does not start at " + start.to_string());
      out.push_back({static_cast<int>(out.size()), ts, kelvin});
      if (static_cast<int>(out.size()) == hours) return out;
    }
    fail(ErrorCode::parse, "weather payload has " + std::to_string(out.size()) +
                               " usable hours, " + std::to_string(hours) + " requested");
  }

 private:
  static std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string path = url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, path_start), path};
  }

  std::string base_url_;
  std::string api_key_;
};

inline std::vector<TempPoint> fetch_hourly_temperature(const WeatherProvider& provider,
                                                       const GeoLocation& where, int hours,
                                                       const Timestamp& now) {
  if (hours < 1 || hours > kMaxForecastHours)
    fail(ErrorCode::invalid_argument,
         "hours must be within 1.." + std::to_string(kMaxForecastHours));
  auto points = provider.hourly_temperature(where, hours, now);
  if (static_cast<int>(points.size()) != hours)
    fail(ErrorCode::parse, "provider returned " + std::to_string(points.size()) + " points");
  return points;
}

struct ServiceConfig {
  std::string provider = "mock";
  std::string api_key;
  std::string base_url = "https://www.meteosource.com/api/v1/free";
  std::filesystem::path model_dir = "models";
  std::string bind_addr = "127.0.0.1:8080";

  /// Reads WEATHER_PROVIDER, WEATHER_API_KEY, WEATHER_BASE_URL, MODEL_DIR and BIND_ADDR.
  static ServiceConfig from_env() {
    ServiceConfig c;
    auto env = [](const char* name) -> std::optional<std::string> {
      const char* v = std::getenv(name);
      if (!v || !*v) return std::nullopt;
      return std::string(v);
    };
    if (auto v = env("WEATHER_PROVIDER")) c.provider = *v;
    if (auto v = env("WEATHER_API_KEY")) c.api_key = *v;
    if (auto v = env("WEATHER_BASE_URL")) c.base_url = *v;
    if (auto v = env("MODEL_DIR")) c.model_dir = *v;
    if (auto v = env("BIND_ADDR")) c.bind_addr = *v;
    return c;
  }

  std::pair<std::string, int> host_port() const {
    const auto colon = bind_addr.rfind(':');
    if (colon == std::string::npos) fail(ErrorCode::config, "BIND_ADDR must be host:port");
    const auto port = parse_int(bind_addr.substr(colon + 1));
    if (!port || *port < 0 || *port > 65535) fail(ErrorCode::config, "invalid port in BIND_ADDR");
    return {bind_addr.substr(0, colon), static_cast<int>(*port)};
  }
};

inline std::unique_ptr<WeatherProvider> make_provider(const ServiceConfig& config) {
  if (config.provider == "mock") return std::make_unique<MockWeatherProvider>();
  if (config.provider == "real")
    return std::make_unique<MeteosourceClient>(config.base_url, config.api_key);
  fail(ErrorCode::config, "WEATHER_PROVIDER must be 'real' or 'mock', got '" + config.provider + "'");
}

/// Directory of `.hcm` files; model_id is the file stem. Readers hold a
/// shared snapshot, and a rescan swaps in a new snapshot wholesale.
class ModelStore {
 public:
  struct Snapshot {
    std::map<std::string, std::shared_ptr<const TrainedModel>> models;
    std::map<std::string, std::string> load_errors;
  };

  explicit ModelStore(std::filesystem::path dir) : dir_(std::move(dir)) { reload(); }

  void reload() {
    auto next = std::make_shared<Snapshot>();
    std::error_code ec;
    if (std::filesystem::is_directory(dir_, ec)) {
      for (const auto& entry : std::filesystem::directory_iterator(dir_, ec)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".hcm") continue;
        const auto id = entry.path().stem().string();
        try {
          next->models[id] = std::make_shared<const TrainedModel>(load_model(entry.path()));
        } catch (const std::exception& e) {
          next->load_errors[id] = e.what();
        }
      }
    }
    std::lock_guard lock(mutex_);
    snapshot_ = std::move(next);
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_;
  }

  /// Looks up `id`, rescanning the directory once on a miss.
  std::shared_ptr<const TrainedModel> find(const std::string& id) {
    if (auto m = lookup(id)) return m;
    reload();
    return lookup(id);
  }

  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::shared_ptr<const TrainedModel> lookup(const std::string& id) const {
    const auto snap = snapshot();
    const auto it = snap->models.find(id);
    return it == snap->models.end() ? nullptr : it->second;
  }

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
};

class ForecastService {
 public:
  ForecastService(ModelStore& store, const WeatherProvider& provider, Clock clock,
                  GeoLocation where = {})
      : store_(store), provider_(provider), clock_(std::move(clock)), where_(where) {}

  std::vector<ForecastPoint> forecast(const std::string& model_id, int hours,
                                      bool clamp = false) const {
    const auto model = store_.find(model_id);
    if (!model) fail(ErrorCode::not_found, "unknown model '" + model_id + "'");
    const auto temps = fetch_hourly_temperature(provider_, where_, hours, clock_());
    std::vector<ForecastPoint> out;
    out.reserve(temps.size());
    for (const auto& t : temps) {
      const auto row = feature_row(t.timestamp, t.temperature, model->features);
      double predicted = model->predict(row);
      if (!std::isfinite(predicted))
        fail(ErrorCode::invalid_argument, "model produced a non-finite prediction");
      if (clamp) predicted = std::max(0.0, predicted);
      out.push_back({t.timestamp, t.temperature, predicted, model_id});
    }
    return out;
  }

  ModelStore& store() const { return store_; }

 private:
  ModelStore& store_;
  const WeatherProvider& provider_;
  Clock clock_;
  GeoLocation where_;
};

inline nlohmann::json forecast_json(const std::vector<ForecastPoint>& points) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : points)
    arr.push_back({{"timestamp", p.timestamp.to_string()},
                   {"temperature_k", p.temperature},
                   {"predicted_wm2", p.predicted_irradiance}});
  return arr;
}

inline nlohmann::json models_json(const ModelStore::Snapshot& snap) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [id, m] : snap.models) {
    arr.push_back({{"model_id", id},
                   {"kind", to_string(m->kind)},
                   {"display_name", m->display_name},
                   {"features", m->features.to_string()},
                   {"trained_at", m->trained_at},
                   {"metrics", m->metrics ? metrics_json(*m->metrics) : nlohmann::json(nullptr)}});
  }
  return arr;
}

/// HTTP routes over a ForecastService. `/evaluation` serves
/// `<model_dir>/evaluation.json` as written by the `evaluate` command.
class HttpFrontend {
 public:
  explicit HttpFrontend(ForecastService& service) : service_(service) { install_routes(); }

  httplib::Server& server() { return server_; }

  /// Binds to `host:port` (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) fail(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  void serve() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& code,
                         const std::string& message) {
    send_json(res, status, {{"code", code}, {"message", message}});
  }

  static int status_for(ErrorCode code) {
    switch (code) {
      case ErrorCode::not_found: return 404;
      case ErrorCode::invalid_argument: return 400;
      case ErrorCode::network: return 502;
      case ErrorCode::parse: return 502;
      case ErrorCode::config: return 503;
      default: return 500;
    }
  }

  void install_routes() {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });

    server_.Get("/models", [this](const httplib::Request&, httplib::Response& res) {
      service_.store().reload();
      send_json(res, 200, models_json(*service_.store().snapshot()));
    });

    server_.Get("/forecast", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("model")) {
        send_error(res, 400, "invalid_argument", "query parameter 'model' is required");
        return;
      }
      int hours = 24;
      if (req.has_param("hours")) {
        const auto v = parse_int(req.get_param_value("hours"));
        if (!v || *v < 1 || *v > kMaxForecastHours) {
          send_error(res, 400, "invalid_argument", "hours must be an integer in 1..168");
          return;
        }
        hours = static_cast<int>(*v);
      }
      bool clamp = false;
      if (req.has_param("clamp")) {
        const auto v = req.get_param_value("clamp");
        if (v == "true" || v == "1") clamp = true;
        else if (v == "false" || v == "0") clamp = false;
        else {
          send_error(res, 400, "invalid_argument", "clamp must be true or false");
          return;
        }
      }
      try {
        send_json(res, 200, forecast_json(service_.forecast(req.get_param_value("model"), hours, clamp)));
      } catch (const NetworkError& e) {
        send_json(res, 502, {{"code", to_string(e.code())},
                             {"message", e.what()},
                             {"upstream_status", e.status()},
                             {"retryable", e.retryable()}});
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), to_string(e.code()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    });

    server_.Get("/evaluation", [this](const httplib::Request&, httplib::Response& res) {
      const auto path = service_.store().directory() / "evaluation.json";
      std::error_code ec;
      if (!std::filesystem::exists(path, ec)) {
        send_error(res, 404, "not_found", "no evaluation report in model directory");
        return;
      }
      try {
        send_json(res, 200, nlohmann::json::parse(read_file(path)));
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", std::string("unreadable evaluation report: ") + e.what());
      }
    });

    server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, "http_" + std::to_string(res.status), "request failed");
    });
  }

  ForecastService& service_;
  httplib::Server server_;
};

}  // namespace heliocast
