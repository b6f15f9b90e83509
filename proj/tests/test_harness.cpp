#include <gtest/gtest.h>

#include "heliocast/harness.hpp"
#include "support.hpp"

using namespace heliocast;

namespace {

const Dataset& two_day_data() {
  static const Dataset ds = extract_features(generate_synthetic(2, 17), FeatureSpec{});
  return ds;
}

std::vector<ModelSpec> light_suite() {
  auto suite = default_model_suite();
  std::get<ForestConfig>(suite[6].params).tree_count = 10;
  for (auto& s : suite)
    if (auto* p = std::get_if<SvrParams>(&s.params)) p->subsample = 200;
  return suite;
}

}  // namespace

TEST(Suite, MatchesReferenceConfiguration) {
  const auto suite = default_model_suite();
  ASSERT_EQ(suite.size(), 8u);
  const std::vector<std::string> names{"Linear Regression",       "Polynomial Regression",
                                       "K-Nearest Neighbors",     "Decision Tree Regressor",
                                       "SVR Kernel Linear",       "SVR Kernel RBF",
                                       "Random Forest Regressor", "Gradient Boosting Regressor"};
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(suite[i].display_name, names[i]);
    EXPECT_EQ(suite[i].kind, kAllModelKinds[i]);
    suite[i].validate();
  }
  EXPECT_EQ(std::get<LinearParams>(suite[1].params).degree, 2);
  EXPECT_EQ(std::get<KnnParams>(suite[2].params).k, 10u);
  EXPECT_EQ(std::get<TreeConfig>(suite[3].params).max_depth, 3);
  EXPECT_EQ(std::get<TreeConfig>(suite[3].params).seed, 42u);
  EXPECT_EQ(std::get<SvrParams>(suite[4].params).svr.kernel.kind, KernelKind::linear);
  EXPECT_EQ(std::get<SvrParams>(suite[5].params).svr.kernel.kind, KernelKind::polynomial);
  EXPECT_EQ(std::get<ForestConfig>(suite[6].params).tree_count, 100u);
  EXPECT_EQ(std::get<ForestConfig>(suite[6].params).seed, 42u);
  const auto& gbr = std::get<GbrConfig>(suite[7].params);
  EXPECT_EQ(gbr.learning_rate, 0.2);
  EXPECT_EQ(gbr.stage_count, 100u);
  EXPECT_EQ(gbr.max_depth, 5);
  EXPECT_EQ(std::get<SvrParams>(default_model_suite(true)[5].params).svr.kernel.kind, KernelKind::rbf);
}

TEST(Comparison, MeanStubScoresNearZero) {
  Rng rng(91);
  const auto ds = testsupport::random_dataset(rng, 400, 1);
  auto named = ds;
  named.feature_names = {"temperature"};
  // A zero-stage boosting model predicts the training mean.
  ModelSpec stub{ModelKind::gbr, GbrConfig{0, 0.2, 5, 2, 42}, "mean"};
  const auto report = run_comparison(named, {stub});
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_NEAR(report.rows[0].metrics->r2.value(), 0.0, 0.05);
}

TEST(Comparison, RowsInOrderWithFailuresIsolated) {
  auto suite = light_suite();
  suite.insert(suite.begin() + 1, ModelSpec{ModelKind::knn, KnnParams{0, false}, "Broken KNN"});
  const auto report = run_comparison(two_day_data(), suite);
  ASSERT_EQ(report.rows.size(), 9u);
  EXPECT_EQ(report.rows[1].display_name, "Broken KNN");
  EXPECT_FALSE(report.rows[1].metrics);
  EXPECT_FALSE(report.rows[1].failure.empty());
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    if (i == 1) continue;
    EXPECT_EQ(report.rows[i].display_name, suite[i].display_name);
    const auto& m = report.rows[i].metrics;
    ASSERT_TRUE(m) << report.rows[i].failure;
    EXPECT_NEAR(m->rmse * m->rmse, m->mse, 1e-9 * m->mse);
    EXPECT_LE(m->mae, m->rmse);
    EXPECT_LE(m->r2.value(), 1.0);
  }
  EXPECT_EQ(report.train_size + report.test_size, two_day_data().size());
  const auto csv = report_csv(report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,mse,rmse,mae,r2");
  EXPECT_NE(csv.find("\nBroken KNN,,,,\n"), std::string::npos);
}

TEST(Comparison, FootnotesDescribeSvrPolicy) {
  const auto report = run_comparison(two_day_data(), light_suite());
  std::string all;
  for (const auto& f : report.footnotes) all += f + "\n";
  EXPECT_NE(all.find("SVR Kernel Linear: trained on a target-stratified subsample of 200"), std::string::npos);
  EXPECT_NE(all.find("polynomial kernel"), std::string::npos);
  EXPECT_NE(all.find("0.72"), std::string::npos);
  EXPECT_NE(all.find("0.76"), std::string::npos);
  EXPECT_EQ(report.rows[4].train_rows, 200u);
}

TEST(Comparison, Deterministic) {
  const auto a = run_comparison(two_day_data(), light_suite());
  const auto b = run_comparison(two_day_data(), light_suite(), ComparisonOptions{0.8, 42, false});
  EXPECT_EQ(report_csv(a), report_csv(b));
  EXPECT_EQ(report_text(a), report_text(b));
  EXPECT_EQ(report_json(a).dump(), report_json(b).dump());
  EXPECT_EQ(a.fingerprint, two_day_data().fingerprint());
}

TEST(Comparison, TextMirrorsTableColumns) {
  const auto text = report_text(run_comparison(two_day_data(), light_suite()));
  const auto header = text.find("Model");
  ASSERT_NE(header, std::string::npos);
  const auto line = text.substr(header, text.find('\n', header) - header);
  EXPECT_LT(line.find("MSE"), line.find("RMSE"));
  EXPECT_LT(line.find("RMSE"), line.find("MAE"));
  EXPECT_LT(line.find("MAE"), line.find("R^2"));
  EXPECT_NE(text.find("13112.21"), std::string::npos);
}

TEST(PlotData, ConstantModelAndShape) {
  auto records = generate_synthetic(2, 3, Timestamp{2020, 5, 1});
  TrainedModel stub;
  stub.kind = ModelKind::tree;
  stub.display_name = "stub";
  stub.fitted = RegressionTree::leaf(42.0, 2);
  const auto series = export_plot_data(stub, records, Timestamp{2020, 5, 2});
  ASSERT_EQ(series.points.size(), 288u);
  for (std::size_t i = 0; i < series.points.size(); ++i) {
    EXPECT_EQ(series.points[i].predicted, 42.0);
    if (i > 0) {
      EXPECT_LT(series.points[i - 1].timestamp, series.points[i].timestamp);
    }
  }
  EXPECT_THROW(export_plot_data(stub, records, Timestamp{2021, 1, 1}), Error);
  const auto csv = plot_csv(series);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "timestamp,actual_wm2,predicted_wm2,temperature_k");
}

TEST(PlotData, TwelveRecordsSortedAndDuplicatesRejected) {
  std::vector<Record> records;
  for (int i = 11; i >= 0; --i) records.push_back({Timestamp{2020, 5, 2, 10, i * 5}, 100.0 + i, 300.0});
  records.push_back({Timestamp{2020, 5, 3, 10}, 5, 300});
  TrainedModel stub;
  stub.fitted = RegressionTree::leaf(1.0, 2);
  const auto series = export_plot_data(stub, records, Timestamp{2020, 5, 2});
  ASSERT_EQ(series.points.size(), 12u);
  EXPECT_EQ(series.points.front().actual, 100.0);
  records.push_back({Timestamp{2020, 5, 2, 10, 0}, 1, 300});
  EXPECT_THROW(export_plot_data(stub, records, Timestamp{2020, 5, 2}), Error);
}

TEST(Synthetic, ShapeAndDeterminism) {
  const auto day = generate_synthetic(1, 7);
  ASSERT_EQ(day.size(), 288u);
  EXPECT_EQ(day, generate_synthetic(1, 7));
  EXPECT_NE(day, generate_synthetic(1, 8));
  for (std::size_t i = 0; i < day.size(); ++i) {
    const auto& r = day[i];
    EXPECT_EQ(r.timestamp.hour * 12 + r.timestamp.minute / 5, int(i));
    EXPECT_GE(r.irradiance, -9.0);
    EXPECT_LE(r.irradiance, 1459.0 + 50.0);
    EXPECT_GT(r.temperature, 280.0);
    const double hour = r.timestamp.hour + r.timestamp.minute / 60.0;
    if (hour <= 6.0 || hour > 18.0) {
      EXPECT_LE(r.irradiance, 0.0) << r.timestamp.to_string();
    }
  }
  EXPECT_THROW(generate_synthetic(0, 1), Error);
}

TEST(Synthetic, TemperatureFollowsDiurnalShape) {
  const auto recs = generate_synthetic(3, 11);
  for (std::size_t d = 0; d < 3; ++d) {
    // Offset is shared within a day, so noon minus 6:00 isolates the 6 K swing.
    const auto& six = recs[d * 288 + 6 * 12];
    const auto& noon = recs[d * 288 + 12 * 12];
    EXPECT_NEAR(noon.temperature - six.temperature, 6.0, 0.011);
  }
}

TEST(Synthetic, HourlyTemperatureCsv) {
  const auto csv = hourly_temperature_csv(generate_synthetic(1, 1));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "month,hour,mean_temperature_k,count");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 25);
}
